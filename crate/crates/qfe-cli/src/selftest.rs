//! The `selftest` verb: the numerical hygiene suite, one line per check.

use crate::CliError;

pub fn cmd_selftest(seed: u64) -> Result<(), CliError> {
    let reports = qfe_core::run_all(seed);
    for report in &reports {
        println!("{report}");
    }
    if qfe_core::all_passed(&reports) {
        println!("selftest: all {} checks passed", reports.len());
        Ok(())
    } else {
        let failed = reports.iter().filter(|r| !r.passed()).count();
        Err(CliError::solver(format!(
            "selftest: {failed} of {} checks failed",
            reports.len()
        )))
    }
}
