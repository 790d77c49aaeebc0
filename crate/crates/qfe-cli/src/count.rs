//! The `count` verb: evaluate the per-step circuit-budget formulas without
//! running anything.
//!
//! One tangent solve needs `(M+1)^2` overlap circuits for the metric plus
//! `P(M+1)` for the generator projections, where `P` is `4^n` when every
//! Pauli string is measured separately and at most `4` (one per coefficient
//! phase class) when strings are selected through the coefficient register.

use serde::Serialize;

use crate::config::Format;
use crate::document::VERSION;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct CountReport {
    pub version: &'static str,
    pub qubits: usize,
    pub params: usize,
    pub original: u64,
    pub parallel: u64,
    pub ratio: f64,
}

/// Evaluates both budgets. `qubits` may be 0 (a bare magnitude parameter):
/// both budgets then degenerate to `(M+1)^2 + (M+1)`.
pub fn evaluate(qubits: usize, params: usize) -> Result<CountReport, CliError> {
    if qubits > 26 {
        return Err(CliError::config(format!(
            "qubits must be at most 26 (4^n circuits overflow beyond that), got {qubits}"
        )));
    }
    if params > 1 << 20 {
        return Err(CliError::config(format!(
            "params must be at most 2^20, got {params}"
        )));
    }
    let m1 = params as u64 + 1;
    let strings = 4u64.pow(qubits as u32);
    let original = m1 * m1 + strings * m1;
    let parallel = m1 * m1 + strings.min(4) * m1;
    Ok(CountReport {
        version: VERSION,
        qubits,
        params,
        original,
        parallel,
        ratio: original as f64 / parallel as f64,
    })
}

pub fn cmd_count(qubits: usize, params: usize, format: Format) -> Result<(), CliError> {
    let report = evaluate(qubits, params)?;
    match format {
        Format::Csv => {
            println!("qfe {}", report.version);
            println!(
                "per-step circuit budget for n = {} qubits, M = {} parameters",
                report.qubits, report.params
            );
            println!(
                "original: (M+1)^2 + 4^n (M+1) = {}",
                report.original
            );
            println!(
                "parallel: (M+1)^2 + min(4, 4^n) (M+1) = {}",
                report.parallel
            );
            println!("ratio: {:.4}", report.ratio);
        }
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::config(format!("cannot serialize report: {e}")))?;
            text.push('\n');
            print!("{text}");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_budgets_match_the_headline_numbers() {
        let report = evaluate(2, 4).unwrap();
        assert_eq!(report.original, 105);
        assert_eq!(report.parallel, 45);
        assert!((report.ratio - 105.0 / 45.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_budget_is_two() {
        let report = evaluate(0, 0).unwrap();
        assert_eq!(report.original, 2);
        assert_eq!(report.parallel, 2);
    }

    #[test]
    fn parallel_never_exceeds_original() {
        for n in 0..=6 {
            for m in [0usize, 1, 4, 9, 64] {
                let report = evaluate(n, m).unwrap();
                assert!(report.parallel <= report.original);
            }
        }
    }

    #[test]
    fn overflow_guards_reject_oversize_inputs() {
        assert!(evaluate(27, 4).is_err());
        assert!(evaluate(2, (1 << 20) + 1).is_err());
    }
}
