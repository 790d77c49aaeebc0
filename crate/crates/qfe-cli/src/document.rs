//! Result documents: a fixed tabular schema rendered to CSV or JSON, with
//! the resolved configuration, the code version, and (for solver runs) the
//! circuit-count block embedded in every output.
//!
//! Rendering is deterministic: fields serialize in declaration order, count
//! maps are ordered, and floats print in shortest round-trip form, so
//! identical configuration and seed produce byte-identical files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::Format;
use crate::CliError;

/// Code version stamped into every output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Circuit executions of one run, split by label, with per-step totals.
#[derive(Debug, Clone, Serialize)]
pub struct CountsBlock {
    /// Executions per circuit label (empty in exact mode).
    pub counts: BTreeMap<String, u64>,
    /// Total executions.
    pub total: u64,
    /// Tangent-solve steps taken across all solved instances.
    pub steps: u64,
    /// Executions per step (0 when nothing ran circuits).
    pub per_step: u64,
}

impl CountsBlock {
    /// Builds the block from a counter snapshot and the step total.
    pub fn new(counts: BTreeMap<String, u64>, steps: u64) -> Self {
        let total: u64 = counts.values().sum();
        let per_step = if steps == 0 { 0 } else { total / steps };
        Self {
            counts,
            total,
            steps,
            per_step,
        }
    }
}

/// One tabular result: named columns, float rows, and the provenance header.
#[derive(Debug, Clone, Serialize)]
pub struct Document<C: Serialize> {
    /// Code version string.
    pub version: &'static str,
    /// The full resolved configuration behind this output.
    pub config: C,
    /// Circuit-count block (solver runs only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<CountsBlock>,
    /// Column names, in row order.
    pub columns: Vec<String>,
    /// One row per record.
    pub rows: Vec<Vec<f64>>,
}

impl<C: Serialize> Document<C> {
    /// Renders the document in `format`.
    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// CSV with `#`-prefixed provenance lines, then header and data rows.
    fn to_csv(&self) -> Result<String, CliError> {
        let mut out = String::new();
        out.push_str(&format!("# qfe {}\n", self.version));
        out.push_str(&format!("# config: {}\n", to_compact_json(&self.config)?));
        if let Some(counts) = &self.counts {
            out.push_str(&format!("# counts: {}\n", to_compact_json(&counts.counts)?));
            out.push_str(&format!(
                "# circuits: total={} steps={} per_step={}\n",
                counts.total, counts.steps, counts.per_step
            ));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    /// Pretty-printed JSON mirroring the CSV schema.
    fn to_json(&self) -> Result<String, CliError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::config(format!("cannot serialize output: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    /// Renders and writes to `output`, or to stdout when `output` is `None`.
    pub fn write(&self, format: Format, output: Option<&Path>) -> Result<(), CliError> {
        let text = self.render(format)?;
        match output {
            Some(path) => std::fs::write(path, text).map_err(|e| {
                CliError::config(format!("cannot write output file {}: {e}", path.display()))
            }),
            None => {
                let stdout = std::io::stdout();
                stdout
                    .lock()
                    .write_all(text.as_bytes())
                    .map_err(|e| CliError::config(format!("cannot write to stdout: {e}")))
            }
        }
    }
}

fn to_compact_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string(value)
        .map_err(|e| CliError::config(format!("cannot serialize output: {e}")))
}

/// Column names `prefix_0 .. prefix_{n-1}`.
pub fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}
