//! Result files and witness files.
//!
//! Every experiment renders to CSV with a comment preamble: format tag,
//! module, binary version, master seed, the full generating config as one
//! JSON line, then operation-specific notes. The volatile lines (wall-clock
//! timestamp and runtime) come last so two runs of the same config diff
//! cleanly except for the tail. Files are written to a temporary name in the
//! destination directory and renamed into place, so a crash mid-write never
//! leaves a truncated file behind.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use problab_core::bunkbed::BunkbedReport;
use problab_core::forests::PairAssociationReport;
use problab_core::{Error, Result};

use crate::config::ExperimentConfig;

/// Format tag on the first line of every CSV output.
pub const CSV_FORMAT: &str = "problab-csv/1";

/// Format tag on the first line of every witness file.
pub const WITNESS_FORMAT: &str = "problab-witness/1";

const CONFIG_PREFIX: &str = "# config: ";

/// A rendered experiment: provenance, notes, and the data table.
#[derive(Debug, Clone)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    /// Operation-specific summary lines, emitted as `# key: value`.
    pub notes: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub runtime_ms: u128,
}

impl ResultRecord {
    pub fn new(config: &ExperimentConfig, columns: Vec<&'static str>) -> ResultRecord {
        ResultRecord {
            config: config.clone(),
            notes: Vec::new(),
            columns,
            rows: Vec::new(),
            runtime_ms: 0,
        }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn push_row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len(), "row width mismatch");
        self.rows.push(cells);
    }

    /// The full file contents. Deterministic except for the volatile tail.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {CSV_FORMAT}");
        let _ = writeln!(out, "# module: {}", self.config.op.module());
        let _ = writeln!(out, "# operation: {}", self.config.op.kind());
        let _ = writeln!(out, "# version: {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# seed: {}", self.config.seed);
        let _ = writeln!(out, "{CONFIG_PREFIX}{}", self.config.to_json());
        for (key, value) in &self.notes {
            let _ = writeln!(out, "# {key}: {value}");
        }
        let _ = writeln!(out, "# timestamp_unix: {}", now_unix());
        let _ = writeln!(out, "# runtime_ms: {}", self.runtime_ms);
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| csv_escape(c)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Quote a cell if it holds a comma, quote, or newline (RFC 4180 style).
fn csv_escape(cell: &str) -> String {
    if cell.contains(',') || cell.contains('"') || cell.contains('\n') {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Write `content` to `path` atomically: temp file in the same directory,
/// flush, then rename over the destination.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?
        .to_string_lossy()
        .to_string();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| -> Result<()> {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(content.as_bytes())?;
        file.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Recover the embedded config from a previous output file, or parse the
/// text as a bare config document.
pub fn extract_config(text: &str) -> Result<ExperimentConfig> {
    for line in text.lines() {
        if let Some(json) = line.strip_prefix(CONFIG_PREFIX) {
            return ExperimentConfig::from_json(json.trim());
        }
    }
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        return ExperimentConfig::from_json(trimmed);
    }
    Err(Error::Parse(
        "no embedded config found: expected a previous output file \
         (with a '# config: {...}' line) or a bare JSON config"
            .into(),
    ))
}

/// Witness text for a bunkbed violation: the graph, the vertex pair, the
/// edge probability, and both exact connection probabilities.
pub fn render_bunkbed_witness(graph6: &str, report: &BunkbedReport) -> String {
    let w = &report.witness;
    let mut out = String::new();
    let _ = writeln!(out, "{WITNESS_FORMAT}");
    let _ = writeln!(out, "kind: bunkbed-gap");
    let _ = writeln!(out, "graph6: {graph6}");
    let _ = writeln!(out, "u: {}", w.u);
    let _ = writeln!(out, "v: {}", w.v);
    let _ = writeln!(out, "p: {}", w.p);
    let _ = writeln!(out, "same_sheet: {}", w.p11.value());
    let _ = writeln!(out, "cross_sheet: {}", w.p12.value());
    let _ = writeln!(out, "gap: {}", report.min_gap);
    let _ = writeln!(out, "violation: {}", report.violation);
    out
}

/// Witness text for a positively associated edge pair in a subgraph family.
pub fn render_forest_witness(graph6: &str, report: &PairAssociationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{WITNESS_FORMAT}");
    let _ = writeln!(out, "kind: positive-association");
    let _ = writeln!(out, "family: {}", report.family);
    let _ = writeln!(out, "graph6: {graph6}");
    if let Some(w) = &report.witness {
        let _ = writeln!(out, "edge_e: {}-{}", w.e.0, w.e.1);
        let _ = writeln!(out, "edge_f: {}-{}", w.f.0, w.f.1);
        let _ = writeln!(out, "joint: {}", w.joint);
        let _ = writeln!(out, "product: {}", w.product);
    }
    let _ = writeln!(out, "max_excess: {}", report.max_excess);
    let _ = writeln!(out, "violation: {}", report.violation);
    out
}
