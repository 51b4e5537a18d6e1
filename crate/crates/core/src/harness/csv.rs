//! Metric CSV files: `#`-comment provenance header, one column header line,
//! one row per record. Floats are written with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use super::{MetricRecord, RunError};

pub const HEADER: &str = "iter,queries_per_node,f_bar,grad_sq,consensus_err,wall_ms";

/// Render records with each line of `provenance` as a leading `# ` comment.
pub fn render_csv(provenance: &str, records: &[MetricRecord]) -> Result<String, RunError> {
    if records.is_empty() {
        return Err(RunError::Config("refusing to write an empty metric stream".into()));
    }
    let mut s = String::new();
    for line in provenance.lines() {
        let _ = writeln!(s, "# {line}");
    }
    s.push_str(HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{:.16e},{:.16e},{:.16e},{}",
            r.iter, r.queries_per_node, r.f_bar, r.grad_sq, r.consensus_err, r.wall_ms
        );
    }
    Ok(s)
}

pub fn emit_csv(path: &Path, provenance: &str, records: &[MetricRecord]) -> Result<(), RunError> {
    let text = render_csv(provenance, records)?;
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, text).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

/// Parsed file: comment lines (without `# `) and records.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<MetricRecord>), RunError> {
    let mut comments = Vec::new();
    let mut records = Vec::new();
    let mut seen_header = false;
    for (ln, line) in text.lines().enumerate() {
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
            continue;
        }
        if !seen_header {
            if line.trim() != HEADER {
                return Err(RunError::Config(format!("line {}: unexpected header `{line}`", ln + 1)));
            }
            seen_header = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let err = || RunError::Config(format!("line {}: malformed row", ln + 1));
        if f.len() != 6 {
            return Err(err());
        }
        records.push(MetricRecord {
            iter: f[0].parse().map_err(|_| err())?,
            queries_per_node: f[1].parse().map_err(|_| err())?,
            f_bar: f[2].parse().map_err(|_| err())?,
            grad_sq: f[3].parse().map_err(|_| err())?,
            consensus_err: f[4].parse().map_err(|_| err())?,
            wall_ms: f[5].parse().map_err(|_| err())?,
        });
    }
    Ok((comments, records))
}
