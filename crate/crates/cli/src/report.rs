//! Merges finished runs into one bound comparison table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nrm_core::{NrmError, RunTrace};

use crate::manifest::RunManifest;
use crate::{exit, ReportArgs};

pub const REPORT_HEADER: &str = "method,instance,K,UB,LB,LB_se,gap_pct,stop,wall_s";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub hash: String,
    pub k: usize,
    /// Smallest bound over the trace: the exhaustive bound where one was computed.
    pub ub: f64,
    /// Best simulated policy revenue.
    pub lb: f64,
    pub lb_se: f64,
    pub stop: String,
    pub wall_s: f64,
}

impl ReportRow {
    pub fn gap_pct(&self) -> f64 {
        100.0 * (self.ub - self.lb) / self.ub.abs().max(f64::MIN_POSITIVE)
    }

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.4},{},{:.3}",
            self.method,
            &self.hash[..12.min(self.hash.len())],
            self.k,
            self.ub,
            self.lb,
            self.lb_se,
            self.gap_pct(),
            self.stop,
            self.wall_s
        )
    }
}

fn manifest_path(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.join("manifest.json")
    } else {
        input.to_path_buf()
    }
}

/// Reads the trace named in a manifest. Outputs are looked up next to the
/// manifest first so that moved result directories still load.
fn load_trace(m: &RunManifest, manifest: &Path) -> Result<RunTrace> {
    let recorded = m
        .outputs
        .iter()
        .find(|p| p.file_name().is_some_and(|n| n == "trace.csv"))
        .with_context(|| format!("{} lists no trace.csv", manifest.display()))?;
    let beside = manifest.parent().unwrap_or(Path::new(".")).join("trace.csv");
    let path = if beside.exists() { beside } else { recorded.clone() };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(RunTrace::read_csv(&text)?)
}

pub fn row_for(m: &RunManifest, trace: &RunTrace) -> Result<ReportRow> {
    if trace.rows.is_empty() {
        bail!(NrmError::Validation("trace has no rows".into()));
    }
    let ub = trace.rows.iter().map(|r| r.zbar.unwrap_or(r.zhat)).fold(f64::INFINITY, f64::min);
    let best = trace.rows.iter().max_by(|a, b| a.rbar.total_cmp(&b.rbar)).expect("nonempty");
    let text = |key: &str| m.summary.get(key).and_then(|v| v.as_str()).map(str::to_string);
    Ok(ReportRow {
        method: text("method").unwrap_or_else(|| m.command.clone()),
        hash: m.instance.hash.clone(),
        k: trace.rows.last().map_or(0, |r| r.k),
        ub,
        lb: best.rbar,
        lb_se: best.se,
        stop: text("stop").unwrap_or_else(|| "-".into()),
        wall_s: m.wall_s,
    })
}

pub fn report(a: &ReportArgs) -> Result<u8> {
    let mut rows = Vec::new();
    for input in &a.inputs {
        let path = manifest_path(input);
        let m = RunManifest::load(&path).map_err(|e| e.context(NrmError::Parse(format!("bad manifest {}", path.display()))))?;
        let trace = load_trace(&m, &path)?;
        rows.push(row_for(&m, &trace)?);
    }
    if let Some(other) = rows.iter().find(|r| r.hash != rows[0].hash) {
        bail!(NrmError::Validation(format!(
            "runs are on different instances ({} vs {}); report compares one instance at a time",
            rows[0].hash, other.hash
        )));
    }
    let mut out = String::new();
    writeln!(out, "{REPORT_HEADER}")?;
    for r in &rows {
        writeln!(out, "{}", r.csv())?;
    }
    match &a.out {
        Some(p) => fs::write(p, out).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{out}"),
    }
    Ok(exit::OK)
}
