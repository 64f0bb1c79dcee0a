//! Outer loops: affine baseline fitting, row generation, and the two ways of
//! growing the ridge basis.

mod drivers;
mod rowgen;

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use drivers::{h2pialg, h2pialg_with, nlialg, nlialg_with, solve_aa, AaResult, BasisEvent, RunResult, StopReason};
pub use rowgen::{estimate_bounds, row_generation, Bounds, RowGenOutcome};

use crate::error::{NrmError, Result};
use crate::model::Instance;
use crate::simulate::SimOptions;
use crate::subproblem::{SearchMode, SearchOptions};

/// Lattices up to this size are searched exhaustively unless configured otherwise.
pub const EXACT_STATE_LIMIT: u128 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Ridge functions on a zero baseline.
    Standalone,
    /// Ridge functions on top of a fitted affine baseline.
    Addon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgoConfig {
    pub omega_gap: f64,
    pub omega_policy: f64,
    pub omega_pgap: f64,
    pub subproblem_time_limit_s: f64,
    pub basis_time_limit_s: f64,
    pub max_k: usize,
    pub max_wall_s: Option<f64>,
    /// Random starts per local subproblem search (besides `c` and `0`).
    pub subproblem_starts: usize,
    pub basis_starts: usize,
    /// Starting directions per new basis in the nonlinear variant.
    pub nli_starts: usize,
    pub seed: u64,
    pub mode: Mode,
    pub monotonicity_rows_at_k1: bool,
    /// `None` chooses exhaustive search when the lattice is small enough.
    pub exact_subproblems: Option<bool>,
    /// Restrict affine bid prices to be nonnegative.
    pub aa_nonneg: bool,
    /// Weighted imbalance at or below which no new direction is added.
    pub imbalance_tol: f64,
    /// Row-generation rounds per master before giving up.
    pub max_rounds: usize,
    pub sim_n_max: usize,
    pub sim_n_min: usize,
    /// Compute the exhaustive upper bound after every `K` when searches are exact.
    pub zbar: bool,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            omega_gap: 0.001,
            omega_policy: 0.001,
            omega_pgap: 0.01,
            subproblem_time_limit_s: 5.0,
            basis_time_limit_s: 30.0,
            max_k: 12,
            max_wall_s: None,
            subproblem_starts: 8,
            basis_starts: 20,
            nli_starts: 3,
            seed: 0,
            mode: Mode::Standalone,
            monotonicity_rows_at_k1: true,
            exact_subproblems: None,
            aa_nonneg: true,
            imbalance_tol: 1e-6,
            max_rounds: 500,
            sim_n_max: 200_000,
            sim_n_min: 500,
            zbar: true,
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("omega_gap", self.omega_gap), ("omega_policy", self.omega_policy), ("omega_pgap", self.omega_pgap)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(NrmError::Validation(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        let positive = self.subproblem_time_limit_s > 0.0
            && self.basis_time_limit_s > 0.0
            && self.max_wall_s.is_none_or(|w| w > 0.0)
            && self.max_k > 0
            && self.basis_starts > 0
            && self.nli_starts > 0
            && self.max_rounds > 0
            && self.imbalance_tol >= 0.0;
        if !positive {
            return Err(NrmError::Validation("limits, start counts and max_k must be positive".into()));
        }
        if self.sim_n_max < 2 || self.sim_n_min < 2 {
            return Err(NrmError::Validation("simulation needs at least 2 replications".into()));
        }
        Ok(())
    }

    pub fn exact_search(&self, inst: &Instance) -> bool {
        self.exact_subproblems.unwrap_or(inst.lattice_size() <= EXACT_STATE_LIMIT)
    }

    pub fn search_options(&self, inst: &Instance, seed: u64) -> SearchOptions {
        SearchOptions {
            mode: if self.exact_search(inst) { SearchMode::Exact } else { SearchMode::Local },
            time_limit: Duration::from_secs_f64(self.subproblem_time_limit_s),
            random_starts: self.subproblem_starts,
            seed,
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            omega_policy: self.omega_policy,
            n_max: self.sim_n_max,
            n_min: self.sim_n_min,
            ..SimOptions::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: AlgoConfig = serde_json::from_str(text).map_err(|e| NrmError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Wall-clock budget shared by a run.
#[derive(Debug, Clone, Copy)]
pub struct Clock {
    start: Instant,
    limit: Option<Duration>,
}

impl Clock {
    pub fn new(limit_s: Option<f64>) -> Self {
        Clock { start: Instant::now(), limit: limit_s.map(Duration::from_secs_f64) }
    }

    pub fn elapsed_s(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    pub fn limit(&self) -> Option<Duration> {
        self.limit
    }

    pub fn expired(&self) -> bool {
        self.limit.is_some_and(|l| self.start.elapsed() >= l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "Z_B")]
    pub z_b: f64,
    #[serde(rename = "Zhat")]
    pub zhat: f64,
    #[serde(rename = "Zbar")]
    pub zbar: Option<f64>,
    #[serde(rename = "Rbar")]
    pub rbar: f64,
    #[serde(rename = "Se")]
    pub se: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub rows_total: usize,
    /// Seconds since the run started.
    pub cpu_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str = "K,Z_B,Zhat,Zbar,Rbar,Se,N,rows_total,cpu_s";

impl RunTrace {
    pub fn best_rbar(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.rbar).fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.rows {
            writeln!(out, "{}", csv_line(r))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(TRACE_HEADER) {
            return Err(NrmError::Parse(format!("trace must start with the header {TRACE_HEADER}")));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || NrmError::Parse(format!("trace line {}: {line}", n + 2));
            if f.len() != 9 {
                return Err(bad());
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            rows.push(TraceRow {
                k: f[0].trim().parse().map_err(|_| bad())?,
                z_b: num(f[1])?,
                zhat: num(f[2])?,
                zbar: if f[3].trim().is_empty() { None } else { Some(num(f[3])?) },
                rbar: num(f[4])?,
                se: num(f[5])?,
                n: f[6].trim().parse().map_err(|_| bad())?,
                rows_total: f[7].trim().parse().map_err(|_| bad())?,
                cpu_s: num(f[8])?,
            });
        }
        Ok(RunTrace { rows })
    }
}

pub fn csv_line(r: &TraceRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{:.3}",
        r.k,
        r.z_b,
        r.zhat,
        r.zbar.map(|z| z.to_string()).unwrap_or_default(),
        r.rbar,
        r.se,
        r.n,
        r.rows_total,
        r.cpu_s
    )
}

#[cfg(test)]
mod tests;
