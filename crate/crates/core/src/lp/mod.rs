//! A small dense linear-programming kernel.
//!
//! Problems are stated as `min c.x` over variables with (possibly infinite)
//! bounds and rows of sense `>=`, `<=` or `=`. Row duals follow the
//! sensitivity convention: the dual of a row is `d objective / d rhs`, so a
//! binding `>=` row of a minimisation has a nonnegative dual and a binding
//! `<=` row a nonpositive one.

mod mps;
mod simplex;

use std::collections::HashMap;

pub use mps::write_mps;
pub use simplex::{DenseSimplex, SimplexOptions, Tolerances, WarmStart};

use crate::error::{NrmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    /// Sparse `(variable index, coefficient)` pairs.
    pub coefs: Vec<(usize, f64)>,
}

impl Row {
    pub fn new(name: impl Into<String>, sense: Sense, rhs: f64, coefs: Vec<(usize, f64)>) -> Self {
        Row { name: name.into(), sense, rhs, coefs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// A minimisation LP built incrementally.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    vars: Vec<Variable>,
    rows: Vec<Row>,
    var_names: HashMap<String, usize>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> Result<usize> {
        let name = name.into();
        if self.var_names.contains_key(&name) {
            return Err(NrmError::InvalidArgument(format!("duplicate variable name {name}")));
        }
        if lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY || !cost.is_finite() {
            return Err(NrmError::InvalidArgument(format!("variable {name} has bounds [{lower}, {upper}]")));
        }
        let id = self.vars.len();
        self.var_names.insert(name.clone(), id);
        self.vars.push(Variable { name, lower, upper, cost });
        Ok(id)
    }

    /// A free variable.
    pub fn add_free(&mut self, name: impl Into<String>, cost: f64) -> Result<usize> {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY, cost)
    }

    pub fn add_row(&mut self, row: Row) -> Result<usize> {
        if let Some(&(j, _)) = row.coefs.iter().find(|&&(j, _)| j >= self.vars.len()) {
            return Err(NrmError::InvalidArgument(format!("row {} references variable {j}", row.name)));
        }
        if !row.rhs.is_finite() || row.coefs.iter().any(|(_, a)| !a.is_finite()) {
            return Err(NrmError::InvalidArgument(format!("row {} has non-finite data", row.name)));
        }
        self.rows.push(row);
        Ok(self.rows.len() - 1)
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.vars[var].cost = cost;
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_names.get(name).copied()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, x)| v.cost * x).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for r in &self.rows {
            let a = r.activity(x);
            let v = match r.sense {
                Sense::Ge => r.rhs - a,
                Sense::Le => a - r.rhs,
                Sense::Eq => (a - r.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (v, &x) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        worst
    }

    /// Largest `|dual * slack|` over rows.
    pub fn complementarity_residual(&self, x: &[f64], duals: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(duals)
            .map(|(r, y)| (y * (r.activity(x) - r.rhs)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration-limited",
        })
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values indexed like [`LinearProgram::vars`].
    pub primal: Vec<f64>,
    /// Row duals indexed like [`LinearProgram::rows`].
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Some tight row carries a zero dual, so the dual optimum may not be unique.
    pub dual_degenerate: bool,
    pub(crate) warm: Option<WarmStart>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn primal_by_name(&self, lp: &LinearProgram) -> HashMap<String, f64> {
        lp.vars.iter().zip(&self.primal).map(|(v, &x)| (v.name.clone(), x)).collect()
    }

    pub fn duals_by_name(&self, lp: &LinearProgram) -> HashMap<String, f64> {
        lp.rows.iter().zip(&self.duals).map(|(r, &y)| (r.name.clone(), y)).collect()
    }
}

/// Interface for LP backends, so an external solver can stand in for the
/// built-in simplex.
pub trait LpBackend {
    fn solve(&self, lp: &LinearProgram) -> LpSolution;

    /// Re-solves after rows were appended to `lp`, starting from `prior`.
    fn resolve(&self, lp: &LinearProgram, prior: &LpSolution) -> LpSolution {
        let _ = prior;
        self.solve(lp)
    }
}

/// Solves with the default simplex settings.
pub fn solve(lp: &LinearProgram) -> LpSolution {
    DenseSimplex::default().solve(lp)
}

/// Appends `rows` to `lp` and re-solves from the basis of `prior`.
pub fn add_rows_and_resolve(lp: &mut LinearProgram, rows: Vec<Row>, prior: &LpSolution) -> Result<LpSolution> {
    for r in rows {
        lp.add_row(r)?;
    }
    Ok(DenseSimplex::default().resolve(lp, prior))
}

#[cfg(test)]
mod tests;
