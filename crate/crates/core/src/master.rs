//! The restricted master LP for fixed ridge directions, and its affine
//! counterpart.
//!
//! Both masters fit `vhat_t(x) = psi_t(x) + xi_t + sum_k V[t][k] g_k(x)` with
//! one `>=` row per generated state-action pair,
//!
//! ```text
//! vhat_t(x) - sum_j p_tj [f_j u_j + vhat_{t+1}(x - a_j u_j)] - (1 - P_t) vhat_{t+1}(x) >= 0
//! ```
//!
//! where `vhat_{tau+1} = 0`. The ridge master uses `g_k = -phi_k` and keeps
//! the baseline `psi` fixed; the affine master has no baseline and uses the
//! leg coordinates `g_i(x) = x_i`, so `xi` plays the role of `theta` and `V`
//! of the bid prices `W`.

use std::collections::HashSet;

use crate::error::{NrmError, Result};
use crate::lp::{DenseSimplex, LinearProgram, LpBackend, LpSolution, LpStatus, Row, Sense};
use crate::model::{is_feasible, Action, Instance, State};
use crate::vfa::{AffineBaseline, Approximation, Baseline, RidgeBasis};

/// Generated rows: `lambda[t-1]` holds the state-action pairs of period `t`,
/// `mu[t-1]` the `(leg, state)` monotonicity rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowSets {
    pub lambda: Vec<Vec<(State, Action)>>,
    pub mu: Vec<Vec<(usize, State)>>,
}

impl RowSets {
    pub fn empty(horizon: usize) -> Self {
        RowSets { lambda: vec![Vec::new(); horizon], mu: vec![Vec::new(); horizon] }
    }

    /// `(c, 0)` in the first period and `(c, 0), (0, 0)` afterwards.
    pub fn initial(inst: &Instance) -> Self {
        let mut rows = Self::empty(inst.horizon());
        let none = Action::none(inst.num_products());
        let c = inst.full_state();
        let zero = State::zeros(inst.num_legs());
        rows.lambda[0].push((c.clone(), none.clone()));
        for t in 2..=inst.horizon() {
            rows.lambda[t - 1].push((c.clone(), none.clone()));
            if zero != c {
                rows.lambda[t - 1].push((zero.clone(), none.clone()));
            }
        }
        rows
    }

    pub fn horizon(&self) -> usize {
        self.lambda.len()
    }

    pub fn num_lambda(&self) -> usize {
        self.lambda.iter().map(Vec::len).sum()
    }

    pub fn num_mu(&self) -> usize {
        self.mu.iter().map(Vec::len).sum()
    }

    pub fn total(&self) -> usize {
        self.num_lambda() + self.num_mu()
    }
}

/// Dual values aligned with [`RowSets`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DualSolution {
    pub lambda: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MasterSolution {
    pub approx: Approximation,
    /// `Z_B`, the master optimum including the baseline constant.
    pub objective: f64,
    pub duals: DualSolution,
    pub dual_degenerate: bool,
    pub iterations: usize,
    /// Largest flow imbalance of an in-model direction; zero for the affine master.
    pub flow_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Features {
    Ridge(Vec<RidgeBasis>),
    Affine { nonneg: bool },
}

#[derive(Debug, Clone, Copy)]
enum RowRef {
    Lambda(usize, usize),
    Mu(usize, usize),
}

/// A master LP that accumulates rows and warm-starts its re-solves.
pub struct Master<'a> {
    inst: &'a Instance,
    baseline: Baseline,
    features: Features,
    rows: RowSets,
    lp: LinearProgram,
    row_refs: Vec<RowRef>,
    seen_lambda: HashSet<(usize, State, Action)>,
    seen_mu: HashSet<(usize, usize, State)>,
    last: Option<LpSolution>,
    backend: DenseSimplex,
}

impl<'a> Master<'a> {
    /// Ridge master for fixed directions `bases` on top of `baseline`.
    pub fn ridge(inst: &'a Instance, baseline: Baseline, bases: Vec<RidgeBasis>, rows: &RowSets) -> Result<Self> {
        if let Some(b) = bases.iter().find(|b| b.beta.len() != inst.num_legs()) {
            return Err(NrmError::InvalidArgument(format!(
                "basis has {} components for {} legs",
                b.beta.len(),
                inst.num_legs()
            )));
        }
        Self::build(inst, baseline, Features::Ridge(bases), rows)
    }

    /// Affine master; `nonneg` restricts the bid prices to be nonnegative.
    pub fn affine(inst: &'a Instance, nonneg: bool, rows: &RowSets) -> Result<Self> {
        Self::build(inst, Baseline::Zero, Features::Affine { nonneg }, rows)
    }

    fn build(inst: &'a Instance, baseline: Baseline, features: Features, rows: &RowSets) -> Result<Self> {
        let tau = inst.horizon();
        if rows.horizon() != tau || rows.mu.len() != tau {
            return Err(NrmError::InvalidArgument(format!("row sets cover {} periods, horizon is {tau}", rows.horizon())));
        }
        let mut lp = LinearProgram::new();
        let k = features_len(&features, inst);
        let c = inst.full_state();
        for t in 1..=tau {
            lp.add_free(format!("xi_{t}"), if t == 1 { 1.0 } else { 0.0 })?;
            for kk in 0..k {
                let cost = if t == 1 { feature(&features, kk, &c) } else { 0.0 };
                let name = format!("V_{t}_{}", kk + 1);
                match features {
                    Features::Affine { nonneg: true } => lp.add_var(name, 0.0, f64::INFINITY, cost)?,
                    _ => lp.add_free(name, cost)?,
                };
            }
        }
        let mut m = Master {
            inst,
            baseline,
            features,
            rows: RowSets::empty(tau),
            lp,
            row_refs: Vec::new(),
            seen_lambda: HashSet::new(),
            seen_mu: HashSet::new(),
            last: None,
            backend: DenseSimplex::default(),
        };
        for t in 1..=tau {
            m.add_lambda_rows(t, rows.lambda[t - 1].iter().cloned())?;
            m.add_mu_rows(t, rows.mu[t - 1].iter().cloned())?;
        }
        Ok(m)
    }

    pub fn rows(&self) -> &RowSets {
        &self.rows
    }

    pub fn lp(&self) -> &LinearProgram {
        &self.lp
    }

    pub fn bases(&self) -> &[RidgeBasis] {
        match &self.features {
            Features::Ridge(b) => b,
            Features::Affine { .. } => &[],
        }
    }

    pub fn baseline(&self) -> &Baseline {
        &self.baseline
    }

    fn num_features(&self) -> usize {
        features_len(&self.features, self.inst)
    }

    fn var(&self, t: usize, k: Option<usize>) -> usize {
        let stride = self.num_features() + 1;
        (t - 1) * stride + k.map_or(0, |k| k + 1)
    }

    /// Adds the pairs not already present; returns how many were new.
    pub fn add_lambda_rows(&mut self, t: usize, pairs: impl IntoIterator<Item = (State, Action)>) -> Result<usize> {
        let mut added = 0;
        for (x, u) in pairs {
            if !is_feasible(self.inst, t, &x, &u)? {
                return Err(NrmError::InvalidArgument(format!("pair ({:?}, {:?}) is infeasible in period {t}", x.0, u.0)));
            }
            if !self.seen_lambda.insert((t, x.clone(), u.clone())) {
                continue;
            }
            let row = self.lambda_row(t, &x, &u);
            self.lp.add_row(row)?;
            self.row_refs.push(RowRef::Lambda(t, self.rows.lambda[t - 1].len()));
            self.rows.lambda[t - 1].push((x, u));
            added += 1;
        }
        Ok(added)
    }

    /// Adds monotonicity rows `(i, x)`; returns how many were new.
    pub fn add_mu_rows(&mut self, t: usize, pairs: impl IntoIterator<Item = (usize, State)>) -> Result<usize> {
        let mut added = 0;
        for (i, x) in pairs {
            if matches!(self.features, Features::Affine { .. }) {
                return Err(NrmError::InvalidArgument("the affine master has no monotonicity rows".into()));
            }
            if i >= self.inst.num_legs() || !self.inst.in_lattice(&x) || x.0[i] >= self.inst.capacities()[i] {
                return Err(NrmError::InvalidArgument(format!("monotonicity row ({i}, {:?}) is out of range", x.0)));
            }
            if !self.seen_mu.insert((t, i, x.clone())) {
                continue;
            }
            let row = self.mu_row(t, i, &x);
            self.lp.add_row(row)?;
            self.row_refs.push(RowRef::Mu(t, self.rows.mu[t - 1].len()));
            self.rows.mu[t - 1].push((i, x));
            added += 1;
        }
        Ok(added)
    }

    fn lambda_row(&self, t: usize, x: &State, u: &Action) -> Row {
        let inst = self.inst;
        let tau = inst.horizon();
        let k_n = self.num_features();
        let probs = inst.probs(t);
        let mut coefs = Vec::with_capacity(2 * (k_n + 1));
        coefs.push((self.var(t, None), 1.0));
        for k in 0..k_n {
            coefs.push((self.var(t, Some(k)), feature(&self.features, k, x)));
        }
        let mut rhs = -self.baseline.eval(t, x) + self.baseline.eval(t + 1, x);
        let mut stay = 1.0;
        let mut sold = Vec::new();
        for (j, &p) in probs.iter().enumerate() {
            if u.accepts(j) {
                rhs += p * (inst.fare(j) - self.baseline.sale_drop(inst, t + 1, j));
                stay -= p;
                sold.push((p, inst.after_sale(x, j)));
            }
        }
        if t < tau {
            coefs.push((self.var(t + 1, None), -1.0));
            for k in 0..k_n {
                let next: f64 =
                    sold.iter().map(|(p, y)| p * feature(&self.features, k, y)).sum::<f64>() + stay * feature(&self.features, k, x);
                coefs.push((self.var(t + 1, Some(k)), -next));
            }
        }
        Row::new(format!("lam_{t}_{:?}_{}", x.0, action_code(u)), Sense::Ge, rhs, coefs)
    }

    fn mu_row(&self, t: usize, i: usize, x: &State) -> Row {
        let up = x.plus_one(i);
        let coefs = (0..self.num_features())
            .map(|k| (self.var(t, Some(k)), feature(&self.features, k, &up) - feature(&self.features, k, x)))
            .collect();
        Row::new(format!("mu_{t}_{i}_{:?}", x.0), Sense::Ge, -self.baseline.slope(t, i), coefs)
    }

    /// Solves, warm-starting from the previous solve when there is one.
    pub fn solve(&mut self) -> Result<MasterSolution> {
        let sol = match &self.last {
            Some(prev) => self.backend.resolve(&self.lp, prev),
            None => self.backend.solve(&self.lp),
        };
        if sol.status != LpStatus::Optimal {
            return Err(NrmError::LpStatus(format!(
                "master is {} with {} rows; seed more rows",
                sol.status,
                self.lp.num_rows()
            )));
        }
        let mut out = self.extract(&sol);
        if let Features::Ridge(bases) = &self.features {
            out.flow_residual = crate::flow::max_in_model_imbalance(self.inst, &out.duals, &self.rows, bases)?;
            debug_assert!(out.flow_residual <= 1e-6, "in-model flow imbalance {:.3e}", out.flow_residual);
        }
        self.last = Some(sol);
        Ok(out)
    }

    fn extract(&self, sol: &LpSolution) -> MasterSolution {
        let tau = self.inst.horizon();
        let k_n = self.num_features();
        let xi: Vec<f64> = (1..=tau).map(|t| sol.primal[self.var(t, None)]).collect();
        let v: Vec<Vec<f64>> = (1..=tau).map(|t| (0..k_n).map(|k| sol.primal[self.var(t, Some(k))]).collect()).collect();
        let approx = match &self.features {
            Features::Ridge(bases) => Approximation { baseline: self.baseline.clone(), xi, v, bases: bases.clone() },
            Features::Affine { .. } => Approximation {
                baseline: Baseline::Affine(AffineBaseline { theta: xi, w: v }),
                xi: vec![0.0; tau],
                v: vec![Vec::new(); tau],
                bases: Vec::new(),
            },
        };
        let mut duals = DualSolution {
            lambda: self.rows.lambda.iter().map(|r| vec![0.0; r.len()]).collect(),
            mu: self.rows.mu.iter().map(|r| vec![0.0; r.len()]).collect(),
        };
        for (r, y) in self.row_refs.iter().zip(&sol.duals) {
            match *r {
                RowRef::Lambda(t, i) => duals.lambda[t - 1][i] = *y,
                RowRef::Mu(t, i) => duals.mu[t - 1][i] = *y,
            }
        }
        let objective = sol.objective + self.baseline.eval(1, &self.inst.full_state());
        MasterSolution {
            approx,
            objective,
            duals,
            dual_degenerate: sol.dual_degenerate,
            iterations: sol.iterations,
            flow_residual: 0.0,
        }
    }
}

fn features_len(f: &Features, inst: &Instance) -> usize {
    match f {
        Features::Ridge(b) => b.len(),
        Features::Affine { .. } => inst.num_legs(),
    }
}

fn feature(f: &Features, k: usize, x: &State) -> f64 {
    match f {
        Features::Ridge(b) => -(-b[k].exponent(&x.0)).exp(),
        Features::Affine { .. } => x.0[k] as f64,
    }
}

fn action_code(u: &Action) -> String {
    u.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// The ridge master LP over `rows`.
pub fn build_master(inst: &Instance, baseline: &Baseline, bases: &[RidgeBasis], rows: &RowSets) -> Result<LinearProgram> {
    Ok(Master::ridge(inst, baseline.clone(), bases.to_vec(), rows)?.lp)
}

/// The affine master LP over `rows` (monotonicity rows are ignored).
pub fn build_aa_master(inst: &Instance, rows: &RowSets, nonneg: bool) -> Result<LinearProgram> {
    let lambda_only = RowSets { lambda: rows.lambda.clone(), mu: vec![Vec::new(); rows.horizon()] };
    Ok(Master::affine(inst, nonneg, &lambda_only)?.lp)
}

pub fn solve_master(inst: &Instance, baseline: &Baseline, bases: &[RidgeBasis], rows: &RowSets) -> Result<MasterSolution> {
    Master::ridge(inst, baseline.clone(), bases.to_vec(), rows)?.solve()
}

/// All feasible actions at `x` (every subset of the products that fit).
pub fn feasible_actions(inst: &Instance, x: &State) -> Vec<Action> {
    let fit: Vec<usize> = (0..inst.num_products()).filter(|&j| inst.fits(x, j)).collect();
    (0u64..1 << fit.len())
        .map(|mask| {
            let mut u = Action::none(inst.num_products());
            for (b, &j) in fit.iter().enumerate() {
                u.0[j] = mask >> b & 1 == 1;
            }
            u
        })
        .collect()
}

/// Every feasible pair of every period; only sensible for tiny instances.
pub fn all_rows(inst: &Instance) -> RowSets {
    let mut rows = RowSets::empty(inst.horizon());
    let lat = crate::model::Lattice::new(inst.capacities());
    for t in 1..=inst.horizon() {
        let states: Vec<State> = if t == 1 { vec![inst.full_state()] } else { lat.states().collect() };
        for x in states {
            for u in feasible_actions(inst, &x) {
                rows.lambda[t - 1].push((x.clone(), u));
            }
        }
    }
    rows
}
