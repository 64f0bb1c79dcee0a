//! Flow imbalance of the master duals and generation of new ridge directions.
//!
//! For a direction `beta` the dual constraint paired with `V[t][k]` reads
//!
//! ```text
//! sum_{B_t} lambda phi(x) - sum_{M_t} mu (phi(x) - phi(x + e_i))
//!     - sum_{B_{t-1}} lambda [sum_j p_j phi(x - a_j u_j) + (1 - P) phi(x)] = phi(c) 1{t = 1}
//! ```
//!
//! and `l_t(beta)` is its left side minus its right side, so it vanishes for
//! every direction already in the master.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NrmError, Result};
use crate::master::{DualSolution, RowSets};
use crate::model::{Action, Instance, State};
use crate::vfa::{project_norm, Approximation, RidgeBasis};

#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceProfile {
    /// `l_t` for `t = 1..=tau`.
    pub per_period: Vec<f64>,
    /// `sum_t (tau - t + 1) |l_t|`.
    pub weighted: f64,
}

/// Dual weights collapsed onto distinct states: `l_t(beta) = sum_x w_t(x) exp(-beta . x)`.
#[derive(Debug, Clone)]
pub struct ImbalanceWeights {
    per_period: Vec<Vec<(Vec<u32>, f64)>>,
}

impl ImbalanceWeights {
    pub fn new(inst: &Instance, duals: &DualSolution, rows: &RowSets) -> Result<Self> {
        let tau = inst.horizon();
        let shape_ok = rows.horizon() == tau
            && duals.lambda.len() == tau
            && duals.mu.len() == tau
            && duals.lambda.iter().zip(&rows.lambda).all(|(d, r)| d.len() == r.len())
            && duals.mu.iter().zip(&rows.mu).all(|(d, r)| d.len() == r.len());
        if !shape_ok {
            return Err(NrmError::StaleDuals("dual values do not line up with the row sets".into()));
        }
        let mut acc: Vec<HashMap<Vec<u32>, f64>> = vec![HashMap::new(); tau];
        let mut add = |t: usize, x: &State, w: f64| {
            if w != 0.0 {
                *acc[t - 1].entry(x.0.clone()).or_insert(0.0) += w;
            }
        };
        add(1, &inst.full_state(), -1.0);
        for t in 1..=tau {
            for ((x, u), &lam) in rows.lambda[t - 1].iter().zip(&duals.lambda[t - 1]) {
                if lam == 0.0 {
                    continue;
                }
                add(t, x, lam);
                if t < tau {
                    let mut stay = 1.0;
                    for (j, &p) in inst.probs(t).iter().enumerate() {
                        if u.accepts(j) {
                            add(t + 1, &inst.after_sale(x, j), -lam * p);
                            stay -= p;
                        }
                    }
                    add(t + 1, x, -lam * stay);
                }
            }
            for ((i, x), &mu) in rows.mu[t - 1].iter().zip(&duals.mu[t - 1]) {
                add(t, x, -mu);
                add(t, &x.plus_one(*i), mu);
            }
        }
        let per_period = acc
            .into_iter()
            .map(|m| {
                let mut v: Vec<(Vec<u32>, f64)> = m.into_iter().collect();
                v.sort_by(|a, b| a.0.cmp(&b.0));
                v
            })
            .collect();
        Ok(ImbalanceWeights { per_period })
    }

    pub fn profile(&self, beta: &[f64]) -> ImbalanceProfile {
        let tau = self.per_period.len();
        let per_period: Vec<f64> = self
            .per_period
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|(x, w)| w * (-beta.iter().zip(x).map(|(b, &v)| b * v as f64).sum::<f64>()).exp())
                    .sum()
            })
            .collect();
        let weighted = per_period.iter().enumerate().map(|(t, l)| (tau - t) as f64 * l.abs()).sum();
        ImbalanceProfile { per_period, weighted }
    }

    pub fn weighted(&self, beta: &[f64]) -> f64 {
        self.profile(beta).weighted
    }
}

pub fn flow_imbalance(inst: &Instance, duals: &DualSolution, rows: &RowSets, b: &RidgeBasis) -> Result<ImbalanceProfile> {
    Ok(ImbalanceWeights::new(inst, duals, rows)?.profile(&b.beta))
}

pub fn weighted_objective(inst: &Instance, duals: &DualSolution, rows: &RowSets, b: &RidgeBasis) -> Result<f64> {
    Ok(flow_imbalance(inst, duals, rows, b)?.weighted)
}

/// Largest `|l_t(beta_k)|` over the directions of a solved master.
pub fn max_in_model_imbalance(inst: &Instance, duals: &DualSolution, rows: &RowSets, bases: &[RidgeBasis]) -> Result<f64> {
    let w = ImbalanceWeights::new(inst, duals, rows)?;
    Ok(bases
        .iter()
        .flat_map(|b| w.profile(&b.beta).per_period)
        .fold(0.0, |m, l| m.max(l.abs())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisOptions {
    pub starts: usize,
    pub time_limit: Duration,
    pub seed: u64,
    /// Objectives at or below this count as no violation.
    pub tol: f64,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions { starts: 20, time_limit: Duration::from_secs(30), seed: 0, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisProposal {
    pub basis: RidgeBasis,
    pub objective: f64,
}

/// Maximises the weighted imbalance over the norm surface by multi-start
/// coordinate ascent. `None` when no start finds an objective above `tol`.
pub fn generate_basis(
    inst: &Instance,
    duals: &DualSolution,
    rows: &RowSets,
    opts: &BasisOptions,
) -> Result<Option<BasisProposal>> {
    let weights = ImbalanceWeights::new(inst, duals, rows)?;
    let best = maximise(inst.capacities(), &|b: &[f64]| weights.weighted(b), opts)?;
    Ok((best.objective > opts.tol).then_some(best))
}

/// Multi-start projected coordinate ascent of `f` on `sum_i c_i |beta_i| = 1`.
pub fn maximise(caps: &[u32], f: &(dyn Fn(&[f64]) -> f64 + Sync), opts: &BasisOptions) -> Result<BasisProposal> {
    let active: Vec<usize> = (0..caps.len()).filter(|&i| caps[i] > 0).collect();
    if active.is_empty() || opts.starts == 0 {
        return Err(NrmError::InvalidArgument("need a leg with positive capacity and at least one start".into()));
    }
    let deadline = Instant::now() + opts.time_limit;
    let results: Vec<Result<BasisProposal>> = (0..opts.starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(s as u64);
            let raw: Vec<f64> = caps
                .iter()
                .map(|&c| if c == 0 { 0.0 } else { rng.gen_range(0.05..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 } })
                .collect();
            ascend(caps, f, &raw, deadline)
        })
        .collect();
    let mut best: Option<BasisProposal> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.objective > b.objective) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one start"))
}

const MAX_SWEEPS_PER_STEP: usize = 50;

/// Projected coordinate ascent of `f` from `start` (projected onto the norm
/// surface first); steps start at 0.25 and halve down to 1e-6.
pub fn ascend(caps: &[u32], f: &(dyn Fn(&[f64]) -> f64 + Sync), start: &[f64], deadline: Instant) -> Result<BasisProposal> {
    let active: Vec<usize> = (0..caps.len()).filter(|&i| caps[i] > 0).collect();
    let mut beta = project_norm(start, caps)?.beta;
    let mut fb = f(&beta);
    let mut step = 0.25;
    // sweeps spent at the current step; creeping along a curved ridge can
    // otherwise take a very long time to stop improving
    let mut sweeps = 0;
    while step > 1e-6 && Instant::now() < deadline {
        sweeps += 1;
        let mut improved = false;
        for &i in &active {
            for dir in [1.0, -1.0] {
                let mut trial = beta.clone();
                trial[i] += dir * step / caps[i] as f64;
                let Ok(p) = project_norm(&trial, caps) else { continue };
                let ft = f(&p.beta);
                if ft > fb + 1e-12 * (1.0 + fb.abs()) {
                    beta = p.beta;
                    fb = ft;
                    improved = true;
                }
            }
        }
        if !improved || sweeps >= MAX_SWEEPS_PER_STEP {
            step *= 0.5;
            sweeps = 0;
        }
    }
    Ok(BasisProposal { basis: RidgeBasis::new(beta), objective: fb })
}

/// The three aggregate terms of the objective decomposition and the direct
/// double sum they add up to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub xi: f64,
    pub psi: f64,
    pub phi: f64,
    pub direct: f64,
}

/// Evaluates both sides of the decomposition for weights `lambda[t-1]` over
/// feasible pairs. The identity needs unit mass in every period with the
/// first period supported on `c`.
pub fn decomposition_check(
    inst: &Instance,
    a: &Approximation,
    lambda: &[Vec<((State, Action), f64)>],
) -> Result<Decomposition> {
    let tau = inst.horizon();
    if lambda.len() != tau {
        return Err(NrmError::InvalidArgument(format!("weights cover {} periods, horizon is {tau}", lambda.len())));
    }
    if lambda.iter().flatten().any(|(_, w)| *w < 0.0 || !w.is_finite()) {
        return Err(NrmError::InvalidArgument("weights must be nonnegative".into()));
    }
    let mut xi = a.xi[0];
    let mut psi = 0.0;
    let mut direct = 0.0;
    let mut rows = RowSets::empty(tau);
    let mut duals = DualSolution { lambda: vec![Vec::new(); tau], mu: vec![Vec::new(); tau] };
    for t in 1..=tau {
        for ((x, u), w) in &lambda[t - 1] {
            if !crate::model::is_feasible(inst, t, x, u)? {
                return Err(NrmError::InvalidArgument(format!("pair ({:?}, {:?}) is infeasible in period {t}", x.0, u.0)));
            }
            let mut revenue = 0.0;
            let mut stay = 1.0;
            let mut next_psi = 0.0;
            let mut next_v = 0.0;
            for (j, &p) in inst.probs(t).iter().enumerate() {
                if u.accepts(j) {
                    let y = inst.after_sale(x, j);
                    revenue += p * inst.fare(j);
                    stay -= p;
                    next_psi += p * a.baseline.eval(t + 1, &y);
                    next_v += p * crate::vfa::eval_approx(a, t + 1, &y);
                }
            }
            next_psi += stay * a.baseline.eval(t + 1, x);
            next_v += stay * crate::vfa::eval_approx(a, t + 1, x);
            xi -= w * revenue;
            psi += w * (a.baseline.eval(t, x) - next_psi);
            direct += w * (crate::vfa::eval_approx(a, t, x) - revenue - next_v);
            rows.lambda[t - 1].push((x.clone(), u.clone()));
            duals.lambda[t - 1].push(*w);
        }
    }
    let weights = ImbalanceWeights::new(inst, &duals, &rows)?;
    let c = inst.full_state();
    let mut phi = 0.0;
    for (k, b) in a.bases.iter().enumerate() {
        phi -= a.v[0][k] * crate::vfa::eval_basis(b, &c);
        let prof = weights.profile(&b.beta);
        for t in 2..=tau {
            phi -= a.v[t - 1][k] * prof.per_period[t - 1];
        }
    }
    Ok(Decomposition { xi, psi, phi, direct })
}
