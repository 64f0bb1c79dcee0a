use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{AlgoConfig, Clock};
use crate::error::{NrmError, Result};
use crate::master::{Master, MasterSolution};
use crate::model::{is_feasible, Action, Instance, State};
use crate::subproblem::{mono_slack, mono_subproblem, reduced_cost, row_subproblem, SearchMode, SearchOptions};
use crate::vfa::Approximation;

/// Slack below which a row counts as violated; above the LP feasibility
/// tolerance so that rows already in the master are never re-reported.
pub const VIOLATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct RowGenOutcome {
    pub solution: MasterSolution,
    /// Violation mass per period at the final solution.
    pub pi_hat: Vec<f64>,
    /// `Z_B + sum_t pi_hat_t`.
    pub zhat: f64,
    /// The first solve, before any rows were added in this call.
    pub first: MasterSolution,
    pub rounds: usize,
    pub rows_added: usize,
    pub truncated: bool,
    /// Largest in-model flow imbalance over every solve of this call.
    pub max_flow_residual: f64,
}

/// Alternates master solves and separation until the violation mass is at
/// most `omega_gap * |Z_B|` (and, when `monotone`, no monotonicity row is
/// violated).
pub fn row_generation(
    inst: &Instance,
    master: &mut Master<'_>,
    cfg: &AlgoConfig,
    monotone: bool,
    rng: &mut ChaCha8Rng,
    clock: &Clock,
) -> Result<RowGenOutcome> {
    let mut first = None;
    let mut rows_added = 0;
    let mut round = 0;
    let mut flow = 0.0f64;
    loop {
        round += 1;
        let sol = master.solve()?;
        flow = flow.max(sol.flow_residual);
        if first.is_none() {
            first = Some(sol.clone());
        }
        let seed = rng.gen::<u64>();
        let (pi_hat, found) = separate_rows(inst, &sol.approx, cfg, rng, seed)?;
        let mass: f64 = pi_hat.iter().sum();
        let cr = mass <= cfg.omega_gap * sol.objective.abs() + 1e-9;
        let mut added = 0;
        if monotone {
            for (t, i, x) in separate_mono(inst, &sol.approx, cfg, rng, seed)? {
                added += master.add_mu_rows(t, [(i, x)])?;
            }
        }
        if cr && added == 0 {
            let zhat = sol.objective + mass;
            return Ok(RowGenOutcome {
                solution: sol,
                pi_hat,
                zhat,
                first: first.expect("solved once"),
                rounds: round,
                rows_added,
                truncated: false,
                max_flow_residual: flow,
            });
        }
        if !cr {
            for (t, x, u) in &found {
                added += master.add_lambda_rows(*t, [(x.clone(), u.clone())])?;
            }
        }
        if added == 0 {
            let period = pi_hat.iter().position(|&p| p > 0.0).map_or(1, |t| t + 1);
            return Err(NrmError::Stall { period });
        }
        rows_added += added;
        log::debug!("round {round}: Z_B {:.4}, violation mass {mass:.4e}, {added} rows added", sol.objective);
        if clock.expired() || round >= cfg.max_rounds {
            let sol = master.solve()?;
            flow = flow.max(sol.flow_residual);
            let zhat = sol.objective + mass;
            return Ok(RowGenOutcome {
                solution: sol,
                pi_hat,
                zhat,
                first: first.expect("solved once"),
                rounds: round,
                rows_added,
                truncated: true,
                max_flow_residual: flow,
            });
        }
    }
}

type Found = Vec<(usize, State, Action)>;

/// Visits periods in random order; a violated pair found for one period is
/// also tried in the periods not yet visited, and those it violates are
/// settled without a search of their own.
fn separate_rows(inst: &Instance, a: &Approximation, cfg: &AlgoConfig, rng: &mut ChaCha8Rng, seed: u64) -> Result<(Vec<f64>, Found)> {
    let tau = inst.horizon();
    let mut order: Vec<usize> = (1..=tau).collect();
    order.shuffle(rng);
    let mut settled = vec![false; tau + 1];
    let mut pi_hat = vec![0.0; tau];
    let mut found = Vec::new();
    let opts = cfg.search_options(inst, seed);
    for &t in &order {
        if settled[t] {
            continue;
        }
        settled[t] = true;
        let r = row_subproblem(inst, a, t, &opts)?;
        pi_hat[t - 1] = (-r.objective).max(0.0);
        if r.objective >= -VIOLATION_TOL {
            continue;
        }
        let u = r.u.expect("row subproblems return an action");
        for t2 in 1..=tau {
            if settled[t2] || !is_feasible(inst, t2, &r.x, &u)? {
                continue;
            }
            let rc = reduced_cost(inst, a, t2, &r.x, &u)?;
            if rc < -VIOLATION_TOL {
                settled[t2] = true;
                pi_hat[t2 - 1] = -rc;
                found.push((t2, r.x.clone(), u.clone()));
            }
        }
        found.push((t, r.x, u));
    }
    Ok((pi_hat, found))
}

fn separate_mono(
    inst: &Instance,
    a: &Approximation,
    cfg: &AlgoConfig,
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> Result<Vec<(usize, usize, State)>> {
    let legs = inst.num_legs();
    let mut order: Vec<(usize, usize)> = (2..=inst.horizon()).flat_map(|t| (0..legs).map(move |i| (t, i))).collect();
    order.shuffle(rng);
    let mut settled = std::collections::HashSet::new();
    let mut found = Vec::new();
    let opts = cfg.search_options(inst, seed ^ 0x5eed);
    for &(t, i) in &order {
        if !settled.insert((t, i)) {
            continue;
        }
        let Some(r) = mono_subproblem(inst, a, t, i, &opts)? else { continue };
        if r.objective >= -VIOLATION_TOL {
            continue;
        }
        for &(t2, i2) in &order {
            if settled.contains(&(t2, i2)) || r.x.0[i2] >= inst.capacities()[i2] {
                continue;
            }
            if mono_slack(a, t2, i2, &r.x) < -VIOLATION_TOL {
                settled.insert((t2, i2));
                found.push((t2, i2, r.x.clone()));
            }
        }
        found.push((t, i, r.x));
    }
    Ok(found)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    /// `Z_B` plus the exhaustive violation mass: a valid upper bound on the
    /// optimal expected revenue.
    pub zbar: Option<f64>,
    /// Why `zbar` is missing.
    pub reason: Option<String>,
}

/// Exhaustive upper bound for a solved master, when the lattice allows it.
pub fn estimate_bounds(inst: &Instance, sol: &MasterSolution, state_cap: u128) -> Result<Bounds> {
    if inst.lattice_size() > state_cap {
        return Ok(Bounds {
            zbar: None,
            reason: Some(format!("{} states exceed the exhaustive-search cap {state_cap}", inst.lattice_size())),
        });
    }
    let opts = SearchOptions { mode: SearchMode::Exact, ..SearchOptions::default() };
    let mut mass = 0.0;
    for t in 1..=inst.horizon() {
        mass += (-row_subproblem(inst, &sol.approx, t, &opts)?.objective).max(0.0);
    }
    Ok(Bounds { zbar: Some(sol.objective + mass), reason: None })
}
