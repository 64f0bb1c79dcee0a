use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rowgen::{estimate_bounds, row_generation, RowGenOutcome};
use super::{AlgoConfig, Clock, Mode, RunTrace, TraceRow, EXACT_STATE_LIMIT};
use crate::error::{NrmError, Result};
use crate::flow::{ascend, generate_basis, BasisOptions};
use crate::master::{Master, MasterSolution, RowSets};
use crate::model::Instance;
use crate::simulate::{ck_met, simulate_with, SimResult};
use crate::vfa::{AffineBaseline, Approximation, Baseline, RidgeBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The simulated policy came within `omega_pgap` of the bound.
    CkMet,
    MaxK,
    WallClock,
    /// No direction with imbalance above `imbalance_tol` was found.
    ImbalanceExhausted,
    /// Row generation could not add rows while the bound gap stayed open.
    Stalled,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::CkMet => "policy gap met",
            StopReason::MaxK => "max K reached",
            StopReason::WallClock => "wall-clock budget exhausted",
            StopReason::ImbalanceExhausted => "no imbalanced direction left",
            StopReason::Stalled => "row generation stalled",
        })
    }
}

/// One basis addition: the master value on the same rows just before and
/// just after the new direction entered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisEvent {
    /// Basis count after the addition.
    pub k: usize,
    pub imbalance: f64,
    pub z_before: f64,
    pub z_after: f64,
    /// Whether the dual used to pick the direction may not have been unique.
    pub dual_degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct AaResult {
    pub baseline: AffineBaseline,
    pub approx: Approximation,
    pub z_b: f64,
    pub zhat: f64,
    pub zbar: Option<f64>,
    pub rows: RowSets,
    pub sim: SimResult,
    pub trace: TraceRow,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Approximation from the last completed master.
    pub approx: Approximation,
    /// Approximation whose policy simulated best.
    pub best: Approximation,
    pub trace: RunTrace,
    pub events: Vec<BasisEvent>,
    pub stop: StopReason,
    /// Some master stopped on the round or wall-clock limit before its bound gap closed.
    pub truncated: bool,
    pub aa: Option<AaResult>,
    pub rows: RowSets,
    /// Largest in-model flow imbalance over every master solve.
    pub max_flow_residual: f64,
}

impl RunResult {
    /// Smallest exhaustive upper bound seen, if any was computed.
    pub fn upper_bound(&self) -> Option<f64> {
        self.trace.rows.iter().filter_map(|r| r.zbar).reduce(f64::min)
    }
}

/// Fits the affine approximation by row generation and simulates its policy.
pub fn solve_aa(inst: &Instance, cfg: &AlgoConfig) -> Result<AaResult> {
    cfg.validate()?;
    let clock = Clock::new(cfg.max_wall_s);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    aa_with(inst, cfg, &clock, &mut rng)
}

fn aa_with(inst: &Instance, cfg: &AlgoConfig, clock: &Clock, rng: &mut ChaCha8Rng) -> Result<AaResult> {
    let mut master = Master::affine(inst, cfg.aa_nonneg, &RowSets::initial(inst))?;
    let rg = row_generation(inst, &mut master, cfg, false, rng, clock)?;
    let Baseline::Affine(baseline) = rg.solution.approx.baseline.clone() else {
        unreachable!("the affine master returns an affine baseline")
    };
    let (sim, zbar) = evaluate(inst, cfg, &rg.solution)?;
    let trace = trace_row(0, &rg, zbar, &sim, master.rows().total(), clock);
    Ok(AaResult {
        baseline,
        approx: rg.solution.approx.clone(),
        z_b: rg.solution.objective,
        zhat: rg.zhat,
        zbar,
        rows: master.rows().clone(),
        sim,
        trace,
        truncated: rg.truncated,
    })
}

fn evaluate(inst: &Instance, cfg: &AlgoConfig, sol: &MasterSolution) -> Result<(SimResult, Option<f64>)> {
    let sim = simulate_with(inst, &sol.approx, &cfg.sim_options(), cfg.seed)?;
    let zbar = if cfg.zbar && cfg.exact_search(inst) {
        estimate_bounds(inst, sol, EXACT_STATE_LIMIT.max(inst.lattice_size()))?.zbar
    } else {
        None
    };
    Ok((sim, zbar))
}

fn trace_row(k: usize, rg: &RowGenOutcome, zbar: Option<f64>, sim: &SimResult, rows_total: usize, clock: &Clock) -> TraceRow {
    TraceRow {
        k,
        z_b: rg.solution.objective,
        zhat: rg.zhat,
        zbar,
        rbar: sim.rbar,
        se: sim.se,
        n: sim.n,
        rows_total,
        cpu_s: clock.elapsed_s(),
    }
}

/// Grows the ridge basis one direction at a time, each chosen to maximise
/// the weighted flow imbalance of the current master duals.
pub fn h2pialg(inst: &Instance, cfg: &AlgoConfig) -> Result<RunResult> {
    run(inst, cfg, false, &mut |_| {})
}

/// [`h2pialg`] that hands each trace row to `on_row` as soon as it exists.
pub fn h2pialg_with(inst: &Instance, cfg: &AlgoConfig, on_row: &mut dyn FnMut(&TraceRow)) -> Result<RunResult> {
    run(inst, cfg, false, on_row)
}

/// Like [`h2pialg`], but after each master also moves the directions by
/// block-coordinate descent on the master value.
pub fn nlialg(inst: &Instance, cfg: &AlgoConfig) -> Result<RunResult> {
    run(inst, cfg, true, &mut |_| {})
}

pub fn nlialg_with(inst: &Instance, cfg: &AlgoConfig, on_row: &mut dyn FnMut(&TraceRow)) -> Result<RunResult> {
    run(inst, cfg, true, on_row)
}

fn run(inst: &Instance, cfg: &AlgoConfig, refine_directions: bool, on_row: &mut dyn FnMut(&TraceRow)) -> Result<RunResult> {
    cfg.validate()?;
    let clock = Clock::new(cfg.max_wall_s);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = RunTrace::default();
    let (baseline, mut rows, aa) = match cfg.mode {
        Mode::Standalone => (Baseline::Zero, RowSets::initial(inst), None),
        Mode::Addon => {
            let aa = aa_with(inst, cfg, &clock, &mut rng)?;
            on_row(&aa.trace);
            trace.rows.push(aa.trace.clone());
            (Baseline::Affine(aa.baseline.clone()), aa.rows.clone(), Some(aa))
        }
    };
    let mut bases = vec![RidgeBasis::uniform(inst.capacities())];
    let mut events = Vec::new();
    let mut pending: Option<(f64, f64, bool)> = None;
    let mut best: Option<(f64, Approximation)> = None;
    let mut last: Option<Approximation> = None;
    let mut truncated = aa.as_ref().is_some_and(|a| a.truncated);
    let mut flow = 0.0f64;
    let stop = loop {
        let k = bases.len();
        let monotone = k == 1 && cfg.monotonicity_rows_at_k1;
        let mut master = Master::ridge(inst, baseline.clone(), bases.clone(), &rows)?;
        let mut rg = match row_generation(inst, &mut master, cfg, monotone, &mut rng, &clock) {
            Ok(rg) => rg,
            Err(NrmError::Stall { period }) if last.is_some() => {
                log::warn!("K={k}: row generation stalled in period {period}");
                break StopReason::Stalled;
            }
            Err(e) => return Err(e),
        };
        if let Some((imbalance, z_before, dual_degenerate)) = pending.take() {
            events.push(BasisEvent { k, imbalance, z_before, z_after: rg.first.objective, dual_degenerate });
        }
        rows = master.rows().clone();
        flow = flow.max(rg.max_flow_residual);
        if refine_directions && !clock.expired() {
            if let Some((moved, better)) = refine(inst, cfg, &baseline, &bases, &rows, &rg, &clock, &mut rng)? {
                bases = moved.bases().to_vec();
                rows = moved.rows().clone();
                flow = flow.max(better.max_flow_residual);
                rg = better;
            }
        }
        truncated |= rg.truncated;
        let (sim, zbar) = evaluate(inst, cfg, &rg.solution)?;
        let row = trace_row(k, &rg, zbar, &sim, rows.total(), &clock);
        log::info!("K={k}: Z_B {:.4}, Zhat {:.4}, Rbar {:.4} +/- {:.4}, {} rows", row.z_b, row.zhat, row.rbar, row.se, row.rows_total);
        on_row(&row);
        trace.rows.push(row);
        if best.as_ref().is_none_or(|(r, _)| sim.rbar > *r) {
            best = Some((sim.rbar, rg.solution.approx.clone()));
        }
        last = Some(rg.solution.approx.clone());

        if !rg.truncated && ck_met(&sim, rg.zhat, cfg.omega_pgap)? {
            break StopReason::CkMet;
        }
        if k >= cfg.max_k {
            break StopReason::MaxK;
        }
        if clock.expired() {
            break StopReason::WallClock;
        }
        let opts = BasisOptions {
            starts: cfg.basis_starts,
            time_limit: remaining(&clock, cfg.basis_time_limit_s),
            seed: cfg.seed.wrapping_add(k as u64),
            tol: cfg.imbalance_tol,
        };
        match generate_basis(inst, &rg.solution.duals, &rows, &opts)? {
            Some(p) => {
                log::debug!("K={k}: new direction {:?} with imbalance {:.4e}", p.basis.beta, p.objective);
                pending = Some((p.objective, rg.solution.objective, rg.solution.dual_degenerate));
                bases.push(p.basis);
            }
            None => break StopReason::ImbalanceExhausted,
        }
    };
    let approx = last.expect("the first master always completes or errors");
    let best = best.map_or_else(|| approx.clone(), |(_, a)| a);
    Ok(RunResult { approx, best, trace, events, stop, truncated, aa, rows, max_flow_residual: flow })
}

/// Smallest weighted L1 distance kept between two directions when they move.
const MIN_SEPARATION: f64 = 0.02;

fn remaining(clock: &Clock, cap_s: f64) -> Duration {
    let cap = Duration::from_secs_f64(cap_s);
    match clock.limit() {
        Some(limit) => cap.min(limit.saturating_sub(Duration::from_secs_f64(clock.elapsed_s()))),
        None => cap,
    }
}

/// Block-coordinate descent over the directions, newest first, each step
/// minimising the master value on the current rows. The moved directions are
/// then re-separated and kept only if the master value does not get worse.
#[allow(clippy::too_many_arguments)]
fn refine<'a>(
    inst: &'a Instance,
    cfg: &AlgoConfig,
    baseline: &Baseline,
    bases: &[RidgeBasis],
    rows: &RowSets,
    current: &RowGenOutcome,
    clock: &Clock,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(Master<'a>, RowGenOutcome)>> {
    let caps = inst.capacities();
    let deadline = Instant::now() + remaining(clock, cfg.basis_time_limit_s);
    let z_cur = current.solution.objective;
    let mut trial = bases.to_vec();
    let mut z = z_cur;
    for k in (0..trial.len()).rev() {
        let mut starts = vec![trial[k].beta.clone()];
        if k + 1 == trial.len() {
            for _ in 1..cfg.nli_starts {
                starts.push(caps.iter().map(|&c| if c == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect());
            }
        }
        let fixed = trial.clone();
        let value = |beta: &[f64]| -> f64 {
            // near-duplicate directions make the master badly conditioned
            let crowded = fixed.iter().enumerate().any(|(i, other)| {
                i != k && other.beta.iter().zip(beta).zip(caps).map(|((a, b), &c)| c as f64 * (a - b).abs()).sum::<f64>() < MIN_SEPARATION
            });
            if crowded {
                return f64::NEG_INFINITY;
            }
            let mut b = fixed.clone();
            b[k] = RidgeBasis::new(beta.to_vec());
            match Master::ridge(inst, baseline.clone(), b, rows).and_then(|mut m| m.solve()) {
                Ok(s) => -s.objective,
                Err(_) => f64::NEG_INFINITY,
            }
        };
        for start in &starts {
            if Instant::now() >= deadline {
                break;
            }
            let Ok(p) = ascend(caps, &value, start, deadline) else { continue };
            if -p.objective < z - 1e-9 {
                z = -p.objective;
                trial[k] = p.basis;
            }
        }
    }
    if z >= z_cur - 1e-9 {
        return Ok(None);
    }
    let mut master = Master::ridge(inst, baseline.clone(), trial, rows)?;
    let monotone = bases.len() == 1 && cfg.monotonicity_rows_at_k1;
    let rg = match row_generation(inst, &mut master, cfg, monotone, rng, clock) {
        Ok(rg) => rg,
        Err(NrmError::Stall { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    if rg.solution.objective <= z_cur + 1e-9 && !(rg.truncated && !current.truncated) {
        log::debug!("moved directions: Z_B {z_cur:.4} -> {:.4}", rg.solution.objective);
        Ok(Some((master, rg)))
    } else {
        Ok(None)
    }
}
