//! Monte-Carlo evaluation of booking policies.
//!
//! Replication `n` of a run seeded with `s` draws from the ChaCha8 stream
//! `(s, n)`, so results do not depend on how replications are spread over
//! threads. Each period consumes exactly one uniform draw, partitioned by the
//! cumulative arrival probabilities in product order; a draw beyond the total
//! mass means no request arrives.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NrmError, Result};
use crate::model::{Instance, State};

/// Accept/reject rule for a single request.
pub trait Policy: Sync {
    /// Whether to sell product `j` in period `t` (1-based) with remaining capacity `x`.
    fn accept(&self, inst: &Instance, t: usize, x: &State, j: usize) -> bool;
}

/// Accept every request that fits.
pub struct AcceptAll;

impl Policy for AcceptAll {
    fn accept(&self, inst: &Instance, _t: usize, x: &State, j: usize) -> bool {
        inst.fits(x, j)
    }
}

fn stream(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Draws the arrival for period `t` from one uniform number.
pub fn draw_arrival(inst: &Instance, t: usize, u: f64) -> Option<usize> {
    let mut cum = 0.0;
    for (j, p) in inst.probs(t).iter().enumerate() {
        cum += p;
        if u < cum {
            return Some(j);
        }
    }
    None
}

/// Revenue of one sample path.
pub fn run_replication(inst: &Instance, policy: &dyn Policy, rng: &mut impl Rng) -> f64 {
    let mut x = inst.full_state();
    let mut revenue = 0.0;
    for t in 1..=inst.horizon() {
        let u: f64 = rng.gen();
        if let Some(j) = draw_arrival(inst, t, u) {
            if inst.fits(&x, j) && policy.accept(inst, t, &x, j) {
                revenue += inst.fare(j);
                x = inst.after_sale(&x, j);
            }
        }
    }
    revenue
}

/// Revenues of replications `start .. start + count`, in index order.
pub fn replicate(inst: &Instance, policy: &dyn Policy, seed: u64, start: usize, count: usize) -> Vec<f64> {
    (start..start + count)
        .into_par_iter()
        .map(|n| run_replication(inst, policy, &mut stream(seed, n as u64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Stop once `Se / Rbar` falls to this value.
    pub omega_policy: f64,
    pub n_max: usize,
    /// Replications before the first stopping check.
    pub n_min: usize,
    /// Replications between stopping checks.
    pub batch: usize,
    /// Keep every replication's revenue in the result.
    pub keep_revenues: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { omega_policy: 0.001, n_max: 200_000, n_min: 500, batch: 500, keep_revenues: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub rbar: f64,
    pub se: f64,
    pub n: usize,
    pub seed: u64,
    /// Mean revenue was zero with positive spread, so the relative stopping
    /// rule never applied and the run went to `n_max`.
    pub undefined_ratio: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revenues: Option<Vec<f64>>,
}

impl SimResult {
    /// Writes the per-replication revenues as `replication,revenue` CSV.
    pub fn write_revenues_csv(&self, mut out: impl Write) -> Result<()> {
        let revs = self
            .revenues
            .as_ref()
            .ok_or_else(|| NrmError::InvalidArgument("simulation did not keep revenues".into()))?;
        writeln!(out, "replication,revenue")?;
        for (n, r) in revs.iter().enumerate() {
            writeln!(out, "{n},{r}")?;
        }
        Ok(())
    }
}

/// Simulates with the default batching (first check after 500 replications).
pub fn simulate_policy(
    inst: &Instance,
    policy: &dyn Policy,
    omega_policy: f64,
    seed: u64,
    n_max: usize,
) -> Result<SimResult> {
    let opts = SimOptions { omega_policy, n_max, ..SimOptions::default() };
    simulate_with(inst, policy, &opts, seed)
}

pub fn simulate_with(inst: &Instance, policy: &dyn Policy, opts: &SimOptions, seed: u64) -> Result<SimResult> {
    if !(opts.omega_policy > 0.0 && opts.omega_policy < 1.0) {
        return Err(NrmError::InvalidArgument(format!("omega_policy must lie in (0, 1), got {}", opts.omega_policy)));
    }
    if opts.n_max < 2 || opts.n_min < 2 || opts.batch == 0 {
        return Err(NrmError::InvalidArgument("n_max and n_min must be at least 2 and batch positive".into()));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut n = 0usize;
    let mut kept = Vec::new();
    let mut next = opts.n_min.min(opts.n_max);
    loop {
        let revs = replicate(inst, policy, seed, n, next - n);
        for &r in &revs {
            sum += r;
            sum_sq += r * r;
        }
        if opts.keep_revenues {
            kept.extend_from_slice(&revs);
        }
        n = next;
        let (rbar, se) = moments(sum, sum_sq, n);
        let undefined = rbar == 0.0 && se > 0.0;
        let done = if undefined { false } else if rbar == 0.0 { true } else { se / rbar.abs() <= opts.omega_policy };
        if done || n >= opts.n_max {
            return Ok(SimResult {
                rbar,
                se,
                n,
                seed,
                undefined_ratio: undefined,
                revenues: opts.keep_revenues.then_some(kept),
            });
        }
        next = (n + opts.batch).min(opts.n_max);
    }
}

fn moments(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let rbar = sum / nf;
    let var = (sum_sq / nf - rbar * rbar).max(0.0);
    (rbar, (var / nf).sqrt())
}

/// Basis-addition stopping test `|1 - Rbar / Zhat| < omega_pgap`.
pub fn ck_met(sim: &SimResult, zhat: f64, omega_pgap: f64) -> Result<bool> {
    if zhat <= 0.0 {
        return Err(NrmError::InvalidArgument(format!("upper bound must be positive, got {zhat}")));
    }
    Ok((1.0 - sim.rbar / zhat).abs() < omega_pgap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(rbar: f64) -> SimResult {
        SimResult { rbar, se: 0.0, n: 2, seed: 0, undefined_ratio: false, revenues: None }
    }

    #[test]
    fn deterministic_instance() {
        let inst = Instance::stationary(vec![10], vec![10.0], vec![vec![0]], vec![1.0], 3).unwrap();
        let opts = SimOptions { n_min: 2, ..SimOptions::default() };
        let r = simulate_with(&inst, &AcceptAll, &opts, 1).unwrap();
        assert_eq!((r.rbar, r.se, r.n), (30.0, 0.0, 2));
    }

    #[test]
    fn zero_fares() {
        let inst = Instance::stationary(vec![2], vec![0.0], vec![vec![0]], vec![0.5], 4).unwrap();
        let r = simulate_policy(&inst, &AcceptAll, 0.01, 3, 10_000).unwrap();
        assert_eq!(r.rbar, 0.0);
        assert!(!r.undefined_ratio);
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let inst = Instance::toy2leg();
        let a = simulate_policy(&inst, &AcceptAll, 0.01, 9, 5000).unwrap();
        let b = simulate_policy(&inst, &AcceptAll, 0.01, 9, 5000).unwrap();
        assert_eq!(a, b);
        let serial: Vec<f64> = (0..700).map(|n| run_replication(&inst, &AcceptAll, &mut stream(9, n))).collect();
        assert_eq!(replicate(&inst, &AcceptAll, 9, 0, 700), serial);
    }

    #[test]
    fn standard_error_formula() {
        let inst = Instance::toy2leg();
        let opts = SimOptions { omega_policy: 0.5, n_max: 600, keep_revenues: true, ..SimOptions::default() };
        let r = simulate_with(&inst, &AcceptAll, &opts, 4).unwrap();
        let revs = r.revenues.as_ref().unwrap();
        let n = revs.len() as f64;
        let mean = revs.iter().sum::<f64>() / n;
        let m2 = revs.iter().map(|v| v * v).sum::<f64>() / n;
        assert!((r.rbar - mean).abs() < 1e-9);
        assert!((r.se - ((m2 - mean * mean) / n).sqrt()).abs() < 1e-9);
        let mut csv = Vec::new();
        r.write_revenues_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), revs.len() + 1);
    }

    #[test]
    fn never_beats_accepting_everything_in_expectation() {
        let inst = Instance::toy2leg();
        let r = simulate_policy(&inst, &AcceptAll, 0.001, 5, 20_000).unwrap();
        assert!(r.rbar <= inst.accept_all_revenue() + 4.0 * r.se);
    }

    #[test]
    fn arrival_partition() {
        let inst = Instance::stationary(vec![1, 1], vec![1.0, 2.0], vec![vec![0], vec![1]], vec![0.25, 0.5], 1).unwrap();
        assert_eq!(draw_arrival(&inst, 1, 0.0), Some(0));
        assert_eq!(draw_arrival(&inst, 1, 0.2499), Some(0));
        assert_eq!(draw_arrival(&inst, 1, 0.25), Some(1));
        assert_eq!(draw_arrival(&inst, 1, 0.75), None);
    }

    #[test]
    fn ck_examples() {
        assert!(ck_met(&sim(397.2), 399.5, 0.01).unwrap());
        assert!(!ck_met(&sim(324.2), 448.5, 0.01).unwrap());
        assert!(ck_met(&sim(12.5), 12.5, 1e-12).unwrap());
        assert!(ck_met(&sim(1.0), 0.0, 0.01).is_err());
    }

    #[test]
    fn rejects_bad_options() {
        let inst = Instance::toy2leg();
        assert!(simulate_policy(&inst, &AcceptAll, 1.5, 1, 100).is_err());
        assert!(simulate_policy(&inst, &AcceptAll, 0.1, 1, 1).is_err());
    }
}
