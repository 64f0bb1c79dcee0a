//! Separation oracles for the master LP.
//!
//! For a fixed state the row slack is additively separable in the action:
//!
//! ```text
//! slack(x, u) = vhat_t(x) - vhat_{t+1}(x) - sum_j u_j p_tj [f_j + vhat_{t+1}(x - a_j) - vhat_{t+1}(x)]
//! ```
//!
//! so the best action at `x` sells exactly the products that fit and have a
//! nonnegative bracket. The searches below only range over states.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NrmError, Result};
use crate::model::{is_feasible, Action, Instance, Lattice, State};
use crate::vfa::{eval_approx, Approximation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Enumerate every state.
    Exact,
    /// Multi-start coordinate descent over states.
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProofQuality {
    Global,
    Local,
    TimeLimited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationResult {
    pub t: usize,
    pub x: State,
    /// The action, for row subproblems.
    pub u: Option<Action>,
    /// The leg, for monotonicity subproblems.
    pub leg: Option<usize>,
    /// Slack of the candidate row; negative means violated.
    pub objective: f64,
    pub quality: ProofQuality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub mode: SearchMode,
    pub time_limit: Duration,
    /// Random starting states in addition to `c` and `0`.
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { mode: SearchMode::Exact, time_limit: Duration::from_secs(5), random_starts: 8, seed: 0 }
    }
}

impl SearchOptions {
    pub fn local(seed: u64) -> Self {
        SearchOptions { mode: SearchMode::Local, seed, ..Self::default() }
    }
}

/// Precomputed pieces of the period-`t` slack.
struct PeriodEval<'a> {
    inst: &'a Instance,
    a: &'a Approximation,
    t: usize,
    /// `shift[k][j] = sum_{i in j} beta_{k,i}`.
    shift: Vec<Vec<f64>>,
    /// `psi_{t+1}(x) - psi_{t+1}(x - a_j)`.
    drop: Vec<f64>,
}

impl<'a> PeriodEval<'a> {
    fn new(inst: &'a Instance, a: &'a Approximation, t: usize) -> Self {
        let shift = a
            .bases
            .iter()
            .map(|b| (0..inst.num_products()).map(|j| inst.legs_of(j).iter().map(|&i| b.beta[i]).sum()).collect())
            .collect();
        let drop = (0..inst.num_products()).map(|j| a.baseline.sale_drop(inst, t + 1, j)).collect();
        PeriodEval { inst, a, t, shift, drop }
    }

    fn last(&self) -> bool {
        self.t >= self.inst.horizon()
    }

    /// `f_j + vhat_{t+1}(x - a_j) - vhat_{t+1}(x)` for every product that fits.
    fn gains(&self, x: &State) -> Vec<Option<f64>> {
        let phis: Vec<f64> = self.a.bases.iter().map(|b| (-b.exponent(&x.0)).exp()).collect();
        (0..self.inst.num_products())
            .map(|j| {
                if !self.inst.fits(x, j) {
                    return None;
                }
                let mut g = self.inst.fare(j);
                if !self.last() {
                    g -= self.drop[j];
                    let vnext = &self.a.v[self.t];
                    for (k, phi) in phis.iter().enumerate() {
                        g -= vnext[k] * (phi * self.shift[k][j].exp() - phi);
                    }
                }
                Some(g)
            })
            .collect()
    }

    fn base(&self, x: &State) -> f64 {
        eval_approx(self.a, self.t, x) - eval_approx(self.a, self.t + 1, x)
    }

    /// Minimum slack at `x` and the action attaining it.
    fn best_at(&self, x: &State) -> (f64, Action) {
        let probs = self.inst.probs(self.t);
        let mut u = Action::none(self.inst.num_products());
        let mut s = self.base(x);
        for (j, g) in self.gains(x).into_iter().enumerate() {
            if let Some(g) = g {
                if probs[j] * g >= 0.0 {
                    u.0[j] = true;
                    s -= probs[j] * g;
                }
            }
        }
        (s, u)
    }

    fn slack(&self, x: &State, u: &Action) -> f64 {
        let probs = self.inst.probs(self.t);
        let mut s = self.base(x);
        for (j, g) in self.gains(x).into_iter().enumerate() {
            if u.accepts(j) {
                s -= probs[j] * g.expect("feasible action");
            }
        }
        s
    }
}

/// Row slack of `(x, u)` in period `t` under `a`.
pub fn reduced_cost(inst: &Instance, a: &Approximation, t: usize, x: &State, u: &Action) -> Result<f64> {
    if !is_feasible(inst, t, x, u)? {
        return Err(NrmError::InvalidArgument(format!("pair ({:?}, {:?}) is infeasible in period {t}", x.0, u.0)));
    }
    Ok(PeriodEval::new(inst, a, t).slack(x, u))
}

/// Monotonicity slack `W_ti + sum_k V[t][k] (phi_k(x) - phi_k(x + e_i))`.
pub fn mono_slack(a: &Approximation, t: usize, i: usize, x: &State) -> f64 {
    let up = x.plus_one(i);
    let w = a.baseline.slope(t, i);
    w + a.v[t - 1].iter().zip(&a.bases).map(|(v, b)| v * ((-b.exponent(&x.0)).exp() - (-b.exponent(&up.0)).exp())).sum::<f64>()
}

fn check_period(inst: &Instance, a: &Approximation, t: usize) -> Result<()> {
    if t == 0 || t > inst.horizon() || a.horizon() != inst.horizon() {
        return Err(NrmError::InvalidArgument(format!("period {t} outside 1..={}", inst.horizon())));
    }
    Ok(())
}

/// Lower slack wins; ties go to the larger state.
fn better(a: &(f64, State), b: &(f64, State)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 > b.1)
}

/// Most violated row of period `t`.
pub fn row_subproblem(inst: &Instance, a: &Approximation, t: usize, opts: &SearchOptions) -> Result<SeparationResult> {
    check_period(inst, a, t)?;
    let ev = PeriodEval::new(inst, a, t);
    let (x, quality) = if t == 1 {
        (inst.full_state(), ProofQuality::Global)
    } else {
        let f = |x: &State| ev.best_at(x).0;
        search(inst, &f, |_| true, t as u64, opts)
    };
    let (objective, u) = ev.best_at(&x);
    Ok(SeparationResult { t, x, u: Some(u), leg: None, objective, quality })
}

/// Most violated monotonicity row for leg `i` in period `t`; `None` in the
/// first period, whose only state is `c`.
pub fn mono_subproblem(
    inst: &Instance,
    a: &Approximation,
    t: usize,
    i: usize,
    opts: &SearchOptions,
) -> Result<Option<SeparationResult>> {
    check_period(inst, a, t)?;
    if i >= inst.num_legs() {
        return Err(NrmError::InvalidArgument(format!("leg {i} out of range")));
    }
    let cap = inst.capacities()[i];
    if t == 1 || cap == 0 {
        return Ok(None);
    }
    let f = |x: &State| mono_slack(a, t, i, x);
    let ok = |x: &State| x.0[i] < cap;
    let (x, quality) = search(inst, &f, ok, (t * 7919 + i) as u64, opts);
    let objective = mono_slack(a, t, i, &x);
    Ok(Some(SeparationResult { t, x, u: None, leg: Some(i), objective, quality }))
}

/// Minimises `f` over lattice states satisfying `ok`.
fn search(
    inst: &Instance,
    f: &(dyn Fn(&State) -> f64 + Sync),
    ok: impl Fn(&State) -> bool + Sync,
    salt: u64,
    opts: &SearchOptions,
) -> (State, ProofQuality) {
    let lat = Lattice::new(inst.capacities());
    match opts.mode {
        SearchMode::Exact => {
            let best = (0..lat.size())
                .into_par_iter()
                .filter_map(|idx| {
                    let x = lat.decode(idx);
                    ok(&x).then(|| (f(&x), x))
                })
                .reduce_with(|p, q| if better(&q, &p) { q } else { p })
                .expect("some state qualifies");
            (best.1, ProofQuality::Global)
        }
        SearchMode::Local => local_search(inst, f, &ok, salt, opts),
    }
}

fn local_search(
    inst: &Instance,
    f: &(dyn Fn(&State) -> f64 + Sync),
    ok: &(impl Fn(&State) -> bool + Sync),
    salt: u64,
    opts: &SearchOptions,
) -> (State, ProofQuality) {
    let caps = inst.capacities();
    let clamp = |mut x: State| {
        // pull a start into the admissible set by lowering coordinates
        for i in 0..x.len() {
            while !ok(&x) && x.0[i] > 0 {
                x.0[i] -= 1;
            }
        }
        x
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut starts = vec![clamp(inst.full_state()), State::zeros(caps.len())];
    for _ in 0..opts.random_starts {
        starts.push(clamp(State(caps.iter().map(|&c| rng.gen_range(0..=c)).collect())));
    }
    starts.retain(|x| ok(x));
    let deadline = Instant::now() + opts.time_limit;
    let runs: Vec<(f64, State, bool)> = starts
        .into_par_iter()
        .map(|mut x| {
            let mut fx = f(&x);
            loop {
                if Instant::now() > deadline {
                    return (fx, x, true);
                }
                let mut step: Option<(f64, State)> = None;
                for i in 0..caps.len() {
                    for up in [false, true] {
                        let mut y = x.clone();
                        if up {
                            if y.0[i] == caps[i] {
                                continue;
                            }
                            y.0[i] += 1;
                        } else {
                            if y.0[i] == 0 {
                                continue;
                            }
                            y.0[i] -= 1;
                        }
                        if !ok(&y) {
                            continue;
                        }
                        let fy = f(&y);
                        if fy < fx - 1e-12 && step.as_ref().is_none_or(|s| fy < s.0) {
                            step = Some((fy, y));
                        }
                    }
                }
                match step {
                    Some((fy, y)) => {
                        fx = fy;
                        x = y;
                    }
                    None => return (fx, x, false),
                }
            }
        })
        .collect();
    let timed_out = runs.iter().any(|r| r.2);
    let best = runs
        .into_iter()
        .map(|(v, x, _)| (v, x))
        .reduce(|p, q| if better(&q, &p) { q } else { p })
        .expect("at least one start");
    (best.1, if timed_out { ProofQuality::TimeLimited } else { ProofQuality::Local })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::master::feasible_actions;
    use crate::vfa::{Baseline, RidgeBasis};

    fn tiny() -> Instance {
        Instance::stationary(vec![2, 2], vec![5.0, 7.0, 11.0], vec![vec![0], vec![1], vec![0, 1]], vec![0.3, 0.3, 0.2], 4).unwrap()
    }

    fn random_approx(inst: &Instance, seed: u64, k: usize) -> Approximation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bases = (0..k)
            .map(|_| {
                let raw: Vec<f64> = (0..inst.num_legs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                crate::vfa::project_norm(&raw, inst.capacities()).unwrap()
            })
            .collect();
        let mut a = Approximation::new(Baseline::Zero, inst.horizon(), bases);
        for t in 0..inst.horizon() {
            a.xi[t] = rng.gen_range(0.0..40.0);
            for v in &mut a.v[t] {
                *v = rng.gen_range(-30.0..30.0);
            }
        }
        a
    }

    /// Independent slack from the value-function definition.
    fn slack_by_definition(inst: &Instance, a: &Approximation, t: usize, x: &State, u: &Action) -> f64 {
        let mut rhs = 0.0;
        let mut stay = 1.0;
        for j in 0..inst.num_products() {
            if u.accepts(j) {
                let p = inst.prob(t, j);
                rhs += p * (inst.fare(j) + eval_approx(a, t + 1, &inst.after_sale(x, j)));
                stay -= p;
            }
        }
        eval_approx(a, t, x) - rhs - stay * eval_approx(a, t + 1, x)
    }

    fn brute_force(inst: &Instance, a: &Approximation, t: usize) -> f64 {
        let lat = Lattice::new(inst.capacities());
        let states: Vec<State> = if t == 1 { vec![inst.full_state()] } else { lat.states().collect() };
        states
            .iter()
            .flat_map(|x| feasible_actions(inst, x).into_iter().map(move |u| (x.clone(), u)))
            .map(|(x, u)| slack_by_definition(inst, a, t, &x, &u))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn zero_approximation_last_period() {
        let inst = tiny();
        let a = Approximation::new(Baseline::Zero, 4, vec![]);
        let r = row_subproblem(&inst, &a, 4, &SearchOptions::default()).unwrap();
        assert_eq!(r.x, inst.full_state());
        assert_eq!(r.u, Some(Action(vec![true, true, true])));
        assert!((r.objective + (0.3 * 5.0 + 0.3 * 7.0 + 0.2 * 11.0)).abs() < 1e-12);
    }

    #[test]
    fn large_offset_gaps_leave_nothing_violated() {
        let inst = tiny();
        let mut a = Approximation::new(Baseline::Zero, 4, vec![]);
        let per = 0.3 * 5.0 + 0.3 * 7.0 + 0.2 * 11.0;
        a.xi = vec![4.0 * per, 3.0 * per, 2.0 * per, per];
        for t in 1..=4 {
            assert!(row_subproblem(&inst, &a, t, &SearchOptions::default()).unwrap().objective >= -1e-12);
        }
    }

    #[test]
    fn reduced_cost_matches_definition() {
        let inst = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in 0..20 {
            let a = random_approx(&inst, s, 2);
            for t in 1..=4 {
                let x = if t == 1 { inst.full_state() } else { State(vec![rng.gen_range(0..=2), rng.gen_range(0..=2)]) };
                for u in feasible_actions(&inst, &x) {
                    let r = reduced_cost(&inst, &a, t, &x, &u).unwrap();
                    assert!((r - slack_by_definition(&inst, &a, t, &x, &u)).abs() < 1e-12);
                }
            }
        }
        let a = Approximation::new(Baseline::Zero, 4, vec![]);
        let mut b = a.clone();
        b.xi = vec![9.0, 4.0, 3.0, 1.0];
        assert_eq!(reduced_cost(&inst, &b, 2, &State(vec![1, 1]), &Action::none(3)).unwrap(), 1.0);
        assert!(reduced_cost(&inst, &a, 2, &State(vec![0, 1]), &Action(vec![true, false, false])).is_err());
        assert!(reduced_cost(&inst, &a, 2, &State(vec![1, 1]), &Action(vec![true])).is_err());
    }

    #[test]
    fn exact_mode_is_the_brute_force_minimum() {
        let inst = tiny();
        for s in 0..15 {
            let a = random_approx(&inst, 100 + s, 3);
            for t in 1..=4 {
                let r = row_subproblem(&inst, &a, t, &SearchOptions::default()).unwrap();
                assert!((r.objective - brute_force(&inst, &a, t)).abs() < 1e-9);
                let re = reduced_cost(&inst, &a, t, &r.x, r.u.as_ref().unwrap()).unwrap();
                assert!((re - r.objective).abs() < 1e-9);
                assert_eq!(r.quality, ProofQuality::Global);
            }
        }
    }

    #[test]
    fn local_mode_matches_enumeration_on_tiny_instances() {
        let inst = tiny();
        for s in 0..15 {
            let a = random_approx(&inst, 200 + s, 2);
            for t in 1..=4 {
                let r = row_subproblem(&inst, &a, t, &SearchOptions::local(s)).unwrap();
                let bf = brute_force(&inst, &a, t);
                assert!(r.objective >= bf - 1e-9);
                // every lattice point is within reach of the starts on a 3x3 grid
                assert!((r.objective - bf).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn inner_action_admits_no_improving_flip() {
        let inst = Instance::toy2leg();
        let a = random_approx(&inst, 9, 2);
        let ev = PeriodEval::new(&inst, &a, 3);
        for x in Lattice::new(inst.capacities()).states() {
            let (s, u) = ev.best_at(&x);
            for j in 0..6 {
                let mut v = u.clone();
                v.0[j] = !v.0[j];
                if is_feasible(&inst, 3, &x, &v).unwrap() {
                    assert!(ev.slack(&x, &v) >= s - 1e-12);
                }
            }
        }
    }

    #[test]
    fn monotonicity_subproblem() {
        let inst = tiny();
        let mut a = Approximation::new(Baseline::Zero, 4, vec![RidgeBasis::new(vec![0.25, 0.25])]);
        // K = 0 baseline-free slack is zero; positive weights keep it nonnegative
        a.v = vec![vec![3.0]; 4];
        let r = mono_subproblem(&inst, &a, 2, 0, &SearchOptions::default()).unwrap().unwrap();
        assert!(r.objective >= 0.0);
        assert!(r.x.0[0] < 2);
        a.v[1][0] = -3.0;
        let r = mono_subproblem(&inst, &a, 2, 1, &SearchOptions::default()).unwrap().unwrap();
        assert!(r.objective < 0.0);
        let local = mono_subproblem(&inst, &a, 2, 1, &SearchOptions::local(1)).unwrap().unwrap();
        assert!((local.objective - r.objective).abs() < 1e-12);
        let brute = Lattice::new(&[2, 2])
            .states()
            .filter(|x| x.0[1] < 2)
            .map(|x| mono_slack(&a, 2, 1, &x))
            .fold(f64::INFINITY, f64::min);
        assert!((r.objective - brute).abs() < 1e-12);
        assert!(mono_subproblem(&inst, &a, 1, 0, &SearchOptions::default()).unwrap().is_none());
    }

    #[test]
    fn affine_baseline_enters_the_slack() {
        let inst = tiny();
        let aa = crate::vfa::AffineBaseline { theta: vec![30.0, 20.0, 10.0, 5.0], w: vec![vec![4.0, 6.0]; 4] };
        let a = Approximation::new(Baseline::Affine(aa), 4, vec![]);
        for t in 1..=4 {
            let r = row_subproblem(&inst, &a, t, &SearchOptions::default()).unwrap();
            assert!((r.objective - brute_force(&inst, &a, t)).abs() < 1e-9);
        }
    }
}
