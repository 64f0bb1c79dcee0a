//! Problem instances for network revenue management: legs with finite
//! capacity, products that consume a set of legs at a fixed fare, and a
//! discrete horizon with at most one request per period.

mod generate;
mod io;

pub use generate::{gen_bus_line, gen_hub_spoke, BusLineSpec, HubSpokeSpec};
pub use io::{load_instance, save_instance, to_json, InstanceFile};

use crate::error::{NrmError, Result};
use serde::{Deserialize, Serialize};

/// Tolerance used when validating that arrival probabilities sum to at most one.
pub const PROB_TOL: f64 = 1e-9;

/// Remaining capacity per leg.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State(pub Vec<u32>);

/// Accept indicators per product.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action(pub Vec<bool>);

impl State {
    pub fn zeros(n: usize) -> Self {
        State(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// The state with one more unit on `leg`.
    pub fn plus_one(&self, leg: usize) -> State {
        let mut y = self.clone();
        y.0[leg] += 1;
        y
    }
}

impl Action {
    pub fn none(n: usize) -> Self {
        Action(vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn accepts(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| !b)
    }
}

/// An immutable network revenue management instance.
///
/// Periods are numbered `1..=horizon`; legs and products are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    capacities: Vec<u32>,
    fares: Vec<f64>,
    legs: Vec<Vec<usize>>,
    probs: Vec<Vec<f64>>,
}

impl Instance {
    /// Builds and validates an instance.
    ///
    /// `legs[j]` lists the legs consumed by product `j`; `probs[t-1][j]` is the
    /// probability that a request for `j` arrives in period `t`.
    pub fn new(
        capacities: Vec<u32>,
        fares: Vec<f64>,
        legs: Vec<Vec<usize>>,
        probs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let i_n = capacities.len();
        let j_n = fares.len();
        if i_n == 0 {
            return Err(NrmError::Validation("num_legs must be positive".into()));
        }
        if j_n == 0 {
            return Err(NrmError::Validation("num_products must be positive".into()));
        }
        if probs.is_empty() {
            return Err(NrmError::Validation("horizon must be positive".into()));
        }
        if legs.len() != j_n {
            return Err(NrmError::Validation(format!(
                "consumption lists {} products, fares list {}",
                legs.len(),
                j_n
            )));
        }
        for (j, &f) in fares.iter().enumerate() {
            if !(f.is_finite() && f >= 0.0) {
                return Err(NrmError::Validation(format!("fare of product {j} must be nonnegative, got {f}")));
            }
        }
        let mut norm_legs = Vec::with_capacity(j_n);
        for (j, l) in legs.into_iter().enumerate() {
            let mut l = l;
            l.sort_unstable();
            l.dedup();
            if l.is_empty() {
                return Err(NrmError::Validation(format!(
                    "every product must consume at least one leg; product {j} consumes none"
                )));
            }
            if let Some(&bad) = l.iter().find(|&&i| i >= i_n) {
                return Err(NrmError::Validation(format!(
                    "product {j} references leg {bad}, but there are only {i_n} legs"
                )));
            }
            norm_legs.push(l);
        }
        for (t0, row) in probs.iter().enumerate() {
            if row.len() != j_n {
                return Err(NrmError::Validation(format!(
                    "period {} lists {} arrival probabilities, expected {j_n}",
                    t0 + 1,
                    row.len()
                )));
            }
            for (j, &p) in row.iter().enumerate() {
                if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                    return Err(NrmError::Validation(format!(
                        "arrival probability p[{}][{j}] = {p} outside [0, 1]",
                        t0 + 1
                    )));
                }
            }
            let s: f64 = row.iter().sum();
            if s > 1.0 + PROB_TOL {
                return Err(NrmError::Validation(format!(
                    "at most one arrival per period: sum of arrival probabilities in period {} is {s} > 1",
                    t0 + 1
                )));
            }
        }
        Ok(Instance { capacities, fares, legs: norm_legs, probs })
    }

    /// Same as [`Instance::new`] with one probability vector for every period.
    pub fn stationary(
        capacities: Vec<u32>,
        fares: Vec<f64>,
        legs: Vec<Vec<usize>>,
        probs: Vec<f64>,
        horizon: usize,
    ) -> Result<Self> {
        Self::new(capacities, fares, legs, vec![probs; horizon])
    }

    /// The two-leg, six-product, ten-period toy network (A-B, B-C, A-C at a
    /// low and a high fare).
    pub fn toy2leg() -> Self {
        io::parse_instance(include_str!("../../data/toy2leg.json")).expect("bundled toy instance is valid")
    }

    pub fn num_legs(&self) -> usize {
        self.capacities.len()
    }

    pub fn num_products(&self) -> usize {
        self.fares.len()
    }

    pub fn horizon(&self) -> usize {
        self.probs.len()
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    pub fn full_state(&self) -> State {
        State(self.capacities.clone())
    }

    pub fn fares(&self) -> &[f64] {
        &self.fares
    }

    pub fn fare(&self, j: usize) -> f64 {
        self.fares[j]
    }

    /// Legs consumed by product `j` (sorted).
    pub fn legs_of(&self, j: usize) -> &[usize] {
        &self.legs[j]
    }

    /// Entry `a_{ij}` of the consumption matrix.
    pub fn consumes(&self, i: usize, j: usize) -> bool {
        self.legs[j].binary_search(&i).is_ok()
    }

    /// Dense column `a_j`.
    pub fn column(&self, j: usize) -> Vec<u32> {
        let mut a = vec![0; self.num_legs()];
        for &i in &self.legs[j] {
            a[i] = 1;
        }
        a
    }

    /// Arrival probabilities in period `t` (1-based).
    pub fn probs(&self, t: usize) -> &[f64] {
        &self.probs[t - 1]
    }

    pub fn prob(&self, t: usize, j: usize) -> f64 {
        self.probs[t - 1][j]
    }

    /// Probability that some request arrives in period `t`.
    pub fn arrival_mass(&self, t: usize) -> f64 {
        self.probs[t - 1].iter().sum()
    }

    pub fn is_stationary(&self) -> bool {
        self.probs.windows(2).all(|w| w[0] == w[1])
    }

    /// Expected seat demand divided by total seats.
    pub fn load_factor(&self) -> f64 {
        let demand: f64 = self
            .probs
            .iter()
            .map(|row| row.iter().enumerate().map(|(j, p)| p * self.legs[j].len() as f64).sum::<f64>())
            .sum();
        let seats: f64 = self.capacities.iter().map(|&c| c as f64).sum();
        demand / seats
    }

    /// Expected revenue when every request is accepted.
    pub fn accept_all_revenue(&self) -> f64 {
        (1..=self.horizon())
            .map(|t| self.probs(t).iter().zip(&self.fares).map(|(p, f)| p * f).sum::<f64>())
            .sum()
    }

    /// Whether the state has enough capacity to sell product `j`.
    pub fn fits(&self, x: &State, j: usize) -> bool {
        self.legs[j].iter().all(|&i| x.0[i] >= 1)
    }

    /// The state after selling one unit of product `j`; caller checks [`Instance::fits`].
    pub fn after_sale(&self, x: &State, j: usize) -> State {
        let mut y = x.clone();
        for &i in &self.legs[j] {
            y.0[i] -= 1;
        }
        y
    }

    /// Whether `x` lies in the lattice `{0..c_1} x ... x {0..c_I}`.
    pub fn in_lattice(&self, x: &State) -> bool {
        x.len() == self.num_legs() && x.0.iter().zip(&self.capacities).all(|(a, c)| a <= c)
    }

    /// Number of lattice points, `prod_i (c_i + 1)`.
    pub fn lattice_size(&self) -> u128 {
        self.capacities.iter().map(|&c| c as u128 + 1).product()
    }

    fn check_dims(&self, x: &State, u: Option<&Action>) -> Result<()> {
        if x.len() != self.num_legs() {
            return Err(NrmError::InvalidArgument(format!(
                "state has {} components, instance has {} legs",
                x.len(),
                self.num_legs()
            )));
        }
        if let Some(u) = u {
            if u.len() != self.num_products() {
                return Err(NrmError::InvalidArgument(format!(
                    "action has {} components, instance has {} products",
                    u.len(),
                    self.num_products()
                )));
            }
        }
        Ok(())
    }
}

/// Whether `(x, u)` is a feasible state-action pair in period `t`.
///
/// Period 1 admits only the full-capacity state; later periods admit the
/// whole lattice. The action may accept product `j` only if `a_j <= x`.
pub fn is_feasible(inst: &Instance, t: usize, x: &State, u: &Action) -> Result<bool> {
    inst.check_dims(x, Some(u))?;
    if t == 0 || t > inst.horizon() {
        return Err(NrmError::InvalidArgument(format!("period {t} outside 1..={}", inst.horizon())));
    }
    if !inst.in_lattice(x) {
        return Ok(false);
    }
    if t == 1 && x.0 != inst.capacities {
        return Ok(false);
    }
    Ok((0..inst.num_products()).all(|j| !u.0[j] || inst.fits(x, j)))
}

/// Applies a request for product `arrival` (if any) under action `u`.
pub fn transition(inst: &Instance, x: &State, arrival: Option<usize>, u: &Action) -> Result<State> {
    inst.check_dims(x, Some(u))?;
    let Some(j) = arrival else {
        return Ok(x.clone());
    };
    if j >= inst.num_products() {
        return Err(NrmError::InvalidArgument(format!("product {j} out of range")));
    }
    if !u.0[j] {
        return Ok(x.clone());
    }
    if let Some(&i) = inst.legs_of(j).iter().find(|&&i| x.0[i] == 0) {
        return Err(NrmError::StateUnderflow { leg: i, have: 0, need: 1 });
    }
    Ok(inst.after_sale(x, j))
}

/// Mixed-radix indexing of the capacity lattice, last leg varying fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    caps: Vec<u32>,
    strides: Vec<usize>,
    size: usize,
}

impl Lattice {
    pub fn new(caps: &[u32]) -> Self {
        let mut strides = vec![0; caps.len()];
        let mut s = 1usize;
        for i in (0..caps.len()).rev() {
            strides[i] = s;
            s *= caps[i] as usize + 1;
        }
        Lattice { caps: caps.to_vec(), strides, size: s }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn stride(&self, leg: usize) -> usize {
        self.strides[leg]
    }

    pub fn encode(&self, x: &[u32]) -> usize {
        x.iter().zip(&self.strides).map(|(&v, &s)| v as usize * s).sum()
    }

    pub fn decode(&self, mut idx: usize) -> State {
        let mut x = vec![0; self.caps.len()];
        for (i, &s) in self.strides.iter().enumerate() {
            x[i] = (idx / s) as u32;
            idx %= s;
        }
        State(x)
    }

    /// All lattice points in lexicographic order.
    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.size).map(move |k| self.decode(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_leg() -> Instance {
        Instance::stationary(
            vec![3, 3],
            vec![10.0, 20.0, 25.0],
            vec![vec![0], vec![1], vec![0, 1]],
            vec![0.2, 0.2, 0.2],
            4,
        )
        .unwrap()
    }

    #[test]
    fn zero_action_feasible_at_full_capacity() {
        let inst = two_leg();
        assert!(is_feasible(&inst, 1, &inst.full_state(), &Action::none(3)).unwrap());
    }

    #[test]
    fn no_stock_blocks_sales() {
        let inst = two_leg();
        let u = Action(vec![true, false, false]);
        assert!(!is_feasible(&inst, 2, &State(vec![0, 0]), &u).unwrap());
    }

    #[test]
    fn first_period_requires_full_capacity() {
        let inst = two_leg();
        assert!(!is_feasible(&inst, 1, &State(vec![2, 3]), &Action::none(3)).unwrap());
        assert!(is_feasible(&inst, 2, &State(vec![2, 3]), &Action::none(3)).unwrap());
    }

    #[test]
    fn feasibility_rejects_bad_dimensions() {
        let inst = two_leg();
        assert!(matches!(
            is_feasible(&inst, 1, &State(vec![3]), &Action::none(3)),
            Err(NrmError::InvalidArgument(_))
        ));
        assert!(is_feasible(&inst, 1, &inst.full_state(), &Action::none(2)).is_err());
    }

    #[test]
    fn transitions() {
        let inst = two_leg();
        let all = Action(vec![true; 3]);
        let x = State(vec![3, 3]);
        assert_eq!(transition(&inst, &x, Some(0), &all).unwrap(), State(vec![2, 3]));
        assert_eq!(transition(&inst, &x, None, &all).unwrap(), x);
        let err = transition(&inst, &State(vec![0, 1]), Some(2), &all).unwrap_err();
        assert!(matches!(err, NrmError::StateUnderflow { leg: 0, .. }));
    }

    #[test]
    fn rejected_request_keeps_state() {
        let inst = two_leg();
        let x = State(vec![0, 0]);
        assert_eq!(transition(&inst, &x, Some(2), &Action::none(3)).unwrap(), x);
    }

    #[test]
    fn validation_catches_invariants() {
        let too_much = Instance::stationary(vec![1], vec![1.0, 1.0], vec![vec![0], vec![0]], vec![0.6, 0.6], 2);
        assert!(matches!(too_much, Err(NrmError::Validation(_))));
        let no_leg = Instance::stationary(vec![1], vec![1.0], vec![vec![]], vec![0.5], 2);
        assert!(no_leg.is_err());
        let neg = Instance::stationary(vec![1], vec![-1.0], vec![vec![0]], vec![0.5], 2);
        assert!(neg.is_err());
    }

    #[test]
    fn lattice_roundtrip() {
        let lat = Lattice::new(&[2, 0, 3]);
        assert_eq!(lat.size(), 12);
        for (k, x) in lat.states().enumerate() {
            assert_eq!(lat.encode(&x.0), k);
        }
        assert_eq!(lat.decode(11), State(vec![2, 0, 3]));
    }

    #[test]
    fn toy_instance_matches_table() {
        let toy = Instance::toy2leg();
        assert_eq!(toy.num_legs(), 2);
        assert_eq!(toy.num_products(), 6);
        assert_eq!(toy.horizon(), 10);
        assert_eq!(toy.fares(), &[20.0, 30.0, 42.0, 100.0, 150.0, 210.0]);
        assert_eq!(toy.probs(7), &[0.3, 0.1125, 0.1875, 0.1, 0.0375, 0.0625]);
        assert!(toy.consumes(0, 2) && toy.consumes(1, 2) && !toy.consumes(1, 0));
        assert!((toy.accept_all_revenue() - 460.0).abs() < 1e-9);
    }
}
