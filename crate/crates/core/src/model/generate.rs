//! Seeded instance generators.
//!
//! All randomness comes from a ChaCha8 stream seeded with the caller's 64-bit
//! seed, so the same arguments give bit-identical instances on every platform.
//!
//! Fares: every leg gets a low fare drawn from `U[20, 120]` and a high fare of
//! `low * U[2, 5]`. Multi-leg itineraries cost the sum of their leg fares in the
//! same class times `U[0.8, 1.0]`. Arrival weights are `U[0.5, 1.5]` per
//! itinerary, split 3:1 between the low and high class, and then scaled
//! uniformly so that expected seat demand over total seats hits the target load
//! factor (capped so that at most one request arrives per period).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Instance;
use crate::error::{NrmError, Result};

pub const DEFAULT_LOAD_FACTOR: f64 = 1.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubSpokeSpec {
    /// Number of non-hub locations `L`.
    pub locations: usize,
    pub horizon: usize,
    /// Capacity of every leg.
    pub capacity: u32,
    pub seed: u64,
    pub load_factor: f64,
}

impl HubSpokeSpec {
    pub fn new(locations: usize, horizon: usize, capacity: u32, seed: u64) -> Self {
        HubSpokeSpec { locations, horizon, capacity, seed, load_factor: DEFAULT_LOAD_FACTOR }
    }

    pub fn generate(&self) -> Result<Instance> {
        let l_n = self.locations;
        if l_n < 2 {
            return Err(NrmError::InvalidArgument(format!("hub-and-spoke needs at least 2 locations, got {l_n}")));
        }
        if self.horizon == 0 {
            return Err(NrmError::InvalidArgument("horizon must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let legs_n = 2 * l_n;
        let (low, high) = leg_fares(&mut rng, legs_n);

        // Leg 2l flies l -> hub, leg 2l+1 flies hub -> l.
        let mut itineraries: Vec<Vec<usize>> = (0..legs_n).map(|i| vec![i]).collect();
        for o in 0..l_n {
            for d in 0..l_n {
                if o != d {
                    itineraries.push(vec![2 * o, 2 * d + 1]);
                }
            }
        }
        let (fares, legs, raw) = price_itineraries(&mut rng, &itineraries, &low, &high, 2);
        let probs = scale_to_load(&raw, &legs, &vec![self.capacity; legs_n], self.horizon, self.load_factor);
        Instance::stationary(vec![self.capacity; legs_n], fares, legs, probs, self.horizon)
    }
}

/// Hub-and-spoke network with `l` non-hub locations, two fare classes and
/// capacity `c` on each of the `2l` legs.
pub fn gen_hub_spoke(l: usize, horizon: usize, c: u32, seed: u64) -> Result<Instance> {
    HubSpokeSpec::new(l, horizon, c, seed).generate()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusLineSpec {
    pub capacities: Vec<u32>,
    pub horizon: usize,
    /// Fare classes offered on every origin-destination pair.
    pub fare_classes: usize,
    pub load_factor: f64,
    pub seed: u64,
}

impl BusLineSpec {
    pub fn new(capacities: Vec<u32>, horizon: usize, seed: u64) -> Self {
        BusLineSpec { capacities, horizon, fare_classes: 2, load_factor: DEFAULT_LOAD_FACTOR, seed }
    }

    pub fn generate(&self) -> Result<Instance> {
        let legs_n = self.capacities.len();
        if legs_n < 2 {
            return Err(NrmError::InvalidArgument(format!("bus line needs at least 2 legs, got {legs_n}")));
        }
        if self.fare_classes == 0 || self.horizon == 0 {
            return Err(NrmError::InvalidArgument("fare_classes and horizon must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (low, high) = leg_fares(&mut rng, legs_n);
        let mut itineraries = Vec::new();
        for len in 1..=legs_n {
            for start in 0..=legs_n - len {
                itineraries.push((start..start + len).collect::<Vec<_>>());
            }
        }
        let (fares, legs, raw) = price_itineraries(&mut rng, &itineraries, &low, &high, self.fare_classes);
        let probs = scale_to_load(&raw, &legs, &self.capacities, self.horizon, self.load_factor);
        Instance::stationary(self.capacities.clone(), fares, legs, probs, self.horizon)
    }
}

/// Bus line of consecutive legs; products are all contiguous leg runs in
/// every fare class.
pub fn gen_bus_line(spec: &BusLineSpec) -> Result<Instance> {
    spec.generate()
}

fn leg_fares(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut low = Vec::with_capacity(n);
    let mut high = Vec::with_capacity(n);
    for _ in 0..n {
        let l: f64 = rng.gen_range(20.0..=120.0);
        let m: f64 = rng.gen_range(2.0..=5.0);
        low.push(l);
        high.push(l * m);
    }
    (low, high)
}

/// Fares, consumption lists and raw arrival weights for every (itinerary, class).
fn price_itineraries(
    rng: &mut ChaCha8Rng,
    itineraries: &[Vec<usize>],
    low: &[f64],
    high: &[f64],
    classes: usize,
) -> (Vec<f64>, Vec<Vec<usize>>, Vec<f64>) {
    let mut fares = Vec::new();
    let mut legs = Vec::new();
    let mut raw = Vec::new();
    let shares: Vec<f64> = {
        let w: Vec<f64> = (0..classes).map(|k| 3f64.powi(-(k as i32))).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    };
    for it in itineraries {
        let discount = |rng: &mut ChaCha8Rng| if it.len() > 1 { rng.gen_range(0.8..=1.0) } else { 1.0 };
        let base_low = it.iter().map(|&i| low[i]).sum::<f64>() * discount(rng);
        let base_high = it.iter().map(|&i| high[i]).sum::<f64>() * discount(rng);
        let weight: f64 = rng.gen_range(0.5..=1.5);
        for (k, share) in shares.iter().enumerate() {
            let fare = if classes == 1 {
                base_low
            } else {
                let frac = k as f64 / (classes - 1) as f64;
                base_low + frac * (base_high - base_low)
            };
            fares.push(fare);
            legs.push(it.clone());
            raw.push(weight * share);
        }
    }
    (fares, legs, raw)
}

fn scale_to_load(raw: &[f64], legs: &[Vec<usize>], caps: &[u32], horizon: usize, target: f64) -> Vec<f64> {
    let seats: f64 = caps.iter().map(|&c| c as f64).sum();
    let demand_per_unit: f64 = raw.iter().zip(legs).map(|(r, l)| r * l.len() as f64).sum();
    let mass: f64 = raw.iter().sum();
    let mut scale = target * seats / (horizon as f64 * demand_per_unit);
    if scale * mass > 1.0 {
        scale = 1.0 / mass;
    }
    raw.iter().map(|r| r * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hub_spoke_counts() {
        let inst = gen_hub_spoke(2, 20, 3, 1).unwrap();
        assert_eq!(inst.num_legs(), 4);
        assert_eq!(inst.num_products(), 12);
        assert!(inst.capacities().iter().all(|&c| c == 3));
        let big = gen_hub_spoke(20, 50, 1, 7).unwrap();
        assert_eq!(big.num_products(), 840);
    }

    #[test]
    fn hub_spoke_rejects_single_location() {
        assert!(gen_hub_spoke(1, 20, 3, 1).is_err());
    }

    #[test]
    fn hub_spoke_is_deterministic() {
        assert_eq!(gen_hub_spoke(3, 20, 2, 42).unwrap(), gen_hub_spoke(3, 20, 2, 42).unwrap());
        assert_ne!(gen_hub_spoke(3, 20, 2, 42).unwrap(), gen_hub_spoke(3, 20, 2, 43).unwrap());
    }

    #[test]
    fn hub_spoke_two_leg_itineraries_use_in_and_out_legs() {
        let inst = gen_hub_spoke(2, 20, 3, 5).unwrap();
        // single-leg itineraries first, two per class
        for j in 0..8 {
            assert_eq!(inst.legs_of(j).len(), 1);
        }
        assert_eq!(inst.legs_of(8), &[0, 3]);
        assert_eq!(inst.legs_of(10), &[1, 2]);
        for j in (0..12).step_by(2) {
            assert!(inst.fare(j + 1) > inst.fare(j));
        }
    }

    #[test]
    fn bus_line_itineraries() {
        let mut spec = BusLineSpec::new(vec![2, 2, 2], 10, 3);
        spec.fare_classes = 1;
        let inst = gen_bus_line(&spec).unwrap();
        assert_eq!(inst.num_products(), 6);
        let runs: Vec<Vec<usize>> = (0..6).map(|j| inst.legs_of(j).to_vec()).collect();
        assert_eq!(runs, vec![vec![0], vec![1], vec![2], vec![0, 1], vec![1, 2], vec![0, 1, 2]]);
        assert_eq!(inst.column(5), vec![1, 1, 1]);
        assert_eq!(gen_bus_line(&spec).unwrap(), inst);
        spec.fare_classes = 2;
        assert_eq!(gen_bus_line(&spec).unwrap().num_products(), 12);
    }
}
