//! Exact finite-horizon value iteration over the full capacity lattice.
//!
//! The value of every state in every period is stored densely: period `t`
//! occupies `values[(t - 1) * size .. t * size]`, with states indexed by
//! [`Lattice`]. Period `tau + 1` is implicitly zero.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{NrmError, Result};
use crate::model::{Instance, Lattice, State};
use crate::simulate::Policy;

/// Default cap on `prod_i (c_i + 1) * tau`.
pub const DEFAULT_STATE_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    horizon: usize,
    capacities: Vec<u32>,
    lattice: Lattice,
    values: Vec<f64>,
}

impl ValueTable {
    /// Wraps a flat value array; fails if it does not cover every `(t, x)`.
    pub fn from_values(horizon: usize, capacities: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        let lattice = Lattice::new(&capacities);
        let want = horizon * lattice.size();
        if values.len() != want {
            return Err(NrmError::IncompleteTable(format!(
                "expected {want} entries for {horizon} periods x {} states, got {}",
                lattice.size(),
                values.len()
            )));
        }
        Ok(ValueTable { horizon, capacities, lattice, values })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// `v_t(x)`; zero for `t = tau + 1`.
    pub fn value(&self, t: usize, x: &State) -> f64 {
        if t > self.horizon {
            return 0.0;
        }
        self.values[(t - 1) * self.lattice.size() + self.lattice.encode(&x.0)]
    }

    pub fn value_at(&self, t: usize, idx: usize) -> f64 {
        if t > self.horizon {
            return 0.0;
        }
        self.values[(t - 1) * self.lattice.size() + idx]
    }

    /// The value of the initial state, `v_1(c)`.
    pub fn initial_value(&self) -> f64 {
        self.value(1, &State(self.capacities.clone()))
    }

    pub fn period(&self, t: usize) -> &[f64] {
        let n = self.lattice.size();
        &self.values[(t - 1) * n..t * n]
    }

    pub fn period_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.lattice.size();
        &mut self.values[(t - 1) * n..t * n]
    }

    /// Binary dump: magic, then `tau`, `I`, `c_1..c_I` as little-endian u64,
    /// followed by the values as little-endian f64 in storage order.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&(self.horizon as u64).to_le_bytes())?;
        w.write_all(&(self.capacities.len() as u64).to_le_bytes())?;
        for &c in &self.capacities {
            w.write_all(&(c as u64).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(NrmError::Parse("not a value-table dump".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let horizon = next(&mut r)? as usize;
        let legs = next(&mut r)? as usize;
        let mut caps = Vec::with_capacity(legs);
        for _ in 0..legs {
            caps.push(next(&mut r)? as u32);
        }
        let n = horizon * Lattice::new(&caps).size();
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(f64::from_bits(next(&mut r)?));
        }
        Self::from_values(horizon, caps, values)
    }
}

const DUMP_MAGIC: &[u8; 8] = b"NRMVT001";

/// One application of the Bellman operator at `(t, x)` given `next = v_{t+1}`.
///
/// The maximisation over actions decomposes per product: accept `j` iff it
/// fits and `f_j + v_{t+1}(x - a_j) >= v_{t+1}(x)`.
fn bellman_at(inst: &Instance, lat: &Lattice, t: usize, idx: usize, x: &State, next: Option<&[f64]>) -> f64 {
    let here = next.map_or(0.0, |v| v[idx]);
    let mut val = here;
    for (j, &p) in inst.probs(t).iter().enumerate() {
        if p == 0.0 || !inst.fits(x, j) {
            continue;
        }
        let there = match next {
            Some(v) => {
                let k = idx - inst.legs_of(j).iter().map(|&i| lat.stride(i)).sum::<usize>();
                v[k]
            }
            None => 0.0,
        };
        let gain = inst.fare(j) + there - here;
        if gain > 0.0 {
            val += p * gain;
        }
    }
    val
}

/// Solves the optimality equations by backward induction.
pub fn value_iteration(inst: &Instance) -> Result<ValueTable> {
    value_iteration_capped(inst, DEFAULT_STATE_CAP)
}

pub fn value_iteration_capped(inst: &Instance, cap: u128) -> Result<ValueTable> {
    let states = inst.lattice_size() * inst.horizon() as u128;
    if states > cap {
        return Err(NrmError::StateSpaceTooLarge { states, cap });
    }
    let lat = Lattice::new(inst.capacities());
    let n = lat.size();
    let tau = inst.horizon();
    let mut values = vec![0.0; n * tau];
    for t in (1..=tau).rev() {
        let (head, tail) = values.split_at_mut(t * n);
        let cur = &mut head[(t - 1) * n..];
        let next = if t < tau { Some(&tail[..n]) } else { None };
        cur.par_iter_mut().enumerate().for_each(|(idx, out)| {
            let x = lat.decode(idx);
            *out = bellman_at(inst, &lat, t, idx, &x, next);
        });
    }
    ValueTable::from_values(tau, inst.capacities().to_vec(), values)
}

/// Largest absolute deviation of `vt` from the Bellman operator applied to itself.
pub fn bellman_residual(inst: &Instance, vt: &ValueTable) -> Result<f64> {
    if vt.horizon() != inst.horizon() || vt.capacities() != inst.capacities() {
        return Err(NrmError::IncompleteTable(format!(
            "table covers horizon {} and capacities {:?}, instance has {} and {:?}",
            vt.horizon(),
            vt.capacities(),
            inst.horizon(),
            inst.capacities()
        )));
    }
    let lat = vt.lattice();
    let tau = inst.horizon();
    let mut worst = 0.0f64;
    for t in 1..=tau {
        let next = if t < tau { Some(vt.period(t + 1)) } else { None };
        let cur = vt.period(t);
        for (idx, x) in lat.states().enumerate() {
            let r = (cur[idx] - bellman_at(inst, lat, t, idx, &x, next)).abs();
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// The policy that is greedy with respect to an exact value table.
pub struct TablePolicy<'a> {
    pub table: &'a ValueTable,
}

impl Policy for TablePolicy<'_> {
    fn accept(&self, inst: &Instance, t: usize, x: &State, j: usize) -> bool {
        if !inst.fits(x, j) {
            return false;
        }
        let y = inst.after_sale(x, j);
        inst.fare(j) + self.table.value(t + 1, &y) >= self.table.value(t + 1, x)
    }
}

/// Mean simulated revenue of the policy greedy in `vt`.
pub fn optimal_policy_revenue(inst: &Instance, vt: &ValueTable, seed: u64, replications: usize) -> f64 {
    let policy = TablePolicy { table: vt };
    crate::simulate::replicate(inst, &policy, seed, 0, replications).iter().sum::<f64>() / replications as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Instance;

    fn single(c: u32, tau: usize, p: f64, f: f64) -> Instance {
        Instance::stationary(vec![c], vec![f], vec![vec![0]], vec![p], tau).unwrap()
    }

    #[test]
    fn terminal_rule() {
        let vt = value_iteration(&single(1, 1, 0.5, 100.0)).unwrap();
        assert!((vt.initial_value() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn ample_capacity_accepts_everything() {
        let inst = Instance::stationary(
            vec![6, 6],
            vec![10.0, 20.0, 35.0],
            vec![vec![0], vec![1], vec![0, 1]],
            vec![0.3, 0.2, 0.1],
            5,
        )
        .unwrap();
        let vt = value_iteration(&inst).unwrap();
        assert!((vt.initial_value() - inst.accept_all_revenue()).abs() < 1e-9);
    }

    #[test]
    fn residual_of_fixed_point_is_zero() {
        let inst = Instance::toy2leg();
        let vt = value_iteration(&inst).unwrap();
        assert!(bellman_residual(&inst, &vt).unwrap() <= 1e-10);
    }

    #[test]
    fn perturbed_entry_shows_in_residual() {
        // One leg, c = 2, tau = 3, p = 0.4, f = 10.
        let inst = single(2, 3, 0.4, 10.0);
        let mut vt = value_iteration(&inst).unwrap();
        let lat = vt.lattice().clone();
        vt.period_mut(2)[lat.encode(&[1])] += 1.0;
        // v_3 = (0, 4, 4), v_2 = (0, 6.4, 8). After the bump v_2(1) = 7.4:
        // residual at (2, 1) is 1; at (1, 1) it is (1 - p) = 0.6 and at (1, 2)
        // it is p = 0.4, since both sale margins stay positive.
        let r = bellman_residual(&inst, &vt).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "{r}");
        assert!(r >= 1.0 - 0.4);
    }

    #[test]
    fn zero_table_residual_is_one_step_revenue() {
        let inst = Instance::stationary(
            vec![1, 2],
            vec![5.0, 7.0, 9.0],
            vec![vec![0], vec![1], vec![0, 1]],
            vec![0.2, 0.3, 0.4],
            3,
        )
        .unwrap();
        let zero = ValueTable::from_values(3, vec![1, 2], vec![0.0; 3 * 6]).unwrap();
        // Brute force: with v = 0 everywhere, B(0)_t(x) = max_u sum_j p_j f_j u_j.
        let lat = Lattice::new(&[1, 2]);
        let mut expect = 0.0f64;
        for x in lat.states() {
            let mut best = 0.0f64;
            for mask in 0u32..8 {
                let ok = (0..3).all(|j| mask & (1 << j) == 0 || inst.fits(&x, j));
                if ok {
                    let r: f64 = (0..3).filter(|j| mask & (1 << j) != 0).map(|j| inst.prob(1, j) * inst.fare(j)).sum();
                    best = best.max(r);
                }
            }
            expect = expect.max(best);
        }
        let r = bellman_residual(&inst, &zero).unwrap();
        assert!((r - expect).abs() < 1e-12);
        assert!((expect - (0.2 * 5.0 + 0.3 * 7.0 + 0.4 * 9.0)).abs() < 1e-12);
    }

    #[test]
    fn incomplete_table_is_rejected() {
        assert!(matches!(
            ValueTable::from_values(2, vec![1], vec![0.0; 3]),
            Err(NrmError::IncompleteTable(_))
        ));
        let inst = single(2, 3, 0.4, 10.0);
        let short = ValueTable::from_values(2, vec![2], vec![0.0; 6]).unwrap();
        assert!(bellman_residual(&inst, &short).is_err());
    }

    #[test]
    fn cap_is_enforced() {
        let inst = single(10, 5, 0.5, 1.0);
        assert!(matches!(value_iteration_capped(&inst, 10), Err(NrmError::StateSpaceTooLarge { .. })));
    }

    #[test]
    fn monotone_in_time_and_capacity() {
        let inst = crate::model::gen_hub_spoke(2, 8, 2, 11).unwrap();
        let vt = value_iteration(&inst).unwrap();
        let lat = vt.lattice().clone();
        for t in 1..=inst.horizon() {
            for (idx, x) in lat.states().enumerate() {
                let v = vt.value_at(t, idx);
                assert!(v >= 0.0);
                assert!(v >= vt.value_at(t + 1, idx) - 1e-12);
                for i in 0..inst.num_legs() {
                    if x.0[i] < inst.capacities()[i] {
                        assert!(vt.value(t, &x.plus_one(i)) >= v - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn dump_round_trip() {
        let inst = Instance::toy2leg();
        let vt = value_iteration(&inst).unwrap();
        let mut buf = Vec::new();
        vt.write_to(&mut buf).unwrap();
        assert_eq!(ValueTable::read_from(&buf[..]).unwrap(), vt);
    }

    #[test]
    fn greedy_policy_revenue() {
        let inst = single(10, 3, 1.0, 10.0);
        let vt = value_iteration(&inst).unwrap();
        assert_eq!(optimal_policy_revenue(&inst, &vt, 1, 50), 30.0);
        let zero = single(3, 4, 0.5, 0.0);
        let vt0 = value_iteration(&zero).unwrap();
        assert_eq!(optimal_policy_revenue(&zero, &vt0, 1, 100), 0.0);
    }
}
