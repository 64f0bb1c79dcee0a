//! Value function approximations: an optional affine baseline plus a
//! time-dependent offset and a weighted sum of exponential ridge functions,
//!
//! ```text
//! v_t(x) ~ psi_t(x) + xi_t - sum_k V[t][k] * exp(-beta_k . x)
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NrmError, Result};
use crate::model::{Instance, State};
use crate::simulate::Policy;

/// `psi_t(x) = theta_t + sum_i W[t][i] x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineBaseline {
    pub theta: Vec<f64>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
}

impl AffineBaseline {
    pub fn zeros(horizon: usize, legs: usize) -> Self {
        AffineBaseline { theta: vec![0.0; horizon], w: vec![vec![0.0; legs]; horizon] }
    }

    pub fn eval(&self, t: usize, x: &State) -> f64 {
        if t > self.theta.len() {
            return 0.0;
        }
        self.theta[t - 1] + self.w[t - 1].iter().zip(&x.0).map(|(w, &xi)| w * xi as f64).sum::<f64>()
    }

    /// Bid price of leg `i` in period `t` (zero past the horizon).
    pub fn bid_price(&self, t: usize, i: usize) -> f64 {
        if t > self.w.len() {
            0.0
        } else {
            self.w[t - 1][i]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Baseline {
    #[default]
    Zero,
    Affine(AffineBaseline),
}

impl Baseline {
    pub fn eval(&self, t: usize, x: &State) -> f64 {
        match self {
            Baseline::Zero => 0.0,
            Baseline::Affine(a) => a.eval(t, x),
        }
    }

    /// `psi_t(x) - psi_t(x - a_j)`.
    pub fn sale_drop(&self, inst: &Instance, t: usize, j: usize) -> f64 {
        match self {
            Baseline::Zero => 0.0,
            Baseline::Affine(a) => inst.legs_of(j).iter().map(|&i| a.bid_price(t, i)).sum(),
        }
    }

    /// The `W[t][i]` term of the monotonicity rows (zero without an affine part).
    pub fn slope(&self, t: usize, i: usize) -> f64 {
        match self {
            Baseline::Zero => 0.0,
            Baseline::Affine(a) => a.bid_price(t, i),
        }
    }
}

/// Direction of an exponential ridge function `phi(x) = exp(-beta . x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeBasis {
    pub beta: Vec<f64>,
}

impl RidgeBasis {
    pub fn new(beta: Vec<f64>) -> Self {
        RidgeBasis { beta }
    }

    /// `sum_i c_i |beta_i|`.
    pub fn weighted_norm(&self, caps: &[u32]) -> f64 {
        weighted_norm(&self.beta, caps)
    }

    /// The starting direction `beta_i = 1 / (c_i I)`.
    pub fn uniform(caps: &[u32]) -> Self {
        let n = caps.len() as f64;
        RidgeBasis { beta: caps.iter().map(|&c| if c == 0 { 0.0 } else { 1.0 / (c as f64 * n) }).collect() }
    }

    pub fn exponent(&self, x: &[u32]) -> f64 {
        self.beta.iter().zip(x).map(|(b, &v)| b * v as f64).sum()
    }
}

fn weighted_norm(beta: &[f64], caps: &[u32]) -> f64 {
    beta.iter().zip(caps).map(|(b, &c)| c as f64 * b.abs()).sum()
}

/// `exp(-beta . x)`.
pub fn eval_basis(b: &RidgeBasis, x: &State) -> f64 {
    (-b.exponent(&x.0)).exp()
}

/// Rescales `beta` onto the surface `sum_i c_i |beta_i| = 1`, keeping signs.
pub fn project_norm(beta: &[f64], caps: &[u32]) -> Result<RidgeBasis> {
    if beta.len() != caps.len() {
        return Err(NrmError::InvalidArgument(format!(
            "beta has {} components, {} capacities given",
            beta.len(),
            caps.len()
        )));
    }
    let n = weighted_norm(beta, caps);
    if !(n > 0.0) || !n.is_finite() {
        return Err(NrmError::DegenerateDirection);
    }
    Ok(RidgeBasis { beta: beta.iter().map(|b| b / n).collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Approximation {
    pub baseline: Baseline,
    pub xi: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
    #[serde(rename = "betas", with = "betas_as_vectors")]
    pub bases: Vec<RidgeBasis>,
}

mod betas_as_vectors {
    use super::RidgeBasis;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(b: &[RidgeBasis], s: S) -> Result<S::Ok, S::Error> {
        b.iter().map(|r| &r.beta).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<RidgeBasis>, D::Error> {
        Ok(Vec::<Vec<f64>>::deserialize(d)?.into_iter().map(RidgeBasis::new).collect())
    }
}

impl Approximation {
    /// All-zero approximation with the given bases.
    pub fn new(baseline: Baseline, horizon: usize, bases: Vec<RidgeBasis>) -> Self {
        let k = bases.len();
        Approximation { baseline, xi: vec![0.0; horizon], v: vec![vec![0.0; k]; horizon], bases }
    }

    pub fn horizon(&self) -> usize {
        self.xi.len()
    }

    pub fn num_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.bases.len();
        if self.v.len() != self.xi.len() || self.v.iter().any(|row| row.len() != k) {
            return Err(NrmError::Validation(format!(
                "V must be {} x {k} to match xi and the bases",
                self.xi.len()
            )));
        }
        let finite = self.xi.iter().chain(self.v.iter().flatten()).all(|v| v.is_finite())
            && self.bases.iter().flat_map(|b| &b.beta).all(|v| v.is_finite());
        if !finite {
            return Err(NrmError::Validation("approximation has non-finite entries".into()));
        }
        Ok(())
    }

    /// `sum_k V[t][k] phi_k(x)`; zero past the horizon.
    pub fn ridge_part(&self, t: usize, x: &State) -> f64 {
        if t > self.horizon() {
            return 0.0;
        }
        self.v[t - 1].iter().zip(&self.bases).map(|(v, b)| v * eval_basis(b, x)).sum()
    }

    /// The approximation without its offset `xi_t`.
    pub fn shape(&self, t: usize, x: &State) -> f64 {
        self.baseline.eval(t, x) - self.ridge_part(t, x)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("approximation serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: Approximation = serde_json::from_str(text).map_err(|e| NrmError::Parse(e.to_string()))?;
        a.validate()?;
        Ok(a)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Value of the approximation at `(t, x)`; zero for `t = tau + 1`.
pub fn eval_approx(a: &Approximation, t: usize, x: &State) -> f64 {
    if t > a.horizon() {
        return 0.0;
    }
    a.shape(t, x) + a.xi[t - 1]
}

/// Accept/reject decision of the policy induced by `a`.
///
/// A request for `j` is accepted when it fits and its fare covers the drop
/// in approximated continuation value, `f_j >= dpsi - sum_k V[t+1][k] dphi_k`.
/// In the last period the continuation is worthless. Ties accept.
pub fn decide(a: &Approximation, inst: &Instance, t: usize, x: &State, j: usize) -> bool {
    if !inst.fits(x, j) {
        return false;
    }
    if t >= inst.horizon() {
        return inst.fare(j) >= 0.0;
    }
    let y = inst.after_sale(x, j);
    let dpsi = a.baseline.sale_drop(inst, t + 1, j);
    let dphi: f64 =
        a.v[t].iter().zip(&a.bases).map(|(v, b)| v * (eval_basis(b, x) - eval_basis(b, &y))).sum();
    inst.fare(j) >= dpsi - dphi
}

impl Policy for Approximation {
    fn accept(&self, inst: &Instance, t: usize, x: &State, j: usize) -> bool {
        decide(self, inst, t, x, j)
    }
}
