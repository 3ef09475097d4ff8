//! Demographic rates, resource functionals and competition.
//!
//! Rates follow the Holling-type family
//!
//! ```text
//! b^P(R) = αP·R/(βP + γP·R)    d^P(R) = dP + δP·R
//! b^A(R) = αA·R/(βA + γA·R)    d^A(R) = dA
//! ```
//!
//! with `g = b − d`. Plants pay for the interaction through `δP`, which makes
//! `g^P` rise then fall; `g^A` is increasing and concave.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Community;
use crate::tabulated::Grid2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RateParams {
    pub alpha_p: f64,
    pub beta_p: f64,
    pub gamma_p: f64,
    pub d_p: f64,
    pub delta_p: f64,
    pub alpha_a: f64,
    pub beta_a: f64,
    pub gamma_a: f64,
    pub d_a: f64,
}

impl RateParams {
    /// Phase-plane parameter set with `αA = 25, αP = 9, β = γ = 1, δP = 3`.
    pub fn phase_plane(d_a: f64, d_p: f64) -> Self {
        Self {
            alpha_p: 9.0,
            beta_p: 1.0,
            gamma_p: 1.0,
            d_p,
            delta_p: 3.0,
            alpha_a: 25.0,
            beta_a: 1.0,
            gamma_a: 1.0,
            d_a,
        }
    }

    /// Parameter set used for the trait-continuum collapse runs.
    pub fn kinetic_default() -> Self {
        Self {
            alpha_p: 25.0,
            beta_p: 1.0,
            gamma_p: 1.0,
            d_p: 1.0,
            delta_p: 3.0,
            alpha_a: 3.0,
            beta_a: 1.0,
            gamma_a: 0.3,
            d_a: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alphaP", self.alpha_p),
            ("betaP", self.beta_p),
            ("gammaP", self.gamma_p),
            ("dP", self.d_p),
            ("deltaP", self.delta_p),
            ("alphaA", self.alpha_a),
            ("betaA", self.beta_a),
            ("gammaA", self.gamma_a),
            ("dA", self.d_a),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("rates.{name} = {v} must be a positive finite number")));
            }
        }
        Ok(())
    }

    pub fn birth_p(&self, r: f64) -> f64 {
        self.alpha_p * r / (self.beta_p + self.gamma_p * r)
    }

    pub fn death_p(&self, r: f64) -> f64 {
        self.d_p + self.delta_p * r
    }

    pub fn g_p(&self, r: f64) -> f64 {
        self.birth_p(r) - self.death_p(r)
    }

    pub fn birth_a(&self, r: f64) -> f64 {
        self.alpha_a * r / (self.beta_a + self.gamma_a * r)
    }

    pub fn death_a(&self, _r: f64) -> f64 {
        self.d_a
    }

    pub fn g_a(&self, r: f64) -> f64 {
        self.birth_a(r) - self.death_a(r)
    }

    pub fn dg_p(&self, r: f64) -> f64 {
        let s = self.beta_p + self.gamma_p * r;
        self.alpha_p * self.beta_p / (s * s) - self.delta_p
    }

    pub fn dg_a(&self, r: f64) -> f64 {
        let s = self.beta_a + self.gamma_a * r;
        self.alpha_a * self.beta_a / (s * s)
    }

    pub fn d2g_p(&self, r: f64) -> f64 {
        let s = self.beta_p + self.gamma_p * r;
        -2.0 * self.alpha_p * self.beta_p * self.gamma_p / (s * s * s)
    }

    pub fn d2g_a(&self, r: f64) -> f64 {
        let s = self.beta_a + self.gamma_a * r;
        -2.0 * self.alpha_a * self.beta_a * self.gamma_a / (s * s * s)
    }

    /// `sup b^P = αP/γP`.
    pub fn max_birth_p(&self) -> f64 {
        self.alpha_p / self.gamma_p
    }

    pub fn max_birth_a(&self) -> f64 {
        self.alpha_a / self.gamma_a
    }

    /// Checked evaluation of one of the rate functions.
    pub fn eval(&self, f: RateFn, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("resource level {r} is negative")));
        }
        Ok(match f {
            RateFn::BirthP => self.birth_p(r),
            RateFn::DeathP => self.death_p(r),
            RateFn::GrowthP => self.g_p(r),
            RateFn::BirthA => self.birth_a(r),
            RateFn::DeathA => self.death_a(r),
            RateFn::GrowthA => self.g_a(r),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateFn {
    BirthP,
    DeathP,
    GrowthP,
    BirthA,
    DeathA,
    GrowthA,
}

const ROOT_TOL: f64 = 1e-12;

/// Roots `C0⁻ < C0⁺` of `g^P`; `g^P > 0` exactly between them.
pub fn gp_zeros(p: &RateParams) -> Result<(f64, f64)> {
    // δγ R² + (dγ + δβ − α) R + dβ = 0
    let a = p.delta_p * p.gamma_p;
    let b = p.d_p * p.gamma_p + p.delta_p * p.beta_p - p.alpha_p;
    let c = p.d_p * p.beta_p;
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 || b >= 0.0 {
        return Err(Error::NoViableWindow(format!(
            "g^P has no positive part (discriminant {disc:e})"
        )));
    }
    let q = -0.5 * (b - disc.sqrt());
    let (mut lo, mut hi) = (c / q, q / a);
    if disc < 1e-8 * b * b {
        let peak = (lo + hi) / 2.0;
        lo = bisect(|r| p.g_p(r), 0.0, peak, ROOT_TOL)?;
        hi = bisect(|r| p.g_p(r), peak, 2.0 * hi, ROOT_TOL)?;
    }
    Ok((lo, hi))
}

/// `(arg max g^P, max g^P)` over `R ≥ 0`.
pub fn gp_max(p: &RateParams) -> Result<(f64, f64)> {
    let r_star = ((p.alpha_p * p.beta_p / p.delta_p).sqrt() - p.beta_p) / p.gamma_p;
    if r_star <= 0.0 {
        return Err(Error::NoViableWindow(format!(
            "g^P is maximal at R = 0 (stationary point {r_star})"
        )));
    }
    Ok((r_star, p.g_p(r_star)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Viability {
    pub plant_viable: bool,
    pub poll_viable: bool,
}

pub fn viability_check(p: &RateParams) -> Viability {
    Viability {
        plant_viable: gp_zeros(p).is_ok(),
        poll_viable: p.alpha_a / p.gamma_a > p.d_a,
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Internal(format!("no sign change on [{lo}, {hi}]")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_abundance(v: &[f64], len: usize, what: &str) -> Result<()> {
    if v.len() != len {
        return Err(Error::Domain(format!("{what} has length {} but {len} species exist", v.len())));
    }
    if v.iter().any(|&a| !(a >= 0.0)) {
        return Err(Error::Domain(format!("{what} has a negative entry")));
    }
    Ok(())
}

/// `out_i = Σ_{j ∼ i} C_ij · A_j / scale`.
pub fn resources_plants(community: &Community, poll_abund: &[f64], scale: f64) -> Result<Vec<f64>> {
    check_abundance(poll_abund, community.m(), "pollinator abundance")?;
    Ok(plant_resources_unchecked(community, poll_abund, scale))
}

/// `out_j = Σ_{i ∼ j} C_ij · P_i / scale`.
pub fn resources_pollinators(community: &Community, plant_abund: &[f64], scale: f64) -> Result<Vec<f64>> {
    check_abundance(plant_abund, community.n(), "plant abundance")?;
    Ok(pollinator_resources_unchecked(community, plant_abund, scale))
}

pub(crate) fn plant_resources_unchecked(community: &Community, poll_abund: &[f64], scale: f64) -> Vec<f64> {
    (0..community.n())
        .map(|i| community.plant_neighbors(i).iter().map(|&(j, c)| c * poll_abund[j]).sum::<f64>() / scale)
        .collect()
}

pub(crate) fn pollinator_resources_unchecked(community: &Community, plant_abund: &[f64], scale: f64) -> Vec<f64> {
    (0..community.m())
        .map(|j| community.pollinator_neighbors(j).iter().map(|&(i, c)| c * plant_abund[i]).sum::<f64>() / scale)
        .collect()
}

/// Competition kernel on `[0,1]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum KernelSpec {
    Constant { value: f64 },
    Tabulated { grid: Grid2 },
}

impl KernelSpec {
    pub fn constant(value: f64) -> Self {
        KernelSpec::Constant { value }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Constant { value } if !(*value >= 0.0 && value.is_finite()) => {
                Err(Error::Config(format!("kernel value {value} must be nonnegative")))
            }
            KernelSpec::Tabulated { grid } => {
                grid.validate()?;
                if grid.min_max().0 < 0.0 {
                    return Err(Error::Config("kernel grid has negative entries".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            KernelSpec::Constant { value } => *value,
            KernelSpec::Tabulated { grid } => grid.eval(x, y).max(0.0),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            KernelSpec::Constant { value } => Some(*value),
            KernelSpec::Tabulated { .. } => None,
        }
    }
}

/// Plant (`k`) and pollinator (`h`) competition kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernels {
    pub plant: KernelSpec,
    pub pollinator: KernelSpec,
}

impl Kernels {
    pub fn constant(k: f64, h: f64) -> Self {
        Self { plant: KernelSpec::constant(k), pollinator: KernelSpec::constant(h) }
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.pollinator.validate()
    }
}

/// A kernel evaluated on a fixed set of traits.
#[derive(Debug, Clone, PartialEq)]
pub enum CompetitionMatrix {
    Constant { len: usize, value: f64 },
    Dense { len: usize, values: Vec<f64> },
}

impl CompetitionMatrix {
    pub fn new(kernel: &KernelSpec, traits: &[f64]) -> Self {
        let len = traits.len();
        match kernel {
            KernelSpec::Constant { value } => CompetitionMatrix::Constant { len, value: *value },
            KernelSpec::Tabulated { .. } => CompetitionMatrix::Dense {
                len,
                values: traits
                    .iter()
                    .flat_map(|&a| traits.iter().map(move |&b| kernel.eval(a, b)))
                    .collect(),
            },
        }
    }

    pub fn len(&self) -> usize {
        match self {
            CompetitionMatrix::Constant { len, .. } | CompetitionMatrix::Dense { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entry(&self, i: usize, l: usize) -> f64 {
        match self {
            CompetitionMatrix::Constant { value, .. } => *value,
            CompetitionMatrix::Dense { len, values } => values[i * len + l],
        }
    }

    /// `out_i = (1/len) Σ_l k(i, l) · abund_l`.
    pub fn apply(&self, abund: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; abund.len()];
        self.apply_into(abund, &mut out);
        out
    }

    pub fn apply_into(&self, abund: &[f64], out: &mut [f64]) {
        let len = self.len();
        let inv = 1.0 / len as f64;
        match self {
            CompetitionMatrix::Constant { value, .. } => {
                let total = value * abund.iter().sum::<f64>() * inv;
                out.iter_mut().for_each(|o| *o = total);
            }
            CompetitionMatrix::Dense { values, .. } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &values[i * len..(i + 1) * len];
                    *o = row.iter().zip(abund).map(|(k, a)| k * a).sum::<f64>() * inv;
                }
            }
        }
    }
}

/// `out_i = (1/n) Σ_l k(traits_i, traits_l) · abund_l`.
pub fn competition(kernel: &KernelSpec, traits: &[f64], abund: &[f64]) -> Result<Vec<f64>> {
    if traits.len() != abund.len() {
        return Err(Error::Domain("traits and abundances differ in length".into()));
    }
    Ok(CompetitionMatrix::new(kernel, traits).apply(abund))
}
