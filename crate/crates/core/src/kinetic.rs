//! Trait-continuum limit on the uniform grid `x_i = i/N`, `i = 0..=N`.
//!
//! Integrals over traits use the rectangular rule with weight `1/N`:
//!
//! ```text
//! dp_i/dt = [g^P((1/N) Σ_j ψ_ij a_j) − (1/N) Σ_l k_il p_l]·p_i
//! da_j/dt = [g^A((1/N) Σ_i ψ_ij p_i) − (1/N) Σ_l h_jl a_l]·a_j
//! ```
//!
//! with `ψ = φ·c/2`: the interaction weights are `c/(n+m)` and `m = n`
//! asymptotically, so `n·C_ij → c/2`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mean_field::{MeanField, MeanFieldState};
use crate::network::{Adjacency, Community, CommunitySpec, GraphonSpec, HarvestSpec, TraitDistribution};
use crate::ode::{integrate_nonnegative, OdeOptions};
use crate::rates::{gp_max, KernelSpec, Kernels, RateParams};
use crate::rng::{stream_rng, Stream};
use crate::tabulated::Grid2;

/// Competition constant used when `k = h` is not configured.
///
/// Collapse speed depends strongly on it: at `k = h = 0.5` the plant atom
/// sits near `x ≈ 0.58` but neighbouring cells still hold ~30% of the mass
/// at `t = 1500` on a 100-cell grid; at `0.2` the collapse is complete.
pub const DEFAULT_COMPETITION: f64 = 0.2;

/// Cells lighter than this are ignored by [`stationarity_residual`].
pub const SUPPORT_MASS: f64 = 1e-9;

/// Continuum interaction kernel `ψ(x, y) = φ(x, y)·c(x, y)/2`.
pub fn psi(x: f64, y: f64, graphon: &GraphonSpec, harvest: &HarvestSpec) -> f64 {
    graphon.eval(x, y) * harvest.mean(x, y) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub n_grid: usize,
    pub p: Vec<f64>,
    pub a: Vec<f64>,
}

impl DensityField {
    pub fn new(n_grid: usize, p: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        let f = Self { n_grid, p, a };
        f.validate()?;
        Ok(f)
    }

    pub fn zeros(n_grid: usize) -> Self {
        Self { n_grid, p: vec![0.0; n_grid + 1], a: vec![0.0; n_grid + 1] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid == 0 {
            return Err(Error::Config("grid resolution N must be positive".into()));
        }
        if self.p.len() != self.n_grid + 1 || self.a.len() != self.n_grid + 1 {
            return Err(Error::Domain(format!("density vectors must have N + 1 = {} entries", self.n_grid + 1)));
        }
        if self.p.iter().chain(&self.a).any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain("densities must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn gridpoint(&self, i: usize) -> f64 {
        i as f64 / self.n_grid as f64
    }

    pub fn gridpoints(&self) -> Vec<f64> {
        (0..=self.n_grid).map(|i| self.gridpoint(i)).collect()
    }

    pub fn plant_mass(&self) -> f64 {
        self.p.iter().sum::<f64>() / self.n_grid as f64
    }

    pub fn pollinator_mass(&self) -> f64 {
        self.a.iter().sum::<f64>() / self.n_grid as f64
    }

    /// Plants as weighted atoms `(x_i, p_i/N)`.
    pub fn plant_measure(&self) -> Vec<(f64, f64)> {
        self.p.iter().enumerate().map(|(i, &v)| (self.gridpoint(i), v / self.n_grid as f64)).collect()
    }

    pub fn pollinator_measure(&self) -> Vec<(f64, f64)> {
        self.a.iter().enumerate().map(|(i, &v)| (self.gridpoint(i), v / self.n_grid as f64)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,p,a\n");
        for i in 0..=self.n_grid {
            out.push_str(&format!("{},{},{}\n", self.gridpoint(i), self.p[i], self.a[i]));
        }
        out
    }

    fn to_flat(&self) -> Vec<f64> {
        self.p.iter().chain(&self.a).copied().collect()
    }

    fn from_flat(n_grid: usize, flat: &[f64]) -> Self {
        Self { n_grid, p: flat[..=n_grid].to_vec(), a: flat[n_grid + 1..].to_vec() }
    }
}

/// Positive initial densities `scale·U[0.5, 1.5]`, independent per cell.
pub fn random_field(n_grid: usize, scale: f64, seed: u64) -> DensityField {
    let draw = |index| {
        let mut rng = stream_rng(seed, Stream::Initial, index);
        (0..=n_grid).map(|_| scale * rng.random_range(0.5..1.5)).collect::<Vec<f64>>()
    };
    let p = draw(0);
    let a = draw(1);
    DensityField { n_grid, p, a }
}

/// Initial density profile on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum DensityProfile {
    Constant { value: f64 },
    /// `at0 + (at1 − at0)·x`.
    Affine { at0: f64, at1: f64 },
    /// Values on a uniform grid of `[0, 1]`, linearly interpolated.
    Tabulated { values: Vec<f64> },
}

impl DensityProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DensityProfile::Constant { value } => *value >= 0.0 && value.is_finite(),
            DensityProfile::Affine { at0, at1 } => *at0 >= 0.0 && *at1 >= 0.0 && at0.is_finite() && at1.is_finite(),
            DensityProfile::Tabulated { values } => {
                values.len() >= 2 && values.iter().all(|v| *v >= 0.0 && v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("density profile must be finite, nonnegative, and tabulated on ≥ 2 points".into()))
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            DensityProfile::Constant { value } => *value,
            DensityProfile::Affine { at0, at1 } => at0 + (at1 - at0) * x,
            DensityProfile::Tabulated { values } => {
                let s = x * (values.len() - 1) as f64;
                let i = (s.floor() as usize).min(values.len() - 2);
                let w = s - i as f64;
                values[i] * (1.0 - w) + values[i + 1] * w
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum GridKernel {
    Constant(f64),
    Dense(Vec<f64>),
}

impl GridKernel {
    fn new(spec: &KernelSpec, n_grid: usize) -> Self {
        match spec.as_constant() {
            Some(v) => GridKernel::Constant(v),
            None => {
                let x = |i: usize| i as f64 / n_grid as f64;
                GridKernel::Dense(
                    (0..=n_grid).flat_map(|i| (0..=n_grid).map(move |l| spec.eval(x(i), x(l)))).collect(),
                )
            }
        }
    }

    /// `out_i = (1/N) Σ_l k_il v_l`.
    fn apply(&self, v: &[f64], n_grid: usize, out: &mut [f64]) {
        let inv = 1.0 / n_grid as f64;
        match self {
            GridKernel::Constant(k) => {
                let s = k * v.iter().sum::<f64>() * inv;
                out.iter_mut().for_each(|o| *o = s);
            }
            GridKernel::Dense(values) => {
                let len = v.len();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = values[i * len..(i + 1) * len].iter().zip(v).map(|(k, x)| k * x).sum::<f64>() * inv;
                }
            }
        }
    }
}

/// The discretized continuum system at resolution `N`.
#[derive(Debug, Clone)]
pub struct GridModel {
    pub n_grid: usize,
    /// `ψ(x_i, y_j)`, row-major `(N+1)²`.
    pub psi: Vec<f64>,
    pub params: RateParams,
    pub kernels: Kernels,
    plant_kernel: GridKernel,
    pollinator_kernel: GridKernel,
}

impl GridModel {
    pub fn new(n_grid: usize, psi: Vec<f64>, params: &RateParams, kernels: &Kernels) -> Result<Self> {
        if n_grid == 0 {
            return Err(Error::Config("grid resolution N must be positive".into()));
        }
        if psi.len() != (n_grid + 1) * (n_grid + 1) || psi.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("ψ grid must hold (N+1)² finite nonnegative values".into()));
        }
        params.validate()?;
        kernels.validate()?;
        Ok(Self {
            n_grid,
            psi,
            params: *params,
            kernels: kernels.clone(),
            plant_kernel: GridKernel::new(&kernels.plant, n_grid),
            pollinator_kernel: GridKernel::new(&kernels.pollinator, n_grid),
        })
    }

    pub fn from_fn(n_grid: usize, psi: impl Fn(f64, f64) -> f64, params: &RateParams, kernels: &Kernels) -> Result<Self> {
        let x = |i: usize| i as f64 / n_grid.max(1) as f64;
        let values = (0..=n_grid).flat_map(|i| (0..=n_grid).map(move |j| (i, j))).map(|(i, j)| psi(x(i), x(j))).collect();
        Self::new(n_grid, values, params, kernels)
    }

    pub fn from_specs(
        n_grid: usize,
        graphon: &GraphonSpec,
        harvest: &HarvestSpec,
        params: &RateParams,
        kernels: &Kernels,
    ) -> Result<Self> {
        graphon.validate()?;
        harvest.validate()?;
        Self::from_fn(n_grid, |x, y| psi(x, y, graphon, harvest), params, kernels)
    }

    /// `(g^P − competition, g^A − competition)` per cell.
    fn growth(&self, p: &[f64], a: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let len = self.n_grid + 1;
        let inv = 1.0 / self.n_grid as f64;
        let mut rp = vec![0.0; len];
        let mut ra = vec![0.0; len];
        for i in 0..len {
            let row = &self.psi[i * len..(i + 1) * len];
            rp[i] = row.iter().zip(a).map(|(s, v)| s * v).sum::<f64>() * inv;
            for (r, s) in ra.iter_mut().zip(row) {
                *r += s * p[i];
            }
        }
        ra.iter_mut().for_each(|r| *r *= inv);
        let mut cp = vec![0.0; len];
        let mut ca = vec![0.0; len];
        self.plant_kernel.apply(p, self.n_grid, &mut cp);
        self.pollinator_kernel.apply(a, self.n_grid, &mut ca);
        let gp = rp.iter().zip(&cp).map(|(&r, c)| self.params.g_p(r) - c).collect();
        let ga = ra.iter().zip(&ca).map(|(&r, c)| self.params.g_a(r) - c).collect();
        (gp, ga)
    }

    fn rhs_into(&self, y: &[f64], dy: &mut [f64]) {
        let len = self.n_grid + 1;
        let (p, a) = y.split_at(len);
        let (gp, ga) = self.growth(p, a);
        for (d, (g, v)) in dy.iter_mut().zip(gp.iter().chain(&ga).zip(y)) {
            *d = g * v;
        }
    }

    pub fn rhs(&self, field: &DensityField) -> Result<DensityField> {
        self.check(field)?;
        let y = field.to_flat();
        let mut dy = vec![0.0; y.len()];
        self.rhs_into(&y, &mut dy);
        Ok(DensityField::from_flat(self.n_grid, &dy))
    }

    fn check(&self, field: &DensityField) -> Result<()> {
        field.validate()?;
        if field.n_grid != self.n_grid {
            return Err(Error::Domain(format!("field has N = {} but the model has N = {}", field.n_grid, self.n_grid)));
        }
        Ok(())
    }

    /// Snapshots at `record_times` (strictly increasing, nonnegative).
    pub fn integrate(&self, field0: &DensityField, record_times: &[f64], opts: &OdeOptions) -> Result<Vec<DensityField>> {
        self.check(field0)?;
        if !record_times.windows(2).all(|w| w[0] < w[1]) || record_times.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::Config("record times must be strictly increasing and nonnegative".into()));
        }
        let (rows, _) = integrate_nonnegative(|y, dy| self.rhs_into(y, dy), 0.0, &field0.to_flat(), record_times, opts)?;
        Ok(rows.iter().map(|r| DensityField::from_flat(self.n_grid, r)).collect())
    }

    /// Largest `|g − competition|` over cells of mass above [`SUPPORT_MASS`].
    pub fn stationarity_residual(&self, field: &DensityField) -> Result<f64> {
        self.check(field)?;
        let (gp, ga) = self.growth(&field.p, &field.a);
        let inv = 1.0 / self.n_grid as f64;
        Ok(field
            .p
            .iter()
            .zip(&gp)
            .chain(field.a.iter().zip(&ga))
            .filter(|(&v, _)| v * inv > SUPPORT_MASS)
            .map(|(_, g)| g.abs())
            .fold(0.0, f64::max))
    }

    /// A community whose mean-field system is exactly this grid scheme:
    /// gridpoint traits, `n = m = N+1`, complete graph, `C_ij = ψ_ij/N`, and
    /// kernels scaled by `(N+1)/N` to turn the `1/n` average into `1/N`.
    pub fn matched_community(&self) -> Result<(Community, Kernels)> {
        let len = self.n_grid + 1;
        let inv = 1.0 / self.n_grid as f64;
        let x: Vec<f64> = (0..len).map(|i| i as f64 * inv).collect();
        let weights = self.psi.iter().map(|s| s * inv).collect();
        let community = Community::new(x.clone(), x, Adjacency::complete(len, len), weights, 0)?;
        let factor = len as f64 * inv;
        let scale = |k: &KernelSpec| match k {
            KernelSpec::Constant { value } => KernelSpec::Constant { value: value * factor },
            KernelSpec::Tabulated { grid } => KernelSpec::Tabulated {
                grid: Grid2 { values: grid.values.iter().map(|row| row.iter().map(|v| v * factor).collect()).collect() },
            },
        };
        let kernels = Kernels { plant: scale(&self.kernels.plant), pollinator: scale(&self.kernels.pollinator) };
        Ok((community, kernels))
    }
}

pub fn grid_rhs(field: &DensityField, model: &GridModel) -> Result<DensityField> {
    model.rhs(field)
}

pub fn integrate_kinetic(
    field0: &DensityField,
    model: &GridModel,
    record_times: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<DensityField>> {
    model.integrate(field0, record_times, opts)
}

pub fn stationarity_residual(field: &DensityField, model: &GridModel) -> Result<f64> {
    model.stationarity_residual(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConcentrationMetrics {
    pub plant_max_fraction: f64,
    pub plant_argmax: f64,
    pub plant_argmax_index: usize,
    pub poll_max_fraction: f64,
    pub poll_argmax: f64,
    pub poll_argmax_index: usize,
    pub plant_mass: f64,
    pub poll_mass: f64,
    /// Set when either side has no mass; its fraction is then 0.
    pub zero_mass: bool,
}

/// Heaviest cell and its share of the mass, per side. Ties go to the lower index.
pub fn concentration_metrics(field: &DensityField) -> Result<ConcentrationMetrics> {
    field.validate()?;
    let heaviest = |v: &[f64]| {
        let total: f64 = v.iter().sum();
        let mut best = 0;
        for (i, &x) in v.iter().enumerate() {
            if x > v[best] {
                best = i;
            }
        }
        let fraction = if total > 0.0 { v[best] / total } else { 0.0 };
        (best, fraction, total)
    };
    let (pi, pf, pt) = heaviest(&field.p);
    let (ai, af, at) = heaviest(&field.a);
    Ok(ConcentrationMetrics {
        plant_max_fraction: pf,
        plant_argmax: field.gridpoint(pi),
        plant_argmax_index: pi,
        poll_max_fraction: af,
        poll_argmax: field.gridpoint(ai),
        poll_argmax_index: ai,
        plant_mass: pt / field.n_grid as f64,
        poll_mass: at / field.n_grid as f64,
        zero_mass: pt == 0.0 || at == 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StableStatePrediction {
    pub exists: bool,
    pub x0: f64,
    pub plant_mass: f64,
    pub poll_mass: f64,
    /// `arg max g^P`: the resource level the plant atom sits at.
    pub r_star: f64,
}

/// Points in the sign scan that locates roots before bisection.
const SCAN_POINTS: usize = 4096;

/// Single-atom stable state for constant `k`, `h`: plants at `x0`, pollinators at `y = 1`.
///
/// `x0` solves `g^A(M_P·ψ(x,1))·ψ(x,1) = h·R*` with `M_P = max g^P / k`.
pub fn predicted_stable_state(
    params: &RateParams,
    k: f64,
    h: f64,
    psi: &dyn Fn(f64, f64) -> f64,
) -> Result<StableStatePrediction> {
    params.validate()?;
    if !(k > 0.0 && h > 0.0) {
        return Err(Error::Config("competition constants must be positive".into()));
    }
    let (r_star, g_max) = gp_max(params)?;
    let plant_mass = g_max / k;
    let f = |x: f64| {
        let s = psi(x, 1.0);
        params.g_a(plant_mass * s) * s - h * r_star
    };
    let values: Vec<f64> = (0..=SCAN_POINTS).map(|i| f(i as f64 / SCAN_POINTS as f64)).collect();
    let changes: Vec<usize> = (0..SCAN_POINTS)
        .filter(|&i| (values[i] < 0.0) != (values[i + 1] < 0.0))
        .collect();
    let none = StableStatePrediction { exists: false, x0: f64::NAN, plant_mass, poll_mass: f64::NAN, r_star };
    match changes.as_slice() {
        [] => Ok(none),
        [i] => {
            let (lo, hi) = (*i as f64 / SCAN_POINTS as f64, (*i + 1) as f64 / SCAN_POINTS as f64);
            let x0 = crate::rates::bisect(f, lo, hi, 0.0)?;
            let s = psi(x0, 1.0);
            if !(s > 0.0) {
                return Ok(none);
            }
            Ok(StableStatePrediction { exists: true, x0, plant_mass, poll_mass: r_star / s, r_star })
        }
        many => Err(Error::AmbiguousRoot { count: many.len() }),
    }
}

/// Kantorovich–Rubinstein distance between weighted atoms on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct W1 {
    pub distance: f64,
    /// Masses differed: `distance = |Δmass| + W1(normalized measures)`.
    pub composite: bool,
}

/// Masses closer than this (relative) are treated as equal.
const MASS_MATCH: f64 = 1e-12;

pub fn wasserstein1(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<W1> {
    let mass = |m: &[(f64, f64)]| -> Result<f64> {
        if m.iter().any(|&(x, w)| !(w >= 0.0 && w.is_finite() && x.is_finite())) {
            return Err(Error::Domain("measure atoms need finite positions and nonnegative finite weights".into()));
        }
        Ok(m.iter().map(|&(_, w)| w).sum())
    };
    let (ma, mb) = (mass(a)?, mass(b)?);
    if ma == 0.0 || mb == 0.0 {
        return Ok(W1 { distance: (ma - mb).abs(), composite: ma != mb });
    }
    if (ma - mb).abs() <= MASS_MATCH * ma.max(mb) {
        return Ok(W1 { distance: cdf_gap(a, 1.0, b, 1.0), composite: false });
    }
    Ok(W1 { distance: (ma - mb).abs() + cdf_gap(a, 1.0 / ma, b, 1.0 / mb), composite: true })
}

/// `∫ |F_a − F_b|` with atom weights multiplied by `sa`, `sb`.
fn cdf_gap(a: &[(f64, f64)], sa: f64, b: &[(f64, f64)], sb: f64) -> f64 {
    let mut events: Vec<(f64, f64)> = a
        .iter()
        .map(|&(x, w)| (x, w * sa))
        .chain(b.iter().map(|&(x, w)| (x, -w * sb)))
        .collect();
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut gap = 0.0;
    let mut diff = 0.0;
    for pair in events.windows(2) {
        diff += pair[0].1;
        gap += diff.abs() * (pair[1].0 - pair[0].0);
    }
    gap
}

/// Inputs of a discrete-vs-continuum comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceSetup {
    pub graphon: GraphonSpec,
    pub harvest: HarvestSpec,
    pub params: RateParams,
    pub kernels: Kernels,
    pub plant_density: DensityProfile,
    pub pollinator_density: DensityProfile,
    pub n_grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceRow {
    pub n: usize,
    pub t: f64,
    pub mean_plant_w1: f64,
    pub mean_poll_w1: f64,
    pub sd_plant_w1: f64,
    pub sd_poll_w1: f64,
    pub seeds: usize,
}

/// For each `n` (with `m = n`) and seed, sample a community, start from
/// `P_i = p̄0(x_i)`, integrate the mean-field system and measure `W1` to the
/// grid solution at each time in `times`. Rows are ordered by `(n, t)`.
pub fn convergence_study(
    setup: &ConvergenceSetup,
    ns: &[usize],
    times: &[f64],
    seeds: &[u64],
    opts: &OdeOptions,
) -> Result<Vec<ConvergenceRow>> {
    setup.plant_density.validate()?;
    setup.pollinator_density.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("convergence study needs at least one seed".into()));
    }
    let model = GridModel::from_specs(setup.n_grid, &setup.graphon, &setup.harvest, &setup.params, &setup.kernels)?;
    let grid0 = DensityField {
        n_grid: setup.n_grid,
        p: (0..=setup.n_grid).map(|i| setup.plant_density.eval(i as f64 / setup.n_grid as f64)).collect(),
        a: (0..=setup.n_grid).map(|i| setup.pollinator_density.eval(i as f64 / setup.n_grid as f64)).collect(),
    };
    let grid = model.integrate(&grid0, times, opts)?;

    let mut rows = Vec::new();
    for &n in ns {
        let spec = CommunitySpec {
            n,
            m: n,
            graphon: setup.graphon.clone(),
            harvest: setup.harvest.clone(),
            plant_traits: TraitDistribution::Uniform,
            pollinator_traits: TraitDistribution::Uniform,
        };
        let per_seed = seeds
            .par_iter()
            .map(|&seed| -> Result<Vec<(f64, f64)>> {
                let community = spec.sample(seed)?;
                let mf = MeanField::new(&community, &setup.params, &setup.kernels)?;
                let init = MeanFieldState {
                    plants: community.x.iter().map(|&x| setup.plant_density.eval(x)).collect(),
                    pollinators: community.y.iter().map(|&y| setup.pollinator_density.eval(y)).collect(),
                };
                let traj = mf.integrate(&init, times, opts)?;
                let inv = 1.0 / n as f64;
                (0..times.len())
                    .map(|k| {
                        let pm: Vec<(f64, f64)> =
                            community.x.iter().zip(traj.plants(k)).map(|(&x, &v)| (x, v * inv)).collect();
                        let am: Vec<(f64, f64)> =
                            community.y.iter().zip(traj.pollinators(k)).map(|(&y, &v)| (y, v * inv)).collect();
                        Ok((
                            wasserstein1(&pm, &grid[k].plant_measure())?.distance,
                            wasserstein1(&am, &grid[k].pollinator_measure())?.distance,
                        ))
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()?;
        for (k, &t) in times.iter().enumerate() {
            let plant: Vec<f64> = per_seed.iter().map(|s| s[k].0).collect();
            let poll: Vec<f64> = per_seed.iter().map(|s| s[k].1).collect();
            let (mp, sp) = mean_sd(&plant);
            let (ma, sa) = mean_sd(&poll);
            rows.push(ConvergenceRow {
                n,
                t,
                mean_plant_w1: mp,
                mean_poll_w1: ma,
                sd_plant_w1: sp,
                sd_poll_w1: sa,
                seeds: seeds.len(),
            });
        }
    }
    Ok(rows)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}
