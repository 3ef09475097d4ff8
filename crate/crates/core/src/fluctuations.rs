//! Gaussian fluctuations around the mean-field path.
//!
//! `dη = J(t)·η dt + diag(σ(t))·dW` with `J` the mean-field Jacobian and
//! `σ_i² = (birth + death + competition)_i · abundance_i`, both evaluated on
//! the linearly interpolated ODE trajectory. Integrated by Euler–Maruyama.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mean_field::{MeanField, MeanFieldState};
use crate::network::Community;
use crate::rates::{plant_resources_unchecked, pollinator_resources_unchecked, CompetitionMatrix, Kernels, RateParams};
use crate::rng::{stream_rng, Stream};
use crate::trajectory::{digest, Scale, Trajectory, TrajectoryMeta};

pub const DEFAULT_DT: f64 = 1e-3;

/// Noise amplitudes `(σ^P, σ^A)` at a mean-field state.
pub fn diffusion_coefficients(
    state: &MeanFieldState,
    community: &Community,
    params: &RateParams,
    kernels: &Kernels,
) -> Result<(Vec<f64>, Vec<f64>)> {
    state.validate(community)?;
    kernels.validate()?;
    let rp = plant_resources_unchecked(community, &state.pollinators, 1.0);
    let ra = pollinator_resources_unchecked(community, &state.plants, 1.0);
    let cp = CompetitionMatrix::new(&kernels.plant, &community.x).apply(&state.plants);
    let ca = CompetitionMatrix::new(&kernels.pollinator, &community.y).apply(&state.pollinators);
    let side = |res: &[f64], comp: &[f64], abund: &[f64], birth: &dyn Fn(f64) -> f64, death: &dyn Fn(f64) -> f64| {
        res.iter()
            .zip(comp)
            .zip(abund)
            .map(|((&r, &c), &v)| {
                let radicand = (birth(r) + death(r) + c) * v;
                if radicand < 0.0 {
                    Err(Error::Internal(format!("negative diffusion radicand {radicand}")))
                } else {
                    Ok(radicand.sqrt())
                }
            })
            .collect::<Result<Vec<f64>>>()
    };
    let sp = side(&rp, &cp, &state.plants, &|r| params.birth_p(r), &|r| params.death_p(r))?;
    let sa = side(&ra, &ca, &state.pollinators, &|r| params.birth_a(r), &|r| params.death_a(r))?;
    Ok((sp, sa))
}

/// Drift matrices and noise amplitudes at `t0 + k·dt`, `k = 0..steps`.
#[derive(Debug, Clone)]
pub struct OuCoefficients {
    pub t0: f64,
    pub dt: f64,
    pub drift: Vec<DMatrix<f64>>,
    pub sigma: Vec<DVector<f64>>,
}

impl OuCoefficients {
    /// Evaluate along `ode` up to `t_end`. Memory is `O(steps·(n+m)²)`.
    pub fn along(
        ode: &Trajectory,
        community: &Community,
        params: &RateParams,
        kernels: &Kernels,
        dt: f64,
        t_end: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt = {dt} must be positive")));
        }
        if ode.is_empty() || ode.n != community.n() || ode.m != community.m() {
            return Err(Error::Alignment("ODE trajectory does not match the community".into()));
        }
        let t0 = ode.times[0];
        let steps = step_index(t0, dt, t_end)?;
        let mf = MeanField::new(community, params, kernels)?;
        let n = community.n();
        let mut drift = Vec::with_capacity(steps);
        let mut sigma = Vec::with_capacity(steps);
        for k in 0..steps {
            let state = MeanFieldState::from_flat(&ode.interpolate(t0 + k as f64 * dt), n);
            drift.push(mf.jacobian(&state)?);
            let (sp, sa) = diffusion_coefficients(&state, community, params, kernels)?;
            sigma.push(DVector::from_iterator(sp.len() + sa.len(), sp.into_iter().chain(sa)));
        }
        Ok(Self { t0, dt, drift, sigma })
    }

    pub fn steps(&self) -> usize {
        self.drift.len()
    }

    pub fn dim(&self) -> usize {
        self.sigma.first().map_or(0, DVector::len)
    }

    /// One Euler–Maruyama path; `noise` fills a vector of standard normals
    /// per step. Returns the state after each step count in `record_steps`.
    pub fn path(
        &self,
        eta0: &[f64],
        record_steps: &[usize],
        mut noise: impl FnMut(&mut [f64]),
    ) -> Result<Vec<Vec<f64>>> {
        let dim = self.dim();
        if eta0.len() != dim {
            return Err(Error::Domain(format!("initial fluctuation has length {} but dimension is {dim}", eta0.len())));
        }
        if record_steps.iter().any(|&s| s > self.steps()) {
            return Err(Error::Config("record step beyond the coefficient horizon".into()));
        }
        let sqrt_dt = self.dt.sqrt();
        let mut eta = DVector::from_column_slice(eta0);
        let mut xi = vec![0.0; dim];
        let mut out = Vec::with_capacity(record_steps.len());
        let mut next = 0;
        for k in 0..=self.steps() {
            while next < record_steps.len() && record_steps[next] == k {
                out.push(eta.as_slice().to_vec());
                next += 1;
            }
            if k == self.steps() {
                break;
            }
            noise(&mut xi);
            let drift = &self.drift[k] * &eta;
            for i in 0..dim {
                eta[i] += drift[i] * self.dt + self.sigma[k][i] * sqrt_dt * xi[i];
            }
        }
        Ok(out)
    }
}

fn step_index(t0: f64, dt: f64, t: f64) -> Result<usize> {
    let k = ((t - t0) / dt).round();
    if k < 0.0 || ((t - t0) - k * dt).abs() > 1e-6 * dt {
        return Err(Error::Config(format!("time {t} is not on the dt = {dt} grid starting at {t0}")));
    }
    Ok(k as usize)
}

/// Sample one fluctuation path from `η0`, recorded at `record_times` (on the
/// `dt` grid starting at the first ODE sample).
#[allow(clippy::too_many_arguments)]
pub fn simulate_ou(
    ode: &Trajectory,
    community: &Community,
    params: &RateParams,
    kernels: &Kernels,
    eta0: &[f64],
    dt: f64,
    record_times: &[f64],
    seed: u64,
) -> Result<Trajectory> {
    let t_end = record_times.last().copied().unwrap_or(ode.times.first().copied().unwrap_or(0.0));
    let coeffs = OuCoefficients::along(ode, community, params, kernels, dt, t_end)?;
    let mut traj = Trajectory::new(
        community.n(),
        community.m(),
        TrajectoryMeta {
            scale: Scale::Ou,
            seed: Some(seed),
            params_digest: digest(&(params, kernels, dt, community.seed)),
            carrying_capacity: None,
        },
    );
    let rows = sample_paths(&coeffs, eta0, record_times, seed, 0)?;
    for (&t, row) in record_times.iter().zip(rows) {
        traj.push(t, row)?;
    }
    Ok(traj)
}

/// Path `index` of a family seeded by `seed`, from precomputed coefficients.
pub fn sample_paths(
    coeffs: &OuCoefficients,
    eta0: &[f64],
    record_times: &[f64],
    seed: u64,
    index: u64,
) -> Result<Vec<Vec<f64>>> {
    let record_steps = record_times
        .iter()
        .map(|&t| step_index(coeffs.t0, coeffs.dt, t))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = stream_rng(seed, Stream::Fluctuations, index);
    coeffs.path(eta0, &record_steps, |xi| xi.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng)))
}

/// `η^K(t) = √K·(X^K(t) − x(t))` on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationSamples {
    pub times: Vec<f64>,
    /// `samples[t][replica][coordinate]`.
    pub samples: Vec<Vec<Vec<f64>>>,
}

pub fn empirical_fluctuations(ibm: &[Trajectory], ode: &Trajectory, k: u64) -> Result<FluctuationSamples> {
    let root_k = (k as f64).sqrt();
    for (r, traj) in ibm.iter().enumerate() {
        if traj.n != ode.n || traj.m != ode.m {
            return Err(Error::Alignment(format!("replica {r} has a different species count")));
        }
        if traj.times.len() != ode.times.len()
            || traj.times.iter().zip(&ode.times).any(|(a, b)| (a - b).abs() > 1e-12 * b.abs().max(1.0))
        {
            return Err(Error::Alignment(format!("replica {r} is sampled on a different time grid")));
        }
        if traj.meta.carrying_capacity.is_some_and(|kk| kk != k) {
            return Err(Error::Alignment(format!("replica {r} was run at a different K")));
        }
    }
    let samples = (0..ode.len())
        .map(|t| {
            ibm.iter()
                .map(|traj| traj.values[t].iter().zip(&ode.values[t]).map(|(x, y)| root_k * (x - y)).collect())
                .collect()
        })
        .collect();
    Ok(FluctuationSamples { times: ode.times.clone(), samples })
}

/// Per-coordinate sample mean, unbiased variance and standard error of the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub std_error: Vec<f64>,
}

pub fn moments(samples: &[Vec<f64>]) -> Moments {
    let count = samples.len() as f64;
    let dim = samples.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..dim).map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / count).collect();
    let variance: Vec<f64> = (0..dim)
        .map(|i| samples.iter().map(|s| (s[i] - mean[i]).powi(2)).sum::<f64>() / (count - 1.0))
        .collect();
    let std_error = variance.iter().map(|v| (v / count).sqrt()).collect();
    Moments { mean, variance, std_error }
}

/// Solve `Jς + ςJᵀ + diag(σ²) = 0` for the stationary covariance.
pub fn lyapunov_covariance(j: &DMatrix<f64>, sigma: &[f64]) -> Result<DMatrix<f64>> {
    let d = j.nrows();
    let eye = DMatrix::<f64>::identity(d, d);
    let op = eye.kronecker(j) + j.kronecker(&eye);
    let mut rhs = DVector::zeros(d * d);
    for (i, s) in sigma.iter().enumerate() {
        rhs[i * d + i] = -s * s;
    }
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Domain("Lyapunov operator is singular (drift not Hurwitz)".into()))?;
    Ok(DMatrix::from_column_slice(d, d, sol.as_slice()))
}
