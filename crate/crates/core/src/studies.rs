//! Cross-scale comparisons built from the public simulators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluctuations::{empirical_fluctuations, moments, sample_paths, OuCoefficients, DEFAULT_DT};
use crate::gillespie::{simulate, SimOptions};
use crate::mean_field::{integrate, uniform_times, MeanFieldState};
use crate::network::{Adjacency, Community};
use crate::ode::OdeOptions;
use crate::rates::{KernelSpec, Kernels, RateParams};
use crate::rng::replica_seed;
use crate::tabulated::Grid2;
use crate::single_pair::{count_and_solve, PairParams};
use crate::trajectory::Trajectory;

/// IBM-vs-ODE comparison over a ladder of carrying capacities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LlnSetup {
    pub params: RateParams,
    pub kernels: Kernels,
    pub init_plants: Vec<f64>,
    pub init_pollinators: Vec<f64>,
    pub t_end: f64,
    /// Spacing of the grid on which the supremum over time is taken.
    pub record_dt: f64,
    pub replicas: usize,
    pub ks: Vec<u64>,
    pub seed: u64,
}

impl LlnSetup {
    /// A 3×3 complete community with circulant, doubly stochastic weights and
    /// traits on the nodes of [`Self::reference_kernels`].
    ///
    /// Every row and column of `C` sums to one and every kernel row sums to
    /// 3, so the symmetric state `P = 1.5, A = 2` is an equilibrium (the pair
    /// equilibrium for `c = k = h = 1`); per-capita event rates there are
    /// about 8.
    pub fn reference_community() -> Community {
        let w = [0.5, 0.3, 0.2];
        let weights = (0..3).flat_map(|i| (0..3).map(move |j| w[(j + 3 - i) % 3])).collect();
        Community::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0], Adjacency::complete(3, 3), weights, 0)
            .expect("reference community is valid")
    }

    /// Stronger competition within a species than between species. With a
    /// constant kernel only the total abundance is regulated, and modes that
    /// shift mass between species are neutral.
    pub fn reference_kernels() -> Kernels {
        let grid = Grid2 { values: vec![vec![1.5, 0.75, 0.75], vec![0.75, 1.5, 0.75], vec![0.75, 0.75, 1.5]] };
        Kernels { plant: KernelSpec::Tabulated { grid: grid.clone() }, pollinator: KernelSpec::Tabulated { grid } }
    }

    pub fn reference() -> Self {
        Self {
            params: RateParams {
                alpha_p: 6.0,
                beta_p: 1.0,
                gamma_p: 1.0,
                d_p: 0.5,
                delta_p: 1.0,
                alpha_a: 5.0,
                beta_a: 1.0,
                gamma_a: 1.0,
                d_a: 1.0,
            },
            kernels: Self::reference_kernels(),
            init_plants: vec![1.2, 1.5, 1.8],
            init_pollinators: vec![2.5, 2.0, 1.6],
            t_end: 5.0,
            record_dt: 0.01,
            replicas: 200,
            ks: vec![100, 400, 1600],
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LlnRow {
    pub k: u64,
    /// RMS over replicas of `sup_t max_i |X^K_i(t) − x_i(t)|`.
    pub rms_sup_error: f64,
    /// `rms(previous K) / rms(this K)`.
    pub ratio_to_previous: Option<f64>,
    pub replicas: usize,
}

/// Initial counts `round(K·x)`.
pub fn initial_counts(k: u64, densities: &[f64]) -> Vec<u64> {
    densities.iter().map(|&v| (v * k as f64).round() as u64).collect()
}

/// Run `replicas` IBM paths of one setting in parallel; replica `r` uses
/// seed `replica_seed(seed, r)`.
#[allow(clippy::too_many_arguments)]
pub fn ibm_replicas(
    community: &Community,
    params: &RateParams,
    kernels: &Kernels,
    k: u64,
    init_plants: &[u64],
    init_pollinators: &[u64],
    record_times: &[f64],
    replicas: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<Vec<Trajectory>> {
    let t_end = *record_times.last().ok_or_else(|| Error::Config("no record times".into()))?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            simulate(
                community,
                params,
                kernels,
                k,
                init_plants.to_vec(),
                init_pollinators.to_vec(),
                t_end,
                record_times,
                replica_seed(seed, r),
                opts,
            )
        })
        .collect()
}

pub fn lln_study(
    community: &Community,
    setup: &LlnSetup,
    sim: &SimOptions,
    ode: &OdeOptions,
) -> Result<Vec<LlnRow>> {
    if setup.replicas < 2 {
        return Err(Error::Config("lln study needs at least two replicas".into()));
    }
    let steps = (setup.t_end / setup.record_dt).round().max(1.0) as usize;
    let times = uniform_times(setup.t_end, steps);
    let mut rows: Vec<LlnRow> = Vec::with_capacity(setup.ks.len());
    for &k in &setup.ks {
        let plants = initial_counts(k, &setup.init_plants);
        let pollinators = initial_counts(k, &setup.init_pollinators);
        // The ODE starts from the same rounded state as the IBM.
        let kf = k as f64;
        let init = MeanFieldState {
            plants: plants.iter().map(|&c| c as f64 / kf).collect(),
            pollinators: pollinators.iter().map(|&c| c as f64 / kf).collect(),
        };
        let reference = integrate(&init, community, &setup.params, &setup.kernels, &times, ode)?;
        let paths = ibm_replicas(
            community,
            &setup.params,
            &setup.kernels,
            k,
            &plants,
            &pollinators,
            &times,
            setup.replicas,
            replica_seed(setup.seed, k),
            sim,
        )?;
        let mean_sq = paths
            .iter()
            .map(|path| {
                let sup = path
                    .values
                    .iter()
                    .zip(&reference.values)
                    .flat_map(|(x, y)| x.iter().zip(y).map(|(a, b)| (a - b).abs()))
                    .fold(0.0, f64::max);
                sup * sup
            })
            .sum::<f64>()
            / paths.len() as f64;
        let rms = mean_sq.sqrt();
        let ratio = rows.last().map(|prev| prev.rms_sup_error / rms);
        rows.push(LlnRow { k, rms_sup_error: rms, ratio_to_previous: ratio, replicas: setup.replicas });
    }
    Ok(rows)
}

/// IBM fluctuations of the pair system vs the Gaussian limit, at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CltSetup {
    pub pair: PairParams,
    pub k: u64,
    pub t: f64,
    /// Initial state as multiples of the stable equilibrium `(P⁺, A⁺)`.
    pub start_factors: (f64, f64),
    pub ibm_replicas: usize,
    pub ou_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

impl CltSetup {
    /// Stronger competition within a species than between species. With a
    /// constant kernel only the total abundance is regulated, and modes that
    /// shift mass between species are neutral.
    pub fn reference_kernels() -> Kernels {
        let grid = Grid2 { values: vec![vec![1.5, 0.75, 0.75], vec![0.75, 1.5, 0.75], vec![0.75, 0.75, 1.5]] };
        Kernels { plant: KernelSpec::Tabulated { grid: grid.clone() }, pollinator: KernelSpec::Tabulated { grid } }
    }

    pub fn reference() -> Self {
        Self {
            pair: PairParams::new(RateParams::phase_plane(2.0, 1.0), 1.0, 1.0, 1.0),
            k: 10_000,
            t: 2.0,
            start_factors: (1.05, 0.95),
            ibm_replicas: 200,
            ou_paths: 2000,
            dt: DEFAULT_DT,
            seed: 77,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CltReport {
    pub t: f64,
    pub start: (f64, f64),
    pub ibm_mean: Vec<f64>,
    pub ibm_std_error: Vec<f64>,
    pub ibm_variance: Vec<f64>,
    pub ou_variance: Vec<f64>,
    /// `ibm_variance / ou_variance` per coordinate.
    pub variance_ratio: Vec<f64>,
}

pub fn clt_study(setup: &CltSetup, sim: &SimOptions, ode: &OdeOptions) -> Result<CltReport> {
    let report = count_and_solve(&setup.pair)?;
    let eq = *report
        .stable_positive()
        .ok_or_else(|| Error::Domain("pair has no stable positive equilibrium".into()))?;
    let (community, kernels, params) = (setup.pair.community(), setup.pair.kernels(), setup.pair.rates);
    let counts = initial_counts(setup.k, &[eq.p * setup.start_factors.0, eq.a * setup.start_factors.1]);
    let kf = setup.k as f64;
    let start = (counts[0] as f64 / kf, counts[1] as f64 / kf);
    // A dense ODE record keeps the linear interpolation error far below dt.
    let steps = (setup.t / setup.dt).round() as usize;
    let ode_times = uniform_times(setup.t, steps);
    let ode_path = integrate(
        &MeanFieldState { plants: vec![start.0], pollinators: vec![start.1] },
        &community,
        &params,
        &kernels,
        &ode_times,
        ode,
    )?;

    let sample_times = [0.0, setup.t];
    let ibm = ibm_replicas(
        &community,
        &params,
        &kernels,
        setup.k,
        &counts[..1],
        &counts[1..],
        &sample_times,
        setup.ibm_replicas,
        setup.seed,
        sim,
    )?;
    let mut endpoints = Trajectory::new(1, 1, ode_path.meta.clone());
    endpoints.push(0.0, ode_path.values[0].clone())?;
    endpoints.push(setup.t, ode_path.last().expect("nonempty").to_vec())?;
    let eta = empirical_fluctuations(&ibm, &endpoints, setup.k)?;
    let ibm_moments = moments(&eta.samples[1]);

    let coeffs = OuCoefficients::along(&ode_path, &community, &params, &kernels, setup.dt, setup.t)?;
    let ou_ends = (0..setup.ou_paths as u64)
        .into_par_iter()
        .map(|r| Ok(sample_paths(&coeffs, &[0.0, 0.0], &[setup.t], setup.seed, r)?.remove(0)))
        .collect::<Result<Vec<_>>>()?;
    let ou_moments = moments(&ou_ends);
    let variance_ratio = ibm_moments.variance.iter().zip(&ou_moments.variance).map(|(a, b)| a / b).collect();
    Ok(CltReport {
        t: setup.t,
        start,
        ibm_mean: ibm_moments.mean,
        ibm_std_error: ibm_moments.std_error,
        ibm_variance: ibm_moments.variance,
        ou_variance: ou_moments.variance,
        variance_ratio,
    })
}
