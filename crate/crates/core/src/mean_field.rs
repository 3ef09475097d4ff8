//! Large-population limit: the deterministic system on `n + m` abundances.
//!
//! `dP_i/dt = [g^P(Σ_j C_ij A_j) − (1/n) Σ_l k(x_i,x_l) P_l] P_i`, pollinators mirrored
//! with `h` and `1/m`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Community;
use crate::ode::{integrate_nonnegative, OdeOptions};
use crate::rates::{plant_resources_unchecked, pollinator_resources_unchecked, CompetitionMatrix, Kernels, RateParams};
use crate::trajectory::{digest, Scale, Trajectory, TrajectoryMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub plants: Vec<f64>,
    pub pollinators: Vec<f64>,
}

impl MeanFieldState {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { plants: vec![0.0; n], pollinators: vec![0.0; m] }
    }

    /// Split a flat `(P, A)` vector.
    pub fn from_flat(flat: &[f64], n: usize) -> Self {
        Self { plants: flat[..n].to_vec(), pollinators: flat[n..].to_vec() }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.plants.iter().chain(&self.pollinators).copied().collect()
    }

    pub fn validate(&self, community: &Community) -> Result<()> {
        if self.plants.len() != community.n() || self.pollinators.len() != community.m() {
            return Err(Error::Domain(format!(
                "state has {}+{} entries for a {}+{} community",
                self.plants.len(),
                self.pollinators.len(),
                community.n(),
                community.m()
            )));
        }
        if self.plants.iter().chain(&self.pollinators).any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain("abundances must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Vector field of the limit system with precomputed competition matrices.
#[derive(Debug, Clone)]
pub struct MeanField<'a> {
    community: &'a Community,
    params: RateParams,
    plant_competition: CompetitionMatrix,
    pollinator_competition: CompetitionMatrix,
}

/// Per-species growth rates `g − competition` at a state.
struct Growth {
    plant_resources: Vec<f64>,
    pollinator_resources: Vec<f64>,
    plant: Vec<f64>,
    pollinator: Vec<f64>,
}

impl<'a> MeanField<'a> {
    pub fn new(community: &'a Community, params: &RateParams, kernels: &Kernels) -> Result<Self> {
        params.validate()?;
        kernels.validate()?;
        Ok(Self {
            community,
            params: *params,
            plant_competition: CompetitionMatrix::new(&kernels.plant, &community.x),
            pollinator_competition: CompetitionMatrix::new(&kernels.pollinator, &community.y),
        })
    }

    pub fn dim(&self) -> usize {
        self.community.n() + self.community.m()
    }

    fn growth(&self, y: &[f64]) -> Growth {
        let n = self.community.n();
        let (p, a) = y.split_at(n);
        let plant_resources = plant_resources_unchecked(self.community, a, 1.0);
        let pollinator_resources = pollinator_resources_unchecked(self.community, p, 1.0);
        let cp = self.plant_competition.apply(p);
        let ca = self.pollinator_competition.apply(a);
        let plant = plant_resources.iter().zip(&cp).map(|(&r, c)| self.params.g_p(r) - c).collect();
        let pollinator = pollinator_resources.iter().zip(&ca).map(|(&r, c)| self.params.g_a(r) - c).collect();
        Growth { plant_resources, pollinator_resources, plant, pollinator }
    }

    /// Right-hand side on the flat `(P, A)` vector.
    pub fn rhs_into(&self, y: &[f64], dy: &mut [f64]) {
        let g = self.growth(y);
        for ((d, v), r) in dy.iter_mut().zip(y).zip(g.plant.iter().chain(&g.pollinator)) {
            *d = r * v;
        }
    }

    pub fn rhs(&self, state: &MeanFieldState) -> Result<MeanFieldState> {
        state.validate(self.community)?;
        let y = state.to_flat();
        let mut dy = vec![0.0; y.len()];
        self.rhs_into(&y, &mut dy);
        Ok(MeanFieldState::from_flat(&dy, self.community.n()))
    }

    /// Largest `|g − competition|` over species with positive abundance.
    pub fn equilibrium_residual(&self, state: &MeanFieldState) -> Result<f64> {
        state.validate(self.community)?;
        let y = state.to_flat();
        let g = self.growth(&y);
        Ok(y.iter()
            .zip(g.plant.iter().chain(&g.pollinator))
            .filter(|(&v, _)| v > 0.0)
            .map(|(_, r)| r.abs())
            .fold(0.0, f64::max))
    }

    /// Analytic Jacobian of the flat right-hand side.
    pub fn jacobian(&self, state: &MeanFieldState) -> Result<DMatrix<f64>> {
        state.validate(self.community)?;
        let (n, m) = (self.community.n(), self.community.m());
        let y = state.to_flat();
        let g = self.growth(&y);
        let mut j = DMatrix::zeros(n + m, n + m);
        let (inv_n, inv_m) = (1.0 / n as f64, 1.0 / m as f64);
        for i in 0..n {
            let p = y[i];
            for l in 0..n {
                j[(i, l)] = -inv_n * self.plant_competition.entry(i, l) * p;
            }
            j[(i, i)] += g.plant[i];
            let slope = self.params.dg_p(g.plant_resources[i]);
            for &(l, c) in self.community.plant_neighbors(i) {
                j[(i, n + l)] = slope * c * p;
            }
        }
        for jj in 0..m {
            let a = y[n + jj];
            for l in 0..m {
                j[(n + jj, n + l)] = -inv_m * self.pollinator_competition.entry(jj, l) * a;
            }
            j[(n + jj, n + jj)] += g.pollinator[jj];
            let slope = self.params.dg_a(g.pollinator_resources[jj]);
            for &(l, c) in self.community.pollinator_neighbors(jj) {
                j[(n + jj, l)] = slope * c * a;
            }
        }
        Ok(j)
    }

    /// Integrate from `init`, recording at `record_times` (strictly increasing, from `≥ 0`).
    pub fn integrate(&self, init: &MeanFieldState, record_times: &[f64], opts: &OdeOptions) -> Result<Trajectory> {
        init.validate(self.community)?;
        if !record_times.windows(2).all(|w| w[0] < w[1]) || record_times.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::Config("record times must be strictly increasing and nonnegative".into()));
        }
        let (rows, _) = integrate_nonnegative(|y, dy| self.rhs_into(y, dy), 0.0, &init.to_flat(), record_times, opts)?;
        let meta = TrajectoryMeta {
            scale: Scale::Ode,
            seed: None,
            params_digest: digest(&(&self.params, self.community.seed, opts.rel_tol, opts.abs_tol)),
            carrying_capacity: None,
        };
        let mut traj = Trajectory::new(self.community.n(), self.community.m(), meta);
        for (&t, row) in record_times.iter().zip(rows) {
            traj.push(t, row)?;
        }
        Ok(traj)
    }
}

pub fn ode_rhs(
    state: &MeanFieldState,
    community: &Community,
    params: &RateParams,
    kernels: &Kernels,
) -> Result<MeanFieldState> {
    MeanField::new(community, params, kernels)?.rhs(state)
}

pub fn integrate(
    init: &MeanFieldState,
    community: &Community,
    params: &RateParams,
    kernels: &Kernels,
    record_times: &[f64],
    opts: &OdeOptions,
) -> Result<Trajectory> {
    MeanField::new(community, params, kernels)?.integrate(init, record_times, opts)
}

pub fn equilibrium_residual(
    state: &MeanFieldState,
    community: &Community,
    params: &RateParams,
    kernels: &Kernels,
) -> Result<f64> {
    MeanField::new(community, params, kernels)?.equilibrium_residual(state)
}

pub fn jacobian(
    state: &MeanFieldState,
    community: &Community,
    params: &RateParams,
    kernels: &Kernels,
) -> Result<DMatrix<f64>> {
    MeanField::new(community, params, kernels)?.jacobian(state)
}

/// `count + 1` evenly spaced times on `[0, t_end]`.
pub fn uniform_times(t_end: f64, count: usize) -> Vec<f64> {
    let count = count.max(1);
    (0..=count).map(|k| t_end * k as f64 / count as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Adjacency, CommunitySpec, GraphonSpec, HarvestKind, HarvestSpec, TraitDistribution};
    use crate::rates::KernelSpec;
    use crate::tabulated::Grid2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn community(n: usize, m: usize, seed: u64) -> Community {
        CommunitySpec {
            n,
            m,
            graphon: GraphonSpec::Constant { p: 0.6 },
            harvest: HarvestSpec { kind: HarvestKind::ProductXY, noise_half_width: 0.2 },
            plant_traits: TraitDistribution::Uniform,
            pollinator_traits: TraitDistribution::Uniform,
        }
        .sample(seed)
        .unwrap()
    }

    fn tabulated() -> Kernels {
        Kernels {
            plant: KernelSpec::Tabulated { grid: Grid2 { values: vec![vec![1.0, 0.2], vec![0.4, 1.5]] } },
            pollinator: KernelSpec::Tabulated { grid: Grid2 { values: vec![vec![0.6, 1.1], vec![0.9, 0.3]] } },
        }
    }

    fn random_state(n: usize, m: usize, seed: u64) -> MeanFieldState {
        let mut r = crate::rng::SimRng::seed_from_u64(seed);
        MeanFieldState {
            plants: (0..n).map(|_| r.random_range(0.0..5.0)).collect(),
            pollinators: (0..m).map(|_| r.random_range(0.0..5.0)).collect(),
        }
    }

    #[test]
    fn zero_state_is_fixed() {
        let c = community(3, 4, 1);
        let mf = MeanField::new(&c, &RateParams::kinetic_default(), &Kernels::constant(1.0, 1.0)).unwrap();
        let z = MeanFieldState::zeros(3, 4);
        assert!(mf.rhs(&z).unwrap().to_flat().iter().all(|&v| v == 0.0));
        assert_eq!(mf.equilibrium_residual(&z).unwrap(), 0.0);
        let traj = mf.integrate(&z, &uniform_times(5.0, 10), &OdeOptions::default()).unwrap();
        assert!(traj.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn rhs_matches_naive_oracle() {
        let p = RateParams::kinetic_default();
        for (seed, kernels) in [(1, Kernels::constant(0.8, 1.7)), (2, tabulated()), (3, tabulated())] {
            let c = community(4, 4, seed);
            let s = random_state(4, 4, seed + 10);
            let got = ode_rhs(&s, &c, &p, &kernels).unwrap();
            for i in 0..4 {
                let mut r = 0.0;
                let mut comp = 0.0;
                for j in 0..4 {
                    r += c.effective_weight(i, j) * s.pollinators[j];
                    comp += kernels.plant.eval(c.x[i], c.x[j]) * s.plants[j];
                }
                let g = p.alpha_p * r / (p.beta_p + p.gamma_p * r) - p.d_p - p.delta_p * r;
                let want = (g - comp / 4.0) * s.plants[i];
                assert!((got.plants[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
            for j in 0..4 {
                let mut r = 0.0;
                let mut comp = 0.0;
                for i in 0..4 {
                    r += c.effective_weight(i, j) * s.plants[i];
                    comp += kernels.pollinator.eval(c.y[j], c.y[i]) * s.pollinators[i];
                }
                let g = p.alpha_a * r / (p.beta_a + p.gamma_a * r) - p.d_a;
                let want = (g - comp / 4.0) * s.pollinators[j];
                assert!((got.pollinators[j] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn pair_rhs_is_the_two_species_system() {
        let (c, k, h) = (1.3, 0.7, 0.4);
        let pair = Community::pair(c);
        let p = RateParams::phase_plane(2.0, 1.0);
        let s = MeanFieldState { plants: vec![1.7], pollinators: vec![0.9] };
        let d = ode_rhs(&s, &pair, &p, &Kernels::constant(k, h)).unwrap();
        assert_eq!(d.plants[0], (p.g_p(c * 0.9) - k * 1.7) * 1.7);
        assert_eq!(d.pollinators[0], (p.g_a(c * 1.7) - h * 0.9) * 0.9);
    }

    #[test]
    fn isolated_pollinator_follows_bernoulli_solution() {
        let c = Community::new(vec![0.5], vec![0.5], Adjacency::empty(1, 1), vec![1.0], 0).unwrap();
        let p = RateParams::kinetic_default();
        let h = 0.8;
        let a0 = 2.5;
        let times = uniform_times(4.0, 40);
        let opts = OdeOptions::default();
        let traj = integrate(
            &MeanFieldState { plants: vec![0.0], pollinators: vec![a0] },
            &c,
            &p,
            &Kernels::constant(1.0, h),
            &times,
            &opts,
        )
        .unwrap();
        let da = p.d_a;
        for (k, &t) in times.iter().enumerate() {
            let e = (-da * t).exp();
            let exact = da * a0 * e / (da + h * a0 * (1.0 - e));
            let got = traj.pollinators(k)[0];
            assert!((got - exact).abs() <= opts.rel_tol * exact + opts.abs_tol * 10.0, "t={t}: {got} vs {exact}");
        }
    }

    #[test]
    fn jacobian_at_null_state_is_diagonal_and_stable() {
        let c = community(3, 2, 4);
        let p = RateParams::kinetic_default();
        let j = jacobian(&MeanFieldState::zeros(3, 2), &c, &p, &tabulated()).unwrap();
        let want = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-p.d_p, -p.d_p, -p.d_p, -p.d_a, -p.d_a]));
        assert_eq!(j, want);
        let eig = j.complex_eigenvalues();
        assert!(eig.iter().all(|z| z.re < 0.0 && z.im == 0.0));
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let p = RateParams::kinetic_default();
        for (seed, kernels) in [(5, Kernels::constant(0.5, 0.9)), (6, tabulated())] {
            let c = community(3, 4, seed);
            let s = random_state(3, 4, seed);
            let mf = MeanField::new(&c, &p, &kernels).unwrap();
            let j = mf.jacobian(&s).unwrap();
            let y = s.to_flat();
            let dim = y.len();
            for col in 0..dim {
                let step = 1e-6 * y[col].max(1.0);
                let (mut up, mut dn) = (y.clone(), y.clone());
                up[col] += step;
                dn[col] -= step;
                let (mut fu, mut fd) = (vec![0.0; dim], vec![0.0; dim]);
                mf.rhs_into(&up, &mut fu);
                mf.rhs_into(&dn, &mut fd);
                for row in 0..dim {
                    let fdv = (fu[row] - fd[row]) / (2.0 * step);
                    let scale = j[(row, col)].abs().max(1.0);
                    assert!((fdv - j[(row, col)]).abs() <= 1e-5 * scale, "({row},{col}): {fdv} vs {}", j[(row, col)]);
                }
            }
        }
    }

    #[test]
    fn halving_tolerances_moves_endpoint_less_than_coarse_tolerance() {
        let c = community(4, 3, 9);
        let p = RateParams::kinetic_default();
        let k = Kernels::constant(0.3, 0.3);
        let init = MeanFieldState { plants: vec![3.0; 4], pollinators: vec![4.0; 3] };
        let times = [0.0, 10.0];
        let coarse = OdeOptions::with_tolerances(1e-6, 1e-6);
        let fine = OdeOptions::with_tolerances(5e-7, 5e-7);
        let a = integrate(&init, &c, &p, &k, &times, &coarse).unwrap();
        let b = integrate(&init, &c, &p, &k, &times, &fine).unwrap();
        for (x, y) in a.last().unwrap().iter().zip(b.last().unwrap()) {
            assert!((x - y).abs() <= coarse.rel_tol * y.abs().max(1.0));
        }
    }

    #[test]
    fn residual_positive_off_equilibrium() {
        let c = community(3, 3, 2);
        let r = equilibrium_residual(&random_state(3, 3, 1), &c, &RateParams::kinetic_default(), &tabulated()).unwrap();
        assert!(r > 0.0);
    }

    #[test]
    fn rejects_negative_or_misshaped_states() {
        let c = community(2, 2, 2);
        let p = RateParams::kinetic_default();
        let k = Kernels::constant(1.0, 1.0);
        let bad = MeanFieldState { plants: vec![1.0, -1.0], pollinators: vec![1.0, 1.0] };
        assert!(ode_rhs(&bad, &c, &p, &k).is_err());
        assert!(ode_rhs(&MeanFieldState::zeros(3, 2), &c, &p, &k).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn orthant_invariance_and_mass_bound(seed in 0u64..1000, scale in 0.1f64..20.0, kk in 0.0f64..2.0) {
            let c = community(3, 3, seed);
            let p = RateParams::kinetic_default();
            let mut init = random_state(3, 3, seed);
            init.plants.iter_mut().chain(init.pollinators.iter_mut()).for_each(|v| *v *= scale);
            let times = uniform_times(2.0, 20);
            let traj = integrate(&init, &c, &p, &Kernels::constant(kk, kk), &times, &OdeOptions::default()).unwrap();
            let m0: f64 = init.plants.iter().sum();
            for (k, &t) in times.iter().enumerate() {
                prop_assert!(traj.values[k].iter().all(|&v| v >= 0.0));
                let mass: f64 = traj.plants(k).iter().sum();
                prop_assert!(mass <= m0 * (p.alpha_p / p.gamma_p * t).exp() * (1.0 + 1e-9) + 1e-12);
            }
        }
    }
}
