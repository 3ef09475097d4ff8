//! Structural invariants over randomized inputs.

use pollinet::fluctuations::simulate_ou;
use pollinet::gillespie::{simulate, IbmModel, SimOptions};
use pollinet::mean_field::{integrate, MeanFieldState};
use pollinet::network::{
    sample_graph, sample_traits, sample_weights, CommunitySpec, GraphonSpec, HarvestKind, HarvestSpec,
    TraitDistribution,
};
use pollinet::ode::OdeOptions;
use pollinet::rates::{Kernels, RateParams};
use pollinet::rng::{stream_rng, Stream};
use pollinet::single_pair::{count_and_solve, equilibrium_equations_residual, PairParams};
use pollinet::tabulated::Grid2;
use pollinet::Error;
use proptest::prelude::*;

/// Strictly increasing cut points `0 = b_0 < … < b_k = 1`.
fn boundaries() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, 1..4).prop_map(|widths| {
        let total: f64 = widths.iter().sum();
        let mut b = vec![0.0];
        let mut acc = 0.0;
        for w in &widths[..widths.len() - 1] {
            acc += w / total;
            b.push(acc);
        }
        b.push(1.0);
        b
    })
}

fn block_graphon() -> impl Strategy<Value = GraphonSpec> {
    (boundaries(), boundaries()).prop_flat_map(|(rows, cols)| {
        let (r, c) = (rows.len() - 1, cols.len() - 1);
        prop::collection::vec(prop::collection::vec(0.0f64..=1.0, c), r).prop_map(move |probs| GraphonSpec::Block {
            row_boundaries: rows.clone(),
            col_boundaries: cols.clone(),
            block_probs: probs,
        })
    })
}

fn tabulated_graphon() -> impl Strategy<Value = GraphonSpec> {
    (2usize..5).prop_flat_map(|k| {
        prop::collection::vec(prop::collection::vec(0.0f64..=1.0, k), k)
            .prop_map(|values| GraphonSpec::Tabulated { grid: Grid2 { values } })
    })
}

fn graphon() -> impl Strategy<Value = GraphonSpec> {
    prop_oneof![
        (0.0f64..=1.0).prop_map(|p| GraphonSpec::Constant { p }),
        Just(GraphonSpec::Product),
        block_graphon(),
        tabulated_graphon(),
    ]
}

fn harvest_kind() -> impl Strategy<Value = HarvestKind> {
    prop_oneof![
        (0.0f64..3.0).prop_map(|c0| HarvestKind::Constant { c0 }),
        Just(HarvestKind::ProductXY),
        Just(HarvestKind::ProductXOneMinusY),
    ]
}

fn rate_params() -> impl Strategy<Value = RateParams> {
    (1.0f64..10.0, 0.5f64..2.0, 0.5f64..2.0, 0.1f64..2.0, 0.5f64..3.0, 1.0f64..10.0, 0.5f64..2.0, 0.5f64..2.0, 0.1f64..2.0)
        .prop_map(|(ap, bp, gp, dp, delp, aa, ba, ga, da)| RateParams {
            alpha_p: ap,
            beta_p: bp,
            gamma_p: gp,
            d_p: dp,
            delta_p: delp,
            alpha_a: aa,
            beta_a: ba,
            gamma_a: ga,
            d_a: da,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graphon_values_are_probabilities(g in graphon(), pts in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..50)) {
        prop_assert!(g.validate().is_ok());
        for (x, y) in pts {
            let v = g.eval(x, y);
            prop_assert!((0.0..=1.0).contains(&v), "φ({x}, {y}) = {v}");
        }
    }

    #[test]
    fn traits_are_sorted_in_unit_interval(n in 1usize..60, m in 1usize..60, e in 0.2f64..5.0, seed: u64) {
        let plant = TraitDistribution::Power { exponent: e };
        let (x, y) = sample_traits(n, m, &|u| plant.inverse_cdf(u), &|u| u, seed).unwrap();
        prop_assert_eq!((x.len(), y.len()), (n, m));
        for v in [&x, &y] {
            prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(v.iter().all(|t| (0.0..=1.0).contains(t)));
        }
        let again = sample_traits(n, m, &|u| plant.inverse_cdf(u), &|u| u, seed).unwrap();
        prop_assert_eq!((x, y), again);
    }

    #[test]
    fn graph_sampling_is_seed_deterministic(g in graphon(), n in 1usize..20, m in 1usize..20, seed: u64) {
        let (x, y) = sample_traits(n, m, &|u| u, &|u| u, seed).unwrap();
        let a = sample_graph(&x, &y, &g, seed).unwrap();
        let b = sample_graph(&x, &y, &g, seed).unwrap();
        prop_assert_eq!(a.edge_count(), b.edge_count());
        prop_assert!((0..n).all(|i| (0..m).all(|j| a.get(i, j) == b.get(i, j))));
        prop_assert!(a.edge_count() <= n * m);
    }

    #[test]
    fn weights_stay_in_the_noise_envelope(kind in harvest_kind(), w in 0.0f64..=1.0, n in 1usize..15, m in 1usize..15, seed: u64) {
        let harvest = HarvestSpec { kind, noise_half_width: w };
        let (x, y) = sample_traits(n, m, &|u| u, &|u| u, seed).unwrap();
        let c = sample_weights(&x, &y, &harvest, seed).unwrap();
        prop_assert_eq!(c.len(), n * m);
        let scale = 1.0 / (n + m) as f64;
        for (idx, &cij) in c.iter().enumerate() {
            let mean = harvest.mean(x[idx / m], y[idx % m]) * scale;
            prop_assert!(cij >= 0.0);
            prop_assert!(cij >= mean * (1.0 - w) - 1e-15 && cij <= mean * (1.0 + w) + 1e-15);
        }
    }

    #[test]
    fn noise_above_one_is_rejected(w in 1.0001f64..10.0) {
        let harvest = HarvestSpec { kind: HarvestKind::ProductXY, noise_half_width: w };
        prop_assert!(harvest.validate().is_err());
    }
}

fn small_community(seed: u64, n: usize, m: usize) -> pollinet::network::Community {
    CommunitySpec {
        n,
        m,
        graphon: GraphonSpec::Constant { p: 0.8 },
        harvest: HarvestSpec { kind: HarvestKind::ProductXY, noise_half_width: 0.5 },
        plant_traits: TraitDistribution::Uniform,
        pollinator_traits: TraitDistribution::Uniform,
    }
    .sample(seed)
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ibm_paths_are_well_formed(
        params in rate_params(),
        n in 1usize..4,
        m in 1usize..4,
        k in 20u64..200,
        seed: u64,
    ) {
        let community = small_community(seed, n, m);
        let kernels = Kernels::constant(0.5, 0.5);
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
        let opts = SimOptions { event_cap: 200_000, ..SimOptions::default() };
        match simulate(&community, &params, &kernels, k, vec![k; n], vec![k; m], 1.0, &times, seed, &opts) {
            Ok(traj) => {
                prop_assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(traj.values.iter().all(|row| row.len() == n + m));
                prop_assert!(traj.values.iter().flatten().all(|v| v.is_finite() && *v >= 0.0));
                // Values are counts over K.
                prop_assert!(traj.values.iter().flatten().all(|v| ((v * k as f64).round() - v * k as f64).abs() < 1e-9));
            }
            Err(Error::RuntimeBudgetExceeded { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn cached_rates_track_fresh_rates(params in rate_params(), n in 1usize..4, m in 1usize..4, seed: u64) {
        let community = small_community(seed, n, m);
        let kernels = Kernels::constant(0.3, 0.7);
        let model = IbmModel::new(&community, &params, &kernels).unwrap();
        let mut state = model.init_state(100, vec![80; n], vec![120; m]).unwrap();
        let mut rng = stream_rng(seed, Stream::Dynamics, 0);
        for _ in 0..2000 {
            if model.step(&mut state, &mut rng).is_err() {
                break;
            }
        }
        prop_assert!(model.cache_discrepancy(&state) < 1e-9);
        let total: f64 = {
            let r = model.event_rates(&state);
            r.plant_birth.iter().chain(&r.plant_death).chain(&r.pollinator_birth).chain(&r.pollinator_death).sum()
        };
        prop_assert!((total - state.total_rate()).abs() <= 1e-9 * total.max(1.0));
    }

    #[test]
    fn pair_report_is_consistent(d_a in 0.3f64..4.0, d_p in 0.1f64..3.0, c in 0.5f64..2.0, k in 0.5f64..2.0, h in 0.5f64..2.0) {
        let pp = PairParams::new(RateParams::phase_plane(d_a, d_p), c, k, h);
        let report = count_and_solve(&pp).unwrap();
        prop_assert!(report.positive_count <= 2);
        prop_assert_eq!(report.positive_count, report.equilibria.len() - 1);
        prop_assert!(report.equilibria[0].is_null());
        for e in report.positive() {
            prop_assert!(e.p > 0.0 && e.a > 0.0);
            prop_assert!(equilibrium_equations_residual(&pp, e.p, e.a) < 1e-8);
        }
    }

    #[test]
    fn ou_paths_are_finite(params in rate_params(), seed: u64) {
        let community = small_community(seed, 2, 2);
        let kernels = Kernels::constant(0.5, 0.5);
        let init = MeanFieldState { plants: vec![1.0, 1.5], pollinators: vec![2.0, 0.5] };
        let ode_times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let ode = integrate(&init, &community, &params, &kernels, &ode_times, &OdeOptions::default()).unwrap();
        let record = [0.25, 0.5, 1.0];
        let ou = simulate_ou(&ode, &community, &params, &kernels, &[0.0; 4], 0.01, &record, seed).unwrap();
        prop_assert_eq!(ou.len(), record.len());
        prop_assert!(ou.values.iter().flatten().all(|v| v.is_finite()));
    }
}
