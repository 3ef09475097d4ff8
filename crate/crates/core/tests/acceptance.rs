//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines are always shown.

use std::time::Instant;

use pollinet::gillespie::{IbmModel, SimOptions};
use pollinet::kinetic::{
    concentration_metrics, convergence_study, grid_rhs, predicted_stable_state, random_field, ConvergenceSetup,
    DensityProfile, GridModel, DEFAULT_COMPETITION,
};
use pollinet::mean_field::{self, MeanFieldState};
use pollinet::network::{
    sample_graph, sample_weights, CommunitySpec, GraphonSpec, HarvestKind, HarvestSpec, TraitDistribution,
};
use pollinet::ode::OdeOptions;
use pollinet::rates::{gp_max, gp_zeros, Kernels, RateParams};
use pollinet::rng::{stream_rng, Stream};
use pollinet::single_pair::{count_and_solve, equilibrium_equations_residual, PairParams, Stability};
use pollinet::studies::{clt_study, ibm_replicas, initial_counts, lln_study, CltSetup, LlnSetup};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

const GP_TOL: f64 = 1e-10;
const EQ_RESIDUAL_TOL: f64 = 1e-9;
const LLN_RATIO_BAND: (f64, f64) = (1.4, 2.9);
const CLT_MEAN_SE: f64 = 3.0;
const CLT_VAR_BAND: (f64, f64) = (0.75, 1.33);
const GRID_ODE_TOL: f64 = 1e-12;
const COLLAPSE_FRACTION: f64 = 0.99;
const COLLAPSE_MASS_REL: f64 = 0.01;
const FD_REL_TOL: f64 = 1e-5;
const CHI_SQUARE_LEVEL: f64 = 0.01;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: pollinet::Error) -> String {
    e.to_string()
}

fn rate_analytics() -> Outcome {
    let p = RateParams::phase_plane(2.0, 1.0);
    let (lo, hi) = gp_zeros(&p).map_err(err)?;
    let (r_star, g_max) = gp_max(&p).map_err(err)?;
    let s13 = 13f64.sqrt();
    let s3 = 3f64.sqrt();
    let gaps = [
        (lo - (5.0 - s13) / 6.0).abs(),
        (hi - (5.0 + s13) / 6.0).abs(),
        (r_star - (s3 - 1.0)).abs(),
        (g_max - (11.0 - 6.0 * s3)).abs(),
    ];
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    ensure(worst <= GP_TOL, || format!("max deviation {worst:.3e} > {GP_TOL:e}"))?;
    Ok(format!("zeros ({lo:.12}, {hi:.12}), max ({r_star:.12}, {g_max:.12}); max deviation {worst:.1e}"))
}

fn pair_equilibria() -> Outcome {
    let pp = PairParams::new(RateParams::phase_plane(2.0, 1.0), 1.0, 1.0, 1.0);
    let report = count_and_solve(&pp).map_err(err)?;
    ensure(report.positive_count == 2, || format!("{} positive equilibria, expected 2", report.positive_count))?;
    let pos = report.positive();
    let (small, large) = if pos[0].a < pos[1].a { (&pos[0], &pos[1]) } else { (&pos[1], &pos[0]) };
    ensure(small.stability == Stability::Unstable, || format!("smaller-A equilibrium is {:?}", small.stability))?;
    ensure(large.stability == Stability::Stable, || format!("larger-A equilibrium is {:?}", large.stability))?;
    let residual = pos.iter().map(|e| equilibrium_equations_residual(&pp, e.p, e.a)).fold(0.0, f64::max);
    ensure(residual <= EQ_RESIDUAL_TOL, || format!("residual {residual:.3e}"))?;

    let none = PairParams::new(RateParams::phase_plane(3.0, 1.2), 1.0, 1.0, 10.0);
    let empty = count_and_solve(&none).map_err(err)?;
    ensure(empty.positive_count == 0, || format!("h = 10 gives {} positive equilibria", empty.positive_count))?;
    Ok(format!(
        "unstable ({:.6}, {:.6}), stable ({:.6}, {:.6}), residual {residual:.1e}; h = 10 case has none",
        small.p, small.a, large.p, large.a
    ))
}

fn lln() -> Outcome {
    let setup = LlnSetup::reference();
    let rows = lln_study(&LlnSetup::reference_community(), &setup, &SimOptions::default(), &OdeOptions::default())
        .map_err(err)?;
    let summary =
        rows.iter().map(|r| format!("K={} rms={:.4}", r.k, r.rms_sup_error)).collect::<Vec<_>>().join(", ");
    for r in &rows {
        if let Some(ratio) = r.ratio_to_previous {
            ensure((LLN_RATIO_BAND.0..=LLN_RATIO_BAND.1).contains(&ratio), || {
                format!("{summary}; ratio {ratio:.3} at K={} outside {LLN_RATIO_BAND:?}", r.k)
            })?;
        }
    }
    let ratios: Vec<String> = rows.iter().filter_map(|r| r.ratio_to_previous).map(|x| format!("{x:.3}")).collect();
    Ok(format!("{summary}; ratios {}", ratios.join(", ")))
}

fn clt() -> Outcome {
    let r = clt_study(&CltSetup::reference(), &SimOptions::default(), &OdeOptions::default()).map_err(err)?;
    for (i, name) in ["P", "A"].iter().enumerate() {
        ensure(r.ibm_mean[i].abs() <= CLT_MEAN_SE * r.ibm_std_error[i], || {
            format!("{name}: mean {:.4} beyond {CLT_MEAN_SE} s.e. ({:.4})", r.ibm_mean[i], r.ibm_std_error[i])
        })?;
        ensure((CLT_VAR_BAND.0..=CLT_VAR_BAND.1).contains(&r.variance_ratio[i]), || {
            format!("{name}: variance ratio {:.3} outside {CLT_VAR_BAND:?}", r.variance_ratio[i])
        })?;
    }
    Ok(format!(
        "mean η = ({:.3}, {:.3}) with s.e. ({:.3}, {:.3}); variance ratio IBM/OU = ({:.3}, {:.3})",
        r.ibm_mean[0], r.ibm_mean[1], r.ibm_std_error[0], r.ibm_std_error[1], r.variance_ratio[0], r.variance_ratio[1]
    ))
}

fn grid_ode_identification() -> Outcome {
    let params = RateParams::kinetic_default();
    let kernels = Kernels::constant(DEFAULT_COMPETITION, DEFAULT_COMPETITION);
    let graphon = GraphonSpec::Constant { p: 1.0 };
    let harvest = HarvestSpec::noiseless(HarvestKind::ProductXY);
    let mut gaps = Vec::new();
    for n_grid in [10, 100] {
        let model = GridModel::from_specs(n_grid, &graphon, &harvest, &params, &kernels).map_err(err)?;
        let field = random_field(n_grid, 5.0, 3);
        let grid = grid_rhs(&field, &model).map_err(err)?;
        let (community, matched) = model.matched_community().map_err(err)?;
        let state = MeanFieldState { plants: field.p.clone(), pollinators: field.a.clone() };
        let ode = mean_field::ode_rhs(&state, &community, &params, &matched).map_err(err)?;
        let gap = grid
            .p
            .iter()
            .zip(&ode.plants)
            .chain(grid.a.iter().zip(&ode.pollinators))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        ensure(gap <= GRID_ODE_TOL, || format!("N={n_grid}: max-norm gap {gap:.3e}"))?;
        gaps.push(format!("N={n_grid}: {gap:.1e}"));
    }
    Ok(gaps.join(", "))
}

fn collapse() -> Outcome {
    let params = RateParams::kinetic_default();
    let k = DEFAULT_COMPETITION;
    let n_grid = 100;
    let psi = |x: f64, y: f64| x * y / 2.0;
    let model = GridModel::from_fn(n_grid, psi, &params, &Kernels::constant(k, k)).map_err(err)?;
    let run = model.integrate(&random_field(n_grid, 20.0, 1), &[0.0, 1500.0], &OdeOptions::default()).map_err(err)?;
    let m = concentration_metrics(&run[1]).map_err(err)?;
    let predicted = predicted_stable_state(&params, k, k, &psi).map_err(err)?;
    let (_, g_max) = gp_max(&params).map_err(err)?;
    let mass_target = g_max / k;
    ensure(m.plant_max_fraction >= COLLAPSE_FRACTION, || format!("plant max fraction {:.4}", m.plant_max_fraction))?;
    ensure(m.poll_max_fraction >= COLLAPSE_FRACTION, || format!("pollinator max fraction {:.4}", m.poll_max_fraction))?;
    ensure(m.poll_argmax_index == n_grid, || format!("pollinator argmax at {}", m.poll_argmax))?;
    ensure(m.plant_argmax_index > 0 && m.plant_argmax_index < n_grid, || {
        format!("plant argmax at boundary {}", m.plant_argmax)
    })?;
    ensure(predicted.exists, || "no predicted stable state".into())?;
    let cell = 1.0 / n_grid as f64;
    ensure((m.plant_argmax - predicted.x0).abs() <= cell, || {
        format!("plant argmax {} vs predicted {:.6}", m.plant_argmax, predicted.x0)
    })?;
    let mass_gap = (m.plant_mass - mass_target).abs() / mass_target;
    ensure(mass_gap <= COLLAPSE_MASS_REL, || format!("plant mass {:.4} vs {mass_target:.4}", m.plant_mass))?;
    Ok(format!(
        "fractions ({:.4}, {:.4}), plant atom {:.2} vs predicted {:.4}, pollinator atom {:.2}, plant mass {:.4} vs {:.4}",
        m.plant_max_fraction, m.poll_max_fraction, m.plant_argmax, predicted.x0, m.poll_argmax, m.plant_mass, mass_target
    ))
}

fn kinetic_trend() -> Outcome {
    let setup = ConvergenceSetup {
        graphon: GraphonSpec::Product,
        harvest: HarvestSpec { kind: HarvestKind::ProductXY, noise_half_width: 0.5 },
        params: RateParams::kinetic_default(),
        kernels: Kernels::constant(DEFAULT_COMPETITION, DEFAULT_COMPETITION),
        plant_density: DensityProfile::Affine { at0: 5.0, at1: 15.0 },
        pollinator_density: DensityProfile::Constant { value: 10.0 },
        n_grid: 200,
    };
    let seeds: Vec<u64> = (1..=100).collect();
    let rows = convergence_study(&setup, &[50, 100, 200], &[5.0], &seeds, &OdeOptions::default()).map_err(err)?;
    let summary = rows
        .iter()
        .map(|r| format!("n={}: ({:.4}, {:.4})", r.n, r.mean_plant_w1, r.mean_poll_w1))
        .collect::<Vec<_>>()
        .join(", ");
    for w in rows.windows(2) {
        ensure(w[1].mean_plant_w1 < w[0].mean_plant_w1 && w[1].mean_poll_w1 < w[0].mean_poll_w1, || {
            format!("not decreasing: {summary}")
        })?;
    }
    Ok(format!("mean W1 (plants, pollinators) at t=5 over {} seeds: {summary}", seeds.len()))
}

fn central_difference(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn invariants() -> Outcome {
    let mut notes = Vec::new();

    // Event-driven simulator: ±1 moves, nonnegative counts, exact cache.
    let setup = LlnSetup::reference();
    let community = LlnSetup::reference_community();
    let model = IbmModel::new(&community, &setup.params, &setup.kernels).map_err(err)?;
    let k = 100;
    let plants = initial_counts(k, &setup.init_plants);
    let pollinators = initial_counts(k, &setup.init_pollinators);
    let mut state = model.init_state(k, plants.clone(), pollinators.clone()).map_err(err)?;
    let mut rng = stream_rng(5, Stream::Dynamics, 0);
    for _ in 0..10_000 {
        let before: Vec<u64> = state.plants.iter().chain(&state.pollinators).copied().collect();
        model.step(&mut state, &mut rng).map_err(err)?;
        let moved: u64 =
            before.iter().zip(state.plants.iter().chain(&state.pollinators)).map(|(a, b)| a.abs_diff(*b)).sum();
        ensure(moved == 1, || format!("an event moved the counts by {moved}"))?;
    }
    let drift = model.cache_discrepancy(&state);
    ensure(drift <= 1e-9, || format!("rate cache drift {drift:.3e} after 1e4 events"))?;
    let times = [0.0, 0.5, 1.0];
    let paths =
        ibm_replicas(&community, &setup.params, &setup.kernels, k, &plants, &pollinators, &times, 500, 9, &SimOptions::default())
            .map_err(err)?;
    let growth = setup.params.alpha_p / setup.params.gamma_p;
    let mass0 = plants.iter().sum::<u64>() as f64 / k as f64;
    for (ti, &t) in times.iter().enumerate() {
        let masses: Vec<f64> = paths.iter().map(|p| p.plants(ti).iter().sum()).collect();
        ensure(paths.iter().all(|p| p.values[ti].iter().all(|&v| v >= 0.0)), || "negative IBM abundance".into())?;
        let mean = masses.iter().sum::<f64>() / masses.len() as f64;
        let sd = (masses.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (masses.len() - 1) as f64).sqrt();
        let slack = 1.0 + 3.0 * sd / (masses.len() as f64).sqrt() / mean;
        ensure(mean <= mass0 * (growth * t).exp() * slack, || format!("IBM mean plant mass {mean} at t={t}"))?;
    }
    notes.push("IBM ±1/positivity/cache/mass bound ok".to_string());

    // Mean field: positivity, mass bound, Jacobian vs central differences.
    let spec = CommunitySpec {
        n: 6,
        m: 5,
        graphon: GraphonSpec::Product,
        harvest: HarvestSpec { kind: HarvestKind::ProductXY, noise_half_width: 0.5 },
        plant_traits: TraitDistribution::Uniform,
        pollinator_traits: TraitDistribution::Uniform,
    };
    let params = RateParams::kinetic_default();
    let kernels = Kernels::constant(0.3, 0.4);
    let mut worst_fd: f64 = 0.0;
    for seed in 0..10 {
        let c = spec.sample(seed).map_err(err)?;
        let init = MeanFieldState {
            plants: (0..6).map(|i| 0.5 + i as f64 * 0.7).collect(),
            pollinators: (0..5).map(|j| 4.0 - j as f64 * 0.6).collect(),
        };
        let times = [0.0, 0.5, 1.0, 3.0];
        let traj = mean_field::integrate(&init, &c, &params, &kernels, &times, &OdeOptions::default()).map_err(err)?;
        let m0: f64 = init.plants.iter().sum();
        for (ti, &t) in times.iter().enumerate() {
            ensure(traj.values[ti].iter().all(|&v| v >= 0.0), || "negative ODE abundance".into())?;
            let mass: f64 = traj.plants(ti).iter().sum();
            ensure(mass <= m0 * (params.alpha_p / params.gamma_p * t).exp(), || format!("ODE mass {mass} at t={t}"))?;
        }
        let j = mean_field::jacobian(&init, &c, &params, &kernels).map_err(err)?;
        let flat = init.to_flat();
        let scale = j.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
        for col in 0..flat.len() {
            let f = |h: f64| {
                let mut y = flat.clone();
                y[col] += h;
                let s = MeanFieldState::from_flat(&y, 6);
                mean_field::ode_rhs(&s, &c, &params, &kernels).unwrap().to_flat()
            };
            let step = 1e-6 * flat[col].abs().max(1.0);
            let (up, down) = (f(step), f(-step));
            for row in 0..flat.len() {
                let fd = (up[row] - down[row]) / (2.0 * step);
                worst_fd = worst_fd.max((fd - j[(row, col)]).abs() / scale);
            }
        }
    }
    ensure(worst_fd <= FD_REL_TOL, || format!("mean-field Jacobian off by {worst_fd:.3e}"))?;
    notes.push(format!("ODE Jacobian FD rel {worst_fd:.1e}"));

    let mut worst_rate: f64 = 0.0;
    for r in [0.0, 0.1, 0.7, 2.0, 9.0] {
        let checks = [
            (params.dg_p(r), central_difference(|x| params.g_p(x), r)),
            (params.dg_a(r), central_difference(|x| params.g_a(x), r)),
            (params.d2g_p(r), central_difference(|x| params.dg_p(x), r)),
            (params.d2g_a(r), central_difference(|x| params.dg_a(x), r)),
        ];
        for (exact, fd) in checks {
            worst_rate = worst_rate.max((exact - fd).abs() / exact.abs().max(1.0));
        }
    }
    ensure(worst_rate <= FD_REL_TOL, || format!("rate derivatives off by {worst_rate:.3e}"))?;
    notes.push(format!("rate derivatives FD rel {worst_rate:.1e}"));

    // Kinetic grid: positivity and mass bound.
    let grid_model = GridModel::from_fn(40, |x, y| x * y / 2.0, &params, &Kernels::constant(0.2, 0.2)).map_err(err)?;
    for seed in 0..5 {
        let f0 = random_field(40, 10.0, seed);
        let times = [0.0, 0.5, 2.0, 10.0];
        let run = grid_model.integrate(&f0, &times, &OdeOptions::default()).map_err(err)?;
        for (f, &t) in run.iter().zip(&times) {
            ensure(f.p.iter().chain(&f.a).all(|&v| v >= 0.0), || "negative density".into())?;
            let bound = f0.plant_mass() * (params.alpha_p / params.gamma_p * t).exp();
            ensure(f.plant_mass() <= bound, || format!("kinetic mass {} at t={t}", f.plant_mass()))?;
        }
    }
    notes.push("kinetic positivity/mass bound ok".into());

    // Network: degree law and weight moments.
    let (n, m, p) = (50usize, 40usize, 0.3);
    let mut hist = vec![0usize; m + 1];
    for seed in 0..1000 {
        let g = sample_graph(&vec![0.5; n], &vec![0.5; m], &GraphonSpec::Constant { p }, seed).map_err(err)?;
        g.degree_stats().plant_histogram.iter().enumerate().for_each(|(d, c)| hist[d] += c);
    }
    let law = Binomial::new(p, m as u64).map_err(|e| e.to_string())?;
    let total = (1000 * n) as f64;
    let (mut stat, mut bins, mut acc) = (0.0, 0usize, (0.0, 0.0));
    for (d, &o) in hist.iter().enumerate() {
        acc = (acc.0 + o as f64, acc.1 + total * law.pmf(d as u64));
        if acc.1 >= 5.0 || d == m {
            stat += (acc.0 - acc.1).powi(2) / acc.1;
            bins += 1;
            acc = (0.0, 0.0);
        }
    }
    let critical = ChiSquared::new((bins - 1) as f64).map_err(|e| e.to_string())?.inverse_cdf(1.0 - CHI_SQUARE_LEVEL);
    ensure(stat < critical, || format!("degree chi-square {stat:.2} ≥ {critical:.2}"))?;
    notes.push(format!("degree χ² {stat:.1} < {critical:.1}"));

    let harvest = HarvestSpec { kind: HarvestKind::Constant { c0: 1.0 }, noise_half_width: 0.5 };
    let samples = 10_000;
    let entry: Vec<f64> = (0..samples)
        .map(|s| sample_weights(&[0.5; 100], &[0.5; 100], &harvest, s).map(|c| c[0]))
        .collect::<pollinet::Result<_>>()
        .map_err(err)?;
    let mean = entry.iter().sum::<f64>() / samples as f64;
    let var = entry.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    let se = (var / samples as f64).sqrt();
    ensure((mean - 1.0 / 200.0).abs() < 3.0 * se, || format!("weight mean {mean}"))?;
    let scaled = 200.0f64.powi(2) * var;
    ensure(scaled <= 1.0 / 12.0 * 1.03, || format!("(n+m)²·var = {scaled}"))?;
    notes.push(format!("weight (n+m)²·var {scaled:.4}"));

    Ok(notes.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("rate-family analytics", rate_analytics),
        ("pair equilibrium structure", pair_equilibria),
        ("law of large numbers", lln),
        ("central limit fluctuations", clt),
        ("grid/ODE identification", grid_ode_identification),
        ("kinetic collapse", collapse),
        ("kinetic-limit trend", kinetic_trend),
        ("invariant suite", invariants),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {} {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
