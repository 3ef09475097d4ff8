//! Subcommands. Each takes a resolved config, writes its artifacts plus the
//! config itself into the output directory, and returns a printable report.

use std::fmt::Write as _;
use std::path::PathBuf;

use pollinet::fluctuations::{empirical_fluctuations, moments, sample_paths, OuCoefficients};
use pollinet::gillespie::{simulate, SimOptions};
use pollinet::kinetic::{
    concentration_metrics, convergence_study as run_convergence, predicted_stable_state, psi, random_field,
    ConvergenceSetup, DensityField, DensityProfile, GridModel,
};
use pollinet::mean_field::{self, uniform_times, MeanFieldState};
use pollinet::network::{Community, CommunitySpec};
use pollinet::ode::OdeOptions;
use pollinet::rates::RateParams;
use pollinet::rng::replica_seed;
use pollinet::single_pair::{count_and_solve, nullclines, phase_portrait, portrait_grid, Basin, PairParams};
use pollinet::studies::{initial_counts, lln_study as run_lln, LlnSetup};
use pollinet::trajectory::Trajectory;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{PairSection, RunConfig, Schedule};
use crate::error::{CliError, CliResult};
use crate::plot::{emit_plot, Panel, PlotData, PlotKind, Series, Style};

/// Printable outcome; `partial` marks runs cut short by the event budget.
#[derive(Debug, Default)]
pub struct Report {
    pub lines: Vec<String>,
    pub partial: bool,
}

impl Report {
    fn say(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }
}

/// Basin grid resolution and horizon used by `analyze-pair`.
pub const PORTRAIT_COUNT: usize = 25;
pub const PORTRAIT_T_END: f64 = 200.0;
pub const NULLCLINE_POINTS: usize = 400;

struct Out {
    dir: PathBuf,
}

impl Out {
    fn create(cfg: &RunConfig) -> CliResult<Self> {
        let dir = cfg.out_dir();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let out = Self { dir };
        out.json("config.json", cfg)?;
        Ok(out)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn text(&self, name: &str, contents: &str) -> CliResult<()> {
        let p = self.path(name);
        std::fs::write(&p, contents).map_err(|e| CliError::io(p, e))
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }

    fn plot(&self, name: &str, kind: PlotKind, data: &PlotData) -> CliResult<()> {
        emit_plot(kind, data, &self.path(name))
    }
}

fn trajectory_plot(title: &str, traj: &Trajectory, y_label: &str) -> PlotData {
    let guild = |offset: usize, count: usize, prefix: &str| -> Vec<Series> {
        (0..count)
            .map(|i| {
                Series::line(
                    format!("{prefix}{}", i + 1),
                    traj.times.iter().zip(&traj.values).map(|(&t, v)| (t, v[offset + i])).collect(),
                )
            })
            .collect()
    };
    PlotData {
        title: title.into(),
        panels: vec![
            Panel { title: "plants".into(), x_label: "t".into(), y_label: y_label.into(), series: guild(0, traj.n, "P") },
            Panel {
                title: "pollinators".into(),
                x_label: "t".into(),
                y_label: y_label.into(),
                series: guild(traj.n, traj.m, "A"),
            },
        ],
    }
}

fn sample_community(cfg: &RunConfig) -> CliResult<(CommunitySpec, Community)> {
    let spec = cfg.community()?.clone();
    let community = spec.sample(cfg.seed)?;
    Ok((spec, community))
}

fn sim_options(schedule: &Schedule) -> SimOptions {
    SimOptions { event_cap: schedule.event_cap, ..SimOptions::default() }
}

pub fn sample_graph(cfg: &RunConfig) -> CliResult<Report> {
    let (spec, community) = sample_community(cfg)?;
    let out = Out::create(cfg)?;
    let stats = community.adjacency.degree_stats();
    out.text("edges.csv", &community.edges_csv())?;
    out.json("community.json", &community.snapshot(Some(&spec)))?;
    out.json("degrees.json", &stats)?;
    let mut r = Report::default();
    r.say(format!(
        "sampled {}×{} community (seed {}): {} edges, density {:.4}",
        community.n(),
        community.m(),
        cfg.seed,
        stats.edge_count,
        stats.edge_count as f64 / (community.n() * community.m()) as f64
    ));
    r.say(format!("wrote {}", out.dir.display()));
    Ok(r)
}

pub fn simulate_ibm(cfg: &RunConfig) -> CliResult<Report> {
    let (_, community) = sample_community(cfg)?;
    let (rates, kernels, schedule) = (cfg.rates()?, cfg.kernels()?, cfg.schedule()?);
    let k = cfg.carrying_capacity()?;
    let (p0, a0) = cfg.initial_abundances(&community.x, &community.y)?;
    let (plants, pollinators) = (initial_counts(k, &p0), initial_counts(k, &a0));
    let times = schedule.times();
    let opts = sim_options(schedule);
    let out = Out::create(cfg)?;

    // Budget overruns keep their partial path instead of aborting the batch.
    let runs: Vec<(Trajectory, Option<f64>)> = (0..schedule.replicas as u64)
        .into_par_iter()
        .map(|r| {
            match simulate(
                &community,
                rates,
                kernels,
                k,
                plants.clone(),
                pollinators.clone(),
                schedule.t_end,
                &times,
                replica_seed(cfg.seed, r),
                &opts,
            ) {
                Ok(t) => Ok((t, None)),
                Err(pollinet::Error::RuntimeBudgetExceeded { partial, t, .. }) => Ok((*partial, Some(t))),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()?;

    let mut report = Report::default();
    let mut summary = Vec::new();
    for (r, (traj, stopped)) in runs.iter().enumerate() {
        let name = format!("trajectory_{r:03}");
        out.text(&format!("{name}.csv"), &traj.to_csv())?;
        let mut side = traj.sidecar();
        side["replica"] = json!(r);
        side["seed"] = json!(replica_seed(cfg.seed, r as u64));
        side["partial"] = json!(stopped.is_some());
        out.json(&format!("{name}.json"), &side)?;
        if let Some(t) = stopped {
            report.partial = true;
            report.say(format!("replica {r}: event budget exhausted at t = {t}; partial path written"));
        }
        summary.push(json!({"replica": r, "partial": stopped.is_some(), "final": traj.last()}));
    }
    out.json("summary.json", &json!({"K": k, "replicas": summary}))?;
    if let Some((first, _)) = runs.first() {
        out.plot("trajectory_000.svg", PlotKind::Lines, &trajectory_plot("individual-based model, replica 0", first, "count / K"))?;
    }
    report.say(format!("simulated {} replica(s) at K = {k} to t = {}", runs.len(), schedule.t_end));
    report.say(format!("wrote {}", out.dir.display()));
    Ok(report)
}

pub fn integrate_ode(cfg: &RunConfig) -> CliResult<Report> {
    let (_, community) = sample_community(cfg)?;
    let (rates, kernels, schedule) = (cfg.rates()?, cfg.kernels()?, cfg.schedule()?);
    let (p0, a0) = cfg.initial_abundances(&community.x, &community.y)?;
    let init = MeanFieldState { plants: p0, pollinators: a0 };
    let traj = mean_field::integrate(&init, &community, rates, kernels, &schedule.times(), &OdeOptions::default())?;
    let last = traj.last().expect("at least one record time");
    let end = MeanFieldState::from_flat(last, traj.n);
    let residual = mean_field::equilibrium_residual(&end, &community, rates, kernels)?;
    let out = Out::create(cfg)?;
    out.text("trajectory.csv", &traj.to_csv())?;
    let mut side = traj.sidecar();
    side["finalResidual"] = json!(residual);
    out.json("trajectory.json", &side)?;
    out.plot("trajectory.svg", PlotKind::Lines, &trajectory_plot("mean-field ODE", &traj, "abundance"))?;
    let mut r = Report::default();
    r.say(format!("integrated {}+{} species to t = {}; equilibrium residual at the end {residual:.3e}", traj.n, traj.m, schedule.t_end));
    r.say(format!("wrote {}", out.dir.display()));
    Ok(r)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct FluctuationSummary {
    time: f64,
    empirical_mean: Vec<f64>,
    empirical_var: Vec<f64>,
    ou_var: Vec<f64>,
}

pub fn simulate_fluctuations(cfg: &RunConfig) -> CliResult<Report> {
    let (_, community) = sample_community(cfg)?;
    let (rates, kernels, schedule) = (cfg.rates()?, cfg.kernels()?, cfg.schedule()?);
    let k = cfg.carrying_capacity()?;
    let fl = &cfg.fluctuations;
    if !(fl.dt > 0.0) || fl.ou_paths < 2 || schedule.replicas < 2 {
        return Err(CliError::Config(
            "fluctuations.dt must be positive and both schedule.replicas and fluctuations.ouPaths at least 2".into(),
        ));
    }
    let (p0, a0) = cfg.initial_abundances(&community.x, &community.y)?;
    let (plants, pollinators) = (initial_counts(k, &p0), initial_counts(k, &a0));
    let kf = k as f64;
    // The ODE starts from the IBM's own initial state, so η(0) = 0.
    let init = MeanFieldState {
        plants: plants.iter().map(|&c| c as f64 / kf).collect(),
        pollinators: pollinators.iter().map(|&c| c as f64 / kf).collect(),
    };
    let times = schedule.times();
    let opts = OdeOptions::default();
    let steps = (schedule.t_end / fl.dt).round() as usize;
    let dense = mean_field::integrate(&init, &community, rates, kernels, &uniform_times(schedule.t_end, steps), &opts)?;
    let at_records = mean_field::integrate(&init, &community, rates, kernels, &times, &opts)?;
    let coeffs = OuCoefficients::along(&dense, &community, rates, kernels, fl.dt, schedule.t_end)?;

    let ibm = (0..schedule.replicas as u64)
        .into_par_iter()
        .map(|r| {
            simulate(
                &community,
                rates,
                kernels,
                k,
                plants.clone(),
                pollinators.clone(),
                schedule.t_end,
                &times,
                replica_seed(cfg.seed, r),
                &sim_options(schedule),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let eta = empirical_fluctuations(&ibm, &at_records, k)?;
    let zero = vec![0.0; init.plants.len() + init.pollinators.len()];
    let ou = (0..fl.ou_paths as u64)
        .into_par_iter()
        .map(|r| sample_paths(&coeffs, &zero, &times, cfg.seed, r))
        .collect::<Result<Vec<_>, _>>()?;

    let mut csv = String::from("replica,t");
    (1..=community.n()).for_each(|i| {
        let _ = write!(csv, ",eta_P_{i}");
    });
    (1..=community.m()).for_each(|j| {
        let _ = write!(csv, ",eta_A_{j}");
    });
    csv.push('\n');
    for r in 0..ibm.len() {
        for (ti, &t) in times.iter().enumerate() {
            let _ = write!(csv, "{r},{t}");
            eta.samples[ti][r].iter().for_each(|v| {
                let _ = write!(csv, ",{v}");
            });
            csv.push('\n');
        }
    }
    let summary: Vec<FluctuationSummary> = times
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let e = moments(&eta.samples[ti]);
            let ou_at: Vec<Vec<f64>> = ou.iter().map(|p| p[ti].clone()).collect();
            FluctuationSummary { time: t, empirical_mean: e.mean, empirical_var: e.variance, ou_var: moments(&ou_at).variance }
        })
        .collect();
    let out = Out::create(cfg)?;
    out.text("fluctuations.csv", &csv)?;
    out.json("summary.json", &summary)?;
    let var_series = |coord: usize, label: &str| {
        vec![
            Series::line(format!("IBM {label}"), summary.iter().map(|s| (s.time, s.empirical_var[coord])).collect()),
            Series::line(format!("OU {label}"), summary.iter().map(|s| (s.time, s.ou_var[coord])).collect()),
        ]
    };
    let n = community.n();
    out.plot(
        "variance.svg",
        PlotKind::Lines,
        &PlotData {
            title: format!("fluctuation variance, K = {k}"),
            panels: vec![
                Panel { title: "plant 1".into(), x_label: "t".into(), y_label: "Var η".into(), series: var_series(0, "P_1") },
                Panel { title: "pollinator 1".into(), x_label: "t".into(), y_label: "Var η".into(), series: var_series(n, "A_1") },
            ],
        },
    )?;
    let last = summary.last().expect("record times are nonempty");
    let mut r = Report::default();
    r.say(format!("{} IBM replicas vs {} OU paths at K = {k}", ibm.len(), ou.len()));
    r.say(format!(
        "t = {}: Var η (IBM/OU) for P_1 {:.4}/{:.4}, A_1 {:.4}/{:.4}",
        last.time, last.empirical_var[0], last.ou_var[0], last.empirical_var[n], last.ou_var[n]
    ));
    r.say(format!("wrote {}", out.dir.display()));
    Ok(r)
}

fn density_plot(title: &str, fields: &[(f64, DensityField)]) -> PlotData {
    let curves = |pick: fn(&DensityField) -> &Vec<f64>| -> Vec<Series> {
        fields
            .iter()
            .map(|(t, f)| Series {
                label: format!("t = {t}"),
                points: f.gridpoints().into_iter().zip(pick(f).iter().copied()).collect(),
                style: Style::Line,
            })
            .collect()
    };
    PlotData {
        title: title.into(),
        panels: vec![
            Panel { title: "plant density".into(), x_label: "x".into(), y_label: "p".into(), series: curves(|f| &f.p) },
            Panel { title: "pollinator density".into(), x_label: "y".into(), y_label: "a".into(), series: curves(|f| &f.a) },
        ],
    }
}

pub fn solve_kinetic(cfg: &RunConfig) -> CliResult<Report> {
    let spec = cfg.community()?;
    let (rates, kernels, schedule) = (cfg.rates()?, cfg.kernels()?, cfg.schedule()?);
    let n_grid = cfg.grid_n()?;
    let model = GridModel::from_specs(n_grid, &spec.graphon, &spec.harvest, rates, kernels)?;
    let field0 = match (&cfg.initial.plant_density, &cfg.initial.pollinator_density) {
        (None, None) => random_field(n_grid, cfg.initial.random_scale.unwrap_or(20.0), cfg.seed),
        (p, a) => {
            let one = DensityProfile::Constant { value: 1.0 };
            let (p, a) = (p.as_ref().unwrap_or(&one), a.as_ref().unwrap_or(&one));
            p.validate()?;
            a.validate()?;
            let grid: Vec<f64> = (0..=n_grid).map(|i| i as f64 / n_grid as f64).collect();
            DensityField::new(n_grid, grid.iter().map(|&x| p.eval(x)).collect(), grid.iter().map(|&y| a.eval(y)).collect())?
        }
    };
    let times = schedule.times();
    let fields = model.integrate(&field0, &times, &OdeOptions::default())?;
    let out = Out::create(cfg)?;
    for (i, (f, t)) in fields.iter().zip(&times).enumerate() {
        out.text(&format!("snapshot_{i:03}_t{t}.csv"), &f.to_csv())?;
    }
    let last = fields.last().expect("record times are nonempty");
    let metrics = concentration_metrics(last)?;
    let residual = model.stationarity_residual(last)?;
    let collapsed = metrics.plant_max_fraction > 0.99 && metrics.poll_max_fraction > 0.99 && residual < 1e-4;
    let predicted = match (kernels.plant.as_constant(), kernels.pollinator.as_constant()) {
        (Some(k), Some(h)) => {
            let psi_fn = |x: f64, y: f64| psi(x, y, &spec.graphon, &spec.harvest);
            match predicted_stable_state(rates, k, h, &psi_fn) {
                Ok(p) => json!(p),
                Err(e) => json!({"error": e.to_string()}),
            }
        }
        _ => json!({"error": "prediction needs constant competition kernels"}),
    };
    out.json(
        "collapse.json",
        &json!({
            "time": times.last(),
            "plantArgmax": metrics.plant_argmax,
            "pollArgmax": metrics.poll_argmax,
            "plantMass": metrics.plant_mass,
            "pollMass": metrics.poll_mass,
            "plantMaxFraction": metrics.plant_max_fraction,
            "pollMaxFraction": metrics.poll_max_fraction,
            "stationarityResidual": residual,
            "collapsed": collapsed,
            "predicted": predicted,
        }),
    )?;
    let shown: Vec<(f64, DensityField)> =
        times.iter().zip(&fields).filter(|(t, _)| **t > 0.0).map(|(&t, f)| (t, f.clone())).collect();
    out.plot("densities.svg", PlotKind::DensitySnapshots, &density_plot(&format!("kinetic densities, N = {n_grid}"), &shown))?;
    let mut r = Report::default();
    r.say(format!(
        "t = {}: plant atom at x = {} ({:.4} of mass {:.4}), pollinator atom at y = {} ({:.4} of mass {:.4}), residual {residual:.2e}",
        times.last().unwrap(),
        metrics.plant_argmax,
        metrics.plant_max_fraction,
        metrics.plant_mass,
        metrics.poll_argmax,
        metrics.poll_max_fraction,
        metrics.poll_mass
    ));
    if let Some(x0) = predicted.get("x0") {
        r.say(format!("predicted plant atom x0 = {x0}"));
    }
    r.say(format!("wrote {}", out.dir.display()));
    Ok(r)
}

/// Default rate set for `analyze-pair` when no config is given.
pub fn default_pair_rates() -> RateParams {
    RateParams::phase_plane(2.0, 1.0)
}

pub fn analyze_pair(cfg: &RunConfig) -> CliResult<Report> {
    let mut r = Report::default();
    let rates = match &cfg.rates {
        Some(_) => *cfg.rates()?,
        None => {
            r.say("no rates given: using αP=9, βP=γP=1, δP=3, dP=1, αA=25, βA=γA=1, dA=2");
            default_pair_rates()
        }
    };
    let pair = cfg.pair.unwrap_or_default();
    if cfg.pair.is_none() {
        r.say(format!("assuming c = {}, k = {}, h = {} (no pair section given)", pair.c, pair.k, pair.h));
    } else {
        r.say(format!("using c = {}, k = {}, h = {}", pair.c, pair.k, pair.h));
    }
    let PairSection { c, k, h } = pair;
    let pp = PairParams::new(rates, c, k, h);
    pp.validate()?;
    let report = count_and_solve(&pp)?;
    let lines = nullclines(&pp, NULLCLINE_POINTS)?;
    let p_max = 1.5 * lines.plant.iter().chain(&lines.pollinator).map(|q| q.0).chain(report.equilibria.iter().map(|e| e.p)).fold(0.0, f64::max).max(0.1);
    let a_max = 1.5 * lines.plant.iter().map(|q| q.1).chain(report.equilibria.iter().map(|e| e.a)).fold(0.0, f64::max).max(0.1);
    let grid = portrait_grid(p_max, a_max, PORTRAIT_COUNT);
    let basins = phase_portrait(&pp, &report, &grid, PORTRAIT_T_END, &OdeOptions::default())?;

    let out = Out::create(&RunConfig { rates: Some(rates), pair: Some(pair), ..cfg.clone() })?;
    out.json(
        "equilibria.json",
        &json!({
            "pair": pp,
            "totalEquilibria": report.equilibria.len(),
            "positiveCount": report.positive_count,
            "equilibria": report.equilibria,
            "fMax": report.f_max,
            "fArgmax": report.f_argmax,
        }),
    )?;
    let mut csv = String::from("curve,P,A\n");
    for (name, pts) in [("plant", &lines.plant), ("pollinator", &lines.pollinator)] {
        pts.iter().for_each(|(p, a)| {
            let _ = writeln!(csv, "{name},{p},{a}");
        });
    }
    out.text("nullclines.csv", &csv)?;
    let mut csv = String::from("P0,A0,basin\n");
    for (&(p, a), b) in grid.iter().zip(&basins) {
        let label = match b {
            Basin::Equilibrium(i) => i.to_string(),
            Basin::Unresolved => "unresolved".into(),
        };
        let _ = writeln!(csv, "{p},{a},{label}");
    }
    out.text("basins.csv", &csv)?;
    let eq_points = |stable: bool| -> Vec<(f64, f64)> {
        report
            .equilibria
            .iter()
            .filter(|e| (e.stability == pollinet::single_pair::Stability::Stable) == stable)
            .map(|e| (e.p, e.a))
            .collect()
    };
    out.plot(
        "phase_plane.svg",
        PlotKind::PhasePlane,
        &PlotData {
            title: format!("pair phase plane (c = {c}, k = {k}, h = {h})"),
            panels: vec![Panel {
                title: String::new(),
                x_label: "P".into(),
                y_label: "A".into(),
                series: vec![
                    Series::line("plant nullcline", lines.plant.clone()),
                    Series::line("pollinator nullcline", lines.pollinator.clone()),
                    Series::markers("stable", eq_points(true)),
                    Series::markers("unstable / non-hyperbolic", eq_points(false)),
                ],
            }],
        },
    )?;
    r.say(format!("{} equilibria in total ({} positive)", report.equilibria.len(), report.positive_count));
    for e in &report.equilibria {
        r.say(format!("  P = {:.6}, A = {:.6}: {:?} (det {:.4}, trace {:.4})", e.p, e.a, e.stability, e.det, e.trace));
    }
    r.say(format!("wrote {}", out.dir.display()));
    Ok(r)
}

pub fn convergence_study(cfg: &RunConfig) -> CliResult<Report> {
    let spec = cfg.community()?;
    let (rates, kernels, schedule) = (cfg.rates()?, cfg.kernels()?, cfg.schedule()?);
    let one = DensityProfile::Constant { value: 1.0 };
    let setup = ConvergenceSetup {
        graphon: spec.graphon.clone(),
        harvest: spec.harvest.clone(),
        params: *rates,
        kernels: kernels.clone(),
        plant_density: cfg.initial.plant_density.clone().unwrap_or(one.clone()),
        pollinator_density: cfg.initial.pollinator_density.clone().unwrap_or(one),
        n_grid: cfg.grid_n()?,
    };
    let ns = cfg.study.ns.clone().unwrap_or_else(|| vec![50, 100, 200]);
    let seed_count = cfg.study.seeds.unwrap_or(20);
    let seeds: Vec<u64> = (0..seed_count as u64).map(|i| replica_seed(cfg.seed, i)).collect();
    let times = schedule.times();
    let rows = run_convergence(&setup, &ns, &times, &seeds, &OdeOptions::default())?;
    let out = Out::create(cfg)?;
    let mut csv = String::from("n,t,meanPlantW1,sdPlantW1,meanPollW1,sdPollW1,seeds\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.n, row.t, row.mean_plant_w1, row.sd_plant_w1, row.mean_poll_w1, row.sd_poll_w1, row.seeds
        );
    }
    out.text("convergence.csv", &csv)?;
    out.json("convergence.json", &rows)?;
    let t_end = *times.last().expect("nonempty");
    let at_end: Vec<_> = rows.iter().filter(|r| r.t == t_end).collect();
    let pts = |f: fn(&pollinet::kinetic::ConvergenceRow) -> f64| -> Vec<(f64, f64)> {
        at_end.iter().map(|r| (r.n as f64, f(r))).filter(|&(_, w)| w > 0.0).collect()
    };
    let series = vec![
        Series { label: "plants".into(), points: pts(|r| r.mean_plant_w1), style: Style::LineAndMarkers },
        Series { label: "pollinators".into(), points: pts(|r| r.mean_poll_w1), style: Style::LineAndMarkers },
    ];
    out.plot(
        "convergence.svg",
        PlotKind::LogLog,
        &PlotData {
            title: format!("mean W1 to the kinetic solution at t = {t_end}"),
            panels: vec![Panel { title: String::new(), x_label: "n".into(), y_label: "W1".into(), series }],
        },
    )?;
    let mut r = Report::default();
    r.say(format!("{:>6} {:>10} {:>14} {:>14}", "n", "t", "plant W1", "pollinator W1"));
    for row in &at_end {
        r.say(format!("{:>6} {:>10} {:>14.6} {:>14.6}", row.n, row.t, row.mean_plant_w1, row.mean_poll_w1));
    }
    r.say(format!("wrote {}", out.dir.display()));
    Ok(r)
}

/// Fill every field that `lln-study` reads, defaulting to the reference setup.
pub fn resolve_lln(cfg: &RunConfig) -> RunConfig {
    let reference = LlnSetup::reference();
    let mut c = cfg.clone();
    c.rates.get_or_insert(reference.params);
    c.kernels.get_or_insert(reference.kernels.clone());
    if c.community.is_none() && c.initial.plants.is_none() && c.initial.plant_density.is_none() {
        c.initial.plants = Some(reference.init_plants.clone());
    }
    if c.community.is_none() && c.initial.pollinators.is_none() && c.initial.pollinator_density.is_none() {
        c.initial.pollinators = Some(reference.init_pollinators.clone());
    }
    let schedule = c.schedule.get_or_insert_with(|| Schedule::new(reference.t_end));
    schedule.record_every.get_or_insert(reference.record_dt);
    if cfg.schedule.is_none() {
        schedule.replicas = reference.replicas;
    }
    c.study.ks.get_or_insert(reference.ks);
    c
}

pub fn lln_study(cfg: &RunConfig) -> CliResult<Report> {
    let cfg = &resolve_lln(cfg);
    let community = match &cfg.community {
        Some(_) => sample_community(cfg)?.1,
        None => LlnSetup::reference_community(),
    };
    let schedule = cfg.schedule()?;
    let (init_plants, init_pollinators) = cfg.initial_abundances(&community.x, &community.y)?;
    let setup = LlnSetup {
        params: *cfg.rates()?,
        kernels: cfg.kernels()?.clone(),
        init_plants,
        init_pollinators,
        t_end: schedule.t_end,
        record_dt: schedule.record_every.expect("resolved"),
        replicas: schedule.replicas,
        ks: cfg.study.ks.clone().expect("resolved"),
        seed: cfg.seed,
    };
    if setup.ks.is_empty() || setup.ks.contains(&0) {
        return Err(CliError::Config("study.Ks must be a nonempty list of positive integers".into()));
    }
    let rows = run_lln(&community, &setup, &sim_options(schedule), &OdeOptions::default())?;
    let out = Out::create(cfg)?;
    let mut csv = String::from("K,rmsSupError,ratioToPrevious,replicas\n");
    for row in &rows {
        let ratio = row.ratio_to_previous.map_or(String::new(), |x| x.to_string());
        let _ = writeln!(csv, "{},{},{ratio},{}", row.k, row.rms_sup_error, row.replicas);
    }
    out.text("lln.csv", &csv)?;
    out.json("lln.json", &rows)?;
    let measured: Vec<(f64, f64)> = rows.iter().map(|r| (r.k as f64, r.rms_sup_error)).collect();
    let reference_line: Vec<(f64, f64)> = match measured.first() {
        Some(&(k0, e0)) if e0 > 0.0 => measured.iter().map(|&(k, _)| (k, e0 * (k0 / k).sqrt())).collect(),
        _ => Vec::new(),
    };
    out.plot(
        "lln.svg",
        PlotKind::LogLog,
        &PlotData {
            title: "IBM vs ODE: RMS of the sup error".into(),
            panels: vec![Panel {
                title: String::new(),
                x_label: "K".into(),
                y_label: "RMS sup error".into(),
                series: vec![
                    Series { label: "measured".into(), points: measured.into_iter().filter(|p| p.1 > 0.0).collect(), style: Style::LineAndMarkers },
                    Series::line("K^-1/2", reference_line),
                ],
            }],
        },
    )?;
    let mut r = Report::default();
    if cfg.community.is_none() {
        r.say("no community given: using the 3+3 reference community with its rates, kernels and start");
    }
    r.say(format!("{:>8} {:>14} {:>8}", "K", "rms error", "ratio"));
    for row in &rows {
        let ratio = row.ratio_to_previous.map_or("-".to_string(), |x| format!("{x:.3}"));
        r.say(format!("{:>8} {:>14.6} {:>8}", row.k, row.rms_sup_error, ratio));
    }
    r.say(format!("wrote {}", out.dir.display()));
    Ok(r)
}
