//! One plant, one pollinator, linked with weight `c`:
//!
//! ```text
//! dP/dt = (g^P(cA) − kP)·P
//! dA/dt = (g^A(cP) − hA)·A
//! ```
//!
//! Positive equilibria are the zeros of `f(x) = g^A((c/k)·g^P(cx))/h − x` on
//! the window where `g^P(cx) > 0`, with `P = g^P(cA)/k`. `f` rises then falls
//! there, so there are 0, 1 or 2 of them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mean_field::{MeanField, MeanFieldState};
use crate::network::Community;
use crate::ode::OdeOptions;
use crate::rates::{bisect, gp_zeros, viability_check, Kernels, RateParams};

/// Below this `|max f|` the two roots are reported as one tangency.
pub const TANGENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairParams {
    pub rates: RateParams,
    pub c: f64,
    pub k: f64,
    pub h: f64,
}

impl PairParams {
    pub fn new(rates: RateParams, c: f64, k: f64, h: f64) -> Self {
        Self { rates, c, k, h }
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        for (name, v) in [("c", self.c), ("k", self.k), ("h", self.h)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be a positive finite number")));
            }
        }
        Ok(())
    }

    pub fn community(&self) -> Community {
        Community::pair(self.c)
    }

    pub fn kernels(&self) -> Kernels {
        Kernels::constant(self.k, self.h)
    }

    /// `(C0⁻/c, C0⁺/c)`: pollinator abundances at which the plant can grow.
    pub fn window(&self) -> Result<(f64, f64)> {
        let (lo, hi) = gp_zeros(&self.rates)?;
        Ok((lo / self.c, hi / self.c))
    }

    fn f_unchecked(&self, x: f64) -> f64 {
        let r = &self.rates;
        r.g_a(self.c / self.k * r.g_p(self.c * x)) / self.h - x
    }

    fn f_prime(&self, x: f64) -> f64 {
        let r = &self.rates;
        let inner = self.c / self.k * r.g_p(self.c * x);
        r.dg_a(inner) * self.c * self.c / (self.k * self.h) * r.dg_p(self.c * x) - 1.0
    }

    /// `2×2` Jacobian of the pair system at `(p, a)`, row-major.
    pub fn jacobian(&self, p: f64, a: f64) -> [[f64; 2]; 2] {
        let (r, c) = (&self.rates, self.c);
        [
            [r.g_p(c * a) - 2.0 * self.k * p, c * p * r.dg_p(c * a)],
            [c * a * r.dg_a(c * p), r.g_a(c * p) - 2.0 * self.h * a],
        ]
    }
}

/// `f(x) = g^A((c/k)·g^P(cx))/h − x`, defined for `cx` inside the plant window.
pub fn f_aux(x: f64, pp: &PairParams) -> Result<f64> {
    let (lo, hi) = pp.window()?;
    if !(x > lo && x < hi) {
        return Err(Error::Domain(format!("x = {x} lies outside the window ({lo}, {hi})")));
    }
    Ok(pp.f_unchecked(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Stability {
    Stable,
    Unstable,
    NonHyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Equilibrium {
    pub p: f64,
    pub a: f64,
    pub stability: Stability,
    pub det: f64,
    pub trace: f64,
}

impl Equilibrium {
    pub fn is_null(&self) -> bool {
        self.p == 0.0 && self.a == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EquilibriumReport {
    pub positive_count: usize,
    /// Null equilibrium first, then positive ones by increasing `A`.
    pub equilibria: Vec<Equilibrium>,
    /// `max f` over the window, absent when the window is empty.
    pub f_max: Option<f64>,
    pub f_argmax: Option<f64>,
}

impl EquilibriumReport {
    pub fn positive(&self) -> &[Equilibrium] {
        &self.equilibria[1..]
    }

    pub fn stable_positive(&self) -> Option<&Equilibrium> {
        self.positive().iter().find(|e| e.stability == Stability::Stable)
    }
}

fn classify(j: [[f64; 2]; 2]) -> (Stability, f64, f64) {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let trace = j[0][0] + j[1][1];
    let scale = (j[0][0] * j[1][1]).abs().max((j[0][1] * j[1][0]).abs()).max(f64::MIN_POSITIVE);
    let stability = if det.abs() <= 1e-10 * scale || (det > 0.0 && trace == 0.0) {
        Stability::NonHyperbolic
    } else if det > 0.0 && trace < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    (stability, det, trace)
}

/// Maximizer of a unimodal function on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Count, locate and classify every equilibrium of the pair system.
pub fn count_and_solve(pp: &PairParams) -> Result<EquilibriumReport> {
    pp.validate()?;
    let r = &pp.rates;
    let null_j = [[r.g_p(0.0), 0.0], [0.0, r.g_a(0.0)]];
    let (null_stability, det0, tr0) = classify(null_j);
    let mut equilibria = vec![Equilibrium { p: 0.0, a: 0.0, stability: null_stability, det: det0, trace: tr0 }];

    let viability = viability_check(r);
    if !viability.plant_viable || !viability.poll_viable {
        return Ok(EquilibriumReport { positive_count: 0, equilibria, f_max: None, f_argmax: None });
    }
    let (lo, hi) = pp.window()?;
    let f = |x: f64| pp.f_unchecked(x);
    let (x_max, f_max) = golden_max(f, lo, hi);

    let make = |a: f64, expected: Stability| -> Result<Equilibrium> {
        let p = r.g_p(pp.c * a) / pp.k;
        let (stability, det, trace) = classify(pp.jacobian(p, a));
        if expected != Stability::NonHyperbolic && stability != expected {
            return Err(Error::Internal(format!(
                "equilibrium at A = {a} classified {stability:?}, expected {expected:?} (det {det:e}, f' {:e})",
                pp.f_prime(a)
            )));
        }
        Ok(Equilibrium { p, a, stability: expected, det, trace })
    };

    if f_max.abs() <= TANGENCY_TOL {
        equilibria.push(make(x_max, Stability::NonHyperbolic)?);
    } else if f_max > 0.0 {
        let a_minus = bisect(f, lo, x_max, 0.0)?;
        let a_plus = bisect(f, x_max, hi, 0.0)?;
        equilibria.push(make(a_minus, Stability::Unstable)?);
        equilibria.push(make(a_plus, Stability::Stable)?);
    }
    Ok(EquilibriumReport {
        positive_count: equilibria.len() - 1,
        equilibria,
        f_max: Some(f_max),
        f_argmax: Some(x_max),
    })
}

/// `max(|g^P(cA) − kP|, |g^A(cP) − hA|)`.
pub fn equilibrium_equations_residual(pp: &PairParams, p: f64, a: f64) -> f64 {
    let r = &pp.rates;
    (r.g_p(pp.c * a) - pp.k * p).abs().max((r.g_a(pp.c * p) - pp.h * a).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Nullclines {
    /// `(P, A)` points with `kP = g^P(cA)`.
    pub plant: Vec<(f64, f64)>,
    /// `(P, A)` points with `hA = g^A(cP) ≥ 0`.
    pub pollinator: Vec<(f64, f64)>,
}

/// Nonzero nullclines sampled at `resolution` points each.
pub fn nullclines(pp: &PairParams, resolution: usize) -> Result<Nullclines> {
    pp.validate()?;
    if resolution < 2 {
        return Err(Error::Config("nullcline resolution must be at least 2".into()));
    }
    let r = &pp.rates;
    let steps = (resolution - 1) as f64;
    let plant: Vec<(f64, f64)> = match pp.window() {
        Ok((lo, hi)) => (0..resolution)
            .map(|i| {
                let a = lo + (hi - lo) * i as f64 / steps;
                let p = if i == 0 || i == resolution - 1 { 0.0 } else { (r.g_p(pp.c * a) / pp.k).max(0.0) };
                (p, a)
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    let pollinator = if r.alpha_a > r.d_a * r.gamma_a {
        let start = pollinator_nullcline_start(pp);
        let p_peak = plant.iter().map(|&(p, _)| p).fold(0.0, f64::max);
        let end = (1.5 * p_peak).max(2.0 * start);
        (0..resolution)
            .map(|i| {
                let p = start + (end - start) * i as f64 / steps;
                let a = if i == 0 { 0.0 } else { (r.g_a(pp.c * p) / pp.h).max(0.0) };
                (p, a)
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(Nullclines { plant, pollinator })
}

/// `P` at which `g^A(cP) = 0`.
pub fn pollinator_nullcline_start(pp: &PairParams) -> f64 {
    let r = &pp.rates;
    r.d_a * r.beta_a / (pp.c * (r.alpha_a - r.d_a * r.gamma_a))
}

/// Crossing points of two polylines.
pub fn polyline_intersections(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for s in a.windows(2) {
        for t in b.windows(2) {
            let (p, r) = (s[0], (s[1].0 - s[0].0, s[1].1 - s[0].1));
            let (q, u) = (t[0], (t[1].0 - t[0].0, t[1].1 - t[0].1));
            let denom = r.0 * u.1 - r.1 * u.0;
            if denom == 0.0 {
                continue;
            }
            let qp = (q.0 - p.0, q.1 - p.1);
            let lambda = (qp.0 * u.1 - qp.1 * u.0) / denom;
            let mu = (qp.0 * r.1 - qp.1 * r.0) / denom;
            if (0.0..1.0).contains(&lambda) && (0.0..1.0).contains(&mu) {
                out.push((p.0 + lambda * r.0, p.1 + lambda * r.1));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Basin {
    /// Index into [`EquilibriumReport::equilibria`]; 0 is the null state.
    Equilibrium(usize),
    Unresolved,
}

/// Distance under which an endpoint is attributed to an equilibrium.
pub const BASIN_TOL: f64 = 1e-3;

/// Integrate from each initial `(P, A)` to `t_end` and label the endpoint by
/// the nearest equilibrium.
pub fn phase_portrait(
    pp: &PairParams,
    report: &EquilibriumReport,
    initial: &[(f64, f64)],
    t_end: f64,
    opts: &OdeOptions,
) -> Result<Vec<Basin>> {
    let community = pp.community();
    let mf = MeanField::new(&community, &pp.rates, &pp.kernels())?;
    initial
        .par_iter()
        .map(|&(p0, a0)| {
            let init = MeanFieldState { plants: vec![p0], pollinators: vec![a0] };
            let traj = mf.integrate(&init, &[0.0, t_end], opts)?;
            let end = traj.last().expect("two samples recorded");
            let label = report
                .equilibria
                .iter()
                .enumerate()
                .map(|(i, e)| (i, (end[0] - e.p).hypot(end[1] - e.a)))
                .filter(|&(_, d)| d < BASIN_TOL)
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .map_or(Basin::Unresolved, |(i, _)| Basin::Equilibrium(i));
            Ok(label)
        })
        .collect()
}

/// `count × count` grid over `[0, p_max] × [0, a_max]`, row-major in `A`.
pub fn portrait_grid(p_max: f64, a_max: f64, count: usize) -> Vec<(f64, f64)> {
    let steps = count.saturating_sub(1).max(1) as f64;
    (0..count)
        .flat_map(|ia| (0..count).map(move |ip| (p_max * ip as f64 / steps, a_max * ia as f64 / steps)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mean_field::equilibrium_residual;

    fn right_panel() -> PairParams {
        PairParams::new(RateParams::phase_plane(2.0, 1.0), 1.0, 1.0, 1.0)
    }

    #[test]
    fn f_at_the_plant_optimum() {
        let pp = right_panel();
        let want = pp.rates.g_a(11.0 - 6.0 * 3f64.sqrt()) - (3f64.sqrt() - 1.0);
        let got = f_aux(3f64.sqrt() - 1.0, &pp).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 6.72).abs() < 0.01);
    }

    #[test]
    fn f_outside_window_is_a_domain_error() {
        let pp = right_panel();
        let (lo, hi) = pp.window().unwrap();
        assert!(matches!(f_aux(lo, &pp), Err(Error::Domain(_))));
        assert!(matches!(f_aux(hi * 1.01, &pp), Err(Error::Domain(_))));
    }

    #[test]
    fn f_tends_to_a_finite_negative_value_at_the_left_edge() {
        let pp = right_panel();
        let (lo, _) = pp.window().unwrap();
        let limit = pp.rates.g_a(0.0) / pp.h - lo;
        let near = f_aux(lo + 1e-10, &pp).unwrap();
        assert!(limit < 0.0);
        assert!((near - limit).abs() < 1e-6);
    }

    #[test]
    fn right_panel_has_two_positive_equilibria() {
        let pp = right_panel();
        let rep = count_and_solve(&pp).unwrap();
        assert_eq!(rep.positive_count, 2);
        assert_eq!(rep.equilibria[0].stability, Stability::Stable);
        let (minus, plus) = (rep.equilibria[1], rep.equilibria[2]);
        assert!(minus.a < plus.a);
        assert_eq!(minus.stability, Stability::Unstable);
        assert_eq!(plus.stability, Stability::Stable);
        let (lo, hi) = pp.window().unwrap();
        for e in [minus, plus] {
            assert!(e.p > 0.0 && e.a > lo && e.a < hi);
            assert!(equilibrium_equations_residual(&pp, e.p, e.a) <= 1e-9);
            let det_identity = -e.p * e.a * pp.h * pp.k * pp.f_prime(e.a);
            assert!((e.det - det_identity).abs() <= 1e-9 * e.det.abs().max(1.0));
        }
    }

    #[test]
    fn strong_pollinator_competition_removes_coexistence() {
        let pp = PairParams::new(RateParams::phase_plane(3.0, 1.2), 1.0, 1.0, 10.0);
        let rep = count_and_solve(&pp).unwrap();
        assert_eq!(rep.positive_count, 0);
        assert!(rep.f_max.unwrap() < 0.0);
        let (lo, hi) = pp.window().unwrap();
        let scan_max = (1..10_000)
            .map(|i| pp.f_unchecked(lo + (hi - lo) * i as f64 / 10_000.0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(scan_max < 0.0);
    }

    #[test]
    fn left_panel_rates_with_unit_constants_still_coexist() {
        let pp = PairParams::new(RateParams::phase_plane(3.0, 1.2), 1.0, 1.0, 1.0);
        assert_eq!(count_and_solve(&pp).unwrap().positive_count, 2);
    }

    #[test]
    fn unviable_plants_have_only_the_null_state() {
        let mut rates = RateParams::phase_plane(2.0, 1.0);
        rates.alpha_p = 2.0;
        let rep = count_and_solve(&PairParams::new(rates, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(rep.positive_count, 0);
        assert_eq!(rep.equilibria.len(), 1);
    }

    #[test]
    fn tangency_is_non_hyperbolic() {
        // Tune h until max f vanishes: f_max(h) = g^A(·)/h − x at the argmax.
        let base = right_panel();
        let root = bisect(
            |h| {
                let pp = PairParams { h, ..base };
                let (lo, hi) = pp.window().unwrap();
                golden_max(|x| pp.f_unchecked(x), lo, hi).1
            },
            1.0,
            100.0,
            0.0,
        )
        .unwrap();
        let pp = PairParams { h: root, ..base };
        let rep = count_and_solve(&pp).unwrap();
        assert!(rep.f_max.unwrap().abs() <= TANGENCY_TOL);
        assert_eq!(rep.positive_count, 1);
        assert_eq!(rep.equilibria[1].stability, Stability::NonHyperbolic);
    }

    #[test]
    fn f_is_concave_on_the_window() {
        for pp in [right_panel(), PairParams::new(RateParams::phase_plane(3.0, 1.2), 1.0, 1.0, 10.0)] {
            let (lo, hi) = pp.window().unwrap();
            let step = (hi - lo) * 1e-4;
            for i in 1..2000 {
                let x = lo + (hi - lo) * i as f64 / 2000.0;
                let d2 = (pp.f_unchecked(x + step) - 2.0 * pp.f_unchecked(x) + pp.f_unchecked(x - step)) / (step * step);
                assert!(d2 < 0.0, "f'' = {d2} at {x}");
            }
        }
    }

    #[test]
    fn doubling_h_halves_the_first_term() {
        let pp = right_panel();
        let doubled = PairParams { h: 2.0 * pp.h, ..pp };
        for x in [0.3, 0.5, 0.9, 1.2] {
            let first = pp.f_unchecked(x) + x;
            assert_eq!(doubled.f_unchecked(x) + x, first / 2.0);
        }
    }

    #[test]
    fn equilibria_are_mean_field_equilibria() {
        let pp = right_panel();
        let rep = count_and_solve(&pp).unwrap();
        let c = pp.community();
        for e in rep.positive() {
            let s = MeanFieldState { plants: vec![e.p], pollinators: vec![e.a] };
            assert!(equilibrium_residual(&s, &c, &pp.rates, &pp.kernels()).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn mean_field_jacobian_equals_pair_jacobian() {
        let pp = right_panel();
        let rep = count_and_solve(&pp).unwrap();
        let c = pp.community();
        let mf = MeanField::new(&c, &pp.rates, &pp.kernels()).unwrap();
        for e in rep.positive() {
            let j = mf.jacobian(&MeanFieldState { plants: vec![e.p], pollinators: vec![e.a] }).unwrap();
            let want = [
                [-pp.k * e.p, pp.c * e.p * pp.rates.dg_p(pp.c * e.a)],
                [pp.c * e.a * pp.rates.dg_a(pp.c * e.p), -pp.h * e.a],
            ];
            for r in 0..2 {
                for col in 0..2 {
                    assert!((j[(r, col)] - want[r][col]).abs() <= 1e-10 * want[r][col].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn ode_converges_to_the_stable_equilibrium() {
        let pp = right_panel();
        let rep = count_and_solve(&pp).unwrap();
        let e = *rep.stable_positive().unwrap();
        let c = pp.community();
        let mf = MeanField::new(&c, &pp.rates, &pp.kernels()).unwrap();
        let init = MeanFieldState { plants: vec![e.p * 1.1], pollinators: vec![e.a * 0.9] };
        let traj = mf.integrate(&init, &[0.0, 200.0], &OdeOptions::default()).unwrap();
        let end = traj.last().unwrap();
        assert!((end[0] - e.p).abs() <= 1e-6 && (end[1] - e.a).abs() <= 1e-6);
    }

    #[test]
    fn nullclines_meet_at_the_equilibria() {
        let pp = right_panel();
        let rep = count_and_solve(&pp).unwrap();
        let nc = nullclines(&pp, 4001).unwrap();
        let (lo, hi) = pp.window().unwrap();
        assert_eq!(nc.plant.first().unwrap(), &(0.0, lo));
        assert_eq!(nc.plant.last().unwrap(), &(0.0, hi));
        let start = pollinator_nullcline_start(&pp);
        assert!(pp.rates.g_a(pp.c * start).abs() < 1e-12);
        assert_eq!(nc.pollinator[0], (start, 0.0));
        let crossings = polyline_intersections(&nc.plant, &nc.pollinator);
        assert_eq!(crossings.len(), 2);
        for e in rep.positive() {
            assert!(crossings.iter().any(|&(p, a)| (p - e.p).abs() < 1e-6 && (a - e.a).abs() < 1e-6));
        }
    }

    #[test]
    fn both_basins_are_populated() {
        let pp = right_panel();
        let rep = count_and_solve(&pp).unwrap();
        let plus = rep.equilibria[2];
        let grid = portrait_grid(2.0 * plus.p, 2.0 * plus.a, 50);
        let labels = phase_portrait(&pp, &rep, &grid, 100.0, &OdeOptions::default()).unwrap();
        assert_eq!(labels[0], Basin::Equilibrium(0));
        assert!(labels.contains(&Basin::Equilibrium(2)));
        assert!(!labels.contains(&Basin::Unresolved));
        let own = phase_portrait(&pp, &rep, &[(plus.p, plus.a)], 10.0, &OdeOptions::default()).unwrap();
        assert_eq!(own[0], Basin::Equilibrium(2));
    }
}
