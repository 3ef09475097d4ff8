//! Adaptive Dormand–Prince 5(4) integrator for nonnegative autonomous systems.
//!
//! Steps that would drive any component below zero are rejected and halved,
//! and components that fall under [`OdeOptions::floor`] after an accepted step
//! are set to exactly zero, so extinction is absorbing.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: Option<f64>,
    /// Smallest admissible step, relative to `max(1, |t|)`.
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: u64,
    pub floor: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-8,
            initial_step: None,
            min_step: 1e-14,
            max_step: f64::INFINITY,
            max_steps: 100_000_000,
            floor: 1e-12,
        }
    }
}

impl OdeOptions {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Config("integrator tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: u64,
    pub rejected: u64,
    pub sign_rejections: u64,
    pub rhs_evals: u64,
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order weights minus embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn error_norm(err: &[f64], y: &[f64], y_new: &[f64], opts: &OdeOptions) -> f64 {
    if err.is_empty() {
        return 0.0;
    }
    let s: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = opts.abs_tol + opts.rel_tol * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    (s / err.len() as f64).sqrt()
}

/// Integrate `y' = f(y)` from `(t0, y0)`, returning the state at each of
/// `record_times` (nondecreasing, all `≥ t0`).
pub fn integrate_nonnegative<F>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    record_times: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<Vec<f64>>, OdeStats)>
where
    F: FnMut(&[f64], &mut [f64]),
{
    opts.validate()?;
    if y0.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Domain("initial state must be nonnegative".into()));
    }
    if record_times.iter().any(|&t| t < t0) || !record_times.windows(2).all(|w| w[0] <= w[1]) {
        return Err(Error::Config("record times must be sorted and not before the start time".into()));
    }
    let dim = y0.len();
    let mut stats = OdeStats::default();
    let mut y: Vec<f64> = y0.iter().map(|&v| if v < opts.floor { 0.0 } else { v }).collect();
    let mut t = t0;
    let mut out = Vec::with_capacity(record_times.len());

    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; dim]);
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    rhs(&y, &mut k[0]);
    stats.rhs_evals += 1;

    let mut h = match opts.initial_step {
        Some(h) => h,
        None => {
            let d0 = error_norm(&y, &y, &y, opts);
            let d1 = error_norm(&k[0], &y, &y, opts);
            if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                0.01 * d0 / d1
            }
        }
    }
    .min(opts.max_step);

    let mut steps = 0u64;
    for &target in record_times {
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Stiffness { t, h });
            }
            let clipped = h >= target - t;
            let step = if clipped { target - t } else { h };
            if step < opts.min_step * t.abs().max(1.0) && !clipped {
                return Err(Error::Stiffness { t, h: step });
            }

            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (r, a) in A[s][..s].iter().enumerate() {
                        acc += a * k[r][i];
                    }
                    stage[i] = y[i] + step * acc;
                }
                rhs(&stage, &mut k[s]);
                stats.rhs_evals += 1;
            }
            // The last stage point is the 5th-order solution, so k[6] is f(y_new) (FSAL).
            y_new.copy_from_slice(&stage);
            for i in 0..dim {
                let mut acc = 0.0;
                for (r, e) in E.iter().enumerate() {
                    acc += e * k[r][i];
                }
                err[i] = step * acc;
            }
            let norm = error_norm(&err, &y, &y_new, opts);

            if y_new.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                stats.sign_rejections += 1;
                stats.rejected += 1;
                h = step * 0.5;
                if h < opts.min_step * t.abs().max(1.0) {
                    return Err(Error::Stiffness { t, h });
                }
                continue;
            }
            if norm <= 1.0 {
                stats.accepted += 1;
                t = if clipped { target } else { t + step };
                let mut floored = false;
                for (yi, &v) in y.iter_mut().zip(&y_new) {
                    if v < opts.floor {
                        *yi = 0.0;
                        floored |= v != 0.0;
                    } else {
                        *yi = v;
                    }
                }
                if floored {
                    rhs(&y, &mut k[0]);
                    stats.rhs_evals += 1;
                } else {
                    k.swap(0, 6);
                }
                let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                let proposal = (step * factor).min(opts.max_step);
                // A step shortened to land on a record time should not shrink the next one.
                h = if clipped { proposal.max(h) } else { proposal };
            } else {
                stats.rejected += 1;
                let factor = (0.9 * norm.powf(-0.2)).clamp(0.2, 1.0);
                h = step * factor;
                if h < opts.min_step * t.abs().max(1.0) {
                    return Err(Error::Stiffness { t, h });
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}
