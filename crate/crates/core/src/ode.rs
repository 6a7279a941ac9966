//! Adaptive Dormand-Prince 5(4) integrator with embedded error control.

use nalgebra::SVector;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-10,
            max_steps: 10_000_000,
        }
    }
}

/// Integrates `dy/dt = f(t, y)` and returns the solution at each entry of
/// `times`. The grid must be strictly increasing; `times[0]` is the initial
/// time and the first output is `y0` unchanged.
pub fn integrate<const N: usize, F>(
    f: F,
    y0: SVector<f64, N>,
    times: &[f64],
    tol: Tolerances,
) -> Result<Vec<SVector<f64, N>>>
where
    F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let Some(&t0) = times.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(times.len());
    out.push(y0);

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = initial_step(&f, t, &y, &k1, tol);
    let mut steps = 0usize;

    for &target in &times[1..] {
        while t < target {
            if steps >= tol.max_steps {
                return Err(Error::StepBudgetExceeded {
                    t,
                    max_steps: tol.max_steps,
                });
            }
            let remaining = target - t;
            let clipped = h >= remaining;
            let step = if clipped { remaining } else { h };
            if step <= 16.0 * f64::EPSILON * t.abs().max(1.0) && !clipped {
                return Err(Error::StepUnderflow { t, h: step });
            }

            let (y_new, k7, err) = dopri_step(&f, t, &y, &k1, step, tol);
            steps += 1;

            if err <= 1.0 {
                t = if clipped { target } else { t + step };
                y = y_new;
                k1 = k7;
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                // a clipped step says nothing about the natural step size
                if !clipped || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                let factor = (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
                h = step * factor;
            }
        }
        out.push(y);
    }
    Ok(out)
}

fn dopri_step<const N: usize, F>(
    f: &F,
    t: f64,
    y: &SVector<f64, N>,
    k1: &SVector<f64, N>,
    h: f64,
    tol: Tolerances,
) -> (SVector<f64, N>, SVector<f64, N>, f64)
where
    F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let k2 = f(t + C2 * h, &(y + k1 * (h * A21)));
    let k3 = f(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h));
    let k4 = f(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
    let k5 = f(
        t + C5 * h,
        &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h),
    );
    let k6 = f(
        t + h,
        &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h),
    );
    let y_new = y + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
    let k7 = f(t + h, &y_new);
    let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;

    let mut acc = 0.0;
    for i in 0..N {
        let scale = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
        acc += (err_vec[i] / scale).powi(2);
    }
    let err = if N == 0 { 0.0 } else { (acc / N as f64).sqrt() };
    let err = if err.is_finite() { err } else { f64::INFINITY };
    (y_new, k7, err)
}

/// Starting step size following Hairer, Norsett & Wanner (II.4).
fn initial_step<const N: usize, F>(
    f: &F,
    t: f64,
    y: &SVector<f64, N>,
    k1: &SVector<f64, N>,
    tol: Tolerances,
) -> f64
where
    F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let scaled_norm = |v: &SVector<f64, N>| {
        let mut acc = 0.0;
        for i in 0..N {
            let scale = tol.atol + tol.rtol * y[i].abs();
            acc += (v[i] / scale).powi(2);
        }
        (acc / N.max(1) as f64).sqrt()
    };
    let d0 = scaled_norm(y);
    let d1 = scaled_norm(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1 = y + k1 * h0;
    let k2 = f(t + h0, &y1);
    let d2 = scaled_norm(&(k2 - k1)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}
