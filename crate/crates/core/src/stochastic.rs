//! Monte Carlo oracles for the two averaging steps.
//!
//! * [`mc_rtn_lindblad`] samples telegraph realizations and propagates the
//!   Gaussian-averaged (Lindblad) Bloch equations exactly on each segment of
//!   constant barrier. Its ensemble mean tests the Shapiro-Loginov closure.
//! * [`mc_full_sde`] additionally samples the white bias noise as random
//!   rotations about `z`, so every trajectory is a pure rotation of the
//!   Bloch vector. Its ensemble mean tests the Gaussian averaging as well.
//!
//! Realization `i` draws its telegraph path from ChaCha8 stream `2i` and its
//! Gaussian kicks from stream `2i + 1` of the same seed, so results do not
//! depend on scheduling, and the two oracles see identical telegraph paths
//! for a given seed. Ensemble sums are formed per fixed-size chunk in index
//! order and combined pairwise, which keeps them bit-reproducible for any
//! worker count.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::validate_grid;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::state::{BlochVector, DensityMatrix};

const CHUNK: usize = 256;

/// Largest allowed `rate * dt` for [`mc_full_sde`].
pub const MAX_ROTATION_PER_STEP: f64 = 0.05;

/// One telegraph path `eta(t) = +-1` on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RtnRealization {
    pub initial_sign: f64,
    pub switch_times: Vec<f64>,
    pub horizon: f64,
}

impl RtnRealization {
    /// Sign right after `t` (switches at exactly `t` are applied).
    pub fn value_at(&self, t: f64) -> f64 {
        let flips = self.switch_times.partition_point(|&s| s <= t);
        if flips % 2 == 0 {
            self.initial_sign
        } else {
            -self.initial_sign
        }
    }

    pub fn switch_count(&self) -> usize {
        self.switch_times.len()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_rtn_with<R: Rng>(rng: &mut R, nu: f64, horizon: f64) -> RtnRealization {
    let initial_sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let waiting = Exp::new(nu).expect("rate is positive");
    let mut switch_times = Vec::new();
    let mut t = 0.0;
    loop {
        t += waiting.sample(rng);
        if t > horizon {
            break;
        }
        switch_times.push(t);
    }
    RtnRealization {
        initial_sign,
        switch_times,
        horizon,
    }
}

/// Telegraph path with flip rate `nu`: fair initial sign, exponential
/// waiting times. Flip rate `nu` gives `<eta(t) eta(s)> = exp(-2 nu |t-s|)`.
pub fn sample_rtn(nu: f64, horizon: f64, seed: u64) -> Result<RtnRealization> {
    check_rtn_args(nu, horizon)?;
    Ok(sample_rtn_with(&mut stream_rng(seed, 0), nu, horizon))
}

/// Telegraph path of realization `index` in an ensemble seeded with `seed`.
pub fn sample_rtn_stream(nu: f64, horizon: f64, seed: u64, index: u64) -> Result<RtnRealization> {
    check_rtn_args(nu, horizon)?;
    Ok(sample_rtn_with(
        &mut stream_rng(seed, 2 * index),
        nu,
        horizon,
    ))
}

fn check_rtn_args(nu: f64, horizon: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidArgument(format!("nu must be > 0, got {nu}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be > 0, got {horizon}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean_bloch: Vec<BlochVector>,
    /// Sample standard deviation over `sqrt(n_realizations)`, per component.
    pub std_error: Vec<[f64; 3]>,
    pub n_realizations: usize,
    pub seed: u64,
}

/// Worst deviation of an ensemble from a reference, in units of its
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    /// Largest `|mean - ref| / std_error` over points with nonzero error.
    pub max_z: f64,
    /// Largest `|mean - ref|` over all points.
    pub max_abs: f64,
    /// Points where `|mean - ref| > k * std_error + floor`.
    pub violations: usize,
    pub points: usize,
}

impl Agreement {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl EnsembleResult {
    /// Compares the ensemble mean with `reference` point by point, allowing
    /// `k` standard errors plus an absolute `floor` (which covers components
    /// that are exactly deterministic and so have zero error).
    pub fn agreement(&self, reference: &[BlochVector], k: f64, floor: f64) -> Agreement {
        let mut out = Agreement {
            max_z: 0.0,
            max_abs: 0.0,
            violations: 0,
            points: 0,
        };
        for ((mean, se), r) in self.mean_bloch.iter().zip(&self.std_error).zip(reference) {
            for (c, (m, rv)) in mean.to_array().into_iter().zip(r.to_array()).enumerate() {
                let diff = (m - rv).abs();
                out.points += 1;
                out.max_abs = out.max_abs.max(diff);
                if se[c] > 0.0 {
                    out.max_z = out.max_z.max(diff / se[c]);
                }
                if diff > k * se[c] + floor {
                    out.violations += 1;
                }
            }
        }
        out
    }
}

#[derive(Clone)]
struct Accum {
    sum: Vec<[f64; 3]>,
    sumsq: Vec<[f64; 3]>,
}

impl Accum {
    fn zeros(len: usize) -> Self {
        Self {
            sum: vec![[0.0; 3]; len],
            sumsq: vec![[0.0; 3]; len],
        }
    }

    fn add_path(&mut self, path: &[BlochVector]) {
        for (i, p) in path.iter().enumerate() {
            for (c, v) in p.to_array().into_iter().enumerate() {
                self.sum[i][c] += v;
                self.sumsq[i][c] += v * v;
            }
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        for i in 0..self.sum.len() {
            for c in 0..3 {
                self.sum[i][c] += other.sum[i][c];
                self.sumsq[i][c] += other.sumsq[i][c];
            }
        }
        self
    }
}

fn pairwise(parts: &[Accum]) -> Accum {
    match parts.len() {
        0 => unreachable!("at least one chunk"),
        1 => parts[0].clone(),
        n => pairwise(&parts[..n / 2]).merge(&pairwise(&parts[n / 2..])),
    }
}

/// Runs `n` realizations of `path(i)` and reduces them deterministically.
fn run_ensemble<F>(times: &[f64], n: usize, seed: u64, path: F) -> EnsembleResult
where
    F: Fn(u64) -> Vec<BlochVector> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Accum> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Accum::zeros(times.len());
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                acc.add_path(&path(i as u64));
            }
            acc
        })
        .collect();
    let total = pairwise(&parts);

    let nf = n as f64;
    let mut mean_bloch = Vec::with_capacity(times.len());
    let mut std_error = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let mean = total.sum[i].map(|s| s / nf);
        let se = if n > 1 {
            let mut se = [0.0; 3];
            for c in 0..3 {
                let var = ((total.sumsq[i][c] - nf * mean[c] * mean[c]) / (nf - 1.0)).max(0.0);
                se[c] = (var / nf).sqrt();
            }
            se
        } else {
            [0.0; 3]
        };
        mean_bloch.push(BlochVector::from_array(mean));
        std_error.push(se);
    }
    EnsembleResult {
        times: times.to_vec(),
        mean_bloch,
        std_error,
        n_realizations: n,
        seed,
    }
}

fn check_ensemble_args(times: &[f64], n: usize) -> Result<()> {
    validate_grid(times)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n_realizations must be >= 1".into()));
    }
    Ok(())
}

/// Bloch-block generator of the Gaussian-averaged master equation for a
/// fixed barrier `delta`.
pub fn lindblad_bloch_generator(epsilon: f64, kappa: f64, delta: f64) -> Matrix3<f64> {
    let deph = -4.0 * kappa;
    Matrix3::new(
        deph, -epsilon, 0.0, //
        epsilon, deph, delta, //
        0.0, -delta, 0.0,
    )
}

/// Lindblad evolution of `p0` along one telegraph path, exact on every
/// constant segment.
pub fn lindblad_along_path(
    p: &ModelParams,
    rtn: &RtnRealization,
    p0: BlochVector,
    times: &[f64],
) -> Vec<BlochVector> {
    let generator = |sign: f64| {
        lindblad_bloch_generator(p.epsilon(), p.kappa(), p.delta0() + p.delta1() * sign)
    };
    let mut out = Vec::with_capacity(times.len());
    let mut state = Vector3::new(p0.x, p0.y, p0.z);
    let mut t = 0.0;
    let mut sign = rtn.initial_sign;
    let mut a = generator(sign);
    let mut switches = rtn.switch_times.iter().copied().peekable();

    for &target in times {
        while let Some(&s) = switches.peek() {
            if s > target {
                break;
            }
            if s > t {
                state = (a * (s - t)).exp() * state;
                t = s;
            }
            sign = -sign;
            a = generator(sign);
            switches.next();
        }
        if target > t {
            state = (a * (target - t)).exp() * state;
            t = target;
        }
        out.push(BlochVector::new(state[0], state[1], state[2]));
    }
    out
}

/// Ensemble over telegraph paths of the exactly propagated Lindblad
/// dynamics.
pub fn mc_rtn_lindblad(
    p: &ModelParams,
    rho0: &DensityMatrix,
    times: &[f64],
    n_realizations: usize,
    seed: u64,
) -> Result<EnsembleResult> {
    check_ensemble_args(times, n_realizations)?;
    let p0 = rho0.to_bloch()?;
    let horizon = times.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    Ok(run_ensemble(times, n_realizations, seed, |i| {
        let rtn = sample_rtn_with(&mut stream_rng(seed, 2 * i), p.nu(), horizon);
        lindblad_along_path(p, &rtn, p0, times)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeOptions {
    /// Time step.
    pub dt: f64,
    /// Each step's bias kick is the sum of this many independent Gaussian
    /// increments. Runs with equal `dt / noise_substeps` and seed see the
    /// same noise path (common random numbers).
    pub noise_substeps: usize,
}

impl SdeOptions {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            noise_substeps: 1,
        }
    }
}

/// Largest deterministic precession rate of any trajectory.
pub fn max_precession_rate(p: &ModelParams) -> f64 {
    p.epsilon().hypot(p.delta0().abs() + p.delta1())
}

/// Rotates `v` by the rotation vector `theta` (Rodrigues).
fn rotate(v: Vector3<f64>, theta: Vector3<f64>) -> Vector3<f64> {
    let angle = theta.norm();
    if angle == 0.0 {
        return v;
    }
    let k = theta / angle;
    let (s, c) = angle.sin_cos();
    v * c + k.cross(&v) * s + k * (k.dot(&v) * (1.0 - c))
}

/// One full-noise trajectory. The bias noise enters as a rotation about `z`
/// whose angle over a step of length `h` is Gaussian with variance
/// `8 kappa h`, which makes the transverse components dephase at `4 kappa`.
fn sde_path<R: Rng>(
    p: &ModelParams,
    rtn: &RtnRealization,
    kicks: &mut R,
    p0: BlochVector,
    times: &[f64],
    opts: SdeOptions,
) -> Vec<BlochVector> {
    let kick_var_rate = 8.0 * p.kappa();
    let sub = opts.noise_substeps.max(1);
    let mut out = Vec::with_capacity(times.len());
    let mut v = Vector3::new(p0.x, p0.y, p0.z);
    let mut t = 0.0;
    let mut switches = rtn.switch_times.iter().copied().peekable();
    let mut sign = rtn.initial_sign;

    for &target in times {
        while t < target {
            let h = opts.dt.min(target - t);
            let end = if target - t <= opts.dt { target } else { t + h };
            let mut xi = 0.0;
            if kick_var_rate > 0.0 {
                let sd = (kick_var_rate * h / sub as f64).sqrt();
                for _ in 0..sub {
                    let z: f64 = StandardNormal.sample(kicks);
                    xi += sd * z;
                }
            }
            let noise_rate = xi / h;
            // split the step at telegraph switches
            let mut s = t;
            while s < end {
                let next_switch = switches.peek().copied().filter(|&w| w < end);
                let seg_end = next_switch.unwrap_or(end);
                let len = seg_end - s;
                if len > 0.0 {
                    let delta = p.delta0() + p.delta1() * sign;
                    let theta = Vector3::new(-delta, 0.0, p.epsilon() + noise_rate) * len;
                    v = rotate(v, theta);
                }
                s = seg_end;
                if next_switch.is_some() {
                    sign = -sign;
                    switches.next();
                }
            }
            t = end;
        }
        out.push(BlochVector::new(v[0], v[1], v[2]));
    }
    out
}

/// Ensemble over telegraph paths and white bias noise of the unitary
/// dynamics. The weak error is first order in `dt`.
pub fn mc_full_sde(
    p: &ModelParams,
    rho0: &DensityMatrix,
    times: &[f64],
    n_realizations: usize,
    dt: f64,
    seed: u64,
) -> Result<EnsembleResult> {
    mc_full_sde_with(p, rho0, times, n_realizations, SdeOptions::new(dt), seed)
}

pub fn mc_full_sde_with(
    p: &ModelParams,
    rho0: &DensityMatrix,
    times: &[f64],
    n_realizations: usize,
    opts: SdeOptions,
    seed: u64,
) -> Result<EnsembleResult> {
    check_ensemble_args(times, n_realizations)?;
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dt must be > 0, got {}",
            opts.dt
        )));
    }
    let rate = max_precession_rate(p);
    if rate * opts.dt >= MAX_ROTATION_PER_STEP {
        return Err(Error::InvalidArgument(format!(
            "dt = {} too large: rate * dt = {:.3e} must be < {MAX_ROTATION_PER_STEP}",
            opts.dt,
            rate * opts.dt
        )));
    }
    let p0 = rho0.to_bloch()?;
    let horizon = times.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    Ok(run_ensemble(times, n_realizations, seed, |i| {
        let rtn = sample_rtn_with(&mut stream_rng(seed, 2 * i), p.nu(), horizon);
        let mut kicks = stream_rng(seed, 2 * i + 1);
        sde_path(p, &rtn, &mut kicks, p0, times, opts)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_state, uniform_grid, Backend};
    use crate::state::InitialState;

    #[test]
    fn rtn_is_reproducible_and_ordered() {
        let a = sample_rtn(1.0, 50.0, 7).unwrap();
        let b = sample_rtn(1.0, 50.0, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.switch_times.windows(2).all(|w| w[1] > w[0]));
        assert!(a.switch_times.iter().all(|&s| s > 0.0 && s <= 50.0));
        assert!(a.initial_sign == 1.0 || a.initial_sign == -1.0);
        assert_ne!(a, sample_rtn(1.0, 50.0, 8).unwrap());
    }

    #[test]
    fn rtn_value_flips_at_switches() {
        let r = RtnRealization {
            initial_sign: 1.0,
            switch_times: vec![1.0, 2.5],
            horizon: 3.0,
        };
        assert_eq!(r.value_at(0.5), 1.0);
        assert_eq!(r.value_at(1.0), -1.0);
        assert_eq!(r.value_at(2.0), -1.0);
        assert_eq!(r.value_at(2.9), 1.0);
    }

    #[test]
    fn rtn_rejects_bad_args() {
        assert!(sample_rtn(0.0, 1.0, 1).is_err());
        assert!(sample_rtn(1.0, 0.0, 1).is_err());
    }

    #[test]
    fn static_barrier_ensemble_is_deterministic() {
        let p = ModelParams::new(2.0, 0.1, 1.0, 0.0, 1.0).unwrap();
        let grid = uniform_grid(10.0, 11);
        let ens = mc_rtn_lindblad(&p, &InitialState::Rho1.density(), &grid, 100, 3).unwrap();
        let exact =
            evolve_state(&p, InitialState::Rho1, &grid, Backend::MatrixExponential).unwrap();
        for (m, e) in ens.mean_bloch.iter().zip(exact.bloch()) {
            assert!((*m - e).norm() < 1e-12);
        }
        assert!(ens.std_error.iter().all(|se| se.iter().all(|&s| s < 1e-7)));
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let p = ModelParams::new(0.0, 0.1, 1.0, 1.0, 1.0).unwrap();
        let grid = uniform_grid(5.0, 6);
        let rho = InitialState::Rho1.density();
        let a = mc_rtn_lindblad(&p, &rho, &grid, 600, 11).unwrap();
        let b = mc_rtn_lindblad(&p, &rho, &grid, 600, 11).unwrap();
        assert_eq!(a, b);
        let c = mc_full_sde(&p, &rho, &grid, 300, 0.01, 11).unwrap();
        let d = mc_full_sde(&p, &rho, &grid, 300, 0.01, 11).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn single_realization_has_zero_error() {
        let p = ModelParams::new(0.0, 0.1, 1.0, 1.0, 1.0).unwrap();
        let ens = mc_rtn_lindblad(&p, &InitialState::Rho2.density(), &[0.0, 1.0], 1, 0).unwrap();
        assert_eq!(ens.std_error, vec![[0.0; 3]; 2]);
    }

    #[test]
    fn trajectories_stay_on_the_sphere() {
        let p = ModelParams::new(2.0, 0.1, 1.0, 1.0, 1.0).unwrap();
        let rtn = sample_rtn(1.0, 20.0, 5).unwrap();
        let mut kicks = stream_rng(5, 1);
        let grid = uniform_grid(20.0, 41);
        let path = sde_path(
            &p,
            &rtn,
            &mut kicks,
            InitialState::Rho1.bloch(),
            &grid,
            SdeOptions::new(1e-3),
        );
        for v in path {
            assert!((v.norm() - 1.0).abs() < 1e-10);
        }
        let lind = lindblad_along_path(&p, &rtn, InitialState::Rho1.bloch(), &grid);
        for v in lind {
            assert!(v.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn unitary_rabi_without_noise() {
        let p = ModelParams::new(0.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let grid = uniform_grid(3.0, 4);
        let ens = mc_full_sde(&p, &InitialState::Rho1.density(), &grid, 4, 1e-2, 0).unwrap();
        for (t, m) in grid.iter().zip(&ens.mean_bloch) {
            assert!((m.z - t.cos()).abs() < 1e-12);
            assert!((m.y.abs() - t.sin().abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_large_dt() {
        let p = ModelParams::new(0.0, 0.1, 1.0, 1.0, 1.0).unwrap();
        let err = mc_full_sde(&p, &InitialState::Rho1.density(), &[0.0, 1.0], 10, 0.05, 0);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
        let err = mc_rtn_lindblad(&p, &InitialState::Rho1.density(), &[0.0, 1.0], 0, 0);
        assert!(err.is_err());
    }
}
