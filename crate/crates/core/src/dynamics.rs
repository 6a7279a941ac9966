//! Noise-averaged Bloch dynamics.
//!
//! Averaging the Liouville equation over the white bias noise gives a
//! dephasing master equation; averaging that over the telegraph signal with
//! the Shapiro-Loginov rule closes the hierarchy at the first correlators
//! `<<eta P_i>>`. The result is the linear system `dY/dt = M Y` on
//!
//! ```text
//! Y = (Px, Py, Pz, eta*Px, eta*Py, eta*Pz)
//! ```
//!
//! which is solved here either by adaptive Runge-Kutta or by the matrix
//! exponential.

use nalgebra::{Complex, SMatrix, SVector};

use crate::error::{Error, Result};
use crate::ode::{self, Tolerances};
use crate::params::ModelParams;
use crate::state::{bloch_to_density, BlochVector, DensityMatrix, InitialState};

/// Generator of the averaged dynamics.
pub type Generator = SMatrix<f64, 6, 6>;

/// 6-vector of averaged Bloch components followed by the telegraph
/// correlators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState(pub SVector<f64, 6>);

impl AugmentedState {
    pub fn bloch(&self) -> BlochVector {
        BlochVector::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn correlators(&self) -> [f64; 3] {
        [self.0[3], self.0[4], self.0[5]]
    }

    pub fn density(&self) -> DensityMatrix {
        bloch_to_density(self.bloch())
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    /// Bloch part within `1 + tol`, correlators each within `1 + tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.bloch().is_physical(tol) && self.correlators().iter().all(|c| c.abs() <= 1.0 + tol)
    }
}

/// Builds `M` for the given parameters.
pub fn build_generator(p: &ModelParams) -> Generator {
    let (eps, kap, d0, d1, nu) = (p.epsilon(), p.kappa(), p.delta0(), p.delta1(), p.nu());
    let deph = -4.0 * kap;
    let corr = -2.0 * nu - 4.0 * kap;
    #[rustfmt::skip]
    let m = Generator::from_row_slice(&[
        deph, -eps, 0.0, 0.0,  0.0,  0.0,
        eps,  deph, d0,  0.0,  0.0,  d1,
        0.0,  -d0,  0.0, 0.0,  -d1,  0.0,
        0.0,  0.0,  0.0, corr, -eps, 0.0,
        0.0,  0.0,  d1,  eps,  corr, d0,
        0.0,  -d1,  0.0, 0.0,  -d0,  -2.0 * nu,
    ]);
    m
}

/// The initial state is independent of the noise and the telegraph signal
/// has zero mean, so every correlator starts at zero.
pub fn initial_augmented(p0: BlochVector) -> AugmentedState {
    AugmentedState(SVector::<f64, 6>::new(p0.x, p0.y, p0.z, 0.0, 0.0, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Dormand-Prince 5(4) with absolute and relative tolerance `1e-10`.
    RungeKutta,
    /// `Y(t) = exp(M t) Y(0)` by scaling and squaring.
    #[default]
    MatrixExponential,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rk" | "rk45" | "runge-kutta" | "dopri5" => Ok(Self::RungeKutta),
            "expm" | "exp" | "matrix-exponential" => Ok(Self::MatrixExponential),
            other => Err(Error::InvalidArgument(format!("unknown backend `{other}`"))),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::RungeKutta => "rk45",
            Self::MatrixExponential => "expm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<AugmentedState>,
    pub params: ModelParams,
    pub initial: BlochVector,
    pub initial_tag: Option<InitialState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn bloch(&self) -> impl Iterator<Item = BlochVector> + '_ {
        self.states.iter().map(AugmentedState::bloch)
    }

    pub fn l1_coherence(&self) -> Vec<f64> {
        self.bloch().map(BlochVector::l1_coherence).collect()
    }

    /// Largest Bloch norm along the trajectory.
    pub fn max_bloch_norm(&self) -> f64 {
        self.bloch().map(BlochVector::norm).fold(0.0, f64::max)
    }
}

/// Checks that a grid starts at zero and is strictly increasing.
pub fn validate_grid(times: &[f64]) -> Result<()> {
    match times.first() {
        None => return Err(Error::InvalidGrid("empty".into())),
        Some(&t0) if t0 != 0.0 => {
            return Err(Error::InvalidGrid(format!(
                "must start at 0, starts at {t0}"
            )))
        }
        _ => {}
    }
    if let Some(w) = times
        .windows(2)
        .find(|w| !(w[1] > w[0]) || !w[1].is_finite())
    {
        return Err(Error::InvalidGrid(format!(
            "not strictly increasing ({} followed by {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Uniform grid `0, dt, ..., (n-1) dt` spanning `[0, t_max]` with `n` points.
pub fn uniform_grid(t_max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let step = t_max / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i + 1 == points {
                        t_max
                    } else {
                        i as f64 * step
                    }
                })
                .collect()
        }
    }
}

/// `exp(M t)`.
pub fn propagator(m: &Generator, t: f64) -> Generator {
    (m * t).exp()
}

/// Propagates an arbitrary augmented state under a given generator. Used by
/// [`evolve`] and by validation code that needs a modified generator.
pub fn evolve_generator(
    m: &Generator,
    y0: AugmentedState,
    times: &[f64],
    backend: Backend,
) -> Result<Vec<AugmentedState>> {
    validate_grid(times)?;
    match backend {
        Backend::MatrixExponential => Ok(times
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    y0
                } else {
                    AugmentedState(propagator(m, t) * y0.0)
                }
            })
            .collect()),
        Backend::RungeKutta => {
            let ys = ode::integrate(|_, y| m * y, y0.0, times, Tolerances::default())?;
            Ok(ys.into_iter().map(AugmentedState).collect())
        }
    }
}

/// Solves the averaged dynamics from `rho0` on `times`.
pub fn evolve(
    p: &ModelParams,
    rho0: &DensityMatrix,
    times: &[f64],
    backend: Backend,
) -> Result<Trajectory> {
    let initial = rho0.to_bloch()?;
    let m = build_generator(p);
    let states = evolve_generator(&m, initial_augmented(initial), times, backend)?;
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        params: *p,
        initial,
        initial_tag: None,
    })
}

/// [`evolve`] from one of the reference states, keeping its tag.
pub fn evolve_state(
    p: &ModelParams,
    state: InitialState,
    times: &[f64],
    backend: Backend,
) -> Result<Trajectory> {
    let mut traj = evolve(p, &state.density(), times, backend)?;
    traj.initial_tag = Some(state);
    Ok(traj)
}

/// Eigenvalues of the generator.
pub fn generator_spectrum(m: &Generator) -> Vec<Complex<f64>> {
    m.complex_eigenvalues().iter().copied().collect()
}

/// Largest real part in the spectrum of the generator.
pub fn spectral_abscissa(m: &Generator) -> f64 {
    generator_spectrum(m)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Damping rate of the `(Py, Pz)` oscillation when the barrier is static
/// and unbiased: half of the transverse dephasing rate `4 kappa`.
pub fn static_damping_rate(kappa: f64) -> f64 {
    2.0 * kappa
}

/// l1 coherence for a static, unbiased barrier (`epsilon = delta1 = 0`):
///
/// ```text
/// rho1: |exp(-g t) sin(W t) D0 / W|
/// rho2: |exp(-g t) (D0 / W) cos(W t + theta)|,  theta = atan(g / W)
/// ```
///
/// with `W = sqrt(D0^2 - g^2)` and `g` the damping of [`static_damping_rate`].
/// `rho3` mirrors `rho1`. Only the underdamped branch `g < D0` is defined.
pub fn static_coherence_closed_form(
    kappa: f64,
    delta0: f64,
    initial: InitialState,
    t: f64,
) -> Result<f64> {
    let g = static_damping_rate(kappa);
    if !(delta0 > 0.0) || kappa < 0.0 {
        return Err(Error::OutOfRegime(format!(
            "requires delta0 > 0 and kappa >= 0 (delta0 = {delta0}, kappa = {kappa})"
        )));
    }
    if g >= delta0 {
        return Err(Error::OutOfRegime(format!(
            "overdamped: damping {g} >= delta0 {delta0}"
        )));
    }
    let omega = (delta0 * delta0 - g * g).sqrt();
    let envelope = (-g * t).exp() * delta0 / omega;
    let value = match initial {
        InitialState::Rho1 | InitialState::Rho3 => envelope * (omega * t).sin(),
        InitialState::Rho2 => {
            let theta = (g / omega).atan();
            envelope * (omega * t + theta).cos()
        }
    };
    Ok(value.abs())
}

/// Trace distance between the evolved `rho1` and `rho3` when only the
/// telegraph noise is present (`epsilon = kappa = delta0 = 0`):
/// `exp(-nu t) |cos(g t) + (nu/g) sin(g t)|` with `g = sqrt(delta1^2 - nu^2)`,
/// continued to `cosh`/`sinh` for `nu > delta1`.
pub fn rtn_only_trace_distance(delta1: f64, nu: f64, t: f64) -> f64 {
    let disc = delta1 * delta1 - nu * nu;
    let g = disc.abs().sqrt();
    let decay = (-nu * t).exp();
    let x = g * t;
    let value = if disc >= 0.0 {
        // sin(x)/g = t sinc(x) keeps the critical point continuous
        let sinc = if x.abs() < 1e-4 {
            1.0 - x * x / 6.0
        } else {
            x.sin() / x
        };
        decay * (x.cos() + nu * t * sinc)
    } else if x < 1.0 {
        let sinhc = if x < 1e-4 {
            1.0 + x * x / 6.0
        } else {
            x.sinh() / x
        };
        decay * (x.cosh() + nu * t * sinhc)
    } else {
        let r = nu / g;
        0.5 * ((1.0 + r) * (-(nu - g) * t).exp() + (1.0 - r) * (-(nu + g) * t).exp())
    };
    value.abs()
}
