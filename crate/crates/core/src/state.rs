//! Qubit states and the information measures evaluated on them.
//!
//! Basis convention: `|1>` is the +1 eigenstate of `sigma_z` and `|0>` the -1
//! eigenstate, so the localized state `rho1 = |1><1|` sits at the north pole of
//! the Bloch sphere. Density matrices are indexed in the order (`|1>`, `|0>`),
//! i.e. `rho00 = <1|rho|1> = (1 + Pz) / 2`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Tolerance used when a state is constructed directly.
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Tolerance on Bloch-norm drift after numerical evolution.
pub const EVOLUTION_TOL: f64 = 1e-9;
/// Tolerance used by [`density_to_bloch`] when checking its input.
pub const CONVERSION_TOL: f64 = 1e-10;

/// Real 3-vector `(Px, Py, Pz)` with `rho = (I + P.sigma) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const ORIGIN: Self = Self {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// l1-norm coherence computed directly from the transverse components.
    pub fn l1_coherence(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_physical(self, tol: f64) -> bool {
        self.norm() <= 1.0 + tol
    }
}

impl std::ops::Sub for BlochVector {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Neg for BlochVector {
    type Output = Self;

    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// 2x2 density matrix of the two-level system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    entries: [[C64; 2]; 2],
}

impl DensityMatrix {
    /// Builds a state and checks Hermiticity, unit trace and positivity to
    /// [`CONSTRUCTION_TOL`].
    pub fn new(rho00: C64, rho01: C64, rho10: C64, rho11: C64) -> Result<Self> {
        let rho = Self::from_entries([[rho00, rho01], [rho10, rho11]]);
        rho.validate(CONSTRUCTION_TOL)?;
        Ok(rho)
    }

    /// Wraps raw entries without any checks.
    pub const fn from_entries(entries: [[C64; 2]; 2]) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[[C64; 2]; 2] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row][col]
    }

    pub fn trace(&self) -> C64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn maximally_mixed() -> Self {
        bloch_to_density(BlochVector::ORIGIN)
    }

    fn check_hermitian_trace(&self, tol: f64) -> Result<()> {
        let [[a, b], [c, d]] = self.entries;
        let mismatch = (b - c.conj()).norm().max(a.im.abs()).max(d.im.abs());
        if mismatch > tol {
            return Err(Error::NonHermitian { mismatch });
        }
        let trace = a.re + d.re;
        if (trace - 1.0).abs() > tol {
            return Err(Error::TraceNotUnity { trace });
        }
        Ok(())
    }

    /// Checks every state invariant at the given tolerance.
    pub fn validate(&self, tol: f64) -> Result<()> {
        self.check_hermitian_trace(tol)?;
        let [[a, b], [_, d]] = self.entries;
        let det = a.re * d.re - b.norm_sqr();
        if det < -tol || a.re < -tol || d.re < -tol {
            return Err(Error::NotPositive { det });
        }
        Ok(())
    }

    pub fn to_bloch(&self) -> Result<BlochVector> {
        density_to_bloch(self)
    }

    /// Diagonal part in the `sigma_z` eigenbasis.
    pub fn dephased(&self) -> Self {
        let zero = C64::new(0.0, 0.0);
        Self::from_entries([[self.entries[0][0], zero], [zero, self.entries[1][1]]])
    }
}

/// `rho = (I + Px sx + Py sy + Pz sz) / 2`. No physicality check is made.
///
/// The lower population is stored as `1 - rho00`, which keeps the
/// reconstructed trace equal to one in floating point.
pub fn bloch_to_density(p: BlochVector) -> DensityMatrix {
    let rho00 = 0.5 * (1.0 + p.z);
    let rho11 = 1.0 - rho00;
    let rho01 = C64::new(0.5 * p.x, -0.5 * p.y);
    DensityMatrix::from_entries([
        [C64::new(rho00, 0.0), rho01],
        [rho01.conj(), C64::new(rho11, 0.0)],
    ])
}

/// `P_i = Tr(rho sigma_i)`. Rejects non-Hermitian input and trace != 1.
pub fn density_to_bloch(rho: &DensityMatrix) -> Result<BlochVector> {
    rho.check_hermitian_trace(CONVERSION_TOL)?;
    let [[a, b], [_, d]] = rho.entries;
    Ok(BlochVector::new(2.0 * b.re, -2.0 * b.im, a.re - d.re))
}

/// The three reference states used throughout the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InitialState {
    /// `|1><1|`, localized in one well.
    Rho1,
    /// `|psi><psi|` with `|psi> = (|1> + i|0>)/sqrt(2)`, maximally coherent.
    Rho2,
    /// `|0><0|`, orthogonal to `Rho1`.
    Rho3,
}

impl InitialState {
    pub const ALL: [InitialState; 3] = [Self::Rho1, Self::Rho2, Self::Rho3];

    pub fn bloch(self) -> BlochVector {
        match self {
            Self::Rho1 => BlochVector::new(0.0, 0.0, 1.0),
            Self::Rho2 => BlochVector::new(0.0, 1.0, 0.0),
            Self::Rho3 => BlochVector::new(0.0, 0.0, -1.0),
        }
    }

    pub fn density(self) -> DensityMatrix {
        bloch_to_density(self.bloch())
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Rho1 => "rho1",
            Self::Rho2 => "rho2",
            Self::Rho3 => "rho3",
        }
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for InitialState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rho1" => Ok(Self::Rho1),
            "rho2" => Ok(Self::Rho2),
            "rho3" => Ok(Self::Rho3),
            other => Err(Error::UnknownState(other.to_string())),
        }
    }
}

/// Looks up one of the reference states by its tag.
pub fn canonical_state(tag: &str) -> Result<DensityMatrix> {
    tag.parse::<InitialState>().map(InitialState::density)
}

/// Sum of the moduli of the off-diagonal entries, `2|rho01|`.
pub fn l1_coherence(rho: &DensityMatrix) -> f64 {
    rho.get(0, 1).norm() + rho.get(1, 0).norm()
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Von Neumann entropy `-Tr(rho log2 rho)` of a qubit state.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let [[a, b], [_, d]] = *rho.entries();
    // eigenvalues (1 +- |P|) / 2 with |P| = sqrt((a - d)^2 + 4|b|^2)
    let radius = ((a.re - d.re).powi(2) + 4.0 * b.norm_sqr()).sqrt().min(1.0);
    binary_entropy(0.5 * (1.0 + radius))
}

/// `S(rho_diag) - S(rho)`, in bits.
pub fn relative_entropy_coherence(rho: &DensityMatrix) -> f64 {
    let diag = binary_entropy(rho.get(0, 0).re);
    (diag - von_neumann_entropy(rho)).max(0.0)
}

/// `(1/2) Tr|rho_a - rho_b|`.
///
/// The difference of two qubit states is traceless and Hermitian, so its
/// eigenvalues are `+-sqrt(|d00|^2 + |d01|^2)` and the trace norm follows
/// from the entries without a Bloch conversion.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let d00 = a.get(0, 0) - b.get(0, 0);
    let d11 = a.get(1, 1) - b.get(1, 1);
    let d01 = a.get(0, 1) - b.get(0, 1);
    let half_diff = 0.5 * (d00 - d11);
    (half_diff.norm_sqr() + d01.norm_sqr()).sqrt()
}

/// Trace distance written in Bloch form, `|Pa - Pb| / 2`.
pub fn bloch_trace_distance(a: BlochVector, b: BlochVector) -> f64 {
    0.5 * (a - b).norm()
}
