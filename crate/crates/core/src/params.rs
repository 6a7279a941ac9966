use crate::error::{Error, Result};

/// Parameters of the noisy tunneling Hamiltonian, in units where the static
/// tunneling `delta0` is usually 1.
///
/// * `epsilon`: static bias between the wells.
/// * `kappa`: intensity of the white Gaussian bias noise.
/// * `delta0`: mean tunneling amplitude.
/// * `delta1`: amplitude of the telegraph modulation of the barrier.
/// * `nu`: switching rate of the telegraph signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    epsilon: f64,
    kappa: f64,
    delta0: f64,
    delta1: f64,
    nu: f64,
}

impl ModelParams {
    pub fn new(epsilon: f64, kappa: f64, delta0: f64, delta1: f64, nu: f64) -> Result<Self> {
        let named = [
            ("epsilon", epsilon),
            ("kappa", kappa),
            ("delta0", delta0),
            ("delta1", delta1),
            ("nu", nu),
        ];
        if let Some((name, v)) = named.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "{name} must be finite, got {v}"
            )));
        }
        if nu <= 0.0 {
            // frozen disorder is not described by the closed correlator hierarchy
            return Err(Error::InvalidParams(format!("nu must be > 0, got {nu}")));
        }
        if kappa < 0.0 {
            return Err(Error::InvalidParams(format!(
                "kappa must be >= 0, got {kappa}"
            )));
        }
        if delta1 < 0.0 {
            return Err(Error::InvalidParams(format!(
                "delta1 must be >= 0, got {delta1}"
            )));
        }
        Ok(Self {
            epsilon,
            kappa,
            delta0,
            delta1,
            nu,
        })
    }

    /// Fixes the telegraph amplitude and derives the rate from the Kubo
    /// number, `nu = delta1 / kubo`.
    pub fn with_kubo(
        epsilon: f64,
        kappa: f64,
        delta0: f64,
        delta1: f64,
        kubo: f64,
    ) -> Result<Self> {
        if !(kubo > 0.0 && kubo.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "Kubo number must be > 0, got {kubo}"
            )));
        }
        if delta1 <= 0.0 {
            return Err(Error::InvalidParams(
                "delta1 must be > 0 when the Kubo number is prescribed".into(),
            ));
        }
        Self::new(epsilon, kappa, delta0, delta1, delta1 / kubo)
    }

    /// Telegraph-only regime: no bias, no Gaussian noise, no static tunneling.
    pub fn telegraph_only(delta1: f64, nu: f64) -> Result<Self> {
        Self::new(0.0, 0.0, 0.0, delta1, nu)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Kubo number `K = delta1 / nu`.
    pub fn kubo(&self) -> f64 {
        self.delta1 / self.nu
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        Self::new(epsilon, self.kappa, self.delta0, self.delta1, self.nu)
    }

    pub fn with_kappa(self, kappa: f64) -> Result<Self> {
        Self::new(self.epsilon, kappa, self.delta0, self.delta1, self.nu)
    }
}
