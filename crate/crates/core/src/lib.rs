//! Noise-averaged dynamics of a two-level tunneling system whose barrier is
//! modulated by random telegraph noise and whose bias carries white Gaussian
//! noise, with coherence and non-Markovianity measures and Monte Carlo
//! oracles for the averaging steps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod nonmarkov;
pub mod ode;
pub mod params;
pub mod state;
pub mod stochastic;

pub use dynamics::{
    build_generator, evolve, evolve_state, initial_augmented, AugmentedState, Backend, Generator,
    Trajectory,
};
pub use error::{Error, Result};
pub use params::ModelParams;
pub use state::{BlochVector, DensityMatrix, InitialState};
