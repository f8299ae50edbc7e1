//! Numerical core of the damped stochastic wave laboratory.
//!
//! The crate is `no_std` compatible (it needs `alloc`); the default `std`
//! feature switches the math backend to the platform `libm` and runs
//! ensembles on a rayon pool. Results are bit-identical either way because
//! every trajectory owns a counter-derived random stream and reductions are
//! performed in index order.
//!
//! Module map:
//!
//! * [`spectral`] Dirichlet eigenbases, fields, Sobolev and phase norms.
//! * [`sim`] nonlinearities, noise, the exponential integrator and the
//!   energy/growth diagnostics of the stochastic wave flow.
//! * [`coupling`] Foias-Prodi intermediate processes, Girsanov drifts,
//!   total-variation estimates, discrete maximal couplings, mixing rates.
//! * [`ergodic`] occupation measures, SLLN/CLT checks, Feynman-Kac pressures,
//!   finite-chain eigentriples, Legendre transforms, level-1 LDP checks.
//! * [`fw`] equilibria, actions, quasipotentials, W-graphs and the small-noise
//!   experiments.
//! * [`oracle`] exactly solvable toy models.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod coupling;
pub mod ergodic;
pub mod error;
pub mod fw;
pub mod linalg;
pub mod math;
pub mod oracle;
pub mod parallel;
pub mod rng;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};

#[allow(unused_imports)]
pub(crate) mod prelude {
    pub use alloc::boxed::Box;
    pub use alloc::string::{String, ToString};
    pub use alloc::vec;
    pub use alloc::vec::Vec;
    pub use num_traits::Float;
}
