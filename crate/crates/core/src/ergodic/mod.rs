//! Long-time statistics: occupation measures, law-of-large-numbers and
//! central-limit diagnostics, Feynman-Kac pressures, exact eigentriples of
//! tilted finite chains, Legendre transforms and level-1 large deviations.

mod chain;
mod dynamics;
mod feynman_kac;
mod legendre;
mod ldp;
mod occupation;
mod tightness;

pub use chain::{fk_eigen_exact, pressure_exact, ChainDynamics, EigenTriple, FiniteChain};
pub use dynamics::{Dynamics, WaveDynamics, WaveState};
pub use feynman_kac::{
    feynman_kac_estimate, feynman_kac_population, pressure_population, FkEstimate, FkOptions, PopulationEstimate,
    PopulationOptions, Potential,
};
pub use ldp::{ldp_level1_check, LdpOptions, LdpRow};
pub use legendre::{legendre, legendre_transform, PressureCurve, RateCurve};
pub use occupation::{clt_check, occupation_measure, slln_check, CltReport, Histogram, OccupationRecord, SllnReport};
pub use tightness::{exponential_tightness_probe, lyapunov_drift_check, lyapunov_weights, LyapunovDrift, LyapunovWeights, TightnessReport};
