//! Freidlin-Wentzell machinery: equilibria, the action functional,
//! quasipotentials, W-graphs, the rate function and the small-noise
//! experiments.

mod action;
mod boundary;
mod equilibria;
mod graph;
mod lbfgs;
mod quasipotential;
mod rate;
mod smallnoise;
mod stabilize;

pub use action::{action, action_with_coeffs, ControlPath};
pub use equilibria::{
    damped_spectrum_max_real, find_equilibria, nonlinear_jacobian, stationary_residual, toy_equilibria, Equilibrium,
    EquilibriumOptions, EquilibriumSearch, ToyEquilibrium,
};
pub use graph::{brute_force_w, graph_weight, min_in_arborescence, w_graph_weights, GraphVariant, WGraph};
pub use quasipotential::{
    quasipotential, Barrier, ControlledDynamics, InitKind, LadderRung, QuasipotentialOptions, QuasipotentialResult,
    StartReport, ToyControl, WaveControl,
};
pub use stabilize::{stabilization_control, stabilization_scaling, StabilizationReport};
pub use rate::{
    fw_rate, fw_rate_at_node, gradient_quasipotential_1d, gradient_rate_oracle, potential_infimum, toy_fw_rate,
    toy_network, toy_quasipotential, EquilibriumNetwork, RateValue, VSource,
};
pub use smallnoise::{
    rate_infimum_on, smallnoise_exact, smallnoise_mc, smallnoise_mc_toy, McOptions, SetSummary, SmallNoiseMode,
    SmallNoiseReport, SmallNoiseRow,
};
pub use boundary::{boundary_chain, boundary_radii_sweep, BoundaryChainConfig, BoundaryChainReport, BoundaryLevel, ChainCell};
