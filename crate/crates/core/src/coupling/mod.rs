//! Couplings of the stochastic wave flow: the Foias-Prodi intermediate
//! process and its Girsanov weight, total-variation estimates, discrete
//! maximal couplings and ensemble mixing rates.

mod fp;
mod maximal;
mod mixing;

pub use fp::{
    coupled_ensemble, fp_contraction_test, fp_intermediate, tv_bound, tv_estimate_likelihood, tv_shape_fit,
    ContractionReport, CoupledPath, CouplingOptions, GirsanovRecord, TvBound, TvEstimate, TvShape,
};
pub use maximal::{maximal_coupling_discrete, MaximalCoupling};
pub use mixing::{mixing_rate, MixingOptions, MixingReport, Observable};
