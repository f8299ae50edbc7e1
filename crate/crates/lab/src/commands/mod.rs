//! One function per subcommand. Each fills a verdict and the artifacts.

mod coupling;
mod ergodic;
mod fw;
mod selftest;
mod sim;

use crate::config::{Command, RunConfig};
use crate::error::{LabError, LabResult};
use crate::output::{Artifacts, Status, Verdict};
use dampwave_core::sim::WaveModel;
use dampwave_core::spectral::{Field, PhaseState};

pub use selftest::{selftest_checks, SelfCheck};

pub struct Outcome {
    pub verdict: Verdict,
    pub artifacts: Artifacts,
}

/// Runs `cmd` on a resolved configuration. Undersampled estimates become an
/// `inconclusive` verdict rather than an error.
pub fn execute(cmd: Command, cfg: &RunConfig) -> LabResult<Outcome> {
    let mut v = Verdict::new(cmd);
    let mut a = Artifacts::new();
    let r = match cmd {
        Command::Simulate => sim::simulate(cfg, &mut v, &mut a),
        Command::EnergyAudit => sim::energy_audit(cfg, &mut v, &mut a),
        Command::CoupleFp => coupling::couple_fp(cfg, &mut v, &mut a),
        Command::GirsanovTv => coupling::girsanov_tv(cfg, &mut v, &mut a),
        Command::Mix => coupling::mix(cfg, &mut v, &mut a),
        Command::Occupation => ergodic::occupation(cfg, &mut v, &mut a),
        Command::Pressure => ergodic::pressure(cfg, &mut v, &mut a),
        Command::Ldp1 => ergodic::ldp1(cfg, &mut v, &mut a),
        Command::Quasipotential => fw::quasipotential(cfg, &mut v, &mut a),
        Command::FwGraph => fw::fw_graph(cfg, &mut v, &mut a),
        Command::StationarySmallnoise => fw::stationary_smallnoise(cfg, &mut v, &mut a),
        Command::BoundaryChain => fw::boundary_chain(cfg, &mut v, &mut a),
        Command::Selftest => selftest::selftest(cfg, &mut v, &mut a),
    };
    match r {
        Ok(()) => {}
        Err(LabError::Core(dampwave_core::Error::Undersampled(msg))) => {
            v.status(Status::Inconclusive).note(format!("undersampled: {msg}"));
        }
        Err(e) => return Err(e),
    }
    Ok(Outcome { verdict: v, artifacts: a })
}

/// At rest with `q_j = amp / j^2`.
pub(crate) fn init_state(model: &WaveModel, amp: f64) -> PhaseState {
    let m = model.modes();
    PhaseState::at_rest(Field::from_coeffs((1..=m).map(|j| amp / (j * j) as f64).collect()))
}
