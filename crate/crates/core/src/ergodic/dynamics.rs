use crate::error::Result;
use crate::rng::StreamRng;
use crate::sim::{SimConfig, Stepper, WaveModel, Workspace};
use crate::spectral::PhaseState;

/// A time-homogeneous Markov simulator with a fixed step.
pub trait Dynamics: Sync {
    type State: Clone + Send + Sync;

    fn dt(&self) -> f64;

    fn step(&self, x: &mut Self::State, rng: &mut StreamRng) -> Result<()>;

    /// Advance one step and return `int V` over it. The default is the
    /// trapezoid rule on the step endpoints.
    fn step_integrate(
        &self,
        x: &mut Self::State,
        rng: &mut StreamRng,
        v: &(dyn Fn(&Self::State) -> f64 + Sync),
    ) -> Result<f64> {
        let a = v(x);
        self.step(x, rng)?;
        Ok(0.5 * self.dt() * (a + v(x)))
    }
}

/// Wave-equation state with its own scratch buffers.
#[derive(Debug, Clone)]
pub struct WaveState {
    pub y: PhaseState,
    ws: Workspace,
}

/// Adapter running the Galerkin wave flow through [`Dynamics`].
#[derive(Debug, Clone)]
pub struct WaveDynamics {
    pub model: WaveModel,
    stepper: Stepper,
}

impl WaveDynamics {
    pub fn new(model: WaveModel, cfg: &SimConfig) -> Result<Self> {
        let stepper = cfg.stepper(&model)?;
        Ok(WaveDynamics { model, stepper })
    }

    pub fn state(&self, y: PhaseState) -> WaveState {
        WaveState { y, ws: self.stepper.workspace(&self.model) }
    }
}

impl Dynamics for WaveDynamics {
    type State = WaveState;

    fn dt(&self) -> f64 {
        self.stepper.dt()
    }

    fn step(&self, x: &mut WaveState, rng: &mut StreamRng) -> Result<()> {
        self.stepper.step(&self.model, &mut x.ws, &mut x.y, rng, 0)
    }
}
