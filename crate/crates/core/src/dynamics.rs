//! Explicit-Euler relaxation of the free and nudged gradient dynamics.
//!
//! Both phases use the same recursion `s ← s − ε · g(s)` where `g` is either
//! `∂E/∂s` (free) or `∂(E + βC)/∂s` (nudged). Early-stopping relaxations and
//! fixed-length flows share one update routine, so a relaxation that stops
//! after `n` steps and a flow of exactly `n` steps land on bitwise-identical
//! states.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::FlatVector;
use crate::model::{self, Activation, Params, State};

/// Euler step, stopping rule and recording cadence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaxationConfig {
    pub step_size: f64,
    pub max_steps: usize,
    /// Threshold on the infinity norm of the driving gradient.
    pub tolerance: f64,
    /// Record every n-th state; 0 records only the endpoints.
    pub record_every: usize,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            max_steps: 100_000,
            tolerance: 1e-8,
            record_every: 0,
        }
    }
}

impl RelaxationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_tolerance(&self, tolerance: f64) -> Self {
        Self {
            tolerance,
            ..self.clone()
        }
    }
}

/// Sampled flow of a relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub converged: bool,
    pub steps_taken: usize,
    pub final_residual: f64,
}

impl Trajectory {
    /// Writes `t,layer,index,value`, one row per recorded component.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,layer,index,value")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            for (k, layer) in s.layers.iter().enumerate() {
                for (i, v) in layer.iter().enumerate() {
                    writeln!(out, "{t:?},{k},{i},{v:?}")?;
                }
            }
        }
        Ok(())
    }
}

/// What drives the state: the energy alone, or the energy plus `β` times the cost.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Drive<'a> {
    Free,
    Nudged { y: &'a [f64], beta: f64 },
}

impl Drive<'_> {
    fn phase(&self) -> &'static str {
        match self {
            Drive::Free => "free",
            Drive::Nudged { .. } => "nudged",
        }
    }

    /// The gradient for any sign of `β`; callers validate `β` where it matters.
    pub(crate) fn gradient(
        &self,
        params: &Params,
        x: &[f64],
        s: &State,
        act: Activation,
    ) -> Result<State> {
        let mut g = model::grad_s_energy(params, x, s, act)?;
        if let Drive::Nudged { y, beta } = *self {
            g.axpy(beta, &model::grad_s_cost(y, s)?);
        }
        Ok(g)
    }
}

fn euler_update(s: &mut State, g: &State, step: f64) {
    s.axpy(-step, g);
}

pub(crate) fn relax(
    params: &Params,
    x: &[f64],
    drive: Drive<'_>,
    s_init: &State,
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<(State, Trajectory)> {
    cfg.validate()?;
    let mut s = s_init.clone();
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        converged: false,
        steps_taken: 0,
        final_residual: f64::NAN,
    };
    let mut step = 0;
    loop {
        let g = drive.gradient(params, x, &s, act)?;
        if !g.is_finite() {
            return Err(Error::Divergence {
                phase: drive.phase(),
                step,
            });
        }
        let residual = g.norm_inf();
        let done = residual <= cfg.tolerance || step == cfg.max_steps;
        let due = cfg.record_every > 0 && step % cfg.record_every == 0;
        if step == 0 || due || done {
            traj.times.push(step as f64 * cfg.step_size);
            traj.states.push(s.clone());
        }
        if done {
            traj.converged = residual <= cfg.tolerance;
            traj.steps_taken = step;
            traj.final_residual = residual;
            return Ok((s, traj));
        }
        euler_update(&mut s, &g, cfg.step_size);
        step += 1;
        if !s.is_finite() {
            return Err(Error::Divergence {
                phase: drive.phase(),
                step,
            });
        }
    }
}

pub(crate) fn flow(
    params: &Params,
    x: &[f64],
    drive: Drive<'_>,
    s_init: &State,
    act: Activation,
    step_size: f64,
    steps: usize,
) -> Result<State> {
    let mut s = s_init.clone();
    for step in 0..steps {
        let g = drive.gradient(params, x, &s, act)?;
        euler_update(&mut s, &g, step_size);
        if !s.is_finite() {
            return Err(Error::Divergence {
                phase: drive.phase(),
                step: step + 1,
            });
        }
    }
    Ok(s)
}

/// Relaxes `ds/dt = −∂E/∂s` from `s_init`.
///
/// Non-convergence is not an error: the trajectory is returned with
/// `converged = false` and the caller decides.
pub fn relax_free(
    params: &Params,
    x: &[f64],
    s_init: &State,
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<(State, Trajectory)> {
    relax(params, x, Drive::Free, s_init, act, cfg)
}

/// Relaxes `ds/dt = −∂(E + βC)/∂s` from `s_init`. Requires `β ≥ 0`.
#[allow(clippy::too_many_arguments)]
pub fn relax_nudged(
    params: &Params,
    x: &[f64],
    y: &[f64],
    beta: f64,
    s_init: &State,
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<(State, Trajectory)> {
    model::check_beta(beta)?;
    relax(params, x, Drive::Nudged { y, beta }, s_init, act, cfg)
}

/// Exactly `steps` Euler steps of the free dynamics, no early stop.
pub fn free_flow(
    params: &Params,
    x: &[f64],
    s_init: &State,
    act: Activation,
    step_size: f64,
    steps: usize,
) -> Result<State> {
    flow(params, x, Drive::Free, s_init, act, step_size, steps)
}

/// Exactly `steps` Euler steps of the nudged dynamics, no early stop.
#[allow(clippy::too_many_arguments)]
pub fn nudged_flow(
    params: &Params,
    x: &[f64],
    y: &[f64],
    beta: f64,
    s_init: &State,
    act: Activation,
    step_size: f64,
    steps: usize,
) -> Result<State> {
    model::check_beta(beta)?;
    flow(params, x, Drive::Nudged { y, beta }, s_init, act, step_size, steps)
}

/// A state certified to satisfy `‖∂E/∂s‖∞ ≤ tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    state: State,
    residual: f64,
}

impl FixedPoint {
    /// Checks the free fixed-point condition at `state`.
    pub fn certify(
        params: &Params,
        x: &[f64],
        state: State,
        act: Activation,
        tolerance: f64,
    ) -> Result<Self> {
        let residual = model::grad_s_energy(params, x, &state, act)?.norm_inf();
        if !(residual <= tolerance) {
            return Err(Error::Precondition(format!(
                "state is not a free fixed point: residual {residual:e} exceeds {tolerance:e}"
            )));
        }
        Ok(Self { state, residual })
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn into_state(self) -> State {
        self.state
    }
}

/// Free phase from `s_init`; fails with [`Error::NotConverged`] if the
/// tolerance is not reached.
pub fn free_fixed_point(
    params: &Params,
    x: &[f64],
    s_init: &State,
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<(FixedPoint, Trajectory)> {
    let (s, traj) = relax_free(params, x, s_init, act, cfg)?;
    if !traj.converged {
        return Err(Error::NotConverged {
            phase: "free",
            steps: traj.steps_taken,
            residual: traj.final_residual,
        });
    }
    let fp = FixedPoint {
        state: s,
        residual: traj.final_residual,
    };
    Ok((fp, traj))
}
