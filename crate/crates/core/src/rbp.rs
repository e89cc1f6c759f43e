//! Recurrent backpropagation as a continuous-time error-derivative process.
//!
//! At a free fixed point `s⁰` the pair `(S̄_t, Θ̄_t)` starts at
//! `(∂C/∂s, ∂C/∂θ)` and evolves as
//!
//! ```text
//! dS̄/dt = −H · S̄        H = ∂²E/∂s²  (frozen at s⁰)
//! dΘ̄/dt = −M · S̄        M = ∂²E/∂θ∂s (frozen at s⁰)
//! ```
//!
//! `S̄_t → 0` because `H` is positive definite at a minimum, and `Θ̄_t`
//! converges to the gradient of the objective `J(θ) = C(s⁰)`. Both equations
//! are advanced with explicit Euler from the time-`t` values, on the same grid
//! as the nudged phase of equilibrium propagation.

use std::io::Write;

use crate::dynamics::{self, FixedPoint, RelaxationConfig};
use crate::eqprop::{GradientEstimate, Method};
use crate::error::{Error, Result};
use crate::linalg::FlatVector;
use crate::model::{self, Activation, Params, State};

/// Consecutive norm increases tolerated before the process is declared unstable.
pub const INSTABILITY_STREAK: usize = 100;

/// `(S̄_t, Θ̄_t)` at step `step`, time `t = step · ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProcessState {
    pub s_bar: State,
    pub theta_bar: Params,
    pub step: usize,
    pub t: f64,
}

pub fn rbp_init(params: &Params, y: &[f64], fp: &FixedPoint) -> Result<ErrorProcessState> {
    let s = fp.state();
    Ok(ErrorProcessState {
        s_bar: model::grad_s_cost(y, s)?,
        theta_bar: model::grad_theta_cost(params, y, s)?,
        step: 0,
        t: 0.0,
    })
}

/// One Euler step of the error-derivative process.
pub fn rbp_step(
    p: &ErrorProcessState,
    params: &Params,
    x: &[f64],
    fp: &FixedPoint,
    act: Activation,
    step_size: f64,
) -> Result<ErrorProcessState> {
    let s_star = fp.state();
    let h_sbar = model::hvp_ss(params, x, s_star, &p.s_bar, act)?;
    let m_sbar = model::hvp_theta_s(params, x, s_star, &p.s_bar, act)?;
    let mut next = p.clone();
    next.s_bar.axpy(-step_size, &h_sbar);
    next.theta_bar.axpy(-step_size, &m_sbar);
    next.step += 1;
    next.t = next.step as f64 * step_size;
    if !(next.s_bar.is_finite() && next.theta_bar.is_finite()) {
        return Err(Error::Divergence {
            phase: "error process",
            step: next.step,
        });
    }
    Ok(next)
}

/// The process for `k = 0..=steps`.
pub fn rbp_process(
    params: &Params,
    x: &[f64],
    y: &[f64],
    fp: &FixedPoint,
    act: Activation,
    step_size: f64,
    steps: usize,
) -> Result<Vec<ErrorProcessState>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(rbp_init(params, y, fp)?);
    for _ in 0..steps {
        let next = rbp_step(out.last().expect("non-empty"), params, x, fp, act, step_size)?;
        out.push(next);
    }
    Ok(out)
}

/// Runs the process from `fp` until `‖S̄‖∞ ≤ tolerance`.
pub fn rbp_gradient_at(
    params: &Params,
    x: &[f64],
    y: &[f64],
    act: Activation,
    cfg: &RelaxationConfig,
    fp: &FixedPoint,
) -> Result<GradientEstimate> {
    cfg.validate()?;
    let mut p = rbp_init(params, y, fp)?;
    let mut norm = p.s_bar.norm_inf();
    let mut streak = 0;
    while norm > cfg.tolerance {
        if p.step >= cfg.max_steps {
            return Err(Error::NotConverged {
                phase: "error process",
                steps: p.step,
                residual: norm,
            });
        }
        p = rbp_step(&p, params, x, fp, act, cfg.step_size)?;
        let next = p.s_bar.norm_inf();
        streak = if next > norm { streak + 1 } else { 0 };
        if streak >= INSTABILITY_STREAK {
            return Err(Error::Instability {
                step: p.step,
                streak,
            });
        }
        norm = next;
    }
    Ok(GradientEstimate {
        grad: p.theta_bar,
        method: Method::Rbp,
        beta: None,
        horizon_t: Some(p.t),
        step: cfg.step_size,
    })
}

/// Recurrent-backpropagation gradient: free phase from the zero state, then
/// the error process until `S̄` has decayed below the tolerance.
pub fn rbp_gradient(
    params: &Params,
    x: &[f64],
    y: &[f64],
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<GradientEstimate> {
    let shape = params.shape()?;
    let (fp, _) = dynamics::free_fixed_point(params, x, &State::zeros(&shape), act, cfg)?;
    rbp_gradient_at(params, x, y, act, cfg, &fp)
}

/// Writes `t,norm_sbar,norm_thetabar_delta`, the last column being
/// `‖Θ̄_k − Θ̄_{k−1}‖∞` (zero at `k = 0`).
pub fn write_decay_csv<W: Write>(process: &[ErrorProcessState], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,norm_sbar,norm_thetabar_delta")?;
    let mut prev: Option<&Params> = None;
    for p in process {
        let delta = prev.map_or(0.0, |q| p.theta_bar.minus(q).norm_inf());
        writeln!(out, "{:?},{:?},{:?}", p.t, p.s_bar.norm_inf(), delta)?;
        prev = Some(&p.theta_bar);
    }
    Ok(())
}
