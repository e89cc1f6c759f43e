//! Two-phase equilibrium-propagation estimators and the rescaled
//! temporal-derivative process of the nudged phase.
//!
//! The free phase relaxes to `s⁰`. The nudged phase then starts at `s⁰` with
//! the cost switched on at strength `β`. The gradient estimate is the
//! contrastive quantity
//!
//! ```text
//! (1/β) · ( ∂(E + βC)/∂θ (s_k) − ∂E/∂θ (s⁰) )
//! ```
//!
//! evaluated at the nudged fixed point (full estimator) or after `K` Euler
//! steps (truncated estimator). Along the way the rescaled velocity
//! `(1/β) · ∂(E + βC)/∂s (s_k)` tracks the error derivatives of recurrent
//! backpropagation.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, FixedPoint, RelaxationConfig};
use crate::error::{Error, Result};
use crate::linalg::FlatVector;
use crate::model::{self, Activation, Params, State};

/// Which algorithm produced a gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rbp,
    Eqprop,
    EqpropTruncated,
    FdOracle,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rbp => "rbp",
            Method::Eqprop => "eqprop",
            Method::EqpropTruncated => "eqprop-truncated",
            Method::FdOracle => "fd-oracle",
        })
    }
}

/// A parameter gradient together with how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub grad: Params,
    pub method: Method,
    pub beta: Option<f64>,
    /// Process time of the second phase, when the method has one.
    pub horizon_t: Option<f64>,
    /// Euler step used by the relaxations.
    pub step: f64,
}

/// Rescaled temporal derivatives recorded along a nudged trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalProcessRecord {
    pub times: Vec<f64>,
    pub s_tilde: Vec<State>,
    pub theta_tilde: Vec<Params>,
    pub beta: f64,
}

impl TemporalProcessRecord {
    /// Writes `t,kind,layer_or_block,index,value`; weight entries are
    /// indexed in row-major order within their block.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,kind,layer_or_block,index,value")?;
        for ((t, s), th) in self.times.iter().zip(&self.s_tilde).zip(&self.theta_tilde) {
            for (k, layer) in s.layers.iter().enumerate() {
                for (i, v) in layer.iter().enumerate() {
                    writeln!(out, "{t:?},s_tilde,{k},{i},{v:?}")?;
                }
            }
            for (k, w) in th.weights.iter().enumerate() {
                for (i, v) in w.as_slice().iter().enumerate() {
                    writeln!(out, "{t:?},theta_tilde,{k},{i},{v:?}")?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn check_positive_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "nudging requires a positive influence parameter, got {beta}"
        )));
    }
    Ok(())
}

/// Tolerance for a free phase that a nudged phase at `β` will follow:
/// at most `β · 1e-3`, since residuals get divided by `β`.
pub fn nudged_tolerance(cfg: &RelaxationConfig, beta: f64) -> RelaxationConfig {
    cfg.with_tolerance(cfg.tolerance.min(beta * 1e-3))
}

fn require_tight_fixed_point(fp: &FixedPoint, beta: f64) -> Result<()> {
    if fp.residual() > beta * 1e-3 {
        return Err(Error::Precondition(format!(
            "free fixed point residual {:e} exceeds beta * 1e-3 = {:e}",
            fp.residual(),
            beta * 1e-3
        )));
    }
    Ok(())
}

/// `(1/β) · (∂E^β/∂θ(s) − ∂E/∂θ(s⁰))`, the contrastive two-point quantity.
pub fn two_point(
    params: &Params,
    x: &[f64],
    y: &[f64],
    beta: f64,
    act: Activation,
    free: &State,
    nudged: &State,
) -> Result<Params> {
    let mut g = model::grad_theta_energy(params, x, nudged, act)?;
    g.axpy(beta, &model::grad_theta_cost(params, y, nudged)?);
    g.axpy(-1.0, &model::grad_theta_energy(params, x, free, act)?);
    g.scale(1.0 / beta);
    Ok(g)
}

/// Full two-phase estimator starting from an already relaxed free fixed point.
pub fn eqprop_gradient_at(
    params: &Params,
    x: &[f64],
    y: &[f64],
    beta: f64,
    act: Activation,
    cfg: &RelaxationConfig,
    fp: &FixedPoint,
) -> Result<GradientEstimate> {
    check_positive_beta(beta)?;
    require_tight_fixed_point(fp, beta)?;
    let cfg = nudged_tolerance(cfg, beta);
    let (s_beta, traj) = dynamics::relax_nudged(params, x, y, beta, fp.state(), act, &cfg)?;
    if !traj.converged {
        return Err(Error::NotConverged {
            phase: "nudged",
            steps: traj.steps_taken,
            residual: traj.final_residual,
        });
    }
    Ok(GradientEstimate {
        grad: two_point(params, x, y, beta, act, fp.state(), &s_beta)?,
        method: Method::Eqprop,
        beta: Some(beta),
        horizon_t: Some(traj.steps_taken as f64 * cfg.step_size),
        step: cfg.step_size,
    })
}

/// Free phase from the zero state, tightened for a nudged phase at `β`.
pub fn nudging_fixed_point(
    params: &Params,
    x: &[f64],
    beta: f64,
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<FixedPoint> {
    check_positive_beta(beta)?;
    let shape = params.shape()?;
    let cfg = nudged_tolerance(cfg, beta);
    Ok(dynamics::free_fixed_point(params, x, &State::zeros(&shape), act, &cfg)?.0)
}

/// Equilibrium-propagation gradient: free phase from zero, nudged phase to
/// convergence, then the two-point formula.
pub fn eqprop_gradient(
    params: &Params,
    x: &[f64],
    y: &[f64],
    beta: f64,
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<GradientEstimate> {
    let fp = nudging_fixed_point(params, x, beta, act, cfg)?;
    eqprop_gradient_at(params, x, y, beta, act, cfg, &fp)
}

/// As [`eqprop_gradient`] but the nudged phase runs exactly `steps` Euler steps.
#[allow(clippy::too_many_arguments)]
pub fn truncated_eqprop_gradient_at(
    params: &Params,
    x: &[f64],
    y: &[f64],
    beta: f64,
    steps: usize,
    act: Activation,
    cfg: &RelaxationConfig,
    fp: &FixedPoint,
) -> Result<GradientEstimate> {
    check_positive_beta(beta)?;
    require_tight_fixed_point(fp, beta)?;
    let s_k = dynamics::nudged_flow(params, x, y, beta, fp.state(), act, cfg.step_size, steps)?;
    Ok(GradientEstimate {
        grad: two_point(params, x, y, beta, act, fp.state(), &s_k)?,
        method: Method::EqpropTruncated,
        beta: Some(beta),
        horizon_t: Some(steps as f64 * cfg.step_size),
        step: cfg.step_size,
    })
}

pub fn truncated_eqprop_gradient(
    params: &Params,
    x: &[f64],
    y: &[f64],
    beta: f64,
    steps: usize,
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<GradientEstimate> {
    let fp = nudging_fixed_point(params, x, beta, act, cfg)?;
    truncated_eqprop_gradient_at(params, x, y, beta, steps, act, cfg, &fp)
}

/// Records `S̃_k` and `Θ̃_k` for `k = 0..=steps` along the nudged trajectory from `fp`.
#[allow(clippy::too_many_arguments)]
pub fn temporal_derivative_process_at(
    params: &Params,
    x: &[f64],
    y: &[f64],
    beta: f64,
    steps: usize,
    act: Activation,
    cfg: &RelaxationConfig,
    fp: &FixedPoint,
) -> Result<TemporalProcessRecord> {
    check_positive_beta(beta)?;
    require_tight_fixed_point(fp, beta)?;
    let eps = cfg.step_size;
    let mut rec = TemporalProcessRecord {
        times: Vec::with_capacity(steps + 1),
        s_tilde: Vec::with_capacity(steps + 1),
        theta_tilde: Vec::with_capacity(steps + 1),
        beta,
    };
    let mut s = fp.state().clone();
    for k in 0..=steps {
        // −(1/β) ds/dt under the Euler recursion is exactly this gradient
        let g = model::grad_s_augmented(params, x, y, &s, beta, act)?;
        rec.times.push(k as f64 * eps);
        rec.s_tilde.push(g.scaled(1.0 / beta));
        rec.theta_tilde
            .push(two_point(params, x, y, beta, act, fp.state(), &s)?);
        if k < steps {
            s.axpy(-eps, &g);
            if !s.is_finite() {
                return Err(Error::Divergence {
                    phase: "nudged",
                    step: k + 1,
                });
            }
        }
    }
    Ok(rec)
}

pub fn temporal_derivative_process(
    params: &Params,
    x: &[f64],
    y: &[f64],
    beta: f64,
    steps: usize,
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<TemporalProcessRecord> {
    let fp = nudging_fixed_point(params, x, beta, act, cfg)?;
    temporal_derivative_process_at(params, x, y, beta, steps, act, cfg, &fp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Instance, NetworkShape};

    fn seeded() -> Instance {
        Instance::seeded(&NetworkShape::new(2, vec![2, 2, 1]).unwrap(), Activation::Logistic, 42)
    }

    fn cfg() -> RelaxationConfig {
        RelaxationConfig {
            tolerance: 1e-13,
            ..Default::default()
        }
    }

    #[test]
    fn rejects_nonpositive_beta() {
        let inst = seeded();
        let (p, x, y) = (&inst.params, &inst.sample.x, &inst.sample.y);
        for beta in [0.0, -1e-3, f64::NAN] {
            assert!(matches!(
                eqprop_gradient(p, x, y, beta, inst.activation, &cfg()),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn perfect_prediction_gives_zero_gradient() {
        let inst = seeded();
        let (p, x) = (&inst.params, &inst.sample.x);
        let fp = nudging_fixed_point(p, x, 1e-3, inst.activation, &cfg()).unwrap();
        let y = fp.state().output().to_vec();
        let g = eqprop_gradient(p, x, &y, 1e-3, inst.activation, &cfg()).unwrap();
        assert_eq!(g.grad.norm_inf(), 0.0);
        assert_eq!(g.method, Method::Eqprop);
    }

    #[test]
    fn zero_weights_estimator_is_the_two_point_formula() {
        let shape = NetworkShape::new(2, vec![1, 2]).unwrap();
        let p = Params::zeros(&shape);
        let (x, y) = ([0.5, -0.5], [0.0]);
        let beta = 1e-3;
        let est = eqprop_gradient(&p, &x, &y, beta, Activation::Logistic, &cfg()).unwrap();
        let fp = nudging_fixed_point(&p, &x, beta, Activation::Logistic, &cfg()).unwrap();
        assert_eq!(fp.state().norm_inf(), 0.0);
        let (s_beta, _) = dynamics::relax_nudged(&p, &x, &y, beta, fp.state(), Activation::Logistic, &nudged_tolerance(&cfg(), beta))
            .unwrap();
        let direct = two_point(&p, &x, &y, beta, Activation::Logistic, fp.state(), &s_beta).unwrap();
        assert!(est.grad.bit_eq(&direct));
    }

    #[test]
    fn truncated_limits() {
        let inst = seeded();
        let (p, x, y, act) = (&inst.params, &inst.sample.x, &inst.sample.y, inst.activation);
        let beta = 1e-3;
        let zero = truncated_eqprop_gradient(p, x, y, beta, 0, act, &cfg()).unwrap();
        assert_eq!(zero.grad.norm_inf(), 0.0);
        assert_eq!(zero.horizon_t, Some(0.0));

        let full = eqprop_gradient(p, x, y, beta, act, &cfg()).unwrap();
        let steps = (full.horizon_t.unwrap() / cfg().step_size).round() as usize;
        let same = truncated_eqprop_gradient(p, x, y, beta, steps, act, &cfg()).unwrap();
        assert!(same.grad.bit_eq(&full.grad));
        let long = truncated_eqprop_gradient(p, x, y, beta, steps + 2000, act, &cfg()).unwrap();
        assert!(long.grad.minus(&full.grad).norm_inf() <= 1e-9);
    }

    #[test]
    fn temporal_process_endpoint_and_origin() {
        let inst = seeded();
        let (p, x, y, act) = (&inst.params, &inst.sample.x, &inst.sample.y, inst.activation);
        let beta = 1e-4;
        let steps = 50;
        let fp = nudging_fixed_point(p, x, beta, act, &cfg()).unwrap();
        let rec = temporal_derivative_process_at(p, x, y, beta, steps, act, &cfg(), &fp).unwrap();
        assert_eq!(rec.s_tilde.len(), steps + 1);
        assert_eq!(rec.theta_tilde[0].norm_inf(), 0.0);
        let dc = model::grad_s_cost(y, fp.state()).unwrap();
        let gap = rec.s_tilde[0].minus(&dc).norm_inf();
        assert!(gap <= fp.residual() / beta + 1e-12);
        let trunc = truncated_eqprop_gradient_at(p, x, y, beta, steps, act, &cfg(), &fp).unwrap();
        assert!(rec.theta_tilde[steps].bit_eq(&trunc.grad));
    }

    #[test]
    fn temporal_process_vanishes_at_perfect_prediction() {
        let inst = seeded();
        let (p, x, act) = (&inst.params, &inst.sample.x, inst.activation);
        let beta = 1e-4;
        let fp = nudging_fixed_point(p, x, beta, act, &cfg()).unwrap();
        let y = fp.state().output().to_vec();
        let rec = temporal_derivative_process_at(p, x, &y, beta, 20, act, &cfg(), &fp).unwrap();
        // only the free-phase residual moves the state, and it is divided by β
        let drift = fp.residual() / beta;
        assert!(rec.s_tilde[0].norm_inf() <= drift);
        for (s, th) in rec.s_tilde.iter().zip(&rec.theta_tilde) {
            assert!(s.norm_inf() <= 2.0 * drift);
            assert!(th.norm_inf() <= 10.0 * drift, "{:e}", th.norm_inf());
        }
    }

    #[test]
    fn loose_fixed_point_is_rejected() {
        let inst = seeded();
        let (p, x, y, act) = (&inst.params, &inst.sample.x, &inst.sample.y, inst.activation);
        let loose = RelaxationConfig {
            tolerance: 1e-4,
            ..Default::default()
        };
        let (fp, _) = dynamics::free_fixed_point(p, x, &State::zeros(&inst.shape), act, &loose).unwrap();
        if fp.residual() > 1e-7 {
            assert!(matches!(
                eqprop_gradient_at(p, x, y, 1e-4, act, &loose, &fp),
                Err(Error::Precondition(_))
            ));
        }
    }

    #[test]
    fn csv_export_has_both_kinds() {
        let inst = seeded();
        let rec = temporal_derivative_process(&inst.params, &inst.sample.x, &inst.sample.y, 1e-3, 2, inst.activation, &cfg())
            .unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,kind,layer_or_block,index,value\n"));
        let rows = 3 * (inst.shape.num_units() + inst.shape.num_params());
        assert_eq!(text.lines().count(), rows + 1);
        assert!(text.contains(",theta_tilde,2,"));
    }
}
