//! Finite-difference and definitional oracles.
//!
//! Everything here is computed from the energy, the cost and the Euler flow
//! alone, never from the analytic second derivatives or the two gradient
//! algorithms, so it can be used to check them.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, Drive, RelaxationConfig};
use crate::eqprop::{GradientEstimate, Method};
use crate::error::{Error, Result};
use crate::linalg::FlatVector;
use crate::model::{self, Activation, Params, State};
use crate::parallel;

/// Distance from `s⁰` beyond which a perturbed relaxation counts as a basin jump.
pub const BASIN_JUMP_DISTANCE: f64 = 0.5;

/// Tolerance used for warm-started perturbed relaxations.
pub const WARM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdScheme {
    #[default]
    Central,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdConfig {
    pub delta: f64,
    pub scheme: FdScheme,
    /// Start perturbed relaxations from `s⁰` (with a tightened tolerance).
    pub warm_start: bool,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self::for_params()
    }
}

impl FdConfig {
    /// Default for weight perturbations.
    pub fn for_params() -> Self {
        Self {
            delta: 1e-4,
            scheme: FdScheme::Central,
            warm_start: true,
        }
    }

    /// Default for state perturbations.
    pub fn for_state() -> Self {
        Self {
            delta: 1e-5,
            ..Self::for_params()
        }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self {
            delta,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "finite-difference delta must be positive, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Number of Euler steps spanning `t`; `t` must be a non-negative multiple of `ε`.
pub fn steps_for_horizon(t: f64, step_size: f64) -> Result<usize> {
    let n = (t / step_size).round();
    if !(t >= 0.0) || (n * step_size - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon {t} is not a non-negative multiple of the step {step_size}"
        )));
    }
    Ok(n as usize)
}

/// Cost after flowing freely from `s_init` for exactly `t` (no early stop).
#[allow(clippy::too_many_arguments)]
pub fn projected_cost(
    params: &Params,
    x: &[f64],
    y: &[f64],
    s_init: &State,
    t: f64,
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<f64> {
    let steps = steps_for_horizon(t, cfg.step_size)?;
    let s = dynamics::free_flow(params, x, s_init, act, cfg.step_size, steps)?;
    model::cost(y, &s)
}

fn entry_label(params: &Params, flat: usize) -> String {
    let mut rest = flat;
    for (k, w) in params.weights.iter().enumerate() {
        let n = w.rows() * w.cols();
        if rest < n {
            return format!("W{k}[{},{}]", rest / w.cols(), rest % w.cols());
        }
        rest -= n;
    }
    format!("entry {flat}")
}

/// Central finite difference of the objective `J(θ) = C(s⁰(θ))` over every weight.
pub fn fd_objective_gradient(
    params: &Params,
    x: &[f64],
    y: &[f64],
    act: Activation,
    cfg: &RelaxationConfig,
    fd: &FdConfig,
) -> Result<GradientEstimate> {
    fd.validate()?;
    let shape = params.shape()?;
    let zero = State::zeros(&shape);
    let (fp, _) = dynamics::free_fixed_point(params, x, &zero, act, cfg)?;
    let s0 = fp.state();
    let (start, pcfg) = if fd.warm_start {
        (s0, cfg.with_tolerance(cfg.tolerance.min(WARM_TOLERANCE)))
    } else {
        (&zero, cfg.clone())
    };
    let base = params.to_flat();

    let objective = |flat: usize, value: f64| -> Result<f64> {
        let mut p = params.clone();
        let mut theta = base.clone();
        theta[flat] = value;
        p.assign_flat(&theta);
        let (fp, _) = dynamics::free_fixed_point(&p, x, start, act, &pcfg)?;
        let distance = fp.state().minus(s0).norm_inf();
        if distance > BASIN_JUMP_DISTANCE {
            return Err(Error::BasinJump {
                entry: entry_label(params, flat),
                distance,
            });
        }
        model::cost(y, fp.state())
    };

    let h = fd.delta;
    let entries = parallel::map_indexed(base.len(), parallel::configured_threads(), |i| {
        let plus = objective(i, base[i] + h)?;
        let minus = objective(i, base[i] - h)?;
        Ok((plus - minus) / (2.0 * h))
    });
    let flat = entries.into_iter().collect::<Result<Vec<f64>>>()?;
    let mut grad = params.zeros_like();
    grad.assign_flat(&flat);
    Ok(GradientEstimate {
        grad,
        method: Method::FdOracle,
        beta: None,
        horizon_t: None,
        step: cfg.step_size,
    })
}

fn direction_step(v: &State, fd: &FdConfig) -> Option<f64> {
    let n = v.norm_inf();
    (n > 0.0).then(|| fd.delta / n)
}

/// Central difference of `∂E/∂s` along `v`, with step `δ / ‖v‖∞`.
pub fn fd_hvp_ss(
    params: &Params,
    x: &[f64],
    s: &State,
    v: &State,
    act: Activation,
    fd: &FdConfig,
) -> Result<State> {
    fd.validate()?;
    let Some(h) = direction_step(v, fd) else {
        return Ok(v.scaled(0.0));
    };
    let mut sp = s.clone();
    sp.axpy(h, v);
    let mut sm = s.clone();
    sm.axpy(-h, v);
    let mut d = model::grad_s_energy(params, x, &sp, act)?;
    d.axpy(-1.0, &model::grad_s_energy(params, x, &sm, act)?);
    d.scale(1.0 / (2.0 * h));
    Ok(d)
}

/// Central difference of `∂E/∂θ` along `v`, with step `δ / ‖v‖∞`.
pub fn fd_hvp_theta_s(
    params: &Params,
    x: &[f64],
    s: &State,
    v: &State,
    act: Activation,
    fd: &FdConfig,
) -> Result<Params> {
    fd.validate()?;
    let Some(h) = direction_step(v, fd) else {
        return Ok(params.zeros_like());
    };
    let mut sp = s.clone();
    sp.axpy(h, v);
    let mut sm = s.clone();
    sm.axpy(-h, v);
    let mut d = model::grad_theta_energy(params, x, &sp, act)?;
    d.axpy(-1.0, &model::grad_theta_energy(params, x, &sm, act)?);
    d.scale(1.0 / (2.0 * h));
    Ok(d)
}

/// Central difference of the energy over every state component.
pub fn fd_grad_s_energy(
    params: &Params,
    x: &[f64],
    s: &State,
    act: Activation,
    delta: f64,
) -> Result<State> {
    let base = s.to_flat();
    let mut out = s.clone();
    let mut flat = Vec::with_capacity(base.len());
    let mut probe = s.clone();
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + delta;
        probe.assign_flat(&p);
        let ep = model::energy(params, x, &probe, act)?;
        p[i] = base[i] - delta;
        probe.assign_flat(&p);
        let em = model::energy(params, x, &probe, act)?;
        flat.push((ep - em) / (2.0 * delta));
    }
    out.assign_flat(&flat);
    Ok(out)
}

/// Central difference of the energy over every weight entry.
pub fn fd_grad_theta_energy(
    params: &Params,
    x: &[f64],
    s: &State,
    act: Activation,
    delta: f64,
) -> Result<Params> {
    let base = params.to_flat();
    let mut probe = params.clone();
    let mut flat = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + delta;
        probe.assign_flat(&p);
        let ep = model::energy(&probe, x, s, act)?;
        p[i] = base[i] - delta;
        probe.assign_flat(&p);
        let em = model::energy(&probe, x, s, act)?;
        flat.push((ep - em) / (2.0 * delta));
    }
    let mut out = params.zeros_like();
    out.assign_flat(&flat);
    Ok(out)
}

/// Outcome of the backward-equation check `∂L/∂t + ⟨∂L/∂s, ∂E/∂s⟩ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BackwardIdentityCheck {
    pub residual: f64,
    pub dl_dt: f64,
    pub transport: f64,
}

/// Evaluates the backward identity numerically at `(s, t)`.
///
/// `∂L/∂t` is a central difference over one Euler step (forward at `t = 0`),
/// `∂L/∂s` a central difference of the projected cost over each component.
#[allow(clippy::too_many_arguments)]
pub fn check_backward_identity(
    params: &Params,
    x: &[f64],
    y: &[f64],
    s: &State,
    t: f64,
    act: Activation,
    cfg: &RelaxationConfig,
    fd: &FdConfig,
) -> Result<BackwardIdentityCheck> {
    fd.validate()?;
    let eps = cfg.step_size;
    let n = steps_for_horizon(t, eps)?;
    let at = |state: &State, steps: usize| -> Result<f64> {
        model::cost(y, &dynamics::free_flow(params, x, state, act, eps, steps)?)
    };
    let dl_dt = if n == 0 {
        (at(s, 1)? - at(s, 0)?) / eps
    } else {
        (at(s, n + 1)? - at(s, n - 1)?) / (2.0 * eps)
    };

    let g = model::grad_s_energy(params, x, s, act)?;
    let base = s.to_flat();
    let gflat = g.to_flat();
    let mut probe = s.clone();
    let mut transport = 0.0;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + fd.delta;
        probe.assign_flat(&p);
        let lp = at(&probe, n)?;
        p[i] = base[i] - fd.delta;
        probe.assign_flat(&p);
        let lm = at(&probe, n)?;
        transport += (lp - lm) / (2.0 * fd.delta) * gflat[i];
    }
    Ok(BackwardIdentityCheck {
        residual: (dl_dt + transport).abs(),
        dl_dt,
        transport,
    })
}

/// Outcome of the envelope check `d/dβ [E + βC](s^β) = C(s^β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub residual: f64,
    pub derivative: f64,
    pub cost: f64,
}

/// Evaluates the envelope identity at `β` with a central difference of width `δ`.
///
/// The stencil reaches `β − δ`, which may be negative; the augmented energy
/// with a small negative weight on the cost is still well defined, so the
/// relaxations here bypass the `β ≥ 0` guard of the public dynamics.
pub fn check_dbeta_energy_identity(
    params: &Params,
    x: &[f64],
    y: &[f64],
    beta: f64,
    act: Activation,
    cfg: &RelaxationConfig,
    fd: &FdConfig,
) -> Result<EnvelopeCheck> {
    fd.validate()?;
    model::check_beta(beta)?;
    let shape = params.shape()?;
    let (fp, _) = dynamics::free_fixed_point(params, x, &State::zeros(&shape), act, cfg)?;
    let settle = |b: f64| -> Result<State> {
        let (s, traj) = dynamics::relax(params, x, Drive::Nudged { y, beta: b }, fp.state(), act, cfg)?;
        if !traj.converged {
            return Err(Error::NotConverged {
                phase: "nudged",
                steps: traj.steps_taken,
                residual: traj.final_residual,
            });
        }
        Ok(s)
    };
    let total = |b: f64| -> Result<f64> {
        let s = settle(b)?;
        Ok(model::energy(params, x, &s, act)? + b * model::cost(y, &s)?)
    };
    let derivative = (total(beta + fd.delta)? - total(beta - fd.delta)?) / (2.0 * fd.delta);
    let cost = model::cost(y, &settle(beta)?)?;
    Ok(EnvelopeCheck {
        residual: (derivative - cost).abs(),
        derivative,
        cost,
    })
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest per-component relative error between two flat vectors.
pub fn max_rel_err<V: FlatVector>(a: &V, b: &V, floor: f64) -> f64 {
    a.values()
        .zip(b.values())
        .map(|(&u, &v)| rel_err(u, v, floor))
        .fold(0.0, f64::max)
}

/// Per-block comparison of a gradient against a reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockError {
    pub block: usize,
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    /// `[row, col]` of the worst entry.
    pub worst_index: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub method: String,
    pub reference: String,
    pub beta: Option<f64>,
    pub floor: f64,
    pub tolerance: f64,
    pub blocks: Vec<BlockError>,
    pub max_rel_err: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn compare(
        estimate: &GradientEstimate,
        reference: &GradientEstimate,
        floor: f64,
        tolerance: f64,
    ) -> Self {
        let blocks: Vec<BlockError> = estimate
            .grad
            .weights
            .iter()
            .zip(&reference.grad.weights)
            .enumerate()
            .map(|(block, (a, b))| {
                let errs: Vec<f64> = a
                    .as_slice()
                    .iter()
                    .zip(b.as_slice())
                    .map(|(&u, &v)| rel_err(u, v, floor))
                    .collect();
                let (worst, max) = errs
                    .iter()
                    .enumerate()
                    .fold((0, 0.0), |(wi, wm), (i, &e)| if e > wm { (i, e) } else { (wi, wm) });
                BlockError {
                    block,
                    max_rel_err: max,
                    mean_rel_err: errs.iter().sum::<f64>() / errs.len().max(1) as f64,
                    worst_index: [worst / a.cols(), worst % a.cols()],
                }
            })
            .collect();
        let max_rel_err = blocks.iter().map(|b| b.max_rel_err).fold(0.0, f64::max);
        Self {
            method: estimate.method.to_string(),
            reference: reference.method.to_string(),
            beta: estimate.beta,
            floor,
            tolerance,
            blocks,
            max_rel_err,
            passed: max_rel_err <= tolerance,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Instance, NetworkShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seeded() -> Instance {
        Instance::seeded(&NetworkShape::new(2, vec![2, 2, 1]).unwrap(), Activation::Logistic, 42)
    }

    #[test]
    fn horizon_must_be_grid_aligned() {
        assert_eq!(steps_for_horizon(1.0, 0.1).unwrap(), 10);
        assert_eq!(steps_for_horizon(0.0, 0.1).unwrap(), 0);
        assert!(steps_for_horizon(0.15, 0.1).is_err());
        assert!(steps_for_horizon(-0.1, 0.1).is_err());
    }

    #[test]
    fn projected_cost_at_zero_horizon_is_the_cost() {
        let inst = seeded();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = State::random(&inst.shape, &mut rng, 1.0);
        let cfg = RelaxationConfig::default();
        let l0 = projected_cost(&inst.params, &inst.sample.x, &inst.sample.y, &s, 0.0, inst.activation, &cfg).unwrap();
        assert_eq!(l0, model::cost(&inst.sample.y, &s).unwrap());
    }

    #[test]
    fn projected_cost_is_flat_at_the_fixed_point_and_converges_elsewhere() {
        let inst = seeded();
        let (p, x, y, act) = (&inst.params, &inst.sample.x, &inst.sample.y, inst.activation);
        let cfg = RelaxationConfig::default();
        let (fp, traj) = dynamics::free_fixed_point(p, x, &State::zeros(&inst.shape), act, &cfg).unwrap();
        let j = model::cost(y, fp.state()).unwrap();
        for t in [0.0, 1.0, 5.0] {
            let l = projected_cost(p, x, y, fp.state(), t, act, &cfg).unwrap();
            assert!((l - j).abs() <= cfg.tolerance * t / cfg.step_size + 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = State::random(&inst.shape, &mut rng, 0.5);
        let horizon = 2.0 * traj.steps_taken as f64 * cfg.step_size + 10.0;
        let horizon = (horizon / cfg.step_size).round() * cfg.step_size;
        let l = projected_cost(p, x, y, &s, horizon, act, &cfg).unwrap();
        assert!((l - j).abs() <= 1e-6);
    }

    #[test]
    fn fd_hvp_edge_cases() {
        let inst = seeded();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = State::random(&inst.shape, &mut rng, 1.0);
        let zero = State::zeros(&inst.shape);
        let fd = FdConfig::for_state();
        let hv = fd_hvp_ss(&inst.params, &inst.sample.x, &s, &zero, inst.activation, &fd).unwrap();
        assert_eq!(hv.norm_inf(), 0.0);
        let mv = fd_hvp_theta_s(&inst.params, &inst.sample.x, &s, &zero, inst.activation, &fd).unwrap();
        assert_eq!(mv.norm_inf(), 0.0);

        let p0 = Params::zeros(&inst.shape);
        let v = State::random(&inst.shape, &mut rng, 1.0);
        let hv = fd_hvp_ss(&p0, &inst.sample.x, &s, &v, inst.activation, &fd).unwrap();
        assert!(hv.minus(&v).norm_inf() <= 1e-9);
    }

    #[test]
    fn fd_gradient_vanishes_for_perfect_prediction() {
        let inst = seeded();
        let (p, x, act) = (&inst.params, &inst.sample.x, inst.activation);
        let cfg = RelaxationConfig {
            tolerance: 1e-12,
            ..Default::default()
        };
        let (fp, _) = dynamics::free_fixed_point(p, x, &State::zeros(&inst.shape), act, &cfg).unwrap();
        let y = fp.state().output().to_vec();
        let g = fd_objective_gradient(p, x, &y, act, &cfg, &FdConfig::for_params()).unwrap();
        // J is quadratic around its zero, so the central difference is O(δ)·J″
        assert!(g.grad.norm_inf() <= 1e-6, "{:e}", g.grad.norm_inf());
        assert_eq!(g.method, Method::FdOracle);
    }

    #[test]
    fn backward_identity_holds_at_the_fixed_point() {
        let inst = seeded();
        let (p, x, y, act) = (&inst.params, &inst.sample.x, &inst.sample.y, inst.activation);
        let cfg = RelaxationConfig {
            tolerance: 1e-12,
            ..Default::default()
        };
        let (fp, _) = dynamics::free_fixed_point(p, x, &State::zeros(&inst.shape), act, &cfg).unwrap();
        for t in [0.0, 0.5] {
            let c = check_backward_identity(p, x, y, fp.state(), t, act, &cfg, &FdConfig::for_params()).unwrap();
            assert!(c.residual <= 1e-9, "{c:?}");
        }
    }

    #[test]
    fn envelope_identity_degenerate_target() {
        let inst = seeded();
        let (p, x, act) = (&inst.params, &inst.sample.x, inst.activation);
        let cfg = RelaxationConfig {
            tolerance: 1e-12,
            ..Default::default()
        };
        let (fp, _) = dynamics::free_fixed_point(p, x, &State::zeros(&inst.shape), act, &cfg).unwrap();
        let y = fp.state().output().to_vec();
        let c = check_dbeta_energy_identity(p, x, &y, 0.0, act, &cfg, &FdConfig::for_params()).unwrap();
        assert!(c.cost <= 1e-20 && c.derivative.abs() <= 1e-9, "{c:?}");
    }

    #[test]
    fn report_flags_worst_entry() {
        let inst = seeded();
        let g = GradientEstimate {
            grad: Params::random(&inst.shape, &mut ChaCha8Rng::seed_from_u64(0), 1.0),
            method: Method::Rbp,
            beta: None,
            horizon_t: None,
            step: 0.1,
        };
        let mut h = g.clone();
        h.method = Method::FdOracle;
        let v = h.grad.weights[1].get(1, 0);
        h.grad.weights[1].set(1, 0, v * 1.5);
        let r = GradCheckReport::compare(&g, &h, 1e-7, 1e-3);
        assert!(!r.passed);
        assert_eq!(r.blocks[1].worst_index, [1, 0]);
        assert_eq!(r.blocks[0].max_rel_err, 0.0);
        assert!(r.to_json().contains("\"worst_index\""));
    }

    #[test]
    fn rel_err_floor() {
        assert_eq!(rel_err(1e-12, 0.0, 1e-9), 1e-3);
        assert_eq!(rel_err(2.0, 1.0, 1e-9), 0.5);
    }
}
