//! Step-by-step comparison of the error-derivative process of recurrent
//! backpropagation with the rescaled temporal-derivative process of the
//! nudged phase.
//!
//! Both processes start at the same free fixed point `s⁰` and are advanced
//! with the same Euler step, so their discrete recursions differ only through
//! the nonlinearity of the nudged flow. Under `u_k = (s_k − s⁰)/β` that
//! difference is `O(β)` uniformly in `k`.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::{FixedPoint, RelaxationConfig};
use crate::eqprop::{self, nudged_tolerance};
use crate::error::{Error, Result};
use crate::linalg::FlatVector;
use crate::model::{Activation, Params};
use crate::parallel;
use crate::rbp;

/// Reference scales below this are treated as a degenerate (already solved) instance.
pub const DEGENERATE_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub beta: f64,
    pub step: f64,
    pub num_steps: usize,
    pub per_step_s_gap: Vec<f64>,
    pub per_step_theta_gap: Vec<f64>,
    pub per_step_sbar_norm: Vec<f64>,
    pub per_step_stilde_norm: Vec<f64>,
    pub max_s_gap: f64,
    pub max_theta_gap: f64,
    /// `max_k ‖S̄_k‖∞`.
    pub reference_scale: f64,
}

impl EquivalenceReport {
    pub fn relative_s_gap(&self) -> f64 {
        self.max_s_gap / self.reference_scale.max(f64::MIN_POSITIVE)
    }

    pub fn relative_theta_gap(&self) -> f64 {
        self.max_theta_gap / self.reference_scale.max(f64::MIN_POSITIVE)
    }

    pub fn is_degenerate(&self) -> bool {
        self.reference_scale <= DEGENERATE_SCALE
    }

    /// Writes `k,t,s_gap,theta_gap,sbar_norm,stilde_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,t,s_gap,theta_gap,sbar_norm,stilde_norm")?;
        for k in 0..=self.num_steps {
            writeln!(
                out,
                "{k},{:?},{:?},{:?},{:?},{:?}",
                k as f64 * self.step,
                self.per_step_s_gap[k],
                self.per_step_theta_gap[k],
                self.per_step_sbar_norm[k],
                self.per_step_stilde_norm[k]
            )?;
        }
        Ok(())
    }
}

/// Compares both processes from a given free fixed point.
#[allow(clippy::too_many_arguments)]
pub fn compare_processes_at(
    params: &Params,
    x: &[f64],
    y: &[f64],
    beta: f64,
    steps: usize,
    act: Activation,
    cfg: &RelaxationConfig,
    fp: &FixedPoint,
) -> Result<EquivalenceReport> {
    cfg.validate()?;
    let temporal = eqprop::temporal_derivative_process_at(params, x, y, beta, steps, act, cfg, fp)?;
    let error = rbp::rbp_process(params, x, y, fp, act, cfg.step_size, steps)?;
    let n = steps + 1;
    let mut report = EquivalenceReport {
        beta,
        step: cfg.step_size,
        num_steps: steps,
        per_step_s_gap: Vec::with_capacity(n),
        per_step_theta_gap: Vec::with_capacity(n),
        per_step_sbar_norm: Vec::with_capacity(n),
        per_step_stilde_norm: Vec::with_capacity(n),
        max_s_gap: 0.0,
        max_theta_gap: 0.0,
        reference_scale: 0.0,
    };
    let paired = temporal.s_tilde.iter().zip(&temporal.theta_tilde).zip(error).take(n);
    for (k, ((s_tilde, theta_tilde), bar)) in paired.enumerate() {
        let s_gap = s_tilde.minus(&bar.s_bar).norm_inf();
        let theta_gap = theta_tilde.minus(&bar.theta_bar).norm_inf();
        if !(s_gap.is_finite() && theta_gap.is_finite()) {
            return Err(Error::Divergence {
                phase: "equivalence",
                step: k,
            });
        }
        let sbar_norm = bar.s_bar.norm_inf();
        report.per_step_s_gap.push(s_gap);
        report.per_step_theta_gap.push(theta_gap);
        report.per_step_sbar_norm.push(sbar_norm);
        report.per_step_stilde_norm.push(s_tilde.norm_inf());
        report.max_s_gap = report.max_s_gap.max(s_gap);
        report.max_theta_gap = report.max_theta_gap.max(theta_gap);
        report.reference_scale = report.reference_scale.max(sbar_norm);
    }
    Ok(report)
}

/// Relaxes the free phase (tolerance tightened to `β · 1e-3`) and compares both processes.
pub fn compare_processes(
    params: &Params,
    x: &[f64],
    y: &[f64],
    beta: f64,
    steps: usize,
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<EquivalenceReport> {
    let fp = eqprop::nudging_fixed_point(params, x, beta, act, cfg)?;
    compare_processes_at(params, x, y, beta, steps, act, cfg, &fp)
}

fn check_betas(betas: &[f64]) -> Result<f64> {
    if betas.is_empty() {
        return Err(Error::InvalidArgument("beta sweep needs at least one beta".into()));
    }
    for &b in betas {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {b}")));
        }
    }
    if betas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("betas must be non-increasing".into()));
    }
    Ok(betas[betas.len() - 1])
}

/// One report per `β`, all sharing a single free fixed point relaxed to the
/// tolerance required by the smallest `β`.
pub fn beta_sweep(
    params: &Params,
    x: &[f64],
    y: &[f64],
    betas: &[f64],
    steps: usize,
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<Vec<EquivalenceReport>> {
    let min_beta = check_betas(betas)?;
    let fp = eqprop::nudging_fixed_point(params, x, min_beta, act, cfg)?;
    let cfg = nudged_tolerance(cfg, min_beta);
    parallel::map_indexed(betas.len(), parallel::configured_threads(), |i| {
        compare_processes_at(params, x, y, betas[i], steps, act, &cfg, &fp)
    })
    .into_iter()
    .collect()
}

/// Least-squares slope of `log(value)` against `log(beta)`; `None` when
/// fewer than two points or any value is not positive.
pub fn fit_log_slope(betas: &[f64], values: &[f64]) -> Option<f64> {
    if betas.len() < 2 || betas.len() != values.len() || values.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = betas.iter().map(|b| b.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Summary of a β-sweep: fitted slopes and the relative gap at the smallest β.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub betas: Vec<f64>,
    pub max_s_gaps: Vec<f64>,
    pub max_theta_gaps: Vec<f64>,
    pub reference_scale: f64,
    pub s_slope: Option<f64>,
    pub theta_slope: Option<f64>,
    pub relative_s_gap_at_min_beta: f64,
    pub relative_theta_gap_at_min_beta: f64,
    pub degenerate: bool,
}

impl SweepSummary {
    pub fn from_reports(reports: &[EquivalenceReport]) -> Self {
        let betas: Vec<f64> = reports.iter().map(|r| r.beta).collect();
        let max_s_gaps: Vec<f64> = reports.iter().map(|r| r.max_s_gap).collect();
        let max_theta_gaps: Vec<f64> = reports.iter().map(|r| r.max_theta_gap).collect();
        let last = reports.last();
        let reference_scale = last.map_or(0.0, |r| r.reference_scale);
        let degenerate = last.is_none_or(EquivalenceReport::is_degenerate);
        let (s_slope, theta_slope) = if degenerate {
            (None, None)
        } else {
            (
                fit_log_slope(&betas, &max_s_gaps),
                fit_log_slope(&betas, &max_theta_gaps),
            )
        };
        Self {
            betas,
            max_s_gaps,
            max_theta_gaps,
            reference_scale,
            s_slope,
            theta_slope,
            relative_s_gap_at_min_beta: last.map_or(0.0, EquivalenceReport::relative_s_gap),
            relative_theta_gap_at_min_beta: last.map_or(0.0, EquivalenceReport::relative_theta_gap),
            degenerate,
        }
    }

    /// Slopes in `slope_range` and relative gaps at the smallest β within
    /// `max_relative_gap`. A degenerate sweep passes when its absolute gaps
    /// are negligible.
    pub fn passes(&self, slope_range: (f64, f64), max_relative_gap: f64) -> bool {
        if self.degenerate {
            return self.max_s_gaps.iter().chain(&self.max_theta_gaps).all(|&g| g <= 1e-6);
        }
        let in_range = |s: Option<f64>| s.is_some_and(|s| s >= slope_range.0 && s <= slope_range.1);
        in_range(self.s_slope)
            && in_range(self.theta_slope)
            && self.relative_s_gap_at_min_beta <= max_relative_gap
            && self.relative_theta_gap_at_min_beta <= max_relative_gap
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// `‖Θ̃_K − Θ̄_K‖∞ / (1 + ‖Θ̄_K‖∞)` on the matched grid.
pub fn truncation_correspondence(
    params: &Params,
    x: &[f64],
    y: &[f64],
    beta: f64,
    steps: usize,
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<f64> {
    let fp = eqprop::nudging_fixed_point(params, x, beta, act, cfg)?;
    let truncated = eqprop::truncated_eqprop_gradient_at(params, x, y, beta, steps, act, cfg, &fp)?;
    let error = rbp::rbp_process(params, x, y, &fp, act, cfg.step_size, steps)?;
    let theta_bar = &error[steps].theta_bar;
    Ok(truncated.grad.minus(theta_bar).norm_inf() / (1.0 + theta_bar.norm_inf()))
}
