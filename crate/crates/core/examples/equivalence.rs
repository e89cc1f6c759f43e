//! Error derivatives of recurrent backpropagation against the rescaled
//! temporal derivatives of the nudged phase, step by step on one Euler grid.

use fpgrad::equivalence::{self, SweepSummary};
use fpgrad::{Activation, Instance, NetworkShape, RelaxationConfig};

fn main() -> fpgrad::Result<()> {
    let shape: NetworkShape = "2:2,2,1".parse()?;
    let inst = Instance::seeded(&shape, Activation::Logistic, 42);
    let cfg = RelaxationConfig {
        tolerance: 1e-13,
        ..Default::default()
    };
    let betas = [1e-3, 5e-4, 2.5e-4, 1.25e-4];
    let reports = equivalence::beta_sweep(&inst.params, &inst.sample.x, &inst.sample.y, &betas, 300, inst.activation, &cfg)?;

    let last = reports.last().expect("one report per beta");
    println!("beta = {:e}", last.beta);
    println!("{:>5} {:>12} {:>12} {:>12}", "k", "|S_bar|", "s gap", "theta gap");
    for k in (0..=last.num_steps).step_by(30) {
        println!(
            "{k:>5} {:>12.4e} {:>12.4e} {:>12.4e}",
            last.per_step_sbar_norm[k], last.per_step_s_gap[k], last.per_step_theta_gap[k]
        );
    }

    for r in &reports {
        println!("beta {:>9.2e}: max s gap {:.4e}, max theta gap {:.4e}", r.beta, r.max_s_gap, r.max_theta_gap);
    }
    let summary = SweepSummary::from_reports(&reports);
    println!(
        "log-log slope: s {:.4}, theta {:.4}",
        summary.s_slope.unwrap_or(f64::NAN),
        summary.theta_slope.unwrap_or(f64::NAN)
    );
    Ok(())
}
