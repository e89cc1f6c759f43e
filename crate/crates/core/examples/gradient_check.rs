//! Recurrent backpropagation and equilibrium propagation against a
//! finite-difference oracle on the same objective.

use fpgrad::eqprop;
use fpgrad::oracle::{self, FdConfig, GradCheckReport};
use fpgrad::rbp;
use fpgrad::{Activation, FlatVector, Instance, NetworkShape, RelaxationConfig};

fn main() -> fpgrad::Result<()> {
    let shape: NetworkShape = "4:2,3,3".parse()?;
    let inst = Instance::seeded(&shape, Activation::Logistic, 7);
    let (p, x, y, act) = (&inst.params, &inst.sample.x, &inst.sample.y, inst.activation);
    let cfg = RelaxationConfig {
        tolerance: 1e-13,
        ..Default::default()
    };

    let fd = oracle::fd_objective_gradient(p, x, y, act, &cfg, &FdConfig::for_params())?;
    let rbp = rbp::rbp_gradient(p, x, y, act, &cfg)?;
    let report = GradCheckReport::compare(&rbp, &fd, 1e-7, 1e-3);
    println!("rbp: horizon t={:?}, max rel err {:e}", rbp.horizon_t.unwrap_or(0.0), report.max_rel_err);

    println!("{:>10} {:>14} {:>10}", "beta", "max abs err", "ratio");
    let mut prev: Option<f64> = None;
    for beta in [1e-2, 5e-3, 2.5e-3, 1.25e-3] {
        let est = eqprop::eqprop_gradient(p, x, y, beta, act, &cfg)?;
        let err = est.grad.minus(&fd.grad).norm_inf();
        let ratio = prev.map_or(String::new(), |e| format!("{:.3}", e / err));
        println!("{beta:>10.2e} {err:>14.6e} {ratio:>10}");
        prev = Some(err);
    }
    println!("{}", report.to_json());
    Ok(())
}
