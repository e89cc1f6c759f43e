//! Stopping the nudged phase after K steps against stopping the error
//! process after K steps.

use fpgrad::eqprop;
use fpgrad::equivalence;
use fpgrad::rbp;
use fpgrad::{Activation, FlatVector, Instance, NetworkShape, RelaxationConfig};

fn main() -> fpgrad::Result<()> {
    let shape: NetworkShape = "3:2,3".parse()?;
    let inst = Instance::seeded(&shape, Activation::Logistic, 1);
    let (p, x, y, act) = (&inst.params, &inst.sample.x, &inst.sample.y, inst.activation);
    let cfg = RelaxationConfig {
        tolerance: 1e-13,
        ..Default::default()
    };
    let beta = 1e-4;
    let full = rbp::rbp_gradient(p, x, y, act, &cfg)?;

    println!("{:>5} {:>16} {:>16} {:>12}", "K", "|truncated|", "dist to full", "gap");
    for k in [0, 5, 10, 20, 50, 100, 200, 400] {
        let trunc = eqprop::truncated_eqprop_gradient(p, x, y, beta, k, act, &cfg)?;
        let gap = equivalence::truncation_correspondence(p, x, y, beta, k, act, &cfg)?;
        println!(
            "{k:>5} {:>16.6e} {:>16.6e} {gap:>12.3e}",
            trunc.grad.norm_inf(),
            trunc.grad.minus(&full.grad).norm_inf()
        );
    }
    Ok(())
}
