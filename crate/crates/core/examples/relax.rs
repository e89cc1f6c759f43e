//! Free relaxation of a seeded network: energy along the flow and the fixed point.

use fpgrad::dynamics;
use fpgrad::model;
use fpgrad::{Activation, Instance, NetworkShape, RelaxationConfig, State};

fn main() -> fpgrad::Result<()> {
    let shape: NetworkShape = "2:2,2,1".parse()?;
    let inst = Instance::seeded(&shape, Activation::Logistic, 42);
    let cfg = RelaxationConfig {
        record_every: 25,
        tolerance: 1e-12,
        ..Default::default()
    };
    let (s, traj) = dynamics::relax_free(&inst.params, &inst.sample.x, &State::zeros(&shape), inst.activation, &cfg)?;

    println!("{:>8} {:>14}", "t", "energy");
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let e = model::energy(&inst.params, &inst.sample.x, state, inst.activation)?;
        println!("{t:>8.1} {e:>14.10}");
    }
    println!(
        "converged={} after {} steps, residual {:e}",
        traj.converged, traj.steps_taken, traj.final_residual
    );
    println!("prediction {:?}, target {:?}", s.output(), inst.sample.y);
    println!("cost at the fixed point {:e}", model::cost(&inst.sample.y, &s)?);
    Ok(())
}
