//! Two identities checked numerically: the backward equation of the
//! projected cost and the envelope derivative of the nudged energy in beta.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fpgrad::oracle::{self, FdConfig};
use fpgrad::{Activation, Instance, NetworkShape, RelaxationConfig, State};

fn main() -> fpgrad::Result<()> {
    let shape: NetworkShape = "2:2,2,1".parse()?;
    let inst = Instance::seeded(&shape, Activation::Logistic, 42);
    let (p, x, y, act) = (&inst.params, &inst.sample.x, &inst.sample.y, inst.activation);

    let s = State::random(&shape, &mut ChaCha8Rng::seed_from_u64(3), 1.0);
    println!("backward equation, dL/dt + <dL/ds, dE/ds> = 0");
    for step in [1e-2, 1e-3, 1e-4] {
        let cfg = RelaxationConfig {
            step_size: step,
            ..Default::default()
        };
        let c = oracle::check_backward_identity(p, x, y, &s, 1.0, act, &cfg, &FdConfig::for_state())?;
        println!("  eps {step:e}: dL/dt {:+.6e}, residual {:.3e}", c.dl_dt, c.residual);
    }

    println!("envelope, d/dbeta [E + beta C](s_beta) = C(s_beta), beta = 0.1");
    let cfg = RelaxationConfig {
        tolerance: 1e-13,
        ..Default::default()
    };
    for delta in [0.08, 0.04, 0.02, 0.01] {
        let c = oracle::check_dbeta_energy_identity(p, x, y, 0.1, act, &cfg, &FdConfig::for_params().with_delta(delta))?;
        println!("  delta {delta}: derivative {:.10}, cost {:.10}, residual {:.3e}", c.derivative, c.cost, c.residual);
    }
    Ok(())
}
