//! XOR with equilibrium propagation and with recurrent backpropagation,
//! followed by a checkpoint round trip.

use std::path::Path;

use fpgrad::training::{self, Checkpoint, TrainConfig, TrainMethod};
use fpgrad::{Activation, FlatVector, NetworkShape};

fn main() -> fpgrad::Result<()> {
    let ds = training::load_dataset(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/xor.csv"))?;
    let shape = NetworkShape::new(2, vec![1, 4])?;
    let act = Activation::Tanh;

    for method in [TrainMethod::Eqprop, TrainMethod::Rbp] {
        let cfg = TrainConfig {
            method,
            beta: 1e-3,
            learning_rates: vec![0.1],
            epochs: 2000,
            seed: 42,
            ..Default::default()
        };
        let (params, log) = training::sgd_train(&ds, &shape, act, &cfg)?;
        println!("{method}");
        for e in [0, 99, 499, 999, 1999] {
            println!("  epoch {:>4}: mean cost {:.3e}", e + 1, log.mean_cost[e]);
        }
        for s in &ds.samples {
            let out = training::predict(&params, &s.x, act, &cfg.relaxation)?;
            println!("  {:?} -> {:+.4} (target {})", s.x, out[0], s.y[0]);
        }

        let dir = std::env::temp_dir().join("fpgrad-xor-example");
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{method}.txt"));
        Checkpoint::new(params.clone(), act, cfg.epochs)?.save(&path)?;
        let back = Checkpoint::load(&path)?;
        println!("  checkpoint {} round-trips bitwise: {}", path.display(), back.params.bit_eq(&params));
    }
    Ok(())
}
