use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fpgrad::training::Checkpoint;
use fpgrad::{Activation, NetworkShape, Params};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn fpgrad(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpgrad"))
        .env("FPGRAD_THREADS", "0")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn with_config(out: &Path, config: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--config", config.to_str().unwrap()];
    all.extend_from_slice(args);
    fpgrad(out, &all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Zero weights on 2 -> [1, 3]; every input relaxes to the zero state.
fn zero_weight_setup(dir: &Path) -> PathBuf {
    let shape = NetworkShape::new(2, vec![1, 3]).unwrap();
    Checkpoint::new(Params::zeros(&shape), Activation::Logistic, 0)
        .unwrap()
        .save(&dir.join("zero.txt"))
        .unwrap();
    fs::write(dir.join("rows.csv"), "x0,x1,y0\n0.5,-0.5,0\n").unwrap();
    let cfg = dir.join("zero.toml");
    fs::write(
        &cfg,
        "[relaxation]\ntolerance = 1e-12\n[data]\ncheckpoint = \"zero.txt\"\ndataset = \"rows.csv\"\n",
    )
    .unwrap();
    cfg
}

#[test]
fn relax_converges_and_writes_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let o = with_config(tmp.path(), &configs().join("default.toml"), &["relax"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    let residual: f64 = line
        .split_whitespace()
        .find_map(|t| t.strip_prefix("residual="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(residual <= 1e-12);
    let csv = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,layer,index,value\n"));
}

#[test]
fn relax_max_steps_one_fails_unless_allowed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("default.toml");
    let o = with_config(tmp.path(), &cfg, &["relax", "--max-steps", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("did not converge"));
    let o = with_config(tmp.path(), &cfg, &["relax", "--max-steps", "1", "--allow-nonconverged"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn relax_on_zero_weights_stays_at_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = zero_weight_setup(tmp.path());
    let o = with_config(&tmp.path().join("o"), &cfg, &["relax", "--x", "0.3,-0.7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("o/trajectory.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0.0")));
}

#[test]
fn gradcheck_default_passes_and_fault_injection_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("default.toml");
    let o = with_config(tmp.path(), &cfg, &["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = fs::read_to_string(tmp.path().join("gradcheck.json")).unwrap();
    assert!(report.contains("\"passed\": true"));

    let o = with_config(tmp.path(), &cfg, &["gradcheck", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("worst entry W0[0,0]"));
}

#[test]
fn gradcheck_eqprop_two_betas_reports_first_order() {
    let tmp = tempfile::tempdir().unwrap();
    let o = with_config(
        tmp.path(),
        &configs().join("default.toml"),
        &["gradcheck", "--method", "eqprop", "--beta", "1e-3,5e-4"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("method=eqprop").count(), 2);
    let ratio: f64 = text
        .lines()
        .find_map(|l| l.split("error ratio ").nth(1))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((1.5..=2.5).contains(&ratio), "{ratio}");
}

#[test]
fn equivalence_default_passes_with_unit_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let o = with_config(tmp.path(), &configs().join("default.toml"), &["equivalence"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = fs::read_to_string(tmp.path().join("equivalence.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    let slope = v["s_slope"].as_f64().unwrap();
    assert!((0.8..=1.2).contains(&slope));
    let csv = fs::read_to_string(tmp.path().join("equivalence_2.csv")).unwrap();
    assert!(csv.starts_with("k,t,s_gap,theta_gap,sbar_norm,stilde_norm\n"));
    assert_eq!(csv.lines().count(), 302);
}

#[test]
fn equivalence_degenerate_row_skips_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = zero_weight_setup(tmp.path());
    let o = with_config(&tmp.path().join("o"), &cfg, &["equivalence", "--steps", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("degenerate"));
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = tmp.path().join("u.toml");
    fs::write(&unknown, "seed = 1\nspeed = 2\n").unwrap();
    assert_eq!(with_config(tmp.path(), &unknown, &["relax"]).status.code(), Some(2));

    let grid = tmp.path().join("g.toml");
    fs::write(&grid, "[relaxation]\nstep_size = 0.1\n[method]\nnudged_step_size = 0.2\n").unwrap();
    let o = with_config(tmp.path(), &grid, &["equivalence"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Euler grid"));

    let missing = tmp.path().join("m.toml");
    fs::write(&missing, "[data]\ndataset = \"nope.csv\"\n").unwrap();
    assert_eq!(with_config(tmp.path(), &missing, &["train"]).status.code(), Some(2));

    assert_eq!(fpgrad(tmp.path(), &["relax", "--bogus"]).status.code(), Some(2));
}

#[test]
fn train_predict_and_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("xor.toml");
    let full = tmp.path().join("full");
    let o = with_config(&full, &cfg, &["train", "--epochs", "600"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let log = fs::read_to_string(full.join("train_log.csv")).unwrap();
    assert!(log.starts_with("epoch,mean_cost,accuracy,grad_norm\n"));
    assert_eq!(log.lines().count(), 601);

    let ckpt = full.join("checkpoint.txt");
    let o = with_config(&full, &cfg, &["predict", "--checkpoint", ckpt.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let preds = fs::read_to_string(full.join("predictions.csv")).unwrap();
    let outs: Vec<f64> = preds.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(outs.len(), 4);
    let targets = [0.0, 1.0, 1.0, 0.0];
    assert!(outs.iter().zip(targets).all(|(p, t)| (*p >= 0.5) == (t >= 0.5)));

    // 150 + 450 epochs reproduce the uninterrupted 600
    let part = tmp.path().join("part");
    let o = with_config(&part, &cfg, &["train", "--epochs", "150"]);
    assert_eq!(o.status.code(), Some(1), "150 epochs should miss the target cost");
    let first = part.join("checkpoint.txt");
    let rest = tmp.path().join("rest");
    let o = with_config(&rest, &cfg, &["train", "--epochs", "450", "--resume", first.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(rest.join("checkpoint.txt")).unwrap(), fs::read(&ckpt).unwrap());
}

#[test]
fn sweep_writes_one_row_per_beta() {
    let tmp = tempfile::tempdir().unwrap();
    let o = with_config(tmp.path(), &configs().join("default.toml"), &["sweep", "--beta", "1e-3,5e-4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
