//! The `fpgrad` command line: file-based experiment configs, CSV/JSON outputs
//! and stable exit codes (0 success, 1 tolerance or convergence failure,
//! 2 configuration or parse error).

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, RelaxationConfig};
use crate::eqprop::{self, GradientEstimate};
use crate::equivalence::{self, SweepSummary};
use crate::error::{Error, Result};
use crate::linalg::FlatVector;
use crate::model::{self, Activation, Instance, NetworkShape, Params, State};
use crate::oracle::{self, FdConfig, GradCheckReport};
use crate::rbp;
use crate::training::{self, Checkpoint, Dataset, TrainConfig, TrainMethod};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fpgrad", version, about = "Gradients of fixed-point objectives in energy-based networks")]
pub struct Cli {
    /// Experiment config (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Relax the free phase and write its trajectory.
    Relax(RelaxArgs),
    /// Compare a gradient method against the finite-difference oracle.
    Gradcheck(GradcheckArgs),
    /// Compare error-derivative and temporal-derivative processes over a β sweep.
    Equivalence(EquivalenceArgs),
    /// Equilibrium-propagation gradient error against the oracle as β varies.
    Sweep(SweepArgs),
    /// Train on a dataset and write a log and a checkpoint.
    Train(TrainArgs),
    /// Predict dataset outputs from a checkpoint.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct RelaxArgs {
    /// Input vector, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Exit 0 even when the relaxation did not converge.
    #[arg(long)]
    pub allow_nonconverged: bool,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub method: Option<TrainMethod>,
    /// One report per β, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Test hook: corrupt one analytic gradient entry before comparing.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct EquivalenceArgs {
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    /// Number of Euler steps K on the matched grid.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub method: Option<TrainMethod>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Continue from a checkpoint; `epochs` more epochs are run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Dataset whose inputs are predicted.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodConfig {
    pub name: TrainMethod,
    pub beta: f64,
    pub betas: Vec<f64>,
    /// Matched-grid length K for equivalence and truncated estimates.
    pub steps: usize,
    pub delta: f64,
    /// Relative-error tolerance for gradcheck; method dependent when unset.
    pub tolerance: Option<f64>,
    pub floor: f64,
    /// Step overrides for the two processes; both must equal the relaxation step.
    pub nudged_step_size: Option<f64>,
    pub rbp_step_size: Option<f64>,
    pub max_relative_gap: f64,
    pub slope_range: [f64; 2],
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            name: TrainMethod::Rbp,
            beta: 1e-4,
            betas: vec![1e-3, 5e-4, 2.5e-4],
            steps: 300,
            delta: 1e-4,
            tolerance: None,
            floor: 1e-7,
            nudged_step_size: None,
            rbp_step_size: None,
            max_relative_gap: 0.01,
            slope_range: [0.8, 1.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub dataset: Option<PathBuf>,
    /// Dataset row used by single-sample commands.
    pub row: usize,
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub method: TrainMethod,
    pub beta: f64,
    pub truncation_steps: Option<usize>,
    pub learning_rates: Vec<f64>,
    pub epochs: usize,
    pub persistent_state: bool,
    /// Exit 1 when the final mean cost is above this.
    pub target_cost: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            method: t.method,
            beta: t.beta,
            truncation_steps: t.truncation_steps,
            learning_rates: t.learning_rates,
            epochs: t.epochs,
            persistent_state: t.persistent_state,
            target_cost: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub network: Option<NetworkShape>,
    pub activation: Activation,
    pub seed: u64,
    pub out: PathBuf,
    pub relaxation: RelaxationConfig,
    pub method: MethodConfig,
    pub data: DataConfig,
    pub train: TrainSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            network: None,
            activation: Activation::default(),
            seed: 42,
            out: PathBuf::from("out"),
            relaxation: RelaxationConfig::default(),
            method: MethodConfig::default(),
            data: DataConfig::default(),
            train: TrainSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn default_shape() -> NetworkShape {
        NetworkShape::new(2, vec![2, 2, 1]).expect("valid shape")
    }

    pub fn shape(&self) -> NetworkShape {
        self.network.clone().unwrap_or_else(Self::default_shape)
    }

    /// Parses TOML; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.out);
        cfg.data.dataset.as_mut().map(resolve);
        cfg.data.checkpoint.as_mut().map(resolve);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(shape) = &self.network {
            shape.validate()?;
        }
        self.relaxation.validate()?;
        let eps = self.relaxation.step_size;
        for (name, step) in [
            ("nudged_step_size", self.method.nudged_step_size),
            ("rbp_step_size", self.method.rbp_step_size),
        ] {
            if let Some(s) = step {
                if s != eps {
                    return Err(Error::InvalidArgument(format!(
                        "{name} = {s} differs from relaxation.step_size = {eps}; both processes must share one Euler grid"
                    )));
                }
            }
        }
        if let Some(b) = self.method.betas.iter().find(|b| !(**b > 0.0)) {
            return Err(Error::InvalidArgument(format!("betas must be positive, got {b}")));
        }
        for path in [&self.data.dataset, &self.data.checkpoint].into_iter().flatten() {
            if !path.exists() {
                return Err(Error::InvalidArgument(format!("referenced file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            method: self.train.method,
            beta: self.train.beta,
            truncation_steps: self.train.truncation_steps,
            learning_rates: self.train.learning_rates.clone(),
            epochs: self.train.epochs,
            relaxation: self.relaxation.clone(),
            seed: self.seed,
            persistent_state: self.train.persistent_state,
        }
    }
}

/// Weights, activation and one sample for single-sample commands.
struct Problem {
    params: Params,
    activation: Activation,
    x: Vec<f64>,
    y: Vec<f64>,
}

fn load_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    let (params, shape, activation) = match &cfg.data.checkpoint {
        Some(path) => {
            let c = Checkpoint::load(path)?;
            if let Some(shape) = &cfg.network {
                if *shape != c.shape {
                    return Err(Error::InvalidArgument(format!(
                        "checkpoint shape {} differs from configured network {shape}",
                        c.shape
                    )));
                }
            }
            (c.params, c.shape, c.activation)
        }
        None => {
            let inst = Instance::seeded(&cfg.shape(), cfg.activation, cfg.seed);
            (inst.params, inst.shape, inst.activation)
        }
    };
    let fallback = Instance::seeded(&shape, activation, cfg.seed).sample;
    let row = match &cfg.data.dataset {
        Some(path) => {
            let ds = training::load_dataset_for(path, &shape)?;
            let n = ds.len();
            Some(ds.samples.into_iter().nth(cfg.data.row).ok_or_else(|| {
                Error::InvalidArgument(format!("data.row = {} but the dataset has {n} rows", cfg.data.row))
            })?)
        }
        None => None,
    };
    let x = cfg
        .data
        .x
        .clone()
        .or_else(|| row.as_ref().map(|s| s.x.clone()))
        .unwrap_or(fallback.x);
    let y = cfg
        .data
        .y
        .clone()
        .or_else(|| row.map(|s| s.y))
        .unwrap_or(fallback.y);
    model::Sample { x: x.clone(), y: y.clone() }.check(&shape)?;
    Ok(Problem {
        params,
        activation,
        x,
        y,
    })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. }
        | Error::NotConverged { .. }
        | Error::Instability { .. }
        | Error::BasinJump { .. }
        | Error::TrainingDiverged { .. }
        | Error::Precondition(_) => EXIT_FAILURE,
        _ => EXIT_CONFIG,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    match cli.command {
        Command::Relax(a) => cmd_relax(cfg, a),
        Command::Gradcheck(a) => cmd_gradcheck(cfg, a),
        Command::Equivalence(a) => cmd_equivalence(cfg, a),
        Command::Sweep(a) => cmd_sweep(cfg, a),
        Command::Train(a) => cmd_train(cfg, a),
        Command::Predict(a) => cmd_predict(cfg, a),
    }
}

pub fn cmd_relax(mut cfg: ExperimentConfig, args: RelaxArgs) -> Result<i32> {
    if let Some(n) = args.max_steps {
        cfg.relaxation.max_steps = n;
    }
    if let Some(x) = args.x {
        cfg.data.x = Some(x);
    }
    cfg.validate()?;
    let p = load_problem(&cfg)?;
    let shape = p.params.shape()?;
    let (s, traj) = dynamics::relax_free(&p.params, &p.x, &State::zeros(&shape), p.activation, &cfg.relaxation)?;
    traj.write_csv(create(&cfg.out, "trajectory.csv")?)?;
    let energy = model::energy(&p.params, &p.x, &s, p.activation)?;
    println!(
        "steps={} residual={:?} energy={:?} converged={}",
        traj.steps_taken, traj.final_residual, energy, traj.converged
    );
    println!("output={}", fmt_list(s.output()));
    if !traj.converged && !args.allow_nonconverged {
        eprintln!(
            "error: relaxation did not converge within {} steps (residual {:e} > tolerance {:e})",
            traj.steps_taken, traj.final_residual, cfg.relaxation.tolerance
        );
        return Ok(EXIT_FAILURE);
    }
    Ok(EXIT_OK)
}

fn default_tolerance(method: TrainMethod) -> f64 {
    match method {
        TrainMethod::Rbp => 1e-3,
        _ => 1e-2,
    }
}

pub fn cmd_gradcheck(mut cfg: ExperimentConfig, args: GradcheckArgs) -> Result<i32> {
    if let Some(m) = args.method {
        cfg.method.name = m;
    }
    if let Some(n) = args.max_steps {
        cfg.relaxation.max_steps = n;
    }
    cfg.validate()?;
    let p = load_problem(&cfg)?;
    let (params, x, y, act, rc) = (&p.params, &p.x[..], &p.y[..], p.activation, &cfg.relaxation);
    let method = cfg.method.name;
    let tolerance = cfg.method.tolerance.unwrap_or(default_tolerance(method));
    let fd = FdConfig::for_params().with_delta(cfg.method.delta);
    let reference = oracle::fd_objective_gradient(params, x, y, act, rc, &fd)?;

    let betas: Vec<Option<f64>> = match method {
        TrainMethod::Rbp => vec![None],
        _ => args.beta.unwrap_or_else(|| vec![cfg.method.beta]).into_iter().map(Some).collect(),
    };
    let mut reports = Vec::new();
    let mut abs_errors = Vec::new();
    for beta in &betas {
        let mut est: GradientEstimate = match (method, beta) {
            (TrainMethod::Rbp, _) => rbp::rbp_gradient(params, x, y, act, rc)?,
            (TrainMethod::Eqprop, Some(b)) => eqprop::eqprop_gradient(params, x, y, *b, act, rc)?,
            (TrainMethod::EqpropTruncated, Some(b)) => {
                eqprop::truncated_eqprop_gradient(params, x, y, *b, cfg.method.steps, act, rc)?
            }
            _ => unreachable!("eqprop methods always carry a beta"),
        };
        if args.inject_fault {
            let v = est.grad.weights[0].get(0, 0);
            est.grad.weights[0].set(0, 0, v + 1.0);
        }
        abs_errors.push(est.grad.minus(&reference.grad).norm_inf());
        reports.push(GradCheckReport::compare(&est, &reference, cfg.method.floor, tolerance));
    }

    let mut json = create(&cfg.out, "gradcheck.json")?;
    writeln!(json, "{}", serde_json::to_string_pretty(&reports).expect("reports serialize"))?;
    json.flush()?;
    for (r, err) in reports.iter().zip(&abs_errors) {
        let beta = r.beta.map_or("-".to_string(), |b| format!("{b:?}"));
        println!(
            "method={} beta={beta} max_rel_err={:?} max_abs_err={err:?} tolerance={:?} {}",
            r.method,
            r.max_rel_err,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
        for b in &r.blocks {
            println!(
                "  W{} max_rel_err={:?} mean_rel_err={:?} worst=[{},{}]",
                b.block, b.max_rel_err, b.mean_rel_err, b.worst_index[0], b.worst_index[1]
            );
        }
    }
    let betas: Vec<f64> = betas.into_iter().flatten().collect();
    if betas.len() >= 2 {
        for (w, e) in betas.windows(2).zip(abs_errors.windows(2)) {
            println!("beta {:?} -> {:?}: error ratio {:?}", w[0], w[1], e[0] / e[1]);
        }
        match equivalence::fit_log_slope(&betas, &abs_errors) {
            Some(s) => println!("order in beta: fitted slope {s:?}"),
            None => println!("order in beta: slope fit skipped (non-positive errors)"),
        }
    }
    if reports.iter().all(|r| r.passed) {
        Ok(EXIT_OK)
    } else {
        for r in reports.iter().filter(|r| !r.passed) {
            let worst = r
                .blocks
                .iter()
                .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
                .expect("at least one block");
            eprintln!(
                "error: {} exceeds tolerance {:e}: worst entry W{}[{},{}] relative error {:e}",
                r.method, r.tolerance, worst.block, worst.worst_index[0], worst.worst_index[1], worst.max_rel_err
            );
        }
        Ok(EXIT_FAILURE)
    }
}

pub fn cmd_equivalence(mut cfg: ExperimentConfig, args: EquivalenceArgs) -> Result<i32> {
    if let Some(b) = args.beta {
        cfg.method.betas = b;
    }
    if let Some(k) = args.steps {
        cfg.method.steps = k;
    }
    cfg.validate()?;
    let p = load_problem(&cfg)?;
    let reports = equivalence::beta_sweep(
        &p.params,
        &p.x,
        &p.y,
        &cfg.method.betas,
        cfg.method.steps,
        p.activation,
        &cfg.relaxation,
    )?;
    for (i, r) in reports.iter().enumerate() {
        r.write_csv(create(&cfg.out, &format!("equivalence_{i}.csv"))?)?;
    }
    let summary = SweepSummary::from_reports(&reports);
    let mut json = create(&cfg.out, "equivalence.json")?;
    writeln!(json, "{}", summary.to_json())?;
    json.flush()?;
    for r in &reports {
        println!(
            "beta={:?} max_s_gap={:?} max_theta_gap={:?} reference_scale={:?}",
            r.beta, r.max_s_gap, r.max_theta_gap, r.reference_scale
        );
    }
    if summary.degenerate {
        println!("degenerate: reference scale {:?}, slope fit skipped", summary.reference_scale);
    } else {
        println!(
            "slope s={} theta={} relative_gap s={:?} theta={:?}",
            summary.s_slope.map_or("n/a".into(), |s| format!("{s:?}")),
            summary.theta_slope.map_or("n/a".into(), |s| format!("{s:?}")),
            summary.relative_s_gap_at_min_beta,
            summary.relative_theta_gap_at_min_beta
        );
    }
    let [lo, hi] = cfg.method.slope_range;
    if summary.passes((lo, hi), cfg.method.max_relative_gap) {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "error: equivalence outside tolerance (slope range [{lo}, {hi}], max relative gap {})",
            cfg.method.max_relative_gap
        );
        Ok(EXIT_FAILURE)
    }
}

pub fn cmd_sweep(mut cfg: ExperimentConfig, args: SweepArgs) -> Result<i32> {
    if let Some(b) = args.beta {
        cfg.method.betas = b;
    }
    cfg.validate()?;
    let p = load_problem(&cfg)?;
    let (params, x, y, act, rc) = (&p.params, &p.x[..], &p.y[..], p.activation, &cfg.relaxation);
    let fd = FdConfig::for_params().with_delta(cfg.method.delta);
    let reference = oracle::fd_objective_gradient(params, x, y, act, rc, &fd)?;
    let mut out = create(&cfg.out, "sweep.csv")?;
    writeln!(out, "beta,max_abs_err,max_rel_err")?;
    let mut errors = Vec::new();
    for &beta in &cfg.method.betas {
        let est = eqprop::eqprop_gradient(params, x, y, beta, act, rc)?;
        let abs = est.grad.minus(&reference.grad).norm_inf();
        let rel = oracle::max_rel_err(&est.grad, &reference.grad, cfg.method.floor);
        writeln!(out, "{beta:?},{abs:?},{rel:?}")?;
        println!("beta={beta:?} max_abs_err={abs:?} max_rel_err={rel:?}");
        errors.push(abs);
    }
    out.flush()?;
    if let Some(s) = equivalence::fit_log_slope(&cfg.method.betas, &errors) {
        println!("fitted slope {s:?}");
    }
    Ok(EXIT_OK)
}

pub fn cmd_train(mut cfg: ExperimentConfig, args: TrainArgs) -> Result<i32> {
    if let Some(m) = args.method {
        cfg.train.method = m;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(n) = args.max_steps {
        cfg.relaxation.max_steps = n;
    }
    cfg.validate()?;
    let path = cfg
        .data
        .dataset
        .clone()
        .ok_or_else(|| Error::InvalidArgument("train needs data.dataset".into()))?;
    let tc = cfg.train_config();
    let (params, shape, act, start) = match &args.resume {
        Some(ckpt) => {
            let c = Checkpoint::load(ckpt)?;
            (c.params, c.shape, c.activation, c.epochs)
        }
        None => {
            let shape = cfg.shape();
            (training::initial_params(&shape, tc.seed), shape, cfg.activation, 0)
        }
    };
    let ds: Dataset = training::load_dataset_for(&path, &shape)?;
    let (params, log) = training::train_from(&ds, params, start, act, &tc)?;
    log.write_csv(create(&cfg.out, "train_log.csv")?)?;
    Checkpoint::new(params, act, start + log.len())?.save(&cfg.out.join("checkpoint.txt"))?;
    let cost = log.mean_cost.last().copied().unwrap_or(f64::NAN);
    let acc = log.accuracy.last().copied().flatten();
    println!(
        "method={} epochs={} mean_cost={cost:?} accuracy={}",
        tc.method,
        start + log.len(),
        acc.map_or("n/a".into(), |a| format!("{a:?}"))
    );
    if let Some(target) = cfg.train.target_cost {
        if !(cost <= target) {
            eprintln!("error: final mean cost {cost:e} above target {target:e}");
            return Ok(EXIT_FAILURE);
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_predict(mut cfg: ExperimentConfig, args: PredictArgs) -> Result<i32> {
    if let Some(c) = args.checkpoint {
        cfg.data.checkpoint = Some(c);
    }
    if let Some(i) = args.input {
        cfg.data.dataset = Some(i);
    }
    cfg.validate()?;
    let ckpt = cfg
        .data
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("predict needs a checkpoint".into()))?;
    let dataset = cfg
        .data
        .dataset
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("predict needs data.dataset".into()))?;
    let c = Checkpoint::load(ckpt)?;
    let ds = training::load_dataset_for(dataset, &c.shape)?;
    let mut out = create(&cfg.out, "predictions.csv")?;
    let header: Vec<String> = (0..c.shape.output_dim()).map(|i| format!("p{i}")).collect();
    writeln!(out, "row,{}", header.join(","))?;
    for (i, s) in ds.samples.iter().enumerate() {
        let pred = training::predict(&c.params, &s.x, c.activation, &cfg.relaxation)?;
        writeln!(out, "{i},{}", fmt_list(&pred))?;
        println!("{i}: {}", fmt_list(&pred));
    }
    out.flush()?;
    let (cost, acc) = training::evaluate(&c.params, &ds, c.activation, &cfg.relaxation)?;
    println!(
        "mean_cost={cost:?} accuracy={}",
        acc.map_or("n/a".into(), |a| format!("{a:?}"))
    );
    Ok(EXIT_OK)
}
