//! Per-sample SGD on the fixed-point objective, dataset loading and
//! checkpoints.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, FixedPoint, RelaxationConfig};
use crate::eqprop::{self, GradientEstimate};
use crate::error::{Error, Result};
use crate::linalg::{FlatVector, Matrix};
use crate::model::{Activation, NetworkShape, Params, Sample, State};
use crate::parallel;
use crate::rbp;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub name: String,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, name: impl Into<String>) -> Result<Self> {
        let ds = Self {
            samples,
            name: name.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn input_dim(&self) -> usize {
        self.samples[0].x.len()
    }

    pub fn output_dim(&self) -> usize {
        self.samples[0].y.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let first = self
            .samples
            .first()
            .ok_or_else(|| Error::InvalidArgument(format!("dataset `{}` is empty", self.name)))?;
        for s in &self.samples {
            if s.x.len() != first.x.len() {
                return Err(Error::Shape {
                    what: "dataset input".into(),
                    expected: first.x.len(),
                    got: s.x.len(),
                });
            }
            if s.y.len() != first.y.len() {
                return Err(Error::Shape {
                    what: "dataset target".into(),
                    expected: first.y.len(),
                    got: s.y.len(),
                });
            }
        }
        Ok(())
    }

    pub fn check(&self, shape: &NetworkShape) -> Result<()> {
        self.samples.iter().try_for_each(|s| s.check(shape))
    }

    /// Targets are all 0/1: binary (one output) or one-hot (several).
    pub fn is_classification(&self) -> bool {
        self.samples.iter().all(|s| {
            s.y.iter().all(|&v| v == 0.0 || v == 1.0)
                && (s.y.len() == 1 || s.y.iter().filter(|&&v| v == 1.0).count() == 1)
        })
    }
}

fn parse_header(header: &csv::StringRecord) -> Result<(usize, usize)> {
    let bad = |msg: String| Error::Parse { line: 1, msg };
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let n = names.iter().take_while(|c| c.starts_with('x')).count();
    let m = names.len() - n;
    for (i, name) in names.iter().enumerate() {
        let expected = if i < n { format!("x{i}") } else { format!("y{}", i - n) };
        if *name != expected {
            return Err(bad(format!("expected column `{expected}`, found `{name}`")));
        }
    }
    if n == 0 || m == 0 {
        return Err(bad("header needs at least one x and one y column".into()));
    }
    Ok((n, m))
}

/// Reads a CSV with header `x0,…,x{n-1},y0,…,y{m-1}`.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    parse_dataset(&text, name)
}

pub fn parse_dataset(text: &str, name: impl Into<String>) -> Result<Dataset> {
    let name = name.into();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(Error::InvalidArgument(format!("dataset `{name}` is empty")));
    }
    let (n, m) = parse_header(header)?;
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != n + m {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", n + m, record.len()),
            });
        }
        let values = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        msg: format!("invalid number `{f}`"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        samples.push(Sample {
            x: values[..n].to_vec(),
            y: values[n..].to_vec(),
        });
    }
    Dataset::new(samples, name)
}

/// Loads a dataset and checks it against `shape`.
pub fn load_dataset_for(path: &Path, shape: &NetworkShape) -> Result<Dataset> {
    let ds = load_dataset(path)?;
    ds.check(shape)?;
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMethod {
    #[default]
    Eqprop,
    EqpropTruncated,
    Rbp,
}

impl std::fmt::Display for TrainMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainMethod::Eqprop => "eqprop",
            TrainMethod::EqpropTruncated => "eqprop-truncated",
            TrainMethod::Rbp => "rbp",
        })
    }
}

impl std::str::FromStr for TrainMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eqprop" => Ok(TrainMethod::Eqprop),
            "eqprop-truncated" => Ok(TrainMethod::EqpropTruncated),
            "rbp" => Ok(TrainMethod::Rbp),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub method: TrainMethod,
    pub beta: f64,
    pub truncation_steps: Option<usize>,
    /// One rate per weight matrix, or a single rate shared by all.
    pub learning_rates: Vec<f64>,
    pub epochs: usize,
    pub relaxation: RelaxationConfig,
    pub seed: u64,
    /// Start each free phase from the sample's previous free fixed point.
    pub persistent_state: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: TrainMethod::Eqprop,
            beta: 1e-3,
            truncation_steps: None,
            learning_rates: vec![0.1],
            epochs: 100,
            relaxation: RelaxationConfig::default(),
            seed: 0,
            persistent_state: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, shape: &NetworkShape) -> Result<()> {
        self.relaxation.validate()?;
        let layers = shape.num_layers();
        if self.learning_rates.len() != 1 && self.learning_rates.len() != layers {
            return Err(Error::InvalidArgument(format!(
                "expected 1 or {layers} learning rates, got {}",
                self.learning_rates.len()
            )));
        }
        if let Some(lr) = self.learning_rates.iter().find(|lr| !(**lr >= 0.0 && lr.is_finite())) {
            return Err(Error::InvalidArgument(format!("learning rate must be non-negative, got {lr}")));
        }
        match self.method {
            TrainMethod::Rbp => {
                if self.truncation_steps.is_some() {
                    return Err(Error::InvalidArgument("truncation_steps only applies to eqprop-truncated".into()));
                }
            }
            TrainMethod::Eqprop | TrainMethod::EqpropTruncated => {
                eqprop::check_positive_beta(self.beta)?;
                let truncated = self.method == TrainMethod::EqpropTruncated;
                if truncated != self.truncation_steps.is_some() {
                    return Err(Error::InvalidArgument(
                        "truncation_steps is required by eqprop-truncated and only by it".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn learning_rate(&self, k: usize) -> f64 {
        if self.learning_rates.len() == 1 {
            self.learning_rates[0]
        } else {
            self.learning_rates[k]
        }
    }

    /// Relaxation settings for the free phase of this method.
    pub fn free_phase(&self) -> RelaxationConfig {
        match self.method {
            TrainMethod::Rbp => self.relaxation.clone(),
            _ => eqprop::nudged_tolerance(&self.relaxation, self.beta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrainLog {
    /// Epoch number of the first entry (non-zero when resuming).
    pub first_epoch: usize,
    pub mean_cost: Vec<f64>,
    pub accuracy: Vec<Option<f64>>,
    /// Mean over the epoch of the per-sample gradient ℓ2 norm.
    pub grad_norm: Vec<f64>,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.mean_cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_cost.is_empty()
    }

    /// Writes `epoch,mean_cost,accuracy,grad_norm`; epochs count from 1.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,mean_cost,accuracy,grad_norm")?;
        for i in 0..self.len() {
            let acc = self.accuracy[i].map_or(String::new(), |a| format!("{a:?}"));
            writeln!(
                out,
                "{},{:?},{},{:?}",
                self.first_epoch + i + 1,
                self.mean_cost[i],
                acc,
                self.grad_norm[i]
            )?;
        }
        Ok(())
    }
}

/// Prediction: free relaxation from the zero state, read out on the output layer.
pub fn predict(params: &Params, x: &[f64], act: Activation, cfg: &RelaxationConfig) -> Result<Vec<f64>> {
    let shape = params.shape()?;
    let (fp, _) = dynamics::free_fixed_point(params, x, &State::zeros(&shape), act, cfg)?;
    Ok(fp.state().output().to_vec())
}

fn is_correct(pred: &[f64], y: &[f64]) -> bool {
    if y.len() == 1 {
        (pred[0] >= 0.5) == (y[0] >= 0.5)
    } else {
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
                .0
        };
        argmax(pred) == argmax(y)
    }
}

/// Mean cost over the dataset and, for 0/1 targets, thresholded accuracy.
pub fn evaluate(
    params: &Params,
    ds: &Dataset,
    act: Activation,
    cfg: &RelaxationConfig,
) -> Result<(f64, Option<f64>)> {
    let preds = parallel::map_indexed(ds.len(), parallel::configured_threads(), |i| {
        predict(params, &ds.samples[i].x, act, cfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut cost = 0.0;
    let mut correct = 0;
    for (pred, s) in preds.iter().zip(&ds.samples) {
        cost += 0.5 * pred.iter().zip(&s.y).map(|(p, y)| (y - p).powi(2)).sum::<f64>();
        correct += usize::from(is_correct(pred, &s.y));
    }
    let n = ds.len() as f64;
    let acc = ds.is_classification().then(|| correct as f64 / n);
    Ok((cost / n, acc))
}

/// Gradient estimate of the configured method from a relaxed free fixed point.
pub fn estimate_gradient(
    params: &Params,
    sample: &Sample,
    act: Activation,
    cfg: &TrainConfig,
    fp: &FixedPoint,
) -> Result<GradientEstimate> {
    let (x, y, rc) = (&sample.x, &sample.y, &cfg.relaxation);
    match cfg.method {
        TrainMethod::Eqprop => eqprop::eqprop_gradient_at(params, x, y, cfg.beta, act, rc, fp),
        TrainMethod::EqpropTruncated => {
            let steps = cfg.truncation_steps.unwrap_or(0);
            eqprop::truncated_eqprop_gradient_at(params, x, y, cfg.beta, steps, act, rc, fp)
        }
        TrainMethod::Rbp => rbp::rbp_gradient_at(params, x, y, act, rc, fp),
    }
}

/// `θ_k ← θ_k − lr_k · g_k`.
pub fn apply_update(params: &mut Params, grad: &Params, cfg: &TrainConfig) {
    for (k, (w, g)) in params.weights.iter_mut().zip(&grad.weights).enumerate() {
        let lr = cfg.learning_rate(k);
        for (a, b) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *a -= lr * b;
        }
    }
}

fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Glorot-uniform initial weights from the configured seed.
pub fn initial_params(shape: &NetworkShape, seed: u64) -> Params {
    Params::glorot(shape, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Trains from a Glorot initialization for `cfg.epochs` epochs.
pub fn sgd_train(
    ds: &Dataset,
    shape: &NetworkShape,
    act: Activation,
    cfg: &TrainConfig,
) -> Result<(Params, TrainLog)> {
    let params = initial_params(shape, cfg.seed);
    train_from(ds, params, 0, act, cfg)
}

/// Continues training from `params`, which have already seen `start_epoch`
/// epochs. Each epoch's sample order depends only on the seed and the epoch
/// number, so without persistent state a resumed run reproduces an
/// uninterrupted one bitwise.
pub fn train_from(
    ds: &Dataset,
    mut params: Params,
    start_epoch: usize,
    act: Activation,
    cfg: &TrainConfig,
) -> Result<(Params, TrainLog)> {
    let shape = params.shape()?;
    cfg.validate(&shape)?;
    ds.check(&shape)?;
    let free_cfg = cfg.free_phase();
    let mut starts: Vec<State> = vec![State::zeros(&shape); ds.len()];
    let mut log = TrainLog {
        first_epoch: start_epoch,
        ..Default::default()
    };
    for epoch in start_epoch..start_epoch + cfg.epochs {
        let mut norm_sum = 0.0;
        for i in epoch_order(cfg.seed, epoch, ds.len()) {
            let sample = &ds.samples[i];
            let diverged = |e: Error| match e {
                Error::Divergence { .. } => Error::TrainingDiverged { epoch, sample: i },
                other => other,
            };
            let (fp, _) = dynamics::free_fixed_point(&params, &sample.x, &starts[i], act, &free_cfg)
                .map_err(diverged)?;
            let est = estimate_gradient(&params, sample, act, cfg, &fp).map_err(diverged)?;
            norm_sum += est.grad.norm2();
            apply_update(&mut params, &est.grad, cfg);
            if !params.is_finite() {
                return Err(Error::TrainingDiverged { epoch, sample: i });
            }
            if cfg.persistent_state {
                starts[i] = fp.into_state();
            }
        }
        let (cost, acc) = evaluate(&params, ds, act, &cfg.relaxation)?;
        log.mean_cost.push(cost);
        log.accuracy.push(acc);
        log.grad_norm.push(norm_sum / ds.len() as f64);
    }
    Ok((params, log))
}

pub const CHECKPOINT_MAGIC: &str = "fpgrad-checkpoint v1";

/// Weights plus everything needed to rebuild and resume the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: Params,
    pub shape: NetworkShape,
    pub activation: Activation,
    pub epochs: usize,
}

/// C99-style hexadecimal float, exact for every finite `f64`.
pub fn format_hexfloat(v: f64) -> String {
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let frac = format!("{mant:013x}");
    let frac = frac.trim_end_matches('0');
    let dot = if frac.is_empty() { "" } else { "." };
    format!("{sign}0x{lead}{dot}{frac}p{e:+}")
}

/// Inverse of [`format_hexfloat`]; also accepts plain decimal.
pub fn parse_hexfloat(text: &str) -> Option<f64> {
    let t = text.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) else {
        return t.parse::<f64>().ok().filter(|v| v.is_finite());
    };
    let (mantissa, exp) = hex.split_once(['p', 'P'])?;
    let exp: i64 = exp.parse().ok()?;
    let (lead, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if frac.len() > 13 || !frac.chars().all(|c| c.is_ascii_hexdigit()) {
        return None;
    }
    let frac_bits = if frac.is_empty() {
        0
    } else {
        u64::from_str_radix(frac, 16).ok()? << (4 * (13 - frac.len()))
    };
    let magnitude = match lead {
        "1" if (-1022..=1023).contains(&exp) => ((exp + 1023) as u64) << 52 | frac_bits,
        "0" if frac_bits == 0 => 0,
        "0" if exp == -1022 => frac_bits,
        _ => return None,
    };
    let v = f64::from_bits(magnitude);
    Some(if neg { -v } else { v })
}

impl Checkpoint {
    pub fn new(params: Params, activation: Activation, epochs: usize) -> Result<Self> {
        let shape = params.shape()?;
        Ok(Self {
            params,
            shape,
            activation,
            epochs,
        })
    }

    pub fn to_text(&self) -> Result<String> {
        if !self.params.is_finite() {
            return Err(Error::Checkpoint("refusing to save non-finite weights".into()));
        }
        let mut out = String::new();
        let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
        let _ = writeln!(out, "shape={}", self.shape);
        let _ = writeln!(out, "activation={}", self.activation);
        let _ = writeln!(out, "format=hexfloat");
        let _ = writeln!(out, "epochs={}", self.epochs);
        for (k, w) in self.params.weights.iter().enumerate() {
            let _ = writeln!(out, "[W{k} {}x{}]", w.rows(), w.cols());
            for i in 0..w.rows() {
                let row: Vec<String> = w.row(i).iter().map(|&v| format_hexfloat(v)).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let corrupt = |line: usize, msg: &str| Error::Checkpoint(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Checkpoint(format!("truncated before {what}")));

        let (_, magic) = next("version line")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!(
                "unsupported version line `{magic}` (expected `{CHECKPOINT_MAGIC}`)"
            )));
        }
        let mut header = |key: &str| -> Result<String> {
            let (n, line) = next(key)?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| corrupt(n, &format!("expected `{key}=`")))
        };
        let shape: NetworkShape = header("shape")?.parse()?;
        let activation: Activation = header("activation")?.parse()?;
        let format = header("format")?;
        if format != "hexfloat" && format != "decimal" {
            return Err(Error::Checkpoint(format!("unknown number format `{format}`")));
        }
        let epochs = header("epochs")?
            .parse()
            .map_err(|_| Error::Checkpoint("malformed epochs".into()))?;

        let mut weights = Vec::with_capacity(shape.num_layers());
        for k in 0..shape.num_layers() {
            let rows = shape.layer_dims[k];
            let cols = shape.downstream_dim(k);
            let (n, section) = next("weight section")?;
            let dims = section
                .strip_prefix(&format!("[W{k} "))
                .and_then(|r| r.strip_suffix(']'))
                .and_then(|r| r.split_once('x'))
                .and_then(|(r, c)| Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?)))
                .ok_or_else(|| corrupt(n, &format!("expected section header for W{k}")))?;
            if dims.0 != rows {
                return Err(Error::Shape {
                    what: format!("checkpoint W{k} rows"),
                    expected: rows,
                    got: dims.0,
                });
            }
            if dims.1 != cols {
                return Err(Error::Shape {
                    what: format!("checkpoint W{k} columns"),
                    expected: cols,
                    got: dims.1,
                });
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (n, line) = next("weight row")?;
                let row = line
                    .split_whitespace()
                    .map(parse_hexfloat)
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| corrupt(n, "malformed number"))?;
                if row.len() != cols {
                    return Err(corrupt(n, &format!("expected {cols} values, found {}", row.len())));
                }
                data.extend(row);
            }
            weights.push(Matrix::from_vec(rows, cols, data));
        }
        if let Some((n, _)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(corrupt(n, "unexpected trailing content"));
        }
        Ok(Self {
            params: Params { weights },
            shape,
            activation,
            epochs,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

pub fn save_checkpoint(params: &Params, act: Activation, path: &Path) -> Result<()> {
    Checkpoint::new(params.clone(), act, 0)?.save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<(Params, NetworkShape, Activation)> {
    let c = Checkpoint::load(path)?;
    Ok((c.params, c.shape, c.activation))
}

#[cfg(test)]
mod tests {
    use super::*;

    const XOR: &str = "x0,x1,y0\n0,0,0\n0,1,1\n1,0,1\n1,1,0\n";

    #[test]
    fn parses_xor() {
        let ds = parse_dataset(XOR, "xor").unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!((ds.input_dim(), ds.output_dim()), (2, 1));
        assert_eq!(ds.samples[3].x, vec![1.0, 1.0]);
        assert!(ds.is_classification());
    }

    #[test]
    fn empty_and_header_only_are_errors() {
        assert!(parse_dataset("", "e").is_err());
        assert!(parse_dataset("x0,y0\n", "e").is_err());
    }

    #[test]
    fn malformed_number_reports_line() {
        let err = parse_dataset("x0,x1,y0\n0,0,0\n0,zz,1\n", "bad").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_dataset("x0,x1,y0\n0,0,0\n1,1\n", "bad").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(parse_dataset("x0,x2,y0\n0,0,0\n", "h").is_err());
        assert!(parse_dataset("x0,x1\n0,0\n", "h").is_err());
    }

    #[test]
    fn shape_check() {
        let ds = parse_dataset(XOR, "xor").unwrap();
        assert!(ds.check(&NetworkShape::new(2, vec![1, 4]).unwrap()).is_ok());
        assert!(ds.check(&NetworkShape::new(3, vec![1, 4]).unwrap()).is_err());
        assert!(ds.check(&NetworkShape::new(2, vec![2, 4]).unwrap()).is_err());
    }

    #[test]
    fn config_validation() {
        let shape = NetworkShape::new(2, vec![1, 4]).unwrap();
        let ok = TrainConfig::default();
        assert!(ok.validate(&shape).is_ok());
        let bad_lr = TrainConfig {
            learning_rates: vec![0.1, 0.1, 0.1],
            ..ok.clone()
        };
        assert!(bad_lr.validate(&shape).is_err());
        let neg_lr = TrainConfig {
            learning_rates: vec![-0.1],
            ..ok.clone()
        };
        assert!(neg_lr.validate(&shape).is_err());
        let trunc = TrainConfig {
            method: TrainMethod::EqpropTruncated,
            ..ok.clone()
        };
        assert!(trunc.validate(&shape).is_err());
        let rbp_trunc = TrainConfig {
            method: TrainMethod::Rbp,
            truncation_steps: Some(3),
            ..ok.clone()
        };
        assert!(rbp_trunc.validate(&shape).is_err());
        let zero_beta = TrainConfig { beta: 0.0, ..ok };
        assert!(zero_beta.validate(&shape).is_err());
    }

    #[test]
    fn zero_weights_predict_zero() {
        let shape = NetworkShape::new(2, vec![1, 3]).unwrap();
        let out = predict(&Params::zeros(&shape), &[1.0, -1.0], Activation::Logistic, &RelaxationConfig::default())
            .unwrap();
        assert_eq!(out, vec![0.0]);
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let ds = parse_dataset(XOR, "xor").unwrap();
        let shape = NetworkShape::new(2, vec![1, 3]).unwrap();
        let cfg = TrainConfig {
            learning_rates: vec![0.0],
            epochs: 3,
            seed: 7,
            ..Default::default()
        };
        let (p, log) = sgd_train(&ds, &shape, Activation::Tanh, &cfg).unwrap();
        assert!(p.bit_eq(&initial_params(&shape, 7)));
        assert_eq!(log.len(), 3);
        assert!(log.mean_cost.iter().all(|&c| c == log.mean_cost[0]));
    }

    #[test]
    fn epoch_order_is_a_seeded_permutation() {
        let a = epoch_order(3, 5, 10);
        assert_eq!(a, epoch_order(3, 5, 10));
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        assert_ne!(epoch_order(3, 5, 10), epoch_order(3, 6, 10));
    }

    #[test]
    fn hexfloat_known_values() {
        assert_eq!(format_hexfloat(1.0), "0x1p+0");
        assert_eq!(format_hexfloat(-0.5), "-0x1p-1");
        assert_eq!(format_hexfloat(0.1), "0x1.999999999999ap-4");
        assert_eq!(format_hexfloat(0.0), "0x0p+0");
        assert_eq!(format_hexfloat(f64::MIN_POSITIVE / 4.0), "0x0.4p-1022");
        assert_eq!(parse_hexfloat("0x1.8p+1"), Some(3.0));
        assert_eq!(parse_hexfloat("0.25"), Some(0.25));
        assert_eq!(parse_hexfloat("0x2p+0"), None);
        for v in [0.1, -3.75e-300, 5e-324, f64::MAX, -0.0, 1.0 / 3.0] {
            assert_eq!(parse_hexfloat(&format_hexfloat(v)).unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn checkpoint_errors() {
        let shape = NetworkShape::new(2, vec![1, 2]).unwrap();
        let c = Checkpoint::new(Params::glorot(&shape, &mut ChaCha8Rng::seed_from_u64(1)), Activation::Tanh, 4).unwrap();
        let text = c.to_text().unwrap();
        assert_eq!(Checkpoint::parse(&text).unwrap(), c);

        let wrong_version = text.replace("v1", "v9");
        assert!(matches!(Checkpoint::parse(&wrong_version), Err(Error::Checkpoint(_))));
        let wrong_shape = text.replace("shape=2:1,2", "shape=2:1,3");
        assert!(matches!(Checkpoint::parse(&wrong_shape), Err(Error::Shape { .. })));
        let truncated: String = text.lines().take(7).collect::<Vec<_>>().join("\n");
        assert!(matches!(Checkpoint::parse(&truncated), Err(Error::Checkpoint(_))));
        let garbled = text.replacen("0x", "0q", 1);
        assert!(Checkpoint::parse(&garbled).is_err());
    }
}
