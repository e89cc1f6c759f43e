//! Layered Hopfield energy, quadratic cost and their analytic derivatives.
//!
//! # Layer numbering
//!
//! Layers are numbered **from the output towards the input**: `s_0` is the
//! read-out layer (same width as the target), `s_{L-1}` is the hidden layer
//! adjacent to the clamped input `x`. Weight block `W_k` has shape
//! `d_k × d_{k+1}` and couples layer `k` to layer `k+1`, with `d_L` standing
//! for the input width, so `W_{L-1}` connects the innermost hidden layer to
//! `x`. This is the reverse of the usual input-to-output convention.
//!
//! With rates `r_k = ρ(s_k)` (and `r_L = ρ(x)`) the energy is
//!
//! ```text
//! E(s) = ½ Σ_k ‖s_k‖² − Σ_k r_kᵀ · W_k · r_{k+1}
//! ```
//!
//! and the cost is `C(s) = ½ ‖y − s_0‖²`. There are no bias parameters.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{FlatVector, Matrix};

/// Input width and per-layer widths `[d_0, …, d_{L-1}]`, output layer first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub input_dim: usize,
    pub layer_dims: Vec<usize>,
}

impl NetworkShape {
    pub fn new(input_dim: usize, layer_dims: Vec<usize>) -> Result<Self> {
        let shape = Self {
            input_dim,
            layer_dims,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.is_empty() {
            return Err(Error::InvalidArgument(
                "network needs at least one layer".into(),
            ));
        }
        if self.input_dim == 0 || self.layer_dims.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn output_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// Width of the layer downstream of `k`, i.e. `d_{k+1}` with `d_L = input_dim`.
    pub fn downstream_dim(&self, k: usize) -> usize {
        self.layer_dims.get(k + 1).copied().unwrap_or(self.input_dim)
    }

    pub fn num_params(&self) -> usize {
        (0..self.num_layers())
            .map(|k| self.layer_dims[k] * self.downstream_dim(k))
            .sum()
    }

    pub fn num_units(&self) -> usize {
        self.layer_dims.iter().sum()
    }
}

impl fmt::Display for NetworkShape {
    /// `input:d_0,d_1,…`, as written in checkpoint headers.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.input_dim)?;
        for (i, d) in self.layer_dims.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for NetworkShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("malformed shape `{s}`"));
        let (input, layers) = s.split_once(':').ok_or_else(bad)?;
        let input_dim = input.trim().parse().map_err(|_| bad())?;
        let layer_dims = layers
            .split(',')
            .map(|d| d.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(input_dim, layer_dims)
    }
}

/// Pointwise nonlinearity mapping a voltage to a firing rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Logistic,
    Tanh,
    /// `clamp(v, 0, 1)`. Usable for relaxation and training; has no second
    /// derivative, so Hessian-vector products reject it.
    HardSigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Logistic => "logistic",
            Activation::Tanh => "tanh",
            Activation::HardSigmoid => "hard-sigmoid",
        }
    }

    pub fn rate(self, v: f64) -> f64 {
        match self {
            Activation::Logistic => 1.0 / (1.0 + (-v).exp()),
            Activation::Tanh => v.tanh(),
            Activation::HardSigmoid => v.clamp(0.0, 1.0),
        }
    }

    pub fn first(self, v: f64) -> f64 {
        match self {
            Activation::Logistic => {
                let r = self.rate(v);
                r * (1.0 - r)
            }
            Activation::Tanh => {
                let t = v.tanh();
                1.0 - t * t
            }
            Activation::HardSigmoid => {
                if v > 0.0 && v < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn second(self, v: f64) -> Option<f64> {
        match self {
            Activation::Logistic => {
                let r = self.rate(v);
                Some(r * (1.0 - r) * (1.0 - 2.0 * r))
            }
            Activation::Tanh => {
                let t = v.tanh();
                Some(-2.0 * t * (1.0 - t * t))
            }
            Activation::HardSigmoid => None,
        }
    }

    pub fn is_twice_differentiable(self) -> bool {
        self.second(0.5).is_some()
    }

    fn require_second(self) -> Result<()> {
        if self.is_twice_differentiable() {
            Ok(())
        } else {
            Err(Error::UnsupportedActivation(self.name()))
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Activation::Logistic),
            "tanh" => Ok(Activation::Tanh),
            "hard-sigmoid" => Ok(Activation::HardSigmoid),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

/// Per-layer membrane voltages, output layer first.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub layers: Vec<Vec<f64>>,
}

impl State {
    pub fn zeros(shape: &NetworkShape) -> Self {
        Self {
            layers: shape.layer_dims.iter().map(|&d| vec![0.0; d]).collect(),
        }
    }

    pub fn from_layers(layers: Vec<Vec<f64>>) -> Self {
        Self { layers }
    }

    /// Entries drawn uniformly from `[-scale, scale]`.
    pub fn random(shape: &NetworkShape, rng: &mut impl Rng, scale: f64) -> Self {
        Self {
            layers: shape
                .layer_dims
                .iter()
                .map(|&d| (0..d).map(|_| rng.random_range(-scale..=scale)).collect())
                .collect(),
        }
    }

    pub fn output(&self) -> &[f64] {
        &self.layers[0]
    }

    pub fn check(&self, shape: &NetworkShape) -> Result<()> {
        if self.layers.len() != shape.num_layers() {
            return Err(shape_err("state layer count", shape.num_layers(), self.layers.len()));
        }
        for (k, (layer, &d)) in self.layers.iter().zip(&shape.layer_dims).enumerate() {
            if layer.len() != d {
                return Err(shape_err(format!("state layer {k}"), d, layer.len()));
            }
        }
        Ok(())
    }
}

impl FlatVector for State {
    fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flatten()
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flatten()
    }
}

/// Weight blocks `W_0 … W_{L-1}`; `W_k` is `d_k × d_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub weights: Vec<Matrix>,
}

impl Params {
    pub fn zeros(shape: &NetworkShape) -> Self {
        Self {
            weights: (0..shape.num_layers())
                .map(|k| Matrix::zeros(shape.layer_dims[k], shape.downstream_dim(k)))
                .collect(),
        }
    }

    /// Checks internal consistency and returns the shape implied by the blocks.
    pub fn shape(&self) -> Result<NetworkShape> {
        if self.weights.is_empty() {
            return Err(Error::InvalidArgument("params hold no weight blocks".into()));
        }
        for k in 0..self.weights.len() - 1 {
            let (cols, next_rows) = (self.weights[k].cols(), self.weights[k + 1].rows());
            if cols != next_rows {
                return Err(shape_err(format!("weight block {k} columns"), next_rows, cols));
            }
        }
        let layer_dims = self.weights.iter().map(Matrix::rows).collect();
        let input_dim = self.weights.last().map(Matrix::cols).unwrap_or(0);
        NetworkShape::new(input_dim, layer_dims)
    }

    pub fn check(&self, shape: &NetworkShape) -> Result<()> {
        if self.weights.len() != shape.num_layers() {
            return Err(shape_err("weight block count", shape.num_layers(), self.weights.len()));
        }
        for (k, w) in self.weights.iter().enumerate() {
            let (r, c) = (shape.layer_dims[k], shape.downstream_dim(k));
            if w.rows() != r {
                return Err(shape_err(format!("weight block {k} rows"), r, w.rows()));
            }
            if w.cols() != c {
                return Err(shape_err(format!("weight block {k} columns"), c, w.cols()));
            }
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weights: self
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
        }
    }

    /// Glorot-uniform initialisation: block `k` uniform in `±√(6/(d_k + d_{k+1}))`.
    pub fn glorot(shape: &NetworkShape, rng: &mut impl Rng) -> Self {
        Self {
            weights: (0..shape.num_layers())
                .map(|k| {
                    let (r, c) = (shape.layer_dims[k], shape.downstream_dim(k));
                    let limit = (6.0 / (r + c) as f64).sqrt();
                    Matrix::from_fn(r, c, |_, _| rng.random_range(-limit..=limit))
                })
                .collect(),
        }
    }

    /// Entries drawn uniformly from `[-scale, scale]`.
    pub fn random(shape: &NetworkShape, rng: &mut impl Rng, scale: f64) -> Self {
        Self {
            weights: (0..shape.num_layers())
                .map(|k| {
                    Matrix::from_fn(shape.layer_dims[k], shape.downstream_dim(k), |_, _| {
                        rng.random_range(-scale..=scale)
                    })
                })
                .collect(),
        }
    }
}

impl FlatVector for Params {
    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flat_map(|w| w.as_slice())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().flat_map(|w| w.as_mut_slice())
    }
}

/// One `(x, y)` data point.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Sample {
    pub fn check(&self, shape: &NetworkShape) -> Result<()> {
        if self.x.len() != shape.input_dim {
            return Err(shape_err("input x", shape.input_dim, self.x.len()));
        }
        if self.y.len() != shape.output_dim() {
            return Err(shape_err("target y", shape.output_dim(), self.y.len()));
        }
        Ok(())
    }
}

/// A reproducible random problem: weights, one sample and an activation.
#[derive(Debug, Clone)]
pub struct Instance {
    pub shape: NetworkShape,
    pub params: Params,
    pub sample: Sample,
    pub activation: Activation,
}

impl Instance {
    /// Weight scale used by [`Instance::seeded`].
    pub const WEIGHT_SCALE: f64 = 1.5;

    /// Weights uniform in `±1.5`, inputs and targets uniform in `±1`.
    pub fn seeded(shape: &NetworkShape, activation: Activation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = Params::random(shape, &mut rng, Self::WEIGHT_SCALE);
        let x = (0..shape.input_dim)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let y = (0..shape.output_dim())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        Self {
            shape: shape.clone(),
            params,
            sample: Sample { x, y },
            activation,
        }
    }
}

fn check_inputs(params: &Params, x: &[f64], s: &State) -> Result<NetworkShape> {
    let shape = params.shape()?;
    if x.len() != shape.input_dim {
        return Err(shape_err("input x", shape.input_dim, x.len()));
    }
    s.check(&shape)?;
    Ok(shape)
}

fn check_target(shape: &NetworkShape, y: &[f64]) -> Result<()> {
    if y.len() != shape.output_dim() {
        return Err(shape_err("target y", shape.output_dim(), y.len()));
    }
    Ok(())
}

/// Rates `[ρ(s_0), …, ρ(s_{L-1}), ρ(x)]`.
fn rates(x: &[f64], s: &State, act: Activation) -> Vec<Vec<f64>> {
    s.layers
        .iter()
        .map(|l| l.as_slice())
        .chain(std::iter::once(x))
        .map(|l| l.iter().map(|&v| act.rate(v)).collect())
        .collect()
}

fn map_layer(layer: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    layer.iter().map(|&v| f(v)).collect()
}

/// Net input to layer `k` from both neighbours: `W_k r_{k+1} + W_{k-1}ᵀ r_{k-1}`.
fn field(params: &Params, r: &[Vec<f64>], k: usize) -> Vec<f64> {
    let mut f = params.weights[k].matvec(&r[k + 1]);
    if k > 0 {
        let up = params.weights[k - 1].matvec_t(&r[k - 1]);
        for (a, b) in f.iter_mut().zip(up) {
            *a += b;
        }
    }
    f
}

/// Hopfield energy `E(s)`.
pub fn energy(params: &Params, x: &[f64], s: &State, act: Activation) -> Result<f64> {
    check_inputs(params, x, s)?;
    let r = rates(x, s, act);
    let mut e = 0.5 * s.values().fold(0.0, |acc, v| acc + v * v);
    for (k, w) in params.weights.iter().enumerate() {
        e -= crate::linalg::dot(&r[k], &w.matvec(&r[k + 1]));
    }
    Ok(e)
}

/// `∂E/∂s`: `s_k − ρ′(s_k) ⊙ (W_k r_{k+1} + W_{k-1}ᵀ r_{k-1})`.
pub fn grad_s_energy(params: &Params, x: &[f64], s: &State, act: Activation) -> Result<State> {
    check_inputs(params, x, s)?;
    let r = rates(x, s, act);
    let layers = (0..s.layers.len())
        .map(|k| {
            let f = field(params, &r, k);
            s.layers[k]
                .iter()
                .zip(f)
                .map(|(&v, fi)| v - act.first(v) * fi)
                .collect()
        })
        .collect();
    Ok(State { layers })
}

/// `∂E/∂W_k = −ρ(s_k) · ρ(s_{k+1})ᵀ`, with `ρ(x)` for the last block.
pub fn grad_theta_energy(params: &Params, x: &[f64], s: &State, act: Activation) -> Result<Params> {
    check_inputs(params, x, s)?;
    let r = rates(x, s, act);
    Ok(Params {
        weights: (0..params.weights.len())
            .map(|k| Matrix::neg_outer(&r[k], &r[k + 1]))
            .collect(),
    })
}

/// Quadratic cost `½ ‖y − s_0‖²`.
pub fn cost(y: &[f64], s: &State) -> Result<f64> {
    let out = s.layers.first().map(Vec::as_slice).unwrap_or(&[]);
    if out.len() != y.len() {
        return Err(shape_err("target y", out.len(), y.len()));
    }
    Ok(0.5
        * y.iter()
            .zip(out)
            .fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b)))
}

/// `∂C/∂s`: `s_0 − y` on the output layer, zero elsewhere.
pub fn grad_s_cost(y: &[f64], s: &State) -> Result<State> {
    let out = s.layers.first().map(Vec::as_slice).unwrap_or(&[]);
    if out.len() != y.len() {
        return Err(shape_err("target y", out.len(), y.len()));
    }
    let mut g = State {
        layers: s.layers.iter().map(|l| vec![0.0; l.len()]).collect(),
    };
    for ((gi, si), yi) in g.layers[0].iter_mut().zip(out).zip(y) {
        *gi = si - yi;
    }
    Ok(g)
}

/// `∂C/∂θ`, identically zero for the quadratic cost.
pub fn grad_theta_cost(params: &Params, y: &[f64], s: &State) -> Result<Params> {
    let shape = params.shape()?;
    s.check(&shape)?;
    check_target(&shape, y)?;
    Ok(params.zeros_like())
}

/// `∂(E + βC)/∂s`, computed as `grad_s_energy + β · grad_s_cost`.
pub fn grad_s_augmented(
    params: &Params,
    x: &[f64],
    y: &[f64],
    s: &State,
    beta: f64,
    act: Activation,
) -> Result<State> {
    check_beta(beta)?;
    let mut g = grad_s_energy(params, x, s, act)?;
    g.axpy(beta, &grad_s_cost(y, s)?);
    Ok(g)
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "influence parameter must be finite and non-negative, got {beta}"
        )));
    }
    Ok(())
}

/// Hessian-vector product `(∂²E/∂s²) · v`.
pub fn hvp_ss(params: &Params, x: &[f64], s: &State, v: &State, act: Activation) -> Result<State> {
    act.require_second()?;
    let shape = check_inputs(params, x, s)?;
    v.check(&shape)?;
    let r = rates(x, s, act);
    let n = s.layers.len();
    // ρ′(s_k) ⊙ v_k, reused by both neighbours.
    let dv: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            s.layers[k]
                .iter()
                .zip(&v.layers[k])
                .map(|(&si, &vi)| act.first(si) * vi)
                .collect()
        })
        .collect();
    let layers = (0..n)
        .map(|k| {
            let f = field(params, &r, k);
            let mut coupled = vec![0.0; s.layers[k].len()];
            if k + 1 < n {
                coupled = params.weights[k].matvec(&dv[k + 1]);
            }
            if k > 0 {
                for (c, u) in coupled.iter_mut().zip(params.weights[k - 1].matvec_t(&dv[k - 1])) {
                    *c += u;
                }
            }
            (0..s.layers[k].len())
                .map(|i| {
                    let si = s.layers[k][i];
                    let vi = v.layers[k][i];
                    let curv = act.second(si).unwrap_or(0.0);
                    vi - curv * f[i] * vi - act.first(si) * coupled[i]
                })
                .collect()
        })
        .collect();
    Ok(State { layers })
}

/// Mixed second derivative `(∂²E/∂θ∂s) · v`.
///
/// Block `k` is `−(ρ′(s_k) ⊙ v_k) ρ(s_{k+1})ᵀ − ρ(s_k) (ρ′(s_{k+1}) ⊙ v_{k+1})ᵀ`; the
/// second term is absent for the last block because the input is clamped.
pub fn hvp_theta_s(
    params: &Params,
    x: &[f64],
    s: &State,
    v: &State,
    act: Activation,
) -> Result<Params> {
    let shape = check_inputs(params, x, s)?;
    v.check(&shape)?;
    let r = rates(x, s, act);
    let n = s.layers.len();
    let dv: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            s.layers[k]
                .iter()
                .zip(&v.layers[k])
                .map(|(&si, &vi)| act.first(si) * vi)
                .collect()
        })
        .collect();
    let weights = (0..n)
        .map(|k| {
            let mut block = Matrix::neg_outer(&dv[k], &r[k + 1]);
            if k + 1 < n {
                let other = Matrix::neg_outer(&r[k], &dv[k + 1]);
                for (a, b) in block.as_mut_slice().iter_mut().zip(other.as_slice()) {
                    *a += b;
                }
            }
            block
        })
        .collect();
    Ok(Params { weights })
}

/// Rates of a single layer; exposed for reporting.
pub fn layer_rates(layer: &[f64], act: Activation) -> Vec<f64> {
    map_layer(layer, |v| act.rate(v))
}
