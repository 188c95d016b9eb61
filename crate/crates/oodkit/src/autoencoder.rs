//! Fully-connected autoencoder: the feature-learning step of the pipeline.
//!
//! A trained model maps inputs to a narrow latent layer; the latent
//! activations (the activation trace) are the features every scorer
//! consumes. Training is plain mini-batch gradient descent on mean squared
//! reconstruction error and is bit-deterministic for a fixed seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio::{self, Reader};
use crate::error::{Error, Result};
use crate::linalg::{FeatureMatrix, RealVector};

const MODEL_MAGIC: &[u8] = b"OODKIT-AE";
const MODEL_VERSION: u32 = 1;

/// Per-neuron nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the post-activation value.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Identity => 2,
        }
    }

    fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidParameter(format!(
                "unknown activation '{other}' (expected relu|sigmoid|identity)"
            ))),
        }
    }
}

/// Width and activation of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation) -> Self {
        Self { width, activation }
    }
}

/// Gradient-descent flavor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    /// Conventional Adam defaults.
    pub fn adam_default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Training hyperparameters. Everything that affects the parameter
/// trajectory is in here, so (model, data, config) fully determines the
/// result.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub shuffle: bool,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam_default(),
            seed: 0,
            shuffle: true,
        }
    }
}

/// One forward pass: every layer's post-activation values, in layer order.
/// The last entry is the reconstruction.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub activations: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn reconstruction(&self) -> &[f64] {
        self.activations.last().expect("at least one layer")
    }
}

/// Parameter gradients matching the model's weight/bias shapes.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<FeatureMatrix>,
    pub biases: Vec<RealVector>,
}

/// Fully-connected autoencoder. `layers` covers every layer after the
/// input, including the final reconstruction layer whose width equals
/// `input_dim`; `latent_index` points at the bottleneck.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    /// weights[l] has shape (fan_in x fan_out) for layer l
    pub weights: Vec<FeatureMatrix>,
    pub biases: Vec<RealVector>,
    pub latent_index: usize,
}

impl AutoencoderModel {
    /// Seeded Glorot-uniform initialization.
    ///
    /// `hidden` lists the layers between input and reconstruction and must
    /// be symmetric around the bottleneck (odd length, palindromic widths,
    /// center narrower than `input_dim`). The reconstruction layer of width
    /// `input_dim` with `output_activation` is appended automatically.
    pub fn init(
        input_dim: usize,
        hidden: &[LayerSpec],
        output_activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidParameter("input_dim must be >= 1".into()));
        }
        if hidden.is_empty() || hidden.len() % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "hidden layer list must have odd length (encoder/bottleneck/decoder), got {}",
                hidden.len()
            )));
        }
        let n = hidden.len();
        for i in 0..n / 2 {
            if hidden[i].width != hidden[n - 1 - i].width {
                return Err(Error::InvalidParameter(format!(
                    "hidden widths not symmetric: layer {} is {} but layer {} is {}",
                    i,
                    hidden[i].width,
                    n - 1 - i,
                    hidden[n - 1 - i].width
                )));
            }
        }
        let latent_index = n / 2;
        let bottleneck = hidden[latent_index].width;
        if bottleneck == 0 {
            return Err(Error::InvalidParameter("zero-width layer".into()));
        }
        if bottleneck >= input_dim {
            return Err(Error::InvalidParameter(format!(
                "bottleneck width {bottleneck} must be narrower than input_dim {input_dim}"
            )));
        }

        let mut layers = hidden.to_vec();
        layers.push(LayerSpec::new(input_dim, output_activation));

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layers.len());
        let mut biases = Vec::with_capacity(layers.len());
        let mut fan_in = input_dim;
        for spec in &layers {
            let fan_out = spec.width;
            let scale = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-scale..scale))
                .collect();
            weights.push(FeatureMatrix::new(fan_in, fan_out, data)?);
            biases.push(RealVector::new(vec![0.0; fan_out])?);
            fan_in = fan_out;
        }

        Ok(Self {
            input_dim,
            layers,
            weights,
            biases,
            latent_index,
        })
    }

    /// Raw constructor for explicit parameters (tests, file loading).
    /// Validates shape chaining and finiteness but, unlike `init`, puts no
    /// symmetry constraint on the architecture.
    pub fn from_parts(
        input_dim: usize,
        layers: Vec<LayerSpec>,
        weights: Vec<FeatureMatrix>,
        biases: Vec<RealVector>,
        latent_index: usize,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("model needs at least one layer".into()));
        }
        if weights.len() != layers.len() || biases.len() != layers.len() {
            return Err(Error::InvalidParameter(
                "weights/biases count must match layer count".into(),
            ));
        }
        if latent_index >= layers.len() {
            return Err(Error::InvalidParameter(format!(
                "latent_index {latent_index} out of range for {} layers",
                layers.len()
            )));
        }
        if layers.last().unwrap().width != input_dim {
            return Err(Error::DimensionMismatch {
                context: "final layer must reconstruct the input",
                expected: input_dim,
                got: layers.last().unwrap().width,
            });
        }
        let mut fan_in = input_dim;
        for (l, spec) in layers.iter().enumerate() {
            if weights[l].rows() != fan_in || weights[l].cols() != spec.width {
                return Err(Error::InvalidParameter(format!(
                    "weight shape for layer {l} is {}x{}, expected {}x{}",
                    weights[l].rows(),
                    weights[l].cols(),
                    fan_in,
                    spec.width
                )));
            }
            if biases[l].dim() != spec.width {
                return Err(Error::InvalidParameter(format!(
                    "bias length for layer {l} is {}, expected {}",
                    biases[l].dim(),
                    spec.width
                )));
            }
            fan_in = spec.width;
        }
        Ok(Self {
            input_dim,
            layers,
            weights,
            biases,
            latent_index,
        })
    }

    pub fn latent_width(&self) -> usize {
        self.layers[self.latent_index].width
    }

    /// Affine-then-activation through every layer.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardPass> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "forward input dimensionality",
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut current: &[f64] = x;
        for (l, spec) in self.layers.iter().enumerate() {
            let w = &self.weights[l];
            let b = self.biases[l].as_slice();
            let mut out = vec![0.0; spec.width];
            for (j, o) in out.iter_mut().enumerate() {
                let mut acc = b[j];
                for (i, &xi) in current.iter().enumerate() {
                    acc += xi * w.get(i, j);
                }
                *o = spec.activation.apply(acc);
            }
            activations.push(out);
            current = activations.last().unwrap();
        }
        Ok(ForwardPass { activations })
    }

    /// Latent-layer activations for every row of `data`.
    pub fn encode(&self, data: &FeatureMatrix) -> Result<FeatureMatrix> {
        if data.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "encode input dimensionality",
                expected: self.input_dim,
                got: data.cols(),
            });
        }
        let mut out = FeatureMatrix::zeros(data.rows(), self.latent_width());
        for (r, row) in data.row_iter().enumerate() {
            let pass = self.forward(row)?;
            let latent = &pass.activations[self.latent_index];
            for (c, &v) in latent.iter().enumerate() {
                out.set(r, c, v);
            }
        }
        Ok(out)
    }

    /// Mean squared reconstruction error over `data`, averaged over rows
    /// and dimensions.
    pub fn loss(&self, data: &FeatureMatrix) -> Result<f64> {
        let indices: Vec<usize> = (0..data.rows()).collect();
        Ok(self.batch_loss_gradients(data, &indices, false)?.0)
    }

    /// Loss plus analytic parameter gradients over all rows of `data`.
    pub fn loss_gradients(&self, data: &FeatureMatrix) -> Result<(f64, Gradients)> {
        let indices: Vec<usize> = (0..data.rows()).collect();
        let (loss, grads) = self.batch_loss_gradients(data, &indices, true)?;
        Ok((loss, grads.expect("gradients requested")))
    }

    fn batch_loss_gradients(
        &self,
        data: &FeatureMatrix,
        batch: &[usize],
        want_grads: bool,
    ) -> Result<(f64, Option<Gradients>)> {
        if data.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "training data dimensionality",
                expected: self.input_dim,
                got: data.cols(),
            });
        }
        let n_layers = self.layers.len();
        let mut grads = if want_grads {
            Some(Gradients {
                weights: self
                    .weights
                    .iter()
                    .map(|w| FeatureMatrix::zeros(w.rows(), w.cols()))
                    .collect(),
                biases: self
                    .layers
                    .iter()
                    .map(|s| RealVector::new(vec![0.0; s.width]).unwrap())
                    .collect(),
            })
        } else {
            None
        };

        let scale = 1.0 / (batch.len() as f64 * self.input_dim as f64);
        let mut loss = 0.0;
        for &r in batch {
            let x = data.row(r);
            let pass = self.forward(x)?;
            let recon = pass.reconstruction();
            for (y, t) in recon.iter().zip(x) {
                let e = y - t;
                loss += e * e * scale;
            }
            let Some(g) = grads.as_mut() else { continue };

            // delta for the output layer
            let mut delta: Vec<f64> = recon
                .iter()
                .zip(x)
                .map(|(y, t)| {
                    2.0 * (y - t) * scale * self.layers[n_layers - 1]
                        .activation
                        .derivative_from_output(*y)
                })
                .collect();

            for l in (0..n_layers).rev() {
                let input: &[f64] = if l == 0 {
                    x
                } else {
                    &pass.activations[l - 1]
                };
                let gw = &mut g.weights[l];
                for (i, &xi) in input.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    for (j, &dj) in delta.iter().enumerate() {
                        let v = gw.get(i, j) + xi * dj;
                        gw.set(i, j, v);
                    }
                }
                for (j, &dj) in delta.iter().enumerate() {
                    let v = g.biases[l].as_slice()[j] + dj;
                    g.biases[l].as_mut_slice()[j] = v;
                }
                if l > 0 {
                    let w = &self.weights[l];
                    let prev = &pass.activations[l - 1];
                    let mut next_delta = vec![0.0; prev.len()];
                    for (i, nd) in next_delta.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for (j, &dj) in delta.iter().enumerate() {
                            acc += w.get(i, j) * dj;
                        }
                        *nd = acc
                            * self.layers[l - 1]
                                .activation
                                .derivative_from_output(prev[i]);
                    }
                    delta = next_delta;
                }
            }
        }
        Ok((loss, grads))
    }

    /// Mini-batch training on mean squared reconstruction error.
    ///
    /// Returns the trained model and the per-epoch mean loss (measured on
    /// each batch before its update). Deterministic for a fixed config.
    pub fn train(&self, data: &FeatureMatrix, cfg: &TrainConfig) -> Result<(Self, Vec<f64>)> {
        cfg.validate()?;
        if data.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "training data dimensionality",
                expected: self.input_dim,
                got: data.cols(),
            });
        }
        let mut model = self.clone();
        let mut opt = OptimizerState::new(cfg.optimizer, &model);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..data.rows()).collect();
        let mut history = Vec::with_capacity(cfg.epochs);

        for epoch in 0..cfg.epochs {
            if cfg.shuffle {
                order.shuffle(&mut rng);
            }
            let mut epoch_loss = 0.0;
            for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let (loss, grads) = model.batch_loss_gradients(data, chunk, true)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: batch_idx,
                    });
                }
                epoch_loss += loss * chunk.len() as f64;
                opt.step(&mut model, &grads.expect("gradients requested"), cfg.learning_rate);
            }
            history.push(epoch_loss / data.rows() as f64);
        }
        Ok((model, history))
    }

    /// Serializes to the versioned OODKIT-AE byte layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        binio::put_u32(&mut out, MODEL_VERSION);
        binio::put_u32(&mut out, self.input_dim as u32);
        binio::put_u32(&mut out, self.layers.len() as u32);
        for spec in &self.layers {
            binio::put_u32(&mut out, spec.width as u32);
            out.push(spec.activation.tag());
        }
        binio::put_u32(&mut out, self.latent_index as u32);
        for (w, b) in self.weights.iter().zip(&self.biases) {
            binio::put_f64s(&mut out, w.as_slice());
            binio::put_f64s(&mut out, b.as_slice());
        }
        out
    }

    /// Parses the OODKIT-AE layout, rejecting unknown versions and any
    /// shape or finiteness violation.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MODEL_MAGIC)?;
        let version = r.u32("version")?;
        if version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: MODEL_VERSION,
            });
        }
        let input_dim = r.u32("input_dim")? as usize;
        let n_layers = r.u32("layer count")? as usize;
        if n_layers == 0 || n_layers > 1024 {
            return Err(Error::MalformedFile {
                offset: r.offset(),
                message: format!("implausible layer count {n_layers}"),
            });
        }
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let width = r.u32("layer width")? as usize;
            let at = r.offset();
            let tag = r.u8("activation tag")?;
            let activation = Activation::from_tag(tag).ok_or_else(|| Error::MalformedFile {
                offset: at,
                message: format!("unknown activation tag {tag}"),
            })?;
            layers.push(LayerSpec::new(width, activation));
        }
        let latent_index = r.u32("latent index")? as usize;
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        let mut fan_in = input_dim;
        for spec in &layers {
            let w = r.f64s(fan_in * spec.width, "weights")?;
            let b = r.f64s(spec.width, "biases")?;
            weights.push(FeatureMatrix::new(fan_in, spec.width, w)?);
            biases.push(RealVector::new(b)?);
            fan_in = spec.width;
        }
        r.expect_eof()?;
        Self::from_parts(input_dim, layers, weights, biases, latent_index)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

/// Indices of the `m` latent columns with the highest mean absolute
/// activation, in ascending index order; ties go to the lower index.
pub fn select_active_neurons(latent: &FeatureMatrix, m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > latent.cols() {
        return Err(Error::InvalidParameter(format!(
            "subset size must be in 1..={}, got {m}",
            latent.cols()
        )));
    }
    let mut means = vec![0.0; latent.cols()];
    for row in latent.row_iter() {
        for (acc, v) in means.iter_mut().zip(row) {
            *acc += v.abs();
        }
    }
    let n = latent.rows() as f64;
    for acc in &mut means {
        *acc /= n;
    }
    let mut order: Vec<usize> = (0..latent.cols()).collect();
    order.sort_by(|&a, &b| {
        means[b]
            .partial_cmp(&means[a])
            .expect("means are finite")
            .then(a.cmp(&b))
    });
    let mut picked: Vec<usize> = order.into_iter().take(m).collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Latent activations restricted to `subset` columns, preserving subset
/// order.
pub fn extract_traces(
    model: &AutoencoderModel,
    data: &FeatureMatrix,
    subset: &[usize],
) -> Result<FeatureMatrix> {
    let latent = model.encode(data)?;
    latent.select_columns(subset)
}

/// Per-parameter optimizer state.
enum OptimizerState {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        t: u64,
        m_w: Vec<Vec<f64>>,
        v_w: Vec<Vec<f64>>,
        m_b: Vec<Vec<f64>>,
        v_b: Vec<Vec<f64>>,
    },
}

impl OptimizerState {
    fn new(opt: Optimizer, model: &AutoencoderModel) -> Self {
        match opt {
            Optimizer::Sgd => OptimizerState::Sgd,
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => OptimizerState::Adam {
                beta1,
                beta2,
                epsilon,
                t: 0,
                m_w: model
                    .weights
                    .iter()
                    .map(|w| vec![0.0; w.as_slice().len()])
                    .collect(),
                v_w: model
                    .weights
                    .iter()
                    .map(|w| vec![0.0; w.as_slice().len()])
                    .collect(),
                m_b: model.biases.iter().map(|b| vec![0.0; b.dim()]).collect(),
                v_b: model.biases.iter().map(|b| vec![0.0; b.dim()]).collect(),
            },
        }
    }

    fn step(&mut self, model: &mut AutoencoderModel, grads: &Gradients, lr: f64) {
        match self {
            OptimizerState::Sgd => {
                for (w, gw) in model.weights.iter_mut().zip(&grads.weights) {
                    for (p, g) in w.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                        *p -= lr * g;
                    }
                }
                for (b, gb) in model.biases.iter_mut().zip(&grads.biases) {
                    for (p, g) in b.as_mut_slice().iter_mut().zip(gb.as_slice()) {
                        *p -= lr * g;
                    }
                }
            }
            OptimizerState::Adam {
                beta1,
                beta2,
                epsilon,
                t,
                m_w,
                v_w,
                m_b,
                v_b,
            } => {
                *t += 1;
                let bc1 = 1.0 - beta1.powi(*t as i32);
                let bc2 = 1.0 - beta2.powi(*t as i32);
                let update = |params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]| {
                    for i in 0..params.len() {
                        let g = grads[i];
                        m[i] = *beta1 * m[i] + (1.0 - *beta1) * g;
                        v[i] = *beta2 * v[i] + (1.0 - *beta2) * g * g;
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        params[i] -= lr * m_hat / (v_hat.sqrt() + *epsilon);
                    }
                };
                for l in 0..model.weights.len() {
                    update(
                        model.weights[l].as_mut_slice(),
                        grads.weights[l].as_slice(),
                        &mut m_w[l],
                        &mut v_w[l],
                    );
                    update(
                        model.biases[l].as_mut_slice(),
                        grads.biases[l].as_slice(),
                        &mut m_b[l],
                        &mut v_b[l],
                    );
                }
            }
        }
    }
}
