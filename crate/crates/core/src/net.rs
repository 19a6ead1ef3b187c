//! Dense network with exact reverse-mode gradients and Adam training.
//!
//! Layers are affine maps followed by a leaky rectifier (fixed slope
//! `alpha`) or the identity. Per-dimension affine normalizers sit at the
//! input and output boundaries so callers always work in raw units (cm,
//! degrees, pad readings); the scaling constants travel with the model
//! file. Training is plain single-threaded mini-batch Adam with an l2
//! penalty and is bit-deterministic given the seed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::types::PoseBounds;

/// Per-layer nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    /// `x` for `x >= 0`, `alpha * x` otherwise.
    Leaky,
}

impl Activation {
    fn apply(&self, x: f64, alpha: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Leaky => {
                if x >= 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
        }
    }

    fn derivative(&self, x: f64, alpha: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Leaky => {
                if x >= 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
        }
    }
}

/// Per-dimension affine map between raw units and network units.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub center: Vec<f64>,
    pub half_range: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            half_range: vec![1.0; dim],
        }
    }

    /// Maps the pose box onto `[-1, 1]` per dimension.
    pub fn from_bounds(bounds: &PoseBounds) -> Self {
        Self {
            center: bounds.center().to_vec(),
            half_range: bounds.half_range().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.center.iter().zip(&self.half_range))
            .map(|(v, (c, h))| (v - c) / h)
            .collect()
    }

    pub fn denormalize(&self, internal: &[f64]) -> Vec<f64> {
        internal
            .iter()
            .zip(self.center.iter().zip(&self.half_range))
            .map(|(u, (c, h))| u * h + c)
            .collect()
    }
}

/// Parameter gradients mirroring the network shape, plus the gradient of
/// the loss with respect to the raw input vector.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input: Vec<f64>,
}

/// Mini-batch Adam settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 200,
            l2: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidSpec("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidSpec("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidSpec("betas must be in [0, 1)".into()));
        }
        if self.l2 < 0.0 {
            return Err(Error::InvalidSpec("l2 must be >= 0".into()));
        }
        Ok(())
    }
}

/// Fixed leak slope of hidden units.
pub const DEFAULT_LEAK: f64 = 0.01;

/// Dense multi-layer network.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    /// `weights[l]` is `sizes[l+1] x sizes[l]`, row-major.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activations: Vec<Activation>,
    alpha: f64,
    input_norm: Normalizer,
    output_norm: Normalizer,
    /// Forward-consistency score above which an observation is flagged as
    /// an anomaly; filled in after training from clean validation data.
    anomaly_threshold: Option<f64>,
}

impl DenseNet {
    /// Random network with leaky hidden layers and a linear output layer.
    pub fn new(sizes: &[usize], alpha: f64, seed: u64) -> Result<Self> {
        let mut activations = vec![Activation::Leaky; sizes.len().saturating_sub(1)];
        if let Some(last) = activations.last_mut() {
            *last = Activation::Identity;
        }
        Self::with_activations(sizes, &activations, alpha, seed)
    }

    /// Random network with explicit per-layer activations.
    pub fn with_activations(
        sizes: &[usize],
        activations: &[Activation],
        alpha: f64,
        seed: u64,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidSpec("need at least input and output layer".into()));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidSpec("layer sizes must be > 0".into()));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(Error::DimensionMismatch {
                expected: sizes.len() - 1,
                got: activations.len(),
            });
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let fan_in = sizes[l];
            let std = (2.0 / fan_in as f64).sqrt();
            let w: Vec<f64> = (0..sizes[l + 1] * fan_in)
                .map(|_| {
                    let g: f64 = rng.sample(rand_distr::StandardNormal);
                    g * std
                })
                .collect();
            weights.push(w);
            biases.push(vec![0.0; sizes[l + 1]]);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
            activations: activations.to_vec(),
            alpha,
            input_norm: Normalizer::identity(sizes[0]),
            output_norm: Normalizer::identity(*sizes.last().unwrap()),
            anomaly_threshold: None,
        })
    }

    /// Network from explicit parameters; handy for exact-value tests.
    pub fn from_parts(
        sizes: &[usize],
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        activations: &[Activation],
        alpha: f64,
    ) -> Result<Self> {
        let mut net = Self::with_activations(sizes, activations, alpha, 0)?;
        for l in 0..sizes.len() - 1 {
            if weights[l].len() != sizes[l + 1] * sizes[l] || biases[l].len() != sizes[l + 1] {
                return Err(Error::DimensionMismatch {
                    expected: sizes[l + 1] * sizes[l],
                    got: weights[l].len(),
                });
            }
        }
        net.weights = weights;
        net.biases = biases;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn input_norm(&self) -> &Normalizer {
        &self.input_norm
    }

    pub fn output_norm(&self) -> &Normalizer {
        &self.output_norm
    }

    pub fn set_input_norm(&mut self, norm: Normalizer) -> Result<()> {
        if norm.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: norm.dim(),
            });
        }
        self.input_norm = norm;
        Ok(())
    }

    pub fn set_output_norm(&mut self, norm: Normalizer) -> Result<()> {
        if norm.dim() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: norm.dim(),
            });
        }
        self.output_norm = norm;
        Ok(())
    }

    pub fn anomaly_threshold(&self) -> Option<f64> {
        self.anomaly_threshold
    }

    pub fn set_anomaly_threshold(&mut self, threshold: Option<f64>) {
        self.anomaly_threshold = threshold;
    }

    /// Pre-activations and activations for a normalized input.
    /// `acts[0]` is the input, `acts[l+1] = phi(pre[l])`.
    fn run_layers(&self, input_internal: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.sizes.len());
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(self.sizes.len() - 1);
        acts.push(input_internal.to_vec());
        for l in 0..self.weights.len() {
            let (n_out, n_in) = (self.sizes[l + 1], self.sizes[l]);
            let prev = &acts[l];
            let mut pre = self.biases[l].clone();
            for o in 0..n_out {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                let mut acc = 0.0;
                for (w, a) in row.iter().zip(prev.iter()) {
                    acc += w * a;
                }
                pre[o] += acc;
            }
            let act = pre
                .iter()
                .map(|&z| self.activations[l].apply(z, self.alpha))
                .collect();
            pres.push(pre);
            acts.push(act);
        }
        (acts, pres)
    }

    /// Forward pass in raw units.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let internal = self.input_norm.normalize(input);
        let (acts, _) = self.run_layers(&internal);
        Ok(self.output_norm.denormalize(acts.last().unwrap()))
    }

    /// Backprop through cached layer states; gradients are with respect to
    /// internal (normalized) units.
    fn backprop(
        &self,
        acts: &[Vec<f64>],
        pres: &[Vec<f64>],
        output_grad: &[f64],
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
        let layers = self.weights.len();
        let mut wgrads: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut bgrads: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let mut delta: Vec<f64> = output_grad
            .iter()
            .zip(pres[layers - 1].iter())
            .map(|(g, &z)| g * self.activations[layers - 1].derivative(z, self.alpha))
            .collect();
        for l in (0..layers).rev() {
            let (n_out, n_in) = (self.sizes[l + 1], self.sizes[l]);
            let prev = &acts[l];
            for o in 0..n_out {
                let d = delta[o];
                let row = &mut wgrads[l][o * n_in..(o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(prev.iter()) {
                    *g += d * a;
                }
                bgrads[l][o] += d;
            }
            let mut upstream = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                for (u, w) in upstream.iter_mut().zip(row.iter()) {
                    *u += w * d;
                }
            }
            if l > 0 {
                delta = upstream
                    .iter()
                    .zip(pres[l - 1].iter())
                    .map(|(g, &z)| g * self.activations[l - 1].derivative(z, self.alpha))
                    .collect();
            } else {
                delta = upstream;
            }
        }
        (wgrads, bgrads, delta)
    }

    /// Exact reverse-mode gradients of the raw-unit forward pass.
    ///
    /// `loss_grad` is dL/d(output) in raw units; the returned input
    /// gradient is dL/d(input) in raw units.
    pub fn backward(&self, input: &[f64], loss_grad: &[f64]) -> Result<Gradients> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        if loss_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: loss_grad.len(),
            });
        }
        let internal = self.input_norm.normalize(input);
        let (acts, pres) = self.run_layers(&internal);
        // Chain rule through the output denormalizer.
        let internal_grad: Vec<f64> = loss_grad
            .iter()
            .zip(&self.output_norm.half_range)
            .map(|(g, h)| g * h)
            .collect();
        let (weights, biases, input_internal_grad) = self.backprop(&acts, &pres, &internal_grad);
        // Chain rule through the input normalizer.
        let input = input_internal_grad
            .iter()
            .zip(&self.input_norm.half_range)
            .map(|(g, h)| g / h)
            .collect();
        Ok(Gradients { weights, biases, input })
    }

    /// Serializes the network: header (version, layer sizes, alpha,
    /// activations, normalizers, anomaly threshold) followed by the f64
    /// parameters, all little-endian. The round trip is exact.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC)?;
        w.write_all(&[FORMAT_VERSION])?;
        write_u32(&mut w, self.sizes.len() as u32)?;
        for &s in &self.sizes {
            write_u32(&mut w, s as u32)?;
        }
        write_f64(&mut w, self.alpha)?;
        for a in &self.activations {
            let tag = match a {
                Activation::Identity => 0u8,
                Activation::Leaky => 1u8,
            };
            w.write_all(&[tag])?;
        }
        for v in self
            .input_norm
            .center
            .iter()
            .chain(&self.input_norm.half_range)
            .chain(&self.output_norm.center)
            .chain(&self.output_norm.half_range)
        {
            write_f64(&mut w, *v)?;
        }
        match self.anomaly_threshold {
            Some(t) => {
                w.write_all(&[1])?;
                write_f64(&mut w, t)?;
            }
            None => {
                w.write_all(&[0])?;
                write_f64(&mut w, 0.0)?;
            }
        }
        for l in 0..self.weights.len() {
            for v in &self.weights[l] {
                write_f64(&mut w, *v)?;
            }
            for v in &self.biases[l] {
                write_f64(&mut w, *v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = File::open(path)?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::SchemaMismatch("bad magic bytes".into()));
        }
        let version = read_u8(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::SchemaMismatch(format!(
                "unsupported format version {version}"
            )));
        }
        let n_layers = read_u32(&mut r)? as usize;
        if !(2..=64).contains(&n_layers) {
            return Err(Error::SchemaMismatch(format!("layer count {n_layers}")));
        }
        let mut sizes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let s = read_u32(&mut r)? as usize;
            if s == 0 || s > 1 << 20 {
                return Err(Error::SchemaMismatch(format!("layer size {s}")));
            }
            sizes.push(s);
        }
        let alpha = read_f64(&mut r)?;
        let mut activations = Vec::with_capacity(n_layers - 1);
        for _ in 0..n_layers - 1 {
            activations.push(match read_u8(&mut r)? {
                0 => Activation::Identity,
                1 => Activation::Leaky,
                other => {
                    return Err(Error::SchemaMismatch(format!("activation tag {other}")));
                }
            });
        }
        let read_vec = |r: &mut BufReader<File>, n: usize| -> Result<Vec<f64>> {
            (0..n).map(|_| read_f64(r)).collect()
        };
        let input_norm = Normalizer {
            center: read_vec(&mut r, sizes[0])?,
            half_range: read_vec(&mut r, sizes[0])?,
        };
        let output_norm = Normalizer {
            center: read_vec(&mut r, sizes[n_layers - 1])?,
            half_range: read_vec(&mut r, sizes[n_layers - 1])?,
        };
        let has_threshold = read_u8(&mut r)? != 0;
        let threshold_value = read_f64(&mut r)?;
        let mut weights = Vec::with_capacity(n_layers - 1);
        let mut biases = Vec::with_capacity(n_layers - 1);
        for l in 0..n_layers - 1 {
            weights.push(read_vec(&mut r, sizes[l + 1] * sizes[l])?);
            biases.push(read_vec(&mut r, sizes[l + 1])?);
        }
        let mut trailing = [0u8; 1];
        match r.read(&mut trailing)? {
            0 => {}
            _ => return Err(Error::SchemaMismatch("trailing data after parameters".into())),
        }
        Ok(Self {
            sizes,
            weights,
            biases,
            activations,
            alpha,
            input_norm,
            output_norm,
            anomaly_threshold: if has_threshold { Some(threshold_value) } else { None },
        })
    }
}

const MAGIC: &[u8; 4] = b"TPNN";
const FORMAT_VERSION: u8 = 1;

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::SchemaMismatch("truncated model file".into())
        } else {
            Error::Io(e)
        }
    })
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut buf = [0u8; 1];
    read_exact(r, &mut buf)?;
    Ok(buf[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

struct AdamState {
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    fn new(net: &DenseNet) -> Self {
        Self {
            m_weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            t: 0,
        }
    }

}

fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    cfg: &TrainConfig,
) {
    let bias1 = 1.0 - cfg.beta1.powi(t as i32);
    let bias2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..params.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grads[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Trains the network in place on (input, target) pairs in raw units with
/// mean-squared-error loss, returning the per-epoch training loss (MSE in
/// normalized units). Deterministic given `cfg.seed`.
pub fn train(
    net: &mut DenseNet,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    for x in inputs {
        if x.len() != net.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: net.input_dim(),
                got: x.len(),
            });
        }
    }
    for y in targets {
        if y.len() != net.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: net.output_dim(),
                got: y.len(),
            });
        }
    }
    if cfg.epochs == 0 {
        return Ok(Vec::new());
    }
    let xs: Vec<Vec<f64>> = inputs.iter().map(|x| net.input_norm.normalize(x)).collect();
    let ys: Vec<Vec<f64>> = targets.iter().map(|y| net.output_norm.normalize(y)).collect();
    let out_dim = net.output_dim() as f64;
    let mut adam = AdamState::new(net);
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sq = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let batch_len = batch.len() as f64;
            let mut wgrads: Vec<Vec<f64>> =
                net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
            let mut bgrads: Vec<Vec<f64>> =
                net.biases.iter().map(|b| vec![0.0; b.len()]).collect();
            for &i in batch {
                let (acts, pres) = net.run_layers(&xs[i]);
                let out = acts.last().unwrap();
                let mut out_grad = vec![0.0; out.len()];
                for (d, (&p, &t)) in out.iter().zip(&ys[i]).enumerate() {
                    let e = p - t;
                    epoch_sq += e * e;
                    out_grad[d] = 2.0 * e / (batch_len * out_dim);
                }
                let (ws, bs, _) = net.backprop(&acts, &pres, &out_grad);
                for l in 0..wgrads.len() {
                    for (g, s) in wgrads[l].iter_mut().zip(&ws[l]) {
                        *g += s;
                    }
                    for (g, s) in bgrads[l].iter_mut().zip(&bs[l]) {
                        *g += s;
                    }
                }
            }
            adam.t += 1;
            for l in 0..net.weights.len() {
                if cfg.l2 > 0.0 {
                    for (g, w) in wgrads[l].iter_mut().zip(&net.weights[l]) {
                        *g += 2.0 * cfg.l2 * w;
                    }
                }
                adam_step(
                    &mut net.weights[l],
                    &wgrads[l],
                    &mut adam.m_weights[l],
                    &mut adam.v_weights[l],
                    adam.t,
                    cfg,
                );
                adam_step(
                    &mut net.biases[l],
                    &bgrads[l],
                    &mut adam.m_biases[l],
                    &mut adam.v_biases[l],
                    adam.t,
                    cfg,
                );
            }
        }
        if !epoch_sq.is_finite() {
            return Err(Error::DivergedLoss { epoch });
        }
        history.push(epoch_sq / (xs.len() as f64 * out_dim));
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use tempfile::tempdir;

    #[test]
    fn identity_layer_passes_input_through() {
        let net = DenseNet::from_parts(
            &[3, 3],
            vec![vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]],
            vec![vec![0.0; 3]],
            &[Activation::Identity],
            DEFAULT_LEAK,
        )
        .unwrap();
        let out = net.forward(&[0.3, -1.2, 7.0]).unwrap();
        assert_eq!(out, vec![0.3, -1.2, 7.0]);
    }

    #[test]
    fn leaky_unit_hand_example() {
        // W = [[2]], b = [1], input [-1]: pre-activation -1, output -alpha.
        let net = DenseNet::from_parts(
            &[1, 1],
            vec![vec![2.0]],
            vec![vec![1.0]],
            &[Activation::Leaky],
            0.01,
        )
        .unwrap();
        let out = net.forward(&[-1.0]).unwrap();
        assert_relative_eq!(out[0], -0.01);
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_output() {
        let net = DenseNet::new(&[4, 8, 3], DEFAULT_LEAK, 3).unwrap();
        let out = net.forward(&[0.0; 4]).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn forward_rejects_wrong_input_size() {
        let net = DenseNet::new(&[4, 2], DEFAULT_LEAK, 0).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 4, got: 2 })
        ));
    }

    #[test]
    fn linear_layer_input_gradient_is_w_transpose() {
        let w = vec![1.0, -2.0, 0.5, 3.0, 0.0, -1.0];
        let net = DenseNet::from_parts(
            &[3, 2],
            vec![w.clone()],
            vec![vec![0.0; 2]],
            &[Activation::Identity],
            DEFAULT_LEAK,
        )
        .unwrap();
        let loss_grad = [0.7, -0.3];
        let grads = net.backward(&[1.0, 2.0, 3.0], &loss_grad).unwrap();
        for i in 0..3 {
            let expected = w[i] * loss_grad[0] + w[3 + i] * loss_grad[1];
            assert_relative_eq!(grads.input[i], expected);
        }
    }

    #[test]
    fn zero_loss_gradient_gives_zero_gradients() {
        let net = DenseNet::new(&[4, 6, 2], DEFAULT_LEAK, 9).unwrap();
        let grads = net.backward(&[0.1, 0.2, 0.3, 0.4], &[0.0, 0.0]).unwrap();
        assert!(grads.input.iter().all(|g| *g == 0.0));
        assert!(grads.weights.iter().flatten().all(|g| *g == 0.0));
        assert!(grads.biases.iter().flatten().all(|g| *g == 0.0));
    }

    /// Central finite differences of a linear functional of the output,
    /// the independent oracle for the analytic gradients.
    fn finite_difference_check(net: &DenseNet, input: &[f64], seed: u64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let head: Vec<f64> = (0..net.output_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let loss = |n: &DenseNet, x: &[f64]| -> f64 {
            n.forward(x)
                .unwrap()
                .iter()
                .zip(&head)
                .map(|(o, c)| o * c)
                .sum()
        };
        // Skip configurations that sit on a leaky kink.
        let internal = net.input_norm.normalize(input);
        let (_, pres) = net.run_layers(&internal);
        if pres.iter().flatten().any(|z| z.abs() < 1e-6) {
            return;
        }
        let h = 1e-5;
        let grads = net.backward(input, &head).unwrap();
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-10);
        for l in 0..net.weights.len() {
            for i in 0..net.weights[l].len() {
                let mut plus = net.clone();
                plus.weights[l][i] += h;
                let mut minus = net.clone();
                minus.weights[l][i] -= h;
                let numeric = (loss(&plus, input) - loss(&minus, input)) / (2.0 * h);
                assert!(
                    rel(grads.weights[l][i], numeric) < 1e-4,
                    "weight[{l}][{i}]: analytic {} vs numeric {}",
                    grads.weights[l][i],
                    numeric
                );
            }
            for i in 0..net.biases[l].len() {
                let mut plus = net.clone();
                plus.biases[l][i] += h;
                let mut minus = net.clone();
                minus.biases[l][i] -= h;
                let numeric = (loss(&plus, input) - loss(&minus, input)) / (2.0 * h);
                assert!(
                    rel(grads.biases[l][i], numeric) < 1e-4,
                    "bias[{l}][{i}]: analytic {} vs numeric {}",
                    grads.biases[l][i],
                    numeric
                );
            }
        }
        for d in 0..input.len() {
            let mut plus = input.to_vec();
            plus[d] += h;
            let mut minus = input.to_vec();
            minus[d] -= h;
            let numeric = (loss(net, &plus) - loss(net, &minus)) / (2.0 * h);
            assert!(
                rel(grads.input[d], numeric) < 1e-4,
                "input[{d}]: analytic {} vs numeric {}",
                grads.input[d],
                numeric
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..10 {
            let net = DenseNet::new(&[4, 6, 5, 3], DEFAULT_LEAK, seed).unwrap();
            let mut rng = StdRng::seed_from_u64(seed ^ 0xABCD);
            let input: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            finite_difference_check(&net, &input, seed.wrapping_add(17));
        }
    }

    #[test]
    fn gradients_match_finite_differences_with_normalizers() {
        let mut net = DenseNet::new(&[5, 8, 4], DEFAULT_LEAK, 21).unwrap();
        net.set_input_norm(Normalizer {
            center: vec![3.0, 5.0, 4.0, 45.0, 0.0],
            half_range: vec![4.05, 5.85, 4.0, 45.0, 90.0],
        })
        .unwrap();
        net.set_output_norm(Normalizer {
            center: vec![0.5, 0.5, 0.5, 0.5],
            half_range: vec![2.0, 2.0, 2.0, 2.0],
        })
        .unwrap();
        finite_difference_check(&net, &[2.0, 6.0, 1.0, 30.0, -20.0], 5);
    }

    #[test]
    fn train_learns_a_scalar_linear_map() {
        // Analytic optimum for y = 2x is weight 2, bias 0.
        let inputs: Vec<Vec<f64>> = (0..100).map(|i| vec![(i as f64 - 50.0) / 50.0]).collect();
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![2.0 * x[0]]).collect();
        let mut net = DenseNet::with_activations(&[1, 1], &[Activation::Identity], 0.01, 4).unwrap();
        let cfg = TrainConfig {
            epochs: 400,
            learning_rate: 0.02,
            l2: 0.0,
            ..TrainConfig::default()
        };
        let history = train(&mut net, &inputs, &targets, &cfg).unwrap();
        assert_eq!(history.len(), 400);
        assert!(history.last().unwrap() < &1e-8);
        assert!((net.weights[0][0] - 2.0).abs() < 1e-3, "w={}", net.weights[0][0]);
        assert!(net.biases[0][0].abs() < 1e-3);
    }

    #[test]
    fn zero_epochs_changes_nothing() {
        let mut net = DenseNet::new(&[2, 3, 1], DEFAULT_LEAK, 7).unwrap();
        let reference = net.clone();
        let history = train(
            &mut net,
            &[vec![0.0, 1.0]],
            &[vec![1.0]],
            &TrainConfig { epochs: 0, ..TrainConfig::default() },
        )
        .unwrap();
        assert!(history.is_empty());
        assert_eq!(net, reference);
    }

    #[test]
    fn training_is_deterministic() {
        let inputs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0, -1.0]).collect();
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![x[0] - x[1]]).collect();
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let mut a = DenseNet::new(&[2, 6, 1], DEFAULT_LEAK, 11).unwrap();
        let mut b = DenseNet::new(&[2, 6, 1], DEFAULT_LEAK, 11).unwrap();
        let ha = train(&mut a, &inputs, &targets, &cfg).unwrap();
        let hb = train(&mut b, &inputs, &targets, &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let inputs: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64]).collect();
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![3.0 * x[0]]).collect();
        let mut net = DenseNet::new(&[1, 4, 1], DEFAULT_LEAK, 2).unwrap();
        // Adam steps are bounded by the learning rate, so the rate has to
        // be large enough to overflow the next forward pass outright.
        let cfg = TrainConfig {
            learning_rate: 1e200,
            epochs: 50,
            ..TrainConfig::default()
        };
        match train(&mut net, &inputs, &targets, &cfg) {
            Err(Error::DivergedLoss { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("net.tpnn");
        let mut net = DenseNet::new(&[5, 16, 160], DEFAULT_LEAK, 33).unwrap();
        net.set_input_norm(Normalizer::from_bounds(&PoseBounds::default()))
            .unwrap();
        net.set_anomaly_threshold(Some(0.0321));
        net.save(&path).unwrap();
        let back = DenseNet::load(&path).unwrap();
        assert_eq!(back, net);
        let input = [2.0, 5.0, 1.0, 30.0, -10.0];
        assert_eq!(net.forward(&input).unwrap(), back.forward(&input).unwrap());
    }

    #[test]
    fn truncated_file_is_schema_mismatch() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("net.tpnn");
        let net = DenseNet::new(&[3, 4, 2], DEFAULT_LEAK, 1).unwrap();
        net.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(DenseNet::load(&path), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn loaded_twin_trains_identically() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("net.tpnn");
        let inputs: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 25.0 - 1.0]).collect();
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![x[0] * x[0]]).collect();
        let mut original = DenseNet::new(&[1, 8, 1], DEFAULT_LEAK, 6).unwrap();
        original.save(&path).unwrap();
        let mut twin = DenseNet::load(&path).unwrap();
        let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
        let h1 = train(&mut original, &inputs, &targets, &cfg).unwrap();
        let h2 = train(&mut twin, &inputs, &targets, &cfg).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(original, twin);
    }
}
