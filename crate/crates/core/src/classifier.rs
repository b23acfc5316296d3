//! Base classifiers: the interval-partition oracle with exactly computable
//! smoothed probabilities, a linear classifier, a table-backed stub, and a
//! one-hidden-layer perceptron with manual backpropagation for training.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cost::SensitiveTargets;
use crate::error::{Error, Result};
use crate::radius::{argmax_lowest, cost_sensitive_radius, standard_radius, ProbVector, RadiusResult};
use crate::{gauss, rng};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// 1-D interval partition over the first coordinate: class j on
/// [t_j, t_{j+1}) with t_0 = -inf and t_m = +inf.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalClassifier {
    thresholds: Vec<f64>,
}

impl IntervalClassifier {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::Config(
                "interval classifier needs at least one threshold".into(),
            ));
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(
                "interval thresholds must be strictly increasing".into(),
            ));
        }
        if thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("interval thresholds must be finite".into()));
        }
        Ok(IntervalClassifier { thresholds })
    }

    pub fn num_classes(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let x1 = *x.first().ok_or(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        })?;
        Ok(self.thresholds.iter().filter(|&&t| t <= x1).count())
    }

    /// Exact smoothed probabilities under N(0, sigma^2 I):
    /// p_j = phi((t_{j+1} - x1)/sigma) - phi((t_j - x1)/sigma).
    pub fn exact_smoothed_probs(&self, x: &[f64], sigma: f64) -> Result<ProbVector> {
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("sigma = {sigma} must be positive")));
        }
        let x1 = *x.first().ok_or(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        })?;
        let m = self.num_classes();
        let mut probs = Vec::with_capacity(m);
        let mut prev_cdf = 0.0;
        for j in 0..m {
            let upper_cdf = if j + 1 == m {
                1.0
            } else {
                gauss::phi_raw((self.thresholds[j] - x1) / sigma)
            };
            probs.push((upper_cdf - prev_cdf).max(0.0));
            prev_cdf = upper_cdf;
        }
        ProbVector::new(probs)
    }

    /// Exact cost-sensitive certified radius from the closed-form
    /// probabilities; the ground truth in certifier validation.
    pub fn exact_cost_sensitive_radius(
        &self,
        x: &[f64],
        omega: &SensitiveTargets,
        sigma: f64,
    ) -> Result<RadiusResult> {
        cost_sensitive_radius(&self.exact_smoothed_probs(x, sigma)?, omega, sigma)
    }

    pub fn exact_standard_radius(&self, x: &[f64], y: usize, sigma: f64) -> Result<RadiusResult> {
        standard_radius(&self.exact_smoothed_probs(x, sigma)?, y, sigma)
    }
}

/// Plain multiclass linear classifier, argmax of w_k . x + b_k.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl LinearClassifier {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Config("linear classifier shape mismatch".into()));
        }
        let d = weights[0].len();
        if weights.iter().any(|w| w.len() != d) {
            return Err(Error::Config("linear classifier ragged weights".into()));
        }
        Ok(LinearClassifier { weights, biases })
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let scores: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b)
            .collect();
        Ok(argmax_lowest(&scores))
    }
}

/// Nearest-stored-input lookup; a deterministic stub for tests that need a
/// hand-set prediction per input.
#[derive(Debug, Clone, PartialEq)]
pub struct TableClassifier {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub m: usize,
}

impl TableClassifier {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, m: usize) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != labels.len() {
            return Err(Error::Config("table classifier shape mismatch".into()));
        }
        if labels.iter().any(|&y| y >= m) {
            return Err(Error::Config("table classifier label out of range".into()));
        }
        Ok(TableClassifier { inputs, labels, m })
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, row) in self.inputs.iter().enumerate() {
            if row.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: row.len(),
                    got: x.len(),
                });
            }
            let dist: f64 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best_d {
                best_d = dist;
                best = i;
            }
        }
        Ok(self.labels[best])
    }
}

/// One-hidden-layer perceptron with tanh activation and a softmax
/// temperature used by the soft-smoothing surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub d: usize,
    pub h: usize,
    pub m: usize,
    pub beta: f64,
    /// h x d, row-major
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// m x h, row-major
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    pub input: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone)]
pub struct MlpGrad {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpGrad {
    pub fn zeros(model: &MlpModel) -> Self {
        MlpGrad {
            w1: vec![0.0; model.w1.len()],
            b1: vec![0.0; model.b1.len()],
            w2: vec![0.0; model.w2.len()],
            b2: vec![0.0; model.b2.len()],
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in self
            .w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(&mut self.b2)
        {
            *v *= c;
        }
    }

    pub fn add(&mut self, other: &MlpGrad, c: f64) {
        let pairs = [
            (&mut self.w1, &other.w1),
            (&mut self.b1, &other.b1),
            (&mut self.w2, &other.w2),
            (&mut self.b2, &other.b2),
        ];
        for (dst, src) in pairs {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += c * b;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

impl MlpModel {
    pub fn new_random<R: Rng>(d: usize, h: usize, m: usize, beta: f64, rng: &mut R) -> Self {
        let mut w1 = vec![0.0; h * d];
        let mut w2 = vec![0.0; m * h];
        rng::fill_gaussian(rng, 1.0 / (d as f64).sqrt(), &mut w1);
        rng::fill_gaussian(rng, 1.0 / (h as f64).sqrt(), &mut w2);
        MlpModel {
            d,
            h,
            m,
            beta,
            w1,
            b1: vec![0.0; h],
            w2,
            b2: vec![0.0; m],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<MlpCache> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        let mut hidden = vec![0.0; self.h];
        for (i, h) in hidden.iter_mut().enumerate() {
            let mut z = self.b1[i];
            let row = &self.w1[i * self.d..(i + 1) * self.d];
            for (w, xi) in row.iter().zip(x) {
                z += w * xi;
            }
            *h = z.tanh();
        }
        let mut logits = vec![0.0; self.m];
        for (k, logit) in logits.iter_mut().enumerate() {
            let mut z = self.b2[k];
            let row = &self.w2[k * self.h..(k + 1) * self.h];
            for (w, hi) in row.iter().zip(&hidden) {
                z += w * hi;
            }
            *logit = z;
        }
        Ok(MlpCache {
            input: x.to_vec(),
            hidden,
            logits,
        })
    }

    /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits).
    pub fn backward(&self, cache: &MlpCache, dlogits: &[f64], grad: &mut MlpGrad) {
        let mut dhidden = vec![0.0; self.h];
        for (k, &g) in dlogits.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.b2[k] += g;
            let row = &mut grad.w2[k * self.h..(k + 1) * self.h];
            let wrow = &self.w2[k * self.h..(k + 1) * self.h];
            for i in 0..self.h {
                row[i] += g * cache.hidden[i];
                dhidden[i] += g * wrow[i];
            }
        }
        for (i, &dh) in dhidden.iter().enumerate() {
            // tanh'(z) = 1 - tanh(z)^2
            let dz = dh * (1.0 - cache.hidden[i] * cache.hidden[i]);
            if dz == 0.0 {
                continue;
            }
            grad.b1[i] += dz;
            let row = &mut grad.w1[i * self.d..(i + 1) * self.d];
            for (w, xi) in row.iter_mut().zip(&cache.input) {
                *w += dz * xi;
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax_lowest(&self.forward(x)?.logits))
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) {
        let mut it = params.iter();
        for v in self
            .w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(&mut self.b2)
        {
            *v = *it.next().expect("parameter vector too short");
        }
    }

    pub fn grad_flat(grad: &MlpGrad) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend_from_slice(&grad.w1);
        out.extend_from_slice(&grad.b1);
        out.extend_from_slice(&grad.w2);
        out.extend_from_slice(&grad.b2);
        out
    }

    pub fn apply_update(&mut self, grad: &MlpGrad, lr: f64) {
        let pairs = [
            (&mut self.w1, &grad.w1),
            (&mut self.b1, &grad.b1),
            (&mut self.w2, &grad.w2),
            (&mut self.b2, &grad.b2),
        ];
        for (dst, src) in pairs {
            for (a, g) in dst.iter_mut().zip(src) {
                *a -= lr * g;
            }
        }
    }
}

/// Numerically stable softmax of beta * logits.
pub fn softmax_scaled(logits: &[f64], beta: f64) -> Vec<f64> {
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (beta * (z - mx)).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Forward state of the soft-smoothing surrogate for one input.
pub struct SoftCache {
    pub probs: Vec<f64>,
    draws: Vec<(MlpCache, Vec<f64>)>, // per draw: mlp cache, softmax
}

impl SoftCache {
    pub fn k_samples(&self) -> usize {
        self.draws.len()
    }
}

/// Soft smoothed probabilities from precomputed noise draws:
/// mean over draws of softmax(beta * logits(x + delta)).
pub fn soft_probs_cached(model: &MlpModel, x: &[f64], noise: &[Vec<f64>]) -> Result<SoftCache> {
    if noise.is_empty() {
        return Err(Error::Domain("soft smoothing needs k >= 1 draws".into()));
    }
    let k = noise.len() as f64;
    let mut probs = vec![0.0; model.m];
    let mut draws = Vec::with_capacity(noise.len());
    for delta in noise {
        let u: Vec<f64> = x.iter().zip(delta).map(|(a, b)| a + b).collect();
        let cache = model.forward(&u)?;
        let s = softmax_scaled(&cache.logits, model.beta);
        for (p, si) in probs.iter_mut().zip(&s) {
            *p += si / k;
        }
        draws.push((cache, s));
    }
    Ok(SoftCache { probs, draws })
}

/// Backpropagates d(loss)/d(soft probs) through every draw into `grad`.
pub fn soft_backward(model: &MlpModel, cache: &SoftCache, dl_dh: &[f64], grad: &mut MlpGrad) {
    let k = cache.draws.len() as f64;
    for (mlp_cache, s) in &cache.draws {
        // softmax jacobian: dz = beta * s .* (v - (v . s))
        let vdot: f64 = dl_dh.iter().zip(s).map(|(v, si)| v * si).sum();
        let dlogits: Vec<f64> = dl_dh
            .iter()
            .zip(s)
            .map(|(v, si)| model.beta * si * (v - vdot) / k)
            .collect();
        model.backward(mlp_cache, &dlogits, grad);
    }
}

/// Spec-facing variant drawing the noise from the given stream.
pub fn soft_smoothed_probs<R: Rng>(
    model: &MlpModel,
    x: &[f64],
    sigma: f64,
    k_samples: usize,
    rng: &mut R,
) -> Result<ProbVector> {
    if k_samples == 0 {
        return Err(Error::Domain("k_samples must be >= 1".into()));
    }
    let noise: Vec<Vec<f64>> = (0..k_samples)
        .map(|_| rng::gaussian_vec(rng, sigma, x.len()))
        .collect();
    let cache = soft_probs_cached(model, x, &noise)?;
    ProbVector::new(cache.probs)
}

/// Any supported base classifier f mapping inputs to one of m labels.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseClassifier {
    Interval(IntervalClassifier),
    Linear(LinearClassifier),
    Mlp(MlpModel),
    Table(TableClassifier),
}

impl BaseClassifier {
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        match self {
            BaseClassifier::Interval(c) => c.predict(x),
            BaseClassifier::Linear(c) => c.predict(x),
            BaseClassifier::Mlp(c) => c.predict(x),
            BaseClassifier::Table(c) => c.predict(x),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            BaseClassifier::Interval(c) => c.num_classes(),
            BaseClassifier::Linear(c) => c.weights.len(),
            BaseClassifier::Mlp(c) => c.m,
            BaseClassifier::Table(c) => c.m,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BaseClassifier::Interval(_) => "interval",
            BaseClassifier::Linear(_) => "linear",
            BaseClassifier::Mlp(_) => "mlp",
            BaseClassifier::Table(_) => "table",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    kind: String,
    version: u32,
    #[serde(default)]
    shapes: Vec<Vec<usize>>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    thresholds: Option<Vec<f64>>,
    #[serde(default)]
    labels: Option<Vec<usize>>,
    #[serde(default)]
    m: Option<usize>,
}

fn encode_block(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    B64.encode(bytes)
}

fn decode_block(line: &str, expected_len: usize) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(line.trim())
        .map_err(|e| Error::Format(format!("bad base64 parameter block: {e}")))?;
    if bytes.len() != expected_len * 8 {
        return Err(Error::Format(format!(
            "parameter block has {} bytes, expected {}",
            bytes.len(),
            expected_len * 8
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Serializes a model: line 1 is a JSON header, each following line one
/// base64 row-major little-endian f64 parameter block.
pub fn save_model(model: &BaseClassifier, path: &Path) -> Result<()> {
    let mut out = String::new();
    match model {
        BaseClassifier::Interval(c) => {
            let header = json!({
                "kind": "interval",
                "version": MODEL_FORMAT_VERSION,
                "thresholds": c.thresholds(),
            });
            out.push_str(&header.to_string());
            out.push('\n');
        }
        BaseClassifier::Linear(c) => {
            let m = c.weights.len();
            let d = c.dim();
            let header = json!({
                "kind": "linear",
                "version": MODEL_FORMAT_VERSION,
                "shapes": [[m, d], [m]],
            });
            out.push_str(&header.to_string());
            out.push('\n');
            let flat: Vec<f64> = c.weights.iter().flatten().copied().collect();
            out.push_str(&encode_block(&flat));
            out.push('\n');
            out.push_str(&encode_block(&c.biases));
            out.push('\n');
        }
        BaseClassifier::Mlp(c) => {
            let header = json!({
                "kind": "mlp",
                "version": MODEL_FORMAT_VERSION,
                "shapes": [[c.h, c.d], [c.h], [c.m, c.h], [c.m]],
                "beta": c.beta,
            });
            out.push_str(&header.to_string());
            out.push('\n');
            for block in [&c.w1, &c.b1, &c.w2, &c.b2] {
                out.push_str(&encode_block(block));
                out.push('\n');
            }
        }
        BaseClassifier::Table(c) => {
            let n = c.inputs.len();
            let d = c.inputs[0].len();
            let header = json!({
                "kind": "table",
                "version": MODEL_FORMAT_VERSION,
                "shapes": [[n, d]],
                "labels": c.labels,
                "m": c.m,
            });
            out.push_str(&header.to_string());
            out.push('\n');
            let flat: Vec<f64> = c.inputs.iter().flatten().copied().collect();
            out.push_str(&encode_block(&flat));
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<BaseClassifier> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Format("model file is empty".into()))?;
    let header: ModelHeader = serde_json::from_str(header_line)
        .map_err(|e| Error::Format(format!("bad model header: {e}")))?;
    if header.version != MODEL_FORMAT_VERSION {
        return Err(Error::Version {
            expected: MODEL_FORMAT_VERSION,
            got: header.version,
        });
    }
    let mut next_block = |len: usize| -> Result<Vec<f64>> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format("model file truncated: missing parameter block".into()))?;
        decode_block(line, len)
    };
    match header.kind.as_str() {
        "interval" => {
            let thresholds = header
                .thresholds
                .ok_or_else(|| Error::Format("interval model missing thresholds".into()))?;
            Ok(BaseClassifier::Interval(IntervalClassifier::new(
                thresholds,
            )?))
        }
        "linear" => {
            let shapes = &header.shapes;
            if shapes.len() != 2 || shapes[0].len() != 2 {
                return Err(Error::Format("linear model bad shapes".into()));
            }
            let (m, d) = (shapes[0][0], shapes[0][1]);
            let flat = next_block(m * d)?;
            let biases = next_block(m)?;
            let weights = flat.chunks_exact(d).map(|r| r.to_vec()).collect();
            Ok(BaseClassifier::Linear(LinearClassifier::new(
                weights, biases,
            )?))
        }
        "mlp" => {
            let shapes = &header.shapes;
            if shapes.len() != 4 || shapes[0].len() != 2 || shapes[2].len() != 2 {
                return Err(Error::Format("mlp model bad shapes".into()));
            }
            let (h, d) = (shapes[0][0], shapes[0][1]);
            let (m, h2) = (shapes[2][0], shapes[2][1]);
            if h2 != h || shapes[1] != vec![h] || shapes[3] != vec![m] {
                return Err(Error::Format("mlp model inconsistent shapes".into()));
            }
            let beta = header
                .beta
                .ok_or_else(|| Error::Format("mlp model missing beta".into()))?;
            let w1 = next_block(h * d)?;
            let b1 = next_block(h)?;
            let w2 = next_block(m * h)?;
            let b2 = next_block(m)?;
            Ok(BaseClassifier::Mlp(MlpModel {
                d,
                h,
                m,
                beta,
                w1,
                b1,
                w2,
                b2,
            }))
        }
        "table" => {
            let shapes = &header.shapes;
            if shapes.len() != 1 || shapes[0].len() != 2 {
                return Err(Error::Format("table model bad shapes".into()));
            }
            let (n, d) = (shapes[0][0], shapes[0][1]);
            let labels = header
                .labels
                .ok_or_else(|| Error::Format("table model missing labels".into()))?;
            let m = header
                .m
                .ok_or_else(|| Error::Format("table model missing m".into()))?;
            let flat = next_block(n * d)?;
            let inputs = flat.chunks_exact(d).map(|r| r.to_vec()).collect();
            Ok(BaseClassifier::Table(TableClassifier::new(
                inputs, labels, m,
            )?))
        }
        other => Err(Error::Format(format!("unknown model kind '{other}'"))),
    }
}
