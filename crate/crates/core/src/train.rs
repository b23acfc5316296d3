//! Training objectives for smoothed classifiers: Gaussian-augmented
//! cross-entropy (Cohen), its reweighted variant (Cohen-R), and the
//! cost-sensitive margin objective I1 + lambda*I2 + lambda*I3 that
//! optimizes soft certified radii per data subpopulation.

use serde::{Deserialize, Serialize};

use crate::classifier::{soft_backward, soft_probs_cached, MlpGrad, MlpModel, SoftCache};
use crate::cost::{CostMatrix, SensitiveTargets};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gauss;
use crate::rng;

/// Clamp for the Gaussian quantile inside soft radii; wider than the
/// certification clamp because soft probabilities from few draws are noisy.
pub const SOFT_CLAMP_EPS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Cohen,
    CohenR,
    CsMacer,
}

impl std::str::FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cohen" => Ok(Objective::Cohen),
            "cohen-r" => Ok(Objective::CohenR),
            "cs-macer" => Ok(Objective::CsMacer),
            other => Err(Error::Config(format!("unknown objective '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: Objective,
    pub sigma: f64,
    /// Trade-off weight on the margin terms I2 and I3.
    pub lambda: f64,
    /// Margin threshold for all examples (I2 interval is [0, gamma1]).
    pub gamma1: f64,
    /// Margin threshold for sensitive examples (I3 interval is [-gamma2, gamma2]).
    pub gamma2: f64,
    /// Reweighting weight on sensitive examples (Cohen-R).
    pub alpha_w: f64,
    pub k_samples: usize,
    pub beta: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Smooth-max relaxation of the radius maxima; hard top-2 selection
    /// when false.
    pub smooth_max: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: Objective::CsMacer,
            sigma: 0.5,
            lambda: 2.0,
            gamma1: 4.0,
            gamma2: 16.0,
            alpha_w: 1.2,
            k_samples: 16,
            beta: 16.0,
            lr: 0.01,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            smooth_max: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Config("sigma must be > 0".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config("lambda must be > 0".into()));
        }
        if self.objective == Objective::CsMacer && !(self.gamma2 > self.gamma1 && self.gamma1 > 0.0)
        {
            return Err(Error::Config(
                "cs-macer requires gamma2 > gamma1 > 0".into(),
            ));
        }
        if self.alpha_w < 1.0 {
            return Err(Error::Config("alpha_w must be >= 1".into()));
        }
        if self.k_samples == 0 {
            return Err(Error::Config("k_samples must be >= 1".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config("beta must be > 0".into()));
        }
        if !(self.lr >= 0.0) || self.batch_size == 0 {
            return Err(Error::Config("bad lr or batch_size".into()));
        }
        Ok(())
    }
}

/// Components of the cost-sensitive training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub total: f64,
}

/// Hinge max(u - r, 0) gated to radii inside [l, u].
pub fn margin_loss(r: f64, l: f64, u: f64) -> Result<f64> {
    if l > u {
        return Err(Error::Domain(format!("margin loss: l = {l} > u = {u}")));
    }
    if r >= l && r <= u {
        Ok((u - r).max(0.0))
    } else {
        Ok(0.0)
    }
}

#[inline]
fn clip(p: f64) -> f64 {
    p.clamp(SOFT_CLAMP_EPS, 1.0 - SOFT_CLAMP_EPS)
}

/// phi_inv(clip(p)) and its derivative (zero where clamped).
fn quantile_with_grad(p: f64) -> (f64, f64) {
    let c = clip(p);
    let z = gauss::phi_inv_raw(c);
    let grad = if p <= SOFT_CLAMP_EPS || p >= 1.0 - SOFT_CLAMP_EPS {
        0.0
    } else {
        1.0 / gauss::pdf(z)
    };
    (z, grad)
}

/// Maximum over the probability entries selected by `mask`, either hard
/// (one-hot subgradient at the lowest max index) or a log-sum-exp
/// relaxation with temperature 1/beta. Returns (value, d value / d probs).
fn masked_max_with_grad(probs: &[f64], mask: &[bool], beta: f64, smooth: bool) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; probs.len()];
    if smooth {
        let mx = probs
            .iter()
            .zip(mask)
            .filter(|(_, &keep)| keep)
            .map(|(&p, _)| p)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (i, (&p, &keep)) in probs.iter().zip(mask).enumerate() {
            if keep {
                let e = (beta * (p - mx)).exp();
                grad[i] = e;
                sum += e;
            }
        }
        for g in grad.iter_mut() {
            *g /= sum;
        }
        (mx + sum.ln() / beta, grad)
    } else {
        let mut best = usize::MAX;
        for (i, (&p, &keep)) in probs.iter().zip(mask).enumerate() {
            if keep && (best == usize::MAX || p > probs[best]) {
                best = i;
            }
        }
        grad[best] = 1.0;
        (probs[best], grad)
    }
}

/// Signed soft standard radius from soft probabilities:
/// (sigma/2) * (phi_inv(h_y) - phi_inv(max_{k != y} h_k)).
/// Returns the value and its gradient with respect to the probabilities.
pub fn soft_radius_standard_from_probs(
    probs: &[f64],
    y: usize,
    sigma: f64,
    beta: f64,
    smooth: bool,
) -> (f64, Vec<f64>) {
    let (za, da) = quantile_with_grad(probs[y]);
    let mask: Vec<bool> = (0..probs.len()).map(|k| k != y).collect();
    let (mval, mgrad) = masked_max_with_grad(probs, &mask, beta, smooth);
    let (zb, db) = quantile_with_grad(mval);
    let r = 0.5 * sigma * (za - zb);
    let mut grad = vec![0.0; probs.len()];
    grad[y] += 0.5 * sigma * da;
    for (g, mg) in grad.iter_mut().zip(&mgrad) {
        *g -= 0.5 * sigma * db * mg;
    }
    (r, grad)
}

/// Signed soft cost-sensitive radius:
/// (sigma/2) * (phi_inv(max_k h_k) - phi_inv(max_{k in Omega} h_k)).
pub fn soft_radius_cost_sensitive_from_probs(
    probs: &[f64],
    omega: &SensitiveTargets,
    sigma: f64,
    beta: f64,
    smooth: bool,
) -> (f64, Vec<f64>) {
    let all = vec![true; probs.len()];
    let (aval, agrad) = masked_max_with_grad(probs, &all, beta, smooth);
    let (za, da) = quantile_with_grad(aval);
    let mut mask = vec![false; probs.len()];
    for &k in &omega.targets {
        mask[k] = true;
    }
    let (bval, bgrad) = masked_max_with_grad(probs, &mask, beta, smooth);
    let (zb, db) = quantile_with_grad(bval);
    let r = 0.5 * sigma * (za - zb);
    let mut grad = vec![0.0; probs.len()];
    for ((g, ag), bg) in grad.iter_mut().zip(&agrad).zip(&bgrad) {
        *g = 0.5 * sigma * (da * ag - db * bg);
    }
    (r, grad)
}

/// Noise draws for one example at one epoch, keyed by
/// (epoch, example index, sample index).
pub fn training_noise(
    seed: u64,
    epoch: u64,
    example: u64,
    k_samples: usize,
    sigma: f64,
    d: usize,
) -> Vec<Vec<f64>> {
    (0..k_samples)
        .map(|s| {
            let mut r = rng::stream(seed, "train-noise", &[epoch, example, s as u64]);
            rng::gaussian_vec(&mut r, sigma, d)
        })
        .collect()
}

/// Spec-facing scalar: soft standard radius with noise from the stream.
pub fn soft_radius_standard<R: rand::Rng>(
    model: &MlpModel,
    x: &[f64],
    y: usize,
    sigma: f64,
    k_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let noise: Vec<Vec<f64>> = (0..k_samples.max(1))
        .map(|_| rng::gaussian_vec(rng, sigma, x.len()))
        .collect();
    let cache = soft_probs_cached(model, x, &noise)?;
    Ok(soft_radius_standard_from_probs(&cache.probs, y, sigma, model.beta, true).0)
}

/// Spec-facing scalar: soft cost-sensitive radius with noise from the stream.
pub fn soft_radius_cost_sensitive<R: rand::Rng>(
    model: &MlpModel,
    x: &[f64],
    omega: &SensitiveTargets,
    sigma: f64,
    k_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if omega.is_empty() {
        return Err(Error::Domain("empty target set".into()));
    }
    let noise: Vec<Vec<f64>> = (0..k_samples.max(1))
        .map(|_| rng::gaussian_vec(rng, sigma, x.len()))
        .collect();
    let cache = soft_probs_cached(model, x, &noise)?;
    Ok(soft_radius_cost_sensitive_from_probs(&cache.probs, omega, sigma, model.beta, true).0)
}

/// One example of a training batch with its global index (for noise keys).
pub struct BatchItem<'a> {
    pub x: &'a [f64],
    pub y: usize,
    pub example: u64,
}

fn soft_cache_for(
    model: &MlpModel,
    item: &BatchItem,
    cfg: &TrainConfig,
    epoch: u64,
) -> Result<SoftCache> {
    let noise = training_noise(
        cfg.seed,
        epoch,
        item.example,
        cfg.k_samples,
        cfg.sigma,
        item.x.len(),
    );
    soft_probs_cached(model, item.x, &noise)
}

/// The I1 + lambda*I2 + lambda*I3 objective on one minibatch. I1 and I2 run
/// over the whole batch, I3 over the sensitive sub-batch; the indicator
/// gates of the margin losses are evaluated on values only (no gradient
/// through the gate).
pub fn loss_cost_sensitive_macer(
    model: &MlpModel,
    batch: &[BatchItem],
    cost: &CostMatrix,
    cfg: &TrainConfig,
    epoch: u64,
) -> Result<(LossBreakdown, MlpGrad)> {
    if batch.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    let mut grad = MlpGrad::zeros(model);
    let n = batch.len() as f64;
    let n_sens = batch
        .iter()
        .filter(|it| cost.is_sensitive_label(it.y).unwrap_or(false))
        .count() as f64;

    let mut i1 = 0.0;
    let mut i2 = 0.0;
    let mut i3 = 0.0;
    for item in batch {
        let cache = soft_cache_for(model, item, cfg, epoch)?;
        let probs = &cache.probs;
        let mut dl_dh = vec![0.0; model.m];

        // I1: cross-entropy on the soft smoothed probabilities
        let py = probs[item.y].max(1e-300);
        i1 += -py.ln() / n;
        dl_dh[item.y] += -1.0 / py / n;

        // I2: margin loss on the soft standard radius over [0, gamma1]
        let (r_std, r_std_grad) =
            soft_radius_standard_from_probs(probs, item.y, cfg.sigma, model.beta, cfg.smooth_max);
        if r_std >= 0.0 && r_std <= cfg.gamma1 {
            i2 += (cfg.gamma1 - r_std).max(0.0) / n;
            if r_std < cfg.gamma1 {
                for (g, rg) in dl_dh.iter_mut().zip(&r_std_grad) {
                    *g += cfg.lambda * (-rg) / n;
                }
            }
        }

        // I3: margin loss on the soft cost-sensitive radius over
        // [-gamma2, gamma2], sensitive examples only
        let omega = cost.omega(item.y)?;
        if !omega.is_empty() {
            let (r_cs, r_cs_grad) = soft_radius_cost_sensitive_from_probs(
                probs,
                &omega,
                cfg.sigma,
                model.beta,
                cfg.smooth_max,
            );
            if r_cs >= -cfg.gamma2 && r_cs <= cfg.gamma2 {
                i3 += (cfg.gamma2 - r_cs).max(0.0) / n_sens;
                if r_cs < cfg.gamma2 {
                    for (g, rg) in dl_dh.iter_mut().zip(&r_cs_grad) {
                        *g += cfg.lambda * (-rg) / n_sens;
                    }
                }
            }
        }

        soft_backward(model, &cache, &dl_dh, &mut grad);
    }
    let total = i1 + cfg.lambda * i2 + cfg.lambda * i3;
    Ok((LossBreakdown { i1, i2, i3, total }, grad))
}

/// Gaussian-augmented cross-entropy with per-example weight alpha_w on
/// sensitive examples, normalized by batch size; alpha_w = 1 is exactly the
/// Cohen objective on the same noise draws.
pub fn loss_cohen_r(
    model: &MlpModel,
    batch: &[BatchItem],
    cost: &CostMatrix,
    cfg: &TrainConfig,
    epoch: u64,
) -> Result<(LossBreakdown, MlpGrad)> {
    if batch.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    let mut grad = MlpGrad::zeros(model);
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for item in batch {
        let mut r = rng::stream(cfg.seed, "train-noise", &[epoch, item.example, 0]);
        let delta = rng::gaussian_vec(&mut r, cfg.sigma, item.x.len());
        let u: Vec<f64> = item.x.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let cache = model.forward(&u)?;
        let s = crate::classifier::softmax_scaled(&cache.logits, 1.0);
        let weight = if cost.is_sensitive_label(item.y)? {
            cfg.alpha_w
        } else {
            1.0
        };
        loss += -s[item.y].max(1e-300).ln() * weight / n;
        let dlogits: Vec<f64> = s
            .iter()
            .enumerate()
            .map(|(k, &sk)| (sk - f64::from(k == item.y)) * weight / n)
            .collect();
        model.backward(&cache, &dlogits, &mut grad);
    }
    Ok((
        LossBreakdown {
            i1: loss,
            i2: 0.0,
            i3: 0.0,
            total: loss,
        },
        grad,
    ))
}

/// Dispatch on the configured objective; Cohen is Cohen-R with weight 1.
pub fn batch_loss(
    model: &MlpModel,
    batch: &[BatchItem],
    cost: &CostMatrix,
    cfg: &TrainConfig,
    epoch: u64,
) -> Result<(LossBreakdown, MlpGrad)> {
    match cfg.objective {
        Objective::CsMacer => loss_cost_sensitive_macer(model, batch, cost, cfg, epoch),
        Objective::CohenR => loss_cohen_r(model, batch, cost, cfg, epoch),
        Objective::Cohen => {
            let unweighted = TrainConfig {
                alpha_w: 1.0,
                ..*cfg
            };
            loss_cohen_r(model, batch, cost, &unweighted, epoch)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub total: f64,
    pub train_acc: f64,
}

/// Minibatch gradient descent with the configured objective. Deterministic
/// given the config seed; aborts on a non-finite loss.
pub fn train(
    model: &mut MlpModel,
    dataset: &Dataset,
    cost: &CostMatrix,
    cfg: &TrainConfig,
) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    if dataset.d != model.d {
        return Err(Error::DimensionMismatch {
            expected: model.d,
            got: dataset.d,
        });
    }
    if dataset.m != model.m {
        return Err(Error::DimensionMismatch {
            expected: model.m,
            got: dataset.m,
        });
    }
    let n = dataset.len();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        // deterministic per-epoch shuffle
        let mut order: Vec<usize> = (0..n).collect();
        let mut shuffle_rng = rng::stream(cfg.seed, "shuffle", &[epoch as u64]);
        for i in (1..n).rev() {
            let j = rand::Rng::gen_range(&mut shuffle_rng, 0..=i);
            order.swap(i, j);
        }

        let mut sums = LossBreakdown {
            i1: 0.0,
            i2: 0.0,
            i3: 0.0,
            total: 0.0,
        };
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<BatchItem> = chunk
                .iter()
                .map(|&i| BatchItem {
                    x: &dataset.features[i],
                    y: dataset.labels[i],
                    example: i as u64,
                })
                .collect();
            let (breakdown, grad) = batch_loss(model, &batch, cost, cfg, epoch as u64)?;
            if !breakdown.total.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss {} at epoch {epoch}",
                    breakdown.total
                )));
            }
            model.apply_update(&grad, cfg.lr);
            sums.i1 += breakdown.i1;
            sums.i2 += breakdown.i2;
            sums.i3 += breakdown.i3;
            sums.total += breakdown.total;
            batches += 1;
        }
        let b = batches as f64;
        let correct = dataset
            .features
            .iter()
            .zip(&dataset.labels)
            .filter(|(x, &y)| model.predict(x).map(|p| p == y).unwrap_or(false))
            .count();
        log.push(EpochMetrics {
            epoch,
            i1: sums.i1 / b,
            i2: sums.i2 / b,
            i3: sums.i3 / b,
            total: sums.total / b,
            train_acc: correct as f64 / n as f64,
        });
    }
    Ok(log)
}
