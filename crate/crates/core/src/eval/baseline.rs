//! L2-regularized logistic regression on flattened bundles.

use serde::{Deserialize, Serialize};

use crate::domain::FeatureBundle;
use crate::error::{bail, Result};
use crate::nn::layers::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub l2: f64,
    pub iterations: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { l2: 1e-2, iterations: 1000 }
    }
}

/// All matrices row-major, followed by the vectors.
pub fn flatten_bundle(b: &FeatureBundle) -> Vec<f64> {
    let mut v = Vec::new();
    v.extend_from_slice(&b.x_s_num);
    v.extend_from_slice(b.x_s_cat.data());
    v.extend_from_slice(b.x_di.data());
    v.extend_from_slice(b.x_dn.data());
    v.extend_from_slice(b.x_dc.data());
    v.extend_from_slice(&b.kg_vec);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    /// Standardizes columns (constant columns are dropped by a zero scale)
    /// and minimizes mean log-loss plus `l2/2 |w|^2` with accelerated
    /// gradient descent.
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], cfg: &LogisticConfig) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            bail!(Shape, "{} rows but {} targets", xs.len(), ys.len());
        }
        let d = xs[0].len();
        if xs.iter().any(|x| x.len() != d) {
            bail!(Shape, "rows of unequal width");
        }
        if cfg.l2 < 0.0 {
            bail!(Config, "l2 must be non-negative");
        }
        let n = xs.len() as f64;
        let mut mean = vec![0.0; d];
        for x in xs {
            mean.iter_mut().zip(x).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; d];
        for x in xs {
            for j in 0..d {
                var[j] += (x[j] - mean[j]).powi(2) / n;
            }
        }
        let scale: Vec<f64> = var.iter().map(|v| if *v > 1e-18 { 1.0 / v.sqrt() } else { 0.0 }).collect();
        let z: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| (0..d).map(|j| (x[j] - mean[j]) * scale[j]).collect())
            .collect();

        let active = scale.iter().filter(|s| **s > 0.0).count() as f64;
        let lipschitz = 0.25 * (active + 1.0) + cfg.l2;
        let step = 1.0 / lipschitz;

        let mut w = vec![0.0; d];
        let base = ys.iter().sum::<f64>() / n;
        let mut b = if base > 0.0 && base < 1.0 { (base / (1.0 - base)).ln() } else { 0.0 };
        let (mut w_prev, mut b_prev) = (w.clone(), b);
        let mut gw = vec![0.0; d];
        for it in 0..cfg.iterations {
            let momentum = it as f64 / (it as f64 + 3.0);
            let yw: Vec<f64> = (0..d).map(|j| w[j] + momentum * (w[j] - w_prev[j])).collect();
            let yb = b + momentum * (b - b_prev);
            gw.iter_mut().zip(&yw).for_each(|(g, wj)| *g = cfg.l2 * wj);
            let mut gb = 0.0;
            for (x, &y) in z.iter().zip(ys) {
                let p = sigmoid(yb + x.iter().zip(&yw).map(|(a, b)| a * b).sum::<f64>());
                let r = (p - y) / n;
                gb += r;
                gw.iter_mut().zip(x).for_each(|(g, v)| *g += r * v);
            }
            w_prev = std::mem::replace(&mut w, yw.iter().zip(&gw).map(|(a, g)| a - step * g).collect());
            b_prev = std::mem::replace(&mut b, yb - step * gb);
        }
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            bail!(Numeric, "logistic regression diverged");
        }
        Ok(LogisticModel { mean, scale, weights: w, bias: b })
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let z: f64 = (0..self.weights.len())
            .map(|j| (x[j] - self.mean[j]) * self.scale[j] * self.weights[j])
            .sum();
        sigmoid(self.bias + z)
    }
}

/// Fits on `train` bundles and scores `test` bundles.
pub fn baseline_logistic(train: &[FeatureBundle], test: &[FeatureBundle], cfg: &LogisticConfig) -> Result<Vec<f64>> {
    let xs: Vec<Vec<f64>> = train.iter().map(flatten_bundle).collect();
    let ys: Vec<f64> = train.iter().map(|b| b.label_at_cutoff.target()).collect();
    let model = LogisticModel::fit(&xs, &ys, cfg)?;
    test.iter()
        .map(|b| {
            let x = flatten_bundle(b);
            if x.len() != model.weights.len() {
                bail!(Shape, "bundle width {} differs from training width {}", x.len(), model.weights.len());
            }
            Ok(model.score(&x))
        })
        .collect()
}
