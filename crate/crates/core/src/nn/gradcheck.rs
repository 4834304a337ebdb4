//! Finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{LayerKind, ModelInput, OmniRank, ParamGroup};
use crate::error::{bail, Result};

/// Denominator floor so that near-zero gradients compare by absolute error.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupCheck {
    pub name: String,
    pub kind: LayerKind,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Parameter index with the largest error.
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub groups: Vec<GroupCheck>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn failures(&self, tolerance: f64) -> Vec<&GroupCheck> {
        self.groups.iter().filter(|g| !(g.max_rel_error < tolerance)).collect()
    }

    /// Errors with the offending layers if any exceeds `tolerance`.
    pub fn ensure(&self, tolerance: f64) -> Result<()> {
        let bad = self.failures(tolerance);
        if bad.is_empty() {
            return Ok(());
        }
        let list: Vec<String> = bad
            .iter()
            .map(|g| {
                format!(
                    "{} (param {}: analytic {:.6e}, numeric {:.6e}, rel {:.3e})",
                    g.name, g.worst_index, g.worst_analytic, g.worst_numeric, g.max_rel_error
                )
            })
            .collect();
        bail!(Numeric, "gradient check exceeded {:e}: {}", tolerance, list.join("; "))
    }

    pub fn kind_max(&self, kind: LayerKind) -> Option<f64> {
        self.groups
            .iter()
            .filter(|g| g.kind == kind)
            .map(|g| g.max_rel_error)
            .fold(None, |a, e| Some(a.map_or(e, |a: f64| a.max(e))))
    }
}

/// Compares `analytic` against central differences of `loss` for up to
/// `samples` randomly chosen parameters from each group.
pub fn grad_check_fn<F: Fn(&[f64]) -> f64>(
    loss: F,
    params: &[f64],
    analytic: &[f64],
    groups: &[ParamGroup],
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = params.to_vec();
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let picks: Vec<usize> = if g.len <= samples {
            (0..g.len).collect()
        } else {
            let mut v = sample(&mut rng, g.len, samples).into_vec();
            v.sort_unstable();
            v
        };
        let mut check = GroupCheck {
            name: g.name.clone(),
            kind: g.kind,
            checked: picks.len(),
            max_rel_error: 0.0,
            worst_index: g.offset,
            worst_analytic: 0.0,
            worst_numeric: 0.0,
        };
        for j in picks {
            let i = g.offset + j;
            let orig = p[i];
            p[i] = orig + epsilon;
            let up = loss(&p);
            p[i] = orig - epsilon;
            let down = loss(&p);
            p[i] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            let err = relative_error(analytic[i], numeric);
            if err > check.max_rel_error || err.is_nan() {
                check.max_rel_error = err;
                check.worst_index = i;
                check.worst_analytic = analytic[i];
                check.worst_numeric = numeric;
            }
        }
        out.push(check);
    }
    let max_rel_error = out.iter().map(|g| g.max_rel_error).fold(0.0, f64::max);
    GradCheckReport { groups: out, max_rel_error }
}

/// Checks the network's gradient of the cross-entropy loss on one example.
pub fn grad_check(
    model: &OmniRank,
    params: &[f64],
    input: &ModelInput,
    target: f64,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    model.check_input(input)?;
    if params.len() != model.n_params() {
        bail!(Shape, "expected {} parameters, got {}", model.n_params(), params.len());
    }
    let mut grad = vec![0.0; params.len()];
    model.loss_and_grad(params, input, target, super::model::Mode::Eval, &mut grad);
    Ok(grad_check_fn(
        |p| model.loss(p, input, target),
        params,
        &grad,
        &model.param_groups(),
        epsilon,
        samples,
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_squared_loss_is_exact() {
        let x = [0.5, -1.25, 2.0];
        let y = 0.7;
        let loss = |w: &[f64]| {
            let pred: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
            0.5 * (pred - y) * (pred - y)
        };
        let w = [0.3, 0.1, -0.4];
        let pred: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
        let grad: Vec<f64> = x.iter().map(|xi| (pred - y) * xi).collect();
        let groups = [ParamGroup { name: "w".into(), kind: LayerKind::Dense, offset: 0, len: 3 }];
        let r = grad_check_fn(loss, &w, &grad, &groups, 1e-5, 10, 0);
        assert!(r.max_rel_error < 1e-8, "{}", r.max_rel_error);
    }

    #[test]
    fn wrong_gradient_is_reported_by_name() {
        let loss = |w: &[f64]| w[0] * w[0] + w[1];
        let groups = [
            ParamGroup { name: "good".into(), kind: LayerKind::Dense, offset: 0, len: 1 },
            ParamGroup { name: "bad".into(), kind: LayerKind::Lstm, offset: 1, len: 1 },
        ];
        let r = grad_check_fn(loss, &[1.5, 0.0], &[3.0, 2.0], &groups, 1e-5, 10, 0);
        let err = r.ensure(1e-4).unwrap_err().to_string();
        assert!(err.contains("bad") && !err.contains("good"));
    }
}
