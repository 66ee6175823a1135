//! Loss functions with closed-form gradients.
//!
//! Both losses are sums over their sets (no averaging constants); callers
//! that want a mean divide afterwards. The binary cross entropy works in
//! log-sigmoid space because decoder scores reach magnitudes around 30,
//! far past where a naive sigmoid saturates.

use crate::error::{Result, RgcnError};
use crate::graph::LabeledNodeSet;
use crate::sparse::DenseMatrix;

/// Categorical cross entropy over labeled rows of a row-softmaxed matrix:
/// `L = -sum_{i in labeled} ln h[i, class_i]`. The returned gradient is
/// taken with respect to the pre-softmax logits: `(softmax - onehot)` on
/// labeled rows, zero elsewhere.
pub fn nc_loss(h: &DenseMatrix, labels: &LabeledNodeSet) -> Result<(f64, DenseMatrix)> {
    if h.cols() != labels.class_count() {
        return Err(RgcnError::dimension(format!(
            "predictions have {} columns, label set has {} classes",
            h.cols(),
            labels.class_count()
        )));
    }
    for &(node, _) in labels.pairs() {
        if node >= h.rows() {
            return Err(RgcnError::Argument(format!(
                "labeled row {node} outside prediction matrix with {} rows",
                h.rows()
            )));
        }
        let sum: f64 = h.row(node).iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(RgcnError::Domain(format!(
                "row {node} sums to {sum}, expected softmax rows"
            )));
        }
    }
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(h.rows(), h.cols());
    for &(node, class) in labels.pairs() {
        let p = h.get(node, class);
        loss -= p.max(f64::MIN_POSITIVE).ln();
        let g_row = grad.row_mut(node);
        for (k, g) in g_row.iter_mut().enumerate() {
            *g = h.get(node, k) - if k == class { 1.0 } else { 0.0 };
        }
    }
    Ok((loss, grad))
}

/// Fused stable softmax + cross entropy straight from logits; same loss
/// and gradient as [`nc_loss`] composed with a row softmax.
pub fn nc_loss_from_logits(
    logits: &DenseMatrix,
    labels: &LabeledNodeSet,
) -> Result<(f64, DenseMatrix)> {
    if logits.cols() != labels.class_count() {
        return Err(RgcnError::dimension(format!(
            "logits have {} columns, label set has {} classes",
            logits.cols(),
            labels.class_count()
        )));
    }
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
    for &(node, class) in labels.pairs() {
        if node >= logits.rows() {
            return Err(RgcnError::Argument(format!(
                "labeled row {node} outside logit matrix with {} rows",
                logits.rows()
            )));
        }
        let row = logits.row(node);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += lse - row[class];
        let g_row = grad.row_mut(node);
        for (k, g) in g_row.iter_mut().enumerate() {
            *g = (row[k] - lse).exp() - if k == class { 1.0 } else { 0.0 };
        }
    }
    Ok((loss, grad))
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic sigmoid evaluated stably.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross entropy over scores with indicators `y` in {0, 1}:
/// `L = sum_t y ln l(x) + (1 - y) ln(1 - l(x))`, negated, computed in
/// log space. Gradient per score is `l(x) - y`.
pub fn lp_loss(scores: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    if scores.len() != labels.len() {
        return Err(RgcnError::dimension(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(scores.len());
    for (&x, &y) in scores.iter().zip(labels.iter()) {
        loss += y * softplus(-x) + (1.0 - y) * softplus(x);
        grad.push(sigmoid(x) - y);
    }
    Ok((loss, grad))
}
