use super::{Matrix, NnError};

/// Unnormalized masked weighted cross-entropy.
///
/// Returns `(Σ w_y·CE, Σ w_y, dLogits)` over the masked rows, where
/// `dLogits` is the gradient of the *unnormalized* sum. Callers that
/// accumulate over several pages divide by the total weight once.
pub fn weighted_ce_sum(
    logits: &Matrix,
    labels: &[usize],
    class_weights: &[f64],
    mask: &[bool],
) -> Result<(f64, f64, Matrix), NnError> {
    let (n, c) = logits.shape();
    if labels.len() != n || mask.len() != n || class_weights.len() != c {
        return Err(NnError::Shape(format!(
            "weighted_ce: logits {n}x{c}, {} labels, {} mask entries, {} weights",
            labels.len(),
            mask.len(),
            class_weights.len()
        )));
    }
    let mut total = 0.0;
    let mut weight = 0.0;
    let mut grad = Matrix::zeros(n, c);
    for i in (0..n).filter(|&i| mask[i]) {
        let y = labels[i];
        if y >= c {
            return Err(NnError::Shape(format!("label {y} out of range for {c} classes")));
        }
        let w = class_weights[y];
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        total += w * (log_z - row[y]);
        weight += w;
        let g = grad.row_mut(i);
        for (k, gk) in g.iter_mut().enumerate() {
            let p = (row[k] - log_z).exp();
            *gk = w * (p - if k == y { 1.0 } else { 0.0 });
        }
    }
    Ok((total, weight, grad))
}

/// Weighted-mean cross-entropy over the masked rows and its gradient with
/// respect to the logits. Unmasked rows get exactly zero gradient.
pub fn weighted_ce_loss(
    logits: &Matrix,
    labels: &[usize],
    class_weights: &[f64],
    mask: &[bool],
) -> Result<(f64, Matrix), NnError> {
    if !mask.iter().any(|&m| m) {
        return Err(NnError::EmptyMask);
    }
    let (total, weight, mut grad) = weighted_ce_sum(logits, labels, class_weights, mask)?;
    grad.scale_in_place(1.0 / weight);
    Ok((total / weight, grad))
}
