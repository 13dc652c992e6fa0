//! Central finite-difference gradient checks.
//!
//! Every check reduces a matrix-valued function to the scalar
//! `L = Σ proj ⊙ f(·)`, so the upstream gradient handed to a backward pass
//! is `proj` itself. Numerical derivatives use `h = 1e-5` in `f64`.
//!
//! Error per entry is `|a − n| / max(|a|, |n|, 0.01·s)` where `s` is the
//! largest numerical gradient magnitude of the quantity being checked (for
//! parameters, across the whole store); the floor keeps entries that are
//! orders of magnitude below that scale from being judged on rounding noise
//! alone.

use rand::Rng as _;

use super::{Matrix, ParamStore};
use crate::seed;

pub const FD_STEP: f64 = 1e-5;

pub fn random_matrix(rng: &mut seed::Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect())
}

fn projected(out: &Matrix, proj: &Matrix) -> f64 {
    assert_eq!(out.shape(), proj.shape(), "projection shape");
    out.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum()
}

/// Largest per-entry error between an analytic and a numerical gradient.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    max_rel_error_scaled(analytic, numeric, scale)
}

fn max_rel_error_scaled(analytic: &[f64], numeric: &[f64], scale: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let floor = 0.01 * scale.max(1e-12);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn numeric_input_grad(x: &Matrix, mut f: impl FnMut(&Matrix) -> Matrix, proj: &Matrix) -> Matrix {
    let mut g = Matrix::zeros(x.rows(), x.cols());
    let mut xp = x.clone();
    for i in 0..x.data().len() {
        let orig = xp.data()[i];
        xp.data_mut()[i] = orig + FD_STEP;
        let up = projected(&f(&xp), proj);
        xp.data_mut()[i] = orig - FD_STEP;
        let down = projected(&f(&xp), proj);
        xp.data_mut()[i] = orig;
        g.data_mut()[i] = (up - down) / (2.0 * FD_STEP);
    }
    g
}

/// Check `backward(x, proj)` against finite differences of `forward`
/// with respect to the input.
pub fn check_input_grad(
    x: &Matrix,
    forward: impl FnMut(&Matrix) -> Matrix,
    backward: impl FnMut(&Matrix, &Matrix) -> Matrix,
    proj: &Matrix,
) -> f64 {
    check_input_grad_at_scale(x, forward, backward, proj, 0.0)
}

/// Like [`check_input_grad`], with the error floor taken from the larger of
/// the input gradient's own scale and `scale` (typically the parameter
/// gradient scale of the same model).
pub fn check_input_grad_at_scale(
    x: &Matrix,
    forward: impl FnMut(&Matrix) -> Matrix,
    mut backward: impl FnMut(&Matrix, &Matrix) -> Matrix,
    proj: &Matrix,
    scale: f64,
) -> f64 {
    let numeric = numeric_input_grad(x, forward, proj);
    let analytic = backward(x, proj);
    let own = numeric.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    max_rel_error_scaled(analytic.data(), numeric.data(), own.max(scale))
}

/// Check the gradients a backward pass accumulates into every trainable
/// tensor of `store`.
///
/// `forward` and `backward` each receive a fresh clone of the store, so
/// buffer updates made by a forward pass never leak between evaluations.
pub fn check_param_grads(
    store: &mut ParamStore,
    forward: impl FnMut(&mut ParamStore) -> Matrix,
    backward: impl FnMut(&mut ParamStore, &Matrix),
    proj: &Matrix,
) -> f64 {
    check_param_grads_scaled(store, forward, backward, proj).0
}

/// [`check_param_grads`] that also returns the largest numerical gradient
/// magnitude across the store.
pub fn check_param_grads_scaled(
    store: &mut ParamStore,
    mut forward: impl FnMut(&mut ParamStore) -> Matrix,
    mut backward: impl FnMut(&mut ParamStore, &Matrix),
    proj: &Matrix,
) -> (f64, f64) {
    let mut work = store.clone();
    work.zero_grad();
    backward(&mut work, proj);
    let ids = store.trainable_ids();
    let mut numerics = Vec::with_capacity(ids.len());
    for &id in &ids {
        let len = store.value(id).data().len();
        let mut numeric = vec![0.0; len];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let orig = store.value(id).data()[i];
            store.value_mut(id).data_mut()[i] = orig + FD_STEP;
            let up = projected(&forward(&mut store.clone()), proj);
            store.value_mut(id).data_mut()[i] = orig - FD_STEP;
            let down = projected(&forward(&mut store.clone()), proj);
            store.value_mut(id).data_mut()[i] = orig;
            *slot = (up - down) / (2.0 * FD_STEP);
        }
        numerics.push(numeric);
    }
    let scale = numerics.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = ids
        .iter()
        .zip(&numerics)
        .map(|(&id, numeric)| max_rel_error_scaled(work.grad(id).data(), numeric, scale))
        .fold(0.0, f64::max);
    (worst, scale)
}

/// Finite-difference check of a scalar loss whose analytic gradient is
/// returned directly (used for losses).
pub fn check_scalar_input_grad(
    x: &Matrix,
    mut loss: impl FnMut(&Matrix) -> f64,
    analytic: &Matrix,
) -> f64 {
    let mut numeric = Matrix::zeros(x.rows(), x.cols());
    let mut xp = x.clone();
    for i in 0..x.data().len() {
        let orig = xp.data()[i];
        xp.data_mut()[i] = orig + FD_STEP;
        let up = loss(&xp);
        xp.data_mut()[i] = orig - FD_STEP;
        let down = loss(&xp);
        xp.data_mut()[i] = orig;
        numeric.data_mut()[i] = (up - down) / (2.0 * FD_STEP);
    }
    max_rel_error(analytic.data(), numeric.data())
}
