use rand::Rng as _;

use super::{Matrix, Mode, NnError, ParamId, ParamStore};
use crate::seed;

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

/// `Y = X·W + b` with `b` broadcast over rows.
pub fn linear_forward(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix, NnError> {
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(NnError::shape("linear bias", w.shape(), b.shape()));
    }
    let mut y = x.matmul(w)?;
    for r in 0..y.rows() {
        y.row_mut(r).iter_mut().zip(b.row(0)).for_each(|(v, bb)| *v += bb);
    }
    Ok(y)
}

/// Returns `(dX, dW, db)`.
pub fn linear_backward(x: &Matrix, w: &Matrix, dy: &Matrix) -> Result<(Matrix, Matrix, Matrix), NnError> {
    let dx = dy.matmul_t(w)?;
    let dw = x.t_matmul(dy)?;
    let db = Matrix::from_vec(1, dy.cols(), dy.column_sums());
    Ok((dx, dw, db))
}

/// Affine layer whose tensors live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    /// Glorot-initialized weight `"{prefix}.w"` and zero bias `"{prefix}.b"`.
    pub fn register(store: &mut ParamStore, prefix: &str, in_dim: usize, out_dim: usize, rng: &mut seed::Rng) -> Self {
        let w = store.add(format!("{prefix}.w"), super::glorot_uniform(rng, in_dim, out_dim), true);
        let b = store.add(format!("{prefix}.b"), Matrix::zeros(1, out_dim), true);
        Self { w, b }
    }

    pub fn forward(&self, store: &ParamStore, x: &Matrix) -> Result<Matrix, NnError> {
        linear_forward(x, store.value(self.w), store.value(self.b))
    }

    pub fn backward(&self, store: &mut ParamStore, x: &Matrix, dy: &Matrix) -> Result<Matrix, NnError> {
        let (dx, dw, db) = linear_backward(x, store.value(self.w), dy)?;
        store.accumulate_grad(self.w, &dw);
        store.accumulate_grad(self.b, &db);
        Ok(dx)
    }
}

// ---------------------------------------------------------------------------
// ELU (alpha = 1)
// ---------------------------------------------------------------------------

pub fn elu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        v.exp_m1()
    }
}

pub fn elu_forward(x: &Matrix) -> Matrix {
    x.map(elu)
}

/// Gradient w.r.t. the ELU input `x`.
pub fn elu_backward(x: &Matrix, dy: &Matrix) -> Matrix {
    x.zip_map(dy, |v, g| if v > 0.0 { g } else { g * v.exp() })
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-feature batch normalization over the rows (nodes) of its input.
///
/// Train mode normalizes with the biased batch variance and updates the
/// running statistics as `m ← (1−ρ)·m + ρ·batch`, where the running
/// variance takes the unbiased batch variance. Eval mode uses the running
/// statistics only.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub eps: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    x_hat: Matrix,
    inv_std: Vec<f64>,
    mode: Mode,
}

impl BatchNorm {
    pub fn register(store: &mut ParamStore, prefix: &str, dim: usize) -> Self {
        Self {
            gamma: store.add(format!("{prefix}.gamma"), Matrix::filled(1, dim, 1.0), true),
            beta: store.add(format!("{prefix}.beta"), Matrix::zeros(1, dim), true),
            running_mean: store.add(format!("{prefix}.running_mean"), Matrix::zeros(1, dim), false),
            running_var: store.add(format!("{prefix}.running_var"), Matrix::filled(1, dim, 1.0), false),
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        }
    }

    pub fn forward(&self, store: &mut ParamStore, x: &Matrix, mode: Mode) -> Result<(Matrix, BatchNormCache), NnError> {
        let (n, d) = x.shape();
        if store.value(self.gamma).cols() != d {
            return Err(NnError::shape("batchnorm", store.value(self.gamma).shape(), x.shape()));
        }
        let (mean, var) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(NnError::DegenerateBatch { n });
                }
                let mean: Vec<f64> = x.column_sums().iter().map(|s| s / n as f64).collect();
                let mut var = vec![0.0; d];
                for r in 0..n {
                    for (j, v) in x.row(r).iter().enumerate() {
                        var[j] += (v - mean[j]).powi(2);
                    }
                }
                var.iter_mut().for_each(|v| *v /= n as f64);
                let rho = self.momentum;
                let unbiased = n as f64 / (n as f64 - 1.0);
                let rm = store.value_mut(self.running_mean);
                rm.data_mut().iter_mut().zip(&mean).for_each(|(m, b)| *m = (1.0 - rho) * *m + rho * b);
                let rv = store.value_mut(self.running_var);
                rv.data_mut().iter_mut().zip(&var).for_each(|(m, b)| *m = (1.0 - rho) * *m + rho * b * unbiased);
                (mean, var)
            }
            Mode::Eval => (
                store.value(self.running_mean).row(0).to_vec(),
                store.value(self.running_var).row(0).to_vec(),
            ),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut x_hat = Matrix::zeros(n, d);
        for r in 0..n {
            for (j, (o, v)) in x_hat.row_mut(r).iter_mut().zip(x.row(r)).enumerate() {
                *o = (v - mean[j]) * inv_std[j];
            }
        }
        let gamma = store.value(self.gamma).row(0);
        let beta = store.value(self.beta).row(0);
        let mut y = x_hat.clone();
        for r in 0..n {
            for (j, o) in y.row_mut(r).iter_mut().enumerate() {
                *o = *o * gamma[j] + beta[j];
            }
        }
        Ok((y, BatchNormCache { x_hat, inv_std, mode }))
    }

    pub fn backward(&self, store: &mut ParamStore, cache: &BatchNormCache, dy: &Matrix) -> Matrix {
        let (n, d) = dy.shape();
        let mut dgamma = vec![0.0; d];
        let mut dbeta = vec![0.0; d];
        for r in 0..n {
            for j in 0..d {
                dgamma[j] += dy.get(r, j) * cache.x_hat.get(r, j);
                dbeta[j] += dy.get(r, j);
            }
        }
        let gamma = store.value(self.gamma).row(0).to_vec();
        let mut dx = Matrix::zeros(n, d);
        match cache.mode {
            Mode::Eval => {
                for r in 0..n {
                    for j in 0..d {
                        dx.set(r, j, dy.get(r, j) * gamma[j] * cache.inv_std[j]);
                    }
                }
            }
            Mode::Train => {
                // dx = γ·inv_std/n · (n·dy − Σdy − x̂·Σ(dy·x̂))
                let nf = n as f64;
                for r in 0..n {
                    for j in 0..d {
                        let g = nf * dy.get(r, j) - dbeta[j] - cache.x_hat.get(r, j) * dgamma[j];
                        dx.set(r, j, gamma[j] * cache.inv_std[j] / nf * g);
                    }
                }
            }
        }
        store.accumulate_grad(self.gamma, &Matrix::from_vec(1, d, dgamma));
        store.accumulate_grad(self.beta, &Matrix::from_vec(1, d, dbeta));
        dx
    }
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// Inverted dropout. Returns the output and the per-entry multiplier
/// (`0` or `1/(1−p)`) that the backward pass must reuse; `None` when the
/// op is the identity.
pub fn dropout_forward(x: &Matrix, p: f64, rng: &mut seed::Rng, mode: Mode) -> (Matrix, Option<Matrix>) {
    assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
    if mode == Mode::Eval || p == 0.0 {
        return (x.clone(), None);
    }
    let keep = 1.0 / (1.0 - p);
    let mask = Matrix::from_vec(
        x.rows(),
        x.cols(),
        (0..x.rows() * x.cols())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect(),
    );
    (x.zip_map(&mask, |a, m| a * m), Some(mask))
}

pub fn dropout_backward(dy: &Matrix, mask: Option<&Matrix>) -> Matrix {
    match mask {
        Some(m) => dy.zip_map(m, |g, k| g * k),
        None => dy.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::gradcheck::{check_input_grad, check_param_grads, random_matrix};

    #[test]
    fn linear_identity_input() {
        let w = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let y = linear_forward(&Matrix::identity(2), &w, &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(y, w);
    }

    #[test]
    fn linear_bias_only() {
        let b = Matrix::from_rows(&[[0.5, -1.0, 2.0]]);
        let y = linear_forward(&Matrix::zeros(4, 2), &Matrix::filled(2, 3, 7.0), &b).unwrap();
        for r in 0..4 {
            assert_eq!(y.row(r), b.row(0));
        }
    }

    #[test]
    fn linear_shape_error() {
        assert!(linear_forward(&Matrix::zeros(2, 3), &Matrix::zeros(2, 2), &Matrix::zeros(1, 2)).is_err());
        assert!(linear_forward(&Matrix::zeros(2, 2), &Matrix::zeros(2, 2), &Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn linear_gradients() {
        let mut rng = seed::rng(1);
        let x = random_matrix(&mut rng, 3, 4, 1.0);
        let mut store = ParamStore::new();
        let layer = Linear {
            w: store.add("w", random_matrix(&mut rng, 4, 2, 1.0), true),
            b: store.add("b", random_matrix(&mut rng, 1, 2, 1.0), true),
        };
        let proj = random_matrix(&mut rng, 3, 2, 1.0);
        let err = check_param_grads(
            &mut store,
            |s| layer.forward(s, &x).unwrap(),
            |s, dy| {
                layer.backward(s, &x, dy).unwrap();
            },
            &proj,
        );
        assert!(err < 1e-6, "{err}");
        let err = check_input_grad(&x, |x| layer.forward(&store, x).unwrap(), |x, dy| {
            linear_backward(x, store.value(layer.w), dy).unwrap().0
        }, &proj);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn elu_values() {
        assert_eq!(elu(0.0), 0.0);
        assert!((elu(-50.0) + 1.0).abs() < 1e-12);
        assert_eq!(elu(2.5), 2.5);
    }

    #[test]
    fn elu_gradient() {
        let mut rng = seed::rng(2);
        let x = random_matrix(&mut rng, 4, 5, 2.0);
        let proj = random_matrix(&mut rng, 4, 5, 1.0);
        let err = check_input_grad(&x, elu_forward, elu_backward, &proj);
        assert!(err < 1e-6, "{err}");
    }

    fn bn_store(d: usize) -> (ParamStore, BatchNorm) {
        let mut store = ParamStore::new();
        let bn = BatchNorm::register(&mut store, "bn", d);
        (store, bn)
    }

    #[test]
    fn bn_zero_variance_column_maps_to_zero() {
        let (mut store, bn) = bn_store(2);
        let x = Matrix::from_rows(&[[3.0, 1.0], [3.0, 2.0], [3.0, 4.0]]);
        let (y, _) = bn.forward(&mut store, &x, Mode::Train).unwrap();
        for r in 0..3 {
            assert_eq!(y.get(r, 0), 0.0);
        }
    }

    #[test]
    fn bn_train_output_is_standardized() {
        let (mut store, bn) = bn_store(3);
        let mut rng = seed::rng(3);
        let x = random_matrix(&mut rng, 8, 3, 4.0);
        let (y, _) = bn.forward(&mut store, &x, Mode::Train).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = (0..8).map(|r| y.get(r, j)).collect();
            let mean = col.iter().sum::<f64>() / 8.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            let xcol: Vec<f64> = (0..8).map(|r| x.get(r, j)).collect();
            let xm = xcol.iter().sum::<f64>() / 8.0;
            let xv = xcol.iter().map(|v| (v - xm).powi(2)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-10);
            // exactly xv / (xv + eps); within 1e-6 of that and of 1 up to eps
            assert!((var - xv / (xv + BN_EPS)).abs() < 1e-6, "{var}");
            assert!((var - 1.0).abs() < 1e-6 + BN_EPS / xv);
        }
    }

    #[test]
    fn bn_running_stats_and_eval() {
        let (mut store, bn) = bn_store(1);
        let x = Matrix::from_rows(&[[1.0], [3.0]]);
        bn.forward(&mut store, &x, Mode::Train).unwrap();
        // batch mean 2, unbiased var 2
        assert!((store.value(bn.running_mean).get(0, 0) - 0.2).abs() < 1e-15);
        assert!((store.value(bn.running_var).get(0, 0) - (0.9 + 0.2)).abs() < 1e-15);
        let (y, _) = bn.forward(&mut store, &Matrix::from_rows(&[[0.2]]), Mode::Eval).unwrap();
        assert!(y.get(0, 0).abs() < 1e-15);
    }

    #[test]
    fn bn_degenerate_batch() {
        let (mut store, bn) = bn_store(2);
        assert!(matches!(
            bn.forward(&mut store, &Matrix::zeros(1, 2), Mode::Train),
            Err(NnError::DegenerateBatch { n: 1 })
        ));
        assert!(bn.forward(&mut store, &Matrix::zeros(1, 2), Mode::Eval).is_ok());
    }

    #[test]
    fn bn_gradients_train_and_eval() {
        for mode in [Mode::Train, Mode::Eval] {
            let mut rng = seed::rng(4);
            let (mut store, bn) = bn_store(3);
            let g = store.id("bn.gamma").unwrap();
            *store.value_mut(g) = random_matrix(&mut rng, 1, 3, 1.0);
            let b = store.id("bn.beta").unwrap();
            *store.value_mut(b) = random_matrix(&mut rng, 1, 3, 1.0);
            let x = random_matrix(&mut rng, 6, 3, 1.5);
            let proj = random_matrix(&mut rng, 6, 3, 1.0);
            let err = check_param_grads(
                &mut store,
                |s| bn.forward(s, &x, mode).unwrap().0,
                |s, dy| {
                    let (_, cache) = bn.forward(s, &x, mode).unwrap();
                    bn.backward(s, &cache, dy);
                },
                &proj,
            );
            assert!(err < 1e-5, "{mode:?} {err}");
            let mut s2 = store.clone();
            let err = check_input_grad(
                &x,
                |x| bn.forward(&mut store.clone(), x, mode).unwrap().0,
                |x, dy| {
                    let (_, cache) = bn.forward(&mut s2, x, mode).unwrap();
                    bn.backward(&mut s2, &cache, dy)
                },
                &proj,
            );
            assert!(err < 1e-5, "{mode:?} {err}");
        }
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = seed::rng(5);
        let x = random_matrix(&mut rng, 3, 3, 1.0);
        assert_eq!(dropout_forward(&x, 0.0, &mut rng, Mode::Train).0, x);
        assert_eq!(dropout_forward(&x, 0.9, &mut rng, Mode::Eval).0, x);
    }

    #[test]
    fn dropout_rate_and_mask_reuse() {
        let mut rng = seed::rng(6);
        let x = Matrix::filled(1000, 100, 1.0);
        let (y, mask) = dropout_forward(&x, 0.1, &mut rng, Mode::Train);
        let dropped = y.data().iter().filter(|&&v| v == 0.0).count() as f64 / 1e5;
        assert!((dropped - 0.1).abs() < 0.01, "{dropped}");
        assert!(y.data().iter().all(|&v| v == 0.0 || (v - 1.0 / 0.9).abs() < 1e-15));
        let dx = dropout_backward(&Matrix::filled(1000, 100, 2.0), mask.as_ref());
        assert_eq!(dx, y.scale(2.0));
    }
}
