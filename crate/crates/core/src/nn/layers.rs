use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, Scalar};

/// Fully connected layer: `y = x · W^T + b`, `W` is `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![T::zero(); outputs],
        }
    }

    /// He-uniform weights, zero bias.
    pub fn he_uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = (6.0 / inputs as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| T::lit(rng.random_range(-bound..bound)))
            .collect();
        Dense {
            weight: Matrix::from_vec(outputs, inputs, data),
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows
    }

    pub fn forward(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut y = x.matmul_t(&self.weight);
        for r in 0..y.rows {
            for (v, &b) in y.row_mut(r).iter_mut().zip(&self.bias) {
                *v = *v + b;
            }
        }
        y
    }

    /// Returns `(dW, db, dx)` for upstream gradient `dy`.
    pub fn backward(&self, x: &Matrix<T>, dy: &Matrix<T>) -> (Matrix<T>, Vec<T>, Matrix<T>) {
        let dw = dy.t_matmul(x);
        let db = dy.column_sums();
        let dx = dy.matmul(&self.weight);
        (dw, db, dx)
    }
}

/// Per-feature batch normalization with learned scale and shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm<T> {
    pub scale: Vec<T>,
    pub shift: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub eps: T,
    pub momentum: T,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    pub normalized: Matrix<T>,
    pub inv_std: Vec<T>,
    pub batch_mean: Vec<T>,
    pub batch_var: Vec<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(features: usize) -> Self {
        BatchNorm {
            scale: vec![T::one(); features],
            shift: vec![T::zero(); features],
            running_mean: vec![T::zero(); features],
            running_var: vec![T::one(); features],
            eps: T::lit(1e-5),
            momentum: T::lit(0.1),
        }
    }

    pub fn features(&self) -> usize {
        self.scale.len()
    }

    /// Normalizes with batch statistics (biased variance).
    pub fn forward_train(&self, x: &Matrix<T>) -> (Matrix<T>, BatchNormCache<T>) {
        let n = T::from_usize(x.rows).unwrap();
        let mean: Vec<T> = x.column_sums().into_iter().map(|s| s / n).collect();
        let mut var = vec![T::zero(); x.cols];
        for r in 0..x.rows {
            for ((v, &xv), &m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                let d = xv - m;
                *v = *v + d * d;
            }
        }
        var.iter_mut().for_each(|v| *v = *v / n);
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + self.eps).sqrt()).collect();
        let mut normalized = Matrix::zeros(x.rows, x.cols);
        let mut out = Matrix::zeros(x.rows, x.cols);
        for r in 0..x.rows {
            for c in 0..x.cols {
                let h = (x.get(r, c) - mean[c]) * inv_std[c];
                normalized.row_mut(r)[c] = h;
                out.row_mut(r)[c] = h * self.scale[c] + self.shift[c];
            }
        }
        (
            out,
            BatchNormCache {
                normalized,
                inv_std,
                batch_mean: mean,
                batch_var: var,
            },
        )
    }

    pub fn forward_infer(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut out = x.clone();
        for r in 0..out.rows {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let h = (*v - self.running_mean[c]) / (self.running_var[c] + self.eps).sqrt();
                *v = h * self.scale[c] + self.shift[c];
            }
        }
        out
    }

    /// Exponential moving average of batch statistics; unbiased variance.
    pub fn update_running(&mut self, cache: &BatchNormCache<T>, batch: usize) {
        let m = self.momentum;
        let correction = if batch > 1 {
            T::from_usize(batch).unwrap() / T::from_usize(batch - 1).unwrap()
        } else {
            T::one()
        };
        for c in 0..self.features() {
            self.running_mean[c] = (T::one() - m) * self.running_mean[c] + m * cache.batch_mean[c];
            self.running_var[c] =
                (T::one() - m) * self.running_var[c] + m * cache.batch_var[c] * correction;
        }
    }

    /// Returns `(dscale, dshift, dx)`.
    pub fn backward(&self, cache: &BatchNormCache<T>, dy: &Matrix<T>) -> (Vec<T>, Vec<T>, Matrix<T>) {
        let rows = dy.rows;
        let n = T::from_usize(rows).unwrap();
        let cols = dy.cols;
        let mut dscale = vec![T::zero(); cols];
        let dshift = dy.column_sums();
        let mut sum_dh = vec![T::zero(); cols];
        let mut sum_dh_h = vec![T::zero(); cols];
        for r in 0..rows {
            for c in 0..cols {
                let g = dy.get(r, c);
                let h = cache.normalized.get(r, c);
                dscale[c] = dscale[c] + g * h;
                let dh = g * self.scale[c];
                sum_dh[c] = sum_dh[c] + dh;
                sum_dh_h[c] = sum_dh_h[c] + dh * h;
            }
        }
        let mut dx = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let dh = dy.get(r, c) * self.scale[c];
                let h = cache.normalized.get(r, c);
                dx.row_mut(r)[c] = cache.inv_std[c] / n * (n * dh - sum_dh[c] - h * sum_dh_h[c]);
            }
        }
        (dscale, dshift, dx)
    }
}

#[inline]
pub fn leaky_relu<T: Scalar>(x: T, leak: T) -> T {
    if x > T::zero() {
        x
    } else {
        x * leak
    }
}

#[inline]
pub fn leaky_relu_grad<T: Scalar>(x: T, leak: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        leak
    }
}

/// Inverted-dropout multipliers: `0` with probability `rate`, else `1 / (1 - rate)`.
pub fn dropout_mask<T: Scalar, R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<T> {
    if rate == 0.0 {
        return vec![T::one(); len];
    }
    let keep = T::lit(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| if rng.random_bool(rate) { T::zero() } else { keep })
        .collect()
}
