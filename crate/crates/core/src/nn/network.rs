use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{dropout_mask, leaky_relu, leaky_relu_grad, BatchNorm, BatchNormCache, Dense};
use super::loss::{softmax_cross_entropy, LossOutput};
use super::{Matrix, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics and dropout.
    Train,
    /// Running statistics, no dropout.
    Infer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayer<T> {
    pub dense: Dense<T>,
    pub norm: BatchNorm<T>,
}

/// `[dense -> batchnorm -> leaky ReLU -> dropout] x k -> dense`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network<T> {
    pub hidden: Vec<HiddenLayer<T>>,
    pub output: Dense<T>,
    pub leak: T,
    pub dropout: f64,
}

#[derive(Debug, Clone)]
pub struct NetworkCache<T> {
    /// Input of every dense layer, the output layer last.
    inputs: Vec<Matrix<T>>,
    /// Batchnorm outputs, before the activation.
    normalized: Vec<Matrix<T>>,
    norm: Vec<BatchNormCache<T>>,
    masks: Vec<Vec<T>>,
}

/// One gradient tensor per parameter tensor, in [`Network::param_names`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Scalar> Network<T> {
    /// He-uniform initialization.
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        width: usize,
        outputs: usize,
        layers: usize,
        leak: f64,
        dropout: f64,
        rng: &mut R,
    ) -> Self {
        let mut hidden = Vec::with_capacity(layers);
        let mut fan_in = inputs;
        for _ in 0..layers {
            hidden.push(HiddenLayer {
                dense: Dense::he_uniform(fan_in, width, rng),
                norm: BatchNorm::new(width),
            });
            fan_in = width;
        }
        Network {
            hidden,
            output: Dense::he_uniform(fan_in, outputs, rng),
            leak: T::lit(leak),
            dropout,
        }
    }

    /// All weights, biases, scales and shifts zero.
    pub fn zeroed(inputs: usize, width: usize, outputs: usize, layers: usize) -> Self {
        let mut hidden = Vec::with_capacity(layers);
        let mut fan_in = inputs;
        for _ in 0..layers {
            let mut norm = BatchNorm::new(width);
            norm.scale.iter_mut().for_each(|s| *s = T::zero());
            hidden.push(HiddenLayer {
                dense: Dense::zeros(fan_in, width),
                norm,
            });
            fan_in = width;
        }
        Network {
            hidden,
            output: Dense::zeros(fan_in, outputs),
            leak: T::lit(0.01),
            dropout: 0.5,
        }
    }

    pub fn inputs(&self) -> usize {
        self.hidden
            .first()
            .map_or(self.output.inputs(), |h| h.dense.inputs())
    }

    pub fn outputs(&self) -> usize {
        self.output.outputs()
    }

    fn check_input(&self, x: &Matrix<T>) -> Result<()> {
        if x.cols != self.inputs() {
            return Err(Error::Shape(format!(
                "input width {} does not match network input {}",
                x.cols,
                self.inputs()
            )));
        }
        Ok(())
    }

    pub fn forward_infer(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.hidden {
            let mut y = layer.norm.forward_infer(&layer.dense.forward(&h));
            y.data.iter_mut().for_each(|v| *v = leaky_relu(*v, self.leak));
            h = y;
        }
        Ok(self.output.forward(&h))
    }

    /// Training-mode forward pass. Running statistics are not touched; call
    /// [`Network::commit_running`] with the returned cache for that.
    pub fn forward_train<R: Rng + ?Sized>(
        &self,
        x: &Matrix<T>,
        rng: &mut R,
    ) -> Result<(Matrix<T>, NetworkCache<T>)> {
        self.check_input(x)?;
        let mut cache = NetworkCache {
            inputs: Vec::with_capacity(self.hidden.len() + 1),
            normalized: Vec::with_capacity(self.hidden.len()),
            norm: Vec::with_capacity(self.hidden.len()),
            masks: Vec::with_capacity(self.hidden.len()),
        };
        let mut h = x.clone();
        for layer in &self.hidden {
            let z = layer.dense.forward(&h);
            let (y, nc) = layer.norm.forward_train(&z);
            let mask: Vec<T> = dropout_mask(y.data.len(), self.dropout, rng);
            let mut a = y.clone();
            for (v, &m) in a.data.iter_mut().zip(&mask) {
                *v = leaky_relu(*v, self.leak) * m;
            }
            cache.inputs.push(h);
            cache.normalized.push(y);
            cache.norm.push(nc);
            cache.masks.push(mask);
            h = a;
        }
        let logits = self.output.forward(&h);
        cache.inputs.push(h);
        Ok((logits, cache))
    }

    pub fn forward<R: Rng + ?Sized>(&self, x: &Matrix<T>, mode: Mode, rng: &mut R) -> Result<Matrix<T>> {
        match mode {
            Mode::Infer => self.forward_infer(x),
            Mode::Train => Ok(self.forward_train(x, rng)?.0),
        }
    }

    pub fn backward(&self, cache: &NetworkCache<T>, dlogits: &Matrix<T>) -> Gradients<T> {
        let k = self.hidden.len();
        let (dw, db, mut dh) = self.output.backward(&cache.inputs[k], dlogits);
        let mut per_layer: Vec<[Vec<T>; 4]> = Vec::with_capacity(k);
        for (i, layer) in self.hidden.iter().enumerate().rev() {
            let y = &cache.normalized[i];
            for ((g, &m), &yv) in dh.data.iter_mut().zip(&cache.masks[i]).zip(&y.data) {
                *g = *g * m * leaky_relu_grad(yv, self.leak);
            }
            let (dscale, dshift, dz) = layer.norm.backward(&cache.norm[i], &dh);
            let (lw, lb, dx) = layer.dense.backward(&cache.inputs[i], &dz);
            per_layer.push([lw.data, lb, dscale, dshift]);
            dh = dx;
        }
        per_layer.reverse();
        let mut tensors: Vec<Vec<T>> = per_layer.into_iter().flatten().collect();
        tensors.push(dw.data);
        tensors.push(db);
        Gradients { tensors }
    }

    /// Mean cross-entropy and gradients for one training batch.
    pub fn loss_and_grad<R: Rng + ?Sized>(
        &self,
        x: &Matrix<T>,
        targets: &[usize],
        rng: &mut R,
    ) -> Result<(LossOutput<T>, Gradients<T>, NetworkCache<T>)> {
        let (logits, cache) = self.forward_train(x, rng)?;
        let out = softmax_cross_entropy(&logits, targets)?;
        let grads = self.backward(&cache, &out.grad);
        Ok((out, grads, cache))
    }

    pub fn commit_running(&mut self, cache: &NetworkCache<T>) {
        let batch = cache.inputs[0].rows;
        for (layer, nc) in self.hidden.iter_mut().zip(&cache.norm) {
            layer.norm.update_running(nc, batch);
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.hidden.len() {
            for p in ["weight", "bias", "scale", "shift"] {
                names.push(format!("hidden{i}.{p}"));
            }
        }
        names.push("output.weight".into());
        names.push("output.bias".into());
        names
    }

    pub fn params(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for l in &self.hidden {
            out.push(&l.dense.weight.data);
            out.push(&l.dense.bias);
            out.push(&l.norm.scale);
            out.push(&l.norm.shift);
        }
        out.push(&self.output.weight.data);
        out.push(&self.output.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for l in &mut self.hidden {
            out.push(&mut l.dense.weight.data);
            out.push(&mut l.dense.bias);
            out.push(&mut l.norm.scale);
            out.push(&mut l.norm.shift);
        }
        out.push(&mut self.output.weight.data);
        out.push(&mut self.output.bias);
        out
    }

    /// Running statistics of every batchnorm layer as `(mean, var)`.
    pub fn running_stats_mut(&mut self) -> Vec<(&mut [T], &mut [T])> {
        self.hidden
            .iter_mut()
            .map(|l| (&mut l.norm.running_mean[..], &mut l.norm.running_var[..]))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
            && self
                .hidden
                .iter()
                .all(|l| l.norm.running_var.iter().all(|v| v.is_finite() && *v >= T::zero()))
    }
}
