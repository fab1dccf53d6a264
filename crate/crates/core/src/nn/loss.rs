use super::{Matrix, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LossOutput<T> {
    /// Mean cross-entropy over the batch.
    pub loss: f64,
    /// Gradient of the mean loss with respect to the logits.
    pub grad: Matrix<T>,
    /// Rows whose argmax equals the target.
    pub correct: usize,
}

/// Mean softmax cross-entropy. Row math runs in `f64`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Matrix<T>, targets: &[usize]) -> Result<LossOutput<T>> {
    if logits.rows != targets.len() {
        return Err(Error::Shape(format!(
            "{} targets for {} rows",
            targets.len(),
            logits.rows
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= logits.cols) {
        return Err(Error::Shape(format!("target {bad} outside {} classes", logits.cols)));
    }
    let n = logits.rows as f64;
    let mut grad = Matrix::zeros(logits.rows, logits.cols);
    let mut total = 0.0f64;
    let mut correct = 0;
    let mut probs = vec![0.0f64; logits.cols];
    for (r, &t) in targets.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().map(|v| v.to_f64().unwrap()).fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (p, v) in probs.iter_mut().zip(row) {
            *p = (v.to_f64().unwrap() - max).exp();
            z += *p;
        }
        let target_logit = row[t].to_f64().unwrap() - max;
        total += z.ln() - target_logit;
        let mut best = 0;
        for (c, (g, &p)) in grad.row_mut(r).iter_mut().zip(&probs).enumerate() {
            let p = p / z;
            let one_hot = if c == t { 1.0 } else { 0.0 };
            *g = T::lit((p - one_hot) / n);
            if row[c] > row[best] {
                best = c;
            }
        }
        if best == t {
            correct += 1;
        }
    }
    Ok(LossOutput {
        loss: total / n,
        grad,
        correct,
    })
}
