use alloc::format;
use alloc::vec::Vec;

use super::{shape_err, EngineError, Result, Scalar, Tensor};

/// Row-wise softmax of a `[batch, classes]` tensor (max-subtracted).
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.rank() != 2 {
        return Err(shape_err(format!("softmax expects [batch, classes], got {:?}", logits.shape())));
    }
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.rows() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let start = out.len();
        out.extend(row.iter().map(|&v| (v - max).exp_m()));
        let sum: T = out[start..].iter().copied().sum();
        for v in &mut out[start..] {
            *v /= sum;
        }
    }
    Tensor::from_vec(logits.shape(), out)
}

/// Mean cross-entropy of `softmax(logits)` against `targets`, and its
/// gradient `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, targets: &[usize]) -> Result<(T, Tensor<T>)> {
    let probs = softmax_rows(logits)?;
    let (batch, classes) = (logits.shape()[0], logits.shape()[1]);
    if targets.len() != batch {
        return Err(shape_err(format!("{} targets for batch of {batch}", targets.len())));
    }
    if let Some(&index) = targets.iter().find(|&&t| t >= classes) {
        return Err(EngineError::BadTargetIndex { index, classes });
    }
    let inv_batch = T::one() / T::from_usize(batch).unwrap();
    let mut loss = T::zero();
    for (row, &t) in logits.rows().zip(targets) {
        // -log softmax = logsumexp - z_t, computed stably.
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + row.iter().map(|&v| (v - max).exp_m()).sum::<T>().ln_m();
        loss += lse - row[t];
    }
    let mut grad = probs;
    for (row, &t) in grad.data_mut().chunks_exact_mut(classes).zip(targets) {
        row[t] -= T::one();
        for v in row.iter_mut() {
            *v *= inv_batch;
        }
    }
    Ok((loss * inv_batch, grad))
}
