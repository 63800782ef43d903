//! Central finite-difference verification of backward passes.
//!
//! The error for one tensor is `‖analytic − numeric‖∞ / ‖numeric‖∞`; the
//! report carries the maximum over all parameter tensors and the input.

use alloc::string::String;
use alloc::vec::Vec;

use super::graph::{Gradients, Model};
use super::layer::Mode;
use super::loss::softmax_cross_entropy;
use super::{shape_err, Result, Scalar, Tensor};

/// Scalar function of the model output whose gradient is checked.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// Mean softmax cross-entropy; output must be `[batch, classes]`.
    CrossEntropy(&'a [usize]),
    /// `Σ wᵢ·yᵢ` over the flattened output.
    Projection(&'a [f64]),
}

impl Objective<'_> {
    pub fn evaluate<T: Scalar>(&self, output: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
        match *self {
            Objective::CrossEntropy(targets) => {
                let (loss, grad) = softmax_cross_entropy(output, targets)?;
                Ok((loss.as_f64(), grad))
            }
            Objective::Projection(weights) => {
                if weights.len() != output.len() {
                    return Err(shape_err("projection weights do not match output"));
                }
                let value = output.data().iter().zip(weights).map(|(y, w)| y.as_f64() * w).sum();
                let grad = Tensor::from_f64(output.shape(), weights)?;
                Ok((value, grad))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(tensor name, error)`; the input is reported as `"input"`.
    pub per_tensor: Vec<(String, f64)>,
}

pub fn analytic_gradients<T: Scalar>(
    model: &Model<T>,
    input: &Tensor<T>,
    objective: Objective<'_>,
    mode: Mode,
) -> Result<Gradients<T>> {
    let pass = model.forward(input, mode)?;
    let (_, grad) = objective.evaluate(pass.output())?;
    model.backward(&pass, &grad, true)
}

fn loss_at<T: Scalar>(model: &Model<T>, input: &Tensor<T>, objective: Objective<'_>, mode: Mode) -> Result<f64> {
    let pass = model.forward(input, mode)?;
    Ok(objective.evaluate(pass.output())?.0)
}

/// Central differences `(f(x+ε) − f(x−ε)) / 2ε` for every parameter and
/// input coordinate. Batch-norm running statistics are never updated.
pub fn numeric_gradients<T: Scalar>(
    model: &Model<T>,
    input: &Tensor<T>,
    objective: Objective<'_>,
    mode: Mode,
    eps: f64,
) -> Result<Gradients<T>> {
    let mut probe = model.clone();
    let e = T::from_f64_lossy(eps);
    let mut params = Vec::with_capacity(model.params().len());
    for pi in 0..model.params().len() {
        let mut g = Vec::with_capacity(model.params()[pi].len());
        for i in 0..model.params()[pi].len() {
            let orig = probe.params()[pi].data()[i];
            probe.params_mut()[pi].data_mut()[i] = orig + e;
            let plus = loss_at(&probe, input, objective, mode)?;
            probe.params_mut()[pi].data_mut()[i] = orig - e;
            let minus = loss_at(&probe, input, objective, mode)?;
            probe.params_mut()[pi].data_mut()[i] = orig;
            g.push(T::from_f64_lossy((plus - minus) / (2.0 * eps)));
        }
        params.push(Tensor::from_vec(model.params()[pi].shape(), g)?);
    }
    let mut x = input.clone();
    let mut gx = Vec::with_capacity(input.len());
    for i in 0..input.len() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + e;
        let plus = loss_at(model, &x, objective, mode)?;
        x.data_mut()[i] = orig - e;
        let minus = loss_at(model, &x, objective, mode)?;
        x.data_mut()[i] = orig;
        gx.push(T::from_f64_lossy((plus - minus) / (2.0 * eps)));
    }
    Ok(Gradients {
        params,
        input: Some(Tensor::from_vec(input.shape(), gx)?),
    })
}

/// `‖analytic − numeric‖∞ / ‖numeric‖∞`, or the absolute error when the
/// numeric gradient vanishes.
pub fn max_relative_error<T: Scalar>(analytic: &[T], numeric: &[T]) -> f64 {
    let scale = numeric.iter().map(|v| v.as_f64().abs()).fold(0.0, f64::max);
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a.as_f64() - n.as_f64()).abs())
        .fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn compare<T: Scalar>(model: &Model<T>, analytic: &Gradients<T>, numeric: &Gradients<T>) -> GradCheckReport {
    let mut per_tensor: Vec<(String, f64)> = model
        .param_names()
        .iter()
        .zip(analytic.params.iter().zip(&numeric.params))
        .map(|(name, (a, n))| (name.clone(), max_relative_error(a.data(), n.data())))
        .collect();
    if let (Some(a), Some(n)) = (&analytic.input, &numeric.input) {
        per_tensor.push((String::from("input"), max_relative_error(a.data(), n.data())));
    }
    let max_relative_error = per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    GradCheckReport {
        max_relative_error,
        per_tensor,
    }
}

/// Backprop versus central finite differences on one input batch.
pub fn finite_diff_check<T: Scalar>(
    model: &Model<T>,
    input: &Tensor<T>,
    objective: Objective<'_>,
    mode: Mode,
    eps: f64,
) -> Result<GradCheckReport> {
    let analytic = analytic_gradients(model, input, objective, mode)?;
    let numeric = numeric_gradients(model, input, objective, mode, eps)?;
    Ok(compare(model, &analytic, &numeric))
}

fn widen(t: &Tensor<f32>) -> Result<Tensor<f64>> {
    Tensor::from_vec(t.shape(), t.data().iter().map(|&v| v as f64).collect())
}

/// Checks a 32-bit model's backward pass against central differences of a
/// 64-bit copy holding exactly the same parameter and input values.
pub fn widened_check(
    model: &Model<f32>,
    input: &Tensor<f32>,
    objective: Objective<'_>,
    mode: Mode,
    eps: f64,
) -> Result<GradCheckReport> {
    let analytic = analytic_gradients(model, input, objective, mode)?;
    let mut wide: Model<f64> = Model::new(model.graph().clone(), 0)?;
    for (name, t) in model.named_tensors() {
        wide.set_tensor(name, widen(t)?)?;
    }
    let numeric = numeric_gradients(&wide, &widen(input)?, objective, mode, eps)?;
    let analytic = Gradients {
        params: analytic.params.iter().map(widen).collect::<Result<_>>()?,
        input: analytic.input.as_ref().map(widen).transpose()?,
    };
    Ok(compare(&wide, &analytic, &numeric))
}
