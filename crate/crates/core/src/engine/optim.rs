use alloc::format;
use alloc::vec::Vec;

use super::{shape_err, EngineError, Result, Scalar, Tensor};

/// SGD with momentum. Defaults are lr 0.01 and momentum 0.9, no weight decay.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerConfig {
    pub lr: f64,
    pub momentum: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: 0.01,
            momentum: 0.9,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(EngineError::BadOptimizer(format!("learning rate {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(EngineError::BadOptimizer(format!("momentum {}", self.momentum)));
        }
        Ok(())
    }
}

/// One update: `v ← μ·v + g`, then `p ← p − lr·v`.
pub fn sgdm_step<T: Scalar>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    velocities: &mut [Tensor<T>],
    config: &OptimizerConfig,
) -> Result<()> {
    config.validate()?;
    if params.len() != grads.len() || params.len() != velocities.len() {
        return Err(shape_err(format!(
            "{} params, {} grads, {} velocities",
            params.len(),
            grads.len(),
            velocities.len()
        )));
    }
    for ((p, g), v) in params.iter().zip(grads).zip(velocities.iter()) {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(shape_err(format!(
                "param {:?}, grad {:?}, velocity {:?}",
                p.shape(),
                g.shape(),
                v.shape()
            )));
        }
    }
    let lr = T::from_f64_lossy(config.lr);
    let mu = T::from_f64_lossy(config.momentum);
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocities.iter_mut()) {
        for ((pv, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vv = mu * *vv + gv;
            *pv -= lr * *vv;
        }
    }
    Ok(())
}

/// Optimizer state: one velocity tensor per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgdm<T> {
    config: OptimizerConfig,
    velocities: Vec<Tensor<T>>,
}

impl<T: Scalar> Sgdm<T> {
    pub fn new(config: OptimizerConfig, params: &[Tensor<T>]) -> Result<Self> {
        config.validate()?;
        Ok(Sgdm {
            config,
            velocities: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn velocities(&self) -> &[Tensor<T>] {
        &self.velocities
    }

    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        sgdm_step(params, grads, &mut self.velocities, &self.config)
    }
}
