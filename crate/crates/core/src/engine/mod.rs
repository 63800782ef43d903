//! Minimal numerical engine: dense tensors, layer forward/backward passes over
//! a static graph, softmax cross-entropy and SGD with momentum.
//!
//! Tensors are batch-major `NCHW`. Every layer keeps what its backward pass
//! needs in a [`LayerCache`]; [`Model::backward`] walks the graph in reverse
//! and accumulates gradients in a fixed order, so results are reproducible
//! bit-for-bit.

mod gemm;
pub mod gradcheck;
pub mod graph;
pub mod layer;
pub mod loss;
pub mod optim;
mod tensor;

use alloc::string::String;
use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use thiserror::Error;

pub use graph::{ForwardPass, Gradients, Graph, Model, Node, NodeId};
pub use layer::{
    layer_backward, layer_forward, BatchNorm2d, BnState, Conv2d, LayerCache, LayerGrads, LayerSpec,
    Linear, Mode, Pool2d,
};
pub use loss::{softmax_cross_entropy, softmax_rows};
pub use optim::{sgdm_step, OptimizerConfig, Sgdm};
pub use tensor::Tensor;

/// Build-wide floating point precision.
#[cfg(not(feature = "f64"))]
pub type Real = f32;
/// Build-wide floating point precision.
#[cfg(feature = "f64")]
pub type Real = f64;

/// Element type code used by checkpoint files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 1,
    F64 = 2,
}

impl DType {
    pub fn from_code(code: u8) -> Option<DType> {
        match code {
            1 => Some(DType::F32),
            2 => Some(DType::F64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

/// Floating point element type of the engine.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
    const DTYPE: DType;

    fn from_f64_lossy(v: f64) -> Self;

    fn as_f64(self) -> f64;

    /// `exp` from libm, independent of which std features are enabled.
    fn exp_m(self) -> Self;

    /// Natural log from libm.
    fn ln_m(self) -> Self;

    /// `c = alpha * a·b + beta * c` with arbitrary strides.
    ///
    /// # Safety
    /// Pointers and strides must describe valid, non-overlapping `m×k`,
    /// `k×n` and `m×n` matrices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    const DTYPE: DType = DType::F32;

    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }

    fn exp_m(self) -> Self {
        libm::expf(self)
    }

    fn ln_m(self) -> Self {
        libm::logf(self)
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    const DTYPE: DType = DType::F64;

    fn from_f64_lossy(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }

    fn exp_m(self) -> Self {
        libm::exp(self)
    }

    fn ln_m(self) -> Self {
        libm::log(self)
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid layer configuration: {0}")]
    BadLayer(String),
    #[error("layer kind {0} is descriptor-only and cannot be executed")]
    Unsupported(&'static str),
    #[error("target index {index} out of range for {classes} classes")]
    BadTargetIndex { index: usize, classes: usize },
    #[error("unknown tensor {0:?}")]
    UnknownTensor(String),
    #[error("invalid optimizer configuration: {0}")]
    BadOptimizer(String),
}

pub(crate) fn shape_err(msg: impl Into<String>) -> EngineError {
    EngineError::ShapeMismatch(msg.into())
}

pub type Result<T, E = EngineError> = core::result::Result<T, E>;
