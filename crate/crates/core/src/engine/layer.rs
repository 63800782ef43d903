//! Layer kinds, their shape rules, parameter shapes and the forward/backward
//! kernels of the trainable subset.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::gemm::{matmul, MatRef};
use super::{shape_err, EngineError, Result, Scalar, Tensor};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: [usize; 2],
    pub stride: [usize; 2],
    pub padding: [usize; 2],
    pub groups: usize,
    pub bias: bool,
}

impl Conv2d {
    /// Square kernel, no bias, one group.
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Conv2d {
            in_channels,
            out_channels,
            kernel: [kernel; 2],
            stride: [stride; 2],
            padding: [padding; 2],
            groups: 1,
            bias: false,
        }
    }

    pub fn with_bias(mut self) -> Self {
        self.bias = true;
        self
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    /// Rectangular kernel `(kh, kw)` with "same" padding `(kh/2, kw/2)`.
    pub fn rect(in_channels: usize, out_channels: usize, kh: usize, kw: usize) -> Self {
        Conv2d {
            in_channels,
            out_channels,
            kernel: [kh, kw],
            stride: [1, 1],
            padding: [kh / 2, kw / 2],
            groups: 1,
            bias: false,
        }
    }

    fn patch_len(&self) -> usize {
        self.in_channels / self.groups * self.kernel[0] * self.kernel[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pool2d {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub in_features: usize,
    pub out_features: usize,
    pub bias: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchNorm2d {
    pub channels: usize,
}

/// Layer kinds. `Concat`, `AvgPool2d`, `Hardswish`, `Hardsigmoid`,
/// `ChannelScale` and grouped convolutions exist only so that reference
/// architectures can be described and counted; they cannot be executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2d(Conv2d),
    Relu,
    MaxPool2d(Pool2d),
    AvgPool2d(Pool2d),
    GlobalAvgPool,
    Linear(Linear),
    BatchNorm2d(BatchNorm2d),
    /// Elementwise sum of two or more equally shaped inputs.
    Add,
    Flatten,
    /// Channel-wise concatenation.
    Concat,
    Hardswish,
    Hardsigmoid,
    /// `x * s` with `s` of shape `[C]` broadcast over space (squeeze-excite).
    ChannelScale,
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d(_) => "CONV2D",
            LayerSpec::Relu => "RELU",
            LayerSpec::MaxPool2d(_) => "MAXPOOL2D",
            LayerSpec::AvgPool2d(_) => "AVGPOOL2D",
            LayerSpec::GlobalAvgPool => "GLOBALAVGPOOL",
            LayerSpec::Linear(_) => "LINEAR",
            LayerSpec::BatchNorm2d(_) => "BATCHNORM2D",
            LayerSpec::Add => "ADD",
            LayerSpec::Flatten => "FLATTEN",
            LayerSpec::Concat => "CONCAT",
            LayerSpec::Hardswish => "HARDSWISH",
            LayerSpec::Hardsigmoid => "HARDSIGMOID",
            LayerSpec::ChannelScale => "CHANNELSCALE",
        }
    }

    /// Whether forward and backward passes are implemented for this layer.
    pub fn is_trainable_kind(&self) -> bool {
        match self {
            LayerSpec::Conv2d(c) => c.groups == 1,
            LayerSpec::Relu
            | LayerSpec::MaxPool2d(_)
            | LayerSpec::GlobalAvgPool
            | LayerSpec::Linear(_)
            | LayerSpec::BatchNorm2d(_)
            | LayerSpec::Add
            | LayerSpec::Flatten => true,
            _ => false,
        }
    }

    /// Learnable tensors as `(suffix, shape)`.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            LayerSpec::Conv2d(c) => {
                let mut v = vec![(
                    "weight",
                    vec![c.out_channels, c.in_channels / c.groups, c.kernel[0], c.kernel[1]],
                )];
                if c.bias {
                    v.push(("bias", vec![c.out_channels]));
                }
                v
            }
            LayerSpec::Linear(l) => {
                let mut v = vec![("weight", vec![l.out_features, l.in_features])];
                if l.bias {
                    v.push(("bias", vec![l.out_features]));
                }
                v
            }
            LayerSpec::BatchNorm2d(b) => vec![("weight", vec![b.channels]), ("bias", vec![b.channels])],
            _ => Vec::new(),
        }
    }

    /// Non-learnable state (batch-norm running statistics).
    pub fn buffer_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            LayerSpec::BatchNorm2d(b) => vec![
                ("running_mean", vec![b.channels]),
                ("running_var", vec![b.channels]),
            ],
            _ => Vec::new(),
        }
    }

    pub fn parameter_count(&self) -> u64 {
        self.param_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>() as u64)
            .sum()
    }

    /// Per-sample output shape given per-sample input shapes.
    pub fn output_shape(&self, inputs: &[&[usize]]) -> Result<Vec<usize>> {
        let single = || -> Result<&[usize]> {
            match inputs {
                [one] => Ok(*one),
                _ => Err(shape_err(format!(
                    "{} takes one input, got {}",
                    self.kind_name(),
                    inputs.len()
                ))),
            }
        };
        let chw = |s: &[usize]| -> Result<[usize; 3]> {
            match *s {
                [c, h, w] => Ok([c, h, w]),
                _ => Err(shape_err(format!(
                    "{} expects a [C,H,W] input, got {s:?}",
                    self.kind_name()
                ))),
            }
        };
        match *self {
            LayerSpec::Conv2d(c) => {
                let [ch, h, w] = chw(single()?)?;
                if c.groups == 0
                    || c.in_channels % c.groups != 0
                    || c.out_channels % c.groups != 0
                    || c.stride.contains(&0)
                    || c.kernel.contains(&0)
                    || c.out_channels == 0
                {
                    return Err(EngineError::BadLayer(format!("{c:?}")));
                }
                if ch != c.in_channels {
                    return Err(shape_err(format!(
                        "conv expects {} input channels, got {ch}",
                        c.in_channels
                    )));
                }
                let oh = conv_out(h, c.kernel[0], c.stride[0], c.padding[0])?;
                let ow = conv_out(w, c.kernel[1], c.stride[1], c.padding[1])?;
                Ok(vec![c.out_channels, oh, ow])
            }
            LayerSpec::MaxPool2d(p) | LayerSpec::AvgPool2d(p) => {
                let [ch, h, w] = chw(single()?)?;
                if p.stride == 0 || p.kernel == 0 || 2 * p.padding > p.kernel {
                    return Err(EngineError::BadLayer(format!("{p:?}")));
                }
                Ok(vec![
                    ch,
                    conv_out(h, p.kernel, p.stride, p.padding)?,
                    conv_out(w, p.kernel, p.stride, p.padding)?,
                ])
            }
            LayerSpec::GlobalAvgPool => {
                let [ch, _, _] = chw(single()?)?;
                Ok(vec![ch])
            }
            LayerSpec::Linear(l) => match single()? {
                [f] if *f == l.in_features => Ok(vec![l.out_features]),
                s => Err(shape_err(format!(
                    "linear expects [{}], got {s:?}",
                    l.in_features
                ))),
            },
            LayerSpec::BatchNorm2d(b) => {
                let s = single()?;
                let [ch, _, _] = chw(s)?;
                if ch != b.channels {
                    return Err(shape_err(format!(
                        "batch norm over {} channels got {ch}",
                        b.channels
                    )));
                }
                Ok(s.to_vec())
            }
            LayerSpec::Relu | LayerSpec::Hardswish | LayerSpec::Hardsigmoid => Ok(single()?.to_vec()),
            LayerSpec::Flatten => Ok(vec![single()?.iter().product()]),
            LayerSpec::Add => {
                if inputs.len() < 2 {
                    return Err(shape_err("ADD needs at least two inputs"));
                }
                if inputs.iter().any(|s| *s != inputs[0]) {
                    return Err(shape_err(format!("ADD inputs differ: {inputs:?}")));
                }
                Ok(inputs[0].to_vec())
            }
            LayerSpec::Concat => {
                if inputs.is_empty() {
                    return Err(shape_err("CONCAT needs inputs"));
                }
                let [_, h, w] = chw(inputs[0])?;
                let mut channels = 0;
                for s in inputs {
                    let [c, hh, ww] = chw(s)?;
                    if (hh, ww) != (h, w) {
                        return Err(shape_err(format!("CONCAT spatial sizes differ: {inputs:?}")));
                    }
                    channels += c;
                }
                Ok(vec![channels, h, w])
            }
            LayerSpec::ChannelScale => match inputs {
                [x, s] => {
                    let [c, _, _] = chw(x)?;
                    let sc: usize = s.iter().product();
                    if sc != c || s[0] != c {
                        return Err(shape_err(format!("channel scale {s:?} for {x:?}")));
                    }
                    Ok(x.to_vec())
                }
                _ => Err(shape_err("CHANNELSCALE takes (x, scale)")),
            },
        }
    }
}

fn conv_out(size: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = size + 2 * padding;
    if padded < kernel {
        return Err(shape_err(format!(
            "kernel {kernel} larger than padded input {padded}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Batch-norm running statistics, either read-only or updated in place by a
/// training-mode forward pass.
pub enum BnState<'a, T> {
    Frozen(&'a [Tensor<T>]),
    Tracking(&'a mut [Tensor<T>]),
}

impl<'a, T> BnState<'a, T> {
    fn get(&self) -> &[Tensor<T>] {
        match self {
            BnState::Frozen(b) => b,
            BnState::Tracking(b) => b,
        }
    }
}

/// What a layer keeps from its forward pass for the backward pass.
#[derive(Debug, Clone)]
pub enum LayerCache<T> {
    None,
    Conv {
        /// im2col patches of every sample, `[N, K, P]`.
        cols: Vec<T>,
        input_shape: [usize; 4],
        out_hw: [usize; 2],
    },
    Relu {
        active: Vec<bool>,
    },
    MaxPool {
        argmax: Vec<u32>,
        input_shape: [usize; 4],
    },
    GlobalAvgPool {
        input_shape: [usize; 4],
    },
    Linear {
        input: Tensor<T>,
    },
    BatchNorm {
        xhat: Vec<T>,
        inv_std: Vec<T>,
        input_shape: [usize; 4],
        batch_stats: bool,
    },
    Add {
        arity: usize,
    },
    Flatten {
        input_shape: Vec<usize>,
    },
}

/// Gradients produced by [`layer_backward`].
#[derive(Debug, Clone)]
pub struct LayerGrads<T> {
    /// One entry per layer input; `None` when not requested.
    pub inputs: Vec<Option<Tensor<T>>>,
    /// Aligned with [`LayerSpec::param_shapes`].
    pub params: Vec<Tensor<T>>,
}

fn dims4<T: Scalar>(t: &Tensor<T>) -> Result<[usize; 4]> {
    match *t.shape() {
        [n, c, h, w] => Ok([n, c, h, w]),
        ref s => Err(shape_err(format!("expected [N,C,H,W], got {s:?}"))),
    }
}

fn check_input<T: Scalar>(spec: &LayerSpec, inputs: &[&Tensor<T>]) -> Result<Vec<usize>> {
    let batch = inputs
        .first()
        .ok_or_else(|| shape_err("layer called without inputs"))?
        .batch();
    if inputs.iter().any(|t| t.batch() != batch) {
        return Err(shape_err("inputs have different batch sizes"));
    }
    let per_sample: Vec<&[usize]> = inputs.iter().map(|t| &t.shape()[1..]).collect();
    let mut out = vec![batch];
    out.extend(spec.output_shape(&per_sample)?);
    Ok(out)
}

fn check_params<T: Scalar>(spec: &LayerSpec, params: &[Tensor<T>]) -> Result<()> {
    let shapes = spec.param_shapes();
    if shapes.len() != params.len()
        || shapes.iter().zip(params).any(|((_, s), p)| p.shape() != &s[..])
    {
        return Err(shape_err(format!(
            "{} parameter shapes do not match",
            spec.kind_name()
        )));
    }
    Ok(())
}

/// Runs one layer forward.
///
/// Convolution is cross-correlation with zero padding. Batch norm uses batch
/// statistics in [`Mode::Train`] (and updates running statistics with
/// momentum 0.1 when `state` is tracking) and running statistics in
/// [`Mode::Eval`].
pub fn layer_forward<T: Scalar>(
    spec: &LayerSpec,
    inputs: &[&Tensor<T>],
    params: &[Tensor<T>],
    state: BnState<'_, T>,
    mode: Mode,
) -> Result<(Tensor<T>, LayerCache<T>)> {
    if !spec.is_trainable_kind() {
        return Err(EngineError::Unsupported(spec.kind_name()));
    }
    let out_shape = check_input(spec, inputs)?;
    check_params(spec, params)?;
    match spec {
        LayerSpec::Conv2d(c) => conv_forward(c, inputs[0], params, &out_shape),
        LayerSpec::Relu => {
            let x = inputs[0];
            let active: Vec<bool> = x.data().iter().map(|&v| v > T::zero()).collect();
            let y = x.map(|v| if v > T::zero() { v } else { T::zero() });
            Ok((y, LayerCache::Relu { active }))
        }
        LayerSpec::MaxPool2d(p) => maxpool_forward(p, inputs[0], &out_shape),
        LayerSpec::GlobalAvgPool => {
            let x = inputs[0];
            let [n, c, h, w] = dims4(x)?;
            let hw = h * w;
            let inv = T::one() / T::from_usize(hw).unwrap();
            let data: Vec<T> = x
                .data()
                .chunks_exact(hw)
                .map(|plane| plane.iter().copied().sum::<T>() * inv)
                .collect();
            Ok((
                Tensor::from_vec(&[n, c], data)?,
                LayerCache::GlobalAvgPool {
                    input_shape: [n, c, h, w],
                },
            ))
        }
        LayerSpec::Linear(l) => {
            let x = inputs[0];
            let n = x.batch();
            let mut y = vec![T::zero(); n * l.out_features];
            if l.bias {
                for row in y.chunks_exact_mut(l.out_features) {
                    row.copy_from_slice(params[1].data());
                }
            }
            matmul(
                MatRef::new(x.data(), n, l.in_features),
                MatRef::new(params[0].data(), l.out_features, l.in_features).t(),
                &mut y,
                l.bias,
            );
            Ok((
                Tensor::from_vec(&out_shape, y)?,
                LayerCache::Linear { input: x.clone() },
            ))
        }
        LayerSpec::BatchNorm2d(b) => batchnorm_forward(b, inputs[0], params, state, mode),
        LayerSpec::Add => {
            let mut y = inputs[0].clone();
            for x in &inputs[1..] {
                y.add_assign(x)?;
            }
            Ok((y, LayerCache::Add { arity: inputs.len() }))
        }
        LayerSpec::Flatten => {
            let x = inputs[0];
            Ok((
                x.clone().reshape(&out_shape)?,
                LayerCache::Flatten {
                    input_shape: x.shape().to_vec(),
                },
            ))
        }
        _ => Err(EngineError::Unsupported(spec.kind_name())),
    }
}

/// Gradients of the loss with respect to the layer inputs and parameters.
pub fn layer_backward<T: Scalar>(
    spec: &LayerSpec,
    cache: &LayerCache<T>,
    params: &[Tensor<T>],
    grad_output: &Tensor<T>,
    need_input_grad: bool,
) -> Result<LayerGrads<T>> {
    let mismatch = || shape_err(format!("{} cache does not match layer", spec.kind_name()));
    match (spec, cache) {
        (LayerSpec::Conv2d(c), LayerCache::Conv { cols, input_shape, out_hw }) => {
            conv_backward(c, cols, *input_shape, *out_hw, params, grad_output, need_input_grad)
        }
        (LayerSpec::Relu, LayerCache::Relu { active }) => {
            if active.len() != grad_output.len() {
                return Err(mismatch());
            }
            let mut dx = grad_output.clone();
            for (g, &a) in dx.data_mut().iter_mut().zip(active) {
                if !a {
                    *g = T::zero();
                }
            }
            Ok(LayerGrads {
                inputs: vec![Some(dx)],
                params: Vec::new(),
            })
        }
        (LayerSpec::MaxPool2d(_), LayerCache::MaxPool { argmax, input_shape }) => {
            let [n, c, h, w] = *input_shape;
            if argmax.len() != grad_output.len() {
                return Err(mismatch());
            }
            let out_plane = grad_output.len() / (n * c);
            let mut dx = vec![T::zero(); n * c * h * w];
            for (plane, (g, idx)) in grad_output
                .data()
                .chunks_exact(out_plane)
                .zip(argmax.chunks_exact(out_plane))
                .enumerate()
            {
                let base = plane * h * w;
                for (&gv, &i) in g.iter().zip(idx) {
                    dx[base + i as usize] += gv;
                }
            }
            Ok(LayerGrads {
                inputs: vec![Some(Tensor::from_vec(input_shape, dx)?)],
                params: Vec::new(),
            })
        }
        (LayerSpec::GlobalAvgPool, LayerCache::GlobalAvgPool { input_shape }) => {
            let [n, c, h, w] = *input_shape;
            if grad_output.shape() != [n, c] {
                return Err(mismatch());
            }
            let inv = T::one() / T::from_usize(h * w).unwrap();
            let mut dx = Vec::with_capacity(n * c * h * w);
            for &g in grad_output.data() {
                dx.extend(core::iter::repeat_n(g * inv, h * w));
            }
            Ok(LayerGrads {
                inputs: vec![Some(Tensor::from_vec(input_shape, dx)?)],
                params: Vec::new(),
            })
        }
        (LayerSpec::Linear(l), LayerCache::Linear { input }) => {
            let n = input.batch();
            if grad_output.shape() != [n, l.out_features] {
                return Err(mismatch());
            }
            let dy = MatRef::new(grad_output.data(), n, l.out_features);
            let mut dw = vec![T::zero(); l.out_features * l.in_features];
            matmul(dy.t(), MatRef::new(input.data(), n, l.in_features), &mut dw, false);
            let mut grads = vec![Tensor::from_vec(&[l.out_features, l.in_features], dw)?];
            if l.bias {
                let mut db = vec![T::zero(); l.out_features];
                for row in grad_output.data().chunks_exact(l.out_features) {
                    for (d, &g) in db.iter_mut().zip(row) {
                        *d += g;
                    }
                }
                grads.push(Tensor::from_vec(&[l.out_features], db)?);
            }
            let dx = if need_input_grad {
                let mut dx = vec![T::zero(); n * l.in_features];
                matmul(
                    dy,
                    MatRef::new(params[0].data(), l.out_features, l.in_features),
                    &mut dx,
                    false,
                );
                Some(Tensor::from_vec(input.shape(), dx)?)
            } else {
                None
            };
            Ok(LayerGrads {
                inputs: vec![dx],
                params: grads,
            })
        }
        (
            LayerSpec::BatchNorm2d(_),
            LayerCache::BatchNorm {
                xhat,
                inv_std,
                input_shape,
                batch_stats,
            },
        ) => batchnorm_backward(xhat, inv_std, *input_shape, *batch_stats, params, grad_output),
        (LayerSpec::Add, LayerCache::Add { arity }) => Ok(LayerGrads {
            inputs: (0..*arity).map(|_| Some(grad_output.clone())).collect(),
            params: Vec::new(),
        }),
        (LayerSpec::Flatten, LayerCache::Flatten { input_shape }) => Ok(LayerGrads {
            inputs: vec![Some(grad_output.clone().reshape(input_shape)?)],
            params: Vec::new(),
        }),
        _ if !spec.is_trainable_kind() => Err(EngineError::Unsupported(spec.kind_name())),
        _ => Err(mismatch()),
    }
}

/// Unfolds one `[C,H,W]` sample into `[C*kh*kw, oh*ow]` patches.
#[allow(clippy::too_many_arguments)]
fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, conv: &Conv2d, oh: usize, ow: usize, cols: &mut [T]) {
    let [kh, kw] = conv.kernel;
    let [sh, sw] = conv.stride;
    let [ph, pw] = conv.padding;
    let p = oh * ow;
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (ci * kh + ki) * kw + kj;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * sh + ki) as isize - ph as isize;
                    let out_row = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        out_row.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    if sw == 1 {
                        // Contiguous run of valid columns.
                        let lo = pw.saturating_sub(kj).min(ow);
                        let hi = (w + pw).saturating_sub(kj).min(ow).max(lo);
                        out_row[..lo].fill(T::zero());
                        out_row[hi..].fill(T::zero());
                        if hi > lo {
                            let start = lo + kj - pw;
                            out_row[lo..hi].copy_from_slice(&src[start..start + (hi - lo)]);
                        }
                    } else {
                        for (ox, o) in out_row.iter_mut().enumerate() {
                            let ix = (ox * sw + kj) as isize - pw as isize;
                            *o = if ix < 0 || ix >= w as isize {
                                T::zero()
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the sample.
#[allow(clippy::too_many_arguments)]
fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, conv: &Conv2d, oh: usize, ow: usize, dx: &mut [T]) {
    let [kh, kw] = conv.kernel;
    let [sh, sw] = conv.stride;
    let [ph, pw] = conv.padding;
    let p = oh * ow;
    for ci in 0..c {
        let plane = &mut dx[ci * h * w..(ci + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (ci * kh + ki) * kw + kj;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * sh + ki) as isize - ph as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    let g = &src[oy * ow..(oy + 1) * ow];
                    for (ox, &gv) in g.iter().enumerate() {
                        let ix = (ox * sw + kj) as isize - pw as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += gv;
                        }
                    }
                }
            }
        }
    }
}

fn conv_forward<T: Scalar>(
    conv: &Conv2d,
    x: &Tensor<T>,
    params: &[Tensor<T>],
    out_shape: &[usize],
) -> Result<(Tensor<T>, LayerCache<T>)> {
    let [n, c, h, w] = dims4(x)?;
    let (cout, oh, ow) = (out_shape[1], out_shape[2], out_shape[3]);
    let k = conv.patch_len();
    let p = oh * ow;
    let mut cols = vec![T::zero(); n * k * p];
    let mut y = vec![T::zero(); n * cout * p];
    let weight = MatRef::new(params[0].data(), cout, k);
    for s in 0..n {
        let sample = &x.data()[s * c * h * w..(s + 1) * c * h * w];
        let sample_cols = &mut cols[s * k * p..(s + 1) * k * p];
        im2col(sample, c, h, w, conv, oh, ow, sample_cols);
        let out = &mut y[s * cout * p..(s + 1) * cout * p];
        if conv.bias {
            for (plane, &b) in out.chunks_exact_mut(p).zip(params[1].data()) {
                plane.fill(b);
            }
        }
        matmul(weight, MatRef::new(sample_cols, k, p), out, conv.bias);
    }
    Ok((
        Tensor::from_vec(out_shape, y)?,
        LayerCache::Conv {
            cols,
            input_shape: [n, c, h, w],
            out_hw: [oh, ow],
        },
    ))
}

fn conv_backward<T: Scalar>(
    conv: &Conv2d,
    cols: &[T],
    input_shape: [usize; 4],
    out_hw: [usize; 2],
    params: &[Tensor<T>],
    dy: &Tensor<T>,
    need_input_grad: bool,
) -> Result<LayerGrads<T>> {
    let [n, c, h, w] = input_shape;
    let [oh, ow] = out_hw;
    let cout = conv.out_channels;
    let k = conv.patch_len();
    let p = oh * ow;
    if dy.shape() != [n, cout, oh, ow] || cols.len() != n * k * p {
        return Err(shape_err("conv gradient shape mismatch"));
    }
    let mut dw = vec![T::zero(); cout * k];
    let mut db = vec![T::zero(); if conv.bias { cout } else { 0 }];
    let mut dx = if need_input_grad {
        vec![T::zero(); n * c * h * w]
    } else {
        Vec::new()
    };
    let mut dcols = if need_input_grad {
        vec![T::zero(); k * p]
    } else {
        Vec::new()
    };
    let weight = MatRef::new(params[0].data(), cout, k);
    // Per-sample contributions are summed in sample order.
    for s in 0..n {
        let g = &dy.data()[s * cout * p..(s + 1) * cout * p];
        let gm = MatRef::new(g, cout, p);
        let sample_cols = MatRef::new(&cols[s * k * p..(s + 1) * k * p], k, p);
        matmul(gm, sample_cols.t(), &mut dw, true);
        if conv.bias {
            for (d, plane) in db.iter_mut().zip(g.chunks_exact(p)) {
                *d += plane.iter().copied().sum::<T>();
            }
        }
        if need_input_grad {
            matmul(weight.t(), gm, &mut dcols, false);
            col2im(&dcols, c, h, w, conv, oh, ow, &mut dx[s * c * h * w..(s + 1) * c * h * w]);
        }
    }
    let mut grads = vec![Tensor::from_vec(params[0].shape(), dw)?];
    if conv.bias {
        grads.push(Tensor::from_vec(&[cout], db)?);
    }
    Ok(LayerGrads {
        inputs: vec![if need_input_grad {
            Some(Tensor::from_vec(&input_shape, dx)?)
        } else {
            None
        }],
        params: grads,
    })
}

fn maxpool_forward<T: Scalar>(
    pool: &Pool2d,
    x: &Tensor<T>,
    out_shape: &[usize],
) -> Result<(Tensor<T>, LayerCache<T>)> {
    let [n, c, h, w] = dims4(x)?;
    let (oh, ow) = (out_shape[2], out_shape[3]);
    let mut y = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in x.data().chunks_exact(h * w) {
        for oy in 0..oh {
            let y0 = (oy * pool.stride) as isize - pool.padding as isize;
            for ox in 0..ow {
                let x0 = (ox * pool.stride) as isize - pool.padding as isize;
                let mut best = T::neg_infinity();
                let mut best_idx = 0u32;
                let mut found = false;
                for ky in 0..pool.kernel as isize {
                    let iy = y0 + ky;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..pool.kernel as isize {
                        let ix = x0 + kx;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let idx = iy as usize * w + ix as usize;
                        let v = plane[idx];
                        // First maximum wins on ties.
                        if !found || v > best {
                            best = v;
                            best_idx = idx as u32;
                            found = true;
                        }
                    }
                }
                y.push(best);
                argmax.push(best_idx);
            }
        }
    }
    Ok((
        Tensor::from_vec(out_shape, y)?,
        LayerCache::MaxPool {
            argmax,
            input_shape: [n, c, h, w],
        },
    ))
}

fn batchnorm_forward<T: Scalar>(
    bn: &BatchNorm2d,
    x: &Tensor<T>,
    params: &[Tensor<T>],
    state: BnState<'_, T>,
    mode: Mode,
) -> Result<(Tensor<T>, LayerCache<T>)> {
    let [n, c, h, w] = dims4(x)?;
    let hw = h * w;
    let count = n * hw;
    let eps = T::from_f64_lossy(BN_EPS);
    if state.get().len() != 2 || state.get().iter().any(|t| t.shape() != [bn.channels]) {
        return Err(shape_err("batch norm running statistics missing"));
    }
    let (gamma, beta) = (params[0].data(), params[1].data());
    let plane = |s: usize, ch: usize| (s * c + ch) * hw;

    let batch_stats = mode == Mode::Train;
    let mut mean = vec![T::zero(); c];
    let mut var = vec![T::zero(); c];
    if batch_stats {
        if count < 2 {
            return Err(shape_err("batch norm in training mode needs more than one value per channel"));
        }
        let inv_count = T::one() / T::from_usize(count).unwrap();
        for ch in 0..c {
            let mut sum = T::zero();
            for s in 0..n {
                sum += x.data()[plane(s, ch)..plane(s, ch) + hw].iter().copied().sum::<T>();
            }
            let m = sum * inv_count;
            let mut sq = T::zero();
            for s in 0..n {
                for &v in &x.data()[plane(s, ch)..plane(s, ch) + hw] {
                    let d = v - m;
                    sq += d * d;
                }
            }
            mean[ch] = m;
            var[ch] = sq * inv_count;
        }
        if let BnState::Tracking(buffers) = state {
            let momentum = T::from_f64_lossy(BN_MOMENTUM);
            let unbias = T::from_usize(count).unwrap() / T::from_usize(count - 1).unwrap();
            let (rm, rv) = buffers.split_at_mut(1);
            for ch in 0..c {
                let m = &mut rm[0].data_mut()[ch];
                *m = (T::one() - momentum) * *m + momentum * mean[ch];
                let v = &mut rv[0].data_mut()[ch];
                *v = (T::one() - momentum) * *v + momentum * var[ch] * unbias;
            }
        }
    } else {
        let buffers = state.get();
        mean.copy_from_slice(buffers[0].data());
        var.copy_from_slice(buffers[1].data());
    }

    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = vec![T::zero(); x.len()];
    let mut y = vec![T::zero(); x.len()];
    for s in 0..n {
        for ch in 0..c {
            let range = plane(s, ch)..plane(s, ch) + hw;
            for ((xh, out), &v) in xhat[range.clone()]
                .iter_mut()
                .zip(&mut y[range.clone()])
                .zip(&x.data()[range])
            {
                *xh = (v - mean[ch]) * inv_std[ch];
                *out = gamma[ch] * *xh + beta[ch];
            }
        }
    }
    Ok((
        Tensor::from_vec(x.shape(), y)?,
        LayerCache::BatchNorm {
            xhat,
            inv_std,
            input_shape: [n, c, h, w],
            batch_stats,
        },
    ))
}

fn batchnorm_backward<T: Scalar>(
    xhat: &[T],
    inv_std: &[T],
    input_shape: [usize; 4],
    batch_stats: bool,
    params: &[Tensor<T>],
    dy: &Tensor<T>,
) -> Result<LayerGrads<T>> {
    let [n, c, h, w] = input_shape;
    if dy.shape() != input_shape {
        return Err(shape_err("batch norm gradient shape mismatch"));
    }
    let hw = h * w;
    let count = T::from_usize(n * hw).unwrap();
    let gamma = params[0].data();
    let g = dy.data();
    let plane = |s: usize, ch: usize| (s * c + ch) * hw;
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for s in 0..n {
        for ch in 0..c {
            let r = plane(s, ch)..plane(s, ch) + hw;
            for (&gv, &xh) in g[r.clone()].iter().zip(&xhat[r]) {
                dgamma[ch] += gv * xh;
                dbeta[ch] += gv;
            }
        }
    }
    let mut dx = vec![T::zero(); dy.len()];
    for ch in 0..c {
        let scale = gamma[ch] * inv_std[ch];
        for s in 0..n {
            let r = plane(s, ch)..plane(s, ch) + hw;
            for ((d, &gv), &xh) in dx[r.clone()].iter_mut().zip(&g[r.clone()]).zip(&xhat[r]) {
                *d = if batch_stats {
                    // d/dx of the batch-normalized output; mean and variance
                    // depend on every sample in the batch.
                    scale * (gv - (dbeta[ch] + xh * dgamma[ch]) / count)
                } else {
                    scale * gv
                };
            }
        }
    }
    Ok(LayerGrads {
        inputs: vec![Some(Tensor::from_vec(&input_shape, dx)?)],
        params: vec![
            Tensor::from_vec(&[c], dgamma)?,
            Tensor::from_vec(&[c], dbeta)?,
        ],
    })
}
