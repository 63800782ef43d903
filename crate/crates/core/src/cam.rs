//! Class activation maps for networks ending in global average pooling
//! followed by one linear layer.
//!
//! For class `c` with head weights `w_c` and last feature maps `f_k`,
//! `CAM_c(x, y) = Σ_k w_{c,k} f_k(x, y)`. Because pooling is a mean, the
//! spatial mean of `CAM_c` plus the head bias is exactly logit `c`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::engine::{EngineError, LayerSpec, Mode, Model, NodeId, Scalar, Tensor};
use crate::imaging::Image16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CamError {
    #[error("model does not end in global average pooling and a linear head")]
    IncompatibleHead,
    #[error("class {class} outside 0..{classes}")]
    BadClass { class: usize, classes: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CamMap {
    pub class: usize,
    /// Native resolution of the last feature maps, row-major.
    pub height: usize,
    pub width: usize,
    pub grid: Vec<f64>,
    /// Bilinear upsampling of `grid` to the network input resolution.
    pub upsampled_side: (usize, usize),
    pub upsampled: Vec<f64>,
    pub bias: f64,
    /// Logit of `class` from the same forward pass.
    pub logit: f64,
}

impl CamMap {
    pub fn mean(&self) -> f64 {
        self.grid.iter().sum::<f64>() / self.grid.len() as f64
    }

    /// `mean |CAM| + |b_c|`, the scale against which the pooling identity
    /// is measured.
    pub fn magnitude(&self) -> f64 {
        self.grid.iter().map(|v| v.abs()).sum::<f64>() / self.grid.len() as f64 + self.bias.abs()
    }

    /// `|mean + bias − logit| / max(|logit|, magnitude)`.
    pub fn identity_error(&self) -> f64 {
        let scale = self.logit.abs().max(self.magnitude());
        let diff = (self.mean() + self.bias - self.logit).abs();
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }
}

/// Locates the GAP → linear tail; returns (feature node, head node index).
fn head_of<T: Scalar>(model: &Model<T>) -> Result<(NodeId, usize), CamError> {
    let nodes = model.graph().nodes();
    let head_index = nodes.len().checked_sub(1).ok_or(CamError::IncompatibleHead)?;
    let head = &nodes[head_index];
    let LayerSpec::Linear(_) = head.spec else {
        return Err(CamError::IncompatibleHead);
    };
    let gap_id = head.inputs[0];
    let gap = model.graph().node(gap_id).ok_or(CamError::IncompatibleHead)?;
    if gap.spec != LayerSpec::GlobalAvgPool {
        return Err(CamError::IncompatibleHead);
    }
    Ok((gap.inputs[0], head_index))
}

/// Computes the CAM of `class` for one `[C, H, W]` (or `[1, C, H, W]`) input.
pub fn compute_cam<T: Scalar>(model: &Model<T>, input: &Tensor<T>, class: usize) -> Result<CamMap, CamError> {
    let (feature_id, head_index) = head_of(model)?;
    let classes = model.graph().output_shape()[0];
    if class >= classes {
        return Err(CamError::BadClass { class, classes });
    }
    let x = match input.rank() {
        3 => {
            let mut shape = alloc::vec![1];
            shape.extend_from_slice(input.shape());
            input.clone().reshape(&shape)?
        }
        4 if input.shape()[0] == 1 => input.clone(),
        _ => {
            return Err(CamError::ShapeMismatch(format!(
                "expected one [C,H,W] sample, got {:?}",
                input.shape()
            )))
        }
    };
    let pass = model.forward(&x, Mode::Eval)?;
    let features = pass.value(feature_id);
    let (k, h, w) = (features.shape()[1], features.shape()[2], features.shape()[3]);
    let head = model.node_params(head_index);
    let weights = &head[0].data()[class * k..(class + 1) * k];
    let bias = head.get(1).map_or(0.0, |b| b.data()[class].as_f64());
    let mut grid = alloc::vec![0.0; h * w];
    for (ch, &wk) in weights.iter().enumerate() {
        let wk = wk.as_f64();
        for (g, &f) in grid.iter_mut().zip(&features.data()[ch * h * w..(ch + 1) * h * w]) {
            *g += wk * f.as_f64();
        }
    }
    let out = (x.shape()[2], x.shape()[3]);
    Ok(CamMap {
        class,
        height: h,
        width: w,
        upsampled: bilinear_resize(&grid, h, w, out.0, out.1),
        upsampled_side: out,
        grid,
        bias,
        logit: pass.output().data()[class].as_f64(),
    })
}

/// Bilinear resampling with pixel centers at half-integer coordinates and
/// edge clamping.
pub fn bilinear_resize(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let coord = |dst: usize, n_in: usize, n_out: usize| -> (usize, usize, f64) {
        let s = ((dst as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = s as usize;
        let i1 = (i0 + 1).min(n_in - 1);
        (i0, i1, s - i0 as f64)
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        let (y0, y1, fy) = coord(oy, h, out_h);
        for ox in 0..out_w {
            let (x0, x1, fx) = coord(ox, w, out_w);
            let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
            let bottom = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rgb8 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// Low end of the overlay ramp (dark purple).
pub const RAMP_LOW: [u8; 3] = [68, 1, 84];
/// High end of the overlay ramp (yellow).
pub const RAMP_HIGH: [u8; 3] = [253, 231, 37];
pub const OVERLAY_ALPHA: f64 = 0.5;

/// Min-max normalization to `[0, 1]`; a constant map becomes all zeros.
pub fn normalize_unit(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect()
}

pub fn ramp_color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let mut c = [0u8; 3];
    for i in 0..3 {
        let v = RAMP_LOW[i] as f64 + (RAMP_HIGH[i] as f64 - RAMP_LOW[i] as f64) * t;
        c[i] = libm::round(v) as u8;
    }
    c
}

/// Blends the normalized CAM through the color ramp over the grayscale
/// image (scaled by its maximum) at alpha 0.5.
pub fn render_overlay(cam: &CamMap, img: &Image16) -> Result<Rgb8, CamError> {
    let (h, w) = cam.upsampled_side;
    if (img.height(), img.width()) != (h, w) {
        return Err(CamError::ShapeMismatch(format!(
            "image {}x{} for a {w}x{h} map",
            img.width(),
            img.height()
        )));
    }
    let heat = normalize_unit(&cam.upsampled);
    let max = img.max_value().max(1) as f64;
    let mut data = Vec::with_capacity(h * w * 3);
    for (&t, &p) in heat.iter().zip(img.data()) {
        let gray = p as f64 / max * 255.0;
        let color = ramp_color(t);
        for c in color {
            let v = (1.0 - OVERLAY_ALPHA) * gray + OVERLAY_ALPHA * c as f64;
            data.push(libm::round(v).clamp(0.0, 255.0) as u8);
        }
    }
    Ok(Rgb8 { width: w, height: h, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Graph, Linear};

    fn gap_linear(channels: usize, side: usize, classes: usize) -> Model<f64> {
        let mut g = Graph::new(&[channels, side, side]);
        g.chain("gap", LayerSpec::GlobalAvgPool).unwrap();
        g.chain(
            "fc",
            LayerSpec::Linear(Linear {
                in_features: channels,
                out_features: classes,
                bias: true,
            }),
        )
        .unwrap();
        Model::new(g, 1).unwrap()
    }

    #[test]
    fn hand_example() {
        let mut m = gap_linear(1, 2, 1);
        m.set_tensor("fc.weight", Tensor::from_f64(&[1, 1], &[2.0]).unwrap()).unwrap();
        m.set_tensor("fc.bias", Tensor::zeros(&[1])).unwrap();
        let x = Tensor::from_f64(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let cam = compute_cam(&m, &x, 0).unwrap();
        assert_eq!(cam.grid, [2.0, 4.0, 6.0, 8.0]);
        assert_eq!(cam.logit, 5.0);
        assert_eq!(cam.mean(), 5.0);
    }

    #[test]
    fn constant_features_give_constant_cam() {
        let m = gap_linear(3, 4, 2);
        let v = [0.5, -1.0, 2.0];
        let x = Tensor::from_vec(&[3, 4, 4], (0..48).map(|i| v[i / 16]).collect()).unwrap();
        let cam = compute_cam(&m, &x, 1).unwrap();
        let w = m.node_params(1)[0].data();
        let expected: f64 = (0..3).map(|k| w[3 + k] * v[k]).sum();
        assert!(cam.grid.iter().all(|g| (g - expected).abs() < 1e-12));
        assert!(cam.upsampled.iter().all(|g| (g - expected).abs() < 1e-12));
    }

    #[test]
    fn rejects_other_tails() {
        let mut g = Graph::new(&[4]);
        g.chain("fc", LayerSpec::Linear(Linear { in_features: 4, out_features: 2, bias: true })).unwrap();
        let m: Model<f32> = Model::new(g, 0).unwrap();
        assert_eq!(
            compute_cam(&m, &Tensor::zeros(&[4]), 0).unwrap_err(),
            CamError::IncompatibleHead
        );
    }

    #[test]
    fn normalization_and_ramp() {
        let n = normalize_unit(&[3.0, 1.0, 2.0]);
        assert_eq!(n, [1.0, 0.0, 0.5]);
        assert_eq!(ramp_color(0.0), RAMP_LOW);
        assert_eq!(ramp_color(1.0), RAMP_HIGH);
        assert_eq!(normalize_unit(&[4.0, 4.0]), [0.0, 0.0]);
    }

    #[test]
    fn constant_cam_gives_uniform_tint() {
        let cam = CamMap {
            class: 0,
            height: 1,
            width: 1,
            grid: alloc::vec![1.0],
            upsampled_side: (2, 2),
            upsampled: alloc::vec![1.0; 4],
            bias: 0.0,
            logit: 1.0,
        };
        let img = Image16::filled(2, 2, 100).unwrap();
        let rgb = render_overlay(&cam, &img).unwrap();
        assert!(rgb.data.chunks(3).all(|p| p == &rgb.data[..3]));
        assert!(render_overlay(&cam, &Image16::filled(3, 2, 1).unwrap()).is_err());
    }

    #[test]
    fn bilinear_identity_and_corners() {
        let src = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(bilinear_resize(&src, 2, 2, 2, 2), src);
        let up = bilinear_resize(&src, 2, 2, 4, 4);
        assert_eq!(up[0], 1.0);
        assert_eq!(up[15], 4.0);
    }
}
