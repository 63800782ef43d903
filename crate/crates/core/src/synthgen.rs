//! Procedural 48-class phantom radiographs.
//!
//! Each of the 24 neutral views gets a left-right symmetric silhouette: a
//! bone shaft above and below a joint, the joint solid or hollow, at one of
//! three heights, flanked by zero to three pairs of sesamoid-like blobs.
//! Left views are rendered as is; right views are the mirror image, with
//! every horizontal extent stretched by `1 + asymmetry` first. With zero
//! asymmetry laterality is therefore only recoverable from the side marker.
//!
//! Noise and redaction are drawn in the unmirrored frame so that they do not
//! leak laterality; the marker glyph is drawn last, readable, in a top
//! corner away from the silhouette.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::RadiographRecord;
use crate::imaging::{redact_in_place, Image16, Orientation, RectRegion};
use crate::rng::{derive_seed, rng_from_seed, splitmix64, standard_normal};
use crate::taxonomy::{Laterality, ViewLabel, NUM_CLASSES};

/// Brightest pixel value a phantom uses (12-bit detector range).
pub const FULL_SCALE: u16 = 4095;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhantomConfig {
    pub side: usize,
    pub marker_prob: f64,
    pub redact_prob: f64,
    /// Relative horizontal stretch of right-side views.
    pub asymmetry: f64,
    /// Standard deviation of additive noise as a fraction of full scale.
    pub noise: f64,
    /// Per-record geometric jitter (translation, scale, width) amplitude.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            side: 250,
            marker_prob: 0.193,
            redact_prob: 0.262,
            asymmetry: 0.05,
            noise: 0.02,
            jitter: 1.0,
            seed: 0,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [("marker_prob", self.marker_prob), ("redact_prob", self.redact_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} {p} outside [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.asymmetry) {
            return Err(format!("asymmetry {} outside [0, 1]", self.asymmetry));
        }
        if self.side < 16 {
            return Err(format!("side {} below 16", self.side));
        }
        if !(self.noise >= 0.0 && self.jitter >= 0.0) {
            return Err("noise and jitter must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhantomRecord {
    pub image: Image16,
    pub label: ViewLabel,
    pub has_marker: bool,
    pub redacted: bool,
}

/// Fixed shape of one neutral view, in units of the image side.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Silhouette {
    joint_y: f64,
    hollow: bool,
    blob_pairs: usize,
    upper_half_width: f64,
    lower_half_width: f64,
    joint_rx: f64,
    joint_ry: f64,
    bone: f64,
    tissue_half_width: f64,
}

impl Silhouette {
    fn of(neutral: usize) -> Self {
        let mut rng = rng_from_seed(splitmix64(0x5EED_0000 + neutral as u64));
        Silhouette {
            hollow: neutral % 2 == 1,
            blob_pairs: (neutral / 2) % 4,
            joint_y: [0.36, 0.5, 0.64][neutral / 8],
            upper_half_width: rng.random_range(0.05..0.09),
            lower_half_width: rng.random_range(0.04..0.08),
            joint_rx: rng.random_range(0.15..0.19),
            joint_ry: rng.random_range(0.08..0.11),
            bone: rng.random_range(0.7..0.9),
            tissue_half_width: rng.random_range(0.22..0.27),
        }
    }
}

/// Record-level variation drawn from the record seed.
#[derive(Debug, Clone, Copy)]
struct Jitter {
    dx: f64,
    dy: f64,
    scale: f64,
    width: f64,
    gain: f64,
}

impl Jitter {
    fn draw(rng: &mut ChaCha8Rng, amount: f64) -> Self {
        let mut u = |r: f64| rng.random_range(-r..=r) * amount;
        Jitter {
            dx: u(0.03),
            dy: u(0.03),
            scale: 1.0 + u(0.05),
            width: 1.0 + u(0.06),
            gain: 1.0 + u(0.1),
        }
    }
}

/// Intensity (fraction of full scale) at normalized point `(x, y)`, with `x`
/// measured from the silhouette axis.
fn density(s: &Silhouette, x: f64, y: f64) -> f64 {
    let ax = x.abs();
    let mut v = 0.08;
    if ax <= s.tissue_half_width && (0.04..=0.96).contains(&y) {
        v = 0.22;
    }
    let (ex, ey) = (ax / s.joint_rx, (y - s.joint_y) / s.joint_ry);
    let r2 = ex * ex + ey * ey;
    if r2 <= 1.0 {
        let ring = 0.55 * 0.55;
        return if s.hollow && r2 < ring { 0.35 } else { s.bone };
    }
    if (y < s.joint_y && ax <= s.upper_half_width && y >= 0.06)
        || (y > s.joint_y && ax <= s.lower_half_width && y <= 0.94)
    {
        v = s.bone * 0.85;
    }
    for k in 0..s.blob_pairs {
        let by = s.joint_y + s.joint_ry + 0.06 + 0.08 * k as f64;
        let (dx, dy) = (ax - 0.25, y - by);
        if dx * dx + dy * dy <= 0.032 * 0.032 {
            v = 1.0;
        }
    }
    v
}

/// 5×7 bitmaps, one row per byte, bit 4 leftmost.
const GLYPH_L: [u8; 7] = [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F];
const GLYPH_R: [u8; 7] = [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11];

/// Side length in pixels of one glyph cell.
fn glyph_scale(side: usize) -> usize {
    (side / 50).max(1)
}

fn draw_marker(img: &mut Image16, laterality: Laterality, right_corner: bool) {
    let glyph = match laterality {
        Laterality::L => &GLYPH_L,
        Laterality::R => &GLYPH_R,
    };
    let s = glyph_scale(img.width());
    let margin = (img.width() / 32).max(1);
    let x0 = if right_corner { img.width() - margin - 5 * s } else { margin };
    for (row, bits) in glyph.iter().enumerate() {
        for col in 0..5 {
            if bits & (0x10 >> col) != 0 {
                for yy in 0..s {
                    for xx in 0..s {
                        img.set(x0 + col * s + xx, margin + row * s + yy, FULL_SCALE);
                    }
                }
            }
        }
    }
}

/// Bernoulli draw that always consumes one value, so later draws do not
/// depend on `p`.
fn coin(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Renders one phantom; output depends only on `(label, cfg, seed)`.
///
/// `cfg.seed` is not used here; corpus generation folds it into `seed`.
pub fn render_phantom(label: ViewLabel, cfg: &PhantomConfig, seed: u64) -> PhantomRecord {
    let n = cfg.side;
    let sil = Silhouette::of(label.collapse().index());
    let mut rng = rng_from_seed(seed);
    let j = Jitter::draw(&mut rng, cfg.jitter);
    let has_marker = coin(&mut rng, cfg.marker_prob);
    let marker_right = coin(&mut rng, 0.5);
    let redacted = coin(&mut rng, cfg.redact_prob);
    let stretch = match label.laterality() {
        Laterality::L => 1.0,
        Laterality::R => 1.0 + cfg.asymmetry,
    };
    let xscale = j.scale * j.width * stretch;
    let cx = 0.5 + j.dx;
    // 2×2 supersampling per pixel.
    let offsets = [0.25, 0.75];
    let mut data = Vec::with_capacity(n * n);
    for py in 0..n {
        for px in 0..n {
            let mut acc = 0.0;
            for oy in offsets {
                for ox in offsets {
                    let x = ((px as f64 + ox) / n as f64 - cx) / xscale;
                    let y = ((py as f64 + oy) / n as f64 - 0.5 - j.dy) / j.scale + 0.5;
                    acc += density(&sil, x, y);
                }
            }
            data.push(acc / 4.0 * j.gain);
        }
    }
    if cfg.noise > 0.0 {
        for v in &mut data {
            *v += cfg.noise * standard_normal(&mut rng);
        }
    }
    let pixels = data
        .iter()
        .map(|v| libm::round(v.clamp(0.0, 1.0) * FULL_SCALE as f64) as u16)
        .collect();
    let mut image = Image16::new(n, n, pixels).expect("n×n buffer");
    let region_w = n / 4;
    let region_h = n / 10;
    let redact_right = coin(&mut rng, 0.5);
    if redacted {
        let region = RectRegion {
            x0: if redact_right { n - region_w } else { 0 },
            y0: n - region_h,
            width: region_w,
            height: region_h,
        };
        redact_in_place(&mut image, region).expect("corner region fits");
    }
    if label.laterality() == Laterality::R {
        image = image.mirror_horizontal();
    }
    if has_marker {
        draw_marker(&mut image, label.laterality(), marker_right);
    }
    PhantomRecord {
        image,
        label,
        has_marker,
        redacted,
    }
}

pub fn set_id(index: usize) -> String {
    format!("set{index:04}")
}

/// Seed of the record for class `class` in set `set`.
pub fn record_seed(cfg: &PhantomConfig, set: usize, class: usize) -> u64 {
    derive_seed(cfg.seed, set as u64, class as u64)
}

/// `n_sets` complete examination sets, set by set, classes in index order.
pub fn generate_corpus(n_sets: usize, cfg: &PhantomConfig) -> Vec<(RadiographRecord, PhantomRecord)> {
    let mut out = Vec::with_capacity(n_sets * NUM_CLASSES);
    for set in 0..n_sets {
        for label in ViewLabel::all() {
            let class = label.class_index();
            let rec = render_phantom(label, cfg, record_seed(cfg, set, class));
            let id = set_id(set);
            let meta = RadiographRecord {
                file: format!("{id}/{class:02}.pgm"),
                set_id: id,
                raw_view: label.canonical(),
                label,
                has_marker: rec.has_marker,
                redacted: rec.redacted,
                orientation: Orientation::default(),
                split: None,
            };
            out.push((meta, rec));
        }
    }
    out
}
