//! 16-bit single-channel rasters and the deterministic preprocessing steps:
//! orientation, square padding, nearest-neighbour resampling, display window
//! and rectangular redaction.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1 (got {width}x{height})")]
    EmptyImage { width: usize, height: usize },
    #[error("sample count {len} does not match {width}x{height}")]
    LengthMismatch { width: usize, height: usize, len: usize },
    #[error("expected a square image, got {width}x{height}")]
    NotSquare { width: usize, height: usize },
    #[error("target side must be at least 1")]
    BadTargetSide,
    #[error("region {region:?} does not fit in a {width}x{height} image")]
    RegionOutOfBounds {
        region: RectRegion,
        width: usize,
        height: usize,
    },
}

/// Row-major unsigned 16-bit raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image16 {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl Image16 {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage { width, height });
        }
        if data.len() != width * height {
            return Err(ImageError::LengthMismatch {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Image16 { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u16) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u16] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u16> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u16) {
        self.data[y * self.width + x] = value;
    }

    pub fn max_value(&self) -> u16 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    pub fn mirror_horizontal(&self) -> Image16 {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks_exact(self.width) {
            data.extend(row.iter().rev());
        }
        Image16 {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// One counterclockwise quarter turn.
    pub fn rotate_ccw(&self) -> Image16 {
        let (w, h) = (self.width, self.height);
        // Output is h wide and w tall; source (x, y) lands at (y, w - 1 - x).
        let mut data = vec![0u16; w * h];
        for y in 0..h {
            for x in 0..w {
                data[(w - 1 - x) * h + y] = self.data[y * w + x];
            }
        }
        Image16 {
            width: h,
            height: w,
            data,
        }
    }
}

/// How a radiograph is brought into standard anatomical orientation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Orientation {
    pub quarter_turns: u8,
    pub mirror: bool,
}

/// Mirrors (left-right) first when requested, then rotates counterclockwise
/// by `quarter_turns` × 90°.
pub fn orient(img: &Image16, quarter_turns: u8, mirror_horizontal: bool) -> Image16 {
    let mut out = if mirror_horizontal {
        img.mirror_horizontal()
    } else {
        img.clone()
    };
    for _ in 0..(quarter_turns % 4) {
        out = out.rotate_ccw();
    }
    out
}

/// Pads onto a black square canvas whose side is the long axis. The short
/// axis gets `floor(d/2)` padding before and `ceil(d/2)` after.
pub fn center_on_square(img: &Image16) -> Image16 {
    let side = img.width.max(img.height);
    if img.is_square() {
        return img.clone();
    }
    let left = (side - img.width) / 2;
    let top = (side - img.height) / 2;
    let mut data = vec![0u16; side * side];
    for (y, row) in img.data.chunks_exact(img.width).enumerate() {
        let start = (y + top) * side + left;
        data[start..start + img.width].copy_from_slice(row);
    }
    Image16 {
        width: side,
        height: side,
        data,
    }
}

/// Nearest-neighbour resample of a square image:
/// `out[y][x] = in[floor(y*S/T)][floor(x*S/T)]`.
pub fn downsample_nn(img: &Image16, target_side: usize) -> Result<Image16, ImageError> {
    if !img.is_square() {
        return Err(ImageError::NotSquare {
            width: img.width,
            height: img.height,
        });
    }
    if target_side == 0 {
        return Err(ImageError::BadTargetSide);
    }
    let s = img.width;
    let src: Vec<usize> = (0..target_side).map(|d| d * s / target_side).collect();
    let mut data = Vec::with_capacity(target_side * target_side);
    for &sy in &src {
        let row = &img.data[sy * s..(sy + 1) * s];
        data.extend(src.iter().map(|&sx| row[sx]));
    }
    Ok(Image16 {
        width: target_side,
        height: target_side,
        data,
    })
}

/// Display look-up parameters: 0 is black, the image maximum is white.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisplayWindow {
    pub black_point: u16,
    pub white_point: u16,
}

pub fn display_normalize(img: &Image16) -> DisplayWindow {
    DisplayWindow {
        black_point: 0,
        white_point: img.max_value(),
    }
}

/// Axis-aligned rectangle; `(x0, y0)` is the inclusive top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RectRegion {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl RectRegion {
    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x0.checked_add(self.width).is_some_and(|x1| x1 <= width)
            && self.y0.checked_add(self.height).is_some_and(|y1| y1 <= height)
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.width && y >= self.y0 && y < self.y0 + self.height
    }
}

/// Fills `region` with black (0).
pub fn redact(img: &Image16, region: RectRegion) -> Result<Image16, ImageError> {
    let mut out = img.clone();
    redact_in_place(&mut out, region)?;
    Ok(out)
}

pub fn redact_in_place(img: &mut Image16, region: RectRegion) -> Result<(), ImageError> {
    if !region.fits(img.width, img.height) {
        return Err(ImageError::RegionOutOfBounds {
            region,
            width: img.width,
            height: img.height,
        });
    }
    for y in region.y0..region.y0 + region.height {
        let start = y * img.width + region.x0;
        img.data[start..start + region.width].fill(0);
    }
    Ok(())
}

/// orient → center_on_square → downsample_nn, the standard preparation chain.
pub fn prepare(img: &Image16, orientation: Orientation, side: usize) -> Result<Image16, ImageError> {
    let oriented = orient(img, orientation.quarter_turns, orientation.mirror);
    downsample_nn(&center_on_square(&oriented), side)
}
