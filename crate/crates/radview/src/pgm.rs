//! Netpbm binary graymaps (P5).
//!
//! Images are written with maxval 65535, two big-endian bytes per sample.
//! The reader also accepts any maxval in `1..=65535`, one byte per sample
//! below 256, and `#` comments in the header.

use std::fs;
use std::path::Path;

use radview_core::Image16;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("bad PGM header: {0}")]
    BadHeader(String),
    #[error("PGM pixel data truncated: expected {expected} bytes, found {found}")]
    TruncatedPixels { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_pgm16(img: &Image16) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    out.reserve(img.data().len() * 2);
    for &v in img.data() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Reads the next whitespace-delimited header token, skipping comments.
fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], PgmError> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(PgmError::BadHeader("unexpected end of header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize, PgmError> {
    let t = token(bytes, pos)?;
    std::str::from_utf8(t)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| PgmError::BadHeader(format!("{what}: {:?}", String::from_utf8_lossy(t))))
}

pub fn read_pgm16(bytes: &[u8]) -> Result<Image16, PgmError> {
    let mut pos = 0;
    let magic = token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(PgmError::BadHeader(format!(
            "magic {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = number(bytes, &mut pos, "width")?;
    let height = number(bytes, &mut pos, "height")?;
    let maxval = number(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 || !(1..=65535).contains(&maxval) {
        return Err(PgmError::BadHeader(format!("{width}x{height}, maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(PgmError::BadHeader("missing separator before pixels".into()));
    }
    pos += 1;
    let wide = maxval > 255;
    let expected = width * height * if wide { 2 } else { 1 };
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(PgmError::TruncatedPixels {
            expected,
            found: raster.len(),
        });
    }
    let data = if wide {
        raster[..expected]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        raster[..expected].iter().map(|&b| b as u16).collect()
    };
    Image16::new(width, height, data).map_err(|e| PgmError::BadHeader(e.to_string()))
}

pub fn save_pgm16(path: &Path, img: &Image16) -> Result<(), PgmError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, write_pgm16(img))?;
    Ok(())
}

pub fn load_pgm16(path: &Path) -> Result<Image16, PgmError> {
    read_pgm16(&fs::read(path)?)
}
