//! Netpbm binary pixmaps (P6, 8-bit RGB).

use std::fs;
use std::path::Path;

use radview_core::cam::Rgb8;

pub fn write_ppm(img: &Rgb8) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

/// Reads a P6 file written by [`write_ppm`] (no comments, maxval 255).
pub fn read_ppm(bytes: &[u8]) -> Option<Rgb8> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes.get(pos)?.is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes.get(pos)?.is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
    }
    if fields[0] != "P6" || fields[3] != "255" {
        return None;
    }
    let width: usize = fields[1].parse().ok()?;
    let height: usize = fields[2].parse().ok()?;
    let data = bytes.get(pos + 1..pos + 1 + width * height * 3)?.to_vec();
    Some(Rgb8 { width, height, data })
}

pub fn save_ppm(path: &Path, img: &Rgb8) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, write_ppm(img))
}
