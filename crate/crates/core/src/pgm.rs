//! Binary PGM (P5) reading and writing, maxval 255.
//!
//! The on-disk format is exactly `P5\n<cols> <rows>\n255\n` followed by
//! `rows*cols` raw bytes, which keeps written files bit-exact. The reader
//! additionally tolerates arbitrary whitespace and `#` comments in the
//! header, as produced by other tools.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::GrayImage;

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", image.cols(), image.rows()).into_bytes();
    bytes.extend_from_slice(image.pixels());
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|msg| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, msg),
    })
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err("not a P5 PGM file".into());
    }
    let mut pos = 2;
    let cols = read_header_int(bytes, &mut pos)?;
    let rows = read_header_int(bytes, &mut pos)?;
    let maxval = read_header_int(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}, expected 255"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing separator after header".into());
    }
    pos += 1;
    if rows == 0 || cols == 0 {
        return Err("empty image".into());
    }
    let expected = rows * cols;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(format!(
            "raster truncated: {} bytes for {}x{}",
            raster.len(),
            cols,
            rows
        ));
    }
    GrayImage::new(rows, cols, raster[..expected].to_vec()).map_err(|e| e.to_string())
}

/// Reads the next unsigned decimal from the header, skipping whitespace and
/// `#` comments. `pos` is left just past the number.
fn read_header_int(bytes: &[u8], pos: &mut usize) -> std::result::Result<usize, String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return Err("expected integer in PGM header".into());
    }
    std::str::from_utf8(&bytes[start..*pos])
        .map_err(|e| e.to_string())?
        .parse::<usize>()
        .map_err(|e| e.to_string())
}
