//! Portable float maps. Depth is written as single-channel `Pf`,
//! little-endian (negative scale), rows bottom to top. Invalid pixels are
//! stored as 0.0 and read back as invalid.

use std::path::Path;

use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scene::NormalMap;

use super::write_file;

fn header(magic: &str, w: usize, h: usize) -> Vec<u8> {
    format!("{magic}\n{w} {h}\n-1.0\n").into_bytes()
}

/// Encodes a depth map; values are rounded to `f32`.
pub fn encode_depth(depth: &DepthMap) -> Vec<u8> {
    let (w, h) = depth.dims();
    let mut out = header("Pf", w, h);
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            let v = depth.get(x, y).map_or(0.0, |v| v as f32);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Encodes a camera-frame normal map as three-channel `PF`.
pub fn encode_normals(normals: &NormalMap) -> Vec<u8> {
    let (w, h) = normals.dims();
    let mut out = header("PF", w, h);
    out.reserve(w * h * 12);
    for y in (0..h).rev() {
        for x in 0..w {
            for c in normals.get(x, y).iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
    }
    out
}

/// Decoded float map, rows top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatMap {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "pfm",
        reason: reason.into(),
    }
}

/// Reads the next whitespace-delimited header token.
fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(format_err("truncated header"));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| format_err("header is not ASCII"))
}

pub fn decode(bytes: &[u8]) -> Result<FloatMap> {
    let mut pos = 0;
    let channels = match token(bytes, &mut pos)? {
        "Pf" => 1,
        "PF" => 3,
        m => return Err(format_err(format!("unknown magic {m:?}"))),
    };
    let parse_dim = |s: &str| s.parse::<usize>().map_err(|_| format_err(format!("bad dimension {s:?}")));
    let width = parse_dim(token(bytes, &mut pos)?)?;
    let height = parse_dim(token(bytes, &mut pos)?)?;
    let scale: f64 = token(bytes, &mut pos)?
        .parse()
        .map_err(|_| format_err("bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(format_err("scale must be finite and non-zero"));
    }
    // exactly one whitespace byte separates the header from the data
    pos += 1;
    let n = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| format_err("dimensions overflow"))?;
    let data = bytes.get(pos..).unwrap_or(&[]);
    if data.len() != n * 4 {
        return Err(format_err(format!(
            "expected {} data bytes for {width}x{height}x{channels}, found {}",
            n * 4,
            data.len()
        )));
    }
    let little = scale < 0.0;
    let mut out = vec![0f32; n];
    let row = width * channels;
    for (i, chunk) in data.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (file_row, col) = (i / row, i % row);
        out[(height - 1 - file_row) * row + col] = v;
    }
    Ok(FloatMap {
        width,
        height,
        channels,
        data: out,
    })
}

/// Decodes a single-channel map as depth: finite positive values are valid.
pub fn decode_depth(bytes: &[u8]) -> Result<DepthMap> {
    let map = decode(bytes)?;
    if map.channels != 1 {
        return Err(format_err("depth must be a single-channel Pf map"));
    }
    DepthMap::from_values(map.width, map.height, map.data.iter().map(|v| *v as f64).collect())
}

pub fn decode_normals(bytes: &[u8]) -> Result<NormalMap> {
    let map = decode(bytes)?;
    if map.channels != 3 {
        return Err(format_err("normals must be a three-channel PF map"));
    }
    let v: Vec<_> = map
        .data
        .chunks_exact(3)
        .map(|c| crate::camera::Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64))
        .collect();
    Grid::from_vec(map.width, map.height, v)
}

pub fn write_depth_pfm(path: &Path, depth: &DepthMap) -> Result<()> {
    write_file(path, &encode_depth(depth))
}

pub fn read_depth_pfm(path: &Path) -> Result<DepthMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_depth(&bytes).map_err(|e| with_path(e, path))
}

pub fn write_normals_pfm(path: &Path, normals: &NormalMap) -> Result<()> {
    write_file(path, &encode_normals(normals))
}

pub fn read_normals_pfm(path: &Path) -> Result<NormalMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_normals(&bytes).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { format, reason } => Error::Format {
            format,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_layout() {
        let d = DepthMap::from_values(2, 2, vec![1.0, 2.0, 3.0, f64::INFINITY]).unwrap();
        let bytes = encode_depth(&d);
        assert!(bytes.starts_with(b"Pf\n2 2\n-1.0\n"));
        let body = &bytes[12..];
        // bottom row first: 3.0, then invalid stored as 0.0
        assert_eq!(&body[0..4], &3.0f32.to_le_bytes());
        assert_eq!(&body[4..8], &0.0f32.to_le_bytes());
        assert_eq!(&body[8..12], &1.0f32.to_le_bytes());
        let back = decode_depth(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.get(1, 1), None);
    }

    #[test]
    fn big_endian_files_are_read() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&7.5f32.to_be_bytes());
        assert_eq!(decode_depth(&bytes).unwrap().get(0, 0), Some(7.5));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(decode(b"P5\n1 1\n-1.0\n0000"), Err(Error::Format { .. })));
        assert!(matches!(decode(b"Pf\n2 2\n-1.0\n0000"), Err(Error::Format { .. })));
        assert!(matches!(decode(b"Pf\n2"), Err(Error::Format { .. })));
        assert!(matches!(decode(b"Pf\n1 1\n0\n0000"), Err(Error::Format { .. })));
        let mut three = b"PF\n1 1\n-1.0\n".to_vec();
        three.extend_from_slice(&[0u8; 12]);
        assert!(decode_depth(&three).is_err());
        assert!(decode_normals(&three).is_ok());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_identical(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..w * h)
                .map(|_| if rng.random_bool(0.1) { f64::INFINITY } else { rng.random_range(0.01f32..500.0) as f64 })
                .collect();
            let d = DepthMap::from_values(w, h, vals).unwrap();
            let back = decode_depth(&encode_depth(&d)).unwrap();
            prop_assert_eq!(back.values().as_slice(), d.values().as_slice());
            prop_assert_eq!(back.valid(), d.valid());
        }
    }
}
