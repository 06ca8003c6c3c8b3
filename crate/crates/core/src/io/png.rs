//! PNG encodings: 16-bit centimeter depth and 8-bit display images.

use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma, Rgb};

use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::grid::Grid;

use super::write_file;

/// Largest depth representable in 16-bit centimeters.
pub const PNG16_MAX_DEPTH: f64 = 655.35;

fn encode<P: image::Pixel<Subpixel = S> + image::PixelWithColorType, S: image::Primitive>(
    img: &ImageBuffer<P, Vec<S>>,
) -> Vec<u8>
where
    [S]: image::EncodableLayout,
{
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).expect("in-memory png encoding");
    out.into_inner()
}

/// Centimeters with 0 marking invalid pixels.
pub fn encode_depth_png16(depth: &DepthMap) -> Result<Vec<u8>> {
    let (w, h) = depth.dims();
    let mut img = ImageBuffer::<Luma<u16>, Vec<u16>>::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let cm = match depth.get(x, y) {
                None => 0,
                Some(v) => {
                    let cm = (v * 100.0).round();
                    if cm > u16::MAX as f64 {
                        return Err(Error::OutOfRange { value: v });
                    }
                    // a positive depth below half a centimeter still counts as valid
                    cm.max(1.0) as u16
                }
            };
            img.put_pixel(x as u32, y as u32, Luma([cm]));
        }
    }
    Ok(encode(&img))
}

fn image_err(path: &Path, source: image::ImageError) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

pub fn decode_depth_png16(bytes: &[u8], path: &Path) -> Result<DepthMap> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| image_err(path, e))?;
    let img = match img {
        image::DynamicImage::ImageLuma16(i) => i,
        other => {
            return Err(Error::Format {
                format: "png16",
                reason: format!("{}: expected 16-bit grayscale, found {:?}", path.display(), other.color()),
            })
        }
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = img
        .pixels()
        .map(|p| if p.0[0] == 0 { f64::INFINITY } else { p.0[0] as f64 / 100.0 })
        .collect();
    DepthMap::from_values(w, h, values)
}

pub fn write_depth_png16(path: &Path, depth: &DepthMap) -> Result<()> {
    write_file(path, &encode_depth_png16(depth)?)
}

pub fn read_depth_png16(path: &Path) -> Result<DepthMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_depth_png16(&bytes, path)
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Display values in [0, 1] as 8-bit gray.
pub fn encode_gray8(image: &Grid<f64>) -> Vec<u8> {
    let (w, h) = image.dims();
    let img = ImageBuffer::from_fn(w as u32, h as u32, |x, y| Luma([to_u8(*image.get(x as usize, y as usize))]));
    encode(&img)
}

pub fn encode_rgb8(image: &Grid<[f64; 3]>) -> Vec<u8> {
    let (w, h) = image.dims();
    let img = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let [r, g, b] = *image.get(x as usize, y as usize);
        Rgb([to_u8(r), to_u8(g), to_u8(b)])
    });
    encode(&img)
}

pub fn write_gray8(path: &Path, image: &Grid<f64>) -> Result<()> {
    write_file(path, &encode_gray8(image))
}

pub fn write_rgb8(path: &Path, image: &Grid<[f64; 3]>) -> Result<()> {
    write_file(path, &encode_rgb8(image))
}

/// Reads an 8-bit (or wider) image as gray values in [0, 1].
pub fn read_gray(path: &Path) -> Result<Grid<f64>> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Grid::from_vec(w, h, img.pixels().map(|p| p.0[0] as f64 / 65535.0).collect())
}
