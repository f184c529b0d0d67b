//! Conversions between encoded images and core rasters / masks.

use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};
use snowcover_core::classify::SnowMask;
use snowcover_core::imaging::{EdgeMap, Raster};

use crate::error::{PipelineError, Result};

/// Decodes any supported image into an RGB raster with values in [0, 1].
pub fn decode_rgb(bytes: &[u8]) -> Result<Raster> {
    let img = image::load_from_memory(bytes)?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(Raster::from_u8(w as usize, h as usize, 3, img.as_raw())?)
}

/// Width and height from the image header only.
pub fn dimensions(bytes: &[u8]) -> Result<(usize, usize)> {
    let reader = image::ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| PipelineError::Invalid(format!("unreadable image: {e}")))?;
    let (w, h) = reader.into_dimensions()?;
    Ok((w as usize, h as usize))
}

fn to_dynamic(img: &Raster) -> Result<DynamicImage> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let bytes = img.to_u8();
    let out = match img.channels() {
        1 => GrayImage::from_raw(w, h, bytes).map(DynamicImage::ImageLuma8),
        3 => RgbImage::from_raw(w, h, bytes).map(DynamicImage::ImageRgb8),
        c => return Err(PipelineError::Invalid(format!("cannot encode a {c}-channel raster"))),
    };
    out.ok_or_else(|| PipelineError::Invalid("raster buffer does not match its size".into()))
}

pub fn encode_png(img: &Raster) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    to_dynamic(img)?.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn encode_jpeg(img: &Raster) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    to_dynamic(img)?.write_with_encoder(JpegEncoder::new_with_quality(&mut out, 95))?;
    Ok(out)
}

/// Grey PNG with snow 255, no snow 0 and outside 128.
pub fn encode_mask_png(mask: &SnowMask) -> Result<Vec<u8>> {
    let img = GrayImage::from_raw(mask.width as u32, mask.height as u32, mask.to_bytes())
        .ok_or_else(|| PipelineError::Invalid("mask buffer does not match its size".into()))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn decode_mask_png(bytes: &[u8]) -> Result<SnowMask> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_luma8();
    let (w, h) = img.dimensions();
    Ok(SnowMask::from_bytes(w as usize, h as usize, img.as_raw())?)
}

/// Edge strengths as a grey image (white = strong edge).
pub fn encode_edges_png(edges: &EdgeMap) -> Result<Vec<u8>> {
    let bytes = edges
        .strength
        .iter()
        .map(|s| (s.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = GrayImage::from_raw(edges.width as u32, edges.height as u32, bytes)
        .ok_or_else(|| PipelineError::Invalid("edge buffer does not match its size".into()))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use snowcover_core::classify::SnowLabel;

    #[test]
    fn mask_png_round_trip() {
        let mask = SnowMask {
            width: 3,
            height: 2,
            labels: vec![
                SnowLabel::Snow,
                SnowLabel::NoSnow,
                SnowLabel::Outside,
                SnowLabel::Outside,
                SnowLabel::Snow,
                SnowLabel::NoSnow,
            ],
        };
        let png = encode_mask_png(&mask).unwrap();
        assert_eq!(decode_mask_png(&png).unwrap(), mask);
        let grey = image::load_from_memory(&png).unwrap().to_luma8();
        assert_eq!(grey.as_raw(), &vec![255, 0, 128, 128, 255, 0]);
    }

    #[test]
    fn rgb_png_is_lossless() {
        let img = Raster::from_fn(5, 4, 3, |x, y, c| ((x * 40 + y * 7 + c * 3) as f64) / 255.0);
        let back = decode_rgb(&encode_png(&img).unwrap()).unwrap();
        assert_eq!(back.to_u8(), img.to_u8());
        assert_eq!(dimensions(&encode_jpeg(&img).unwrap()).unwrap(), (5, 4));
    }
}
