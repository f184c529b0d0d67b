//! Camera metadata from JPEG EXIF blocks.

use std::io::Cursor;

use chrono::NaiveDateTime;
use exif::{experimental::Writer, Field, In, Rational, Tag, Value};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// The EXIF fields the pipeline uses; everything is optional in the wild.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExifInfo {
    pub make: Option<String>,
    pub model: Option<String>,
    pub focal_length_mm: Option<f64>,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
    pub altitude_m: Option<f64>,
    pub capture_time: Option<NaiveDateTime>,
}

fn ascii(exif: &exif::Exif, tag: Tag) -> Option<String> {
    match &exif.get_field(tag, In::PRIMARY)?.value {
        Value::Ascii(v) => v
            .first()
            .map(|s| String::from_utf8_lossy(s).trim_end_matches('\0').trim().to_string())
            .filter(|s| !s.is_empty()),
        _ => None,
    }
}

fn rational(exif: &exif::Exif, tag: Tag, i: usize) -> Option<f64> {
    match &exif.get_field(tag, In::PRIMARY)?.value {
        Value::Rational(v) => v.get(i).filter(|r| r.denom != 0).map(|r| r.to_f64()),
        _ => None,
    }
}

fn dms(exif: &exif::Exif, tag: Tag, ref_tag: Tag, negative: &str) -> Option<f64> {
    let (d, m, s) = (
        rational(exif, tag, 0)?,
        rational(exif, tag, 1)?,
        rational(exif, tag, 2)?,
    );
    let deg = d + m / 60.0 + s / 3600.0;
    let sign = match ascii(exif, ref_tag) {
        Some(r) if r.eq_ignore_ascii_case(negative) => -1.0,
        _ => 1.0,
    };
    Some(sign * deg)
}

/// Reads EXIF metadata from JPEG bytes. A JPEG without EXIF yields an
/// empty [`ExifInfo`]; anything that is not a JPEG is an error.
pub fn read_exif(bytes: &[u8]) -> Result<ExifInfo> {
    if !bytes.starts_with(&[0xFF, 0xD8]) {
        return Err(PipelineError::Exif("not a JPEG file".into()));
    }
    let exif = match exif::Reader::new().read_from_container(&mut Cursor::new(bytes)) {
        Ok(e) => e,
        Err(exif::Error::NotFound(_)) => return Ok(ExifInfo::default()),
        Err(e) => return Err(PipelineError::Exif(e.to_string())),
    };
    let altitude_m = rational(&exif, Tag::GPSAltitude, 0).map(|a| {
        let below = matches!(
            exif.get_field(Tag::GPSAltitudeRef, In::PRIMARY).map(|f| &f.value),
            Some(Value::Byte(b)) if b.first() == Some(&1)
        );
        if below {
            -a
        } else {
            a
        }
    });
    let capture_time = ascii(&exif, Tag::DateTimeOriginal)
        .or_else(|| ascii(&exif, Tag::DateTime))
        .and_then(|s| NaiveDateTime::parse_from_str(&s, "%Y:%m:%d %H:%M:%S").ok());
    Ok(ExifInfo {
        make: ascii(&exif, Tag::Make),
        model: ascii(&exif, Tag::Model),
        focal_length_mm: rational(&exif, Tag::FocalLength, 0).filter(|f| *f > 0.0),
        latitude: dms(&exif, Tag::GPSLatitude, Tag::GPSLatitudeRef, "S"),
        longitude: dms(&exif, Tag::GPSLongitude, Tag::GPSLongitudeRef, "W"),
        altitude_m,
        capture_time,
    })
}

fn to_rational(v: f64, denom: u32) -> Rational {
    Rational {
        num: (v.abs() * denom as f64).round() as u32,
        denom,
    }
}

fn to_dms(deg: f64) -> Vec<Rational> {
    let a = deg.abs();
    let d = a.floor();
    let m = ((a - d) * 60.0).floor();
    let s = (a - d - m / 60.0) * 3600.0;
    vec![to_rational(d, 1), to_rational(m, 1), to_rational(s, 10_000)]
}

/// Inserts an EXIF APP1 segment carrying `info` right after the JPEG SOI.
pub fn embed_exif(jpeg: &[u8], info: &ExifInfo) -> Result<Vec<u8>> {
    if !jpeg.starts_with(&[0xFF, 0xD8]) {
        return Err(PipelineError::Exif("not a JPEG file".into()));
    }
    let ascii = |tag: Tag, s: &str| Field {
        tag,
        ifd_num: In::PRIMARY,
        value: Value::Ascii(vec![s.as_bytes().to_vec()]),
    };
    let mut fields = Vec::new();
    if let Some(m) = &info.make {
        fields.push(ascii(Tag::Make, m));
    }
    if let Some(m) = &info.model {
        fields.push(ascii(Tag::Model, m));
    }
    if let Some(f) = info.focal_length_mm {
        fields.push(Field {
            tag: Tag::FocalLength,
            ifd_num: In::PRIMARY,
            value: Value::Rational(vec![to_rational(f, 100)]),
        });
    }
    if let Some(t) = info.capture_time {
        fields.push(ascii(Tag::DateTimeOriginal, &t.format("%Y:%m:%d %H:%M:%S").to_string()));
    }
    if let (Some(lat), Some(lon)) = (info.latitude, info.longitude) {
        fields.push(ascii(Tag::GPSLatitudeRef, if lat < 0.0 { "S" } else { "N" }));
        fields.push(Field {
            tag: Tag::GPSLatitude,
            ifd_num: In::PRIMARY,
            value: Value::Rational(to_dms(lat)),
        });
        fields.push(ascii(Tag::GPSLongitudeRef, if lon < 0.0 { "W" } else { "E" }));
        fields.push(Field {
            tag: Tag::GPSLongitude,
            ifd_num: In::PRIMARY,
            value: Value::Rational(to_dms(lon)),
        });
    }
    if let Some(a) = info.altitude_m {
        fields.push(Field {
            tag: Tag::GPSAltitudeRef,
            ifd_num: In::PRIMARY,
            value: Value::Byte(vec![(a < 0.0) as u8]),
        });
        fields.push(Field {
            tag: Tag::GPSAltitude,
            ifd_num: In::PRIMARY,
            value: Value::Rational(vec![to_rational(a, 100)]),
        });
    }
    let mut writer = Writer::new();
    for f in &fields {
        writer.push_field(f);
    }
    let mut tiff = Cursor::new(Vec::new());
    writer
        .write(&mut tiff, false)
        .map_err(|e| PipelineError::Exif(e.to_string()))?;
    let mut payload = b"Exif\0\0".to_vec();
    payload.extend_from_slice(tiff.get_ref());
    let len = u16::try_from(payload.len() + 2).map_err(|_| PipelineError::Exif("EXIF block too large".into()))?;
    let mut out = Vec::with_capacity(jpeg.len() + payload.len() + 4);
    out.extend_from_slice(&jpeg[..2]);
    out.extend_from_slice(&[0xFF, 0xE1]);
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&jpeg[2..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::encode_jpeg;
    use snowcover_core::imaging::Raster;

    fn tiny_jpeg() -> Vec<u8> {
        encode_jpeg(&Raster::filled(8, 8, 3, 0.5)).unwrap()
    }

    #[test]
    fn round_trip_through_app1() {
        let info = ExifInfo {
            make: Some("Canon".into()),
            model: Some("EOS 5D".into()),
            focal_length_mm: Some(35.0),
            latitude: Some(46.4512),
            longitude: Some(-9.8731),
            altitude_m: Some(2143.5),
            capture_time: NaiveDateTime::parse_from_str("2014-02-03 11:22:33", "%Y-%m-%d %H:%M:%S").ok(),
        };
        let bytes = embed_exif(&tiny_jpeg(), &info).unwrap();
        let back = read_exif(&bytes).unwrap();
        assert_eq!(back.make, info.make);
        assert_eq!(back.model, info.model);
        assert_eq!(back.focal_length_mm, Some(35.0));
        assert!((back.latitude.unwrap() - 46.4512).abs() < 1e-6);
        assert!((back.longitude.unwrap() + 9.8731).abs() < 1e-6);
        assert!((back.altitude_m.unwrap() - 2143.5).abs() < 1e-9);
        assert_eq!(back.capture_time, info.capture_time);
        image::load_from_memory(&bytes).unwrap();
    }

    #[test]
    fn missing_block_and_bad_input() {
        assert_eq!(read_exif(&tiny_jpeg()).unwrap(), ExifInfo::default());
        assert!(read_exif(b"GIF89a").is_err());
        let partial = ExifInfo {
            focal_length_mm: Some(50.0),
            ..ExifInfo::default()
        };
        let back = read_exif(&embed_exif(&tiny_jpeg(), &partial).unwrap()).unwrap();
        assert_eq!(back.latitude, None);
        assert_eq!(back.focal_length_mm, Some(50.0));
    }
}
