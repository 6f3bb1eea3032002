//! Binary PGM (P5) and grayscale PNG reading and writing.
//!
//! PGM bit depth is taken from the header maxval; PNG bit depth from the
//! `sBIT` chunk when present (written for 10- and 12-bit images), otherwise
//! from the sample depth. Pixel values are never rescaled.

use std::fs;
use std::io::{BufWriter, Cursor, Write};
use std::path::Path;

use super::{max_level, BreastMask, GrayImage};
use crate::error::{Error, Result};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub(crate) fn decode(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(b"P6") || bytes.starts_with(b"P3") {
        Err(Error::ColorImage)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1].is_ascii_digit() {
        Err(Error::UnsupportedFormat(format!(
            "netpbm variant P{} (only binary P5 is read)",
            bytes[1] as char
        )))
    } else {
        Err(Error::UnsupportedFormat("unrecognized file signature".into()))
    }
}

/// Writes `img` as PGM or PNG depending on the file extension.
pub fn save_image(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(img, &format_for(path)?)?;
    write_atomic(path, &bytes)
}

/// Writes `bytes` to a temporary file beside `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Writes a mask as an 8-bit image with 0 for background and 255 for breast.
pub fn save_mask(path: impl AsRef<Path>, mask: &BreastMask) -> Result<()> {
    let pixels = mask.as_slice().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img = GrayImage::new(mask.width(), mask.height(), 8, pixels)?;
    save_image(path, &img)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Format {
    Pgm,
    Png,
}

pub(crate) fn format_for(path: &Path) -> Result<Format> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("pgm") => Ok(Format::Pgm),
        Some("png") => Ok(Format::Png),
        other => Err(Error::UnsupportedFormat(format!(
            "cannot infer output format from extension {:?}",
            other.unwrap_or("")
        ))),
    }
}

pub(crate) fn encode(img: &GrayImage, format: &Format) -> Result<Vec<u8>> {
    match format {
        Format::Pgm => Ok(encode_pgm(img)),
        Format::Png => encode_png(img),
    }
}

fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let maxval = img.max_level();
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    if maxval <= 255 {
        out.extend(img.pixels().iter().map(|&v| v as u8));
    } else {
        for &v in img.pixels() {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

fn bit_depth_for_maxval(maxval: u32) -> Option<u8> {
    match maxval {
        1..=255 => Some(8),
        256..=1023 => Some(10),
        1024..=4095 => Some(12),
        4096..=65535 => Some(16),
        _ => None,
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in &mut fields {
        *field = read_header_number(bytes, &mut pos)?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::CorruptImage("missing raster after PGM header".into()));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    let bit_depth = bit_depth_for_maxval(maxval)
        .ok_or_else(|| Error::CorruptImage(format!("invalid PGM maxval {maxval}")))?;
    let (width, height) = (width as usize, height as usize);
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::CorruptImage("PGM dimensions overflow".into()))?;
    let bytes_per_sample = if maxval > 255 { 2 } else { 1 };
    let raster = &bytes[pos..];
    if raster.len() < n * bytes_per_sample {
        return Err(Error::CorruptImage(format!(
            "PGM raster truncated: expected {} bytes, found {}",
            n * bytes_per_sample,
            raster.len()
        )));
    }
    let pixels: Vec<u16> = if bytes_per_sample == 1 {
        raster[..n].iter().map(|&b| u16::from(b)).collect()
    } else {
        raster[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    if pixels.iter().any(|&v| u32::from(v) > maxval) {
        return Err(Error::CorruptImage("PGM sample exceeds maxval".into()));
    }
    GrayImage::new(width, height, bit_depth, pixels).map_err(|e| Error::CorruptImage(e.to_string()))
}

fn read_header_number(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::CorruptImage("truncated PGM header".into())),
        }
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::CorruptImage("malformed PGM header".into()))
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let corrupt = |e: png::DecodingError| Error::CorruptImage(e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(corrupt)?;
    let (color, depth) = reader.output_color_type();
    match color {
        png::ColorType::Grayscale => {}
        png::ColorType::GrayscaleAlpha => {
            return Err(Error::UnsupportedFormat("grayscale PNG with alpha".into()))
        }
        _ => return Err(Error::ColorImage),
    }
    let sample_bits: u8 = match depth {
        png::BitDepth::Eight => 8,
        png::BitDepth::Sixteen => 16,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG sample depth {other:?} (only 8 and 16 are read)"
            )))
        }
    };
    let significant = reader
        .info()
        .sbit
        .as_ref()
        .and_then(|s| s.first().copied())
        .filter(|&b| sample_bits == 16 && matches!(b, 10 | 12));
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).map_err(corrupt)?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let data = &buf[..frame.buffer_size()];
    let pixels: Vec<u16> = if sample_bits == 8 {
        data.iter().map(|&b| u16::from(b)).collect()
    } else {
        data.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    let mut bit_depth = significant.unwrap_or(sample_bits);
    if pixels.iter().any(|&v| v > max_level(bit_depth)) {
        bit_depth = sample_bits;
    }
    GrayImage::new(width, height, bit_depth, pixels).map_err(|e| Error::CorruptImage(e.to_string()))
}

fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let internal = |e: png::EncodingError| Error::Internal(format!("png encoding: {e}"));
    let mut out = Vec::new();
    {
        let mut encoder =
            png::Encoder::new(BufWriter::new(&mut out), img.width() as u32, img.height() as u32);
        encoder.set_color(png::ColorType::Grayscale);
        let data: Vec<u8> = if img.bit_depth() == 8 {
            encoder.set_depth(png::BitDepth::Eight);
            img.pixels().iter().map(|&v| v as u8).collect()
        } else {
            encoder.set_depth(png::BitDepth::Sixteen);
            img.pixels().iter().flat_map(|v| v.to_be_bytes()).collect()
        };
        let mut writer = encoder.write_header().map_err(internal)?;
        if matches!(img.bit_depth(), 10 | 12) {
            writer
                .write_chunk(png::chunk::ChunkType(*b"sBIT"), &[img.bit_depth()])
                .map_err(internal)?;
        }
        writer.write_image_data(&data).map_err(internal)?;
        writer.finish().map_err(internal)?;
    }
    let _ = out.flush();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        write_atomic(&path, b"first version").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"second");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn zero_pgm_round_trip() {
        let img = GrayImage::filled(4, 4, 8, 0).unwrap();
        let back = decode(&encode(&img, &Format::Pgm).unwrap()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn sixteen_bit_values_are_not_rescaled() {
        let bytes = b"P5\n2 1\n65535\n\x0f\xff\x00\x01".to_vec();
        let img = decode(&bytes).unwrap();
        assert_eq!(img.bit_depth(), 16);
        assert_eq!(img.pixels(), &[4095, 1]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P5\n# made by hand\n2 1 # trailing\n255\n\x01\x02".to_vec();
        assert_eq!(decode(&bytes).unwrap().pixels(), &[1, 2]);
    }

    #[test]
    fn truncated_pgm_is_corrupt() {
        let bytes = b"P5\n4 4\n255\n\x00\x00".to_vec();
        assert!(matches!(decode(&bytes), Err(Error::CorruptImage(_))));
    }

    #[test]
    fn color_inputs_are_rejected() {
        assert!(matches!(decode(b"P6\n1 1\n255\n\x00\x00\x00"), Err(Error::ColorImage)));

        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 1, 1);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[1, 2, 3]).unwrap();
        }
        assert!(matches!(decode(&out), Err(Error::ColorImage)));
    }

    #[test]
    fn unknown_signature() {
        assert!(matches!(decode(b"GIF89a"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(decode(b"P2\n1 1\n255\n0"), Err(Error::UnsupportedFormat(_))));
    }

    fn arb_image() -> impl Strategy<Value = GrayImage> {
        (1usize..9, 1usize..9, prop::sample::select(vec![8u8, 10, 12, 16])).prop_flat_map(
            |(w, h, d)| {
                prop::collection::vec(0..=max_level(d), w * h)
                    .prop_map(move |px| GrayImage::new(w, h, d, px).unwrap())
            },
        )
    }

    proptest! {
        #[test]
        fn save_load_is_bit_exact(img in arb_image(), png in any::<bool>()) {
            let format = if png { Format::Png } else { Format::Pgm };
            let back = decode(&encode(&img, &format).unwrap()).unwrap();
            prop_assert_eq!(back.pixels(), img.pixels());
            prop_assert_eq!(back.bit_depth(), img.bit_depth());
            prop_assert_eq!((back.width(), back.height()), (img.width(), img.height()));
        }
    }
}
