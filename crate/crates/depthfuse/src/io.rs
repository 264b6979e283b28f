//! Raster file I/O.
//!
//! Color images travel as 8-bit RGB PNG. Gray images as binary PGM (P5,
//! maxval 255). Depth maps as binary PGM with maxval 65535, one sample per
//! pixel equal to the depth in millimeters (big-endian, per the PNM spec).
//! Write followed by read is the identity for all three kinds.

use std::io::Write as _;
use std::path::Path;

use crate::raster::{ColorImage, DepthMap, GrayImage};
use crate::{Error, Result};

/// A decoded raster of any supported kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Raster {
    Color(ColorImage),
    Gray(GrayImage),
    Depth(DepthMap),
}

/// Dispatch on extension and header: `.png` decodes as color, `.pgm` as gray
/// (maxval 255) or depth (maxval 65535).
pub fn read_raster(path: &Path) -> Result<Raster> {
    match extension(path)?.as_str() {
        "png" => Ok(Raster::Color(read_color_png(path)?)),
        "pgm" => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let pgm = parse_pgm(&bytes)?;
            Ok(match pgm.maxval {
                255 => Raster::Gray(gray_from_pgm(&pgm)?),
                _ => Raster::Depth(depth_from_pgm(&pgm)?),
            })
        }
        other => Err(Error::UnsupportedFormat(other.to_string())),
    }
}

pub fn write_raster(path: &Path, raster: &Raster) -> Result<()> {
    match raster {
        Raster::Color(img) => write_color_png(path, img),
        Raster::Gray(img) => write_gray_pgm(path, img),
        Raster::Depth(map) => write_depth_pgm(path, map),
    }
}

fn extension(path: &Path) -> Result<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .ok_or_else(|| Error::UnsupportedFormat(path.display().to_string()))
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

pub fn read_color_png(path: &Path) -> Result<ColorImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(map_image_error)?;
    let rgb = decoded.into_rgb8();
    ColorImage::from_samples(rgb.width() as usize, rgb.height() as usize, rgb.into_raw())
}

pub fn write_color_png(path: &Path, img: &ColorImage) -> Result<()> {
    let buf: image::RgbImage = image::ImageBuffer::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.samples().to_vec(),
    )
    .expect("raster invariants guarantee a full buffer");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(map_image_error)
}

fn map_image_error(err: image::ImageError) -> Error {
    use image::ImageError;
    match err {
        ImageError::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::TruncatedPayload {
                expected: 0,
                got: 0,
            }
        }
        ImageError::IoError(e) => Error::Io {
            context: "png".into(),
            source: e,
        },
        ImageError::Limits(_) => Error::DimensionOverflow {
            width: 0,
            height: 0,
        },
        other => Error::MalformedHeader {
            format: "png",
            reason: other.to_string(),
        },
    }
}

// ---------------------------------------------------------------------------
// PGM (binary P5)
// ---------------------------------------------------------------------------

struct Pgm<'a> {
    width: usize,
    height: usize,
    maxval: u32,
    payload: &'a [u8],
}

fn bad_header(reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        format: "pgm",
        reason: reason.into(),
    }
}

/// Reads one whitespace-separated header token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
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
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(bad_header("unexpected end of header"));
    }
    Ok(&bytes[start..*pos])
}

fn parse_decimal(token: &[u8], what: &str) -> Result<u64> {
    let s = std::str::from_utf8(token).map_err(|_| bad_header(format!("{what} not ASCII")))?;
    s.parse::<u64>()
        .map_err(|_| bad_header(format!("{what} `{s}` is not a decimal integer")))
}

fn parse_pgm(bytes: &[u8]) -> Result<Pgm<'_>> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(bad_header(format!(
            "magic `{}` is not P5",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = parse_decimal(next_token(bytes, &mut pos)?, "width")?;
    let height = parse_decimal(next_token(bytes, &mut pos)?, "height")?;
    let maxval = parse_decimal(next_token(bytes, &mut pos)?, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions {
            width: width as usize,
            height: height as usize,
        });
    }
    if width > i32::MAX as u64 || height > i32::MAX as u64 || width * height > i32::MAX as u64 {
        return Err(Error::DimensionOverflow {
            width: width.min(usize::MAX as u64) as usize,
            height: height.min(usize::MAX as u64) as usize,
        });
    }
    if maxval != 255 && maxval != 65535 {
        return Err(Error::UnsupportedFormat(format!("pgm maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad_header("missing payload separator"));
    }
    pos += 1;
    let bytes_per_sample = if maxval == 255 { 1 } else { 2 };
    let expected = width as usize * height as usize * bytes_per_sample;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            got: payload.len(),
        });
    }
    Ok(Pgm {
        width: width as usize,
        height: height as usize,
        maxval: maxval as u32,
        payload: &payload[..expected],
    })
}

fn gray_from_pgm(pgm: &Pgm<'_>) -> Result<GrayImage> {
    debug_assert_eq!(pgm.maxval, 255);
    GrayImage::from_samples(
        pgm.width,
        pgm.height,
        pgm.payload.iter().map(|&b| b as f64).collect(),
    )
}

fn depth_from_pgm(pgm: &Pgm<'_>) -> Result<DepthMap> {
    debug_assert_eq!(pgm.maxval, 65535);
    let samples = pgm
        .payload
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    DepthMap::from_samples(pgm.width, pgm.height, samples)
}

pub fn read_gray_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let pgm = parse_pgm(&bytes)?;
    if pgm.maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "expected 8-bit gray pgm, maxval is {}",
            pgm.maxval
        )));
    }
    gray_from_pgm(&pgm)
}

/// Quantizes to 8 bits (round, clamp) on the way out.
pub fn write_gray_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut out = Vec::with_capacity(32 + img.samples().len());
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height()).expect("vec write");
    out.extend(
        img.samples()
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8),
    );
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_depth_pgm(path: &Path) -> Result<DepthMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let pgm = parse_pgm(&bytes)?;
    if pgm.maxval != 65535 {
        return Err(Error::UnsupportedFormat(format!(
            "expected 16-bit depth pgm, maxval is {}",
            pgm.maxval
        )));
    }
    depth_from_pgm(&pgm)
}

pub fn write_depth_pgm(path: &Path, map: &DepthMap) -> Result<()> {
    write_pgm16(path, map.width(), map.height(), map.samples())
}

/// 16-bit big-endian P5 writer, shared by depth maps and label maps.
pub fn write_pgm16(path: &Path, width: usize, height: usize, samples: &[u16]) -> Result<()> {
    let mut out = Vec::with_capacity(32 + samples.len() * 2);
    write!(out, "P5\n{width} {height}\n65535\n").expect("vec write");
    for &v in samples {
        out.extend_from_slice(&v.to_be_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_pgm16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let map = read_depth_pgm(path)?;
    Ok((map.width(), map.height(), map.samples().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp(name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        (dir, path)
    }

    #[test]
    fn depth_round_trip_is_bit_identical() {
        let mut map = DepthMap::new(640, 480).unwrap();
        for y in 0..480 {
            for x in 0..640 {
                map.set(x, y, ((x * 131 + y * 17) % 5001) as u16);
            }
        }
        let (_d, path) = temp("depth.pgm");
        write_depth_pgm(&path, &map).unwrap();
        assert_eq!(read_depth_pgm(&path).unwrap(), map);
    }

    #[test]
    fn sixteen_bit_values_preserved_exactly() {
        let map = DepthMap::from_samples(3, 1, vec![0, 1, 65535]).unwrap();
        let (_d, path) = temp("extremes.pgm");
        write_depth_pgm(&path, &map).unwrap();
        assert_eq!(read_depth_pgm(&path).unwrap().samples(), &[0, 1, 65535]);
    }

    #[test]
    fn truncated_payload_is_its_own_error() {
        let (_d, path) = temp("trunc.pgm");
        std::fs::write(&path, b"P5\n4 4\n255\n12345").unwrap();
        assert!(matches!(
            read_gray_pgm(&path),
            Err(Error::TruncatedPayload {
                expected: 16,
                got: 5
            })
        ));
    }

    #[test]
    fn malformed_header_is_its_own_error() {
        let (_d, path) = temp("bad.pgm");
        std::fs::write(&path, b"P6\n2 2\n255\n0000").unwrap();
        assert!(matches!(
            read_gray_pgm(&path),
            Err(Error::MalformedHeader { .. })
        ));
        std::fs::write(&path, b"P5\n2 two\n255\n0000").unwrap();
        assert!(matches!(
            read_gray_pgm(&path),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn header_comments_are_skipped() {
        let (_d, path) = temp("comment.pgm");
        std::fs::write(&path, b"P5 # magic\n# a comment line\n2 1\n255\nab").unwrap();
        let img = read_gray_pgm(&path).unwrap();
        assert_eq!(img.samples(), &[b'a' as f64, b'b' as f64]);
    }

    #[test]
    fn oversized_dimensions_rejected() {
        let (_d, path) = temp("huge.pgm");
        std::fs::write(&path, b"P5\n4000000000 4000000000\n255\n").unwrap();
        assert!(matches!(
            read_gray_pgm(&path),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn png_round_trip() {
        let mut img = ColorImage::new(17, 9).unwrap();
        for y in 0..9 {
            for x in 0..17 {
                img.set_pixel(x, y, [(x * 15) as u8, (y * 28) as u8, ((x + y) * 9) as u8]);
            }
        }
        let (_d, path) = temp("img.png");
        write_color_png(&path, &img).unwrap();
        assert_eq!(read_color_png(&path).unwrap(), img);
    }

    #[test]
    fn gray_pgm_quantizes_on_write() {
        let img = GrayImage::from_samples(3, 1, vec![-4.0, 29.07, 300.2]).unwrap();
        let (_d, path) = temp("q.pgm");
        write_gray_pgm(&path, &img).unwrap();
        assert_eq!(read_gray_pgm(&path).unwrap().samples(), &[0.0, 29.0, 255.0]);
    }

    #[test]
    fn raster_dispatch_by_header() {
        let (_d, dir) = {
            let d = tempfile::tempdir().unwrap();
            let p = d.path().to_path_buf();
            (d, p)
        };
        let gray = GrayImage::from_samples(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let depth = DepthMap::from_samples(2, 2, vec![0, 600, 700, 800]).unwrap();
        write_gray_pgm(&dir.join("g.pgm"), &gray).unwrap();
        write_depth_pgm(&dir.join("d.pgm"), &depth).unwrap();
        assert!(matches!(
            read_raster(&dir.join("g.pgm")).unwrap(),
            Raster::Gray(_)
        ));
        assert!(matches!(
            read_raster(&dir.join("d.pgm")).unwrap(),
            Raster::Depth(_)
        ));
    }
}
