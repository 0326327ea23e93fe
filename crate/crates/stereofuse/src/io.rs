//! File formats: PFM float maps, PGM/PNG images, CSV sparse priors and
//! PNG visualizations.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{FusionError, Result};
use crate::field::{DisparityField, OcclusionMasks, ScalarField, SeedPoint, SparsePrior};
use crate::image::{ColorImage, GrayImage};

/// Read a grayscale PFM. Negative scale means little-endian samples.
/// Rows are stored bottom-to-top; non-finite samples become invalid.
pub fn read_pfm(path: &Path) -> Result<DisparityField> {
    let mut reader = BufReader::new(open_named(path)?);
    let magic = read_token(&mut reader)?;
    if magic != "Pf" {
        return Err(FusionError::Image(format!(
            "{}: expected grayscale PFM magic Pf, got {magic:?}",
            path.display()
        )));
    }
    let width: usize = parse_token(&read_token(&mut reader)?, path, "width")?;
    let height: usize = parse_token(&read_token(&mut reader)?, path, "height")?;
    let scale: f64 = parse_token(&read_token(&mut reader)?, path, "scale")?;
    if width == 0 || height == 0 || scale == 0.0 {
        return Err(FusionError::Image(format!(
            "{}: bad PFM header {width}x{height} scale {scale}",
            path.display()
        )));
    }
    let little = scale < 0.0;
    let mut values = vec![0.0f32; width * height];
    let mut valid = vec![false; width * height];
    for file_row in 0..height {
        let y = height - 1 - file_row;
        for x in 0..width {
            let v = if little {
                reader.read_f32::<LittleEndian>()?
            } else {
                reader.read_f32::<BigEndian>()?
            };
            let i = y * width + x;
            if v.is_finite() {
                values[i] = v;
                valid[i] = true;
            }
        }
    }
    DisparityField::from_parts(width, height, values, valid)
}

/// Write a grayscale little-endian PFM (scale -1.0), invalid pixels as NaN.
pub fn write_pfm(path: &Path, field: &DisparityField) -> Result<()> {
    let mut w = BufWriter::new(create_named(path)?);
    write!(w, "Pf\n{} {}\n-1.0\n", field.width(), field.height())?;
    for file_row in 0..field.height() {
        let y = field.height() - 1 - file_row;
        for x in 0..field.width() {
            let v = field.get(x, y).unwrap_or(f32::NAN);
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_token(reader: &mut impl Read) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    // skip leading whitespace, then read until the single delimiter
    loop {
        reader.read_exact(&mut byte)?;
        if !byte[0].is_ascii_whitespace() {
            token.push(byte[0]);
            break;
        }
    }
    loop {
        reader.read_exact(&mut byte)?;
        if byte[0].is_ascii_whitespace() {
            break;
        }
        token.push(byte[0]);
    }
    String::from_utf8(token)
        .map_err(|_| FusionError::Image("non-ASCII PFM header token".into()))
}

fn parse_token<T: std::str::FromStr>(token: &str, path: &Path, what: &str) -> Result<T> {
    token.parse().map_err(|_| {
        FusionError::Image(format!("{}: bad PFM {what}: {token:?}", path.display()))
    })
}

fn open_named(path: &Path) -> Result<File> {
    File::open(path)
        .map_err(|e| FusionError::InvalidInput(format!("{}: {e}", path.display())))
}

fn create_named(path: &Path) -> Result<File> {
    File::create(path)
        .map_err(|e| FusionError::InvalidInput(format!("{}: {e}", path.display())))
}

fn decode_image(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|e| FusionError::Image(format!("{}: {e}", path.display())))
}

/// Load an 8/16-bit PGM or PNG as luminance in [0, 1].
pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let img = decode_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    // to_luma16 widens 8-bit samples by 257, so /65535 normalizes both depths
    let data: Vec<f32> = img
        .to_luma16()
        .into_raw()
        .iter()
        .map(|&v| v as f32 / 65535.0)
        .collect();
    GrayImage::new(w, h, data)
}

/// Load an image keeping its RGB planes, in [0, 1].
pub fn load_color(path: &Path) -> Result<ColorImage> {
    let img = decode_image(path)?.to_rgb32f();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut r = Vec::with_capacity(w * h);
    let mut g = Vec::with_capacity(w * h);
    let mut b = Vec::with_capacity(w * h);
    for px in img.pixels() {
        r.push(px.0[0]);
        g.push(px.0[1]);
        b.push(px.0[2]);
    }
    ColorImage::new(w, h, r, g, b)
}

/// Write a [0, 1] luminance image as 16-bit PNG (or PGM by extension).
pub fn write_gray_16bit(path: &Path, img: &GrayImage) -> Result<()> {
    let buf: Vec<u16> = img
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let out: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::from_raw(img.width() as u32, img.height() as u32, buf)
            .expect("buffer sized from image");
    out.save(path)
        .map_err(|e| FusionError::Image(format!("{}: {e}", path.display())))
}

/// Disparity visualization: linear gray over [d_min, d_max], invalid
/// pixels white, depth-occluded pixels black.
pub fn write_disparity_png(
    path: &Path,
    field: &DisparityField,
    masks: Option<&OcclusionMasks>,
    d_min: f64,
    d_max: f64,
) -> Result<()> {
    let (w, h) = (field.width(), field.height());
    let span = (d_max - d_min).max(f64::MIN_POSITIVE);
    let mut buf = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let px = if masks.is_some_and(|m| m.is_depth_occ(x, y)) {
                0
            } else {
                match field.get(x, y) {
                    // 1..=254 keeps data distinguishable from the marker colors
                    Some(v) => {
                        let s = ((v as f64 - d_min) / span).clamp(0.0, 1.0);
                        1 + (s * 253.0).round() as u8
                    }
                    None => 255,
                }
            };
            buf[y * w + x] = px;
        }
    }
    let out: image::ImageBuffer<image::Luma<u8>, Vec<u8>> =
        image::ImageBuffer::from_raw(w as u32, h as u32, buf).expect("buffer sized from image");
    out.save(path)
        .map_err(|e| FusionError::Image(format!("{}: {e}", path.display())))
}

/// Occlusion overlay: stereo-occlusions red, depth-occlusions blue
/// (both purple), everything else white.
pub fn write_masks_png(path: &Path, masks: &OcclusionMasks) -> Result<()> {
    let (w, h) = (masks.width(), masks.height());
    let mut buf = vec![255u8; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) * 3;
            if masks.is_stereo_occ(x, y) || masks.is_depth_occ(x, y) {
                buf[i] = if masks.is_stereo_occ(x, y) { 255 } else { 0 };
                buf[i + 1] = 0;
                buf[i + 2] = if masks.is_depth_occ(x, y) { 255 } else { 0 };
            }
        }
    }
    let out: image::ImageBuffer<image::Rgb<u8>, Vec<u8>> =
        image::ImageBuffer::from_raw(w as u32, h as u32, buf).expect("buffer sized from image");
    out.save(path)
        .map_err(|e| FusionError::Image(format!("{}: {e}", path.display())))
}

/// Scalar field (entropy, heatmap) as 8-bit PNG over [0, 1].
pub fn write_scalar_png(path: &Path, field: &ScalarField) -> Result<()> {
    let (w, h) = (field.width(), field.height());
    let buf: Vec<u8> = field
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let out: image::ImageBuffer<image::Luma<u8>, Vec<u8>> =
        image::ImageBuffer::from_raw(w as u32, h as u32, buf).expect("buffer sized from image");
    out.save(path)
        .map_err(|e| FusionError::Image(format!("{}: {e}", path.display())))
}

/// Parse a sparse prior from CSV lines `x,y,d` (optional `x,y,d` header,
/// `#` comments) or from a PFM map whose valid pixels become seeds.
/// Write a [0, 1] color image as 8-bit RGB PNG.
pub fn write_color_png(path: &Path, img: &ColorImage) -> Result<()> {
    let (w, h) = (img.width(), img.height());
    let mut buf = vec![0u8; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let rgb = img.rgb(x, y);
            let i = (y * w + x) * 3;
            for c in 0..3 {
                buf[i + c] = (rgb[c].clamp(0.0, 1.0) * 255.0).round() as u8;
            }
        }
    }
    let out: image::ImageBuffer<image::Rgb<u8>, Vec<u8>> =
        image::ImageBuffer::from_raw(w as u32, h as u32, buf).expect("buffer sized from image");
    out.save(path)
        .map_err(|e| FusionError::Image(format!("{}: {e}", path.display())))
}

/// Read a boolean mask from a gray/color PNG: nonzero luminance = true.
pub fn read_bool_mask(path: &Path) -> Result<(usize, usize, Vec<bool>)> {
    let img = decode_image(path)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mask = img.into_raw().iter().map(|&v| v > 0).collect();
    Ok((w, h, mask))
}

pub fn read_prior(path: &Path) -> Result<SparsePrior> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm")) {
        let field = read_pfm(path)?;
        let mut entries = Vec::new();
        for y in 0..field.height() {
            for x in 0..field.width() {
                if let Some(d) = field.get(x, y) {
                    entries.push(SeedPoint { x, y, d: d as f64 });
                }
            }
        }
        return Ok(SparsePrior::new(entries));
    }
    let reader = BufReader::new(open_named(path)?);
    let mut entries = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.eq_ignore_ascii_case("x,y,d") {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let bad = || {
            FusionError::InvalidInput(format!(
                "{} line {}: expected x,y,d",
                path.display(),
                lineno + 1
            ))
        };
        let x: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let y: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let d: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if parts.next().is_some() {
            return Err(bad());
        }
        entries.push(SeedPoint { x, y, d });
    }
    Ok(SparsePrior::new(entries))
}

/// Write a sparse prior as `x,y,d` CSV with a header line.
pub fn write_prior_csv(path: &Path, prior: &SparsePrior) -> Result<()> {
    let mut w = BufWriter::new(create_named(path)?);
    writeln!(w, "x,y,d")?;
    for s in &prior.entries {
        writeln!(w, "{},{},{}", s.x, s.y, s.d)?;
    }
    w.flush()?;
    Ok(())
}
