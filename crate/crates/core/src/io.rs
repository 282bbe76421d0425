//! Image and field files.
//!
//! * PGM: binary P5, 16-bit big-endian samples scaled so the peak maps to
//!   65535, with the [`GridSpec`] as a JSON comment line.
//! * PNG: 16-bit grayscale, same scaling, no grid metadata.
//! * Raw fields: interleaved `re, im` little-endian `f64` pairs, row-major,
//!   plus a JSON sidecar carrying the grid.

use crate::field::{ComplexField, GridSpec, IntensityImage, DEFAULT_WAVELENGTH};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{path}: unsupported extension (expected .pgm or .png)")]
    Extension { path: PathBuf },
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn to_u16(img: &IntensityImage) -> Vec<u16> {
    let peak = img.peak();
    let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
    img.pixels
        .iter()
        .map(|p| (p * scale).round().clamp(0.0, 65535.0) as u16)
        .collect()
}

/// Metadata for files that carry none: pixel pitch 1 µm.
pub fn fallback_grid(n: usize) -> GridSpec {
    let pitch = 1e-6;
    GridSpec {
        n,
        pitch,
        wavelength: DEFAULT_WAVELENGTH,
        waist: n as f64 * pitch / 8.0,
    }
}

pub fn write_pgm(path: &Path, img: &IntensityImage) -> Result<(), IoError> {
    let grid = serde_json::to_string(&img.grid).expect("grid serializes");
    let n = img.n();
    let mut out = Vec::with_capacity(64 + grid.len() + 2 * n * n);
    write!(out, "P5\n# {grid}\n{n} {n}\n65535\n").expect("write to Vec");
    for v in to_u16(img) {
        out.extend_from_slice(&v.to_be_bytes());
    }
    fs::write(path, out).map_err(file_err(path))
}

fn read_token(r: &mut impl BufRead, comments: &mut Vec<String>) -> std::io::Result<String> {
    let mut tok = String::new();
    loop {
        let mut b = [0u8; 1];
        if r.read(&mut b)? == 0 {
            return Ok(tok);
        }
        let c = b[0] as char;
        if c == '#' && tok.is_empty() {
            let mut line = String::new();
            r.read_line(&mut line)?;
            comments.push(line.trim().to_string());
        } else if c.is_ascii_whitespace() {
            if !tok.is_empty() {
                return Ok(tok);
            }
        } else {
            tok.push(c);
        }
    }
}

pub fn read_pgm(path: &Path, grid: Option<GridSpec>) -> Result<IntensityImage, IoError> {
    let f = fs::File::open(path).map_err(file_err(path))?;
    let mut r = BufReader::new(f);
    let mut comments = Vec::new();
    let mut next = |r: &mut BufReader<fs::File>| -> Result<String, IoError> {
        read_token(r, &mut comments).map_err(file_err(path))
    };
    if next(&mut r)? != "P5" {
        return Err(format_err(path, "not a binary PGM (P5)"));
    }
    let num = |s: String| -> Result<usize, IoError> {
        s.parse()
            .map_err(|_| format_err(path, format!("bad header field {s:?}")))
    };
    let w = num(next(&mut r)?)?;
    let h = num(next(&mut r)?)?;
    let maxval = num(next(&mut r)?)?;
    drop(next);
    if w != h || w == 0 {
        return Err(format_err(path, format!("image must be square, got {w}×{h}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format_err(path, format!("bad maxval {maxval}")));
    }
    let wide = maxval > 255;
    let mut raw = vec![0u8; w * h * if wide { 2 } else { 1 }];
    r.read_exact(&mut raw).map_err(file_err(path))?;
    let pixels: Vec<f64> = if wide {
        raw.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
            .collect()
    } else {
        raw.iter().map(|&b| b as f64).collect()
    };
    let grid = match grid {
        Some(g) => g,
        None => comments
            .iter()
            .find_map(|c| serde_json::from_str::<GridSpec>(c).ok())
            .unwrap_or_else(|| fallback_grid(w)),
    };
    if grid.n != w {
        return Err(format_err(
            path,
            format!("grid n = {} does not match image size {w}", grid.n),
        ));
    }
    IntensityImage::new(grid, pixels).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_png(path: &Path, img: &IntensityImage) -> Result<(), IoError> {
    let n = img.n() as u32;
    let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(n, n, to_u16(img))
        .expect("buffer size matches");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| format_err(path, e.to_string()))
}

pub fn read_png(path: &Path, grid: Option<GridSpec>) -> Result<IntensityImage, IoError> {
    let dynimg = image::open(path).map_err(|e| format_err(path, e.to_string()))?;
    let luma = dynimg.to_luma16();
    let (w, h) = luma.dimensions();
    if w != h || w == 0 {
        return Err(format_err(path, format!("image must be square, got {w}×{h}")));
    }
    let grid = grid.unwrap_or_else(|| fallback_grid(w as usize));
    if grid.n != w as usize {
        return Err(format_err(
            path,
            format!("grid n = {} does not match image size {w}", grid.n),
        ));
    }
    let pixels = luma.into_raw().into_iter().map(|v| v as f64).collect();
    IntensityImage::new(grid, pixels).map_err(|e| format_err(path, e.to_string()))
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

/// Dispatches on the `.pgm` / `.png` extension.
pub fn write_image(path: &Path, img: &IntensityImage) -> Result<(), IoError> {
    match extension(path).as_deref() {
        Some("pgm") => write_pgm(path, img),
        Some("png") => write_png(path, img),
        _ => Err(IoError::Extension {
            path: path.to_path_buf(),
        }),
    }
}

pub fn read_image(path: &Path, grid: Option<GridSpec>) -> Result<IntensityImage, IoError> {
    match extension(path).as_deref() {
        Some("pgm") => read_pgm(path, grid),
        Some("png") => read_png(path, grid),
        _ => Err(IoError::Extension {
            path: path.to_path_buf(),
        }),
    }
}

/// `stem.pgm` or `stem.png` in `dir`, preferring PGM.
pub fn find_image(dir: &Path, stem: &str) -> Option<PathBuf> {
    ["pgm", "png"]
        .iter()
        .map(|ext| dir.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
}

#[derive(Serialize, Deserialize)]
struct FieldSidecar {
    grid: GridSpec,
    layout: String,
}

const RAW_LAYOUT: &str = "row-major interleaved re,im float64 little-endian";

/// Writes `path` and `path.json`.
pub fn write_field_raw(path: &Path, field: &ComplexField) -> Result<(), IoError> {
    let mut out = Vec::with_capacity(16 * field.values.len());
    for v in &field.values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    fs::write(path, out).map_err(file_err(path))?;
    let side = sidecar_path(path);
    let meta = FieldSidecar {
        grid: field.grid,
        layout: RAW_LAYOUT.into(),
    };
    let json = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    fs::write(&side, json).map_err(file_err(&side))
}

pub fn read_field_raw(path: &Path) -> Result<ComplexField, IoError> {
    let side = sidecar_path(path);
    let meta: FieldSidecar = serde_json::from_slice(&fs::read(&side).map_err(file_err(&side))?)
        .map_err(|e| format_err(&side, e.to_string()))?;
    let bytes = fs::read(path).map_err(file_err(path))?;
    if bytes.len() != 16 * meta.grid.len() {
        return Err(format_err(path, "size does not match the sidecar grid"));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    Ok(ComplexField {
        grid: meta.grid,
        values,
    })
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{hg_field, intensity, lg_field, Charge};

    fn sample() -> IntensityImage {
        intensity(&hg_field(&GridSpec::default(), 0.4))
    }

    fn rel_err(a: &IntensityImage, b: &IntensityImage) -> f64 {
        let pa = a.peak();
        let pb = b.peak();
        a.pixels
            .iter()
            .zip(&b.pixels)
            .map(|(x, y)| (x / pa - y / pb).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn pgm_roundtrip_keeps_grid() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let img = sample();
        write_image(&p, &img).unwrap();
        let back = read_image(&p, None).unwrap();
        assert_eq!(back.grid, img.grid);
        assert!(rel_err(&img, &back) < 1e-4);
        let text = fs::read(&p).unwrap();
        assert!(text.starts_with(b"P5\n# {"));
    }

    #[test]
    fn png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = sample();
        write_image(&p, &img).unwrap();
        let back = read_image(&p, Some(img.grid)).unwrap();
        assert!(rel_err(&img, &back) < 1e-4);
        let bare = read_image(&p, None).unwrap();
        assert_eq!(bare.n(), img.n());
    }

    #[test]
    fn eight_bit_pgm_without_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.pgm");
        let mut bytes = b"P5 # made elsewhere\n4 4 255\n".to_vec();
        bytes.extend((0u8..16).map(|i| i * 10));
        fs::write(&p, bytes).unwrap();
        let img = read_image(&p, None).unwrap();
        assert_eq!(img.n(), 4);
        assert_eq!(img.at(1, 1), 50.0);
    }

    #[test]
    fn rejects_non_square_and_unknown_extensions() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.pgm");
        fs::write(&p, b"P5\n4 3\n255\n000000000000").unwrap();
        assert!(read_image(&p, None).is_err());
        assert!(write_image(&dir.path().join("x.tif"), &sample()).is_err());
    }

    #[test]
    fn raw_field_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.raw");
        let f = lg_field(&GridSpec::default(), Charge::Minus);
        write_field_raw(&p, &f).unwrap();
        assert!(dir.path().join("f.raw.json").is_file());
        assert_eq!(read_field_raw(&p).unwrap(), f);
    }
}
