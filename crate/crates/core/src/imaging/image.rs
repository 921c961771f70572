use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::LimbPointSet;
use crate::error::{domain, Error, Result};

/// Row-major grayscale raster, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }
}

/// Adds i.i.d. zero-mean Gaussian noise and clamps to `[0, 1]`.
pub fn add_noise(img: &GrayImage, sigma: f64, seed: u64) -> Result<GrayImage> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return domain(format!("noise sigma must be non-negative, got {sigma}"));
    }
    let mut out = img.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for px in out.data.iter_mut() {
        let n: f64 = StandardNormal.sample(&mut rng);
        *px = (*px + sigma * n).clamp(0.0, 1.0);
    }
    Ok(out)
}

const MAX_PIXELS: usize = 1 << 26;

/// Binary 8-bit PGM.
pub fn write_pgm<W: Write>(img: &GrayImage, mut w: W) -> Result<()> {
    write!(w, "P5\n{} {}\n255\n", img.width, img.height)?;
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

/// Decodes a binary PGM (P5), 8- or 16-bit, into `[0, 1]` values.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let mut token = || -> Result<&[u8]> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        Ok(&bytes[start..pos])
    };
    if token()? != b"P5" {
        return Err(Error::Parse("not a binary PGM (P5)".into()));
    }
    let mut number = |name: &str| -> Result<usize> {
        let t = token()?;
        std::str::from_utf8(t)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("bad PGM {name}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Parse("PGM dimensions must be positive".into()));
    }
    let n = width
        .checked_mul(height)
        .filter(|&n| n <= MAX_PIXELS)
        .ok_or_else(|| Error::Parse("PGM too large".into()))?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse(format!("PGM maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Parse("missing raster separator".into()));
    }
    let raster = &bytes[pos + 1..];
    let depth = if maxval < 256 { 1 } else { 2 };
    if raster.len() < n * depth {
        return Err(Error::Parse(format!(
            "PGM raster has {} bytes, expected {}",
            raster.len(),
            n * depth
        )));
    }
    let scale = 1.0 / maxval as f64;
    let data = if depth == 1 {
        raster[..n].iter().map(|&b| (b as f64 * scale).min(1.0)).collect()
    } else {
        raster[..2 * n]
            .chunks_exact(2)
            .map(|c| (u16::from_be_bytes([c[0], c[1]]) as f64 * scale).min(1.0))
            .collect()
    };
    Ok(GrayImage {
        width,
        height,
        data,
    })
}

/// Limb points as CSV with header `u,v`.
pub fn write_limb_csv<W: Write>(limb: &LimbPointSet, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["u", "v"]).map_err(csv_err)?;
    for p in &limb.points {
        wr.write_record([p[0].to_string(), p[1].to_string()]).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_limb_csv<R: BufRead>(r: R) -> Result<LimbPointSet> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers().map_err(csv_err)?.clone();
    if headers.len() != 2 || &headers[0] != "u" || &headers[1] != "v" {
        return Err(Error::Parse("limb CSV header must be `u,v`".into()));
    }
    let mut points = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse(format!("bad limb coordinate in {:?}", rec)))
        };
        points.push([parse(0)?, parse(1)?]);
    }
    Ok(LimbPointSet { points })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}
