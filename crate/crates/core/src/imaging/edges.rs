use nalgebra::Vector3;

use super::GrayImage;

pub const DEFAULT_REL_THRESHOLD: f64 = 0.4;
pub const DEFAULT_ABS_MIN_GRADIENT: f64 = 0.1;

/// Detected limb pixels `(u, v)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LimbPointSet {
    pub points: Vec<[f64; 2]>,
}

impl LimbPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `[u, v, 1]` columns.
    pub fn homogeneous(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.points.iter().map(|p| Vector3::new(p[0], p[1], 1.0))
    }
}

/// Gradient magnitude with central differences inside and one-sided
/// differences on the border.
pub fn gradient_magnitude(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width, img.height);
    let mut out = vec![0.0; w * h];
    if w < 2 || h < 2 {
        return out;
    }
    let d = &img.data;
    let gx_at = |r: usize, c: usize| -> f64 {
        if c == 0 {
            d[r * w + 1] - d[r * w]
        } else if c == w - 1 {
            d[r * w + c] - d[r * w + c - 1]
        } else {
            (d[r * w + c + 1] - d[r * w + c - 1]) * 0.5
        }
    };
    let gy_at = |r: usize, c: usize| -> f64 {
        if r == 0 {
            d[w + c] - d[c]
        } else if r == h - 1 {
            d[r * w + c] - d[(r - 1) * w + c]
        } else {
            (d[(r + 1) * w + c] - d[(r - 1) * w + c]) * 0.5
        }
    };
    for r in 0..h {
        for c in [0, w - 1] {
            out[r * w + c] = (gx_at(r, c).powi(2) + gy_at(r, c).powi(2)).sqrt();
        }
    }
    for c in 0..w {
        for r in [0, h - 1] {
            out[r * w + c] = (gx_at(r, c).powi(2) + gy_at(r, c).powi(2)).sqrt();
        }
    }
    for r in 1..h - 1 {
        let up = &d[(r - 1) * w..r * w];
        let mid = &d[r * w..(r + 1) * w];
        let down = &d[(r + 1) * w..(r + 2) * w];
        let row = &mut out[r * w..(r + 1) * w];
        for c in 1..w - 1 {
            let gx = (mid[c + 1] - mid[c - 1]) * 0.5;
            let gy = (down[c] - up[c]) * 0.5;
            row[c] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

/// Pixels whose gradient magnitude exceeds
/// `max(rel_threshold * max_gradient, abs_min_gradient)`.
pub fn detect_edges(img: &GrayImage, rel_threshold: f64, abs_min_gradient: f64) -> LimbPointSet {
    let g = gradient_magnitude(img);
    let gmax = g.iter().cloned().fold(0.0, f64::max);
    let threshold = (rel_threshold * gmax).max(abs_min_gradient);
    let points = g
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > threshold)
        .map(|(i, _)| [(i % img.width) as f64, (i / img.width) as f64])
        .collect();
    LimbPointSet { points }
}
