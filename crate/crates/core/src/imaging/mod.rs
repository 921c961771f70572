//! Synthetic imaging of a sunlit triaxial ellipsoid and limb extraction.
//!
//! Pixel coordinates are `(u, v)` = (column, row) with the pixel center on
//! the integer. The camera frame has x to the right, y down the image and z
//! along the boresight.

mod edges;
mod image;
mod render;

pub use edges::{detect_edges, gradient_magnitude, LimbPointSet, DEFAULT_ABS_MIN_GRADIENT, DEFAULT_REL_THRESHOLD};
pub use image::{add_noise, read_limb_csv, read_pgm, write_limb_csv, write_pgm, GrayImage};
pub use render::{body_rotation, render, render_noiseless, sun_direction};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Pinhole camera parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fov_deg: f64,
    /// Square image side, pixels.
    pub size: usize,
    pub alpha_skew: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            fov_deg: 30.0,
            size: 1000,
            alpha_skew: 0.0,
            dx: 1.0,
            dy: 1.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return domain(format!("field of view must lie in (0, 180) deg, got {}", self.fov_deg));
        }
        if self.size < 2 {
            return domain("image size must be at least 2 pixels");
        }
        if !(self.dx.is_finite() && self.dy.is_finite()) || self.dx == 0.0 || self.dy == 0.0 {
            return domain("pixel densities must be finite and non-zero");
        }
        if !self.alpha_skew.is_finite() {
            return domain("pixel skew must be finite");
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal_length(&self) -> f64 {
        (self.size as f64 / 2.0) / (self.fov_deg.to_radians() / 2.0).tan()
    }

    /// Principal point `(u_p, v_p)`.
    pub fn principal_point(&self) -> (f64, f64) {
        let c = self.size as f64 / 2.0;
        (c, c)
    }
}

/// Camera placement in the Hill frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    /// Camera position relative to the body center, km.
    pub position: Vector3<f64>,
    pub boresight: Vector3<f64>,
    /// Image "up" direction, orthogonal to the boresight.
    pub up: Vector3<f64>,
}

impl CameraPose {
    pub fn new(position: Vector3<f64>, boresight: Vector3<f64>, up: Vector3<f64>) -> Result<Self> {
        if !position.iter().all(|x| x.is_finite()) {
            return Err(Error::Geometry("camera position must be finite".into()));
        }
        if (boresight.norm() - 1.0).abs() > 1e-12 || (up.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Geometry("boresight and up must be unit vectors".into()));
        }
        if boresight.dot(&up).abs() > 1e-9 {
            return Err(Error::Geometry("up must be orthogonal to the boresight".into()));
        }
        Ok(Self {
            position,
            boresight,
            up,
        })
    }

    /// Boresight on the body center; up is Hill z projected onto the image
    /// plane, or Hill y when looking along z.
    pub fn nadir(position: Vector3<f64>) -> Result<Self> {
        let rn = position.norm();
        if !(rn > 0.0) || !rn.is_finite() {
            return Err(Error::Geometry("nadir pose needs a non-zero finite position".into()));
        }
        let b = -position / rn;
        let mut up = Vector3::z() - b * b.z;
        if up.norm() < 1e-6 {
            up = Vector3::y() - b * b.y;
        }
        Self::new(position, b, up.normalize())
    }

    /// Rotation taking Hill-frame vectors into the camera frame.
    pub fn camera_from_hill(&self) -> Matrix3<f64> {
        let z = self.boresight;
        let y = -self.up;
        let x = y.cross(&z);
        Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
    }
}
