//! Perspective pinhole camera with FoV parameterization.
//!
//! The camera is described by a vertical field of view `v` (radians); the
//! focal length follows from the image height as `f = H / (2·tan(v/2))`.
//! No lens distortion, principal point defaults to the image center.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    InvalidImageSize { width: u32, height: u32 },
    #[error("vertical FoV must lie in (0, pi), got {0} rad")]
    InvalidFov(f64),
    #[error("focal length must be positive and finite, got {0}")]
    InvalidFocal(f64),
    #[error("point is behind the camera (Z = {0})")]
    BehindCamera(f64),
    #[error("depth must be positive, got {0}")]
    InvalidDepth(f64),
}

/// Image dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Result<Self, CameraError> {
        if width == 0 || height == 0 {
            return Err(CameraError::InvalidImageSize { width, height });
        }
        Ok(Self { width, height })
    }

    /// Image center, the default principal point.
    pub fn center(&self) -> [f64; 2] {
        [f64::from(self.width) / 2.0, f64::from(self.height) / 2.0]
    }
}

/// Vertical FoV to focal length: `f = H / (2·tan(v/2))`.
///
/// Strictly decreasing in `v` over the valid range (0, pi).
pub fn fov_to_focal(fov: f64, size: ImageSize) -> Result<f64, CameraError> {
    if !fov.is_finite() || fov <= 0.0 || fov >= std::f64::consts::PI {
        return Err(CameraError::InvalidFov(fov));
    }
    Ok(f64::from(size.height) / (2.0 * (fov / 2.0).tan()))
}

/// Inverse of [`fov_to_focal`]: `v = 2·atan(H / (2·f))`.
pub fn focal_to_fov(focal: f64, size: ImageSize) -> Result<f64, CameraError> {
    if !focal.is_finite() || focal <= 0.0 {
        return Err(CameraError::InvalidFocal(focal));
    }
    Ok(2.0 * (f64::from(size.height) / (2.0 * focal)).atan())
}

/// Pinhole intrinsics: vertical FoV, focal length, principal point.
///
/// `vertical_fov` and `focal_length` are kept consistent by construction
/// (`f = H / (2·tan(v/2))` for the `ImageSize` they were built from).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    /// Vertical field of view in radians.
    pub vertical_fov: f64,
    /// Focal length in pixels.
    pub focal_length: f64,
    /// Principal point (c_x, c_y) in pixels.
    pub principal_point: [f64; 2],
}

impl CameraIntrinsics {
    /// Build from a vertical FoV; principal point at the image center.
    pub fn from_fov(fov: f64, size: ImageSize) -> Result<Self, CameraError> {
        let focal = fov_to_focal(fov, size)?;
        Ok(Self {
            vertical_fov: fov,
            focal_length: focal,
            principal_point: size.center(),
        })
    }

    /// Build from a focal length; principal point at the image center.
    pub fn from_focal(focal: f64, size: ImageSize) -> Result<Self, CameraError> {
        let fov = focal_to_fov(focal, size)?;
        Ok(Self {
            vertical_fov: fov,
            focal_length: focal,
            principal_point: size.center(),
        })
    }

    /// Override the principal point (datasets with non-centered sensors).
    pub fn with_principal_point(mut self, cx: f64, cy: f64) -> Self {
        self.principal_point = [cx, cy];
        self
    }

    /// Project a camera-space point (meters) to pixel coordinates:
    /// `p = f·(X/Z, Y/Z) + (c_x, c_y)`.
    pub fn project(&self, point: [f64; 3]) -> Result<[f64; 2], CameraError> {
        let [x, y, z] = point;
        if z <= 0.0 {
            return Err(CameraError::BehindCamera(z));
        }
        Ok([
            self.focal_length * x / z + self.principal_point[0],
            self.focal_length * y / z + self.principal_point[1],
        ])
    }

    /// Lift a pixel at a given metric depth back to camera space.
    pub fn unproject(&self, pixel: [f64; 2], depth: f64) -> Result<[f64; 3], CameraError> {
        if depth <= 0.0 {
            return Err(CameraError::InvalidDepth(depth));
        }
        let x = (pixel[0] - self.principal_point[0]) * depth / self.focal_length;
        let y = (pixel[1] - self.principal_point[1]) * depth / self.focal_length;
        Ok([x, y, depth])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn size(w: u32, h: u32) -> ImageSize {
        ImageSize::new(w, h).unwrap()
    }

    #[test]
    fn fov_to_focal_known_values() {
        // tan(v/2) = 0.5 forces f = H
        let v = 2.0 * 0.5f64.atan();
        assert!((fov_to_focal(v, size(1000, 1000)).unwrap() - 1000.0).abs() < 1e-9);
        // tan(pi/4) = 1
        let f = fov_to_focal(std::f64::consts::FRAC_PI_2, size(512, 512)).unwrap();
        assert!((f - 256.0).abs() < 1e-9);
        // 720 / (2 tan 0.5), frozen from a 50-digit evaluation
        let f = fov_to_focal(1.0, size(1280, 720)).unwrap();
        assert!((f - 658.9755798164827).abs() < 1e-9);
    }

    #[test]
    fn fov_domain_errors() {
        assert!(fov_to_focal(0.0, size(100, 100)).is_err());
        assert!(fov_to_focal(std::f64::consts::PI, size(100, 100)).is_err());
        assert!(fov_to_focal(-0.5, size(100, 100)).is_err());
        assert!(fov_to_focal(f64::NAN, size(100, 100)).is_err());
        assert!(focal_to_fov(0.0, size(100, 100)).is_err());
        assert!(focal_to_fov(-10.0, size(100, 100)).is_err());
    }

    #[test]
    fn fov_to_focal_monotone_decreasing() {
        let s = size(640, 480);
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let v = std::f64::consts::PI * f64::from(i) / 100.0;
            let f = fov_to_focal(v, s).unwrap();
            assert!(f < prev, "not decreasing at v={v}");
            prev = f;
        }
    }

    #[test]
    fn image_size_rejects_zero() {
        assert!(ImageSize::new(0, 10).is_err());
        assert!(ImageSize::new(10, 0).is_err());
    }

    #[test]
    fn default_builders_center_the_principal_point() {
        let s = size(1920, 1080);
        assert_eq!(
            CameraIntrinsics::from_fov(1.0, s).unwrap().principal_point,
            [960.0, 540.0]
        );
        assert_eq!(
            CameraIntrinsics::from_focal(800.0, s)
                .unwrap()
                .principal_point,
            [960.0, 540.0]
        );
        let moved = CameraIntrinsics::from_fov(1.0, s)
            .unwrap()
            .with_principal_point(10.0, 20.0);
        assert_eq!(moved.principal_point, [10.0, 20.0]);
    }

    #[test]
    fn project_known_values() {
        let cam = CameraIntrinsics {
            vertical_fov: 1.0,
            focal_length: 1000.0,
            principal_point: [320.0, 240.0],
        };
        assert_eq!(cam.project([0.0, 0.0, 5.0]).unwrap(), [320.0, 240.0]);

        let cam = cam.with_principal_point(0.0, 0.0);
        let cam = CameraIntrinsics {
            focal_length: 500.0,
            ..cam
        };
        assert_eq!(cam.project([1.0, 0.0, 1.0]).unwrap(), [500.0, 0.0]);

        let cam = CameraIntrinsics {
            vertical_fov: 1.0,
            focal_length: 800.0,
            principal_point: [400.0, 300.0],
        };
        let p = cam.project([0.3, -0.2, 4.0]).unwrap();
        assert!((p[0] - 460.0).abs() < 1e-12);
        assert!((p[1] - 260.0).abs() < 1e-12);
    }

    #[test]
    fn project_rejects_nonpositive_z() {
        let cam = CameraIntrinsics::from_fov(1.0, size(640, 480)).unwrap();
        assert_eq!(
            cam.project([0.0, 0.0, 0.0]),
            Err(CameraError::BehindCamera(0.0))
        );
        assert!(cam.project([1.0, 1.0, -2.0]).is_err());
    }

    #[test]
    fn unproject_known_values() {
        let cam = CameraIntrinsics::from_fov(1.0, size(640, 480)).unwrap();
        let p = cam.unproject(cam.principal_point, 3.0).unwrap();
        assert_eq!(p, [0.0, 0.0, 3.0]);

        let cam = CameraIntrinsics {
            vertical_fov: 1.0,
            focal_length: 500.0,
            principal_point: [0.0, 0.0],
        };
        let p = cam.unproject([500.0, 0.0], 1.0).unwrap();
        assert_eq!(p, [1.0, 0.0, 1.0]);

        assert!(cam.unproject([10.0, 10.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_project_unproject(
            x in -50.0f64..50.0,
            y in -50.0f64..50.0,
            z in 0.1f64..100.0,
            fov in 0.2f64..3.0,
        ) {
            let cam = CameraIntrinsics::from_fov(fov, size(1920, 1080)).unwrap();
            let px = cam.project([x, y, z]).unwrap();
            let back = cam.unproject(px, z).unwrap();
            let scale = x.abs().max(y.abs()).max(z.abs()).max(1.0);
            prop_assert!((back[0] - x).abs() <= 1e-9 * scale);
            prop_assert!((back[1] - y).abs() <= 1e-9 * scale);
            prop_assert!((back[2] - z).abs() <= 1e-9 * scale);
        }

        #[test]
        fn projection_scale_covariance(
            x in -20.0f64..20.0,
            y in -20.0f64..20.0,
            z in 0.1f64..50.0,
            lambda in 0.01f64..100.0,
        ) {
            let cam = CameraIntrinsics::from_fov(1.2, size(800, 600)).unwrap();
            let a = cam.project([x, y, z]).unwrap();
            let b = cam.project([lambda * x, lambda * y, lambda * z]).unwrap();
            prop_assert!((a[0] - b[0]).abs() < 1e-6);
            prop_assert!((a[1] - b[1]).abs() < 1e-6);
        }

        #[test]
        fn focal_fov_inverse_composition(fov in 0.05f64..3.1, h in 16u32..4096) {
            let s = size(h.max(16), h);
            let f = fov_to_focal(fov, s).unwrap();
            let v = focal_to_fov(f, s).unwrap();
            prop_assert!((v - fov).abs() <= 1e-9 * fov);
        }
    }
}
