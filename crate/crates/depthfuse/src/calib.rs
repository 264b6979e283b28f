//! Camera calibration records: pinhole intrinsics for the depth (IR) and
//! color cameras, the extrinsic transform between them, and the lens
//! parameters that drive all depth-of-field arithmetic.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pinhole intrinsics: focal scale factors and principal point, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if self.fx <= 0.0 || self.fy <= 0.0 || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "intrinsics need positive focal scales (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        Ok(())
    }
}

/// Rigid transform from the depth camera frame to the color camera frame.
/// Rotation is row-major, translation in millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrinsics {
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    #[serde(rename = "T")]
    pub translation: [f64; 3],
}

impl Extrinsics {
    pub fn identity() -> Self {
        Self {
            rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            translation: [0.0, 0.0, 0.0],
        }
    }

    pub fn is_identity(&self) -> bool {
        self == &Self::identity()
    }

    /// Orthonormality with determinant +1, within 1e-6.
    pub fn validate(&self) -> Result<()> {
        let r = &self.rotation;
        let mut dev: f64 = 0.0;
        // R * R^T == I
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[i * 3 + k] * r[j * 3 + k]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((dot - expected).abs());
            }
        }
        let det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6])
            + r[2] * (r[3] * r[7] - r[4] * r[6]);
        dev = dev.max((det - 1.0).abs());
        if dev > 1e-6 || !dev.is_finite() {
            return Err(Error::NonOrthonormalRotation { deviation: dev });
        }
        Ok(())
    }

    pub fn transform(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[0] * p[0] + r[1] * p[1] + r[2] * p[2] + t[0],
            r[3] * p[0] + r[4] * p[1] + r[5] * p[2] + t[1],
            r[6] * p[0] + r[7] * p[1] + r[8] * p[2] + t[2],
        ]
    }

    /// Inverse transform; rotation transposed, translation `-R^T t`.
    pub fn inverse(&self) -> Self {
        let r = &self.rotation;
        let t = &self.translation;
        let rt = [r[0], r[3], r[6], r[1], r[4], r[7], r[2], r[5], r[8]];
        let tr = [
            -(rt[0] * t[0] + rt[1] * t[1] + rt[2] * t[2]),
            -(rt[3] * t[0] + rt[4] * t[1] + rt[5] * t[2]),
            -(rt[6] * t[0] + rt[7] * t[1] + rt[8] * t[2]),
        ];
        Self {
            rotation: rt,
            translation: tr,
        }
    }
}

/// Lens parameters of the color camera. `pixel_pitch_mm` is consumed only by
/// the defocus simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticsConfig {
    pub f_mm: f64,
    pub f_number: f64,
    pub coc_mm: f64,
    pub pixel_pitch_mm: f64,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            f_mm: 24.0,
            f_number: 4.0,
            coc_mm: 0.019,
            pixel_pitch_mm: 0.005,
        }
    }
}

impl OpticsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("f_mm", self.f_mm),
            ("f_number", self.f_number),
            ("coc_mm", self.coc_mm),
            ("pixel_pitch_mm", self.pixel_pitch_mm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "optics field {name} must be strictly positive (got {v})"
                )));
            }
        }
        Ok(())
    }
}

/// Operating range of the depth sensor in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorRange {
    pub min_mm: u16,
    pub max_mm: u16,
}

impl Default for SensorRange {
    fn default() -> Self {
        Self {
            min_mm: 500,
            max_mm: 5000,
        }
    }
}

impl SensorRange {
    pub fn contains(&self, depth_mm: u16) -> bool {
        depth_mm >= self.min_mm && depth_mm <= self.max_mm
    }
}

/// Full calibration bundle as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub ir_intrinsics: CameraIntrinsics,
    pub color_intrinsics: CameraIntrinsics,
    pub extrinsics: Extrinsics,
    pub optics: OpticsConfig,
    #[serde(default)]
    pub sensor_range: SensorRange,
}

impl Calibration {
    pub fn validate(&self) -> Result<()> {
        self.ir_intrinsics.validate()?;
        self.color_intrinsics.validate()?;
        self.extrinsics.validate()?;
        self.optics.validate()?;
        if self.sensor_range.min_mm == 0 || self.sensor_range.min_mm > self.sensor_range.max_mm {
            return Err(Error::InvalidParameter(format!(
                "sensor range [{}, {}] is invalid",
                self.sensor_range.min_mm, self.sensor_range.max_mm
            )));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let calib: Calibration =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        calib.validate()?;
        Ok(calib)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_extrinsics_validate() {
        Extrinsics::identity().validate().unwrap();
    }

    #[test]
    fn scaled_rotation_rejected() {
        let mut e = Extrinsics::identity();
        e.rotation[0] = 1.001;
        assert!(matches!(
            e.validate(),
            Err(Error::NonOrthonormalRotation { .. })
        ));
    }

    #[test]
    fn inverse_round_trips_points() {
        // 30 degree rotation about z plus a translation.
        let (s, c) = (30f64.to_radians().sin(), 30f64.to_radians().cos());
        let e = Extrinsics {
            rotation: [c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0],
            translation: [12.0, -3.0, 40.0],
        };
        e.validate().unwrap();
        let p = [100.0, -55.0, 2000.0];
        let q = e.inverse().transform(e.transform(p));
        for i in 0..3 {
            assert!((p[i] - q[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn calibration_json_round_trip() {
        let calib = Calibration {
            ir_intrinsics: CameraIntrinsics {
                fx: 580.0,
                fy: 580.0,
                u0: 319.5,
                v0: 239.5,
            },
            color_intrinsics: CameraIntrinsics {
                fx: 525.0,
                fy: 525.0,
                u0: 319.5,
                v0: 239.5,
            },
            extrinsics: Extrinsics {
                rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                translation: [-25.0, 0.0, 0.0],
            },
            optics: OpticsConfig::default(),
            sensor_range: SensorRange::default(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.json");
        calib.to_json_file(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // On-disk schema uses the R/T key names.
        assert!(text.contains("\"R\""));
        assert!(text.contains("\"T\""));
        assert_eq!(Calibration::from_json_file(&path).unwrap(), calib);
    }
}
