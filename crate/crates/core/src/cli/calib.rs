//! Pinhole intrinsics and pixel/normalized coordinate conversion.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PoseError, Result};
use crate::geom::Correspondence;

/// Pinhole intrinsics without skew.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Calibration {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx == 0.0 || self.fy == 0.0 {
            return Err(PoseError::InvalidInput(
                "calibration needs finite values and non-zero focal lengths".into(),
            ));
        }
        Ok(())
    }

    pub fn normalize(&self, px: f64, py: f64) -> (f64, f64) {
        ((px - self.cx) / self.fx, (py - self.cy) / self.fy)
    }

    pub fn denormalize(&self, qx: f64, qy: f64) -> (f64, f64) {
        (qx * self.fx + self.cx, qy * self.fy + self.cy)
    }
}

/// A correspondence in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPair {
    pub p1x: f64,
    pub p1y: f64,
    pub p2x: f64,
    pub p2y: f64,
}

impl PixelPair {
    pub fn new(p1x: f64, p1y: f64, p2x: f64, p2y: f64) -> Self {
        Self { p1x, p1y, p2x, p2y }
    }

    pub fn normalize(&self, cam1: &Calibration, cam2: &Calibration) -> Correspondence {
        let (q1x, q1y) = cam1.normalize(self.p1x, self.p1y);
        let (q2x, q2y) = cam2.normalize(self.p2x, self.p2y);
        Correspondence::new(q1x, q1y, q2x, q2y)
    }

    pub fn from_normalized(c: &Correspondence, cam1: &Calibration, cam2: &Calibration) -> Self {
        let (p1x, p1y) = cam1.denormalize(c.q1x, c.q1y);
        let (p2x, p2y) = cam2.denormalize(c.q2x, c.q2y);
        Self { p1x, p1y, p2x, p2y }
    }
}

/// Intrinsics for both cameras of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StereoCalibration {
    pub cam1: Calibration,
    pub cam2: Calibration,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CalibFile {
    Pair {
        cam1: Calibration,
        cam2: Calibration,
    },
    Shared(Calibration),
}

impl StereoCalibration {
    pub fn shared(c: Calibration) -> Self {
        Self { cam1: c, cam2: c }
    }

    /// Accepts `{"cam1": {...}, "cam2": {...}}` or a single shared
    /// `{"fx", "fy", "cx", "cy"}` object.
    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: CalibFile = serde_json::from_str(text)
            .map_err(|e| PoseError::InvalidInput(format!("calibration: {e}")))?;
        let out = match parsed {
            CalibFile::Pair { cam1, cam2 } => Self { cam1, cam2 },
            CalibFile::Shared(c) => Self::shared(c),
        };
        out.cam1.validate()?;
        out.cam2.validate()?;
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PoseError::InvalidInput(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn normalize(&self, p: &PixelPair) -> Correspondence {
        p.normalize(&self.cam1, &self.cam2)
    }
}
