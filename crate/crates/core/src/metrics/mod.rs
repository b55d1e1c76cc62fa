//! Location-dependent SELD metrics: ER and F at a spatial threshold, the
//! class-dependent localization error and recall, and their aggregate.

mod labels;
mod matching;
mod score;

pub use labels::{LabelFrameSet, LABEL_FRAME_SECONDS};
pub use matching::{match_frame, FrameMatch};
pub use score::{compute_seld_metrics, ClassMetrics, MetricsReport, DEFAULT_SPATIAL_THRESHOLD_DEG};

use crate::direction::{angle_deg, norm, Vec3};
use crate::error::{Result, SeldError};

/// Great-circle distance in degrees between two unit vectors.
pub fn angular_distance(u: Vec3, v: Vec3) -> Result<f64> {
    let (nu, nv) = (norm(u), norm(v));
    if !((nu - 1.0).abs() <= 1e-6 && (nv - 1.0).abs() <= 1e-6) {
        return Err(SeldError::NonUnitInput(nu, nv));
    }
    Ok(angle_deg(u, v))
}

/// `(er + (1 - f1) + le_deg / 180 + (1 - lr)) / 4`.
pub fn aggregate_e_seld(er: f64, f1: f64, le_deg: f64, lr: f64) -> Result<f64> {
    let check = |ok: bool, what: &str, v: f64| {
        if ok {
            Ok(())
        } else {
            Err(SeldError::RangeViolation(format!("{what} = {v}")))
        }
    };
    check(er >= 0.0 && er.is_finite(), "error rate", er)?;
    check((0.0..=1.0).contains(&f1), "F-score", f1)?;
    check((0.0..=180.0).contains(&le_deg), "localization error (deg)", le_deg)?;
    check((0.0..=1.0).contains(&lr), "localization recall", lr)?;
    Ok((er + (1.0 - f1) + le_deg / 180.0 + (1.0 - lr)) / 4.0)
}
