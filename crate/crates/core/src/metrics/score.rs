use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::labels::LabelFrameSet;
use super::matching::match_frame;
use super::aggregate_e_seld;
use crate::error::{Result, SeldError};

pub const DEFAULT_SPATIAL_THRESHOLD_DEG: f64 = 20.0;

/// Per-class counts and scores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_id: usize,
    pub num_refs: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub substitutions: u64,
    pub deletions: u64,
    pub insertions: u64,
    /// Class-matched pairs regardless of angle.
    pub matched: u64,
    pub angle_sum_deg: f64,
    pub er: f64,
    pub f1: f64,
    pub le_deg: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub er: f64,
    pub f1: f64,
    pub le_deg: f64,
    pub lr: f64,
    pub e_seld: f64,
    pub spatial_threshold_deg: f64,
    pub frame_seconds: f64,
    pub per_class: Vec<ClassMetrics>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fixed-width summary for terminals.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let t = self.spatial_threshold_deg;
        let _ = writeln!(s, "{:<10} {:>9}", "metric", "value");
        let _ = writeln!(s, "{:<10} {:>9.4}", format!("ER<={t}"), self.er);
        let _ = writeln!(s, "{:<10} {:>9.4}", format!("F<={t}"), self.f1);
        let _ = writeln!(s, "{:<10} {:>9.2}", "LE_CD", self.le_deg);
        let _ = writeln!(s, "{:<10} {:>9.4}", "LR_CD", self.lr);
        let _ = writeln!(s, "{:<10} {:>9.4}", "E_SELD", self.e_seld);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:>5} {:>6} {:>6} {:>6} {:>6} {:>7} {:>7} {:>8} {:>7}",
            "class", "refs", "tp", "fp", "fn", "er", "f1", "le", "lr"
        );
        for c in &self.per_class {
            let _ = writeln!(
                s,
                "{:>5} {:>6} {:>6} {:>6} {:>6} {:>7.4} {:>7.4} {:>8.2} {:>7.4}",
                c.class_id, c.num_refs, c.tp, c.fp, c.fn_, c.er, c.f1, c.le_deg, c.lr
            );
        }
        s
    }
}

/// LE_CD of one class. A class with references but no matched pair gets
/// the maximum error of 180 degrees and stays in the macro average.
fn class_localization_error(angle_sum_deg: f64, matched: u64) -> f64 {
    if matched == 0 {
        180.0
    } else {
        angle_sum_deg / matched as f64
    }
}

/// Scores `preds` against `refs` frame by frame.
///
/// Within each frame and class, references and predictions are paired by
/// optimal assignment on the angle matrix. A pair within the threshold is a
/// true positive; a pair beyond it counts as one false positive and one
/// false negative. Unpaired references are false negatives and unpaired
/// predictions false positives. ER uses substitutions `min(FN, FP)` per
/// frame. Scores are macro-averaged over classes with at least one
/// reference; predictions for other classes are ignored.
pub fn compute_seld_metrics(refs: &LabelFrameSet, preds: &LabelFrameSet, spatial_threshold_deg: f64) -> Result<MetricsReport> {
    if (refs.frame_seconds() - preds.frame_seconds()).abs() > 1e-9 {
        return Err(SeldError::ResolutionMismatch(refs.frame_seconds(), preds.frame_seconds()));
    }
    if !(0.0..=180.0).contains(&spatial_threshold_deg) {
        return Err(SeldError::InvalidRange(format!(
            "spatial threshold must be in [0, 180], got {spatial_threshold_deg}"
        )));
    }
    let ref_classes: BTreeSet<usize> = refs.iter().map(|((_, c), _)| *c).collect();
    if ref_classes.is_empty() {
        return Err(SeldError::EmptyReference);
    }
    let mut per_class: BTreeMap<usize, ClassMetrics> = ref_classes
        .iter()
        .map(|&c| (c, ClassMetrics { class_id: c, ..Default::default() }))
        .collect();
    let keys: BTreeSet<(usize, usize)> = refs
        .iter()
        .chain(preds.iter())
        .map(|(k, _)| *k)
        .filter(|(_, c)| ref_classes.contains(c))
        .collect();
    for (frame, class_id) in keys {
        let r = refs.get(frame, class_id);
        let p = preds.get(frame, class_id);
        let m = match_frame(r, p);
        let cm = per_class.get_mut(&class_id).expect("reference class");
        let (mut tp, mut fp, mut fn_) = (0u64, m.unmatched_preds.len() as u64, m.unmatched_refs.len() as u64);
        for &(_, _, angle) in &m.pairs {
            cm.matched += 1;
            cm.angle_sum_deg += angle;
            if angle <= spatial_threshold_deg {
                tp += 1;
            } else {
                fp += 1;
                fn_ += 1;
            }
        }
        let s = fn_.min(fp);
        cm.num_refs += r.len() as u64;
        cm.tp += tp;
        cm.fp += fp;
        cm.fn_ += fn_;
        cm.substitutions += s;
        cm.deletions += fn_ - s;
        cm.insertions += fp - s;
    }
    let mut classes: Vec<ClassMetrics> = per_class.into_values().collect();
    for c in &mut classes {
        let n = c.num_refs as f64;
        c.er = (c.substitutions + c.deletions + c.insertions) as f64 / n;
        c.f1 = 2.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64;
        c.le_deg = class_localization_error(c.angle_sum_deg, c.matched);
        c.lr = c.matched as f64 / n;
    }
    let k = classes.len() as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| classes.iter().map(f).sum::<f64>() / k;
    let (er, f1, le_deg, lr) = (mean(|c| c.er), mean(|c| c.f1), mean(|c| c.le_deg), mean(|c| c.lr));
    let e_seld = aggregate_e_seld(er, f1.clamp(0.0, 1.0), le_deg.clamp(0.0, 180.0), lr.clamp(0.0, 1.0))?;
    Ok(MetricsReport {
        er,
        f1,
        le_deg,
        lr,
        e_seld,
        spatial_threshold_deg,
        frame_seconds: refs.frame_seconds(),
        per_class: classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direction::unit_from_az_el;

    fn set(rows: &[(usize, usize, f64)]) -> LabelFrameSet {
        let mut s = LabelFrameSet::default();
        for &(f, c, az) in rows {
            s.insert(f, c, unit_from_az_el(az, 0.0)).unwrap();
        }
        s
    }

    #[test]
    fn perfect_predictions() {
        let r = set(&[(0, 0, 10.0), (1, 0, 20.0), (1, 2, -90.0), (5, 2, 45.0), (5, 2, 170.0)]);
        let m = compute_seld_metrics(&r, &r, 20.0).unwrap();
        assert_eq!((m.er, m.f1, m.le_deg, m.lr, m.e_seld), (0.0, 1.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn hand_computed_two_class_scene() {
        // class 0: 4 refs; a 10 deg hit, a 30 deg miss-localized pair, a deletion, a hit
        // class 1: 2 refs; one 0 deg hit, one deletion; one insertion in frame 3
        let r = set(&[(0, 0, 0.0), (1, 0, 0.0), (2, 0, 0.0), (3, 0, 50.0), (0, 1, 90.0), (1, 1, 90.0)]);
        let p = set(&[(0, 0, 10.0), (1, 0, 30.0), (3, 0, 50.0), (0, 1, 90.0), (3, 1, 0.0), (4, 7, 0.0)]);
        let m = compute_seld_metrics(&r, &p, 20.0).unwrap();
        let c0 = &m.per_class[0];
        assert_eq!((c0.tp, c0.fp, c0.fn_, c0.matched), (2, 1, 2, 3));
        assert_eq!((c0.substitutions, c0.deletions, c0.insertions), (1, 1, 0));
        assert!((c0.er - 0.5).abs() < 1e-12);
        assert!((c0.f1 - 4.0 / 7.0).abs() < 1e-12);
        assert!((c0.le_deg - 40.0 / 3.0).abs() < 1e-9);
        assert!((c0.lr - 0.75).abs() < 1e-12);
        let c1 = &m.per_class[1];
        assert_eq!((c1.tp, c1.fp, c1.fn_), (1, 1, 1));
        assert!((c1.er - 1.0).abs() < 1e-12);
        assert!((c1.f1 - 0.5).abs() < 1e-12);
        assert_eq!(m.per_class.len(), 2, "class 7 has no references");
        assert!((m.er - 0.75).abs() < 1e-12);
        assert!((m.lr - 0.625).abs() < 1e-12);
        let expected = (m.er + (1.0 - m.f1) + m.le_deg / 180.0 + (1.0 - m.lr)) / 4.0;
        assert_eq!(m.e_seld, expected);
    }

    #[test]
    fn class_without_predictions() {
        let r = set(&[(0, 0, 0.0), (0, 4, 0.0)]);
        let p = set(&[(0, 0, 0.0)]);
        let m = compute_seld_metrics(&r, &p, 20.0).unwrap();
        let c4 = &m.per_class[1];
        assert_eq!((c4.er, c4.f1, c4.lr, c4.le_deg), (1.0, 0.0, 0.0, 180.0));
        assert!((m.le_deg - 90.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let r = set(&[(0, 0, 0.0)]);
        let coarse = LabelFrameSet::new(0.2);
        assert!(matches!(compute_seld_metrics(&r, &coarse, 20.0), Err(SeldError::ResolutionMismatch(..))));
        assert!(matches!(
            compute_seld_metrics(&LabelFrameSet::default(), &r, 20.0),
            Err(SeldError::EmptyReference)
        ));
    }

    #[test]
    fn swap_keeps_localization_error() {
        let a = set(&[(0, 0, 0.0), (1, 0, 40.0), (1, 0, -100.0), (2, 1, 10.0)]);
        let b = set(&[(0, 0, 12.0), (1, 0, 35.0), (2, 1, 50.0), (3, 1, 0.0)]);
        let ab = compute_seld_metrics(&a, &b, 20.0).unwrap();
        let ba = compute_seld_metrics(&b, &a, 20.0).unwrap();
        for (x, y) in ab.per_class.iter().zip(&ba.per_class) {
            assert_eq!((x.tp, x.fp, x.fn_), (y.tp, y.fn_, y.fp));
            assert!((x.le_deg - y.le_deg).abs() < 1e-12);
        }
    }

    #[test]
    fn report_renders() {
        let r = set(&[(0, 0, 0.0)]);
        let m = compute_seld_metrics(&r, &r, 20.0).unwrap();
        assert!(m.to_table().contains("E_SELD"));
        let back: MetricsReport = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
