use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::direction::{angle_deg, norm, normalize, rounded_az_el, unit_from_az_el, Vec3};
use crate::error::{Result, SeldError};

pub const DEFAULT_TRACKS: usize = 3;
pub const DEFAULT_CLASSES: usize = 13;

/// `T_out x tracks x classes x 3` Cartesian activity vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAccdoaOutput {
    frames: usize,
    tracks: usize,
    classes: usize,
    frame_seconds: f64,
    values: Vec<f64>,
}

impl MultiAccdoaOutput {
    pub fn zeros(frames: usize, tracks: usize, classes: usize, frame_seconds: f64) -> Self {
        Self {
            frames,
            tracks,
            classes,
            frame_seconds,
            values: vec![0.0; frames * tracks * classes * 3],
        }
    }

    pub fn from_values(
        frames: usize,
        tracks: usize,
        classes: usize,
        frame_seconds: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != frames * tracks * classes * 3 {
            return Err(SeldError::DimensionMismatch(format!(
                "multi-ACCDOA {frames}x{tracks}x{classes}x3 needs {} values, got {}",
                frames * tracks * classes * 3,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SeldError::BackendFailure("non-finite multi-ACCDOA output".into()));
        }
        Ok(Self {
            frames,
            tracks,
            classes,
            frame_seconds,
            values,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn tracks(&self) -> usize {
        self.tracks
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn frame_seconds(&self) -> f64 {
        self.frame_seconds
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn offset(&self, frame: usize, track: usize, class: usize) -> usize {
        ((frame * self.tracks + track) * self.classes + class) * 3
    }

    pub fn vector(&self, frame: usize, track: usize, class: usize) -> Vec3 {
        let o = self.offset(frame, track, class);
        [self.values[o], self.values[o + 1], self.values[o + 2]]
    }

    pub fn set_vector(&mut self, frame: usize, track: usize, class: usize, v: Vec3) {
        let o = self.offset(frame, track, class);
        self.values[o..o + 3].copy_from_slice(&v);
    }
}

/// One detection: an active class with a direction in one output frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeldEvent {
    pub frame: usize,
    pub class_id: usize,
    pub direction: Vec3,
    pub activity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub threshold: f64,
    pub merge_angle_deg: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            merge_angle_deg: 15.0,
        }
    }
}

impl DecodeConfig {
    pub fn new(threshold: f64, merge_angle_deg: f64) -> Result<Self> {
        let cfg = Self {
            threshold,
            merge_angle_deg,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(SeldError::InvalidRange(format!("threshold must be > 0, got {}", self.threshold)));
        }
        if !(0.0..=180.0).contains(&self.merge_angle_deg) {
            return Err(SeldError::InvalidRange(format!(
                "merge angle must be in [0, 180], got {}",
                self.merge_angle_deg
            )));
        }
        Ok(())
    }
}

struct Cluster {
    sum: Vec3,
    mean: Vec3,
    activity: f64,
    count: usize,
}

/// Thresholds every track vector by its norm and merges same-class
/// detections in a frame whose directions lie within the merge angle.
///
/// Merging is greedy in track order against each cluster's running mean
/// direction; a merged event carries the normalized mean direction and the
/// mean activity of its members.
pub fn decode_multi_accdoa(output: &MultiAccdoaOutput, config: &DecodeConfig) -> Vec<SeldEvent> {
    let mut events = Vec::new();
    let mut clusters: Vec<Cluster> = Vec::with_capacity(output.tracks());
    for frame in 0..output.frames() {
        for class_id in 0..output.classes() {
            clusters.clear();
            for track in 0..output.tracks() {
                let v = output.vector(frame, track, class_id);
                let activity = norm(v);
                if !(activity > config.threshold) {
                    continue;
                }
                let dir = [v[0] / activity, v[1] / activity, v[2] / activity];
                match clusters
                    .iter_mut()
                    .find(|c| angle_deg(c.mean, dir) <= config.merge_angle_deg)
                {
                    Some(c) => {
                        c.sum = [c.sum[0] + dir[0], c.sum[1] + dir[1], c.sum[2] + dir[2]];
                        c.mean = normalize(c.sum).unwrap_or(c.mean);
                        c.activity += activity;
                        c.count += 1;
                    }
                    None => clusters.push(Cluster {
                        sum: dir,
                        mean: dir,
                        activity,
                        count: 1,
                    }),
                }
            }
            events.extend(clusters.iter().map(|c| SeldEvent {
                frame,
                class_id,
                direction: c.mean,
                activity: c.activity / c.count as f64,
            }));
        }
    }
    events
}

/// A row of a DCASE-style label/prediction file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelRow {
    pub frame: usize,
    pub class_id: usize,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl LabelRow {
    pub fn direction(&self) -> Vec3 {
        unit_from_az_el(self.azimuth_deg, self.elevation_deg)
    }
}

/// Writes `frame_index,class_index,azimuth_deg,elevation_deg` rows (no
/// header), angles rounded to integers. `frame_offset` is added to every
/// frame index.
pub fn write_events_csv<W: Write>(writer: W, events: &[SeldEvent], frame_offset: usize) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for e in events {
        let (az, el) = rounded_az_el(e.direction);
        w.write_record(&[
            (e.frame + frame_offset).to_string(),
            e.class_id.to_string(),
            az.to_string(),
            el.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(err: csv::Error) -> SeldError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => SeldError::Io(e),
        other => SeldError::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Reads label rows. Accepts `frame,class,azimuth,elevation` and the
/// five-column DCASE layout `frame,class,source,azimuth,elevation`; an
/// optional header line is skipped.
pub fn read_label_csv<R: Read>(reader: R) -> Result<Vec<LabelRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let bad = |message: String| SeldError::Parse { line, message };
        let (az_idx, el_idx) = match record.len() {
            4 => (2, 3),
            5 | 6 => (3, 4),
            n => return Err(bad(format!("expected 4 or 5 columns, found {n}"))),
        };
        let int = |idx: usize, name: &str| -> Result<usize> {
            record[idx]
                .parse::<usize>()
                .map_err(|_| bad(format!("invalid {name} '{}'", &record[idx])))
        };
        let real = |idx: usize, name: &str| -> Result<f64> {
            record[idx]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("invalid {name} '{}'", &record[idx])))
        };
        let row = LabelRow {
            frame: int(0, "frame index")?,
            class_id: int(1, "class index")?,
            azimuth_deg: real(az_idx, "azimuth")?,
            elevation_deg: real(el_idx, "elevation")?,
        };
        if !(-180.0..=180.0).contains(&row.azimuth_deg) || !(-90.0..=90.0).contains(&row.elevation_deg) {
            return Err(bad(format!(
                "angles out of range (az {}, el {})",
                row.azimuth_deg, row.elevation_deg
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_output_decodes_to_nothing() {
        let out = MultiAccdoaOutput::zeros(20, 3, 13, 0.1);
        assert!(decode_multi_accdoa(&out, &DecodeConfig::default()).is_empty());
    }

    #[test]
    fn single_vector_is_normalized() {
        let mut out = MultiAccdoaOutput::zeros(1, 3, 13, 0.1);
        out.set_vector(0, 1, 5, [0.0, 0.0, 0.9]);
        let ev = decode_multi_accdoa(&out, &DecodeConfig::default());
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].class_id, 5);
        assert_eq!(ev[0].direction, [0.0, 0.0, 1.0]);
        assert!((ev[0].activity - 0.9).abs() < 1e-12);
    }

    #[test]
    fn close_tracks_merge_to_spherical_mean() {
        let mut out = MultiAccdoaOutput::zeros(1, 3, 13, 0.1);
        let a = unit_from_az_el(10.0, 0.0);
        let b = unit_from_az_el(15.0, 0.0);
        out.set_vector(0, 0, 2, a);
        out.set_vector(0, 2, 2, b);
        let ev = decode_multi_accdoa(&out, &DecodeConfig::default());
        assert_eq!(ev.len(), 1);
        // the normalized mean of two unit vectors bisects them
        let expected = unit_from_az_el(12.5, 0.0);
        assert!(angle_deg(ev[0].direction, expected) < 1e-6);
    }

    #[test]
    fn distant_tracks_stay_separate() {
        let mut out = MultiAccdoaOutput::zeros(1, 3, 13, 0.1);
        out.set_vector(0, 0, 2, unit_from_az_el(0.0, 0.0));
        out.set_vector(0, 1, 2, unit_from_az_el(40.0, 0.0));
        out.set_vector(0, 2, 7, unit_from_az_el(1.0, 0.0));
        let ev = decode_multi_accdoa(&out, &DecodeConfig::default());
        assert_eq!(ev.len(), 3);
    }

    #[test]
    fn decode_config_validation() {
        assert!(DecodeConfig::new(0.0, 15.0).is_err());
        assert!(DecodeConfig::new(0.5, 181.0).is_err());
        assert!(DecodeConfig::new(0.5, 0.0).is_ok());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let events = vec![
            SeldEvent { frame: 3, class_id: 1, direction: unit_from_az_el(-45.0, 10.0), activity: 1.0 },
            SeldEvent { frame: 4, class_id: 12, direction: unit_from_az_el(180.0, -30.0), activity: 1.0 },
        ];
        let mut buf = Vec::new();
        write_events_csv(&mut buf, &events, 10).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "13,1,-45,10\n14,12,180,-30\n");
        let rows = read_label_csv(&buf[..]).unwrap();
        assert_eq!(rows[1], LabelRow { frame: 14, class_id: 12, azimuth_deg: 180.0, elevation_deg: -30.0 });

        let five = "0,3,0,20,5\n";
        assert_eq!(read_label_csv(five.as_bytes()).unwrap()[0].azimuth_deg, 20.0);

        let bad = "0,1,10,0\n1,x,10,0\n";
        match read_label_csv(bad.as_bytes()) {
            Err(SeldError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(read_label_csv("frame,class,az,el\n0,1,0,0\n".as_bytes()).unwrap().len() == 1);
        assert!(read_label_csv("0,1,0,95\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn higher_threshold_never_adds_events(
            values in proptest::collection::vec(-1.2f64..1.2, 4 * 3 * 4 * 3),
            lo in 0.05f64..1.0,
            delta in 0.0f64..1.0,
        ) {
            let out = MultiAccdoaOutput::from_values(4, 3, 4, 0.1, values).unwrap();
            let a = decode_multi_accdoa(&out, &DecodeConfig::new(lo, 0.0).unwrap());
            let b = decode_multi_accdoa(&out, &DecodeConfig::new(lo + delta, 0.0).unwrap());
            prop_assert!(b.len() <= a.len());
        }

        #[test]
        fn scaling_keeps_direction(
            v in proptest::array::uniform3(-1.0f64..1.0),
            s in 1.0f64..5.0,
        ) {
            let n = norm(v);
            prop_assume!(n > 0.6);
            let mut a = MultiAccdoaOutput::zeros(1, 1, 1, 0.1);
            a.set_vector(0, 0, 0, v);
            let mut b = a.clone();
            b.set_vector(0, 0, 0, [v[0] * s, v[1] * s, v[2] * s]);
            let cfg = DecodeConfig::default();
            let (ea, eb) = (decode_multi_accdoa(&a, &cfg), decode_multi_accdoa(&b, &cfg));
            prop_assert_eq!(ea.len(), 1);
            prop_assert_eq!(eb.len(), 1);
            for k in 0..3 {
                prop_assert!((ea[0].direction[k] - eb[0].direction[k]).abs() < 1e-12);
            }
        }
    }
}
