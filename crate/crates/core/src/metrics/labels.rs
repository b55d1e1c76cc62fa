use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::direction::{norm, normalize, Vec3};
use crate::error::{Result, SeldError};
use crate::inference::{read_label_csv, LabelRow, SeldEvent};

/// DCASE label resolution, seconds.
pub const LABEL_FRAME_SECONDS: f64 = 0.1;

/// Directions per `(frame, class)` on a fixed frame grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFrameSet {
    frame_seconds: f64,
    entries: BTreeMap<(usize, usize), Vec<Vec3>>,
}

impl Default for LabelFrameSet {
    fn default() -> Self {
        Self::new(LABEL_FRAME_SECONDS)
    }
}

impl LabelFrameSet {
    pub fn new(frame_seconds: f64) -> Self {
        Self {
            frame_seconds,
            entries: BTreeMap::new(),
        }
    }

    pub fn frame_seconds(&self) -> f64 {
        self.frame_seconds
    }

    /// Adds a direction; it must be unit-norm within 1e-6 and is
    /// renormalized.
    pub fn insert(&mut self, frame: usize, class_id: usize, direction: Vec3) -> Result<()> {
        let n = norm(direction);
        if !((n - 1.0).abs() <= 1e-6) {
            return Err(SeldError::NonUnitDirection(n));
        }
        let dir = normalize(direction).expect("unit vector");
        self.entries.entry((frame, class_id)).or_default().push(dir);
        Ok(())
    }

    pub fn get(&self, frame: usize, class_id: usize) -> &[Vec3] {
        self.entries.get(&(frame, class_id)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `((frame, class), directions)` in frame-then-class order.
    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<Vec3>)> {
        self.entries.iter()
    }

    pub fn num_directions(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_rows(rows: &[LabelRow], frame_seconds: f64) -> Result<Self> {
        let mut set = Self::new(frame_seconds);
        for r in rows {
            set.insert(r.frame, r.class_id, r.direction())?;
        }
        Ok(set)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        Self::from_rows(&read_label_csv(reader)?, LABEL_FRAME_SECONDS)
    }

    pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }

    /// Bins events from an `event_frame_seconds` grid onto `frame_seconds`.
    ///
    /// When several source frames fall into one bin, each class keeps the
    /// events of the source frame holding the most events of that class
    /// (earliest on ties), so a source that stays active does not multiply.
    pub fn from_events(events: &[SeldEvent], event_frame_seconds: f64, frame_seconds: f64) -> Result<Self> {
        if !(event_frame_seconds > 0.0 && frame_seconds > 0.0) {
            return Err(SeldError::InvalidRange("frame durations must be > 0".into()));
        }
        let mut chosen: BTreeMap<(usize, usize), Vec<Vec3>> = BTreeMap::new();
        let mut by_frame: BTreeMap<(usize, usize), Vec<Vec3>> = BTreeMap::new();
        for e in events {
            by_frame.entry((e.frame, e.class_id)).or_default().push(e.direction);
        }
        for ((frame, class_id), dirs) in by_frame {
            // small epsilon keeps exact multiples from landing one bin early
            let bin = ((frame as f64 * event_frame_seconds) / frame_seconds + 1e-9).floor() as usize;
            match chosen.get_mut(&(bin, class_id)) {
                Some(slot) if slot.len() >= dirs.len() => {}
                Some(slot) => *slot = dirs,
                None => {
                    chosen.insert((bin, class_id), dirs);
                }
            }
        }
        let mut set = Self::new(frame_seconds);
        for ((bin, class_id), dirs) in chosen {
            for d in dirs {
                set.insert(bin, class_id, d)?;
            }
        }
        Ok(set)
    }
}
