use serde::{Deserialize, Serialize};

use crate::error::{Result, SeldError};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;
pub const DEFAULT_TETRA_D_MAX: f64 = 0.084;

/// Microphone positions in meters plus the propagation speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayGeometry {
    mic_positions: Vec<[f64; 3]>,
    speed_of_sound: f64,
}

impl ArrayGeometry {
    pub fn new(mic_positions: Vec<[f64; 3]>, speed_of_sound: f64) -> Result<Self> {
        if mic_positions.is_empty() {
            return Err(SeldError::InvalidRange("array needs at least one microphone".into()));
        }
        if !(speed_of_sound > 0.0) || !speed_of_sound.is_finite() {
            return Err(SeldError::InvalidRange(format!(
                "speed of sound must be positive, got {speed_of_sound}"
            )));
        }
        if mic_positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SeldError::InvalidRange("non-finite microphone position".into()));
        }
        Ok(Self {
            mic_positions,
            speed_of_sound,
        })
    }

    /// Regular tetrahedron centered at the origin whose edge length (the
    /// largest pairwise distance) is `d_max`.
    pub fn tetrahedral(d_max: f64) -> Result<Self> {
        if !(d_max > 0.0) {
            return Err(SeldError::InvalidRange("d_max must be positive".into()));
        }
        // vertices of (±1,±1,±1) with an even number of minus signs; edge 2√2
        let s = d_max / (2.0 * std::f64::consts::SQRT_2);
        let verts = [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ];
        Self::new(
            verts.iter().map(|v| [v[0] * s, v[1] * s, v[2] * s]).collect(),
            DEFAULT_SPEED_OF_SOUND,
        )
    }

    /// `m` microphones on the x axis, `spacing` meters apart, first at the origin.
    pub fn linear(m: usize, spacing: f64) -> Result<Self> {
        Self::new(
            (0..m).map(|i| [i as f64 * spacing, 0.0, 0.0]).collect(),
            DEFAULT_SPEED_OF_SOUND,
        )
    }

    /// `m` microphones evenly spaced on a horizontal circle.
    pub fn circular(m: usize, radius: f64) -> Result<Self> {
        let step = std::f64::consts::TAU / m.max(1) as f64;
        Self::new(
            (0..m)
                .map(|i| {
                    let a = i as f64 * step;
                    [radius * a.cos(), radius * a.sin(), 0.0]
                })
                .collect(),
            DEFAULT_SPEED_OF_SOUND,
        )
    }

    pub fn with_speed_of_sound(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(SeldError::InvalidRange(format!("speed of sound must be positive, got {c}")));
        }
        self.speed_of_sound = c;
        Ok(self)
    }

    pub fn mic_positions(&self) -> &[[f64; 3]] {
        &self.mic_positions
    }

    pub fn num_mics(&self) -> usize {
        self.mic_positions.len()
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    /// Largest Euclidean distance between any two microphones.
    pub fn d_max(&self) -> f64 {
        let mut best = 0.0_f64;
        for (i, a) in self.mic_positions.iter().enumerate() {
            for b in &self.mic_positions[i + 1..] {
                let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
                best = best.max(d);
            }
        }
        best
    }

    /// Largest physically possible inter-microphone delay, in samples.
    pub fn max_lag_samples(&self, sample_rate_hz: u32) -> f64 {
        sample_rate_hz as f64 * self.d_max() / self.speed_of_sound
    }
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self::tetrahedral(DEFAULT_TETRA_D_MAX).expect("valid default geometry")
    }
}
