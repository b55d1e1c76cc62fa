use std::time::{Duration, Instant};

use super::{AudioBlock, MultichannelAudio};
use crate::error::{Result, SeldError};

/// Replays a recording as a stream of fixed-length capture blocks.
///
/// In paced mode block `k` is released at `start + (k + 1) * T_r` of wall
/// clock, the moment a real device would have finished recording it. A
/// trailing partial block is discarded.
#[derive(Debug)]
pub struct SimulatedCapture {
    audio: MultichannelAudio,
    block_len: usize,
    block_duration: Duration,
    next_index: u64,
    paced_from: Option<Instant>,
}

impl SimulatedCapture {
    pub fn new(audio: MultichannelAudio, block_seconds: f64) -> Result<Self> {
        if !(block_seconds > 0.0) || !block_seconds.is_finite() {
            return Err(SeldError::InvalidRange(format!(
                "block duration must be positive, got {block_seconds}"
            )));
        }
        let block_len = audio.format().samples_for(block_seconds);
        if block_len == 0 {
            return Err(SeldError::InvalidRange("block shorter than one sample".into()));
        }
        Ok(Self {
            audio,
            block_len,
            block_duration: Duration::from_secs_f64(block_seconds),
            next_index: 0,
            paced_from: None,
        })
    }

    /// Switches to wall-clock pacing, starting the clock now.
    pub fn paced(mut self) -> Self {
        self.paced_from = Some(Instant::now());
        self
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn total_blocks(&self) -> u64 {
        (self.audio.num_samples() / self.block_len) as u64
    }
}

impl Iterator for SimulatedCapture {
    type Item = AudioBlock;

    fn next(&mut self) -> Option<AudioBlock> {
        if self.next_index >= self.total_blocks() {
            return None;
        }
        let k = self.next_index;
        if let Some(start) = self.paced_from {
            let due = start + self.block_duration * (k as u32 + 1);
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        let audio = self
            .audio
            .slice(k as usize * self.block_len, self.block_len)
            .expect("block within recording");
        self.next_index += 1;
        Some(AudioBlock {
            audio,
            sequence_index: k,
        })
    }
}
