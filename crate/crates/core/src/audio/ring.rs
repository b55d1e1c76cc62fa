use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::Duration;

use super::{AudioFormat, MultichannelAudio};
use crate::error::{Result, SeldError};

/// One capture block of `T_r` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBlock {
    pub audio: MultichannelAudio,
    pub sequence_index: u64,
}

#[derive(Debug)]
struct Slot {
    block: AudioBlock,
    read: bool,
}

/// Fixed-capacity FIFO of the `n` most recent capture blocks.
///
/// Pushing into a full buffer evicts the oldest block. Evicting a block that
/// was never part of a [`latest_window`](Self::latest_window) counts as a drop.
#[derive(Debug)]
pub struct BlockRingBuffer {
    capacity: usize,
    format: AudioFormat,
    block_len: usize,
    slots: VecDeque<Slot>,
    dropped_count: u64,
}

impl BlockRingBuffer {
    pub fn new(capacity: usize, format: AudioFormat, block_len: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(SeldError::InvalidRange("ring capacity must be >= 1".into()));
        }
        if block_len == 0 {
            return Err(SeldError::InvalidRange("block length must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            format,
            block_len,
            slots: VecDeque::with_capacity(capacity),
            dropped_count: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn dropped_count(&self) -> u64 {
        self.dropped_count
    }

    pub fn newest_index(&self) -> Option<u64> {
        self.slots.back().map(|s| s.block.sequence_index)
    }

    pub fn sequence_indices(&self) -> Vec<u64> {
        self.slots.iter().map(|s| s.block.sequence_index).collect()
    }

    pub fn push_block(&mut self, block: AudioBlock) -> Result<()> {
        if block.audio.num_samples() != self.block_len {
            return Err(SeldError::BlockLengthMismatch {
                expected: self.block_len,
                found: block.audio.num_samples(),
            });
        }
        if block.audio.format() != self.format {
            return Err(SeldError::ChannelMismatch {
                expected: self.format.num_channels,
                found: block.audio.num_channels(),
            });
        }
        if let Some(newest) = self.newest_index() {
            if block.sequence_index <= newest {
                return Err(SeldError::InvalidRange(format!(
                    "sequence index {} does not follow {}",
                    block.sequence_index, newest
                )));
            }
            // A gap would break window contiguity; flush what we hold.
            if block.sequence_index != newest + 1 {
                while let Some(slot) = self.slots.pop_front() {
                    self.count_eviction(&slot);
                }
            }
        }
        if self.slots.len() == self.capacity {
            let slot = self.slots.pop_front().expect("full buffer has a front");
            self.count_eviction(&slot);
        }
        self.slots.push_back(Slot { block, read: false });
        Ok(())
    }

    fn count_eviction(&mut self, slot: &Slot) {
        if !slot.read {
            self.dropped_count += 1;
        }
    }

    /// Concatenation of the `capacity` most recent blocks in time order.
    pub fn latest_window(&mut self) -> Result<MultichannelAudio> {
        if self.slots.len() < self.capacity {
            return Err(SeldError::InsufficientBlocks {
                needed: self.capacity,
                available: self.slots.len(),
            });
        }
        let parts: Vec<&MultichannelAudio> = self.slots.iter().map(|s| &s.block.audio).collect();
        let window = MultichannelAudio::concat(&parts)?;
        for slot in self.slots.iter_mut() {
            slot.read = true;
        }
        Ok(window)
    }
}

#[derive(Debug)]
struct SharedState {
    ring: BlockRingBuffer,
    closed: bool,
    pushed: u64,
}

/// A [`BlockRingBuffer`] shared between one capture producer and one
/// processing consumer.
#[derive(Debug, Clone)]
pub struct SharedRingBuffer {
    inner: Arc<(Mutex<SharedState>, Condvar)>,
}

impl SharedRingBuffer {
    pub fn new(ring: BlockRingBuffer) -> Self {
        Self {
            inner: Arc::new((
                Mutex::new(SharedState {
                    ring,
                    closed: false,
                    pushed: 0,
                }),
                Condvar::new(),
            )),
        }
    }

    fn lock(&self) -> MutexGuard<'_, SharedState> {
        // A panicking peer leaves the ring structurally valid.
        self.inner.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn push_block(&self, block: AudioBlock) -> Result<()> {
        let mut state = self.lock();
        state.ring.push_block(block)?;
        state.pushed += 1;
        drop(state);
        self.inner.1.notify_all();
        Ok(())
    }

    /// Marks the stream finished; wakes any waiting consumer.
    pub fn close(&self) {
        self.lock().closed = true;
        self.inner.1.notify_all();
    }

    /// Blocks until the buffer holds a full window whose newest block is newer
    /// than `after`. Returns `None` once the producer has closed and no such
    /// window exists.
    pub fn wait_for_window(&self, after: Option<u64>) -> Option<u64> {
        let mut state = self.lock();
        loop {
            let ready = state.ring.len() >= state.ring.capacity()
                && state.ring.newest_index().is_some_and(|n| after.is_none_or(|a| n > a));
            if ready {
                return state.ring.newest_index();
            }
            if state.closed {
                return None;
            }
            state = self
                .inner
                .1
                .wait_timeout(state, Duration::from_millis(50))
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    /// Latest window together with the sequence index of its newest block.
    pub fn latest_window(&self) -> Result<(u64, MultichannelAudio)> {
        let mut state = self.lock();
        let audio = state.ring.latest_window()?;
        let newest = state.ring.newest_index().expect("non-empty after window");
        Ok((newest, audio))
    }

    pub fn dropped_count(&self) -> u64 {
        self.lock().ring.dropped_count()
    }

    pub fn blocks_pushed(&self) -> u64 {
        self.lock().pushed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn block(fmt: AudioFormat, len: usize, index: u64, value: f64) -> AudioBlock {
        let channels = vec![vec![value; len]; fmt.num_channels];
        AudioBlock {
            audio: MultichannelAudio::from_channels(fmt.sample_rate_hz, channels).unwrap(),
            sequence_index: index,
        }
    }

    #[test]
    fn push_one_block() {
        let fmt = AudioFormat::default();
        let mut ring = BlockRingBuffer::new(2, fmt, 10).unwrap();
        ring.push_block(block(fmt, 10, 0, 0.0)).unwrap();
        assert_eq!(ring.len(), 1);
    }

    #[test]
    fn fifo_keeps_latest_two() {
        let fmt = AudioFormat::default();
        let mut ring = BlockRingBuffer::new(2, fmt, 10).unwrap();
        for i in 0..4 {
            ring.push_block(block(fmt, 10, i, 0.0)).unwrap();
        }
        assert_eq!(ring.sequence_indices(), vec![2, 3]);
        // blocks 0 and 1 were evicted unread
        assert_eq!(ring.dropped_count(), 2);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let fmt = AudioFormat::default();
        let mut ring = BlockRingBuffer::new(2, fmt, 10).unwrap();
        let err = ring.push_block(block(fmt, 9, 0, 0.0)).unwrap_err();
        assert!(matches!(err, SeldError::BlockLengthMismatch { expected: 10, found: 9 }));
    }

    #[test]
    fn window_needs_full_buffer() {
        let fmt = AudioFormat::default();
        let mut ring = BlockRingBuffer::new(2, fmt, 10).unwrap();
        ring.push_block(block(fmt, 10, 0, 0.0)).unwrap();
        assert!(matches!(
            ring.latest_window(),
            Err(SeldError::InsufficientBlocks { needed: 2, available: 1 })
        ));
    }

    #[test]
    fn window_of_two_one_second_blocks() {
        let fmt = AudioFormat::default();
        let len = fmt.samples_for(1.0);
        let mut ring = BlockRingBuffer::new(2, fmt, len).unwrap();
        ring.push_block(block(fmt, len, 0, 1.0)).unwrap();
        ring.push_block(block(fmt, len, 1, 2.0)).unwrap();
        let w = ring.latest_window().unwrap();
        assert_eq!(w.num_samples(), 48_000);
        for ch in w.channels() {
            assert!(ch[..24_000].iter().all(|&v| v == 1.0));
            assert!(ch[24_000..].iter().all(|&v| v == 2.0));
        }
    }

    #[test]
    fn read_blocks_are_not_counted_as_dropped() {
        let fmt = AudioFormat::default();
        let mut ring = BlockRingBuffer::new(2, fmt, 4).unwrap();
        for i in 0..6 {
            ring.push_block(block(fmt, 4, i, 0.0)).unwrap();
            if ring.len() == 2 {
                ring.latest_window().unwrap();
            }
        }
        assert_eq!(ring.dropped_count(), 0);
    }

    #[test]
    fn gap_flushes_stale_blocks() {
        let fmt = AudioFormat::default();
        let mut ring = BlockRingBuffer::new(3, fmt, 4).unwrap();
        ring.push_block(block(fmt, 4, 0, 0.0)).unwrap();
        ring.push_block(block(fmt, 4, 1, 0.0)).unwrap();
        ring.push_block(block(fmt, 4, 5, 0.0)).unwrap();
        assert_eq!(ring.sequence_indices(), vec![5]);
        assert!(ring.push_block(block(fmt, 4, 5, 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn exposed_blocks_stay_consecutive(
            capacity in 1usize..6,
            steps in proptest::collection::vec((1u64..3, any::<bool>()), 1..60),
        ) {
            let fmt = AudioFormat::new(8000, 2).unwrap();
            let mut ring = BlockRingBuffer::new(capacity, fmt, 3).unwrap();
            let mut next = 0u64;
            for (stride, read) in steps {
                next += stride;
                ring.push_block(block(fmt, 3, next, 0.0)).unwrap();
                let idx = ring.sequence_indices();
                prop_assert!(idx.len() <= capacity);
                prop_assert!(idx.windows(2).all(|w| w[1] == w[0] + 1));
                prop_assert_eq!(*idx.last().unwrap(), next);
                if read && ring.len() == capacity {
                    let w = ring.latest_window().unwrap();
                    prop_assert_eq!(w.num_samples(), 3 * capacity);
                }
            }
        }
    }

    #[test]
    fn shared_buffer_across_threads() {
        let fmt = AudioFormat::new(1000, 2).unwrap();
        let shared = SharedRingBuffer::new(BlockRingBuffer::new(2, fmt, 5).unwrap());
        let producer = {
            let shared = shared.clone();
            std::thread::spawn(move || {
                for i in 0..20 {
                    shared.push_block(block(fmt, 5, i, i as f64)).unwrap();
                }
                shared.close();
            })
        };
        let mut last = None;
        while let Some(newest) = shared.wait_for_window(last) {
            let (idx, w) = shared.latest_window().unwrap();
            assert!(idx >= newest);
            // newest block's samples equal its index
            assert_eq!(w.channel(0)[9], idx as f64);
            assert_eq!(w.channel(0)[0], (idx - 1) as f64);
            last = Some(idx);
        }
        producer.join().unwrap();
        assert_eq!(last, Some(19));
        assert_eq!(shared.blocks_pushed(), 20);
    }
}
