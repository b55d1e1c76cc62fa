//! Spectral primitives shared by every feature set: a center-padded STFT
//! and a triangular mel filterbank.

mod mel;
mod stft;

pub use mel::{apply_mel, hz_to_mel, mel_filterbank, mel_to_hz, MelFilterbank};
pub use stft::{hann_periodic, stft, ComplexSpectrogram, Stft, StftConfig};
