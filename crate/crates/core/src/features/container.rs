//! Flat binary container for feature tensors.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                              |
//! |--------|------|------------------------------------|
//! | 0      | 4    | magic `SFT1`                       |
//! | 4      | 4    | kind (u32: 0 MelGCC, 1 SALSA-Lite, 2 SALSA-Mel) |
//! | 8      | 4    | C (u32)                            |
//! | 12     | 4    | T (u32)                            |
//! | 16     | 4    | B (u32)                            |
//! | 20     | 4·C·T·B | values, f32, C-major then T then B |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FeatureKind, FeatureLayout, FeatureTensor};
use crate::error::{Result, SeldError};

pub const CONTAINER_MAGIC: [u8; 4] = *b"SFT1";

pub fn write_container<W: Write>(mut writer: W, tensor: &FeatureTensor) -> Result<()> {
    let (c, t, b) = tensor.shape();
    writer.write_all(&CONTAINER_MAGIC)?;
    for v in [tensor.kind().code(), dim(c)?, dim(t)?, dim(b)?] {
        writer.write_all(&v.to_le_bytes())?;
    }
    for &v in tensor.values() {
        writer.write_all(&(v as f32).to_le_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

fn dim(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| SeldError::InvalidRange(format!("dimension {v} too large")))
}

pub fn read_container<R: Read>(mut reader: R) -> Result<FeatureTensor> {
    let mut header = [0u8; 20];
    reader.read_exact(&mut header).map_err(|e| truncated(e, "header"))?;
    if header[..4] != CONTAINER_MAGIC {
        return Err(SeldError::Parse {
            line: 0,
            message: "not a feature container (bad magic)".into(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let kind = FeatureKind::from_code(word(0)).ok_or_else(|| SeldError::Parse {
        line: 0,
        message: format!("unknown feature kind code {}", word(0)),
    })?;
    let (c, t, b) = (word(1) as usize, word(2) as usize, word(3) as usize);
    let count = c
        .checked_mul(t)
        .and_then(|v| v.checked_mul(b))
        .ok_or_else(|| SeldError::InvalidRange("container dimensions overflow".into()))?;
    let mut raw = vec![0u8; count * 4];
    reader.read_exact(&mut raw).map_err(|e| truncated(e, "payload"))?;
    let values = raw
        .chunks_exact(4)
        .map(|w| f32::from_le_bytes(w.try_into().unwrap()) as f64)
        .collect();
    FeatureTensor::new(kind, c, t, b, values, FeatureLayout::infer(kind, c, b)?)
}

fn truncated(err: std::io::Error, part: &str) -> SeldError {
    if err.kind() == std::io::ErrorKind::UnexpectedEof {
        SeldError::Parse {
            line: 0,
            message: format!("feature container truncated in {part}"),
        }
    } else {
        SeldError::Io(err)
    }
}

pub fn write_tensor_file(path: impl AsRef<Path>, tensor: &FeatureTensor) -> Result<()> {
    write_container(BufWriter::new(File::create(path)?), tensor)
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<FeatureTensor> {
    read_container(BufReader::new(File::open(path)?))
}

/// Long-format CSV dump (`channel,frame,bin,value`) for debugging.
pub fn write_csv<W: Write>(writer: W, tensor: &FeatureTensor) -> Result<()> {
    let mut out = BufWriter::new(writer);
    writeln!(out, "channel,frame,bin,value")?;
    let (c, t, b) = tensor.shape();
    for ch in 0..c {
        for fr in 0..t {
            for bin in 0..b {
                writeln!(out, "{ch},{fr},{bin},{}", tensor.get(ch, fr, bin))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
