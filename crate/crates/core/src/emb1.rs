//! EMB1 binary container for embedding sequences.
//!
//! Little-endian layout:
//!
//! | offset | type | field |
//! |-------:|------|-------|
//! | 0  | `[u8; 4]` | magic `"EMB1"` |
//! | 4  | u32 | format version (1) |
//! | 8  | u32 | D, frame dimension |
//! | 12 | u32 | N, frame count |
//! | 16 | f32 | frame duration in seconds |
//! | 20 | f32 | start offset in seconds |
//! | 24 | u32 | layer index |
//! | 28 | u32 | L, byte length of the recording id |
//! | 32 | `[u8; L]` | recording id, UTF-8 |
//! | ..   | u32 + bytes | model id, same length-prefixed scheme |
//! | ..   | `[f32; N*D]` | frames, row-major |
//!
//! Prototype files use the same layout with N = 1.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sequence::EmbeddingSequence;

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u32 = 1;
/// Size of the fixed part of the header, before the two id strings.
pub const FIXED_HEADER_LEN: usize = 32;

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (seq, used) = decode(&bytes)?;
    if used != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after frame payload",
            bytes.len() - used
        )));
    }
    Ok(seq)
}

pub fn write_embeddings(seq: &EmbeddingSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(seq)).map_err(|e| Error::io(path, e))
}

/// Serialize to an in-memory EMB1 block.
pub fn encode(seq: &EmbeddingSequence) -> Vec<u8> {
    let id = seq.recording_id().as_bytes();
    let model = seq.model_id().as_bytes();
    let mut out = Vec::with_capacity(
        FIXED_HEADER_LEN + id.len() + 4 + model.len() + 4 * seq.len() * seq.dim(),
    );
    // Writes into a Vec cannot fail.
    out.write_all(MAGIC).unwrap();
    out.write_u32::<LittleEndian>(VERSION).unwrap();
    out.write_u32::<LittleEndian>(seq.dim() as u32).unwrap();
    out.write_u32::<LittleEndian>(seq.len() as u32).unwrap();
    out.write_f32::<LittleEndian>(seq.frame_duration_s() as f32)
        .unwrap();
    out.write_f32::<LittleEndian>(seq.start_offset_s() as f32)
        .unwrap();
    out.write_u32::<LittleEndian>(seq.layer()).unwrap();
    out.write_u32::<LittleEndian>(id.len() as u32).unwrap();
    out.write_all(id).unwrap();
    out.write_u32::<LittleEndian>(model.len() as u32).unwrap();
    out.write_all(model).unwrap();
    for &v in seq.frames().iter() {
        out.write_f32::<LittleEndian>(v as f32).unwrap();
    }
    out
}

/// Parse one EMB1 block from the front of `bytes`, returning the sequence
/// and the number of bytes consumed.
pub fn decode(bytes: &[u8]) -> Result<(EmbeddingSequence, usize)> {
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic)
        .map_err(|_| Error::Format("file shorter than the EMB1 magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"EMB1\"",
            String::from_utf8_lossy(&magic)
        )));
    }
    let header_err = |_| Error::Format("truncated EMB1 header".into());
    let version = cur.read_u32::<LittleEndian>().map_err(header_err)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported EMB1 version {version}")));
    }
    let d = cur.read_u32::<LittleEndian>().map_err(header_err)? as usize;
    let n = cur.read_u32::<LittleEndian>().map_err(header_err)? as usize;
    let frame_duration_s = cur.read_f32::<LittleEndian>().map_err(header_err)?;
    let start_offset_s = cur.read_f32::<LittleEndian>().map_err(header_err)?;
    let layer = cur.read_u32::<LittleEndian>().map_err(header_err)?;
    let recording_id = read_string(&mut cur, "recording id")?;
    let model_id = read_string(&mut cur, "model id")?;

    let offset = cur.position() as usize;
    let expected = n
        .checked_mul(d)
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| Error::Format(format!("N*D overflows ({n} x {d})")))?;
    let available = bytes.len() - offset;
    if expected > available {
        return Err(Error::TruncatedFile {
            expected,
            found: available,
        });
    }
    let payload = &bytes[offset..offset + expected];
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let frames = Array2::from_shape_vec((n, d), values).expect("payload length checked");
    let seq = EmbeddingSequence::new(
        recording_id,
        model_id,
        layer,
        frame_duration_s as f64,
        start_offset_s as f64,
        frames,
    )?;
    Ok((seq, offset + expected))
}

fn read_string(cur: &mut Cursor<&[u8]>, what: &str) -> Result<String> {
    let len = cur
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Format(format!("truncated {what} length")))? as usize;
    let start = cur.position() as usize;
    let bytes = cur.get_ref();
    if bytes.len() < start + len {
        return Err(Error::Format(format!("truncated {what}")));
    }
    let s = std::str::from_utf8(&bytes[start..start + len])
        .map_err(|_| Error::Format(format!("{what} is not valid UTF-8")))?
        .to_owned();
    cur.set_position((start + len) as u64);
    Ok(s)
}
