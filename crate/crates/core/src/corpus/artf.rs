//! The `ARTF` binary container for frame stacks and feature matrices.
//!
//! Layout (little-endian): 4-byte magic `ARTF`, u8 dtype (0 = u8, 1 = f32),
//! u16 height, u16 width, u32 frame count, 3 reserved zero bytes, then
//! row-major frames. The header is 16 bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ARTF_HEADER_LEN: usize = 16;
const MAGIC: &[u8; 4] = b"ARTF";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    U8,
    F32,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::U8 => 0,
            Dtype::F32 => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::U8),
            1 => Some(Dtype::F32),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::F32 => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArtfHeader {
    pub dtype: Dtype,
    pub height: u16,
    pub width: u16,
    pub n_frames: u32,
}

impl ArtfHeader {
    fn payload_len(&self) -> usize {
        self.height as usize * self.width as usize * self.n_frames as usize * self.dtype.size()
    }

    fn encode(&self) -> [u8; ARTF_HEADER_LEN] {
        let mut buf = [0u8; ARTF_HEADER_LEN];
        buf[..4].copy_from_slice(MAGIC);
        buf[4] = self.dtype.code();
        buf[5..7].copy_from_slice(&self.height.to_le_bytes());
        buf[7..9].copy_from_slice(&self.width.to_le_bytes());
        buf[9..13].copy_from_slice(&self.n_frames.to_le_bytes());
        buf
    }

    fn decode(buf: &[u8; ARTF_HEADER_LEN], path: &Path) -> Result<Self> {
        let ctx = || path.display().to_string();
        if &buf[..4] != MAGIC {
            return Err(Error::parse(ctx(), "missing ARTF magic"));
        }
        let dtype = Dtype::from_code(buf[4])
            .ok_or_else(|| Error::parse(ctx(), format!("unknown dtype code {}", buf[4])))?;
        Ok(Self {
            dtype,
            height: u16::from_le_bytes([buf[5], buf[6]]),
            width: u16::from_le_bytes([buf[7], buf[8]]),
            n_frames: u32::from_le_bytes([buf[9], buf[10], buf[11], buf[12]]),
        })
    }
}

pub fn read_artf_header(path: &Path) -> Result<ArtfHeader> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = [0u8; ARTF_HEADER_LEN];
    f.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    ArtfHeader::decode(&buf, path)
}

/// Reads a whole container; u8 payloads are widened to f32 without scaling.
pub fn read_artf(path: &Path) -> Result<(ArtfHeader, Vec<f32>)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    let mut buf = [0u8; ARTF_HEADER_LEN];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    let header = ArtfHeader::decode(&buf, path)?;
    let mut payload = Vec::with_capacity(header.payload_len());
    r.read_to_end(&mut payload).map_err(|e| Error::io(path, e))?;
    if payload.len() != header.payload_len() {
        return Err(Error::parse(
            path.display().to_string(),
            format!(
                "payload is {} bytes, header implies {}",
                payload.len(),
                header.payload_len()
            ),
        ));
    }
    let data = match header.dtype {
        Dtype::U8 => payload.iter().map(|&b| f32::from(b)).collect(),
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    };
    Ok((header, data))
}

/// Writes `data` (frames of `height`×`width`) in the given storage type.
///
/// u8 storage requires integral values in 0..=255.
pub fn write_artf(path: &Path, dtype: Dtype, height: usize, width: usize, data: &[f32]) -> Result<()> {
    let frame = height * width;
    if frame == 0 || !data.len().is_multiple_of(frame) {
        return Err(Error::Shape(format!(
            "{} values do not form whole {height}x{width} frames",
            data.len()
        )));
    }
    let header = ArtfHeader {
        dtype,
        height: u16::try_from(height).map_err(|_| Error::Shape(format!("height {height} exceeds u16")))?,
        width: u16::try_from(width).map_err(|_| Error::Shape(format!("width {width} exceeds u16")))?,
        n_frames: u32::try_from(data.len() / frame)
            .map_err(|_| Error::Shape("frame count exceeds u32".into()))?,
    };
    let mut bytes = Vec::with_capacity(ARTF_HEADER_LEN + header.payload_len());
    bytes.extend_from_slice(&header.encode());
    match dtype {
        Dtype::U8 => {
            for &v in data {
                if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
                    return Err(Error::invalid(format!("value {v} is not representable as u8")));
                }
                bytes.push(v as u8);
            }
        }
        Dtype::F32 => {
            for &v in data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_sixteen_bytes_little_endian() {
        let h = ArtfHeader {
            dtype: Dtype::F32,
            height: 0x0102,
            width: 0x0304,
            n_frames: 0x0506_0708,
        };
        let b = h.encode();
        assert_eq!(b.len(), 16);
        assert_eq!(&b[..4], b"ARTF");
        assert_eq!(b[4], 1);
        assert_eq!(&b[5..7], &[0x02, 0x01]);
        assert_eq!(&b[7..9], &[0x04, 0x03]);
        assert_eq!(&b[9..13], &[0x08, 0x07, 0x06, 0x05]);
        assert_eq!(&b[13..], &[0, 0, 0]);
    }

    #[test]
    fn round_trip_both_dtypes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.artf");
        let data: Vec<f32> = (0..24).map(|i| i as f32).collect();
        write_artf(&p, Dtype::U8, 2, 3, &data).unwrap();
        let (h, back) = read_artf(&p).unwrap();
        assert_eq!(h.n_frames, 4);
        assert_eq!(back, data);
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 16 + 24);

        let fdata: Vec<f32> = (0..6).map(|i| i as f32 * 0.37 - 1.0).collect();
        write_artf(&p, Dtype::F32, 1, 6, &fdata).unwrap();
        let (_, back) = read_artf(&p).unwrap();
        assert_eq!(back, fdata);
    }

    #[test]
    fn rejects_truncated_payload_and_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.artf");
        write_artf(&p, Dtype::U8, 2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_artf(&p), Err(Error::Parse { .. })));
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert!(read_artf_header(&p).is_err());
    }

    #[test]
    fn u8_storage_rejects_fractional_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.artf");
        assert!(write_artf(&p, Dtype::U8, 1, 1, &[0.5]).is_err());
    }
}
