//! HSZ framing shared by every file the toolkit writes.
//!
//! Layout: an 8-byte magic, a little-endian `u32` header length `N`, `N`
//! bytes of UTF-8 JSON, then a raw little-endian payload.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const CUBE_MAGIC: &[u8; 8] = b"HSZCUBE\0";
pub const LABEL_MAGIC: &[u8; 8] = b"HSZLBL\0\0";
pub const PCA_MAGIC: &[u8; 8] = b"HSZPCA\0\0";
pub const MODEL_MAGIC: &[u8; 8] = b"HSZMDL\0\0";

pub fn encode<H: Serialize>(magic: &[u8; 8], header: &H, payload: &[u8]) -> Vec<u8> {
    let json = serde_json::to_vec(header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(payload);
    out
}

/// Split a framed buffer into its parsed header and payload bytes.
pub fn decode<'a, H: DeserializeOwned>(magic: &[u8; 8], bytes: &'a [u8]) -> Result<(H, &'a [u8])> {
    if bytes.len() < 12 {
        return Err(Error::Parse(format!("file is {} bytes, too short for a header", bytes.len())));
    }
    if &bytes[..8] != magic {
        return Err(Error::Parse(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..8]),
            String::from_utf8_lossy(magic)
        )));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let json = bytes
        .get(12..12 + n)
        .ok_or_else(|| Error::Parse(format!("header length {n} runs past end of file")))?;
    let header = serde_json::from_slice(json).map_err(|e| Error::Parse(format!("header json: {e}")))?;
    Ok((header, &bytes[12 + n..]))
}

pub fn write_file<H: Serialize>(path: &Path, magic: &[u8; 8], header: &H, payload: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode(magic, header, payload)).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn check_len(payload: &[u8], expected: usize) -> Result<()> {
    if payload.len() != expected {
        return Err(Error::Length {
            expected,
            found: payload.len(),
        });
    }
    Ok(())
}

pub fn f32_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn f64_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn read_f32(payload: &[u8]) -> Vec<f32> {
    payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

pub fn read_f64(payload: &[u8]) -> Vec<f64> {
    payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_layout() {
        let bytes = encode(CUBE_MAGIC, &serde_json::json!({"a": 1}), &[9, 8]);
        assert_eq!(&bytes[..8], b"HSZCUBE\0");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 7);
        assert_eq!(&bytes[12..19], br#"{"a":1}"#);
        assert_eq!(&bytes[19..], &[9, 8]);
    }

    #[test]
    fn wrong_magic_is_parse_error() {
        let bytes = encode(LABEL_MAGIC, &serde_json::json!({}), &[]);
        let err = decode::<serde_json::Value>(CUBE_MAGIC, &bytes).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn header_overrun_is_parse_error() {
        let mut bytes = encode(CUBE_MAGIC, &serde_json::json!({}), &[]);
        bytes[8] = 200;
        assert!(matches!(
            decode::<serde_json::Value>(CUBE_MAGIC, &bytes),
            Err(Error::Parse(_))
        ));
    }
}
