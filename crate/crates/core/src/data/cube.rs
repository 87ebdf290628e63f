use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{self, CUBE_MAGIC, LABEL_MAGIC};

/// `H×W×B` raster stored band-interleaved-by-pixel:
/// index `(h·W + w)·B + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct HsiCube {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub values: Vec<f32>,
    pub name: String,
}

impl HsiCube {
    pub fn new(height: usize, width: usize, bands: usize, values: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::dim(format!("cube extents {height}×{width}×{bands}")));
        }
        if values.len() != height * width * bands {
            return Err(Error::dim(format!(
                "{height}×{width}×{bands} cube needs {} values, got {}",
                height * width * bands,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!("non-finite value at flat index {i}")));
        }
        Ok(Self {
            height,
            width,
            bands,
            values,
            name: String::new(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Spectrum at `(h, w)`.
    pub fn pixel(&self, h: usize, w: usize) -> &[f32] {
        let at = (h * self.width + w) * self.bands;
        &self.values[at..at + self.bands]
    }

    pub fn get(&self, h: usize, w: usize, b: usize) -> f32 {
        self.values[(h * self.width + w) * self.bands + b]
    }
}

/// Class id per pixel; 0 is unlabeled, `1..=classes` are land-cover classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub ids: Vec<u16>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, classes: usize, ids: Vec<u16>) -> Result<Self> {
        if ids.len() != height * width {
            return Err(Error::dim(format!(
                "{height}×{width} label map needs {} ids, got {}",
                height * width,
                ids.len()
            )));
        }
        let mut seen = vec![false; classes + 1];
        for &id in &ids {
            let id = id as usize;
            if id > classes {
                return Err(Error::Range(format!("class id {id} exceeds class count {classes}")));
            }
            seen[id] = true;
        }
        if let Some(missing) = (1..=classes).find(|&c| !seen[c]) {
            return Err(Error::config(format!("class {missing} has no labeled pixel")));
        }
        Ok(Self {
            height,
            width,
            classes,
            ids,
        })
    }

    pub fn get(&self, h: usize, w: usize) -> u16 {
        self.ids[h * self.width + w]
    }

    pub fn labeled_count(&self) -> usize {
        self.ids.iter().filter(|&&id| id != 0).count()
    }
}

#[derive(Serialize, Deserialize)]
struct CubeHeader {
    height: usize,
    width: usize,
    bands: usize,
    dtype: String,
    order: String,
}

#[derive(Serialize, Deserialize)]
struct LabelHeader {
    height: usize,
    width: usize,
    classes: usize,
}

fn cube_header(cube: &HsiCube) -> CubeHeader {
    CubeHeader {
        height: cube.height,
        width: cube.width,
        bands: cube.bands,
        dtype: "f32le".into(),
        order: "bip".into(),
    }
}

pub fn encode_cube(cube: &HsiCube) -> Vec<u8> {
    format::encode(CUBE_MAGIC, &cube_header(cube), &format::f32_bytes(&cube.values))
}

pub fn decode_cube(bytes: &[u8]) -> Result<HsiCube> {
    let (h, payload): (CubeHeader, _) = format::decode(CUBE_MAGIC, bytes)?;
    if h.dtype != "f32le" || h.order != "bip" {
        return Err(Error::Parse(format!(
            "unsupported dtype/order {}/{}",
            h.dtype, h.order
        )));
    }
    format::check_len(payload, h.height * h.width * h.bands * 4)?;
    HsiCube::new(h.height, h.width, h.bands, format::read_f32(payload))
}

pub fn save_cube(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    format::write_file(
        path.as_ref(),
        CUBE_MAGIC,
        &cube_header(cube),
        &format::f32_bytes(&cube.values),
    )
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<HsiCube> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(decode_cube(&format::read_file(path)?)?.with_name(name))
}

pub fn save_labels(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let header = LabelHeader {
        height: labels.height,
        width: labels.width,
        classes: labels.classes,
    };
    let payload: Vec<u8> = labels.ids.iter().flat_map(|v| v.to_le_bytes()).collect();
    format::write_file(path.as_ref(), LABEL_MAGIC, &header, &payload)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    let bytes = format::read_file(path.as_ref())?;
    let (h, payload): (LabelHeader, _) = format::decode(LABEL_MAGIC, &bytes)?;
    format::check_len(payload, h.height * h.width * 2)?;
    let ids = payload
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    LabelMap::new(h.height, h.width, h.classes, ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cube_round_trips_bit_exact() {
        let values = vec![0.0, -1.5, 3.25, f32::MIN_POSITIVE, 1e30, -0.0, 7.0, 8.5, 9.0, 10.0, 11.0, 12.0];
        let cube = HsiCube::new(2, 2, 3, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.hsz");
        save_cube(&cube, &path).unwrap();
        let back = load_cube(&path).unwrap();
        let bits = |c: &HsiCube| c.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&cube));
        assert_eq!((back.height, back.width, back.bands), (2, 2, 3));
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(
            std::str::from_utf8(&bytes[12..12 + u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize]).unwrap(),
            r#"{"height":2,"width":2,"bands":3,"dtype":"f32le","order":"bip"}"#
        );
    }

    #[test]
    fn short_payload_is_length_error() {
        let header = CubeHeader {
            height: 2,
            width: 2,
            bands: 200,
            dtype: "f32le".into(),
            order: "bip".into(),
        };
        let bytes = format::encode(CUBE_MAGIC, &header, &vec![0u8; 2 * 2 * 103 * 4]);
        match decode_cube(&bytes) {
            Err(Error::Length { expected, found }) => {
                assert_eq!(expected, 3200);
                assert_eq!(found, 1648);
            }
            other => panic!("expected length error, got {other:?}"),
        }
    }

    #[test]
    fn indian_pines_shaped_cube_loads() {
        let cube = HsiCube::new(145, 145, 200, vec![0.5; 145 * 145 * 200]).unwrap();
        let back = decode_cube(&encode_cube(&cube)).unwrap();
        assert_eq!(back.values.len(), 4_205_000);
    }

    #[test]
    fn malformed_header_is_parse_error() {
        let mut bytes = encode_cube(&HsiCube::new(1, 1, 1, vec![1.0]).unwrap());
        bytes[12] = b'[';
        assert!(matches!(decode_cube(&bytes), Err(Error::Parse(_))));
    }

    #[test]
    fn labels_round_trip_and_validate() {
        let labels = LabelMap::new(2, 3, 2, vec![0, 1, 2, 2, 1, 0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.hsz");
        save_labels(&labels, &path).unwrap();
        assert_eq!(load_labels(&path).unwrap(), labels);
        assert!(LabelMap::new(1, 2, 2, vec![1, 3]).is_err());
        assert!(LabelMap::new(1, 2, 3, vec![1, 2]).is_err());
    }
}
