//! Classification maps as binary PPM images.

use std::path::Path;

use crate::data::LabelMap;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::train::{predict_pixels, PatchSource};

/// RGB for HSV with `s = v = 1`, hue in degrees.
pub fn hsv_to_rgb(hue: f64) -> [u8; 3] {
    let h = hue.rem_euclid(360.0) / 60.0;
    let sector = h.floor() as u32;
    let f = h - h.floor();
    let (p, q, t) = (0.0, 1.0 - f, f);
    let (r, g, b) = match sector {
        0 => (1.0, t, p),
        1 => (q, 1.0, p),
        2 => (p, 1.0, t),
        3 => (p, q, 1.0),
        4 => (t, p, 1.0),
        _ => (1.0, p, q),
    };
    let byte = |v: f64| (v * 255.0).round() as u8;
    [byte(r), byte(g), byte(b)]
}

/// Colour of class `c` (1-based) out of `k`; class 0 is black.
pub fn class_color(c: u16, k: usize) -> [u8; 3] {
    if c == 0 {
        return [0, 0, 0];
    }
    hsv_to_rgb(360.0 * (c as f64 - 1.0) / k as f64)
}

/// Encode an `H×W` raster of class ids as a P6 PPM.
pub fn encode_ppm(ids: &[u16], height: usize, width: usize, classes: usize) -> Result<Vec<u8>> {
    if ids.len() != height * width {
        return Err(Error::dim(format!("{} ids for a {height}×{width} map", ids.len())));
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(3 * ids.len());
    for &c in ids {
        out.extend_from_slice(&class_color(c, classes));
    }
    Ok(out)
}

pub fn write_ppm(path: impl AsRef<Path>, ids: &[u16], height: usize, width: usize, classes: usize) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_ppm(ids, height, width, classes)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Predicted class for every labeled pixel; unlabeled pixels stay 0.
pub fn classification_map(params: &ModelParams<f32>, cfg: &ModelConfig, source: &PatchSource) -> Result<LabelMap> {
    let labels = source.labels;
    let labeled: Vec<usize> = (0..labels.ids.len()).filter(|&i| labels.ids[i] != 0).collect();
    let pred = predict_pixels(params, cfg, source, &labeled, false)?;
    let mut ids = vec![0u16; labels.ids.len()];
    for (&i, &p) in labeled.iter().zip(&pred) {
        ids[i] = p;
    }
    Ok(LabelMap {
        height: labels.height,
        width: labels.width,
        classes: labels.classes,
        ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_classes_are_primaries() {
        assert_eq!(class_color(1, 3), [255, 0, 0]);
        assert_eq!(class_color(2, 3), [0, 255, 0]);
        assert_eq!(class_color(3, 3), [0, 0, 255]);
        assert_eq!(class_color(0, 3), [0, 0, 0]);
    }

    #[test]
    fn sexant_midpoints() {
        assert_eq!(hsv_to_rgb(60.0), [255, 255, 0]);
        assert_eq!(hsv_to_rgb(180.0), [0, 255, 255]);
        assert_eq!(hsv_to_rgb(300.0), [255, 0, 255]);
        assert_eq!(hsv_to_rgb(30.0), [255, 128, 0]);
    }

    #[test]
    fn ppm_layout() {
        let ids = [0, 0, 1, 2, 3, 0];
        let bytes = encode_ppm(&ids, 2, 3, 3).unwrap();
        let header = b"P6\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let px = &bytes[header.len()..];
        assert_eq!(px.len(), 18);
        assert_eq!(&px[..6], &[0; 6]);
        assert_eq!(&px[6..9], &[255, 0, 0]);
        assert!(encode_ppm(&ids, 2, 2, 3).is_err());
    }
}
