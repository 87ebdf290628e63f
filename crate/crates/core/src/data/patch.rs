use super::HsiCube;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// `P×P×C` window centred on a source pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub size: usize,
    pub channels: usize,
    pub data: Vec<f32>,
    pub center: (usize, usize),
    pub label: u16,
}

impl Patch {
    pub fn pixel(&self, r: usize, s: usize) -> &[f32] {
        let at = (r * self.size + s) * self.channels;
        &self.data[at..at + self.channels]
    }

    pub fn to_tensor<S: Scalar>(&self) -> Tensor<S> {
        Tensor::new(
            &[self.size, self.size, self.channels],
            self.data.iter().map(|&v| S::of(v as f64)).collect(),
        )
        .unwrap()
    }
}

/// Fill `buf` with the `P×P×C` window around `(h, w)`; outside positions are zero.
pub fn extract_patch_into(source: &HsiCube, h: usize, w: usize, p: usize, buf: &mut Vec<f32>) -> Result<()> {
    if p.is_multiple_of(2) {
        return Err(Error::config(format!("patch size {p} must be odd")));
    }
    if h >= source.height || w >= source.width {
        return Err(Error::Range(format!(
            "pixel ({h}, {w}) outside {}×{} raster",
            source.height, source.width
        )));
    }
    let c = source.bands;
    let r = p / 2;
    buf.clear();
    buf.resize(p * p * c, 0.0);
    for i in 0..p {
        let Some(hh) = (h + i).checked_sub(r).filter(|&v| v < source.height) else { continue };
        for j in 0..p {
            let Some(ww) = (w + j).checked_sub(r).filter(|&v| v < source.width) else { continue };
            buf[(i * p + j) * c..(i * p + j + 1) * c].copy_from_slice(source.pixel(hh, ww));
        }
    }
    Ok(())
}

pub fn extract_patch(source: &HsiCube, h: usize, w: usize, p: usize) -> Result<Patch> {
    let mut data = Vec::new();
    extract_patch_into(source, h, w, p, &mut data)?;
    Ok(Patch {
        size: p,
        channels: source.bands,
        data,
        center: (h, w),
        label: 0,
    })
}

/// Reverse both spatial axes; spectra are untouched.
pub fn rotate180(patch: &Patch) -> Patch {
    let data = patch
        .data
        .chunks_exact(patch.channels)
        .rev()
        .flatten()
        .copied()
        .collect();
    Patch {
        data,
        ..patch.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, c: usize) -> HsiCube {
        HsiCube::new(h, w, c, (0..h * w * c).map(|v| v as f32 + 1.0).collect()).unwrap()
    }

    #[test]
    fn size_one_is_the_pixel() {
        let cube = ramp(3, 4, 2);
        let p = extract_patch(&cube, 1, 2, 1).unwrap();
        assert_eq!(p.data, cube.pixel(1, 2));
    }

    #[test]
    fn corner_pixel_zero_fills_five_positions() {
        let cube = ramp(4, 4, 3);
        let p = extract_patch(&cube, 0, 0, 3).unwrap();
        let zero = (0..3)
            .flat_map(|r| (0..3).map(move |s| (r, s)))
            .filter(|&(r, s)| p.pixel(r, s).iter().all(|&v| v == 0.0))
            .count();
        assert_eq!(zero, 5);
        assert_eq!(p.pixel(1, 1), cube.pixel(0, 0));
    }

    #[test]
    fn interior_matches_direct_slice() {
        let cube = ramp(7, 8, 4);
        let p = extract_patch(&cube, 3, 4, 5).unwrap();
        for r in 0..5 {
            for s in 0..5 {
                for b in 0..4 {
                    assert_eq!(p.pixel(r, s)[b], cube.get(3 + r - 2, 4 + s - 2, b));
                }
            }
        }
    }

    #[test]
    fn out_of_range_and_even_size_rejected() {
        let cube = ramp(3, 3, 1);
        assert!(matches!(extract_patch(&cube, 3, 0, 3), Err(Error::Range(_))));
        assert!(matches!(extract_patch(&cube, 1, 1, 4), Err(Error::Config(_))));
    }

    #[test]
    fn rotation_geometry() {
        let mut data = vec![0.0; 9 * 2];
        data[0] = 5.0;
        data[1] = 6.0;
        let p = Patch {
            size: 3,
            channels: 2,
            data,
            center: (0, 0),
            label: 1,
        };
        let r = rotate180(&p);
        assert_eq!(r.pixel(2, 2), &[5.0, 6.0]);
        assert_eq!(rotate180(&r), p);
    }

    #[test]
    fn rotation_keeps_centre_spectrum() {
        let cube = ramp(9, 9, 6);
        let p = extract_patch(&cube, 4, 4, 5).unwrap();
        assert_eq!(rotate180(&p).pixel(2, 2), p.pixel(2, 2));
    }
}
