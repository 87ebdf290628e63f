use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{HsiCube, LabelMap};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub classes: usize,
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            height: 64,
            width: 64,
            bands: 40,
            classes: 3,
            noise_sigma: 0.01,
        }
    }
}

/// Gaussian bump for class `k` (1-based) peaking at band `(k − ½)·B/K`
/// with width `B/(4K)`.
pub fn class_spectrum(k: usize, bands: usize, classes: usize) -> Vec<f64> {
    let mu = (k as f64 - 0.5) * bands as f64 / classes as f64;
    let sigma = bands as f64 / (4.0 * classes as f64);
    (0..bands)
        .map(|b| (-(b as f64 - mu).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Voronoi scene: `K` seeded sites partition the raster (ties go to the
/// lower site index) and each class carries [`class_spectrum`] plus
/// Gaussian noise. Every pixel is labeled.
pub fn synth_scene(cfg: &SynthConfig) -> Result<(HsiCube, LabelMap)> {
    let (h, w, b, k) = (cfg.height, cfg.width, cfg.bands, cfg.classes);
    if k < 2 || b < k {
        return Err(Error::config(format!("need classes ≥ 2 and bands ≥ classes, got {k}, {b}")));
    }
    if k > h * w {
        return Err(Error::config(format!("{k} classes do not fit in {h}×{w} pixels")));
    }
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return Err(Error::config(format!("noise sigma {}", cfg.noise_sigma)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sites: Vec<(usize, usize)> = rand::seq::index::sample(&mut rng, h * w, k)
        .into_iter()
        .map(|i| (i / w, i % w))
        .collect();
    let spectra: Vec<Vec<f64>> = (1..=k).map(|c| class_spectrum(c, b, k)).collect();
    let noise = Normal::new(0.0, cfg.noise_sigma).unwrap();

    let mut ids = Vec::with_capacity(h * w);
    let mut values = Vec::with_capacity(h * w * b);
    for r in 0..h {
        for s in 0..w {
            let (class, _) = sites
                .iter()
                .enumerate()
                .map(|(i, &(sr, ss))| {
                    let (dr, ds) = (r as i64 - sr as i64, s as i64 - ss as i64);
                    (i, dr * dr + ds * ds)
                })
                .min_by_key(|&(i, d)| (d, i))
                .unwrap();
            ids.push(class as u16 + 1);
            for &v in &spectra[class] {
                let n = if cfg.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                values.push((v + n) as f32);
            }
        }
    }
    let cube = HsiCube::new(h, w, b, values)?.with_name(format!("synth-{}", cfg.seed));
    Ok((cube, LabelMap::new(h, w, k, ids)?))
}
