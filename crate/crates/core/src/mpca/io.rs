use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PcaModel;
use crate::error::{Error, Result};
use crate::format::{self, PCA_MAGIC};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct PcaHeader {
    g: usize,
    M: usize,
    d: usize,
}

/// Fitted per-view PCA models, as persisted between preprocessing and training.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaFile {
    pub models: Vec<PcaModel>,
}

/// Payload per view, in view order: mean (`M`), projection (`M×d`, row
/// major), eigenvalues (`d`); all little-endian `f64`.
pub fn save_pca_models(models: &[PcaModel], path: impl AsRef<Path>) -> Result<()> {
    let first = models.first().ok_or_else(|| Error::Usage("no PCA models to save".into()))?;
    let header = PcaHeader {
        g: models.len(),
        M: first.bands,
        d: first.components,
    };
    let mut values = Vec::new();
    for m in models {
        if (m.bands, m.components) != (header.M, header.d) {
            return Err(Error::dim("PCA models disagree on bands/components"));
        }
        values.extend_from_slice(&m.mean);
        values.extend_from_slice(&m.projection);
        values.extend_from_slice(&m.eigenvalues);
    }
    format::write_file(path.as_ref(), PCA_MAGIC, &header, &format::f64_bytes(&values))
}

pub fn load_pca_models(path: impl AsRef<Path>) -> Result<PcaFile> {
    let bytes = format::read_file(path.as_ref())?;
    let (h, payload): (PcaHeader, _) = format::decode(PCA_MAGIC, &bytes)?;
    let per_view = h.M + h.M * h.d + h.d;
    format::check_len(payload, h.g * per_view * 8)?;
    let values = format::read_f64(payload);
    let models = values
        .chunks_exact(per_view)
        .map(|c| PcaModel {
            bands: h.M,
            components: h.d,
            mean: c[..h.M].to_vec(),
            projection: c[h.M..h.M + h.M * h.d].to_vec(),
            eigenvalues: c[h.M + h.M * h.d..].to_vec(),
        })
        .collect();
    Ok(PcaFile { models })
}
