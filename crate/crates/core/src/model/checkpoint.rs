use std::path::Path;

use super::config::ModelConfig;
use super::params::{param_shapes, ModelParams};
use crate::error::{Error, Result};
use crate::format::{self, MODEL_MAGIC};
use crate::tensor::Tensor;

/// Encode a checkpoint: config JSON header, then every parameter as `f32`
/// in the order of [`ModelParams::tensors`].
pub fn encode_checkpoint(cfg: &ModelConfig, params: &ModelParams<f32>) -> Result<Vec<u8>> {
    Ok(format::encode(MODEL_MAGIC, cfg, &payload(cfg, params)?))
}

fn payload(cfg: &ModelConfig, params: &ModelParams<f32>) -> Result<Vec<u8>> {
    let shapes: Vec<Vec<usize>> = params.tensors().iter().map(|t| t.shape().to_vec()).collect();
    if shapes != param_shapes(cfg) {
        return Err(Error::Compatibility("parameters do not match the model config".into()));
    }
    let mut out = Vec::with_capacity(4 * params.num_scalars());
    for t in params.tensors() {
        out.extend_from_slice(&format::f32_bytes(t.data()));
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelConfig, ModelParams<f32>)> {
    let (cfg, payload): (ModelConfig, _) = format::decode(MODEL_MAGIC, bytes)?;
    cfg.validate()?;
    let shapes = param_shapes(&cfg);
    let total: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    format::check_len(payload, 4 * total)?;
    let values = format::read_f32(payload);
    let mut off = 0;
    let mut tensors = Vec::with_capacity(shapes.len());
    for s in &shapes {
        let n: usize = s.iter().product();
        tensors.push(Tensor::new(s, values[off..off + n].to_vec())?);
        off += n;
    }
    let params = ModelParams::from_tensors(&cfg, tensors)?;
    if !params.all_finite() {
        return Err(Error::Parse("checkpoint holds non-finite parameters".into()));
    }
    Ok((cfg, params))
}

pub fn save_checkpoint(cfg: &ModelConfig, params: &ModelParams<f32>, path: impl AsRef<Path>) -> Result<()> {
    format::write_file(path.as_ref(), MODEL_MAGIC, cfg, &payload(cfg, params)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelConfig, ModelParams<f32>)> {
    decode_checkpoint(&format::read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_bit_exact() {
        let cfg = ModelConfig::default();
        let p = ModelParams::init(&cfg, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.hsz");
        save_checkpoint(&cfg, &p, &path).unwrap();
        let (c2, p2) = load_checkpoint(&path).unwrap();
        assert_eq!(c2, cfg);
        assert_eq!(p2, p);
    }

    #[test]
    fn truncated_payload_is_length_error() {
        let cfg = ModelConfig {
            use_sed: false,
            ..Default::default()
        };
        let p = ModelParams::init(&cfg, 4).unwrap();
        let bytes = encode_checkpoint(&cfg, &p).unwrap();
        let err = decode_checkpoint(&bytes[..bytes.len() - 4]).unwrap_err();
        assert!(matches!(err, Error::Length { .. }), "{err}");
    }

    #[test]
    fn mismatched_params_rejected() {
        let cfg = ModelConfig::default();
        let p = ModelParams::init(&ModelConfig { use_sed: false, ..cfg.clone() }, 4).unwrap();
        assert!(matches!(encode_checkpoint(&cfg, &p), Err(Error::Compatibility(_))));
    }
}
