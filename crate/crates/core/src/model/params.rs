use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{ModelConfig, KERNEL_2D, KERNEL_3D, TOKENS};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<S: Scalar = f32> {
    pub kernels: Tensor<S>,
    pub bias: Tensor<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams<S: Scalar = f32> {
    pub query: Tensor<S>,
    pub key: Tensor<S>,
    pub value: Tensor<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineParams<S: Scalar = f32> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
}

/// Every learnable array of the network.
///
/// `sed` holds the 3D layer and the two 2D layers, or a single 2D layer when
/// the encoder-decoder is ablated. The fixed order of [`tensors`](Self::tensors)
/// is: sed layers (kernels, bias), global token, per head (query, key,
/// value), feature head (weight, bias), classifier (weight, bias).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<S: Scalar = f32> {
    pub sed: Vec<ConvParams<S>>,
    pub global_token: Tensor<S>,
    pub heads: Vec<HeadParams<S>>,
    pub feature: AffineParams<S>,
    pub classifier: AffineParams<S>,
}

/// ChaCha stream used for weight init; splits use stream 0 and epoch
/// shuffles stream 1 of the same seed.
pub const INIT_STREAM: u64 = 2;

/// Shapes of every parameter tensor, in the fixed order.
pub(crate) fn param_shapes(cfg: &ModelConfig) -> Vec<Vec<usize>> {
    let mut shapes = Vec::new();
    if cfg.use_sed {
        shapes.push(vec![cfg.k1, KERNEL_3D[0], KERNEL_3D[1], KERNEL_3D[2]]);
        shapes.push(vec![cfg.k1]);
        shapes.push(vec![cfg.k2, KERNEL_2D, KERNEL_2D, cfg.sed_channels()]);
        shapes.push(vec![cfg.k2]);
        shapes.push(vec![cfg.k3, KERNEL_2D, KERNEL_2D, cfg.k2]);
        shapes.push(vec![cfg.k3]);
    } else {
        shapes.push(vec![cfg.k3, KERNEL_2D, KERNEL_2D, cfg.in_channels()]);
        shapes.push(vec![cfg.k3]);
    }
    shapes.push(vec![cfg.k3]);
    for _ in 0..cfg.heads {
        for _ in 0..3 {
            shapes.push(vec![cfg.k3, cfg.head_dim()]);
        }
    }
    shapes.push(vec![TOKENS * cfg.k3, cfg.feature_dim]);
    shapes.push(vec![cfg.feature_dim]);
    shapes.push(vec![cfg.feature_dim, cfg.num_classes]);
    shapes.push(vec![cfg.num_classes]);
    shapes
}

fn xavier<S: Scalar>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor<S> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| S::of(rng.random_range(-a..a))).collect()).unwrap()
}

impl<S: Scalar> ModelParams<S> {
    /// Xavier-uniform weights, zero biases, and a N(0, 0.02²) global token
    /// (all zeros when the global token is disabled). Draws from stream
    /// [`INIT_STREAM`] of the seed.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        let k2d = KERNEL_2D * KERNEL_2D;
        let conv = |rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize, fan_out: usize| ConvParams {
            bias: Tensor::zeros(&shape[..1]),
            kernels: xavier(&shape, fan_in, fan_out, rng),
        };
        let sed = if cfg.use_sed {
            let vol: usize = KERNEL_3D.iter().product();
            vec![
                conv(&mut rng, vec![cfg.k1, KERNEL_3D[0], KERNEL_3D[1], KERNEL_3D[2]], vol, cfg.k1 * vol),
                conv(
                    &mut rng,
                    vec![cfg.k2, KERNEL_2D, KERNEL_2D, cfg.sed_channels()],
                    cfg.sed_channels() * k2d,
                    cfg.k2 * k2d,
                ),
                conv(&mut rng, vec![cfg.k3, KERNEL_2D, KERNEL_2D, cfg.k2], cfg.k2 * k2d, cfg.k3 * k2d),
            ]
        } else {
            vec![conv(
                &mut rng,
                vec![cfg.k3, KERNEL_2D, KERNEL_2D, cfg.in_channels()],
                cfg.in_channels() * k2d,
                cfg.k3 * k2d,
            )]
        };
        let global_token = if cfg.use_global_token {
            let normal = Normal::new(0.0, 0.02).unwrap();
            Tensor::new(&[cfg.k3], (0..cfg.k3).map(|_| S::of(normal.sample(&mut rng))).collect())?
        } else {
            Tensor::zeros(&[cfg.k3])
        };
        let dh = cfg.head_dim();
        let heads = (0..cfg.heads)
            .map(|_| HeadParams {
                query: xavier(&[cfg.k3, dh], cfg.k3, dh, &mut rng),
                key: xavier(&[cfg.k3, dh], cfg.k3, dh, &mut rng),
                value: xavier(&[cfg.k3, dh], cfg.k3, dh, &mut rng),
            })
            .collect();
        let fin = TOKENS * cfg.k3;
        let feature = AffineParams {
            weight: xavier(&[fin, cfg.feature_dim], fin, cfg.feature_dim, &mut rng),
            bias: Tensor::zeros(&[cfg.feature_dim]),
        };
        let classifier = AffineParams {
            weight: xavier(&[cfg.feature_dim, cfg.num_classes], cfg.feature_dim, cfg.num_classes, &mut rng),
            bias: Tensor::zeros(&[cfg.num_classes]),
        };
        Ok(Self {
            sed,
            global_token,
            heads,
            feature,
            classifier,
        })
    }

    pub fn tensors(&self) -> Vec<&Tensor<S>> {
        let mut out = Vec::new();
        for l in &self.sed {
            out.push(&l.kernels);
            out.push(&l.bias);
        }
        out.push(&self.global_token);
        for h in &self.heads {
            out.extend([&h.query, &h.key, &h.value]);
        }
        out.extend([&self.feature.weight, &self.feature.bias]);
        out.extend([&self.classifier.weight, &self.classifier.bias]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out = Vec::new();
        for l in &mut self.sed {
            out.push(&mut l.kernels);
            out.push(&mut l.bias);
        }
        out.push(&mut self.global_token);
        for h in &mut self.heads {
            out.extend([&mut h.query, &mut h.key, &mut h.value]);
        }
        out.extend([&mut self.feature.weight, &mut self.feature.bias]);
        out.extend([&mut self.classifier.weight, &mut self.classifier.bias]);
        out
    }

    /// Which entries of [`tensors`](Self::tensors) are trained.
    pub fn trainable(&self, cfg: &ModelConfig) -> Vec<bool> {
        let token_at = 2 * self.sed.len();
        (0..self.tensors().len())
            .map(|i| i != token_at || cfg.use_global_token)
            .collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Rebuild from tensors in the fixed order, checking shapes against `cfg`.
    pub fn from_tensors(cfg: &ModelConfig, tensors: Vec<Tensor<S>>) -> Result<Self> {
        let shapes = param_shapes(cfg);
        if tensors.len() != shapes.len() {
            return Err(Error::dim(format!(
                "{} tensors for a model with {} parameters",
                tensors.len(),
                shapes.len()
            )));
        }
        for (t, s) in tensors.iter().zip(&shapes) {
            if t.shape() != s.as_slice() {
                return Err(Error::dim(format!("parameter shape {:?}, expected {s:?}", t.shape())));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().unwrap();
        let layers = if cfg.use_sed { 3 } else { 1 };
        let sed = (0..layers)
            .map(|_| ConvParams {
                kernels: next(),
                bias: next(),
            })
            .collect();
        let global_token = next();
        let heads = (0..cfg.heads)
            .map(|_| HeadParams {
                query: next(),
                key: next(),
                value: next(),
            })
            .collect();
        let feature = AffineParams {
            weight: next(),
            bias: next(),
        };
        let classifier = AffineParams {
            weight: next(),
            bias: next(),
        };
        Ok(Self {
            sed,
            global_token,
            heads,
            feature,
            classifier,
        })
    }

    pub fn cast<T: Scalar>(&self) -> ModelParams<T> {
        let tensors = self.tensors().into_iter().map(|t| t.cast::<T>()).collect();
        let cfg_free = |ts: Vec<Tensor<T>>| {
            let mut it = ts.into_iter();
            let mut next = || it.next().unwrap();
            ModelParams {
                sed: (0..self.sed.len())
                    .map(|_| ConvParams {
                        kernels: next(),
                        bias: next(),
                    })
                    .collect(),
                global_token: next(),
                heads: (0..self.heads.len())
                    .map(|_| HeadParams {
                        query: next(),
                        key: next(),
                        value: next(),
                    })
                    .collect(),
                feature: AffineParams {
                    weight: next(),
                    bias: next(),
                },
                classifier: AffineParams {
                    weight: next(),
                    bias: next(),
                },
            }
        };
        cfg_free(tensors)
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shapes() {
        let cfg = ModelConfig::default();
        let p = ModelParams::<f32>::init(&cfg, 1).unwrap();
        let shapes: Vec<Vec<usize>> = p.tensors().iter().map(|t| t.shape().to_vec()).collect();
        assert_eq!(shapes, param_shapes(&cfg));
        assert_eq!(p.feature.weight.shape(), &[320, 64]);
        assert_eq!(p.sed[1].kernels.shape(), &[40, 3, 3, 240]);
        assert!(p.all_finite());
    }

    #[test]
    fn global_token_off_is_zero_and_frozen() {
        let cfg = ModelConfig {
            use_global_token: false,
            ..Default::default()
        };
        let p = ModelParams::<f32>::init(&cfg, 1).unwrap();
        assert!(p.global_token.data().iter().all(|&v| v == 0.0));
        let mask = p.trainable(&cfg);
        assert_eq!(mask.iter().filter(|&&t| !t).count(), 1);
        assert!(!mask[6]);
    }

    #[test]
    fn round_trip_through_tensors() {
        let cfg = ModelConfig {
            use_sed: false,
            ..Default::default()
        };
        let p = ModelParams::<f32>::init(&cfg, 3).unwrap();
        let back = ModelParams::from_tensors(&cfg, p.tensors().into_iter().cloned().collect()).unwrap();
        assert_eq!(back, p);
        assert_eq!(p.cast::<f64>().cast::<f32>(), p);
    }

    #[test]
    fn init_is_seeded() {
        let cfg = ModelConfig::default();
        let a = ModelParams::<f32>::init(&cfg, 9).unwrap();
        assert_eq!(a, ModelParams::init(&cfg, 9).unwrap());
        assert_ne!(a, ModelParams::init(&cfg, 10).unwrap());
    }
}
