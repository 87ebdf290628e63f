use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments per parameter array, plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S: Scalar = f32> {
    pub m: Vec<Vec<S>>,
    pub v: Vec<Vec<S>>,
    pub t: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(lens: impl IntoIterator<Item = usize>) -> Self {
        let (m, v) = lens.into_iter().map(|n| (vec![S::zero(); n], vec![S::zero(); n])).unzip();
        Self { m, v, t: 0 }
    }
}

/// One bias-corrected Adam update. Increments `state.t` first, so the
/// first call uses `t = 1`.
pub fn adam_step<S: Scalar>(
    params: &mut [&mut [S]],
    grads: &[&[S]],
    state: &mut AdamState<S>,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::dim(format!(
            "adam: {} params, {} grads, {} moment arrays",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[i].len() {
            return Err(Error::dim(format!(
                "adam: array {i} has {} values, grad {}, moments {}",
                p.len(),
                g.len(),
                state.m[i].len()
            )));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (S::of(cfg.beta1), S::of(cfg.beta2));
    let c1 = S::of(1.0 - cfg.beta1.powi(t));
    let c2 = S::of(1.0 - cfg.beta2.powi(t));
    let (lr, eps) = (S::of(cfg.lr), S::of(cfg.eps));
    let one = S::one();
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        for j in 0..p.len() {
            let gj = g[j];
            m[j] = b1 * m[j] + (one - b1) * gj;
            v[j] = b2 * v[j] + (one - b2) * gj * gj;
            let mh = m[j] / c1;
            let vh = v[j] / c2;
            p[j] -= lr * mh / (vh.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step1(x: &mut [f64], g: &[f64], st: &mut AdamState<f64>, cfg: &AdamConfig) {
        adam_step(&mut [x], &[g], st, cfg).unwrap();
    }

    #[test]
    fn first_step_is_sign_step() {
        let cfg = AdamConfig::default();
        let mut x = vec![1.0, 1.0, 1.0];
        let mut st = AdamState::new([3]);
        step1(&mut x, &[0.5, -3.0, 0.0], &mut st, &cfg);
        assert!((x[0] - (1.0 - 1e-4)).abs() < 1e-10);
        assert!((x[1] - (1.0 + 1e-4)).abs() < 1e-10);
        assert_eq!(x[2], 1.0);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn zero_grad_never_moves() {
        let cfg = AdamConfig::default();
        let mut x = vec![0.25f64; 4];
        let mut st = AdamState::new([4]);
        for _ in 0..50 {
            step1(&mut x, &[0.0; 4], &mut st, &cfg);
        }
        assert_eq!(x, vec![0.25; 4]);
    }

    #[test]
    fn quadratic_matches_scalar_trace() {
        let cfg = AdamConfig {
            lr: 0.1,
            ..Default::default()
        };
        let mut x = vec![1.0f64];
        let mut st = AdamState::new([1]);
        let (mut xs, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=10 {
            let g = 2.0 * x[0];
            step1(&mut x, &[g], &mut st, &cfg);
            let gs = 2.0 * xs;
            m = 0.9 * m + 0.1 * gs;
            v = 0.999 * v + 0.001 * gs * gs;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            xs -= 0.1 * mh / (vh.sqrt() + 1e-8);
            assert!((x[0] - xs).abs() < 1e-15, "step {t}: {} vs {xs}", x[0]);
        }
        assert!(x[0] < 0.2);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut x = [0.0f32; 3];
        let mut st = AdamState::new([3]);
        assert!(adam_step(&mut [&mut x[..]], &[&[0.0f32; 2][..]], &mut st, &AdamConfig::default()).is_err());
    }
}
