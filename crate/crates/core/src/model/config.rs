use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyper-parameters.
///
/// Defaults: 10 views × 3 components in, 8 3D kernels of 3×3×3, 2D layers
/// of 40 and 64 kernels, 8 heads of width 8, a 64-wide feature head.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub patch_size: usize,
    pub views: usize,
    pub view_components: usize,
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
    pub heads: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub use_mpca: bool,
    pub use_sed: bool,
    pub use_global_token: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            patch_size: 5,
            views: 10,
            view_components: 3,
            k1: 8,
            k2: 40,
            k3: 64,
            heads: 8,
            feature_dim: 64,
            num_classes: 3,
            use_mpca: true,
            use_sed: true,
            use_global_token: true,
        }
    }
}

pub const KERNEL_3D: [usize; 3] = [3, 3, 3];
pub const KERNEL_2D: usize = 3;

/// Number of tokens fed to attention: the global token plus four quadrants.
pub const TOKENS: usize = 5;

impl ModelConfig {
    /// Channels of the reduced input cube.
    pub fn in_channels(&self) -> usize {
        self.views * self.view_components
    }

    /// Per-head query/key/value width.
    pub fn head_dim(&self) -> usize {
        self.k3 / self.heads
    }

    pub fn sed_channels(&self) -> usize {
        self.k1 * self.in_channels()
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size.is_multiple_of(2) {
            return Err(Error::config(format!("patch size {} must be odd", self.patch_size)));
        }
        let positive = [
            self.patch_size,
            self.views,
            self.view_components,
            self.k1,
            self.k2,
            self.k3,
            self.heads,
            self.feature_dim,
        ];
        if positive.contains(&0) {
            return Err(Error::config("model sizes must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::config(format!("{} classes; need at least 2", self.num_classes)));
        }
        if !self.k3.is_multiple_of(self.heads) {
            return Err(Error::config(format!(
                "k3 = {} is not divisible by {} heads",
                self.k3, self.heads
            )));
        }
        if self.use_sed && !(self.sed_channels() > self.k2 && self.k3 > self.k2) {
            return Err(Error::config(format!(
                "encoder-decoder widths {} → {} → {} are not U-shaped",
                self.sed_channels(),
                self.k2,
                self.k3
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!((c.in_channels(), c.sed_channels(), c.head_dim()), (30, 240, 8));
    }

    #[test]
    fn head_split_must_divide() {
        let c = ModelConfig {
            heads: 7,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn u_shape_enforced_only_with_sed() {
        let c = ModelConfig {
            k2: 80,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        ModelConfig { use_sed: false, ..c }.validate().unwrap();
    }

    #[test]
    fn even_patch_rejected() {
        assert!(ModelConfig { patch_size: 4, ..Default::default() }.validate().is_err());
    }
}
