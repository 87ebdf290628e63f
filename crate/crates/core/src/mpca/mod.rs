//! Multiview PCA: interleaved band views, one PCA per view, and view-major
//! concatenation of the reduced views.

mod io;
mod pca;
mod views;

use rayon::prelude::*;

pub use io::{load_pca_models, save_pca_models, PcaFile};
pub use pca::{fit_pca, transform_view, PcaModel};
pub use views::{build_views, View, ViewSpec};

use crate::data::HsiCube;
use crate::error::{Error, Result};

/// `H×W×(g·d)` reduced cube. Channel `n·d + k` is component `k` of view `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiviewRepresentation {
    pub cube: HsiCube,
    pub views: usize,
    pub components: usize,
}

/// Reduce a normalized cube to `g·d` channels: build `g` interleaved views,
/// fit a `d`-component PCA on every pixel of each view, project, and
/// concatenate the projections view by view.
pub fn mpca(cube: &HsiCube, g: usize, d: usize) -> Result<(MultiviewRepresentation, Vec<PcaModel>)> {
    let (spec, views) = build_views(cube, g)?;
    if d == 0 || d > spec.groups {
        return Err(Error::config(format!(
            "{d} components requested from views of {} bands",
            spec.groups
        )));
    }
    let fitted: Vec<(PcaModel, View)> = views
        .par_iter()
        .map(|v| {
            let model = fit_pca(v, d)?;
            let reduced = transform_view(v, &model)?;
            Ok((model, reduced))
        })
        .collect::<Result<_>>()?;

    let channels = g * d;
    let mut values = vec![0.0f32; cube.pixels() * channels];
    for (n, (_, reduced)) in fitted.iter().enumerate() {
        for (px, comps) in reduced.values.chunks_exact(d).enumerate() {
            for (k, &v) in comps.iter().enumerate() {
                values[px * channels + n * d + k] = v as f32;
            }
        }
    }
    let out = HsiCube::new(cube.height, cube.width, channels, values)?.with_name(format!("{}-mpca", cube.name));
    let models = fitted.into_iter().map(|(m, _)| m).collect();
    Ok((
        MultiviewRepresentation {
            cube: out,
            views: g,
            components: d,
        },
        models,
    ))
}

/// Ordinary PCA to `components` channels; the single-view special case.
pub fn plain_pca(cube: &HsiCube, components: usize) -> Result<(MultiviewRepresentation, Vec<PcaModel>)> {
    mpca(cube, 1, components)
}
