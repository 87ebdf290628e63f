use crate::data::HsiCube;
use crate::error::{Error, Result};

/// Band bookkeeping for `g` interleaved views over `M = ⌈B/g⌉` groups.
///
/// The cube is zero-padded to `M·g` bands and split into groups of `g`
/// consecutive bands; view `n` (0-based) takes the `n`-th band of every
/// group, i.e. bands `n, n + g, n + 2g, …`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewSpec {
    pub bands: usize,
    pub views: usize,
    pub groups: usize,
    pub indices: Vec<Vec<usize>>,
}

impl ViewSpec {
    pub fn new(bands: usize, views: usize) -> Result<Self> {
        if views == 0 || views > bands {
            return Err(Error::config(format!("{views} views for {bands} bands")));
        }
        let groups = bands.div_ceil(views);
        let indices = (0..views)
            .map(|n| (0..groups).map(|m| m * views + n).collect())
            .collect();
        Ok(Self {
            bands,
            views,
            groups,
            indices,
        })
    }

    pub fn padded_bands(&self) -> usize {
        self.groups * self.views
    }
}

/// Pixels × bands matrix of one view, in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct View {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub values: Vec<f64>,
}

impl View {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.values[i * self.bands..(i + 1) * self.bands]
    }
}

pub fn build_views(cube: &HsiCube, g: usize) -> Result<(ViewSpec, Vec<View>)> {
    let spec = ViewSpec::new(cube.bands, g)?;
    let views = spec
        .indices
        .iter()
        .map(|idx| {
            let mut values = Vec::with_capacity(cube.pixels() * idx.len());
            for px in cube.values.chunks_exact(cube.bands) {
                values.extend(idx.iter().map(|&b| px.get(b).map_or(0.0, |&v| v as f64)));
            }
            View {
                height: cube.height,
                width: cube.width,
                bands: idx.len(),
                values,
            }
        })
        .collect();
    Ok((spec, views))
}
