use nalgebra::{DMatrix, SymmetricEigen};

use super::View;
use crate::error::{Error, Result};

/// PCA of one view: mean, top-`d` eigenvectors of the sample covariance
/// (columns of the `M×d` row-major `projection`) and their eigenvalues.
///
/// Eigenvectors are ordered by descending eigenvalue and signed so that the
/// entry of largest magnitude is positive (first such entry on ties).
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub bands: usize,
    pub components: usize,
    pub mean: Vec<f64>,
    pub projection: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    /// Column `k` of the projection.
    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.bands)
            .map(|b| self.projection[b * self.components + k])
            .collect()
    }

    /// Project one spectrum: `Pᵀ(x − mean)`.
    pub fn project(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (b, (&xb, &mb)) in x.iter().zip(&self.mean).enumerate() {
            let centered = xb - mb;
            let row = &self.projection[b * self.components..(b + 1) * self.components];
            for (o, &p) in out.iter_mut().zip(row) {
                *o += p * centered;
            }
        }
    }
}

/// Flip `v` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Sample covariance with the `N − 1` divisor.
pub(crate) fn covariance(view: &View) -> (Vec<f64>, DMatrix<f64>) {
    let (n, m) = (view.pixels(), view.bands);
    let mut mean = vec![0.0; m];
    for i in 0..n {
        for (a, &x) in mean.iter_mut().zip(view.pixel(i)) {
            *a += x;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(m, m);
    let mut centered = vec![0.0; m];
    for i in 0..n {
        for ((c, &x), &mu) in centered.iter_mut().zip(view.pixel(i)).zip(&mean) {
            *c = x - mu;
        }
        for r in 0..m {
            for s in r..m {
                cov[(r, s)] += centered[r] * centered[s];
            }
        }
    }
    let denom = (n - 1) as f64;
    for r in 0..m {
        for s in r..m {
            let v = cov[(r, s)] / denom;
            cov[(r, s)] = v;
            cov[(s, r)] = v;
        }
    }
    (mean, cov)
}

/// Fit a `d`-component PCA on every pixel of `view`.
pub fn fit_pca(view: &View, d: usize) -> Result<PcaModel> {
    let m = view.bands;
    if d == 0 || d > m {
        return Err(Error::config(format!("{d} components from a {m}-band view")));
    }
    if view.pixels() < 2 {
        return Err(Error::Degenerate("PCA needs at least two pixels".into()));
    }
    let first = view.pixel(0);
    if (1..view.pixels()).all(|i| view.pixel(i) == first) {
        return Err(Error::Degenerate("every pixel of the view is identical".into()));
    }
    let (mean, cov) = covariance(view);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut projection = vec![0.0; m * d];
    let mut eigenvalues = Vec::with_capacity(d);
    for (k, &col) in order.iter().take(d).enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        fix_sign(&mut v);
        for (b, x) in v.into_iter().enumerate() {
            projection[b * d + k] = x;
        }
        // Rank-deficient views produce eigenvalues of order -1e-17.
        eigenvalues.push(eig.eigenvalues[col].max(0.0));
    }
    Ok(PcaModel {
        bands: m,
        components: d,
        mean,
        projection,
        eigenvalues,
    })
}

/// Project every pixel of `view`, giving an `H×W×d` view.
pub fn transform_view(view: &View, model: &PcaModel) -> Result<View> {
    if view.bands != model.bands {
        return Err(Error::dim(format!(
            "view has {} bands, model expects {}",
            view.bands, model.bands
        )));
    }
    let d = model.components;
    let mut values = vec![0.0; view.pixels() * d];
    for (i, out) in values.chunks_exact_mut(d).enumerate() {
        model.project(view.pixel(i), out);
    }
    Ok(View {
        height: view.height,
        width: view.width,
        bands: d,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn view(rows: &[Vec<f64>]) -> View {
        View {
            height: 1,
            width: rows.len(),
            bands: rows[0].len(),
            values: rows.concat(),
        }
    }

    #[test]
    fn axis_aligned_covariance() {
        // x has variance 4, y variance 1, uncorrelated.
        let rows = vec![
            vec![2.0, 0.0],
            vec![-2.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
            vec![2.0, 1.0],
            vec![-2.0, -1.0],
            vec![2.0, -1.0],
            vec![-2.0, 1.0],
        ];
        let v = view(&rows);
        let (_, cov) = covariance(&v);
        let scale = 4.0 / cov[(0, 0)];
        let m = fit_pca(&v, 1).unwrap();
        assert_abs_diff_eq!(m.component(0)[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.component(0)[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.eigenvalues[0] * scale, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cov[(1, 1)] * scale, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn points_on_diagonal() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, i as f64]).collect();
        let m = fit_pca(&view(&rows), 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(m.component(0)[0], h, epsilon = 1e-12);
        assert_abs_diff_eq!(m.component(0)[1], h, epsilon = 1e-12);
        assert_abs_diff_eq!(m.eigenvalues[1], 0.0, epsilon = 1e-12);
        assert!(m.eigenvalues[1] >= 0.0);
    }

    #[test]
    fn projection_of_mean_and_eigenvector() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = i as f64;
                vec![t.sin(), (1.3 * t).cos() * 2.0, 0.1 * t]
            })
            .collect();
        let v = view(&rows);
        let m = fit_pca(&v, 3).unwrap();
        let mut out = vec![0.0; 3];
        m.project(&m.mean, &mut out);
        assert_eq!(out, vec![0.0; 3]);
        let x: Vec<f64> = m.mean.iter().zip(m.component(0)).map(|(a, b)| a + b).collect();
        m.project(&x, &mut out);
        assert_abs_diff_eq!(out[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn transform_matches_loop() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| (0..5).map(|b| ((i * 7 + b * 3) % 11) as f64 * 0.1 + b as f64).collect())
            .collect();
        let v = view(&rows);
        let m = fit_pca(&v, 2).unwrap();
        let t = transform_view(&v, &m).unwrap();
        for (i, row) in rows.iter().enumerate() {
            for k in 0..2 {
                let mut acc = 0.0;
                for b in 0..5 {
                    acc += m.projection[b * 2 + k] * (row[b] - m.mean[b]);
                }
                assert_abs_diff_eq!(t.values[i * 2 + k], acc, epsilon = 1e-12);
            }
        }
        let narrow = View { bands: 4, values: vec![0.0; 4], height: 1, width: 1 };
        assert!(matches!(transform_view(&narrow, &m), Err(Error::Dimension(_))));
    }

    #[test]
    fn orthonormal_and_ordered() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| (0..6).map(|b| (((i + 1) * (b + 2)) as f64).sqrt().sin()).collect())
            .collect();
        let m = fit_pca(&view(&rows), 4).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let d: f64 = m.component(a).iter().zip(m.component(b)).map(|(x, y)| x * y).sum();
                assert_abs_diff_eq!(d, if a == b { 1.0 } else { 0.0 }, epsilon = 1e-8);
            }
        }
        assert!(m.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn constant_view_is_degenerate() {
        let rows = vec![vec![1.0, 2.0]; 5];
        assert!(matches!(fit_pca(&view(&rows), 1), Err(Error::Degenerate(_))));
        assert!(matches!(fit_pca(&view(&[vec![1.0], vec![2.0]]), 2), Err(Error::Config(_))));
    }
}
