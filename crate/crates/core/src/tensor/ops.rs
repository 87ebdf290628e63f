//! Forward kernels and their adjoints.
//!
//! All convolutions are correlations (no kernel flip) with zero padding of
//! `(k - 1) / 2` on every convolved axis, so spatial extents are preserved.
//! Loops run in a fixed order, so identical inputs give bit-identical outputs.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[inline]
pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [S::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = S::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy<S: Scalar>(y: &mut [S], alpha: S, x: &[S]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

fn expect_ndim<S: Scalar>(t: &Tensor<S>, n: usize, what: &str) -> Result<()> {
    if t.ndim() != n {
        return Err(Error::dim(format!(
            "{what}: expected {n}-d tensor, got shape {:?}",
            t.shape()
        )));
    }
    Ok(())
}

fn odd_extent(k: usize, what: &str) -> Result<usize> {
    if k.is_multiple_of(2) {
        return Err(Error::config(format!("{what}: kernel extent {k} is even")));
    }
    Ok(k / 2)
}

#[inline]
fn shifted(pos: usize, off: usize, radius: usize, extent: usize) -> Option<usize> {
    let p = (pos + off).checked_sub(radius)?;
    (p < extent).then_some(p)
}

/// Geometry of a 3D convolution over an `H×W×C` cube.
struct Conv3dDims {
    h: usize,
    w: usize,
    c: usize,
    nk: usize,
    k: [usize; 3],
    r: [usize; 3],
}

fn conv3d_dims<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Conv3dDims> {
    expect_ndim(input, 3, "conv3d input")?;
    expect_ndim(kernels, 4, "conv3d kernels")?;
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let ks = kernels.shape();
    let nk = ks[0];
    if bias.len() != nk {
        return Err(Error::dim(format!(
            "conv3d bias has {} entries for {nk} kernels",
            bias.len()
        )));
    }
    let r = [
        odd_extent(ks[1], "conv3d")?,
        odd_extent(ks[2], "conv3d")?,
        odd_extent(ks[3], "conv3d")?,
    ];
    Ok(Conv3dDims {
        h,
        w,
        c,
        nk,
        k: [ks[1], ks[2], ks[3]],
        r,
    })
}

/// Channel range `[lo, hi)` of the output that reads input channel `c + shift`.
#[inline]
fn channel_span(c: usize, l: usize, r: usize) -> (usize, usize, isize) {
    let s = l as isize - r as isize;
    let lo = (-s).max(0) as usize;
    let hi = (c as isize - s).min(c as isize).max(0) as usize;
    (lo, hi.max(lo), s)
}

/// 3D convolution of an `H×W×C` cube with `K1` kernels of shape `k1×k2×k3`.
///
/// Every kernel slides over both spatial axes and the channel axis and emits
/// a full `H×W×C` map; the maps are concatenated kernel-major along channels,
/// giving `H×W×(K1·C)`. Kernel `n` owns output channels `n·C..(n+1)·C`.
pub fn conv3d<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>> {
    let d = conv3d_dims(input, kernels, bias)?;
    let out_c = d.nk * d.c;
    let mut out = vec![S::zero(); d.h * d.w * out_c];
    let (x, ker, b) = (input.data(), kernels.data(), bias.data());
    let kvol = d.k[0] * d.k[1] * d.k[2];
    for h in 0..d.h {
        for w in 0..d.w {
            let base = (h * d.w + w) * out_c;
            for n in 0..d.nk {
                let o = &mut out[base + n * d.c..base + (n + 1) * d.c];
                o.fill(b[n]);
                for i in 0..d.k[0] {
                    let Some(hh) = shifted(h, i, d.r[0], d.h) else { continue };
                    for j in 0..d.k[1] {
                        let Some(ww) = shifted(w, j, d.r[1], d.w) else { continue };
                        let src = &x[(hh * d.w + ww) * d.c..(hh * d.w + ww + 1) * d.c];
                        for l in 0..d.k[2] {
                            let wv = ker[n * kvol + (i * d.k[1] + j) * d.k[2] + l];
                            let (lo, hi, s) = channel_span(d.c, l, d.r[2]);
                            let src = &src[(lo as isize + s) as usize..(hi as isize + s) as usize];
                            axpy(&mut o[lo..hi], wv, src);
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[d.h, d.w, out_c], out)
}

/// Adjoint of [`conv3d`]: gradients for input, kernels and bias.
pub fn conv3d_backward<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &Tensor<S>,
    grad_out: &[S],
) -> Result<(Vec<S>, Vec<S>, Vec<S>)> {
    let d = conv3d_dims(input, kernels, bias)?;
    let out_c = d.nk * d.c;
    let (x, ker) = (input.data(), kernels.data());
    let kvol = d.k[0] * d.k[1] * d.k[2];
    let mut gx = vec![S::zero(); x.len()];
    let mut gk = vec![S::zero(); ker.len()];
    let mut gb = vec![S::zero(); d.nk];
    for h in 0..d.h {
        for w in 0..d.w {
            let base = (h * d.w + w) * out_c;
            for n in 0..d.nk {
                let go = &grad_out[base + n * d.c..base + (n + 1) * d.c];
                gb[n] += go.iter().copied().sum::<S>();
                for i in 0..d.k[0] {
                    let Some(hh) = shifted(h, i, d.r[0], d.h) else { continue };
                    for j in 0..d.k[1] {
                        let Some(ww) = shifted(w, j, d.r[1], d.w) else { continue };
                        let at = (hh * d.w + ww) * d.c;
                        for l in 0..d.k[2] {
                            let ki = n * kvol + (i * d.k[1] + j) * d.k[2] + l;
                            let (lo, hi, s) = channel_span(d.c, l, d.r[2]);
                            let (a, z) = ((at as isize + lo as isize + s) as usize, (at as isize + hi as isize + s) as usize);
                            gk[ki] += dot(&go[lo..hi], &x[a..z]);
                            axpy(&mut gx[a..z], ker[ki], &go[lo..hi]);
                        }
                    }
                }
            }
        }
    }
    Ok((gx, gk, gb))
}

struct Conv2dDims {
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    k: usize,
    r: usize,
}

fn conv2d_dims<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Conv2dDims> {
    expect_ndim(input, 3, "conv2d input")?;
    expect_ndim(kernels, 4, "conv2d kernels")?;
    let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let ks = kernels.shape();
    if ks[1] != ks[2] {
        return Err(Error::dim(format!("conv2d kernels must be square, got {ks:?}")));
    }
    if ks[3] != cin {
        return Err(Error::dim(format!(
            "conv2d kernels expect {} input channels, input has {cin}",
            ks[3]
        )));
    }
    if bias.len() != ks[0] {
        return Err(Error::dim(format!(
            "conv2d bias has {} entries for {} kernels",
            bias.len(),
            ks[0]
        )));
    }
    let r = odd_extent(ks[1], "conv2d")?;
    Ok(Conv2dDims {
        h,
        w,
        cin,
        cout: ks[0],
        k: ks[1],
        r,
    })
}

/// 2D convolution: `H×W×Cin` input, `Cout×k×k×Cin` kernels, `H×W×Cout` output.
pub fn conv2d<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>> {
    let d = conv2d_dims(input, kernels, bias)?;
    let (x, ker, b) = (input.data(), kernels.data(), bias.data());
    let mut out = vec![S::zero(); d.h * d.w * d.cout];
    for h in 0..d.h {
        for w in 0..d.w {
            let o = &mut out[(h * d.w + w) * d.cout..(h * d.w + w + 1) * d.cout];
            o.copy_from_slice(b);
            for i in 0..d.k {
                let Some(hh) = shifted(h, i, d.r, d.h) else { continue };
                for j in 0..d.k {
                    let Some(ww) = shifted(w, j, d.r, d.w) else { continue };
                    let src = &x[(hh * d.w + ww) * d.cin..(hh * d.w + ww + 1) * d.cin];
                    for (co, ov) in o.iter_mut().enumerate() {
                        let kb = ((co * d.k + i) * d.k + j) * d.cin;
                        *ov += dot(&ker[kb..kb + d.cin], src);
                    }
                }
            }
        }
    }
    Tensor::new(&[d.h, d.w, d.cout], out)
}

/// Adjoint of [`conv2d`].
pub fn conv2d_backward<S: Scalar>(
    input: &Tensor<S>,
    kernels: &Tensor<S>,
    bias: &Tensor<S>,
    grad_out: &[S],
) -> Result<(Vec<S>, Vec<S>, Vec<S>)> {
    let d = conv2d_dims(input, kernels, bias)?;
    let (x, ker) = (input.data(), kernels.data());
    let mut gx = vec![S::zero(); x.len()];
    let mut gk = vec![S::zero(); ker.len()];
    let mut gb = vec![S::zero(); d.cout];
    for h in 0..d.h {
        for w in 0..d.w {
            let go = &grad_out[(h * d.w + w) * d.cout..(h * d.w + w + 1) * d.cout];
            for (b, g) in gb.iter_mut().zip(go) {
                *b += *g;
            }
            for i in 0..d.k {
                let Some(hh) = shifted(h, i, d.r, d.h) else { continue };
                for j in 0..d.k {
                    let Some(ww) = shifted(w, j, d.r, d.w) else { continue };
                    let at = (hh * d.w + ww) * d.cin;
                    for (co, &g) in go.iter().enumerate() {
                        if g == S::zero() {
                            continue;
                        }
                        let kb = ((co * d.k + i) * d.k + j) * d.cin;
                        axpy(&mut gk[kb..kb + d.cin], g, &x[at..at + d.cin]);
                        axpy(&mut gx[at..at + d.cin], g, &ker[kb..kb + d.cin]);
                    }
                }
            }
        }
    }
    Ok((gx, gk, gb))
}

fn matrix_dims<S: Scalar>(t: &Tensor<S>, what: &str) -> Result<(usize, usize)> {
    expect_ndim(t, 2, what)?;
    Ok((t.shape()[0], t.shape()[1]))
}

/// `a·b` for `n×k` by `k×m`.
pub fn matmul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let (n, k) = matrix_dims(a, "matmul lhs")?;
    let (k2, m) = matrix_dims(b, "matmul rhs")?;
    if k != k2 {
        return Err(Error::dim(format!("matmul inner dims {k} vs {k2}")));
    }
    let mut out = vec![S::zero(); n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            axpy(row, a.data()[i * k + p], &b.data()[p * m..(p + 1) * m]);
        }
    }
    Tensor::new(&[n, m], out)
}

pub fn matmul_backward<S: Scalar>(
    a: &Tensor<S>,
    b: &Tensor<S>,
    grad_out: &[S],
) -> (Vec<S>, Vec<S>) {
    let (n, k) = (a.shape()[0], a.shape()[1]);
    let m = b.shape()[1];
    let mut ga = vec![S::zero(); n * k];
    let mut gb = vec![S::zero(); k * m];
    for i in 0..n {
        let g = &grad_out[i * m..(i + 1) * m];
        for p in 0..k {
            ga[i * k + p] = dot(g, &b.data()[p * m..(p + 1) * m]);
            axpy(&mut gb[p * m..(p + 1) * m], a.data()[i * k + p], g);
        }
    }
    (ga, gb)
}

/// `a·bᵀ` for `n×k` by `m×k`.
pub fn matmul_nt<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let (n, k) = matrix_dims(a, "matmul_nt lhs")?;
    let (m, k2) = matrix_dims(b, "matmul_nt rhs")?;
    if k != k2 {
        return Err(Error::dim(format!("matmul_nt inner dims {k} vs {k2}")));
    }
    let mut out = vec![S::zero(); n * m];
    for i in 0..n {
        for j in 0..m {
            out[i * m + j] = dot(&a.data()[i * k..(i + 1) * k], &b.data()[j * k..(j + 1) * k]);
        }
    }
    Tensor::new(&[n, m], out)
}

pub fn matmul_nt_backward<S: Scalar>(
    a: &Tensor<S>,
    b: &Tensor<S>,
    grad_out: &[S],
) -> (Vec<S>, Vec<S>) {
    let (n, k) = (a.shape()[0], a.shape()[1]);
    let m = b.shape()[0];
    let mut ga = vec![S::zero(); n * k];
    let mut gb = vec![S::zero(); m * k];
    for i in 0..n {
        for j in 0..m {
            let g = grad_out[i * m + j];
            axpy(&mut ga[i * k..(i + 1) * k], g, &b.data()[j * k..(j + 1) * k]);
            axpy(&mut gb[j * k..(j + 1) * k], g, &a.data()[i * k..(i + 1) * k]);
        }
    }
    (ga, gb)
}

/// `input·weight + bias` for `n×fin` input and `fin×fout` weight.
pub fn affine<S: Scalar>(
    input: &Tensor<S>,
    weight: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>> {
    let fout = matrix_dims(weight, "affine weight")?.1;
    if bias.len() != fout {
        return Err(Error::dim(format!(
            "affine bias has {} entries, weight has {fout} outputs",
            bias.len()
        )));
    }
    let mut out = matmul(input, weight)?;
    for row in out.data_mut().chunks_exact_mut(fout) {
        for (o, b) in row.iter_mut().zip(bias.data()) {
            *o += *b;
        }
    }
    Ok(out)
}

pub fn affine_backward<S: Scalar>(
    input: &Tensor<S>,
    weight: &Tensor<S>,
    grad_out: &[S],
) -> (Vec<S>, Vec<S>, Vec<S>) {
    let fout = weight.shape()[1];
    let (gx, gw) = matmul_backward(input, weight, grad_out);
    let mut gb = vec![S::zero(); fout];
    for row in grad_out.chunks_exact(fout) {
        for (b, g) in gb.iter_mut().zip(row) {
            *b += *g;
        }
    }
    (gx, gw, gb)
}

pub fn relu<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    let data = input.data().iter().map(|&v| v.max(S::zero())).collect();
    Tensor::new(input.shape(), data).unwrap()
}

pub fn relu_backward<S: Scalar>(input: &Tensor<S>, grad_out: &[S]) -> Vec<S> {
    input
        .data()
        .iter()
        .zip(grad_out)
        .map(|(&x, &g)| if x > S::zero() { g } else { S::zero() })
        .collect()
}

/// Row-wise softmax of an `n×m` matrix, stabilized by subtracting the row max.
pub fn softmax_rows<S: Scalar>(input: &Tensor<S>) -> Result<Tensor<S>> {
    let (_, m) = matrix_dims(input, "softmax_rows")?;
    let mut out = input.data().to_vec();
    for row in out.chunks_exact_mut(m) {
        softmax_in_place(row);
    }
    Tensor::new(input.shape(), out)
}

pub(crate) fn softmax_in_place<S: Scalar>(row: &mut [S]) {
    let max = row.iter().copied().fold(S::neg_infinity(), S::max);
    let mut total = S::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Adjoint of softmax given its output `y`: `y ⊙ (g − Σ g⊙y)` per row.
pub fn softmax_rows_backward<S: Scalar>(output: &Tensor<S>, grad_out: &[S]) -> Vec<S> {
    let m = output.shape()[1];
    let mut gx = vec![S::zero(); output.len()];
    for ((y, g), gxr) in output
        .data()
        .chunks_exact(m)
        .zip(grad_out.chunks_exact(m))
        .zip(gx.chunks_exact_mut(m))
    {
        let s = dot(y, g);
        for ((o, &yi), &gi) in gxr.iter_mut().zip(y).zip(g) {
            *o = yi * (gi - s);
        }
    }
    gx
}

/// Row windows `(rows, cols)` of the four centre-sharing quadrants of a
/// `P×P` map, ordered top-left, top-right, bottom-left, bottom-right.
pub fn quadrant_windows(p: usize) -> [(std::ops::Range<usize>, std::ops::Range<usize>); 4] {
    let c = p / 2;
    [
        (0..c + 1, 0..c + 1),
        (0..c + 1, c..p),
        (c..p, 0..c + 1),
        (c..p, c..p),
    ]
}

/// Average-pool each channel of a `P×P×C` map over the four quadrants.
///
/// Each window sum is accumulated in ascending value order, so the pooled
/// value depends only on the multiset of window entries. This makes pooling
/// exactly equivariant under spatial reversal.
pub fn quadrant_pool<S: Scalar>(input: &Tensor<S>) -> Result<Tensor<S>> {
    expect_ndim(input, 3, "quadrant_pool")?;
    let (p, p2, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    if p != p2 {
        return Err(Error::dim(format!("quadrant_pool needs a square map, got {p}×{p2}")));
    }
    if p % 2 == 0 {
        return Err(Error::config(format!("patch size {p} is even")));
    }
    let half = p / 2 + 1;
    let area = S::from_usize(half * half).unwrap();
    let x = input.data();
    let mut out = vec![S::zero(); 4 * c];
    let mut buf = Vec::with_capacity(half * half);
    for (q, (rows, cols)) in quadrant_windows(p).into_iter().enumerate() {
        for ch in 0..c {
            buf.clear();
            for r in rows.clone() {
                for s in cols.clone() {
                    buf.push(x[(r * p + s) * c + ch]);
                }
            }
            buf.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let total: S = buf.iter().fold(S::zero(), |acc, &v| acc + v);
            out[q * c + ch] = total / area;
        }
    }
    Tensor::new(&[4, c], out)
}

pub fn quadrant_pool_backward<S: Scalar>(input: &Tensor<S>, grad_out: &[S]) -> Vec<S> {
    let (p, c) = (input.shape()[0], input.shape()[2]);
    let half = p / 2 + 1;
    let inv = S::one() / S::from_usize(half * half).unwrap();
    let mut gx = vec![S::zero(); input.len()];
    for (q, (rows, cols)) in quadrant_windows(p).into_iter().enumerate() {
        let g = &grad_out[q * c..(q + 1) * c];
        for r in rows.clone() {
            for s in cols.clone() {
                let at = (r * p + s) * c;
                axpy(&mut gx[at..at + c], inv, g);
            }
        }
    }
    gx
}

/// Mean softmax cross-entropy of `n×K` logits against 0-based targets,
/// using the log-sum-exp form.
pub fn cross_entropy<S: Scalar>(logits: &Tensor<S>, targets: &[usize]) -> Result<S> {
    let (n, k) = matrix_dims(logits, "cross_entropy")?;
    if targets.len() != n {
        return Err(Error::dim(format!("{} targets for {n} rows", targets.len())));
    }
    let mut total = S::zero();
    for (row, &t) in logits.data().chunks_exact(k).zip(targets) {
        if t >= k {
            return Err(Error::Usage(format!("target {t} out of range for {k} classes")));
        }
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<S>().ln();
        total += lse - row[t];
    }
    Ok(total / S::from_usize(n).unwrap())
}

pub fn cross_entropy_backward<S: Scalar>(logits: &Tensor<S>, targets: &[usize], grad: S) -> Vec<S> {
    let k = logits.shape()[1];
    let scale = grad / S::from_usize(targets.len()).unwrap();
    let mut gx = logits.data().to_vec();
    for (row, &t) in gx.chunks_exact_mut(k).zip(targets) {
        softmax_in_place(row);
        row[t] -= S::one();
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    gx
}
