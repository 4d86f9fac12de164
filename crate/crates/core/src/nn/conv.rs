//! Convolution and transposed convolution via im2col and GEMM.
//!
//! Convolutions use "same" zero padding: the output has `ceil(in / stride)`
//! samples per axis and the padding is split with the smaller half on the
//! top/left. A transposed convolution with stride `s` is the exact adjoint
//! of the same-padded convolution applied to an input of `s` times its own
//! size, so its output is `in × s` per axis.
//!
//! Weight layouts: convolution `[out, in, k, k]`, transposed convolution
//! `[in, out, k, k]`.

use std::ops::Range;

use rayon::prelude::*;

use super::real::{gemm, Layout};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Upper bound on the im2col scratch buffer, in elements. Larger images are
/// processed in bands of output rows.
const SCRATCH_ELEMS: usize = 1 << 22;

/// Geometry of a same-padded convolution over one image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

fn same_padding(len: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = len.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(len);
    (out, total / 2)
}

impl ConvGeometry {
    pub fn same(channels: usize, in_h: usize, in_w: usize, kernel: usize, stride: usize) -> Self {
        assert!(kernel >= 1 && stride >= 1, "kernel and stride must be positive");
        let (out_h, pad_top) = same_padding(in_h, kernel, stride);
        let (out_w, pad_left) = same_padding(in_w, kernel, stride);
        Self {
            channels,
            in_h,
            in_w,
            kernel,
            stride,
            pad_top,
            pad_left,
            out_h,
            out_w,
        }
    }

    /// Rows of the im2col matrix.
    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn out_len(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn in_len(&self) -> usize {
        self.in_h * self.in_w
    }

    /// Output columns `[lo, hi)` whose tap at kernel column `kx` lands inside
    /// the input row.
    fn valid_cols(&self, kx: usize) -> (usize, usize) {
        let (s, pl) = (self.stride, self.pad_left);
        let lo = if kx >= pl { 0 } else { (pl - kx).div_ceil(s) };
        let hi = if self.in_w + pl > kx {
            (self.in_w + pl - kx).div_ceil(s).min(self.out_w)
        } else {
            0
        };
        (lo, hi.max(lo))
    }

    /// Input row touched by output row `oy` at kernel row `ky`, if any.
    fn input_row(&self, oy: usize, ky: usize) -> Option<usize> {
        let iy = (oy * self.stride + ky).checked_sub(self.pad_top)?;
        (iy < self.in_h).then_some(iy)
    }

    /// Number of output rows per band so the scratch stays bounded.
    fn band_rows(&self, patch_len: usize) -> usize {
        (SCRATCH_ELEMS / (patch_len * self.out_w).max(1)).clamp(1, self.out_h)
    }
}

fn bands(total: usize, per: usize) -> impl Iterator<Item = Range<usize>> {
    (0..total).step_by(per).map(move |r| r..(r + per).min(total))
}

/// Fills `col` (`patch_len × rows.len()·out_w`) with input taps for the
/// given band of output rows.
pub(crate) fn im2col<T: Real>(src: &[T], g: &ConvGeometry, rows: Range<usize>, col: &mut [T]) {
    let k = g.kernel;
    let ncols = rows.len() * g.out_w;
    debug_assert_eq!(col.len(), g.patch_len() * ncols);
    for c in 0..g.channels {
        let plane = &src[c * g.in_len()..(c + 1) * g.in_len()];
        for ky in 0..k {
            for kx in 0..k {
                let r = (c * k + ky) * k + kx;
                let dst_row = &mut col[r * ncols..(r + 1) * ncols];
                let (lo, hi) = g.valid_cols(kx);
                for (band_y, oy) in rows.clone().enumerate() {
                    let dst = &mut dst_row[band_y * g.out_w..(band_y + 1) * g.out_w];
                    let Some(iy) = g.input_row(oy, ky) else {
                        dst.fill(T::zero());
                        continue;
                    };
                    let line = &plane[iy * g.in_w..(iy + 1) * g.in_w];
                    dst[..lo].fill(T::zero());
                    dst[hi..].fill(T::zero());
                    if g.stride == 1 {
                        let start = lo + kx - g.pad_left;
                        dst[lo..hi].copy_from_slice(&line[start..start + hi - lo]);
                    } else {
                        for ox in lo..hi {
                            dst[ox] = line[ox * g.stride + kx - g.pad_left];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates `col` back into `dst`.
pub(crate) fn col2im<T: Real>(col: &[T], g: &ConvGeometry, rows: Range<usize>, dst: &mut [T]) {
    let k = g.kernel;
    let ncols = rows.len() * g.out_w;
    debug_assert_eq!(col.len(), g.patch_len() * ncols);
    for c in 0..g.channels {
        let plane = &mut dst[c * g.in_len()..(c + 1) * g.in_len()];
        for ky in 0..k {
            for kx in 0..k {
                let r = (c * k + ky) * k + kx;
                let src_row = &col[r * ncols..(r + 1) * ncols];
                let (lo, hi) = g.valid_cols(kx);
                for (band_y, oy) in rows.clone().enumerate() {
                    let Some(iy) = g.input_row(oy, ky) else { continue };
                    let line = &mut plane[iy * g.in_w..(iy + 1) * g.in_w];
                    let src = &src_row[band_y * g.out_w..(band_y + 1) * g.out_w];
                    for ox in lo..hi {
                        line[ox * g.stride + kx - g.pad_left] += src[ox];
                    }
                }
            }
        }
    }
}

/// Same-padded convolution of one sample. `y` (`out × out_len`) is
/// overwritten.
pub(crate) fn conv_sample<T: Real>(x: &[T], w: &[T], bias: &[T], g: &ConvGeometry, y: &mut [T]) {
    let out = w.len() / g.patch_len();
    let pl = g.patch_len();
    for (o, plane) in y.chunks_exact_mut(g.out_len()).enumerate() {
        plane.fill(bias.get(o).copied().unwrap_or_else(T::zero));
    }
    let band = g.band_rows(pl);
    let mut col = vec![T::zero(); pl * band * g.out_w];
    for rows in bands(g.out_h, band) {
        let n = rows.len() * g.out_w;
        let col = &mut col[..pl * n];
        im2col(x, g, rows.clone(), col);
        gemm(
            out,
            pl,
            n,
            T::one(),
            w,
            Layout::row_major(0, pl),
            col,
            Layout::row_major(0, n),
            T::one(),
            y,
            Layout {
                offset: rows.start * g.out_w,
                rs: g.out_len(),
                cs: 1,
            },
        );
    }
}

/// Gradients of one same-padded convolution sample. Accumulates into `dw`
/// and `db`, overwrites `dx`.
pub(crate) fn conv_sample_backward<T: Real>(
    x: &[T],
    w: &[T],
    g: &ConvGeometry,
    dy: &[T],
    dw: &mut [T],
    db: &mut [T],
    dx: &mut [T],
) {
    let out = w.len() / g.patch_len();
    let pl = g.patch_len();
    for (o, plane) in dy.chunks_exact(g.out_len()).enumerate() {
        if let Some(b) = db.get_mut(o) {
            *b += plane.iter().copied().sum::<T>();
        }
    }
    dx.fill(T::zero());
    let band = g.band_rows(pl);
    let mut col = vec![T::zero(); pl * band * g.out_w];
    let mut dcol = vec![T::zero(); pl * band * g.out_w];
    for rows in bands(g.out_h, band) {
        let n = rows.len() * g.out_w;
        let off = rows.start * g.out_w;
        let (col, dcol) = (&mut col[..pl * n], &mut dcol[..pl * n]);
        im2col(x, g, rows.clone(), col);
        let dy_view = Layout {
            offset: off,
            rs: g.out_len(),
            cs: 1,
        };
        // dW += dY · colᵀ
        gemm(
            out,
            n,
            pl,
            T::one(),
            dy,
            dy_view,
            col,
            Layout::transposed(0, n),
            T::one(),
            dw,
            Layout::row_major(0, pl),
        );
        // dcol = Wᵀ · dY
        gemm(
            pl,
            out,
            n,
            T::one(),
            w,
            Layout::transposed(0, pl),
            dy,
            dy_view,
            T::zero(),
            dcol,
            Layout::row_major(0, n),
        );
        col2im(dcol, g, rows, dx);
    }
}

/// Geometry of the convolution whose adjoint is a transposed convolution
/// over an `in_h × in_w` input.
pub(crate) fn transpose_geometry(
    out_channels: usize,
    in_h: usize,
    in_w: usize,
    kernel: usize,
    stride: usize,
) -> ConvGeometry {
    let g = ConvGeometry::same(out_channels, in_h * stride, in_w * stride, kernel, stride);
    debug_assert_eq!((g.out_h, g.out_w), (in_h, in_w));
    g
}

/// Transposed convolution of one sample. `x` is `in × out_len(g)`, `y` is
/// `out × in_len(g)` and is overwritten.
pub(crate) fn conv_transpose_sample<T: Real>(x: &[T], w: &[T], bias: &[T], g: &ConvGeometry, y: &mut [T]) {
    let pl = g.patch_len();
    let cin = w.len() / pl;
    for (o, plane) in y.chunks_exact_mut(g.in_len()).enumerate() {
        plane.fill(bias.get(o).copied().unwrap_or_else(T::zero));
    }
    let band = g.band_rows(pl);
    let mut cols = vec![T::zero(); pl * band * g.out_w];
    for rows in bands(g.out_h, band) {
        let n = rows.len() * g.out_w;
        let cols = &mut cols[..pl * n];
        // cols = Wᵀ · X
        gemm(
            pl,
            cin,
            n,
            T::one(),
            w,
            Layout::transposed(0, pl),
            x,
            Layout {
                offset: rows.start * g.out_w,
                rs: g.out_len(),
                cs: 1,
            },
            T::zero(),
            cols,
            Layout::row_major(0, n),
        );
        col2im(cols, g, rows, y);
    }
}

pub(crate) fn conv_transpose_sample_backward<T: Real>(
    x: &[T],
    w: &[T],
    g: &ConvGeometry,
    dy: &[T],
    dw: &mut [T],
    db: &mut [T],
    dx: &mut [T],
) {
    let pl = g.patch_len();
    let cin = w.len() / pl;
    for (o, plane) in dy.chunks_exact(g.in_len()).enumerate() {
        if let Some(b) = db.get_mut(o) {
            *b += plane.iter().copied().sum::<T>();
        }
    }
    let band = g.band_rows(pl);
    let mut dcols = vec![T::zero(); pl * band * g.out_w];
    for rows in bands(g.out_h, band) {
        let n = rows.len() * g.out_w;
        let view = Layout {
            offset: rows.start * g.out_w,
            rs: g.out_len(),
            cs: 1,
        };
        let dcols = &mut dcols[..pl * n];
        im2col(dy, g, rows, dcols);
        // dX = W · dcols
        gemm(
            cin,
            pl,
            n,
            T::one(),
            w,
            Layout::row_major(0, pl),
            dcols,
            Layout::row_major(0, n),
            T::zero(),
            dx,
            view,
        );
        // dW += X · dcolsᵀ
        gemm(
            cin,
            n,
            pl,
            T::one(),
            x,
            view,
            dcols,
            Layout::transposed(0, n),
            T::one(),
            dw,
            Layout::row_major(0, pl),
        );
    }
}

fn check_bias<T>(bias: &[T], filters: usize) -> Result<()> {
    if !bias.is_empty() && bias.len() != filters {
        return Err(Error::ShapeMismatch(format!(
            "bias has {} entries for {filters} filters",
            bias.len()
        )));
    }
    Ok(())
}

/// Same-padded 2-D cross-correlation plus bias over a batch.
///
/// `weights` is `[out, in, k, k]`; an empty `bias` means no bias.
pub fn conv2d_forward<T: Real>(input: &Tensor<T>, weights: &Tensor<T>, bias: &[T], stride: usize) -> Result<Tensor<T>> {
    let [n, cin, h, w] = input.shape();
    let [cout, wcin, kh, kw] = weights.shape();
    if wcin != cin || kh != kw {
        return Err(Error::ShapeMismatch(format!(
            "conv weights {:?} incompatible with input {:?}",
            weights.shape(),
            input.shape()
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be positive".into()));
    }
    check_bias(bias, cout)?;
    let g = ConvGeometry::same(cin, h, w, kh, stride);
    let mut out = Tensor::zeros([n, cout, g.out_h, g.out_w]);
    let out_len = cout * g.out_len();
    out.data_mut()
        .par_chunks_mut(out_len)
        .enumerate()
        .for_each(|(i, y)| conv_sample(input.sample(i), weights.data(), bias, &g, y));
    Ok(out)
}

/// Transposed convolution (the adjoint of [`conv2d_forward`]) plus bias.
///
/// `weights` is `[in, out, k, k]`; output spatial dims are `in × stride`.
pub fn conv2d_transpose_forward<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &[T],
    stride: usize,
) -> Result<Tensor<T>> {
    let [n, cin, h, w] = input.shape();
    let [wcin, cout, kh, kw] = weights.shape();
    if wcin != cin || kh != kw {
        return Err(Error::ShapeMismatch(format!(
            "transposed conv weights {:?} incompatible with input {:?}",
            weights.shape(),
            input.shape()
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be positive".into()));
    }
    check_bias(bias, cout)?;
    let g = transpose_geometry(cout, h, w, kh, stride);
    let mut out = Tensor::zeros([n, cout, g.in_h, g.in_w]);
    let out_len = cout * g.in_len();
    out.data_mut()
        .par_chunks_mut(out_len)
        .enumerate()
        .for_each(|(i, y)| conv_transpose_sample(input.sample(i), weights.data(), bias, &g, y));
    Ok(out)
}
