//! Straightforward scalar reference implementations and random-input helpers
//! shared by the integration tests. Each oracle follows the textbook
//! definition directly, with no reuse of library internals.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sr_forge_core::metrics::{ssim, SsimParams, SsimWindow};
use sr_forge_core::nn::{conv2d_forward, conv2d_transpose_forward, mse_loss, Network, NetworkSpec, Tensor};
use sr_forge_core::pipeline::{bilateral_filter, nlm_denoise};
use sr_forge_core::RasterImage;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(w: usize, h: usize, c: usize, rng: &mut ChaCha8Rng) -> RasterImage {
    let data = (0..w * h * c).map(|_| rng.random::<f32>()).collect();
    RasterImage::new(w, h, c, data).unwrap()
}

pub fn random_tensor(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn image_f64(img: &RasterImage) -> Vec<f64> {
    img.data().iter().map(|&v| v as f64).collect()
}

fn same_pad(len: usize, k: usize, s: usize) -> (usize, isize) {
    let out = len.div_ceil(s);
    let total = ((out - 1) * s + k).saturating_sub(len);
    (out, (total / 2) as isize)
}

/// Zero-padded "same" cross-correlation, weights `[out, in, k, k]`.
pub fn conv_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64], s: usize) -> Tensor<f64> {
    let [n, cin, h, wd] = x.shape();
    let [cout, _, k, _] = w.shape();
    let (oh, pt) = same_pad(h, k, s);
    let (ow, pl) = same_pad(wd, k, s);
    let xi = |b: usize, c: usize, y: isize, xx: isize| -> f64 {
        if y < 0 || xx < 0 || y >= h as isize || xx >= wd as isize {
            0.0
        } else {
            x.data()[((b * cin + c) * h + y as usize) * wd + xx as usize]
        }
    };
    let mut out = vec![0.0; n * cout * oh * ow];
    for bi in 0..n {
        for o in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.get(o).copied().unwrap_or(0.0);
                    for c in 0..cin {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * s + ky) as isize - pt;
                                let ix = (ox * s + kx) as isize - pl;
                                acc += xi(bi, c, iy, ix) * w.data()[((o * cin + c) * k + ky) * k + kx];
                            }
                        }
                    }
                    out[((bi * cout + o) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    Tensor::new([n, cout, oh, ow], out).unwrap()
}

/// Transposed convolution by scattering every input sample through the
/// kernel, weights `[in, out, k, k]`. Output is `stride ×` the input size.
pub fn conv_transpose_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64], s: usize) -> Tensor<f64> {
    let [n, cin, h, wd] = x.shape();
    let [_, cout, k, _] = w.shape();
    let (oh, ow) = (h * s, wd * s);
    let pad = (k.saturating_sub(s) / 2) as isize;
    let mut out = vec![0.0; n * cout * oh * ow];
    for bi in 0..n {
        for o in 0..cout {
            let base = (bi * cout + o) * oh * ow;
            out[base..base + oh * ow].fill(b.get(o).copied().unwrap_or(0.0));
        }
        for c in 0..cin {
            for iy in 0..h {
                for ix in 0..wd {
                    let v = x.data()[((bi * cin + c) * h + iy) * wd + ix];
                    for o in 0..cout {
                        for ky in 0..k {
                            for kx in 0..k {
                                let y = (iy * s + ky) as isize - pad;
                                let xx = (ix * s + kx) as isize - pad;
                                if y < 0 || xx < 0 || y >= oh as isize || xx >= ow as isize {
                                    continue;
                                }
                                out[((bi * cout + o) * oh + y as usize) * ow + xx as usize] +=
                                    v * w.data()[((c * cout + o) * k + ky) * k + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new([n, cout, oh, ow], out).unwrap()
}

fn clamped(img: &RasterImage, x: isize, y: isize, c: usize) -> f64 {
    let x = x.clamp(0, img.width() as isize - 1) as usize;
    let y = y.clamp(0, img.height() as isize - 1) as usize;
    img.data()[(y * img.width() + x) * img.channels() + c] as f64
}

pub fn bilateral_oracle(img: &RasterImage, d: usize, sigma_color: f64, sigma_space: f64) -> Vec<f64> {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let r = (d / 2) as isize;
    let mut out = Vec::with_capacity(w * h * c);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut num = vec![0.0; c];
            let mut den = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let mut dist2 = 0.0;
                    for ch in 0..c {
                        let diff = clamped(img, x + dx, y + dy, ch) - clamped(img, x, y, ch);
                        dist2 += diff * diff;
                    }
                    let space = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_space * sigma_space)).exp();
                    let range = (-dist2 / (2.0 * sigma_color * sigma_color)).exp();
                    let wt = space * range;
                    den += wt;
                    for ch in 0..c {
                        num[ch] += wt * clamped(img, x + dx, y + dy, ch);
                    }
                }
            }
            out.extend(num.iter().map(|v| (v / den).clamp(0.0, 1.0)));
        }
    }
    out
}

/// Non-local means with a Gaussian template of standard deviation
/// `radius / 2`, searching only positions inside the image.
pub fn nlm_oracle(img: &RasterImage, h: f64, template: usize, search: usize) -> Vec<f64> {
    let (w, ht, c) = (img.width(), img.height(), img.channels());
    let tr = (template / 2) as isize;
    let sr = (search / 2) as isize;
    let sigma = tr as f64 / 2.0;
    let g1: Vec<f64> = (-tr..=tr)
        .map(|t| {
            if tr == 0 {
                1.0
            } else {
                (-((t * t) as f64) / (2.0 * sigma * sigma)).exp()
            }
        })
        .collect();
    let gsum: f64 = g1.iter().sum();
    let mut out = Vec::with_capacity(w * ht * c);
    for py in 0..ht as isize {
        for px in 0..w as isize {
            let mut num = vec![0.0; c];
            let mut den = 0.0;
            for qy in py - sr..=py + sr {
                for qx in px - sr..=px + sr {
                    if qy < 0 || qx < 0 || qy >= ht as isize || qx >= w as isize {
                        continue;
                    }
                    let mut d2 = 0.0;
                    for ty in -tr..=tr {
                        for tx in -tr..=tr {
                            let gw = g1[(ty + tr) as usize] * g1[(tx + tr) as usize] / (gsum * gsum);
                            let mut s = 0.0;
                            for ch in 0..c {
                                let diff = clamped(img, px + tx, py + ty, ch) - clamped(img, qx + tx, qy + ty, ch);
                                s += diff * diff;
                            }
                            d2 += gw * s / c as f64;
                        }
                    }
                    let wt = (-d2 / (h * h)).exp();
                    den += wt;
                    for ch in 0..c {
                        num[ch] += wt * clamped(img, qx, qy, ch);
                    }
                }
            }
            out.extend(num.iter().map(|v| (v / den).clamp(0.0, 1.0)));
        }
    }
    out
}

/// Windowed SSIM: 2-D Gaussian-weighted statistics at every fully
/// contained window position, averaged; channels averaged.
pub fn ssim_oracle(a: &RasterImage, b: &RasterImage, size: usize, sigma: f64) -> f64 {
    let (c1, c2) = (1e-4, 9e-4);
    let r = (size / 2) as f64;
    let g: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let gs: f64 = g.iter().sum();
    let (w, h, ch) = (a.width(), a.height(), a.channels());
    let at = |img: &RasterImage, x: usize, y: usize, c: usize| img.data()[(y * w + x) * ch + c] as f64;
    let mut total = 0.0;
    for c in 0..ch {
        let mut sum = 0.0;
        let mut count = 0usize;
        for y0 in 0..=h - size {
            for x0 in 0..=w - size {
                let (mut mx, mut my) = (0.0, 0.0);
                for j in 0..size {
                    for i in 0..size {
                        let wt = g[i] * g[j] / (gs * gs);
                        mx += wt * at(a, x0 + i, y0 + j, c);
                        my += wt * at(b, x0 + i, y0 + j, c);
                    }
                }
                let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
                for j in 0..size {
                    for i in 0..size {
                        let wt = g[i] * g[j] / (gs * gs);
                        let dx = at(a, x0 + i, y0 + j, c) - mx;
                        let dy = at(b, x0 + i, y0 + j, c) - my;
                        vx += wt * dx * dx;
                        vy += wt * dy * dy;
                        cov += wt * dx * dy;
                    }
                }
                sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        total += sum / count as f64;
    }
    total / ch as f64
}

/// Global-statistics SSIM over the whole image, channels averaged.
pub fn ssim_global_oracle(a: &RasterImage, b: &RasterImage) -> f64 {
    let (c1, c2) = (1e-4, 9e-4);
    let ch = a.channels();
    let mut total = 0.0;
    for c in 0..ch {
        let xs: Vec<f64> = a.data().iter().skip(c).step_by(ch).map(|&v| v as f64).collect();
        let ys: Vec<f64> = b.data().iter().skip(c).step_by(ch).map(|&v| v as f64).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let vx = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / n;
        let vy = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / n;
        let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    total / ch as f64
}

/// Relative error with a floor so gradients that are both essentially zero
/// compare equal.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-8 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

pub struct GradCheck {
    pub worst: f64,
    pub checked: usize,
    /// Parameters whose `±eps` step crossed an activation kink and were
    /// re-checked with a smaller step.
    pub refined: usize,
}

fn sign_pattern(net: &Network<f64>, x: &Tensor<f64>) -> Vec<bool> {
    let (_, cache) = net.forward_cached(x).unwrap();
    cache.activations()[1..]
        .iter()
        .flat_map(|t| t.data().iter().map(|&v| v > 0.0))
        .collect()
}

/// Checks every parameter gradient of `spec` against central differences
/// on one random `1 × C × 8 × 8` input.
///
/// A central difference is only meaningful when both probes stay on the same
/// linear piece of every leaky ReLU. When a `±eps` step flips the sign of
/// some activation, the step is shrunk by 10× until it no longer does.
pub fn gradient_check(spec: NetworkSpec, seed: u64, eps: f64) -> GradCheck {
    let mut r = rng(seed);
    let net32 = Network::<f32>::new(spec.clone(), seed).unwrap();
    let mut net: Network<f64> = net32.cast();
    // Random non-zero biases so the bias paths are exercised too.
    for layer in net.layers_mut() {
        for b in layer.bias.iter_mut() {
            *b = r.random_range(-0.1..0.1);
        }
    }
    let c = spec.input_channels;
    let x = Tensor::from_fn([1, c, 8, 8], |_| r.random_range(0.0..1.0));
    let target = Tensor::from_fn([1, spec.output_channels(), 8, 8], |_| r.random_range(0.0..1.0));
    let loss = |n: &Network<f64>| mse_loss(&n.forward(&x).unwrap(), &target).unwrap().0;
    let base_signs = sign_pattern(&net, &x);

    let (out, cache) = net.forward_cached(&x).unwrap();
    let (_, grad_out) = mse_loss(&out, &target).unwrap();
    let grads = net.backward(&cache, &grad_out).unwrap();

    let mut result = GradCheck {
        worst: 0.0,
        checked: 0,
        refined: 0,
    };
    let layer_count = net.layers().len();
    for li in 0..layer_count {
        let weight_count = net.layers()[li].weights.len();
        let bias_count = net.layers()[li].bias.len();
        for pi in 0..weight_count + bias_count {
            let analytic = if pi < weight_count {
                grads.weights[li].data()[pi]
            } else {
                grads.biases[li][pi - weight_count]
            };
            let probe = |delta: f64| {
                let mut n = net.clone();
                if pi < weight_count {
                    n.layers_mut()[li].weights.data_mut()[pi] += delta;
                } else {
                    n.layers_mut()[li].bias[pi - weight_count] += delta;
                }
                (loss(&n), sign_pattern(&n, &x) == base_signs)
            };
            let mut step = eps;
            let numeric = loop {
                let (up, up_smooth) = probe(step);
                let (down, down_smooth) = probe(-step);
                if (up_smooth && down_smooth) || step < 1e-7 {
                    break (up - down) / (2.0 * step);
                }
                step /= 10.0;
            };
            result.refined += usize::from(step < eps);
            result.worst = result.worst.max(relative_error(analytic, numeric));
            result.checked += 1;
        }
    }
    result
}

/// Worst absolute deviation of `conv2d_forward` from [`conv_oracle`] over
/// `cases` random shapes, in f64 and in f32.
pub fn sweep_conv(cases: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let (mut worst64, mut worst32) = (0.0f64, 0.0f64);
    for _ in 0..cases {
        let (n, cin, cout) = (r.random_range(1..3), r.random_range(1..4), r.random_range(1..4));
        let (h, w) = (r.random_range(1..10), r.random_range(1..10));
        let k = [1, 3, 5][r.random_range(0..3)];
        let s = r.random_range(1..4);
        let x = random_tensor([n, cin, h, w], &mut r);
        let wt = random_tensor([cout, cin, k, k], &mut r);
        let b: Vec<f64> = (0..cout).map(|_| r.random_range(-1.0..1.0)).collect();
        let want = conv_oracle(&x, &wt, &b, s);
        let got = conv2d_forward(&x, &wt, &b, s).unwrap();
        assert_eq!(got.shape(), want.shape());
        worst64 = worst64.max(max_abs_diff(got.data(), want.data()));

        let (x32, w32) = (x.cast::<f32>(), wt.cast::<f32>());
        let b32: Vec<f32> = b.iter().map(|&v| v as f32).collect();
        let got32: Tensor<f64> = conv2d_forward(&x32, &w32, &b32, s).unwrap().cast();
        let b32_wide: Vec<f64> = b32.iter().map(|&v| v as f64).collect();
        let want32 = conv_oracle(&x32.cast(), &w32.cast(), &b32_wide, s);
        worst32 = worst32.max(max_abs_diff(got32.data(), want32.data()));
    }
    (worst64, worst32)
}

pub fn sweep_conv_transpose(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (n, cin, cout) = (r.random_range(1..3), r.random_range(1..4), r.random_range(1..4));
        let (h, w) = (r.random_range(1..8), r.random_range(1..8));
        let k = [1, 2, 3, 4, 5][r.random_range(0..5)];
        let s = r.random_range(1..4);
        let x = random_tensor([n, cin, h, w], &mut r);
        let wt = random_tensor([cin, cout, k, k], &mut r);
        let b: Vec<f64> = (0..cout).map(|_| r.random_range(-1.0..1.0)).collect();
        let want = conv_transpose_oracle(&x, &wt, &b, s);
        let got = conv2d_transpose_forward(&x, &wt, &b, s).unwrap();
        assert_eq!(got.shape(), want.shape());
        worst = worst.max(max_abs_diff(got.data(), want.data()));
    }
    worst
}

pub fn sweep_bilateral(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let c = [1, 3][r.random_range(0..2)];
        let img = random_image(r.random_range(1..9), r.random_range(1..9), c, &mut r);
        let d = [3, 5, 7][r.random_range(0..3)];
        let (sc, ss) = (r.random_range(0.05..1.0), r.random_range(0.5..3.0));
        let got = bilateral_filter(&img, d, sc, ss).unwrap();
        worst = worst.max(max_abs_diff(&image_f64(&got), &bilateral_oracle(&img, d, sc, ss)));
    }
    worst
}

pub fn sweep_nlm(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let c = [1, 3][r.random_range(0..2)];
        let img = random_image(8, 8, c, &mut r);
        let (t, s) = [(1, 3), (3, 5), (3, 7)][r.random_range(0..3)];
        let h = r.random_range(0.05..0.6);
        let got = nlm_denoise(&img, h, t, s).unwrap();
        worst = worst.max(max_abs_diff(&image_f64(&got), &nlm_oracle(&img, h, t, s)));
    }
    worst
}

/// Covers the default 11×11 window, a 7×7 window and global statistics,
/// alternating unrelated and correlated image pairs.
pub fn sweep_ssim(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..cases {
        let c = [1, 3][r.random_range(0..2)];
        let (w, h) = (r.random_range(11..18), r.random_range(11..18));
        let a = random_image(w, h, c, &mut r);
        let b = if i % 2 == 0 {
            random_image(w, h, c, &mut r)
        } else {
            let noise = random_image(w, h, c, &mut r);
            let data = a
                .data()
                .iter()
                .zip(noise.data())
                .map(|(v, n)| 0.8 * v + 0.1 * n)
                .collect();
            RasterImage::new(w, h, c, data).unwrap()
        };
        let small = SsimParams {
            window: SsimWindow::Gaussian { size: 7, sigma: 1.0 },
            ..SsimParams::default()
        };
        for (got, want) in [
            (
                ssim(&a, &b, &SsimParams::default()).unwrap(),
                ssim_oracle(&a, &b, 11, 1.5),
            ),
            (ssim(&a, &b, &small).unwrap(), ssim_oracle(&a, &b, 7, 1.0)),
            (ssim(&a, &b, &SsimParams::global()).unwrap(), ssim_global_oracle(&a, &b)),
        ] {
            worst = worst.max((got - want).abs());
        }
    }
    worst
}
