//! Procedural cel-shaded test images.
//!
//! Scenes are built from flat-filled shapes with dark outlines and a hard
//! shadow band, over a smooth background gradient. That gives the mix of
//! large flat regions and thin high-contrast edges typical of anime art,
//! which is what the enhancement networks are meant to learn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::raster::RasterImage;

const SUPERSAMPLE: usize = 4;

#[derive(Clone, Copy, Debug)]
enum Shape {
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
    },
    Box {
        cx: f64,
        cy: f64,
        hw: f64,
        hh: f64,
        cos: f64,
        sin: f64,
        round: f64,
    },
    Capsule {
        ax: f64,
        ay: f64,
        bx: f64,
        by: f64,
        r: f64,
    },
}

impl Shape {
    /// Approximate signed distance; negative inside.
    fn sdf(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::Ellipse { cx, cy, rx, ry } => {
                let (u, v) = ((x - cx) / rx, (y - cy) / ry);
                ((u * u + v * v).sqrt() - 1.0) * rx.min(ry)
            }
            Self::Box {
                cx,
                cy,
                hw,
                hh,
                cos,
                sin,
                round,
            } => {
                let (dx, dy) = (x - cx, y - cy);
                let (u, v) = (dx * cos + dy * sin, -dx * sin + dy * cos);
                let (qx, qy) = (u.abs() - hw + round, v.abs() - hh + round);
                qx.max(0.0).hypot(qy.max(0.0)) + qx.max(qy).min(0.0) - round
            }
            Self::Capsule { ax, ay, bx, by, r } => {
                let (px, py, ex, ey) = (x - ax, y - ay, bx - ax, by - ay);
                let t = ((px * ex + py * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
                (px - ex * t).hypot(py - ey * t) - r
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    shape: Shape,
    fill: [f64; 3],
    shadow: [f64; 3],
}

#[derive(Clone, Debug)]
struct Scene {
    top: [f64; 3],
    bottom: [f64; 3],
    layers: Vec<Layer>,
    outline: f64,
    ink: [f64; 3],
    light: (f64, f64),
}

fn palette_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    // Saturated hue at a random lightness, like a cel paint pot.
    let h = rng.random::<f64>() * 6.0;
    let s = rng.random_range(0.35..0.9);
    let l = rng.random_range(0.35..0.85);
    let c = (1.0 - (2.0 * l - 1.0f64).abs()) * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    [r + m, g + m, b + m]
}

fn random_shape(rng: &mut ChaCha8Rng, w: f64, h: f64) -> Shape {
    let size = w.min(h);
    let (cx, cy) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
    match rng.random_range(0..3) {
        0 => Shape::Ellipse {
            cx,
            cy,
            rx: rng.random_range(0.08..0.3) * size,
            ry: rng.random_range(0.08..0.3) * size,
        },
        1 => {
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let (hw, hh) = (rng.random_range(0.06..0.25) * size, rng.random_range(0.06..0.25) * size);
            Shape::Box {
                cx,
                cy,
                hw,
                hh,
                cos: angle.cos(),
                sin: angle.sin(),
                round: rng.random_range(0.0..0.5) * hw.min(hh),
            }
        }
        _ => {
            let len = rng.random_range(0.15..0.5) * size;
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            Shape::Capsule {
                ax: cx,
                ay: cy,
                bx: cx + len * angle.cos(),
                by: cy + len * angle.sin(),
                r: rng.random_range(0.02..0.07) * size,
            }
        }
    }
}

fn build_scene(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Scene {
    let (wf, hf) = (w as f64, h as f64);
    let n = rng.random_range(5..10);
    let layers = (0..n)
        .map(|_| {
            let fill = palette_color(rng);
            let k = rng.random_range(0.55..0.8);
            Layer {
                shape: random_shape(rng, wf, hf),
                fill,
                shadow: fill.map(|v| v * k),
            }
        })
        .collect();
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let reach = rng.random_range(0.03..0.07) * wf.min(hf);
    Scene {
        top: palette_color(rng),
        bottom: palette_color(rng),
        layers,
        outline: rng.random_range(0.8..1.8),
        ink: [rng.random_range(0.0..0.15); 3],
        light: (reach * angle.cos(), reach * angle.sin()),
    }
}

impl Scene {
    fn shade(&self, x: f64, y: f64, height: f64) -> [f64; 3] {
        let t = y / height;
        let mut color = [0, 1, 2].map(|c| self.top[c] * (1.0 - t) + self.bottom[c] * t);
        for layer in &self.layers {
            let d = layer.shape.sdf(x, y);
            if d > self.outline / 2.0 {
                continue;
            }
            color = if d > -self.outline / 2.0 {
                self.ink
            } else if layer.shape.sdf(x - self.light.0, y - self.light.1) > 0.0 {
                layer.shadow
            } else {
                layer.fill
            };
        }
        color
    }
}

/// Renders one `width × height` RGB scene, antialiased by supersampling.
pub fn cel_image(width: usize, height: usize, seed: u64) -> RasterImage {
    let scene = build_scene(width, height, &mut ChaCha8Rng::seed_from_u64(seed));
    let mut data = vec![0.0f32; width * height * 3];
    let inv = 1.0 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
    data.par_chunks_mut(width * 3).enumerate().for_each(|(y, row)| {
        for x in 0..width {
            let mut acc = [0.0; 3];
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let px = x as f64 + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
                    let py = y as f64 + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
                    let c = scene.shade(px, py, height as f64);
                    for i in 0..3 {
                        acc[i] += c[i];
                    }
                }
            }
            for i in 0..3 {
                row[x * 3 + i] = (acc[i] * inv).clamp(0.0, 1.0) as f32;
            }
        }
    });
    RasterImage::new(width, height, 3, data).expect("buffer sized to dims")
}

/// A named corpus of `count` scenes; image `i` uses seed `seed + i`.
pub fn cel_corpus(count: usize, width: usize, height: usize, seed: u64) -> Vec<(String, RasterImage)> {
    (0..count as u64)
        .map(|i| {
            (
                format!("cel_{i:03}.png"),
                cel_image(width, height, seed.wrapping_add(i)),
            )
        })
        .collect()
}
