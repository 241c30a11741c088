//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use geosensor_core::raster::GeoTransform;

pub struct Brute {
    pub count: u64,
    pub sum: f64,
    pub mean: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

pub fn brute(values: &[f64]) -> Option<Brute> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let sum: f64 = values.iter().sum();
    let mean = sum / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(Brute {
        count: values.len() as u64,
        sum,
        mean,
        stddev: var.sqrt(),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Antiderivative of sqrt(r² - t²).
fn g(t: f64, r: f64) -> f64 {
    let t = t.clamp(-r, r);
    0.5 * (t * (r * r - t * t).max(0.0).sqrt() + r * r * (t / r).asin())
}

/// Area of the centred disc of radius `r` inside { x <= a, y <= b }.
fn quadrant_area(a: f64, b: f64, r: f64) -> f64 {
    let a = a.clamp(-r, r);
    let half = |lo: f64, hi: f64| if hi > lo { g(hi, r) - g(lo, r) } else { 0.0 };
    if b >= r {
        return 2.0 * half(-r, a);
    }
    if b <= -r {
        return 0.0;
    }
    let s = (r * r - b * b).sqrt();
    // inner strip |t| <= s: height b + h(t)
    let lo = -s;
    let hi = a.min(s);
    let inner = if hi > lo { b * (hi - lo) + half(lo, hi) } else { 0.0 };
    let outer = if b >= 0.0 { 2.0 * (half(-r, a.min(-s)) + half(s, a)) } else { 0.0 };
    inner + outer
}

pub fn disc_rect_area(cx: f64, cy: f64, r: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let (x0, x1, y0, y1) = (x0 - cx, x1 - cx, y0 - cy, y1 - cy);
    let q = |a, b| quadrant_area(a, b, r);
    (q(x1, y1) - q(x0, y1) - q(x1, y0) + q(x0, y0)).max(0.0)
}

fn cell_rect(gt: &GeoTransform, col: u32, row: u32) -> (f64, f64, f64, f64) {
    let xa = gt.x0 + col as f64 * gt.dx;
    let xb = xa + gt.dx;
    let ya = gt.y0 + row as f64 * gt.dy;
    let yb = ya + gt.dy;
    (xa.min(xb), ya.min(yb), xa.max(xb), ya.max(yb))
}

pub struct Oracle {
    pub mean: Option<f64>,
    /// Upper bound on |discrete - exact| at the given supersample.
    pub bound: f64,
}

/// Exact area-weighted mean over the valid cells (`nodata` excluded) and the
/// bound on how far an `s × s` centre-sampled estimate can stray from it.
#[allow(clippy::too_many_arguments)]
pub fn buffer_oracle(w: u32, h: u32, gt: &GeoTransform, cells: &[f64], nodata: f64, cx: f64, cy: f64, r: f64, s: u32) -> Oracle {
    let cell_area = (gt.dx * gt.dy).abs();
    let sub_w = gt.dx.abs() / s as f64;
    let sub_h = gt.dy.abs() / s as f64;
    let (mut num, mut den, mut wsum, mut crossed) = (0.0, 0.0, 0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in 0..h {
        for col in 0..w {
            let v = cells[(row * w + col) as usize];
            if v == nodata {
                continue;
            }
            let (x0, y0, x1, y1) = cell_rect(gt, col, row);
            let a = disc_rect_area(cx, cy, r, x0, y0, x1, y1) / cell_area;
            let mut inside = 0u32;
            let mut boundary = 0u32;
            for j in 0..s {
                for i in 0..s {
                    let (sx0, sy0) = (x0 + i as f64 * sub_w, y0 + j as f64 * sub_h);
                    let (sx1, sy1) = (sx0 + sub_w, sy0 + sub_h);
                    let (mx, my) = ((sx0 + sx1) / 2.0, (sy0 + sy1) / 2.0);
                    if (mx - cx).powi(2) + (my - cy).powi(2) <= r * r {
                        inside += 1;
                    }
                    let near_x = cx.clamp(sx0, sx1) - cx;
                    let near_y = cy.clamp(sy0, sy1) - cy;
                    let far_x = (sx0 - cx).abs().max((sx1 - cx).abs());
                    let far_y = (sy0 - cy).abs().max((sy1 - cy).abs());
                    let dmin = (near_x * near_x + near_y * near_y).sqrt();
                    let dmax = (far_x * far_x + far_y * far_y).sqrt();
                    if dmin <= r * (1.0 + 1e-12) && dmax >= r * (1.0 - 1e-12) {
                        boundary += 1;
                    }
                }
            }
            if a > 0.0 || inside > 0 {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            num += a * v;
            den += a;
            wsum += inside as f64 / (s * s) as f64;
            crossed += boundary as f64 / (s * s) as f64;
        }
    }
    let mean = (den > 0.0).then(|| num / den);
    let bound = if wsum > 0.0 { crossed * (hi - lo) / wsum } else { f64::INFINITY };
    Oracle { mean, bound }
}

