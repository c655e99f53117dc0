//! Exact 2D Euclidean distance transforms over binary masks.
//!
//! Two variants are exposed:
//!
//! * [`Side::Outside`] - for every pixel, the distance to the nearest mask
//!   (foreground) pixel. Mask pixels read 0.
//! * [`Side::Inside`] - for mask pixels, the distance to the mask's own
//!   boundary: a boundary pixel is a mask pixel with a background 4-neighbor
//!   or lying on the image edge (the image is treated as surrounded by
//!   background). Boundary pixels read 0; non-mask pixels read 0.
//!
//! Distances are exact: squared distances are computed with the two-pass
//! lower-envelope algorithm in integer arithmetic, so they agree with an
//! O(n²) nearest-pixel scan to the bit. If the seed set is empty (e.g. the
//! outside transform of an all-zero mask) every cell reads positive
//! infinity.

use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Inside,
    Outside,
}

/// Squared-distance sentinel for "no seed reachable". Strictly larger than
/// any achievable squared distance, which is bounded by (w-1)² + (h-1)².
fn inf_sq(width: usize, height: usize) -> i64 {
    (width * width + height * height) as i64
}

/// Euclidean distance transform in pixels. See the module docs for the
/// exact per-side semantics.
pub fn distance_transform(mask: &Grid<bool>, side: Side) -> Grid<f32> {
    let sq = distance_transform_sq(mask, side);
    let inf = inf_sq(mask.width(), mask.height());
    sq.map(|&d| {
        if d >= inf {
            f32::INFINITY
        } else {
            (d as f64).sqrt() as f32
        }
    })
}

/// Squared-distance variant; exact integers, `>= (w²+h²)` meaning "no seed".
pub fn distance_transform_sq(mask: &Grid<bool>, side: Side) -> Grid<i64> {
    let seeds = match side {
        Side::Outside => mask.clone(),
        Side::Inside => boundary_pixels(mask),
    };
    let mut sq = squared_edt(&seeds);
    if side == Side::Inside {
        // The inside transform is only defined on the mask itself.
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                if !mask.at(x, y) {
                    sq.set(x, y, 0);
                }
            }
        }
    }
    sq
}

/// Mask pixels with a background 4-neighbor or on the image edge.
pub fn boundary_pixels(mask: &Grid<bool>) -> Grid<bool> {
    let (w, h) = (mask.width(), mask.height());
    let mut out = Grid::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            if !mask.at(x, y) {
                continue;
            }
            let on_edge = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            let bg_neighbor = (x > 0 && !mask.at(x - 1, y))
                || (x + 1 < w && !mask.at(x + 1, y))
                || (y > 0 && !mask.at(x, y - 1))
                || (y + 1 < h && !mask.at(x, y + 1));
            if on_edge || bg_neighbor {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Two-pass exact squared EDT to the nearest seed pixel.
fn squared_edt(seeds: &Grid<bool>) -> Grid<i64> {
    let (w, h) = (seeds.width(), seeds.height());
    let inf = inf_sq(w, h);
    let mut tmp = Grid::filled(w, h, inf);

    // Column pass: squared distance along y to the nearest seed in the same
    // column.
    let mut f = vec![0i64; h.max(w)];
    let mut d = vec![0i64; h.max(w)];
    let mut vbuf = vec![0usize; h.max(w)];
    let mut zbuf = vec![0f64; h.max(w) + 1];
    for x in 0..w {
        for y in 0..h {
            f[y] = if seeds.at(x, y) { 0 } else { inf };
        }
        dt_1d(&f[..h], &mut d[..h], &mut vbuf, &mut zbuf);
        for y in 0..h {
            tmp.set(x, y, d[y]);
        }
    }

    // Row pass over the column results. Any cell still >= inf after both
    // passes had no seed in reach; clamp to the sentinel.
    let mut out = Grid::filled(w, h, inf);
    for y in 0..h {
        for x in 0..w {
            f[x] = tmp.at(x, y);
        }
        dt_1d(&f[..w], &mut d[..w], &mut vbuf, &mut zbuf);
        for x in 0..w {
            out.set(x, y, d[x].min(inf));
        }
    }
    out
}

/// 1D squared distance transform of a sampled function (lower envelope of
/// parabolas). `f` holds integer costs (the no-seed sentinel is a finite
/// large integer, so all parabolas are real); the envelope bookkeeping runs
/// in f64 but every emitted distance is the exact integer `(q - v)² + f(v)`.
fn dt_1d(f: &[i64], out: &mut [i64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        // Intersection of the parabolas rooted at v[k] and q; pop hull
        // entries the new parabola dominates. s is always finite, so the
        // k = 0 entry (z[0] = -inf) is never popped.
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] - f[p]) as f64 + (q * q - p * p) as f64) / (2 * (q - p)) as f64;
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for (q, slot) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as i64 - p as i64;
        *slot = dq * dq + f[p];
    }
}
