//! Mask boundary extraction: connected components, Moore-neighbor contour
//! tracing, convex hulls.

use crate::grid::Grid;

/// Largest 8-connected foreground component of `mask`, or an all-false grid
/// when the mask is empty.
pub fn largest_component(mask: &Grid<bool>) -> Grid<bool> {
    let (w, h) = (mask.width(), mask.height());
    let mut labels: Grid<u32> = Grid::filled(w, h, 0);
    let mut sizes = vec![0usize]; // index 0 unused (background)
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.at(x, y) || labels.at(x, y) != 0 {
                continue;
            }
            let id = sizes.len() as u32;
            sizes.push(0);
            stack.push((x, y));
            labels.set(x, y, id);
            while let Some((cx, cy)) = stack.pop() {
                sizes[id as usize] += 1;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                        if mask.in_bounds(nx, ny) {
                            let (nx, ny) = (nx as usize, ny as usize);
                            if mask.at(nx, ny) && labels.at(nx, ny) == 0 {
                                labels.set(nx, ny, id);
                                stack.push((nx, ny));
                            }
                        }
                    }
                }
            }
        }
    }
    let best = (1..sizes.len()).max_by_key(|&i| (sizes[i], std::cmp::Reverse(i)));
    match best {
        Some(id) => labels.map(|&l| l == id as u32),
        None => Grid::filled(w, h, false),
    }
}

/// Ordered closed outer boundary of the largest component of `mask`
/// (Moore-neighbor tracing with Jacob's stopping criterion, clockwise in
/// image coordinates). The first point is not repeated at the end. Empty
/// mask yields an empty contour; a single pixel yields a one-point contour.
pub fn trace_contour(mask: &Grid<bool>) -> Vec<(i32, i32)> {
    let comp = largest_component(mask);
    let (w, h) = (comp.width(), comp.height());
    let start = comp
        .iter_cells()
        .find(|&(_, _, &v)| v)
        .map(|(x, y, _)| (x as i32, y as i32));
    let Some(start) = start else {
        return Vec::new();
    };

    // Moore neighborhood, clockwise starting from west (y grows downward).
    const NBR: [(i32, i32); 8] = [
        (-1, 0),
        (-1, -1),
        (0, -1),
        (1, -1),
        (1, 0),
        (1, 1),
        (0, 1),
        (-1, 1),
    ];
    let at = |p: (i32, i32)| -> bool {
        comp.in_bounds(p.0 as i64, p.1 as i64) && comp.at(p.0 as usize, p.1 as usize)
    };
    let dir_of = |from: (i32, i32), to: (i32, i32)| -> usize {
        NBR.iter()
            .position(|&(dx, dy)| (from.0 + dx, from.1 + dy) == to)
            .expect("backtrack is always a neighbor")
    };

    // Raster order guarantees the west neighbor of the start is background.
    let initial_backtrack = (start.0 - 1, start.1);
    let mut contour = vec![start];
    let mut cur = start;
    let mut backtrack = initial_backtrack;
    let limit = 4 * (w * h) + 8;
    for _ in 0..limit {
        let bt_idx = dir_of(cur, backtrack);
        let mut advanced = false;
        for step in 1..=8 {
            let idx = (bt_idx + step) % 8;
            let cand = (cur.0 + NBR[idx].0, cur.1 + NBR[idx].1);
            if at(cand) {
                // The neighbor scanned just before `cand` is background and
                // becomes the next backtrack point.
                let prev = (bt_idx + step - 1) % 8;
                backtrack = (cur.0 + NBR[prev].0, cur.1 + NBR[prev].1);
                cur = cand;
                contour.push(cur);
                advanced = true;
                break;
            }
        }
        if !advanced {
            break; // isolated single pixel
        }
        if cur == start && backtrack == initial_backtrack {
            contour.pop(); // do not repeat the start point
            break;
        }
    }
    // Defensive: if the walk re-entered the start without matching the
    // backtrack (possible on 1-px-wide appendages), drop the duplicate.
    if contour.len() > 1 && contour.last() == Some(&start) {
        contour.pop();
    }
    contour
}

/// Convex hull of a point set (Andrew monotone chain). Returns fewer than 3
/// points for degenerate input.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let n = pts.len();
    if n < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Unsigned polygon area by the shoelace formula.
pub fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % poly.len()];
        acc += x0 * y1 - x1 * y0;
    }
    acc.abs() * 0.5
}
