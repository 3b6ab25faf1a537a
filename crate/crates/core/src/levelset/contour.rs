//! Marching-squares extraction of `{u − θ ≡ 0 mod 2π}`.

use std::collections::HashMap;
use std::f64::consts::TAU;

use super::{angle_increment, AnnularGrid, ScalarField};
use crate::vec2::Vec2;

/// Crossing point on a grid edge: edge id and ordinal of the crossing
/// along the edge in its canonical direction.
type Key = (usize, i64);

/// Polylines approximating the spiral curve, ordered by decreasing length.
/// Cells with an inactive corner are skipped.
pub fn extract_contour(u: &ScalarField, grid: &AnnularGrid) -> Vec<Vec<Vec2>> {
    let n = grid.n;
    let mut segments: Vec<(Key, Key, Vec2, Vec2)> = Vec::new();
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            if corners.iter().any(|&(a, b)| !grid.is_active(a, b)) {
                continue;
            }
            let x: Vec<Vec2> = corners.iter().map(|&(a, b)| grid.point(a, b)).collect();
            // lift w = u − θ around the cell starting from the principal arg
            let mut w = [0.0; 4];
            let mut theta = x[0].angle();
            w[0] = u.values[grid.idx(i, j)] - theta;
            for c in 1..4 {
                theta += angle_increment(x[c - 1], x[c]);
                let (a, b) = corners[c];
                w[c] = u.values[grid.idx(a, b)] - theta;
            }
            cell_segments(grid, (i, j), &x, &w, &mut segments);
        }
    }
    stitch(segments)
}

/// Cell edges as (corner p, corner q, edge id), oriented left to right or
/// bottom to top.
fn cell_edges(n: usize, i: usize, j: usize) -> [(usize, usize, usize); 4] {
    let k = j * n + i;
    [
        (0, 1, 2 * k),
        (1, 2, 2 * (k + 1) + 1),
        (3, 2, 2 * (k + n)),
        (0, 3, 2 * k + 1),
    ]
}

fn cell_segments(
    grid: &AnnularGrid,
    (i, j): (usize, usize),
    x: &[Vec2],
    w: &[f64; 4],
    out: &mut Vec<(Key, Key, Vec2, Vec2)>,
) {
    let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let m_lo = (lo / TAU).floor() as i64 + 1;
    let m_hi = (hi / TAU).floor() as i64;
    let edges = cell_edges(grid.n, i, j);
    for m in m_lo..=m_hi {
        let level = m as f64 * TAU;
        let mut hits: Vec<(Key, Vec2)> = Vec::with_capacity(4);
        for &(p, q, id) in &edges {
            let (wp, wq) = (w[p], w[q]);
            if (wp >= level) == (wq >= level) {
                continue;
            }
            let t = (level - wp) / (wq - wp);
            let pt = x[p] + (x[q] - x[p]) * t;
            // ordinal among the levels crossed on this edge, from p to q
            let (a, b) = (wp.min(wq), wp.max(wq));
            let first = (a / TAU).floor() as i64 + 1;
            let last = (b / TAU).floor() as i64;
            let ord = if wp < wq { m - first } else { last - m };
            hits.push(((id, ord), pt));
        }
        match hits.len() {
            2 => out.push((hits[0].0, hits[1].0, hits[0].1, hits[1].1)),
            4 => {
                // saddle: pair by the sign of the cell-center average
                let center = w.iter().sum::<f64>() / 4.0 >= level;
                let corner0 = w[0] >= level;
                let (a, b, c, d) = (&hits[0], &hits[1], &hits[2], &hits[3]);
                // hits are in edge order: bottom, right, top, left
                if center == corner0 {
                    out.push((a.0, b.0, a.1, b.1));
                    out.push((c.0, d.0, c.1, d.1));
                } else {
                    out.push((a.0, d.0, a.1, d.1));
                    out.push((b.0, c.0, b.1, c.1));
                }
            }
            _ => {}
        }
    }
}

fn stitch(segments: Vec<(Key, Key, Vec2, Vec2)>) -> Vec<Vec<Vec2>> {
    let mut at: HashMap<Key, Vec<usize>> = HashMap::new();
    let mut point: HashMap<Key, Vec2> = HashMap::new();
    for (s, &(a, b, pa, pb)) in segments.iter().enumerate() {
        at.entry(a).or_default().push(s);
        at.entry(b).or_default().push(s);
        point.entry(a).or_insert(pa);
        point.entry(b).or_insert(pb);
    }
    let mut used = vec![false; segments.len()];
    let other = |s: usize, k: Key| {
        if segments[s].0 == k {
            segments[s].1
        } else {
            segments[s].0
        }
    };
    let next = |k: Key, used: &[bool]| at[&k].iter().copied().find(|&s| !used[s]);
    let mut lines = Vec::new();
    for s0 in 0..segments.len() {
        if used[s0] {
            continue;
        }
        used[s0] = true;
        let (a, b, _, _) = segments[s0];
        let mut fwd = vec![a, b];
        let mut k = b;
        while let Some(s) = next(k, &used) {
            used[s] = true;
            k = other(s, k);
            fwd.push(k);
        }
        let mut back = Vec::new();
        let mut k = a;
        while let Some(s) = next(k, &used) {
            used[s] = true;
            k = other(s, k);
            back.push(k);
        }
        back.reverse();
        back.extend(fwd);
        lines.push(back.into_iter().map(|k| point[&k]).collect::<Vec<_>>());
    }
    lines.sort_by(|a, b| polyline_length(b).total_cmp(&polyline_length(a)));
    lines
}

pub fn polyline_length(p: &[Vec2]) -> f64 {
    p.windows(2).map(|w| w[0].dist(w[1])).sum()
}
