// Slow, obviously-correct reference implementations shared by the
// integration tests and the acceptance runner.
#![allow(dead_code)]

use mocaplab::imaging::{BinaryImage, Metric};
use mocaplab::render::{point_in_triangle, ScreenTriangle};
use mocaplab::{Mat4, PoseState, SkeletonModel};
use rand::Rng;

/// Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(m: &Mat4) -> Option<Mat4> {
    let mut a = m.0;
    let mut inv = Mat4::IDENTITY.0;
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for k in 0..4 {
            a[col][k] /= d;
            inv[col][k] /= d;
        }
        for r in 0..4 {
            if r != col {
                let f = a[r][col];
                for k in 0..4 {
                    a[r][k] -= f * a[col][k];
                    inv[r][k] -= f * inv[col][k];
                }
            }
        }
    }
    Some(Mat4(inv))
}

/// Global transform of every bone by re-walking the parent chain from the
/// root, without reusing any intermediate product.
pub fn recursive_globals(model: &SkeletonModel, locals: &[Mat4]) -> Vec<Mat4> {
    fn global(model: &SkeletonModel, locals: &[Mat4], i: usize) -> Mat4 {
        match model.bones()[i].parent {
            Some(p) => global(model, locals, p).multiply(&locals[i]),
            None => locals[i],
        }
    }
    (0..locals.len()).map(|i| global(model, locals, i)).collect()
}

/// Uniform pose inside the joint limits, with the root near the origin.
pub fn random_pose(model: &SkeletonModel, rng: &mut impl Rng) -> PoseState {
    PoseState(
        model
            .limits()
            .iter()
            .map(|l| {
                let (lo, hi) = (l.lo.max(-3000.0), l.hi.min(3000.0));
                if hi > lo {
                    rng.gen_range(lo..=hi)
                } else {
                    lo
                }
            })
            .collect(),
    )
}

/// Distance from every pixel to every edge pixel, keeping the minimum.
pub fn brute_distance(edges: &BinaryImage, metric: Metric) -> Vec<f64> {
    let (w, h) = (edges.width, edges.height);
    let pts: Vec<(usize, usize)> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| edges.get(x, y)).collect();
    (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            pts.iter()
                .map(|&(ex, ey)| metric.between(x as f64 - ex as f64, y as f64 - ey as f64))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub fn random_mask(w: usize, h: usize, density: f64, rng: &mut impl Rng) -> BinaryImage {
    BinaryImage::from_fn(w, h, |_, _| rng.gen_bool(density))
}

/// Pixels whose integer sample point passes the inside test.
pub fn exhaustive_fill(t: &ScreenTriangle, w: usize, h: usize) -> Vec<bool> {
    (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| point_in_triangle(x as f64, y as f64, t))
        .collect()
}

/// Classic painter's algorithm: draw far to near, nearer parts overwrite.
pub fn painter_labels(tris: &[ScreenTriangle], w: usize, h: usize) -> Vec<u8> {
    let mut order: Vec<&ScreenTriangle> = tris.iter().collect();
    order.sort_by(|a, b| b.depth.total_cmp(&a.depth));
    let mut out = vec![0u8; w * h];
    for t in order {
        for (i, inside) in exhaustive_fill(t, w, h).into_iter().enumerate() {
            if inside {
                out[i] = t.label;
            }
        }
    }
    out
}

/// Checks a rasterized line against the ideal segment: one pixel per step
/// of the major axis, each within half a pixel of the true line along the
/// minor axis, both endpoints included, 8-connected.
pub fn dda_consistent(p0: (i64, i64), p1: (i64, i64), pixels: &[(i64, i64)]) -> Result<(), String> {
    let (dx, dy) = (p1.0 - p0.0, p1.1 - p0.1);
    let steps = dx.abs().max(dy.abs());
    if pixels.len() as i64 != steps + 1 {
        return Err(format!("{} pixels for {} steps", pixels.len(), steps));
    }
    if !pixels.contains(&p0) || !pixels.contains(&p1) {
        return Err("missing endpoint".into());
    }
    for w in pixels.windows(2) {
        if (w[1].0 - w[0].0).abs() > 1 || (w[1].1 - w[0].1).abs() > 1 || w[0] == w[1] {
            return Err(format!("not 8-connected at {:?}", w));
        }
    }
    for &(x, y) in pixels {
        // twice the minor-axis offset from the line, scaled by the major extent
        let cross = 2 * ((x - p0.0) * dy - (y - p0.1) * dx);
        if cross.abs() > steps.max(1) {
            return Err(format!("({x}, {y}) is more than half a pixel off"));
        }
    }
    Ok(())
}
