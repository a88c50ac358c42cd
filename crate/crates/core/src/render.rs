//! Software rasterization of the flat model into the packed model image.
//!
//! Parts are drawn nearest first and a pixel, once painted, is never
//! repainted, so no depth buffer is needed. Outlines are traced with
//! Bresenham lines after all fills and only mark pixels owned by their own
//! part (or still unpainted), which keeps occluded edges hidden.

use crate::camera::{CameraError, TsaiCamera};
use crate::geometry::{Mat4, Point3};
use crate::imaging::{GrayImage, ReferenceImage, RoiRect, SILHOUETTE_FLAG};
use crate::objective::FitnessComponents;
use crate::skeleton::{skin_point, trapezoid_vertices_or_fallback, SkeletonModel};

pub const LABEL_MASK: u8 = 0x7f;
pub const EDGE_FLAG: u8 = 0x80;

/// Model image: part label in bits 0-6 (0 = background), edge flag in bit 7.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl EncodedImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn label(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x] & LABEL_MASK
    }

    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] & EDGE_FLAG != 0
    }

    pub fn clear(&mut self) {
        self.data.fill(0);
    }

    /// Zeroes only the pixels inside `roi`.
    pub fn clear_roi(&mut self, roi: &RoiRect) {
        let r = roi.clamp_to(self.width, self.height);
        for y in r.y..r.y_end() {
            self.data[y * self.width + r.x..y * self.width + r.x_end()].fill(0);
        }
    }

    /// Grayscale view for inspection: label doubled, edges white.
    pub fn to_debug_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|&b| if b & EDGE_FLAG != 0 { 255 } else { (b & LABEL_MASK) * 2 })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenTriangle {
    pub v: [[f64; 2]; 3],
    pub label: u8,
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outline {
    pub p0: (i64, i64),
    pub p1: (i64, i64),
    pub label: u8,
    pub depth: f64,
}

/// Inclusive integer pixel bounds. Empty when `x_lo > x_hi` or `y_lo > y_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Aabb {
    pub x_lo: i64,
    pub x_hi: i64,
    pub y_lo: i64,
    pub y_hi: i64,
}

impl Aabb {
    pub fn is_empty(&self) -> bool {
        self.x_lo > self.x_hi || self.y_lo > self.y_hi
    }
}

pub fn triangle_aabb(t: &ScreenTriangle, clip: &RoiRect) -> Aabb {
    let xs = t.v.map(|p| p[0]);
    let ys = t.v.map(|p| p[1]);
    let min = |a: [f64; 3]| a[0].min(a[1]).min(a[2]);
    let max = |a: [f64; 3]| a[0].max(a[1]).max(a[2]);
    let empty = Aabb { x_lo: 0, x_hi: -1, y_lo: 0, y_hi: -1 };
    if !(xs.iter().chain(&ys).all(|v| v.is_finite())) || clip.w == 0 || clip.h == 0 {
        return empty;
    }
    // saturate far-off coordinates before the integer conversion
    let lim = 1e15;
    let bx = Aabb {
        x_lo: floor_i(min(xs).clamp(-lim, lim)).max(clip.x as i64),
        x_hi: ceil_i(max(xs).clamp(-lim, lim)).min(clip.x_end() as i64 - 1),
        y_lo: floor_i(min(ys).clamp(-lim, lim)).max(clip.y as i64),
        y_hi: ceil_i(max(ys).clamp(-lim, lim)).min(clip.y_end() as i64 - 1),
    };
    if bx.is_empty() {
        empty
    } else {
        bx
    }
}

#[inline]
fn edge_fn(a: [f64; 2], b: [f64; 2], px: f64, py: f64) -> f64 {
    (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])
}

/// Boundary-inclusive inside test. Equivalent to both barycentric
/// coordinates being nonnegative with sum at most one; evaluated as three
/// edge functions so integer vertices are decided exactly.
pub fn point_in_triangle(px: f64, py: f64, t: &ScreenTriangle) -> bool {
    let [a, b, c] = t.v;
    let area = edge_fn(a, b, c[0], c[1]);
    if area == 0.0 || !area.is_finite() {
        return false;
    }
    let s = area.signum();
    s * edge_fn(a, b, px, py) >= 0.0 && s * edge_fn(b, c, px, py) >= 0.0 && s * edge_fn(c, a, px, py) >= 0.0
}

/// 8-connected line including both endpoints. Endpoints are put in
/// lexicographic order first so swapping them yields the same pixels.
pub fn bresenham(p0: (i64, i64), p1: (i64, i64)) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    bresenham_for_each(p0, p1, |x, y| out.push((x, y)));
    out
}

pub fn bresenham_for_each(p0: (i64, i64), p1: (i64, i64), mut f: impl FnMut(i64, i64)) {
    let (p0, p1) = if p1 < p0 { (p1, p0) } else { (p0, p1) };
    let (mut x, mut y) = p0;
    let dx = (p1.0 - p0.0).abs();
    let dy = -(p1.1 - p0.1).abs();
    let sx = if p0.0 < p1.0 { 1 } else { -1 };
    let sy = if p0.1 < p1.1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        f(x, y);
        if (x, y) == p1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Model-side accumulation target for fused rendering.
pub struct Accumulator<'a> {
    pub reference: &'a ReferenceImage,
    pub comps: &'a mut FitnessComponents,
}

/// Renders triangles and outlines into `out` in reverse painter order.
///
/// `out` must be zero inside `roi`. Triangles and outlines are sorted by
/// depth with a stable sort, so equal depths keep input order (callers pass
/// parts in index order). With an accumulator, every newly painted pixel
/// and every newly flagged edge updates the model-side components; the
/// reference area is left to the caller.
pub fn rasterize_pose(
    triangles: &[ScreenTriangle],
    outlines: &[Outline],
    roi: &RoiRect,
    out: &mut EncodedImage,
    accum: Option<Accumulator<'_>>,
) {
    let mut tri_order: Vec<usize> = (0..triangles.len()).collect();
    tri_order.sort_by(|&a, &b| triangles[a].depth.total_cmp(&triangles[b].depth));
    let mut line_order: Vec<usize> = (0..outlines.len()).collect();
    line_order.sort_by(|&a, &b| outlines[a].depth.total_cmp(&outlines[b].depth));
    rasterize_in_order(
        tri_order.iter().map(|&i| &triangles[i]),
        line_order.iter().map(|&i| &outlines[i]),
        roi,
        out,
        accum,
    );
}

fn rasterize_in_order<'t>(
    triangles: impl Iterator<Item = &'t ScreenTriangle>,
    outlines: impl Iterator<Item = &'t Outline>,
    roi: &RoiRect,
    out: &mut EncodedImage,
    mut accum: Option<Accumulator<'_>>,
) {
    let roi = roi.clamp_to(out.width, out.height);
    for t in triangles {
        fill_triangle(t, &roi, out, accum.as_mut());
    }
    let guard = 16 * out.width.max(out.height) as i64;
    let w = out.width;
    for o in outlines {
        let Some((p0, p1)) = guard_segment(o.p0, o.p1, &roi, guard) else {
            continue;
        };
        bresenham_for_each(p0, p1, |x, y| {
            if !roi.contains(x, y) {
                return;
            }
            let idx = y as usize * w + x as usize;
            let px = out.data[idx];
            let label = px & LABEL_MASK;
            if px & EDGE_FLAG != 0 || (label != 0 && label != o.label) {
                return;
            }
            if let Some(acc) = accum.as_mut() {
                if label == 0 {
                    acc.comps.add_model_pixel(acc.reference, idx);
                }
                acc.comps.add_edge_pixel(acc.reference, idx);
            }
            out.data[idx] = o.label | EDGE_FLAG;
        });
    }
}

/// Drops segments that miss the ROI and cuts segments reaching beyond a
/// guard band around the image, so a vertex projected far off-screen does
/// not cost a trace of millions of pixels. Segments inside the band are
/// returned unchanged.
fn guard_segment(p0: (i64, i64), p1: (i64, i64), roi: &RoiRect, guard: i64) -> Option<((i64, i64), (i64, i64))> {
    if p0.0.max(p1.0) < roi.x as i64
        || p0.0.min(p1.0) >= roi.x_end() as i64
        || p0.1.max(p1.1) < roi.y as i64
        || p0.1.min(p1.1) >= roi.y_end() as i64
    {
        return None;
    }
    let inside = |p: (i64, i64)| p.0.abs() <= guard && p.1.abs() <= guard;
    if inside(p0) && inside(p1) {
        return Some((p0, p1));
    }
    // Liang-Barsky against the guard square
    let (x0, y0) = (p0.0 as f64, p0.1 as f64);
    let (dx, dy) = (p1.0 as f64 - x0, p1.1 as f64 - y0);
    let g = guard as f64;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [(-dx, x0 + g), (dx, g - x0), (-dy, y0 + g), (dy, g - y0)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t0 > t1 {
        return None;
    }
    let at = |t: f64| (round_i(x0 + t * dx), round_i(y0 + t * dy));
    Some((at(t0), at(t1)))
}

/// Floor and ceil of values already known to lie well inside the i64 range.
fn floor_i(v: f64) -> i64 {
    let i = v as i64;
    i - ((i as f64) > v) as i64
}

/// Round half up to an integer, saturating far outside any image.
fn round_i(v: f64) -> i64 {
    floor_i(v.clamp(-1e15, 1e15) + 0.5)
}

fn ceil_i(v: f64) -> i64 {
    let i = v as i64;
    i + ((i as f64) < v) as i64
}

/// Per-triangle constants for the inside test. Same arithmetic as
/// [`point_in_triangle`], so results match it bit for bit.
struct TriSetup {
    origin: [[f64; 2]; 3],
    delta: [[f64; 2]; 3],
    sign: f64,
}

impl TriSetup {
    fn new(t: &ScreenTriangle) -> Option<Self> {
        let [a, b, c] = t.v;
        let area = edge_fn(a, b, c[0], c[1]);
        if area == 0.0 || !area.is_finite() {
            return None;
        }
        let d = |p: [f64; 2], q: [f64; 2]| [q[0] - p[0], q[1] - p[1]];
        Some(Self { origin: [a, b, c], delta: [d(a, b), d(b, c), d(c, a)], sign: area.signum() })
    }

    #[inline]
    fn inside(&self, px: f64, py: f64) -> bool {
        (0..3).all(|e| {
            let (o, d) = (self.origin[e], self.delta[e]);
            self.sign * (d[0] * (py - o[1]) - d[1] * (px - o[0])) >= 0.0
        })
    }
}

/// Row-span setup of one triangle clipped to its AABB.
struct SpanSetup {
    tri: TriSetup,
    bx: Aabb,
    /// Edges bounding the span from the left or right, as (x, y, dx/dy).
    left: [(f64, f64, f64); 3],
    right: [(f64, f64, f64); 3],
    /// Horizontal edges as (signed dx, y); they only empty whole rows.
    flat: [(f64, f64); 3],
    counts: [usize; 3],
    /// Bound on the rounding error of any crossing; pixels farther than
    /// this from both crossings are decided without the exact test.
    tol: f64,
    exact_only: bool,
}

impl SpanSetup {
    fn new(t: &ScreenTriangle, roi: &RoiRect) -> Option<Self> {
        let bx = triangle_aabb(t, roi);
        if bx.is_empty() {
            return None;
        }
        let tri = TriSetup::new(t)?;
        let s = tri.sign;
        let mut out = Self {
            left: [(0.0, 0.0, 0.0); 3],
            right: [(0.0, 0.0, 0.0); 3],
            flat: [(0.0, 0.0); 3],
            counts: [0; 3],
            tol: 0.0,
            exact_only: false,
            bx,
            tri,
        };
        for e in 0..3 {
            let (o, d) = (out.tri.origin[e], out.tri.delta[e]);
            let k = -s * d[1];
            if k == 0.0 {
                out.flat[out.counts[2]] = (s * d[0], o[1]);
                out.counts[2] += 1;
                continue;
            }
            let inv = d[0] / d[1];
            let dy = (bx.y_lo as f64 - o[1]).abs().max((bx.y_hi as f64 - o[1]).abs());
            out.tol = out.tol.max((o[0].abs() + inv.abs() * dy + 1.0) * 1e-9);
            if k > 0.0 {
                out.left[out.counts[0]] = (o[0], o[1], inv);
                out.counts[0] += 1;
            } else {
                out.right[out.counts[1]] = (o[0], o[1], inv);
                out.counts[1] += 1;
            }
        }
        out.exact_only = !(out.tol <= 0.25);
        Some(out)
    }

    /// Crossing span of row `py`, or `None` when the row misses.
    #[inline]
    fn span(&self, py: f64) -> Option<(f64, f64)> {
        if self.flat[..self.counts[2]].iter().any(|&(sd, oy)| sd * (py - oy) < 0.0) {
            return None;
        }
        let (mut lo, mut hi) = (self.bx.x_lo as f64, self.bx.x_hi as f64);
        for &(ox, oy, inv) in &self.left[..self.counts[0]] {
            let cross = ox + inv * (py - oy);
            if cross > lo {
                lo = cross;
            }
        }
        for &(ox, oy, inv) in &self.right[..self.counts[1]] {
            let cross = ox + inv * (py - oy);
            if cross < hi {
                hi = cross;
            }
        }
        // both ends now lie within a few pixels of the AABB
        (lo <= hi + 2.0).then_some((lo, hi))
    }
}

/// Candidate pixels `x0..=x1` of one row; `s0..=s1` (possibly empty) is
/// decided inside without the exact test.
#[derive(Clone, Copy)]
struct RowCover {
    x0: i64,
    x1: i64,
    s0: i64,
    s1: i64,
}

/// Fills one triangle: pixels clear of both row crossings are painted
/// directly, the few near a crossing take the exact inside test.
fn fill_triangle(t: &ScreenTriangle, roi: &RoiRect, out: &mut EncodedImage, accum: Option<&mut Accumulator<'_>>) {
    let Some(st) = SpanSetup::new(t, roi) else {
        return;
    };
    let w = out.width;
    let sil = accum.as_ref().map(|a| &a.reference.data[..]);
    let (mut area, mut overlap) = (0u64, 0u64);
    let mut paint = |row: &mut [u8], start: usize, x: usize| {
        if row[x] == 0 {
            row[x] = t.label;
            area += 1;
            if let Some(r) = sil {
                overlap += (r[start + x] & SILHOUETTE_FLAG != 0) as u64;
            }
        }
    };
    for y in st.bx.y_lo..=st.bx.y_hi {
        let py = y as f64;
        let Some((lo, hi)) = st.span(py) else {
            continue;
        };
        let c = if st.exact_only {
            let x0 = (floor_i(lo) - 1).max(st.bx.x_lo);
            RowCover { x0, x1: (ceil_i(hi) + 1).min(st.bx.x_hi), s0: x0, s1: x0 - 1 }
        } else {
            let x0 = ceil_i(lo - st.tol).max(st.bx.x_lo);
            let x1 = floor_i(hi + st.tol).min(st.bx.x_hi);
            let s0 = ceil_i(lo + st.tol).max(x0);
            RowCover { x0, x1, s0, s1: floor_i(hi - st.tol).min(x1).max(s0 - 1) }
        };
        if c.x0 > c.x1 {
            continue;
        }
        let start = y as usize * w;
        let row = &mut out.data[start..start + w];
        let (x0, x1) = (c.x0 as usize, c.x1 as usize);
        let (s0, s1) = if c.s0 <= c.s1 { (c.s0 as usize, c.s1 as usize + 1) } else { (x1 + 1, x1 + 1) };
        for x in (x0..s0.min(x1 + 1)).chain(s1..x1 + 1) {
            if row[x] == 0 && st.tri.inside(x as f64, py) {
                paint(row, start, x);
            }
        }
        for x in s0..s1 {
            paint(row, start, x);
        }
    }
    if let Some(acc) = accum {
        acc.comps.add_model_pixels(area, overlap);
    }
}

/// One part's screen footprint: trapezoid corners in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPart {
    pub corners: [[f64; 2]; 4],
    pub label: u8,
    pub depth: f64,
}

impl ProjectedPart {
    pub fn triangles(&self) -> [ScreenTriangle; 2] {
        let [v1, v2, v3, v4] = self.corners;
        [
            ScreenTriangle { v: [v1, v2, v3], label: self.label, depth: self.depth },
            ScreenTriangle { v: [v1, v3, v4], label: self.label, depth: self.depth },
        ]
    }

    pub fn outlines(&self) -> [Outline; 4] {
        let r = |p: [f64; 2]| (round_i(p[0]), round_i(p[1]));
        let c = self.corners.map(r);
        let seg = |i: usize, j: usize| Outline { p0: c[i], p1: c[j], label: self.label, depth: self.depth };
        [seg(0, 1), seg(1, 2), seg(2, 3), seg(3, 0)]
    }
}

/// Camera with its derived quantities cached for repeated projection.
#[derive(Debug, Clone, Copy)]
pub struct CameraView {
    pub cam: TsaiCamera,
    pub extrinsic: Mat4,
    pub center: Point3,
}

impl CameraView {
    pub fn new(cam: TsaiCamera) -> Self {
        Self { cam, extrinsic: cam.extrinsic(), center: cam.center() }
    }

    pub fn width(&self) -> usize {
        self.cam.img_w as usize
    }

    pub fn height(&self) -> usize {
        self.cam.img_h as usize
    }
}

/// Projects every flat part of the posed model. Fails if any trapezoid
/// corner lies behind the camera.
pub fn project_parts(model: &SkeletonModel, globals: &[Mat4], view: &CameraView) -> Result<Vec<ProjectedPart>, CameraError> {
    let mut out = Vec::with_capacity(model.parts().len());
    for part in model.parts() {
        let w = &globals[part.bone];
        let verts = trapezoid_vertices_or_fallback(part, w, view.center);
        let mid = (skin_point(part.t_p, w) + skin_point(part.b_p, w)).scaled(0.5);
        let depth = view.extrinsic.transform_point(mid).z;
        let mut corners = [[0.0; 2]; 4];
        for (c, v) in corners.iter_mut().zip(verts) {
            let p = view.cam.project_camera(view.extrinsic.transform_point(v))?;
            *c = [p.x, p.y];
        }
        out.push(ProjectedPart { corners, label: part.label, depth });
    }
    Ok(out)
}

/// Renders projected parts. Part order is kept for equal depths.
pub fn render_parts(parts: &[ProjectedPart], roi: &RoiRect, out: &mut EncodedImage, accum: Option<Accumulator<'_>>) {
    // a stable sort of parts gives the same order as sorting their
    // triangles and outlines, which share the part depth
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|&a, &b| parts[a].depth.total_cmp(&parts[b].depth));
    let tris: Vec<ScreenTriangle> = order.iter().flat_map(|&i| parts[i].triangles()).collect();
    let lines: Vec<Outline> = order.iter().flat_map(|&i| parts[i].outlines()).collect();
    rasterize_in_order(tris.iter(), lines.iter(), roi, out, accum);
}

/// Full-image render of a pose into a fresh model image.
pub fn render_pose(model: &SkeletonModel, globals: &[Mat4], view: &CameraView) -> Result<EncodedImage, CameraError> {
    let parts = project_parts(model, globals, view)?;
    let mut img = EncodedImage::new(view.width(), view.height());
    let roi = RoiRect::full(img.width, img.height);
    render_parts(&parts, &roi, &mut img, None);
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tri(v: [[f64; 2]; 3], label: u8, depth: f64) -> ScreenTriangle {
        ScreenTriangle { v, label, depth }
    }

    fn fill_only(ts: &[ScreenTriangle], w: usize, h: usize) -> EncodedImage {
        let mut img = EncodedImage::new(w, h);
        rasterize_pose(ts, &[], &RoiRect::full(w, h), &mut img, None);
        img
    }

    #[test]
    fn aabb_cases() {
        let t = tri([[1.0, 5.0], [3.0, 2.0], [2.0, 7.0]], 1, 0.0);
        let full = RoiRect::full(10, 10);
        assert_eq!(triangle_aabb(&t, &full), Aabb { x_lo: 1, x_hi: 3, y_lo: 2, y_hi: 7 });
        let far = tri([[20.0, 20.0], [25.0, 20.0], [22.0, 30.0]], 1, 0.0);
        assert!(triangle_aabb(&far, &full).is_empty());
        let clip = RoiRect { x: 2, y: 3, w: 5, h: 2 };
        assert_eq!(triangle_aabb(&t, &clip), Aabb { x_lo: 2, x_hi: 3, y_lo: 3, y_hi: 4 });
    }

    #[test]
    fn inside_test_cases() {
        let t = tri([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]], 1, 0.0);
        assert!(point_in_triangle(4.0 / 3.0, 4.0 / 3.0, &t));
        assert!(!point_in_triangle(5.0, 5.0, &t));
        assert!(point_in_triangle(0.0, 0.0, &t));
        assert!(point_in_triangle(2.0, 2.0, &t));
        let flat = tri([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], 1, 0.0);
        assert!(!point_in_triangle(1.0, 1.0, &flat));
    }

    #[test]
    fn bresenham_cases() {
        assert_eq!(bresenham((0, 0), (0, 0)), vec![(0, 0)]);
        assert_eq!(bresenham((0, 0), (3, 0)), vec![(0, 0), (1, 0), (2, 0), (3, 0)]);
        let l = bresenham((0, 0), (5, 3));
        assert_eq!(l.len(), 6);
        assert_eq!(l, vec![(0, 0), (1, 1), (2, 1), (3, 2), (4, 2), (5, 3)]);
        let mut a = bresenham((7, -2), (1, 4));
        let mut b = bresenham((1, 4), (7, -2));
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn ten_pixel_triangle() {
        let img = fill_only(&[tri([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]], 5, 1.0)], 8, 8);
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(img.label(x, y) == 5, x + y <= 3, "pixel {x},{y}");
            }
        }
        assert_eq!(img.data.iter().filter(|&&b| b != 0).count(), 10);
    }

    #[test]
    fn nearer_part_wins_and_empty_scene() {
        let a = tri([[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]], 1, 2.0);
        let b = tri([[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]], 2, 1.0);
        let img = fill_only(&[a, b], 8, 8);
        assert_eq!(img.label(1, 1), 2);
        assert!(fill_only(&[], 8, 8).data.iter().all(|&b| b == 0));
    }

    #[test]
    fn outline_respects_occlusion() {
        let near = tri([[0.0, 0.0], [7.0, 0.0], [0.0, 7.0]], 3, 1.0);
        let line = Outline { p0: (0, 2), p1: (7, 2), label: 4, depth: 2.0 };
        let mut img = EncodedImage::new(8, 8);
        rasterize_pose(&[near], &[line], &RoiRect::full(8, 8), &mut img, None);
        // pixels owned by the nearer part keep no edge; the rest become label 4 edges
        assert!(!img.is_edge(2, 2) && img.label(2, 2) == 3);
        assert!(img.is_edge(6, 2) && img.label(6, 2) == 4);
    }

    fn arb_triangle() -> impl Strategy<Value = ScreenTriangle> {
        (prop::array::uniform6(-8.0f64..40.0), 1u8..127, 0.0f64..10.0).prop_map(|(c, l, d)| {
            tri([[c[0], c[1]], [c[2], c[3]], [c[4], c[5]]], l, d)
        })
    }

    proptest! {
        #[test]
        fn fill_matches_exhaustive_test(t in arb_triangle()) {
            let img = fill_only(&[t], 32, 32);
            for y in 0..32 {
                for x in 0..32 {
                    let want = point_in_triangle(x as f64, y as f64, &t);
                    prop_assert_eq!(img.label(x, y) != 0, want);
                }
            }
        }

        #[test]
        fn integer_triangles_match_exhaustive_test(c in prop::array::uniform6(-4i32..36)) {
            let t = tri([[c[0] as f64, c[1] as f64], [c[2] as f64, c[3] as f64], [c[4] as f64, c[5] as f64]], 9, 0.0);
            let img = fill_only(&[t], 32, 32);
            for y in 0..32 {
                for x in 0..32 {
                    prop_assert_eq!(img.label(x, y) != 0, point_in_triangle(x as f64, y as f64, &t));
                }
            }
        }

        #[test]
        fn quarter_pixel_triangles_match_exhaustive_test(c in prop::array::uniform6(-16i32..144)) {
            let q = |i: usize| c[i] as f64 / 4.0;
            let t = tri([[q(0), q(1)], [q(2), q(3)], [q(4), q(5)]], 9, 0.0);
            let img = fill_only(&[t], 32, 32);
            for y in 0..32 {
                for x in 0..32 {
                    prop_assert_eq!(img.label(x, y) != 0, point_in_triangle(x as f64, y as f64, &t));
                }
            }
        }

        #[test]
        fn far_vertices_match_exhaustive_test(
            far in prop::array::uniform2(-1e7f64..1e7),
            near in prop::array::uniform4(0.0f64..32.0),
        ) {
            let t = tri([far, [near[0], near[1]], [near[2], near[3]]], 9, 0.0);
            let img = fill_only(&[t], 32, 32);
            for y in 0..32 {
                for x in 0..32 {
                    prop_assert_eq!(img.label(x, y) != 0, point_in_triangle(x as f64, y as f64, &t));
                }
            }
        }
    }
}
