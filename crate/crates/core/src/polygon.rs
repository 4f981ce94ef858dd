//! Simple polygons standing in for segmentation masks.
//!
//! Moments are integrated exactly over the edges (Green's theorem), so the
//! mean and covariance of the uniform density over the interior carry no
//! discretization error.

use crate::error::{GbbError, Result};
use crate::gauss::Obb;

pub type Point = [f64; 2];

/// Area, centroid and covariance `[a, b, c]` of the uniform density over a
/// polygon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub area: f64,
    pub centroid: Point,
    pub cov: [f64; 3],
}

/// Counter-clockwise simple polygon with at least three vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonMask {
    vertices: Vec<Point>,
}

impl PolygonMask {
    /// Builds a mask from a vertex ring.
    ///
    /// A repeated closing vertex and consecutive duplicates are dropped, and
    /// clockwise rings are reversed. Rings with fewer than three distinct
    /// vertices, non-finite coordinates or zero area are rejected.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GbbError::DegeneratePolygon("non-finite coordinate".into()));
        }
        let mut vs: Vec<Point> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if vs.last() != Some(&v) {
                vs.push(v);
            }
        }
        while vs.len() > 1 && vs.first() == vs.last() {
            vs.pop();
        }
        if vs.len() < 3 {
            return Err(GbbError::DegeneratePolygon(format!(
                "{} distinct vertices, need at least 3",
                vs.len()
            )));
        }
        let area = signed_area(&vs);
        if area == 0.0 || !area.is_finite() {
            return Err(GbbError::DegeneratePolygon("zero area".into()));
        }
        if area < 0.0 {
            vs.reverse();
        }
        Ok(Self { vertices: vs })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn bounds(&self) -> (Point, Point) {
        bounds_of(&self.vertices)
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Result<Self> {
        Self::new(self.vertices.iter().map(|&p| f(p)).collect())
    }

    /// Exact moments of the uniform density over the interior.
    pub fn moments(&self) -> Moments {
        // two passes: centroid first, then second moments about it
        let vs = &self.vertices;
        let n = vs.len();
        let o = vs[0];
        let (mut a2, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = sub(vs[i], o);
            let q = sub(vs[(i + 1) % n], o);
            let cr = cross(p, q);
            a2 += cr;
            sx += (p[0] + q[0]) * cr;
            sy += (p[1] + q[1]) * cr;
        }
        let area = 0.5 * a2;
        let centroid = [o[0] + sx / (3.0 * a2), o[1] + sy / (3.0 * a2)];

        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = sub(vs[i], centroid);
            let q = sub(vs[(i + 1) % n], centroid);
            let cr = cross(p, q);
            sxx += (p[0] * p[0] + p[0] * q[0] + q[0] * q[0]) * cr;
            syy += (p[1] * p[1] + p[1] * q[1] + q[1] * q[1]) * cr;
            sxy += (p[0] * q[1] + 2.0 * p[0] * p[1] + 2.0 * q[0] * q[1] + q[0] * p[1]) * cr;
        }
        Moments {
            area,
            centroid,
            cov: [sxx / (12.0 * area), syy / (12.0 * area), sxy / (24.0 * area)],
        }
    }

    pub fn is_convex(&self) -> bool {
        let vs = &self.vertices;
        let n = vs.len();
        (0..n).all(|i| orient(vs[i], vs[(i + 1) % n], vs[(i + 2) % n]) >= 0.0)
    }

    /// True when no two non-adjacent edges touch and adjacent edges only
    /// share their common vertex.
    pub fn is_simple(&self) -> bool {
        let vs = &self.vertices;
        let n = vs.len();
        for i in 0..n {
            let (p1, p2) = (vs[i], vs[(i + 1) % n]);
            for j in i + 1..n {
                let (q1, q2) = (vs[j], vs[(j + 1) % n]);
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    // folding back onto the previous edge
                    let shared = if j == i + 1 { p2 } else { p1 };
                    let (u, v) = if j == i + 1 { (p1, q2) } else { (p2, q1) };
                    if orient(u, shared, v) == 0.0 && dot(sub(u, shared), sub(v, shared)) > 0.0 {
                        return false;
                    }
                } else if segments_touch(p1, p2, q1, q2) {
                    return false;
                }
            }
        }
        true
    }

    /// Crossing-number inside test. A point exactly on a crossing with
    /// larger x counts as inside for left edges and outside for right edges,
    /// matching the raster span rule.
    pub fn contains(&self, p: Point) -> bool {
        let vs = &self.vertices;
        let n = vs.len();
        let mut inside = false;
        for i in 0..n {
            let (a, b) = (vs[i], vs[(i + 1) % n]);
            if let Some(x) = edge_crossing(a, b, p[1]) {
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// x coordinates where the horizontal line `y` crosses the boundary,
    /// sorted ascending.
    pub(crate) fn crossings(&self, y: f64, out: &mut Vec<f64>) {
        out.clear();
        let vs = &self.vertices;
        let n = vs.len();
        for i in 0..n {
            if let Some(x) = edge_crossing(vs[i], vs[(i + 1) % n], y) {
                out.push(x);
            }
        }
        out.sort_by(f64::total_cmp);
    }

    /// Convex hull, counter-clockwise, without collinear points.
    pub fn convex_hull(&self) -> Vec<Point> {
        convex_hull(&self.vertices)
    }

    /// Minimum-area enclosing rectangle by rotating calipers over the hull.
    pub fn min_area_rect(&self) -> Result<Obb> {
        let hull = self.convex_hull();
        if hull.len() < 3 {
            return Err(GbbError::DegeneratePolygon("collinear vertices".into()));
        }
        Ok(rotating_calipers(&hull))
    }

    /// Ear-clipping triangulation; `None` when the ring is not simple
    /// enough for ear clipping to finish.
    pub fn triangulate(&self) -> Option<Vec<[Point; 3]>> {
        ear_clip(&self.vertices)
    }

    /// Exact area of `self ∩ other` for simple polygons.
    ///
    /// Convex pairs are clipped directly; otherwise both polygons are
    /// triangulated and the pairwise convex intersections summed. Returns
    /// `None` when either polygon cannot be triangulated.
    pub fn intersection_area(&self, other: &Self) -> Option<f64> {
        let (amin, amax) = self.bounds();
        let (bmin, bmax) = other.bounds();
        if amax[0] <= bmin[0] || bmax[0] <= amin[0] || amax[1] <= bmin[1] || bmax[1] <= amin[1] {
            return Some(0.0);
        }
        if self.is_convex() && other.is_convex() {
            return Some(convex_intersection_area(&self.vertices, &other.vertices));
        }
        let ta = self.triangulate()?;
        let tb = other.triangulate()?;
        let mut total = 0.0;
        for t in &ta {
            let (tmin, tmax) = bounds_of(t);
            for u in &tb {
                let (umin, umax) = bounds_of(u);
                if tmax[0] <= umin[0] || umax[0] <= tmin[0] || tmax[1] <= umin[1] || umax[1] <= tmin[1] {
                    continue;
                }
                total += signed_area(&clip_convex(t, u)).max(0.0);
            }
        }
        Some(total)
    }
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Twice the signed area of triangle `abc`; positive for a left turn.
fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross(sub(b, a), sub(c, a))
}

fn edge_crossing(a: Point, b: Point, y: f64) -> Option<f64> {
    if (a[1] > y) != (b[1] > y) {
        Some(a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]))
    } else {
        None
    }
}

fn on_segment(p: Point, q: Point, r: Point) -> bool {
    r[0] >= p[0].min(q[0]) && r[0] <= p[0].max(q[0]) && r[1] >= p[1].min(q[1]) && r[1] <= p[1].max(q[1])
}

fn segments_touch(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Shoelace area, positive for counter-clockwise rings.
pub fn signed_area(vs: &[Point]) -> f64 {
    let n = vs.len();
    if n < 3 {
        return 0.0;
    }
    let o = vs[0];
    let mut s = 0.0;
    for i in 1..n - 1 {
        s += cross(sub(vs[i], o), sub(vs[i + 1], o));
    }
    0.5 * s
}

pub fn bounds_of(vs: &[Point]) -> (Point, Point) {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for v in vs {
        for k in 0..2 {
            min[k] = min[k].min(v[k]);
            max[k] = max[k].max(v[k]);
        }
    }
    (min, max)
}

/// Sutherland-Hodgman: clips `subject` against the convex counter-clockwise
/// polygon `clip`.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output: Vec<Point> = subject.to_vec();
    let mut input = Vec::with_capacity(subject.len() + clip.len());
    let m = clip.len();
    for i in 0..m {
        if output.is_empty() {
            break;
        }
        let (e0, e1) = (clip[i], clip[(i + 1) % m]);
        std::mem::swap(&mut input, &mut output);
        output.clear();
        let k = input.len();
        for j in 0..k {
            let cur = input[j];
            let prev = input[(j + k - 1) % k];
            let cur_in = orient(e0, e1, cur) >= 0.0;
            let prev_in = orient(e0, e1, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(prev, cur, e0, e1));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(prev, cur, e0, e1));
            }
        }
    }
    output
}

fn line_intersection(p: Point, q: Point, e0: Point, e1: Point) -> Point {
    let dp = orient(e0, e1, p);
    let dq = orient(e0, e1, q);
    let t = dp / (dp - dq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

pub fn convex_intersection_area(a: &[Point], b: &[Point]) -> f64 {
    signed_area(&clip_convex(a, b)).max(0.0)
}

/// Andrew's monotone chain.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Minimum-area rectangle of a convex counter-clockwise hull. One rectangle
/// side is flush with a hull edge; three support pointers advance
/// monotonically around the hull.
fn rotating_calipers(hull: &[Point]) -> Obb {
    let n = hull.len();
    let at = |i: usize| hull[i % n];
    let mut best: Option<(f64, Obb)> = None;
    let (mut right, mut top, mut left) = (1usize, 1usize, 1usize);
    for i in 0..n {
        let origin = at(i);
        let e = sub(at(i + 1), origin);
        let len = e[0].hypot(e[1]);
        let u = [e[0] / len, e[1] / len];
        let v = [-u[1], u[0]];
        let pu = |k: usize| dot(sub(at(k), origin), u);
        let pv = |k: usize| dot(sub(at(k), origin), v);

        if i == 0 {
            right = 1;
        }
        right = right.max(i + 1);
        while right < i + n && pu(right + 1) > pu(right) {
            right += 1;
        }
        if i == 0 {
            top = right;
        }
        top = top.max(right);
        while top < i + n && pv(top + 1) > pv(top) {
            top += 1;
        }
        if i == 0 {
            left = top;
        }
        left = left.max(top);
        while left < i + n && pu(left + 1) < pu(left) {
            left += 1;
        }

        let (umin, umax, vmax) = (pu(left).min(0.0), pu(right), pv(top));
        let area = (umax - umin) * vmax;
        if best.as_ref().is_none_or(|(a, _)| area < *a) {
            let cu = 0.5 * (umin + umax);
            let cv = 0.5 * vmax;
            best = Some((
                area,
                Obb {
                    x0: origin[0] + cu * u[0] + cv * v[0],
                    y0: origin[1] + cu * u[1] + cv * v[1],
                    w: umax - umin,
                    h: vmax,
                    theta: u[1].atan2(u[0]),
                },
            ));
        }
    }
    best.expect("hull has at least three vertices").1
}

fn point_in_triangle(p: Point, a: Point, b: Point, c: Point) -> bool {
    orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0 && orient(c, a, p) >= 0.0
}

fn ear_clip(vertices: &[Point]) -> Option<Vec<[Point; 3]>> {
    let mut idx: Vec<usize> = (0..vertices.len()).collect();
    let mut tris = Vec::with_capacity(vertices.len().saturating_sub(2));
    let mut guard = 0usize;
    let mut i = 0usize;
    while idx.len() > 3 {
        let m = idx.len();
        let (ip, ic, inx) = (idx[(i + m - 1) % m], idx[i % m], idx[(i + 1) % m]);
        let (a, b, c) = (vertices[ip], vertices[ic], vertices[inx]);
        let turn = orient(a, b, c);
        let is_ear = if turn == 0.0 {
            // collinear vertex contributes nothing
            true
        } else if turn < 0.0 {
            false
        } else {
            !idx.iter().any(|&k| {
                k != ip && k != ic && k != inx && point_in_triangle(vertices[k], a, b, c)
                    && vertices[k] != a && vertices[k] != b && vertices[k] != c
            })
        };
        if is_ear {
            if turn > 0.0 {
                tris.push([a, b, c]);
            }
            idx.remove(i % m);
            guard = 0;
            i %= idx.len();
        } else {
            i = (i + 1) % m;
            guard += 1;
            if guard > m {
                return None;
            }
        }
    }
    let (a, b, c) = (vertices[idx[0]], vertices[idx[1]], vertices[idx[2]]);
    if orient(a, b, c) > 0.0 {
        tris.push([a, b, c]);
    } else if orient(a, b, c) < 0.0 {
        return None;
    }
    Some(tris)
}
