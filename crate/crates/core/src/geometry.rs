//! Planar polygon utilities: orientation, simplicity, triangulation.

use crate::quadrature::Triangle;
use crate::scalar::Scalar;

/// Orientation of a closed polygon by the sign of its shoelace area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
    Degenerate,
}

impl Orientation {
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Orientation::CounterClockwise => T::one(),
            Orientation::Clockwise => -T::one(),
            Orientation::Degenerate => T::zero(),
        }
    }
}

/// Signed shoelace area. The ring may or may not repeat its first vertex.
pub fn signed_area<T: Scalar>(ring: &[(T, T)]) -> T {
    let n = ring.len();
    if n < 3 {
        return T::zero();
    }
    let mut acc = T::zero();
    for i in 0..n {
        let (x0, y0) = ring[i];
        let (x1, y1) = ring[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc * T::half()
}

/// Orientation with a relative degeneracy threshold against the bounding box.
pub fn orientation<T: Scalar>(ring: &[(T, T)]) -> Orientation {
    let area = signed_area(ring);
    let (w, h) = bbox_extent(ring);
    let floor = T::of(1e-14) * (w * h).max(T::min_positive_value());
    if area > floor {
        Orientation::CounterClockwise
    } else if area < -floor {
        Orientation::Clockwise
    } else {
        Orientation::Degenerate
    }
}

fn bbox_extent<T: Scalar>(ring: &[(T, T)]) -> (T, T) {
    let mut lo = (T::infinity(), T::infinity());
    let mut hi = (T::neg_infinity(), T::neg_infinity());
    for &(x, y) in ring {
        lo = (lo.0.min(x), lo.1.min(y));
        hi = (hi.0.max(x), hi.1.max(y));
    }
    if ring.is_empty() {
        return (T::zero(), T::zero());
    }
    (hi.0 - lo.0, hi.1 - lo.1)
}

fn cross<T: Scalar>(o: (T, T), a: (T, T), b: (T, T)) -> T {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn segments_intersect<T: Scalar>(p1: (T, T), p2: (T, T), q1: (T, T), q2: (T, T)) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    let zero = T::zero();
    if ((d1 > zero && d2 < zero) || (d1 < zero && d2 > zero))
        && ((d3 > zero && d4 < zero) || (d3 < zero && d4 > zero))
    {
        return true;
    }
    let on = |a: (T, T), b: (T, T), c: (T, T), d: T| {
        d == zero
            && c.0 >= a.0.min(b.0)
            && c.0 <= a.0.max(b.0)
            && c.1 >= a.1.min(b.1)
            && c.1 <= a.1.max(b.1)
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// Drops a repeated closing vertex and consecutive duplicates.
pub fn open_ring<T: Scalar>(ring: &[(T, T)]) -> Vec<(T, T)> {
    let mut out: Vec<(T, T)> = Vec::with_capacity(ring.len());
    for &p in ring {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

/// True when no two non-adjacent edges of the ring touch. O(n²).
pub fn is_simple<T: Scalar>(ring: &[(T, T)]) -> bool {
    let pts = open_ring(ring);
    let n = pts.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for j in (i + 1)..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (pts[j], pts[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Removes vertices collinear with their neighbours (exact zero cross product
/// or relative cross below `1e-13`).
fn drop_collinear<T: Scalar>(mut pts: Vec<(T, T)>) -> Vec<(T, T)> {
    let mut changed = true;
    while changed && pts.len() > 3 {
        changed = false;
        let n = pts.len();
        let mut keep = Vec::with_capacity(n);
        for i in 0..n {
            let prev = pts[(i + n - 1) % n];
            let next = pts[(i + 1) % n];
            let c = cross(prev, pts[i], next);
            let scale = ((pts[i].0 - prev.0).abs() + (pts[i].1 - prev.1).abs())
                * ((next.0 - pts[i].0).abs() + (next.1 - pts[i].1).abs());
            if c.abs() <= T::of(1e-13) * scale {
                changed = true;
                continue;
            }
            keep.push(pts[i]);
        }
        if keep.len() < 3 {
            return keep;
        }
        pts = keep;
    }
    pts
}

fn point_in_triangle<T: Scalar>(p: (T, T), a: (T, T), b: (T, T), c: (T, T)) -> bool {
    let zero = T::zero();
    cross(a, b, p) >= zero && cross(b, c, p) >= zero && cross(c, a, p) >= zero
}

/// Ear-clipping triangulation of a simple polygon. The returned triangles are
/// counter-clockwise regardless of the input orientation.
pub fn triangulate<T: Scalar>(ring: &[(T, T)]) -> Vec<Triangle<T>> {
    let mut pts = drop_collinear(open_ring(ring));
    if pts.len() < 3 {
        return Vec::new();
    }
    if signed_area(&pts) < T::zero() {
        pts.reverse();
    }
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    let mut out = Vec::with_capacity(pts.len().saturating_sub(2));
    let mut guard = 0usize;
    let mut i = 0usize;
    while idx.len() > 3 {
        let n = idx.len();
        let (ia, ib, ic) = (idx[(i + n - 1) % n], idx[i % n], idx[(i + 1) % n]);
        let (a, b, c) = (pts[ia], pts[ib], pts[ic]);
        let convex = cross(a, b, c) > T::zero();
        let is_ear = convex
            && idx.iter().all(|&k| {
                k == ia || k == ib || k == ic || {
                    let p = pts[k];
                    p == a || p == b || p == c || !point_in_triangle(p, a, b, c)
                }
            });
        if is_ear {
            out.push([a, b, c]);
            idx.remove(i % n);
            guard = 0;
            if i >= idx.len() {
                i = 0;
            }
        } else {
            i = (i + 1) % n;
            guard += 1;
            if guard > n {
                // Numerically degenerate remainder: fan it out.
                for k in 1..idx.len() - 1 {
                    out.push([pts[idx[0]], pts[idx[k]], pts[idx[k + 1]]]);
                }
                return out;
            }
        }
    }
    out.push([pts[idx[0]], pts[idx[1]], pts[idx[2]]]);
    out
}
