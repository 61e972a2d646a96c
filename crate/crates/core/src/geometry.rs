//! Polygon area, convex clipping and intersection-over-union for evidence
//! quads.
//!
//! Intersections are computed exactly (up to floating point) by successive
//! half-plane clipping. Non-convex simple polygons are first split into
//! triangles so every clip operates on convex pieces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::QuadBox;

/// Vertices closer than this (in pixels) are merged, and vertices this close
/// to the line through their neighbours are dropped.
pub const VERTEX_EPS: f64 = 1e-9;
/// Areas at or below this are treated as zero.
pub const AREA_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Orientation of `p` relative to the directed line `a -> b`; positive when
/// `p` lies to the left.
fn orient(a: Point, b: Point, p: Point) -> f64 {
    cross(b.sub(a), p.sub(a))
}

/// Shoelace area, positive for counter-clockwise vertex order.
pub fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    twice / 2.0
}

/// A polygon stored counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Builds a polygon, reversing clockwise input. No simplicity check is
    /// made; degenerate inputs produce a polygon flagged by
    /// [`Polygon::is_degenerate`].
    pub fn new(vertices: Vec<Point>) -> Self {
        let mut vertices = dedup(vertices);
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }

    /// Fewer than three distinct vertices or no enclosed area.
    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3 || self.area() <= AREA_EPS
    }

    pub fn is_convex(&self) -> bool {
        is_convex(&self.vertices)
    }
}

impl From<&QuadBox> for Polygon {
    fn from(q: &QuadBox) -> Self {
        Polygon::new(q.vertices().to_vec())
    }
}

/// Shoelace area of a polygon; never negative.
pub fn polygon_area(p: &Polygon) -> f64 {
    signed_area(&p.vertices).abs()
}

/// True when every turn of a counter-clockwise vertex list is a left turn
/// (collinear runs allowed).
pub fn is_convex(vertices: &[Point]) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    let sign = if signed_area(vertices) < 0.0 { -1.0 } else { 1.0 };
    (0..n).all(|i| {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let c = vertices[(i + 2) % n];
        sign * orient(a, b, c) >= -VERTEX_EPS * a.dist(b).max(b.dist(c)).max(1.0)
    })
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_segment = |a: Point, b: Point, p: Point| {
        p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    };
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// A quadrilateral is simple when its opposite edges do not meet and no two
/// vertices coincide.
pub fn is_simple_quad(v: &[Point; 4]) -> bool {
    for i in 0..4 {
        for j in (i + 1)..4 {
            if v[i] == v[j] {
                return false;
            }
        }
    }
    !segments_intersect(v[0], v[1], v[2], v[3]) && !segments_intersect(v[1], v[2], v[3], v[0])
}

/// Removes repeated vertices and vertices lying on the segment between
/// their neighbours.
fn dedup(mut pts: Vec<Point>) -> Vec<Point> {
    pts.dedup_by(|a, b| a.dist(*b) <= VERTEX_EPS);
    while pts.len() > 1 && pts[0].dist(pts[pts.len() - 1]) <= VERTEX_EPS {
        pts.pop();
    }
    let mut changed = true;
    while changed && pts.len() >= 3 {
        changed = false;
        let n = pts.len();
        for i in 0..n {
            let prev = pts[(i + n - 1) % n];
            let cur = pts[i];
            let next = pts[(i + 1) % n];
            let base = prev.dist(next);
            let height = if base > 0.0 {
                orient(prev, next, cur).abs() / base
            } else {
                cur.dist(prev)
            };
            if height <= VERTEX_EPS {
                pts.remove(i);
                changed = true;
                break;
            }
        }
    }
    pts
}

/// Intersection of a subject polygon with a convex clip polygon by successive
/// half-plane clipping. Returns `None` when the two do not overlap.
pub fn clip_convex(subject: &Polygon, clip: &Polygon) -> Result<Option<Polygon>> {
    if !clip.is_convex() {
        return Err(Error::InvalidGeometry("clip polygon must be convex".into()));
    }
    let mut output = subject.vertices.clone();
    let c = &clip.vertices;
    for i in 0..c.len() {
        if output.is_empty() {
            break;
        }
        let (c0, c1) = (c[i], c[(i + 1) % c.len()]);
        let input = std::mem::take(&mut output);
        let mut s = input[input.len() - 1];
        let mut ds = orient(c0, c1, s);
        for &e in &input {
            let de = orient(c0, c1, e);
            if de >= 0.0 {
                if ds < 0.0 {
                    output.push(line_cut(s, e, ds, de));
                }
                output.push(e);
            } else if ds >= 0.0 {
                output.push(line_cut(s, e, ds, de));
            }
            s = e;
            ds = de;
        }
    }
    let poly = Polygon::new(output);
    Ok(if poly.is_degenerate() { None } else { Some(poly) })
}

fn line_cut(s: Point, e: Point, ds: f64, de: f64) -> Point {
    let t = ds / (ds - de);
    Point::new(s.x + t * (e.x - s.x), s.y + t * (e.y - s.y))
}

/// Ear-clipping triangulation of a simple polygon.
pub fn triangulate(p: &Polygon) -> Vec<[Point; 3]> {
    let mut idx: Vec<Point> = p.vertices.clone();
    let mut tris = Vec::with_capacity(idx.len().saturating_sub(2));
    while idx.len() > 3 {
        let n = idx.len();
        let ear = (0..n).find(|&i| {
            let a = idx[(i + n - 1) % n];
            let b = idx[i];
            let c = idx[(i + 1) % n];
            if orient(a, b, c) <= 0.0 {
                return false;
            }
            idx.iter()
                .enumerate()
                .filter(|&(j, _)| j != i && j != (i + n - 1) % n && j != (i + 1) % n)
                .all(|(_, &q)| !in_triangle(a, b, c, q))
        });
        // A simple polygon always has an ear; fall back to a fan if floating
        // point noise hides it.
        let i = ear.unwrap_or(1);
        tris.push([idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]]);
        idx.remove(i);
    }
    if idx.len() == 3 {
        tris.push([idx[0], idx[1], idx[2]]);
    }
    tris
}

fn in_triangle(a: Point, b: Point, c: Point, q: Point) -> bool {
    orient(a, b, q) >= 0.0 && orient(b, c, q) >= 0.0 && orient(c, a, q) >= 0.0
}

fn convex_pieces(p: &Polygon) -> Vec<Polygon> {
    if p.is_convex() {
        vec![p.clone()]
    } else {
        triangulate(p)
            .into_iter()
            .map(|t| Polygon::new(t.to_vec()))
            .filter(|t| !t.is_degenerate())
            .collect()
    }
}

/// Area of `a ∩ b` for simple polygons.
pub fn intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    let pa = convex_pieces(a);
    let pb = convex_pieces(b);
    let mut total = 0.0;
    for x in &pa {
        for y in &pb {
            if let Ok(Some(inter)) = clip_convex(x, y) {
                total += inter.area();
            }
        }
    }
    total
}

/// IoU of two polygons, with a flag raised when either input has no area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iou {
    pub value: f64,
    pub degenerate: bool,
}

pub fn polygon_iou(a: &Polygon, b: &Polygon) -> Iou {
    if a.is_degenerate() || b.is_degenerate() {
        return Iou {
            value: 0.0,
            degenerate: true,
        };
    }
    // Fixed argument order makes the result exactly symmetric.
    let (a, b) = if vertex_key(a) <= vertex_key(b) { (a, b) } else { (b, a) };
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    let value = if union <= AREA_EPS {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    };
    Iou {
        value,
        degenerate: false,
    }
}

fn vertex_key(p: &Polygon) -> Vec<(u64, u64)> {
    p.vertices
        .iter()
        .map(|v| (v.x.to_bits(), v.y.to_bits()))
        .collect()
}

/// Intersection-over-union of two evidence quads, in `[0, 1]`.
pub fn iou(a: &QuadBox, b: &QuadBox) -> f64 {
    polygon_iou(&Polygon::from(a), &Polygon::from(b)).value
}
