//! Axis-aligned primitives for placed blocks.
//!
//! Every placed block is a vertical prism: a footprint (rectangle or disc)
//! extruded over a z-interval. Upright cylinders have disc footprints; boxes
//! and lying cylinders use their rectangular shadow.

use serde::{Deserialize, Serialize};

use crate::catalog::{effective_dims, BlockSpec, CatalogError, Orientation, Placement, Shape};

/// Vertices used to approximate a disc as a convex polygon.
pub const DISC_SEGMENTS: usize = 64;

const OVERLAP_EPS: f64 = 1e-9;
const AREA_EPS: f64 = 1e-6;

pub type Point2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Solid type of a placed block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Body {
    Box,
    Cylinder { axis: Axis },
}

/// Projection of a block onto the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Footprint {
    Rect { min: Point2, max: Point2 },
    Disc { center: Point2, radius: f64 },
}

impl Footprint {
    pub fn area(&self) -> f64 {
        match *self {
            Footprint::Rect { min, max } => (max[0] - min[0]) * (max[1] - min[1]),
            Footprint::Disc { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }

    /// Convex CCW polygon; discs become an inscribed [`DISC_SEGMENTS`]-gon.
    pub fn polygon(&self) -> Vec<Point2> {
        match *self {
            Footprint::Rect { min, max } => {
                vec![[min[0], min[1]], [max[0], min[1]], [max[0], max[1]], [min[0], max[1]]]
            }
            Footprint::Disc { center, radius } => (0..DISC_SEGMENTS)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / DISC_SEGMENTS as f64;
                    [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                })
                .collect(),
        }
    }

    /// True when the open interiors intersect (shared edges do not count).
    pub fn overlaps(&self, other: &Footprint) -> bool {
        match (*self, *other) {
            (Footprint::Rect { min: a0, max: a1 }, Footprint::Rect { min: b0, max: b1 }) => {
                a1[0].min(b1[0]) - a0[0].max(b0[0]) > OVERLAP_EPS
                    && a1[1].min(b1[1]) - a0[1].max(b0[1]) > OVERLAP_EPS
            }
            (Footprint::Disc { center, radius }, Footprint::Rect { min, max })
            | (Footprint::Rect { min, max }, Footprint::Disc { center, radius }) => {
                point_rect_distance(center, min, max) < radius - OVERLAP_EPS
            }
            (Footprint::Disc { center: c1, radius: r1 }, Footprint::Disc { center: c2, radius: r2 }) => {
                dist2(c1, c2) < r1 + r2 - OVERLAP_EPS
            }
        }
    }

    /// In-plane separation; zero when touching or overlapping.
    pub fn distance(&self, other: &Footprint) -> f64 {
        match (*self, *other) {
            (Footprint::Rect { min: a0, max: a1 }, Footprint::Rect { min: b0, max: b1 }) => {
                let gx = (a0[0] - b1[0]).max(b0[0] - a1[0]).max(0.0);
                let gy = (a0[1] - b1[1]).max(b0[1] - a1[1]).max(0.0);
                gx.hypot(gy)
            }
            (Footprint::Disc { center, radius }, Footprint::Rect { min, max })
            | (Footprint::Rect { min, max }, Footprint::Disc { center, radius }) => {
                (point_rect_distance(center, min, max) - radius).max(0.0)
            }
            (Footprint::Disc { center: c1, radius: r1 }, Footprint::Disc { center: c2, radius: r2 }) => {
                (dist2(c1, c2) - (r1 + r2)).max(0.0)
            }
        }
    }

    /// Shortest in-plane translation that separates the two shapes; zero if disjoint.
    pub fn penetration(&self, other: &Footprint) -> f64 {
        match (*self, *other) {
            (Footprint::Rect { min: a0, max: a1 }, Footprint::Rect { min: b0, max: b1 }) => {
                let ox = a1[0].min(b1[0]) - a0[0].max(b0[0]);
                let oy = a1[1].min(b1[1]) - a0[1].max(b0[1]);
                ox.min(oy).max(0.0)
            }
            (Footprint::Disc { center, radius }, Footprint::Rect { min, max })
            | (Footprint::Rect { min, max }, Footprint::Disc { center, radius }) => {
                let inside = center[0] >= min[0] && center[0] <= max[0] && center[1] >= min[1] && center[1] <= max[1];
                if inside {
                    let to_edge = (center[0] - min[0])
                        .min(max[0] - center[0])
                        .min(center[1] - min[1])
                        .min(max[1] - center[1]);
                    radius + to_edge
                } else {
                    (radius - point_rect_distance(center, min, max)).max(0.0)
                }
            }
            (Footprint::Disc { center: c1, radius: r1 }, Footprint::Disc { center: c2, radius: r2 }) => {
                (r1 + r2 - dist2(c1, c2)).max(0.0)
            }
        }
    }
}

fn dist2(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn point_rect_distance(p: Point2, min: Point2, max: Point2) -> f64 {
    let dx = (min[0] - p[0]).max(p[0] - max[0]).max(0.0);
    let dy = (min[1] - p[1]).max(p[1] - max[1]).max(0.0);
    dx.hypot(dy)
}

/// A block with a resolved pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedBlock {
    pub placement: Placement,
    pub body: Body,
    pub extents_mm: [f64; 3],
    pub center_mm: [f64; 3],
    pub volume_mm3: f64,
}

impl PlacedBlock {
    /// Resolves a placement with its bottom face at `bottom_z`.
    pub fn new(spec: &BlockSpec, placement: Placement, bottom_z: f64) -> Result<Self, CatalogError> {
        let extents_mm = effective_dims(spec, placement.orientation)?;
        let body = match (spec.shape, placement.orientation) {
            (Shape::Cuboid { .. }, _) => Body::Box,
            (Shape::Cylinder { .. }, Orientation::LyingX) => Body::Cylinder { axis: Axis::X },
            (Shape::Cylinder { .. }, Orientation::LyingY) => Body::Cylinder { axis: Axis::Y },
            (Shape::Cylinder { .. }, _) => Body::Cylinder { axis: Axis::Z },
        };
        let [x, y] = placement.xy_mm;
        Ok(Self {
            center_mm: [x, y, bottom_z + extents_mm[2] / 2.0],
            placement,
            body,
            extents_mm,
            volume_mm3: spec.shape.volume_mm3(),
        })
    }

    pub fn xy(&self) -> Point2 {
        [self.center_mm[0], self.center_mm[1]]
    }

    pub fn bottom(&self) -> f64 {
        self.center_mm[2] - self.extents_mm[2] / 2.0
    }

    pub fn top(&self) -> f64 {
        self.center_mm[2] + self.extents_mm[2] / 2.0
    }

    /// Same block moved to a new footprint position and bottom height.
    pub fn relocated(&self, xy: Point2, bottom_z: f64) -> Self {
        let mut b = self.clone();
        b.placement.xy_mm = xy;
        b.center_mm = [xy[0], xy[1], bottom_z + self.extents_mm[2] / 2.0];
        b
    }

    pub fn footprint(&self) -> Footprint {
        let [cx, cy, _] = self.center_mm;
        match self.body {
            Body::Cylinder { axis: Axis::Z } => {
                Footprint::Disc { center: [cx, cy], radius: self.extents_mm[0] / 2.0 }
            }
            _ => {
                let hx = self.extents_mm[0] / 2.0;
                let hy = self.extents_mm[1] / 2.0;
                Footprint::Rect { min: [cx - hx, cy - hy], max: [cx + hx, cy + hy] }
            }
        }
    }

    /// Mass in kilograms for a density in kg/m³.
    pub fn mass_kg(&self, density_kg_m3: f64) -> f64 {
        density_kg_m3 * self.volume_mm3 * 1e-9
    }
}

fn z_gap(a: &PlacedBlock, b: &PlacedBlock) -> f64 {
    (a.bottom() - b.top()).max(b.bottom() - a.top()).max(0.0)
}

/// Minimum surface-to-surface distance; zero when touching or interpenetrating.
pub fn surface_distance(a: &PlacedBlock, b: &PlacedBlock) -> f64 {
    a.footprint().distance(&b.footprint()).hypot(z_gap(a, b))
}

/// Closed z-intervals intersect.
pub fn gravity_axis_overlap(a: &PlacedBlock, b: &PlacedBlock) -> bool {
    a.bottom().max(b.bottom()) <= a.top().min(b.top())
}

/// Depth of volumetric interpenetration (zero when disjoint or face-sharing).
pub fn penetration_depth(a: &PlacedBlock, b: &PlacedBlock) -> f64 {
    let dz = a.top().min(b.top()) - a.bottom().max(b.bottom());
    a.footprint().penetration(&b.footprint()).min(dz).max(0.0)
}

pub fn in_collision(a: &PlacedBlock, b: &PlacedBlock, tol: f64) -> bool {
    penetration_depth(a, b) > tol
}

/// What a contact patch rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportRef {
    Ground,
    Block(usize),
}

/// Lower body for [`contact_patch`].
#[derive(Debug, Clone, Copy)]
pub enum Support<'a> {
    Ground,
    Block(usize, &'a PlacedBlock),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactPatch {
    pub polygon: Vec<Point2>,
    pub support: SupportRef,
}

impl ContactPatch {
    pub fn area(&self) -> f64 {
        polygon_area(&self.polygon)
    }
}

/// Region where `upper`'s bottom face meets `lower`'s top face, if the faces
/// are coplanar within `tol` and the overlap has positive area.
pub fn contact_patch(upper: &PlacedBlock, lower: Support<'_>, tol: f64) -> Option<ContactPatch> {
    match lower {
        Support::Ground => (upper.bottom().abs() <= tol).then(|| ContactPatch {
            polygon: upper.footprint().polygon(),
            support: SupportRef::Ground,
        }),
        Support::Block(idx, lower) => {
            if (upper.bottom() - lower.top()).abs() > tol || !upper.footprint().overlaps(&lower.footprint()) {
                return None;
            }
            let polygon = clip_convex(&upper.footprint().polygon(), &lower.footprint().polygon());
            (polygon.len() >= 3 && polygon_area(&polygon) > AREA_EPS)
                .then_some(ContactPatch { polygon, support: SupportRef::Block(idx) })
        }
    }
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Shoelace area (positive for CCW).
pub fn polygon_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

/// Sutherland–Hodgman clip of `subject` by the convex CCW polygon `clip`.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut out = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % m]);
        let input = std::mem::take(&mut out);
        let n = input.len();
        for j in 0..n {
            let cur = input[j];
            let prev = input[(j + n - 1) % n];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    out.push(intersect(prev, cur, a, b));
                }
                out.push(cur);
            } else if prev_in {
                out.push(intersect(prev, cur, a, b));
            }
        }
    }
    out.dedup_by(|p, q| (p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
    if out.len() > 1 {
        let (f, l) = (out[0], out[out.len() - 1]);
        if (f[0] - l[0]).abs() < 1e-12 && (f[1] - l[1]).abs() < 1e-12 {
            out.pop();
        }
    }
    out
}

fn intersect(p: Point2, q: Point2, a: Point2, b: Point2) -> Point2 {
    let d1 = cross(a, b, p);
    let d2 = cross(a, b, q);
    let t = d1 / (d1 - d2);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Convex hull (CCW, no collinear points) by monotone chain.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Signed distance from `p` to the boundary of convex CCW `poly` (positive
/// inside) and the nearest boundary point.
pub fn signed_boundary_distance(poly: &[Point2], p: Point2) -> (f64, Point2) {
    let n = poly.len();
    let mut best = (f64::INFINITY, p);
    let mut inside = n >= 3;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if cross(a, b, p) < 0.0 {
            inside = false;
        }
        let ab = [b[0] - a[0], b[1] - a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let t = if len2 > 0.0 {
            (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
        let d = dist2(p, q);
        if d < best.0 {
            best = (d, q);
        }
    }
    if inside {
        best
    } else {
        (-best.0, best.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{BlockSpec, Orientation};
    use proptest::prelude::*;

    fn cube(size: f64, x: f64, y: f64, bottom: f64) -> PlacedBlock {
        let spec = BlockSpec::cuboid("c", [size, size, size], 1);
        PlacedBlock::new(&spec, Placement { block_id: "c".into(), orientation: Orientation::IDENTITY, xy_mm: [x, y], color: String::new() }, bottom).unwrap()
    }

    fn boxed(dims: [f64; 3], x: f64, y: f64, bottom: f64) -> PlacedBlock {
        let spec = BlockSpec::cuboid("b", dims, 1);
        PlacedBlock::new(&spec, Placement { block_id: "b".into(), orientation: Orientation::IDENTITY, xy_mm: [x, y], color: String::new() }, bottom).unwrap()
    }

    fn upright(d: f64, h: f64, x: f64, y: f64, bottom: f64) -> PlacedBlock {
        let spec = BlockSpec::cylinder("y", d, h, 1);
        PlacedBlock::new(&spec, Placement { block_id: "y".into(), orientation: Orientation::Upright, xy_mm: [x, y], color: String::new() }, bottom).unwrap()
    }

    /// Brute-force minimum distance between sampled surface points.
    fn sampled_surface_distance(a: &PlacedBlock, b: &PlacedBlock, n: usize) -> f64 {
        fn samples(p: &PlacedBlock, n: usize) -> Vec<[f64; 3]> {
            let mut out = Vec::new();
            let [cx, cy, cz] = p.center_mm;
            let [ex, ey, ez] = p.extents_mm;
            let lin = |k: usize| k as f64 / (n - 1) as f64 - 0.5;
            match p.footprint() {
                Footprint::Rect { .. } => {
                    for i in 0..n {
                        for j in 0..n {
                            let (u, v) = (lin(i), lin(j));
                            for s in [-0.5, 0.5] {
                                out.push([cx + s * ex, cy + u * ey, cz + v * ez]);
                                out.push([cx + u * ex, cy + s * ey, cz + v * ez]);
                                out.push([cx + u * ex, cy + v * ey, cz + s * ez]);
                            }
                        }
                    }
                }
                Footprint::Disc { radius, .. } => {
                    for i in 0..4 * n {
                        let t = std::f64::consts::TAU * i as f64 / (4 * n) as f64;
                        for j in 0..n {
                            let z = cz + lin(j) * ez;
                            out.push([cx + radius * t.cos(), cy + radius * t.sin(), z]);
                            let r = radius * j as f64 / (n - 1) as f64;
                            out.push([cx + r * t.cos(), cy + r * t.sin(), cz - ez / 2.0]);
                            out.push([cx + r * t.cos(), cy + r * t.sin(), cz + ez / 2.0]);
                        }
                    }
                }
            }
            out
        }
        let (sa, sb) = (samples(a, n), samples(b, n));
        let mut best = f64::INFINITY;
        for p in &sa {
            for q in &sb {
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
                best = best.min(d);
            }
        }
        best
    }


    /// Coarse-to-fine grid search for the closest pair of points in two
    /// solid boxes. Distance between convex solids is convex in the pair, so
    /// shrinking the search window around the best grid pair converges.
    fn zoom_sampled_box_distance(a: &PlacedBlock, b: &PlacedBlock) -> f64 {
        const N: usize = 5;
        let bounds = |p: &PlacedBlock| {
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            for k in 0..3 {
                lo[k] = p.center_mm[k] - p.extents_mm[k] / 2.0;
                hi[k] = p.center_mm[k] + p.extents_mm[k] / 2.0;
            }
            (lo, hi)
        };
        let (alo, ahi) = bounds(a);
        let (blo, bhi) = bounds(b);
        let mut wa = (alo, ahi);
        let mut wb = (blo, bhi);
        let grid = |(lo, hi): ([f64; 3], [f64; 3])| {
            let mut pts = Vec::with_capacity(N * N * N);
            for i in 0..N {
                for j in 0..N {
                    for k in 0..N {
                        let t = |q: usize, d: usize| lo[d] + (hi[d] - lo[d]) * q as f64 / (N - 1) as f64;
                        pts.push([t(i, 0), t(j, 1), t(k, 2)]);
                    }
                }
            }
            pts
        };
        let mut best = (f64::INFINITY, [0.0; 3], [0.0; 3]);
        for _ in 0..40 {
            for p in grid(wa) {
                for q in grid(wb) {
                    let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
                    if d < best.0 {
                        best = (d, p, q);
                    }
                }
            }
            let shrink = |(lo, hi): ([f64; 3], [f64; 3]), c: [f64; 3], olo: [f64; 3], ohi: [f64; 3]| {
                let mut nlo = [0.0; 3];
                let mut nhi = [0.0; 3];
                for d in 0..3 {
                    let half = (hi[d] - lo[d]) * 0.3;
                    nlo[d] = (c[d] - half).max(olo[d]);
                    nhi[d] = (c[d] + half).min(ohi[d]);
                }
                (nlo, nhi)
            };
            wa = shrink(wa, best.1, alo, ahi);
            wb = shrink(wb, best.2, blo, bhi);
        }
        best.0
    }

    #[test]
    fn cube_gap_is_ten() {
        let a = cube(40.0, 0.0, 0.0, 0.0);
        let b = cube(40.0, 50.0, 0.0, 0.0);
        assert!((surface_distance(&a, &b) - 10.0).abs() < 1e-12);
        assert_eq!(surface_distance(&a, &a.clone()), 0.0);
    }

    #[test]
    fn cube_to_cylinder_gap_matches_sampling() {
        let a = cube(40.0, 0.0, 0.0, 0.0);
        let c = upright(20.0, 40.0, 40.0, 0.0, 0.0);
        let d = surface_distance(&a, &c);
        assert!((d - 10.0).abs() < 1e-12);
        let sampled = sampled_surface_distance(&a, &c, 21);
        assert!((sampled - 10.0).abs() < 0.05, "sampled {sampled}");
    }

    #[test]
    fn gravity_overlap_cases() {
        let a = boxed([40.0, 40.0, 40.0], 0.0, 0.0, 0.0);
        assert!(gravity_axis_overlap(&a, &boxed([40.0, 40.0, 40.0], 100.0, 0.0, 40.0)));
        assert!(!gravity_axis_overlap(&a, &boxed([40.0, 40.0, 39.0], 100.0, 0.0, 41.0)));
        assert!(gravity_axis_overlap(&a, &boxed([40.0, 40.0, 40.0], 100.0, 0.0, 20.0)));
    }

    #[test]
    fn collision_cases() {
        let a = cube(40.0, 0.0, 0.0, 0.0);
        assert!(!in_collision(&a, &cube(40.0, 0.0, 0.0, 40.0), 0.01));
        assert!(in_collision(&a, &cube(40.0, 39.0, 0.0, 0.0), 0.01));
        let c1 = upright(30.0, 40.0, 0.0, 0.0, 0.0);
        let c2 = upright(30.0, 40.0, 29.0, 0.0, 0.0);
        assert!(in_collision(&c1, &c2, 0.01));
        assert!(!in_collision(&c1, &upright(30.0, 40.0, 31.0, 0.0, 0.0), 0.01));
    }

    #[test]
    fn disc_overlap_agrees_with_area_sampling() {
        // grid-sampled overlap area of two d=30 discs 29 mm apart is positive
        let (r, d): (f64, f64) = (15.0, 29.0);
        let mut hits = 0;
        let step = 0.05;
        let mut x = -r;
        while x <= r {
            let mut y = -r;
            while y <= r {
                if x * x + y * y <= r * r && (x - d).powi(2) + y * y <= r * r {
                    hits += 1;
                }
                y += step;
            }
            x += step;
        }
        assert!(hits > 0);
        let a = Footprint::Disc { center: [0.0, 0.0], radius: r };
        let b = Footprint::Disc { center: [d, 0.0], radius: r };
        assert!(a.overlaps(&b));
    }

    #[test]
    fn offset_cube_patch() {
        let lower = cube(40.0, 0.0, 0.0, 0.0);
        let upper = cube(40.0, 30.0, 0.0, 40.0);
        let patch = contact_patch(&upper, Support::Block(0, &lower), 0.5).unwrap();
        let xs: Vec<f64> = patch.polygon.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = patch.polygon.iter().map(|p| p[1]).collect();
        assert!((xs.iter().cloned().fold(f64::INFINITY, f64::min) - 10.0).abs() < 1e-9);
        assert!((xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 20.0).abs() < 1e-9);
        assert!((ys.iter().cloned().fold(f64::INFINITY, f64::min) + 20.0).abs() < 1e-9);
        assert!((patch.area() - 400.0).abs() < 1e-9);
        assert_eq!(patch.support, SupportRef::Block(0));
    }

    #[test]
    fn floating_cube_has_no_patch() {
        let lower = cube(40.0, 0.0, 0.0, 0.0);
        let upper = cube(40.0, 0.0, 0.0, 45.0);
        assert!(contact_patch(&upper, Support::Block(0, &lower), 0.5).is_none());
        assert!(contact_patch(&upper, Support::Ground, 0.5).is_none());
        assert!(contact_patch(&lower, Support::Ground, 0.5).is_some());
    }

    #[test]
    fn cylinder_on_cube_patch_is_disc() {
        let lower = cube(40.0, 0.0, 0.0, 0.0);
        let upper = upright(30.0, 20.0, 0.0, 0.0, 40.0);
        let patch = contact_patch(&upper, Support::Block(0, &lower), 0.5).unwrap();
        assert_eq!(patch.polygon.len(), DISC_SEGMENTS);
        for p in &patch.polygon {
            assert!((p[0].hypot(p[1]) - 15.0).abs() < 1e-9);
        }
        let inscribed = 0.5 * DISC_SEGMENTS as f64 * 225.0 * (std::f64::consts::TAU / DISC_SEGMENTS as f64).sin();
        assert!((patch.area() - inscribed).abs() < 1e-6);
    }

    #[test]
    fn hull_and_distance() {
        let hull = convex_hull(&[[0.0, 0.0], [2.0, 0.0], [1.0, 1.0], [2.0, 2.0], [0.0, 2.0], [1.0, 0.0]]);
        assert_eq!(hull.len(), 4);
        assert!((polygon_area(&hull) - 4.0).abs() < 1e-12);
        let (d, _) = signed_boundary_distance(&hull, [1.0, 1.0]);
        assert!((d - 1.0).abs() < 1e-12);
        let (d, q) = signed_boundary_distance(&hull, [3.0, 1.0]);
        assert!((d + 1.0).abs() < 1e-12);
        assert_eq!(q, [2.0, 1.0]);
    }

    fn arb_box() -> impl Strategy<Value = PlacedBlock> {
        (5.0f64..60.0, 5.0f64..60.0, 5.0f64..60.0, -80.0f64..80.0, -80.0f64..80.0, 0.0f64..80.0)
            .prop_map(|(a, b, c, x, y, z)| boxed([a, b, c], x, y, z))
    }

    fn arb_block() -> impl Strategy<Value = PlacedBlock> {
        prop_oneof![
            arb_box(),
            (5.0f64..60.0, 5.0f64..60.0, -80.0f64..80.0, -80.0f64..80.0, 0.0f64..80.0)
                .prop_map(|(d, h, x, y, z)| upright(d, h, x, y, z)),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn distance_symmetric(a in arb_block(), b in arb_block()) {
            prop_assert_eq!(surface_distance(&a, &b), surface_distance(&b, &a));
            prop_assert_eq!(in_collision(&a, &b, 0.0), in_collision(&b, &a, 0.0));
        }

        #[test]
        fn zero_distance_iff_touching_or_colliding(a in arb_block(), b in arb_block()) {
            let d = surface_distance(&a, &b);
            let touching = a.footprint().distance(&b.footprint()) == 0.0 && gravity_axis_overlap(&a, &b);
            prop_assert_eq!(d == 0.0, touching || in_collision(&a, &b, 0.0));
        }

        #[test]
        fn box_distance_matches_sampling(a in arb_box(), b in arb_box()) {
            let exact = surface_distance(&a, &b);
            let sampled = zoom_sampled_box_distance(&a, &b);
            prop_assert!((sampled - exact).abs() < 0.1, "exact {} sampled {}", exact, sampled);
        }

        #[test]
        fn patch_area_bounded(a in arb_block(), b in arb_block()) {
            let upper = a.relocated(a.xy(), b.top());
            if let Some(p) = contact_patch(&upper, Support::Block(1, &b), 0.5) {
                let bound = upper.footprint().area().min(b.footprint().area());
                prop_assert!(p.area() <= bound + 1e-6);
            }
        }
    }
}
