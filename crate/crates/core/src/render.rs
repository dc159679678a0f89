//! Orthographic scene rendering and mesh export.
//!
//! Views are flat-shaded silhouettes drawn back to front. A pixel is
//! covered when its center lies inside a projected shape, so output depends
//! only on the scene and the view configuration.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Axis, Body, PlacedBlock};
use crate::statics::Scene;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("png encoding failed: {0}")]
    Encode(String),
}

/// Camera direction for an orthographic view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewAxis {
    /// Camera on −y looking toward +y; image right = +x, up = +z.
    Front,
    /// Camera on +x looking toward −x; image right = +y, up = +z.
    Side,
    /// Camera above looking down; image right = +x, up = +y.
    Top,
}

impl ViewAxis {
    pub fn name(self) -> &'static str {
        match self {
            ViewAxis::Front => "front",
            ViewAxis::Side => "side",
            ViewAxis::Top => "top",
        }
    }
}

impl std::str::FromStr for ViewAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "front" => Ok(ViewAxis::Front),
            "side" => Ok(ViewAxis::Side),
            "top" => Ok(ViewAxis::Top),
            _ => Err(format!("unknown view {s:?} (expected front, side or top)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub width_px: u32,
    pub height_px: u32,
    pub px_per_mm: f64,
    /// Image row of the ground line in front and side views.
    pub ground_row: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { width_px: 480, height_px: 360, px_per_mm: 1.0, ground_row: 320 }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err("canvas must be at least 1x1 px".into());
        }
        if !(self.px_per_mm.is_finite() && self.px_per_mm > 0.0) {
            return Err(format!("px_per_mm must be positive, got {}", self.px_per_mm));
        }
        if self.ground_row >= self.height_px {
            return Err(format!("ground_row {} is off the {} px canvas", self.ground_row, self.height_px));
        }
        Ok(())
    }
}

pub type Rgb = [u8; 3];

const BACKGROUND: Rgb = [255, 255, 255];
const GROUND: Rgb = [96, 96, 96];
const HIGHLIGHT: Rgb = [255, 0, 255];

/// A rendered view.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoView {
    pub axis: ViewAxis,
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<Rgb>,
    pub highlights: BTreeSet<usize>,
}

impl OrthoView {
    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        self.pixels[(y * self.width + x) as usize]
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    #[cfg(feature = "png")]
    pub fn to_png(&self) -> Result<Vec<u8>, RenderError> {
        let mut buf = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut buf, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().map_err(|e| RenderError::Encode(e.to_string()))?;
            let data: Vec<u8> = self.pixels.iter().flatten().copied().collect();
            w.write_image_data(&data).map_err(|e| RenderError::Encode(e.to_string()))?;
        }
        Ok(buf)
    }

    /// Encoded image bytes and MIME type; PNG when available.
    pub fn encode(&self) -> Result<(Vec<u8>, &'static str), RenderError> {
        #[cfg(feature = "png")]
        {
            Ok((self.to_png()?, "image/png"))
        }
        #[cfg(not(feature = "png"))]
        {
            Ok((self.to_ppm(), "image/x-portable-pixmap"))
        }
    }

    /// Writes PPM or PNG depending on the file extension.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RenderError> {
        let path = path.as_ref();
        let bytes = match path.extension().and_then(|e| e.to_str()) {
            #[cfg(feature = "png")]
            Some("png") => self.to_png()?,
            _ => self.to_ppm(),
        };
        std::fs::write(path, bytes).map_err(|source| RenderError::Io { path: path.display().to_string(), source })
    }

    /// Pixel bounding box `(x0, y0, x1, y1)` (exclusive max) of pixels with the given color.
    pub fn bbox_of(&self, color: Rgb) -> Option<(u32, u32, u32, u32)> {
        let mut bb: Option<(u32, u32, u32, u32)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.pixel(x, y) == color {
                    bb = Some(match bb {
                        None => (x, y, x + 1, y + 1),
                        Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x + 1), d.max(y + 1)),
                    });
                }
            }
        }
        bb
    }
}

/// A projected shape in image coordinates (pixels, y down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projected {
    Rect { u0: f64, v0: f64, u1: f64, v1: f64 },
    Disc { cu: f64, cv: f64, r: f64 },
}

impl Projected {
    fn contains(&self, u: f64, v: f64) -> bool {
        match *self {
            Projected::Rect { u0, v0, u1, v1 } => u >= u0 && u < u1 && v >= v0 && v < v1,
            Projected::Disc { cu, cv, r } => (u - cu).powi(2) + (v - cv).powi(2) <= r * r,
        }
    }

    fn inset(&self, px: f64) -> Projected {
        match *self {
            Projected::Rect { u0, v0, u1, v1 } => Projected::Rect { u0: u0 + px, v0: v0 + px, u1: u1 - px, v1: v1 - px },
            Projected::Disc { cu, cv, r } => Projected::Disc { cu, cv, r: r - px },
        }
    }

    /// Analytic bounding box `(u0, v0, u1, v1)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Projected::Rect { u0, v0, u1, v1 } => (u0, v0, u1, v1),
            Projected::Disc { cu, cv, r } => (cu - r, cv - r, cu + r, cv + r),
        }
    }
}

/// Image-space projection of a block and its depth (larger = farther).
pub fn project(block: &PlacedBlock, axis: ViewAxis, cfg: &RenderConfig) -> (Projected, f64) {
    let s = cfg.px_per_mm;
    let cu = cfg.width_px as f64 / 2.0;
    let [x, y, z] = block.center_mm;
    let [ex, ey, ez] = block.extents_mm;
    // (horizontal world coord, its extent, vertical world coord, its extent, depth)
    let (h, eh, v, ev, depth, vertical_origin) = match axis {
        ViewAxis::Front => (x, ex, z, ez, y, cfg.ground_row as f64),
        ViewAxis::Side => (y, ey, z, ez, -x, cfg.ground_row as f64),
        ViewAxis::Top => (x, ex, y, ey, -z, cfg.height_px as f64 / 2.0),
    };
    let round = match (block.body, axis) {
        (Body::Cylinder { axis: Axis::Z }, ViewAxis::Top) => true,
        (Body::Cylinder { axis: Axis::Y }, ViewAxis::Front) => true,
        (Body::Cylinder { axis: Axis::X }, ViewAxis::Side) => true,
        _ => false,
    };
    let (pu, pv) = (cu + h * s, vertical_origin - v * s);
    let shape = if round {
        Projected::Disc { cu: pu, cv: pv, r: eh * s / 2.0 }
    } else {
        Projected::Rect { u0: pu - eh * s / 2.0, v0: pv - ev * s / 2.0, u1: pu + eh * s / 2.0, v1: pv + ev * s / 2.0 }
    };
    (shape, depth)
}

/// Fill color for a block's color tag; unknown names hash to a stable color.
pub fn color_for(tag: &str) -> Rgb {
    let t = tag.trim().to_ascii_lowercase();
    if let Some(hex) = t.strip_prefix('#') {
        if hex.len() == 6 {
            if let Ok(v) = u32::from_str_radix(hex, 16) {
                return [(v >> 16) as u8, (v >> 8) as u8, v as u8];
            }
        }
    }
    match t.as_str() {
        "red" => [214, 48, 49],
        "green" => [39, 174, 96],
        "blue" => [41, 98, 255],
        "yellow" => [241, 196, 15],
        "orange" => [230, 126, 34],
        "purple" => [142, 68, 173],
        "brown" => [141, 94, 56],
        "black" => [30, 30, 30],
        "white" => [236, 236, 236],
        "gray" | "grey" => [149, 165, 166],
        "pink" => [253, 121, 168],
        "cyan" => [0, 188, 212],
        _ => {
            // FNV-1a keeps unknown tags distinct but deterministic
            let h = t.bytes().fold(0x811c9dc5u32, |h, b| (h ^ b as u32).wrapping_mul(0x01000193));
            [64 + (h & 0x7f) as u8, 64 + ((h >> 8) & 0x7f) as u8, 64 + ((h >> 16) & 0x7f) as u8]
        }
    }
}

fn shade(c: Rgb) -> Rgb {
    c.map(|v| (v as u16 * 3 / 5) as u8)
}

pub fn render_ortho(scene: &Scene, axis: ViewAxis, highlights: &BTreeSet<usize>, cfg: &RenderConfig) -> OrthoView {
    let (w, h) = (cfg.width_px, cfg.height_px);
    let mut pixels = vec![BACKGROUND; (w * h) as usize];
    if axis != ViewAxis::Top && cfg.ground_row < h {
        for x in 0..w {
            pixels[(cfg.ground_row * w + x) as usize] = GROUND;
        }
    }
    let mut order: Vec<(usize, Projected, f64)> = scene
        .blocks()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let (p, d) = project(b, axis, cfg);
            (i, p, d)
        })
        .collect();
    // far to near; later index wins ties
    order.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    for (i, shape, _) in order {
        let fill = color_for(&scene.blocks()[i].placement.color);
        let (edge, edge_px) = if highlights.contains(&i) { (HIGHLIGHT, 2.0) } else { (shade(fill), 1.0) };
        let inner = shape.inset(edge_px);
        let (u0, v0, u1, v1) = shape.bounds();
        let x0 = u0.floor().max(0.0) as u32;
        let y0 = v0.floor().max(0.0) as u32;
        let x1 = (u1.ceil().max(0.0) as u32).min(w);
        let y1 = (v1.ceil().max(0.0) as u32).min(h);
        for py in y0..y1 {
            for px in x0..x1 {
                let (cu, cv) = (px as f64 + 0.5, py as f64 + 0.5);
                if shape.contains(cu, cv) {
                    pixels[(py * w + px) as usize] = if inner.contains(cu, cv) { fill } else { edge };
                }
            }
        }
    }
    OrthoView { axis, width: w, height: h, pixels, highlights: highlights.clone() }
}

/// Offender highlighted in each of the report's views.
pub fn render_feedback(scene: &Scene, views: &[ViewAxis], offender: Option<usize>, cfg: &RenderConfig) -> Vec<OrthoView> {
    let hl: BTreeSet<usize> = offender.into_iter().collect();
    views.iter().map(|a| render_ortho(scene, *a, &hl, cfg)).collect()
}

const CYLINDER_SEGMENTS: usize = 24;

/// Wavefront OBJ text: one object per block, triangles only.
pub fn mesh_obj(scene: &Scene) -> String {
    let mut out = String::from("# blox scene mesh\n");
    let _ = writeln!(out, "# blocks {}", scene.len());
    let mut base = 1usize;
    for (i, b) in scene.blocks().iter().enumerate() {
        let _ = writeln!(out, "o block_{i}_{}", b.placement.block_id);
        let (verts, tris) = match b.body {
            Body::Box => box_mesh(b),
            Body::Cylinder { axis } => cylinder_mesh(b, axis),
        };
        for v in &verts {
            let _ = writeln!(out, "v {:.4} {:.4} {:.4}", v[0], v[1], v[2]);
        }
        for t in &tris {
            let _ = writeln!(out, "f {} {} {}", t[0] + base, t[1] + base, t[2] + base);
        }
        base += verts.len();
    }
    out
}

pub fn export_mesh(scene: &Scene, path: impl AsRef<Path>) -> Result<(), RenderError> {
    let path = path.as_ref();
    std::fs::write(path, mesh_obj(scene)).map_err(|source| RenderError::Io { path: path.display().to_string(), source })
}

fn box_mesh(b: &PlacedBlock) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let [cx, cy, cz] = b.center_mm;
    let [hx, hy, hz] = b.extents_mm.map(|e| e / 2.0);
    let verts = (0..8)
        .map(|k| {
            let sx = if k & 1 == 0 { -hx } else { hx };
            let sy = if k & 2 == 0 { -hy } else { hy };
            let sz = if k & 4 == 0 { -hz } else { hz };
            [cx + sx, cy + sy, cz + sz]
        })
        .collect();
    let tris = vec![
        [0, 2, 3], [0, 3, 1], // bottom
        [4, 5, 7], [4, 7, 6], // top
        [0, 1, 5], [0, 5, 4], // -y
        [2, 6, 7], [2, 7, 3], // +y
        [0, 4, 6], [0, 6, 2], // -x
        [1, 3, 7], [1, 7, 5], // +x
    ];
    (verts, tris)
}

fn cylinder_mesh(b: &PlacedBlock, axis: Axis) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let n = CYLINDER_SEGMENTS;
    let c = b.center_mm;
    let (ai, ui, wi) = match axis {
        Axis::X => (0, 1, 2),
        Axis::Y => (1, 2, 0),
        Axis::Z => (2, 0, 1),
    };
    let half = b.extents_mm[ai] / 2.0;
    let r = b.extents_mm[ui] / 2.0;
    let point = |along: f64, t: Option<f64>| {
        let mut p = c;
        p[ai] += along;
        if let Some(t) = t {
            p[ui] += r * f64::cos(t);
            p[wi] += r * f64::sin(t);
        }
        p
    };
    let mut verts = Vec::with_capacity(2 * n + 2);
    for end in [-half, half] {
        for k in 0..n {
            verts.push(point(end, Some(std::f64::consts::TAU * k as f64 / n as f64)));
        }
    }
    verts.push(point(-half, None));
    verts.push(point(half, None));
    let (lo_c, hi_c) = (2 * n, 2 * n + 1);
    let mut tris = Vec::with_capacity(4 * n);
    for k in 0..n {
        let k1 = (k + 1) % n;
        tris.push([k, k1, n + k1]);
        tris.push([k, n + k1, n + k]);
        tris.push([lo_c, k1, k]);
        tris.push([hi_c, n + k, n + k1]);
    }
    (verts, tris)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{BlockSpec, Catalog, Orientation, Placement};
    use crate::statics::{drop_settle, SimParams};

    fn scene(ps: &[(&str, Orientation, [f64; 2])]) -> Scene {
        let c = Catalog::new(vec![
            BlockSpec::cuboid("cube", [40.0, 40.0, 40.0], 5),
            BlockSpec::cylinder("cyl", 30.0, 50.0, 5),
        ])
        .unwrap();
        let p = SimParams::default();
        ps.iter().fold(Scene::new(0.5), |s, (id, o, xy)| {
            drop_settle(&s, &c, &Placement { block_id: id.to_string(), orientation: *o, xy_mm: *xy, color: "red".into() }, &p).unwrap()
        })
    }

    #[test]
    fn config_validation() {
        assert!(RenderConfig::default().validate().is_ok());
        assert!(RenderConfig { px_per_mm: 0.0, ..Default::default() }.validate().is_err());
        assert!(RenderConfig { ground_row: 360, ..Default::default() }.validate().is_err());
        assert!(RenderConfig { width_px: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn empty_scene_has_only_ground_line() {
        let cfg = RenderConfig::default();
        let v = render_ortho(&Scene::new(0.5), ViewAxis::Front, &BTreeSet::new(), &cfg);
        for y in 0..cfg.height_px {
            for x in 0..cfg.width_px {
                let want = if y == cfg.ground_row { GROUND } else { BACKGROUND };
                assert_eq!(v.pixel(x, y), want);
            }
        }
    }

    #[test]
    fn cube_front_is_40px_square() {
        let cfg = RenderConfig::default();
        let s = scene(&[("cube", Orientation::IDENTITY, [0.0, 0.0])]);
        let v = render_ortho(&s, ViewAxis::Front, &BTreeSet::new(), &cfg);
        let fill = color_for("red");
        let edge = shade(fill);
        let mut bb = v.bbox_of(fill).unwrap();
        let eb = v.bbox_of(edge).unwrap();
        bb = (bb.0.min(eb.0), bb.1.min(eb.1), bb.2.max(eb.2), bb.3.max(eb.3));
        assert_eq!(bb, (220, 280, 260, 320));
        let covered = (0..cfg.height_px)
            .flat_map(|y| (0..cfg.width_px).map(move |x| (x, y)))
            .filter(|&(x, y)| v.pixel(x, y) == fill || v.pixel(x, y) == edge)
            .count();
        assert_eq!(covered, 1600);
    }

    #[test]
    fn offender_outlined_in_both_views() {
        let cfg = RenderConfig::default();
        let s = scene(&[("cube", Orientation::IDENTITY, [0.0, 0.0]), ("cube", Orientation::IDENTITY, [30.0, 0.0])]);
        let views = render_feedback(&s, &[ViewAxis::Front, ViewAxis::Side], Some(1), &cfg);
        assert_eq!(views.len(), 2);
        for v in &views {
            assert!(v.bbox_of(HIGHLIGHT).is_some());
            assert!(v.highlights.contains(&1));
        }
    }

    #[test]
    fn lying_cylinder_is_round_from_the_side() {
        let cfg = RenderConfig::default();
        let s = scene(&[("cyl", Orientation::LyingX, [0.0, 0.0])]);
        let (p, _) = project(&s.blocks()[0], ViewAxis::Side, &cfg);
        assert!(matches!(p, Projected::Disc { r, .. } if (r - 15.0).abs() < 1e-12));
        let (p, _) = project(&s.blocks()[0], ViewAxis::Front, &cfg);
        assert!(matches!(p, Projected::Rect { .. }));
    }

    #[test]
    fn mesh_counts() {
        let s = scene(&[("cube", Orientation::IDENTITY, [0.0, 0.0])]);
        let obj = mesh_obj(&s);
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 8);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 12);

        let s = scene(&[("cyl", Orientation::Upright, [0.0, 0.0])]);
        let obj = mesh_obj(&s);
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 50);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 96);

        let obj = mesh_obj(&Scene::new(0.5));
        assert_eq!(obj.lines().filter(|l| l.starts_with("o ")).count(), 0);
        assert!(obj.starts_with("# blox"));
    }

    #[test]
    fn mesh_indices_in_range() {
        let s = scene(&[("cube", Orientation::IDENTITY, [0.0, 0.0]), ("cyl", Orientation::LyingY, [100.0, 0.0])]);
        let obj = mesh_obj(&s);
        let nv = obj.lines().filter(|l| l.starts_with("v ")).count();
        for l in obj.lines().filter(|l| l.starts_with("f ")) {
            for idx in l.split_whitespace().skip(1) {
                let i: usize = idx.parse().unwrap();
                assert!(i >= 1 && i <= nv);
            }
        }
    }

    #[test]
    fn colors() {
        assert_eq!(color_for("#102030"), [16, 32, 48]);
        assert_eq!(color_for("Red"), color_for("red"));
        assert_eq!(color_for("chartreuse"), color_for("chartreuse"));
    }
}
