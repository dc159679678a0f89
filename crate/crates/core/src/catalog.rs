//! Block inventory and assembly-plan documents.
//!
//! A catalog lists the physical blocks available for a build. A plan is an
//! ordered list of placements; list position is construction order, and
//! each block is dropped at its `(x, y)` target. Orientation is expressed
//! by permuting a block's catalog dimensions onto the world axes, so every
//! placed block stays axis-aligned.
//!
//! Both documents are JSON with explicit millimeter units and a
//! `schema_version` field.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Current version written into catalog and plan documents.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("orientation {orientation} is not valid for a {shape} block")]
    InvalidOrientation { orientation: Orientation, shape: &'static str },
    #[error("unsupported schema_version {0}")]
    SchemaVersion(u32),
}

/// Geometric class of a block together with its nominal dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Cuboid { length: f64, width: f64, height: f64 },
    Cylinder { diameter: f64, height: f64 },
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Cuboid { .. } => "cuboid",
            Shape::Cylinder { .. } => "cylinder",
        }
    }

    fn dims(&self) -> Vec<f64> {
        match *self {
            Shape::Cuboid { length, width, height } => vec![length, width, height],
            Shape::Cylinder { diameter, height } => vec![diameter, height],
        }
    }

    /// Volume in cubic millimeters.
    pub fn volume_mm3(&self) -> f64 {
        match *self {
            Shape::Cuboid { length, width, height } => length * width * height,
            Shape::Cylinder { diameter, height } => {
                std::f64::consts::PI * 0.25 * diameter * diameter * height
            }
        }
    }
}

/// One catalog entry.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub id: String,
    pub shape: Shape,
    pub count: u32,
}

#[derive(Serialize, Deserialize)]
struct RawBlockSpec {
    id: String,
    shape: String,
    dims_mm: Vec<f64>,
    count: i64,
}

impl BlockSpec {
    pub fn cuboid(id: impl Into<String>, dims: [f64; 3], count: u32) -> Self {
        Self {
            id: id.into(),
            shape: Shape::Cuboid { length: dims[0], width: dims[1], height: dims[2] },
            count,
        }
    }

    pub fn cylinder(id: impl Into<String>, diameter: f64, height: f64, count: u32) -> Self {
        Self { id: id.into(), shape: Shape::Cylinder { diameter, height }, count }
    }

    fn to_raw(&self) -> RawBlockSpec {
        RawBlockSpec {
            id: self.id.clone(),
            shape: self.shape.name().to_string(),
            dims_mm: self.shape.dims(),
            count: i64::from(self.count),
        }
    }

    fn from_raw(raw: RawBlockSpec) -> Result<Self, CatalogError> {
        let shape = match raw.shape.to_ascii_lowercase().as_str() {
            "cuboid" => match raw.dims_mm[..] {
                [length, width, height] => Shape::Cuboid { length, width, height },
                _ => {
                    return Err(CatalogError::Validation(format!(
                        "block {:?}: cuboid needs 3 dimensions, got {}",
                        raw.id,
                        raw.dims_mm.len()
                    )))
                }
            },
            "cylinder" => match raw.dims_mm[..] {
                [diameter, height] => Shape::Cylinder { diameter, height },
                _ => {
                    return Err(CatalogError::Validation(format!(
                        "block {:?}: cylinder needs (diameter, height), got {} values",
                        raw.id,
                        raw.dims_mm.len()
                    )))
                }
            },
            other => {
                return Err(CatalogError::Validation(format!(
                    "block {:?}: unknown shape {other:?}",
                    raw.id
                )))
            }
        };
        if raw.dims_mm.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(CatalogError::Validation(format!(
                "block {:?}: dimensions must be strictly positive, got {:?}",
                raw.id, raw.dims_mm
            )));
        }
        let count = u32::try_from(raw.count).map_err(|_| {
            CatalogError::Validation(format!("block {:?}: count must be >= 0", raw.id))
        })?;
        Ok(Self { id: raw.id, shape, count })
    }
}

/// A validated block inventory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Catalog {
    blocks: Vec<BlockSpec>,
}

#[derive(Serialize, Deserialize)]
struct CatalogDoc {
    schema_version: u32,
    blocks: Vec<RawBlockSpec>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CatalogInput {
    Doc(CatalogDoc),
    Bare(Vec<RawBlockSpec>),
}

impl Catalog {
    /// Builds a catalog, rejecting duplicate ids and non-positive dimensions.
    pub fn new(blocks: Vec<BlockSpec>) -> Result<Self, CatalogError> {
        let mut seen = HashSet::new();
        for b in &blocks {
            if !seen.insert(b.id.as_str()) {
                return Err(CatalogError::Validation(format!("duplicate block id {:?}", b.id)));
            }
            if b.shape.dims().iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                return Err(CatalogError::Validation(format!(
                    "block {:?}: dimensions must be strictly positive",
                    b.id
                )));
            }
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn get(&self, id: &str) -> Option<&BlockSpec> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let input: CatalogInput =
            serde_json::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        let raw = match input {
            CatalogInput::Doc(doc) => {
                if doc.schema_version != SCHEMA_VERSION {
                    return Err(CatalogError::SchemaVersion(doc.schema_version));
                }
                doc.blocks
            }
            CatalogInput::Bare(blocks) => blocks,
        };
        let blocks = raw.into_iter().map(BlockSpec::from_raw).collect::<Result<Vec<_>, _>>()?;
        Self::new(blocks)
    }

    pub fn to_json(&self) -> String {
        let doc = CatalogDoc {
            schema_version: SCHEMA_VERSION,
            blocks: self.blocks.iter().map(BlockSpec::to_raw).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("catalog serializes")
    }

    /// Compact JSON array of blocks, the form embedded in model prompts.
    pub fn to_prompt_json(&self) -> String {
        let raw: Vec<_> = self.blocks.iter().map(BlockSpec::to_raw).collect();
        serde_json::to_string(&raw).expect("catalog serializes")
    }

    /// Hex SHA-256 of the compact block list; identifies the catalog a plan targets.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_prompt_json().as_bytes()))
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
    Catalog::from_json(&text)
}

pub fn save_catalog(catalog: &Catalog, path: impl AsRef<Path>) -> Result<(), CatalogError> {
    let path = path.as_ref();
    std::fs::write(path, catalog.to_json())
        .map_err(|source| CatalogError::Io { path: path.display().to_string(), source })
}

/// Canonical block axis a world axis draws its extent from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dim {
    Length,
    Width,
    Height,
}

impl Dim {
    fn letter(self) -> char {
        match self {
            Dim::Length => 'L',
            Dim::Width => 'W',
            Dim::Height => 'H',
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Dimension-permutation orientation.
///
/// Cuboids carry the canonical dimension assigned to each world axis
/// `(x, y, z)`, written as a three-letter code such as `"LWH"` (identity)
/// or `"HWL"` (height along x, length vertical). Cylinders are upright or
/// lying with their axis along x or y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Cuboid([Dim; 3]),
    Upright,
    LyingX,
    LyingY,
}

impl Orientation {
    pub const IDENTITY: Orientation = Orientation::Cuboid([Dim::Length, Dim::Width, Dim::Height]);

    /// All six cuboid permutations.
    pub fn cuboid_perms() -> [Orientation; 6] {
        use Dim::*;
        [
            Orientation::Cuboid([Length, Width, Height]),
            Orientation::Cuboid([Length, Height, Width]),
            Orientation::Cuboid([Width, Length, Height]),
            Orientation::Cuboid([Width, Height, Length]),
            Orientation::Cuboid([Height, Length, Width]),
            Orientation::Cuboid([Height, Width, Length]),
        ]
    }

    pub fn cylinder_orientations() -> [Orientation; 3] {
        [Orientation::Upright, Orientation::LyingX, Orientation::LyingY]
    }

    pub fn is_valid_for(&self, shape: &Shape) -> bool {
        match (self, shape) {
            (Orientation::Cuboid(p), Shape::Cuboid { .. }) => {
                let mut seen = [false; 3];
                p.iter().for_each(|d| seen[d.index()] = true);
                seen.iter().all(|s| *s)
            }
            (Orientation::Cuboid(_), Shape::Cylinder { .. }) => false,
            (_, Shape::Cylinder { .. }) => true,
            (_, Shape::Cuboid { .. }) => false,
        }
    }

    /// The permutation that undoes this one (cuboids only).
    pub fn inverse(&self) -> Option<Orientation> {
        const ORDER: [Dim; 3] = [Dim::Length, Dim::Width, Dim::Height];
        match self {
            Orientation::Cuboid(p) => {
                let mut inv = [Dim::Length; 3];
                for (axis, d) in p.iter().enumerate() {
                    inv[d.index()] = ORDER[axis];
                }
                Some(Orientation::Cuboid(inv))
            }
            _ => None,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Orientation::Cuboid(p) => {
                for d in p {
                    write!(f, "{}", d.letter())?;
                }
                Ok(())
            }
            Orientation::Upright => f.write_str("upright"),
            Orientation::LyingX => f.write_str("lying_x"),
            Orientation::LyingY => f.write_str("lying_y"),
        }
    }
}

impl FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "upright" => return Ok(Orientation::Upright),
            "lying_x" => return Ok(Orientation::LyingX),
            "lying_y" => return Ok(Orientation::LyingY),
            _ => {}
        }
        let letters: Vec<char> = t.to_ascii_uppercase().chars().collect();
        if letters.len() == 3 {
            let mut perm = [Dim::Length; 3];
            for (slot, c) in perm.iter_mut().zip(&letters) {
                *slot = match c {
                    'L' => Dim::Length,
                    'W' => Dim::Width,
                    'H' => Dim::Height,
                    _ => return Err(format!("unknown orientation {s:?}")),
                };
            }
            // repeated letters parse; validity is checked against the shape
            return Ok(Orientation::Cuboid(perm));
        }
        Err(format!("unknown orientation {s:?}"))
    }
}

impl Serialize for Orientation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Orientation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// World-axis extents `(x, y, z)` of a block in the given orientation.
pub fn effective_dims(spec: &BlockSpec, o: Orientation) -> Result<[f64; 3], CatalogError> {
    if !o.is_valid_for(&spec.shape) {
        return Err(CatalogError::InvalidOrientation { orientation: o, shape: spec.shape.name() });
    }
    Ok(match (spec.shape, o) {
        (Shape::Cuboid { length, width, height }, Orientation::Cuboid(p)) => {
            let canon = [length, width, height];
            [canon[p[0].index()], canon[p[1].index()], canon[p[2].index()]]
        }
        (Shape::Cylinder { diameter: d, height: h }, Orientation::Upright) => [d, d, h],
        (Shape::Cylinder { diameter: d, height: h }, Orientation::LyingX) => [h, d, d],
        (Shape::Cylinder { diameter: d, height: h }, Orientation::LyingY) => [d, h, d],
        _ => unreachable!("validity checked above"),
    })
}

/// Square buildable area centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub half_extent_mm: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Self { half_extent_mm: 200.0 }
    }
}

impl Workspace {
    pub fn contains(&self, xy: [f64; 2]) -> bool {
        xy.iter().all(|v| v.is_finite() && v.abs() <= self.half_extent_mm)
    }
}

/// One construction step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub block_id: String,
    pub orientation: Orientation,
    pub xy_mm: [f64; 2],
    #[serde(default)]
    pub color: String,
}

/// Ordered placements; list position is drop order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyPlan {
    pub prompt: String,
    #[serde(default)]
    pub catalog_hash: String,
    pub placements: Vec<Placement>,
}

#[derive(Serialize)]
struct PlanDocOut<'a> {
    schema_version: u32,
    #[serde(flatten)]
    plan: &'a AssemblyPlan,
}

#[derive(Deserialize)]
struct PlanDocIn {
    #[serde(default = "default_version")]
    schema_version: u32,
    #[serde(flatten)]
    plan: AssemblyPlan,
}

fn default_version() -> u32 {
    SCHEMA_VERSION
}

impl AssemblyPlan {
    pub fn new(prompt: impl Into<String>, catalog: &Catalog, placements: Vec<Placement>) -> Self {
        Self { prompt: prompt.into(), catalog_hash: catalog.hash(), placements }
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let doc: PlanDocIn =
            serde_json::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(CatalogError::SchemaVersion(doc.schema_version));
        }
        Ok(doc.plan)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&PlanDocOut { schema_version: SCHEMA_VERSION, plan: self })
            .expect("plan serializes");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of the serialized plan.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

pub fn load_plan(path: impl AsRef<Path>) -> Result<AssemblyPlan, CatalogError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
    AssemblyPlan::from_json(&text)
}

pub fn save_plan(plan: &AssemblyPlan, path: impl AsRef<Path>) -> Result<(), CatalogError> {
    let path = path.as_ref();
    std::fs::write(path, plan.to_json())
        .map_err(|source| CatalogError::Io { path: path.display().to_string(), source })
}

/// A structural problem found by [`validate_plan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnavailableBlock { index: usize, block_id: String },
    CountExceeded { block_id: String, used: u32, available: u32 },
    OutOfWorkspace { index: usize, xy_mm: [f64; 2] },
    InvalidOrientation { index: usize, block_id: String, orientation: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnavailableBlock { index, block_id } => {
                write!(f, "unavailable block: placement {index} uses {block_id:?}, which is not in the catalog")
            }
            Violation::CountExceeded { block_id, used, available } => {
                write!(f, "count exceeded: {block_id:?} used {used} times, only {available} available")
            }
            Violation::OutOfWorkspace { index, xy_mm } => write!(
                f,
                "out of workspace: placement {index} at ({}, {}) mm",
                xy_mm[0], xy_mm[1]
            ),
            Violation::InvalidOrientation { index, block_id, orientation } => write!(
                f,
                "invalid orientation: placement {index} ({block_id:?}) cannot use {orientation:?}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanReport {
    pub violations: Vec<Violation>,
}

impl PlanReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that a plan is structurally executable against a catalog.
///
/// Using fewer units than available is always legal.
pub fn validate_plan(plan: &AssemblyPlan, catalog: &Catalog, workspace: &Workspace) -> PlanReport {
    let mut violations = Vec::new();
    let mut usage: BTreeMap<&str, u32> = BTreeMap::new();
    for (index, p) in plan.placements.iter().enumerate() {
        match catalog.get(&p.block_id) {
            None => violations.push(Violation::UnavailableBlock { index, block_id: p.block_id.clone() }),
            Some(spec) => {
                *usage.entry(spec.id.as_str()).or_default() += 1;
                if !p.orientation.is_valid_for(&spec.shape) {
                    violations.push(Violation::InvalidOrientation {
                        index,
                        block_id: p.block_id.clone(),
                        orientation: p.orientation.to_string(),
                    });
                }
            }
        }
        if !workspace.contains(p.xy_mm) {
            violations.push(Violation::OutOfWorkspace { index, xy_mm: p.xy_mm });
        }
    }
    for (id, used) in usage {
        let available = catalog.get(id).map_or(0, |s| s.count);
        if used > available {
            violations.push(Violation::CountExceeded { block_id: id.to_string(), used, available });
        }
    }
    PlanReport { violations }
}
