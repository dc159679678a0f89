//! Drop-settle placement and the quasi-static stability oracle.
//!
//! Blocks are lowered at fixed `(x, y)` until their bottom face meets the
//! highest top face under their footprint, or the ground. Settled blocks are
//! frozen. A block is stable when the combined center of mass of the block
//! and the load it carries projects inside the convex hull of its contact
//! patches by more than `com_margin_mm`. Load from a block resting on several
//! supports is split equally among them; each share acts at the point of that
//! support's contact patch nearest the carried COM.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{AssemblyPlan, Catalog, CatalogError, Placement, Workspace};
use crate::geometry::{
    contact_patch, convex_hull, signed_boundary_distance, ContactPatch, PlacedBlock, Point2, Support,
    SupportRef,
};
use crate::render::ViewAxis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub density_kg_m3: f64,
    /// Carried for dynamic backends; quasi-statics applies no lateral forces.
    pub lateral_friction: f64,
    pub spinning_friction: f64,
    pub gravity_m_s2: f64,
    pub pos_threshold_mm: f64,
    pub rot_threshold_rad: f64,
    pub com_margin_mm: f64,
    /// Faces closer than this are treated as touching.
    pub contact_tol_mm: f64,
    /// Interpenetration below this is not a collision.
    pub collision_tol_mm: f64,
    pub workspace: Workspace,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            density_kg_m3: 1000.0,
            lateral_friction: 0.5,
            spinning_friction: 0.2,
            gravity_m_s2: -9.81,
            pos_threshold_mm: 10.0,
            rot_threshold_rad: 0.1,
            com_margin_mm: 1.0,
            contact_tol_mm: 0.5,
            collision_tol_mm: 0.01,
            workspace: Workspace::default(),
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.density_kg_m3 > 0.0) {
            return Err("density must be positive".into());
        }
        if !(self.pos_threshold_mm > 0.0 && self.rot_threshold_rad > 0.0) {
            return Err("thresholds must be positive".into());
        }
        if !(self.com_margin_mm >= 0.0 && self.contact_tol_mm >= 0.0 && self.collision_tol_mm >= 0.0) {
            return Err("margins and tolerances must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DropError {
    #[error("placement at ({}, {}) mm is outside the workspace", .0[0], .0[1])]
    OutOfWorkspace([f64; 2]),
    #[error("block {0:?} is not in the catalog")]
    UnknownBlock(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Error)]
#[error("block index {index} out of range for scene of {len} blocks")]
pub struct IndexError {
    pub index: usize,
    pub len: usize,
}

/// Settled world state. Blocks are in placement order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    blocks: Vec<PlacedBlock>,
    contacts: Vec<Vec<ContactPatch>>,
    contact_tol: f64,
}

impl Scene {
    pub fn new(contact_tol: f64) -> Self {
        Self { blocks: Vec::new(), contacts: Vec::new(), contact_tol }
    }

    /// Builds a scene from frozen poses, recomputing every contact.
    pub fn from_blocks(blocks: Vec<PlacedBlock>, contact_tol: f64) -> Self {
        let contacts = (0..blocks.len()).map(|i| contacts_for(&blocks, i, contact_tol)).collect();
        Self { blocks, contacts, contact_tol }
    }

    pub fn blocks(&self) -> &[PlacedBlock] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn contacts(&self, idx: usize) -> &[ContactPatch] {
        &self.contacts[idx]
    }

    pub fn supports(&self, idx: usize) -> BTreeSet<SupportRef> {
        self.contacts[idx].iter().map(|c| c.support).collect()
    }

    /// Edges `upper -> support`.
    pub fn support_graph(&self) -> Vec<(usize, SupportRef)> {
        self.contacts
            .iter()
            .enumerate()
            .flat_map(|(i, cs)| cs.iter().map(move |c| (i, c.support)))
            .collect()
    }

    /// Same scene with block `idx` replaced by `block`, contacts rebuilt.
    pub fn with_block(&self, idx: usize, block: PlacedBlock) -> Scene {
        let mut blocks = self.blocks.clone();
        blocks[idx] = block;
        Scene::from_blocks(blocks, self.contact_tol)
    }

    /// JSON list of resolved poses for external viewers.
    pub fn dump_json(&self) -> String {
        #[derive(Serialize)]
        struct Entry<'a> {
            index: usize,
            block_id: &'a str,
            orientation: String,
            color: &'a str,
            body: crate::geometry::Body,
            extents_mm: [f64; 3],
            center_mm: [f64; 3],
            supports: Vec<SupportRef>,
        }
        #[derive(Serialize)]
        struct Dump<'a> {
            schema_version: u32,
            blocks: Vec<Entry<'a>>,
        }
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| Entry {
                index: i,
                block_id: &b.placement.block_id,
                orientation: b.placement.orientation.to_string(),
                color: &b.placement.color,
                body: b.body,
                extents_mm: b.extents_mm,
                center_mm: b.center_mm,
                supports: self.supports(i).into_iter().collect(),
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&Dump { schema_version: 1, blocks }).expect("scene serializes");
        s.push('\n');
        s
    }
}

/// Height at which a block with this footprint comes to rest over `blocks`.
pub fn resting_height(blocks: &[PlacedBlock], probe: &PlacedBlock) -> f64 {
    let fp = probe.footprint();
    blocks
        .iter()
        .filter(|b| b.footprint().overlaps(&fp))
        .map(PlacedBlock::top)
        .fold(0.0, f64::max)
}

/// Contact patches of `blocks[idx]` against the ground and every other block.
pub fn contacts_for(blocks: &[PlacedBlock], idx: usize, tol: f64) -> Vec<ContactPatch> {
    let upper = &blocks[idx];
    let mut out: Vec<ContactPatch> = contact_patch(upper, Support::Ground, tol).into_iter().collect();
    out.extend(
        blocks
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != idx)
            .filter_map(|(j, lower)| contact_patch(upper, Support::Block(j, lower), tol)),
    );
    out
}

/// Drops a new block at its `(x, y)` onto the scene.
pub fn drop_settle(scene: &Scene, catalog: &Catalog, p: &Placement, params: &SimParams) -> Result<Scene, DropError> {
    if !params.workspace.contains(p.xy_mm) {
        return Err(DropError::OutOfWorkspace(p.xy_mm));
    }
    let spec = catalog.get(&p.block_id).ok_or_else(|| DropError::UnknownBlock(p.block_id.clone()))?;
    let probe = PlacedBlock::new(spec, p.clone(), 0.0)?;
    let block = probe.relocated(probe.xy(), resting_height(&scene.blocks, &probe));
    let mut next = scene.clone();
    next.contact_tol = params.contact_tol_mm;
    next.blocks.push(block);
    let idx = next.blocks.len() - 1;
    let contacts = contacts_for(&next.blocks, idx, params.contact_tol_mm);
    next.contacts.push(contacts);
    Ok(next)
}

/// Why a block fails the stability test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Failure {
    /// No contact patch at all while above the ground.
    Unsupported,
    /// Supported-load COM projects outside the support polygon.
    Tips,
    /// COM inside the polygon but within the stability margin.
    Marginal,
}

/// Per-block stability detail.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStability {
    pub index: usize,
    pub failure: Option<Failure>,
    /// Mass of the block plus its attributed share of everything above it.
    pub load_kg: f64,
    pub com_xy: Point2,
    /// Signed distance of the COM to the support-polygon boundary (inside positive).
    pub edge_distance_mm: f64,
    /// Unit vector pointing out of the support polygon, across its nearest edge.
    pub tip_direction: Option<Point2>,
    pub hull: Vec<Point2>,
}

impl BlockStability {
    pub fn stable(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, Copy)]
struct Load {
    mass: f64,
    moment: [f64; 2],
}

fn loads(scene: &Scene, density: f64) -> Vec<Load> {
    let n = scene.len();
    let mut acc: Vec<Load> = scene
        .blocks
        .iter()
        .map(|b| {
            let m = b.mass_kg(density);
            Load { mass: m, moment: [m * b.center_mm[0], m * b.center_mm[1]] }
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scene.blocks[b].bottom().total_cmp(&scene.blocks[a].bottom()).then(b.cmp(&a)));
    for j in order {
        let k = scene.contacts[j].len();
        if k == 0 {
            continue;
        }
        let share = acc[j].mass / k as f64;
        let com = [acc[j].moment[0] / acc[j].mass, acc[j].moment[1] / acc[j].mass];
        for c in &scene.contacts[j] {
            if let SupportRef::Block(i) = c.support {
                // a support can only push within its own contact patch
                let (d, nearest) = signed_boundary_distance(&c.polygon, com);
                let at = if d >= 0.0 { com } else { nearest };
                acc[i].mass += share;
                acc[i].moment[0] += share * at[0];
                acc[i].moment[1] += share * at[1];
            }
        }
    }
    acc
}

fn evaluate(scene: &Scene, idx: usize, load: Load, params: &SimParams) -> BlockStability {
    let com_xy = [load.moment[0] / load.mass, load.moment[1] / load.mass];
    let patches = &scene.contacts[idx];
    if patches.is_empty() {
        return BlockStability {
            index: idx,
            failure: Some(Failure::Unsupported),
            load_kg: load.mass,
            com_xy,
            edge_distance_mm: f64::NEG_INFINITY,
            tip_direction: None,
            hull: Vec::new(),
        };
    }
    let pts: Vec<Point2> = patches.iter().flat_map(|p| p.polygon.iter().copied()).collect();
    let hull = convex_hull(&pts);
    let (d, nearest) = signed_boundary_distance(&hull, com_xy);
    let raw = if d >= 0.0 {
        [nearest[0] - com_xy[0], nearest[1] - com_xy[1]]
    } else {
        [com_xy[0] - nearest[0], com_xy[1] - nearest[1]]
    };
    let norm = raw[0].hypot(raw[1]);
    let tip_direction = (norm > 0.0).then(|| [raw[0] / norm, raw[1] / norm]);
    let failure = if d <= 0.0 {
        Some(Failure::Tips)
    } else if d <= params.com_margin_mm {
        Some(Failure::Marginal)
    } else {
        None
    };
    BlockStability { index: idx, failure, load_kg: load.mass, com_xy, edge_distance_mm: d, tip_direction, hull }
}

/// Stability of every block, in index order.
pub fn all_block_stability(scene: &Scene, params: &SimParams) -> Vec<BlockStability> {
    let loads = loads(scene, params.density_kg_m3);
    (0..scene.len()).map(|i| evaluate(scene, i, loads[i], params)).collect()
}

pub fn block_stability(scene: &Scene, idx: usize, params: &SimParams) -> Result<BlockStability, IndexError> {
    if idx >= scene.len() {
        return Err(IndexError { index: idx, len: scene.len() });
    }
    let loads = loads(scene, params.density_kg_m3);
    Ok(evaluate(scene, idx, loads[idx], params))
}

/// Outcome of a stability check, shaped for feedback to the designer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub offender: Option<usize>,
    /// How far each block misses the stability test (zero when stable).
    pub displacement_mm: Vec<f64>,
    pub diagnostic: String,
    /// Direction the offender would move, in the ground plane.
    pub tip_direction: Option<Point2>,
    /// Views to render for feedback; the offender is highlighted in each.
    pub views: Vec<ViewAxis>,
}

impl StabilityReport {
    fn stable(n: usize) -> Self {
        Self {
            stable: true,
            offender: None,
            displacement_mm: vec![0.0; n],
            diagnostic: "all blocks stable".into(),
            tip_direction: None,
            views: vec![ViewAxis::Front, ViewAxis::Side],
        }
    }

    fn from_states(scene: &Scene, states: &[BlockStability], params: &SimParams) -> Self {
        let mut report = Self::stable(scene.len());
        for s in states {
            report.displacement_mm[s.index] = match s.failure {
                None => 0.0,
                Some(Failure::Unsupported) => scene.blocks[s.index].bottom().max(0.0),
                Some(_) => params.com_margin_mm - s.edge_distance_mm,
            };
        }
        if let Some(s) = states.iter().find(|s| !s.stable()) {
            report.stable = false;
            report.offender = Some(s.index);
            report.tip_direction = s.tip_direction;
            report.diagnostic = describe(scene, s, params);
        }
        report
    }
}

fn describe(scene: &Scene, s: &BlockStability, params: &SimParams) -> String {
    let id = &scene.blocks[s.index].placement.block_id;
    let dir = s
        .tip_direction
        .map(|d| format!(", would move toward ({:.2}, {:.2})", d[0], d[1]))
        .unwrap_or_default();
    match s.failure {
        Some(Failure::Unsupported) => format!("block {} ({id}) has no support", s.index),
        Some(Failure::Tips) => format!(
            "COM outside support polygon of block {} ({id}) by {:.1} mm{dir}",
            s.index, -s.edge_distance_mm
        ),
        Some(Failure::Marginal) => format!(
            "COM within {:.1} mm margin of support polygon edge of block {} ({id}){dir}",
            params.com_margin_mm, s.index
        ),
        None => format!("block {} stable", s.index),
    }
}

pub fn check_block_stability(scene: &Scene, idx: usize, params: &SimParams) -> Result<StabilityReport, IndexError> {
    let state = block_stability(scene, idx, params)?;
    Ok(StabilityReport::from_states(scene, std::slice::from_ref(&state), params))
}

/// Whole-scene check; the offender is the lowest-index failing block.
pub fn check_scene_stability(scene: &Scene, params: &SimParams) -> StabilityReport {
    let states = all_block_stability(scene, params);
    StabilityReport::from_states(scene, &states, params)
}

/// Final scene plus one report per construction step.
#[derive(Debug, Clone)]
pub struct SettledPlan {
    pub scene: Scene,
    pub reports: Vec<StabilityReport>,
}

impl SettledPlan {
    /// First failing step report, or the final one.
    pub fn summary(&self) -> StabilityReport {
        self.reports
            .iter()
            .find(|r| !r.stable)
            .or(self.reports.last())
            .cloned()
            .unwrap_or_else(|| StabilityReport::stable(0))
    }

    pub fn all_stable(&self) -> bool {
        self.reports.iter().all(|r| r.stable)
    }
}

/// Drops every placement in order, checking the scene after each step.
pub fn settle_plan(plan: &AssemblyPlan, catalog: &Catalog, params: &SimParams, fail_fast: bool) -> Result<SettledPlan, DropError> {
    let mut scene = Scene::new(params.contact_tol_mm);
    let mut reports = Vec::with_capacity(plan.len());
    for p in &plan.placements {
        scene = drop_settle(&scene, catalog, p, params)?;
        let report = check_scene_stability(&scene, params);
        let failed = !report.stable;
        reports.push(report);
        if failed && fail_fast {
            break;
        }
    }
    Ok(SettledPlan { scene, reports })
}
