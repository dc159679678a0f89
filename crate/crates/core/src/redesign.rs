//! Perturbation-based redesign.
//!
//! Walks the blocks in placement order and flags any block that sits too
//! close to a side neighbor, already interpenetrates another block, or
//! becomes unstable somewhere on a small ring of nearby positions. A
//! flagged block is moved to the mean of the sampled positions that keep
//! the scene stable, collision-free and clear of neighbors. Passes repeat
//! until nothing is flagged or the per-block visit budget runs out.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{AssemblyPlan, Catalog};
use crate::geometry::{gravity_axis_overlap, in_collision, surface_distance, PlacedBlock, Point2};
use crate::statics::{
    block_stability, check_scene_stability, resting_height, settle_plan, DropError, Scene, SimParams,
    StabilityReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RedesignParams {
    pub collision_threshold_mm: f64,
    pub circles: u32,
    pub points_per_circle: u32,
    pub radius_min_mm: f64,
    pub radius_max_mm: f64,
    pub max_visits_per_block: u32,
    pub instability_probe_radius_mm: f64,
}

impl Default for RedesignParams {
    fn default() -> Self {
        Self {
            collision_threshold_mm: 5.0,
            circles: 10,
            points_per_circle: 8,
            radius_min_mm: 1.0,
            radius_max_mm: 15.0,
            max_visits_per_block: 10,
            instability_probe_radius_mm: 15.0,
        }
    }
}

impl RedesignParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.collision_threshold_mm > 0.0 && self.radius_min_mm > 0.0 && self.instability_probe_radius_mm > 0.0) {
            return Err("thresholds and radii must be positive".into());
        }
        if self.radius_min_mm > self.radius_max_mm {
            return Err("radius_min_mm must not exceed radius_max_mm".into());
        }
        if self.circles < 1 || self.points_per_circle < 3 || self.max_visits_per_block < 1 {
            return Err("need circles >= 1, points_per_circle >= 3, max_visits_per_block >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Closer than the collision threshold to a side neighbor.
    Proximity,
    /// Already interpenetrating another block.
    Collision,
    /// Unstable at some sampled point near its nominal position.
    NearbyInstability,
}

/// Concentric-ring sample offsets, then the origin last.
///
/// Radii are evenly spaced over `[radius_min, radius_max]`; points on each
/// ring start at angle 0 and are evenly spaced.
pub fn sample_offsets(params: &RedesignParams) -> Vec<Point2> {
    let n = params.circles as usize;
    let m = params.points_per_circle as usize;
    let mut out = Vec::with_capacity(n * m + 1);
    for c in 0..n {
        let r = if n == 1 {
            params.radius_min_mm
        } else {
            params.radius_min_mm + (params.radius_max_mm - params.radius_min_mm) * c as f64 / (n - 1) as f64
        };
        for k in 0..m {
            let t = std::f64::consts::TAU * k as f64 / m as f64;
            out.push([r * t.cos(), r * t.sin()]);
        }
    }
    out.push([0.0, 0.0]);
    out
}

/// Scene with block `idx` re-dropped at `xy` over the blocks placed before
/// it; every other block keeps its pose.
pub fn reposition(scene: &Scene, idx: usize, xy: Point2) -> Scene {
    let block = &scene.blocks()[idx];
    let probe = block.relocated(xy, 0.0);
    let bottom = resting_height(&scene.blocks()[..idx], &probe);
    scene.with_block(idx, block.relocated(xy, bottom))
}

fn stacked(a: &PlacedBlock, b: &PlacedBlock, tol: f64) -> bool {
    (a.bottom() - b.top()).abs() <= tol || (b.bottom() - a.top()).abs() <= tol
}

fn proximity_violation(scene: &Scene, idx: usize, params: &RedesignParams, sim: &SimParams) -> bool {
    let a = &scene.blocks()[idx];
    scene.blocks().iter().enumerate().any(|(j, b)| {
        j != idx
            && gravity_axis_overlap(a, b)
            && !stacked(a, b, sim.contact_tol_mm)
            && surface_distance(a, b) < params.collision_threshold_mm
    })
}

fn collision_violation(scene: &Scene, idx: usize, sim: &SimParams) -> bool {
    let a = &scene.blocks()[idx];
    scene
        .blocks()
        .iter()
        .enumerate()
        .any(|(j, b)| j != idx && in_collision(a, b, sim.collision_tol_mm))
}

/// The redesign criteria block `idx` currently violates.
///
/// Proximity ignores pairs stacked face to face; those are supports, not
/// side neighbors.
pub fn needs_perturbation(scene: &Scene, idx: usize, params: &RedesignParams, sim: &SimParams) -> BTreeSet<Criterion> {
    let mut out = BTreeSet::new();
    if proximity_violation(scene, idx, params, sim) {
        out.insert(Criterion::Proximity);
    }
    if collision_violation(scene, idx, sim) {
        out.insert(Criterion::Collision);
    }
    let nominal = scene.blocks()[idx].xy();
    let unstable_nearby = sample_offsets(params)
        .par_iter()
        .filter(|o| o[0].hypot(o[1]) <= params.instability_probe_radius_mm + 1e-9)
        .map(|o| [nominal[0] + o[0], nominal[1] + o[1]])
        .filter(|xy| sim.workspace.contains(*xy))
        .any(|xy| {
            let probe = reposition(scene, idx, xy);
            !block_stability(&probe, idx, sim).map(|s| s.stable()).unwrap_or(false)
        });
    if unstable_nearby {
        out.insert(Criterion::NearbyInstability);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbResult {
    /// Mean of the feasible positions; `None` when nothing was feasible.
    pub new_xy: Option<Point2>,
    pub feasible: usize,
    pub feasible_positions: Vec<Point2>,
}

/// Whether block `idx` may sit at `xy` with everything else frozen.
pub fn position_feasible(scene: &Scene, idx: usize, xy: Point2, params: &RedesignParams, sim: &SimParams) -> bool {
    if !sim.workspace.contains(xy) {
        return false;
    }
    let probe = reposition(scene, idx, xy);
    check_scene_stability(&probe, sim).stable
        && !collision_violation(&probe, idx, sim)
        && !proximity_violation(&probe, idx, params, sim)
}

/// Samples around the nominal position and averages the feasible ones.
pub fn perturb_block(scene: &Scene, idx: usize, params: &RedesignParams, sim: &SimParams) -> PerturbResult {
    let nominal = scene.blocks()[idx].xy();
    let feasible_positions: Vec<Point2> = sample_offsets(params)
        .par_iter()
        .map(|o| [nominal[0] + o[0], nominal[1] + o[1]])
        .filter(|xy| position_feasible(scene, idx, *xy, params, sim))
        .collect();
    let feasible = feasible_positions.len();
    let new_xy = (feasible > 0).then(|| {
        let sum = feasible_positions.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
        [sum[0] / feasible as f64, sum[1] / feasible as f64]
    });
    PerturbResult { new_xy, feasible, feasible_positions }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    pub block: usize,
    pub pass: usize,
    pub old_xy: Point2,
    pub new_xy: Point2,
    pub criteria: BTreeSet<Criterion>,
    pub feasible_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedesignReport {
    pub adjusted: Vec<Adjustment>,
    pub visits: Vec<u32>,
    pub converged: bool,
    pub passes: usize,
    /// Blocks that had no feasible sample on some visit.
    pub infeasible: Vec<usize>,
    /// Stability of the redesigned plan, re-settled from scratch.
    pub final_report: StabilityReport,
}

impl RedesignReport {
    pub fn total_perturbations(&self) -> u32 {
        self.visits.iter().sum()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Moves flagged blocks until a pass flags nothing, no flagged block can
/// move, or the flagged blocks have used up their visits.
///
/// Only `xy_mm` fields change. A visit is one [`perturb_block`] call.
pub fn redesign(
    plan: &AssemblyPlan,
    catalog: &Catalog,
    params: &RedesignParams,
    sim: &SimParams,
) -> Result<(AssemblyPlan, RedesignReport), DropError> {
    let mut working = plan.clone();
    let mut scene = settle_plan(&working, catalog, sim, false)?.scene;
    let n = working.len();
    let mut visits = vec![0u32; n];
    let mut adjusted = Vec::new();
    let mut infeasible = BTreeSet::new();
    let mut passes = 0;
    let converged = loop {
        passes += 1;
        let mut flagged = false;
        let mut moved = false;
        for idx in 0..n {
            let criteria = needs_perturbation(&scene, idx, params, sim);
            if criteria.is_empty() {
                continue;
            }
            flagged = true;
            if visits[idx] >= params.max_visits_per_block {
                continue;
            }
            visits[idx] += 1;
            let result = perturb_block(&scene, idx, params, sim);
            let old_xy = working.placements[idx].xy_mm;
            match result.new_xy {
                None => {
                    infeasible.insert(idx);
                }
                Some(new_xy) if (new_xy[0] - old_xy[0]).hypot(new_xy[1] - old_xy[1]) > 1e-9 => {
                    working.placements[idx].xy_mm = new_xy;
                    scene = settle_plan(&working, catalog, sim, false)?.scene;
                    adjusted.push(Adjustment {
                        block: idx,
                        pass: passes,
                        old_xy,
                        new_xy,
                        criteria,
                        feasible_samples: result.feasible,
                    });
                    moved = true;
                }
                Some(_) => {}
            }
        }
        if !flagged {
            break true;
        }
        if !moved {
            break false;
        }
    };
    let settled = settle_plan(&working, catalog, sim, false)?;
    let report = RedesignReport {
        adjusted,
        visits,
        converged,
        passes,
        infeasible: infeasible.into_iter().collect(),
        final_report: settled.summary(),
    };
    Ok((working, report))
}
