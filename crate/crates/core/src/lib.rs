//! Generative block-assembly design engine.
//!
//! Language-model design prompting with simulation-in-the-loop repair,
//! a deterministic drop-settle statics oracle, perturbation redesign for
//! placement-noise tolerance, and noisy-assembly evaluation.

pub mod bundled;
pub mod catalog;
pub mod designer;
pub mod evalharness;
pub mod geometry;
pub mod redesign;
pub mod render;
pub mod statics;

pub use catalog::{
    effective_dims, load_catalog, load_plan, save_catalog, save_plan, validate_plan, AssemblyPlan, BlockSpec,
    Catalog, CatalogError, Orientation, Placement, PlanReport, Shape, Violation, Workspace,
};
pub use designer::{
    design, generate_candidates, select_best, DesignCandidate, DesignError, DesignParams, LmClient, LmError,
    Recorder, ReplayClient, ScriptedClient, Transcript,
};
pub use evalharness::{recognizability, run_ablation, simulate_trial, EvalError, NoiseModel, RecogResult, TrialMetrics};
pub use geometry::{PlacedBlock, SupportRef};
pub use redesign::{needs_perturbation, perturb_block, redesign, Criterion, RedesignParams, RedesignReport};
pub use render::{render_ortho, OrthoView, RenderConfig, ViewAxis};
pub use statics::{check_scene_stability, drop_settle, settle_plan, Scene, SimParams, StabilityReport};
