//! Noisy assembly trials, the redesign ablation, and the label-ranking
//! recognizability protocol.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{AssemblyPlan, Catalog, Workspace};
use crate::designer::client::{Conversation, Image, LmClient, LmError, Message};
use crate::designer::parse::parse_ranking;
use crate::designer::prompts;
use crate::geometry::{Point2, SupportRef};
use crate::redesign::{redesign, RedesignParams, RedesignReport};
use crate::statics::{check_scene_stability, drop_settle, settle_plan, DropError, Scene, SimParams};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Drop(#[from] DropError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("design {design}: reply is not a ranking of the given labels: {reply:?}")]
    Protocol { design: usize, reply: String },
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Isotropic Gaussian xy placement error, truncated at three sigma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub xy_sigma_mm: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { xy_sigma_mm: 3.0, seed: 0 }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), String> {
        if self.xy_sigma_mm.is_finite() && self.xy_sigma_mm >= 0.0 {
            Ok(())
        } else {
            Err("xy_sigma_mm must be finite and non-negative".into())
        }
    }

    /// One offset per placement for the given trial.
    pub fn offsets(&self, trial_seed: u64, n: usize) -> Vec<Point2> {
        let s = self.xy_sigma_mm;
        if s == 0.0 {
            return vec![[0.0, 0.0]; n];
        }
        let mut rng = rng_for(self.seed, trial_seed);
        let normal = Normal::new(0.0, s).expect("sigma validated");
        (0..n)
            .map(|_| loop {
                let p = [normal.sample(&mut rng), normal.sample(&mut rng)];
                if p[0].hypot(p[1]) <= 3.0 * s {
                    break p;
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockOutcome {
    pub index: usize,
    pub offset_mm: Point2,
    pub placed_correct: bool,
    pub end_correct: bool,
    pub fallen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub correct_at_placement: f64,
    pub correct_end_state: f64,
    pub full_completion: bool,
    pub blocks: Vec<BlockOutcome>,
}

impl TrialMetrics {
    pub fn from_outcomes(blocks: Vec<BlockOutcome>) -> Self {
        // an empty plan is vacuously complete
        let frac = |f: fn(&BlockOutcome) -> bool| {
            if blocks.is_empty() {
                1.0
            } else {
                blocks.iter().filter(|b| f(b)).count() as f64 / blocks.len() as f64
            }
        };
        let placed = frac(|b| b.placed_correct);
        let end = frac(|b| b.end_correct);
        let full = blocks.iter().all(|b| b.end_correct);
        Self { correct_at_placement: placed, correct_end_state: end, full_completion: full, blocks }
    }
}

/// Executor state: the live scene plus the plan index of each block in it.
struct Executor {
    scene: Scene,
    ids: Vec<usize>,
}

impl Executor {
    fn matches(&self, k: usize, reference: &Scene, pos_tol: f64) -> bool {
        let plan_idx = self.ids[k];
        let got = &self.scene.blocks()[k];
        let want = &reference.blocks()[plan_idx];
        let d = (0..3).map(|a| (got.center_mm[a] - want.center_mm[a]).powi(2)).sum::<f64>().sqrt();
        if d > pos_tol {
            return false;
        }
        let supports: std::collections::BTreeSet<SupportRef> = self
            .scene
            .supports(k)
            .into_iter()
            .map(|s| match s {
                SupportRef::Block(j) => SupportRef::Block(self.ids[j]),
                g => g,
            })
            .collect();
        supports == reference.supports(plan_idx)
    }

    fn position(&self, plan_idx: usize) -> Option<usize> {
        self.ids.iter().position(|&i| i == plan_idx)
    }

    /// Removes unstable blocks one at a time until the scene is stable.
    fn shed(&mut self, sim: &SimParams, fallen: &mut [bool]) {
        loop {
            let report = check_scene_stability(&self.scene, sim);
            let Some(k) = report.offender.filter(|_| !report.stable) else { return };
            fallen[self.ids.remove(k)] = true;
            let mut blocks = self.scene.blocks().to_vec();
            blocks.remove(k);
            self.scene = Scene::from_blocks(blocks, sim.contact_tol_mm);
        }
    }
}

struct Execution {
    ex: Executor,
    reference: Scene,
    placed: Vec<bool>,
    fallen: Vec<bool>,
}

fn execute(plan: &AssemblyPlan, catalog: &Catalog, sim: &SimParams, offsets: &[Point2]) -> Result<Execution, EvalError> {
    if offsets.len() != plan.len() {
        return Err(EvalError::Precondition(format!("{} offsets for {} placements", offsets.len(), plan.len())));
    }
    let reference = settle_plan(plan, catalog, sim, false)?.scene;
    // noise may push a block past the nominal workspace edge; the robot still drops it
    let exec_sim = SimParams { workspace: Workspace { half_extent_mm: f64::INFINITY }, ..*sim };
    let n = plan.len();
    let mut ex = Executor { scene: Scene::new(sim.contact_tol_mm), ids: Vec::with_capacity(n) };
    let mut fallen = vec![false; n];
    let mut placed = vec![false; n];
    for (i, (p, off)) in plan.placements.iter().zip(offsets).enumerate() {
        let mut p = p.clone();
        p.xy_mm = [p.xy_mm[0] + off[0], p.xy_mm[1] + off[1]];
        ex.scene = drop_settle(&ex.scene, catalog, &p, &exec_sim)?;
        ex.ids.push(i);
        ex.shed(sim, &mut fallen);
        placed[i] = ex.position(i).is_some_and(|k| ex.matches(k, &reference, sim.pos_threshold_mm));
    }
    Ok(Execution { ex, reference, placed, fallen })
}

/// Executes the plan with the given per-placement xy offsets.
///
/// Unstable blocks are taken out of the scene and count as fallen. A block
/// is correct when it stands within `pos_threshold_mm` of its reference
/// pose on the same supports as in the noiseless reference.
pub fn simulate_with_offsets(
    plan: &AssemblyPlan,
    catalog: &Catalog,
    sim: &SimParams,
    offsets: &[Point2],
) -> Result<TrialMetrics, EvalError> {
    let Execution { ex, reference, placed, fallen } = execute(plan, catalog, sim, offsets)?;
    let blocks = (0..plan.len())
        .map(|i| BlockOutcome {
            index: i,
            offset_mm: offsets[i],
            placed_correct: placed[i],
            end_correct: ex.position(i).is_some_and(|k| ex.matches(k, &reference, sim.pos_threshold_mm)),
            fallen: fallen[i],
        })
        .collect();
    Ok(TrialMetrics::from_outcomes(blocks))
}

/// One seeded noisy assembly of `plan`.
pub fn simulate_trial(
    plan: &AssemblyPlan,
    catalog: &Catalog,
    sim: &SimParams,
    noise: &NoiseModel,
    trial_seed: u64,
) -> Result<TrialMetrics, EvalError> {
    noise.validate().map_err(EvalError::Precondition)?;
    simulate_with_offsets(plan, catalog, sim, &noise.offsets(trial_seed, plan.len()))
}

/// Final executor scene of a trial.
pub fn trial_scene(plan: &AssemblyPlan, catalog: &Catalog, sim: &SimParams, offsets: &[Point2]) -> Result<Scene, EvalError> {
    Ok(execute(plan, catalog, sim, offsets)?.ex.scene)
}

/// Averaged metrics over one arm's trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub trials: usize,
    pub correct_at_placement: f64,
    pub correct_end_state: f64,
    pub full_completion: f64,
}

impl ArmSummary {
    pub fn from_trials(ts: &[TrialMetrics]) -> Self {
        let n = ts.len().max(1) as f64;
        Self {
            trials: ts.len(),
            correct_at_placement: ts.iter().map(|t| t.correct_at_placement).sum::<f64>() / n,
            correct_end_state: ts.iter().map(|t| t.correct_end_state).sum::<f64>() / n,
            full_completion: ts.iter().filter(|t| t.full_completion).count() as f64 / n,
        }
    }
}

/// Runs `n_trials` seeded trials in parallel; trial `t` uses seed `t`.
pub fn run_trials(
    plan: &AssemblyPlan,
    catalog: &Catalog,
    sim: &SimParams,
    noise: &NoiseModel,
    n_trials: usize,
) -> Result<Vec<TrialMetrics>, EvalError> {
    (0..n_trials as u64).into_par_iter().map(|t| simulate_trial(plan, catalog, sim, noise, t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub design: String,
    pub n_blocks: usize,
    pub without_redesign: ArmSummary,
    pub with_redesign: ArmSummary,
    /// With-arm full completion over without-arm; absent when the latter is zero.
    pub completion_ratio: Option<f64>,
    pub redesigned: AssemblyPlan,
    pub redesign: RedesignReport,
}

/// Trials on the plan as given and on its redesign, with paired noise.
pub fn run_ablation(
    plan: &AssemblyPlan,
    catalog: &Catalog,
    sim: &SimParams,
    noise: &NoiseModel,
    redesign_params: &RedesignParams,
    n_trials: usize,
) -> Result<Ablation, EvalError> {
    if n_trials == 0 {
        return Err(EvalError::Precondition("n_trials must be at least 1".into()));
    }
    if !settle_plan(plan, catalog, sim, false)?.all_stable() {
        return Err(EvalError::Precondition("plan does not settle stably".into()));
    }
    let (redesigned, report) = redesign(plan, catalog, redesign_params, sim)?;
    let without = ArmSummary::from_trials(&run_trials(plan, catalog, sim, noise, n_trials)?);
    let with = ArmSummary::from_trials(&run_trials(&redesigned, catalog, sim, noise, n_trials)?);
    let completion_ratio = (without.full_completion > 0.0).then(|| with.full_completion / without.full_completion);
    Ok(Ablation {
        design: plan.prompt.clone(),
        n_blocks: plan.len(),
        without_redesign: without,
        with_redesign: with,
        completion_ratio,
        redesigned,
        redesign: report,
    })
}

/// CSV in the perturbation-ablation table layout, with average rows.
pub fn ablation_csv(rows: &[Ablation]) -> String {
    let mut out = String::from("Design,Redesign,% Correct Blocks Placed,% Correct In End State,% Full Completion\n");
    let line = |name: &str, tag: &str, a: &ArmSummary| {
        format!(
            "{name},{tag},{:.1},{:.1},{:.1}\n",
            100.0 * a.correct_at_placement,
            100.0 * a.correct_end_state,
            100.0 * a.full_completion
        )
    };
    for r in rows {
        let name = format!("{} ({})", r.design, r.n_blocks).replace(',', " ");
        out += &line(&name, "no", &r.without_redesign);
        out += &line(&name, "yes", &r.with_redesign);
    }
    if !rows.is_empty() {
        let avg = |f: fn(&Ablation) -> ArmSummary| {
            let k = rows.len() as f64;
            let arms: Vec<ArmSummary> = rows.iter().map(f).collect();
            ArmSummary {
                trials: arms.iter().map(|a| a.trials).sum(),
                correct_at_placement: arms.iter().map(|a| a.correct_at_placement).sum::<f64>() / k,
                correct_end_state: arms.iter().map(|a| a.correct_end_state).sum::<f64>() / k,
                full_completion: arms.iter().map(|a| a.full_completion).sum::<f64>() / k,
            }
        };
        out += &line("Average", "no", &avg(|r| r.without_redesign));
        out += &line("Average", "yes", &avg(|r| r.with_redesign));
    }
    out
}

/// Label-ranking outcome over a set of designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecogResult {
    pub n_labels: usize,
    /// One-based rank of the correct label, per design.
    pub ranks: Vec<usize>,
    pub top1: Vec<bool>,
    pub top1_accuracy: f64,
    pub avg_ranking: f64,
    pub relative_ranking: f64,
}

impl RecogResult {
    pub fn from_ranks(n_labels: usize, ranks: Vec<usize>) -> Result<Self, EvalError> {
        if n_labels == 0 || ranks.is_empty() {
            return Err(EvalError::Precondition("need at least one label and one design".into()));
        }
        if let Some(r) = ranks.iter().find(|r| !(1..=n_labels).contains(r)) {
            return Err(EvalError::Precondition(format!("rank {r} outside 1..={n_labels}")));
        }
        let k = ranks.len() as f64;
        let top1: Vec<bool> = ranks.iter().map(|&r| r == 1).collect();
        let avg = ranks.iter().sum::<usize>() as f64 / k;
        Ok(Self {
            n_labels,
            top1_accuracy: top1.iter().filter(|t| **t).count() as f64 / k,
            avg_ranking: avg,
            relative_ranking: avg / n_labels as f64,
            ranks,
            top1,
        })
    }

    /// Header plus one row, in the recognizability table layout.
    pub fn to_csv(&self) -> String {
        format!(
            "N,Top-1 (%),Avg Ranking,Relative Ranking (%)\n{},{:.1},{:.2},{:.1}\n",
            self.n_labels,
            100.0 * self.top1_accuracy,
            self.avg_ranking,
            100.0 * self.relative_ranking
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecogDesign {
    pub image: Image,
    pub label: String,
}

/// The shuffled label list shown for design `index`.
pub fn recog_labels(pool: &[String], correct: &str, n: usize, seed: u64, index: usize) -> Vec<String> {
    let mut rng = rng_for(seed, index as u64);
    let others: Vec<&String> = pool.iter().filter(|l| !l.trim().eq_ignore_ascii_case(correct.trim())).collect();
    let mut labels: Vec<String> = others.choose_multiple(&mut rng, n - 1).map(|s| s.to_string()).collect();
    labels.push(correct.to_string());
    labels.shuffle(&mut rng);
    labels
}

/// Asks the model to rank `n` labels per design render: the correct one
/// plus `n - 1` seeded distractors drawn without replacement.
pub fn recognizability(
    designs: &[RecogDesign],
    pool: &[String],
    n: usize,
    client: &dyn LmClient,
    seed: u64,
) -> Result<RecogResult, EvalError> {
    if n == 0 || n > pool.len() {
        return Err(EvalError::Precondition(format!("n = {n} must be in 1..={}", pool.len())));
    }
    for d in designs {
        if !pool.iter().any(|l| l.trim().eq_ignore_ascii_case(d.label.trim())) {
            return Err(EvalError::Precondition(format!("label {:?} is not in the pool", d.label)));
        }
    }
    let mut ranks = Vec::with_capacity(designs.len());
    for (i, d) in designs.iter().enumerate() {
        let labels = recog_labels(pool, &d.label, n, seed, i);
        let listing = labels.join("\n");
        let mut conv = Conversation::new(format!("recog-{i:04}"));
        conv.push(Message::user(prompts::RECOGNIZE.fill(&[("labels", &listing)])).with_images([d.image.clone()]));
        let mut reply = client.send(&conv)?.text;
        let mut order = parse_ranking(&reply, &labels);
        if order.is_none() {
            conv.push(Message::assistant(reply.clone()));
            conv.push(Message::user(prompts::RERANK.fill(&[("labels", &listing)])));
            reply = client.send(&conv)?.text;
            order = parse_ranking(&reply, &labels);
        }
        let order = order.ok_or(EvalError::Protocol { design: i, reply })?;
        let correct = labels.len() - 1 - labels.iter().rev().position(|l| *l == d.label).expect("label present");
        ranks.push(order.iter().position(|&j| j == correct).expect("permutation") + 1);
    }
    RecogResult::from_ranks(n, ranks)
}
