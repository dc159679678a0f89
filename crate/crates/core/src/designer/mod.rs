//! Design prompting: describe, plan and generate chains with
//! simulation-in-the-loop repair, then rating and knockout selection.

pub mod client;
#[cfg(feature = "live")]
pub mod live;
pub mod parse;
pub mod prompts;

use std::cmp::Reverse;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{validate_plan, AssemblyPlan, Catalog, Violation};
use crate::render::{render_feedback, OrthoView, RenderConfig, RenderError, ViewAxis};
use crate::statics::{settle_plan, DropError, Scene, SimParams, StabilityReport};

pub use client::{
    Conversation, Image, LmClient, LmError, LmResponse, Message, Recorder, ReplayClient, Role, ScriptedClient,
    Transcript,
};
use parse::{parse_choice, parse_plan_reply, parse_rating, Choice, RatingParse};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignParams {
    pub candidates: usize,
    pub max_repair_rounds: u32,
    /// Candidates rated within this many points of the best enter the bracket.
    pub rating_cutoff: u8,
    pub sim: SimParams,
    pub render: RenderConfig,
}

impl Default for DesignParams {
    fn default() -> Self {
        Self { candidates: 10, max_repair_rounds: 2, rating_cutoff: 1, sim: SimParams::default(), render: RenderConfig::default() }
    }
}

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("could not parse design: {0}")]
    Parse(String),
    #[error("design violates the catalog: {}", join(.0))]
    Validation(Vec<Violation>),
    #[error(transparent)]
    Drop(#[from] DropError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("all {} design chains failed", .0.len())]
    NoCandidates(Vec<ChainFailure>),
}

fn join(vs: &[Violation]) -> String {
    vs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainFailure {
    pub chain: usize,
    pub error: String,
}

/// One finished design chain.
#[derive(Debug, Clone)]
pub struct DesignCandidate {
    pub chain: usize,
    pub transcript_id: String,
    pub plan: AssemblyPlan,
    pub scene: Scene,
    pub report: StabilityReport,
    pub rating: Option<u8>,
    /// Set when the rating had to be clamped or defaulted.
    pub rating_flagged: bool,
    pub repair_rounds: u32,
    /// Why repair stopped early, if it did.
    pub repair_aborted: Option<String>,
    pub renders: Vec<OrthoView>,
    conversation: Conversation,
}

impl DesignCandidate {
    pub fn stable(&self) -> bool {
        self.report.stable
    }

    pub fn images(&self) -> Result<Vec<Image>, RenderError> {
        self.renders.iter().map(encode).collect()
    }

    pub fn summary(&self) -> CandidateSummary {
        CandidateSummary {
            chain: self.chain,
            transcript_id: self.transcript_id.clone(),
            plan_hash: self.plan.content_hash(),
            stable: self.stable(),
            rating: self.rating,
            rating_flagged: self.rating_flagged,
            repair_rounds: self.repair_rounds,
            repair_aborted: self.repair_aborted.clone(),
            report: self.report.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub chain: usize,
    pub transcript_id: String,
    pub plan_hash: String,
    pub stable: bool,
    pub rating: Option<u8>,
    pub rating_flagged: bool,
    pub repair_rounds: u32,
    pub repair_aborted: Option<String>,
    pub report: StabilityReport,
}

fn encode(view: &OrthoView) -> Result<Image, RenderError> {
    let (bytes, mime) = view.encode()?;
    Ok(Image { mime: mime.to_string(), bytes })
}

pub fn chain_session(chain: usize) -> String {
    format!("chain-{chain:02}")
}

fn ask(conv: &mut Conversation, client: &dyn LmClient, msg: Message) -> Result<String, LmError> {
    conv.push(msg);
    let reply = client.send(conv)?;
    conv.push(Message::assistant(reply.text.clone()));
    Ok(reply.text)
}

/// A fresh conversation seeded with the system prompt.
pub fn start_conversation(session: impl Into<String>) -> Conversation {
    let mut c = Conversation::new(session);
    c.push(Message::system(prompts::SYSTEM.fill(&[])));
    c
}

/// Asks for a qualitative description of the target.
pub fn elaborate(conv: &mut Conversation, prompt: &str, client: &dyn LmClient) -> Result<String, DesignError> {
    if prompt.trim().is_empty() {
        return Err(DesignError::Precondition("prompt is empty".into()));
    }
    Ok(ask(conv, client, Message::user(prompts::ELABORATE.fill(&[("prompt", prompt.trim())])))?)
}

/// Asks which blocks play which role, with the catalog in the prompt.
pub fn plan_blocks(conv: &mut Conversation, prompt: &str, catalog: &Catalog, client: &dyn LmClient) -> Result<String, DesignError> {
    if catalog.blocks().is_empty() {
        return Err(DesignError::Precondition("catalog is empty".into()));
    }
    let text = prompts::PLAN.fill(&[("prompt", prompt.trim()), ("catalog", &catalog.to_prompt_json())]);
    Ok(ask(conv, client, Message::user(text))?)
}

enum PlanFault {
    Parse(String),
    Invalid(Vec<Violation>),
}

fn read_plan(reply: &str, prompt: &str, catalog: &Catalog, sim: &SimParams) -> Result<AssemblyPlan, PlanFault> {
    let plan = parse_plan_reply(reply, prompt, catalog).map_err(PlanFault::Parse)?;
    let report = validate_plan(&plan, catalog, &sim.workspace);
    if report.is_ok() {
        Ok(plan)
    } else {
        Err(PlanFault::Invalid(report.violations))
    }
}

impl From<PlanFault> for DesignError {
    fn from(f: PlanFault) -> Self {
        match f {
            PlanFault::Parse(e) => DesignError::Parse(e),
            PlanFault::Invalid(v) => DesignError::Validation(v),
        }
    }
}

/// Asks for the fenced JSON design; one repair message on a bad reply.
pub fn generate_plan(
    conv: &mut Conversation,
    prompt: &str,
    catalog: &Catalog,
    sim: &SimParams,
    client: &dyn LmClient,
) -> Result<AssemblyPlan, DesignError> {
    let half = format!("{}", sim.workspace.half_extent_mm);
    let reply = ask(conv, client, Message::user(prompts::GENERATE.fill(&[("half_extent", &half)])))?;
    let fault = match read_plan(&reply, prompt, catalog, sim) {
        Ok(plan) => return Ok(plan),
        Err(f) => f,
    };
    let errors = match &fault {
        PlanFault::Parse(e) => format!("- {e}"),
        PlanFault::Invalid(vs) => vs.iter().map(|v| format!("- {v}")).collect::<Vec<_>>().join("\n"),
    };
    let reply = ask(conv, client, Message::user(prompts::FIX.fill(&[("errors", &errors)])))?;
    Ok(read_plan(&reply, prompt, catalog, sim)?)
}

fn settle(plan: &AssemblyPlan, catalog: &Catalog, params: &DesignParams) -> Result<(Scene, StabilityReport, Vec<OrthoView>), DesignError> {
    let settled = settle_plan(plan, catalog, &params.sim, false)?;
    let report = settled.summary();
    let renders = render_feedback(&settled.scene, &[ViewAxis::Front, ViewAxis::Side], report.offender, &params.render);
    Ok((settled.scene, report, renders))
}

/// Runs one full describe, plan, generate and repair chain.
pub fn run_chain(
    chain: usize,
    prompt: &str,
    catalog: &Catalog,
    client: &dyn LmClient,
    params: &DesignParams,
) -> Result<DesignCandidate, DesignError> {
    let mut conv = start_conversation(chain_session(chain));
    elaborate(&mut conv, prompt, client)?;
    plan_blocks(&mut conv, prompt, catalog, client)?;
    let plan = generate_plan(&mut conv, prompt, catalog, &params.sim, client)?;
    let (scene, report, renders) = settle(&plan, catalog, params)?;
    let cand = DesignCandidate {
        chain,
        transcript_id: conv.session.clone(),
        plan,
        scene,
        report,
        rating: None,
        rating_flagged: false,
        repair_rounds: 0,
        repair_aborted: None,
        renders,
        conversation: conv,
    };
    repair_loop(cand, catalog, client, params)
}

/// Feeds stability failures back to the model until the design is stable
/// or the round budget is spent. A bad reply ends the loop early.
pub fn repair_loop(
    mut cand: DesignCandidate,
    catalog: &Catalog,
    client: &dyn LmClient,
    params: &DesignParams,
) -> Result<DesignCandidate, DesignError> {
    while !cand.report.stable && cand.repair_rounds < params.max_repair_rounds {
        let offender = cand.report.offender.unwrap_or(0);
        let block_id = cand.plan.placements.get(offender).map(|p| p.block_id.clone()).unwrap_or_default();
        let dir = cand.report.tip_direction.unwrap_or([0.0, 0.0]);
        let text = prompts::REPAIR.fill(&[
            ("offender", &offender.to_string()),
            ("block_id", &block_id),
            ("dx", &format!("{:.2}", dir[0])),
            ("dy", &format!("{:.2}", dir[1])),
            ("diagnostic", &cand.report.diagnostic),
        ]);
        let msg = Message::user(text).with_images(cand.images()?);
        let reply = ask(&mut cand.conversation, client, msg)?;
        cand.repair_rounds += 1;
        let plan = match read_plan(&reply, &cand.plan.prompt, catalog, &params.sim) {
            Ok(p) => p,
            Err(PlanFault::Parse(e)) => {
                cand.repair_aborted = Some(format!("parse: {e}"));
                break;
            }
            Err(PlanFault::Invalid(vs)) => {
                cand.repair_aborted = Some(format!("validation: {}", join(&vs)));
                break;
            }
        };
        let (scene, report, renders) = settle(&plan, catalog, params)?;
        cand.plan = plan;
        cand.scene = scene;
        cand.report = report;
        cand.renders = renders;
    }
    Ok(cand)
}

/// Runs `n` independent chains in parallel. Failed chains are reported,
/// not fatal, unless every chain fails.
pub fn generate_candidates(
    prompt: &str,
    catalog: &Catalog,
    client: &dyn LmClient,
    params: &DesignParams,
    n: usize,
) -> Result<(Vec<DesignCandidate>, Vec<ChainFailure>), DesignError> {
    if n == 0 {
        return Err(DesignError::Precondition("candidate count must be at least 1".into()));
    }
    if prompt.trim().is_empty() {
        return Err(DesignError::Precondition("prompt is empty".into()));
    }
    let results: Vec<_> = (0..n).into_par_iter().map(|i| (i, run_chain(i, prompt, catalog, client, params))).collect();
    let mut cands = Vec::new();
    let mut failures = Vec::new();
    for (chain, r) in results {
        match r {
            Ok(c) => cands.push(c),
            Err(e) => failures.push(ChainFailure { chain, error: e.to_string() }),
        }
    }
    if cands.is_empty() {
        return Err(DesignError::NoCandidates(failures));
    }
    Ok((cands, failures))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub value: u8,
    pub flagged: bool,
}

/// Asks for a 1 to 5 resemblance score; one re-ask, then clamp and flag.
pub fn rate_candidate(cand: &DesignCandidate, prompt: &str, client: &dyn LmClient) -> Result<Rating, DesignError> {
    if cand.renders.is_empty() {
        return Err(DesignError::Precondition("candidate has no renders".into()));
    }
    let mut conv = Conversation::new(format!("rate-{:02}", cand.chain));
    let msg = Message::user(prompts::RATE.fill(&[("prompt", prompt.trim())])).with_images(cand.images()?);
    let first = ask(&mut conv, client, msg)?;
    if let RatingParse::Valid(v) = parse_rating(&first) {
        return Ok(Rating { value: v, flagged: false });
    }
    let second = ask(&mut conv, client, Message::user(prompts::RERATE.fill(&[])))?;
    Ok(match parse_rating(&second) {
        RatingParse::Valid(v) => Rating { value: v, flagged: false },
        RatingParse::OutOfRange(v) => Rating { value: v.clamp(1, 5) as u8, flagged: true },
        RatingParse::Missing => Rating { value: 1, flagged: true },
    })
}

/// Rates every candidate in place, sequentially.
pub fn rate_all(cands: &mut [DesignCandidate], prompt: &str, client: &dyn LmClient) -> Result<(), DesignError> {
    for c in cands.iter_mut() {
        let r = rate_candidate(c, prompt, client)?;
        c.rating = Some(r.value);
        c.rating_flagged = r.flagged;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    pub round: usize,
    /// Chain ids; `a` is the higher seed and is shown first.
    pub a: usize,
    pub b: usize,
    pub winner: usize,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    /// Index into the candidate slice.
    pub winner: usize,
    /// Candidate indices in bracket seed order.
    pub seeds: Vec<usize>,
    pub byes: Vec<usize>,
    pub matches: Vec<Match>,
}

/// Bracket seeding: stable candidates (or all, if none are), within the
/// rating cutoff of the best, ordered by rating then plan hash.
pub fn bracket_seeds(cands: &[DesignCandidate], rating_cutoff: u8) -> Vec<usize> {
    let any_stable = cands.iter().any(DesignCandidate::stable);
    let pool: Vec<usize> = (0..cands.len()).filter(|&i| !any_stable || cands[i].stable()).collect();
    let rating = |i: usize| cands[i].rating.unwrap_or(0);
    let best = pool.iter().map(|&i| rating(i)).max().unwrap_or(0);
    let mut seeds: Vec<(Reverse<u8>, String, usize)> = pool
        .into_iter()
        .filter(|&i| rating(i) + rating_cutoff >= best)
        .map(|i| (Reverse(rating(i)), cands[i].plan.content_hash(), i))
        .collect();
    seeds.sort();
    seeds.into_iter().map(|(_, _, i)| i).collect()
}

/// Single-elimination head-to-head selection. An odd field gives the top
/// seed a bye; pairs are top against bottom. An unreadable verdict goes to
/// the higher seed.
pub fn select_best(
    cands: &[DesignCandidate],
    prompt: &str,
    client: &dyn LmClient,
    params: &DesignParams,
) -> Result<Selection, DesignError> {
    if cands.is_empty() {
        return Err(DesignError::Precondition("no candidates to select from".into()));
    }
    let seeds = bracket_seeds(cands, params.rating_cutoff);
    let mut field = seeds.clone();
    let mut byes = Vec::new();
    let mut matches = Vec::new();
    let mut round = 0;
    while field.len() > 1 {
        round += 1;
        let mut next = Vec::with_capacity(field.len() / 2 + 1);
        let rest = if field.len() % 2 == 1 {
            byes.push(field[0]);
            next.push(field[0]);
            &field[1..]
        } else {
            &field[..]
        };
        let k = rest.len();
        for j in 0..k / 2 {
            let (hi, lo) = (rest[j], rest[k - 1 - j]);
            let mut conv = Conversation::new("select");
            let images = [encode(&cands[hi].renders[0])?, encode(&cands[lo].renders[0])?];
            let msg = Message::user(prompts::SELECT.fill(&[("prompt", prompt.trim())])).with_images(images);
            let reply = ask(&mut conv, client, msg)?;
            let winner = match parse_choice(&reply) {
                Some(Choice::B) => lo,
                _ => hi,
            };
            matches.push(Match { round, a: cands[hi].chain, b: cands[lo].chain, winner: cands[winner].chain, reply });
            next.push(winner);
        }
        // keep seed order for the next round
        next.sort_by_key(|i| seeds.iter().position(|s| s == i));
        field = next;
    }
    Ok(Selection { winner: field[0], seeds, byes, matches })
}

/// Everything one design run produced.
#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub candidates: Vec<DesignCandidate>,
    pub failures: Vec<ChainFailure>,
    pub selection: Selection,
}

impl DesignOutcome {
    pub fn winner(&self) -> &DesignCandidate {
        &self.candidates[self.selection.winner]
    }
}

/// Generates, rates and selects. With a single candidate, rating and the
/// tournament are skipped.
pub fn design(prompt: &str, catalog: &Catalog, client: &dyn LmClient, params: &DesignParams) -> Result<DesignOutcome, DesignError> {
    let (mut candidates, failures) = generate_candidates(prompt, catalog, client, params, params.candidates)?;
    if candidates.len() > 1 {
        rate_all(&mut candidates, prompt, client)?;
    }
    let selection = select_best(&candidates, prompt, client, params)?;
    Ok(DesignOutcome { candidates, failures, selection })
}

/// Asks for `n` object names, one per line.
pub fn list_objects(n: usize, client: &dyn LmClient) -> Result<Vec<String>, DesignError> {
    if n == 0 {
        return Err(DesignError::Precondition("n must be at least 1".into()));
    }
    let mut conv = Conversation::new("objects");
    let reply = ask(&mut conv, client, Message::user(prompts::OBJECTS.fill(&[("n", &n.to_string())])))?;
    let mut items = parse::list_items(&reply);
    items.truncate(n);
    Ok(items)
}
