use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use blox_core::catalog::{load_catalog, load_plan, validate_plan, AssemblyPlan, Catalog};
use blox_core::designer::{self, CandidateSummary, ChainFailure, DesignParams, Image, LmClient, Recorder, ReplayClient, Selection};
use blox_core::evalharness::{ablation_csv, recognizability, run_ablation, run_trials, Ablation, ArmSummary, RecogDesign};
use blox_core::render::{mesh_obj, render_feedback, render_ortho, OrthoView};
use blox_core::statics::settle_plan;
use blox_core::{bundled, redesign as run_redesign, ViewAxis};
use serde::Serialize;
use serde_json::json;

use crate::config::{ClientMode, RunConfig};
use crate::error::{io_err, CliError};
use crate::{EvalArgs, ListObjectsArgs, RecognizeArgs, RedesignArgs, RenderArgs};

const MANIFEST_VERSION: u32 = 1;

fn catalog(cfg: &RunConfig) -> Result<Catalog, CliError> {
    match &cfg.catalog {
        Some(p) => Ok(load_catalog(p)?),
        None => Ok(bundled::catalog()),
    }
}

/// Loads a plan path or `bundled:<name>`, returning it with a short name.
fn plan_arg(arg: &str) -> Result<(String, AssemblyPlan), CliError> {
    if let Some(slug) = arg.strip_prefix("bundled:") {
        let names: Vec<&str> = bundled::DESIGNS.iter().map(|(s, _)| *s).collect();
        let plan = bundled::design(slug)
            .ok_or_else(|| CliError::validation(format!("no bundled design {slug:?} (have {})", names.join(", "))))?;
        return Ok((slug.to_string(), plan));
    }
    let path = Path::new(arg);
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("plan");
    let stem = name.strip_suffix(".json").unwrap_or(name);
    let stem = stem.strip_suffix(".plan").unwrap_or(stem);
    Ok((stem.to_string(), load_plan(path)?))
}

fn check_plan(plan: &AssemblyPlan, catalog: &Catalog, cfg: &RunConfig) -> Result<(), CliError> {
    let report = validate_plan(plan, catalog, &cfg.sim.workspace);
    if report.is_ok() {
        return Ok(());
    }
    let message = report.violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
    Err(CliError::Validation { message: format!("plan violates the catalog: {message}"), details: serde_json::to_value(&report.violations).ok() })
}

fn client(cfg: &RunConfig) -> Result<Box<dyn LmClient>, CliError> {
    match cfg.client_mode()? {
        ClientMode::Replay(dir) => Ok(Box::new(ReplayClient::load(dir)?)),
        ClientMode::Live => live_client(),
    }
}

#[cfg(feature = "live")]
fn live_client() -> Result<Box<dyn LmClient>, CliError> {
    Ok(Box::new(blox_core::designer::live::LiveClient::from_env()?))
}

#[cfg(not(feature = "live"))]
fn live_client() -> Result<Box<dyn LmClient>, CliError> {
    Err(blox_core::designer::LmError::Unconfigured("this build has no live client".into()).into())
}

/// Collects files written under a root, for the manifest.
struct Writer {
    root: PathBuf,
    files: BTreeSet<String>,
}

impl Writer {
    fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(Self { root: root.to_path_buf(), files: BTreeSet::new() })
    }

    fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.files.insert(rel.to_string());
        Ok(())
    }

    fn write_json(&mut self, rel: &str, value: &impl Serialize) -> Result<(), CliError> {
        self.write(rel, pretty(value))
    }

    fn write_view(&mut self, stem: &str, view: &OrthoView) -> Result<(), CliError> {
        let (bytes, mime) = view.encode()?;
        self.write(&format!("{stem}.{}.{}", view.axis.name(), extension(mime)), bytes)
    }

    fn write_transcripts<C: LmClient>(&mut self, rel: &str, rec: &Recorder<C>) -> Result<(), CliError> {
        let manifest = rec.write_dir(self.root.join(rel))?;
        self.files.insert(format!("{rel}/manifest.json"));
        self.files.extend(manifest.sessions.values().map(|f| format!("{rel}/{f}")));
        Ok(())
    }
}

fn extension(mime: &str) -> &'static str {
    if mime == "image/png" {
        "png"
    } else {
        "ppm"
    }
}

fn pretty(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializes");
    s.push('\n');
    s
}

fn model_tag<C: LmClient>(rec: &Recorder<C>) -> Option<String> {
    rec.transcripts().first().map(|t| t.model.clone())
}

#[derive(Serialize)]
struct DesignManifest<'a> {
    schema_version: u32,
    command: &'static str,
    prompt: &'a str,
    catalog_hash: String,
    client: &'static str,
    model: Option<String>,
    params: DesignParams,
    winner_chain: usize,
    selection: &'a Selection,
    candidates: Vec<CandidateSummary>,
    failures: &'a [ChainFailure],
    files: Vec<String>,
}

/// Generates candidates, selects a winner and fills a fresh run directory.
pub fn design(cfg: &RunConfig) -> Result<String, CliError> {
    let prompt = cfg.prompt.as_deref().map(str::trim).filter(|p| !p.is_empty()).ok_or_else(|| CliError::Usage("design needs --prompt".into()))?;
    let out = cfg.out.as_deref().ok_or_else(|| CliError::Usage("design needs --out".into()))?;
    if out.join("manifest.json").exists() {
        return Err(CliError::Usage(format!("{} already holds a run; pick a new directory", out.display())));
    }
    let catalog = catalog(cfg)?;
    let rec = Recorder::new(client(cfg)?);
    let params = cfg.design_params();
    let result = designer::design(prompt, &catalog, &rec, &params);
    let mut w = Writer::new(out)?;
    // transcripts are kept even when every chain failed
    w.write_transcripts("transcripts", &rec)?;
    let outcome = result?;

    w.write("catalog.json", catalog.to_json() + "\n")?;
    for c in &outcome.candidates {
        let stem = format!("candidates/{}", designer::chain_session(c.chain));
        w.write(&format!("{stem}.plan.json"), c.plan.to_json())?;
        w.write_json(&format!("{stem}.json"), &c.summary())?;
        for v in &c.renders {
            w.write_view(&stem, v)?;
        }
    }
    let winner = outcome.winner();
    w.write("winner.plan.json", winner.plan.to_json())?;
    for v in &winner.renders {
        w.write_view("winner", v)?;
    }
    w.write("winner.obj", mesh_obj(&winner.scene))?;

    let mut files: Vec<String> = w.files.iter().cloned().collect();
    files.push("manifest.json".into());
    files.sort();
    let manifest = DesignManifest {
        schema_version: MANIFEST_VERSION,
        command: "design",
        prompt,
        catalog_hash: catalog.hash(),
        client: cfg.client_mode()?.kind(),
        model: model_tag(&rec),
        params,
        winner_chain: winner.chain,
        selection: &outcome.selection,
        candidates: outcome.candidates.iter().map(|c| c.summary()).collect(),
        failures: &outcome.failures,
        files,
    };
    w.write_json("manifest.json", &manifest)?;
    Ok(pretty(&json!({
        "run_dir": out,
        "winner_chain": winner.chain,
        "winner_stable": winner.stable(),
        "candidates": outcome.candidates.len(),
        "failures": outcome.failures.len(),
    })))
}

/// Redesigns a plan; prints the report and optionally writes both.
pub fn redesign(cfg: &RunConfig, args: &RedesignArgs) -> Result<String, CliError> {
    let catalog = catalog(cfg)?;
    let (_, plan) = plan_arg(&args.plan)?;
    check_plan(&plan, &catalog, cfg)?;
    let (new_plan, report) = run_redesign(&plan, &catalog, &cfg.redesign, &cfg.sim)?;
    if let Some(p) = &args.out {
        fs::write(p, new_plan.to_json()).map_err(|e| io_err(p, e))?;
    }
    let text = report.to_json();
    if let Some(p) = &args.report {
        fs::write(p, &text).map_err(|e| io_err(p, e))?;
    }
    Ok(text)
}

#[derive(Serialize)]
struct SingleArm {
    design: String,
    n_blocks: usize,
    summary: ArmSummary,
}

fn single_csv(rows: &[SingleArm]) -> String {
    let mut out = String::from("Design,Redesign,% Correct Blocks Placed,% Correct In End State,% Full Completion\n");
    for r in rows {
        let s = &r.summary;
        out += &format!(
            "{} ({}),no,{:.1},{:.1},{:.1}\n",
            r.design.replace(',', " "),
            r.n_blocks,
            100.0 * s.correct_at_placement,
            100.0 * s.correct_end_state,
            100.0 * s.full_completion
        );
    }
    out
}

/// Noisy-assembly trials, as an ablation against redesign by default.
pub fn eval(cfg: &RunConfig, args: &EvalArgs) -> Result<String, CliError> {
    let catalog = catalog(cfg)?;
    let mut plans = Vec::new();
    for a in &args.plan {
        plans.push(plan_arg(a)?.1);
    }
    if args.bundled {
        plans.extend(bundled::designs().into_iter().map(|(_, p)| p));
    }
    if plans.is_empty() {
        return Err(CliError::Usage("eval needs --plan or --bundled".into()));
    }
    for p in &plans {
        check_plan(p, &catalog, cfg)?;
    }
    let noise = cfg.noise_model();
    let mut w = args.out.as_deref().map(Writer::new).transpose()?;
    if args.single {
        let mut rows = Vec::new();
        for p in &plans {
            let trials = run_trials(p, &catalog, &cfg.sim, &noise, cfg.trials)?;
            rows.push(SingleArm { design: p.prompt.clone(), n_blocks: p.len(), summary: ArmSummary::from_trials(&trials) });
        }
        if let Some(w) = w.as_mut() {
            w.write_json("eval.json", &rows)?;
            w.write("eval.csv", single_csv(&rows))?;
        }
        return Ok(pretty(&rows));
    }
    let rows: Vec<Ablation> =
        plans.iter().map(|p| run_ablation(p, &catalog, &cfg.sim, &noise, &cfg.redesign, cfg.trials)).collect::<Result<_, _>>()?;
    if let Some(w) = w.as_mut() {
        w.write_json("ablation.json", &rows)?;
        w.write("ablation.csv", ablation_csv(&rows))?;
    }
    let brief: Vec<_> = rows
        .iter()
        .map(|r| {
            json!({
                "design": r.design,
                "n_blocks": r.n_blocks,
                "without_redesign": r.without_redesign,
                "with_redesign": r.with_redesign,
                "completion_ratio": r.completion_ratio,
                "converged": r.redesign.converged,
                "perturbations": r.redesign.total_perturbations(),
            })
        })
        .collect();
    Ok(pretty(&brief))
}

/// Writes orthographic views (unstable offender outlined) and a mesh.
pub fn render(cfg: &RunConfig, args: &RenderArgs) -> Result<String, CliError> {
    let catalog = catalog(cfg)?;
    let (stem, plan) = plan_arg(&args.plan)?;
    let settled = settle_plan(&plan, &catalog, &cfg.sim, false)?;
    let report = settled.summary();
    let views = render_feedback(&settled.scene, &args.views, report.offender, &cfg.render);
    let mut w = Writer::new(&args.out)?;
    for v in &views {
        let bytes = match args.format.as_str() {
            "png" => v.to_png()?,
            "ppm" => v.to_ppm(),
            f => return Err(CliError::Usage(format!("format must be png or ppm, got {f:?}"))),
        };
        w.write(&format!("{stem}.{}.{}", v.axis.name(), args.format), bytes)?;
    }
    if args.mesh {
        w.write(&format!("{stem}.obj"), mesh_obj(&settled.scene))?;
    }
    let files: Vec<_> = w.files.iter().collect();
    Ok(pretty(&json!({"stable": settled.all_stable(), "offender": report.offender, "files": files})))
}

/// Front view of the settled plan, as sent for label ranking.
pub fn recog_image(plan: &AssemblyPlan, catalog: &Catalog, cfg: &RunConfig) -> Result<Image, CliError> {
    let scene = settle_plan(plan, catalog, &cfg.sim, false)?.scene;
    let view = render_ortho(&scene, ViewAxis::Front, &BTreeSet::new(), &cfg.render);
    let (bytes, mime) = view.encode()?;
    Ok(Image { mime: mime.to_string(), bytes })
}

/// Label ranking over rendered plans, labeled by their prompts.
pub fn recognize(cfg: &RunConfig, args: &RecognizeArgs) -> Result<String, CliError> {
    let catalog = catalog(cfg)?;
    let text = fs::read_to_string(&args.pool).map_err(|e| CliError::validation(format!("{}: {e}", args.pool.display())))?;
    let pool: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    let mut designs = Vec::new();
    for a in &args.plan {
        let (_, plan) = plan_arg(a)?;
        designs.push(RecogDesign { image: recog_image(&plan, &catalog, cfg)?, label: plan.prompt.clone() });
    }
    let rec = Recorder::new(client(cfg)?);
    let result = recognizability(&designs, &pool, args.n, &rec, cfg.seed)?;
    if let Some(out) = &args.out {
        let mut w = Writer::new(out)?;
        w.write_transcripts("transcripts", &rec)?;
        w.write_json("recognize.json", &result)?;
        w.write("recognize.csv", result.to_csv())?;
    }
    Ok(pretty(&result))
}

/// Object names, one per line.
pub fn list_objects(cfg: &RunConfig, args: &ListObjectsArgs) -> Result<String, CliError> {
    let rec = Recorder::new(client(cfg)?);
    let items = designer::list_objects(args.n, &rec)?;
    let mut text = items.join("\n");
    text.push('\n');
    if let Some(out) = &args.out {
        let mut w = Writer::new(out)?;
        w.write_transcripts("transcripts", &rec)?;
        w.write("objects.txt", &text)?;
    }
    Ok(text)
}
