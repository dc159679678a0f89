//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use blox_core::catalog::{effective_dims, BlockSpec, Catalog, Orientation, Placement, Shape};
use blox_core::evalharness::{run_ablation, simulate_trial, BlockOutcome, NoiseModel, RecogResult, TrialMetrics};
use blox_core::geometry::PlacedBlock;
use blox_core::redesign::{needs_perturbation, redesign, sample_offsets, RedesignParams};
use blox_core::render::{mesh_obj, render_ortho, RenderConfig, ViewAxis};
use blox_core::statics::{drop_settle, settle_plan, Scene, SimParams};
use blox_core::{bundled, AssemblyPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes past the test harness's output capture so every line shows.
fn report(n: u32, pass: bool, detail: &str) {
    let line = format!("{} criterion {n}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().write_all(line.as_bytes());
}

fn verdict(n: u32, failures: &[String], detail: &str) {
    report(n, failures.is_empty(), detail);
    assert!(failures.is_empty(), "criterion {n}: {}", failures.join("\n"));
}

// ---------------------------------------------------------------------------
// 1. statics against a torque-balance oracle

#[derive(Clone, Copy, Debug)]
enum Fp {
    Rect { cx: f64, cy: f64, hx: f64, hy: f64 },
    Disc { cx: f64, cy: f64, r: f64 },
}

impl Fp {
    fn y_range(self) -> (f64, f64) {
        match self {
            Fp::Rect { cy, hy, .. } => (cy - hy, cy + hy),
            Fp::Disc { cy, r, .. } => (cy - r, cy + r),
        }
    }

    /// The footprint's chord at height `y`.
    fn row(self, y: f64) -> Option<(f64, f64)> {
        match self {
            Fp::Rect { cx, cy, hx, hy } => ((y - cy).abs() <= hy).then_some((cx - hx, cx + hx)),
            Fp::Disc { cx, cy, r } => {
                let d = r * r - (y - cy) * (y - cy);
                (d >= 0.0).then(|| (cx - d.sqrt(), cx + d.sqrt()))
            }
        }
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (monotone chain).
fn hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Smallest restoring lever arm of the top block's weight about any
/// tipping edge of the contact region, sampled as fine horizontal chords.
/// Positive means every edge's gravity torque pushes the block back.
fn torque_margin(a: Fp, b: Fp, com: [f64; 2]) -> Option<f64> {
    let (a0, a1) = a.y_range();
    let (b0, b1) = b.y_range();
    let (y0, y1) = (a0.max(b0), a1.min(b1));
    if y1 - y0 < 0.5 {
        return None;
    }
    let step = 0.02;
    let rows = ((y1 - y0) / step).ceil() as usize;
    let mut pts = Vec::new();
    for k in 0..=rows {
        let y = (y0 + k as f64 * step).min(y1);
        if let (Some((p0, p1)), Some((q0, q1))) = (a.row(y), b.row(y)) {
            let (lo, hi) = (p0.max(q0), p1.min(q1));
            if hi > lo {
                pts.push([lo, y]);
                pts.push([hi, y]);
            }
        }
    }
    let h = hull(pts);
    if h.len() < 3 {
        return None;
    }
    let mut margin = f64::INFINITY;
    for i in 0..h.len() {
        let (p, q) = (h[i], h[(i + 1) % h.len()]);
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        if len < 1e-9 {
            continue;
        }
        // torque of the weight about edge p->q, per unit weight
        margin = margin.min(cross(p, q, com) / len);
    }
    Some(margin)
}

fn random_spec(rng: &mut ChaCha8Rng, id: &str) -> (BlockSpec, Orientation) {
    if rng.random_bool(0.3) {
        (BlockSpec::cylinder(id, rng.random_range(10.0..100.0), rng.random_range(5.0..60.0), 1), Orientation::Upright)
    } else {
        let dims = [rng.random_range(10.0..120.0), rng.random_range(10.0..120.0), rng.random_range(5.0..60.0)];
        (BlockSpec::cuboid(id, dims, 1), Orientation::IDENTITY)
    }
}

fn footprint(spec: &BlockSpec, xy: [f64; 2]) -> Fp {
    match spec.shape {
        Shape::Cylinder { diameter, .. } => Fp::Disc { cx: xy[0], cy: xy[1], r: diameter / 2.0 },
        Shape::Cuboid { length, width, .. } => Fp::Rect { cx: xy[0], cy: xy[1], hx: length / 2.0, hy: width / 2.0 },
    }
}

fn half_x(fp: Fp) -> f64 {
    match fp {
        Fp::Rect { hx, .. } => hx,
        Fp::Disc { r, .. } => r,
    }
}

fn half_y(fp: Fp) -> f64 {
    match fp {
        Fp::Rect { hy, .. } => hy,
        Fp::Disc { r, .. } => r,
    }
}

#[test]
fn criterion_1_statics_matches_torque_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sim = SimParams::default();
    let (mut checked, mut marginal, mut unstable) = (0, 0, 0);
    let mut failures = Vec::new();
    while checked + marginal < 1000 {
        let (bottom, ob) = random_spec(&mut rng, "bottom");
        let (top, ot) = random_spec(&mut rng, "top");
        let fb = footprint(&bottom, [0.0, 0.0]);
        let reach = (half_x(fb) + half_x(footprint(&top, [0.0, 0.0])), half_y(fb) + half_y(footprint(&top, [0.0, 0.0])));
        let xy = [rng.random_range(-reach.0..reach.0), rng.random_range(-reach.1..reach.1)];
        let Some(margin) = torque_margin(fb, footprint(&top, xy), xy) else { continue };
        if margin.abs() <= 1.0 {
            marginal += 1;
            continue;
        }
        let catalog = Catalog::new(vec![bottom, top]).unwrap();
        let place = |id: &str, o, xy| Placement { block_id: id.into(), orientation: o, xy_mm: xy, color: "gray".into() };
        let plan = AssemblyPlan::new("stack", &catalog, vec![place("bottom", ob, [0.0, 0.0]), place("top", ot, xy)]);
        let settled = settle_plan(&plan, &catalog, &sim, false).unwrap();
        if settled.scene.blocks()[1].bottom() <= 0.0 {
            continue;
        }
        checked += 1;
        let oracle = margin > 0.0;
        unstable += usize::from(!oracle);
        if settled.all_stable() != oracle {
            failures.push(format!("xy {xy:?} margin {margin:.3}: statics says {}", settled.all_stable()));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(10) {
        failures.push(format!("took {elapsed:?}"));
    }
    verdict(
        1,
        &failures,
        &format!("{checked} non-marginal stacks ({unstable} tipping, {marginal} marginal skipped), {} mismatches, {elapsed:.2?}", failures.len()),
    );
}

// ---------------------------------------------------------------------------
// 2. redesign fixpoint audit

#[test]
fn criterion_2_redesign_fixpoint_audit() {
    let catalog = bundled::catalog();
    let sim = SimParams::default();
    let rp = RedesignParams::default();
    let mut failures = Vec::new();
    let mut sizes = Vec::new();
    for (slug, plan) in bundled::designs() {
        sizes.push(plan.len());
        let (out, rep) = redesign(&plan, &catalog, &rp, &sim).unwrap();
        if !rep.converged {
            failures.push(format!("{slug}: not converged"));
        }
        let scene = settle_plan(&out, &catalog, &sim, false).unwrap().scene;
        for i in 0..out.len() {
            let flagged = needs_perturbation(&scene, i, &rp, &sim);
            if !flagged.is_empty() {
                failures.push(format!("{slug}: block {i} still flagged {flagged:?}"));
            }
        }
        let cap = plan.len() as u32 * rp.max_visits_per_block;
        if rep.total_perturbations() > cap {
            failures.push(format!("{slug}: {} perturbations > {cap}", rep.total_perturbations()));
        }
    }
    if sizes.iter().min() != Some(&4) || sizes.iter().max() != Some(&10) {
        failures.push(format!("design sizes {sizes:?} should span 4 to 10"));
    }
    verdict(2, &failures, &format!("5 bundled designs (sizes {sizes:?}) converge with no block flagged"));
}

// ---------------------------------------------------------------------------
// 3. ablation direction

#[test]
fn criterion_3_ablation_direction() {
    let start = Instant::now();
    let catalog = bundled::catalog();
    let sim = SimParams::default();
    let noise = NoiseModel { xy_sigma_mm: 3.0, seed: 0 };
    let mut higher = 0;
    let mut contrast = 0;
    let mut rows = Vec::new();
    for (slug, plan) in bundled::designs() {
        let a = run_ablation(&plan, &catalog, &sim, &noise, &RedesignParams::default(), 100).unwrap();
        let (w, wo) = (a.with_redesign.full_completion, a.without_redesign.full_completion);
        higher += usize::from(w > wo);
        contrast += usize::from(w >= 0.9 && wo <= 0.6);
        rows.push(format!("{slug} {:.0}%->{:.0}%", 100.0 * wo, 100.0 * w));
    }
    let elapsed = start.elapsed();
    let mut failures = Vec::new();
    if higher < 4 {
        failures.push(format!("with-arm higher on only {higher} designs"));
    }
    if contrast < 3 {
        failures.push(format!("strong contrast on only {contrast} designs"));
    }
    if elapsed > Duration::from_secs(120) {
        failures.push(format!("took {elapsed:?}"));
    }
    verdict(
        3,
        &failures,
        &format!("full completion without->with: {}; higher on {higher}/5, contrast on {contrast}/5, {elapsed:.1?}", rows.join(", ")),
    );
}

// ---------------------------------------------------------------------------
// 4. metric arithmetic

#[test]
fn criterion_4_metric_arithmetic() {
    let mut failures = Vec::new();
    // ten designs averaging rank 1.7 among 5 labels
    let r = RecogResult::from_ranks(5, vec![1, 1, 1, 1, 1, 2, 2, 2, 3, 3]).unwrap();
    if r.relative_ranking != r.avg_ranking / 5.0 || (r.avg_ranking - 1.7).abs() > 1e-12 || (r.relative_ranking - 0.34).abs() > 1e-12 {
        failures.push(format!("avg {} relative {}", r.avg_ranking, r.relative_ranking));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..2000 {
        let n = rng.random_range(0..12);
        let blocks = (0..n)
            .map(|index| {
                let fallen = rng.random_bool(0.2);
                BlockOutcome {
                    index,
                    offset_mm: [0.0, 0.0],
                    placed_correct: rng.random_bool(0.8),
                    end_correct: !fallen && rng.random_bool(0.8),
                    fallen,
                }
            })
            .collect();
        let t = TrialMetrics::from_outcomes(blocks);
        if t.full_completion && t.correct_end_state != 1.0 {
            failures.push(format!("synthetic trial {t:?}"));
        }
    }
    let catalog = bundled::catalog();
    let sim = SimParams::default();
    let mut trials = 0;
    for (_, plan) in bundled::designs() {
        for (k, sigma) in [0.0, 2.0, 5.0, 10.0].into_iter().enumerate() {
            for seed in 0..10 {
                let t = simulate_trial(&plan, &catalog, &sim, &NoiseModel { xy_sigma_mm: sigma, seed: k as u64 }, seed).unwrap();
                trials += 1;
                if t.full_completion && t.correct_end_state != 1.0 {
                    failures.push(format!("simulated trial sigma {sigma} seed {seed}"));
                }
            }
        }
    }
    verdict(4, &failures, &format!("relative = avg/N = {:.3} for avg 1.7, N 5; identity holds on 2000 synthetic and {trials} simulated trials", r.relative_ranking));
}

// ---------------------------------------------------------------------------
// 5. replay determinism through the command line

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets")
}

#[test]
fn criterion_5_replay_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    for (slug, prompt) in [("table", "table"), ("letter_u", "letter U")] {
        let golden = fs::read(assets().join("golden").join(format!("{slug}.winner.plan.json"))).unwrap();
        let client = format!("replay:{}", assets().join("replay").join(slug).display());
        for run in 0..3 {
            let out = tmp.path().join(format!("{slug}-{run}"));
            let (mut o, mut e) = (Vec::new(), Vec::new());
            let args = ["blox", "design", "--prompt", prompt, "--client", &client, "--out", out.to_str().unwrap()];
            let code = blox_cli::main_with(args, &mut o, &mut e);
            if code != 0 {
                failures.push(format!("{slug} run {run}: exit {code}: {}", String::from_utf8_lossy(&e)));
                continue;
            }
            if fs::read(out.join("winner.plan.json")).unwrap() != golden {
                failures.push(format!("{slug} run {run}: winner differs from golden"));
            }
        }
    }
    verdict(5, &failures, "table and letter U: 3 replayed design runs each give byte-identical winner.plan.json");
}

// ---------------------------------------------------------------------------
// 6. sampling geometry

#[test]
fn criterion_6_sampling_geometry() {
    let p = RedesignParams::default();
    let offs = sample_offsets(&p);
    let mut failures = Vec::new();
    let radius = |o: &[f64; 2]| (o[0] * o[0] + o[1] * o[1]).sqrt();
    let ring: Vec<f64> = offs.iter().map(radius).filter(|r| *r > 1e-12).collect();
    if ring.len() != 80 || offs.len() != 81 {
        failures.push(format!("{} points, {} off the origin", offs.len(), ring.len()));
    }
    let mut circles: Vec<(i64, usize)> = Vec::new();
    for r in &ring {
        let key = (r * 1e6).round() as i64;
        match circles.iter_mut().find(|(k, _)| *k == key) {
            Some((_, n)) => *n += 1,
            None => circles.push((key, 1)),
        }
    }
    circles.sort();
    if circles.len() != 10 || circles.iter().any(|(_, n)| *n != 8) {
        failures.push(format!("circles {circles:?}"));
    }
    let (lo, hi) = ring.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    if (lo - 1.0).abs() > 1e-9 || (hi - 15.0).abs() > 1e-9 {
        failures.push(format!("radii span [{lo}, {hi}]"));
    }
    verdict(6, &failures, &format!("{} non-origin points on {} circles of 8, radii [{lo:.3}, {hi:.3}] mm", ring.len(), circles.len()));
}

// ---------------------------------------------------------------------------
// 7. drop-settle against a voxel drop

/// Footprint of a placed block: discs for upright cylinders, else rectangles.
fn placed_fp(spec: &BlockSpec, o: Orientation, xy: [f64; 2]) -> Fp {
    let d = effective_dims(spec, o).unwrap();
    match (spec.shape, o) {
        (Shape::Cylinder { .. }, Orientation::Upright) => Fp::Disc { cx: xy[0], cy: xy[1], r: d[0] / 2.0 },
        _ => Fp::Rect { cx: xy[0], cy: xy[1], hx: d[0] / 2.0, hy: d[1] / 2.0 },
    }
}

fn strictly_inside(fp: Fp, p: [f64; 2]) -> bool {
    const E: f64 = 1e-9;
    match fp {
        Fp::Rect { cx, cy, hx, hy } => (p[0] - cx).abs() < hx - E && (p[1] - cy).abs() < hy - E,
        Fp::Disc { cx, cy, r } => (p[0] - cx).powi(2) + (p[1] - cy).powi(2) < (r - E) * (r - E),
    }
}

/// Columns under the new block: a 1 mm interior lattice plus its outline
/// every 0.05 mm.
fn columns(fp: Fp) -> Vec<[f64; 2]> {
    let mut pts = Vec::new();
    let (hx, hy, cx, cy) = match fp {
        Fp::Rect { cx, cy, hx, hy } => (hx, hy, cx, cy),
        Fp::Disc { cx, cy, r } => (r, r, cx, cy),
    };
    let inset = 1e-6;
    let mut x = cx - hx + 0.5;
    while x < cx + hx {
        let mut y = cy - hy + 0.5;
        while y < cy + hy {
            if strictly_inside(fp, [x, y]) {
                pts.push([x, y]);
            }
            y += 1.0;
        }
        x += 1.0;
    }
    match fp {
        Fp::Rect { .. } => {
            let n = |len: f64| (len / 0.05).ceil() as usize;
            for k in 0..=n(2.0 * hx) {
                let x = (cx - hx + k as f64 * 0.05).min(cx + hx);
                let x = x.clamp(cx - hx + inset, cx + hx - inset);
                pts.push([x, cy - hy + inset]);
                pts.push([x, cy + hy - inset]);
            }
            for k in 0..=n(2.0 * hy) {
                let y = (cy - hy + k as f64 * 0.05).min(cy + hy);
                let y = y.clamp(cy - hy + inset, cy + hy - inset);
                pts.push([cx - hx + inset, y]);
                pts.push([cx + hx - inset, y]);
            }
        }
        Fp::Disc { r, .. } => {
            let n = (std::f64::consts::TAU * r / 0.05).ceil() as usize;
            for k in 0..n {
                let t = k as f64 / n as f64 * std::f64::consts::TAU;
                pts.push([cx + (r - inset) * t.cos(), cy + (r - inset) * t.sin()]);
            }
        }
    }
    pts
}

/// Lowers the block from high above in 0.1 mm steps until the next step
/// would push it into an occupied voxel column.
fn voxel_drop(scene: &[(Fp, f64)], fp: Fp) -> f64 {
    let heights: Vec<f64> = columns(fp)
        .into_iter()
        .map(|p| scene.iter().filter(|(g, _)| strictly_inside(*g, p)).map(|(_, top)| *top).fold(0.0, f64::max))
        .collect();
    // the tallest column is the first one the descending block meets
    let highest = heights.iter().copied().fold(0.0, f64::max);
    let blocked = |k: i64| (k as f64) * 0.1 < highest - 1e-9;
    let mut k = 10_000;
    while k > 0 && !blocked(k - 1) {
        k -= 1;
    }
    k as f64 * 0.1
}

#[test]
fn criterion_7_drop_settle_matches_voxel_drop() {
    let catalog = bundled::catalog();
    let sim = SimParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let mut placements = 0;
    let mut stacked = 0;
    while placements < 200 {
        let mut scene = Scene::new(sim.contact_tol_mm);
        let mut occupied: Vec<(Fp, f64)> = Vec::new();
        for _ in 0..5 {
            let spec = &catalog.blocks()[rng.random_range(0..catalog.blocks().len())];
            let o = match spec.shape {
                Shape::Cylinder { .. } => Orientation::cylinder_orientations()[rng.random_range(0..3)],
                Shape::Cuboid { .. } => Orientation::cuboid_perms()[rng.random_range(0..6)],
            };
            let xy = [rng.random_range(-50..=50) as f64, rng.random_range(-50..=50) as f64];
            let p = Placement { block_id: spec.id.clone(), orientation: o, xy_mm: xy, color: "gray".into() };
            scene = drop_settle(&scene, &catalog, &p, &sim).unwrap();
            let placed: &PlacedBlock = scene.blocks().last().unwrap();
            let fp = placed_fp(spec, o, xy);
            let oracle = voxel_drop(&occupied, fp);
            let err = (placed.bottom() - oracle).abs();
            worst = worst.max(err);
            stacked += usize::from(oracle > 0.05);
            if err > 0.2 {
                failures.push(format!("{} {o} at {xy:?}: settle {:.3} voxel {oracle:.3}", spec.id, placed.bottom()));
            }
            occupied.push((fp, placed.top()));
            placements += 1;
        }
    }
    verdict(7, &failures, &format!("{placements} drops ({stacked} landing on blocks), worst |dz| {worst:.3} mm"));
}

// ---------------------------------------------------------------------------
// 8. render and mesh golden files

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/renders")
}

#[test]
fn criterion_8_render_and_mesh_goldens() {
    let catalog = bundled::catalog();
    let sim = SimParams::default();
    let cfg = RenderConfig::default();
    let bless = std::env::var_os("BLOX_BLESS").is_some();
    let views = [ViewAxis::Front, ViewAxis::Side, ViewAxis::Top];
    let mut failures = Vec::new();
    let mut files = 0;
    let mut boxes = 0;
    let mut worst = 0.0f64;
    for (slug, plan) in bundled::designs() {
        let scene = settle_plan(&plan, &catalog, &sim, false).unwrap().scene;
        let mut outputs: Vec<(String, Vec<u8>)> =
            views.iter().map(|&v| (format!("{slug}.{}.png", v.name()), render_ortho(&scene, v, &BTreeSet::new(), &cfg).to_png().unwrap())).collect();
        outputs.push((format!("{slug}.obj"), mesh_obj(&scene).into_bytes()));
        for (name, bytes) in outputs {
            // a second render must match the first
            let again = match name.rsplit('.').nth(1).and_then(|v| v.parse::<ViewAxis>().ok()) {
                Some(v) if name.ends_with(".png") => render_ortho(&scene, v, &BTreeSet::new(), &cfg).to_png().unwrap(),
                _ => mesh_obj(&scene).into_bytes(),
            };
            if again != bytes {
                failures.push(format!("{name}: not stable across renders"));
            }
            let path = golden_dir().join(&name);
            if bless {
                fs::create_dir_all(golden_dir()).unwrap();
                fs::write(&path, &bytes).unwrap();
            }
            match fs::read(&path) {
                Ok(g) if g == bytes => files += 1,
                Ok(_) => failures.push(format!("{name}: differs from golden")),
                Err(e) => failures.push(format!("{name}: {e}")),
            }
        }

        // each block alone, against its analytic projection
        for b in scene.blocks() {
            let alone = drop_settle(&Scene::new(sim.contact_tol_mm), &catalog, &b.placement, &sim).unwrap();
            let blk = &alone.blocks()[0];
            for &v in &views {
                let img = render_ortho(&alone, v, &BTreeSet::new(), &cfg);
                let blank = render_ortho(&Scene::new(sim.contact_tol_mm), v, &BTreeSet::new(), &cfg);
                let mut bb: Option<[u32; 4]> = None;
                for y in 0..img.height {
                    for x in 0..img.width {
                        if img.pixel(x, y) != blank.pixel(x, y) {
                            let e = bb.get_or_insert([x, y, x + 1, y + 1]);
                            *e = [e[0].min(x), e[1].min(y), e[2].max(x + 1), e[3].max(y + 1)];
                        }
                    }
                }
                let s = cfg.px_per_mm;
                let (w, g, h) = (cfg.width_px as f64, cfg.ground_row as f64, cfg.height_px as f64);
                let [cx, cy, cz] = blk.center_mm;
                let [ex, ey, ez] = blk.extents_mm;
                let want = match v {
                    ViewAxis::Front => [w / 2.0 + (cx - ex / 2.0) * s, g - (cz + ez / 2.0) * s, w / 2.0 + (cx + ex / 2.0) * s, g - (cz - ez / 2.0) * s],
                    ViewAxis::Side => [w / 2.0 + (cy - ey / 2.0) * s, g - (cz + ez / 2.0) * s, w / 2.0 + (cy + ey / 2.0) * s, g - (cz - ez / 2.0) * s],
                    ViewAxis::Top => [w / 2.0 + (cx - ex / 2.0) * s, h / 2.0 - (cy + ey / 2.0) * s, w / 2.0 + (cx + ex / 2.0) * s, h / 2.0 - (cy - ey / 2.0) * s],
                };
                let Some(got) = bb else {
                    failures.push(format!("{slug} {}: block drew nothing in {}", blk.placement.block_id, v.name()));
                    continue;
                };
                let err = (0..4).map(|i| (got[i] as f64 - want[i]).abs()).fold(0.0, f64::max);
                worst = worst.max(err);
                boxes += 1;
                if err > 1.0 {
                    failures.push(format!("{slug} {} {}: bbox {got:?} vs {want:?}", blk.placement.block_id, v.name()));
                }
            }
        }
    }
    verdict(8, &failures, &format!("{files} golden renders and meshes byte-stable; {boxes} block bboxes within {worst:.2} px of analytic"));
}
