//! Records the replay fixtures under `assets/replay/` and the golden winner
//! plans under `assets/golden/`.
//!
//! The "model" here is a fixed script that answers each stage the way a
//! reasonable vision-language model might, including the usual failure
//! modes: malformed JSON, over-budget block counts, unstable designs and
//! unreadable verdicts. Run with `cargo run -p blox-core --example record_fixtures`.

use std::collections::HashMap;
use std::path::Path;

use blox_core::designer::client::{Conversation, LmError};
use blox_core::designer::{design, list_objects, DesignParams, Recorder, ScriptedClient};
use blox_core::evalharness::{recognizability, RecogDesign};
use blox_core::render::{render_ortho, RenderConfig, ViewAxis};
use blox_core::{bundled, save_plan, settle_plan, SimParams};

const MODEL: &str = "fixture-vlm";
const TIMESTAMP: u64 = 1_767_225_600;

type Block = (&'static str, &'static str, f64, f64, &'static str);

fn design_reply(blocks: &[Block], order: Option<&[usize]>) -> String {
    let items: Vec<String> = blocks
        .iter()
        .map(|(id, o, x, y, c)| format!(r#"    {{"block_id": "{id}", "orientation": "{o}", "xy_mm": [{x:.1}, {y:.1}], "color": "{c}"}}"#))
        .collect();
    let order = order.map(|o| format!(",\n  \"order\": {o:?}")).unwrap_or_default();
    format!("Here is the design.\n\n```json\n{{\n  \"placements\": [\n{}\n  ]{order}\n}}\n```\n", items.join(",\n"))
}

fn stage(c: &Conversation) -> &'static str {
    let t = c.last_user_text();
    let probes = [
        ("qualitative description", "elaborate"),
        ("each block's role", "plan"),
        ("nothing else of substance", "generate"),
        ("cannot be built", "fix"),
        ("unstable", "repair"),
        ("Rate from 1 to 5", "rate"),
        ("single integer", "rerate"),
        ("more recognizable", "select"),
        ("Rank these labels", "recognize"),
        ("distinct everyday objects", "objects"),
    ];
    probes.iter().find(|(p, _)| t.contains(p)).map(|(_, s)| *s).unwrap_or("other")
}

fn session_index(c: &Conversation) -> usize {
    c.session.rsplit('-').next().and_then(|s| s.parse().ok()).unwrap_or(0)
}

fn repair_round(c: &Conversation) -> usize {
    c.messages.iter().filter(|m| !m.images.is_empty() && m.text.contains("unstable")).count()
}

/// Replies for one chain: generate, fix, and each repair round.
struct Chain {
    generate: String,
    fix: String,
    repairs: Vec<String>,
    rating: &'static [&'static str],
}

fn chain(generate: String) -> Chain {
    Chain { generate, fix: String::new(), repairs: vec![], rating: &["4"] }
}

const PROSE: &str = "I would rather describe it in words: a flat top resting on sturdy legs.";

fn table_chains() -> Vec<Chain> {
    let slab_on_pillars: Vec<Block> = vec![
        ("pillar", "LWH", -30.0, -30.0, "brown"),
        ("pillar", "LWH", 30.0, -30.0, "brown"),
        ("pillar", "LWH", -30.0, 30.0, "brown"),
        ("pillar", "LWH", 30.0, 30.0, "brown"),
        ("slab", "LWH", 0.0, 0.0, "brown"),
    ];
    let plank_on_rods: Vec<Block> = vec![
        ("rod", "upright", -70.0, -10.0, "gray"),
        ("rod", "upright", 70.0, -10.0, "gray"),
        ("rod", "upright", -70.0, 10.0, "gray"),
        ("rod", "upright", 70.0, 10.0, "gray"),
        ("plank", "LWH", 0.0, 0.0, "white"),
    ];
    let one_sided: Vec<Block> = vec![
        ("pillar", "LWH", 60.0, -10.0, "brown"),
        ("pillar", "LWH", 60.0, 10.0, "brown"),
        ("plank", "LWH", 0.0, 0.0, "brown"),
    ];
    let plank_on_pillars: Vec<Block> = vec![
        ("pillar", "LWH", -60.0, -10.0, "brown"),
        ("pillar", "LWH", 60.0, -10.0, "brown"),
        ("pillar", "LWH", -60.0, 10.0, "brown"),
        ("pillar", "LWH", 60.0, 10.0, "brown"),
        ("plank", "LWH", 0.0, 0.0, "brown"),
    ];
    let mut seven = slab_on_pillars.clone();
    seven.splice(0..0, [("pillar", "LWH", 0.0, -30.0, "brown"), ("pillar", "LWH", 0.0, 30.0, "brown"), ("pillar", "LWH", 0.0, 0.0, "brown")]);
    let disc_on_pillars: Vec<Block> = vec![
        ("pillar", "LWH", -20.0, -20.0, "white"),
        ("pillar", "LWH", 20.0, -20.0, "white"),
        ("pillar", "LWH", -20.0, 20.0, "white"),
        ("pillar", "LWH", 20.0, 20.0, "white"),
        ("disc", "upright", 0.0, 0.0, "white"),
    ];
    let slab_on_cubes: Vec<Block> = vec![
        ("cube", "LWH", -20.0, -20.0, "red"),
        ("cube", "LWH", 20.0, -20.0, "red"),
        ("cube", "LWH", -20.0, 20.0, "red"),
        ("cube", "LWH", 20.0, 20.0, "red"),
        ("slab", "LWH", 0.0, 0.0, "red"),
    ];
    let slab_on_cylinders: Vec<Block> = vec![
        ("cylinder", "upright", -22.0, -22.0, "green"),
        ("cylinder", "upright", 22.0, -22.0, "green"),
        ("cylinder", "upright", -22.0, 22.0, "green"),
        ("cylinder", "upright", 22.0, 22.0, "green"),
        ("slab", "LWH", 0.0, 0.0, "green"),
    ];
    let top_first: Vec<Block> = vec![
        ("slab", "LWH", 0.0, 0.0, "blue"),
        ("pillar", "LWH", -30.0, -30.0, "blue"),
        ("pillar", "LWH", 30.0, -30.0, "blue"),
        ("pillar", "LWH", -30.0, 30.0, "blue"),
        ("pillar", "LWH", 30.0, 30.0, "blue"),
    ];
    let mut shifted = one_sided.clone();
    shifted[0].2 = 50.0;
    shifted[1].2 = 50.0;
    vec![
        Chain { rating: &["5"], ..chain(design_reply(&slab_on_pillars, None)) },
        Chain { rating: &["Rating: 4"], ..chain(design_reply(&plank_on_rods, None)) },
        Chain { fix: design_reply(&disc_on_pillars, None), rating: &["4"], ..chain(design_reply(&seven, None)) },
        Chain { repairs: vec![design_reply(&plank_on_pillars, None)], rating: &["3"], ..chain(design_reply(&one_sided, None)) },
        Chain { fix: PROSE.into(), ..chain(PROSE.into()) },
        Chain {
            repairs: vec![design_reply(&shifted, None), design_reply(&one_sided, None)],
            rating: &["2"],
            ..chain(design_reply(&one_sided, None))
        },
        Chain { rating: &["7/5", "2"], ..chain(design_reply(&slab_on_cubes, None)) },
        Chain { rating: &["I'd give it a 5."], ..chain(design_reply(&slab_on_cylinders, None)) },
        Chain { repairs: vec!["Move the plank to the left.".into()], rating: &["1"], ..chain(design_reply(&one_sided, None)) },
        Chain { rating: &["4"], ..chain(design_reply(&top_first, Some(&[1, 2, 3, 4, 0]))) },
    ]
}

fn letter_u_chains() -> Vec<Chain> {
    let pillars_on_brick: Vec<Block> =
        vec![("brick", "LWH", 0.0, 0.0, "yellow"), ("pillar", "LWH", -30.0, 0.0, "yellow"), ("pillar", "LWH", 30.0, 0.0, "yellow")];
    let cube_u: Vec<Block> = vec![
        ("cube", "LWH", 0.0, 0.0, "red"),
        ("cube", "LWH", -40.0, 0.0, "red"),
        ("cube", "LWH", 40.0, 0.0, "red"),
        ("cube", "LWH", -40.0, 0.0, "red"),
        ("cube", "LWH", 40.0, 0.0, "red"),
    ];
    let rods_on_plank: Vec<Block> =
        vec![("plank", "LWH", 0.0, 0.0, "blue"), ("rod", "upright", -70.0, 0.0, "blue"), ("rod", "upright", 70.0, 0.0, "blue")];
    let leaning: Vec<Block> =
        vec![("brick", "LWH", 0.0, 0.0, "yellow"), ("pillar", "LWH", -45.0, 0.0, "yellow"), ("pillar", "LWH", 45.0, 0.0, "yellow")];
    let slabs: Vec<Block> = vec![("slab", "LWH", 0.0, 0.0, "gray"); 5];
    let stubby: Vec<Block> =
        vec![("brick", "LWH", 0.0, 0.0, "green"), ("cylinder", "upright", -20.0, 0.0, "green"), ("cylinder", "upright", 20.0, 0.0, "green")];
    let rods_on_brick: Vec<Block> =
        vec![("brick", "LWH", 0.0, 0.0, "white"), ("rod", "upright", -30.0, 0.0, "white"), ("rod", "upright", 30.0, 0.0, "white")];
    let mut blue = pillars_on_brick.clone();
    blue.iter_mut().for_each(|b| b.4 = "blue");
    let nine: Vec<Block> = (0..9).map(|i| ("pillar", "LWH", -80.0 + 20.0 * i as f64, 0.0, "gray")).collect();
    let serif: Vec<Block> = vec![
        ("brick", "LWH", 0.0, 0.0, "black"),
        ("pillar", "LWH", -30.0, 0.0, "black"),
        ("pillar", "LWH", 30.0, 0.0, "black"),
        ("cube", "LWH", -30.0, 0.0, "black"),
        ("cube", "LWH", 30.0, 0.0, "black"),
    ];
    vec![
        Chain { rating: &["5"], ..chain(design_reply(&pillars_on_brick, None)) },
        Chain { rating: &["4"], ..chain(design_reply(&cube_u, None)) },
        Chain { rating: &["5 - clearly a U"], ..chain(design_reply(&rods_on_plank, None)) },
        Chain { repairs: vec![design_reply(&pillars_on_brick, None)], rating: &["4"], ..chain(design_reply(&leaning, None)) },
        Chain { fix: design_reply(&slabs, None), ..chain(design_reply(&slabs, None)) },
        Chain { rating: &["3"], ..chain(design_reply(&stubby, None)) },
        Chain { rating: &["5"], ..chain(design_reply(&rods_on_brick, None)) },
        Chain { fix: design_reply(&blue, None), rating: &["4"], ..chain("A U has two uprights joined at the bottom.".into()) },
        Chain { repairs: vec![design_reply(&nine, None)], rating: &["1"], ..chain(design_reply(&leaning, None)) },
        Chain { rating: &["three", "3"], ..chain(design_reply(&serif, None)) },
    ]
}

fn design_model(prompt: &'static str, chains: Vec<Chain>) -> ScriptedClient {
    ScriptedClient::new(move |c| {
        let i = session_index(c);
        let ch = chains.get(i).ok_or_else(|| LmError::Refusal(format!("no script for session {}", c.session)))?;
        Ok(match stage(c) {
            "elaborate" => format!("A {prompt} built from blocks: keep the silhouette simple and the proportions chunky."),
            "plan" => format!("The larger blocks form the base of the {prompt}; thinner blocks make the uprights."),
            "generate" => ch.generate.clone(),
            "fix" => ch.fix.clone(),
            "repair" => ch.repairs.get(repair_round(c) - 1).cloned().unwrap_or_default(),
            "rate" => ch.rating[0].to_string(),
            "rerate" => ch.rating.get(1).copied().unwrap_or("3").to_string(),
            // prefers the busier render
            "select" => {
                let imgs = &c.messages.last().expect("request").images;
                if imgs[1].bytes.len() > imgs[0].bytes.len() {
                    "B".into()
                } else {
                    "Design A is closer.".into()
                }
            }
            s => return Err(LmError::Refusal(format!("unexpected stage {s}"))),
        })
    })
    .with_model(MODEL, TIMESTAMP)
}

const OBJECTS: &[&str] = &[
    "table", "letter U", "ceiling fan", "sandbox", "shark", "sofa", "taj mahal", "bridge", "giraffe", "chair",
    "house", "tower", "letter T", "car", "boat", "bed", "stairs", "arch", "robot", "dog",
];

fn write_case(root: &Path, slug: &str, prompt: &'static str, chains: Vec<Chain>) {
    let catalog = bundled::catalog();
    let client = Recorder::new(design_model(prompt, chains));
    let outcome = design(prompt, &catalog, &client, &DesignParams::default()).expect("fixture design runs");
    let dir = root.join("replay").join(slug);
    let _ = std::fs::remove_dir_all(&dir);
    client.write_dir(&dir).expect("write transcripts");
    let winner = outcome.winner();
    save_plan(&winner.plan, root.join("golden").join(format!("{slug}.winner.plan.json"))).expect("write golden");
    println!(
        "{slug}: {} candidates, {} failures, winner chain {} ({} placements)",
        outcome.candidates.len(),
        outcome.failures.len(),
        winner.chain,
        winner.plan.len()
    );
}

fn write_objects(root: &Path) {
    let reply = OBJECTS.join("\n");
    let client = Recorder::new(ScriptedClient::new(move |_| Ok(reply.clone())).with_model(MODEL, TIMESTAMP));
    let items = list_objects(OBJECTS.len(), &client).expect("objects");
    let dir = root.join("replay").join("objects");
    let _ = std::fs::remove_dir_all(&dir);
    client.write_dir(&dir).expect("write transcripts");
    println!("objects: {} items", items.len());
}

/// Front renders of the bundled designs, labeled by their prompts.
pub fn recog_designs() -> Vec<RecogDesign> {
    let catalog = bundled::catalog();
    let sim = SimParams::default();
    let cfg = RenderConfig::default();
    bundled::designs()
        .into_iter()
        .map(|(_, plan)| {
            let scene = settle_plan(&plan, &catalog, &sim, false).expect("bundled designs settle").scene;
            let view = render_ortho(&scene, ViewAxis::Front, &Default::default(), &cfg);
            let (bytes, mime) = view.encode().expect("encode");
            RecogDesign { image: blox_core::designer::Image { mime: mime.into(), bytes }, label: plan.prompt.clone() }
        })
        .collect()
}

fn write_recognize(root: &Path) {
    let designs = recog_designs();
    // the scripted ranker puts the correct label at a fixed depth per design
    let depth: HashMap<String, (String, usize)> =
        designs.iter().zip([0, 0, 1, 0, 2]).map(|(d, k)| (d.image.digest(), (d.label.clone(), k))).collect();
    let client = Recorder::new(
        ScriptedClient::new(move |c| {
            let req = c.messages.last().expect("request");
            let (label, k) = depth.get(&req.images[0].digest()).cloned().ok_or_else(|| LmError::Refusal("unknown image".into()))?;
            let mut labels: Vec<&str> = req.text.lines().skip(1).take_while(|l| !l.starts_with("Reply")).collect();
            let at = labels.iter().position(|l| *l == label).expect("label listed");
            let correct = labels.remove(at);
            labels.insert(k.min(labels.len()), correct);
            Ok(labels.join("\n"))
        })
        .with_model(MODEL, TIMESTAMP),
    );
    let pool: Vec<String> = OBJECTS.iter().map(|s| s.to_string()).collect();
    let result = recognizability(&designs, &pool, 5, &client, 0).expect("recognizability");
    let dir = root.join("replay").join("recognize");
    let _ = std::fs::remove_dir_all(&dir);
    client.write_dir(&dir).expect("write transcripts");
    std::fs::write(dir.join("pool.txt"), OBJECTS.join("\n") + "\n").expect("write pool");
    println!("recognize: ranks {:?}, top1 {:.2}", result.ranks, result.top1_accuracy);
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
    std::fs::create_dir_all(root.join("golden")).expect("golden dir");
    write_case(&root, "table", "table", table_chains());
    write_case(&root, "letter_u", "letter U", letter_u_chains());
    write_objects(&root);
    write_recognize(&root);
}
