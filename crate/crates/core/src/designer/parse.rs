//! Parsing of model replies.

use serde::Deserialize;

use crate::catalog::{AssemblyPlan, Catalog, Orientation, Placement};

/// Contents of each fenced code block, in order.
pub fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let body = &after[body_start..];
        match body.find("```") {
            Some(end) => {
                out.push(&body[..end]);
                rest = &body[end + 3..];
            }
            None => break,
        }
    }
    out
}

#[derive(Debug, Deserialize)]
struct RawPlacement {
    block_id: String,
    orientation: Orientation,
    xy_mm: [f64; 2],
    #[serde(default = "default_color")]
    color: String,
}

fn default_color() -> String {
    "gray".into()
}

#[derive(Debug, Deserialize)]
struct Envelope {
    placements: Vec<RawPlacement>,
    #[serde(default)]
    order: Option<Vec<usize>>,
}

/// Reads the first fenced JSON design in `text`, applying its `order`.
///
/// Structural checks against the catalog are left to `validate_plan`.
pub fn parse_plan_reply(text: &str, prompt: &str, catalog: &Catalog) -> Result<AssemblyPlan, String> {
    let blocks = fenced_blocks(text);
    if blocks.is_empty() {
        return Err("reply contains no fenced JSON block".into());
    }
    let mut last_err = String::new();
    for body in blocks {
        match serde_json::from_str::<Envelope>(body.trim()) {
            Ok(env) => return envelope_to_plan(env, prompt, catalog),
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(format!("fenced block is not a design: {last_err}"))
}

fn envelope_to_plan(env: Envelope, prompt: &str, catalog: &Catalog) -> Result<AssemblyPlan, String> {
    if env.placements.is_empty() {
        return Err("design has no placements".into());
    }
    let n = env.placements.len();
    let order = env.order.unwrap_or_else(|| (0..n).collect());
    let mut seen = vec![false; n];
    for &i in &order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(format!("order must list each of the {n} placement indices once"));
        }
    }
    if order.len() != n {
        return Err(format!("order must list each of the {n} placement indices once"));
    }
    let mut slots: Vec<Option<RawPlacement>> = env.placements.into_iter().map(Some).collect();
    let placements = order
        .iter()
        .map(|&i| {
            let r = slots[i].take().expect("permutation checked");
            Placement { block_id: r.block_id, orientation: r.orientation, xy_mm: r.xy_mm, color: r.color }
        })
        .collect();
    Ok(AssemblyPlan::new(prompt, catalog, placements))
}

/// Unsigned integers appearing in `text`, in order.
fn integers(text: &str) -> Vec<u64> {
    let mut out = Vec::new();
    let mut cur: Option<u64> = None;
    for c in text.chars() {
        match c.to_digit(10) {
            Some(d) => cur = Some(cur.unwrap_or(0).saturating_mul(10).saturating_add(d as u64)),
            None => out.extend(cur.take()),
        }
    }
    out.extend(cur);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatingParse {
    Valid(u8),
    OutOfRange(u64),
    Missing,
}

/// The first integer in the reply decides the rating.
pub fn parse_rating(text: &str) -> RatingParse {
    match integers(text).first() {
        Some(&v) if (1..=5).contains(&v) => RatingParse::Valid(v as u8),
        Some(&v) => RatingParse::OutOfRange(v),
        None => RatingParse::Missing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    A,
    B,
}

/// First standalone capital `A` or `B`; lowercase `a` is too often the article.
pub fn parse_choice(text: &str) -> Option<Choice> {
    text.split(|c: char| !c.is_ascii_alphanumeric()).find_map(|w| match w {
        "A" => Some(Choice::A),
        "B" => Some(Choice::B),
        _ => None,
    })
}

fn clean_item(line: &str) -> &str {
    let t = line.trim();
    let t = t.trim_start_matches(|c: char| c.is_ascii_digit());
    let t = t.trim_start_matches(['.', ')', ':', '-', '*', '•']);
    t.trim().trim_matches(['"', '\'', '`', '*']).trim()
}

/// Non-empty lines with list numbering and bullets stripped.
pub fn list_items(text: &str) -> Vec<String> {
    text.lines().map(clean_item).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

/// Reads a ranking of `labels`; `Some` only when the reply is a permutation.
///
/// Items may be one per line or comma-separated; matching ignores case.
pub fn parse_ranking(text: &str, labels: &[String]) -> Option<Vec<usize>> {
    let mut items = list_items(text);
    if items.len() == 1 && labels.len() > 1 {
        items = items[0].split(',').map(clean_item).filter(|s| !s.is_empty()).map(str::to_string).collect();
    }
    if items.len() != labels.len() {
        return None;
    }
    let mut used = vec![false; labels.len()];
    let mut out = Vec::with_capacity(labels.len());
    for item in items {
        let i = labels.iter().position(|l| l.trim().eq_ignore_ascii_case(&item))?;
        if std::mem::replace(&mut used[i], true) {
            return None;
        }
        out.push(i);
    }
    Some(out)
}
