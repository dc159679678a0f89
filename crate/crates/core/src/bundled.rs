//! Catalog and reference designs shipped with the crate.

use crate::catalog::{AssemblyPlan, Catalog};

pub const CATALOG_JSON: &str = include_str!("../assets/catalog.json");

/// Fragile reference designs: tight side gaps that placement noise turns
/// into collisions until redesign opens them up.
pub const DESIGNS: [(&str, &str); 5] = [
    ("ceiling_fan", include_str!("../assets/designs/ceiling_fan.plan.json")),
    ("sandbox", include_str!("../assets/designs/sandbox.plan.json")),
    ("shark", include_str!("../assets/designs/shark.plan.json")),
    ("sofa", include_str!("../assets/designs/sofa.plan.json")),
    ("taj_mahal", include_str!("../assets/designs/taj_mahal.plan.json")),
];

pub fn catalog() -> Catalog {
    Catalog::from_json(CATALOG_JSON).expect("bundled catalog is valid")
}

pub fn design(slug: &str) -> Option<AssemblyPlan> {
    DESIGNS
        .iter()
        .find(|(s, _)| *s == slug)
        .map(|(_, json)| AssemblyPlan::from_json(json).expect("bundled design is valid"))
}

pub fn designs() -> Vec<(&'static str, AssemblyPlan)> {
    DESIGNS.iter().map(|(s, _)| (*s, design(s).expect("listed"))).collect()
}
