//! Versioned prompt templates. Placeholders are written `{{name}}`.

/// Bumped whenever any template text changes; recorded transcripts only
/// replay against the version they were made with.
pub const PROMPT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template {
    pub name: &'static str,
    pub text: &'static str,
}

macro_rules! template {
    ($id:ident, $file:literal) => {
        pub const $id: Template =
            Template { name: $file, text: include_str!(concat!("../../assets/prompts/", $file, ".txt")) };
    };
}

template!(SYSTEM, "system");
template!(ELABORATE, "elaborate");
template!(PLAN, "plan");
template!(GENERATE, "generate");
template!(FIX, "fix");
template!(REPAIR, "repair");
template!(RATE, "rate");
template!(RERATE, "rerate");
template!(SELECT, "select");
template!(RECOGNIZE, "recognize");
template!(RERANK, "rerank");
template!(OBJECTS, "objects");

impl Template {
    /// Substitutes every `{{key}}`. Panics on a placeholder left unfilled,
    /// which is a programming error rather than bad input.
    pub fn fill(&self, vars: &[(&str, &str)]) -> String {
        let mut out = self.text.trim_end().to_string();
        for (k, v) in vars {
            out = out.replace(&format!("{{{{{k}}}}}"), v);
        }
        assert!(!out.contains("{{"), "template {} has unfilled placeholders", self.name);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_replaces_all() {
        let s = ELABORATE.fill(&[("prompt", "giraffe")]);
        assert!(s.contains("build: giraffe."));
        assert!(!s.contains("{{"));
    }

    #[test]
    #[should_panic]
    fn unfilled_placeholder_panics() {
        PLAN.fill(&[("prompt", "x")]);
    }
}
