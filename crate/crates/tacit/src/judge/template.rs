//! Prompt templates and rendering.
//!
//! Templates are plain text with `{name}` placeholders (lowercase identifiers
//! only, so literal JSON braces in a template body never count). Rendering is
//! a single pass: bound content is substituted verbatim and never re-scanned.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five prompt roles of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Evaluate,
    Search,
    Prior,
    Match,
    Annotate,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Evaluate => "evaluate",
            TemplateId::Search => "search",
            TemplateId::Prior => "prior",
            TemplateId::Match => "match",
            TemplateId::Annotate => "annotate",
        }
    }

    /// Whether responses to this template carry a label/confidence verdict.
    pub fn expects_verdict(self) -> bool {
        matches!(self, TemplateId::Evaluate | TemplateId::Match)
    }

    /// Generation-style templates sample at the generate temperature; the
    /// rest run at the evaluate temperature.
    pub fn is_generation(self) -> bool {
        matches!(self, TemplateId::Search | TemplateId::Prior)
    }
}

/// A prompt template body with its role.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: TemplateId,
    pub body: String,
}

impl PromptTemplate {
    /// The template shipped with the crate for the given role.
    pub fn builtin(id: TemplateId) -> Self {
        let body = match id {
            TemplateId::Evaluate => include_str!("../../data/prompts/evaluate.txt"),
            TemplateId::Search => include_str!("../../data/prompts/search.txt"),
            TemplateId::Prior => include_str!("../../data/prompts/prior.txt"),
            TemplateId::Match => include_str!("../../data/prompts/match.txt"),
            TemplateId::Annotate => include_str!("../../data/prompts/annotate.txt"),
        };
        PromptTemplate {
            template_id: id,
            body: body.to_string(),
        }
    }

    /// Load a template override from a plain-text file.
    pub fn from_file(id: TemplateId, path: &Path) -> Result<Self> {
        Ok(PromptTemplate {
            template_id: id,
            body: std::fs::read_to_string(path)?,
        })
    }

    /// Placeholder names appearing in the body, in order of first occurrence.
    pub fn placeholders(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for cap in placeholder_regex().captures_iter(&self.body) {
            let name = cap[1].to_string();
            if !seen.contains(&name) {
                seen.push(name);
            }
        }
        seen
    }
}

fn placeholder_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z][a-z0-9_]*)\}").unwrap())
}

/// Substitute every placeholder in `template` from `bindings`.
///
/// Substitution is literal and single-pass: bound content containing brace
/// tokens is emitted verbatim. A placeholder without a binding is an error.
pub fn render_prompt(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
) -> Result<String> {
    let re = placeholder_regex();
    let mut out = String::with_capacity(template.body.len());
    let mut last = 0;
    for m in re.captures_iter(&template.body) {
        let whole = m.get(0).unwrap();
        let name = &m[1];
        out.push_str(&template.body[last..whole.start()]);
        match bindings.get(name) {
            Some(value) => out.push_str(value),
            None => return Err(Error::MissingPlaceholder(name.to_string())),
        }
        last = whole.end();
    }
    out.push_str(&template.body[last..]);
    Ok(out)
}

/// Convenience for building binding maps.
pub fn bindings<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// The full set of templates a pipeline run uses.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub evaluate: PromptTemplate,
    pub search: PromptTemplate,
    pub prior: PromptTemplate,
    pub matcher: PromptTemplate,
    pub annotate: PromptTemplate,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        TemplateSet {
            evaluate: PromptTemplate::builtin(TemplateId::Evaluate),
            search: PromptTemplate::builtin(TemplateId::Search),
            prior: PromptTemplate::builtin(TemplateId::Prior),
            matcher: PromptTemplate::builtin(TemplateId::Match),
            annotate: PromptTemplate::builtin(TemplateId::Annotate),
        }
    }

    /// Load overrides from a directory of `<template_id>.txt` files; missing
    /// files fall back to the builtin bodies.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut set = Self::builtin();
        for (id, slot) in [
            (TemplateId::Evaluate, &mut set.evaluate),
            (TemplateId::Search, &mut set.search),
            (TemplateId::Prior, &mut set.prior),
            (TemplateId::Match, &mut set.matcher),
            (TemplateId::Annotate, &mut set.annotate),
        ] {
            let path = dir.join(format!("{}.txt", id.as_str()));
            if path.exists() {
                *slot = PromptTemplate::from_file(id, &path)?;
            }
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_template_renders_hypothesis_and_contents_in_order() {
        let t = PromptTemplate::builtin(TemplateId::Evaluate);
        let out = render_prompt(
            &t,
            &bindings([
                ("hypothesis", "H".to_string()),
                ("content1", "AAA".to_string()),
                ("content2", "BBB".to_string()),
            ]),
        )
        .unwrap();
        assert!(out.contains("Hypothesis: \"H\""));
        let a = out.find("AAA").unwrap();
        let b = out.find("BBB").unwrap();
        assert!(a < b);
        assert!(!placeholder_regex().is_match(&out));
    }

    #[test]
    fn empty_binding_leaves_no_unresolved_braces() {
        let t = PromptTemplate {
            template_id: TemplateId::Search,
            body: "before {df} after".to_string(),
        };
        let out = render_prompt(&t, &bindings([("df", String::new())])).unwrap();
        assert_eq!(out, "before  after");
    }

    #[test]
    fn bound_content_is_not_resubstituted() {
        let t = PromptTemplate {
            template_id: TemplateId::Search,
            body: "{df}".to_string(),
        };
        let out = render_prompt(&t, &bindings([("df", "{label} stays".to_string())])).unwrap();
        assert_eq!(out, "{label} stays");
    }

    #[test]
    fn missing_binding_names_the_placeholder() {
        let t = PromptTemplate::builtin(TemplateId::Evaluate);
        match render_prompt(&t, &bindings([("hypothesis", "h".to_string())])) {
            Err(Error::MissingPlaceholder(name)) => assert_eq!(name, "content1"),
            other => panic!("expected missing placeholder, got {other:?}"),
        }
    }

    #[test]
    fn literal_json_braces_are_not_placeholders() {
        let t = PromptTemplate::builtin(TemplateId::Annotate);
        assert_eq!(
            t.placeholders(),
            vec!["examples", "hypothesis_list", "feedback_text"]
        );
        // the {"scores": ...} line survives rendering untouched
        let out = render_prompt(
            &t,
            &bindings([
                ("examples", String::new()),
                ("hypothesis_list", "[]".to_string()),
                ("feedback_text", "f".to_string()),
            ]),
        )
        .unwrap();
        assert!(out.contains(r#"{"scores": [X1, X2, X3, ..., X20]}"#));
    }

    #[test]
    fn builtin_placeholder_inventory() {
        assert_eq!(
            PromptTemplate::builtin(TemplateId::Evaluate).placeholders(),
            vec!["hypothesis", "content1", "content2"]
        );
        assert_eq!(
            PromptTemplate::builtin(TemplateId::Search).placeholders(),
            vec!["df", "df_hypothesis"]
        );
        assert!(PromptTemplate::builtin(TemplateId::Prior)
            .placeholders()
            .is_empty());
        assert_eq!(
            PromptTemplate::builtin(TemplateId::Match).placeholders(),
            vec!["hypothesis_a", "hypothesis_b"]
        );
    }
}
