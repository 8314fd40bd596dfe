//! Scripted judge: a deterministic [`Provider`] computing responses from the
//! feature sentences embedded in synthetic paper text.
//!
//! Apart from the zero-margin tie (where it consults the request's
//! presentation flag so the normalized label is 0 under either order), the
//! judge reads only what a real judge would see: the rendered prompt.

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use crate::error::{Error, Result};
use crate::hashing::derive_seed;
use crate::judge::parse::format_judge_response;
use crate::judge::{JudgeRequest, PresentationOrder, Provider, TemplateId};
use crate::sim::ScriptedJudgeConfig;

/// Deterministic scripted judge for offline runs.
pub struct ScriptedJudge {
    config: ScriptedJudgeConfig,
}

fn feature_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"Feature ([A-Za-z0-9_\-]+) measures ([0-9]+\.[0-9]+)\.").unwrap())
}

/// Text between `start` and the next occurrence of `end` (or the rest).
fn section<'a>(text: &'a str, start: &str, end: Option<&str>) -> Option<&'a str> {
    let begin = text.find(start)? + start.len();
    let rest = &text[begin..];
    match end {
        Some(marker) => rest.find(marker).map(|idx| &rest[..idx]),
        None => Some(rest),
    }
}

/// Uniform [0, 1) value derived from tagged parts.
fn unit(parts: &[&str]) -> f64 {
    (derive_seed(parts) >> 11) as f64 / (1u64 << 53) as f64
}

fn first_number(text: &str, pattern: &str, default: usize) -> usize {
    Regex::new(pattern)
        .unwrap()
        .captures(text)
        .and_then(|c| c[1].parse().ok())
        .unwrap_or(default)
}

impl ScriptedJudge {
    pub fn new(config: ScriptedJudgeConfig) -> Result<Self> {
        config.validate()?;
        Ok(ScriptedJudge { config })
    }

    pub fn config(&self) -> &ScriptedJudgeConfig {
        &self.config
    }

    fn parse_features(&self, block: &str) -> Result<Vec<f64>> {
        let mut by_id: BTreeMap<&str, f64> = BTreeMap::new();
        for cap in feature_regex().captures_iter(block) {
            if let Ok(v) = cap.get(2).unwrap().as_str().parse::<f64>() {
                by_id.insert(cap.get(1).unwrap().as_str(), v);
            }
        }
        self.config
            .criteria
            .iter()
            .map(|c| {
                by_id
                    .get(c.crit_id.as_str())
                    .copied()
                    .ok_or(Error::UnreadablePrompt)
            })
            .collect()
    }

    fn evaluate(&self, request: &JudgeRequest) -> Result<String> {
        let prompt = &request.rendered_prompt;
        let hypothesis =
            section(prompt, "Hypothesis: \"", Some("\"")).ok_or(Error::UnreadablePrompt)?;
        let content1 = section(prompt, "Paper 1 Content: ", Some("\nPaper 2 Content: "))
            .ok_or(Error::UnreadablePrompt)?;
        let content2 = section(prompt, "Paper 2 Content: ", Some("\nInstructions:"))
            .ok_or(Error::UnreadablePrompt)?;

        let Some(criterion) = self.config.map_hypothesis(hypothesis) else {
            return Ok(format_judge_response(0, 2));
        };
        let idx = self
            .config
            .criteria
            .iter()
            .position(|c| c.crit_id == criterion.crit_id)
            .unwrap();
        let f1 = self.parse_features(content1)?;
        let f2 = self.parse_features(content2)?;
        let margin = f2[idx] - f1[idx];

        let mut label = if margin > 0.0 {
            1
        } else if margin < 0.0 {
            0
        } else {
            // Equal evidence: answer so that the pipeline's order
            // normalization stores a 0 either way.
            u8::from(request.presentation_order == PresentationOrder::LowFirst)
        };
        let confidence = (self.config.confidence_gain * margin.abs() * 10.0)
            .round()
            .clamp(0.0, 10.0) as u8;

        if self.config.order_noise > 0.0 && unit(&["order-noise", prompt]) < self.config.order_noise
        {
            label = 1 - label;
        }
        if self.config.position_bias > 0.0
            && margin.abs() < self.config.bias_margin_threshold
            && unit(&["position-bias", prompt]) < self.config.position_bias
        {
            label = 1 - label;
        }
        Ok(format_judge_response(label, confidence))
    }

    /// Next unused text for a criterion: the canonical phrasing first, then
    /// numbered facets.
    fn next_text(&self, crit_id: &str, used: &HashSet<String>) -> String {
        let criterion = self.config.criterion(crit_id).unwrap();
        let canonical = criterion.canonical_text();
        if !used.contains(&canonical) {
            return canonical;
        }
        for facet in 2.. {
            let text = format!(
                "Compared to another paper, one paper {} (facet {facet}).",
                criterion.description
            );
            if !used.contains(&text) {
                return text;
            }
        }
        unreachable!()
    }

    fn search(&self, request: &JudgeRequest) -> Result<String> {
        let prompt = &request.rendered_prompt;
        let k = first_number(prompt, r"generate (\d+) specific", 5);
        let existing_json = section(prompt, "distinct from those in ", Some("\n"))
            .ok_or(Error::UnreadablePrompt)?
            .trim_end_matches('.');
        let existing: Vec<String> = serde_json::from_str(existing_json).unwrap_or_default();
        let mut used: HashSet<String> = existing.iter().cloned().collect();

        let round = existing.len() / k + 1;
        let n = self.config.reveal_order.len();
        let revealed = &self.config.reveal_order[..round.min(n)];

        let mut texts = Vec::with_capacity(k);
        for slot in 0..k {
            let crit = &revealed[(round - 1 + slot) % revealed.len()];
            let text = self.next_text(crit, &used);
            used.insert(text.clone());
            texts.push(text);
        }
        Ok(serde_json::to_string(&texts)?)
    }

    fn prior(&self, request: &JudgeRequest) -> Result<String> {
        let prompt = &request.rendered_prompt;
        let rounds = first_number(prompt, r"perform (\d+) rounds", 4);
        let k = first_number(prompt, r"generate (\d+) hypotheses", 5);
        let sim_id = request.fold_nonce;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
            "prior",
            &self.config.world_seed.to_string(),
            &sim_id.to_string(),
        ]));
        let propensity = self.config.prior_propensity();
        let mut used: HashSet<String> = HashSet::new();
        let mut texts = Vec::with_capacity(rounds * k);
        for _ in 0..rounds * k {
            let draw: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = propensity.last().unwrap().0.as_str();
            for (crit_id, p) in &propensity {
                acc += p;
                if draw < acc {
                    chosen = crit_id;
                    break;
                }
            }
            let text = self.next_text(chosen, &used);
            used.insert(text.clone());
            texts.push(text);
        }
        Ok(serde_json::to_string(&texts)?)
    }

    fn matcher(&self, request: &JudgeRequest) -> Result<String> {
        let prompt = &request.rendered_prompt;
        let a = section(prompt, "Hypothesis A: \"", Some("\"")).ok_or(Error::UnreadablePrompt)?;
        let b = section(prompt, "Hypothesis B: \"", Some("\"")).ok_or(Error::UnreadablePrompt)?;
        if a == b {
            return Ok(format_judge_response(1, 10));
        }
        let ca = self.config.map_hypothesis(a);
        let cb = self.config.map_hypothesis(b);
        let response = match (ca, cb) {
            (Some(x), Some(y)) => format_judge_response(u8::from(x.crit_id == y.crit_id), 9),
            _ => format_judge_response(0, 3),
        };
        Ok(response)
    }

    fn annotate(&self, request: &JudgeRequest) -> Result<String> {
        let prompt = &request.rendered_prompt;
        let list_json = section(prompt, "Hypotheses:\n", Some("\n\nFeedback:"))
            .ok_or(Error::UnreadablePrompt)?;
        let hypotheses: Vec<String> =
            serde_json::from_str(list_json.trim()).map_err(|_| Error::UnreadablePrompt)?;
        let feedback = section(prompt, "Feedback:\n", None).ok_or(Error::UnreadablePrompt)?;
        let scores: Vec<i8> = hypotheses
            .iter()
            .map(|text| match self.config.map_hypothesis(text) {
                Some(c) => {
                    if feedback.contains(&format!("The {} here is excellent.", c.keyword)) {
                        1
                    } else if feedback.contains(&format!("The {} here is weak.", c.keyword)) {
                        -1
                    } else {
                        0
                    }
                }
                None => 0,
            })
            .collect();
        Ok(format!(
            "{{\"scores\": {}}}",
            serde_json::to_string(&scores)?
        ))
    }
}

impl Provider for ScriptedJudge {
    fn complete(&self, request: &JudgeRequest) -> Result<String> {
        match request.template_id {
            TemplateId::Evaluate => self.evaluate(request),
            TemplateId::Search => self.search(request),
            TemplateId::Prior => self.prior(request),
            TemplateId::Match => self.matcher(request),
            TemplateId::Annotate => self.annotate(request),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::template::{bindings, render_prompt, PromptTemplate};

    fn judge() -> ScriptedJudge {
        ScriptedJudge::new(ScriptedJudgeConfig::default_world(42)).unwrap()
    }

    fn content(features: &[(&str, f64)]) -> String {
        features
            .iter()
            .map(|(id, v)| format!("Feature {id} measures {v:.4}."))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn eval_request(
        hypothesis: &str,
        c1: &str,
        c2: &str,
        order: PresentationOrder,
    ) -> JudgeRequest {
        let template = PromptTemplate::builtin(TemplateId::Evaluate);
        let rendered = render_prompt(
            &template,
            &bindings([
                ("hypothesis", hypothesis.to_string()),
                ("content1", c1.to_string()),
                ("content2", c2.to_string()),
            ]),
        )
        .unwrap();
        JudgeRequest {
            template_id: TemplateId::Evaluate,
            rendered_prompt: rendered,
            model_id: "scripted".into(),
            temperature: 0.0,
            fold_nonce: 0,
            presentation_order: order,
        }
    }

    #[test]
    fn evaluation_follows_margin() {
        let judge = judge();
        let hyp = judge.config().criteria[0].canonical_text();
        let lo = content(&[
            ("methodical_rigor", 0.1),
            ("narrative_clarity", 0.5),
            ("cross_domain_reach", 0.5),
        ]);
        let hi = content(&[
            ("methodical_rigor", 0.9),
            ("narrative_clarity", 0.5),
            ("cross_domain_reach", 0.5),
        ]);
        let resp = judge
            .complete(&eval_request(&hyp, &lo, &hi, PresentationOrder::HighFirst))
            .unwrap();
        let parsed = crate::judge::parse_judge_response(&resp);
        assert_eq!(parsed.label, Some(1));
        assert_eq!(parsed.confidence, Some(8)); // gain 1.0 * 0.8 * 10

        // swap contents: margin flips sign
        let resp = judge
            .complete(&eval_request(&hyp, &hi, &lo, PresentationOrder::LowFirst))
            .unwrap();
        let parsed = crate::judge::parse_judge_response(&resp);
        assert_eq!(parsed.label, Some(0));
    }

    #[test]
    fn zero_margin_normalizes_to_zero_under_both_orders() {
        let judge = judge();
        let hyp = judge.config().criteria[0].canonical_text();
        let same = content(&[
            ("methodical_rigor", 0.5),
            ("narrative_clarity", 0.5),
            ("cross_domain_reach", 0.5),
        ]);
        let high_first = judge
            .complete(&eval_request(
                &hyp,
                &same,
                &same,
                PresentationOrder::HighFirst,
            ))
            .unwrap();
        let low_first = judge
            .complete(&eval_request(
                &hyp,
                &same,
                &same,
                PresentationOrder::LowFirst,
            ))
            .unwrap();
        let hf = crate::judge::parse_judge_response(&high_first);
        let lf = crate::judge::parse_judge_response(&low_first);
        // stored = raw for high_first, 1 - raw for low_first; both must be 0
        assert_eq!(hf.label, Some(0));
        assert_eq!(lf.label, Some(1));
        assert_eq!(hf.confidence, Some(0));
    }

    #[test]
    fn unmapped_hypothesis_gets_low_confidence_no() {
        let judge = judge();
        let c = content(&[
            ("methodical_rigor", 0.2),
            ("narrative_clarity", 0.5),
            ("cross_domain_reach", 0.5),
        ]);
        let resp = judge
            .complete(&eval_request(
                "Compared to another paper, one paper is typeset in a nicer font.",
                &c,
                &c,
                PresentationOrder::HighFirst,
            ))
            .unwrap();
        let parsed = crate::judge::parse_judge_response(&resp);
        assert_eq!((parsed.label, parsed.confidence), (Some(0), Some(2)));
    }

    #[test]
    fn generator_reveals_criteria_across_rounds() {
        let judge = judge();
        let template = PromptTemplate::builtin(TemplateId::Search);
        let mut existing: Vec<String> = Vec::new();
        let mut seen_crits: Vec<String> = Vec::new();
        for round in 1..=3 {
            let rendered = render_prompt(
                &template,
                &bindings([
                    ("df", "pairs omitted".to_string()),
                    ("df_hypothesis", serde_json::to_string(&existing).unwrap()),
                ]),
            )
            .unwrap();
            let request = JudgeRequest {
                template_id: TemplateId::Search,
                rendered_prompt: rendered,
                model_id: "scripted".into(),
                temperature: 1.0,
                fold_nonce: 0,
                presentation_order: PresentationOrder::HighFirst,
            };
            let out = judge.complete(&request).unwrap();
            let texts: Vec<String> = serde_json::from_str(&out).unwrap();
            assert_eq!(texts.len(), 5);
            for t in &texts {
                assert!(t.starts_with("Compared to another paper, one paper"));
                assert!(!existing.contains(t), "duplicate across rounds: {t}");
                let crit = judge
                    .config()
                    .map_hypothesis(t)
                    .expect("maps to a criterion");
                if !seen_crits.contains(&crit.crit_id) {
                    seen_crits.push(crit.crit_id.clone());
                }
            }
            // round r surfaces exactly the first r criteria of reveal_order
            assert_eq!(
                seen_crits,
                judge.config().reveal_order[..round.min(3)].to_vec()
            );
            existing.extend(texts);
        }
    }

    #[test]
    fn prior_generation_is_deterministic_per_sim_and_covers_slots() {
        let judge = judge();
        let template = PromptTemplate::builtin(TemplateId::Prior);
        let rendered = render_prompt(&template, &Default::default()).unwrap();
        let request = |sim: u64| JudgeRequest {
            template_id: TemplateId::Prior,
            rendered_prompt: rendered.clone(),
            model_id: "scripted".into(),
            temperature: 1.0,
            fold_nonce: sim,
            presentation_order: PresentationOrder::HighFirst,
        };
        let a = judge.complete(&request(0)).unwrap();
        let b = judge.complete(&request(0)).unwrap();
        let c = judge.complete(&request(1)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let texts: Vec<String> = serde_json::from_str(&a).unwrap();
        assert_eq!(texts.len(), 20);
        let unique: std::collections::HashSet<&String> = texts.iter().collect();
        assert_eq!(unique.len(), 20);
    }

    #[test]
    fn matcher_keys_on_planted_criteria() {
        let judge = judge();
        let template = PromptTemplate::builtin(TemplateId::Match);
        let request = |a: &str, b: &str| JudgeRequest {
            template_id: TemplateId::Match,
            rendered_prompt: render_prompt(
                &template,
                &bindings([
                    ("hypothesis_a", a.to_string()),
                    ("hypothesis_b", b.to_string()),
                ]),
            )
            .unwrap(),
            model_id: "scripted".into(),
            temperature: 0.0,
            fold_nonce: 0,
            presentation_order: PresentationOrder::HighFirst,
        };
        let canonical = judge.config().criteria[0].canonical_text();
        let facet = format!(
            "Compared to another paper, one paper {} (facet 2).",
            judge.config().criteria[0].description
        );
        let other = judge.config().criteria[1].canonical_text();

        let same = judge.complete(&request(&canonical, &facet)).unwrap();
        assert_eq!(crate::judge::parse_judge_response(&same).label, Some(1));
        let diff = judge.complete(&request(&canonical, &other)).unwrap();
        assert_eq!(crate::judge::parse_judge_response(&diff).label, Some(0));
        let identical = judge.complete(&request("anything", "anything")).unwrap();
        assert_eq!(
            crate::judge::parse_judge_response(&identical).label,
            Some(1)
        );
    }

    #[test]
    fn annotator_reads_planted_keyword_sentences() {
        let judge = judge();
        let template = PromptTemplate::builtin(TemplateId::Annotate);
        let hypotheses: Vec<String> = judge
            .config()
            .criteria
            .iter()
            .map(|c| c.canonical_text())
            .collect();
        let feedback =
            "The methodical rigor here is weak. The research narrative here is excellent.";
        let rendered = render_prompt(
            &template,
            &bindings([
                ("examples", String::new()),
                (
                    "hypothesis_list",
                    serde_json::to_string(&hypotheses).unwrap(),
                ),
                ("feedback_text", feedback.to_string()),
            ]),
        )
        .unwrap();
        let request = JudgeRequest {
            template_id: TemplateId::Annotate,
            rendered_prompt: rendered,
            model_id: "scripted".into(),
            temperature: 0.0,
            fold_nonce: 0,
            presentation_order: PresentationOrder::HighFirst,
        };
        let out = judge.complete(&request).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(parsed["scores"], serde_json::json!([-1, 1, 0]));
    }
}
