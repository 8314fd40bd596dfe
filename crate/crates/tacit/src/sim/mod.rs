//! Synthetic-world harness: corpora with planted latent evaluation criteria
//! and scripted judge/generator/matcher rules, for deterministic end-to-end
//! validation of the pipeline.

pub mod provider;

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ExtendedAbstract, PaperPair, PaperRecord};
use crate::error::{Error, Result};
use crate::hashing::derive_seed;
use crate::search::Hypothesis;

pub use provider::ScriptedJudge;

/// Canonical sentence opener every hypothesis must use.
pub const HYPOTHESIS_PREFIX: &str = "Compared to another paper, one paper";

/// One planted evaluative dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatentCriterion {
    pub crit_id: String,
    /// Canonical hypothesis phrasing (continues the canonical prefix).
    pub description: String,
    /// Contribution to the paper score; normalized to sum 1 per world.
    pub weight: f64,
    /// Fraction of papers where this criterion discriminates.
    pub prevalence: f64,
    /// Probability a synthetic reviewer mentions it in a comment.
    pub explicitness: f64,
    /// Phrase planted in comments and used as the dictionary entry.
    pub keyword: String,
}

impl LatentCriterion {
    /// Full canonical hypothesis text for this criterion.
    pub fn canonical_text(&self) -> String {
        format!("{HYPOTHESIS_PREFIX} {}.", self.description)
    }
}

/// World and scripted-judge settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptedJudgeConfig {
    pub world_seed: u64,
    pub criteria: Vec<LatentCriterion>,
    /// Maps feature margin to 0-10 confidence: round(gain * |margin| * 10).
    pub confidence_gain: f64,
    /// Order in which the scripted generator surfaces criteria across rounds.
    pub reveal_order: Vec<String>,
    /// Probability of flipping a judgment when the margin is below
    /// `bias_margin_threshold`, keyed per presentation, for position-bias
    /// experiments.
    #[serde(default)]
    pub position_bias: f64,
    /// Order-keyed label flip probability independent of margin; gives the
    /// zero-bias regression a non-degenerate dependent variable.
    #[serde(default)]
    pub order_noise: f64,
    #[serde(default = "default_bias_margin_threshold")]
    pub bias_margin_threshold: f64,
    #[serde(default = "default_score_scale")]
    pub score_scale: f64,
    /// Uniform score noise bound.
    #[serde(default = "default_score_noise")]
    pub score_noise: f64,
    #[serde(default = "default_reviewers")]
    pub reviewers_per_paper: usize,
    /// Uniform per-reviewer jitter bound.
    #[serde(default = "default_reviewer_jitter")]
    pub reviewer_jitter: f64,
}

fn default_bias_margin_threshold() -> f64 {
    0.3
}
fn default_score_scale() -> f64 {
    10.0
}
fn default_score_noise() -> f64 {
    0.2
}
fn default_reviewers() -> usize {
    3
}
fn default_reviewer_jitter() -> f64 {
    0.3
}

impl ScriptedJudgeConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let config: ScriptedJudgeConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        config.validate()?;
        Ok(config)
    }

    /// The world shipped as the default: three criteria of descending
    /// prevalence, one of them never mentioned by reviewers.
    pub fn default_world(world_seed: u64) -> Self {
        ScriptedJudgeConfig {
            world_seed,
            criteria: vec![
                LatentCriterion {
                    crit_id: "methodical_rigor".into(),
                    description: "shows weaker methodical rigor in its validation protocol".into(),
                    weight: 0.15,
                    prevalence: 0.9,
                    explicitness: 0.8,
                    keyword: "methodical rigor".into(),
                },
                LatentCriterion {
                    crit_id: "narrative_clarity".into(),
                    description:
                        "tells a less coherent research narrative connecting motivation to results"
                            .into(),
                    weight: 0.35,
                    prevalence: 0.6,
                    explicitness: 0.4,
                    keyword: "research narrative".into(),
                },
                LatentCriterion {
                    crit_id: "cross_domain_reach".into(),
                    description:
                        "engages less with methods and findings from neighboring research areas"
                            .into(),
                    weight: 0.5,
                    prevalence: 0.45,
                    explicitness: 0.0,
                    keyword: "neighboring research areas".into(),
                },
            ],
            confidence_gain: 1.0,
            reveal_order: vec![
                "methodical_rigor".into(),
                "narrative_clarity".into(),
                "cross_domain_reach".into(),
            ],
            position_bias: 0.0,
            order_noise: 0.0,
            bias_margin_threshold: default_bias_margin_threshold(),
            score_scale: default_score_scale(),
            score_noise: default_score_noise(),
            reviewers_per_paper: default_reviewers(),
            reviewer_jitter: default_reviewer_jitter(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.criteria.is_empty() {
            return Err(Error::InvalidConfig("world has no criteria".into()));
        }
        let weight_sum: f64 = self.criteria.iter().map(|c| c.weight).sum();
        if (weight_sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "criterion weights must sum to 1, got {weight_sum}"
            )));
        }
        for c in &self.criteria {
            if c.weight <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "criterion {} has non-positive weight",
                    c.crit_id
                )));
            }
            if !(0.0 < c.prevalence && c.prevalence <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "criterion {} prevalence must lie in (0, 1]",
                    c.crit_id
                )));
            }
            if !(0.0..=1.0).contains(&c.explicitness) {
                return Err(Error::InvalidConfig(format!(
                    "criterion {} explicitness must lie in [0, 1]",
                    c.crit_id
                )));
            }
        }
        let mut order = self.reveal_order.clone();
        order.sort();
        let mut ids: Vec<String> = self.criteria.iter().map(|c| c.crit_id.clone()).collect();
        ids.sort();
        if order != ids {
            return Err(Error::InvalidConfig(
                "reveal_order must be a permutation of criterion ids".into(),
            ));
        }
        for (name, v) in [
            ("position_bias", self.position_bias),
            ("order_noise", self.order_noise),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn criterion(&self, crit_id: &str) -> Option<&LatentCriterion> {
        self.criteria.iter().find(|c| c.crit_id == crit_id)
    }

    /// Criterion a hypothesis text maps onto: the one whose description it
    /// contains.
    pub fn map_hypothesis(&self, text: &str) -> Option<&LatentCriterion> {
        self.criteria.iter().find(|c| text.contains(&c.description))
    }

    /// Data-free generation propensity per criterion, derived from reveal
    /// order: position j of n gets weight (n - j), normalized. Early-revealed
    /// criteria are the "normative" ones a data-free judge reaches for first.
    pub fn prior_propensity(&self) -> Vec<(String, f64)> {
        let n = self.reveal_order.len();
        let total: f64 = (1..=n).map(|v| v as f64).sum();
        self.reveal_order
            .iter()
            .enumerate()
            .map(|(j, id)| (id.clone(), (n - j) as f64 / total))
            .collect()
    }

    /// Dictionary keyed by the canonical hypothesis id of each criterion.
    pub fn dictionary(&self) -> BTreeMap<String, Vec<String>> {
        self.criteria
            .iter()
            .map(|c| {
                (
                    Hypothesis::id_for(&c.canonical_text()),
                    vec![c.keyword.clone()],
                )
            })
            .collect()
    }

    /// Dictionary entries for an arbitrary hypothesis set: every hypothesis
    /// that maps onto a criterion gets that criterion's keyword.
    pub fn dictionary_for_hypotheses(
        &self,
        hypotheses: &[Hypothesis],
    ) -> BTreeMap<String, Vec<String>> {
        hypotheses
            .iter()
            .filter_map(|h| {
                self.map_hypothesis(&h.text)
                    .map(|c| (h.hyp_id.clone(), vec![c.keyword.clone()]))
            })
            .collect()
    }
}

/// Feature values are quantized to this precision before use anywhere, so
/// the values printed into abstract text are exactly the values scored.
fn quantize_feature(v: f64) -> f64 {
    (v * 10_000.0).round() / 10_000.0
}

/// A generated world: corpus records plus the latent features behind them.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub config: ScriptedJudgeConfig,
    pub records: Vec<PaperRecord>,
    /// paper_id -> one feature per criterion (config order).
    pub features: BTreeMap<String, Vec<f64>>,
}

/// Generate a corpus of `n_papers` spread over `n_venues`.
///
/// Extended-abstract sections embed deterministic feature-describing
/// sentences so scripted judging recomputes features from text alone;
/// comments mention criterion keywords with each criterion's explicitness
/// and a sign that follows the paper's feature level.
pub fn generate_world(
    config: &ScriptedJudgeConfig,
    n_papers: usize,
    n_venues: usize,
) -> Result<SyntheticWorld> {
    config.validate()?;
    if n_papers == 0 || n_venues == 0 {
        return Err(Error::InvalidConfig(
            "world needs at least one paper and one venue".into(),
        ));
    }
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(&["world", &config.world_seed.to_string()]));
    let mut records = Vec::with_capacity(n_papers);
    let mut features = BTreeMap::new();
    for i in 0..n_papers {
        let paper_id = format!("sim-paper-{i:05}");
        let venue_id = format!("sim-venue-{}", i % n_venues);
        let feats: Vec<f64> = config
            .criteria
            .iter()
            .map(|c| {
                if rng.gen::<f64>() < c.prevalence {
                    quantize_feature(rng.gen::<f64>())
                } else {
                    0.5
                }
            })
            .collect();
        let base: f64 = config
            .criteria
            .iter()
            .zip(&feats)
            .map(|(c, f)| c.weight * f * config.score_scale)
            .sum::<f64>()
            + rng.gen_range(-config.score_noise..=config.score_noise);
        let scores: Vec<f64> = (0..config.reviewers_per_paper)
            .map(|_| base + rng.gen_range(-config.reviewer_jitter..=config.reviewer_jitter))
            .collect();
        let confidences: Vec<f64> = (0..config.reviewers_per_paper)
            .map(|_| rng.gen_range(1..=5) as f64)
            .collect();
        let comments: Vec<String> = (0..config.reviewers_per_paper)
            .map(|_| {
                let mut parts = Vec::new();
                for (c, f) in config.criteria.iter().zip(&feats) {
                    if rng.gen::<f64>() < c.explicitness {
                        if *f >= 0.5 {
                            parts.push(format!("The {} here is excellent.", c.keyword));
                        } else {
                            parts.push(format!("The {} here is weak.", c.keyword));
                        }
                    }
                }
                if parts.is_empty() {
                    "No further remarks.".to_string()
                } else {
                    parts.join(" ")
                }
            })
            .collect();
        let feature_sentences: String = config
            .criteria
            .iter()
            .zip(&feats)
            .map(|(c, f)| format!("Feature {} measures {:.4}.", c.crit_id, f))
            .collect::<Vec<_>>()
            .join(" ");
        records.push(PaperRecord {
            paper_id: paper_id.clone(),
            venue_id,
            year: 2024,
            title: format!("Synthetic submission {i:05}"),
            scores,
            reviewer_confidences: confidences,
            comments,
            extended_abstract: ExtendedAbstract {
                context: format!("Synthetic submission {paper_id} in a simulated review world."),
                key_idea: "A study of latent quality dimensions in simulated peer review.".into(),
                method_details: feature_sentences,
                experiments_results: format!(
                    "Benchmarks span {} latent dimensions.",
                    config.criteria.len()
                ),
                impact: format!("Impact statement for submission {paper_id}."),
                raw_abstract: None,
            },
        });
        features.insert(paper_id, feats);
    }
    Ok(SyntheticWorld {
        config: config.clone(),
        records,
        features,
    })
}

impl SyntheticWorld {
    /// The pair-level scripted rule: label 1 iff the higher-scored paper's
    /// feature exceeds the lower-scored one's on the mapped criterion;
    /// confidence follows the margin. Unmapped hypotheses get (0, 2).
    pub fn scripted_vote(&self, pair: &PaperPair, hypothesis_text: &str) -> Result<(u8, u8)> {
        let low = self
            .features
            .get(&pair.low)
            .ok_or_else(|| Error::UnknownPaper(pair.low.clone()))?;
        let high = self
            .features
            .get(&pair.high)
            .ok_or_else(|| Error::UnknownPaper(pair.high.clone()))?;
        match self.config.map_hypothesis(hypothesis_text) {
            Some(c) => {
                let idx = self
                    .config
                    .criteria
                    .iter()
                    .position(|k| k.crit_id == c.crit_id)
                    .unwrap();
                let margin = high[idx] - low[idx];
                let label = u8::from(margin > 0.0);
                let confidence = (self.config.confidence_gain * margin.abs() * 10.0)
                    .round()
                    .clamp(0.0, 10.0) as u8;
                Ok((label, confidence))
            }
            None => Ok((0, 2)),
        }
    }

    /// Fraction of the given pair population each criterion explains,
    /// enumerated directly from planted features.
    ///
    /// A pair counts when the margin favors the higher-scored paper with
    /// nonzero vote confidence: unanimous label-1 votes carrying confidence 0
    /// lose the confidence-weighted tie (ties resolve to 0), so they cannot
    /// explain a pair.
    pub fn expected_coverage(&self, pairs: &[PaperPair]) -> Result<BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        for (idx, c) in self.config.criteria.iter().enumerate() {
            let mut hits = 0usize;
            for pair in pairs {
                let low = self
                    .features
                    .get(&pair.low)
                    .ok_or_else(|| Error::UnknownPaper(pair.low.clone()))?;
                let high = self
                    .features
                    .get(&pair.high)
                    .ok_or_else(|| Error::UnknownPaper(pair.high.clone()))?;
                let margin = high[idx] - low[idx];
                let confidence = (self.config.confidence_gain * margin.abs() * 10.0)
                    .round()
                    .clamp(0.0, 10.0);
                if margin > 0.0 && confidence >= 1.0 {
                    hits += 1;
                }
            }
            out.insert(c.crit_id.clone(), hits as f64 / pairs.len() as f64);
        }
        Ok(out)
    }

    pub fn write_corpus(&self, path: &Path) -> Result<()> {
        crate::corpus::write_corpus(&self.records, path)
    }
}

/// How well a found hypothesis set recovers the planted criteria.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryScore {
    /// Fraction of planted criteria matched by at least one found hypothesis.
    pub recall: f64,
    /// Fraction of found hypotheses matching any planted criterion.
    pub precision: f64,
    /// Mean over criteria of |measured posterior coverage - expected|.
    pub coverage_error: f64,
    pub per_criterion_error: BTreeMap<String, f64>,
}

/// Score a completed search against the planted ground truth.
///
/// `posterior` maps hypothesis id to measured coverage; `expected` comes from
/// [`SyntheticWorld::expected_coverage`] over the same pair population the
/// search judged.
pub fn recovery_score(
    found: &[Hypothesis],
    posterior: &BTreeMap<String, f64>,
    expected: &BTreeMap<String, f64>,
    config: &ScriptedJudgeConfig,
) -> RecoveryScore {
    let mut matched_crits: BTreeMap<&str, f64> = BTreeMap::new();
    let mut matched_hyps = 0usize;
    for hyp in found {
        if let Some(c) = config.map_hypothesis(&hyp.text) {
            matched_hyps += 1;
            let cov = posterior.get(&hyp.hyp_id).copied().unwrap_or(0.0);
            let entry = matched_crits.entry(c.crit_id.as_str()).or_insert(0.0);
            *entry = entry.max(cov);
        }
    }
    let recall = matched_crits.len() as f64 / config.criteria.len() as f64;
    let precision = if found.is_empty() {
        0.0
    } else {
        matched_hyps as f64 / found.len() as f64
    };
    let mut per_criterion_error = BTreeMap::new();
    for c in &config.criteria {
        let measured = matched_crits
            .get(c.crit_id.as_str())
            .copied()
            .unwrap_or(0.0);
        let exp = expected.get(&c.crit_id).copied().unwrap_or(0.0);
        per_criterion_error.insert(c.crit_id.clone(), (measured - exp).abs());
    }
    let coverage_error =
        per_criterion_error.values().sum::<f64>() / per_criterion_error.len() as f64;
    RecoveryScore {
        recall,
        precision,
        coverage_error,
        per_criterion_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_pairs;

    fn single_criterion_config() -> ScriptedJudgeConfig {
        let mut config = ScriptedJudgeConfig::default_world(7);
        config.criteria = vec![LatentCriterion {
            crit_id: "only".into(),
            description: "covers the only planted dimension less well".into(),
            weight: 1.0,
            prevalence: 1.0,
            explicitness: 0.0,
            keyword: "planted dimension".into(),
        }];
        config.reveal_order = vec!["only".into()];
        config.score_noise = 0.0;
        config.reviewer_jitter = 0.0;
        config
    }

    #[test]
    fn single_criterion_zero_noise_preserves_ordering() {
        let config = single_criterion_config();
        let world = generate_world(&config, 40, 1).unwrap();
        let mut by_feature: Vec<(&String, f64)> =
            world.features.iter().map(|(id, f)| (id, f[0])).collect();
        by_feature.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let score_of = |id: &String| {
            world
                .records
                .iter()
                .find(|r| &r.paper_id == id)
                .unwrap()
                .mean_score()
                .unwrap()
        };
        for w in by_feature.windows(2) {
            assert!(score_of(w[0].0) <= score_of(w[1].0));
        }
    }

    #[test]
    fn zero_explicitness_keywords_never_appear() {
        let config = ScriptedJudgeConfig::default_world(11);
        let world = generate_world(&config, 200, 1).unwrap();
        let implicit = &config.criteria[2];
        assert_eq!(implicit.explicitness, 0.0);
        for record in &world.records {
            for comment in &record.comments {
                assert!(!comment.contains(&implicit.keyword));
            }
        }
    }

    #[test]
    fn world_generation_is_deterministic() {
        let config = ScriptedJudgeConfig::default_world(3);
        let a = generate_world(&config, 50, 2).unwrap();
        let b = generate_world(&config, 50, 2).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.features, b.features);
    }

    #[test]
    fn score_variance_decomposes_across_features() {
        let config = ScriptedJudgeConfig::default_world(19);
        let world = generate_world(&config, 500, 1).unwrap();
        let n = world.records.len() as f64;
        // empirical variance contribution of each weighted feature column
        let mut shares = Vec::new();
        for (idx, c) in config.criteria.iter().enumerate() {
            let vals: Vec<f64> = world
                .features
                .values()
                .map(|f| c.weight * f[idx] * config.score_scale)
                .collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            shares.push(var);
        }
        let total: f64 = shares.iter().sum();
        for (idx, c) in config.criteria.iter().enumerate() {
            // analytic: Var(w f s) = w^2 s^2 p/12 for the pinned mixture
            let analytic =
                c.weight * c.weight * config.score_scale * config.score_scale * c.prevalence / 12.0;
            let analytic_share = analytic
                / config
                    .criteria
                    .iter()
                    .map(|k| {
                        k.weight * k.weight * config.score_scale * config.score_scale * k.prevalence
                            / 12.0
                    })
                    .sum::<f64>();
            let empirical_share = shares[idx] / total;
            assert!(
                (empirical_share - analytic_share).abs() < 0.05,
                "criterion {} share {empirical_share:.3} vs analytic {analytic_share:.3}",
                c.crit_id
            );
        }
    }

    #[test]
    fn scripted_vote_rule_arithmetic() {
        let config = single_criterion_config();
        let world = generate_world(&config, 10, 1).unwrap();
        // construct a pair by hand from two known papers
        let ids: Vec<String> = world.features.keys().cloned().collect();
        let (a, b) = (&ids[0], &ids[1]);
        let (fa, fb) = (world.features[a][0], world.features[b][0]);
        let (low, high) = if fa <= fb { (a, b) } else { (b, a) };
        let pair = PaperPair {
            pair_id: "x".into(),
            venue_id: "sim-venue-0".into(),
            low: low.clone(),
            high: high.clone(),
            gap: 1.0,
        };
        let text = config.criteria[0].canonical_text();
        let (label, confidence) = world.scripted_vote(&pair, &text).unwrap();
        let margin = (fb - fa).abs();
        assert_eq!(label, u8::from(margin > 0.0));
        assert_eq!(confidence, (margin * 10.0).round().clamp(0.0, 10.0) as u8);
        // unmapped hypothesis
        let (label, confidence) = world
            .scripted_vote(
                &pair,
                "Compared to another paper, one paper is something else.",
            )
            .unwrap();
        assert_eq!((label, confidence), (0, 2));
        // unknown paper
        let bad = PaperPair {
            pair_id: "y".into(),
            venue_id: "v".into(),
            low: "nope".into(),
            high: high.clone(),
            gap: 1.0,
        };
        assert!(matches!(
            world.scripted_vote(&bad, &text),
            Err(Error::UnknownPaper(_))
        ));
    }

    #[test]
    fn expected_coverage_matches_manual_enumeration() {
        let config = ScriptedJudgeConfig::default_world(5);
        let world = generate_world(&config, 60, 1).unwrap();
        let pairs = build_pairs(&world.records, "sim-venue-0", 1.0).unwrap();
        let expected = world.expected_coverage(&pairs).unwrap();
        for (idx, c) in config.criteria.iter().enumerate() {
            let manual = pairs
                .iter()
                .filter(|p| {
                    let margin = world.features[&p.high][idx] - world.features[&p.low][idx];
                    margin > 0.0 && (margin * 10.0).round() >= 1.0
                })
                .count() as f64
                / pairs.len() as f64;
            assert_eq!(expected[&c.crit_id], manual);
        }
    }

    #[test]
    fn recovery_identity_and_zero_cases() {
        let config = ScriptedJudgeConfig::default_world(1);
        let expected: BTreeMap<String, f64> = config
            .criteria
            .iter()
            .map(|c| (c.crit_id.clone(), 0.5))
            .collect();
        let found: Vec<Hypothesis> = config
            .criteria
            .iter()
            .map(|c| {
                Hypothesis::new(
                    c.canonical_text(),
                    1,
                    crate::search::HypothesisOrigin::PosteriorSearch,
                )
            })
            .collect();
        let posterior: BTreeMap<String, f64> =
            found.iter().map(|h| (h.hyp_id.clone(), 0.5)).collect();
        let score = recovery_score(&found, &posterior, &expected, &config);
        assert_eq!(score.recall, 1.0);
        assert_eq!(score.precision, 1.0);
        assert_eq!(score.coverage_error, 0.0);

        let empty = recovery_score(&[], &posterior, &expected, &config);
        assert_eq!(empty.recall, 0.0);
        assert_eq!(empty.precision, 0.0);
    }

    #[test]
    fn config_validation_catches_bad_worlds() {
        let mut config = ScriptedJudgeConfig::default_world(1);
        config.criteria[0].weight += 0.1;
        assert!(config.validate().is_err());

        let mut config = ScriptedJudgeConfig::default_world(1);
        config.reveal_order.swap(0, 1);
        assert!(config.validate().is_ok());
        config.reveal_order.pop();
        assert!(config.validate().is_err());
    }
}
