//! Data-free prior elicitation and prior-frequency measurement.
//!
//! Each simulation asks the judge for 4 rounds of 5 distinct hypotheses in a
//! single request; its 20 hypotheses form one window. A posterior
//! hypothesis's prior frequency is the fraction of windows containing at
//! least one matching sample.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::judge::template::{bindings, render_prompt, TemplateSet};
use crate::judge::{JudgeClient, PresentationOrder, ProviderConfig, TemplateId};
use crate::search::{extract_hypothesis_texts, Hypothesis};

/// One data-free hypothesis drawn during a prior simulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorSample {
    pub sim_id: u64,
    /// 1-based round within the simulation.
    pub round: u32,
    /// 0-based slot within the round.
    pub slot: u32,
    pub text: String,
}

/// Frequency of a posterior hypothesis in the prior windows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorFrequency {
    pub hyp_id: String,
    pub frequency: f64,
    pub n_windows: usize,
}

/// Prior elicitation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorConfig {
    pub n_sims: usize,
    pub rounds: usize,
    pub k: usize,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            n_sims: 250,
            rounds: 4,
            k: 5,
        }
    }
}

/// Elicitation result: samples plus the sims that stayed underfilled.
#[derive(Debug, Default)]
pub struct PriorOutcome {
    pub samples: Vec<PriorSample>,
    pub excluded_sims: Vec<u64>,
}

pub fn write_priors(samples: &[PriorSample], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for sample in samples {
        serde_json::to_writer(&mut out, sample)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_priors(path: &Path) -> Result<Vec<PriorSample>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut samples = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(serde_json::from_str(&line)?);
    }
    Ok(samples)
}

/// Run `n_sims` data-free simulations. Each issues one request for
/// rounds x k hypotheses; an underfilled simulation is retried once with a
/// fresh request and excluded if still short.
///
/// With `state_path` set, completed simulations are appended as they finish
/// and a rerun resumes after the last one on disk.
pub fn elicit_priors(
    client: &JudgeClient,
    templates: &TemplateSet,
    provider: &ProviderConfig,
    config: &PriorConfig,
    state_path: Option<&Path>,
) -> Result<PriorOutcome> {
    let mut outcome = PriorOutcome::default();
    let mut done: BTreeSet<u64> = BTreeSet::new();
    if let Some(path) = state_path {
        if path.exists() {
            outcome.samples = read_priors(path)?;
            done = outcome.samples.iter().map(|s| s.sim_id).collect();
        }
    }
    let wanted = config.rounds * config.k;
    let base_prompt = render_prompt(&templates.prior, &BTreeMap::new())?;
    for sim_id in 0..config.n_sims as u64 {
        if done.contains(&sim_id) {
            continue;
        }
        let mut texts: Option<Vec<String>> = None;
        for attempt in 0..2 {
            let rendered = if attempt == 0 {
                base_prompt.clone()
            } else {
                format!("{base_prompt}\n\n<!-- attempt:{attempt} -->")
            };
            let request = provider.request(
                TemplateId::Prior,
                rendered,
                sim_id,
                PresentationOrder::HighFirst,
            );
            let response = client.submit(&request)?;
            let mut parsed = extract_hypothesis_texts(&response.raw_text);
            if parsed.len() >= wanted {
                parsed.truncate(wanted);
                texts = Some(parsed);
                break;
            }
        }
        match texts {
            Some(texts) => {
                let samples: Vec<PriorSample> = texts
                    .into_iter()
                    .enumerate()
                    .map(|(i, text)| PriorSample {
                        sim_id,
                        round: (i / config.k) as u32 + 1,
                        slot: (i % config.k) as u32,
                        text,
                    })
                    .collect();
                if let Some(path) = state_path {
                    let mut file = std::io::BufWriter::new(
                        std::fs::OpenOptions::new()
                            .create(true)
                            .append(true)
                            .open(path)?,
                    );
                    for sample in &samples {
                        serde_json::to_writer(&mut file, sample)?;
                        file.write_all(b"\n")?;
                    }
                    file.flush()?;
                }
                outcome.samples.extend(samples);
            }
            None => outcome.excluded_sims.push(sim_id),
        }
    }
    Ok(outcome)
}

/// Verdict of one posterior-prior comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchOutcome {
    pub matched: bool,
    /// Set when the judge failed after retries and the pair was recorded as
    /// unmatched.
    pub flagged: bool,
}

/// Semantic matcher between a posterior hypothesis and a prior sample.
pub trait Matcher: Send + Sync {
    fn matches(&self, posterior_text: &str, prior_text: &str) -> MatchOutcome;
}

/// Judge-mediated matching. Inputs are order-normalized before rendering, so
/// symmetric queries share one cache entry.
pub struct JudgeMatcher<'a> {
    pub client: &'a JudgeClient,
    pub templates: &'a TemplateSet,
    pub provider: &'a ProviderConfig,
}

impl Matcher for JudgeMatcher<'_> {
    fn matches(&self, posterior_text: &str, prior_text: &str) -> MatchOutcome {
        let (a, b) = if posterior_text <= prior_text {
            (posterior_text, prior_text)
        } else {
            (prior_text, posterior_text)
        };
        let rendered = match render_prompt(
            &self.templates.matcher,
            &bindings([
                ("hypothesis_a", a.to_string()),
                ("hypothesis_b", b.to_string()),
            ]),
        ) {
            Ok(r) => r,
            Err(_) => {
                return MatchOutcome {
                    matched: false,
                    flagged: true,
                }
            }
        };
        let request =
            self.provider
                .request(TemplateId::Match, rendered, 0, PresentationOrder::HighFirst);
        match self.client.submit(&request) {
            Ok(response) if response.is_ok() => MatchOutcome {
                matched: response.label == Some(1),
                flagged: false,
            },
            _ => MatchOutcome {
                matched: false,
                flagged: true,
            },
        }
    }
}

/// Keyword matching: a prior sample matches a posterior hypothesis when any
/// of the hypothesis's dictionary keywords occurs (case-insensitively) in it.
pub struct DictionaryMatcher {
    /// posterior hypothesis text -> lowercased keywords
    keywords_by_text: BTreeMap<String, Vec<String>>,
}

impl DictionaryMatcher {
    pub fn new(hypotheses: &[Hypothesis], dictionary: &BTreeMap<String, Vec<String>>) -> Self {
        let keywords_by_text = hypotheses
            .iter()
            .filter_map(|h| {
                dictionary.get(&h.hyp_id).map(|words| {
                    (
                        h.text.clone(),
                        words.iter().map(|w| w.to_lowercase()).collect(),
                    )
                })
            })
            .collect();
        DictionaryMatcher { keywords_by_text }
    }
}

impl Matcher for DictionaryMatcher {
    fn matches(&self, posterior_text: &str, prior_text: &str) -> MatchOutcome {
        let lower = prior_text.to_lowercase();
        let matched = self
            .keywords_by_text
            .get(posterior_text)
            .is_some_and(|words| words.iter().any(|w| lower.contains(w)));
        MatchOutcome {
            matched,
            flagged: false,
        }
    }
}

/// How window matches are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// A window counts once if it contains at least one match (default).
    #[default]
    Binary,
    /// Mean number of matching samples per window; can exceed 1 and is
    /// labeled non-default in reports.
    CountOccurrences,
}

/// Frequency of each posterior hypothesis across prior windows (one window
/// per simulation).
///
/// Each distinct (hypothesis, prior text) combination is matched exactly
/// once, so matcher calls are bounded by
/// |posterior_hyps| x |distinct prior texts|.
pub fn prior_frequency(
    posterior_hyps: &[Hypothesis],
    priors: &[PriorSample],
    matcher: &dyn Matcher,
    mode: WindowMode,
) -> Result<Vec<PriorFrequency>> {
    if priors.is_empty() {
        return Err(Error::EmptyInput("prior samples"));
    }
    let mut windows: BTreeMap<u64, Vec<&PriorSample>> = BTreeMap::new();
    for sample in priors {
        windows.entry(sample.sim_id).or_default().push(sample);
    }
    let n_windows = windows.len();

    let distinct_texts: BTreeSet<&str> = priors.iter().map(|s| s.text.as_str()).collect();
    let mut verdicts: BTreeMap<(&str, &str), bool> = BTreeMap::new();
    for hyp in posterior_hyps {
        for text in &distinct_texts {
            let outcome = matcher.matches(&hyp.text, text);
            verdicts.insert((hyp.text.as_str(), text), outcome.matched);
        }
    }

    Ok(posterior_hyps
        .iter()
        .map(|hyp| {
            let tally: f64 = windows
                .values()
                .map(|samples| {
                    let hits = samples
                        .iter()
                        .filter(|s| verdicts[&(hyp.text.as_str(), s.text.as_str())])
                        .count();
                    match mode {
                        WindowMode::Binary => f64::from(hits > 0),
                        WindowMode::CountOccurrences => hits as f64,
                    }
                })
                .sum();
            PriorFrequency {
                hyp_id: hyp.hyp_id.clone(),
                frequency: tally / n_windows as f64,
                n_windows,
            }
        })
        .collect())
}

/// Write the frequency report CSV (`hyp_id,frequency,n_windows`).
pub fn write_frequency_csv(frequencies: &[PriorFrequency], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["hyp_id", "frequency", "n_windows"])?;
    for f in frequencies {
        writer.write_record([
            f.hyp_id.as_str(),
            &f.frequency.to_string(),
            &f.n_windows.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::HypothesisOrigin;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn hyp(text: &str) -> Hypothesis {
        Hypothesis::new(text.to_string(), 1, HypothesisOrigin::PosteriorSearch)
    }

    fn sample(sim: u64, round: u32, slot: u32, text: &str) -> PriorSample {
        PriorSample {
            sim_id: sim,
            round,
            slot,
            text: text.to_string(),
        }
    }

    /// Deterministic pseudo-random matcher for oracle tests.
    struct HashMatcher {
        calls: AtomicUsize,
    }

    impl Matcher for HashMatcher {
        fn matches(&self, posterior_text: &str, prior_text: &str) -> MatchOutcome {
            self.calls.fetch_add(1, Ordering::SeqCst);
            MatchOutcome {
                matched: crate::hashing::derive_seed(&[posterior_text, prior_text])
                    .is_multiple_of(3),
                flagged: false,
            }
        }
    }

    #[test]
    fn frequency_matches_brute_force_window_scan() {
        let hyps: Vec<Hypothesis> = (0..4).map(|i| hyp(&format!("H{i}"))).collect();
        let mut priors = Vec::new();
        for sim in 0..7u64 {
            for i in 0..20u32 {
                // overlapping texts across sims exercise the dedup path
                priors.push(sample(
                    sim,
                    i / 5 + 1,
                    i % 5,
                    &format!("P{}", (sim as u32 * 7 + i) % 23),
                ));
            }
        }
        let matcher = HashMatcher {
            calls: AtomicUsize::new(0),
        };
        let freqs = prior_frequency(&hyps, &priors, &matcher, WindowMode::Binary).unwrap();

        for (hi, hyp) in hyps.iter().enumerate() {
            let mut hits = 0;
            for sim in 0..7u64 {
                let window: Vec<&PriorSample> = priors.iter().filter(|s| s.sim_id == sim).collect();
                if window.iter().any(|s| {
                    crate::hashing::derive_seed(&[hyp.text.as_str(), s.text.as_str()])
                        .is_multiple_of(3)
                }) {
                    hits += 1;
                }
            }
            assert_eq!(freqs[hi].frequency, hits as f64 / 7.0);
            assert_eq!(freqs[hi].n_windows, 7);
        }

        // call bound: one call per (hypothesis, distinct text)
        let distinct: BTreeSet<&str> = priors.iter().map(|s| s.text.as_str()).collect();
        assert!(matcher.calls.load(Ordering::SeqCst) <= hyps.len() * distinct.len());
    }

    struct AlwaysMatch;
    impl Matcher for AlwaysMatch {
        fn matches(&self, _p: &str, _q: &str) -> MatchOutcome {
            MatchOutcome {
                matched: true,
                flagged: false,
            }
        }
    }

    #[test]
    fn full_match_gives_frequency_one() {
        let hyps = vec![hyp("H")];
        let priors: Vec<PriorSample> = (0..5).map(|s| sample(s, 1, 0, "p")).collect();
        let freqs = prior_frequency(&hyps, &priors, &AlwaysMatch, WindowMode::Binary).unwrap();
        assert_eq!(freqs[0].frequency, 1.0);
    }

    #[test]
    fn window_monotonicity() {
        struct KeyMatch;
        impl Matcher for KeyMatch {
            fn matches(&self, _p: &str, q: &str) -> MatchOutcome {
                MatchOutcome {
                    matched: q == "hit",
                    flagged: false,
                }
            }
        }
        let hyps = vec![hyp("H")];
        let mut priors = vec![sample(0, 1, 0, "hit"), sample(1, 1, 0, "miss")];
        let base =
            prior_frequency(&hyps, &priors, &KeyMatch, WindowMode::Binary).unwrap()[0].frequency;
        // adding a non-matching simulation can only decrease or preserve
        priors.push(sample(2, 1, 0, "miss"));
        let lower =
            prior_frequency(&hyps, &priors, &KeyMatch, WindowMode::Binary).unwrap()[0].frequency;
        assert!(lower <= base);
        // adding a matching simulation can only increase or preserve
        priors.push(sample(3, 1, 0, "hit"));
        let higher =
            prior_frequency(&hyps, &priors, &KeyMatch, WindowMode::Binary).unwrap()[0].frequency;
        assert!(higher >= lower);
    }

    #[test]
    fn dictionary_matcher_is_case_insensitive_substring() {
        let h = hyp("Compared to another paper, one paper is not theoretically rigorous.");
        let dictionary = BTreeMap::from([(
            h.hyp_id.clone(),
            vec!["Rigor".to_string(), "proof".to_string()],
        )]);
        let matcher = DictionaryMatcher::new(std::slice::from_ref(&h), &dictionary);
        assert!(
            matcher
                .matches(&h.text, "lacks formal proofs entirely")
                .matched
        );
        assert!(
            matcher
                .matches(&h.text, "THEORETICAL RIGOR missing")
                .matched
        );
        assert!(!matcher.matches(&h.text, "unrelated complaint").matched);
    }
}
