//! Iterative hypothesis search: generation, 3-fold confidence-weighted
//! evaluation with position randomization, coverage tracking, and the
//! stop-below-5%-unexplained loop.

pub mod checkpoint;
pub mod coverage;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{sample_pairs, PaperPair, PaperRecord};
use crate::error::{Error, Result};
use crate::hashing::{derive_seed, file_digest, short_id};
use crate::judge::template::{bindings, render_prompt, TemplateSet};
use crate::judge::{JudgeClient, PresentationOrder, ProviderConfig, TemplateId};
pub use checkpoint::Checkpoint;
pub use coverage::{
    aggregate_confidence_weighted, aggregate_majority, append_votes, read_votes, CellOutcome,
    CoverageMatrix, VoteRecord,
};

/// Canonical prefix every hypothesis sentence must start with.
pub const CANONICAL_PREFIX: &str = "Compared to another paper, one paper";

/// Where a hypothesis came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisOrigin {
    PosteriorSearch,
    PriorSimulation,
}

/// One explanatory rule in canonical sentence form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub hyp_id: String,
    pub text: String,
    /// Generation round this hypothesis first appeared in (1-based).
    pub round: u32,
    pub origin: HypothesisOrigin,
}

impl Hypothesis {
    pub fn id_for(text: &str) -> String {
        short_id(&["hyp", text])
    }

    pub fn new(text: String, round: u32, origin: HypothesisOrigin) -> Self {
        Hypothesis {
            hyp_id: Self::id_for(&text),
            text,
            round,
            origin,
        }
    }
}

/// Search loop settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    pub k_per_round: usize,
    pub sample_size: usize,
    pub stop_fraction: f64,
    pub max_rounds: u32,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            k_per_round: 5,
            sample_size: 50,
            stop_fraction: 0.05,
            max_rounds: 10,
            seed: 0,
        }
    }
}

/// Summary of one search round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u32,
    pub new_hypotheses: Vec<String>,
    pub unexplained_fraction_before: f64,
    pub unexplained_fraction_after: f64,
    /// Mean confidence margin over this round's hypotheses (equal weight per
    /// hypothesis).
    pub mean_confidence_margin: f64,
    pub mean_consistency: f64,
}

/// Everything a finished (or resumed) search produced.
#[derive(Debug)]
pub struct SearchOutcome {
    pub hypotheses: Vec<Hypothesis>,
    pub coverage: CoverageMatrix,
    pub reports: Vec<RoundReport>,
}

/// On-disk layout of a search run.
#[derive(Debug, Clone)]
pub struct SearchPaths {
    pub votes: PathBuf,
    pub hypotheses: PathBuf,
    pub rounds: PathBuf,
    pub checkpoint: PathBuf,
}

impl SearchPaths {
    pub fn in_dir(dir: &Path) -> Self {
        SearchPaths {
            votes: dir.join("votes.jsonl"),
            hypotheses: dir.join("hypotheses.json"),
            rounds: dir.join("rounds.json"),
            checkpoint: dir.join("checkpoint.json"),
        }
    }
}

pub fn write_hypotheses(hypotheses: &[Hypothesis], path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, serde_json::to_string_pretty(hypotheses)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_hypotheses(path: &Path) -> Result<Vec<Hypothesis>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn record_for<'a>(
    corpus: &'a BTreeMap<&str, &PaperRecord>,
    paper_id: &str,
) -> Result<&'a PaperRecord> {
    let record = corpus
        .get(paper_id)
        .ok_or_else(|| Error::UnknownPaper(paper_id.to_string()))?;
    if !record.extended_abstract.is_complete() {
        return Err(Error::MissingAbstract(paper_id.to_string()));
    }
    Ok(record)
}

/// One pair formatted for the `{df}` slot, lower-scored paper first.
fn render_pair_block(pair: &PaperPair, corpus: &BTreeMap<&str, &PaperRecord>) -> Result<String> {
    let low = record_for(corpus, &pair.low)?;
    let high = record_for(corpus, &pair.high)?;
    Ok(format!(
        "Paper 1 (rating_1 = {:.2}): {}\nPaper 2 (rating_2 = {:.2}): {}",
        low.mean_score().unwrap_or(f64::NAN),
        low.extended_abstract.render(),
        high.mean_score().unwrap_or(f64::NAN),
        high.extended_abstract.render(),
    ))
}

fn quoted_hypothesis_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#""(Compared to another paper, one paper [^"]+)""#).unwrap())
}

/// Pull canonical hypothesis sentences out of a generation response.
///
/// The response is nominally a JSON array of strings, but judges decorate;
/// this strips surrounding prose and keeps only canonical-form sentences.
pub fn extract_hypothesis_texts(raw: &str) -> Vec<String> {
    let candidates: Vec<String> = serde_json::from_str::<Vec<String>>(raw.trim())
        .ok()
        .or_else(|| {
            let start = raw.find('[')?;
            let end = raw.rfind(']')?;
            serde_json::from_str(&raw[start..=end]).ok()
        })
        .unwrap_or_else(|| {
            quoted_hypothesis_regex()
                .captures_iter(raw)
                .map(|c| c[1].to_string())
                .collect()
        });
    candidates
        .into_iter()
        .map(|t| t.trim().to_string())
        .filter(|t| t.starts_with(CANONICAL_PREFIX) && t.len() > CANONICAL_PREFIX.len())
        .collect()
}

/// Generate `k` fresh hypotheses from the sampled pairs, distinct from
/// `existing`. Duplicates trigger one re-prompt, then a hard underfill error
/// carrying the partial list.
#[allow(clippy::too_many_arguments)]
pub fn generate_hypotheses(
    client: &JudgeClient,
    templates: &TemplateSet,
    provider: &ProviderConfig,
    sampled_pairs: &[PaperPair],
    corpus: &BTreeMap<&str, &PaperRecord>,
    existing: &[Hypothesis],
    k: usize,
    round: u32,
) -> Result<Vec<Hypothesis>> {
    if sampled_pairs.is_empty() {
        return Err(Error::EmptyInput("sampled pairs for generation"));
    }
    let df = sampled_pairs
        .iter()
        .map(|p| render_pair_block(p, corpus))
        .collect::<Result<Vec<_>>>()?
        .join("\n\n");
    let existing_texts: Vec<&str> = existing.iter().map(|h| h.text.as_str()).collect();
    let df_hypothesis = serde_json::to_string(&existing_texts)?;
    let existing_set: HashSet<&str> = existing_texts.iter().copied().collect();

    let mut best: Vec<String> = Vec::new();
    for attempt in 0..2u64 {
        let rendered = render_prompt(
            &templates.search,
            &bindings([("df", df.clone()), ("df_hypothesis", df_hypothesis.clone())]),
        )?;
        let request = provider.request(
            TemplateId::Search,
            rendered,
            derive_seed(&["generate", &round.to_string(), &attempt.to_string()]),
            PresentationOrder::HighFirst,
        );
        let response = client.submit(&request)?;
        let mut fresh: Vec<String> = Vec::new();
        for text in extract_hypothesis_texts(&response.raw_text) {
            if !existing_set.contains(text.as_str()) && !fresh.contains(&text) {
                fresh.push(text);
            }
        }
        if fresh.len() >= k {
            fresh.truncate(k);
            return Ok(fresh
                .into_iter()
                .map(|t| Hypothesis::new(t, round, HypothesisOrigin::PosteriorSearch))
                .collect());
        }
        if fresh.len() > best.len() {
            best = fresh;
        }
    }
    Err(Error::GenerationUnderfilled {
        wanted: k,
        got: best.len(),
        partial: best,
    })
}

/// Evaluate one fold with an explicit presentation order.
///
/// `HighFirst` binds the higher-scored paper to content 2 and stores the
/// parsed label as-is; `LowFirst` swaps the contents and inverts the label,
/// so a stored 1 always means the hypothesis explains the higher-scored
/// paper's advantage. Malformed responses fall back to a flagged (0, 0).
#[allow(clippy::too_many_arguments)]
pub fn evaluate_fold(
    client: &JudgeClient,
    templates: &TemplateSet,
    provider: &ProviderConfig,
    pair: &PaperPair,
    hyp: &Hypothesis,
    corpus: &BTreeMap<&str, &PaperRecord>,
    fold: u8,
    order: PresentationOrder,
) -> Result<VoteRecord> {
    let low = record_for(corpus, &pair.low)?;
    let high = record_for(corpus, &pair.high)?;
    let (content1, content2) = match order {
        PresentationOrder::HighFirst => (&low.extended_abstract, &high.extended_abstract),
        PresentationOrder::LowFirst => (&high.extended_abstract, &low.extended_abstract),
    };
    let rendered = render_prompt(
        &templates.evaluate,
        &bindings([
            ("hypothesis", hyp.text.clone()),
            ("content1", content1.render()),
            ("content2", content2.render()),
        ]),
    )?;
    // fold marker keeps the three folds distinct requests even for
    // deterministic providers
    let rendered = format!("{rendered}\n\n<!-- fold:{fold} -->");
    let request = provider.request(TemplateId::Evaluate, rendered, u64::from(fold), order);
    let response = client.submit(&request)?;
    let (label, confidence, flagged) = if response.is_ok() {
        let raw = response.label.unwrap();
        let stored = match order {
            PresentationOrder::HighFirst => raw,
            PresentationOrder::LowFirst => 1 - raw,
        };
        (stored, response.confidence.unwrap(), false)
    } else {
        (0, 0, true)
    };
    Ok(VoteRecord {
        pair_id: pair.pair_id.clone(),
        hyp_id: hyp.hyp_id.clone(),
        fold,
        order,
        label,
        confidence,
        flagged,
    })
}

/// Presentation order for a fold, derived from (pair, hypothesis, fold) so
/// evaluation order never affects results.
pub fn fold_order(pair_id: &str, hyp_id: &str, fold: u8) -> PresentationOrder {
    if derive_seed(&["order", pair_id, hyp_id, &fold.to_string()]) & 1 == 0 {
        PresentationOrder::HighFirst
    } else {
        PresentationOrder::LowFirst
    }
}

/// Issue the three folds for one (pair, hypothesis) cell.
pub fn evaluate_pair(
    client: &JudgeClient,
    templates: &TemplateSet,
    provider: &ProviderConfig,
    pair: &PaperPair,
    hyp: &Hypothesis,
    corpus: &BTreeMap<&str, &PaperRecord>,
) -> Result<Vec<VoteRecord>> {
    (0..3u8)
        .map(|fold| {
            let order = fold_order(&pair.pair_id, &hyp.hyp_id, fold);
            evaluate_fold(client, templates, provider, pair, hyp, corpus, fold, order)
        })
        .collect()
}

/// Swap-consistency observations: judge every (pair, hypothesis) under both
/// presentation orders and record, per pair, the review score gap and the
/// fraction of hypotheses whose stored label survived the swap.
pub fn swap_consistency_observations(
    client: &JudgeClient,
    templates: &TemplateSet,
    provider: &ProviderConfig,
    pairs: &[PaperPair],
    hypotheses: &[Hypothesis],
    records: &[PaperRecord],
) -> Result<Vec<(f64, f64)>> {
    if hypotheses.is_empty() {
        return Err(Error::EmptyInput("hypothesis set"));
    }
    let corpus = crate::corpus::index_records(records);
    let mut observations: Vec<(usize, (f64, f64))> = pairs
        .par_iter()
        .enumerate()
        .map(|(idx, pair)| {
            let mut consistent = 0usize;
            for hyp in hypotheses {
                let first = evaluate_fold(
                    client,
                    templates,
                    provider,
                    pair,
                    hyp,
                    &corpus,
                    0,
                    PresentationOrder::HighFirst,
                )?;
                let swapped = evaluate_fold(
                    client,
                    templates,
                    provider,
                    pair,
                    hyp,
                    &corpus,
                    0,
                    PresentationOrder::LowFirst,
                )?;
                consistent += usize::from(first.label == swapped.label);
            }
            Ok((idx, (pair.gap, consistent as f64 / hypotheses.len() as f64)))
        })
        .collect::<Result<Vec<_>>>()?;
    observations.sort_by_key(|(idx, _)| *idx);
    Ok(observations.into_iter().map(|(_, obs)| obs).collect())
}

/// Evaluate a block of hypotheses against a block of pairs with bounded
/// parallelism. Votes come back in canonical (hypothesis, pair, fold) order
/// regardless of task interleaving.
fn evaluate_block(
    client: &JudgeClient,
    templates: &TemplateSet,
    provider: &ProviderConfig,
    hypotheses: &[Hypothesis],
    pairs: &[PaperPair],
    corpus: &BTreeMap<&str, &PaperRecord>,
) -> Result<Vec<VoteRecord>> {
    let cells: Vec<(usize, usize)> = (0..hypotheses.len())
        .flat_map(|hi| (0..pairs.len()).map(move |pi| (hi, pi)))
        .collect();
    let mut results: Vec<((usize, usize), Vec<VoteRecord>)> = cells
        .par_iter()
        .map(|&(hi, pi)| {
            evaluate_pair(
                client,
                templates,
                provider,
                &pairs[pi],
                &hypotheses[hi],
                corpus,
            )
            .map(|votes| ((hi, pi), votes))
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by_key(|&((hi, pi), _)| (hi, pi));
    Ok(results.into_iter().flat_map(|(_, votes)| votes).collect())
}

fn search_config_digest(config: &SearchConfig, pairs: &[PaperPair]) -> String {
    let pair_ids: Vec<&str> = pairs.iter().map(|p| p.pair_id.as_str()).collect();
    let payload = serde_json::json!({
        "k_per_round": config.k_per_round,
        "sample_size": config.sample_size,
        "stop_fraction": config.stop_fraction,
        "seed": config.seed,
        "pairs": pair_ids,
    });
    crate::hashing::sha256_hex(payload.to_string().as_bytes())
}

/// Run the iterative search loop, checkpointing after every round.
///
/// With `resume`, a previous run's state in `state_dir` is picked up at the
/// last completed round; the vote log must match its checkpoint digest and
/// the configuration must match unless `force` is set. The final state is
/// identical to an uninterrupted run's.
#[allow(clippy::too_many_arguments)]
pub fn run_search(
    pairs: &[PaperPair],
    records: &[PaperRecord],
    client: &JudgeClient,
    templates: &TemplateSet,
    provider: &ProviderConfig,
    config: &SearchConfig,
    state_dir: &Path,
    resume: bool,
    force: bool,
) -> Result<SearchOutcome> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pair set"));
    }
    std::fs::create_dir_all(state_dir)?;
    let paths = SearchPaths::in_dir(state_dir);
    let corpus = crate::corpus::index_records(records);
    let pair_index: Vec<String> = pairs.iter().map(|p| p.pair_id.clone()).collect();
    let config_digest = search_config_digest(config, pairs);

    let mut hypotheses: Vec<Hypothesis> = Vec::new();
    let mut coverage = CoverageMatrix::new(pair_index.clone());
    let mut reports: Vec<RoundReport> = Vec::new();
    let mut completed_rounds = 0u32;

    if resume && paths.checkpoint.exists() {
        let checkpoint = Checkpoint::load(&paths.checkpoint)?;
        if checkpoint.config_digest != config_digest && !force {
            return Err(Error::ResumeConflict(format!(
                "search configuration digest {config_digest} does not match checkpoint {}",
                checkpoint.config_digest
            )));
        }
        checkpoint.verify_vote_log(&paths.votes)?;
        hypotheses = read_hypotheses(&paths.hypotheses)?;
        let votes = read_votes(&paths.votes)?;
        coverage = CoverageMatrix::from_votes(pair_index.clone(), &votes)?;
        reports = serde_json::from_str(&std::fs::read_to_string(&paths.rounds)?)?;
        completed_rounds = checkpoint.round;
    } else {
        for path in [
            &paths.votes,
            &paths.hypotheses,
            &paths.rounds,
            &paths.checkpoint,
        ] {
            let _ = std::fs::remove_file(path);
        }
    }

    let total = pairs.len() as f64;
    loop {
        let unexplained: Vec<String> = if hypotheses.is_empty() {
            pair_index.clone()
        } else {
            coverage.unexplained_set()?
        };
        let fraction_before = unexplained.len() as f64 / total;
        if fraction_before < config.stop_fraction {
            break;
        }
        let round = completed_rounds + 1;
        if round > config.max_rounds {
            break;
        }

        let unexplained_ids: HashSet<&str> = unexplained.iter().map(String::as_str).collect();
        let w_pairs: Vec<PaperPair> = pairs
            .iter()
            .filter(|p| unexplained_ids.contains(p.pair_id.as_str()))
            .cloned()
            .collect();
        let sampled = sample_pairs(
            &w_pairs,
            config.sample_size.min(w_pairs.len()),
            derive_seed(&["round-sample", &config.seed.to_string(), &round.to_string()]),
        )?;
        let new_hypotheses = generate_hypotheses(
            client,
            templates,
            provider,
            &sampled,
            &corpus,
            &hypotheses,
            config.k_per_round,
            round,
        )?;

        // every new hypothesis is evaluated against all pairs, explained ones
        // included
        let votes = evaluate_block(client, templates, provider, &new_hypotheses, pairs, &corpus)?;
        append_votes(&paths.votes, &votes)?;
        for chunk in votes.chunks(3) {
            let outcome = aggregate_confidence_weighted(chunk)?;
            coverage.insert(&chunk[0].pair_id, &chunk[0].hyp_id, outcome);
        }
        hypotheses.extend(new_hypotheses.iter().cloned());

        let fraction_after = coverage.unexplained_set()?.len() as f64 / total;
        let mut margin_sum = 0.0;
        let mut consistency_sum = 0.0;
        for hyp in &new_hypotheses {
            let (m, c) = coverage.column_margin_consistency(&hyp.hyp_id)?;
            margin_sum += m;
            consistency_sum += c;
        }
        reports.push(RoundReport {
            round,
            new_hypotheses: new_hypotheses.iter().map(|h| h.hyp_id.clone()).collect(),
            unexplained_fraction_before: fraction_before,
            unexplained_fraction_after: fraction_after,
            mean_confidence_margin: margin_sum / new_hypotheses.len() as f64,
            mean_consistency: consistency_sum / new_hypotheses.len() as f64,
        });

        write_hypotheses(&hypotheses, &paths.hypotheses)?;
        let tmp = paths.rounds.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(&reports)?)?;
        std::fs::rename(&tmp, &paths.rounds)?;
        Checkpoint {
            round,
            vote_log_digest: file_digest(&paths.votes)?,
            config_digest: config_digest.clone(),
        }
        .save(&paths.checkpoint)?;
        completed_rounds = round;

        if fraction_after < config.stop_fraction {
            break;
        }
    }

    Ok(SearchOutcome {
        hypotheses,
        coverage,
        reports,
    })
}

/// Evaluate a frozen hypothesis set over held-out pairs, no generation.
pub fn apply_hypotheses(
    client: &JudgeClient,
    templates: &TemplateSet,
    provider: &ProviderConfig,
    frozen: &[Hypothesis],
    new_pairs: &[PaperPair],
    records: &[PaperRecord],
    vote_log: Option<&Path>,
) -> Result<CoverageMatrix> {
    if frozen.is_empty() {
        return Err(Error::EmptyInput("frozen hypothesis set"));
    }
    if new_pairs.is_empty() {
        return Err(Error::EmptyInput("pair set"));
    }
    let corpus = crate::corpus::index_records(records);
    let votes = evaluate_block(client, templates, provider, frozen, new_pairs, &corpus)?;
    if let Some(path) = vote_log {
        append_votes(path, &votes)?;
    }
    let pair_index: Vec<String> = new_pairs.iter().map(|p| p.pair_id.clone()).collect();
    CoverageMatrix::from_votes(pair_index, &votes)
}
