//! Corpus ingestion, venue score statistics, and the significance-gapped
//! pairwise dataset.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::short_id;

/// Corpus schema version accepted by [`load_corpus`].
pub const CORPUS_SCHEMA_VERSION: &str = "1";

/// Structured extended abstract; the judge only ever sees these sections.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtendedAbstract {
    pub context: String,
    pub key_idea: String,
    pub method_details: String,
    pub experiments_results: String,
    pub impact: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_abstract: Option<String>,
}

impl ExtendedAbstract {
    /// All five structured sections present; required before a record can be
    /// put in front of the judge.
    pub fn is_complete(&self) -> bool {
        !self.context.is_empty()
            && !self.key_idea.is_empty()
            && !self.method_details.is_empty()
            && !self.experiments_results.is_empty()
            && !self.impact.is_empty()
    }

    /// Deterministic plain-text rendering used in prompts.
    pub fn render(&self) -> String {
        format!(
            "Context: {}\nKey idea: {}\nMethod details: {}\nExperiments and results: {}\nImpact: {}",
            self.context, self.key_idea, self.method_details, self.experiments_results, self.impact
        )
    }
}

/// One submission with its reviews.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub venue_id: String,
    pub year: i32,
    pub title: String,
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reviewer_confidences: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comments: Vec<String>,
    pub extended_abstract: ExtendedAbstract,
}

impl PaperRecord {
    /// Arithmetic mean of reviewer scores.
    pub fn mean_score(&self) -> Option<f64> {
        if self.scores.is_empty() {
            None
        } else {
            Some(self.scores.iter().sum::<f64>() / self.scores.len() as f64)
        }
    }
}

/// Per-venue score statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VenueStats {
    pub venue_id: String,
    /// Mean over papers of each paper's mean score.
    pub mean_score: f64,
    /// Population standard deviation of per-paper mean scores.
    pub std_score: f64,
    /// Mean over papers of the population std of that paper's own scores.
    pub within_paper_std_mean: f64,
    /// Population standard deviation of all individual scores in the venue.
    pub across_paper_std: f64,
    /// Median over all individual reviewer confidences; None when absent.
    pub median_reviewer_confidence: Option<f64>,
}

/// Ordered (lower-scored, higher-scored) pair; the unit of judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperPair {
    pub pair_id: String,
    pub venue_id: String,
    /// paper_id of the lower-scored paper.
    pub low: String,
    /// paper_id of the higher-scored paper.
    pub high: String,
    /// mean score of `high` minus mean score of `low`; always > 0.
    pub gap: f64,
}

impl PaperPair {
    pub fn id_for(venue_id: &str, low: &str, high: &str) -> String {
        short_id(&["pair", venue_id, low, high])
    }
}

/// One rejected input line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectEntry {
    pub line: usize,
    pub reason: String,
}

/// Outcome of [`load_corpus`]: validated records plus a reject report.
#[derive(Debug, Default)]
pub struct LoadOutcome {
    pub records: Vec<PaperRecord>,
    pub rejects: Vec<RejectEntry>,
}

fn validate_record(record: &PaperRecord) -> std::result::Result<(), String> {
    if record.paper_id.is_empty() {
        return Err("empty paper_id".into());
    }
    if record.venue_id.is_empty() {
        return Err("empty venue_id".into());
    }
    if record.scores.is_empty() {
        return Err("missing field `scores`: scores must be non-empty".into());
    }
    if !record.comments.is_empty() && record.comments.len() != record.scores.len() {
        return Err(format!(
            "comments length {} does not match scores length {}",
            record.comments.len(),
            record.scores.len()
        ));
    }
    if !record.reviewer_confidences.is_empty()
        && record.reviewer_confidences.len() != record.scores.len()
    {
        return Err(format!(
            "reviewer_confidences length {} does not match scores length {}",
            record.reviewer_confidences.len(),
            record.scores.len()
        ));
    }
    Ok(())
}

/// Load a JSONL corpus, validating each line.
///
/// Lines failing validation land in the reject report rather than being
/// silently dropped; a duplicate paper_id aborts the whole load.
pub fn load_corpus(path: &Path, schema_version: &str) -> Result<LoadOutcome> {
    if schema_version != CORPUS_SCHEMA_VERSION {
        return Err(Error::UnsupportedSchemaVersion(
            schema_version.to_string(),
            CORPUS_SCHEMA_VERSION.to_string(),
        ));
    }
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut outcome = LoadOutcome::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PaperRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                outcome.rejects.push(RejectEntry {
                    line: line_no,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if let Err(reason) = validate_record(&record) {
            outcome.rejects.push(RejectEntry {
                line: line_no,
                reason,
            });
            continue;
        }
        if !seen.insert(record.paper_id.clone()) {
            return Err(Error::DuplicatePaperId(record.paper_id));
        }
        outcome.records.push(record);
    }
    Ok(outcome)
}

/// Serialize records to canonical JSONL.
pub fn write_corpus(records: &[PaperRecord], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Compute score statistics for one venue.
pub fn venue_stats(records: &[PaperRecord], venue_id: &str) -> Result<VenueStats> {
    let members: Vec<&PaperRecord> = records
        .iter()
        .filter(|r| r.venue_id == venue_id && !r.scores.is_empty())
        .collect();
    if members.len() < 2 {
        return Err(Error::InsufficientVenueData {
            venue_id: venue_id.to_string(),
            papers: members.len(),
        });
    }
    let paper_means: Vec<f64> = members.iter().map(|r| mean(&r.scores)).collect();
    let within: Vec<f64> = members.iter().map(|r| population_std(&r.scores)).collect();
    let all_scores: Vec<f64> = members.iter().flat_map(|r| r.scores.clone()).collect();
    let confidences: Vec<f64> = members
        .iter()
        .flat_map(|r| r.reviewer_confidences.clone())
        .collect();
    Ok(VenueStats {
        venue_id: venue_id.to_string(),
        mean_score: mean(&paper_means),
        std_score: population_std(&paper_means),
        within_paper_std_mean: mean(&within),
        across_paper_std: population_std(&all_scores),
        median_reviewer_confidence: if confidences.is_empty() {
            None
        } else {
            Some(median(confidences))
        },
    })
}

/// Emit every ordered (low, high) pair within the venue whose mean-score gap
/// exceeds `threshold_sigma` venue standard deviations.
///
/// Output is sorted by pair_id, so the pair set is deterministic.
pub fn build_pairs(
    records: &[PaperRecord],
    venue_id: &str,
    threshold_sigma: f64,
) -> Result<Vec<PaperPair>> {
    if threshold_sigma <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "threshold_sigma must be > 0, got {threshold_sigma}"
        )));
    }
    let stats = venue_stats(records, venue_id)?;
    if stats.std_score == 0.0 {
        return Err(Error::DegenerateVenueScores(venue_id.to_string()));
    }
    let threshold = threshold_sigma * stats.std_score;
    let members: Vec<(&PaperRecord, f64)> = records
        .iter()
        .filter(|r| r.venue_id == venue_id && !r.scores.is_empty())
        .map(|r| (r, mean(&r.scores)))
        .collect();
    let mut pairs = Vec::new();
    for (low, low_mean) in &members {
        for (high, high_mean) in &members {
            if low.paper_id == high.paper_id {
                continue;
            }
            let gap = high_mean - low_mean;
            if gap > threshold {
                pairs.push(PaperPair {
                    pair_id: PaperPair::id_for(venue_id, &low.paper_id, &high.paper_id),
                    venue_id: venue_id.to_string(),
                    low: low.paper_id.clone(),
                    high: high.paper_id.clone(),
                    gap,
                });
            }
        }
    }
    pairs.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    Ok(pairs)
}

/// Uniform sample of `n` pairs without replacement, reproducible from `seed`.
pub fn sample_pairs(pairs: &[PaperPair], n: usize, seed: u64) -> Result<Vec<PaperPair>> {
    if n > pairs.len() {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: pairs.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled: Vec<PaperPair> = pairs.to_vec();
    shuffled.shuffle(&mut rng);
    shuffled.truncate(n);
    Ok(shuffled)
}

/// Write pairs as JSONL.
pub fn write_pairs(pairs: &[PaperPair], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for pair in pairs {
        serde_json::to_writer(&mut out, pair)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Read pairs from JSONL.
pub fn read_pairs(path: &Path) -> Result<Vec<PaperPair>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut pairs = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        pairs.push(serde_json::from_str(&line)?);
    }
    Ok(pairs)
}

/// Index records by paper_id for pair lookups.
pub fn index_records(records: &[PaperRecord]) -> BTreeMap<&str, &PaperRecord> {
    records.iter().map(|r| (r.paper_id.as_str(), r)).collect()
}
