//! Command-line pipeline: each subcommand reads upstream artifacts by path,
//! writes its outputs plus a manifest, and composes with the others through
//! files only.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::annotate::{self, AgreementMode, ExampleSet};
use crate::corpus::{self, PaperPair, PaperRecord};
use crate::error::{Error, Result};
use crate::hashing::{file_digest, sha256_hex};
use crate::ingest::{self, FetchJob, FetchTransport};
use crate::judge::http::HttpProvider;
use crate::judge::template::TemplateSet;
use crate::judge::{JudgeClient, ProviderConfig, ResponseCache};
use crate::prior::{self, DictionaryMatcher, JudgeMatcher, Matcher, PriorConfig, WindowMode};
use crate::report::{self, AnalysisReport, FixtureTable, TableInputs};
use crate::search::{self, read_votes, SearchConfig, SearchPaths};
use crate::sim::{self, ScriptedJudge, ScriptedJudgeConfig};
use crate::stats::{self, TieBreak};

/// Pairing stage settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairingParams {
    pub threshold_sigma: f64,
    /// Global uniform sample drawn from the pooled qualifying pairs.
    pub sample_n: Option<usize>,
}

impl Default for PairingParams {
    fn default() -> Self {
        PairingParams {
            threshold_sigma: 1.0,
            sample_n: None,
        }
    }
}

/// Search stage settings (seed comes from the top-level config).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchParams {
    pub k_per_round: usize,
    pub sample_size: usize,
    pub stop_fraction: f64,
    pub max_rounds: u32,
}

impl Default for SearchParams {
    fn default() -> Self {
        let d = SearchConfig::default();
        SearchParams {
            k_per_round: d.k_per_round,
            sample_size: d.sample_size,
            stop_fraction: d.stop_fraction,
            max_rounds: d.max_rounds,
        }
    }
}

/// Which matcher backs prior matching and comment mention checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatcherKind {
    #[default]
    Judge,
    Dictionary,
    Both,
}

/// Full run configuration; its digest is embedded in every output artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus_path: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scripted_world: Option<PathBuf>,
    #[serde(default)]
    pub pairing: PairingParams,
    #[serde(default)]
    pub search: SearchParams,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub matcher: MatcherKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotate_examples_path: Option<PathBuf>,
    /// Restrict pairing to these venues; all venues otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venues: Option<Vec<String>>,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default)]
    pub window_mode: WindowMode,
    #[serde(default)]
    pub plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_path: PathBuf::from("corpus.jsonl"),
            output_dir: PathBuf::from("out"),
            seed: 0,
            provider_path: None,
            scripted_world: None,
            pairing: PairingParams::default(),
            search: SearchParams::default(),
            prior: PriorConfig::default(),
            matcher: MatcherKind::default(),
            dictionary_path: None,
            cache_dir: None,
            templates_dir: None,
            annotate_examples_path: None,
            venues: None,
            tie_break: TieBreak::default(),
            window_mode: WindowMode::default(),
            plots: false,
        }
    }
}

impl RunConfig {
    /// Load from TOML or JSON (by extension).
    pub fn from_file(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&content)?)
        } else {
            toml::from_str(&content).map_err(|e| Error::Toml(e.to_string()))
        }
    }

    /// Digest of the semantic configuration: every parameter that shapes
    /// results, with filesystem locations reduced to file names so runs in
    /// different directories stay comparable.
    pub fn digest(&self) -> String {
        let name = |p: &Option<PathBuf>| {
            p.as_ref()
                .and_then(|p| p.file_name())
                .map(|n| n.to_string_lossy().into_owned())
        };
        let view = serde_json::json!({
            "corpus": self.corpus_path.file_name().map(|n| n.to_string_lossy()),
            "seed": self.seed,
            "provider": name(&self.provider_path),
            "scripted_world": name(&self.scripted_world),
            "pairing": self.pairing,
            "search": self.search,
            "prior": self.prior,
            "matcher": self.matcher,
            "dictionary": name(&self.dictionary_path),
            "templates": name(&self.templates_dir),
            "annotate_examples": name(&self.annotate_examples_path),
            "venues": self.venues,
            "tie_break": self.tie_break,
            "window_mode": self.window_mode,
        });
        sha256_hex(view.to_string().as_bytes())
    }
}

/// Guard holding the per-output-directory writer lock.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut file) => {
                use std::io::Write;
                let _ = writeln!(file, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::DirectoryLocked(dir.to_path_buf()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    config_digest: String,
    input_digests: BTreeMap<String, String>,
    output_digests: BTreeMap<String, String>,
    wall_time_ms: u128,
}

/// Digest key for an artifact: its path relative to the output directory
/// (falling back to the bare file name), so artifacts in different run
/// directories compare equal.
fn artifact_key(config: &RunConfig, path: &Path) -> String {
    path.strip_prefix(&config.output_dir)
        .map(|p| p.display().to_string())
        .unwrap_or_else(|_| {
            path.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string())
        })
}

fn write_manifest(
    config: &RunConfig,
    command: &str,
    inputs: &[&Path],
    outputs: &[&Path],
    started: Instant,
) -> Result<()> {
    let digest_map = |paths: &[&Path]| -> Result<BTreeMap<String, String>> {
        let mut map = BTreeMap::new();
        for path in paths {
            if path.exists() {
                map.insert(artifact_key(config, path), file_digest(path)?);
            }
        }
        Ok(map)
    };
    let manifest = Manifest {
        command: command.to_string(),
        config_digest: config.digest(),
        input_digests: digest_map(inputs)?,
        output_digests: digest_map(outputs)?,
        wall_time_ms: started.elapsed().as_millis(),
    };
    std::fs::write(
        config.output_dir.join(format!("manifest-{command}.json")),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

fn require(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            producer: producer.to_string(),
        })
    }
}

/// Build the judge client and provider settings from the configuration:
/// a scripted world when one is configured, the HTTP provider otherwise.
pub fn build_judge(config: &RunConfig) -> Result<(JudgeClient, ProviderConfig)> {
    if let Some(world_path) = &config.scripted_world {
        let world = ScriptedJudgeConfig::from_file(world_path)?;
        let judge = ScriptedJudge::new(world)?;
        return Ok((
            JudgeClient::new(Arc::new(judge)),
            ProviderConfig::scripted(),
        ));
    }
    let provider_path = config
        .provider_path
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("need --provider or --scripted-world".into()))?;
    let provider_config = ProviderConfig::from_file(provider_path)?;
    let provider = HttpProvider::new(
        &provider_config.provider_url,
        provider_config.api_key_env.as_deref(),
    )?;
    let cache_dir = config
        .cache_dir
        .clone()
        .unwrap_or_else(|| config.output_dir.join("cache"));
    let client = JudgeClient::new(Arc::new(provider))
        .with_cache(ResponseCache::open(&cache_dir)?)
        .with_rate_limit(provider_config.requests_per_minute)
        .with_max_retries(provider_config.max_retries);
    Ok((client, provider_config))
}

fn templates_for(config: &RunConfig) -> Result<TemplateSet> {
    match &config.templates_dir {
        Some(dir) => TemplateSet::from_dir(dir),
        None => Ok(TemplateSet::builtin()),
    }
}

fn load_corpus_records(config: &RunConfig) -> Result<Vec<PaperRecord>> {
    require(&config.corpus_path, "ingest")?;
    let outcome = corpus::load_corpus(&config.corpus_path, corpus::CORPUS_SCHEMA_VERSION)?;
    if !outcome.rejects.is_empty() {
        let path = config.output_dir.join("corpus_rejects.json");
        std::fs::write(&path, serde_json::to_string_pretty(&outcome.rejects)?)?;
        eprintln!(
            "note: {} corpus line(s) rejected, see {}",
            outcome.rejects.len(),
            path.display()
        );
    }
    Ok(outcome.records)
}

/// The dictionary for matching/annotation: explicit file first, otherwise
/// derived per hypothesis from the scripted world when one is configured.
fn dictionary_for(
    config: &RunConfig,
    hypotheses: &[search::Hypothesis],
) -> Result<Option<BTreeMap<String, Vec<String>>>> {
    if let Some(path) = &config.dictionary_path {
        return Ok(Some(annotate::load_dictionary(path)?));
    }
    if let Some(world_path) = &config.scripted_world {
        let world = ScriptedJudgeConfig::from_file(world_path)?;
        return Ok(Some(world.dictionary_for_hypotheses(hypotheses)));
    }
    Ok(None)
}

// --- commands ---------------------------------------------------------------

/// `ingest`: fetch one venue (live or transcript replay) into corpus JSONL.
pub fn cmd_ingest(
    config: &RunConfig,
    job: &FetchJob,
    transcript: Option<&Path>,
    live: bool,
    sidecar: Option<&Path>,
) -> Result<()> {
    let started = Instant::now();
    std::fs::create_dir_all(&config.output_dir)?;
    let out_path = config.output_dir.join("corpus.jsonl");
    let reject_path = config.output_dir.join("ingest_rejects.jsonl");
    let transport: Box<dyn FetchTransport> = match (transcript, live) {
        (Some(path), _) => Box::new(ingest::ReplayTransport::from_file(path)?),
        (None, true) => Box::new(ingest::HttpTransport::new()?),
        (None, false) => {
            return Err(Error::InvalidConfig(
                "ingest needs --transcript <file> or --live".into(),
            ))
        }
    };
    let summary = ingest::fetch_venue(job, transport.as_ref(), &out_path, &reject_path)?;
    if let Some(sidecar_path) = sidecar {
        let outcome = corpus::load_corpus(&out_path, corpus::CORPUS_SCHEMA_VERSION)?;
        let mut records = outcome.records;
        let merged = ingest::merge_sidecar(&mut records, sidecar_path, false)?;
        corpus::write_corpus(&records, &out_path)?;
        if !merged.unmatched.is_empty() {
            eprintln!(
                "note: {} sidecar id(s) had no corpus record",
                merged.unmatched.len()
            );
        }
    }
    println!(
        "ingest: {} record(s) fetched, {} rejected",
        summary.fetched, summary.rejected
    );
    write_manifest(config, "ingest", &[], &[&out_path, &reject_path], started)
}

/// `pairs`: venue stats plus the significance-gapped pairwise dataset.
pub fn cmd_pairs(config: &RunConfig) -> Result<()> {
    let started = Instant::now();
    std::fs::create_dir_all(&config.output_dir)?;
    let records = load_corpus_records(config)?;
    let explicit = config.venues.is_some();
    let venues: Vec<String> = match &config.venues {
        Some(venues) => venues.clone(),
        None => {
            let mut venues: Vec<String> = records.iter().map(|r| r.venue_id.clone()).collect();
            venues.sort();
            venues.dedup();
            venues
        }
    };
    let mut all_pairs: Vec<PaperPair> = Vec::new();
    let mut stats_rows = Vec::new();
    for venue in &venues {
        match corpus::build_pairs(&records, venue, config.pairing.threshold_sigma) {
            Ok(pairs) => {
                stats_rows.push(corpus::venue_stats(&records, venue)?);
                all_pairs.extend(pairs);
            }
            Err(e) if !explicit => {
                eprintln!("note: skipping venue {venue}: {e}");
            }
            Err(e) => return Err(e),
        }
    }
    all_pairs.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    if let Some(n) = config.pairing.sample_n {
        let n = n.min(all_pairs.len());
        all_pairs = corpus::sample_pairs(&all_pairs, n, config.seed)?;
    }
    let pairs_path = config.output_dir.join("pairs.jsonl");
    corpus::write_pairs(&all_pairs, &pairs_path)?;
    let stats_path = config.output_dir.join("venue_stats.json");
    std::fs::write(&stats_path, serde_json::to_string_pretty(&stats_rows)?)?;
    println!(
        "pairs: {} pair(s) across {} venue(s)",
        all_pairs.len(),
        stats_rows.len()
    );
    write_manifest(
        config,
        "pairs",
        &[&config.corpus_path],
        &[&pairs_path, &stats_path],
        started,
    )
}

/// `search`: run the iterative hypothesis search over the pair dataset.
pub fn cmd_search(config: &RunConfig, resume: bool, force: bool) -> Result<()> {
    let started = Instant::now();
    std::fs::create_dir_all(&config.output_dir)?;
    let pairs_path = config.output_dir.join("pairs.jsonl");
    require(&pairs_path, "pairs")?;
    let records = load_corpus_records(config)?;
    let pairs = corpus::read_pairs(&pairs_path)?;
    let (client, provider) = build_judge(config)?;
    let templates = templates_for(config)?;
    let search_config = SearchConfig {
        k_per_round: config.search.k_per_round,
        sample_size: config.search.sample_size,
        stop_fraction: config.search.stop_fraction,
        max_rounds: config.search.max_rounds,
        seed: config.seed,
    };
    let outcome = search::run_search(
        &pairs,
        &records,
        &client,
        &templates,
        &provider,
        &search_config,
        &config.output_dir,
        resume,
        force,
    )?;
    let posterior = outcome.coverage.posterior_coverage()?;
    let posterior_path = config.output_dir.join("posterior.json");
    std::fs::write(&posterior_path, serde_json::to_string_pretty(&posterior)?)?;
    let unexplained = outcome.coverage.unexplained_set()?.len() as f64 / pairs.len() as f64;
    println!(
        "search: {} hypothesis(es) over {} round(s), unexplained fraction {:.3}",
        outcome.hypotheses.len(),
        outcome.reports.len(),
        unexplained
    );
    let paths = SearchPaths::in_dir(&config.output_dir);
    write_manifest(
        config,
        "search",
        &[&config.corpus_path, &pairs_path],
        &[
            &paths.votes,
            &paths.hypotheses,
            &paths.rounds,
            &posterior_path,
        ],
        started,
    )
}

/// `priors`: elicit the data-free prior hypothesis distribution.
pub fn cmd_priors(config: &RunConfig, resume: bool) -> Result<()> {
    let started = Instant::now();
    std::fs::create_dir_all(&config.output_dir)?;
    let priors_path = config.output_dir.join("priors.jsonl");
    if !resume && priors_path.exists() {
        std::fs::remove_file(&priors_path)?;
    }
    let (client, provider) = build_judge(config)?;
    let templates = templates_for(config)?;
    let outcome = prior::elicit_priors(
        &client,
        &templates,
        &provider,
        &config.prior,
        Some(&priors_path),
    )?;
    if !outcome.excluded_sims.is_empty() {
        let path = config.output_dir.join("prior_excluded_sims.json");
        std::fs::write(&path, serde_json::to_string_pretty(&outcome.excluded_sims)?)?;
        eprintln!(
            "note: {} simulation(s) stayed underfilled and were excluded",
            outcome.excluded_sims.len()
        );
    }
    println!("priors: {} sample(s)", outcome.samples.len());
    write_manifest(config, "priors", &[], &[&priors_path], started)
}

/// `match`: frequency of each posterior hypothesis in the prior windows.
pub fn cmd_match(config: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let paths = SearchPaths::in_dir(&config.output_dir);
    require(&paths.hypotheses, "search")?;
    let priors_path = config.output_dir.join("priors.jsonl");
    require(&priors_path, "priors")?;
    let hypotheses = search::read_hypotheses(&paths.hypotheses)?;
    let priors = prior::read_priors(&priors_path)?;

    let out_name = match config.window_mode {
        WindowMode::Binary => "prior_frequency.csv",
        // occurrence counting is the non-default mode; label the artifact
        WindowMode::CountOccurrences => "prior_frequency_occurrences.csv",
    };
    let freq_path = config.output_dir.join(out_name);
    let mut outputs: Vec<PathBuf> = vec![freq_path.clone()];

    let (client, provider) = build_judge(config)?;
    let templates = templates_for(config)?;
    let judge_matcher = JudgeMatcher {
        client: &client,
        templates: &templates,
        provider: &provider,
    };
    let dictionary = dictionary_for(config, &hypotheses)?;

    let run_matcher = |matcher: &dyn Matcher, path: &Path| -> Result<()> {
        let frequencies =
            prior::prior_frequency(&hypotheses, &priors, matcher, config.window_mode)?;
        prior::write_frequency_csv(&frequencies, path)
    };
    match config.matcher {
        MatcherKind::Judge => run_matcher(&judge_matcher, &freq_path)?,
        MatcherKind::Dictionary => {
            let dictionary = dictionary.ok_or_else(|| {
                Error::InvalidConfig("dictionary matcher needs a dictionary file".into())
            })?;
            run_matcher(
                &DictionaryMatcher::new(&hypotheses, &dictionary),
                &freq_path,
            )?;
        }
        MatcherKind::Both => {
            run_matcher(&judge_matcher, &freq_path)?;
            let dictionary = dictionary.ok_or_else(|| {
                Error::InvalidConfig("matcher `both` needs a dictionary file".into())
            })?;
            let alt = config.output_dir.join("prior_frequency_dictionary.csv");
            run_matcher(&DictionaryMatcher::new(&hypotheses, &dictionary), &alt)?;
            outputs.push(alt);
        }
    }
    println!(
        "match: {} hypothesis frequenc(ies) written",
        hypotheses.len()
    );
    let output_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    write_manifest(
        config,
        "match",
        &[paths.hypotheses.as_path(), priors_path.as_path()],
        &output_refs,
        started,
    )
}

/// `annotate`: map review comments onto the hypothesis set.
pub fn cmd_annotate(config: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let paths = SearchPaths::in_dir(&config.output_dir);
    require(&paths.hypotheses, "search")?;
    let hypotheses = search::read_hypotheses(&paths.hypotheses)?;
    let records = load_corpus_records(config)?;
    let (client, provider) = build_judge(config)?;
    let templates = templates_for(config)?;
    let examples = match &config.annotate_examples_path {
        Some(path) => ExampleSet::from_file(path)?,
        None if config.scripted_world.is_some() => ExampleSet::empty(),
        None => ExampleSet::builtin(),
    };
    let outcome = annotate::annotate_corpus(
        &client,
        &templates,
        &provider,
        &records,
        &hypotheses,
        &examples,
    )?;
    let hyp_ids: Vec<String> = hypotheses.iter().map(|h| h.hyp_id.clone()).collect();
    let annotations_path = config.output_dir.join("annotations.jsonl");
    annotate::write_annotations(&outcome.vectors, &annotations_path)?;
    let stats = annotate::mention_stats(&outcome.vectors, &hyp_ids)?;
    let mention_path = config.output_dir.join("mention.csv");
    annotate::write_mention_csv(&stats, &mention_path)?;
    let mut outputs = vec![annotations_path.clone(), mention_path.clone()];

    if !outcome.unannotated.is_empty() {
        let path = config.output_dir.join("unannotated.json");
        std::fs::write(&path, serde_json::to_string_pretty(&outcome.unannotated)?)?;
        eprintln!(
            "note: {} comment(s) stayed malformed and were excluded",
            outcome.unannotated.len()
        );
    }

    // dictionary cross-check when a dictionary is available
    if let Some(dictionary) = dictionary_for(config, &hypotheses)? {
        if matches!(config.matcher, MatcherKind::Dictionary | MatcherKind::Both)
            || config.scripted_world.is_some()
        {
            let mut dict_vectors = Vec::new();
            for record in &records {
                for (idx, comment) in record.comments.iter().enumerate() {
                    if comment.is_empty() {
                        continue;
                    }
                    let values: Vec<i8> =
                        annotate::dictionary_annotate(comment, &dictionary, &hyp_ids)
                            .into_iter()
                            .map(|v| v as i8)
                            .collect();
                    dict_vectors.push(annotate::AnnotationVector {
                        comment_id: format!("{}#r{idx}", record.paper_id),
                        paper_id: record.paper_id.clone(),
                        venue_id: record.venue_id.clone(),
                        reviewer_score: None,
                        values,
                        score_imputed: false,
                    });
                }
            }
            let dict_stats = annotate::mention_stats(&dict_vectors, &hyp_ids)?;
            let dict_path = config.output_dir.join("mention_dictionary.csv");
            annotate::write_mention_csv(&dict_stats, &dict_path)?;
            outputs.push(dict_path);

            // pooled mention agreement between the two routes
            let judge_flat: Vec<i8> = outcome
                .vectors
                .iter()
                .flat_map(|v| v.values.iter().map(|x| i8::from(*x != 0)))
                .collect();
            let dict_by_comment: BTreeMap<&str, &annotate::AnnotationVector> = dict_vectors
                .iter()
                .map(|v| (v.comment_id.as_str(), v))
                .collect();
            let dict_flat: Vec<i8> = outcome
                .vectors
                .iter()
                .flat_map(|v| {
                    dict_by_comment[v.comment_id.as_str()]
                        .values
                        .iter()
                        .copied()
                })
                .collect();
            match annotate::agreement(&judge_flat, &dict_flat, AgreementMode::Pearson) {
                Ok(correlation) => {
                    println!("annotate: judge-dictionary mention correlation {correlation:.2}");
                }
                Err(Error::DegenerateSeries) => {
                    println!("annotate: judge-dictionary mention correlation undefined (constant labels)");
                }
                Err(e) => return Err(e),
            }
        }
    }
    println!(
        "annotate: {} comment(s) annotated over {} hypothesis(es)",
        outcome.vectors.len(),
        hyp_ids.len()
    );
    let output_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    write_manifest(
        config,
        "annotate",
        &[config.corpus_path.as_path(), paths.hypotheses.as_path()],
        &output_refs,
        started,
    )
}

fn read_frequency_csv(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut map = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let hyp_id = row.get(0).unwrap_or_default().to_string();
        let value: f64 = row
            .get(1)
            .unwrap_or_default()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad number in {}", path.display())))?;
        map.insert(hyp_id, value);
    }
    Ok(map)
}

/// `analyze`: compute the full statistics bundle, either from pipeline
/// artifacts or from a shipped reference table fixture.
pub fn cmd_analyze(config: &RunConfig, table_fixture: Option<&Path>) -> Result<()> {
    let started = Instant::now();
    std::fs::create_dir_all(&config.output_dir)?;
    let analysis_path = config.output_dir.join("analysis.json");
    let table_path = config.output_dir.join("table.csv");

    let report = match table_fixture {
        Some(path) => {
            let fixture = FixtureTable::from_file(path)?;
            let (hypotheses, prior, posterior, mention) = fixture.inputs();
            let inputs = TableInputs {
                hypotheses: &hypotheses,
                prior: &prior,
                posterior: &posterior,
                mention: &mention,
            };
            let (table, correlations) = report::build_table(&inputs, config.tie_break)?;
            let shares = report::shares_from_table(&table, 5)?;
            AnalysisReport {
                config_digest: config.digest(),
                input_digests: BTreeMap::from([(artifact_key(config, path), file_digest(path)?)]),
                tie_break: config.tie_break.as_str().to_string(),
                table,
                correlations,
                attention_top_k: 5,
                attention_shares: shares,
                round_trends: Vec::new(),
                coverage_cosine: None,
                vote_scheme_agreement: None,
                score_regression: None,
                position_bias: None,
            }
        }
        None => analyze_pipeline(config)?,
    };
    report::write_report(&report, &analysis_path)?;
    report::write_table_csv(&report.table, &table_path)?;
    let show = |r: Option<f64>| r.map_or("undefined".to_string(), |v| format!("{v:.2}"));
    println!(
        "analyze: pearson(prior, mention) = {}, pearson(posterior, mention) = {}",
        show(report.correlations.prior_mention),
        show(report.correlations.posterior_mention)
    );
    write_manifest(
        config,
        "analyze",
        &[],
        &[&analysis_path, &table_path],
        started,
    )
}

fn analyze_pipeline(config: &RunConfig) -> Result<AnalysisReport> {
    let paths = SearchPaths::in_dir(&config.output_dir);
    require(&paths.hypotheses, "search")?;
    require(&paths.votes, "search")?;
    let pairs_path = config.output_dir.join("pairs.jsonl");
    require(&pairs_path, "pairs")?;
    let freq_path = config.output_dir.join("prior_frequency.csv");
    require(&freq_path, "match")?;
    let mention_path = config.output_dir.join("mention.csv");
    require(&mention_path, "annotate")?;

    let hypotheses = search::read_hypotheses(&paths.hypotheses)?;
    let pairs = corpus::read_pairs(&pairs_path)?;
    let votes = read_votes(&paths.votes)?;
    let pair_index: Vec<String> = pairs.iter().map(|p| p.pair_id.clone()).collect();
    let coverage = search::CoverageMatrix::from_votes(pair_index, &votes)?;
    let posterior = coverage.posterior_coverage()?;
    let prior = read_frequency_csv(&freq_path)?;
    let mention = read_frequency_csv(&mention_path)?;

    let inputs = TableInputs {
        hypotheses: &hypotheses,
        prior: &prior,
        posterior: &posterior,
        mention: &mention,
    };
    let (table, correlations) = report::build_table(&inputs, config.tie_break)?;
    let top_k = 5.min(table.len() / 2);
    let shares = report::shares_from_table(&table, top_k)?;
    let hyp_rounds: BTreeMap<String, u32> = hypotheses
        .iter()
        .map(|h| (h.hyp_id.clone(), h.round))
        .collect();
    let trends = stats::round_trends(&hyp_rounds, &coverage, Some(&prior))?;
    let cosine = match stats::coverage_cosine(&coverage) {
        Ok(summary) => Some(summary),
        Err(Error::TooFewColumns) => None,
        Err(e) => return Err(e),
    };
    let agreement = report::vote_scheme_agreement(&votes)?;
    let annotations_path = config.output_dir.join("annotations.jsonl");
    let score_regression = if annotations_path.exists() {
        report::annotation_score_regression(&annotate::read_annotations(&annotations_path)?)?
    } else {
        None
    };

    let mut input_digests = BTreeMap::new();
    for path in [
        &paths.hypotheses,
        &paths.votes,
        &freq_path,
        &mention_path,
        &pairs_path,
    ] {
        input_digests.insert(artifact_key(config, path), file_digest(path)?);
    }
    Ok(AnalysisReport {
        config_digest: config.digest(),
        input_digests,
        tie_break: config.tie_break.as_str().to_string(),
        table,
        correlations,
        attention_top_k: top_k,
        attention_shares: shares,
        round_trends: trends,
        coverage_cosine: cosine,
        vote_scheme_agreement: Some(agreement),
        score_regression,
        position_bias: None,
    })
}

/// `report`: render the analysis bundle into CSV tables and optional plots.
pub fn cmd_report(config: &RunConfig, plots: bool) -> Result<()> {
    let started = Instant::now();
    let analysis_path = config.output_dir.join("analysis.json");
    require(&analysis_path, "analyze")?;
    let report = report::read_report(&analysis_path)?;
    let table_path = config.output_dir.join("table.csv");
    report::write_table_csv(&report.table, &table_path)?;
    let mut outputs = vec![table_path.clone()];

    if plots || config.plots {
        let plot_dir = config.output_dir.join("plots");
        std::fs::create_dir_all(&plot_dir)?;
        let scatter = plot_dir.join("prior_vs_posterior.svg");
        let points: Vec<(f64, f64)> = report
            .table
            .iter()
            .map(|r| (r.prior, r.posterior))
            .collect();
        report::plot_scatter(&points, "prior frequency", "posterior coverage", &scatter)?;
        outputs.push(scatter);
        if !report.round_trends.is_empty() {
            let lines = plot_dir.join("round_trends.svg");
            let series = vec![
                (
                    "posterior coverage".to_string(),
                    report
                        .round_trends
                        .iter()
                        .map(|t| t.mean_posterior_coverage)
                        .collect::<Vec<f64>>(),
                ),
                (
                    "consistency".to_string(),
                    report
                        .round_trends
                        .iter()
                        .map(|t| t.consistency_rate)
                        .collect(),
                ),
            ];
            report::plot_lines(&series, "per-round mean", &lines)?;
            outputs.push(lines);
        }
    }
    println!("report: table with {} row(s)", report.table.len());
    for row in report.table.iter().take(5) {
        println!(
            "  rank {:>2}  delta {:+.2}  {}",
            row.shift_rank, row.delta, row.text
        );
    }
    let output_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    write_manifest(config, "report", &[&analysis_path], &output_refs, started)
}

/// `simulate`: the whole pipeline end to end on a scripted world.
///
/// Prints the planted-criterion recovery score and writes every intermediate
/// artifact into the output directory.
pub fn cmd_simulate(
    config: &RunConfig,
    n_papers: usize,
    n_venues: usize,
    resume: bool,
    force: bool,
) -> Result<()> {
    let started = Instant::now();
    std::fs::create_dir_all(&config.output_dir)?;
    let world_config = match &config.scripted_world {
        Some(path) => ScriptedJudgeConfig::from_file(path)?,
        None => ScriptedJudgeConfig::default_world(config.seed),
    };
    let world = sim::generate_world(&world_config, n_papers, n_venues)?;

    // materialize world + corpus so downstream commands are file-driven
    let world_path = config.output_dir.join("world.json");
    std::fs::write(&world_path, serde_json::to_string_pretty(&world_config)?)?;
    let corpus_path = config.output_dir.join("corpus.jsonl");
    world.write_corpus(&corpus_path)?;

    let mut sim_config = config.clone();
    sim_config.corpus_path = corpus_path;
    sim_config.scripted_world = Some(world_path);
    if sim_config.pairing.sample_n.is_none() {
        sim_config.pairing.sample_n = Some(800);
    }

    cmd_pairs(&sim_config)?;
    cmd_search(&sim_config, resume, force)?;
    cmd_priors(&sim_config, resume)?;
    cmd_match(&sim_config)?;
    cmd_annotate(&sim_config)?;
    cmd_analyze(&sim_config, None)?;

    // recovery against the planted ground truth
    let paths = SearchPaths::in_dir(&sim_config.output_dir);
    let hypotheses = search::read_hypotheses(&paths.hypotheses)?;
    let pairs = corpus::read_pairs(&sim_config.output_dir.join("pairs.jsonl"))?;
    let votes = read_votes(&paths.votes)?;
    let pair_index: Vec<String> = pairs.iter().map(|p| p.pair_id.clone()).collect();
    let coverage = search::CoverageMatrix::from_votes(pair_index, &votes)?;
    let posterior = coverage.posterior_coverage()?;
    let expected = world.expected_coverage(&pairs)?;
    let recovery = sim::recovery_score(&hypotheses, &posterior, &expected, &world_config);
    let recovery_path = sim_config.output_dir.join("recovery.json");
    std::fs::write(&recovery_path, serde_json::to_string_pretty(&recovery)?)?;

    // swap-consistency regression over the judged pairs; degenerate when the
    // world has no order-dependent behavior
    let (client, provider) = build_judge(&sim_config)?;
    let templates = templates_for(&sim_config)?;
    let observations = search::swap_consistency_observations(
        &client,
        &templates,
        &provider,
        &pairs,
        &hypotheses,
        &world.records,
    )?;
    let position_bias = match stats::position_bias_regression(&observations) {
        Ok(fit) => Some(fit),
        Err(Error::DegenerateSeries | Error::TooFewRows { .. }) => None,
        Err(e) => return Err(e),
    };
    let analysis_path = sim_config.output_dir.join("analysis.json");
    let mut analysis = report::read_report(&analysis_path)?;
    analysis.position_bias = position_bias;
    report::write_report(&analysis, &analysis_path)?;

    println!(
        "simulate: recall {:.2} precision {:.2} coverage_error {:.3}",
        recovery.recall, recovery.precision, recovery.coverage_error
    );
    write_manifest(config, "simulate", &[], &[&recovery_path], started)
}

// --- argument parsing --------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "tacit",
    version,
    about = "Extract the implicit evaluative criteria latent in a judged corpus"
)]
pub struct Cli {
    /// Run configuration file (TOML or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Provider config JSON for a remote judge.
    #[arg(long, global = true)]
    provider: Option<PathBuf>,
    /// Scripted world JSON for offline judging.
    #[arg(long, global = true)]
    scripted_world: Option<PathBuf>,
    /// Resume from the last checkpoint instead of starting fresh.
    #[arg(long, global = true)]
    resume: bool,
    /// Override resume-conflict checks.
    #[arg(long, global = true)]
    force: bool,
    /// Corpus JSONL path (overrides the config file).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch venue review data into the corpus schema.
    Ingest {
        #[arg(long)]
        venue: String,
        #[arg(long)]
        base_url: String,
        #[arg(long, default_value_t = 100)]
        page_size: usize,
        /// Replay a recorded transcript instead of hitting the network.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Allow live HTTP fetching.
        #[arg(long)]
        live: bool,
        #[arg(long)]
        resume_token: Option<String>,
        /// Sidecar JSONL of precomputed extended abstracts.
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Build venue statistics and the gapped pairwise dataset.
    Pairs,
    /// Run the iterative hypothesis search.
    Search,
    /// Elicit the judge's data-free prior hypotheses.
    Priors,
    /// Compute prior frequencies of the searched hypotheses.
    Match,
    /// Annotate human review comments against the hypothesis set.
    Annotate,
    /// Compute the analysis bundle (optionally from a table fixture).
    Analyze {
        /// Hypothesis-table fixture JSON instead of pipeline artifacts.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Run the scripted-world pipeline end to end and print recovery.
    Simulate {
        #[arg(long, default_value_t = 500)]
        papers: usize,
        #[arg(long, default_value_t = 1)]
        venues: usize,
    },
    /// Render the analysis into CSV tables and optional SVG plots.
    Report {
        #[arg(long)]
        plots: bool,
    },
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(provider) = &cli.provider {
        config.provider_path = Some(provider.clone());
    }
    if let Some(world) = &cli.scripted_world {
        config.scripted_world = Some(world.clone());
    }
    if let Some(corpus) = &cli.corpus {
        config.corpus_path = corpus.clone();
    }
    Ok(config)
}

fn dispatch(cli: &Cli, config: &RunConfig) -> Result<()> {
    match &cli.command {
        Command::Ingest {
            venue,
            base_url,
            page_size,
            transcript,
            live,
            resume_token,
            sidecar,
        } => {
            let job = FetchJob {
                venue_id: venue.clone(),
                api_base_url: base_url.clone(),
                page_size: *page_size,
                resume_token: resume_token.clone(),
            };
            cmd_ingest(
                config,
                &job,
                transcript.as_deref(),
                *live,
                sidecar.as_deref(),
            )
        }
        Command::Pairs => cmd_pairs(config),
        Command::Search => cmd_search(config, cli.resume, cli.force),
        Command::Priors => cmd_priors(config, cli.resume),
        Command::Match => cmd_match(config),
        Command::Annotate => cmd_annotate(config),
        Command::Analyze { table } => cmd_analyze(config, table.as_deref()),
        Command::Simulate { papers, venues } => {
            cmd_simulate(config, *papers, *venues, cli.resume, cli.force)
        }
        Command::Report { plots } => cmd_report(config, *plots),
    }
}

/// CLI entry point; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let config = match effective_config(&cli) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let _lock = match DirLock::acquire(&config.output_dir) {
        Ok(lock) => lock,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match dispatch(&cli, &config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
