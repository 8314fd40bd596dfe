//! Thin client for fetching venue review data from a review-platform HTTP
//! API and converting exports into the corpus schema.
//!
//! All tests replay recorded fixture transcripts; live fetching sits behind
//! an explicit flag in the CLI.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ExtendedAbstract, PaperRecord};
use crate::error::{Error, Result};

/// One paginated fetch task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FetchJob {
    pub venue_id: String,
    pub api_base_url: String,
    pub page_size: usize,
    /// Serialized offset of the next unfetched page; a resumed job never
    /// re-emits a previously written record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resume_token: Option<String>,
}

/// Read-only HTTP surface, swappable for transcript replay.
pub trait FetchTransport {
    fn get(&self, url: &str) -> Result<String>;
}

/// Live HTTP transport.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self> {
        Ok(HttpTransport {
            client: reqwest::blocking::Client::builder()
                .timeout(std::time::Duration::from_secs(60))
                .build()
                .map_err(|e| Error::Transport {
                    request_key: String::new(),
                    message: e.to_string(),
                })?,
        })
    }
}

impl FetchTransport for HttpTransport {
    fn get(&self, url: &str) -> Result<String> {
        let transport_err = |message: String| Error::Transport {
            request_key: url.to_string(),
            message,
        };
        let response = self
            .client
            .get(url)
            .send()
            .map_err(|e| transport_err(e.to_string()))?;
        if !response.status().is_success() {
            return Err(transport_err(format!("HTTP {}", response.status())));
        }
        response.text().map_err(|e| transport_err(e.to_string()))
    }
}

/// Replays a recorded transcript: JSONL of {request_url, response_body}.
pub struct ReplayTransport {
    responses: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct TranscriptLine {
    request_url: String,
    response_body: String,
}

impl ReplayTransport {
    pub fn from_file(path: &Path) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut responses = BTreeMap::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptLine = serde_json::from_str(&line)?;
            responses.insert(entry.request_url, entry.response_body);
        }
        Ok(ReplayTransport { responses })
    }
}

impl FetchTransport for ReplayTransport {
    fn get(&self, url: &str) -> Result<String> {
        self.responses.get(url).cloned().ok_or(Error::Transport {
            request_key: url.to_string(),
            message: "no transcript entry for this url".to_string(),
        })
    }
}

// Remote page shape.
#[derive(Deserialize)]
struct SubmissionsPage {
    submissions: Vec<RemoteSubmission>,
    #[serde(default)]
    next_offset: Option<usize>,
}

#[derive(Deserialize)]
struct RemoteSubmission {
    paper_id: String,
    title: String,
    #[serde(default)]
    year: Option<i32>,
    #[serde(default)]
    reviews: Vec<RemoteReview>,
}

#[derive(Deserialize)]
struct RemoteReview {
    rating: String,
    #[serde(default)]
    confidence: Option<String>,
    #[serde(default)]
    text: Option<String>,
}

/// Leading numeric token of a platform score string ("6: marginally above"
/// parses to 6.0).
pub fn parse_score_string(raw: &str) -> Option<f64> {
    let trimmed = raw.trim();
    let end = trimmed
        .char_indices()
        .take_while(|(i, c)| c.is_ascii_digit() || *c == '.' || (*i == 0 && *c == '-'))
        .map(|(i, c)| i + c.len_utf8())
        .last()?;
    trimmed[..end].parse().ok()
}

/// A record the fetch could not convert.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FetchReject {
    pub paper_id: String,
    pub reason: String,
    /// Raw string preserved when a score failed to parse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

/// Fetch summary; `resume_token` is None once the venue is exhausted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FetchSummary {
    pub fetched: usize,
    pub rejected: usize,
    pub resume_token: Option<String>,
}

fn convert(
    venue_id: &str,
    submission: RemoteSubmission,
) -> std::result::Result<PaperRecord, FetchReject> {
    let mut scores = Vec::new();
    let mut confidences = Vec::new();
    let mut comments = Vec::new();
    for review in &submission.reviews {
        match parse_score_string(&review.rating) {
            Some(score) => scores.push(score),
            None => {
                return Err(FetchReject {
                    paper_id: submission.paper_id.clone(),
                    reason: "unparseable rating".to_string(),
                    raw: Some(review.rating.clone()),
                })
            }
        }
        if let Some(conf) = review.confidence.as_deref().and_then(parse_score_string) {
            confidences.push(conf);
        }
        comments.push(review.text.clone().unwrap_or_default());
    }
    if scores.is_empty() {
        return Err(FetchReject {
            paper_id: submission.paper_id.clone(),
            reason: "no scores".to_string(),
            raw: None,
        });
    }
    if confidences.len() != scores.len() {
        confidences.clear(); // partial confidences cannot stay positional
    }
    Ok(PaperRecord {
        paper_id: submission.paper_id,
        venue_id: venue_id.to_string(),
        year: submission.year.unwrap_or(0),
        title: submission.title,
        scores,
        reviewer_confidences: confidences,
        comments,
        extended_abstract: ExtendedAbstract::default(),
    })
}

/// Paginated fetch of one venue into corpus JSONL plus a reject report.
///
/// Appends to `out_path` (resume-friendly); an HTTP failure mid-run surfaces
/// as an error whose message carries the resume token.
pub fn fetch_venue(
    job: &FetchJob,
    transport: &dyn FetchTransport,
    out_path: &Path,
    reject_path: &Path,
) -> Result<FetchSummary> {
    let mut offset: usize = match &job.resume_token {
        Some(token) => token
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad resume token `{token}`")))?,
        None => 0,
    };
    let mut out = std::io::BufWriter::new(
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(out_path)?,
    );
    let mut rejects_file = std::io::BufWriter::new(
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(reject_path)?,
    );
    let mut fetched = 0;
    let mut rejected = 0;
    loop {
        let url = format!(
            "{}/submissions?venue={}&offset={}&limit={}",
            job.api_base_url, job.venue_id, offset, job.page_size
        );
        let body = transport.get(&url).map_err(|e| match e {
            Error::Transport {
                request_key,
                message,
            } => Error::Transport {
                request_key,
                message: format!("{message} (resume_token={offset})"),
            },
            other => other,
        })?;
        let page: SubmissionsPage = serde_json::from_str(&body).map_err(|e| Error::Transport {
            request_key: url.clone(),
            message: format!("schema drift: {e}"),
        })?;
        for submission in page.submissions {
            match convert(&job.venue_id, submission) {
                Ok(record) => {
                    serde_json::to_writer(&mut out, &record)?;
                    out.write_all(b"\n")?;
                    fetched += 1;
                }
                Err(reject) => {
                    serde_json::to_writer(&mut rejects_file, &reject)?;
                    rejects_file.write_all(b"\n")?;
                    rejected += 1;
                }
            }
        }
        out.flush()?;
        rejects_file.flush()?;
        match page.next_offset {
            Some(next) => offset = next,
            None => break,
        }
    }
    Ok(FetchSummary {
        fetched,
        rejected,
        resume_token: None,
    })
}

/// Sidecar line: precomputed extended abstract for one paper.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SidecarEntry {
    pub paper_id: String,
    pub extended_abstract: ExtendedAbstract,
}

/// Merge outcome.
#[derive(Debug, Default)]
pub struct MergeSummary {
    pub filled: usize,
    /// Sidecar ids with no corpus record.
    pub unmatched: Vec<String>,
}

fn merge_section(existing: &mut String, incoming: &str, force: bool) {
    if (existing.is_empty() || force) && !incoming.is_empty() {
        *existing = incoming.to_string();
    }
}

/// Fill extended abstracts from a sidecar file. Existing non-empty sections
/// are never overwritten unless `force` is set.
pub fn merge_sidecar(
    records: &mut [PaperRecord],
    sidecar_path: &Path,
    force: bool,
) -> Result<MergeSummary> {
    let reader = BufReader::new(std::fs::File::open(sidecar_path)?);
    let mut seen: HashSet<String> = HashSet::new();
    let mut by_id: BTreeMap<String, ExtendedAbstract> = BTreeMap::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: SidecarEntry = serde_json::from_str(&line)?;
        if !seen.insert(entry.paper_id.clone()) {
            return Err(Error::DuplicateSidecarId(entry.paper_id));
        }
        by_id.insert(entry.paper_id, entry.extended_abstract);
    }
    let record_ids: HashSet<&str> = records.iter().map(|r| r.paper_id.as_str()).collect();
    let unmatched: Vec<String> = by_id
        .keys()
        .filter(|id| !record_ids.contains(id.as_str()))
        .cloned()
        .collect();
    let mut filled = 0;
    for record in records.iter_mut() {
        if let Some(incoming) = by_id.get(&record.paper_id) {
            let ea = &mut record.extended_abstract;
            merge_section(&mut ea.context, &incoming.context, force);
            merge_section(&mut ea.key_idea, &incoming.key_idea, force);
            merge_section(&mut ea.method_details, &incoming.method_details, force);
            merge_section(
                &mut ea.experiments_results,
                &incoming.experiments_results,
                force,
            );
            merge_section(&mut ea.impact, &incoming.impact, force);
            if ea.raw_abstract.is_none() || force {
                ea.raw_abstract = incoming.raw_abstract.clone().or(ea.raw_abstract.take());
            }
            filled += 1;
        }
    }
    Ok(MergeSummary { filled, unmatched })
}
