//! Mapping human review comments onto the hypothesis set as {-1, 0, 1}
//! attitude vectors, by judge prompt and by dictionary, plus mention
//! statistics and inter-method agreement.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::PaperRecord;
use crate::error::{Error, Result};
use crate::judge::template::{bindings, render_prompt, TemplateSet};
use crate::judge::{JudgeClient, PresentationOrder, ProviderConfig, TemplateId};
use crate::search::Hypothesis;

/// Per-comment attitude vector, one entry per hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationVector {
    pub comment_id: String,
    pub paper_id: String,
    pub venue_id: String,
    /// Score of the review this comment belongs to; the paper's mean score
    /// when per-review linkage is missing (then `score_imputed` is set).
    pub reviewer_score: Option<f64>,
    pub values: Vec<i8>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub score_imputed: bool,
}

/// Per-hypothesis mention statistics over annotated comments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MentionStats {
    pub hyp_id: String,
    /// Fraction of comments with a nonzero value.
    pub mention_rate: f64,
    pub praise_rate: f64,
    pub criticism_rate: f64,
}

/// Few-shot examples rendered into the annotation prompt.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExampleSet {
    pub examples: Vec<AnnotationExample>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationExample {
    pub feedback: String,
    pub scores: Vec<i8>,
}

impl ExampleSet {
    pub fn empty() -> Self {
        ExampleSet::default()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Fixtures shipped with the crate for the 20-hypothesis protocol.
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("../data/fixtures/annotate_examples.json"))
            .expect("bundled annotation examples parse")
    }

    pub fn render(&self) -> String {
        if self.examples.is_empty() {
            return String::new();
        }
        let mut out = String::from("Examples:\n");
        for example in &self.examples {
            out.push_str(&format!(
                "Feedback: {}\nAnswer: {{\"scores\": {}}}\n",
                example.feedback,
                serde_json::to_string(&example.scores).unwrap(),
            ));
        }
        out
    }
}

/// Pull the first `{"scores": [...]}` object out of a response.
fn parse_scores(raw: &str, expected_len: usize) -> Option<Vec<i8>> {
    #[derive(Deserialize)]
    struct Scores {
        scores: Vec<i8>,
    }
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    let parsed: Scores = serde_json::from_str(&raw[start..=end]).ok()?;
    if parsed.scores.len() == expected_len && parsed.scores.iter().all(|v| (-1..=1).contains(v)) {
        Some(parsed.scores)
    } else {
        None
    }
}

/// Annotate one comment against the hypothesis set via the judge.
///
/// The rendered prompt carries only the examples, hypothesis list, and the
/// comment itself; reviewer scores are attached afterwards and never appear
/// in the prompt. Malformed output is retried once, then an error.
#[allow(clippy::too_many_arguments)]
pub fn annotate_comment(
    client: &JudgeClient,
    templates: &TemplateSet,
    provider: &ProviderConfig,
    comment_id: &str,
    comment: &str,
    hypotheses: &[Hypothesis],
    examples: &ExampleSet,
) -> Result<Vec<i8>> {
    if comment.is_empty() {
        return Err(Error::EmptyInput("comment text"));
    }
    let texts: Vec<&str> = hypotheses.iter().map(|h| h.text.as_str()).collect();
    let rendered = render_prompt(
        &templates.annotate,
        &bindings([
            ("examples", examples.render()),
            ("hypothesis_list", serde_json::to_string(&texts)?),
            ("feedback_text", comment.to_string()),
        ]),
    )?;
    for attempt in 0..2u64 {
        let request = provider.request(
            TemplateId::Annotate,
            rendered.clone(),
            attempt,
            PresentationOrder::HighFirst,
        );
        let response = client.submit(&request)?;
        if let Some(scores) = parse_scores(&response.raw_text, hypotheses.len()) {
            return Ok(scores);
        }
    }
    Err(Error::AnnotationMalformed(comment_id.to_string()))
}

/// Outcome of annotating a whole corpus.
#[derive(Debug, Default)]
pub struct AnnotateOutcome {
    pub vectors: Vec<AnnotationVector>,
    /// Comments whose annotation stayed malformed; excluded from stats.
    pub unannotated: Vec<String>,
}

/// Annotate every review comment in the corpus, pairing each with its own
/// reviewer's score where the comment/score lists line up.
pub fn annotate_corpus(
    client: &JudgeClient,
    templates: &TemplateSet,
    provider: &ProviderConfig,
    records: &[PaperRecord],
    hypotheses: &[Hypothesis],
    examples: &ExampleSet,
) -> Result<AnnotateOutcome> {
    let mut outcome = AnnotateOutcome::default();
    for record in records {
        let linked = record.comments.len() == record.scores.len();
        for (idx, comment) in record.comments.iter().enumerate() {
            if comment.is_empty() {
                continue;
            }
            let comment_id = format!("{}#r{idx}", record.paper_id);
            match annotate_comment(
                client,
                templates,
                provider,
                &comment_id,
                comment,
                hypotheses,
                examples,
            ) {
                Ok(values) => {
                    let (reviewer_score, score_imputed) = if linked {
                        (Some(record.scores[idx]), false)
                    } else {
                        (record.mean_score(), true)
                    };
                    outcome.vectors.push(AnnotationVector {
                        comment_id,
                        paper_id: record.paper_id.clone(),
                        venue_id: record.venue_id.clone(),
                        reviewer_score,
                        values,
                        score_imputed,
                    });
                }
                Err(Error::AnnotationMalformed(id)) => outcome.unannotated.push(id),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(outcome)
}

/// Mention-only dictionary annotation: 1 iff any keyword for the hypothesis
/// occurs case-insensitively in the comment.
pub fn dictionary_annotate(
    comment: &str,
    dictionary: &BTreeMap<String, Vec<String>>,
    hyp_order: &[String],
) -> Vec<u8> {
    let lower = comment.to_lowercase();
    hyp_order
        .iter()
        .map(|hyp_id| {
            let hit = dictionary
                .get(hyp_id)
                .is_some_and(|words| words.iter().any(|w| lower.contains(&w.to_lowercase())));
            u8::from(hit)
        })
        .collect()
}

/// Agreement mode between two label sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementMode {
    /// Fraction of positions with identical labels.
    Overlap,
    /// Pearson correlation of the numeric labels.
    Pearson,
}

pub fn agreement(a: &[i8], b: &[i8], mode: AgreementMode) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    match mode {
        AgreementMode::Overlap => {
            if a.is_empty() {
                return Err(Error::EmptyInput("label sequences"));
            }
            let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
            Ok(same as f64 / a.len() as f64)
        }
        AgreementMode::Pearson => {
            let x: Vec<f64> = a.iter().map(|v| *v as f64).collect();
            let y: Vec<f64> = b.iter().map(|v| *v as f64).collect();
            crate::stats::pearson(&x, &y)
        }
    }
}

/// Per-hypothesis mention/praise/criticism rates over annotated comments.
pub fn mention_stats(
    vectors: &[AnnotationVector],
    hyp_ids: &[String],
) -> Result<Vec<MentionStats>> {
    if vectors.is_empty() {
        return Err(Error::EmptyInput("annotation vectors"));
    }
    for v in vectors {
        if v.values.len() != hyp_ids.len() {
            return Err(Error::LengthMismatch(v.values.len(), hyp_ids.len()));
        }
    }
    let n = vectors.len() as f64;
    Ok(hyp_ids
        .iter()
        .enumerate()
        .map(|(idx, hyp_id)| {
            let praise = vectors.iter().filter(|v| v.values[idx] == 1).count() as f64 / n;
            let criticism = vectors.iter().filter(|v| v.values[idx] == -1).count() as f64 / n;
            MentionStats {
                hyp_id: hyp_id.clone(),
                mention_rate: praise + criticism,
                praise_rate: praise,
                criticism_rate: criticism,
            }
        })
        .collect())
}

pub fn write_annotations(vectors: &[AnnotationVector], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for vector in vectors {
        serde_json::to_writer(&mut out, vector)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationVector>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut vectors = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        vectors.push(serde_json::from_str(&line)?);
    }
    Ok(vectors)
}

/// Write the mention report CSV.
pub fn write_mention_csv(stats: &[MentionStats], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["hyp_id", "mention_rate", "praise_rate", "criticism_rate"])?;
    for s in stats {
        writer.write_record([
            s.hyp_id.as_str(),
            &s.mention_rate.to_string(),
            &s.praise_rate.to_string(),
            &s.criticism_rate.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Load a dictionary file: JSON map hyp_id -> keyword list.
pub fn load_dictionary(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::Provider;
    use crate::search::HypothesisOrigin;
    use proptest::prelude::*;
    use std::sync::{Arc, Mutex};

    fn hyp(text: &str) -> Hypothesis {
        Hypothesis::new(text.to_string(), 1, HypothesisOrigin::PosteriorSearch)
    }

    fn vector(values: Vec<i8>) -> AnnotationVector {
        AnnotationVector {
            comment_id: "c".into(),
            paper_id: "p".into(),
            venue_id: "v".into(),
            reviewer_score: Some(5.0),
            values,
            score_imputed: false,
        }
    }

    #[test]
    fn agreement_examples() {
        assert_eq!(
            agreement(&[1, 0, -1], &[1, 0, -1], AgreementMode::Overlap).unwrap(),
            1.0
        );
        let overlap = agreement(&[1, 0, -1], &[1, 0, 1], AgreementMode::Overlap).unwrap();
        assert!((overlap - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            agreement(&[1, 0], &[1], AgreementMode::Overlap),
            Err(Error::LengthMismatch(2, 1))
        ));
    }

    #[test]
    fn mention_stats_zero_and_tally_oracle() {
        use rand::{Rng, SeedableRng};
        let hyp_ids: Vec<String> = (0..5).map(|i| format!("h{i}")).collect();
        let zero = vec![vector(vec![0; 5])];
        for s in mention_stats(&zero, &hyp_ids).unwrap() {
            assert_eq!(s.mention_rate, 0.0);
        }
        assert!(matches!(
            mention_stats(&[], &hyp_ids),
            Err(Error::EmptyInput(_))
        ));

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let vectors: Vec<AnnotationVector> = (0..40)
            .map(|_| vector((0..5).map(|_| rng.gen_range(-1i8..=1)).collect()))
            .collect();
        let stats = mention_stats(&vectors, &hyp_ids).unwrap();
        for (idx, s) in stats.iter().enumerate() {
            let praise = vectors.iter().filter(|v| v.values[idx] == 1).count() as f64 / 40.0;
            let crit = vectors.iter().filter(|v| v.values[idx] == -1).count() as f64 / 40.0;
            assert_eq!(s.praise_rate, praise);
            assert_eq!(s.criticism_rate, crit);
            assert_eq!(s.mention_rate, praise + crit);
            assert!((s.praise_rate + s.criticism_rate - s.mention_rate).abs() < 1e-15);
        }
    }

    struct CaptureProvider {
        prompts: Mutex<Vec<String>>,
        response: String,
    }

    impl Provider for CaptureProvider {
        fn complete(&self, request: &crate::judge::JudgeRequest) -> Result<String> {
            self.prompts
                .lock()
                .unwrap()
                .push(request.rendered_prompt.clone());
            Ok(self.response.clone())
        }
    }

    #[test]
    fn annotation_is_score_blind_and_parses() {
        let provider = Arc::new(CaptureProvider {
            prompts: Mutex::new(vec![]),
            response: r#"{"scores": [1, 0, -1]}"#.to_string(),
        });
        let client = JudgeClient::new(provider.clone());
        let templates = TemplateSet::builtin();
        let config = ProviderConfig::scripted();
        let hypotheses = vec![hyp("A"), hyp("B"), hyp("C")];
        // a reviewer score value that could only leak from the record
        let mut record = crate::corpus::PaperRecord {
            paper_id: "p".into(),
            venue_id: "v".into(),
            year: 2024,
            title: "t".into(),
            scores: vec![4.73125],
            reviewer_confidences: vec![],
            comments: vec!["The proofs are sloppy and incomplete.".into()],
            extended_abstract: Default::default(),
        };
        record.extended_abstract.context = "c".into();
        let outcome = annotate_corpus(
            &client,
            &templates,
            &config,
            &[record],
            &hypotheses,
            &ExampleSet::empty(),
        )
        .unwrap();
        assert_eq!(outcome.vectors.len(), 1);
        assert_eq!(outcome.vectors[0].values, vec![1, 0, -1]);
        // the score is attached after annotation...
        assert_eq!(outcome.vectors[0].reviewer_score, Some(4.73125));
        // ...and never appears in any rendered prompt
        let prompts = provider.prompts.lock().unwrap();
        assert_eq!(prompts.len(), 1);
        assert!(!prompts[0].contains("4.73125"));
        assert!(prompts[0].contains("The proofs are sloppy and incomplete."));
    }

    #[test]
    fn malformed_annotation_retries_once_then_errors() {
        struct Bad;
        impl Provider for Bad {
            fn complete(&self, _r: &crate::judge::JudgeRequest) -> Result<String> {
                Ok("no scores here".to_string())
            }
        }
        let client = JudgeClient::new(Arc::new(Bad));
        let templates = TemplateSet::builtin();
        let config = ProviderConfig::scripted();
        match annotate_comment(
            &client,
            &templates,
            &config,
            "c9",
            "text",
            &[hyp("A")],
            &ExampleSet::empty(),
        ) {
            Err(Error::AnnotationMalformed(id)) => assert_eq!(id, "c9"),
            other => panic!("expected malformed, got {other:?}"),
        }
    }

    #[test]
    fn wrong_length_scores_are_malformed() {
        assert!(parse_scores(r#"{"scores": [1, 0]}"#, 3).is_none());
        assert!(parse_scores(r#"{"scores": [2, 0, 0]}"#, 3).is_none());
        assert_eq!(
            parse_scores(r#"prefix {"scores": [-1, 0, 1]} suffix"#, 3),
            Some(vec![-1, 0, 1])
        );
    }

    proptest! {
        // a dictionary hit always corresponds to a literal keyword substring
        #[test]
        fn dictionary_hits_have_substring_witnesses(
            keyword in "[a-z]{3,8}",
            filler in "[ a-zA-Z]{0,30}",
            inject in proptest::bool::ANY,
        ) {
            let hyp_ids = vec!["h0".to_string()];
            let dictionary = BTreeMap::from([("h0".to_string(), vec![keyword.clone()])]);
            let comment = if inject {
                format!("{filler} {} {filler}", keyword.to_uppercase())
            } else {
                filler.clone()
            };
            let values = dictionary_annotate(&comment, &dictionary, &hyp_ids);
            let hit = values[0] == 1;
            prop_assert_eq!(hit, comment.to_lowercase().contains(&keyword));
        }
    }
}
