//! Offline venue ingestion: replay a recorded API transcript into the corpus
//! schema, then fill extended abstracts from a sidecar file.
//!
//! Run with: cargo run --example fetch_venue -p tacit

use tacit::corpus::{load_corpus, CORPUS_SCHEMA_VERSION};
use tacit::ingest::{fetch_venue, merge_sidecar, FetchJob, ReplayTransport};

fn main() -> tacit::Result<()> {
    let dir = tempfile::tempdir()?;

    // a two-page transcript as the ingest tests record them
    let transcript = dir.path().join("transcript.jsonl");
    let page1 = serde_json::json!({
        "submissions": [
            {"paper_id": "sub-01", "title": "First submission", "year": 2024,
             "reviews": [
                {"rating": "6: marginally above the acceptance threshold", "confidence": "4", "text": "Solid work."},
                {"rating": "7", "confidence": "3", "text": "Nice results."}
             ]},
            {"paper_id": "sub-02", "title": "Unscorable submission",
             "reviews": [{"rating": "withdrawn"}]}
        ],
        "next_offset": 2
    });
    let page2 = serde_json::json!({
        "submissions": [
            {"paper_id": "sub-03", "title": "Third submission", "year": 2024,
             "reviews": [{"rating": "3: clear reject", "confidence": "5", "text": "Major flaws."}]}
        ],
        "next_offset": null
    });
    std::fs::write(
        &transcript,
        [
            serde_json::json!({"request_url": "https://reviews.example/api/submissions?venue=demo&offset=0&limit=2", "response_body": page1.to_string()}),
            serde_json::json!({"request_url": "https://reviews.example/api/submissions?venue=demo&offset=2&limit=2", "response_body": page2.to_string()}),
        ]
        .map(|line| line.to_string())
        .join("\n"),
    )?;

    let job = FetchJob {
        venue_id: "demo".to_string(),
        api_base_url: "https://reviews.example/api".to_string(),
        page_size: 2,
        resume_token: None,
    };
    let transport = ReplayTransport::from_file(&transcript)?;
    let corpus_path = dir.path().join("corpus.jsonl");
    let rejects_path = dir.path().join("rejects.jsonl");
    let summary = fetch_venue(&job, &transport, &corpus_path, &rejects_path)?;
    println!(
        "fetched {} records, rejected {}",
        summary.fetched, summary.rejected
    );

    // sidecar carries the precomputed extended abstracts
    let sidecar = dir.path().join("sidecar.jsonl");
    std::fs::write(
        &sidecar,
        serde_json::json!({"paper_id": "sub-01", "extended_abstract": {
            "context": "Context of the first submission.",
            "key_idea": "One idea.",
            "method_details": "Some methods.",
            "experiments_results": "Some results.",
            "impact": "Some impact."
        }})
        .to_string(),
    )?;
    let mut records = load_corpus(&corpus_path, CORPUS_SCHEMA_VERSION)?.records;
    let merged = merge_sidecar(&mut records, &sidecar, false)?;
    println!(
        "sidecar filled {} record(s); judgeable now: {}",
        merged.filled,
        records
            .iter()
            .filter(|r| r.extended_abstract.is_complete())
            .count()
    );

    for record in &records {
        println!(
            "  {}: scores {:?}, abstract complete: {}",
            record.paper_id,
            record.scores,
            record.extended_abstract.is_complete()
        );
    }
    Ok(())
}
