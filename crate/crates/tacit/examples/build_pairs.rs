//! Corpus ingestion and pairwise dataset construction.
//!
//! Builds a small corpus by hand, computes venue score statistics, and emits
//! every pair whose mean-score gap exceeds one venue standard deviation.
//!
//! Run with: cargo run --example build_pairs -p tacit

use tacit::corpus::{
    build_pairs, load_corpus, sample_pairs, venue_stats, write_corpus, ExtendedAbstract,
    PaperRecord, CORPUS_SCHEMA_VERSION,
};

fn paper(id: &str, scores: &[f64], confidences: &[f64]) -> PaperRecord {
    PaperRecord {
        paper_id: id.to_string(),
        venue_id: "demo-conf-2024".to_string(),
        year: 2024,
        title: format!("Submission {id}"),
        scores: scores.to_vec(),
        reviewer_confidences: confidences.to_vec(),
        comments: vec![],
        extended_abstract: ExtendedAbstract {
            context: format!("Context for {id}."),
            key_idea: "A demonstration record.".to_string(),
            method_details: "Methods omitted.".to_string(),
            experiments_results: "Results omitted.".to_string(),
            impact: "Impact omitted.".to_string(),
            raw_abstract: None,
        },
    }
}

fn main() -> tacit::Result<()> {
    let records = vec![
        paper("p1", &[3.0, 4.0, 3.5], &[4.0, 3.0, 5.0]),
        paper("p2", &[6.0, 6.5, 5.5], &[4.0, 4.0, 3.0]),
        paper("p3", &[8.0, 7.5, 8.5], &[5.0, 4.0, 4.0]),
        paper("p4", &[5.0, 5.0, 5.0], &[2.0, 3.0, 3.0]),
        paper("p5", &[7.0, 6.0, 6.5], &[4.0, 5.0, 4.0]),
    ];

    // round-trip through the JSONL schema
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&records, &path)?;
    let loaded = load_corpus(&path, CORPUS_SCHEMA_VERSION)?;
    println!(
        "loaded {} records ({} rejected)",
        loaded.records.len(),
        loaded.rejects.len()
    );

    let stats = venue_stats(&loaded.records, "demo-conf-2024")?;
    println!(
        "venue stats: mean {:.2}, std {:.2}, within-paper std {:.2}, median confidence {:?}",
        stats.mean_score,
        stats.std_score,
        stats.within_paper_std_mean,
        stats.median_reviewer_confidence
    );

    let pairs = build_pairs(&loaded.records, "demo-conf-2024", 1.0)?;
    println!(
        "\n{} pairs with gap > 1 sigma ({:.2}):",
        pairs.len(),
        stats.std_score
    );
    for pair in &pairs {
        println!("  {} < {}  (gap {:.2})", pair.low, pair.high, pair.gap);
    }

    let sampled = sample_pairs(&pairs, 2.min(pairs.len()), 7)?;
    println!("\nseeded sample of {}:", sampled.len());
    for pair in &sampled {
        println!("  {}", pair.pair_id);
    }
    Ok(())
}
