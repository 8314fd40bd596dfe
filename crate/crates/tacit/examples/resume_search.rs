//! Checkpointed search: interrupt at a round boundary, resume, and end up
//! with byte-identical state.
//!
//! Run with: cargo run --example resume_search -p tacit

use std::sync::Arc;

use tacit::corpus::{build_pairs, sample_pairs};
use tacit::judge::template::TemplateSet;
use tacit::judge::{JudgeClient, ProviderConfig};
use tacit::search::{run_search, SearchConfig};
use tacit::sim::{generate_world, ScriptedJudge, ScriptedJudgeConfig};

fn main() -> tacit::Result<()> {
    let config = ScriptedJudgeConfig::default_world(42);
    let world = generate_world(&config, 300, 1)?;
    let pairs = build_pairs(&world.records, "sim-venue-0", 1.0)?;
    let sampled = sample_pairs(&pairs, 500, 42)?;
    let judge = ScriptedJudge::new(config)?;
    let client = JudgeClient::new(Arc::new(judge));
    let templates = TemplateSet::builtin();
    let provider = ProviderConfig::scripted();
    let search_config = SearchConfig {
        seed: 42,
        ..Default::default()
    };

    // uninterrupted reference run
    let full_dir = tempfile::tempdir()?;
    let full = run_search(
        &sampled,
        &world.records,
        &client,
        &templates,
        &provider,
        &search_config,
        full_dir.path(),
        false,
        false,
    )?;
    println!("uninterrupted run: {} rounds", full.reports.len());

    // "crash" after round 1 by capping max_rounds, then resume
    let resumable_dir = tempfile::tempdir()?;
    let mut capped = search_config.clone();
    capped.max_rounds = 1;
    run_search(
        &sampled,
        &world.records,
        &client,
        &templates,
        &provider,
        &capped,
        resumable_dir.path(),
        false,
        false,
    )?;
    println!("interrupted after round 1; checkpoint on disk");

    let resumed = run_search(
        &sampled,
        &world.records,
        &client,
        &templates,
        &provider,
        &search_config,
        resumable_dir.path(),
        true,
        false,
    )?;
    println!("resumed run: {} rounds total", resumed.reports.len());

    for artifact in ["votes.jsonl", "hypotheses.json", "rounds.json"] {
        let a = std::fs::read(full_dir.path().join(artifact))?;
        let b = std::fs::read(resumable_dir.path().join(artifact))?;
        println!(
            "{artifact}: {} ({} bytes)",
            if a == b { "identical" } else { "DIFFERENT" },
            a.len()
        );
    }
    Ok(())
}
