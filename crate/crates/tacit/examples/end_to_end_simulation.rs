//! The whole discovery loop on a synthetic world with planted criteria.
//!
//! Generates a corpus whose scores are driven by three latent evaluation
//! criteria, runs the iterative hypothesis search against the scripted
//! judge, and checks the found hypotheses against the planted ground truth.
//!
//! Run with: cargo run --example end_to_end_simulation -p tacit

use std::sync::Arc;

use tacit::corpus::{build_pairs, sample_pairs};
use tacit::judge::template::TemplateSet;
use tacit::judge::{JudgeClient, ProviderConfig};
use tacit::search::{run_search, SearchConfig};
use tacit::sim::{generate_world, recovery_score, ScriptedJudge, ScriptedJudgeConfig};

fn main() -> tacit::Result<()> {
    let config = ScriptedJudgeConfig::default_world(42);
    println!("planted criteria:");
    for criterion in &config.criteria {
        println!(
            "  {:<20} weight {:.2}  prevalence {:.2}  explicitness {:.2}",
            criterion.crit_id, criterion.weight, criterion.prevalence, criterion.explicitness
        );
    }

    let world = generate_world(&config, 500, 1)?;
    let pairs = build_pairs(&world.records, "sim-venue-0", 1.0)?;
    let sampled = sample_pairs(&pairs, 800, 42)?;
    println!(
        "\n{} qualifying pairs, judging a sample of {}",
        pairs.len(),
        sampled.len()
    );

    let judge = ScriptedJudge::new(config.clone())?;
    let client = JudgeClient::new(Arc::new(judge));
    let templates = TemplateSet::builtin();
    let provider = ProviderConfig::scripted();
    let state_dir = tempfile::tempdir()?;
    let outcome = run_search(
        &sampled,
        &world.records,
        &client,
        &templates,
        &provider,
        &SearchConfig {
            seed: 42,
            ..Default::default()
        },
        state_dir.path(),
        false,
        false,
    )?;

    println!("\nsearch rounds:");
    for report in &outcome.reports {
        println!(
            "  round {}: unexplained {:.1}% -> {:.1}%, mean margin {:.1}, consistency {:.2}",
            report.round,
            100.0 * report.unexplained_fraction_before,
            100.0 * report.unexplained_fraction_after,
            report.mean_confidence_margin,
            report.mean_consistency
        );
    }

    let posterior = outcome.coverage.posterior_coverage()?;
    println!("\nfound hypotheses (round, coverage):");
    for hyp in &outcome.hypotheses {
        println!(
            "  r{} {:.3}  {}",
            hyp.round, posterior[&hyp.hyp_id], hyp.text
        );
    }

    let expected = world.expected_coverage(&sampled)?;
    let recovery = recovery_score(&outcome.hypotheses, &posterior, &expected, &config);
    println!(
        "\nrecovery: recall {:.2}, precision {:.2}, coverage error {:.4}",
        recovery.recall, recovery.precision, recovery.coverage_error
    );
    Ok(())
}
