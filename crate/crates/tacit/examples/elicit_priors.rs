//! Data-free prior elicitation and prior-frequency windows.
//!
//! Asks the judge for hypotheses with no data shown (250 simulations of
//! 4 rounds x 5), then measures how often each searched hypothesis appears
//! within the 20-hypothesis windows.
//!
//! Run with: cargo run --example elicit_priors -p tacit

use std::sync::Arc;

use tacit::judge::template::TemplateSet;
use tacit::judge::{JudgeClient, ProviderConfig};
use tacit::prior::{elicit_priors, prior_frequency, JudgeMatcher, PriorConfig, WindowMode};
use tacit::search::{Hypothesis, HypothesisOrigin};
use tacit::sim::{ScriptedJudge, ScriptedJudgeConfig};

fn main() -> tacit::Result<()> {
    let world = ScriptedJudgeConfig::default_world(42);
    let judge = ScriptedJudge::new(world.clone())?;
    let client = JudgeClient::new(Arc::new(judge));
    let templates = TemplateSet::builtin();
    let provider = ProviderConfig::scripted();

    let outcome = elicit_priors(
        &client,
        &templates,
        &provider,
        &PriorConfig::default(),
        None,
    )?;
    println!(
        "elicited {} prior samples across {} simulations ({} excluded)",
        outcome.samples.len(),
        PriorConfig::default().n_sims,
        outcome.excluded_sims.len()
    );

    // how the data-free judge distributes its attention
    let mut counts = std::collections::BTreeMap::new();
    for sample in &outcome.samples {
        if let Some(criterion) = world.map_hypothesis(&sample.text) {
            *counts.entry(criterion.crit_id.clone()).or_insert(0usize) += 1;
        }
    }
    println!("\ndata-free attention per criterion:");
    for (crit_id, count) in &counts {
        println!(
            "  {:<20} {:.3}",
            crit_id,
            *count as f64 / outcome.samples.len() as f64
        );
    }

    // prior frequency of each canonical hypothesis, one window per simulation
    let hypotheses: Vec<Hypothesis> = world
        .criteria
        .iter()
        .map(|c| Hypothesis::new(c.canonical_text(), 1, HypothesisOrigin::PosteriorSearch))
        .collect();
    let matcher = JudgeMatcher {
        client: &client,
        templates: &templates,
        provider: &provider,
    };
    let frequencies = prior_frequency(&hypotheses, &outcome.samples, &matcher, WindowMode::Binary)?;
    println!(
        "\nprior frequency over {} windows:",
        frequencies[0].n_windows
    );
    for (hyp, freq) in hypotheses.iter().zip(&frequencies) {
        println!("  {:.3}  {}", freq.frequency, hyp.text);
    }
    Ok(())
}
