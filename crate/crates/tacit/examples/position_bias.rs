//! Position-bias measurement via swap-consistency regression.
//!
//! Judges every pair under both presentation orders; in a world with
//! position bias enabled, small-margin judgments flip depending on which
//! paper comes first, and a regression of swap consistency on score gap
//! recovers a positive slope.
//!
//! Run with: cargo run --example position_bias -p tacit

use std::sync::Arc;

use tacit::corpus::{build_pairs, sample_pairs, PaperPair};
use tacit::judge::template::TemplateSet;
use tacit::judge::{JudgeClient, ProviderConfig};
use tacit::search::{swap_consistency_observations, Hypothesis, HypothesisOrigin};
use tacit::sim::{generate_world, ScriptedJudge, ScriptedJudgeConfig, SyntheticWorld};
use tacit::stats::position_bias_regression;

fn swap_consistency(
    world: &SyntheticWorld,
    client: &JudgeClient,
    pairs: &[PaperPair],
) -> tacit::Result<Vec<(f64, f64)>> {
    let hypotheses: Vec<Hypothesis> = world
        .config
        .criteria
        .iter()
        .map(|c| Hypothesis::new(c.canonical_text(), 1, HypothesisOrigin::PosteriorSearch))
        .collect();
    swap_consistency_observations(
        client,
        &TemplateSet::builtin(),
        &ProviderConfig::scripted(),
        pairs,
        &hypotheses,
        &world.records,
    )
}

fn run(label: &str, position_bias: f64, order_noise: f64) -> tacit::Result<()> {
    let mut config = ScriptedJudgeConfig::default_world(8);
    config.position_bias = position_bias;
    config.order_noise = order_noise;
    let world = generate_world(&config, 400, 1)?;
    let pairs = build_pairs(&world.records, "sim-venue-0", 1.0)?;
    let sampled = sample_pairs(&pairs, 2000, 8)?;
    let judge = ScriptedJudge::new(config)?;
    let client = JudgeClient::new(Arc::new(judge));
    let observations = swap_consistency(&world, &client, &sampled)?;
    let fit = position_bias_regression(&observations)?;
    let (lo, hi) = fit.conf_intervals_95[1];
    println!(
        "{label}: const {:.3}, gap slope {:+.4} (p = {:.2e}, 95% CI [{lo:+.4}, {hi:+.4}]), R^2 {:.3}",
        fit.coefficients[0], fit.coefficients[1], fit.p_values[1], fit.r_squared
    );
    Ok(())
}

fn main() -> tacit::Result<()> {
    run("biased world  ", 0.35, 0.0)?;
    run("unbiased world", 0.0, 0.05)?;
    Ok(())
}
