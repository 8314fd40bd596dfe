//! Belief-shift analysis over the bundled 20-hypothesis reference table.
//!
//! Ranks hypotheses by posterior-minus-prior shift, correlates the columns,
//! and computes the attention shares of the top gainers and losers.
//!
//! Run with: cargo run --example analyze_reference_table -p tacit

use tacit::report::{build_table, shares_from_table, FixtureTable, TableInputs};
use tacit::stats::TieBreak;

fn main() -> tacit::Result<()> {
    let fixture = FixtureTable::builtin();
    let (hypotheses, prior, posterior, mention) = fixture.inputs();
    let (table, correlations) = build_table(
        &TableInputs {
            hypotheses: &hypotheses,
            prior: &prior,
            posterior: &posterior,
            mention: &mention,
        },
        TieBreak::PosteriorDesc,
    )?;

    println!("rank  delta  prior  post.  mention  hypothesis");
    for row in &table {
        let short: String = row.text.chars().skip(37).take(60).collect();
        println!(
            "{:>4}  {:+.2}  {:.2}   {:.2}   {:.2}     ...{short}",
            row.shift_rank, row.delta, row.prior, row.posterior, row.mention
        );
    }

    println!(
        "\npearson(prior, mention)     = {:+.3}",
        correlations.prior_mention.unwrap()
    );
    println!(
        "pearson(posterior, mention) = {:+.3}",
        correlations.posterior_mention.unwrap()
    );

    let shares = shares_from_table(&table, 5)?;
    println!("\ntop-5 gainers: posterior {:.0}% of attention, but only {:.0}% of prior and {:.0}% of human mentions",
        100.0 * shares.gain_posterior_mean,
        100.0 * shares.gain_prior_mean,
        100.0 * shares.gain_mention_mean);
    println!(
        "top-5 losers:  posterior {:.0}%, versus {:.0}% of prior and {:.0}% of human mentions",
        100.0 * shares.loss_posterior_mean,
        100.0 * shares.loss_prior_mean,
        100.0 * shares.loss_mention_mean
    );
    Ok(())
}
