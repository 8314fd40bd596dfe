//! Mapping human review comments onto the hypothesis set.
//!
//! Annotates synthetic reviewer comments via the judge and via the keyword
//! dictionary, then compares the two routes.
//!
//! Run with: cargo run --example annotate_comments -p tacit

use std::sync::Arc;

use tacit::annotate::{
    agreement, annotate_corpus, dictionary_annotate, mention_stats, AgreementMode, ExampleSet,
};
use tacit::judge::template::TemplateSet;
use tacit::judge::{JudgeClient, ProviderConfig};
use tacit::search::{Hypothesis, HypothesisOrigin};
use tacit::sim::{generate_world, ScriptedJudge, ScriptedJudgeConfig};

fn main() -> tacit::Result<()> {
    let config = ScriptedJudgeConfig::default_world(42);
    let world = generate_world(&config, 200, 1)?;
    let hypotheses: Vec<Hypothesis> = config
        .criteria
        .iter()
        .map(|c| Hypothesis::new(c.canonical_text(), 1, HypothesisOrigin::PosteriorSearch))
        .collect();
    let hyp_ids: Vec<String> = hypotheses.iter().map(|h| h.hyp_id.clone()).collect();

    let judge = ScriptedJudge::new(config.clone())?;
    let client = JudgeClient::new(Arc::new(judge));
    let templates = TemplateSet::builtin();
    let provider = ProviderConfig::scripted();

    let outcome = annotate_corpus(
        &client,
        &templates,
        &provider,
        &world.records,
        &hypotheses,
        &ExampleSet::empty(),
    )?;
    println!(
        "annotated {} comments ({} unannotated)",
        outcome.vectors.len(),
        outcome.unannotated.len()
    );

    let stats = mention_stats(&outcome.vectors, &hyp_ids)?;
    println!("\nmention rates (judge route):");
    for (criterion, stat) in config.criteria.iter().zip(&stats) {
        println!(
            "  {:<20} mention {:.3} (praise {:.3}, criticism {:.3})",
            criterion.crit_id, stat.mention_rate, stat.praise_rate, stat.criticism_rate
        );
    }

    // dictionary route: mention-only 0/1 by keyword lookup
    let dictionary = config.dictionary();
    let mut judge_flat: Vec<i8> = Vec::new();
    let mut dict_flat: Vec<i8> = Vec::new();
    for vector in &outcome.vectors {
        let record = world
            .records
            .iter()
            .find(|r| r.paper_id == vector.paper_id)
            .unwrap();
        let idx: usize = vector
            .comment_id
            .rsplit("#r")
            .next()
            .unwrap()
            .parse()
            .unwrap();
        let dict_values = dictionary_annotate(&record.comments[idx], &dictionary, &hyp_ids);
        judge_flat.extend(vector.values.iter().map(|v| i8::from(*v != 0)));
        dict_flat.extend(dict_values.iter().map(|v| *v as i8));
    }
    let overlap = agreement(&judge_flat, &dict_flat, AgreementMode::Overlap)?;
    println!("\njudge vs dictionary mention overlap: {overlap:.3}");
    Ok(())
}
