//! Analysis report assembly, CSV exports, and static SVG plots.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotate::MentionStats;
use crate::error::{Error, Result};
use crate::prior::PriorFrequency;
use crate::search::coverage::{aggregate_confidence_weighted, aggregate_majority, VoteRecord};
use crate::search::Hypothesis;
use crate::stats::{
    attention_shares, pearson, shift_table, AttentionShares, CosineSummary, RegressionResult,
    RoundTrend, ShiftRow, TieBreak,
};

/// One row of the hypothesis table (prior / posterior / shift / mention).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub hyp_id: String,
    pub text: String,
    pub round: u32,
    pub prior: f64,
    pub posterior: f64,
    pub delta: f64,
    pub shift_rank: usize,
    pub mention: f64,
}

/// Correlations between the three hypothesis-level frequency columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Correlations {
    /// None when a column is constant and the correlation is undefined.
    pub prior_mention: Option<f64>,
    pub posterior_mention: Option<f64>,
    pub prior_posterior: Option<f64>,
}

/// Pearson with degenerate columns mapped to None.
fn correlation_or_none(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    match pearson(x, y) {
        Ok(r) => Ok(Some(r)),
        Err(Error::DegenerateSeries) => Ok(None),
        Err(e) => Err(e),
    }
}

/// The full machine-readable analysis bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub config_digest: String,
    pub input_digests: BTreeMap<String, String>,
    /// Tie-break rule used for shift ranks (reverse-engineered default:
    /// descending posterior).
    pub tie_break: String,
    pub table: Vec<TableRow>,
    pub correlations: Correlations,
    pub attention_top_k: usize,
    pub attention_shares: AttentionShares,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub round_trends: Vec<RoundTrend>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_cosine: Option<CosineSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote_scheme_agreement: Option<f64>,
    /// Reviewer scores regressed on the annotation attitude vectors; absent
    /// when the design is degenerate (collinear columns or too few comments).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_regression: Option<RegressionResult>,
    /// Swap-consistency regressed on review score gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_bias: Option<RegressionResult>,
}

/// Regress each comment's reviewer score on its annotation attitude vector.
///
/// Returns None when the regression cannot run (constant or collinear
/// columns, too few scored comments) rather than failing the whole report.
pub fn annotation_score_regression(
    vectors: &[crate::annotate::AnnotationVector],
) -> Result<Option<RegressionResult>> {
    let scored: Vec<&crate::annotate::AnnotationVector> = vectors
        .iter()
        .filter(|v| v.reviewer_score.is_some())
        .collect();
    if scored.is_empty() {
        return Ok(None);
    }
    let y: Vec<f64> = scored.iter().map(|v| v.reviewer_score.unwrap()).collect();
    let x: Vec<Vec<f64>> = scored
        .iter()
        .map(|v| v.values.iter().map(|value| f64::from(*value)).collect())
        .collect();
    match crate::stats::ols_fit(&y, &x, true) {
        Ok(fit) => Ok(Some(fit)),
        Err(
            Error::RankDeficient(_) | Error::DegenerateSeries | Error::TooFewObservations { .. },
        ) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Hypothesis-level inputs for the table: aligned maps by hyp_id.
pub struct TableInputs<'a> {
    pub hypotheses: &'a [Hypothesis],
    pub prior: &'a BTreeMap<String, f64>,
    pub posterior: &'a BTreeMap<String, f64>,
    pub mention: &'a BTreeMap<String, f64>,
}

/// Build the ranked table plus its column correlations.
pub fn build_table(
    inputs: &TableInputs<'_>,
    tie_break: TieBreak,
) -> Result<(Vec<TableRow>, Correlations)> {
    let rows: Vec<ShiftRow> =
        shift_table(inputs.prior, inputs.posterior, inputs.mention, tie_break)?;
    let by_id: BTreeMap<&str, &Hypothesis> = inputs
        .hypotheses
        .iter()
        .map(|h| (h.hyp_id.as_str(), h))
        .collect();
    let mut table = Vec::with_capacity(rows.len());
    for row in &rows {
        let hyp = by_id
            .get(row.hyp_id.as_str())
            .ok_or_else(|| Error::IdMismatch(vec![row.hyp_id.clone()]))?;
        table.push(TableRow {
            hyp_id: row.hyp_id.clone(),
            text: hyp.text.clone(),
            round: hyp.round,
            prior: row.prior,
            posterior: row.posterior,
            delta: row.delta,
            shift_rank: row.shift_rank,
            mention: row.mention,
        });
    }
    // correlate in a fixed (hyp_id) order
    let ids: Vec<&String> = inputs.prior.keys().collect();
    let prior: Vec<f64> = ids.iter().map(|id| inputs.prior[*id]).collect();
    let posterior: Vec<f64> = ids.iter().map(|id| inputs.posterior[*id]).collect();
    let mention: Vec<f64> = ids.iter().map(|id| inputs.mention[*id]).collect();
    let correlations = Correlations {
        prior_mention: correlation_or_none(&prior, &mention)?,
        posterior_mention: correlation_or_none(&posterior, &mention)?,
        prior_posterior: correlation_or_none(&prior, &posterior)?,
    };
    Ok((table, correlations))
}

/// Attention shares over the already-ranked table rows.
pub fn shares_from_table(table: &[TableRow], top_k: usize) -> Result<AttentionShares> {
    let rows: Vec<ShiftRow> = table
        .iter()
        .map(|r| ShiftRow {
            hyp_id: r.hyp_id.clone(),
            prior: r.prior,
            posterior: r.posterior,
            mention: r.mention,
            delta: r.delta,
            shift_rank: r.shift_rank,
        })
        .collect();
    attention_shares(&rows, top_k)
}

/// Fraction of (pair, hypothesis) cells where the confidence-weighted and
/// majority labels agree.
pub fn vote_scheme_agreement(votes: &[VoteRecord]) -> Result<f64> {
    let mut cells: BTreeMap<(String, String), Vec<VoteRecord>> = BTreeMap::new();
    for vote in votes {
        cells
            .entry((vote.pair_id.clone(), vote.hyp_id.clone()))
            .or_default()
            .push(vote.clone());
    }
    if cells.is_empty() {
        return Err(Error::EmptyInput("vote log"));
    }
    let mut agree = 0usize;
    for votes in cells.values() {
        let weighted = aggregate_confidence_weighted(votes)?;
        let majority = aggregate_majority(votes)?;
        if weighted.final_label == majority {
            agree += 1;
        }
    }
    Ok(agree as f64 / cells.len() as f64)
}

/// Convert mention stats into the hyp_id -> mention_rate column.
pub fn mention_column(stats: &[MentionStats]) -> BTreeMap<String, f64> {
    stats
        .iter()
        .map(|s| (s.hyp_id.clone(), s.mention_rate))
        .collect()
}

/// Convert prior frequencies into the hyp_id -> frequency column.
pub fn prior_column(frequencies: &[PriorFrequency]) -> BTreeMap<String, f64> {
    frequencies
        .iter()
        .map(|f| (f.hyp_id.clone(), f.frequency))
        .collect()
}

/// Write the table CSV (`hypothesis,round,prior,posterior,shift_rank,mention`).
pub fn write_table_csv(table: &[TableRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "hypothesis",
        "round",
        "prior",
        "posterior",
        "shift_rank",
        "mention",
    ])?;
    for row in table {
        writer.write_record([
            row.text.as_str(),
            &row.round.to_string(),
            &row.prior.to_string(),
            &row.posterior.to_string(),
            &row.shift_rank.to_string(),
            &row.mention.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_report(report: &AnalysisReport, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<AnalysisReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

// --- reference-table fixtures ----------------------------------------------

/// One row of a shipped hypothesis-table fixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureRow {
    pub text: String,
    pub round: u32,
    pub prior: f64,
    pub posterior: f64,
    pub mention: f64,
    /// Published shift rank, when the fixture carries one to check against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_rank: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureTable {
    pub rows: Vec<FixtureRow>,
}

/// Hypotheses plus the prior / posterior / mention columns of a fixture.
pub type FixtureInputs = (
    Vec<Hypothesis>,
    BTreeMap<String, f64>,
    BTreeMap<String, f64>,
    BTreeMap<String, f64>,
);

impl FixtureTable {
    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// The 20-hypothesis reference table shipped with the crate.
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("../data/reference/reference_table.json"))
            .expect("bundled reference table parses")
    }

    /// Expand into table inputs keyed by canonical hypothesis ids.
    pub fn inputs(&self) -> FixtureInputs {
        let hypotheses: Vec<Hypothesis> = self
            .rows
            .iter()
            .map(|r| {
                Hypothesis::new(
                    r.text.clone(),
                    r.round,
                    crate::search::HypothesisOrigin::PosteriorSearch,
                )
            })
            .collect();
        let mut prior = BTreeMap::new();
        let mut posterior = BTreeMap::new();
        let mut mention = BTreeMap::new();
        for (hyp, row) in hypotheses.iter().zip(&self.rows) {
            prior.insert(hyp.hyp_id.clone(), row.prior);
            posterior.insert(hyp.hyp_id.clone(), row.posterior);
            mention.insert(hyp.hyp_id.clone(), row.mention);
        }
        (hypotheses, prior, posterior, mention)
    }
}

// --- minimal SVG plotting -------------------------------------------------

fn svg_header(width: u32, height: u32) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    )
}

fn axis_box(x0: f64, y0: f64, x1: f64, y1: f64) -> String {
    format!(
        "<rect x=\"{x0}\" y=\"{y0}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        x1 - x0,
        y1 - y0
    )
}

/// Scatter plot of (x, y) points in [0,1] x [0,1] with axis labels.
pub fn plot_scatter(
    points: &[(f64, f64)],
    x_label: &str,
    y_label: &str,
    path: &Path,
) -> Result<()> {
    let (w, h) = (480u32, 480u32);
    let (x0, y0, x1, y1) = (60.0, 20.0, 460.0, 420.0);
    let mut svg = svg_header(w, h);
    svg.push_str(&axis_box(x0, y0, x1, y1));
    for (x, y) in points {
        let px = x0 + x.clamp(0.0, 1.0) * (x1 - x0);
        let py = y1 - y.clamp(0.0, 1.0) * (y1 - y0);
        svg.push_str(&format!(
            "<circle cx=\"{px:.1}\" cy=\"{py:.1}\" r=\"4\" fill=\"steelblue\" fill-opacity=\"0.8\"/>\n"
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.0}\" y=\"{:.0}\" text-anchor=\"middle\" font-size=\"14\">{x_label}</text>\n",
        (x0 + x1) / 2.0,
        y1 + 35.0
    ));
    svg.push_str(&format!(
        "<text x=\"15\" y=\"{:.0}\" transform=\"rotate(-90 15 {:.0})\" text-anchor=\"middle\" font-size=\"14\">{y_label}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    ));
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

/// Line plot, one series per (name, values-by-round).
pub fn plot_lines(series: &[(String, Vec<f64>)], y_label: &str, path: &Path) -> Result<()> {
    let (w, h) = (560u32, 400u32);
    let (x0, y0, x1, y1) = (60.0, 20.0, 540.0, 340.0);
    let max_y = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(1.0f64, f64::max);
    let max_x = series
        .iter()
        .map(|(_, v)| v.len())
        .max()
        .unwrap_or(1)
        .max(2);
    let colors = ["steelblue", "firebrick", "seagreen", "darkorange"];
    let mut svg = svg_header(w, h);
    svg.push_str(&axis_box(x0, y0, x1, y1));
    for (si, (name, values)) in series.iter().enumerate() {
        let color = colors[si % colors.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let px = x0 + i as f64 / (max_x - 1) as f64 * (x1 - x0);
                let py = y1 - (v / max_y).clamp(0.0, 1.0) * (y1 - y0);
                format!("{px:.1},{py:.1}")
            })
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            points.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{:.0}\" y=\"{:.0}\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
            x1 - 160.0,
            y0 + 18.0 + 16.0 * si as f64
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.0}\" y=\"{:.0}\" text-anchor=\"middle\" font-size=\"14\">round</text>\n",
        (x0 + x1) / 2.0,
        y1 + 35.0
    ));
    svg.push_str(&format!(
        "<text x=\"15\" y=\"{:.0}\" transform=\"rotate(-90 15 {:.0})\" text-anchor=\"middle\" font-size=\"14\">{y_label}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    ));
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::PresentationOrder;
    use crate::search::HypothesisOrigin;

    #[test]
    fn table_assembles_and_exports() {
        let hypotheses: Vec<Hypothesis> = (0..3)
            .map(|i| {
                Hypothesis::new(
                    format!("Compared to another paper, one paper lacks quality {i}."),
                    i + 1,
                    HypothesisOrigin::PosteriorSearch,
                )
            })
            .collect();
        let ids: Vec<String> = hypotheses.iter().map(|h| h.hyp_id.clone()).collect();
        let prior: BTreeMap<String, f64> = ids.iter().cloned().zip([0.9, 0.5, 0.1]).collect();
        let posterior: BTreeMap<String, f64> = ids.iter().cloned().zip([0.2, 0.5, 0.8]).collect();
        let mention: BTreeMap<String, f64> = ids.iter().cloned().zip([0.7, 0.4, 0.1]).collect();
        let (table, correlations) = build_table(
            &TableInputs {
                hypotheses: &hypotheses,
                prior: &prior,
                posterior: &posterior,
                mention: &mention,
            },
            TieBreak::PosteriorDesc,
        )
        .unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table[0].shift_rank, 1);
        assert!(table[0].delta >= table[1].delta);
        assert!(correlations.prior_mention.unwrap() > 0.9); // co-monotone columns

        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("table.csv");
        write_table_csv(&table, &csv_path).unwrap();
        let content = std::fs::read_to_string(&csv_path).unwrap();
        assert!(content.starts_with("hypothesis,round,prior,posterior,shift_rank,mention"));
        assert_eq!(content.lines().count(), 4);
    }

    #[test]
    fn agreement_over_vote_log() {
        let vote = |pair: &str, label: u8, confidence: u8| VoteRecord {
            pair_id: pair.to_string(),
            hyp_id: "h".into(),
            fold: 0,
            order: PresentationOrder::HighFirst,
            label,
            confidence,
            flagged: false,
        };
        // cell a: weighted and majority agree; cell b: one high-confidence
        // vote overrules the majority
        let votes = vec![
            vote("a", 1, 5),
            vote("a", 1, 5),
            vote("a", 0, 3),
            vote("b", 1, 10),
            vote("b", 0, 1),
            vote("b", 0, 1),
        ];
        let agreement = vote_scheme_agreement(&votes).unwrap();
        assert!((agreement - 0.5).abs() < 1e-12);
    }

    #[test]
    fn plots_write_valid_svg() {
        let dir = tempfile::tempdir().unwrap();
        let scatter = dir.path().join("scatter.svg");
        plot_scatter(&[(0.1, 0.9), (0.5, 0.5)], "prior", "posterior", &scatter).unwrap();
        let content = std::fs::read_to_string(&scatter).unwrap();
        assert!(content.starts_with("<svg"));
        assert!(content.contains("circle"));

        let lines = dir.path().join("lines.svg");
        plot_lines(
            &[("coverage".to_string(), vec![0.2, 0.5, 0.9])],
            "value",
            &lines,
        )
        .unwrap();
        assert!(std::fs::read_to_string(&lines)
            .unwrap()
            .contains("polyline"));
    }
}
