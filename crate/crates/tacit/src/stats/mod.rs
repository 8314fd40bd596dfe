//! Numerical analysis: OLS regression, correlations, belief-shift ranking,
//! attention shares, round trends, and the position-bias regression.
//!
//! Everything here is a pure function of its inputs; re-running on the same
//! serialized artifacts is bit-reproducible.

pub mod dist;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::coverage::CoverageMatrix;

/// Deltas are compared after rounding to this many decimals so that ties in
/// published-style decimal data survive binary floating point (e.g. 0.20-0.68
/// and 0.02-0.50 must land in the same tie group).
const DELTA_DECIMALS: i32 = 9;

fn quantize(x: f64) -> f64 {
    let s = 10f64.powi(DELTA_DECIMALS);
    (x * s).round() / s
}

/// Full OLS fit summary, intercept first when one was added.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionResult {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub conf_intervals_95: Vec<(f64, f64)>,
    pub r_squared: f64,
    pub n_observations: usize,
}

/// Ordinary least squares with classical (nonrobust) standard errors.
///
/// `x` is one row per observation, one entry per predictor. Coefficients come
/// back intercept-first when `add_intercept` is set. Standard errors assume
/// homoskedastic spherical errors; p-values are two-sided with n - p - 1
/// degrees of freedom and the 95% CIs come from the t distribution.
pub fn ols_fit(y: &[f64], x: &[Vec<f64>], add_intercept: bool) -> Result<RegressionResult> {
    let n = y.len();
    let p = x.first().map_or(0, Vec::len);
    if x.len() != n {
        return Err(Error::LengthMismatch(n, x.len()));
    }
    if x.iter().any(|row| row.len() != p) {
        return Err(Error::InvalidConfig("ragged design matrix".into()));
    }
    let cols = p + usize::from(add_intercept);
    if n <= p + 1 {
        return Err(Error::TooFewObservations { n, p });
    }

    let mut design = DMatrix::<f64>::zeros(n, cols);
    for (i, row) in x.iter().enumerate() {
        if add_intercept {
            design[(i, 0)] = 1.0;
        }
        for (j, v) in row.iter().enumerate() {
            design[(i, j + usize::from(add_intercept))] = *v;
        }
    }

    let dependent = dependent_columns(&design);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient(dependent));
    }

    let yv = DVector::from_column_slice(y);
    let qr = design.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient(vec![]))?;

    let fitted = &design * &beta;
    let resid = &yv - &fitted;
    let ssr: f64 = resid.iter().map(|e| e * e).sum();
    let dof = (n - cols) as f64;
    let sigma2 = ssr / dof;

    // (X'X)^-1 = R^-1 R^-T from the same QR factorization
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(cols, cols))
        .ok_or_else(|| Error::RankDeficient(vec![]))?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let r_squared = if add_intercept {
        let ybar = y.iter().sum::<f64>() / n as f64;
        let sst: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
        if sst == 0.0 {
            return Err(Error::DegenerateSeries);
        }
        1.0 - ssr / sst
    } else {
        let sst: f64 = y.iter().map(|v| v * v).sum();
        if sst == 0.0 {
            return Err(Error::DegenerateSeries);
        }
        1.0 - ssr / sst
    };

    let tq = dist::t_quantile(0.975, dof);
    let mut std_errors = Vec::with_capacity(cols);
    let mut t_values = Vec::with_capacity(cols);
    let mut p_values = Vec::with_capacity(cols);
    let mut conf = Vec::with_capacity(cols);
    for j in 0..cols {
        let se = (sigma2 * xtx_inv[(j, j)]).sqrt();
        let t = beta[j] / se;
        std_errors.push(se);
        t_values.push(t);
        p_values.push(dist::t_two_sided_p(t, dof));
        conf.push((beta[j] - tq * se, beta[j] + tq * se));
    }

    Ok(RegressionResult {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        t_values,
        p_values,
        conf_intervals_95: conf,
        r_squared,
        n_observations: n,
    })
}

/// Modified Gram-Schmidt scan naming columns that are (numerically) linear
/// combinations of earlier ones.
fn dependent_columns(design: &DMatrix<f64>) -> Vec<usize> {
    let (n, cols) = design.shape();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..cols {
        let mut v = DVector::from_iterator(n, (0..n).map(|i| design[(i, j)]));
        let orig_norm = v.norm();
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        if v.norm() <= 1e-10 * orig_norm.max(1.0) {
            dependent.push(j);
        } else {
            let norm = v.norm();
            basis.push(v / norm);
        }
    }
    dependent
}

/// Sample Pearson correlation. Errors on length mismatch, n < 3, or a
/// zero-variance series.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewRows { have: n, need: 3 });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSeries);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Tie-break rule for equal posterior-minus-prior deltas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Higher posterior wins the earlier rank (default).
    #[default]
    PosteriorDesc,
    /// Higher prior wins the earlier rank.
    PriorDesc,
    /// Ties keep lexicographic hypothesis-id order.
    IdOrder,
}

impl TieBreak {
    pub fn as_str(self) -> &'static str {
        match self {
            TieBreak::PosteriorDesc => "posterior_desc",
            TieBreak::PriorDesc => "prior_desc",
            TieBreak::IdOrder => "id_order",
        }
    }
}

/// One hypothesis row of the prior/posterior/mention table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftRow {
    pub hyp_id: String,
    pub prior: f64,
    pub posterior: f64,
    pub mention: f64,
    /// posterior - prior, rounded to 9 decimals.
    pub delta: f64,
    /// 1 = largest delta.
    pub shift_rank: usize,
}

/// Rank hypotheses by posterior-minus-prior shift, descending.
///
/// All three maps must carry exactly the same hypothesis ids. Rows come back
/// in rank order (rank 1 first).
pub fn shift_table(
    prior: &BTreeMap<String, f64>,
    posterior: &BTreeMap<String, f64>,
    mention: &BTreeMap<String, f64>,
    tie_break: TieBreak,
) -> Result<Vec<ShiftRow>> {
    let mut mismatch: Vec<String> = Vec::new();
    for id in prior.keys() {
        if !posterior.contains_key(id) || !mention.contains_key(id) {
            mismatch.push(id.clone());
        }
    }
    for id in posterior.keys().chain(mention.keys()) {
        if !prior.contains_key(id) && !mismatch.contains(id) {
            mismatch.push(id.clone());
        }
    }
    if !mismatch.is_empty() {
        mismatch.sort();
        mismatch.dedup();
        return Err(Error::IdMismatch(mismatch));
    }

    let mut rows: Vec<ShiftRow> = prior
        .iter()
        .map(|(id, &pr)| {
            let po = posterior[id];
            ShiftRow {
                hyp_id: id.clone(),
                prior: pr,
                posterior: po,
                mention: mention[id],
                delta: quantize(po - pr),
                shift_rank: 0,
            }
        })
        .collect();

    rows.sort_by(|a, b| {
        b.delta
            .partial_cmp(&a.delta)
            .unwrap()
            .then_with(|| match tie_break {
                TieBreak::PosteriorDesc => b.posterior.partial_cmp(&a.posterior).unwrap(),
                TieBreak::PriorDesc => b.prior.partial_cmp(&a.prior).unwrap(),
                TieBreak::IdOrder => std::cmp::Ordering::Equal,
            })
            .then_with(|| a.hyp_id.cmp(&b.hyp_id))
    });
    for (i, row) in rows.iter_mut().enumerate() {
        row.shift_rank = i + 1;
    }
    Ok(rows)
}

/// Mean prior/posterior/mention over the top-k gaining and top-k losing rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionShares {
    pub gain_posterior_mean: f64,
    pub gain_prior_mean: f64,
    pub gain_mention_mean: f64,
    pub loss_posterior_mean: f64,
    pub loss_prior_mean: f64,
    pub loss_mention_mean: f64,
}

pub fn attention_shares(rows: &[ShiftRow], top_k: usize) -> Result<AttentionShares> {
    let n = rows.len();
    if n < 2 * top_k {
        return Err(Error::TooFewRows {
            have: n,
            need: 2 * top_k,
        });
    }
    let mean = |sel: &dyn Fn(&ShiftRow) -> f64, pred: &dyn Fn(&ShiftRow) -> bool| {
        let picked: Vec<f64> = rows.iter().filter(|r| pred(r)).map(sel).collect();
        picked.iter().sum::<f64>() / picked.len() as f64
    };
    let gain = |r: &ShiftRow| r.shift_rank <= top_k;
    let loss = |r: &ShiftRow| r.shift_rank > n - top_k;
    Ok(AttentionShares {
        gain_posterior_mean: mean(&|r| r.posterior, &gain),
        gain_prior_mean: mean(&|r| r.prior, &gain),
        gain_mention_mean: mean(&|r| r.mention, &gain),
        loss_posterior_mean: mean(&|r| r.posterior, &loss),
        loss_prior_mean: mean(&|r| r.prior, &loss),
        loss_mention_mean: mean(&|r| r.mention, &loss),
    })
}

/// Per-generation-round aggregate, one row per round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundTrend {
    pub round: u32,
    pub mean_prior_frequency: Option<f64>,
    pub mean_posterior_coverage: f64,
    pub mean_confidence_margin: f64,
    pub consistency_rate: f64,
}

/// Aggregate coverage statistics per generation round, weighting each
/// hypothesis equally within its round.
///
/// `hyp_rounds` maps hypothesis id to the round it was generated in;
/// `prior_freqs`, when available, contributes the prior-frequency panel.
pub fn round_trends(
    hyp_rounds: &BTreeMap<String, u32>,
    coverage: &CoverageMatrix,
    prior_freqs: Option<&BTreeMap<String, f64>>,
) -> Result<Vec<RoundTrend>> {
    let posterior = coverage.posterior_coverage()?;
    let mut by_round: BTreeMap<u32, Vec<&String>> = BTreeMap::new();
    for (hyp, &round) in hyp_rounds {
        by_round.entry(round).or_default().push(hyp);
    }
    let mut out = Vec::with_capacity(by_round.len());
    for (round, hyps) in by_round {
        let k = hyps.len() as f64;
        let mut cov = 0.0;
        let mut margin = 0.0;
        let mut consis = 0.0;
        let mut prior_sum = 0.0;
        let mut prior_seen = true;
        for hyp in &hyps {
            cov += posterior.get(*hyp).copied().unwrap_or(0.0);
            let (m, c) = coverage.column_margin_consistency(hyp)?;
            margin += m;
            consis += c;
            match prior_freqs.and_then(|pf| pf.get(*hyp)) {
                Some(f) => prior_sum += f,
                None => prior_seen = false,
            }
        }
        out.push(RoundTrend {
            round,
            mean_prior_frequency: (prior_freqs.is_some() && prior_seen).then_some(prior_sum / k),
            mean_posterior_coverage: cov / k,
            mean_confidence_margin: margin / k,
            consistency_rate: consis / k,
        });
    }
    Ok(out)
}

/// One-predictor OLS of swap-consistency on review score gap.
pub fn position_bias_regression(observations: &[(f64, f64)]) -> Result<RegressionResult> {
    if observations.len() < 10 {
        return Err(Error::TooFewRows {
            have: observations.len(),
            need: 10,
        });
    }
    let y: Vec<f64> = observations.iter().map(|(_, c)| *c).collect();
    let first = y[0];
    if y.iter().all(|v| *v == first) {
        return Err(Error::DegenerateSeries);
    }
    let x: Vec<Vec<f64>> = observations.iter().map(|(g, _)| vec![*g]).collect();
    ols_fit(&y, &x, true)
}

/// Mean and std of pairwise cosine similarity over hypothesis label columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CosineSummary {
    pub mean: f64,
    pub std: f64,
    /// Hypotheses excluded because their label column was all zero.
    pub excluded: Vec<String>,
}

pub fn coverage_cosine(coverage: &CoverageMatrix) -> Result<CosineSummary> {
    coverage.check_complete()?;
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    let mut excluded = Vec::new();
    for hyp in coverage.hyp_index() {
        let col: Vec<f64> = coverage
            .label_column(hyp)?
            .iter()
            .map(|&v| v as f64)
            .collect();
        if col.iter().all(|&v| v == 0.0) {
            excluded.push(hyp.clone());
        } else {
            columns.push((hyp.clone(), col));
        }
    }
    if columns.len() < 2 {
        return Err(Error::TooFewColumns);
    }
    let mut sims = Vec::new();
    for i in 0..columns.len() {
        for j in (i + 1)..columns.len() {
            let (a, b) = (&columns[i].1, &columns[j].1);
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            sims.push(dot / (na * nb));
        }
    }
    let mean = sims.iter().sum::<f64>() / sims.len() as f64;
    let var = sims.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / sims.len() as f64;
    Ok(CosineSummary {
        mean,
        std: var.sqrt(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn perfect_fit_recovers_slope_and_intercept() {
        let x: Vec<Vec<f64>> = (1..=10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (1..=10).map(|i| 2.0 * i as f64).collect();
        let fit = ols_fit(&y, &x, true).unwrap();
        assert_relative_eq!(fit.coefficients[0], 0.0, epsilon = 1e-10);
        assert_relative_eq!(fit.coefficients[1], 2.0, epsilon = 1e-10);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 60;
        let p = 4;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|row| 1.5 + row.iter().sum::<f64>() + rng.gen_range(-0.5..0.5))
            .collect();
        let fit = ols_fit(&y, &x, true).unwrap();
        let resid: Vec<f64> = (0..n)
            .map(|i| {
                let pred = fit.coefficients[0]
                    + x[i]
                        .iter()
                        .zip(&fit.coefficients[1..])
                        .map(|(v, c)| v * c)
                        .sum::<f64>();
                y[i] - pred
            })
            .collect();
        // intercept column
        let scale: f64 = y.iter().map(|v| v.abs()).sum::<f64>();
        assert!(resid.iter().sum::<f64>().abs() <= 1e-8 * scale);
        for j in 0..p {
            let dot: f64 = (0..n).map(|i| resid[i] * x[i][j]).sum();
            assert!(
                dot.abs() <= 1e-8 * scale,
                "column {j} not orthogonal: {dot}"
            );
        }
    }

    #[test]
    fn rank_deficiency_names_dependent_column() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let v = i as f64;
                vec![v, 2.0 * v, v * v]
            })
            .collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        match ols_fit(&y, &x, true) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, vec![2]), // 2x is col 2 in augmented matrix
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn pearson_basics() {
        assert_relative_eq!(
            pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[2.0, 4.0, 6.0]),
            Err(Error::DegenerateSeries)
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0], &[2.0, 4.0]),
            Err(Error::TooFewRows { .. })
        ));
    }

    #[test]
    fn shift_ranking_orders_by_delta_then_posterior() {
        let prior = BTreeMap::from([
            ("a".to_string(), 0.68),
            ("b".to_string(), 0.50),
            ("c".to_string(), 0.10),
        ]);
        let posterior = BTreeMap::from([
            ("a".to_string(), 0.20),
            ("b".to_string(), 0.02),
            ("c".to_string(), 0.90),
        ]);
        let mention = BTreeMap::from([
            ("a".to_string(), 0.0),
            ("b".to_string(), 0.0),
            ("c".to_string(), 0.0),
        ]);
        let rows = shift_table(&prior, &posterior, &mention, TieBreak::PosteriorDesc).unwrap();
        // c gains (+0.80): rank 1. a and b tie at -0.48; a has higher posterior.
        assert_eq!(rows[0].hyp_id, "c");
        assert_eq!(rows[1].hyp_id, "a");
        assert_eq!(rows[2].hyp_id, "b");
        assert_eq!(
            rows.iter().map(|r| r.shift_rank).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn shift_table_rejects_id_mismatch() {
        let a = BTreeMap::from([("x".to_string(), 0.1)]);
        let b = BTreeMap::from([("y".to_string(), 0.1)]);
        match shift_table(&a, &b, &a, TieBreak::PosteriorDesc) {
            Err(Error::IdMismatch(ids)) => {
                assert!(ids.contains(&"x".to_string()) && ids.contains(&"y".to_string()));
            }
            other => panic!("expected id mismatch, got {other:?}"),
        }
    }

    #[test]
    fn attention_shares_constant_columns() {
        let rows: Vec<ShiftRow> = (0..10)
            .map(|i| ShiftRow {
                hyp_id: format!("h{i}"),
                prior: 0.3,
                posterior: 0.3,
                mention: 0.3,
                delta: (10 - i) as f64, // distinct deltas
                shift_rank: i + 1,
            })
            .collect();
        let s = attention_shares(&rows, 5).unwrap();
        for v in [
            s.gain_posterior_mean,
            s.gain_prior_mean,
            s.gain_mention_mean,
            s.loss_posterior_mean,
            s.loss_prior_mean,
            s.loss_mention_mean,
        ] {
            assert_relative_eq!(v, 0.3, epsilon = 1e-12);
        }
        assert!(matches!(
            attention_shares(&rows[..9], 5),
            Err(Error::TooFewRows { .. })
        ));
    }

    #[test]
    fn position_bias_rejects_constant_consistency() {
        let obs: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 0.8)).collect();
        assert!(matches!(
            position_bias_regression(&obs),
            Err(Error::DegenerateSeries)
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn series() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-50.0f64..50.0, 5..20)
        }

        proptest! {
            // invariant under positive affine transforms of either argument;
            // negated under negative scaling of exactly one argument
            #[test]
            fn pearson_affine_invariance(
                x in series(),
                scale in 0.01f64..10.0,
                shift in -20.0f64..20.0,
            ) {
                let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * 0.7 + (i as f64) * 0.3).collect();
                let base = match pearson(&x, &y) {
                    Ok(r) => r,
                    Err(_) => return Ok(()), // degenerate draw
                };
                let x_affine: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
                prop_assert!((pearson(&x_affine, &y).unwrap() - base).abs() < 1e-9);
                let x_negated: Vec<f64> = x.iter().map(|v| -scale * v).collect();
                prop_assert!((pearson(&x_negated, &y).unwrap() + base).abs() < 1e-9);
            }

            // adding the same constant to every prior and posterior leaves
            // the ranking untouched
            #[test]
            fn shift_rank_invariant_under_common_offset(
                values in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 4..12),
                offset in -0.5f64..0.5,
            ) {
                let ids: Vec<String> = (0..values.len()).map(|i| format!("h{i}")).collect();
                let build = |shift: f64| -> (BTreeMap<String, f64>, BTreeMap<String, f64>, BTreeMap<String, f64>) {
                    let mut prior = BTreeMap::new();
                    let mut posterior = BTreeMap::new();
                    let mut mention = BTreeMap::new();
                    for (id, (pr, po, me)) in ids.iter().zip(&values) {
                        prior.insert(id.clone(), pr + shift);
                        posterior.insert(id.clone(), po + shift);
                        mention.insert(id.clone(), *me);
                    }
                    (prior, posterior, mention)
                };
                let (p0, q0, m0) = build(0.0);
                let (p1, q1, m1) = build(offset);
                let base = shift_table(&p0, &q0, &m0, TieBreak::PosteriorDesc).unwrap();
                let shifted = shift_table(&p1, &q1, &m1, TieBreak::PosteriorDesc).unwrap();
                let base_ranks: Vec<(&str, usize)> =
                    base.iter().map(|r| (r.hyp_id.as_str(), r.shift_rank)).collect();
                let shifted_ranks: Vec<(&str, usize)> =
                    shifted.iter().map(|r| (r.hyp_id.as_str(), r.shift_rank)).collect();
                prop_assert_eq!(base_ranks, shifted_ranks);
            }

            // ranks are always a permutation of 1..=n
            #[test]
            fn shift_ranks_are_a_permutation(
                values in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..15),
            ) {
                let mut prior = BTreeMap::new();
                let mut posterior = BTreeMap::new();
                let mut mention = BTreeMap::new();
                for (i, (pr, po)) in values.iter().enumerate() {
                    let id = format!("h{i}");
                    prior.insert(id.clone(), *pr);
                    posterior.insert(id.clone(), *po);
                    mention.insert(id, 0.0);
                }
                let rows = shift_table(&prior, &posterior, &mention, TieBreak::PosteriorDesc).unwrap();
                let mut ranks: Vec<usize> = rows.iter().map(|r| r.shift_rank).collect();
                ranks.sort_unstable();
                prop_assert_eq!(ranks, (1..=values.len()).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn coverage_cosine_identity_orthogonal_and_exclusion() {
        use crate::search::coverage::CellOutcome;
        let pairs: Vec<String> = (0..4).map(|i| format!("p{i}")).collect();
        let mut matrix = CoverageMatrix::new(pairs.clone());
        let columns: [(&str, [u8; 4]); 4] = [
            ("a", [1, 1, 0, 0]),
            ("b", [1, 1, 0, 0]), // identical to a
            ("c", [0, 0, 1, 1]), // orthogonal to a
            ("z", [0, 0, 0, 0]), // excluded
        ];
        for (hyp, labels) in columns {
            for (pair, label) in pairs.iter().zip(labels) {
                matrix.insert(
                    pair,
                    hyp,
                    CellOutcome {
                        final_label: label,
                        confidence_margin: 1,
                        consistent: true,
                    },
                );
            }
        }
        let summary = coverage_cosine(&matrix).unwrap();
        assert_eq!(summary.excluded, vec!["z".to_string()]);
        // pairs: (a,b)=1, (a,c)=0, (b,c)=0
        assert_relative_eq!(summary.mean, 1.0 / 3.0, epsilon = 1e-12);

        let mut tiny = CoverageMatrix::new(pairs.clone());
        for pair in &pairs {
            tiny.insert(
                pair,
                "only",
                CellOutcome {
                    final_label: 1,
                    confidence_margin: 1,
                    consistent: true,
                },
            );
        }
        assert!(matches!(coverage_cosine(&tiny), Err(Error::TooFewColumns)));
    }

    #[test]
    fn position_bias_recovers_synthetic_slope() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let obs: Vec<(f64, f64)> = (0..500)
            .map(|_| {
                let gap = rng.gen_range(1.0..6.0);
                (gap, 0.74 + 0.01 * gap + rng.gen_range(-0.02..0.02))
            })
            .collect();
        let fit = position_bias_regression(&obs).unwrap();
        assert!((fit.coefficients[1] - 0.01).abs() < 0.005);
        assert!(fit.coefficients[1] > 0.0 && fit.p_values[1] < 0.01);
    }
}
