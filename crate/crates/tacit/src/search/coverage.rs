//! Vote records, confidence-weighted aggregation, and the coverage matrix.
//!
//! The append-only vote log is the durable source of truth; the coverage
//! matrix is a derived view that can always be rebuilt from it.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::judge::PresentationOrder;

/// One fold's normalized vote: label 1 always means "the hypothesis explains
/// why the higher-scored paper is stronger".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub pair_id: String,
    pub hyp_id: String,
    pub fold: u8,
    pub order: PresentationOrder,
    pub label: u8,
    pub confidence: u8,
    /// True when this vote is the malformed-retry fallback (0, 0).
    pub flagged: bool,
}

/// Aggregated outcome of one (pair, hypothesis) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub final_label: u8,
    /// |sum of confidences agreeing with the final label - sum disagreeing|.
    pub confidence_margin: u32,
    /// All three fold labels identical.
    pub consistent: bool,
}

/// Confidence-weighted 3-fold aggregation: label 1 wins iff its summed
/// confidence strictly exceeds label 0's; ties resolve to 0.
pub fn aggregate_confidence_weighted(votes: &[VoteRecord]) -> Result<CellOutcome> {
    if votes.len() != 3 {
        return Err(Error::WrongVoteCount {
            expected: 3,
            got: votes.len(),
        });
    }
    let sum_one: u32 = votes
        .iter()
        .filter(|v| v.label == 1)
        .map(|v| v.confidence as u32)
        .sum();
    let sum_zero: u32 = votes
        .iter()
        .filter(|v| v.label == 0)
        .map(|v| v.confidence as u32)
        .sum();
    let final_label = u8::from(sum_one > sum_zero);
    Ok(CellOutcome {
        final_label,
        confidence_margin: sum_one.abs_diff(sum_zero),
        consistent: votes.iter().all(|v| v.label == votes[0].label),
    })
}

/// Plain majority label over 3 folds.
pub fn aggregate_majority(votes: &[VoteRecord]) -> Result<u8> {
    if votes.len() != 3 {
        return Err(Error::WrongVoteCount {
            expected: 3,
            got: votes.len(),
        });
    }
    let ones = votes.iter().filter(|v| v.label == 1).count();
    Ok(u8::from(ones >= 2))
}

/// Pair x hypothesis outcome matrix.
#[derive(Debug, Clone, Default)]
pub struct CoverageMatrix {
    entries: BTreeMap<(String, String), CellOutcome>,
    pair_index: Vec<String>,
    hyp_index: Vec<String>,
}

impl CoverageMatrix {
    pub fn new(pair_index: Vec<String>) -> Self {
        CoverageMatrix {
            entries: BTreeMap::new(),
            pair_index,
            hyp_index: Vec::new(),
        }
    }

    pub fn pair_index(&self) -> &[String] {
        &self.pair_index
    }

    pub fn hyp_index(&self) -> &[String] {
        &self.hyp_index
    }

    pub fn add_hypothesis(&mut self, hyp_id: &str) {
        if !self.hyp_index.iter().any(|h| h == hyp_id) {
            self.hyp_index.push(hyp_id.to_string());
        }
    }

    pub fn insert(&mut self, pair_id: &str, hyp_id: &str, outcome: CellOutcome) {
        self.add_hypothesis(hyp_id);
        self.entries
            .insert((pair_id.to_string(), hyp_id.to_string()), outcome);
    }

    pub fn get(&self, pair_id: &str, hyp_id: &str) -> Option<&CellOutcome> {
        self.entries.get(&(pair_id.to_string(), hyp_id.to_string()))
    }

    /// Every (pair, hypothesis) cell filled?
    pub fn check_complete(&self) -> Result<()> {
        let mut missing = Vec::new();
        for pair in &self.pair_index {
            for hyp in &self.hyp_index {
                if !self.entries.contains_key(&(pair.clone(), hyp.clone())) {
                    missing.push((pair.clone(), hyp.clone()));
                }
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            let count = missing.len();
            missing.truncate(8);
            Err(Error::IncompleteMatrix(count, missing))
        }
    }

    /// Pairs whose final label is 0 for every hypothesis.
    pub fn unexplained_set(&self) -> Result<Vec<String>> {
        self.check_complete()?;
        Ok(self
            .pair_index
            .iter()
            .filter(|pair| {
                self.hyp_index
                    .iter()
                    .all(|hyp| self.entries[&((*pair).clone(), hyp.clone())].final_label == 0)
            })
            .cloned()
            .collect())
    }

    /// Fraction of pairs each hypothesis explains.
    pub fn posterior_coverage(&self) -> Result<BTreeMap<String, f64>> {
        self.check_complete()?;
        let n = self.pair_index.len() as f64;
        Ok(self
            .hyp_index
            .iter()
            .map(|hyp| {
                let ones = self
                    .pair_index
                    .iter()
                    .filter(|pair| self.entries[&((*pair).clone(), hyp.clone())].final_label == 1)
                    .count();
                (hyp.clone(), ones as f64 / n)
            })
            .collect())
    }

    /// Final-label column for one hypothesis, in pair-index order.
    pub fn label_column(&self, hyp_id: &str) -> Result<Vec<u8>> {
        self.pair_index
            .iter()
            .map(|pair| {
                self.entries
                    .get(&(pair.clone(), hyp_id.to_string()))
                    .map(|c| c.final_label)
                    .ok_or_else(|| {
                        Error::IncompleteMatrix(1, vec![(pair.clone(), hyp_id.to_string())])
                    })
            })
            .collect()
    }

    /// Mean confidence margin and consistency rate over one hypothesis column.
    pub fn column_margin_consistency(&self, hyp_id: &str) -> Result<(f64, f64)> {
        let mut margin = 0.0;
        let mut consistent = 0.0;
        for pair in &self.pair_index {
            let cell = self
                .entries
                .get(&(pair.clone(), hyp_id.to_string()))
                .ok_or_else(|| {
                    Error::IncompleteMatrix(1, vec![(pair.clone(), hyp_id.to_string())])
                })?;
            margin += cell.confidence_margin as f64;
            consistent += f64::from(cell.consistent);
        }
        let n = self.pair_index.len() as f64;
        Ok((margin / n, consistent / n))
    }

    /// Rebuild the matrix from a vote log (3 votes per cell).
    pub fn from_votes(pair_index: Vec<String>, votes: &[VoteRecord]) -> Result<Self> {
        let mut grouped: BTreeMap<(String, String), Vec<VoteRecord>> = BTreeMap::new();
        let mut hyp_order: Vec<String> = Vec::new();
        for vote in votes {
            if !hyp_order.contains(&vote.hyp_id) {
                hyp_order.push(vote.hyp_id.clone());
            }
            grouped
                .entry((vote.pair_id.clone(), vote.hyp_id.clone()))
                .or_default()
                .push(vote.clone());
        }
        let mut matrix = CoverageMatrix::new(pair_index);
        for hyp in &hyp_order {
            matrix.add_hypothesis(hyp);
        }
        for ((pair, hyp), cell_votes) in grouped {
            let outcome = aggregate_confidence_weighted(&cell_votes)?;
            matrix.insert(&pair, &hyp, outcome);
        }
        Ok(matrix)
    }
}

/// Append votes to a JSONL log.
pub fn append_votes(path: &Path, votes: &[VoteRecord]) -> Result<()> {
    let mut file = std::io::BufWriter::new(
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?,
    );
    for vote in votes {
        serde_json::to_writer(&mut file, vote)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

/// Read a whole vote log.
pub fn read_votes(path: &Path) -> Result<Vec<VoteRecord>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut votes = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        votes.push(serde_json::from_str(&line)?);
    }
    Ok(votes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vote(label: u8, confidence: u8) -> VoteRecord {
        VoteRecord {
            pair_id: "p".into(),
            hyp_id: "h".into(),
            fold: 0,
            order: PresentationOrder::HighFirst,
            label,
            confidence,
            flagged: false,
        }
    }

    #[test]
    fn confidence_weighted_rule_arithmetic() {
        // (1,7),(0,3),(0,5): zeros sum 8 > 7
        let out = aggregate_confidence_weighted(&[vote(1, 7), vote(0, 3), vote(0, 5)]).unwrap();
        assert_eq!(out.final_label, 0);
        assert_eq!(out.confidence_margin, 1);
        assert!(!out.consistent);

        // (1,10),(1,0),(0,9): ones sum 10 > 9
        let out = aggregate_confidence_weighted(&[vote(1, 10), vote(1, 0), vote(0, 9)]).unwrap();
        assert_eq!(out.final_label, 1);
        assert_eq!(out.confidence_margin, 1);

        // tie 5 = 5 resolves to 0
        let out = aggregate_confidence_weighted(&[vote(1, 5), vote(0, 5), vote(0, 0)]).unwrap();
        assert_eq!(out.final_label, 0);
        assert_eq!(out.confidence_margin, 0);
    }

    #[test]
    fn majority_rule() {
        assert_eq!(
            aggregate_majority(&[vote(1, 1), vote(1, 9), vote(0, 2)]).unwrap(),
            1
        );
        assert_eq!(
            aggregate_majority(&[vote(0, 1), vote(0, 1), vote(0, 1)]).unwrap(),
            0
        );
        assert!(matches!(
            aggregate_majority(&[vote(1, 1)]),
            Err(Error::WrongVoteCount { got: 1, .. })
        ));
    }

    #[test]
    fn unexplained_matches_brute_force_on_random_matrix() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pairs: Vec<String> = (0..30).map(|i| format!("p{i}")).collect();
        let hyps: Vec<String> = (0..6).map(|i| format!("h{i}")).collect();
        let mut matrix = CoverageMatrix::new(pairs.clone());
        let mut labels: BTreeMap<(String, String), u8> = BTreeMap::new();
        for p in &pairs {
            for h in &hyps {
                let label = rng.gen_range(0..=1u8);
                labels.insert((p.clone(), h.clone()), label);
                matrix.insert(
                    p,
                    h,
                    CellOutcome {
                        final_label: label,
                        confidence_margin: 1,
                        consistent: true,
                    },
                );
            }
        }
        let expected: Vec<String> = pairs
            .iter()
            .filter(|p| hyps.iter().all(|h| labels[&((*p).clone(), h.clone())] == 0))
            .cloned()
            .collect();
        assert_eq!(matrix.unexplained_set().unwrap(), expected);

        // posterior coverage = column means
        let posterior = matrix.posterior_coverage().unwrap();
        for h in &hyps {
            let mean = pairs
                .iter()
                .filter(|p| labels[&((*p).clone(), h.clone())] == 1)
                .count() as f64
                / pairs.len() as f64;
            assert_eq!(posterior[h], mean);
        }
    }

    #[test]
    fn all_zero_matrix_everything_unexplained() {
        let pairs: Vec<String> = (0..4).map(|i| format!("p{i}")).collect();
        let mut matrix = CoverageMatrix::new(pairs.clone());
        for p in &pairs {
            matrix.insert(
                p,
                "h",
                CellOutcome {
                    final_label: 0,
                    confidence_margin: 0,
                    consistent: true,
                },
            );
        }
        assert_eq!(matrix.unexplained_set().unwrap(), pairs);
    }

    #[test]
    fn incomplete_matrix_lists_missing_cells() {
        let mut matrix = CoverageMatrix::new(vec!["p0".into(), "p1".into()]);
        matrix.insert(
            "p0",
            "h",
            CellOutcome {
                final_label: 1,
                confidence_margin: 2,
                consistent: true,
            },
        );
        match matrix.unexplained_set() {
            Err(Error::IncompleteMatrix(1, cells)) => {
                assert_eq!(cells, vec![("p1".to_string(), "h".to_string())]);
            }
            other => panic!("expected incomplete matrix, got {other:?}"),
        }
    }

    #[test]
    fn vote_log_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("votes.jsonl");
        let votes = vec![vote(1, 7), vote(0, 3)];
        append_votes(&path, &votes).unwrap();
        append_votes(&path, &votes[..1]).unwrap();
        let read = read_votes(&path).unwrap();
        assert_eq!(read.len(), 3);
        assert_eq!(read[0], votes[0]);
    }

    proptest! {
        // permuting the 3 votes never changes the aggregate
        #[test]
        fn aggregation_is_permutation_invariant(
            labels in proptest::collection::vec(0u8..=1, 3),
            confs in proptest::collection::vec(0u8..=10, 3),
            perm in 0usize..6,
        ) {
            let votes: Vec<VoteRecord> = labels
                .iter()
                .zip(&confs)
                .map(|(&l, &c)| vote(l, c))
                .collect();
            let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let permuted: Vec<VoteRecord> =
                orders[perm].iter().map(|&i| votes[i].clone()).collect();
            let a = aggregate_confidence_weighted(&votes).unwrap();
            let b = aggregate_confidence_weighted(&permuted).unwrap();
            prop_assert_eq!(a, b);
            prop_assert_eq!(
                aggregate_majority(&votes).unwrap(),
                aggregate_majority(&permuted).unwrap()
            );
        }
    }
}
