//! Annotation-quality statistics for description user studies: mean 5-point
//! Likert scores, inter-annotator agreement as the percentage of items with
//! an exactly identical rating from every annotator, and pairwise majority
//! voting between candidate descriptions.
//!
//! Agreement here is deliberately raw (no chance correction): with two
//! annotators and exact-match counting it reads directly as "how often did
//! both give the same score".

use serde::Deserialize;
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QualError {
    #[error("empty table")]
    EmptyTable,
    #[error("rating {rating} outside 1..=5 (item {item}, annotator {annotator})")]
    RatingOutOfRange {
        item: String,
        annotator: String,
        rating: i64,
    },
    #[error("duplicate cell: item {item}, annotator {annotator}")]
    DuplicateCell { item: String, annotator: String },
    #[error("missing cell: item {item}, annotator {annotator}")]
    MissingCell { item: String, annotator: String },
    #[error("need at least 2 annotators, have {0}")]
    FewAnnotators(usize),
    #[error("identical candidates in a pair: {0}")]
    IdenticalCandidates(String),
    #[error("vote for unknown candidate {candidate} (pair has {a} and {b})")]
    UnknownCandidate {
        candidate: String,
        a: String,
        b: String,
    },
    #[error("no votes")]
    NoVotes,
    #[error("pair {pair} has {count} candidates, at most 2 allowed")]
    TooManyCandidates { pair: String, count: usize },
    #[error("voter {voter} voted twice in pair {pair}")]
    DuplicateVoter { pair: String, voter: String },
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for QualError {
    fn from(e: csv::Error) -> Self {
        QualError::Csv(e.to_string())
    }
}

/// A complete item x annotator matrix of Likert ratings in 1..=5.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingTable {
    pub items: Vec<String>,
    pub annotators: Vec<String>,
    ratings: Vec<u8>,
}

impl RatingTable {
    /// Build from row-major ratings (item-major, annotator-minor).
    pub fn new(
        items: Vec<String>,
        annotators: Vec<String>,
        ratings: Vec<u8>,
    ) -> Result<Self, QualError> {
        if items.is_empty() || annotators.is_empty() {
            return Err(QualError::EmptyTable);
        }
        if ratings.len() != items.len() * annotators.len() {
            // Complete-matrix shape is part of the type's contract.
            return Err(QualError::MissingCell {
                item: items.len().to_string(),
                annotator: annotators.len().to_string(),
            });
        }
        for (idx, &r) in ratings.iter().enumerate() {
            if !(1..=5).contains(&r) {
                return Err(QualError::RatingOutOfRange {
                    item: items[idx / annotators.len()].clone(),
                    annotator: annotators[idx % annotators.len()].clone(),
                    rating: i64::from(r),
                });
            }
        }
        Ok(RatingTable {
            items,
            annotators,
            ratings,
        })
    }

    /// Build from (item, annotator, rating) records; every item must be
    /// rated by every annotator exactly once.
    pub fn from_records(records: &[(String, String, i64)]) -> Result<Self, QualError> {
        if records.is_empty() {
            return Err(QualError::EmptyTable);
        }
        let mut items: Vec<String> = Vec::new();
        let mut annotators: Vec<String> = Vec::new();
        let mut cells: HashMap<(String, String), u8> = HashMap::new();
        for (item, annotator, rating) in records {
            if !(1..=5).contains(rating) {
                return Err(QualError::RatingOutOfRange {
                    item: item.clone(),
                    annotator: annotator.clone(),
                    rating: *rating,
                });
            }
            if !items.contains(item) {
                items.push(item.clone());
            }
            if !annotators.contains(annotator) {
                annotators.push(annotator.clone());
            }
            if cells
                .insert((item.clone(), annotator.clone()), *rating as u8)
                .is_some()
            {
                return Err(QualError::DuplicateCell {
                    item: item.clone(),
                    annotator: annotator.clone(),
                });
            }
        }
        let mut ratings = Vec::with_capacity(items.len() * annotators.len());
        for item in &items {
            for annotator in &annotators {
                match cells.get(&(item.clone(), annotator.clone())) {
                    Some(&r) => ratings.push(r),
                    None => {
                        return Err(QualError::MissingCell {
                            item: item.clone(),
                            annotator: annotator.clone(),
                        })
                    }
                }
            }
        }
        RatingTable::new(items, annotators, ratings)
    }

    pub fn rating(&self, item: usize, annotator: usize) -> u8 {
        self.ratings[item * self.annotators.len() + annotator]
    }

    fn item_row(&self, item: usize) -> &[u8] {
        let w = self.annotators.len();
        &self.ratings[item * w..(item + 1) * w]
    }
}

#[derive(Debug, Deserialize)]
struct RatingRow {
    item_id: String,
    annotator_id: String,
    rating: i64,
}

/// Read a ratings CSV with header `item_id, annotator_id, rating`.
pub fn read_ratings_csv(path: &Path) -> Result<RatingTable, QualError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut records = Vec::new();
    for row in reader.deserialize::<RatingRow>() {
        let row = row?;
        records.push((row.item_id, row.annotator_id, row.rating));
    }
    RatingTable::from_records(&records)
}

/// Arithmetic mean over every cell of the table.
pub fn likert_mean(table: &RatingTable) -> f64 {
    let sum: u64 = table.ratings.iter().map(|&r| u64::from(r)).sum();
    sum as f64 / table.ratings.len() as f64
}

/// Percentage of items on which all annotators gave exactly the same
/// rating. Requires at least two annotators.
pub fn iaa_percent(table: &RatingTable) -> Result<f64, QualError> {
    if table.annotators.len() < 2 {
        return Err(QualError::FewAnnotators(table.annotators.len()));
    }
    let agreed = (0..table.items.len())
        .filter(|&i| {
            let row = table.item_row(i);
            row.iter().all(|&r| r == row[0])
        })
        .count();
    Ok(100.0 * agreed as f64 / table.items.len() as f64)
}

/// Votes between two candidate descriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseVotes {
    pub candidate_a: String,
    pub candidate_b: String,
    /// Each vote names the chosen candidate.
    pub votes: Vec<String>,
}

impl PairwiseVotes {
    pub fn new(
        candidate_a: impl Into<String>,
        candidate_b: impl Into<String>,
        votes: Vec<String>,
    ) -> Result<Self, QualError> {
        let candidate_a = candidate_a.into();
        let candidate_b = candidate_b.into();
        if candidate_a == candidate_b {
            return Err(QualError::IdenticalCandidates(candidate_a));
        }
        if votes.is_empty() {
            return Err(QualError::NoVotes);
        }
        for vote in &votes {
            if *vote != candidate_a && *vote != candidate_b {
                return Err(QualError::UnknownCandidate {
                    candidate: vote.clone(),
                    a: candidate_a,
                    b: candidate_b,
                });
            }
        }
        Ok(PairwiseVotes {
            candidate_a,
            candidate_b,
            votes,
        })
    }
}

/// Majority-vote outcome; an exact tie is its own outcome rather than a
/// silent pick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VoteOutcome {
    Winner(String),
    Tie,
}

/// The candidate with strictly more votes wins.
pub fn majority_vote(votes: &PairwiseVotes) -> VoteOutcome {
    let a = votes.votes.iter().filter(|v| **v == votes.candidate_a).count();
    let b = votes.votes.len() - a;
    match a.cmp(&b) {
        std::cmp::Ordering::Greater => VoteOutcome::Winner(votes.candidate_a.clone()),
        std::cmp::Ordering::Less => VoteOutcome::Winner(votes.candidate_b.clone()),
        std::cmp::Ordering::Equal => VoteOutcome::Tie,
    }
}

#[derive(Debug, Deserialize)]
struct VoteRow {
    pair_id: String,
    candidate: String,
    voter_id: String,
}

/// One parsed vote record from the votes CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteRecord {
    pub pair_id: String,
    pub candidate: String,
    pub voter_id: String,
}

/// Read a votes CSV with header `pair_id, candidate, voter_id`.
pub fn read_votes_csv(path: &Path) -> Result<Vec<VoteRecord>, QualError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut records = Vec::new();
    for row in reader.deserialize::<VoteRow>() {
        let row = row?;
        records.push(VoteRecord {
            pair_id: row.pair_id,
            candidate: row.candidate,
            voter_id: row.voter_id,
        });
    }
    Ok(records)
}

/// Group vote records by pair (first-appearance order) and compute each
/// pair's outcome. A pair may name at most two candidates, and no voter may
/// vote twice in the same pair.
pub fn tally_votes(records: &[VoteRecord]) -> Result<Vec<(String, VoteOutcome)>, QualError> {
    if records.is_empty() {
        return Err(QualError::NoVotes);
    }
    let mut order: Vec<String> = Vec::new();
    let mut by_pair: HashMap<String, Vec<&VoteRecord>> = HashMap::new();
    for record in records {
        if !by_pair.contains_key(&record.pair_id) {
            order.push(record.pair_id.clone());
        }
        by_pair.entry(record.pair_id.clone()).or_default().push(record);
    }

    let mut outcomes = Vec::with_capacity(order.len());
    for pair in order {
        let votes = &by_pair[&pair];
        let mut voters: Vec<&str> = Vec::new();
        let mut candidates: Vec<&str> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for v in votes {
            if voters.contains(&v.voter_id.as_str()) {
                return Err(QualError::DuplicateVoter {
                    pair: pair.clone(),
                    voter: v.voter_id.clone(),
                });
            }
            voters.push(&v.voter_id);
            match candidates.iter().position(|c| *c == v.candidate) {
                Some(i) => counts[i] += 1,
                None => {
                    candidates.push(&v.candidate);
                    counts.push(1);
                }
            }
        }
        if candidates.len() > 2 {
            return Err(QualError::TooManyCandidates {
                pair: pair.clone(),
                count: candidates.len(),
            });
        }
        let outcome = if candidates.len() == 1 {
            VoteOutcome::Winner(candidates[0].to_string())
        } else {
            match counts[0].cmp(&counts[1]) {
                std::cmp::Ordering::Greater => VoteOutcome::Winner(candidates[0].to_string()),
                std::cmp::Ordering::Less => VoteOutcome::Winner(candidates[1].to_string()),
                std::cmp::Ordering::Equal => VoteOutcome::Tie,
            }
        };
        outcomes.push((pair, outcome));
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn all_ones_table_matches_harmfulness_row() {
        // Every annotator rated every description 1: mean 1.0, IAA 100%.
        let t = RatingTable::new(strs(&["d1", "d2", "d3"]), strs(&["a1", "a2"]), vec![1; 6])
            .unwrap();
        assert_eq!(likert_mean(&t), 1.0);
        assert_eq!(iaa_percent(&t).unwrap(), 100.0);
    }

    #[test]
    fn mixed_two_item_fixture() {
        // Items rated (3,3) and (4,5): mean 3.75, IAA 50%.
        let t = RatingTable::new(strs(&["d1", "d2"]), strs(&["a1", "a2"]), vec![3, 3, 4, 5])
            .unwrap();
        assert_eq!(iaa_percent(&t).unwrap(), 50.0);
        assert_eq!(likert_mean(&t), 3.75);
    }

    #[test]
    fn one_item_two_annotators_mean() {
        let t = RatingTable::new(strs(&["d1"]), strs(&["a1", "a2"]), vec![3, 4]).unwrap();
        assert_eq!(likert_mean(&t), 3.5);
    }

    #[test]
    fn zero_agreement() {
        let t = RatingTable::new(strs(&["d1", "d2"]), strs(&["a1", "a2"]), vec![1, 2, 4, 5])
            .unwrap();
        assert_eq!(iaa_percent(&t).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_rating_is_rejected() {
        let err = RatingTable::new(strs(&["d1"]), strs(&["a1", "a2"]), vec![3, 6]).unwrap_err();
        assert!(matches!(err, QualError::RatingOutOfRange { rating: 6, .. }));
        let err = RatingTable::new(strs(&["d1"]), strs(&["a1"]), vec![0]).unwrap_err();
        assert!(matches!(err, QualError::RatingOutOfRange { rating: 0, .. }));
    }

    #[test]
    fn empty_table_is_rejected() {
        assert_eq!(
            RatingTable::new(vec![], strs(&["a1"]), vec![]),
            Err(QualError::EmptyTable)
        );
    }

    #[test]
    fn single_annotator_has_no_iaa() {
        let t = RatingTable::new(strs(&["d1"]), strs(&["a1"]), vec![3]).unwrap();
        assert_eq!(iaa_percent(&t), Err(QualError::FewAnnotators(1)));
    }

    #[test]
    fn iaa_invariant_under_annotator_permutation() {
        let t1 = RatingTable::new(
            strs(&["d1", "d2", "d3"]),
            strs(&["a1", "a2"]),
            vec![3, 3, 4, 5, 2, 2],
        )
        .unwrap();
        let t2 = RatingTable::new(
            strs(&["d1", "d2", "d3"]),
            strs(&["a2", "a1"]),
            vec![3, 3, 5, 4, 2, 2],
        )
        .unwrap();
        assert_eq!(iaa_percent(&t1).unwrap(), iaa_percent(&t2).unwrap());
    }

    #[test]
    fn likert_mean_is_bounded() {
        let t = RatingTable::new(strs(&["d1", "d2"]), strs(&["a1"]), vec![1, 5]).unwrap();
        let m = likert_mean(&t);
        assert!((1.0..=5.0).contains(&m));
    }

    #[test]
    fn from_records_rejects_missing_and_duplicate_cells() {
        let complete = vec![
            ("d1".to_string(), "a1".to_string(), 3),
            ("d1".to_string(), "a2".to_string(), 4),
            ("d2".to_string(), "a1".to_string(), 5),
            ("d2".to_string(), "a2".to_string(), 5),
        ];
        let t = RatingTable::from_records(&complete).unwrap();
        assert_eq!(t.items.len(), 2);
        assert_eq!(t.rating(1, 1), 5);

        let missing = &complete[..3];
        assert!(matches!(
            RatingTable::from_records(missing),
            Err(QualError::MissingCell { .. })
        ));

        let mut dup = complete.clone();
        dup.push(("d1".to_string(), "a1".to_string(), 2));
        assert!(matches!(
            RatingTable::from_records(&dup),
            Err(QualError::DuplicateCell { .. })
        ));
    }

    #[test]
    fn majority_vote_cases() {
        let v = PairwiseVotes::new("A", "B", strs(&["A", "B", "A", "A", "B"])).unwrap();
        assert_eq!(majority_vote(&v), VoteOutcome::Winner("A".to_string()));

        let tie = PairwiseVotes::new("A", "B", strs(&["A", "B"])).unwrap();
        assert_eq!(majority_vote(&tie), VoteOutcome::Tie);

        let all_b = PairwiseVotes::new("A", "B", strs(&["B"; 5])).unwrap();
        assert_eq!(majority_vote(&all_b), VoteOutcome::Winner("B".to_string()));
    }

    #[test]
    fn vote_order_does_not_matter_and_relabeling_flips() {
        let forward = PairwiseVotes::new("A", "B", strs(&["A", "A", "B"])).unwrap();
        let shuffled = PairwiseVotes::new("A", "B", strs(&["B", "A", "A"])).unwrap();
        assert_eq!(majority_vote(&forward), majority_vote(&shuffled));

        // Swap the labels on every vote: the winner swaps too.
        let swapped = PairwiseVotes::new("A", "B", strs(&["B", "B", "A"])).unwrap();
        assert_eq!(majority_vote(&swapped), VoteOutcome::Winner("B".to_string()));
    }

    #[test]
    fn invalid_votes_are_rejected() {
        assert_eq!(
            PairwiseVotes::new("A", "A", strs(&["A"])),
            Err(QualError::IdenticalCandidates("A".to_string()))
        );
        assert_eq!(
            PairwiseVotes::new("A", "B", vec![]),
            Err(QualError::NoVotes)
        );
        assert!(matches!(
            PairwiseVotes::new("A", "B", strs(&["C"])),
            Err(QualError::UnknownCandidate { .. })
        ));
    }

    #[test]
    fn ratings_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "item_id,annotator_id,rating").unwrap();
        writeln!(f, "d1,a1,3").unwrap();
        writeln!(f, "d1,a2,3").unwrap();
        writeln!(f, "d2,a1,4").unwrap();
        writeln!(f, "d2,a2,5").unwrap();
        drop(f);
        let t = read_ratings_csv(&path).unwrap();
        assert_eq!(iaa_percent(&t).unwrap(), 50.0);
        assert_eq!(likert_mean(&t), 3.75);
    }

    #[test]
    fn votes_csv_tally() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("votes.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "pair_id,candidate,voter_id").unwrap();
        for (pair, cand, voter) in [
            ("p1", "human", "v1"),
            ("p1", "model", "v2"),
            ("p1", "model", "v3"),
            ("p2", "human", "v1"),
            ("p2", "model", "v2"),
        ] {
            writeln!(f, "{pair},{cand},{voter}").unwrap();
        }
        drop(f);
        let records = read_votes_csv(&path).unwrap();
        let outcomes = tally_votes(&records).unwrap();
        assert_eq!(outcomes.len(), 2);
        assert_eq!(outcomes[0].0, "p1");
        assert_eq!(outcomes[0].1, VoteOutcome::Winner("model".to_string()));
        assert_eq!(outcomes[1].1, VoteOutcome::Tie);
    }

    #[test]
    fn duplicate_voter_in_pair_is_rejected() {
        let records = vec![
            VoteRecord {
                pair_id: "p1".into(),
                candidate: "A".into(),
                voter_id: "v1".into(),
            },
            VoteRecord {
                pair_id: "p1".into(),
                candidate: "B".into(),
                voter_id: "v1".into(),
            },
        ];
        assert!(matches!(
            tally_votes(&records),
            Err(QualError::DuplicateVoter { .. })
        ));
    }
}
