//! Inter-rater agreement on nominal labels.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgreementError {
    #[error("rating matrix has no items")]
    Empty,
    #[error("item {item} has {found} ratings but item 0 has {expected}")]
    UnequalRatings {
        item: usize,
        expected: usize,
        found: usize,
    },
    #[error("every item needs at least two ratings")]
    TooFewRatings,
    #[error("no item has two or more ratings")]
    NoPairableValues,
}

/// Items × raters grid of nominal labels; `None` marks a missing rating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatingMatrix {
    labels: Vec<Vec<Option<String>>>,
    categories: BTreeSet<String>,
}

impl RatingMatrix {
    /// Rows shorter than the widest row are padded with missing ratings.
    pub fn new(labels: Vec<Vec<Option<String>>>) -> RatingMatrix {
        let width = labels.iter().map(Vec::len).max().unwrap_or(0);
        let labels: Vec<Vec<Option<String>>> = labels
            .into_iter()
            .map(|mut row| {
                row.resize(width, None);
                row
            })
            .collect();
        let categories = labels.iter().flatten().flatten().cloned().collect();
        RatingMatrix { labels, categories }
    }

    /// Convenience constructor for complete matrices.
    pub fn complete<S: AsRef<str>>(rows: &[Vec<S>]) -> RatingMatrix {
        RatingMatrix::new(
            rows.iter()
                .map(|r| r.iter().map(|s| Some(s.as_ref().to_string())).collect())
                .collect(),
        )
    }

    pub fn items(&self) -> usize {
        self.labels.len()
    }

    pub fn raters(&self) -> usize {
        self.labels.first().map_or(0, Vec::len)
    }

    pub fn labels(&self) -> &[Vec<Option<String>>] {
        &self.labels
    }

    pub fn categories(&self) -> &BTreeSet<String> {
        &self.categories
    }

    fn item_counts(&self, item: usize) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for l in self.labels[item].iter().flatten() {
            *counts.entry(l.as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// True when every rating is the same single category, where expected
    /// disagreement is zero and α is taken to be 1.
    pub fn is_degenerate(&self) -> bool {
        self.categories.len() <= 1
    }
}

/// Krippendorff's α for nominal data, from the coincidence matrix. Items
/// with fewer than two ratings do not contribute. When all pairable values
/// share one category the expected disagreement is zero and 1.0 is
/// returned (see [`RatingMatrix::is_degenerate`]).
pub fn krippendorff_alpha(matrix: &RatingMatrix) -> Result<f64, AgreementError> {
    if matrix.items() == 0 {
        return Err(AgreementError::Empty);
    }
    let cats: Vec<&str> = matrix.categories.iter().map(String::as_str).collect();
    let index = |c: &str| cats.binary_search(&c).expect("label is a category");
    let k = cats.len();
    let mut coincidence = vec![vec![0.0f64; k]; k];
    for item in 0..matrix.items() {
        let counts = matrix.item_counts(item);
        let m: usize = counts.values().sum();
        if m < 2 {
            continue;
        }
        for (&a, &na) in &counts {
            for (&b, &nb) in &counts {
                let pairs = if a == b { na * (na - 1) } else { na * nb };
                coincidence[index(a)][index(b)] += pairs as f64 / (m - 1) as f64;
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    if n < 2.0 {
        return Err(AgreementError::NoPairableValues);
    }
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c != d {
                observed += coincidence[c][d];
                expected += marginals[c] * marginals[d];
            }
        }
    }
    if expected == 0.0 {
        log::info!("all ratings fall in one category; alpha taken as 1");
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

/// Fleiss' κ. Every item must carry the same number (at least two) of
/// ratings; missing cells are allowed as long as the counts match.
pub fn fleiss_kappa(matrix: &RatingMatrix) -> Result<f64, AgreementError> {
    if matrix.items() == 0 {
        return Err(AgreementError::Empty);
    }
    let per_item: Vec<BTreeMap<&str, usize>> =
        (0..matrix.items()).map(|i| matrix.item_counts(i)).collect();
    let n: usize = per_item[0].values().sum();
    for (item, counts) in per_item.iter().enumerate() {
        let found: usize = counts.values().sum();
        if found != n {
            return Err(AgreementError::UnequalRatings {
                item,
                expected: n,
                found,
            });
        }
    }
    if n < 2 {
        return Err(AgreementError::TooFewRatings);
    }
    let items = per_item.len() as f64;
    let nf = n as f64;
    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    let mut p_bar = 0.0;
    for counts in &per_item {
        let mut sq = 0usize;
        for (&c, &v) in counts {
            *totals.entry(c).or_insert(0) += v;
            sq += v * v;
        }
        p_bar += (sq as f64 - nf) / (nf * (nf - 1.0));
    }
    p_bar /= items;
    let p_e: f64 = totals
        .values()
        .map(|&t| {
            let p = t as f64 / (items * nf);
            p * p
        })
        .sum();
    if p_e >= 1.0 {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankedOutcome {
    pub winner: Option<String>,
    /// Categories still tied after rank points; empty when resolved.
    pub tied: Vec<String>,
}

impl RankedOutcome {
    pub fn needs_discussion(&self) -> bool {
        self.winner.is_none()
    }
}

/// Resolves ranked ballots (best first, up to three choices each): the
/// plurality of first choices wins, ties go to the higher rank-point total
/// (3, 2, 1 for first, second, third), and anything still tied is left for
/// manual resolution.
pub fn ranked_choice<S: AsRef<str>>(ballots: &[Vec<S>]) -> RankedOutcome {
    let mut firsts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut points: BTreeMap<&str, usize> = BTreeMap::new();
    for ballot in ballots {
        for (rank, choice) in ballot.iter().take(3).enumerate() {
            let c = choice.as_ref();
            *points.entry(c).or_insert(0) += 3 - rank;
            if rank == 0 {
                *firsts.entry(c).or_insert(0) += 1;
            }
        }
    }
    let Some(&top) = firsts.values().max() else {
        return RankedOutcome {
            winner: None,
            tied: Vec::new(),
        };
    };
    let leaders: Vec<&str> = firsts
        .iter()
        .filter(|(_, &v)| v == top)
        .map(|(&c, _)| c)
        .collect();
    let best = leaders.iter().map(|c| points[c]).max().unwrap_or(0);
    let finalists: Vec<&str> = leaders.into_iter().filter(|c| points[c] == best).collect();
    if finalists.len() == 1 {
        RankedOutcome {
            winner: Some(finalists[0].to_string()),
            tied: Vec::new(),
        }
    } else {
        RankedOutcome {
            winner: None,
            tied: finalists.into_iter().map(str::to_string).collect(),
        }
    }
}
