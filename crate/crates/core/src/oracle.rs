//! Exhaustive enumeration and ranking of all 2^n - 1 non-empty feature
//! subsets by held-out test accuracy and mean CV validation accuracy. The
//! table is the ground truth that selections are scored against.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fset::FeatureSet;
use crate::models::{holdout_accuracy, Evaluator};
use crate::tabular::Dataset;

/// Enumeration refuses universes larger than this.
pub const HARD_FEATURE_CAP: usize = 21;
/// Callers should warn above this; 2^n CV runs get expensive quickly.
pub const WARN_FEATURE_CAP: usize = 15;

/// One ranked subset.
#[derive(Clone, Debug)]
pub struct RankEntry {
    pub subset: FeatureSet,
    pub test_accuracy: f64,
    pub val_accuracy: f64,
    pub test_rank: usize,
    pub val_rank: usize,
}

/// All 2^n - 1 entries, indexed by bitmask. Ranks run 1..=2^n-1 with rank 1
/// holding the maximum accuracy; ties receive distinct concurrent ranks
/// under the deterministic order (higher accuracy, then smaller subset, then
/// lexicographic).
#[derive(Clone, Debug)]
pub struct RankTable {
    entries: Vec<RankEntry>,
    n_features: usize,
}

impl RankTable {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Entries ordered by bitmask.
    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, subset: &FeatureSet) -> Option<&RankEntry> {
        if subset.is_empty() || !subset.within_universe(self.n_features) {
            return None;
        }
        self.entries.get(subset.bitmask() as usize - 1)
    }

    /// Renders the table as CSV ordered by bitmask, feature names joined
    /// with `;` inside one column.
    pub fn to_csv(&self, feature_names: &[String]) -> String {
        let mut out = String::from("bitmask,features,test_accuracy,val_accuracy,test_rank,val_rank\n");
        for e in &self.entries {
            let names = e.subset.names(feature_names).join(";");
            let quoted = if names.contains(',') || names.contains('"') {
                format!("\"{}\"", names.replace('"', "\"\""))
            } else {
                names
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.subset.bitmask(),
                quoted,
                e.test_accuracy,
                e.val_accuracy,
                e.test_rank,
                e.val_rank
            ));
        }
        out
    }
}

/// Looks up `(test_rank, val_rank)` for a subset of the table's universe.
pub fn rank_of(table: &RankTable, subset: &FeatureSet) -> Result<(usize, usize)> {
    let entry = table
        .entry(subset)
        .ok_or_else(|| Error::Oracle(format!("subset {subset:?} is outside the table's universe")))?;
    Ok((entry.test_rank, entry.val_rank))
}

fn assign_ranks(
    accuracies: &[f64],
    sets: &[FeatureSet],
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..accuracies.len()).collect();
    order.sort_by(|&a, &b| {
        accuracies[b]
            .total_cmp(&accuracies[a])
            .then_with(|| sets[a].cmp(&sets[b]))
    });
    let mut ranks = vec![0usize; accuracies.len()];
    for (position, &idx) in order.iter().enumerate() {
        ranks[idx] = position + 1;
    }
    ranks
}

/// Evaluates every non-empty subset: validation accuracy through the shared
/// evaluator (so engine and oracle agree to the last bit) and test accuracy
/// by training on all CV rows and scoring the held-out rows. `test` must be
/// disjoint from the evaluator's rows, which the caller's split guarantees.
pub fn enumerate_and_rank(evaluator: &Evaluator, test: &Dataset) -> Result<RankTable> {
    let n = evaluator.dataset().n_features();
    if n == 0 {
        return Err(Error::Oracle("no features to enumerate".to_string()));
    }
    if n > HARD_FEATURE_CAP {
        return Err(Error::Oracle(format!(
            "{n} features means {} subsets; enumeration beyond {HARD_FEATURE_CAP} features is impractical",
            2u64.pow(n as u32) - 1
        )));
    }
    if test.n_features() != n {
        return Err(Error::Oracle("test split has a different feature universe".to_string()));
    }
    let total = (1u64 << n) - 1;
    let sets: Vec<FeatureSet> = (1..=total).map(FeatureSet::from_bitmask).collect();
    let scored: Result<Vec<(f64, f64)>> = sets
        .par_iter()
        .map(|subset| {
            let evaluation = evaluator.evaluate(subset)?;
            let test_accuracy =
                holdout_accuracy(evaluator.dataset(), test, subset, evaluator.spec())?;
            Ok((test_accuracy, evaluation.val_accuracy))
        })
        .collect();
    let scored = scored?;
    let test_accs: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let val_accs: Vec<f64> = scored.iter().map(|s| s.1).collect();
    let test_ranks = assign_ranks(&test_accs, &sets);
    let val_ranks = assign_ranks(&val_accs, &sets);
    let entries = sets
        .into_iter()
        .enumerate()
        .map(|(i, subset)| RankEntry {
            subset,
            test_accuracy: test_accs[i],
            val_accuracy: val_accs[i],
            test_rank: test_ranks[i],
            val_rank: val_ranks[i],
        })
        .collect();
    Ok(RankTable {
        entries,
        n_features: n,
    })
}
