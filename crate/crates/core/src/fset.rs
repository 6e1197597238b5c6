use std::cmp::Ordering;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An immutable set of feature indices into a dataset's feature universe.
///
/// Indices are stored sorted and deduplicated, so equality, hashing and the
/// canonical subset order are all well defined. The canonical order used for
/// tie-breaking everywhere in the crate is: fewer features first, then
/// lexicographic on the sorted index list.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FeatureSet {
    indices: Vec<usize>,
}

impl FeatureSet {
    pub fn from_indices<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut indices: Vec<usize> = iter.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        FeatureSet { indices }
    }

    /// Builds the set from a bitmask; bit `i` selects feature `i`.
    pub fn from_bitmask(mask: u64) -> Self {
        let indices = (0..64).filter(|i| mask >> i & 1 == 1).collect();
        FeatureSet { indices }
    }

    /// The bitmask form. Only valid when every index is below 64.
    pub fn bitmask(&self) -> u64 {
        debug_assert!(self.indices.last().is_none_or(|&i| i < 64));
        self.indices.iter().fold(0u64, |m, &i| m | 1 << i)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn is_superset_of(&self, other: &FeatureSet) -> bool {
        other.indices.iter().all(|&i| self.contains(i))
    }

    /// True when every index addresses one of `n_features` features.
    pub fn within_universe(&self, n_features: usize) -> bool {
        self.indices.last().is_none_or(|&i| i < n_features)
    }

    /// Resolves indices to names. Panics if an index is out of range.
    pub fn names<'a>(&self, universe: &'a [String]) -> Vec<&'a str> {
        self.indices.iter().map(|&i| universe[i].as_str()).collect()
    }

    /// Comma-separated canonical rendering, e.g. `"age, bmi"`.
    pub fn render_names(&self, universe: &[String]) -> String {
        self.names(universe).join(", ")
    }
}

/// Canonical subset order: smaller set first, then lexicographic on indices.
impl Ord for FeatureSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.indices
            .len()
            .cmp(&other.indices.len())
            .then_with(|| self.indices.cmp(&other.indices))
    }
}

impl PartialOrd for FeatureSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FeatureSet{:?}", self.indices)
    }
}

impl Serialize for FeatureSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.indices.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FeatureSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let indices = Vec::<usize>::deserialize(deserializer)?;
        if indices.is_empty() {
            return Err(D::Error::custom("feature set must not be empty"));
        }
        Ok(FeatureSet::from_indices(indices))
    }
}
