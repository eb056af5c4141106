use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Binary membership vector over `N` features.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSet(Vec<bool>);

impl FeatureSet {
    pub fn empty(n: usize) -> Self {
        FeatureSet(vec![false; n])
    }

    pub fn full(n: usize) -> Self {
        FeatureSet(vec![true; n])
    }

    /// Panics if an index is out of range.
    pub fn from_indices(n: usize, indices: &[usize]) -> Self {
        let mut bits = vec![false; n];
        for &i in indices {
            bits[i] = true;
        }
        FeatureSet(bits)
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        FeatureSet(bits)
    }

    /// Bits of the low `n` positions of `mask`, position 0 first.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        FeatureSet((0..n).map(|i| mask >> i & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Number of selected features.
    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Selected indices in ascending order.
    pub fn indices(&self) -> Vec<usize> {
        self.iter_selected().collect()
    }

    pub fn iter_selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// Inner product with a real vector.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.iter_selected().map(|i| weights[i]).sum()
    }

    /// Deterministic tie-break order: at the first differing position the set
    /// that selects the feature comes first, so lower feature indices win.
    /// `Ordering::Less` means `self` is preferred.
    pub fn tie_break(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match (a, b) {
                (true, false) => return Ordering::Less,
                (false, true) => return Ordering::Greater,
                _ => {}
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_roundtrip() {
        let s = FeatureSet::from_indices(6, &[4, 1]);
        assert_eq!(s.indices(), vec![1, 4]);
        assert_eq!(s.count(), 2);
        assert_eq!(s.to_string(), "010010");
        assert_eq!(FeatureSet::from_mask(3, 0b101).indices(), vec![0, 2]);
    }

    #[test]
    fn tie_break_prefers_low_indices() {
        let a = FeatureSet::from_indices(3, &[0]);
        let b = FeatureSet::from_indices(3, &[1]);
        let c = FeatureSet::from_indices(3, &[2]);
        assert_eq!(a.tie_break(&b), Ordering::Less);
        assert_eq!(c.tie_break(&b), Ordering::Greater);
        assert_eq!(a.tie_break(&a), Ordering::Equal);
    }
}
