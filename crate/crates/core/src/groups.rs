use crate::error::{Error, Result};

/// A partition of node indices `0..n` into `k` nonempty groups.
///
/// Labels are stored zero-based; files and reports use one-based labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupStructure {
    k: usize,
    membership: Vec<usize>,
}

impl GroupStructure {
    pub fn new(k: usize, membership: Vec<usize>) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("group count must be positive"));
        }
        let mut sizes = vec![0usize; k];
        for (i, &g) in membership.iter().enumerate() {
            if g >= k {
                return Err(Error::invalid(format!("node {i} has label {g} outside 0..{k}")));
            }
            sizes[g] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::invalid(format!("group {} is empty", empty + 1)));
        }
        Ok(GroupStructure { k, membership })
    }

    /// Builds a partition from arbitrary labels, renumbering groups in order of
    /// their smallest member node.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        let mut membership = Vec::with_capacity(labels.len());
        for &l in labels {
            let next = map.len();
            membership.push(*map.entry(l).or_insert(next));
        }
        GroupStructure::new(map.len(), membership)
    }

    pub fn single(n: usize) -> Self {
        GroupStructure {
            k: 1,
            membership: vec![0; n],
        }
    }

    pub fn singletons(n: usize) -> Self {
        GroupStructure {
            k: n,
            membership: (0..n).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.membership.len()
    }

    pub fn label(&self, node: usize) -> usize {
        self.membership[node]
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    /// Member nodes of each group, in increasing node order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &g) in self.membership.iter().enumerate() {
            out[g].push(i);
        }
        out
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        self.membership
            .iter()
            .enumerate()
            .filter_map(|(i, &g)| (g == group).then_some(i))
            .collect()
    }

    /// Fraction of nodes whose estimated group's dominant true group contains them.
    pub fn purity(&self, truth: &GroupStructure) -> f64 {
        assert_eq!(self.n(), truth.n(), "purity: partitions of different sizes");
        let mut counts = vec![vec![0usize; truth.k]; self.k];
        for (i, &g) in self.membership.iter().enumerate() {
            counts[g][truth.membership[i]] += 1;
        }
        let hits: usize = counts.iter().map(|row| *row.iter().max().unwrap_or(&0)).sum();
        hits as f64 / self.n() as f64
    }

    /// For each estimated group, the true group sharing the most members
    /// (ties to the smaller true label).
    pub fn majority_map(&self, truth: &GroupStructure) -> Vec<usize> {
        let mut counts = vec![vec![0usize; truth.k]; self.k];
        for (i, &g) in self.membership.iter().enumerate() {
            counts[g][truth.membership[i]] += 1;
        }
        counts
            .iter()
            .map(|row| {
                let mut best = 0;
                for (j, &c) in row.iter().enumerate() {
                    if c > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_out_of_range() {
        assert!(GroupStructure::new(2, vec![0, 0, 0]).is_err());
        assert!(GroupStructure::new(2, vec![0, 2]).is_err());
        assert!(GroupStructure::new(0, vec![]).is_err());
    }

    #[test]
    fn renumbers_by_smallest_member() {
        let g = GroupStructure::from_labels(&[7, 3, 7, 3, 1]).unwrap();
        assert_eq!(g.membership(), &[0, 1, 0, 1, 2]);
    }

    #[test]
    fn purity_hand_case() {
        let est = GroupStructure::new(2, vec![0, 0, 1, 1]).unwrap();
        let truth = GroupStructure::new(2, vec![0, 0, 0, 1]).unwrap();
        assert!((est.purity(&truth) - 0.75).abs() < 1e-15);
        assert!((truth.purity(&truth) - 1.0).abs() < 1e-15);
    }
}
