use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::rng_for;

const MAX_ATTEMPTS: usize = 100;

/// Binary adjacency `W` with its row-normalized form `W~` (`w~_ij = w_ij / n_i`).
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    w: DMatrix<f64>,
    wtilde: DMatrix<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl Network {
    /// Validates a binary adjacency matrix (zero diagonal, no isolated node)
    /// and row-normalizes it.
    pub fn from_adjacency(w: DMatrix<f64>) -> Result<Self> {
        let n = w.nrows();
        if n < 2 || w.ncols() != n {
            return Err(Error::invalid(format!(
                "adjacency must be square with at least 2 nodes, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                let v = w[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::invalid(format!("adjacency entry ({i},{j}) = {v} is not binary")));
                }
                if i == j && v != 0.0 {
                    return Err(Error::invalid(format!("adjacency has self-loop at node {i}")));
                }
                if v == 1.0 {
                    neighbors[i].push(j);
                }
            }
            if neighbors[i].is_empty() {
                return Err(Error::invalid(format!("node {i} is isolated (no neighbors)")));
            }
        }
        let mut wtilde = DMatrix::zeros(n, n);
        for (i, nb) in neighbors.iter().enumerate() {
            let inv = 1.0 / nb.len() as f64;
            for &j in nb {
                wtilde[(i, j)] = inv;
            }
        }
        Ok(Network { w, wtilde, neighbors })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn wtilde(&self) -> &DMatrix<f64> {
        &self.wtilde
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// `sum_j w~_ij v_j`.
    #[inline]
    pub fn neighbor_mean(&self, i: usize, v: &[f64]) -> f64 {
        let nb = &self.neighbors[i];
        nb.iter().map(|&j| v[j]).sum::<f64>() / nb.len() as f64
    }

    /// Node relabeling: new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        let w = DMatrix::from_fn(n, n, |a, b| self.w[(perm[a], perm[b])]);
        Network::from_adjacency(w)
    }
}

/// Erdos-Renyi directed adjacency with independent `Bernoulli(edge_prob)`
/// off-diagonal entries, redrawn until no node is isolated.
pub fn gen_adjacency(n: usize, edge_prob: f64, seed: u64) -> Result<Network> {
    if n < 2 {
        return Err(Error::invalid(format!("network needs n >= 2, got {n}")));
    }
    if !(edge_prob > 0.0 && edge_prob <= 1.0) {
        return Err(Error::invalid(format!("edge probability {edge_prob} outside (0, 1]")));
    }
    let mut rng = rng_for(seed);
    for _ in 0..MAX_ATTEMPTS {
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random::<f64>() < edge_prob {
                    w[(i, j)] = 1.0;
                }
            }
        }
        let isolated = (0..n).any(|i| w.row(i).iter().all(|&v| v == 0.0));
        if !isolated {
            return Network::from_adjacency(w);
        }
    }
    Err(Error::GenerationFailure(format!(
        "no network without isolated nodes after {MAX_ATTEMPTS} draws (n={n}, p={edge_prob})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_pair() {
        let net = gen_adjacency(2, 1.0, 0).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(net.adjacency(), &expect);
        assert_eq!(net.wtilde(), &expect);
    }

    #[test]
    fn rows_sum_to_one() {
        let net = gen_adjacency(100, 0.1, 7).unwrap();
        for i in 0..100 {
            assert_eq!(net.adjacency()[(i, i)], 0.0);
            let s: f64 = net.wtilde().row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_fails() {
        assert!(matches!(gen_adjacency(3, 1e-12, 1), Err(Error::GenerationFailure(_))));
        assert!(gen_adjacency(1, 0.5, 1).is_err());
        assert!(gen_adjacency(5, 0.0, 1).is_err());
    }

    #[test]
    fn rejects_bad_adjacency() {
        let iso = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 0., 0., 0., 0.]);
        assert!(Network::from_adjacency(iso).is_err());
        let self_loop = DMatrix::from_row_slice(2, 2, &[1., 1., 1., 0.]);
        assert!(Network::from_adjacency(self_loop).is_err());
        let weighted = DMatrix::from_row_slice(2, 2, &[0., 0.5, 1., 0.]);
        assert!(Network::from_adjacency(weighted).is_err());
    }
}
