//! Normalized distances between node coefficient paths and agglomerative
//! clustering on them.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::GroupStructure;
use crate::linalg::{ridge_inv2, sym_inv_clamped, Mat2};
use crate::local::{
    delta_blocks, fit_all_nodes, fit_observation_paths, residuals, sigma_hat, singular, CovPlugins, FitMode,
    LocalData, NodePaths,
};

/// `tau*_l = l / (L + 1)`, `l = 1..L`.
pub fn grid_points(l: usize) -> Result<Vec<f64>> {
    if l < 2 {
        return Err(Error::invalid(format!("grid needs at least 2 points, got {l}")));
    }
    Ok((1..=l).map(|k| k as f64 / (l + 1) as f64).collect())
}

/// Default grid size `min(T, 100)`.
pub fn default_grid_size(t_len: usize) -> usize {
    t_len.min(100)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    d: DMatrix<f64>,
    grid: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry, zero diagonal, finiteness and nonnegativity.
    pub fn new(d: DMatrix<f64>, grid: Vec<f64>) -> Result<Self> {
        let n = d.nrows();
        if d.ncols() != n {
            return Err(Error::invalid("distance matrix must be square"));
        }
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("distance diagonal at {i} is nonzero")));
            }
            for j in 0..n {
                let v = d[(i, j)];
                if !v.is_finite() || v < 0.0 || v != d[(j, i)] {
                    return Err(Error::invalid(format!("distance entry ({i},{j}) invalid")));
                }
            }
        }
        Ok(DistanceMatrix { d, grid })
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Nodes relabeled so that new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        DistanceMatrix {
            d: DMatrix::from_fn(n, n, |a, b| self.d[(perm[a], perm[b])]),
            grid: self.grid.clone(),
        }
    }
}

#[inline]
fn quad_form(d: [f64; 2], sigma: &Mat2) -> Result<f64> {
    if d == [0.0, 0.0] {
        return Ok(0.0);
    }
    let inv = sym_inv_clamped(sigma)?;
    let v = Vector2::new(d[0], d[1]);
    Ok((v.transpose() * inv * v)[(0, 0)].max(0.0))
}

fn path_value(paths: &NodePaths, i: usize, l: usize) -> Result<[f64; 2]> {
    paths.get(i, l).ok_or_else(|| Error::InsufficientLocalData {
        node: Some(i),
        tau: paths.grid()[l],
        reason: "missing preliminary estimate".into(),
    })
}

/// `(1/L) sum_l d_ij(tau_l)^T Sigma_ij(tau_l)^-1 d_ij(tau_l)` for one pair.
pub fn pair_distance(
    data: &LocalData<'_>,
    paths: &NodePaths,
    plugins: &CovPlugins,
    i: usize,
    j: usize,
) -> Result<f64> {
    if i == j {
        return Err(Error::invalid("pair_distance needs i != j"));
    }
    let grid = paths.grid();
    let mut acc = 0.0;
    for (l, &tau) in grid.iter().enumerate() {
        let bi = path_value(paths, i, l)?;
        let bj = path_value(paths, j, l)?;
        let d = [bi[0] - bj[0], bi[1] - bj[1]];
        if d == [0.0, 0.0] {
            continue;
        }
        let sigma = plugins.sigma_pair(data, i, j, tau)?;
        acc += quad_form(d, &sigma)?;
    }
    Ok(acc / grid.len() as f64)
}

/// All pairwise distances. Moment matrices are formed once per grid point.
pub fn distance_matrix(data: &LocalData<'_>, paths: &NodePaths, plugins: &CovPlugins) -> Result<DistanceMatrix> {
    let n = data.n();
    if paths.n() != n {
        return Err(Error::invalid("paths do not match the panel"));
    }
    paths.require_complete()?;
    let grid = paths.grid().to_vec();
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for (l, &tau) in grid.iter().enumerate() {
        let blocks = delta_blocks(data, tau, plugins.h);
        let invs = (0..n)
            .map(|i| ridge_inv2(&blocks.get(i, i)).ok_or_else(|| singular(i, tau)))
            .collect::<Result<Vec<_>>>()?;
        let rows = (0..n)
            .into_par_iter()
            .map(|i| {
                let bi = paths.get(i, l).expect("complete");
                ((i + 1)..n)
                    .map(|j| {
                        let bj = paths.get(j, l).expect("complete");
                        let d = [bi[0] - bj[0], bi[1] - bj[1]];
                        if d == [0.0, 0.0] {
                            return Ok(0.0);
                        }
                        let sigma = plugins.sigma_pair_from(i, j, &invs[i], &invs[j], &blocks.get(i, j));
                        quad_form(d, &sigma)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, row) in rows.into_iter().enumerate() {
            for (k, v) in row.into_iter().enumerate() {
                acc[(i, i + 1 + k)] += v;
            }
        }
    }
    let lf = grid.len() as f64;
    let d = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => acc[(i, j)] / lf,
        std::cmp::Ordering::Greater => acc[(j, i)] / lf,
        std::cmp::Ordering::Equal => 0.0,
    });
    DistanceMatrix::new(d, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkageRule {
    Single,
    #[default]
    Complete,
    Average,
}

impl FromStr for LinkageRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(LinkageRule::Single),
            "complete" => Ok(LinkageRule::Complete),
            "average" => Ok(LinkageRule::Average),
            other => Err(Error::invalid(format!("unknown linkage `{other}`"))),
        }
    }
}

impl std::fmt::Display for LinkageRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LinkageRule::Single => "single",
            LinkageRule::Complete => "complete",
            LinkageRule::Average => "average",
        })
    }
}

/// One merge: clusters are named by their smallest member node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// The sequence of merges performed by agglomerative clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeTrace {
    n: usize,
    merges: Vec<Merge>,
}

impl MergeTrace {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Smallest cluster count reachable by this trace.
    pub fn min_k(&self) -> usize {
        self.n - self.merges.len()
    }

    /// Partition after the first `n - k` merges, labels renumbered by smallest member.
    pub fn cut(&self, k: usize) -> Result<GroupStructure> {
        if k < self.min_k() || k > self.n || k == 0 {
            return Err(Error::invalid(format!(
                "cannot cut trace at K={k} (reachable {}..={})",
                self.min_k().max(1),
                self.n
            )));
        }
        let mut rep: Vec<usize> = (0..self.n).collect();
        for m in &self.merges[..self.n - k] {
            for r in rep.iter_mut() {
                if *r == m.b {
                    *r = m.a;
                }
            }
        }
        GroupStructure::from_labels(&rep)
    }

    /// CSV with columns `step,cluster_a,cluster_b,linkage_distance` (1-based nodes).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,cluster_a,cluster_b,linkage_distance\n");
        for (k, m) in self.merges.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{:.16e}", k + 1, m.a + 1, m.b + 1, m.distance);
        }
        s
    }
}

/// Agglomerative clustering down to `stop_at` clusters, recording every merge.
///
/// At each step the pair of active clusters with the smallest linkage distance
/// merges; ties go to the lexicographically smallest `(a, b)` pair of
/// representative (smallest-member) indices.
pub fn build_trace(dist: &DistanceMatrix, rule: LinkageRule, stop_at: usize) -> Result<MergeTrace> {
    let n = dist.n();
    if stop_at < 1 || stop_at > n {
        return Err(Error::invalid(format!("target cluster count {stop_at} outside 1..={n}")));
    }
    // Cluster slots are indexed by their representative node.
    let mut table = dist.matrix().clone();
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut merges = Vec::with_capacity(n - stop_at);
    for _ in 0..n - stop_at {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..n {
            if !active[a] {
                continue;
            }
            for b in a + 1..n {
                if !active[b] {
                    continue;
                }
                let v = table[(a, b)];
                if best.is_none_or(|(_, _, bv)| v < bv) {
                    best = Some((a, b, v));
                }
            }
        }
        let (a, b, v) = best.expect("at least two active clusters");
        for c in 0..n {
            if !active[c] || c == a || c == b {
                continue;
            }
            let (da, db) = (table[(a, c)], table[(b, c)]);
            let nv = match rule {
                LinkageRule::Single => da.min(db),
                LinkageRule::Complete => da.max(db),
                LinkageRule::Average => (size[a] as f64 * da + size[b] as f64 * db) / (size[a] + size[b]) as f64,
            };
            table[(a, c)] = nv;
            table[(c, a)] = nv;
        }
        active[b] = false;
        size[a] += size[b];
        merges.push(Merge { a, b, distance: v });
    }
    Ok(MergeTrace { n, merges })
}

/// Partition into `target_k` clusters.
pub fn agglomerate(dist: &DistanceMatrix, target_k: usize, rule: LinkageRule) -> Result<GroupStructure> {
    build_trace(dist, rule, target_k)?.cut(target_k)
}

#[derive(Debug, Clone)]
pub struct ClusterConfig {
    /// Preliminary bandwidth.
    pub h: f64,
    /// Grid size `L`.
    pub grid_size: usize,
    pub rule: LinkageRule,
    pub mode: FitMode,
}

#[derive(Debug, Clone)]
pub struct ClusterOutput {
    pub distance: DistanceMatrix,
    /// Full dendrogram down to one cluster.
    pub trace: MergeTrace,
    /// Preliminary estimates on the clustering grid.
    pub grid_paths: NodePaths,
    /// Plain preliminary estimates at each observation time.
    pub obs_paths: NodePaths,
    pub plugins: CovPlugins,
}

/// Preliminary fits, covariance plug-ins, distance matrix and full dendrogram.
pub fn full_pipeline(data: &LocalData<'_>, cfg: &ClusterConfig) -> Result<ClusterOutput> {
    let grid = grid_points(cfg.grid_size)?;
    let obs_paths = fit_observation_paths(data, cfg.h);
    let res = residuals(data, &obs_paths)?;
    let plugins = CovPlugins::new(sigma_hat(&res), cfg.h, cfg.mode.effective_kernel().nu0());
    let grid_paths = fit_all_nodes(data, &grid, cfg.h, cfg.mode)?;
    let distance = distance_matrix(data, &grid_paths, &plugins)?;
    let trace = build_trace(&distance, cfg.rule, 1)?;
    Ok(ClusterOutput {
        distance,
        trace,
        grid_paths,
        obs_paths,
        plugins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(rows: &[&[f64]]) -> DistanceMatrix {
        let n = rows.len();
        DistanceMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]), vec![0.5]).unwrap()
    }

    #[test]
    fn grid_values() {
        assert!(grid_points(1).is_err());
        assert_eq!(grid_points(3).unwrap(), vec![0.25, 0.5, 0.75]);
        let g = grid_points(99).unwrap();
        assert_eq!(g.len(), 99);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[98] - 0.99).abs() < 1e-15);
        for w in g.windows(2) {
            assert!((w[1] - w[0] - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_traced_complete_linkage() {
        let d = dm(&[&[0., 1., 9., 9.], &[1., 0., 9., 9.], &[9., 9., 0., 2.], &[9., 9., 2., 0.]]);
        let g = agglomerate(&d, 2, LinkageRule::Complete).unwrap();
        assert_eq!(g.membership(), &[0, 0, 1, 1]);
        let t = build_trace(&d, LinkageRule::Complete, 1).unwrap();
        assert_eq!((t.merges()[0].a, t.merges()[0].b, t.merges()[0].distance), (0, 1, 1.0));
        assert_eq!((t.merges()[1].a, t.merges()[1].b, t.merges()[1].distance), (2, 3, 2.0));
        assert_eq!(t.merges()[2].distance, 9.0);
    }

    #[test]
    fn extremes() {
        let d = dm(&[&[0., 1., 4.], &[1., 0., 2.], &[4., 2., 0.]]);
        assert_eq!(agglomerate(&d, 3, LinkageRule::Single).unwrap(), GroupStructure::singletons(3));
        assert_eq!(agglomerate(&d, 1, LinkageRule::Average).unwrap(), GroupStructure::single(3));
        assert!(agglomerate(&d, 0, LinkageRule::Single).is_err());
        assert!(agglomerate(&d, 4, LinkageRule::Single).is_err());
    }

    #[test]
    fn linkages_differ() {
        // Chain 0-1-2 close, 3 far from 0 but close to 2.
        let d = dm(&[
            &[0., 1., 5., 6.],
            &[1., 0., 1.5, 5.],
            &[5., 1.5, 0., 1.8],
            &[6., 5., 1.8, 0.],
        ]);
        let single = agglomerate(&d, 2, LinkageRule::Single).unwrap();
        let complete = agglomerate(&d, 2, LinkageRule::Complete).unwrap();
        assert_eq!(single.membership(), &[0, 0, 0, 1]);
        assert_eq!(complete.membership(), &[0, 0, 1, 1]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let d = dm(&[&[0., 1., 1.], &[1., 0., 1.], &[1., 1., 0.]]);
        let t = build_trace(&d, LinkageRule::Single, 1).unwrap();
        assert_eq!((t.merges()[0].a, t.merges()[0].b), (0, 1));
    }

    #[test]
    fn trace_csv_header() {
        let d = dm(&[&[0., 1.], &[1., 0.]]);
        let t = build_trace(&d, LinkageRule::Complete, 1).unwrap();
        assert!(t.to_csv().starts_with("step,cluster_a,cluster_b,linkage_distance\n1,1,2,"));
    }

    #[test]
    fn rejects_invalid_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(DistanceMatrix::new(m, vec![]).is_err());
    }
}
