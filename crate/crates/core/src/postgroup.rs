//! Post-grouping estimation of the group coefficient paths with plug-in
//! standard errors and pointwise confidence bands.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::groups::GroupStructure;
use crate::kernel::Kernel;
use crate::linalg::{ridge_inv2, symmetrize, Mat2};
use crate::local::{window, LocalData, Moments, NodePaths};
use crate::select::{pooled_fit, pooled_observation_path};
use crate::simulate::{node_coefficients, CoefficientScenario};

/// Post-grouping estimate `a_k(tau)`; the pooled fit at bandwidth `h2`.
pub fn post_fit(data: &LocalData<'_>, group: &[usize], tau: f64, h2: f64) -> Result<[f64; 2]> {
    pooled_fit(data, group, tau, h2, Kernel::Epanechnikov)
}

/// Plug-in asymptotic covariance of a group estimate at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaHat {
    pub omega: Mat2,
    /// `sqrt(omega_mm / (|G| T h2))`.
    pub stderr: [f64; 2],
}

/// Per-observation sums needed for `Delta_G` and `Upsilon_G` of one group.
#[derive(Debug, Clone)]
pub struct GroupCovariance {
    size: usize,
    t_len: usize,
    moments: Moments,
    /// `sum_{i,j in G} sigma_ij z_i z_j^T` per observation, as `(11, 12, 22)`.
    upsilon: Vec<[f64; 3]>,
    nu0: f64,
}

impl GroupCovariance {
    /// `sigma` is the residual covariance of the group members, in `group` order.
    pub fn new(data: &LocalData<'_>, group: &[usize], sigma: &DMatrix<f64>, nu0: f64) -> Result<Self> {
        let g = group.len();
        if g == 0 || sigma.nrows() != g || sigma.ncols() != g {
            return Err(Error::invalid("group covariance needs a |G| x |G| residual covariance"));
        }
        let t_len = data.t_len();
        let mut upsilon = vec![[0.0; 3]; t_len];
        let mut z = vec![[0.0; 2]; g];
        for (s, u) in upsilon.iter_mut().enumerate().skip(1) {
            for (a, &i) in group.iter().enumerate() {
                z[a] = data.regressor(i, s);
            }
            for a in 0..g {
                let mut sz = [0.0; 2];
                for b in 0..g {
                    let w = sigma[(a, b)];
                    sz[0] += w * z[b][0];
                    sz[1] += w * z[b][1];
                }
                u[0] += z[a][0] * sz[0];
                u[1] += z[a][0] * sz[1];
                u[2] += z[a][1] * sz[1];
            }
        }
        Ok(GroupCovariance {
            size: g,
            t_len,
            moments: data.group_moments(group),
            upsilon,
            nu0,
        })
    }

    /// `Omega = nu0 Delta_G^-1 Upsilon_G Delta_G^-1` at `tau`, with standard errors.
    pub fn omega(&self, tau: f64, h2: f64) -> Result<OmegaHat> {
        let tf = self.t_len as f64;
        let mut d = [0.0; 3];
        let mut u = [0.0; 3];
        for s in window(self.t_len, tau, h2) {
            let w = Kernel::Epanechnikov.eval_scaled((s + 1) as f64 / tf - tau, h2);
            if w == 0.0 {
                continue;
            }
            let zz = self.moments.zz(s);
            for k in 0..3 {
                d[k] += w * zz[k];
                u[k] += w * self.upsilon[s][k];
            }
        }
        let scale = 1.0 / (self.size as f64 * tf);
        let delta = Mat2::new(d[0], d[1], d[1], d[2]) * scale;
        let ups = Mat2::new(u[0], u[1], u[1], u[2]) * scale;
        let inv = ridge_inv2(&delta).ok_or_else(|| {
            Error::SingularDesign(format!("pooled moment matrix singular at tau={tau}"))
        })?;
        let raw = symmetrize(&(inv * ups * inv * self.nu0));
        let eig = SymmetricEigen::new(raw);
        let clamped = eig.eigenvalues.map(|v| v.max(0.0));
        let omega = symmetrize(&(eig.eigenvectors * Mat2::from_diagonal(&clamped) * eig.eigenvectors.transpose()));
        let norm = self.size as f64 * tf * h2;
        Ok(OmegaHat {
            omega,
            stderr: [(omega[(0, 0)] / norm).sqrt(), (omega[(1, 1)] / norm).sqrt()],
        })
    }
}

/// Plug-in covariance for one group at one point; `sigma` is the full `N x N`
/// residual covariance.
pub fn omega_hat(
    data: &LocalData<'_>,
    sigma: &DMatrix<f64>,
    group: &[usize],
    tau: f64,
    h2: f64,
    nu0: f64,
) -> Result<OmegaHat> {
    let sub = DMatrix::from_fn(group.len(), group.len(), |a, b| sigma[(group[a], group[b])]);
    GroupCovariance::new(data, group, &sub, nu0)?.omega(tau, h2)
}

/// A group coefficient path on a grid with pointwise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPath {
    pub group: usize,
    pub grid: Vec<f64>,
    pub alpha: Vec<[f64; 2]>,
    pub stderr: Vec<[f64; 2]>,
    pub ci_level: f64,
}

impl GroupPath {
    /// Two-sided normal quantile for the band.
    pub fn z(&self) -> f64 {
        normal_quantile(0.5 + self.ci_level / 2.0)
    }

    /// `(lower, upper)` band at grid index `l`.
    pub fn band(&self, l: usize) -> ([f64; 2], [f64; 2]) {
        let z = self.z();
        let (a, se) = (self.alpha[l], self.stderr[l]);
        (
            [a[0] - z * se[0], a[1] - z * se[1]],
            [a[0] + z * se[0], a[1] + z * se[1]],
        )
    }
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// CSV with columns `group,tau,alpha1,alpha2,se1,se2` (1-based groups).
pub fn paths_to_csv(paths: &[GroupPath]) -> String {
    let mut s = String::from("group,tau,alpha1,alpha2,se1,se2\n");
    for p in paths {
        for (l, tau) in p.grid.iter().enumerate() {
            let (a, se) = (p.alpha[l], p.stderr[l]);
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.group + 1,
                tau,
                a[0],
                a[1],
                se[0],
                se[1]
            );
        }
    }
    s
}

fn check_partition(data: &LocalData<'_>, partition: &GroupStructure) -> Result<()> {
    if partition.n() != data.n() {
        return Err(Error::invalid(format!(
            "partition covers {} nodes but panel has {}",
            partition.n(),
            data.n()
        )));
    }
    Ok(())
}

/// Group estimates at every observation time, copied to each member node.
pub fn post_observation_paths(data: &LocalData<'_>, partition: &GroupStructure, h2: f64) -> Result<NodePaths> {
    check_partition(data, partition)?;
    let groups = partition.groups();
    let per_group = groups
        .par_iter()
        .map(|g| pooled_observation_path(data, &data.group_moments(g), g[0], h2))
        .collect::<Result<Vec<_>>>()?;
    let grid = data.observation_grid();
    let values = (0..data.n())
        .flat_map(|i| per_group[partition.label(i)].iter().map(|&a| Some(a)))
        .collect();
    NodePaths::from_values(grid, data.n(), values)
}

/// Post-grouping paths and bands for every group of `partition` on `grid`.
///
/// The residual covariance is estimated from the post-grouping residuals at
/// every observation time.
pub fn group_paths(
    data: &LocalData<'_>,
    partition: &GroupStructure,
    grid: &[f64],
    h2: f64,
    ci_level: f64,
) -> Result<Vec<GroupPath>> {
    check_partition(data, partition)?;
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(Error::invalid(format!("ci_level={ci_level} outside (0, 1)")));
    }
    if let Some(&tau) = grid.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::invalid(format!("grid point {tau} outside (0, 1)")));
    }
    let nu0 = Kernel::Epanechnikov.nu0();
    let t_len = data.t_len();
    partition
        .groups()
        .into_par_iter()
        .enumerate()
        .map(|(k, g)| {
            let m = data.group_moments(&g);
            let obs = pooled_observation_path(data, &m, g[0], h2)?;
            let mut res = DMatrix::zeros(g.len(), t_len - 1);
            for (a, &i) in g.iter().enumerate() {
                for s in 1..t_len {
                    let z = data.regressor(i, s);
                    let b = obs[s - 1];
                    res[(a, s - 1)] = data.response(i, s) - b[0] * z[0] - b[1] * z[1];
                }
            }
            let raw = &res * res.transpose() / (t_len - 1) as f64;
            let sigma = DMatrix::from_fn(g.len(), g.len(), |a, b| if a <= b { raw[(a, b)] } else { raw[(b, a)] });
            let cov = GroupCovariance::new(data, &g, &sigma, nu0)?;
            let mut alpha = Vec::with_capacity(grid.len());
            let mut stderr = Vec::with_capacity(grid.len());
            for &tau in grid {
                alpha.push(crate::local::fit_moments(&m, tau, h2, Kernel::Epanechnikov, g[0])?.beta);
                stderr.push(cov.omega(tau, h2)?.stderr);
            }
            Ok(GroupPath {
                group: k,
                grid: grid.to_vec(),
                alpha,
                stderr,
                ci_level,
            })
        })
        .collect()
}

/// `sqrt((1 / (N L)) sum_i sum_l |b_i(tau_l) - beta_i(tau_l)|^2)` against the
/// true coefficients implied by `scenario` and `truth`.
pub fn rmse(est: &NodePaths, scenario: &CoefficientScenario, truth: &GroupStructure) -> Result<f64> {
    if est.n() != truth.n() {
        return Err(Error::invalid("estimates and true partition differ in size"));
    }
    if truth.k() > scenario.k() {
        return Err(Error::invalid("scenario has fewer groups than the true partition"));
    }
    est.require_complete()?;
    let mut acc = 0.0;
    for (l, &tau) in est.grid().iter().enumerate() {
        let beta = node_coefficients(scenario, truth, tau);
        for (i, b) in beta.iter().enumerate() {
            let e = est.get(i, l).expect("complete");
            acc += (e[0] - b[0]).powi(2) + (e[1] - b[1]).powi(2);
        }
    }
    Ok((acc / (est.n() * est.grid().len()) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_offset() {
        let scen = CoefficientScenario::constant(1, 0.2, 0.3);
        let truth = GroupStructure::single(3);
        let grid = vec![0.25, 0.5, 0.75];
        let delta = 0.01;
        let values = vec![Some([0.2 + delta, 0.3 + delta]); 9];
        let p = NodePaths::from_values(grid.clone(), 3, values).unwrap();
        assert!((rmse(&p, &scen, &truth).unwrap() - delta * 2f64.sqrt()).abs() < 1e-12);
        let exact = NodePaths::from_values(grid, 3, vec![Some([0.2, 0.3]); 9]).unwrap();
        assert_eq!(rmse(&exact, &scen, &truth).unwrap(), 0.0);
    }

    #[test]
    fn band_quantile() {
        let p = GroupPath {
            group: 0,
            grid: vec![0.5],
            alpha: vec![[1.0, 2.0]],
            stderr: vec![[0.1, 0.0]],
            ci_level: 0.95,
        };
        assert!((p.z() - 1.959963984540054).abs() < 1e-9);
        let (lo, hi) = p.band(0);
        assert!((hi[0] - lo[0] - 2.0 * 0.1 * p.z()).abs() < 1e-12);
        assert_eq!(lo[1], 2.0);
    }
}
