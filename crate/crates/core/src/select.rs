//! Pooled local linear fits for a candidate partition and the information
//! criterion that selects the number of groups.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cluster::MergeTrace;
use crate::error::{Error, Result};
use crate::groups::GroupStructure;
use crate::kernel::Kernel;
use crate::local::{fit_moments, LocalData, Moments};

/// Default search cap for the group count.
pub const DEFAULT_KBAR: usize = 8;

fn check_group(data: &LocalData<'_>, group: &[usize]) -> Result<()> {
    if group.is_empty() {
        return Err(Error::invalid("group must be nonempty"));
    }
    if let Some(&i) = group.iter().find(|&&i| i >= data.n()) {
        return Err(Error::invalid(format!("node {i} out of range 0..{}", data.n())));
    }
    Ok(())
}

/// Local linear estimate of the common coefficient of `group`, pooling the
/// weighted least-squares objective over all member nodes.
pub fn pooled_fit(data: &LocalData<'_>, group: &[usize], tau: f64, h1: f64, kernel: Kernel) -> Result<[f64; 2]> {
    check_group(data, group)?;
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("evaluation point tau={tau} outside [0, 1]")));
    }
    Ok(fit_moments(&data.group_moments(group), tau, h1, kernel, group[0])?.beta)
}

/// Pooled fits at every observation time `tau_s`, `s = 1..T`.
pub(crate) fn pooled_observation_path(data: &LocalData<'_>, m: &Moments, rep: usize, h: f64) -> Result<Vec<[f64; 2]>> {
    data.observation_grid()
        .iter()
        .map(|&tau| fit_moments(m, tau, h, Kernel::Epanechnikov, rep).map(|f| f.beta))
        .collect()
}

/// Sum of squared residuals of `group` under its pooled fits at each observation time.
fn group_rss(data: &LocalData<'_>, group: &[usize], h1: f64) -> Result<f64> {
    let path = pooled_observation_path(data, &data.group_moments(group), group[0], h1)?;
    let mut rss = 0.0;
    for &i in group {
        for s in 1..data.t_len() {
            let a = path[s - 1];
            let z = data.regressor(i, s);
            let e = data.response(i, s) - a[0] * z[0] - a[1] * z[1];
            rss += e * e;
        }
    }
    Ok(rss)
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

/// `(1 / (N (T - 1))) sum_k sum_{i in G_k} sum_t (x_it - a_k(tau_t)^T X~_{i,t-1})^2`.
pub fn sigma2_nt(data: &LocalData<'_>, partition: &GroupStructure, h1: f64) -> Result<f64> {
    check_partition(data, partition)?;
    let rss = partition
        .groups()
        .par_iter()
        .map(|g| group_rss(data, g, h1))
        .collect::<Result<Vec<f64>>>()?;
    Ok(rss.iter().sum::<f64>() / (data.n() * (data.t_len() - 1)) as f64)
}

/// `log(max(N, T)) / (N T h1)`.
pub fn default_rho(n: usize, t_len: usize, h1: f64) -> f64 {
    (n.max(t_len) as f64).ln() / (n as f64 * t_len as f64 * h1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcRow {
    pub k: usize,
    pub sigma2: f64,
    pub ic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ICReport {
    pub k_hat: usize,
    pub table: Vec<IcRow>,
    pub rho: f64,
    pub kbar: usize,
}

impl ICReport {
    /// CSV with columns `K,sigma2,ic`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("K,sigma2,ic\n");
        for r in &self.table {
            let _ = writeln!(s, "{},{:.16e},{:.16e}", r.k, r.sigma2, r.ic);
        }
        s
    }
}

/// Minimizer of `log sigma2(K) + K rho` over `K = 1..kbar` cuts of `trace`;
/// ties go to the smallest `K`.
pub fn ic_curve(data: &LocalData<'_>, trace: &MergeTrace, kbar: usize, h1: f64, rho: f64) -> Result<ICReport> {
    if trace.n() != data.n() {
        return Err(Error::invalid("merge trace does not match the panel"));
    }
    if kbar < 1 || kbar > data.n() {
        return Err(Error::invalid(format!("kbar={kbar} outside 1..={}", data.n())));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!("penalty rho={rho} must be nonnegative")));
    }
    let partitions = (1..=kbar).map(|k| trace.cut(k)).collect::<Result<Vec<_>>>()?;
    // Consecutive cuts share all but one group; fit each distinct group once.
    let mut distinct: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    for p in &partitions {
        for g in p.groups() {
            index.entry(g.clone()).or_insert_with(|| {
                distinct.push(g);
                distinct.len() - 1
            });
        }
    }
    let rss = distinct
        .par_iter()
        .map(|g| group_rss(data, g, h1))
        .collect::<Result<Vec<f64>>>()?;
    let denom = (data.n() * (data.t_len() - 1)) as f64;
    let mut table = Vec::with_capacity(kbar);
    for (k, p) in (1..=kbar).zip(&partitions) {
        let total: f64 = p.groups().iter().map(|g| rss[index[g]]).sum();
        let sigma2 = total / denom;
        table.push(IcRow {
            k,
            sigma2,
            ic: sigma2.ln() + k as f64 * rho,
        });
    }
    let mut k_hat = 1;
    let mut best = f64::INFINITY;
    for r in &table {
        if r.ic < best {
            best = r.ic;
            k_hat = r.k;
        }
    }
    Ok(ICReport { k_hat, table, rho, kbar })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_formula() {
        let r = default_rho(100, 200, 0.0933);
        assert!((r - 200f64.ln() / (100.0 * 200.0 * 0.0933)).abs() < 1e-18);
        assert!((r - 2.839e-3).abs() < 1e-6);
        assert!(default_rho(50, 50, 0.2) < default_rho(50, 50, 0.1));
    }

    #[test]
    fn csv_layout() {
        let rep = ICReport {
            k_hat: 1,
            table: vec![IcRow { k: 1, sigma2: 1.0, ic: 0.5 }],
            rho: 0.5,
            kbar: 1,
        };
        assert_eq!(rep.to_csv(), "K,sigma2,ic\n1,1.0000000000000000e0,5.0000000000000000e-1\n");
    }
}
