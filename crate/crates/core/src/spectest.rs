//! Kernel-weighted specification test of a parametric (by default constant)
//! coefficient path within one group.

use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::groups::GroupStructure;
use crate::kernel::{rule_of_thumb, BandwidthKind, Kernel};
use crate::linalg::{ridge_inv2, Mat2};
use crate::local::LocalData;

type CoefFn = Arc<dyn Fn(f64) -> [f64; 2] + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullKind {
    Constant,
    Custom,
}

/// Fitted null coefficient function `g(tau; theta)`.
#[derive(Clone)]
pub struct NullModel {
    kind: NullKind,
    theta: Vec<f64>,
    g: CoefFn,
}

impl fmt::Debug for NullModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NullModel")
            .field("kind", &self.kind)
            .field("theta", &self.theta)
            .finish_non_exhaustive()
    }
}

impl NullModel {
    pub fn constant(alpha: [f64; 2]) -> Self {
        NullModel {
            kind: NullKind::Constant,
            theta: alpha.to_vec(),
            g: Arc::new(move |_| alpha),
        }
    }

    /// A user-supplied family evaluated at an already fitted `theta`.
    pub fn custom(theta: Vec<f64>, g: impl Fn(f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        NullModel {
            kind: NullKind::Custom,
            theta,
            g: Arc::new(g),
        }
    }

    pub fn kind(&self) -> NullKind {
        self.kind
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn eval(&self, tau: f64) -> [f64; 2] {
        (self.g)(tau)
    }
}

fn check_group(data: &LocalData<'_>, group: &[usize]) -> Result<()> {
    if group.is_empty() {
        return Err(Error::invalid("group must be nonempty"));
    }
    if let Some(&i) = group.iter().find(|&&i| i >= data.n()) {
        return Err(Error::invalid(format!("node {i} out of range 0..{}", data.n())));
    }
    Ok(())
}

/// Pooled least squares of `x_it` on `X~_{i,t-1}` over the group, `t >= 2`.
pub fn fit_constant_null(data: &LocalData<'_>, group: &[usize]) -> Result<NullModel> {
    check_group(data, group)?;
    let mut zz = Mat2::zeros();
    let mut zy = [0.0; 2];
    for &i in group {
        for s in 1..data.t_len() {
            let z = data.regressor(i, s);
            let y = data.response(i, s);
            zz[(0, 0)] += z[0] * z[0];
            zz[(0, 1)] += z[0] * z[1];
            zz[(1, 1)] += z[1] * z[1];
            zy[0] += z[0] * y;
            zy[1] += z[1] * y;
        }
    }
    zz[(1, 0)] = zz[(0, 1)];
    let inv = ridge_inv2(&zz).ok_or_else(|| Error::SingularDesign("pooled least-squares design is singular".into()))?;
    let a = [
        inv[(0, 0)] * zy[0] + inv[(0, 1)] * zy[1],
        inv[(1, 0)] * zy[0] + inv[(1, 1)] * zy[1],
    ];
    Ok(NullModel::constant(a))
}

/// Residuals under the null, `|G| x (T - 1)`, column `c` holding time `t = c + 2`.
pub fn null_residuals(data: &LocalData<'_>, group: &[usize], null: &NullModel) -> Result<DMatrix<f64>> {
    check_group(data, group)?;
    let t_len = data.t_len();
    let mut res = DMatrix::zeros(group.len(), t_len - 1);
    for s in 1..t_len {
        let g = null.eval(data.tau()[s]);
        for (a, &i) in group.iter().enumerate() {
            let z = data.regressor(i, s);
            res[(a, s - 1)] = data.response(i, s) - g[0] * z[0] - g[1] * z[1];
        }
    }
    Ok(res)
}

/// `sum_t sum_{s != t} K((tau_t - tau_s) / h3) e_t^T e_s` over residual columns.
///
/// `tau` must be increasing; only pairs inside the kernel support are visited.
pub fn q_statistic(residuals: &DMatrix<f64>, tau: &[f64], h3: f64) -> Result<f64> {
    let cols = residuals.ncols();
    if tau.len() != cols {
        return Err(Error::invalid(format!("{} time points for {cols} residual columns", tau.len())));
    }
    if !(h3 > 0.0 && h3.is_finite()) {
        return Err(Error::invalid(format!("bandwidth h3={h3} must be positive")));
    }
    if tau.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("time points must be strictly increasing"));
    }
    let kernel = Kernel::Epanechnikov;
    let mut q = 0.0;
    for t in 0..cols {
        let mut row = 0.0;
        for s in t + 1..cols {
            let u = (tau[s] - tau[t]) / h3;
            if u >= 1.0 {
                break;
            }
            let w = kernel.eval(u);
            if w != 0.0 {
                row += w * residuals.column(t).dot(&residuals.column(s));
            }
        }
        q += row;
    }
    Ok(2.0 * q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sidedness {
    #[default]
    TwoSided,
    /// Reject for large positive statistics only.
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub group: usize,
    pub n_group: usize,
    pub q_raw: f64,
    pub sigma_eps_norm: f64,
    pub q_std: f64,
    pub p_value: f64,
    pub h3: f64,
}

impl TestResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// CSV with columns `group,q_raw,q_std,p_value,h3,n_group` (1-based groups).
pub fn results_to_csv(results: &[TestResult]) -> String {
    let mut s = String::from("group,q_raw,q_std,p_value,h3,n_group\n");
    for r in results {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.group + 1,
            r.q_raw,
            r.q_std,
            r.p_value,
            r.h3,
            r.n_group
        );
    }
    s
}

/// Residual covariance `(1 / (T - 1)) sum_t e_t e_t^T`, optionally mean-centered.
pub fn residual_covariance(residuals: &DMatrix<f64>, center: bool) -> DMatrix<f64> {
    let cols = residuals.ncols() as f64;
    let e = if center {
        let mean = residuals.column_mean();
        let mut c = residuals.clone();
        for mut col in c.column_iter_mut() {
            col -= &mean;
        }
        c
    } else {
        residuals.clone()
    };
    &e * e.transpose() / cols
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StandardizeOptions {
    pub sidedness: Sidedness,
    pub center: bool,
}

/// `q_std = q_raw / (sqrt(2 nu0) |Sigma_eps|_F T_eff sqrt(h3))` with its normal p-value.
pub fn standardize(
    q_raw: f64,
    residuals: &DMatrix<f64>,
    h3: f64,
    nu0: f64,
    opts: StandardizeOptions,
) -> Result<TestResult> {
    let t_eff = residuals.ncols() as f64;
    let norm = residual_covariance(residuals, opts.center).norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::DegenerateResiduals(format!(
            "residual covariance norm is {norm}"
        )));
    }
    let q_std = q_raw / ((2.0 * nu0).sqrt() * norm * t_eff * h3.sqrt());
    let phi = Normal::standard();
    let p_value = match opts.sidedness {
        Sidedness::TwoSided => (2.0 * (1.0 - phi.cdf(q_std.abs()))).clamp(0.0, 1.0),
        Sidedness::Upper => (1.0 - phi.cdf(q_std)).clamp(0.0, 1.0),
    };
    Ok(TestResult {
        group: 0,
        n_group: residuals.nrows(),
        q_raw,
        sigma_eps_norm: norm,
        q_std,
        p_value,
        h3,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TestConfig {
    /// Fixed test bandwidth; the rule of thumb when absent.
    pub h3: Option<f64>,
    pub opts: StandardizeOptions,
}

/// Constant-coefficient test for group `label` of `partition`.
pub fn run_test(
    data: &LocalData<'_>,
    partition: &GroupStructure,
    label: usize,
    cfg: &TestConfig,
) -> Result<TestResult> {
    if partition.n() != data.n() {
        return Err(Error::invalid("partition does not match the panel"));
    }
    if label >= partition.k() {
        return Err(Error::invalid(format!("group {label} outside 0..{}", partition.k())));
    }
    let group = partition.members(label);
    let null = fit_constant_null(data, &group)?;
    let res = null_residuals(data, &group, &null)?;
    let h3 = match cfg.h3 {
        Some(h) => h,
        None => {
            let sigma = (res.norm_squared() / (res.nrows() * res.ncols()) as f64).sqrt();
            if !(sigma > 0.0) {
                return Err(Error::DegenerateResiduals("null residuals are identically zero".into()));
            }
            rule_of_thumb(data.t_len(), group.len(), BandwidthKind::Test, sigma)?
        }
    };
    let q = q_statistic(&res, &data.tau()[1..], h3)?;
    let mut out = standardize(q, &res, h3, Kernel::Epanechnikov.nu0(), cfg.opts)?;
    out.group = label;
    Ok(out)
}
