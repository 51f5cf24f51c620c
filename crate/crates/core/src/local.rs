//! Node-wise local linear estimation of time-varying coefficients and the
//! covariance plug-ins built from its residuals.
//!
//! For node `i` the regressor at observation `t` is
//! `X~_{i,t-1} = (sum_j w~_ij x_{j,t-1}, x_{i,t-1})`. The first observation has
//! no lag and is excluded from every sum. Internally observations are indexed
//! `s = 0..T` with `tau_s = (s + 1) / T`, so usable observations are `s >= 1`.

use nalgebra::{DMatrix, Matrix4, Vector4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::{ridge_inv2, ridge_solve4, symmetrize, Mat2};
use crate::simulate::{Network, Panel};

/// Minimum number of observations with nonzero kernel weight for a local fit.
pub const MIN_WEIGHTED_POINTS: usize = 5;

/// Panel plus precomputed network averages; the shared input of every estimator.
#[derive(Debug, Clone)]
pub struct LocalData<'a> {
    panel: &'a Panel,
    net_avg: DMatrix<f64>,
}

impl<'a> LocalData<'a> {
    pub fn new(panel: &'a Panel, net: &Network) -> Result<Self> {
        if panel.n() != net.n() {
            return Err(Error::invalid(format!(
                "panel has {} nodes but network has {}",
                panel.n(),
                net.n()
            )));
        }
        let net_avg = net.wtilde() * panel.data();
        Ok(LocalData { panel, net_avg })
    }

    pub fn panel(&self) -> &Panel {
        self.panel
    }

    pub fn n(&self) -> usize {
        self.panel.n()
    }

    pub fn t_len(&self) -> usize {
        self.panel.t_len()
    }

    pub fn tau(&self) -> &[f64] {
        self.panel.tau()
    }

    /// Regressor `X~_{i,t-1}` for observation `s >= 1`.
    #[inline]
    pub fn regressor(&self, i: usize, s: usize) -> [f64; 2] {
        [self.net_avg[(i, s - 1)], self.panel.get(i, s - 1)]
    }

    #[inline]
    pub fn response(&self, i: usize, s: usize) -> f64 {
        self.panel.get(i, s)
    }

    /// Network averages `W~ X`, column `s` holding time `t = s + 1`.
    pub fn net_avg(&self) -> &DMatrix<f64> {
        &self.net_avg
    }

    pub fn node_moments(&self, i: usize) -> Moments {
        let mut m = Moments::zeros(self.t_len());
        m.add_node(self, i);
        m
    }

    /// Per-observation moments summed over `nodes` (in the given order).
    pub fn group_moments(&self, nodes: &[usize]) -> Moments {
        let mut m = Moments::zeros(self.t_len());
        for &i in nodes {
            m.add_node(self, i);
        }
        m
    }

    /// Observation times `tau_s` for `s = 1..T`, i.e. every time with a lag.
    pub fn observation_grid(&self) -> Vec<f64> {
        self.tau()[1..].to_vec()
    }
}

/// Per-observation sufficient statistics `X~ X~^T` and `X~ x` for one node or
/// summed over a group of nodes.
#[derive(Debug, Clone)]
pub struct Moments {
    zz: Vec<[f64; 3]>,
    zy: Vec<[f64; 2]>,
}

impl Moments {
    fn zeros(t_len: usize) -> Self {
        Moments {
            zz: vec![[0.0; 3]; t_len],
            zy: vec![[0.0; 2]; t_len],
        }
    }

    fn add_node(&mut self, data: &LocalData<'_>, i: usize) {
        for s in 1..data.t_len() {
            let [z1, z2] = data.regressor(i, s);
            let y = data.response(i, s);
            let zz = &mut self.zz[s];
            zz[0] += z1 * z1;
            zz[1] += z1 * z2;
            zz[2] += z2 * z2;
            let zy = &mut self.zy[s];
            zy[0] += z1 * y;
            zy[1] += z2 * y;
        }
    }

    fn t_len(&self) -> usize {
        self.zz.len()
    }

    /// `(z1^2, z1 z2, z2^2)` at observation `s`.
    pub(crate) fn zz(&self, s: usize) -> [f64; 3] {
        self.zz[s]
    }
}

/// Result of one local linear fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeFit {
    pub node: usize,
    pub tau: f64,
    /// Level estimate `(network effect, momentum effect)`.
    pub beta: [f64; 2],
    /// Derivative estimate.
    pub slope: [f64; 2],
    /// Ratio of largest to smallest pivot of the 4x4 local design.
    pub cond: f64,
}

/// Observation range `s` whose kernel weight at `tau` may be nonzero.
#[inline]
pub(crate) fn window(t_len: usize, tau: f64, h: f64) -> std::ops::Range<usize> {
    let tf = t_len as f64;
    // tau_s = (s + 1) / T within [tau - h, tau + h], padded by one for rounding.
    let lo = ((tf * (tau - h)).floor() - 2.0).max(1.0) as usize;
    let hi = ((tf * (tau + h)).ceil() as isize).clamp(0, t_len as isize) as usize;
    lo.min(t_len)..hi
}

/// Local linear solve on precomputed moments. `tau` may be any point of `[0, 1]`.
pub(crate) fn fit_moments(m: &Moments, tau: f64, h: f64, kernel: Kernel, node: usize) -> Result<NodeFit> {
    let t_len = m.t_len();
    let tf = t_len as f64;
    let insufficient = |reason: String| Error::InsufficientLocalData {
        node: Some(node),
        tau,
        reason,
    };
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("bandwidth {h} must be positive")));
    }
    let mut s0 = [0.0; 3];
    let mut s1 = [0.0; 3];
    let mut s2 = [0.0; 3];
    let mut r0 = [0.0; 2];
    let mut r1 = [0.0; 2];
    let mut count = 0usize;
    for s in window(t_len, tau, h) {
        let d = (s + 1) as f64 / tf - tau;
        let w = kernel.eval_scaled(d, h);
        if w == 0.0 {
            continue;
        }
        count += 1;
        let zz = m.zz[s];
        let zy = m.zy[s];
        let wd = w * d;
        let wdd = wd * d;
        for k in 0..3 {
            s0[k] += w * zz[k];
            s1[k] += wd * zz[k];
            s2[k] += wdd * zz[k];
        }
        for k in 0..2 {
            r0[k] += w * zy[k];
            r1[k] += wd * zy[k];
        }
    }
    if count < MIN_WEIGHTED_POINTS {
        return Err(insufficient(format!(
            "{count} weighted observations (< {MIN_WEIGHTED_POINTS}) with h={h}"
        )));
    }
    let gram = Matrix4::new(
        s0[0], s0[1], s1[0], s1[1], //
        s0[1], s0[2], s1[1], s1[2], //
        s1[0], s1[1], s2[0], s2[1], //
        s1[1], s1[2], s2[1], s2[2],
    );
    let rhs = Vector4::new(r0[0], r0[1], r1[0], r1[1]);
    let (sol, cond) =
        ridge_solve4(&gram, &rhs).ok_or_else(|| insufficient("local design matrix is singular".into()))?;
    Ok(NodeFit {
        node,
        tau,
        beta: [sol[0], sol[1]],
        slope: [sol[2], sol[3]],
        cond,
    })
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("evaluation point tau={tau} must lie in (0, 1)")))
    }
}

/// Local linear estimate of `b_i(tau)` from node `i` and its neighbors' average.
pub fn fit_node(data: &LocalData<'_>, i: usize, tau: f64, h: f64, kernel: Kernel) -> Result<NodeFit> {
    check_tau(tau)?;
    check_node(data, i)?;
    fit_moments(&data.node_moments(i), tau, h, kernel, i)
}

fn check_node(data: &LocalData<'_>, i: usize) -> Result<()> {
    if i < data.n() {
        Ok(())
    } else {
        Err(Error::invalid(format!("node {i} out of range 0..{}", data.n())))
    }
}

/// Jackknife combination `2 f(h / sqrt 2) - f(h)` of two plain fits.
pub(crate) fn fit_moments_bc(m: &Moments, tau: f64, h: f64, node: usize) -> Result<NodeFit> {
    let narrow = fit_moments(m, tau, h * std::f64::consts::FRAC_1_SQRT_2, Kernel::Epanechnikov, node)?;
    let wide = fit_moments(m, tau, h, Kernel::Epanechnikov, node)?;
    let comb = |a: [f64; 2], b: [f64; 2]| [2.0 * a[0] - b[0], 2.0 * a[1] - b[1]];
    Ok(NodeFit {
        node,
        tau,
        beta: comb(narrow.beta, wide.beta),
        slope: comb(narrow.slope, wide.slope),
        cond: narrow.cond.max(wide.cond),
    })
}

/// Jackknife bias-corrected estimate `2 b(tau | h/sqrt 2) - b(tau | h)`.
pub fn fit_node_bc(data: &LocalData<'_>, i: usize, tau: f64, h: f64) -> Result<NodeFit> {
    check_tau(tau)?;
    check_node(data, i)?;
    fit_moments_bc(&data.node_moments(i), tau, h, i)
}

/// Local fitting mode for the preliminary node-wise stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitMode {
    #[default]
    Plain,
    BiasCorrected,
}

impl FitMode {
    /// Kernel whose `nu_0` governs the variance of this mode's estimates.
    pub fn effective_kernel(self) -> Kernel {
        match self {
            FitMode::Plain => Kernel::Epanechnikov,
            FitMode::BiasCorrected => Kernel::FourthOrderEpanechnikov,
        }
    }
}

/// Coefficient paths for every node on a common grid. Entries whose local fit
/// failed are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePaths {
    grid: Vec<f64>,
    n: usize,
    values: Vec<Option<[f64; 2]>>,
}

impl NodePaths {
    pub fn from_values(grid: Vec<f64>, n: usize, values: Vec<Option<[f64; 2]>>) -> Result<Self> {
        if values.len() != n * grid.len() {
            return Err(Error::invalid("path values do not match n x grid"));
        }
        Ok(NodePaths { grid, n, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, l: usize) -> Option<[f64; 2]> {
        self.values[i * self.grid.len() + l]
    }

    pub fn node(&self, i: usize) -> &[Option<[f64; 2]>] {
        let l = self.grid.len();
        &self.values[i * l..(i + 1) * l]
    }

    /// `(node, grid index)` of every failed fit.
    pub fn failures(&self) -> Vec<(usize, usize)> {
        let l = self.grid.len();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| (k / l, k % l))
            .collect()
    }

    /// Fails with the first flagged entry, if any.
    pub fn require_complete(&self) -> Result<()> {
        match self.failures().first() {
            None => Ok(()),
            Some(&(i, l)) => Err(Error::InsufficientLocalData {
                node: Some(i),
                tau: self.grid[l],
                reason: format!("{} failed local fits", self.failures().len()),
            }),
        }
    }
}

fn fit_grid(data: &LocalData<'_>, grid: &[f64], h: f64, mode: FitMode) -> NodePaths {
    let per_node: Vec<Vec<Option<[f64; 2]>>> = (0..data.n())
        .into_par_iter()
        .map(|i| {
            let m = data.node_moments(i);
            grid.iter()
                .map(|&tau| {
                    let fit = match mode {
                        FitMode::Plain => fit_moments(&m, tau, h, Kernel::Epanechnikov, i),
                        FitMode::BiasCorrected => fit_moments_bc(&m, tau, h, i),
                    };
                    fit.ok().map(|f| f.beta)
                })
                .collect()
        })
        .collect();
    NodePaths {
        grid: grid.to_vec(),
        n: data.n(),
        values: per_node.into_iter().flatten().collect(),
    }
}

/// Fits every node at every grid point (grid inside `(0, 1)`).
pub fn fit_all_nodes(data: &LocalData<'_>, grid: &[f64], h: f64, mode: FitMode) -> Result<NodePaths> {
    for &tau in grid {
        check_tau(tau)?;
    }
    Ok(fit_grid(data, grid, h, mode))
}

/// Plain local linear fits of every node at each observation time `tau_s`,
/// `s = 1..T` (the last point is the right boundary `tau = 1`).
pub fn fit_observation_paths(data: &LocalData<'_>, h: f64) -> NodePaths {
    fit_grid(data, &data.observation_grid(), h, FitMode::Plain)
}

/// Residuals `x_{i,t} - b_i(tau_t)^T X~_{i,t-1}`; column 0 (no lag) is zero.
///
/// `paths` must be evaluated on [`LocalData::observation_grid`].
pub fn residuals(data: &LocalData<'_>, paths: &NodePaths) -> Result<DMatrix<f64>> {
    let (n, t_len) = (data.n(), data.t_len());
    if paths.n() != n || paths.grid() != &data.tau()[1..] {
        return Err(Error::invalid("residuals need paths on every observation time"));
    }
    paths.require_complete()?;
    let mut res = DMatrix::zeros(n, t_len);
    for i in 0..n {
        for s in 1..t_len {
            let b = paths.get(i, s - 1).expect("checked complete");
            let z = data.regressor(i, s);
            res[(i, s)] = data.response(i, s) - b[0] * z[0] - b[1] * z[1];
        }
    }
    Ok(res)
}

/// `sigma_ij = (1 / (T - 1)) sum_{t >= 2} e_it e_jt`.
pub fn sigma_hat(res: &DMatrix<f64>) -> DMatrix<f64> {
    let t_eff = (res.ncols() - 1) as f64;
    let m = res * res.transpose() / t_eff;
    // Exact symmetry regardless of summation order inside the product.
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if i <= j { m[(i, j)] } else { m[(j, i)] })
}

/// Kernel-weighted cross moment `(1/T) sum_t X~_{i,t-1} X~_{j,t-1}^T K_h(tau_t - tau)`.
pub fn delta_hat(data: &LocalData<'_>, i: usize, j: usize, tau: f64, h: f64) -> Mat2 {
    let t_len = data.t_len();
    let tf = t_len as f64;
    let mut acc = Mat2::zeros();
    for s in window(t_len, tau, h) {
        let w = Kernel::Epanechnikov.eval_scaled((s + 1) as f64 / tf - tau, h);
        if w == 0.0 {
            continue;
        }
        let zi = data.regressor(i, s);
        let zj = data.regressor(j, s);
        acc[(0, 0)] += w * zi[0] * zj[0];
        acc[(0, 1)] += w * zi[0] * zj[1];
        acc[(1, 0)] += w * zi[1] * zj[0];
        acc[(1, 1)] += w * zi[1] * zj[1];
    }
    acc / tf
}

/// All pairwise `Delta_ij(tau)` at one point, as three `N x N` blocks:
/// `m11[i,j] = D_ij[0,0]`, `m12[i,j] = D_ij[0,1]`, `m22[i,j] = D_ij[1,1]`;
/// `D_ij[1,0] = m12[j,i]`.
pub(crate) struct DeltaBlocks {
    pub m11: DMatrix<f64>,
    pub m12: DMatrix<f64>,
    pub m22: DMatrix<f64>,
}

impl DeltaBlocks {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Mat2 {
        Mat2::new(self.m11[(i, j)], self.m12[(i, j)], self.m12[(j, i)], self.m22[(i, j)])
    }
}

pub(crate) fn delta_blocks(data: &LocalData<'_>, tau: f64, h: f64) -> DeltaBlocks {
    let (n, t_len) = (data.n(), data.t_len());
    let tf = t_len as f64;
    let cols: Vec<(usize, f64)> = window(t_len, tau, h)
        .filter_map(|s| {
            let w = Kernel::Epanechnikov.eval_scaled((s + 1) as f64 / tf - tau, h);
            (w != 0.0).then_some((s, w))
        })
        .collect();
    let m = cols.len();
    let mut z1 = DMatrix::zeros(n, m);
    let mut z2 = DMatrix::zeros(n, m);
    let mut z1w = DMatrix::zeros(n, m);
    let mut z2w = DMatrix::zeros(n, m);
    for (c, &(s, w)) in cols.iter().enumerate() {
        for i in 0..n {
            let [a, b] = data.regressor(i, s);
            z1[(i, c)] = a;
            z2[(i, c)] = b;
            z1w[(i, c)] = a * w / tf;
            z2w[(i, c)] = b * w / tf;
        }
    }
    DeltaBlocks {
        m11: &z1w * z1.transpose(),
        m12: &z1w * z2.transpose(),
        m22: &z2w * z2.transpose(),
    }
}

/// Plug-in ingredients for the asymptotic covariance of coefficient differences.
#[derive(Debug, Clone)]
pub struct CovPlugins {
    /// `N x N` residual covariance, divisor `T - 1`.
    pub sigma_hat: DMatrix<f64>,
    /// Bandwidth of the moment matrices.
    pub h: f64,
    /// `nu_0` of the kernel that produced the coefficient estimates.
    pub nu0: f64,
}

impl CovPlugins {
    pub fn new(sigma_hat: DMatrix<f64>, h: f64, nu0: f64) -> Self {
        CovPlugins { sigma_hat, h, nu0 }
    }

    /// `Delta_ij(tau)` at this plug-in's bandwidth.
    pub fn delta(&self, data: &LocalData<'_>, i: usize, j: usize, tau: f64) -> Mat2 {
        delta_hat(data, i, j, tau, self.h)
    }

    /// `Sigma_ij(tau)`; exactly zero when `i == j`.
    pub fn sigma_pair(&self, data: &LocalData<'_>, i: usize, j: usize, tau: f64) -> Result<Mat2> {
        if i == j {
            return Ok(Mat2::zeros());
        }
        let di = self.delta(data, i, i, tau);
        let dj = self.delta(data, j, j, tau);
        let dij = self.delta(data, i, j, tau);
        let inv_i = ridge_inv2(&di).ok_or_else(|| singular(i, tau))?;
        let inv_j = ridge_inv2(&dj).ok_or_else(|| singular(j, tau))?;
        Ok(self.sigma_pair_from(i, j, &inv_i, &inv_j, &dij))
    }

    /// Core formula given inverted `Delta_i`, `Delta_j` and `Delta_ij`.
    #[inline]
    pub(crate) fn sigma_pair_from(&self, i: usize, j: usize, inv_i: &Mat2, inv_j: &Mat2, dij: &Mat2) -> Mat2 {
        let s = &self.sigma_hat;
        let star = (inv_i * dij * inv_j + inv_j * dij.transpose() * inv_i) * s[(i, j)];
        let out = (inv_i * s[(i, i)] + inv_j * s[(j, j)] - star) * self.nu0;
        symmetrize(&out)
    }
}

pub(crate) fn singular(i: usize, tau: f64) -> Error {
    Error::SingularDesign(format!("moment matrix of node {i} at tau={tau:.6} is not invertible"))
}

/// Free-function form of [`CovPlugins::sigma_pair`].
pub fn sigma_pair_hat(plugins: &CovPlugins, data: &LocalData<'_>, i: usize, j: usize, tau: f64) -> Result<Mat2> {
    plugins.sigma_pair(data, i, j, tau)
}
