//! Data generation for locally stationary network VAR panels.
//!
//! Each node follows
//! `x_{i,t} = b_{i,1}(t/T) * sum_j w~_ij x_{j,t-1} + b_{i,2}(t/T) * x_{i,t-1} + e_{i,t}`
//! where `b_i = alpha_{g(i)}` for the node's group.

mod network;
mod scenario;

pub use network::{gen_adjacency, Network};
pub use scenario::{CoefExpr, CoefficientScenario};

use nalgebra::{DMatrix, Schur};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::GroupStructure;
use crate::rng::{derive, rng_for};

/// Observed panel: `data[(i, s)]` is node `i` at time `t = s + 1`, with
/// scaled time `tau[s] = (s + 1) / T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    data: DMatrix<f64>,
    tau: Vec<f64>,
}

impl Panel {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() < 2 || data.nrows() < 1 {
            return Err(Error::invalid(format!(
                "panel must have at least 1 node and 2 time points, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (i, s) = (pos % data.nrows(), pos / data.nrows());
            return Err(Error::invalid(format!("non-finite observation at node {i}, time {}", s + 1)));
        }
        let t_len = data.ncols();
        let tau = (1..=t_len).map(|t| t as f64 / t_len as f64).collect();
        Ok(Panel { data, tau })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn t_len(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    #[inline]
    pub fn get(&self, i: usize, s: usize) -> f64 {
        self.data[(i, s)]
    }

    /// Rows reordered so that new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let data = DMatrix::from_fn(self.n(), self.t_len(), |a, s| self.data[(perm[a], s)]);
        Panel {
            data,
            tau: self.tau.clone(),
        }
    }
}

/// Gaussian innovations with covariance `sigma_eps`, drawn through a
/// lower-triangular factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    sigma_eps: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl ErrorModel {
    /// Validates symmetry and positive semidefiniteness.
    pub fn new(sigma_eps: DMatrix<f64>) -> Result<Self> {
        let n = sigma_eps.nrows();
        if n == 0 || sigma_eps.ncols() != n {
            return Err(Error::invalid("error covariance must be square and nonempty"));
        }
        for i in 0..n {
            if !(sigma_eps[(i, i)] >= 0.0) {
                return Err(Error::invalid(format!("error variance at node {i} is negative")));
            }
            for j in 0..i {
                let (a, b) = (sigma_eps[(i, j)], sigma_eps[(j, i)]);
                if !a.is_finite() || (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(Error::invalid(format!("error covariance not symmetric at ({i},{j})")));
                }
            }
        }
        let factor = psd_cholesky(&sigma_eps)
            .ok_or_else(|| Error::invalid("error covariance is not positive semidefinite"))?;
        Ok(ErrorModel { sigma_eps, factor })
    }

    pub fn zero(n: usize) -> Self {
        ErrorModel {
            sigma_eps: DMatrix::zeros(n, n),
            factor: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        ErrorModel {
            sigma_eps: DMatrix::identity(n, n),
            factor: DMatrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.sigma_eps.nrows()
    }

    pub fn sigma_eps(&self) -> &DMatrix<f64> {
        &self.sigma_eps
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    fn draw_into(&self, z: &mut [f64], out: &mut [f64], rng: &mut impl rand::Rng) {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let n = z.len();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += self.factor[(i, j)] * zj;
            }
            *o = acc;
        }
    }
}

/// Cholesky factor of a positive semidefinite matrix; zero pivots yield zero
/// columns. Returns `None` if a pivot is clearly negative.
fn psd_cholesky(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
    let tol = 1e-12 * scale;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -tol {
            return None;
        }
        if d <= tol {
            // Zero pivot: the remaining column must vanish too.
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if s.abs() > 1e-6 * scale {
                    return None;
                }
            }
            continue;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

/// `Sigma_eps[i][j] = rho^|i-j|`.
pub fn gen_error_cov(n: usize, rho: f64) -> Result<ErrorModel> {
    if !(rho.abs() < 1.0) {
        return Err(Error::invalid(format!("error correlation |rho| = {} must be < 1", rho.abs())));
    }
    if n == 0 {
        return Err(Error::invalid("error covariance needs n >= 1"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rho.powi(i.abs_diff(j) as i32));
    ErrorModel::new(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupMode {
    /// Labels redrawn in every replication.
    #[default]
    Random,
    /// Labels drawn once from a dedicated stream and reused.
    Fixed,
}

const FIXED_GROUPS_TAG: u64 = 0x6669_7865_645f_6772;
const MAX_GROUP_ATTEMPTS: usize = 100;

/// Draws i.i.d. group labels from `probs`, redrawing until every group is nonempty.
pub fn assign_groups(n: usize, probs: &[f64], mode: GroupMode, seed: u64) -> Result<GroupStructure> {
    let k = probs.len();
    if k == 0 || n < k {
        return Err(Error::invalid(format!("cannot split {n} nodes into {k} groups")));
    }
    if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("group probabilities must be nonnegative and sum to 1"));
    }
    let stream_seed = match mode {
        GroupMode::Random => seed,
        GroupMode::Fixed => derive(seed, FIXED_GROUPS_TAG),
    };
    let mut rng = rng_for(stream_seed);
    for _ in 0..MAX_GROUP_ATTEMPTS {
        let labels: Vec<usize> = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (g, &p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return g;
                    }
                }
                // Rounding left u above the cumulative sum: last positive-probability group.
                probs.iter().rposition(|&p| p > 0.0).unwrap_or(k - 1)
            })
            .collect();
        if let Ok(g) = GroupStructure::new(k, labels) {
            return Ok(g);
        }
    }
    Err(Error::GenerationFailure(format!(
        "some group stayed empty after {MAX_GROUP_ATTEMPTS} draws"
    )))
}

/// Node-level coefficients `b_i(tau)` for a grouped scenario.
pub fn node_coefficients(scenario: &CoefficientScenario, groups: &GroupStructure, tau: f64) -> Vec<[f64; 2]> {
    let per_group: Vec<[f64; 2]> = (0..scenario.k()).map(|k| scenario.eval(k, tau)).collect();
    groups.membership().iter().map(|&g| per_group[g]).collect()
}

/// Transition matrix `B(tau) = diag(b_1) W~ + diag(b_2)`.
pub fn transition_matrix(scenario: &CoefficientScenario, groups: &GroupStructure, net: &Network, tau: f64) -> DMatrix<f64> {
    let coefs = node_coefficients(scenario, groups, tau);
    let n = net.n();
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for &j in net.neighbors(i) {
            b[(i, j)] = coefs[i][0] * net.wtilde()[(i, j)];
        }
        b[(i, i)] += coefs[i][1];
    }
    b
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub grid: Vec<f64>,
    pub radius: Vec<f64>,
    pub max_radius: f64,
    pub argmax_tau: f64,
    pub margin: f64,
    pub stable: bool,
}

impl StabilityReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "max_spectral_radius = {:.17e}\nargmax_tau = {:.17e}\nmargin = {:e}\nstable = {}\n\ntau,spectral_radius\n",
            self.max_radius, self.argmax_tau, self.margin, self.stable
        );
        for (t, r) in self.grid.iter().zip(&self.radius) {
            s.push_str(&format!("{t:.17e},{r:.17e}\n"));
        }
        s
    }
}

const SCHUR_MAX_ITER: usize = 10_000;
const GELFAND_SQUARINGS: u32 = 12;

/// Largest eigenvalue modulus. Falls back to `|B^m|^(1/m)` with `m = 2^12`
/// when the real Schur iteration does not converge.
pub fn spectral_radius(m: DMatrix<f64>) -> f64 {
    if let Some(schur) = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER) {
        return schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    // Repeated squaring with renormalization: log|B^(2^k)| accumulated in `log_scale`.
    let mut p = m;
    let mut log_scale = 0.0;
    for _ in 0..GELFAND_SQUARINGS {
        let norm = p.norm();
        if norm == 0.0 {
            return 0.0;
        }
        p /= norm;
        log_scale = 2.0 * (log_scale + norm.ln());
        p = &p * &p;
    }
    let norm = p.norm();
    if norm == 0.0 {
        return 0.0;
    }
    ((log_scale + norm.ln()) / 2f64.powi(GELFAND_SQUARINGS as i32)).exp()
}

pub const DEFAULT_STABILITY_MARGIN: f64 = 1e-6;

/// Grid size of the stability reports written by `simulate` and checked by
/// Monte-Carlo runs.
pub const STABILITY_GRID: usize = 101;

/// Spectral radius of `B(tau)` on `grid_size` equidistant points of `[0, 1]`.
pub fn stability_check(
    scenario: &CoefficientScenario,
    groups: &GroupStructure,
    net: &Network,
    grid_size: usize,
) -> Result<StabilityReport> {
    if grid_size < 2 {
        return Err(Error::invalid("stability grid needs at least 2 points"));
    }
    check_dims(scenario, groups, net)?;
    let grid: Vec<f64> = (0..grid_size).map(|g| g as f64 / (grid_size - 1) as f64).collect();
    let radius: Vec<f64> = grid
        .iter()
        .map(|&tau| spectral_radius(transition_matrix(scenario, groups, net, tau)))
        .collect();
    let (arg, max_radius) = radius
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
    let margin = DEFAULT_STABILITY_MARGIN;
    Ok(StabilityReport {
        argmax_tau: grid[arg],
        grid,
        radius,
        max_radius,
        margin,
        stable: max_radius < 1.0 - margin,
    })
}

fn check_dims(scenario: &CoefficientScenario, groups: &GroupStructure, net: &Network) -> Result<()> {
    if groups.n() != net.n() {
        return Err(Error::invalid(format!(
            "group structure covers {} nodes, network has {}",
            groups.n(),
            net.n()
        )));
    }
    if groups.k() != scenario.k() {
        return Err(Error::invalid(format!(
            "group structure has {} groups, scenario has {}",
            groups.k(),
            scenario.k()
        )));
    }
    Ok(())
}

pub const DEFAULT_BURNIN: usize = 200;

/// Simulates `t_len` observations after `burnin` discarded steps from the zero
/// state. Burn-in steps use the coefficients at `tau = 1/T`.
pub fn simulate_panel(
    scenario: &CoefficientScenario,
    groups: &GroupStructure,
    net: &Network,
    errs: &ErrorModel,
    t_len: usize,
    burnin: usize,
    seed: u64,
) -> Result<Panel> {
    if t_len < 10 {
        return Err(Error::invalid(format!("simulation needs T >= 10, got {t_len}")));
    }
    check_dims(scenario, groups, net)?;
    if errs.n() != net.n() {
        return Err(Error::invalid("error model dimension does not match network"));
    }
    let n = net.n();
    let mut rng = rng_for(seed);
    let mut data = DMatrix::zeros(n, t_len);
    let mut prev = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut eps = vec![0.0; n];
    let tf = t_len as f64;
    let mut coefs = node_coefficients(scenario, groups, 1.0 / tf);
    for step in 0..burnin + t_len {
        let recording = step >= burnin;
        if recording {
            let tau = (step - burnin + 1) as f64 / tf;
            coefs = node_coefficients(scenario, groups, tau);
        }
        errs.draw_into(&mut z, &mut eps, &mut rng);
        for i in 0..n {
            let c = coefs[i];
            next[i] = c[0] * net.neighbor_mean(i, &prev) + c[1] * prev[i] + eps[i];
            if !next[i].is_finite() {
                return Err(Error::InstabilityDetected(format!(
                    "state of node {i} became non-finite at step {step}"
                )));
            }
        }
        std::mem::swap(&mut prev, &mut next);
        if recording {
            data.column_mut(step - burnin).copy_from_slice(&prev);
        }
    }
    Panel::new(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize) -> Network {
        gen_adjacency(n, 1.0, 0).unwrap()
    }

    #[test]
    fn spectral_radius_fallback_agrees() {
        let m = DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.0, -0.3, 0.4, 0.1, 0.0, 0.2, -0.6]);
        let exact = spectral_radius(m.clone());
        let mut p = m.clone();
        for _ in 0..200 {
            p = &p * &m;
        }
        assert!((exact - p.norm().powf(1.0 / 201.0)).abs() < 0.02);
        assert_eq!(spectral_radius(DMatrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn error_cov_values() {
        let e = gen_error_cov(3, 0.3).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.09, 0.3, 1.0, 0.3, 0.09, 0.3, 1.0]);
        assert!((e.sigma_eps() - want).abs().max() < 1e-15);
        let id = gen_error_cov(2, 0.0).unwrap();
        assert_eq!(id.sigma_eps(), &DMatrix::identity(2, 2));
        assert!(gen_error_cov(3, 1.0).is_err());
    }

    #[test]
    fn error_cov_factor_reproduces() {
        let e = gen_error_cov(50, 0.3).unwrap();
        let l = e.factor();
        assert!((l * l.transpose() - e.sigma_eps()).abs().max() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(ErrorModel::new(m).is_err());
        assert!(ErrorModel::new(DMatrix::zeros(3, 3)).is_ok());
    }

    #[test]
    fn groups_partition() {
        let g = assign_groups(100, &[1.0 / 3.0; 3], GroupMode::Random, 1).unwrap();
        assert_eq!(g.k(), 3);
        assert!(g.groups().iter().all(|m| !m.is_empty()));
        assert_eq!(g.groups().iter().map(Vec::len).sum::<usize>(), 100);
    }

    #[test]
    fn degenerate_groups_fail() {
        let r = assign_groups(4, &[1.0, 0.0, 0.0], GroupMode::Random, 3);
        assert!(matches!(r, Err(Error::GenerationFailure(_))));
    }

    #[test]
    fn fixed_groups_deterministic() {
        let a = assign_groups(100, &[0.25, 0.25, 0.5], GroupMode::Fixed, 11).unwrap();
        let b = assign_groups(100, &[0.25, 0.25, 0.5], GroupMode::Fixed, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_everything_gives_zero_panel() {
        let net = complete(3);
        let g = GroupStructure::single(3);
        let s = CoefficientScenario::constant(1, 0.0, 0.0);
        let p = simulate_panel(&s, &g, &net, &ErrorModel::zero(3), 20, 5, 1).unwrap();
        assert!(p.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_coefficients_give_noise() {
        let net = complete(4);
        let g = GroupStructure::single(4);
        let s = CoefficientScenario::constant(1, 0.0, 0.0);
        let p = simulate_panel(&s, &g, &net, &ErrorModel::identity(4), 30, 7, 9).unwrap();
        // Replay the noise stream: burn-in draws come first.
        let mut rng = rng_for(9);
        let mut z = vec![0.0; 4];
        let mut e = vec![0.0; 4];
        for step in 0..37 {
            ErrorModel::identity(4).draw_into(&mut z, &mut e, &mut rng);
            if step >= 7 {
                for (i, &v) in e.iter().enumerate() {
                    assert_eq!(p.get(i, step - 7), v);
                }
            }
        }
    }

    #[test]
    fn reproducible() {
        let net = gen_adjacency(10, 0.3, 2).unwrap();
        let g = assign_groups(10, &[0.5, 0.5], GroupMode::Random, 4).unwrap();
        let s = CoefficientScenario::new(CoefficientScenario::paper().exprs()[..2].to_vec()).unwrap();
        let e = gen_error_cov(10, 0.3).unwrap();
        let a = simulate_panel(&s, &g, &net, &e, 50, 20, 5).unwrap();
        let b = simulate_panel(&s, &g, &net, &e, 50, 20, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stability_cases() {
        let net = complete(3);
        let g = GroupStructure::single(3);
        let zero = CoefficientScenario::constant(1, 0.0, 0.0);
        let r = stability_check(&zero, &g, &net, 5).unwrap();
        assert_eq!(r.max_radius, 0.0);
        assert!(r.stable);
        let big = CoefficientScenario::constant(1, 0.0, 1.5);
        let r = stability_check(&big, &g, &net, 5).unwrap();
        assert!((r.max_radius - 1.5).abs() < 1e-12);
        assert!(!r.stable);
        assert!(stability_check(&zero, &g, &net, 1).is_err());
    }

    #[test]
    fn explosive_detected() {
        let net = complete(2);
        let g = GroupStructure::single(2);
        let s = CoefficientScenario::constant(1, 0.0, 50.0);
        let r = simulate_panel(&s, &g, &net, &ErrorModel::identity(2), 400, 0, 1);
        assert!(matches!(r, Err(Error::InstabilityDetected(_))));
    }

    #[test]
    fn isolated_node_dynamics_ignore_other_edges() {
        // With zero network effect, node 0's path depends only on its own noise.
        let s = CoefficientScenario::constant(1, 0.0, 0.5);
        let g = GroupStructure::single(4);
        let e = ErrorModel::identity(4);
        let n1 = Network::from_adjacency(DMatrix::from_row_slice(4, 4, &[
            0., 1., 0., 0., 1., 0., 1., 0., 0., 1., 0., 1., 0., 0., 1., 0.,
        ]))
        .unwrap();
        let n2 = Network::from_adjacency(DMatrix::from_row_slice(4, 4, &[
            0., 1., 1., 1., 1., 0., 0., 0., 1., 0., 0., 0., 1., 1., 1., 0.,
        ]))
        .unwrap();
        let a = simulate_panel(&s, &g, &n1, &e, 40, 10, 3).unwrap();
        let b = simulate_panel(&s, &g, &n2, &e, 40, 10, 3).unwrap();
        for t in 0..40 {
            assert_eq!(a.get(0, t), b.get(0, t));
        }
    }

    #[test]
    fn coefficients_follow_groups() {
        let s = CoefficientScenario::paper();
        let g = GroupStructure::new(3, vec![2, 0, 1, 0]).unwrap();
        for tau in [0.1, 0.5, 0.9] {
            let c = node_coefficients(&s, &g, tau);
            for (i, ci) in c.iter().enumerate() {
                assert_eq!(*ci, s.eval(g.label(i), tau));
            }
        }
    }
}
