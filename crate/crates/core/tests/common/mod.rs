//! Independent oracles and panel builders shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use netvar::simulate::{simulate_panel, CoefExpr};
use netvar::{CoefficientScenario, ErrorModel, GroupStructure, Network, Panel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Epanechnikov kernel written out directly.
pub fn epa(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Fourth-order kernel `2 sqrt2 K(sqrt2 u) - K(u)`.
pub fn epa4(u: f64) -> f64 {
    let r = std::f64::consts::SQRT_2;
    2.0 * r * epa(r * u) - epa(u)
}

/// Composite Gauss-Legendre (5 nodes) over `[a, b]` with `pieces` panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let step = (b - a) / pieces as f64;
    let mut acc = 0.0;
    for p in 0..pieces {
        let lo = a + p as f64 * step;
        let mid = lo + step / 2.0;
        for (x, w) in X.iter().zip(W) {
            acc += w * f(mid + x * step / 2.0);
        }
    }
    acc * step / 2.0
}

/// Raw regressor `(neighbor average, own lag)` and response of node `i` at column `s >= 1`.
pub fn obs(panel: &Panel, net: &Network, i: usize, s: usize) -> ([f64; 2], f64) {
    let prev: Vec<f64> = (0..panel.n()).map(|j| panel.get(j, s - 1)).collect();
    let nb = net.neighbors(i);
    let avg = nb.iter().map(|&j| prev[j]).sum::<f64>() / nb.len() as f64;
    ([avg, prev[i]], panel.get(i, s))
}

/// Weighted least squares of `y` on `[z, z (tau_s - tau)]` from explicitly
/// accumulated normal equations `(X'WX + ridge tr(X'WX) I) b = X'Wy` solved
/// by SVD. Weights may be negative (fourth-order kernel). Returns the level
/// coefficients.
pub fn wls_level(
    nodes: &[usize],
    panel: &Panel,
    net: &Network,
    tau: f64,
    h: f64,
    kernel: fn(f64) -> f64,
    ridge: f64,
) -> [f64; 2] {
    let t_len = panel.t_len();
    let mut rows: Vec<[f64; 4]> = Vec::new();
    let mut ys = Vec::new();
    for &i in nodes {
        for s in 1..t_len {
            let d = (s + 1) as f64 / t_len as f64 - tau;
            let w = kernel(d / h) / h;
            if w == 0.0 {
                continue;
            }
            let (z, y) = obs(panel, net, i, s);
            rows.push([z[0], z[1], z[0] * d, z[1] * d]);
            ys.push((w, y));
        }
    }
    let mut xtwx = DMatrix::<f64>::zeros(4, 4);
    let mut xtwy = DVector::<f64>::zeros(4);
    for (x, (w, y)) in rows.iter().zip(&ys) {
        for a in 0..4 {
            xtwy[a] += w * x[a] * y;
            for b in 0..4 {
                xtwx[(a, b)] += w * x[a] * x[b];
            }
        }
    }
    let lam = ridge * xtwx.trace();
    for a in 0..4 {
        xtwx[(a, a)] += lam;
    }
    let sol = xtwx.svd(true, true).solve(&xtwy, 1e-300).expect("svd solve");
    [sol[0], sol[1]]
}

/// A connected network where every node has at least one neighbor.
pub fn random_network(n: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let w = DMatrix::from_fn(n, n, |i, j| if i != j && rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 });
        if let Ok(net) = Network::from_adjacency(w) {
            return net;
        }
    }
}

pub fn random_panel(n: usize, t_len: usize, seed: u64) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Panel::new(DMatrix::from_fn(n, t_len, |_, _| rng.random::<f64>() * 2.0 - 1.0)).unwrap()
}

/// Nodes `0..n_exact` follow constant coefficients `beta` with zero noise;
/// the remaining driver nodes are white noise feeding their network averages.
pub fn driven_panel(beta: [f64; 2], n_exact: usize, n_drivers: usize, t_len: usize, seed: u64) -> (Panel, Network) {
    let n = n_exact + n_drivers;
    let w = DMatrix::from_fn(n, n, |i, j| {
        if i != j && (j >= n_exact || (i + j) % 2 == 1) {
            1.0
        } else {
            0.0
        }
    });
    let net = Network::from_adjacency(w).unwrap();
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n_exact)).collect();
    let groups = GroupStructure::new(2, labels).unwrap();
    let scen = CoefficientScenario::new(vec![
        [CoefExpr::constant(beta[0]), CoefExpr::constant(beta[1])],
        [CoefExpr::constant(0.0), CoefExpr::constant(0.0)],
    ])
    .unwrap();
    let cov = DMatrix::from_fn(n, n, |i, j| if i == j && i >= n_exact { 1.0 } else { 0.0 });
    let errs = ErrorModel::new(cov).unwrap();
    (simulate_panel(&scen, &groups, &net, &errs, t_len, 20, seed).unwrap(), net)
}

/// Noise-free panel with two exact groups: nodes `0..m` shift values around a
/// directed cycle (`beta = (1, 0)`), nodes `m..2m` follow `(0.5, 0.5)` with
/// one neighbor on the cycle. Bounded and nondegenerate for any horizon.
pub fn exact_two_group_panel(m: usize, t_len: usize, seed: u64) -> (Panel, Network, GroupStructure) {
    let n = 2 * m;
    let mut w = DMatrix::zeros(n, n);
    for i in 0..m {
        w[(i, (i + 1) % m)] = 1.0;
        w[(m + i, (i + 2) % m)] = 1.0;
    }
    let net = Network::from_adjacency(w).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, t_len);
    for i in 0..n {
        x[(i, 0)] = rng.random::<f64>() * 2.0 - 1.0;
    }
    for s in 1..t_len {
        for i in 0..m {
            x[(i, s)] = x[((i + 1) % m, s - 1)];
            x[(m + i, s)] = 0.5 * x[((i + 2) % m, s - 1)] + 0.5 * x[(m + i, s - 1)];
        }
    }
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= m)).collect();
    (Panel::new(x).unwrap(), net, GroupStructure::new(2, labels).unwrap())
}

/// `sum_{t != s} K((tau_t - tau_s) / h) e_t^T e_s` by a full double loop.
pub fn q_double_loop(res: &DMatrix<f64>, tau: &[f64], h: f64) -> f64 {
    let mut q = 0.0;
    for t in 0..res.ncols() {
        for s in 0..res.ncols() {
            if s != t {
                q += epa((tau[t] - tau[s]) / h) * res.column(t).dot(&res.column(s));
            }
        }
    }
    q
}

/// Same partition up to relabeling.
pub fn same_partition(a: &GroupStructure, b: &GroupStructure) -> bool {
    let mut ga = a.groups();
    let mut gb = b.groups();
    ga.sort();
    gb.sort();
    ga == gb
}

pub mod props;
