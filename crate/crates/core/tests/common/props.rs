//! Property checks shared by the proptest suite and the acceptance run.

use nalgebra::DMatrix;
use netvar::cluster::{agglomerate, build_trace, full_pipeline, ClusterConfig, DistanceMatrix, LinkageRule};
use netvar::local::{FitMode, LocalData};
use netvar::select::ic_curve;
use netvar::simulate::{gen_adjacency, simulate_panel};
use netvar::spectest::{q_statistic, standardize, StandardizeOptions};
use netvar::{CoefficientScenario, ErrorModel, GroupStructure, Kernel};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{exact_two_group_panel, q_double_loop, same_partition};

type Check = Result<(), TestCaseError>;

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

pub fn distance_args() -> impl Strategy<Value = (usize, usize, u64)> {
    (4usize..9, 40usize..80, any::<u64>())
}

/// Symmetry, zero diagonal, nonnegativity and node-permutation equivariance of D.
pub fn distance_invariants(n: usize, t_len: usize, seed: u64) -> Check {
    let scen = CoefficientScenario::paper_test();
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let groups = GroupStructure::new(3, labels).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let net = gen_adjacency(n, 0.5, seed).unwrap();
    let panel = simulate_panel(&scen, &groups, &net, &ErrorModel::identity(n), t_len, 20, seed ^ 1).unwrap();
    let cfg = ClusterConfig {
        h: 0.3,
        grid_size: 8,
        rule: LinkageRule::Complete,
        mode: FitMode::Plain,
    };
    let data = LocalData::new(&panel, &net).unwrap();
    let out = full_pipeline(&data, &cfg).unwrap();
    let d = out.distance.matrix();
    for i in 0..n {
        prop_assert_eq!(d[(i, i)], 0.0);
        for j in 0..n {
            prop_assert!(d[(i, j)].is_finite() && d[(i, j)] >= 0.0);
            prop_assert_eq!(d[(i, j)], d[(j, i)]);
        }
    }
    let perm = shuffled(n, seed);
    let (pp, pn) = (panel.permuted(&perm), net.permuted(&perm).unwrap());
    let pdata = LocalData::new(&pp, &pn).unwrap();
    let pout = full_pipeline(&pdata, &cfg).unwrap();
    let expect = out.distance.permuted(&perm);
    for a in 0..n {
        for b in 0..n {
            prop_assert!(
                close(pout.distance.get(a, b), expect.get(a, b), 1e-8),
                "({}, {}): {} vs {}",
                a,
                b,
                pout.distance.get(a, b),
                expect.get(a, b)
            );
        }
    }
    Ok(())
}

pub fn agglomeration_args() -> impl Strategy<Value = (usize, u64, usize)> {
    (2usize..16, any::<u64>(), 0usize..3)
}

fn rule_of(r: usize) -> LinkageRule {
    [LinkageRule::Single, LinkageRule::Complete, LinkageRule::Average][r]
}

fn random_distance(n: usize, seed: u64) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random::<f64>() * 10.0 + 1e-3;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    DistanceMatrix::new(d, vec![0.5]).unwrap()
}

/// Merge counts, monotone merge heights and permutation equivariance.
pub fn agglomeration(n: usize, seed: u64, rule: usize) -> Check {
    let rule = rule_of(rule);
    let dist = random_distance(n, seed);
    let trace = build_trace(&dist, rule, 1).unwrap();
    prop_assert_eq!(trace.merges().len(), n - 1);
    for w in trace.merges().windows(2) {
        prop_assert!(w[1].distance >= w[0].distance);
    }
    let perm = shuffled(n, seed.wrapping_add(7));
    let pdist = dist.permuted(&perm);
    for k in 1..=n {
        let g = agglomerate(&dist, k, rule).unwrap();
        prop_assert_eq!(g.k(), k);
        prop_assert_eq!(g.membership().len(), n);
        prop_assert!(g.groups().iter().all(|m| !m.is_empty()));
        prop_assert_eq!(&trace.cut(k).unwrap(), &g);
        // New node a is old node perm[a].
        let pg = agglomerate(&pdist, k, rule).unwrap();
        let back: Vec<usize> = {
            let mut lab = vec![0; n];
            for (a, &old) in perm.iter().enumerate() {
                lab[old] = pg.label(a);
            }
            lab
        };
        let back = GroupStructure::from_labels(&back).unwrap();
        prop_assert!(same_partition(&back, &g), "k={}", k);
    }
    Ok(())
}

pub fn ic_args() -> impl Strategy<Value = (usize, u64)> {
    (3usize..6, any::<u64>())
}

/// On a noise-free two-group panel: the residual variance vanishes from the
/// true split on, is positive before it, never increases along the
/// dendrogram, and the selected count never increases with the penalty.
pub fn ic_zero_noise(m: usize, seed: u64) -> Check {
    let (panel, net, truth) = exact_two_group_panel(m, 60, seed);
    let n = 2 * m;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let base = if truth.label(i) == truth.label(j) { 1.0 } else { 100.0 };
            let v = base + rng.random::<f64>();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    let dist = DistanceMatrix::new(d, vec![0.5]).unwrap();
    let trace = build_trace(&dist, LinkageRule::Complete, 1).unwrap();
    prop_assert_eq!(&trace.cut(2).unwrap(), &truth);
    let data = LocalData::new(&panel, &net).unwrap();
    let scale = panel.data().norm_squared() / (n * 60) as f64;
    let kbar = 5;
    let rep = ic_curve(&data, &trace, kbar, 0.25, 0.0).unwrap();
    prop_assert!(rep.table[0].sigma2 > 1e-6 * scale, "K=1 sigma2 {}", rep.table[0].sigma2);
    for row in &rep.table[1..] {
        prop_assert!(row.sigma2 <= 1e-16 * scale, "K={} sigma2 {}", row.k, row.sigma2);
    }
    for w in rep.table.windows(2) {
        prop_assert!(w[1].sigma2 <= w[0].sigma2 + 1e-16 * scale);
    }
    let mut last = usize::MAX;
    for rho in [0.0, 1e-3, 1e-1, 1.0, 10.0, 1e3] {
        let k = ic_curve(&data, &trace, kbar, 0.25, rho).unwrap().k_hat;
        prop_assert!(k <= last, "rho={} gives K={} after {}", rho, k, last);
        last = k;
    }
    prop_assert_eq!(last, 1);
    Ok(())
}

pub fn q_args() -> impl Strategy<Value = (usize, usize, f64, u64)> {
    (1usize..6, 10usize..120, 0.02f64..0.6, any::<u64>())
}

fn random_residuals(g: usize, cols: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = DMatrix::from_fn(g, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let t_len = cols + 1;
    let tau = (1..t_len).map(|s| (s + 1) as f64 / t_len as f64).collect();
    (res, tau)
}

/// The banded statistic equals the full double loop.
pub fn q_banded(g: usize, cols: usize, h3: f64, seed: u64) -> Check {
    let (res, tau) = random_residuals(g, cols, seed);
    let fast = q_statistic(&res, &tau, h3).unwrap();
    let slow = q_double_loop(&res, &tau, h3);
    prop_assert!(close(fast, slow, 1e-10), "{} vs {}", fast, slow);
    Ok(())
}

pub fn scale_args() -> impl Strategy<Value = (usize, usize, f64, u64, f64)> {
    (1usize..6, 10usize..120, 0.02f64..0.6, any::<u64>(), -6.0f64..6.0)
}

/// Rescaling every residual leaves the standardized statistic unchanged.
pub fn q_std_scale(g: usize, cols: usize, h3: f64, seed: u64, log_c: f64) -> Check {
    let c = 10f64.powf(log_c);
    let (res, tau) = random_residuals(g, cols, seed);
    let scaled = &res * c;
    let nu0 = Kernel::Epanechnikov.nu0();
    for center in [false, true] {
        let opts = StandardizeOptions {
            center,
            ..Default::default()
        };
        let a = standardize(q_statistic(&res, &tau, h3).unwrap(), &res, h3, nu0, opts).unwrap();
        let b = standardize(q_statistic(&scaled, &tau, h3).unwrap(), &scaled, h3, nu0, opts).unwrap();
        prop_assert!(close(a.q_std, b.q_std, 1e-10), "{} vs {}", a.q_std, b.q_std);
        prop_assert!((a.p_value - b.p_value).abs() <= 1e-10);
    }
    Ok(())
}
