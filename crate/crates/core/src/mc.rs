//! Monte-Carlo harness: independent replications of simulate-then-estimate
//! with group-number, purity, RMSE and test-rejection metrics.

use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::groups::GroupStructure;
use crate::io::fmt_f64;
use crate::local::LocalData;
use crate::pipeline::{estimate_groups, EstimationConfig};
use crate::postgroup::{post_observation_paths, rmse};
use crate::rng::{stream_seed, Stream};
use crate::simulate::{
    assign_groups, gen_adjacency, gen_error_cov, simulate_panel, stability_check, CoefficientScenario, ErrorModel,
    GroupMode, STABILITY_GRID,
};
use crate::spectest::run_test;

/// Everything a replication needs, resolved once from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct McSetup {
    pub cfg: RunConfig,
    pub scenario: CoefficientScenario,
    pub probs: Vec<f64>,
    pub errors: ErrorModel,
    pub est: EstimationConfig,
}

impl McSetup {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let scenario = cfg.scenario.build()?;
        Ok(McSetup {
            probs: cfg.group_probs(scenario.k()),
            errors: gen_error_cov(cfg.n, cfg.error_rho)?,
            est: EstimationConfig::from_run(cfg),
            scenario,
            cfg: cfg.clone(),
        })
    }

    pub fn k0(&self) -> usize {
        self.scenario.k()
    }

    /// True partition of replication `rep`.
    pub fn truth(&self, rep: u64) -> Result<GroupStructure> {
        match self.cfg.group_mode {
            GroupMode::Random => assign_groups(
                self.cfg.n,
                &self.probs,
                GroupMode::Random,
                stream_seed(self.cfg.seed, rep, Stream::Groups),
            ),
            GroupMode::Fixed => assign_groups(self.cfg.n, &self.probs, GroupMode::Fixed, self.cfg.seed),
        }
    }
}

/// Metrics of one successful replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepMetrics {
    pub k_hat: usize,
    pub purity: f64,
    pub rmse_pre: f64,
    pub rmse_post: f64,
    pub rmse_ora: f64,
    /// Test p-values per true group using the estimated partition; present
    /// only when `K^ = K0` and estimated groups map one-to-one onto true groups.
    pub p_est: Option<Vec<f64>>,
    /// Test p-values per true group using the true partition.
    pub p_ora: Vec<f64>,
    /// Standardized statistics per true group under the true partition.
    pub q_ora: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub rep: u64,
    pub outcome: std::result::Result<RepMetrics, String>,
}

/// One replication: fresh network, groups and noise from streams derived from `(seed, rep)`.
pub fn run_replication(setup: &McSetup, rep: u64) -> Result<RepMetrics> {
    let cfg = &setup.cfg;
    let net = gen_adjacency(cfg.n, cfg.edge_prob, stream_seed(cfg.seed, rep, Stream::Network))?;
    let truth = setup.truth(rep)?;
    if cfg.enforce_stability {
        let report = stability_check(&setup.scenario, &truth, &net, STABILITY_GRID)?;
        if !report.stable {
            return Err(Error::InstabilityDetected(format!(
                "spectral radius {:.6} at tau={:.3} is not below 1",
                report.max_radius, report.argmax_tau
            )));
        }
    }
    let panel = simulate_panel(
        &setup.scenario,
        &truth,
        &net,
        &setup.errors,
        cfg.t_len,
        cfg.burnin,
        stream_seed(cfg.seed, rep, Stream::Noise),
    )?;
    let data = LocalData::new(&panel, &net)?;
    let grouping = estimate_groups(&data, &setup.est)?;
    let est = &grouping.groups;
    let h2 = grouping.bandwidths.h2;
    let rmse_pre = rmse(&grouping.cluster.obs_paths, &setup.scenario, &truth)?;
    let rmse_post = rmse(&post_observation_paths(&data, est, h2)?, &setup.scenario, &truth)?;
    let rmse_ora = rmse(&post_observation_paths(&data, &truth, h2)?, &setup.scenario, &truth)?;

    let k0 = setup.k0();
    let mut p_ora = Vec::with_capacity(k0);
    let mut q_ora = Vec::with_capacity(k0);
    for k in 0..k0 {
        let r = run_test(&data, &truth, k, &setup.est.test)?;
        p_ora.push(r.p_value);
        q_ora.push(r.q_std);
    }
    let p_est = if est.k() == k0 {
        let map = est.majority_map(&truth);
        let mut inverse = vec![None; k0];
        for (g, &k) in map.iter().enumerate() {
            inverse[k] = Some(g);
        }
        match inverse.into_iter().collect::<Option<Vec<usize>>>() {
            Some(inv) => Some(
                inv.iter()
                    .map(|&g| run_test(&data, est, g, &setup.est.test).map(|r| r.p_value))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        }
    } else {
        None
    };
    Ok(RepMetrics {
        k_hat: est.k(),
        purity: est.purity(&truth),
        rmse_pre,
        rmse_post,
        rmse_ora,
        p_est,
        p_ora,
        q_ora,
    })
}

/// Replications `reps`, run on the rayon pool and returned in index order.
pub fn run_replications(setup: &McSetup, reps: Range<u64>) -> Vec<RepRecord> {
    reps.into_par_iter()
        .map(|rep| RepRecord {
            rep,
            outcome: run_replication(setup, rep).map_err(|e| e.to_string()),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

fn mean_se(v: &[f64]) -> MeanSe {
    let n = v.len() as f64;
    if v.is_empty() {
        return MeanSe { mean: f64::NAN, se: f64::NAN };
    }
    let mean = v.iter().sum::<f64>() / n;
    let se = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    MeanSe { mean, se }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub k0: usize,
    pub replications: usize,
    pub failed: usize,
    pub ep_correct: f64,
    pub ep_over: f64,
    pub ep_under: f64,
    pub purity: f64,
    pub rmse_pre: MeanSe,
    pub rmse_post: MeanSe,
    pub rmse_ora: MeanSe,
    pub alpha_levels: Vec<f64>,
    /// Replications entering the estimated-partition rejection rates.
    pub conditioned: usize,
    /// `trr[k][a]`: rejection rate for true group `k` at `alpha_levels[a]`,
    /// over conditioned replications.
    pub trr: Vec<Vec<f64>>,
    /// Same with the true partition, over all completed replications.
    pub trr_oracle: Vec<Vec<f64>>,
}

fn rates(pvals: &[&Vec<f64>], k0: usize, alphas: &[f64]) -> Vec<Vec<f64>> {
    (0..k0)
        .map(|k| {
            alphas
                .iter()
                .map(|&a| {
                    if pvals.is_empty() {
                        return f64::NAN;
                    }
                    pvals.iter().filter(|p| p[k] < a).count() as f64 / pvals.len() as f64
                })
                .collect()
        })
        .collect()
}

/// Aggregates completed replications in record order.
pub fn summarize(records: &[RepRecord], k0: usize, alpha_levels: &[f64]) -> McSummary {
    let ok: Vec<&RepMetrics> = records.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let r = ok.len();
    let count = |f: &dyn Fn(usize) -> bool| ok.iter().filter(|m| f(m.k_hat)).count();
    let (correct, over) = (count(&|k| k == k0), count(&|k| k > k0));
    let under = r - correct - over;
    let frac = |c: usize| if r == 0 { f64::NAN } else { c as f64 / r as f64 };
    let col = |f: &dyn Fn(&RepMetrics) -> f64| ok.iter().map(|m| f(m)).collect::<Vec<f64>>();
    let cond: Vec<&Vec<f64>> = ok.iter().filter_map(|m| m.p_est.as_ref()).collect();
    let ora: Vec<&Vec<f64>> = ok.iter().map(|m| &m.p_ora).collect();
    McSummary {
        k0,
        replications: r,
        failed: records.len() - r,
        ep_correct: frac(correct),
        ep_over: frac(over),
        ep_under: frac(under),
        purity: mean_se(&col(&|m| m.purity)).mean,
        rmse_pre: mean_se(&col(&|m| m.rmse_pre)),
        rmse_post: mean_se(&col(&|m| m.rmse_post)),
        rmse_ora: mean_se(&col(&|m| m.rmse_ora)),
        alpha_levels: alpha_levels.to_vec(),
        conditioned: cond.len(),
        trr: rates(&cond, k0, alpha_levels),
        trr_oracle: rates(&ora, k0, alpha_levels),
    }
}

impl McSummary {
    /// Two-column `metric,value` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        let mut row = |k: &str, v: String| {
            let _ = writeln!(s, "{k},{v}");
        };
        row("k0", self.k0.to_string());
        row("replications", self.replications.to_string());
        row("failed", self.failed.to_string());
        row("ep_correct", fmt_f64(self.ep_correct));
        row("ep_over", fmt_f64(self.ep_over));
        row("ep_under", fmt_f64(self.ep_under));
        row("purity", fmt_f64(self.purity));
        for (name, m) in [
            ("rmse_pre", self.rmse_pre),
            ("rmse_post", self.rmse_post),
            ("rmse_ora", self.rmse_ora),
        ] {
            row(name, fmt_f64(m.mean));
            row(&format!("{name}_se"), fmt_f64(m.se));
        }
        row("conditioned", self.conditioned.to_string());
        for (prefix, table) in [("trr", &self.trr), ("trr_oracle", &self.trr_oracle)] {
            for (k, rates) in table.iter().enumerate() {
                for (a, v) in self.alpha_levels.iter().zip(rates) {
                    row(&format!("{prefix}_group{}_alpha{a}", k + 1), fmt_f64(*v));
                }
            }
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Per-replication CSV.
pub fn detail_csv(records: &[RepRecord], k0: usize) -> String {
    let mut s = String::from("rep,status,k_hat,purity,rmse_pre,rmse_post,rmse_ora");
    for prefix in ["p_est", "p_ora", "q_ora"] {
        for k in 1..=k0 {
            let _ = write!(s, ",{prefix}_{k}");
        }
    }
    s.push_str(",error\n");
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in records {
        match &r.outcome {
            Ok(m) => {
                let _ = write!(
                    s,
                    "{},ok,{},{},{},{},{}",
                    r.rep + 1,
                    m.k_hat,
                    fmt_f64(m.purity),
                    fmt_f64(m.rmse_pre),
                    fmt_f64(m.rmse_post),
                    fmt_f64(m.rmse_ora)
                );
                for k in 0..k0 {
                    let _ = write!(s, ",{}", opt(m.p_est.as_ref().map(|p| p[k])));
                }
                for v in m.p_ora.iter().chain(&m.q_ora) {
                    let _ = write!(s, ",{}", fmt_f64(*v));
                }
                s.push(',');
            }
            Err(msg) => {
                let _ = write!(s, "{},failed,,,,,", r.rep + 1);
                for _ in 0..3 * k0 {
                    s.push(',');
                }
                let _ = write!(s, "\"{}\"", msg.replace('"', "'"));
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(k_hat: usize, p: f64) -> RepMetrics {
        RepMetrics {
            k_hat,
            purity: 1.0,
            rmse_pre: 0.05,
            rmse_post: 0.04,
            rmse_ora: 0.04,
            p_est: (k_hat == 2).then(|| vec![p, p]),
            p_ora: vec![p, 0.5],
            q_ora: vec![0.0, 0.0],
        }
    }

    #[test]
    fn single_replication_summary() {
        let recs = vec![RepRecord { rep: 0, outcome: Ok(metrics(2, 0.03)) }];
        let s = summarize(&recs, 2, &[0.01, 0.05]);
        assert_eq!((s.ep_correct, s.ep_over, s.ep_under), (1.0, 0.0, 0.0));
        assert_eq!(s.rmse_pre.mean, 0.05);
        assert_eq!(s.trr[0], vec![0.0, 1.0]);
        assert_eq!(s.trr_oracle[1], vec![0.0, 0.0]);
    }

    #[test]
    fn ep_sums_to_one_and_failures_excluded() {
        let recs = vec![
            RepRecord { rep: 0, outcome: Ok(metrics(2, 0.5)) },
            RepRecord { rep: 1, outcome: Ok(metrics(3, 0.5)) },
            RepRecord { rep: 2, outcome: Ok(metrics(1, 0.5)) },
            RepRecord { rep: 3, outcome: Err("boom".into()) },
        ];
        let s = summarize(&recs, 2, &[0.05]);
        assert_eq!(s.replications, 3);
        assert_eq!(s.failed, 1);
        assert_eq!(s.ep_correct + s.ep_over + s.ep_under, 1.0);
        assert_eq!(s.conditioned, 1);
        let csv = detail_csv(&recs, 2);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().nth(4).unwrap().starts_with("4,failed"));
    }
}
