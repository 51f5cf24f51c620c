//! End-to-end estimation: preliminary fits, clustering, group-count
//! selection, post-grouping paths with bands, and specification tests.

use crate::cluster::{default_grid_size, full_pipeline, ClusterConfig, ClusterOutput, LinkageRule};
use crate::config::RunConfig;
use crate::error::Result;
use crate::groups::GroupStructure;
use crate::kernel::Bandwidths;
use crate::local::{FitMode, LocalData};
use crate::postgroup::{group_paths, GroupPath};
use crate::select::{default_rho, ic_curve, ICReport, DEFAULT_KBAR};
use crate::simulate::{Network, Panel};
use crate::spectest::{run_test, Sidedness, StandardizeOptions, TestConfig, TestResult};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationConfig {
    pub h: Option<f64>,
    pub h1: Option<f64>,
    pub h2: Option<f64>,
    pub grid_size: Option<usize>,
    pub linkage: LinkageRule,
    pub kbar: usize,
    pub rho: Option<f64>,
    pub bias_corrected: bool,
    pub ci_level: f64,
    pub test: TestConfig,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            h: None,
            h1: None,
            h2: None,
            grid_size: None,
            linkage: LinkageRule::Complete,
            kbar: DEFAULT_KBAR,
            rho: None,
            bias_corrected: false,
            ci_level: 0.95,
            test: TestConfig::default(),
        }
    }
}

impl EstimationConfig {
    pub fn from_run(cfg: &RunConfig) -> Self {
        EstimationConfig {
            h: cfg.h,
            h1: cfg.h1,
            h2: cfg.h2,
            grid_size: cfg.grid_size,
            linkage: cfg.linkage,
            kbar: cfg.kbar,
            rho: cfg.rho,
            bias_corrected: cfg.bias_corrected,
            ci_level: cfg.ci_level,
            test: TestConfig {
                h3: cfg.h3,
                opts: StandardizeOptions {
                    sidedness: if cfg.one_sided { Sidedness::Upper } else { Sidedness::TwoSided },
                    center: cfg.center_residuals,
                },
            },
        }
    }

    /// Rules of thumb for an `n x t_len` panel with any overrides applied.
    pub fn bandwidths(&self, n: usize, t_len: usize) -> Result<Bandwidths> {
        let rot = Bandwidths::rule_of_thumb(n, t_len)?;
        Bandwidths::new(
            self.h.unwrap_or(rot.h),
            self.h1.unwrap_or(rot.h1),
            self.h2.unwrap_or(rot.h2),
            self.test.h3,
        )
    }

    pub fn mode(&self) -> FitMode {
        if self.bias_corrected {
            FitMode::BiasCorrected
        } else {
            FitMode::Plain
        }
    }
}

/// Output of the grouping stages.
#[derive(Debug, Clone)]
pub struct Grouping {
    pub bandwidths: Bandwidths,
    pub cluster: ClusterOutput,
    pub ic: ICReport,
    pub groups: GroupStructure,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub grouping: Grouping,
    /// Group paths with bands on the clustering grid.
    pub paths: Vec<GroupPath>,
    pub tests: Vec<TestResult>,
}

/// Preliminary fits, distance matrix, dendrogram and the selected partition.
pub fn estimate_groups(data: &LocalData<'_>, cfg: &EstimationConfig) -> Result<Grouping> {
    let (n, t_len) = (data.n(), data.t_len());
    let bandwidths = cfg.bandwidths(n, t_len).map_err(|e| e.in_stage("bandwidths"))?;
    let cluster = full_pipeline(
        data,
        &ClusterConfig {
            h: bandwidths.h,
            grid_size: cfg.grid_size.unwrap_or_else(|| default_grid_size(t_len)),
            rule: cfg.linkage,
            mode: cfg.mode(),
        },
    )
    .map_err(|e| e.in_stage("clustering"))?;
    let rho = cfg.rho.unwrap_or_else(|| default_rho(n, t_len, bandwidths.h1));
    let ic = ic_curve(data, &cluster.trace, cfg.kbar.min(n), bandwidths.h1, rho)
        .map_err(|e| e.in_stage("group-number selection"))?;
    let groups = cluster.trace.cut(ic.k_hat)?;
    Ok(Grouping {
        bandwidths,
        cluster,
        ic,
        groups,
    })
}

/// Constant-coefficient tests for every group of `partition`.
pub fn test_all(data: &LocalData<'_>, partition: &GroupStructure, cfg: &TestConfig) -> Result<Vec<TestResult>> {
    (0..partition.k())
        .map(|k| run_test(data, partition, k, cfg))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("specification test"))
}

/// The full estimation pipeline on one panel.
pub fn estimate(panel: &Panel, net: &Network, cfg: &EstimationConfig) -> Result<FitOutput> {
    let data = LocalData::new(panel, net).map_err(|e| e.in_stage("input"))?;
    let grouping = estimate_groups(&data, cfg)?;
    let paths = group_paths(
        &data,
        &grouping.groups,
        grouping.cluster.distance.grid(),
        grouping.bandwidths.h2,
        cfg.ci_level,
    )
    .map_err(|e| e.in_stage("post-grouping estimation"))?;
    let tests = test_all(&data, &grouping.groups, &cfg.test)?;
    Ok(FitOutput { grouping, paths, tests })
}
