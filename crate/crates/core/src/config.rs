//! Run configuration read from a `key = value` file.
//!
//! Every key is optional:
//!
//! ```text
//! seed = 1                 # base seed; replication r uses derive(seed, r)
//! n = 100                  # nodes
//! t_len = 300              # time points
//! replications = 100
//! burnin = 200
//! h = 0.2                  # bandwidth overrides (rules of thumb when absent)
//! h1 = 0.05
//! h2 = 0.05
//! h3 = 0.03                # per-group rule of thumb when absent
//! grid_size = 100          # L, default min(T, 100)
//! linkage = "complete"     # single | complete | average
//! kbar = 8
//! rho = 0.001              # default log(max(N,T)) / (N T h1)
//! bias_corrected = false
//! ci_level = 0.95
//! alpha_levels = [0.01, 0.05, 0.10]
//! scenario = "paper"       # "paper", "paper-test" or a list of "expr ; expr" pairs
//! group_mode = "random"    # random | fixed
//! group_probs = [0.3333333333333333, 0.3333333333333333, 0.3333333333333334]
//! edge_prob = 0.1
//! error_rho = 0.3
//! one_sided = false
//! center_residuals = false
//! enforce_stability = false # refuse scenarios whose transition matrix leaves the unit circle
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::LinkageRule;
use crate::error::{Error, Result};
use crate::simulate::{CoefficientScenario, GroupMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSpec {
    Named(String),
    Pairs(Vec<String>),
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec::Named("paper".into())
    }
}

impl ScenarioSpec {
    pub fn build(&self) -> Result<CoefficientScenario> {
        match self {
            ScenarioSpec::Named(name) => match name.as_str() {
                "paper" => Ok(CoefficientScenario::paper()),
                "paper-test" => Ok(CoefficientScenario::paper_test()),
                other => Err(Error::invalid(format!(
                    "unknown scenario `{other}` (expected paper, paper-test or a list of expressions)"
                ))),
            },
            ScenarioSpec::Pairs(pairs) => CoefficientScenario::from_pairs(pairs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub n: usize,
    pub t_len: usize,
    pub replications: usize,
    pub burnin: usize,
    pub h: Option<f64>,
    pub h1: Option<f64>,
    pub h2: Option<f64>,
    pub h3: Option<f64>,
    pub grid_size: Option<usize>,
    pub linkage: LinkageRule,
    pub kbar: usize,
    pub rho: Option<f64>,
    pub bias_corrected: bool,
    pub ci_level: f64,
    pub alpha_levels: Vec<f64>,
    pub scenario: ScenarioSpec,
    pub group_mode: GroupMode,
    pub group_probs: Option<Vec<f64>>,
    pub edge_prob: f64,
    pub error_rho: f64,
    pub one_sided: bool,
    pub center_residuals: bool,
    pub enforce_stability: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            n: 100,
            t_len: 300,
            replications: 100,
            burnin: crate::simulate::DEFAULT_BURNIN,
            h: None,
            h1: None,
            h2: None,
            h3: None,
            grid_size: None,
            linkage: LinkageRule::Complete,
            kbar: crate::select::DEFAULT_KBAR,
            rho: None,
            bias_corrected: false,
            ci_level: 0.95,
            alpha_levels: vec![0.01, 0.05, 0.10],
            scenario: ScenarioSpec::default(),
            group_mode: GroupMode::Random,
            group_probs: None,
            edge_prob: 0.1,
            error_rho: 0.3,
            one_sided: false,
            center_residuals: false,
            enforce_stability: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            file: "config".into(),
            row: e.span().map_or(0, |s| line_of(text, s.start)),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_toml(&text).map_err(|e| match e {
            Error::Parse { row, msg, .. } => Error::Parse {
                file: path.display().to_string(),
                row,
                msg,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Group probabilities: equal by default in random mode, `(1/4, 1/4, 1/2)`
    /// for three groups in fixed mode.
    pub fn group_probs(&self, k: usize) -> Vec<f64> {
        if let Some(p) = &self.group_probs {
            return p.clone();
        }
        if self.group_mode == GroupMode::Fixed && k == 3 {
            return vec![0.25, 0.25, 0.5];
        }
        vec![1.0 / k as f64; k]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if self.n < 2 {
            return bad(format!("n={} must be at least 2", self.n));
        }
        if self.t_len < 10 {
            return bad(format!("t_len={} must be at least 10", self.t_len));
        }
        if self.replications < 1 {
            return bad("replications must be at least 1".into());
        }
        for (name, v) in [("h", self.h), ("h1", self.h1), ("h2", self.h2), ("h3", self.h3)] {
            if let Some(v) = v {
                if !(v > 0.0 && v < 1.0) {
                    return bad(format!("{name}={v} must lie in (0, 1)"));
                }
            }
        }
        if let Some(l) = self.grid_size {
            if l < 2 {
                return bad(format!("grid_size={l} must be at least 2"));
            }
        }
        if self.kbar < 1 {
            return bad("kbar must be at least 1".into());
        }
        if let Some(r) = self.rho {
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("rho={r} must be nonnegative"));
            }
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return bad(format!("ci_level={} must lie in (0, 1)", self.ci_level));
        }
        if self.alpha_levels.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return bad("alpha_levels must lie in (0, 1)".into());
        }
        if !(self.edge_prob > 0.0 && self.edge_prob <= 1.0) {
            return bad(format!("edge_prob={} must lie in (0, 1]", self.edge_prob));
        }
        if !(self.error_rho.abs() < 1.0) {
            return bad(format!("error_rho={} must satisfy |rho| < 1", self.error_rho));
        }
        let scenario = self.scenario.build()?;
        let probs = self.group_probs(scenario.k());
        if probs.len() != scenario.k() {
            return bad(format!(
                "{} group probabilities for {} scenario groups",
                probs.len(),
                scenario.k()
            ));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("group_probs must be nonnegative and sum to 1".into());
        }
        if scenario.k() > self.n {
            return bad(format!("{} groups for {} nodes", scenario.k(), self.n));
        }
        Ok(())
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let cfg = RunConfig::from_toml("n = 20\nlinkage = \"single\"\nscenario = \"paper-test\"\nh = 0.3\n").unwrap();
        assert_eq!(cfg.n, 20);
        assert_eq!(cfg.linkage, LinkageRule::Single);
        assert_eq!(cfg.scenario.build().unwrap(), CoefficientScenario::paper_test());
        assert_eq!(cfg.h, Some(0.3));
    }

    #[test]
    fn custom_scenario() {
        let cfg = RunConfig::from_toml("scenario = [\"0.2 ; 0.3\", \"-0.5*sin(pi*t) ; 0.1\"]\n").unwrap();
        assert_eq!(cfg.scenario.build().unwrap().k(), 2);
    }

    #[test]
    fn rejects_invalid() {
        assert!(matches!(RunConfig::from_toml("n = 1\n"), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            RunConfig::from_toml("seed = 1\nbogus = 2\n"),
            Err(Error::Parse { row: 2, .. })
        ));
        assert!(RunConfig::from_toml("ci_level = 1.5").is_err());
        assert!(RunConfig::from_toml("linkage = \"ward\"").is_err());
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig {
            h3: Some(0.05),
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn fixed_mode_probs() {
        let cfg = RunConfig {
            group_mode: GroupMode::Fixed,
            ..RunConfig::default()
        };
        assert_eq!(cfg.group_probs(3), vec![0.25, 0.25, 0.5]);
        assert_eq!(RunConfig::default().group_probs(3), vec![1.0 / 3.0; 3]);
    }
}
