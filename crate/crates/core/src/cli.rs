//! The `netvar` command-line front end.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 numerical failure,
//! 4 instability.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cluster::LinkageRule;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::local::LocalData;
use crate::mc::{detail_csv, run_replications, summarize, McSetup, McSummary};
use crate::pipeline::{estimate, test_all, EstimationConfig};
use crate::postgroup::paths_to_csv;
use crate::rng::{stream_seed, Stream};
use crate::simulate::{gen_adjacency, gen_error_cov, simulate_panel, stability_check, STABILITY_GRID};
use crate::spectest::results_to_csv;

#[derive(Debug, Parser)]
#[command(name = "netvar", version, about = "Grouped time-varying network VAR estimation")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "NETVAR_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Configuration file (`key = value`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub linkage: Option<LinkageRule>,
    /// Cluster on jackknife bias-corrected preliminary estimates.
    #[arg(long)]
    pub bias_corrected: bool,
    /// Largest group count considered by the information criterion.
    #[arg(long)]
    pub kbar: Option<usize>,
}

impl Common {
    /// The config file (or defaults) with command-line overrides applied.
    pub fn resolve(&self, replications: Option<usize>) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(l) = self.linkage {
            cfg.linkage = l;
        }
        if self.bias_corrected {
            cfg.bias_corrected = true;
        }
        if let Some(k) = self.kbar {
            cfg.kbar = k;
        }
        if let Some(r) = replications {
            cfg.replications = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a panel, network and true partition.
    Simulate(Common),
    /// Run the full estimation pipeline on a panel.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        adjacency: PathBuf,
    },
    /// Monte-Carlo replications of simulate-then-estimate.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Convert a raw time-major CSV into a canonical panel.
    Ingest {
        #[arg(long)]
        raw: PathBuf,
        /// Adjacency to validate and copy alongside the panel.
        #[arg(long)]
        adjacency: Option<PathBuf>,
        /// Keep the raw scale instead of z-scoring each series.
        #[arg(long)]
        no_standardize: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Constant-coefficient tests on a supplied partition.
    Test {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        adjacency: PathBuf,
        #[arg(long)]
        groups: PathBuf,
    },
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Io(_) => 2,
        Error::InstabilityDetected(_) => 4,
        _ => 3,
    }
}

fn prepare_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

/// Writes `panel.csv`, `adjacency.csv`, `groups.csv`, `scenario.txt` and
/// `stability.txt`. Uses the streams of Monte-Carlo replication 0. An unstable
/// scenario is a warning unless `enforce_stability` is set, in which case
/// nothing but `stability.txt` is written.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    prepare_out(out)?;
    let setup = McSetup::new(cfg)?;
    let net = gen_adjacency(cfg.n, cfg.edge_prob, stream_seed(cfg.seed, 0, Stream::Network))?;
    let truth = setup.truth(0)?;
    let report = stability_check(&setup.scenario, &truth, &net, STABILITY_GRID)?;
    io::write_text(&out.join("stability.txt"), &report.to_text())?;
    if !report.stable {
        let msg = format!(
            "spectral radius {:.6} at tau={:.3} is not below 1",
            report.max_radius, report.argmax_tau
        );
        if cfg.enforce_stability {
            return Err(Error::InstabilityDetected(msg));
        }
        eprintln!("warning: {msg}; the panel is locally explosive");
    }
    let errs = gen_error_cov(cfg.n, cfg.error_rho)?;
    let panel = simulate_panel(
        &setup.scenario,
        &truth,
        &net,
        &errs,
        cfg.t_len,
        cfg.burnin,
        stream_seed(cfg.seed, 0, Stream::Noise),
    )?;
    let ids = io::default_ids(cfg.n);
    io::write_text(&out.join("panel.csv"), &io::panel_to_csv(&ids, panel.data()))?;
    io::write_text(&out.join("adjacency.csv"), &io::adjacency_to_csv(&ids, &net))?;
    io::write_text(&out.join("groups.csv"), &io::groups_to_csv(&ids, &truth))?;
    io::write_text(&out.join("scenario.txt"), &setup.scenario.to_text())?;
    Ok(())
}

fn read_inputs(panel: &Path, adjacency: &Path) -> Result<(Vec<String>, crate::Panel, crate::Network)> {
    let (ids, p) = io::read_panel(panel)?;
    let (adj_ids, net) = io::read_adjacency(adjacency)?;
    if adj_ids.len() != ids.len() {
        return Err(Error::invalid(format!(
            "panel has {} nodes but adjacency has {}",
            ids.len(),
            adj_ids.len()
        )));
    }
    if adj_ids != ids {
        return Err(Error::invalid("panel and adjacency node identifiers differ"));
    }
    Ok((ids, p, net))
}

/// Writes `groups_est.csv`, `ic_table.csv`, `paths.csv`, `tests.csv`,
/// `distance.csv` and `merge_trace.csv`.
pub fn cmd_fit(cfg: &RunConfig, panel: &Path, adjacency: &Path, out: &Path) -> Result<()> {
    let (ids, panel, net) = read_inputs(panel, adjacency)?;
    prepare_out(out)?;
    let fit = estimate(&panel, &net, &EstimationConfig::from_run(cfg))?;
    let g = &fit.grouping;
    io::write_text(&out.join("groups_est.csv"), &io::groups_to_csv(&ids, &g.groups))?;
    io::write_text(&out.join("ic_table.csv"), &g.ic.to_csv())?;
    io::write_text(&out.join("paths.csv"), &paths_to_csv(&fit.paths))?;
    io::write_text(&out.join("tests.csv"), &results_to_csv(&fit.tests))?;
    io::write_text(&out.join("distance.csv"), &io::matrix_to_csv(&ids, g.cluster.distance.matrix()))?;
    io::write_text(&out.join("merge_trace.csv"), &g.cluster.trace.to_csv())?;
    Ok(())
}

/// Writes `mc_summary.csv`, `mc_summary.json` and `mc_detail.csv`.
pub fn cmd_mc(cfg: &RunConfig, out: &Path) -> Result<McSummary> {
    prepare_out(out)?;
    let setup = McSetup::new(cfg)?;
    let records = run_replications(&setup, 0..cfg.replications as u64);
    let summary = summarize(&records, setup.k0(), &cfg.alpha_levels);
    if summary.failed > 0 {
        eprintln!("warning: {} of {} replications failed", summary.failed, records.len());
    }
    io::write_text(&out.join("mc_summary.csv"), &summary.to_csv())?;
    io::write_text(&out.join("mc_summary.json"), &summary.to_json())?;
    io::write_text(&out.join("mc_detail.csv"), &detail_csv(&records, setup.k0()))?;
    Ok(summary)
}

/// Writes `panel.csv` (and `adjacency.csv` when given).
pub fn cmd_ingest(raw: &Path, adjacency: Option<&Path>, standardize: bool, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(raw)?;
    let (ids, data) = io::parse_panel_matrix(&text, &raw.display().to_string())?;
    let data = if standardize { io::standardize_rows(&data, &ids)? } else { data };
    crate::Panel::new(data.clone())?;
    if let Some(adj) = adjacency {
        let (adj_ids, net) = io::read_adjacency(adj)?;
        if adj_ids != ids {
            return Err(Error::invalid("panel and adjacency node identifiers differ"));
        }
        prepare_out(out)?;
        io::write_text(&out.join("adjacency.csv"), &io::adjacency_to_csv(&ids, &net))?;
    }
    prepare_out(out)?;
    io::write_text(&out.join("panel.csv"), &io::panel_to_csv(&ids, &data))?;
    Ok(())
}

/// Writes `tests.csv` for every group of the supplied partition.
pub fn cmd_test(cfg: &RunConfig, panel: &Path, adjacency: &Path, groups: &Path, out: &Path) -> Result<()> {
    let (ids, panel, net) = read_inputs(panel, adjacency)?;
    let partition = io::read_groups(groups, &ids)?;
    prepare_out(out)?;
    let data = LocalData::new(&panel, &net)?;
    let results = test_all(&data, &partition, &EstimationConfig::from_run(cfg).test)?;
    io::write_text(&out.join("tests.csv"), &results_to_csv(&results))?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => cmd_simulate(&common.resolve(None)?, &common.out),
        Command::Fit {
            common,
            panel,
            adjacency,
        } => cmd_fit(&common.resolve(None)?, &panel, &adjacency, &common.out),
        Command::Mc { common, replications } => {
            let summary = cmd_mc(&common.resolve(replications)?, &common.out)?;
            println!("{}", summary.to_json());
            Ok(())
        }
        Command::Ingest {
            raw,
            adjacency,
            no_standardize,
            out,
        } => cmd_ingest(&raw, adjacency.as_deref(), !no_standardize, &out),
        Command::Test {
            common,
            panel,
            adjacency,
            groups,
        } => cmd_test(&common.resolve(None)?, &panel, &adjacency, &groups, &common.out),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return 2;
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
