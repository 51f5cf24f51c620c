//! Ingest a raw CSV panel with its adjacency, run the full estimation
//! pipeline and write every output file, as `netvar ingest` and `netvar fit` do.
//!
//! ```bash
//! cargo run --release --example ingest_and_fit
//! ```

use netvar::cli::{cmd_fit, cmd_ingest};
use netvar::config::RunConfig;
use netvar::io;
use netvar::simulate::{assign_groups, gen_adjacency, gen_error_cov, simulate_panel, GroupMode};
use netvar::CoefficientScenario;

fn main() -> netvar::Result<()> {
    let dir = std::env::temp_dir().join("netvar-ingest-example");
    std::fs::create_dir_all(&dir)?;

    // Stand-in for external data: a raw time-major CSV and an adjacency file.
    let n = 40;
    let scenario = CoefficientScenario::from_pairs(&["0.3 ; 0.4", "-0.4 ; 0.2"])?;
    let net = gen_adjacency(n, 0.15, 40)?;
    let groups = assign_groups(n, &[0.5, 0.5], GroupMode::Random, 41)?;
    let panel = simulate_panel(&scenario, &groups, &net, &gen_error_cov(n, 0.2)?, 250, 200, 42)?;
    let ids: Vec<String> = (0..n).map(|i| format!("c{i:02}")).collect();
    io::write_text(&dir.join("raw.csv"), &io::panel_to_csv(&ids, panel.data()))?;
    io::write_text(&dir.join("raw_adjacency.csv"), &io::adjacency_to_csv(&ids, &net))?;

    let clean = dir.join("clean");
    cmd_ingest(&dir.join("raw.csv"), Some(&dir.join("raw_adjacency.csv")), true, &clean)?;
    let fit = dir.join("fit");
    let cfg = RunConfig {
        kbar: 5,
        ..RunConfig::default()
    };
    cmd_fit(&cfg, &clean.join("panel.csv"), &clean.join("adjacency.csv"), &fit)?;

    println!("outputs in {}", fit.display());
    print!("{}", std::fs::read_to_string(fit.join("ic_table.csv"))?);
    print!("{}", std::fs::read_to_string(fit.join("tests.csv"))?);
    let est = io::read_groups(&fit.join("groups_est.csv"), &ids)?;
    println!("purity against the generating partition: {:.3}", est.purity(&groups));
    Ok(())
}
