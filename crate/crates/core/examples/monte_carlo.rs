//! A small Monte-Carlo study: group recovery, estimation error and test
//! rejection rates over independent replications.
//!
//! ```bash
//! cargo run --release --example monte_carlo
//! ```

use netvar::config::RunConfig;
use netvar::mc::{run_replications, summarize, McSetup};

fn main() -> netvar::Result<()> {
    let cfg = RunConfig::from_toml(
        r#"
n = 60
t_len = 200
replications = 12
scenario = ["-0.5 ; -0.4", "-0.7*sin(pi*t)+0.4 ; -0.25*cos(pi*t)+0.25", "sin(pi*t)-0.2 ; 0.8*cos(pi*t)"]
enforce_stability = true
"#,
    )?;
    let setup = McSetup::new(&cfg)?;
    let records = run_replications(&setup, 0..cfg.replications as u64);
    for r in &records {
        match &r.outcome {
            Ok(m) => println!("rep {:>2}: K={} purity {:.3} rmse post {:.4}", r.rep + 1, m.k_hat, m.purity, m.rmse_post),
            Err(e) => println!("rep {:>2}: failed: {e}", r.rep + 1),
        }
    }
    let summary = summarize(&records, setup.k0(), &cfg.alpha_levels);
    print!("{}", summary.to_csv());
    Ok(())
}
