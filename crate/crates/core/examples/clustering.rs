//! Normalized distance matrix between nodes and agglomerative clustering
//! under the three linkage rules.
//!
//! ```bash
//! cargo run --release --example clustering
//! ```

use netvar::cluster::{default_grid_size, full_pipeline, ClusterConfig, LinkageRule};
use netvar::local::{FitMode, LocalData};
use netvar::simulate::{assign_groups, gen_adjacency, gen_error_cov, simulate_panel, GroupMode};
use netvar::{Bandwidths, CoefficientScenario};

fn main() -> netvar::Result<()> {
    let (n, t_len) = (45, 300);
    let scenario = CoefficientScenario::from_pairs(&[
        "-0.8*sin(pi*t) ; -0.5*cos(pi*t)-0.2",
        "-0.7*sin(pi*t)+0.4 ; -0.25*cos(pi*t)+0.25",
        "sin(pi*t)-0.2 ; 0.8*cos(pi*t)",
    ])?;
    let net = gen_adjacency(n, 0.1, 4)?;
    let truth = assign_groups(n, &[1.0 / 3.0; 3], GroupMode::Random, 5)?;
    let panel = simulate_panel(&scenario, &truth, &net, &gen_error_cov(n, 0.3)?, t_len, 200, 6)?;
    let data = LocalData::new(&panel, &net)?;
    let h = Bandwidths::rule_of_thumb(n, t_len)?.h;

    for rule in [LinkageRule::Single, LinkageRule::Complete, LinkageRule::Average] {
        let out = full_pipeline(
            &data,
            &ClusterConfig {
                h,
                grid_size: default_grid_size(t_len),
                rule,
                mode: FitMode::Plain,
            },
        )?;
        let est = out.trace.cut(3)?;
        let last: Vec<f64> = out.trace.merges().iter().rev().take(3).map(|m| m.distance).collect();
        println!(
            "{rule:>8}: purity {:.3} at K=3, top merge heights {:.1?}",
            est.purity(&truth),
            last
        );
    }
    Ok(())
}
