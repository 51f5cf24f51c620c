//! Group-level coefficient paths with pointwise confidence bands once the
//! partition is known, compared with the truth.
//!
//! ```bash
//! cargo run --release --example post_grouping_bands
//! ```

use netvar::local::LocalData;
use netvar::postgroup::group_paths;
use netvar::simulate::{assign_groups, gen_adjacency, gen_error_cov, simulate_panel, GroupMode};
use netvar::{Bandwidths, CoefficientScenario};

fn main() -> netvar::Result<()> {
    let (n, t_len) = (60, 300);
    let scenario = CoefficientScenario::from_pairs(&[
        "-0.8*sin(pi*t) ; -0.5*cos(pi*t)-0.2",
        "-0.7*sin(pi*t)+0.4 ; -0.25*cos(pi*t)+0.25",
    ])?;
    let net = gen_adjacency(n, 0.1, 20)?;
    let truth = assign_groups(n, &[0.5, 0.5], GroupMode::Random, 21)?;
    let panel = simulate_panel(&scenario, &truth, &net, &gen_error_cov(n, 0.3)?, t_len, 200, 22)?;
    let data = LocalData::new(&panel, &net)?;
    let h2 = Bandwidths::rule_of_thumb(n, t_len)?.h2;

    let grid: Vec<f64> = (1..10).map(|l| l as f64 / 10.0).collect();
    let paths = group_paths(&data, &truth, &grid, h2, 0.95)?;
    for p in &paths {
        println!("group {} (95% bands)", p.group + 1);
        let mut covered = 0;
        for (l, &tau) in p.grid.iter().enumerate() {
            let (lo, hi) = p.band(l);
            let a = scenario.eval(p.group, tau);
            covered += (0..2).filter(|&m| lo[m] <= a[m] && a[m] <= hi[m]).count();
            println!(
                "  tau {tau:.1}: network {:+.3} [{:+.3}, {:+.3}] truth {:+.3} | momentum {:+.3} [{:+.3}, {:+.3}] truth {:+.3}",
                p.alpha[l][0], lo[0], hi[0], a[0], p.alpha[l][1], lo[1], hi[1], a[1]
            );
        }
        println!("  truth inside the band at {covered} of {} points", 2 * p.grid.len());
    }
    Ok(())
}
