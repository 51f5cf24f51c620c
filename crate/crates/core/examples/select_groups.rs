//! Choose the number of groups by the information criterion along the
//! dendrogram.
//!
//! ```bash
//! cargo run --release --example select_groups
//! ```

use netvar::local::LocalData;
use netvar::pipeline::{estimate_groups, EstimationConfig};
use netvar::simulate::{assign_groups, gen_adjacency, gen_error_cov, simulate_panel, GroupMode};
use netvar::CoefficientScenario;

fn main() -> netvar::Result<()> {
    let (n, t_len) = (60, 300);
    let scenario = CoefficientScenario::from_pairs(&[
        "-0.8*sin(pi*t) ; -0.5*cos(pi*t)-0.2",
        "-0.7*sin(pi*t)+0.4 ; -0.25*cos(pi*t)+0.25",
        "sin(pi*t)-0.2 ; 0.8*cos(pi*t)",
    ])?;
    let net = gen_adjacency(n, 0.1, 10)?;
    let truth = assign_groups(n, &[1.0 / 3.0; 3], GroupMode::Random, 11)?;
    let panel = simulate_panel(&scenario, &truth, &net, &gen_error_cov(n, 0.3)?, t_len, 200, 12)?;
    let data = LocalData::new(&panel, &net)?;

    let g = estimate_groups(&data, &EstimationConfig::default())?;
    println!("penalty rho = {:.3e}", g.ic.rho);
    println!("{}", g.ic.to_csv());
    println!("selected K = {}, purity {:.3}", g.ic.k_hat, g.groups.purity(&truth));
    Ok(())
}
