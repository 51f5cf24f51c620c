//! Node-wise local linear estimates of time-varying network and momentum
//! effects, plain and jackknife bias-corrected.
//!
//! ```bash
//! cargo run --release --example local_fits
//! ```

use netvar::local::{fit_node, fit_node_bc, LocalData};
use netvar::simulate::{assign_groups, gen_adjacency, gen_error_cov, simulate_panel, GroupMode};
use netvar::{Bandwidths, CoefficientScenario, Kernel};

fn main() -> netvar::Result<()> {
    let (n, t_len) = (40, 400);
    let scenario = CoefficientScenario::from_pairs(&["0.4*sin(pi*t) ; 0.5*cos(pi*t)"])?;
    let net = gen_adjacency(n, 0.15, 1)?;
    let groups = assign_groups(n, &[1.0], GroupMode::Random, 2)?;
    let panel = simulate_panel(&scenario, &groups, &net, &gen_error_cov(n, 0.0)?, t_len, 200, 3)?;
    let data = LocalData::new(&panel, &net)?;

    let bw = Bandwidths::rule_of_thumb(n, t_len)?;
    println!("rule-of-thumb bandwidths: h={:.4} h1={:.4} h2={:.4}", bw.h, bw.h1, bw.h2);
    println!("tau    truth(net, mom)    plain            bias-corrected");
    for tau in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let truth = scenario.eval(0, tau);
        let plain = fit_node(&data, 0, tau, bw.h, Kernel::Epanechnikov)?.beta;
        let bc = fit_node_bc(&data, 0, tau, bw.h)?.beta;
        println!(
            "{tau:.1}  ({:+.3}, {:+.3})  ({:+.3}, {:+.3})  ({:+.3}, {:+.3})",
            truth[0], truth[1], plain[0], plain[1], bc[0], bc[1]
        );
    }
    Ok(())
}
