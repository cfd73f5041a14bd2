//! Exhaustive check that the prior probabilities of all DAGs on a few nodes
//! add up to one.
//!
//! ```text
//! cargo run --release --example prior_normalisation
//! ```

use blockdag::dag::enumerate_dags;
use blockdag::partition::enumerate_partitions;
use blockdag::priors::{
    log_hoppe_beta_joint, log_minimal_hoppe_beta, BetaPolicy, MinimalEval, PriorMode, PriorParams,
};

pub fn run_example() -> blockdag::Result<()> {
    let two_level: BetaPolicy = "two-level:2,1,1,2".parse()?;
    let minimal = PriorParams::new(PriorMode::MinimalHoppeBeta, 1.0, two_level)?;
    for d in 2..=4 {
        let dags = enumerate_dags(d);
        let exact: f64 = dags
            .iter()
            .map(|g| log_minimal_hoppe_beta(g, &minimal, MinimalEval::Exact).exp())
            .sum();
        let unscaled: f64 = dags
            .iter()
            .map(|g| log_minimal_hoppe_beta(g, &minimal, MinimalEval::Unscaled).exp())
            .sum();
        println!(
            "d = {d}: {} DAGs, minimal prior mass {exact:.12} (unscaled form {unscaled:.6})",
            dags.len()
        );
    }

    let joint = PriorParams::new(
        PriorMode::HoppeBeta,
        1.0,
        BetaPolicy::Constant { beta1: 1.0, beta2: 1.0 },
    )?;
    let d = 3;
    let mut total = 0.0;
    for g in enumerate_dags(d) {
        for z in enumerate_partitions(d) {
            total += log_hoppe_beta_joint(&g, &z, &joint)?.exp();
        }
    }
    println!("d = {d}: Hoppe-Beta mass over all (graph, partition) pairs {total:.12}");
    Ok(())
}

fn main() -> blockdag::Result<()> {
    run_example()
}
