//! Urn partitions of nodes into classes: sampling, exact probabilities and
//! the expected number of classes.
//!
//! ```text
//! cargo run --release --example partition_urn
//! ```

use blockdag::partition::{
    enumerate_partitions, expected_num_cells, log_partition_prob, occupation_counts,
    sample_partition, UrnParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> blockdag::Result<()> {
    let d = 4;
    let urn = UrnParams::new(1.0)?;
    println!("all {} partitions of {d} nodes under alpha = 1:", enumerate_partitions(d).len());
    let mut total = 0.0;
    for z in enumerate_partitions(d) {
        let p = log_partition_prob(&z, urn)?.exp();
        total += p;
        println!("  z = {z:?}  sizes {:?}  P = {p:.5}", occupation_counts(&z)?);
    }
    println!("  sum = {total:.12}");

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for alpha in [0.5, 1.0, 3.0] {
        let urn = UrnParams::new(alpha)?;
        let draws = 20_000;
        let mean_k = (0..draws)
            .map(|_| occupation_counts(&sample_partition(12, urn, &mut rng)).map(|c| c.len()))
            .sum::<blockdag::Result<usize>>()? as f64
            / draws as f64;
        println!(
            "d = 12, alpha = {alpha}: mean classes {mean_k:.3}, expected {:.3}",
            expected_num_cells(12, alpha)
        );
    }
    Ok(())
}

fn main() -> blockdag::Result<()> {
    run_example()
}
