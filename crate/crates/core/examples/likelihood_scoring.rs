//! Simulating HEPAR II data and scoring graphs with the Cooper-Herskovits
//! marginal likelihood, including single-edge score ratios.
//!
//! ```text
//! cargo run --release --example likelihood_scoring
//! ```

use blockdag::datagen::{forward_sample, hepar2_structure, random_cpts, CptRecipe};
use blockdag::likelihood::{ch_log_likelihood, ch_log_ratio_toggle, FamilyCache};
use blockdag::Dag;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> blockdag::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = hepar2_structure();
    let net = random_cpts(&truth, &[2; 12], &CptRecipe::default(), &mut rng)?;
    let data = forward_sample(&net, 500, &mut rng);
    println!("{} rows of {} binary variables", data.n(), data.d());

    let gamma = 1.0;
    println!("ln P(x | truth) = {:.3}", ch_log_likelihood(&truth, &data, gamma));
    println!("ln P(x | empty) = {:.3}", ch_log_likelihood(&Dag::empty(12), &data, gamma));

    let mut cache = FamilyCache::new(gamma);
    println!("effect of dropping each true edge (log ratio of present vs absent):");
    for (i, j) in truth.edges() {
        let mut without = truth.clone();
        without.remove_edge(i, j);
        let r = ch_log_ratio_toggle(&without, i, j, &data, &mut cache)?;
        println!("  {:>2} -> {:<2} {r:>9.3}", i + 1, j + 1);
    }
    println!("cache: {} families, {} hits, {} misses", cache.len(), cache.hits(), cache.misses());
    Ok(())
}

fn main() -> blockdag::Result<()> {
    run_example()
}
