//! Drawing graphs from the Hoppe-Beta and Minimal Hoppe-Beta priors and
//! scoring the draws.
//!
//! ```text
//! cargo run --release --example prior_sampling
//! ```

use blockdag::priors::{
    log_minimal_hoppe_beta, sample_hoppe_beta, sample_minimal_hoppe_beta_traced, sparsity_index,
    BetaPolicy, MinimalEval, PriorMode, PriorParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> blockdag::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let two_level: BetaPolicy = "two-level:2,1,1,2".parse()?;
    let minimal = PriorParams::new(PriorMode::MinimalHoppeBeta, 1.0, two_level)?;

    let draw = sample_minimal_hoppe_beta_traced(8, &minimal, &mut rng);
    println!("minimal draw on 8 nodes");
    println!("  layer of each node: {:?}", draw.layering.ranks());
    println!("  compelled edges:    {:?}", draw.skeleton);
    println!("  graph:              {:?}", draw.dag);
    println!(
        "  ln P(G) exact {:.4}, unscaled form {:.4}",
        log_minimal_hoppe_beta(&draw.dag, &minimal, MinimalEval::Exact),
        log_minimal_hoppe_beta(&draw.dag, &minimal, MinimalEval::Unscaled)
    );

    let hb = PriorParams { mode: PriorMode::HoppeBeta, ..minimal };
    let (layering, g) = sample_hoppe_beta(8, &hb, &mut rng);
    println!("Hoppe-Beta draw: classes {:?}, order {:?}", layering.classes(), layering.order());
    println!("  graph: {g:?}");

    println!("expected edge density of the minimal prior on 12 nodes:");
    for alpha in [0.5, 1.0, 2.0] {
        for (b1, b2) in [(1.0, 1.0), (1.0, 4.0)] {
            let p = PriorParams::new(
                PriorMode::MinimalHoppeBeta,
                alpha,
                BetaPolicy::Constant { beta1: b1, beta2: b2 },
            )?;
            println!(
                "  alpha {alpha}, beta ({b1}, {b2}): {:.3}",
                sparsity_index(&p, 12, 20_000, &mut rng)?
            );
        }
    }
    Ok(())
}

fn main() -> blockdag::Result<()> {
    run_example()
}
