//! One search chain on simulated HEPAR II data, with its trajectory written
//! as CSV.
//!
//! ```text
//! cargo run --release --example stochastic_search -- [output.csv]
//! ```

use blockdag::datagen::{forward_sample, hepar2_structure, random_cpts, CptRecipe};
use blockdag::eval::{spc, tpr};
use blockdag::inference::{stochastic_search, ScoreFn, SearchParams};
use blockdag::priors::{PriorMode, PriorParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> blockdag::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let truth = hepar2_structure();
    let net = random_cpts(&truth, &[2; 12], &CptRecipe::default(), &mut rng)?;
    let data = forward_sample(&net, 500, &mut rng);

    let prior = PriorParams::new(PriorMode::MinimalHoppeBeta, 1.0, "two-level:2,1,1,2".parse()?)?;
    let score = ScoreFn::new(prior, 1.0, 12)?;
    let traj = stochastic_search(&data, &score, &SearchParams::new(1.0, 3000, 4)?)?;

    let truth_score = score.evaluate(&truth, &data, &mut score.new_cache());
    let best = traj.best_record();
    println!("accepted {} of {} proposals", traj.accepted, traj.records.len());
    println!(
        "best state at iteration {}: ln S = {:.2} ({} edges, {} layers); truth ln S = {:.2}",
        best.iter, best.log_score, best.edges, best.k, truth_score.log_score
    );
    println!(
        "best graph TPR {:.3}, SPC {:.3}",
        tpr(traj.best(), &truth)?,
        spc(traj.best(), &truth)?
    );
    for r in traj.records.iter().step_by(500) {
        println!("  iter {:>5}: ln S {:>10.2}  edges {:>2}  K {}", r.iter, r.log_score, r.edges, r.k);
    }
    if let Some(path) = std::env::args().nth(1) {
        traj.write_csv(&path)?;
        println!("trajectory written to {path}");
    }
    Ok(())
}

fn main() -> blockdag::Result<()> {
    run_example()
}
