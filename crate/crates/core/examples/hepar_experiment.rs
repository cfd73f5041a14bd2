//! HEPAR II comparison of the three priors: 500 simulated binary rows,
//! 10 chains of 5000 search iterations per prior, TPR/SPC over the pooled
//! top 100 states.
//!
//! ```text
//! cargo run --release --example hepar_experiment -- [data seeds...] [--out DIR]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use blockdag::eval::{run_search, write_results_table, write_search_report, RunConfig};

fn main() -> blockdag::Result<()> {
    let mut seeds = Vec::new();
    let mut out: Option<PathBuf> = None;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        if a == "--out" {
            out = args.next().map(PathBuf::from);
        } else {
            seeds.push(a.parse::<u64>().expect("data seeds are integers"));
        }
    }
    if seeds.is_empty() {
        seeds.push(1);
    }

    println!("{:<6} {:<11} {:>12} {:>12} {:>12}", "seed", "prior", "TPR", "SPC", "best score");
    for &seed in &seeds {
        let mut reports = Vec::new();
        for prior in ["uniform", "minimal", "hoppe-beta"] {
            let mut cfg = RunConfig {
                prior: prior.into(),
                seed: 1000 * seed,
                ..RunConfig::default()
            };
            cfg.data.seed = seed;
            let (data, truth) = cfg.load_data()?;
            let start = Instant::now();
            let report = run_search(&cfg, &data, truth.as_ref())?;
            let m = report.top_k_metrics.expect("simulated data has a truth");
            let best = report
                .trajectories
                .iter()
                .map(|t| t.best_record().log_score)
                .fold(f64::NEG_INFINITY, f64::max);
            println!(
                "{:<6} {:<11} {:>5.3}/{:<5.3} {:>5.3}/{:<5.3} {:>12.2}  truth {:.2}  ({:.1?})",
                seed,
                prior,
                m.tpr.mean,
                m.tpr.sd,
                m.spc.mean,
                m.spc.sd,
                best,
                report.truth_score.map_or(f64::NAN, |s| s.log_score),
                start.elapsed()
            );
            if let Some(dir) = &out {
                write_search_report(&report, dir.join(format!("seed_{seed}")).join(prior))?;
            }
            reports.push(report);
        }
        if let Some(dir) = &out {
            let path = dir.join(format!("seed_{seed}")).join("results.csv");
            let file = std::fs::File::create(&path).map_err(|e| blockdag::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            write_results_table(&reports, file)?;
        }
    }
    Ok(())
}
