use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use blockdag::eval::{
    run_search, set_metrics, write_results_table, write_search_report, EdgeFrequencyMap, RunConfig,
};
use blockdag::inference::gibbs_run;
use blockdag::priors::{sample_hoppe_beta, sample_minimal_hoppe_beta, PriorMode};
use blockdag::{Dag, DataMatrix, Error, Result};

#[derive(Parser)]
#[command(name = "blockdag", version, about = "Ordered-block-model structure learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random tables on a structure, then forward-sampled rows.
    SimulateData(RunArgs),
    /// Draw graphs from a prior.
    SamplePrior {
        #[command(flatten)]
        run: RunArgs,
        /// Number of nodes.
        #[arg(long, default_value_t = 12)]
        nodes: usize,
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        /// Also write every drawn graph as an adjacency file.
        #[arg(long)]
        write_graphs: bool,
    },
    /// Log prior, log likelihood and log score of a graph.
    Score {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        graph: PathBuf,
    },
    /// Multi-chain stochastic search with heat maps and metrics.
    Search(RunArgs),
    /// Gibbs sampling of the graph posterior.
    Gibbs {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// TPR, SPC and specificity of learned graphs against a reference.
    Evaluate {
        #[arg(long, required = true, num_args = 1..)]
        learned: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
    },
}

/// Configuration file plus overrides.
#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["uniform", "hoppe-beta", "minimal"])]
    prior: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Two numbers (constant policy), four numbers (adjacent then distant
    /// pair), or a policy string such as `two-level:2,1,1,2`.
    #[arg(long, num_args = 1..=4, allow_negative_numbers = true)]
    beta: Option<Vec<String>>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha_tilde: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Data CSV instead of simulation.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of simulated rows.
    #[arg(long)]
    rows: Option<usize>,
    /// Seed of the simulated dataset.
    #[arg(long)]
    data_seed: Option<u64>,
    /// Reference structure for metrics.
    #[arg(long)]
    truth: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.prior {
            cfg.prior = v.clone();
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = &self.beta {
            cfg.beta = v.join(",");
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.alpha_tilde {
            cfg.alpha_tilde = v;
        }
        if let Some(v) = self.iters {
            cfg.iterations = v;
        }
        if let Some(v) = self.chains {
            cfg.chains = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &self.data {
            cfg.data.path = Some(v.clone());
        }
        if let Some(v) = self.rows {
            cfg.data.rows = v;
        }
        if let Some(v) = self.data_seed {
            cfg.data.seed = v;
        }
        if let Some(v) = &self.truth {
            cfg.truth = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn simulate_data(run: &RunArgs) -> Result<()> {
    let cfg = run.config()?;
    let (net, data) = cfg.data.simulate()?;
    create_dir(&cfg.out)?;
    data.write_csv(cfg.out.join("data.csv"))?;
    net.write(cfg.out.join("network.txt"))?;
    net.structure().write_adjacency(cfg.out.join("truth.txt"))?;
    println!("wrote {} rows x {} variables to {}", data.n(), data.d(), cfg.out.display());
    Ok(())
}

fn sample_prior(run: &RunArgs, nodes: usize, draws: usize, write_graphs: bool) -> Result<()> {
    let cfg = run.config()?;
    let params = cfg.prior_params()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    create_dir(&cfg.out)?;
    let path = cfg.out.join("prior_draws.csv");
    let mut summary = create_file(&path)?;
    writeln!(summary, "draw,edges,K").map_err(io_err(&path))?;
    let (mut edges, mut layers) = (0.0, 0.0);
    for i in 0..draws {
        let g = match params.mode {
            PriorMode::MinimalHoppeBeta => sample_minimal_hoppe_beta(nodes, &params, &mut rng),
            PriorMode::HoppeBeta => sample_hoppe_beta(nodes, &params, &mut rng).1,
            PriorMode::Uniform => {
                return Err(Error::InvalidParameter(
                    "sampling is available for hoppe-beta and minimal priors".into(),
                ))
            }
        };
        let k = g.minimal_layering().num_classes();
        edges += g.edge_count() as f64;
        layers += k as f64;
        writeln!(summary, "{i},{},{k}", g.edge_count()).map_err(io_err(&path))?;
        if write_graphs {
            g.write_adjacency(cfg.out.join(format!("draw_{i}.txt")))?;
        }
    }
    summary.flush().map_err(io_err(&path))?;
    let n = draws.max(1) as f64;
    println!(
        "{draws} draws, mean edges {:.3}, mean minimal layers {:.3}",
        edges / n,
        layers / n
    );
    Ok(())
}

fn score(run: &RunArgs, graph: &Path) -> Result<()> {
    let cfg = run.config()?;
    let g = Dag::read_adjacency(graph)?;
    let data = match &cfg.data.path {
        Some(p) => DataMatrix::read_csv(p)?,
        None => cfg.data.simulate()?.1,
    };
    let score = cfg.score_fn(g.d())?;
    let s = score.evaluate(&g, &data, &mut score.new_cache());
    println!("log_prior,log_lik,log_score");
    println!("{},{},{}", s.log_prior, s.log_lik, s.log_score);
    Ok(())
}

fn search(run: &RunArgs) -> Result<()> {
    let cfg = run.config()?;
    let (data, truth) = cfg.load_data()?;
    let report = run_search(&cfg, &data, truth.as_ref())?;
    write_search_report(&report, cfg.out.join(&cfg.prior))?;
    let path = cfg.out.join("results.csv");
    write_results_table(std::slice::from_ref(&report), create_file(&path)?)?;
    fs::write(cfg.out.join("config.toml"), cfg.to_toml_string()).map_err(io_err(&cfg.out))?;
    if let Some(m) = report.top_k_metrics {
        println!(
            "{}: top-{} TPR {:.3}/{:.3}  SPC {:.3}/{:.3}",
            cfg.prior, cfg.top_k, m.tpr.mean, m.tpr.se, m.spc.mean, m.spc.se
        );
    }
    println!("wrote {}", cfg.out.display());
    Ok(())
}

fn gibbs(run: &RunArgs, samples: Option<usize>) -> Result<()> {
    let mut cfg = run.config()?;
    if let Some(s) = samples {
        cfg.gibbs.samples = s;
    }
    let (data, _) = cfg.load_data()?;
    let graphs = gibbs_run(&data, &cfg.score_fn(data.d())?, &cfg.gibbs_params()?)?;
    create_dir(&cfg.out)?;
    EdgeFrequencyMap::from_graphs(data.d(), &graphs).write_csv(cfg.out.join("gibbs_marginals.csv"))?;
    let path = cfg.out.join("gibbs_samples.txt");
    let mut w = create_file(&path)?;
    for g in &graphs {
        let flat: Vec<String> = g.to_matrix().concat().iter().map(u8::to_string).collect();
        writeln!(w, "{}", flat.join(" ")).map_err(io_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    println!("{} samples written to {}", graphs.len(), cfg.out.display());
    Ok(())
}

fn evaluate(learned: &[PathBuf], truth: &Path) -> Result<()> {
    let truth = Dag::read_adjacency(truth)?;
    let graphs = learned
        .iter()
        .map(Dag::read_adjacency)
        .collect::<Result<Vec<Dag>>>()?;
    let m = set_metrics(&graphs, &truth)?;
    println!("graphs,tpr_mean,tpr_se,spc_mean,spc_se,specificity_mean,specificity_se");
    println!(
        "{},{},{},{},{},{},{}",
        graphs.len(),
        m.tpr.mean,
        m.tpr.se,
        m.spc.mean,
        m.spc.se,
        m.specificity.mean,
        m.specificity.se
    );
    Ok(())
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SimulateData(run) => simulate_data(run),
        Command::SamplePrior {
            run,
            nodes,
            draws,
            write_graphs,
        } => sample_prior(run, *nodes, *draws, *write_graphs),
        Command::Score { run, graph } => score(run, graph),
        Command::Search(run) => search(run),
        Command::Gibbs { run, samples } => gibbs(run, *samples),
        Command::Evaluate { learned, truth } => evaluate(learned, truth),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
