//! Skeleton metrics, edge-frequency maps, run configuration and experiment
//! orchestration.

use std::cmp::Ordering;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dag::Dag;
use crate::datagen::{forward_sample, hepar2_structure, random_cpts, CptNetwork, CptRecipe};
use crate::error::{Error, Result};
use crate::inference::{
    stochastic_search, BottomRepair, GibbsParams, ScoreFn, ScoreParts, SearchParams, Trajectory,
};
use crate::likelihood::DataMatrix;
use crate::priors::{BetaPolicy, PriorMode, PriorParams};

fn check_dims(learned: &Dag, truth: &Dag) -> Result<()> {
    if learned.d() != truth.d() {
        return Err(Error::DimensionMismatch {
            expected: truth.d(),
            got: learned.d(),
        });
    }
    Ok(())
}

/// Undirected adjacency: bit `j` of entry `i` is set when `i` and `j` are
/// joined in either direction.
fn skeleton(g: &Dag) -> Vec<u64> {
    (0..g.d())
        .map(|i| g.parent_mask(i) | g.child_mask(i))
        .collect()
}

/// Pair counts `(true positives, false negatives, false positives, true
/// negatives)` between the skeletons.
fn skeleton_confusion(learned: &Dag, truth: &Dag) -> (usize, usize, usize, usize) {
    let (l, t) = (skeleton(learned), skeleton(truth));
    let (mut tp, mut fn_, mut fp, mut tn) = (0, 0, 0, 0);
    for i in 0..truth.d() {
        let upper = !((1u64 << i) | ((1u64 << i) - 1));
        let (li, ti) = (l[i] & upper, t[i] & upper);
        tp += (li & ti).count_ones() as usize;
        fn_ += (!li & ti).count_ones() as usize;
        fp += (li & !ti).count_ones() as usize;
        let above = truth.d() - i - 1;
        tn += above - (li | ti).count_ones() as usize;
    }
    (tp, fn_, fp, tn)
}

/// Fraction of true skeleton edges recovered; 1 when the truth has none.
pub fn tpr(learned: &Dag, truth: &Dag) -> Result<f64> {
    check_dims(learned, truth)?;
    let (tp, fn_, _, _) = skeleton_confusion(learned, truth);
    Ok(if tp + fn_ == 0 {
        1.0
    } else {
        tp as f64 / (tp + fn_) as f64
    })
}

/// `|skel T| / (|skel T| + wrongly included skeleton edges)`; 1 when both
/// counts are zero.
pub fn spc(learned: &Dag, truth: &Dag) -> Result<f64> {
    check_dims(learned, truth)?;
    let (tp, fn_, fp, _) = skeleton_confusion(learned, truth);
    let true_edges = tp + fn_;
    Ok(if true_edges + fp == 0 {
        1.0
    } else {
        true_edges as f64 / (true_edges + fp) as f64
    })
}

/// True-negative rate over unordered node pairs; 1 when the truth is
/// complete.
pub fn specificity(learned: &Dag, truth: &Dag) -> Result<f64> {
    check_dims(learned, truth)?;
    let (_, _, fp, tn) = skeleton_confusion(learned, truth);
    Ok(if tn + fp == 0 {
        1.0
    } else {
        tn as f64 / (tn + fp) as f64
    })
}

/// Mean, sample standard deviation and standard error of the mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Summary {
        let n = xs.len();
        if n == 0 {
            return Summary {
                n,
                mean: f64::NAN,
                sd: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Summary {
            n,
            mean,
            sd,
            se: sd / (n as f64).sqrt(),
        }
    }
}

/// TPR, SPC and conventional specificity over a set of graphs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SetMetrics {
    pub tpr: Summary,
    pub spc: Summary,
    pub specificity: Summary,
}

pub fn set_metrics<'a>(graphs: impl IntoIterator<Item = &'a Dag>, truth: &Dag) -> Result<SetMetrics> {
    let (mut t, mut s, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for g in graphs {
        t.push(tpr(g, truth)?);
        s.push(spc(g, truth)?);
        c.push(specificity(g, truth)?);
    }
    Ok(SetMetrics {
        tpr: Summary::of(&t),
        spc: Summary::of(&s),
        specificity: Summary::of(&c),
    })
}

/// Edge inclusion frequencies over a set of graphs: entry `(i, j)` is the
/// fraction containing `i -> j`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFrequencyMap {
    pub freq: Vec<Vec<f64>>,
    pub graphs: usize,
}

impl EdgeFrequencyMap {
    pub fn from_graphs<'a>(d: usize, graphs: impl IntoIterator<Item = &'a Dag>) -> Self {
        let mut counts = vec![vec![0usize; d]; d];
        let mut n = 0;
        for g in graphs {
            for (i, j) in g.edges() {
                counts[i][j] += 1;
            }
            n += 1;
        }
        let freq = counts
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
                    .collect()
            })
            .collect();
        EdgeFrequencyMap { freq, graphs: n }
    }

    pub fn d(&self) -> usize {
        self.freq.len()
    }

    /// `d` comma-separated rows of `d` numbers, no header.
    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for row in &self.freq {
            w.write_record(row.iter().map(f64::to_string))?;
        }
        w.flush().map_err(|e| Error::io("heat-map CSV", e))?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(BufWriter::new(file))
    }

    /// Parse a square matrix of frequencies; `graphs` is unknown and set to 0.
    pub fn read_csv_from<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut freq = Vec::new();
        for rec in rdr.records() {
            let row = rec?
                .iter()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::parse("heat-map CSV", format!("bad number {t:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            freq.push(row);
        }
        let d = freq.len();
        if d == 0 || freq.iter().any(|r| r.len() != d) {
            return Err(Error::parse("heat-map CSV", "matrix is not square"));
        }
        Ok(EdgeFrequencyMap { freq, graphs: 0 })
    }
}

/// A graph visited by a chain, with its rank keys.
#[derive(Clone, Debug)]
pub struct RankedGraph<'a> {
    pub chain: usize,
    pub iter: usize,
    pub log_score: f64,
    pub edges: usize,
    pub graph: &'a Dag,
}

/// Higher score first, then fewer edges, then earlier chain and iteration.
fn rank_order(a: &RankedGraph, b: &RankedGraph) -> Ordering {
    b.log_score
        .total_cmp(&a.log_score)
        .then(a.edges.cmp(&b.edges))
        .then(a.chain.cmp(&b.chain))
        .then(a.iter.cmp(&b.iter))
}

/// The `k` best states over all chains, repeated visits counted separately.
pub fn top_k_pool(trajectories: &[Trajectory], k: usize) -> Vec<RankedGraph<'_>> {
    let mut pool: Vec<RankedGraph> = trajectories
        .iter()
        .enumerate()
        .flat_map(|(chain, t)| {
            t.records.iter().zip(&t.graphs).map(move |(r, g)| RankedGraph {
                chain,
                iter: r.iter,
                log_score: r.log_score,
                edges: r.edges,
                graph: g,
            })
        })
        .collect();
    if k > pool.len() {
        log::warn!("top-{k} requested but only {} states were recorded", pool.len());
    }
    pool.sort_by(rank_order);
    pool.truncate(k);
    pool
}

/// The best state of each chain.
pub fn chain_bests(trajectories: &[Trajectory]) -> Vec<RankedGraph<'_>> {
    trajectories
        .iter()
        .enumerate()
        .map(|(chain, t)| {
            let r = t.best_record();
            RankedGraph {
                chain,
                iter: r.iter,
                log_score: r.log_score,
                edges: r.edges,
                graph: t.best(),
            }
        })
        .collect()
}

/// Frequency maps over the pooled top-k states, the single best state and
/// the per-chain best states.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapSet {
    pub top_k: EdgeFrequencyMap,
    pub overall_best: EdgeFrequencyMap,
    pub chain_bests: EdgeFrequencyMap,
}

pub fn aggregate_heatmaps(trajectories: &[Trajectory], top_k: usize) -> Result<HeatmapSet> {
    let Some(first) = trajectories.first() else {
        return Err(Error::InvalidParameter("no trajectories to aggregate".into()));
    };
    let d = first.best().d();
    let pool = top_k_pool(trajectories, top_k);
    let mut bests = chain_bests(trajectories);
    let per_chain = EdgeFrequencyMap::from_graphs(d, bests.iter().map(|r| r.graph));
    bests.sort_by(rank_order);
    Ok(HeatmapSet {
        top_k: EdgeFrequencyMap::from_graphs(d, pool.iter().map(|r| r.graph)),
        overall_best: EdgeFrequencyMap::from_graphs(d, bests.iter().take(1).map(|r| r.graph)),
        chain_bests: per_chain,
    })
}

/// Settings for the Gibbs subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsConfig {
    pub samples: usize,
    /// Defaults to 20% of `samples`.
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub random_scan: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            samples: 10_000,
            burn_in: None,
            thin: 1,
            random_scan: false,
        }
    }
}

/// Where the data come from: a CSV file, or forward sampling from a network
/// with random tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Data CSV; when set no simulation happens.
    pub path: Option<PathBuf>,
    /// Structure (adjacency text) to simulate from; HEPAR II when unset.
    pub structure: Option<PathBuf>,
    pub rows: usize,
    pub seed: u64,
    /// State count of every simulated variable.
    pub cards: usize,
    pub cpt_a: f64,
    pub cpt_b: f64,
    pub cpt_lo: f64,
    pub cpt_hi: f64,
    /// `clamp` or `resample`.
    pub cpt_adjust: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        let r = CptRecipe::default();
        DataConfig {
            path: None,
            structure: None,
            rows: 500,
            seed: 1,
            cards: 2,
            cpt_a: r.a,
            cpt_b: r.b,
            cpt_lo: r.lo,
            cpt_hi: r.hi,
            cpt_adjust: "clamp".into(),
        }
    }
}

impl DataConfig {
    pub fn recipe(&self) -> Result<CptRecipe> {
        let r = CptRecipe {
            a: self.cpt_a,
            b: self.cpt_b,
            lo: self.cpt_lo,
            hi: self.cpt_hi,
            adjust: self.cpt_adjust.parse()?,
        };
        r.validate()?;
        Ok(r)
    }

    /// Random tables for the configured structure, then `rows` samples, all
    /// from one generator seeded with `seed`.
    pub fn simulate(&self) -> Result<(CptNetwork, DataMatrix)> {
        let structure = match &self.structure {
            Some(p) => Dag::read_adjacency(p)?,
            None => hepar2_structure(),
        };
        if self.cards < 2 {
            return Err(Error::InvalidParameter(format!(
                "variables need at least 2 states, got {}",
                self.cards
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let cards = vec![self.cards; structure.d()];
        let net = random_cpts(&structure, &cards, &self.recipe()?, &mut rng)?;
        let data = forward_sample(&net, self.rows, &mut rng);
        Ok((net, data))
    }
}

/// Everything a run needs, read from one TOML file. Command-line flags
/// override individual fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `uniform`, `hoppe-beta` or `minimal`.
    pub prior: String,
    pub alpha: f64,
    /// Beta policy, e.g. `two-level:2,1,1,2` or `constant:1,1`.
    pub beta: String,
    /// `exact` or `unscaled`.
    pub minimal_eval: String,
    pub gamma: f64,
    pub alpha_tilde: f64,
    pub iterations: usize,
    pub chains: usize,
    pub seed: u64,
    /// `literal` or `conservative`.
    pub repair: String,
    pub top_k: usize,
    /// Reference structure for metrics; the simulation structure when unset
    /// and the data are simulated.
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
    pub data: DataConfig,
    pub gibbs: GibbsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            prior: "minimal".into(),
            alpha: 1.0,
            beta: "two-level:2,1,1,2".into(),
            minimal_eval: "exact".into(),
            gamma: 1.0,
            alpha_tilde: 1.0,
            iterations: 5000,
            chains: 10,
            seed: 1,
            repair: "literal".into(),
            top_k: 100,
            truth: None,
            out: PathBuf::from("runs"),
            data: DataConfig::default(),
            gibbs: GibbsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::parse("run configuration", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.prior_params()?;
        self.search_params(0)?;
        self.gibbs_params()?;
        self.data.recipe()?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.chains == 0 || self.top_k == 0 {
            return Err(Error::InvalidParameter("chains and top_k must be >= 1".into()));
        }
        Ok(())
    }

    pub fn prior_params(&self) -> Result<PriorParams> {
        let mode: PriorMode = self.prior.parse()?;
        let beta: BetaPolicy = self.beta.parse()?;
        Ok(PriorParams::new(mode, self.alpha, beta)?.with_minimal_eval(self.minimal_eval.parse()?))
    }

    pub fn score_fn(&self, d: usize) -> Result<ScoreFn> {
        ScoreFn::new(self.prior_params()?, self.gamma, d)
    }

    /// Search settings of chain `chain`, seeded with `seed + chain`.
    pub fn search_params(&self, chain: usize) -> Result<SearchParams> {
        let repair: BottomRepair = self.repair.parse()?;
        Ok(
            SearchParams::new(self.alpha_tilde, self.iterations, self.seed.wrapping_add(chain as u64))?
                .with_repair(repair),
        )
    }

    pub fn gibbs_params(&self) -> Result<GibbsParams> {
        let g = &self.gibbs;
        let p = GibbsParams {
            burn_in: g.burn_in.unwrap_or(g.samples / 5),
            thin: g.thin,
            random_scan: g.random_scan,
            ..GibbsParams::new(g.samples, self.seed)
        };
        p.validate()?;
        Ok(p)
    }

    /// The dataset and the reference structure, if any.
    pub fn load_data(&self) -> Result<(DataMatrix, Option<Dag>)> {
        let explicit_truth = self.truth.as_ref().map(Dag::read_adjacency).transpose()?;
        match &self.data.path {
            Some(p) => Ok((DataMatrix::read_csv(p)?, explicit_truth)),
            None => {
                let (net, data) = self.data.simulate()?;
                Ok((data, explicit_truth.or_else(|| Some(net.structure().clone()))))
            }
        }
    }
}

/// Independent search chains run in parallel; chain `c` uses seed
/// `config.seed + c`.
pub fn run_chains(config: &RunConfig, data: &DataMatrix) -> Result<Vec<Trajectory>> {
    config.validate()?;
    let score = config.score_fn(data.d())?;
    (0..config.chains)
        .into_par_iter()
        .map(|c| stochastic_search(data, &score, &config.search_params(c)?))
        .collect()
}

/// Outcome of a multi-chain search under one prior.
#[derive(Clone, Debug)]
pub struct SearchReport {
    pub prior: String,
    pub trajectories: Vec<Trajectory>,
    pub heatmaps: HeatmapSet,
    pub truth: Option<Dag>,
    pub truth_score: Option<ScoreParts>,
    pub top_k_metrics: Option<SetMetrics>,
    pub best_metrics: Option<SetMetrics>,
    pub chain_best_metrics: Option<SetMetrics>,
}

pub fn run_search(config: &RunConfig, data: &DataMatrix, truth: Option<&Dag>) -> Result<SearchReport> {
    let trajectories = run_chains(config, data)?;
    let heatmaps = aggregate_heatmaps(&trajectories, config.top_k)?;
    let score = config.score_fn(data.d())?;
    let (truth_score, top, best, per_chain) = match truth {
        Some(t) => {
            let pool = top_k_pool(&trajectories, config.top_k);
            let mut bests = chain_bests(&trajectories);
            let per_chain = set_metrics(bests.iter().map(|r| r.graph), t)?;
            bests.sort_by(rank_order);
            (
                Some(score.evaluate(t, data, &mut score.new_cache())),
                Some(set_metrics(pool.iter().map(|r| r.graph), t)?),
                Some(set_metrics(bests.iter().take(1).map(|r| r.graph), t)?),
                Some(per_chain),
            )
        }
        None => (None, None, None, None),
    };
    Ok(SearchReport {
        prior: config.prior.clone(),
        trajectories,
        heatmaps,
        truth: truth.cloned(),
        truth_score,
        top_k_metrics: top,
        best_metrics: best,
        chain_best_metrics: per_chain,
    })
}

/// Header of the results table.
pub const RESULTS_HEADER: [&str; 12] = [
    "prior",
    "set",
    "graphs",
    "tpr_mean",
    "tpr_sd",
    "tpr_se",
    "spc_mean",
    "spc_sd",
    "spc_se",
    "specificity_mean",
    "specificity_sd",
    "specificity_se",
];

/// One row per prior and graph set (`top_k`, `best`, `chain_bests`).
pub fn write_results_table<W: Write>(reports: &[SearchReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    for rep in reports {
        let sets = [
            ("top_k", rep.top_k_metrics),
            ("best", rep.best_metrics),
            ("chain_bests", rep.chain_best_metrics),
        ];
        for (name, m) in sets {
            let Some(m) = m else { continue };
            let mut row = vec![rep.prior.clone(), name.to_string(), m.tpr.n.to_string()];
            for s in [m.tpr, m.spc, m.specificity] {
                row.extend([s.mean, s.sd, s.se].map(|x| x.to_string()));
            }
            w.write_record(row)?;
        }
    }
    w.flush().map_err(|e| Error::io("results CSV", e))?;
    Ok(())
}

/// Write a report under `dir`:
///
/// - `chain_<c>.csv`: trajectory of chain `c`
/// - `chain_<c>_best.txt`: best graph of chain `c`
/// - `heatmap_top_k.csv`, `heatmap_best.csv`, `heatmap_chain_bests.csv`
/// - `truth_score.csv` (`log_prior,log_lik,log_score`) and `truth.txt` when
///   a reference structure is known
pub fn write_search_report(report: &SearchReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (c, t) in report.trajectories.iter().enumerate() {
        t.write_csv(dir.join(format!("chain_{c}.csv")))?;
        t.best().write_adjacency(dir.join(format!("chain_{c}_best.txt")))?;
    }
    report.heatmaps.top_k.write_csv(dir.join("heatmap_top_k.csv"))?;
    report.heatmaps.overall_best.write_csv(dir.join("heatmap_best.csv"))?;
    report.heatmaps.chain_bests.write_csv(dir.join("heatmap_chain_bests.csv"))?;
    if let (Some(truth), Some(s)) = (&report.truth, report.truth_score) {
        truth.write_adjacency(dir.join("truth.txt"))?;
        let path = dir.join("truth_score.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["log_prior", "log_lik", "log_score"])?;
        w.write_record([s.log_prior, s.log_lik, s.log_score].map(|x| x.to_string()))?;
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::TrajectoryRecord;

    fn hepar_minus(missing: usize) -> Dag {
        let truth = hepar2_structure();
        let edges: Vec<(usize, usize)> = truth.edges().skip(missing).collect();
        Dag::from_edges(12, &edges).unwrap()
    }

    fn fake_trajectory(states: &[(f64, Dag)]) -> Trajectory {
        let mut best_index = 0;
        let records: Vec<TrajectoryRecord> = states
            .iter()
            .enumerate()
            .map(|(i, (s, g))| {
                if *s > states[best_index].0 {
                    best_index = i;
                }
                TrajectoryRecord {
                    iter: i + 1,
                    log_prior: 0.0,
                    log_lik: *s,
                    log_score: *s,
                    edges: g.edge_count(),
                    k: g.minimal_layering().num_classes(),
                }
            })
            .collect();
        Trajectory {
            records,
            graphs: states.iter().map(|(_, g)| g.clone()).collect(),
            best_index,
            accepted: 0,
            seed: 0,
        }
    }

    #[test]
    fn metrics_on_hepar() {
        let truth = hepar2_structure();
        assert_eq!(tpr(&truth, &truth).unwrap(), 1.0);
        assert_eq!(spc(&truth, &truth).unwrap(), 1.0);
        assert_eq!(specificity(&truth, &truth).unwrap(), 1.0);
        let empty = Dag::empty(12);
        assert_eq!(tpr(&empty, &truth).unwrap(), 0.0);
        assert_eq!(spc(&empty, &truth).unwrap(), 1.0);
        assert_eq!(tpr(&hepar_minus(6), &truth).unwrap(), 0.75);
        assert_eq!(spc(&hepar_minus(6), &truth).unwrap(), 1.0);

        let mut extra = truth.clone();
        for (i, j) in [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (8, 9)] {
            extra.add_edge(i, j).unwrap();
        }
        assert_eq!(spc(&extra, &truth).unwrap(), 0.8);
        // 66 pairs, 24 true, 6 false positives
        assert_eq!(specificity(&extra, &truth).unwrap(), 36.0 / 42.0);
        assert_eq!(tpr(&extra, &truth).unwrap(), 1.0);
    }

    #[test]
    fn metrics_ignore_edge_direction() {
        let truth = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let flipped = Dag::from_edges(3, &[(1, 0), (2, 1), (2, 0)]).unwrap();
        assert_eq!(tpr(&flipped, &truth).unwrap(), 1.0);
        assert_eq!(spc(&flipped, &truth).unwrap(), 2.0 / 3.0);
        assert_eq!(specificity(&flipped, &truth).unwrap(), 0.0);
        assert_eq!(tpr(&Dag::empty(3), &Dag::empty(3)).unwrap(), 1.0);
        assert!(tpr(&Dag::empty(2), &truth).is_err());
    }

    #[test]
    fn summary_values() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((s.se - s.sd / 2.0).abs() < 1e-15);
        assert_eq!(Summary::of(&[7.0]).sd, 0.0);
    }

    #[test]
    fn heatmaps_count_by_hand() {
        let a = Dag::from_edges(3, &[(0, 1)]).unwrap();
        let b = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let c = Dag::from_edges(3, &[(2, 0)]).unwrap();
        let t = fake_trajectory(&[(-3.0, a.clone()), (-1.0, b.clone()), (-2.0, c.clone())]);
        let maps = aggregate_heatmaps(std::slice::from_ref(&t), 3).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(
            maps.top_k.freq,
            vec![
                vec![0.0, 2.0 * third, 0.0],
                vec![0.0, 0.0, third],
                vec![third, 0.0, 0.0]
            ]
        );
        assert_eq!(maps.overall_best, EdgeFrequencyMap::from_graphs(3, [&b]));

        let top2 = aggregate_heatmaps(std::slice::from_ref(&t), 2).unwrap();
        assert_eq!(top2.top_k, EdgeFrequencyMap::from_graphs(3, [&b, &c]));
    }

    #[test]
    fn single_chain_top_one_maps_agree() {
        let g = hepar2_structure();
        let t = fake_trajectory(&[(-5.0, Dag::empty(12)), (-1.0, g.clone())]);
        let maps = aggregate_heatmaps(&[t], 1).unwrap();
        assert_eq!(maps.top_k, maps.overall_best);
        assert_eq!(maps.top_k, maps.chain_bests);
        assert_eq!(maps.top_k.freq[0][4], 1.0);
        assert!(aggregate_heatmaps(&[], 1).is_err());
    }

    #[test]
    fn ranking_breaks_ties_by_edges_then_order() {
        let sparse = Dag::from_edges(3, &[(0, 1)]).unwrap();
        let dense = Dag::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        let t0 = fake_trajectory(&[(-1.0, dense.clone()), (-1.0, sparse.clone())]);
        let t1 = fake_trajectory(&[(-1.0, sparse.clone())]);
        let chains = [t0, t1];
        let pool = top_k_pool(&chains, 3);
        let keys: Vec<(usize, usize, usize)> = pool.iter().map(|r| (r.chain, r.iter, r.edges)).collect();
        assert_eq!(keys, vec![(0, 2, 1), (1, 1, 1), (0, 1, 2)]);
    }

    #[test]
    fn heatmap_csv_roundtrip() {
        let g = hepar2_structure();
        let m = EdgeFrequencyMap::from_graphs(12, [&g, &Dag::empty(12)]);
        let mut buf = Vec::new();
        m.write_csv_to(&mut buf).unwrap();
        let back = EdgeFrequencyMap::read_csv_from(&buf[..]).unwrap();
        assert_eq!(back.freq, m.freq);
        assert!(EdgeFrequencyMap::read_csv_from("1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn config_defaults_and_overrides() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let p = cfg.prior_params().unwrap();
        assert_eq!(p.mode, PriorMode::MinimalHoppeBeta);
        assert_eq!(
            p.beta,
            BetaPolicy::TwoLevel {
                adjacent: (2.0, 1.0),
                distant: (1.0, 2.0)
            }
        );
        let text = "prior = \"uniform\"\nchains = 3\n[data]\nrows = 40\n[gibbs]\nsamples = 100\n";
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!((cfg.chains, cfg.data.rows), (3, 40));
        assert_eq!(cfg.gibbs_params().unwrap().burn_in, 20);
        assert_eq!(cfg.search_params(2).unwrap().seed, 3);
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::from_toml_str("alpha_tilde = 0.0").is_err());
        assert!(RunConfig::from_toml_str("[data]\ncpt_lo = 0.9\ncpt_hi = 0.1").is_err());
    }

    #[test]
    fn results_table_layout() {
        let cfg = RunConfig {
            iterations: 30,
            chains: 2,
            top_k: 5,
            data: DataConfig {
                rows: 60,
                ..DataConfig::default()
            },
            ..RunConfig::default()
        };
        let (data, truth) = cfg.load_data().unwrap();
        let report = run_search(&cfg, &data, truth.as_ref()).unwrap();
        assert_eq!(report.top_k_metrics.unwrap().tpr.n, 5);
        let mut buf = Vec::new();
        write_results_table(std::slice::from_ref(&report), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RESULTS_HEADER.join(","));
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("minimal,top_k,5,"));
    }
}
