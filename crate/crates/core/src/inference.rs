//! Posterior exploration: an edge-indicator Gibbs sampler and a stochastic
//! search driven by urn reassignment of single nodes between layers.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dag::{relayer_after_removal, Dag, Layering};
use crate::error::{Error, Result};
use crate::likelihood::{DataMatrix, FamilyCache};
use crate::priors::{
    log_hoppe_beta_joint, log_hoppe_beta_ordered, log_minimal_with_layering, log_uniform_prior,
    PriorMode, PriorParams,
};

/// Log prior, log likelihood and their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreParts {
    pub log_prior: f64,
    pub log_lik: f64,
    pub log_score: f64,
}

impl ScoreParts {
    fn new(log_prior: f64, log_lik: f64) -> Self {
        ScoreParts {
            log_prior,
            log_lik,
            log_score: log_prior + log_lik,
        }
    }
}

/// `ln S(G | x) = ln P(G) + ln P(x | G)` for graphs on `d` nodes.
///
/// Under the Hoppe-Beta prior the partition is the graph's minimal
/// layering; with a constant beta policy the class ordering is marginalised,
/// otherwise the minimal layering's own ordering is scored.
#[derive(Clone, Debug)]
pub struct ScoreFn {
    prior: PriorParams,
    gamma: f64,
    d: usize,
    log_uniform: f64,
}

impl ScoreFn {
    pub fn new(prior: PriorParams, gamma: f64, d: usize) -> Result<Self> {
        prior.validate()?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        let log_uniform = if prior.mode == PriorMode::Uniform {
            log_uniform_prior(d)
        } else {
            0.0
        };
        Ok(ScoreFn {
            prior,
            gamma,
            d,
            log_uniform,
        })
    }

    pub fn prior(&self) -> &PriorParams {
        &self.prior
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// A fresh family cache with this score's `gamma`.
    pub fn new_cache(&self) -> FamilyCache {
        FamilyCache::new(self.gamma)
    }

    /// Log prior of `g`; `layering` must be `g.minimal_layering()`.
    pub fn log_prior(&self, g: &Dag, layering: &Layering) -> f64 {
        debug_assert_eq!(g.d(), self.d);
        match self.prior.mode {
            PriorMode::Uniform => self.log_uniform,
            PriorMode::HoppeBeta if self.prior.beta.is_constant() => {
                log_hoppe_beta_joint(g, layering.classes(), &self.prior)
                    .unwrap_or(f64::NEG_INFINITY)
            }
            PriorMode::HoppeBeta => {
                log_hoppe_beta_ordered(g, layering, &self.prior).unwrap_or(f64::NEG_INFINITY)
            }
            PriorMode::MinimalHoppeBeta => {
                log_minimal_with_layering(g, layering, &self.prior, self.prior.minimal_eval)
            }
        }
    }

    /// Full evaluation from scratch.
    pub fn evaluate(&self, g: &Dag, data: &DataMatrix, cache: &mut FamilyCache) -> ScoreParts {
        let layering = g.minimal_layering();
        ScoreParts::new(self.log_prior(g, &layering), cache.log_likelihood(g, data))
    }
}

/// Settings for the Gibbs sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GibbsParams {
    /// Recorded graphs.
    pub samples: usize,
    /// Sweeps discarded before recording.
    pub burn_in: usize,
    /// Sweeps per recorded graph.
    pub thin: usize,
    /// Visit uniformly random ordered pairs instead of the row-major order.
    pub random_scan: bool,
    pub seed: u64,
}

impl GibbsParams {
    /// Burn-in of 20% of `samples`, thinning 1, fixed scan.
    pub fn new(samples: usize, seed: u64) -> Self {
        GibbsParams {
            samples,
            burn_in: samples / 5,
            thin: 1,
            random_scan: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidParameter("Gibbs thinning must be >= 1".into()));
        }
        Ok(())
    }
}

fn ordered_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect()
}

/// Probability of the "on" state given the two log scores.
fn on_probability(s_on: f64, s_off: f64) -> f64 {
    match (s_on == f64::NEG_INFINITY, s_off == f64::NEG_INFINITY) {
        (true, true) => 0.0,
        (true, false) => 0.0,
        (false, true) => 1.0,
        (false, false) => 1.0 / (1.0 + (s_off - s_on).exp()),
    }
}

/// Gibbs sampling of the edge indicators of the graph posterior, starting
/// from the empty graph.
///
/// Each sweep updates all `d(d-1)` ordered-pair indicators from their exact
/// conditionals; an indicator whose edge would close a directed cycle is set
/// to 0. Returns the graph after every `thin`-th sweep once `burn_in` sweeps
/// have passed. The Hoppe-Beta prior is rejected since it is defined jointly
/// with the partition.
pub fn gibbs_run(data: &DataMatrix, score: &ScoreFn, params: &GibbsParams) -> Result<Vec<Dag>> {
    params.validate()?;
    if score.prior().mode == PriorMode::HoppeBeta {
        return Err(Error::InvalidParameter(
            "the Gibbs sampler needs a graph-only prior (uniform or minimal)".into(),
        ));
    }
    if data.d() != score.d() {
        return Err(Error::DimensionMismatch {
            expected: score.d(),
            got: data.d(),
        });
    }
    let d = score.d();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut cache = score.new_cache();
    let pairs = ordered_pairs(d);
    let mut g = Dag::empty(d);
    let total = params.burn_in + params.samples * params.thin;
    let mut out = Vec::with_capacity(params.samples);

    for sweep in 0..total {
        for step in 0..pairs.len() {
            let (i, j) = if params.random_scan {
                pairs[rng.random_range(0..pairs.len())]
            } else {
                pairs[step]
            };
            let present = g.has_edge(i, j);
            if !present && g.reaches(j, i) {
                continue;
            }
            let mask = g.parent_mask(j);
            let lik_on = cache.score(data, j, mask | (1 << i));
            let lik_off = cache.score(data, j, mask & !(1 << i));
            let mut on = g.clone();
            on.set_edge_unchecked(i, j);
            let mut off = g;
            off.remove_edge(i, j);
            let prior_on = score.log_prior(&on, &on.minimal_layering());
            let prior_off = score.log_prior(&off, &off.minimal_layering());
            let p = on_probability(prior_on + lik_on, prior_off + lik_off);
            g = if rng.random::<f64>() < p { on } else { off };
        }
        if sweep >= params.burn_in && (sweep - params.burn_in + 1).is_multiple_of(params.thin) {
            out.push(g.clone());
        }
    }
    Ok(out)
}

/// How a node moved to the bottom layer is reconnected to the layer above.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BottomRepair {
    /// The moved node becomes a parent of every node in the second layer.
    #[default]
    Literal,
    /// Only second-layer nodes left without a bottom-layer parent get the
    /// moved node as a parent.
    Conservative,
}

impl FromStr for BottomRepair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(BottomRepair::Literal),
            "conservative" => Ok(BottomRepair::Conservative),
            _ => Err(Error::parse("bottom repair", format!("{s:?}"))),
        }
    }
}

/// Settings for [`stochastic_search`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchParams {
    /// Urn parameter for reassigning a node to a layer.
    pub alpha_tilde: f64,
    pub iterations: usize,
    pub seed: u64,
    pub repair: BottomRepair,
}

impl SearchParams {
    pub fn new(alpha_tilde: f64, iterations: usize, seed: u64) -> Result<Self> {
        let p = SearchParams {
            alpha_tilde,
            iterations,
            seed,
            repair: BottomRepair::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_repair(mut self, repair: BottomRepair) -> Self {
        self.repair = repair;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_tilde > 0.0 && self.alpha_tilde.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha_tilde must be positive, got {}",
                self.alpha_tilde
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("search needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// One proposal of the search kernel.
///
/// `layering` must be the minimal layering of `g`. A random node is taken out
/// of its layer (an emptied layer is closed), reassigned by an urn with
/// parameter `alpha_tilde` (a new layer goes to a uniform position), edges
/// against the new order are dropped, the node is reconnected to the layer
/// below, and the graph is relayered minimally. Finally a uniform ordered
/// pair `(y, w)` has its edge toggled when `y` sits in a lower layer than
/// `w`. The returned layering is the minimal layering of the returned graph.
pub fn propose<R: Rng + ?Sized>(
    g: &Dag,
    layering: &Layering,
    params: &SearchParams,
    rng: &mut R,
) -> (Dag, Layering) {
    let d = g.d();
    if d < 2 {
        return (g.clone(), layering.clone());
    }
    let mut ranks = layering.ranks();
    let mut sizes = layering.sizes_by_rank();

    let x = rng.random_range(0..d);
    let old = ranks[x];
    sizes[old] -= 1;
    if sizes[old] == 0 {
        sizes.remove(old);
        for (v, r) in ranks.iter_mut().enumerate() {
            if v != x && *r > old {
                *r -= 1;
            }
        }
    }

    let k = sizes.len();
    let u = rng.random::<f64>() * (params.alpha_tilde + (d - 1) as f64);
    let mut target = None;
    let mut acc = params.alpha_tilde;
    if u >= acc {
        for (j, &m) in sizes.iter().enumerate() {
            acc += m as f64;
            if u < acc {
                target = Some(j);
                break;
            }
        }
        target.get_or_insert(k - 1);
    }
    match target {
        Some(j) => {
            ranks[x] = j;
            sizes[j] += 1;
        }
        None => {
            let m = rng.random_range(0..=k);
            for (v, r) in ranks.iter_mut().enumerate() {
                if v != x && *r >= m {
                    *r += 1;
                }
            }
            ranks[x] = m;
            sizes.insert(m, 1);
        }
    }

    let mut h = g.clone();
    let backward: Vec<(usize, usize)> = h.edges().filter(|&(a, b)| ranks[a] >= ranks[b]).collect();
    for (a, b) in backward {
        h.remove_edge(a, b);
    }
    let at_rank = |r: usize| -> Vec<usize> { (0..d).filter(|&v| ranks[v] == r).collect() };
    let rx = ranks[x];
    if rx >= 1 {
        let below = at_rank(rx - 1);
        if below.iter().all(|&p| !h.has_edge(p, x)) {
            let p = below[rng.random_range(0..below.len())];
            h.set_edge_unchecked(p, x);
        }
    } else {
        let bottom_mask = at_rank(0).iter().fold(0u64, |m, &v| m | (1 << v));
        for w in at_rank(1) {
            let repair = match params.repair {
                BottomRepair::Literal => true,
                BottomRepair::Conservative => h.parent_mask(w) & bottom_mask == 0,
            };
            if repair {
                h.set_edge_unchecked(x, w);
            }
        }
    }
    let mut lay = h.minimal_layering();

    let y = rng.random_range(0..d);
    let mut w = rng.random_range(0..d - 1);
    if w >= y {
        w += 1;
    }
    if lay.rank(y) < lay.rank(w) {
        if h.remove_edge(y, w) {
            lay = relayer_after_removal(&h, &lay, &[w]);
        } else {
            h.set_edge_unchecked(y, w);
        }
    }
    (h, lay)
}

/// State of one search iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub iter: usize,
    pub log_prior: f64,
    pub log_lik: f64,
    pub log_score: f64,
    pub edges: usize,
    /// Number of layers in the minimal layering.
    pub k: usize,
}

/// A search chain: one record and graph per iteration and the best graph
/// seen.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub graphs: Vec<Dag>,
    pub best_index: usize,
    pub accepted: usize,
    pub seed: u64,
}

pub const TRAJECTORY_HEADER: [&str; 6] = ["iter", "log_prior", "log_lik", "log_score", "edges", "K"];

impl Trajectory {
    pub fn best(&self) -> &Dag {
        &self.graphs[self.best_index]
    }

    pub fn best_record(&self) -> &TrajectoryRecord {
        &self.records[self.best_index]
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        write_records(&self.records, writer)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(BufWriter::new(file))
    }
}

/// Write trajectory records under [`TRAJECTORY_HEADER`].
pub fn write_records<W: Write>(records: &[TrajectoryRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in records {
        w.write_record([
            r.iter.to_string(),
            r.log_prior.to_string(),
            r.log_lik.to_string(),
            r.log_score.to_string(),
            r.edges.to_string(),
            r.k.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("trajectory CSV", e))?;
    Ok(())
}

/// Parse a trajectory CSV; the header must match [`TRAJECTORY_HEADER`].
pub fn read_records<R: Read>(reader: R) -> Result<Vec<TrajectoryRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(Error::parse(
            "trajectory CSV",
            format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let float = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::parse("trajectory CSV", format!("bad number {:?}", field(i))))
        };
        let int = |i: usize| {
            field(i)
                .parse::<usize>()
                .map_err(|_| Error::parse("trajectory CSV", format!("bad integer {:?}", field(i))))
        };
        out.push(TrajectoryRecord {
            iter: int(0)?,
            log_prior: float(1)?,
            log_lik: float(2)?,
            log_score: float(3)?,
            edges: int(4)?,
            k: int(5)?,
        });
    }
    if out.is_empty() {
        return Err(Error::parse("trajectory CSV", "no records"));
    }
    Ok(out)
}

/// Running state of a chain: graph, its minimal layering and the family
/// score of every node.
struct ChainState {
    g: Dag,
    layering: Layering,
    families: Vec<f64>,
    parts: ScoreParts,
}

impl ChainState {
    fn new(g: Dag, score: &ScoreFn, data: &DataMatrix, cache: &mut FamilyCache) -> Self {
        let layering = g.minimal_layering();
        let families: Vec<f64> = (0..g.d())
            .map(|j| cache.score(data, j, g.parent_mask(j)))
            .collect();
        let parts = ScoreParts::new(score.log_prior(&g, &layering), families.iter().sum());
        ChainState {
            g,
            layering,
            families,
            parts,
        }
    }

    /// Score `g` reusing the family scores of nodes whose parents are
    /// unchanged.
    fn successor(
        &self,
        g: Dag,
        layering: Layering,
        score: &ScoreFn,
        data: &DataMatrix,
        cache: &mut FamilyCache,
    ) -> Self {
        let families: Vec<f64> = (0..g.d())
            .map(|j| {
                let mask = g.parent_mask(j);
                if mask == self.g.parent_mask(j) {
                    self.families[j]
                } else {
                    cache.score(data, j, mask)
                }
            })
            .collect();
        let parts = ScoreParts::new(score.log_prior(&g, &layering), families.iter().sum());
        ChainState {
            g,
            layering,
            families,
            parts,
        }
    }
}

/// Run the search from the empty graph.
///
/// A proposal is accepted when `ln u < ln S(G') - ln S(G)` for a fresh
/// uniform `u`, drawn at every iteration.
pub fn stochastic_search(
    data: &DataMatrix,
    score: &ScoreFn,
    params: &SearchParams,
) -> Result<Trajectory> {
    let mut cache = score.new_cache();
    stochastic_search_with_cache(data, score, params, &mut cache)
}

/// As [`stochastic_search`] with a caller-owned family cache.
pub fn stochastic_search_with_cache(
    data: &DataMatrix,
    score: &ScoreFn,
    params: &SearchParams,
    cache: &mut FamilyCache,
) -> Result<Trajectory> {
    params.validate()?;
    if data.d() != score.d() {
        return Err(Error::DimensionMismatch {
            expected: score.d(),
            got: data.d(),
        });
    }
    if cache.gamma() != score.gamma() {
        return Err(Error::InvalidParameter(format!(
            "cache gamma {} differs from score gamma {}",
            cache.gamma(),
            score.gamma()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut state = ChainState::new(Dag::empty(score.d()), score, data, cache);
    let mut records = Vec::with_capacity(params.iterations);
    let mut graphs = Vec::with_capacity(params.iterations);
    let mut accepted = 0;
    let mut best_index = 0;

    for iter in 1..=params.iterations {
        let (g, layering) = propose(&state.g, &state.layering, params, &mut rng);
        let candidate = state.successor(g, layering, score, data, cache);
        let u: f64 = rng.random();
        if u.ln() < candidate.parts.log_score - state.parts.log_score {
            state = candidate;
            accepted += 1;
        }
        let rec = TrajectoryRecord {
            iter,
            log_prior: state.parts.log_prior,
            log_lik: state.parts.log_lik,
            log_score: state.parts.log_score,
            edges: state.g.edge_count(),
            k: state.layering.num_classes(),
        };
        if rec.log_score > records.get(best_index).map_or(f64::NEG_INFINITY, |b: &TrajectoryRecord| b.log_score) {
            best_index = records.len();
        }
        records.push(rec);
        graphs.push(state.g.clone());
    }
    Ok(Trajectory {
        records,
        graphs,
        best_index,
        accepted,
        seed: params.seed,
    })
}
