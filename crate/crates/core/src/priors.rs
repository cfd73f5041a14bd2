//! Priors over DAG structure: the Hoppe-Beta joint prior over (partition,
//! class ordering, DAG), the Minimal Hoppe-Beta prior over DAGs alone, and the
//! uniform prior.
//!
//! Between-class edge densities follow a [`BetaPolicy`], indexed by the gap
//! between the two classes' ranks in the ordering. All densities are evaluated
//! with the edge probabilities integrated out, so a class pair with `n` edges
//! and `m` missing edges contributes `B(b1 + n, b2 + m) / B(b1, b2)`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::dag::{count_compatible_orderings, Dag, Layering};
use crate::error::{Error, Result};
use crate::partition::{log_prob_from_counts, occupation_counts, sample_partition, UrnParams};
use crate::special::{ln_beta, ln_factorial};

/// Distribution of the edge probability for one ordered class pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlotDensity {
    /// Point mass at 0: no edges.
    Zero,
    /// Point mass at 1: every slot filled.
    One,
    Beta(f64, f64),
}

impl SlotDensity {
    /// `b1 = 0` gives a point mass at 0, `b2 = 0` a point mass at 1.
    pub fn from_params(b1: f64, b2: f64) -> Result<Self> {
        let ok = |b: f64| b.is_finite() && b >= 0.0;
        if !ok(b1) || !ok(b2) || (b1 == 0.0 && b2 == 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta parameters ({b1}, {b2}) must be >= 0 and not both zero"
            )));
        }
        Ok(if b1 == 0.0 {
            SlotDensity::Zero
        } else if b2 == 0.0 {
            SlotDensity::One
        } else {
            SlotDensity::Beta(b1, b2)
        })
    }

    /// Log probability of one particular pattern with `present` edges and
    /// `missing` non-edges.
    pub fn log_marginal(self, present: usize, missing: usize) -> f64 {
        match self {
            SlotDensity::Zero if present > 0 => f64::NEG_INFINITY,
            SlotDensity::One if missing > 0 => f64::NEG_INFINITY,
            SlotDensity::Zero | SlotDensity::One => 0.0,
            SlotDensity::Beta(a, b) => {
                ln_beta(a + present as f64, b + missing as f64) - ln_beta(a, b)
            }
        }
    }

    pub fn mean(self) -> f64 {
        match self {
            SlotDensity::Zero => 0.0,
            SlotDensity::One => 1.0,
            SlotDensity::Beta(a, b) => a / (a + b),
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            SlotDensity::Zero => 0.0,
            SlotDensity::One => 1.0,
            SlotDensity::Beta(a, b) => Beta::new(a, b)
                .expect("validated beta parameters")
                .sample(rng),
        }
    }
}

/// How `(beta1, beta2)` depend on the rank gap between two classes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaPolicy {
    /// Same parameters for every ordered pair.
    Constant { beta1: f64, beta2: f64 },
    /// Edges only between consecutive classes.
    AdjacentOnly { beta1: f64, beta2: f64 },
    /// One setting for consecutive classes, another for gaps of two or more.
    TwoLevel {
        adjacent: (f64, f64),
        distant: (f64, f64),
    },
}

impl BetaPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaPolicy::Constant { beta1, beta2 } | BetaPolicy::AdjacentOnly { beta1, beta2 } => {
                SlotDensity::from_params(beta1, beta2).map(drop)
            }
            BetaPolicy::TwoLevel { adjacent, distant } => {
                SlotDensity::from_params(adjacent.0, adjacent.1)?;
                SlotDensity::from_params(distant.0, distant.1).map(drop)
            }
        }
    }

    /// Density for classes `gap >= 1` ranks apart.
    pub fn slot(&self, gap: usize) -> SlotDensity {
        debug_assert!(gap >= 1);
        let (b1, b2) = match *self {
            BetaPolicy::Constant { beta1, beta2 } => (beta1, beta2),
            BetaPolicy::AdjacentOnly { .. } if gap > 1 => return SlotDensity::Zero,
            BetaPolicy::AdjacentOnly { beta1, beta2 } => (beta1, beta2),
            BetaPolicy::TwoLevel { adjacent, .. } if gap == 1 => adjacent,
            BetaPolicy::TwoLevel { distant, .. } => distant,
        };
        SlotDensity::from_params(b1, b2).expect("validated beta policy")
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            BetaPolicy::Constant { .. } => true,
            BetaPolicy::TwoLevel { adjacent, distant } => adjacent == distant,
            BetaPolicy::AdjacentOnly { .. } => false,
        }
    }
}

impl fmt::Display for BetaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaPolicy::Constant { beta1, beta2 } => write!(f, "constant:{beta1},{beta2}"),
            BetaPolicy::AdjacentOnly { beta1, beta2 } => write!(f, "adjacent:{beta1},{beta2}"),
            BetaPolicy::TwoLevel { adjacent, distant } => write!(
                f,
                "two-level:{},{},{},{}",
                adjacent.0, adjacent.1, distant.0, distant.1
            ),
        }
    }
}

/// Accepts `constant:b1,b2`, `adjacent:b1,b2`, `two-level:a1,a2,b1,b2`, or a
/// bare list of two (constant) or four (two-level) numbers.
impl FromStr for BetaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (scheme, nums) = match s.split_once(':') {
            Some((scheme, rest)) => (Some(scheme.trim()), rest),
            None => (None, s),
        };
        let vals = nums
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse("beta policy", format!("bad number {t:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let policy = match (scheme, vals.as_slice()) {
            (None | Some("constant"), &[beta1, beta2]) => BetaPolicy::Constant { beta1, beta2 },
            (Some("adjacent"), &[beta1, beta2]) => BetaPolicy::AdjacentOnly { beta1, beta2 },
            (None | Some("two-level"), &[a1, a2, b1, b2]) => BetaPolicy::TwoLevel {
                adjacent: (a1, a2),
                distant: (b1, b2),
            },
            _ => return Err(Error::parse("beta policy", format!("unrecognised {s:?}"))),
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Which prior a score uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PriorMode {
    Uniform,
    HoppeBeta,
    MinimalHoppeBeta,
}

impl PriorMode {
    pub fn name(self) -> &'static str {
        match self {
            PriorMode::Uniform => "uniform",
            PriorMode::HoppeBeta => "hoppe-beta",
            PriorMode::MinimalHoppeBeta => "minimal",
        }
    }
}

impl fmt::Display for PriorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PriorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PriorMode::Uniform),
            "hoppe-beta" | "hoppe_beta" => Ok(PriorMode::HoppeBeta),
            "minimal" | "minimal-hoppe-beta" | "minimal_hoppe_beta" => {
                Ok(PriorMode::MinimalHoppeBeta)
            }
            _ => Err(Error::parse("prior mode", format!("unknown prior {s:?}"))),
        }
    }
}

/// How the Minimal Hoppe-Beta density is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum MinimalEval {
    /// Generative probability, summed over every skeleton the DAG contains.
    #[default]
    Exact,
    /// Single-skeleton closed form without the skeleton-count factor.
    Unscaled,
}

impl FromStr for MinimalEval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(MinimalEval::Exact),
            "unscaled" => Ok(MinimalEval::Unscaled),
            _ => Err(Error::parse("minimal evaluation mode", format!("{s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorParams {
    pub alpha: f64,
    pub beta: BetaPolicy,
    pub mode: PriorMode,
    pub minimal_eval: MinimalEval,
}

impl PriorParams {
    pub fn new(mode: PriorMode, alpha: f64, beta: BetaPolicy) -> Result<Self> {
        let p = PriorParams {
            alpha,
            beta,
            mode,
            minimal_eval: MinimalEval::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_minimal_eval(mut self, eval: MinimalEval) -> Self {
        self.minimal_eval = eval;
        self
    }

    pub fn validate(&self) -> Result<()> {
        UrnParams::new(self.alpha)?;
        self.beta.validate()
    }

    fn urn(&self) -> UrnParams {
        UrnParams::new(self.alpha).expect("validated alpha")
    }
}

/// Edge counts between every ordered pair of ranks.
struct RankPairCounts {
    sizes: Vec<usize>,
    // edges[p][q]: edges from rank p to rank q
    edges: Vec<Vec<usize>>,
}

impl RankPairCounts {
    fn new(g: &Dag, layering: &Layering) -> Self {
        let sizes = layering.sizes_by_rank();
        let masks = layering.rank_masks();
        let k = sizes.len();
        let mut edges = vec![vec![0usize; k]; k];
        for u in 0..g.d() {
            let p = layering.rank(u);
            let ch = g.child_mask(u);
            if ch == 0 {
                continue;
            }
            for (q, &mask) in masks.iter().enumerate() {
                edges[p][q] += (ch & mask).count_ones() as usize;
            }
        }
        RankPairCounts { sizes, edges }
    }

    /// First backward or same-rank edge, if any.
    fn first_violation(&self, g: &Dag, layering: &Layering) -> Option<(usize, usize)> {
        let has_backward = (0..self.sizes.len()).any(|p| (0..=p).any(|q| self.edges[p][q] > 0));
        if !has_backward {
            return None;
        }
        g.edges().find(|&(i, j)| layering.rank(i) >= layering.rank(j))
    }
}

fn sample_ordering<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    order
}

fn nodes_by_rank(layering: &Layering) -> Vec<Vec<usize>> {
    let mut layers = vec![Vec::new(); layering.num_classes()];
    for v in 0..layering.d() {
        layers[layering.rank(v)].push(v);
    }
    layers
}

/// Draw `(z, rho)` and a DAG from the Hoppe-Beta prior.
pub fn sample_hoppe_beta<R: Rng + ?Sized>(
    d: usize,
    params: &PriorParams,
    rng: &mut R,
) -> (Layering, Dag) {
    let z = sample_partition(d, params.urn(), rng);
    let k = z.iter().max().map_or(0, |&c| c + 1);
    let order = sample_ordering(k, rng);
    let layering = Layering::new(z, order).expect("urn output is a valid partition");
    let layers = nodes_by_rank(&layering);
    let mut g = Dag::empty(d);
    for p in 0..k {
        for q in p + 1..k {
            let eta = params.beta.slot(q - p).sample(rng);
            for &u in &layers[p] {
                for &v in &layers[q] {
                    if rng.random::<f64>() < eta {
                        g.set_edge_unchecked(u, v);
                    }
                }
            }
        }
    }
    (layering, g)
}

/// `ln P(G | z, rho)` with the edge probabilities integrated out.
pub fn log_hoppe_beta_conditional(g: &Dag, layering: &Layering, beta: &BetaPolicy) -> Result<f64> {
    if g.d() != layering.d() {
        return Err(Error::DimensionMismatch {
            expected: g.d(),
            got: layering.d(),
        });
    }
    let counts = RankPairCounts::new(g, layering);
    if let Some((from, to)) = counts.first_violation(g, layering) {
        return Err(Error::IncompatibleOrdering { from, to });
    }
    let k = counts.sizes.len();
    let mut total = 0.0;
    for p in 0..k {
        for q in p + 1..k {
            let n = counts.edges[p][q];
            let slots = counts.sizes[p] * counts.sizes[q];
            total += beta.slot(q - p).log_marginal(n, slots - n);
        }
    }
    Ok(total)
}

/// `ln P(G, z)`: the Hoppe-Beta prior with the class ordering marginalised.
///
/// `z` may use any labels; it is relabelled to urn order. Requires a constant
/// beta policy. Returns `-inf` when no class ordering is compatible with `G`.
pub fn log_hoppe_beta_joint(g: &Dag, z: &[usize], params: &PriorParams) -> Result<f64> {
    if !params.beta.is_constant() {
        return Err(Error::NonConstantBeta);
    }
    if z.len() != g.d() {
        return Err(Error::DimensionMismatch {
            expected: g.d(),
            got: z.len(),
        });
    }
    let z = crate::dag::canonical_labels(z);
    let counts = occupation_counts(&z)?;
    let k = counts.len();
    let compatible = match count_compatible_orderings(g, &z) {
        Ok(n) => n,
        Err(Error::IncompatiblePartition(_)) => return Ok(f64::NEG_INFINITY),
        Err(e) => return Err(e),
    };
    let rho = compatible_ordering(g, &z, k);
    let layering = Layering::new(z, rho)?;
    let conditional = log_hoppe_beta_conditional(g, &layering, &params.beta)?;
    Ok((compatible as f64).ln() - ln_factorial(k)
        + conditional
        + log_prob_from_counts(&counts, params.alpha))
}

/// One class ordering consistent with the edges (a topological order of the
/// class precedence graph). Caller has checked one exists.
fn compatible_ordering(g: &Dag, z: &[usize], k: usize) -> Vec<usize> {
    let mut pred = vec![0u64; k];
    for (i, j) in g.edges() {
        pred[z[j]] |= 1 << z[i];
    }
    let mut placed = 0u64;
    let mut order = vec![0usize; k];
    for pos in 0..k {
        let c = (0..k)
            .find(|&c| placed & (1 << c) == 0 && pred[c] & !placed == 0)
            .expect("compatible ordering exists");
        order[c] = pos;
        placed |= 1 << c;
    }
    order
}

/// `ln P(G, z, rho)` for the layering's own class ordering. Valid for any
/// beta policy.
pub fn log_hoppe_beta_ordered(g: &Dag, layering: &Layering, params: &PriorParams) -> Result<f64> {
    let conditional = log_hoppe_beta_conditional(g, layering, &params.beta)?;
    Ok(log_prob_from_counts(layering.class_sizes(), params.alpha)
        - ln_factorial(layering.num_classes())
        + conditional)
}

/// One draw from the Minimal Hoppe-Beta generative scheme, with the
/// intermediate stages kept.
#[derive(Clone, Debug)]
pub struct MinimalDraw {
    /// Urn partition and uniformly drawn class ordering.
    pub layering: Layering,
    /// One compelled parent in the previous layer for every node above the
    /// bottom layer.
    pub skeleton: Dag,
    pub dag: Dag,
}

pub fn sample_minimal_hoppe_beta_traced<R: Rng + ?Sized>(
    d: usize,
    params: &PriorParams,
    rng: &mut R,
) -> MinimalDraw {
    let z = sample_partition(d, params.urn(), rng);
    let k = z.iter().max().map_or(0, |&c| c + 1);
    let order = sample_ordering(k, rng);
    let layering = Layering::new(z, order).expect("urn output is a valid partition");
    let layers = nodes_by_rank(&layering);

    let mut skeleton = Dag::empty(d);
    for r in 1..k {
        let below = &layers[r - 1];
        for &v in &layers[r] {
            let w = below[rng.random_range(0..below.len())];
            skeleton.set_edge_unchecked(w, v);
        }
    }

    let mut dag = skeleton.clone();
    for p in 0..k {
        for q in p + 1..k {
            let eta = params.beta.slot(q - p).sample(rng);
            for &u in &layers[p] {
                for &v in &layers[q] {
                    if !skeleton.has_edge(u, v) && rng.random::<f64>() < eta {
                        dag.set_edge_unchecked(u, v);
                    }
                }
            }
        }
    }
    MinimalDraw {
        layering,
        skeleton,
        dag,
    }
}

pub fn sample_minimal_hoppe_beta<R: Rng + ?Sized>(
    d: usize,
    params: &PriorParams,
    rng: &mut R,
) -> Dag {
    sample_minimal_hoppe_beta_traced(d, params, rng).dag
}

/// `ln P(G)` under the Minimal Hoppe-Beta prior.
pub fn log_minimal_hoppe_beta(g: &Dag, params: &PriorParams, eval: MinimalEval) -> f64 {
    log_minimal_with_layering(g, &g.minimal_layering(), params, eval)
}

/// As [`log_minimal_hoppe_beta`] with the minimal layering already at hand.
///
/// With layer sizes `m_1..m_K` (lowest first), `c_v` the number of parents of
/// `v` in the layer directly below, and pair counts `N`, `M`:
///
/// ```text
/// ln P = ln P_urn(m) - ln K!
///      + Σ_{v above layer 1} ln(c_v / m_{rank(v)-1})        (exact only)
///      + Σ_j   ln B(b1 + N_{j,j+1} - m_{j+1}, b2 + M_{j,j+1}) / B(b1, b2)
///      + Σ_{i >= j+2} ln B(b1 + N_{j,i}, b2 + M_{j,i}) / B(b1, b2)
/// ```
///
/// The skeleton term counts the compelled-parent choices that reproduce `G`;
/// every such skeleton leaves the same set of optional slots, so the sum over
/// skeletons factorises.
pub fn log_minimal_with_layering(
    g: &Dag,
    layering: &Layering,
    params: &PriorParams,
    eval: MinimalEval,
) -> f64 {
    let counts = RankPairCounts::new(g, layering);
    let sizes = &counts.sizes;
    let k = sizes.len();

    let mut total = log_prob_from_counts(sizes, params.alpha) - ln_factorial(k);
    if total == f64::NEG_INFINITY {
        return total;
    }

    if eval == MinimalEval::Exact {
        let masks = layering.rank_masks();
        for v in 0..g.d() {
            let r = layering.rank(v);
            if r == 0 {
                continue;
            }
            let below = (g.parent_mask(v) & masks[r - 1]).count_ones() as f64;
            total += below.ln() - (sizes[r - 1] as f64).ln();
        }
    }

    for p in 0..k {
        for q in p + 1..k {
            let n = counts.edges[p][q];
            let slots = sizes[p] * sizes[q];
            let missing = slots - n;
            let optional = if q == p + 1 {
                n.saturating_sub(sizes[q])
            } else {
                n
            };
            total += params.beta.slot(q - p).log_marginal(optional, missing);
        }
    }
    total
}

/// Number of labelled DAGs on `d` nodes, by the inclusion-exclusion
/// recurrence `a_n = Σ_k (-1)^{k+1} C(n,k) 2^{k(n-k)} a_{n-k}`.
pub fn dag_count(d: usize) -> BigInt {
    let mut a: Vec<BigInt> = vec![BigInt::one()];
    for n in 1..=d {
        let mut total = BigInt::zero();
        let mut binom = BigInt::one();
        for k in 1..=n {
            binom = binom * BigInt::from(n - k + 1) / BigInt::from(k);
            let term = &binom * (BigInt::one() << (k * (n - k))) * &a[n - k];
            if k % 2 == 1 {
                total += term;
            } else {
                total -= term;
            }
        }
        a.push(total);
    }
    a.swap_remove(d)
}

fn ln_bigint(x: &BigInt) -> f64 {
    debug_assert!(x.is_positive());
    let bits = x.bits();
    if bits < 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 900;
    let head: BigInt = x >> shift;
    head.to_f64().expect("fits in f64").ln() + shift as f64 * std::f64::consts::LN_2
}

/// `-ln a_d`, the same for every DAG on `d` nodes.
pub fn log_uniform_prior(d: usize) -> f64 {
    -ln_bigint(&dag_count(d))
}

/// Expected edge count of the Minimal Hoppe-Beta prior divided by
/// `d(d-1)/2`, for a constant beta policy.
///
/// `E[edges] = (1 - p)(d - E[m_first]) + p/2 (d^2 - E[Σ m_i^2])` with
/// `p = b1 / (b1 + b2)`; the two occupation expectations are estimated from
/// `samples` urn draws with uniformly ordered classes.
pub fn sparsity_index<R: Rng + ?Sized>(
    params: &PriorParams,
    d: usize,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if !params.beta.is_constant() {
        return Err(Error::NonConstantBeta);
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("sparsity_index needs samples > 0".into()));
    }
    if d < 2 {
        return Ok(0.0);
    }
    let p = params.beta.slot(1).mean();
    let urn = params.urn();
    let (mut first_sum, mut sq_sum) = (0.0, 0.0);
    for _ in 0..samples {
        let z = sample_partition(d, urn, rng);
        let counts = occupation_counts(&z).expect("urn output is feasible");
        let first = rng.random_range(0..counts.len());
        first_sum += counts[first] as f64;
        sq_sum += counts.iter().map(|&m| (m * m) as f64).sum::<f64>();
    }
    let n = samples as f64;
    let (first_mean, sq_mean) = (first_sum / n, sq_sum / n);
    let df = d as f64;
    let expected_edges = (1.0 - p) * (df - first_mean) + 0.5 * p * (df * df - sq_mean);
    Ok(expected_edges / (0.5 * df * (df - 1.0)))
}
