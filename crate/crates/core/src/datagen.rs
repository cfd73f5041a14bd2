//! Categorical Bayesian networks: random conditional probability tables,
//! forward sampling, and the built-in HEPAR II structure.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::likelihood::DataMatrix;

/// The 12-node, 24-edge HEPAR II network: risk factors 1-4, diseases 5-8,
/// symptoms 9-12.
pub fn hepar2_structure() -> Dag {
    const EDGES: [(usize, [usize; 3]); 8] = [
        (1, [5, 6, 7]),
        (2, [6, 7, 8]),
        (3, [5, 6, 8]),
        (4, [5, 7, 8]),
        (5, [9, 11, 12]),
        (6, [10, 11, 12]),
        (7, [9, 10, 11]),
        (8, [9, 10, 12]),
    ];
    let edges: Vec<(usize, usize)> = EDGES
        .iter()
        .flat_map(|&(from, tos)| tos.into_iter().map(move |to| (from - 1, to - 1)))
        .collect();
    Dag::from_edges(12, &edges).expect("HEPAR II is acyclic")
}

/// What to do with a Bernoulli parameter drawn outside `[lo, hi]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CptAdjust {
    /// Move it to the nearest bound.
    #[default]
    Clamp,
    /// Redraw until it lands strictly inside `(lo, hi)`.
    Resample,
}

impl FromStr for CptAdjust {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clamp" => Ok(CptAdjust::Clamp),
            "resample" => Ok(CptAdjust::Resample),
            _ => Err(Error::parse("cpt-adjust", format!("{s:?}"))),
        }
    }
}

/// Beta(`a`, `b`) draws for each Bernoulli parameter, forced into `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CptRecipe {
    pub a: f64,
    pub b: f64,
    pub lo: f64,
    pub hi: f64,
    pub adjust: CptAdjust,
}

impl Default for CptRecipe {
    fn default() -> Self {
        CptRecipe {
            a: 0.5,
            b: 0.5,
            lo: 0.1,
            hi: 0.9,
            adjust: CptAdjust::Clamp,
        }
    }
}

impl CptRecipe {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "CPT beta parameters must be positive, got ({}, {})",
                self.a, self.b
            )));
        }
        if !(0.0 <= self.lo && self.lo < self.hi && self.hi <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "CPT bounds need 0 <= lo < hi <= 1, got lo={} hi={}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// A DAG with one conditional distribution per node and parent
/// configuration.
///
/// `cpts[j][l]` is the distribution of node `j` under parent configuration
/// `l`, where configurations are numbered mixed-radix over the parents in
/// increasing index order, the lowest-index parent most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct CptNetwork {
    structure: Dag,
    cards: Vec<usize>,
    cpts: Vec<Vec<Vec<f64>>>,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl CptNetwork {
    pub fn new(structure: Dag, cards: Vec<usize>, cpts: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let d = structure.d();
        if cards.len() != d || cpts.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: cards.len().min(cpts.len()),
            });
        }
        for j in 0..d {
            let rows: usize = structure.parents(j).map(|p| cards[p]).product();
            if cpts[j].len() != rows {
                return Err(Error::InvalidParameter(format!(
                    "node {} has {} CPT rows, expected {rows}",
                    j + 1,
                    cpts[j].len()
                )));
            }
            for row in &cpts[j] {
                if row.len() != cards[j] {
                    return Err(Error::InvalidParameter(format!(
                        "node {} CPT row has {} entries, expected {}",
                        j + 1,
                        row.len(),
                        cards[j]
                    )));
                }
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "node {} CPT row {row:?} is not a distribution",
                        j + 1
                    )));
                }
            }
        }
        Ok(CptNetwork {
            structure,
            cards,
            cpts,
        })
    }

    pub fn structure(&self) -> &Dag {
        &self.structure
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn table(&self, j: usize) -> &[Vec<f64>] {
        &self.cpts[j]
    }

    /// Configuration index of `j`'s parents in a full assignment.
    pub fn parent_config(&self, j: usize, values: &[u32]) -> usize {
        self.structure
            .parents(j)
            .fold(0, |acc, p| acc * self.cards[p] + values[p] as usize)
    }

    /// Text form: the adjacency block, a `cards` line, then for each node a
    /// `node <j> parents <...>` line (1-based labels) followed by one row of
    /// probabilities per parent configuration.
    pub fn to_text(&self) -> String {
        let mut out = self.structure.to_adjacency_text();
        let cards: Vec<String> = self.cards.iter().map(|c| c.to_string()).collect();
        writeln!(out, "cards {}", cards.join(" ")).unwrap();
        for j in 0..self.structure.d() {
            let parents: Vec<String> = self
                .structure
                .parents(j)
                .map(|p| (p + 1).to_string())
                .collect();
            writeln!(out, "node {} parents {}", j + 1, parents.join(" ").trim_end()).unwrap();
            for row in &self.cpts[j] {
                let vals: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
                writeln!(out, "{}", vals.join(" ")).unwrap();
            }
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let bad = |msg: String| Error::parse("CPT network", msg);
        let d: usize = lines
            .first()
            .ok_or_else(|| bad("empty input".into()))?
            .parse()
            .map_err(|_| bad("bad node count".into()))?;
        if lines.len() < d + 2 {
            return Err(bad("truncated input".into()));
        }
        let structure = Dag::parse_adjacency_text(&lines[..=d].join("\n"))?;
        let cards = lines[d + 1]
            .strip_prefix("cards")
            .ok_or_else(|| bad("missing cards line".into()))?
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| bad(format!("bad card {t:?}"))))
            .collect::<Result<Vec<usize>>>()?;
        if cards.len() != d {
            return Err(bad(format!("{} cards for {d} nodes", cards.len())));
        }
        let mut cpts = vec![Vec::new(); d];
        let mut idx = d + 2;
        for _ in 0..d {
            let header = lines.get(idx).ok_or_else(|| bad("missing node block".into()))?;
            let mut toks = header.split_whitespace();
            let j: usize = match (toks.next(), toks.next(), toks.next()) {
                (Some("node"), Some(j), Some("parents")) => {
                    j.parse().map_err(|_| bad(format!("bad node header {header:?}")))?
                }
                _ => return Err(bad(format!("bad node header {header:?}"))),
            };
            if j == 0 || j > d {
                return Err(bad(format!("node {j} out of range")));
            }
            let listed: Vec<usize> = toks
                .map(|t| t.parse::<usize>().map_err(|_| bad(format!("bad parent {t:?}"))))
                .collect::<Result<Vec<usize>>>()?;
            let actual: Vec<usize> = structure.parents(j - 1).map(|p| p + 1).collect();
            if listed != actual {
                return Err(bad(format!(
                    "node {j} lists parents {listed:?} but the structure has {actual:?}"
                )));
            }
            let rows: usize = structure.parents(j - 1).map(|p| cards[p]).product();
            idx += 1;
            for _ in 0..rows {
                let line = lines.get(idx).ok_or_else(|| bad("missing CPT row".into()))?;
                let row = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad probability {t:?}"))))
                    .collect::<Result<Vec<f64>>>()?;
                cpts[j - 1].push(row);
                idx += 1;
            }
        }
        CptNetwork::new(structure, cards, cpts)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CptNetwork::parse_text(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn bounded_bernoulli<R: Rng + ?Sized>(beta: &Beta<f64>, recipe: &CptRecipe, rng: &mut R) -> f64 {
    match recipe.adjust {
        CptAdjust::Clamp => beta.sample(rng).clamp(recipe.lo, recipe.hi),
        CptAdjust::Resample => loop {
            let theta = beta.sample(rng);
            if theta > recipe.lo && theta < recipe.hi {
                break theta;
            }
        },
    }
}

/// Random conditional tables for `structure`.
///
/// Binary nodes get `theta ~ Beta(a, b)` adjusted into `[lo, hi]`, with the
/// row `[1 - theta, theta]`. Nodes with more states get a symmetric
/// Dirichlet(`a`) row; the bounds apply to binary nodes only.
pub fn random_cpts<R: Rng + ?Sized>(
    structure: &Dag,
    cards: &[usize],
    recipe: &CptRecipe,
    rng: &mut R,
) -> Result<CptNetwork> {
    recipe.validate()?;
    if cards.len() != structure.d() {
        return Err(Error::DimensionMismatch {
            expected: structure.d(),
            got: cards.len(),
        });
    }
    let beta = Beta::new(recipe.a, recipe.b)
        .map_err(|e| Error::InvalidParameter(format!("CPT beta: {e}")))?;
    let gamma = Gamma::new(recipe.a, 1.0)
        .map_err(|e| Error::InvalidParameter(format!("CPT dirichlet: {e}")))?;
    let mut cpts = Vec::with_capacity(structure.d());
    for j in 0..structure.d() {
        let rows: usize = structure.parents(j).map(|p| cards[p]).product();
        let p = cards[j];
        let table = (0..rows)
            .map(|_| {
                if p == 2 {
                    let theta = bounded_bernoulli(&beta, recipe, rng);
                    vec![1.0 - theta, theta]
                } else {
                    let draws: Vec<f64> = (0..p).map(|_| gamma.sample(rng)).collect();
                    let total: f64 = draws.iter().sum();
                    let mut row: Vec<f64> = draws.iter().map(|x| x / total).collect();
                    let rest: f64 = row[..p - 1].iter().sum();
                    row[p - 1] = 1.0 - rest;
                    row
                }
            })
            .collect();
        cpts.push(table);
    }
    CptNetwork::new(structure.clone(), cards.to_vec(), cpts)
}

/// `n` independent rows drawn in topological order.
pub fn forward_sample<R: Rng + ?Sized>(net: &CptNetwork, n: usize, rng: &mut R) -> DataMatrix {
    let d = net.structure.d();
    let order = net.structure.topological_order();
    let mut columns = vec![Vec::with_capacity(n); d];
    let mut values = vec![0u32; d];
    for _ in 0..n {
        for &j in &order {
            let row = &net.cpts[j][net.parent_config(j, &values)];
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut state = row.len() - 1;
            for (s, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    state = s;
                    break;
                }
            }
            values[j] = state as u32;
        }
        for j in 0..d {
            columns[j].push(values[j]);
        }
    }
    DataMatrix::from_columns(columns, net.cards.clone(), n).expect("sampled values within cards")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn hepar2_shape() {
        let g = hepar2_structure();
        assert_eq!(g.d(), 12);
        assert_eq!(g.edge_count(), 24);
        assert!(g.is_acyclic());
        assert_eq!(g.minimal_layering().sizes_by_rank(), vec![4, 4, 4]);
    }

    #[test]
    fn parameters_within_bounds() {
        let g = hepar2_structure();
        let net = random_cpts(&g, &[2; 12], &CptRecipe::default(), &mut rng(1)).unwrap();
        for j in 0..12 {
            assert_eq!(net.table(j).len(), 1 << g.parents(j).count());
            for row in net.table(j) {
                assert!(row.iter().all(|&x| (0.1 - 1e-12..=0.9 + 1e-12).contains(&x)));
            }
        }
        let resample = CptRecipe {
            adjust: CptAdjust::Resample,
            ..CptRecipe::default()
        };
        let net = random_cpts(&g, &[2; 12], &resample, &mut rng(2)).unwrap();
        for j in 0..12 {
            for row in net.table(j) {
                assert!(row.iter().all(|&x| x > 0.1 && x < 0.9));
            }
        }
    }

    #[test]
    fn narrow_bounds_pin_parameters() {
        let g = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let recipe = CptRecipe {
            lo: 0.3,
            hi: 0.3 + 1e-9,
            ..CptRecipe::default()
        };
        let net = random_cpts(&g, &[2, 2], &recipe, &mut rng(4)).unwrap();
        for j in 0..2 {
            for row in net.table(j) {
                assert!((row[1] - 0.3).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn invalid_bounds_rejected() {
        let g = Dag::empty(2);
        for (lo, hi) in [(0.5, 0.5), (0.6, 0.4), (-0.1, 0.5)] {
            let recipe = CptRecipe {
                lo,
                hi,
                ..CptRecipe::default()
            };
            assert!(random_cpts(&g, &[2, 2], &recipe, &mut rng(0)).is_err());
        }
    }

    #[test]
    fn seeded_construction_is_deterministic() {
        let g = hepar2_structure();
        let a = random_cpts(&g, &[2; 12], &CptRecipe::default(), &mut rng(7)).unwrap();
        let b = random_cpts(&g, &[2; 12], &CptRecipe::default(), &mut rng(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn root_frequency_converges() {
        let net = CptNetwork::new(Dag::empty(1), vec![2], vec![vec![vec![0.1, 0.9]]]).unwrap();
        let data = forward_sample(&net, 100_000, &mut rng(3));
        let ones = data.column(0).iter().filter(|&&v| v == 1).count() as f64 / 1e5;
        assert!((ones - 0.9).abs() < 0.01);
    }

    #[test]
    fn deterministic_tables_give_functional_children() {
        // child = NOT parent
        let g = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let net = CptNetwork::new(
            g,
            vec![2, 2],
            vec![
                vec![vec![0.5, 0.5]],
                vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            ],
        )
        .unwrap();
        let data = forward_sample(&net, 500, &mut rng(5));
        for r in 0..data.n() {
            assert_eq!(data.column(1)[r], 1 - data.column(0)[r]);
        }
    }

    #[test]
    fn zero_rows() {
        let g = hepar2_structure();
        let net = random_cpts(&g, &[2; 12], &CptRecipe::default(), &mut rng(1)).unwrap();
        let data = forward_sample(&net, 0, &mut rng(1));
        assert_eq!((data.n(), data.d()), (0, 12));
        assert_eq!(data.cards(), &[2; 12]);
    }

    #[test]
    fn multistate_rows_are_distributions() {
        let g = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        let net = random_cpts(&g, &[3, 2, 4], &CptRecipe::default(), &mut rng(6)).unwrap();
        assert_eq!(net.table(2).len(), 6);
        let data = forward_sample(&net, 200, &mut rng(6));
        assert!(data.column(2).iter().all(|&v| v < 4));
    }

    #[test]
    fn text_roundtrip() {
        let g = hepar2_structure();
        let net = random_cpts(&g, &[2; 12], &CptRecipe::default(), &mut rng(9)).unwrap();
        assert_eq!(CptNetwork::parse_text(&net.to_text()).unwrap(), net);
        let bad = net.to_text().replace("node 5 parents 1 3 4", "node 5 parents 1 3");
        assert!(CptNetwork::parse_text(&bad).is_err());
    }
}
