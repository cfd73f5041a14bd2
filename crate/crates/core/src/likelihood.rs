//! Cooper-Herskovits marginal likelihood for categorical data.
//!
//! With a symmetric Dirichlet(`gamma`) prior on every conditional
//! distribution the likelihood factorises over families. For child `j` with
//! `p_j` states and observed parent configurations `l`:
//!
//! ```text
//! ln S_j = Σ_l [ ln Γ(p_j γ) - ln Γ(n_l + p_j γ) + Σ_i (ln Γ(γ + n_il) - ln Γ(γ)) ]
//! ```
//!
//! Configurations that never occur contribute zero, so only observed ones are
//! visited.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// `n x d` matrix of categorical observations, stored by column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataMatrix {
    n: usize,
    columns: Vec<Vec<u32>>,
    cards: Vec<usize>,
}

impl DataMatrix {
    /// `rows[r][j]` must lie in `0..cards[j]`; every card must be at least 2.
    pub fn from_rows(rows: &[Vec<u32>], cards: Vec<usize>) -> Result<Self> {
        let d = cards.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); d];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::parse(
                    "data matrix",
                    format!("row {} has {} values, expected {d}", r + 1, row.len()),
                ));
            }
            for (j, &v) in row.iter().enumerate() {
                columns[j].push(v);
            }
        }
        DataMatrix::from_columns(columns, cards, rows.len())
    }

    pub fn from_columns(columns: Vec<Vec<u32>>, cards: Vec<usize>, n: usize) -> Result<Self> {
        if columns.len() != cards.len() {
            return Err(Error::DimensionMismatch {
                expected: cards.len(),
                got: columns.len(),
            });
        }
        if cards.len() > crate::dag::MAX_NODES {
            return Err(Error::TooManyNodes(cards.len()));
        }
        for (j, (col, &p)) in columns.iter().zip(&cards).enumerate() {
            if p < 2 {
                return Err(Error::InvalidParameter(format!(
                    "variable {} has {p} states; at least 2 required",
                    j + 1
                )));
            }
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: col.len(),
                });
            }
            if let Some(r) = col.iter().position(|&v| v as usize >= p) {
                return Err(Error::parse(
                    "data matrix",
                    format!(
                        "row {}, variable {}: value {} outside 0..{p}",
                        r + 1,
                        j + 1,
                        col[r]
                    ),
                ));
            }
        }
        Ok(DataMatrix { n, columns, cards })
    }

    /// Cardinalities taken as `max(2, 1 + largest observed value)`.
    pub fn from_rows_inferred(rows: &[Vec<u32>], d: usize) -> Result<Self> {
        let mut cards = vec![2usize; d];
        for row in rows {
            for (j, &v) in row.iter().enumerate().take(d) {
                cards[j] = cards[j].max(v as usize + 1);
            }
        }
        log::info!("no cardinality header; inferred state counts {cards:?}");
        DataMatrix::from_rows(rows, cards)
    }

    pub fn empty(cards: Vec<usize>) -> Result<Self> {
        let d = cards.len();
        DataMatrix::from_columns(vec![Vec::new(); d], cards, 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.cards.len()
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn column(&self, j: usize) -> &[u32] {
        &self.columns[j]
    }

    pub fn row(&self, r: usize) -> Vec<u32> {
        self.columns.iter().map(|c| c[r]).collect()
    }

    /// Same data with rows reordered so that new row `r` is old row `perm[r]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: perm.len(),
            });
        }
        let columns = self
            .columns
            .iter()
            .map(|c| perm.iter().map(|&r| c[r]).collect())
            .collect();
        DataMatrix::from_columns(columns, self.cards.clone(), self.n)
    }

    /// Optional first line `card:p_1,...,p_d`, then one comma-separated row
    /// per observation.
    pub fn parse_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut cards: Option<Vec<usize>> = None;
        let mut rows: Vec<Vec<u32>> = Vec::new();
        for (idx, record) in rdr.records().enumerate() {
            let record = record?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            if idx == 0 {
                if let Some(first) = record.get(0).and_then(|f| f.strip_prefix("card:")) {
                    let parsed = std::iter::once(first)
                        .chain(record.iter().skip(1))
                        .map(|t| {
                            t.trim().parse::<usize>().map_err(|_| {
                                Error::parse("data header", format!("bad cardinality {t:?}"))
                            })
                        })
                        .collect::<Result<Vec<usize>>>()?;
                    cards = Some(parsed);
                    continue;
                }
            }
            let row = record
                .iter()
                .map(|t| {
                    t.parse::<u32>().map_err(|_| {
                        Error::parse("data matrix", format!("line {}: bad value {t:?}", idx + 1))
                    })
                })
                .collect::<Result<Vec<u32>>>()?;
            rows.push(row);
        }
        match cards {
            Some(cards) => DataMatrix::from_rows(&rows, cards),
            None => {
                let d = rows.first().map_or(0, Vec::len);
                DataMatrix::from_rows_inferred(&rows, d)
            }
        }
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        DataMatrix::parse_csv(file)
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        let mut header: Vec<String> = self.cards.iter().map(|c| c.to_string()).collect();
        if let Some(first) = header.first_mut() {
            *first = format!("card:{first}");
        }
        w.write_record(&header)?;
        for r in 0..self.n {
            w.write_record(self.columns.iter().map(|c| c[r].to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }
}

/// Configurations beyond this many cells are tallied in a hash map.
const DENSE_TALLY_LIMIT: usize = 1 << 22;

/// Log Cooper-Herskovits score of one family, computed from the data.
pub fn family_log_score(data: &DataMatrix, child: usize, parents: u64, gamma: f64) -> f64 {
    let n = data.n();
    if n == 0 {
        return 0.0;
    }
    let p = data.cards()[child];
    let parent_list: Vec<usize> = (0..data.d()).filter(|&k| parents >> k & 1 == 1).collect();
    let mut q: usize = 1;
    let mut overflow = false;
    for &k in &parent_list {
        match q.checked_mul(data.cards()[k]) {
            Some(v) => q = v,
            None => overflow = true,
        }
    }
    let child_col = data.column(child);
    let config_of = |r: usize| -> u64 {
        parent_list.iter().fold(0u64, |acc, &k| {
            acc.wrapping_mul(data.cards()[k] as u64)
                .wrapping_add(data.column(k)[r] as u64)
        })
    };

    let pg = p as f64 * gamma;
    let lg_gamma = ln_gamma(gamma);
    let lg_pg = ln_gamma(pg);
    let cell_term = |counts: &[u32]| -> f64 {
        let total: u32 = counts.iter().sum();
        if total == 0 {
            return 0.0;
        }
        let mut s = lg_pg - ln_gamma(total as f64 + pg);
        for &c in counts {
            if c > 0 {
                s += ln_gamma(gamma + c as f64) - lg_gamma;
            }
        }
        s
    };

    if !overflow && q.saturating_mul(p) <= DENSE_TALLY_LIMIT {
        let mut counts = vec![0u32; q * p];
        for r in 0..n {
            counts[config_of(r) as usize * p + child_col[r] as usize] += 1;
        }
        counts.chunks_exact(p).map(cell_term).sum()
    } else {
        let mut table: HashMap<u64, Vec<u32>> = HashMap::new();
        for r in 0..n {
            table.entry(config_of(r)).or_insert_with(|| vec![0; p])[child_col[r] as usize] += 1;
        }
        table.values().map(|c| cell_term(c)).sum()
    }
}

/// Full log likelihood `ln P(x | G)`.
pub fn ch_log_likelihood(g: &Dag, data: &DataMatrix, gamma: f64) -> f64 {
    assert_eq!(g.d(), data.d(), "graph and data dimension differ");
    (0..g.d())
        .map(|j| family_log_score(data, j, g.parent_mask(j), gamma))
        .sum()
}

/// A scored family: one child and its parent set.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyScore {
    pub child: usize,
    /// Sorted ascending.
    pub parents: Vec<usize>,
    pub log_score: f64,
}

/// Memo of family scores keyed by `(child, parent set)`.
///
/// One cache serves one `(data, gamma)` pair.
#[derive(Clone, Debug)]
pub struct FamilyCache {
    gamma: f64,
    scores: HashMap<(usize, u64), f64>,
    capacity: Option<usize>,
    enabled: bool,
    hits: u64,
    misses: u64,
}

impl FamilyCache {
    pub fn new(gamma: f64) -> Self {
        FamilyCache {
            gamma,
            scores: HashMap::new(),
            capacity: None,
            enabled: true,
            hits: 0,
            misses: 0,
        }
    }

    /// Stop inserting once `capacity` families are stored.
    pub fn with_capacity_limit(mut self, capacity: usize) -> Self {
        self.capacity = Some(capacity);
        self
    }

    /// A pass-through cache that always recomputes.
    pub fn disabled(gamma: f64) -> Self {
        FamilyCache {
            enabled: false,
            ..FamilyCache::new(gamma)
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn score(&mut self, data: &DataMatrix, child: usize, parents: u64) -> f64 {
        if !self.enabled {
            self.misses += 1;
            return family_log_score(data, child, parents, self.gamma);
        }
        if let Some(&s) = self.scores.get(&(child, parents)) {
            self.hits += 1;
            return s;
        }
        self.misses += 1;
        let s = family_log_score(data, child, parents, self.gamma);
        if self.capacity.is_none_or(|cap| self.scores.len() < cap) {
            self.scores.insert((child, parents), s);
        }
        s
    }

    /// Sum of cached family scores over all children of `g`.
    pub fn log_likelihood(&mut self, g: &Dag, data: &DataMatrix) -> f64 {
        (0..g.d()).map(|j| self.score(data, j, g.parent_mask(j))).sum()
    }
}

/// Score of `child` with the given parents (any order, duplicates ignored).
pub fn family_cache_lookup(
    child: usize,
    parents: &[usize],
    data: &DataMatrix,
    cache: &mut FamilyCache,
) -> FamilyScore {
    let mask = parents.iter().fold(0u64, |m, &p| m | 1 << p);
    let log_score = cache.score(data, child, mask);
    FamilyScore {
        child,
        parents: (0..data.d()).filter(|&k| mask >> k & 1 == 1).collect(),
        log_score,
    }
}

/// `ln P(x | G + (i -> j)) - ln P(x | G)`; only child `j`'s family changes.
pub fn ch_log_ratio_toggle(
    g_minus: &Dag,
    i: usize,
    j: usize,
    data: &DataMatrix,
    cache: &mut FamilyCache,
) -> Result<f64> {
    if g_minus.has_edge(i, j) {
        return Err(Error::IllegalEdge {
            from: i,
            to: j,
            reason: "edge already present",
        });
    }
    if i == j || g_minus.creates_cycle(i, j) {
        return Err(Error::IllegalEdge {
            from: i,
            to: j,
            reason: "creates a directed cycle",
        });
    }
    let without = g_minus.parent_mask(j);
    let with = without | 1 << i;
    Ok(cache.score(data, j, with) - cache.score(data, j, without))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct product form over every parent configuration, including empty
    /// ones.
    fn brute_force_family(data: &DataMatrix, child: usize, parents: &[usize], gamma: f64) -> f64 {
        let p = data.cards()[child];
        let q: usize = parents.iter().map(|&k| data.cards()[k]).product();
        let mut total = 0.0;
        for l in 0..q {
            // decode mixed radix with the first parent most significant
            let mut rem = l;
            let mut config = vec![0u32; parents.len()];
            for (t, &k) in parents.iter().enumerate().rev() {
                config[t] = (rem % data.cards()[k]) as u32;
                rem /= data.cards()[k];
            }
            let rows: Vec<usize> = (0..data.n())
                .filter(|&r| parents.iter().zip(&config).all(|(&k, &v)| data.column(k)[r] == v))
                .collect();
            let n_l = rows.len() as f64;
            total += ln_gamma(p as f64 * gamma) - ln_gamma(n_l + p as f64 * gamma);
            for i in 0..p {
                let n_il = rows.iter().filter(|&&r| data.column(child)[r] == i as u32).count();
                total += ln_gamma(gamma + n_il as f64) - ln_gamma(gamma);
            }
        }
        total
    }

    fn random_data(n: usize, cards: &[usize], seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<u32>> = (0..n)
            .map(|_| cards.iter().map(|&p| rng.random_range(0..p as u32)).collect())
            .collect();
        DataMatrix::from_rows(&rows, cards.to_vec()).unwrap()
    }

    #[test]
    fn single_binary_observation() {
        let data = DataMatrix::from_rows(&[vec![1]], vec![2]).unwrap();
        let ll = ch_log_likelihood(&Dag::empty(1), &data, 1.0);
        assert!((ll - 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn no_rows_gives_zero() {
        let data = DataMatrix::empty(vec![2, 3]).unwrap();
        let g = Dag::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(ch_log_likelihood(&g, &data, 1.0), 0.0);
    }

    #[test]
    fn family_matches_brute_force() {
        let data = random_data(40, &[2, 3, 2, 4], 3);
        for (child, parents) in [(0, vec![]), (1, vec![0]), (3, vec![0, 1, 2]), (2, vec![1, 3])] {
            let mask = parents.iter().fold(0u64, |m, &p| m | 1 << p);
            for gamma in [0.5, 1.0, 3.0] {
                let fast = family_log_score(&data, child, mask, gamma);
                let slow = brute_force_family(&data, child, &parents, gamma);
                assert!((fast - slow).abs() < 1e-10, "{child} {parents:?}");
            }
        }
    }

    #[test]
    fn cache_memoises_and_uses_set_semantics() {
        let data = random_data(30, &[2, 2, 2], 1);
        let mut cache = FamilyCache::new(1.0);
        let a = family_cache_lookup(2, &[1, 0], &data, &mut cache);
        assert_eq!((cache.hits(), cache.misses()), (0, 1));
        let b = family_cache_lookup(2, &[0, 1, 0], &data, &mut cache);
        assert_eq!((cache.hits(), cache.misses()), (1, 1));
        assert_eq!(a, b);
        assert_eq!(a.parents, vec![0, 1]);
        assert!(a.log_score <= 0.0);
    }

    #[test]
    fn capped_cache_still_scores() {
        let data = random_data(30, &[2, 2, 2], 2);
        let mut cache = FamilyCache::new(1.0).with_capacity_limit(1);
        let s0 = cache.score(&data, 0, 0);
        let s1 = cache.score(&data, 1, 1);
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.score(&data, 1, 1), s1);
        assert_eq!(cache.score(&data, 0, 0), s0);
    }

    #[test]
    fn toggle_ratio_antisymmetry_and_errors() {
        let data = random_data(60, &[2, 2, 3], 4);
        let mut cache = FamilyCache::new(1.0);
        let g = Dag::from_edges(3, &[(0, 1)]).unwrap();
        let up = ch_log_ratio_toggle(&g, 1, 2, &data, &mut cache).unwrap();
        let mut plus = g.clone();
        plus.add_edge(1, 2).unwrap();
        let full = ch_log_likelihood(&plus, &data, 1.0) - ch_log_likelihood(&g, &data, 1.0);
        assert!((up - full).abs() < 1e-10);
        assert!(ch_log_ratio_toggle(&g, 1, 0, &data, &mut cache).is_err());
        assert!(ch_log_ratio_toggle(&g, 0, 1, &data, &mut cache).is_err());
    }

    #[test]
    fn csv_roundtrip_and_inference() {
        let data = random_data(25, &[2, 3, 2], 5);
        let mut buf = Vec::new();
        data.write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("card:2,3,2\n"));
        assert_eq!(DataMatrix::parse_csv(buf.as_slice()).unwrap(), data);

        let inferred = DataMatrix::parse_csv("0,1\n0,2\n0,0\n".as_bytes()).unwrap();
        assert_eq!(inferred.cards(), &[2, 3]);
        assert!(DataMatrix::parse_csv("card:2,2\n0,2\n".as_bytes()).is_err());
        assert!(DataMatrix::parse_csv("card:2,2\n0\n".as_bytes()).is_err());
    }
}
