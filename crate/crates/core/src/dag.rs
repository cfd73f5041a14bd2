//! Directed acyclic graphs over a small labelled node set, and their layerings.
//!
//! Adjacency is held as one parent bitmask and one child bitmask per node, so a
//! graph on `d <= 64` nodes costs `2d` words and edge queries are a single
//! bit test.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Largest node count a [`Dag`] can hold.
pub const MAX_NODES: usize = 64;

/// Largest number of classes [`count_compatible_orderings`] accepts.
pub const MAX_ORDERING_CLASSES: usize = 24;

#[inline]
fn bit(i: usize) -> u64 {
    1u64 << i
}

fn iter_bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

/// Kahn topological sort over parent masks; `None` when a cycle exists.
fn kahn_order(parents: &[u64], children: &[u64]) -> Option<Vec<usize>> {
    let d = parents.len();
    let mut indeg: Vec<u32> = parents.iter().map(|p| p.count_ones()).collect();
    let mut queue: Vec<usize> = (0..d).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(d);
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        order.push(v);
        for c in iter_bits(children[v]) {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                queue.push(c);
            }
        }
    }
    (order.len() == d).then_some(order)
}

/// True when the directed graph on `d` nodes with the given edge list has no
/// directed cycle. Self-loops count as cycles.
pub fn is_acyclic_edges(d: usize, edges: &[(usize, usize)]) -> bool {
    assert!(d <= MAX_NODES, "at most {MAX_NODES} nodes supported");
    let mut parents = vec![0u64; d];
    let mut children = vec![0u64; d];
    for &(i, j) in edges {
        assert!(i < d && j < d, "edge ({i}, {j}) out of range");
        if i == j {
            return false;
        }
        parents[j] |= bit(i);
        children[i] |= bit(j);
    }
    kahn_order(&parents, &children).is_some()
}

/// A directed acyclic graph on nodes `0..d`.
///
/// Every constructor and mutator keeps the graph acyclic and free of
/// self-loops.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dag {
    parents: Vec<u64>,
    children: Vec<u64>,
}

impl Dag {
    pub fn empty(d: usize) -> Self {
        assert!(d <= MAX_NODES, "at most {MAX_NODES} nodes supported");
        Dag {
            parents: vec![0; d],
            children: vec![0; d],
        }
    }

    /// Build from 0-based `(from, to)` pairs. Duplicate edges are ignored.
    pub fn from_edges(d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if d > MAX_NODES {
            return Err(Error::TooManyNodes(d));
        }
        let mut g = Dag::empty(d);
        for &(i, j) in edges {
            g.check_pair(i, j)?;
            g.set_edge_unchecked(i, j);
        }
        if !g.is_acyclic() {
            return Err(Error::NotADag);
        }
        Ok(g)
    }

    /// Build from a dense 0/1 matrix where `rows[i][j]` means `i -> j`.
    pub fn from_matrix(rows: &[Vec<u8>]) -> Result<Self> {
        let d = rows.len();
        let mut edges = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => edges.push((i, j)),
                    other => {
                        return Err(Error::parse(
                            "adjacency matrix",
                            format!("entry ({i}, {j}) is {other}, expected 0 or 1"),
                        ))
                    }
                }
            }
        }
        Dag::from_edges(d, &edges)
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        let d = self.d();
        for node in [i, j] {
            if node >= d {
                return Err(Error::NodeOutOfRange { node, d });
            }
        }
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        Ok(())
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.parents.len()
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.children[i] & bit(j) != 0
    }

    #[inline]
    pub fn parent_mask(&self, j: usize) -> u64 {
        self.parents[j]
    }

    #[inline]
    pub fn child_mask(&self, i: usize) -> u64 {
        self.children[i]
    }

    pub fn parents(&self, j: usize) -> impl Iterator<Item = usize> {
        iter_bits(self.parents[j])
    }

    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> {
        iter_bits(self.children[i])
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(|c| c.count_ones() as usize).sum()
    }

    /// All edges in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.d()).flat_map(move |i| self.children(i).map(move |j| (i, j)))
    }

    /// Whether `to` is reachable from `from` along directed edges (a node
    /// reaches itself).
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = bit(from);
        let mut frontier = bit(from);
        while frontier != 0 {
            let mut next = 0u64;
            for v in iter_bits(frontier) {
                next |= self.children[v];
            }
            next &= !seen;
            if next & bit(to) != 0 {
                return true;
            }
            seen |= next;
            frontier = next;
        }
        false
    }

    /// Whether inserting `i -> j` would close a directed cycle.
    pub fn creates_cycle(&self, i: usize, j: usize) -> bool {
        self.reaches(j, i)
    }

    /// Insert `i -> j`. Adding an edge that is already present is a no-op.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_pair(i, j)?;
        if self.has_edge(i, j) {
            return Ok(());
        }
        if self.creates_cycle(i, j) {
            return Err(Error::IllegalEdge {
                from: i,
                to: j,
                reason: "creates a directed cycle",
            });
        }
        self.set_edge_unchecked(i, j);
        Ok(())
    }

    /// Remove `i -> j`, returning whether it was present.
    pub fn remove_edge(&mut self, i: usize, j: usize) -> bool {
        let present = self.has_edge(i, j);
        self.children[i] &= !bit(j);
        self.parents[j] &= !bit(i);
        present
    }

    /// Caller guarantees the edge keeps the graph acyclic.
    #[inline]
    pub(crate) fn set_edge_unchecked(&mut self, i: usize, j: usize) {
        debug_assert!(i != j);
        self.children[i] |= bit(j);
        self.parents[j] |= bit(i);
    }

    pub fn is_acyclic(&self) -> bool {
        kahn_order(&self.parents, &self.children).is_some()
    }

    pub fn topological_order(&self) -> Vec<usize> {
        kahn_order(&self.parents, &self.children).expect("Dag invariant: acyclic")
    }

    /// Longest-path layering: parentless nodes get rank 0, every other node
    /// one more than its highest parent.
    pub fn minimal_layering(&self) -> Layering {
        let mut ranks = vec![0usize; self.d()];
        for v in self.topological_order() {
            ranks[v] = self
                .parents(v)
                .map(|p| ranks[p] + 1)
                .max()
                .unwrap_or(0);
        }
        Layering::from_contiguous_ranks(ranks)
    }

    /// Dense 0/1 matrix.
    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.d())
            .map(|i| (0..self.d()).map(|j| self.has_edge(i, j) as u8).collect())
            .collect()
    }

    /// Text form: `d` on the first line, then `d` rows of `d` space-separated
    /// 0/1 entries.
    pub fn to_adjacency_text(&self) -> String {
        let mut out = format!("{}\n", self.d());
        for row in self.to_matrix() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse_adjacency_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("adjacency matrix", "empty input"))?;
        let d: usize = header
            .parse()
            .map_err(|_| Error::parse("adjacency matrix", format!("bad header {header:?}")))?;
        let mut rows = Vec::with_capacity(d);
        for line in lines.by_ref().take(d) {
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<u8>().map_err(|_| {
                        Error::parse("adjacency matrix", format!("bad entry {tok:?}"))
                    })
                })
                .collect::<Result<Vec<u8>>>()?;
            rows.push(row);
        }
        if rows.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: rows.len(),
            });
        }
        if lines.next().is_some() {
            return Err(Error::parse("adjacency matrix", "trailing rows after matrix"));
        }
        Dag::from_matrix(&rows)
    }

    pub fn read_adjacency(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Dag::parse_adjacency_text(&text)
    }

    pub fn write_adjacency(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_adjacency_text()).map_err(|e| Error::io(path, e))
    }
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // 1-based node labels
        let edges: Vec<String> = self
            .edges()
            .map(|(i, j)| format!("{}->{}", i + 1, j + 1))
            .collect();
        write!(f, "Dag(d={}, [{}])", self.d(), edges.join(", "))
    }
}

/// Assignment of nodes to ordered classes.
///
/// `classes[v]` is the class label of node `v` and `order[c]` the position
/// (0-based rank) of class `c` in the class ordering. For a layering produced
/// by [`Dag::minimal_layering`] the labels are the ranks themselves and
/// `order` is the identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Layering {
    classes: Vec<usize>,
    order: Vec<usize>,
    counts: Vec<usize>,
}

impl Layering {
    /// Class labels must cover `0..K` with no empty class; `order` must be a
    /// permutation of `0..K`.
    pub fn new(classes: Vec<usize>, order: Vec<usize>) -> Result<Self> {
        let k = order.len();
        let mut counts = vec![0usize; k];
        for (v, &c) in classes.iter().enumerate() {
            if c >= k {
                return Err(Error::InfeasiblePartition(format!(
                    "node {v} has class {c} but only {k} classes are ordered"
                )));
            }
            counts[c] += 1;
        }
        if let Some(c) = counts.iter().position(|&m| m == 0) {
            return Err(Error::InfeasiblePartition(format!("class {c} is empty")));
        }
        let mut seen = vec![false; k];
        for &p in &order {
            if p >= k || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidParameter(format!(
                    "class ordering {order:?} is not a permutation"
                )));
            }
        }
        Ok(Layering {
            classes,
            order,
            counts,
        })
    }

    /// Layering whose labels are ranks, which must be contiguous from 0.
    pub fn from_ranks(ranks: Vec<usize>) -> Result<Self> {
        let k = ranks.iter().max().map_or(0, |&r| r + 1);
        Layering::new(ranks, (0..k).collect())
    }

    pub(crate) fn from_contiguous_ranks(ranks: Vec<usize>) -> Self {
        let k = ranks.iter().max().map_or(0, |&r| r + 1);
        let mut counts = vec![0usize; k];
        for &r in &ranks {
            counts[r] += 1;
        }
        debug_assert!(counts.iter().all(|&m| m > 0), "ranks not contiguous");
        Layering {
            classes: ranks,
            order: (0..k).collect(),
            counts,
        }
    }

    pub fn d(&self) -> usize {
        self.classes.len()
    }

    pub fn num_classes(&self) -> usize {
        self.order.len()
    }

    pub fn class_of(&self, v: usize) -> usize {
        self.classes[v]
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Occupation count per class label.
    pub fn class_sizes(&self) -> &[usize] {
        &self.counts
    }

    /// 0-based rank of node `v`.
    #[inline]
    pub fn rank(&self, v: usize) -> usize {
        self.order[self.classes[v]]
    }

    pub fn ranks(&self) -> Vec<usize> {
        (0..self.d()).map(|v| self.rank(v)).collect()
    }

    /// Occupation count per rank, lowest rank first.
    pub fn sizes_by_rank(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_classes()];
        for (c, &pos) in self.order.iter().enumerate() {
            sizes[pos] = self.counts[c];
        }
        sizes
    }

    /// Bitmask of nodes at each rank.
    pub fn rank_masks(&self) -> Vec<u64> {
        let mut masks = vec![0u64; self.num_classes()];
        for v in 0..self.d() {
            masks[self.rank(v)] |= bit(v);
        }
        masks
    }

    /// Class labels relabelled by first occurrence (`z_1 = 0`, each new label
    /// one above the running maximum), i.e. the urn-order form of the same
    /// partition.
    pub fn canonical_classes(&self) -> Vec<usize> {
        canonical_labels(&self.classes)
    }
}

/// Relabel an arbitrary class vector by order of first occurrence.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Number of orderings of the classes in `z` under which every edge of `g`
/// goes from an earlier class to a later one.
///
/// Classes are labelled `0..K`. Counted exactly by dynamic programming over
/// subsets of classes (the number of linear extensions of the induced class
/// precedence relation).
pub fn count_compatible_orderings(g: &Dag, z: &[usize]) -> Result<u128> {
    if z.len() != g.d() {
        return Err(Error::DimensionMismatch {
            expected: g.d(),
            got: z.len(),
        });
    }
    let k = z.iter().max().map_or(0, |&c| c + 1);
    if k > MAX_ORDERING_CLASSES {
        return Err(Error::InvalidParameter(format!(
            "{k} classes exceeds the ordering-count limit of {MAX_ORDERING_CLASSES}"
        )));
    }
    let mut present = vec![false; k];
    for &c in z {
        present[c] = true;
    }
    if present.iter().any(|p| !p) {
        return Err(Error::InfeasiblePartition(
            "class labels are not contiguous".into(),
        ));
    }
    // pred[b]: classes that must precede b
    let mut pred = vec![0u32; k];
    for (i, j) in g.edges() {
        let (a, b) = (z[i], z[j]);
        if a == b {
            return Err(Error::IncompatiblePartition(format!(
                "edge {} -> {} lies within class {a}",
                i + 1,
                j + 1
            )));
        }
        pred[b] |= 1 << a;
    }
    let full = (1usize << k) - 1;
    let mut ways = vec![0u128; full + 1];
    ways[0] = 1;
    for mask in 0..full {
        let w = ways[mask];
        if w == 0 {
            continue;
        }
        for (c, &p) in pred.iter().enumerate() {
            let cb = 1usize << c;
            if mask & cb == 0 && (p as usize) & !mask == 0 {
                ways[mask | cb] += w;
            }
        }
    }
    match ways[full] {
        0 => Err(Error::IncompatiblePartition(
            "no class ordering is consistent with the edges".into(),
        )),
        n => Ok(n),
    }
}

/// Repair a minimal layering after the parent sets of `changed` nodes were
/// modified.
///
/// `layering` must be the minimal layering of the graph before the change.
/// Each changed node, and recursively every descendant whose rank moves, is
/// placed one above its highest remaining parent (rank 0 when parentless).
pub fn relayer_after_removal(g: &Dag, layering: &Layering, changed: &[usize]) -> Layering {
    let mut ranks = layering.ranks();
    let mut dirty = changed.iter().fold(0u64, |m, &v| m | bit(v));
    if dirty == 0 {
        return layering.clone();
    }
    for v in g.topological_order() {
        if dirty & bit(v) == 0 {
            continue;
        }
        let r = g.parents(v).map(|p| ranks[p] + 1).max().unwrap_or(0);
        if r != ranks[v] {
            ranks[v] = r;
            dirty |= g.child_mask(v);
        }
    }
    Layering::from_contiguous_ranks(ranks)
}

/// Every DAG on `d` labelled nodes, in increasing order of the row-major
/// off-diagonal bit pattern. Feasible for `d <= 5` (29281 graphs).
pub fn enumerate_dags(d: usize) -> Vec<Dag> {
    assert!(d <= 5, "exhaustive DAG enumeration is limited to d <= 5");
    let slots: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let mut out = Vec::new();
    for pattern in 0u64..(1u64 << slots.len()) {
        let mut g = Dag::empty(d);
        for (s, &(i, j)) in slots.iter().enumerate() {
            if pattern & bit(s) != 0 {
                g.set_edge_unchecked(i, j);
            }
        }
        if g.is_acyclic() {
            out.push(g);
        }
    }
    out
}
