//! Dictionary-free indexed knowledge graph and the pruning transforms used
//! before embedding.
//!
//! Every original relation `r` in `0..R` is stored twice: directed relation
//! `r` maps a head to its tails and directed relation `R + r` maps a tail to
//! its heads. The row of node `i` in directed relation `k` is `N_k(i)`, the
//! set of nodes whose state is sent to `i` through `k`.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

pub type NodeId = u32;
pub type RelationId = u32;
pub type Triple = (NodeId, RelationId, NodeId);

/// Compressed rows of one directed relation. Only nodes with at least one
/// neighbour get a row.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelationAdjacency {
    rows: Vec<NodeId>,
    offsets: Vec<usize>,
    cols: Vec<NodeId>,
}

impl RelationAdjacency {
    fn from_sorted_pairs(pairs: &[(NodeId, NodeId)]) -> Self {
        let mut adj = RelationAdjacency { rows: Vec::new(), offsets: vec![0], cols: Vec::with_capacity(pairs.len()) };
        for (k, &(src, dst)) in pairs.iter().enumerate() {
            if k == 0 || pairs[k - 1].0 != src {
                if k > 0 {
                    adj.offsets.push(adj.cols.len());
                }
                adj.rows.push(src);
            }
            adj.cols.push(dst);
        }
        if !pairs.is_empty() {
            adj.offsets.push(adj.cols.len());
        }
        adj
    }

    /// Number of nodes with a nonempty neighbour list.
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn edge_count(&self) -> usize {
        self.cols.len()
    }

    /// Iterates `(node, sorted neighbours)` for nodes with neighbours, ascending by node.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (NodeId, &[NodeId])> + '_ {
        self.rows
            .iter()
            .enumerate()
            .map(move |(k, &i)| (i, &self.cols[self.offsets[k]..self.offsets[k + 1]]))
    }

    pub fn row_at(&self, k: usize) -> (NodeId, &[NodeId]) {
        (self.rows[k], &self.cols[self.offsets[k]..self.offsets[k + 1]])
    }

    pub fn neighbours(&self, node: NodeId) -> &[NodeId] {
        match self.rows.binary_search(&node) {
            Ok(k) => &self.cols[self.offsets[k]..self.offsets[k + 1]],
            Err(_) => &[],
        }
    }
}

/// Immutable indexed graph with forward and inverse adjacency for every relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphIndex {
    entity_count: usize,
    relation_count: usize,
    /// `2 * relation_count` entries; see the module docs for the layout.
    adjacency: Vec<RelationAdjacency>,
    /// Incident original edges per node (in + out).
    degrees: Vec<u32>,
    /// Union of neighbours over all directed relations, excluding the node itself.
    undirected_offsets: Vec<usize>,
    undirected: Vec<NodeId>,
}

/// Accumulates id triples and freezes them into a [`GraphIndex`].
///
/// Self-loops are dropped and duplicate triples collapse to one edge.
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    entity_count: usize,
    relation_count: usize,
    triples: Vec<Triple>,
    dropped_self_loops: usize,
}

impl GraphBuilder {
    pub fn new(entity_count: usize, relation_count: usize) -> Self {
        Self { entity_count, relation_count, ..Self::default() }
    }

    /// Grows the entity/relation ranges when ids exceed them.
    pub fn push(&mut self, (h, r, t): Triple) {
        self.entity_count = self.entity_count.max(h as usize + 1).max(t as usize + 1);
        self.relation_count = self.relation_count.max(r as usize + 1);
        if h == t {
            self.dropped_self_loops += 1;
            return;
        }
        self.triples.push((h, r, t));
    }

    pub fn ensure_entities(&mut self, n: usize) {
        self.entity_count = self.entity_count.max(n);
    }

    pub fn ensure_relations(&mut self, n: usize) {
        self.relation_count = self.relation_count.max(n);
    }

    pub fn dropped_self_loops(&self) -> usize {
        self.dropped_self_loops
    }

    pub fn build(self) -> GraphIndex {
        GraphIndex::from_triples(self.entity_count, self.relation_count, self.triples)
    }
}

impl GraphIndex {
    /// Builds the index, dropping self-loops and duplicates. Panics on out-of-range ids.
    pub fn from_triples(entity_count: usize, relation_count: usize, mut triples: Vec<Triple>) -> Self {
        triples.retain(|&(h, _, t)| h != t);
        for &(h, r, t) in &triples {
            assert!(
                (h as usize) < entity_count && (t as usize) < entity_count && (r as usize) < relation_count,
                "triple ({h}, {r}, {t}) out of range"
            );
        }
        triples.sort_unstable_by_key(|&(h, r, t)| (r, h, t));
        triples.dedup();

        let mut degrees = vec![0u32; entity_count];
        for &(h, _, t) in &triples {
            degrees[h as usize] += 1;
            degrees[t as usize] += 1;
        }

        let mut adjacency = Vec::with_capacity(2 * relation_count);
        let mut pairs: Vec<(NodeId, NodeId)> = Vec::new();
        let mut start = 0;
        let mut forward_ranges = Vec::with_capacity(relation_count);
        for r in 0..relation_count as RelationId {
            let end = start + triples[start..].iter().take_while(|t| t.1 == r).count();
            forward_ranges.push((start, end));
            pairs.clear();
            pairs.extend(triples[start..end].iter().map(|&(h, _, t)| (h, t)));
            adjacency.push(RelationAdjacency::from_sorted_pairs(&pairs));
            start = end;
        }
        for &(s, e) in &forward_ranges {
            pairs.clear();
            pairs.extend(triples[s..e].iter().map(|&(h, _, t)| (t, h)));
            pairs.sort_unstable();
            adjacency.push(RelationAdjacency::from_sorted_pairs(&pairs));
        }

        pairs.clear();
        pairs.reserve(2 * triples.len());
        for &(h, _, t) in &triples {
            pairs.push((h, t));
            pairs.push((t, h));
        }
        drop(triples);
        pairs.sort_unstable();
        pairs.dedup();
        let mut undirected_offsets = vec![0usize; entity_count + 1];
        for &(a, _) in &pairs {
            undirected_offsets[a as usize + 1] += 1;
        }
        for i in 0..entity_count {
            undirected_offsets[i + 1] += undirected_offsets[i];
        }
        let undirected = pairs.into_iter().map(|(_, b)| b).collect();

        GraphIndex { entity_count, relation_count, adjacency, degrees, undirected_offsets, undirected }
    }

    pub fn empty() -> Self {
        Self::from_triples(0, 0, Vec::new())
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }

    /// Count of original relations; the index holds twice as many directed relations.
    pub fn relation_count(&self) -> usize {
        self.relation_count
    }

    pub fn directed_relation_count(&self) -> usize {
        2 * self.relation_count
    }

    /// Number of distinct original (non-inverse) edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency[..self.relation_count].iter().map(RelationAdjacency::edge_count).sum()
    }

    pub fn adjacency(&self, directed: usize) -> &RelationAdjacency {
        &self.adjacency[directed]
    }

    pub fn directed(&self) -> &[RelationAdjacency] {
        &self.adjacency
    }

    /// Directed relation id of the inverse of `directed`.
    pub fn inverse_of(&self, directed: usize) -> usize {
        if directed < self.relation_count {
            directed + self.relation_count
        } else {
            directed - self.relation_count
        }
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn degree(&self, node: NodeId) -> u32 {
        self.degrees[node as usize]
    }

    /// Distinct neighbours of `node` over all directed relations.
    pub fn neighbours(&self, node: NodeId) -> &[NodeId] {
        let i = node as usize;
        &self.undirected[self.undirected_offsets[i]..self.undirected_offsets[i + 1]]
    }

    /// Original triples, sorted by `(relation, head, tail)`.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.adjacency[..self.relation_count].iter().enumerate().flat_map(|(r, adj)| {
            adj.iter().flat_map(move |(h, ts)| ts.iter().map(move |&t| (h, r as RelationId, t)))
        })
    }

    /// Edge count of each original relation.
    pub fn relation_edge_counts(&self) -> Vec<usize> {
        self.adjacency[..self.relation_count].iter().map(RelationAdjacency::edge_count).collect()
    }

    pub fn contains(&self, (h, r, t): Triple) -> bool {
        (r as usize) < self.relation_count
            && (h as usize) < self.entity_count
            && self.adjacency[r as usize].neighbours(h).binary_search(&t).is_ok()
    }

    pub fn stats(&self) -> GraphStats {
        let entities = self.entity_count;
        let edges = self.edge_count();
        let per_node = |x: usize| if entities == 0 { 0.0 } else { x as f64 / entities as f64 };
        GraphStats {
            entities,
            relations: self.relation_count,
            edges,
            mean_degree_edges_per_node: per_node(edges),
            mean_degree_incident: per_node(2 * edges),
            max_degree: self.degrees.iter().copied().max().unwrap_or(0),
        }
    }

    /// Checks the structural invariants. Used by tests and after deserialisation.
    pub fn validate(&self) -> Result<()> {
        let n = self.entity_count;
        if self.adjacency.len() != 2 * self.relation_count {
            return Err(invalid("adjacency must hold forward and inverse relations"));
        }
        if self.degrees.len() != n || self.undirected_offsets.len() != n + 1 {
            return Err(invalid("per-node arrays have wrong length"));
        }
        for (k, adj) in self.adjacency.iter().enumerate() {
            if adj.offsets.len() != adj.rows.len() + 1 && !(adj.rows.is_empty() && adj.offsets.len() == 1) {
                return Err(invalid("adjacency offsets inconsistent"));
            }
            if !adj.rows.windows(2).all(|w| w[0] < w[1]) {
                return Err(invalid("adjacency rows not strictly ascending"));
            }
            for (i, ns) in adj.iter() {
                if ns.is_empty() || !ns.windows(2).all(|w| w[0] < w[1]) {
                    return Err(invalid("neighbour list empty, unsorted or duplicated"));
                }
                if i as usize >= n || ns.iter().any(|&j| j as usize >= n || j == i) {
                    return Err(invalid("node id out of range or self-loop"));
                }
                let inv = &self.adjacency[self.inverse_of(k)];
                if ns.iter().any(|&j| inv.neighbours(j).binary_search(&i).is_err()) {
                    return Err(invalid("forward/inverse mirror broken"));
                }
            }
        }
        Ok(())
    }

    /// Raw arrays for serialisation, in a stable order.
    pub fn raw_parts(&self) -> RawGraph<'_> {
        RawGraph {
            entity_count: self.entity_count,
            relation_count: self.relation_count,
            degrees: &self.degrees,
            adjacency: self.adjacency.iter().map(|a| (&a.rows[..], &a.offsets[..], &a.cols[..])).collect(),
        }
    }
}

/// Borrowed CSR arrays of a [`GraphIndex`].
pub struct RawGraph<'a> {
    pub entity_count: usize,
    pub relation_count: usize,
    pub degrees: &'a [u32],
    /// `(rows, offsets, cols)` per directed relation.
    pub adjacency: Vec<(&'a [NodeId], &'a [usize], &'a [NodeId])>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphStats {
    pub entities: usize,
    pub relations: usize,
    pub edges: usize,
    /// `|E| / |V|`.
    pub mean_degree_edges_per_node: f64,
    /// `2|E| / |V|`, the mean of in + out degree.
    pub mean_degree_incident: f64,
    pub max_degree: u32,
}

/// Maps between node ids before and after a transform.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdMap {
    /// Old id of each new node.
    pub new_to_old: Vec<NodeId>,
    /// New id of each old node, if it survived.
    pub old_to_new: Vec<Option<NodeId>>,
}

impl IdMap {
    fn from_kept(old_count: usize, keep: &[bool]) -> Self {
        let mut new_to_old = Vec::new();
        let mut old_to_new = vec![None; old_count];
        for (i, &k) in keep.iter().enumerate() {
            if k {
                old_to_new[i] = Some(new_to_old.len() as NodeId);
                new_to_old.push(i as NodeId);
            }
        }
        IdMap { new_to_old, old_to_new }
    }

    pub fn map(&self, old: NodeId) -> Option<NodeId> {
        self.old_to_new.get(old as usize).copied().flatten()
    }

    /// Composes `self` (a -> b) with `next` (b -> c) into a -> c.
    pub fn then(&self, next: &IdMap) -> IdMap {
        let new_to_old = next.new_to_old.iter().map(|&b| self.new_to_old[b as usize]).collect();
        let old_to_new = self.old_to_new.iter().map(|b| b.and_then(|b| next.map(b))).collect();
        IdMap { new_to_old, old_to_new }
    }
}

fn induced(g: &GraphIndex, keep: &[bool]) -> (GraphIndex, IdMap) {
    let map = IdMap::from_kept(g.entity_count, keep);
    let triples = g
        .triples()
        .filter_map(|(h, r, t)| Some((map.map(h)?, r, map.map(t)?)))
        .collect();
    (GraphIndex::from_triples(map.new_to_old.len(), g.relation_count, triples), map)
}

/// Subgraph induced on nodes within `hops` undirected hops of any seed.
/// Surviving nodes keep their relative order.
pub fn prune_khop(g: &GraphIndex, seeds: &[NodeId], hops: usize) -> Result<(GraphIndex, IdMap)> {
    if seeds.is_empty() {
        return Err(invalid("k-hop pruning needs at least one seed node"));
    }
    if hops == 0 {
        return Err(invalid("hop count must be at least 1"));
    }
    let mut dist = vec![usize::MAX; g.entity_count];
    let mut queue = VecDeque::new();
    for &s in seeds {
        let i = s as usize;
        if i >= g.entity_count {
            return Err(invalid(alloc::format!("seed node {s} out of range")));
        }
        if dist[i] != 0 {
            dist[i] = 0;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        let d = dist[u as usize];
        if d == hops {
            continue;
        }
        for &v in g.neighbours(u) {
            if dist[v as usize] == usize::MAX {
                dist[v as usize] = d + 1;
                queue.push_back(v);
            }
        }
    }
    let keep: Vec<bool> = dist.iter().map(|&d| d != usize::MAX).collect();
    Ok(induced(g, &keep))
}

/// Removes every unprotected node whose degree is at most `threshold`, in one pass.
pub fn cut_low_degree(g: &GraphIndex, threshold: u32, protected: &[NodeId]) -> (GraphIndex, IdMap) {
    let mut keep: Vec<bool> = g.degrees.iter().map(|&d| d > threshold).collect();
    for &p in protected {
        if let Some(k) = keep.get_mut(p as usize) {
            *k = true;
        }
    }
    induced(g, &keep)
}

/// Restricts the graph to the listed original relations, renumbered densely in
/// ascending order. Returns the new graph and the old id of each kept relation.
pub fn filter_relations(g: &GraphIndex, keep: &[RelationId]) -> Result<(GraphIndex, Vec<RelationId>)> {
    if keep.is_empty() {
        return Err(invalid("relation filter must keep at least one relation"));
    }
    let mut kept: Vec<RelationId> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&bad) = kept.iter().find(|&&r| r as usize >= g.relation_count) {
        return Err(Error::InvalidInput(alloc::format!("unknown relation id {bad}")));
    }
    let mut remap = vec![None; g.relation_count];
    for (new, &old) in kept.iter().enumerate() {
        remap[old as usize] = Some(new as RelationId);
    }
    let triples = g.triples().filter_map(|(h, r, t)| Some((h, remap[r as usize]?, t))).collect();
    Ok((GraphIndex::from_triples(g.entity_count, kept.len(), triples), kept))
}

/// Relations whose importance is at least `fraction` of the maximum score.
pub fn relations_above_fraction(scores: &[(RelationId, f64)], fraction: f64) -> Vec<RelationId> {
    let max = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<RelationId> = scores.iter().filter(|s| s.1 >= fraction * max).map(|s| s.0).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Train/validation/test node sets with class labels.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabeledSplit {
    pub train: Vec<(NodeId, u32)>,
    pub valid: Vec<(NodeId, u32)>,
    pub test: Vec<(NodeId, u32)>,
    pub class_count: usize,
}

impl LabeledSplit {
    pub fn validate(&self, entity_count: usize) -> Result<()> {
        let mut seen = vec![false; entity_count];
        for &(node, label) in self.train.iter().chain(&self.valid).chain(&self.test) {
            let i = node as usize;
            if i >= entity_count {
                return Err(invalid(alloc::format!("labelled node {node} out of range")));
            }
            if label as usize >= self.class_count {
                return Err(invalid(alloc::format!("label {label} outside [0, {})", self.class_count)));
            }
            if seen[i] {
                return Err(invalid(alloc::format!("node {node} appears in more than one split")));
            }
            seen[i] = true;
        }
        Ok(())
    }

    pub fn labelled_nodes(&self) -> Vec<NodeId> {
        self.train.iter().chain(&self.valid).chain(&self.test).map(|p| p.0).collect()
    }

    /// Renumbers nodes after a transform; every labelled node must survive.
    pub fn remap(&self, map: &IdMap) -> Result<LabeledSplit> {
        let f = |v: &[(NodeId, u32)]| -> Result<Vec<(NodeId, u32)>> {
            v.iter()
                .map(|&(n, l)| {
                    map.map(n)
                        .map(|m| (m, l))
                        .ok_or_else(|| invalid(alloc::format!("labelled node {n} was removed")))
                })
                .collect()
        };
        Ok(LabeledSplit { train: f(&self.train)?, valid: f(&self.valid)?, test: f(&self.test)?, class_count: self.class_count })
    }
}

/// Train/validation/test triple sets for link prediction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripleSplit {
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl TripleSplit {
    pub fn validate(&self, entity_count: usize, relation_count: usize) -> Result<()> {
        let mut all: Vec<Triple> = Vec::new();
        for part in [&self.train, &self.valid, &self.test] {
            let mut p = part.clone();
            p.sort_unstable();
            p.dedup();
            all.extend(p);
        }
        for &(h, r, t) in &all {
            if h as usize >= entity_count || t as usize >= entity_count || r as usize >= relation_count {
                return Err(invalid(alloc::format!("triple ({h}, {r}, {t}) out of range")));
            }
        }
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        if all.len() != n {
            return Err(invalid("triple splits overlap"));
        }
        Ok(())
    }

    /// Every triple of every split, sorted and deduplicated.
    pub fn all_known(&self) -> Vec<Triple> {
        let mut all: Vec<Triple> = self.train.iter().chain(&self.valid).chain(&self.test).copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}
