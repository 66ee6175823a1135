//! Knowledge-graph data model: augmentation, adjacency building, k-hop
//! pruning, edge dropout and edge sampling.
//!
//! A graph with `R` relations is augmented in place of the convolution:
//! one inverse relation per relation plus a single self-loop relation,
//! `2R + 1` in total. Relation ids are laid out as `r` (data), `R + r`
//! (inverse of `r`) and `2R` (self-loop).

use crate::error::{Result, RgcnError};
use crate::sparse::{row_normalize, stack_horizontal, stack_vertical, SparseMatrix};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::HashSet;

/// A `(subject, relation, object)` edge with dense integer ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub s: usize,
    pub r: usize,
    pub o: usize,
}

impl Triple {
    pub fn new(s: usize, r: usize, o: usize) -> Self {
        Triple { s, r, o }
    }
}

/// Directed labelled multigraph with dense entity and relation ids.
/// Triples are deduplicated at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeGraph {
    entity_count: usize,
    relation_count: usize,
    triples: Vec<Triple>,
}

impl KnowledgeGraph {
    pub fn new(entity_count: usize, relation_count: usize, triples: Vec<Triple>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(triples.len());
        let mut unique = Vec::with_capacity(triples.len());
        for t in triples {
            if t.s >= entity_count || t.o >= entity_count {
                return Err(RgcnError::Data(format!(
                    "triple ({}, {}, {}) references entity out of range 0..{}",
                    t.s, t.r, t.o, entity_count
                )));
            }
            if t.r >= relation_count {
                return Err(RgcnError::Data(format!(
                    "triple ({}, {}, {}) references relation out of range 0..{}",
                    t.s, t.r, t.o, relation_count
                )));
            }
            if seen.insert(t) {
                unique.push(t);
            }
        }
        Ok(KnowledgeGraph {
            entity_count,
            relation_count,
            triples: unique,
        })
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }

    pub fn relation_count(&self) -> usize {
        self.relation_count
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }
}

/// A knowledge graph together with its implicit inverse and self-loop
/// relations. Constructing this from an already augmented graph is ruled
/// out by the type: [`augment`] only accepts a base [`KnowledgeGraph`].
#[derive(Debug, Clone)]
pub struct AugmentedGraph {
    base: KnowledgeGraph,
}

impl AugmentedGraph {
    pub fn base(&self) -> &KnowledgeGraph {
        &self.base
    }

    /// `2R + 1`.
    pub fn total_relations(&self) -> usize {
        2 * self.base.relation_count + 1
    }

    pub fn inverse_of(&self, r: usize) -> usize {
        self.base.relation_count + r
    }

    pub fn self_loop_relation(&self) -> usize {
        2 * self.base.relation_count
    }

    /// Total edges in the augmented graph: data + inverse + one self-loop
    /// per entity.
    pub fn edge_count(&self) -> usize {
        2 * self.base.triples.len() + self.base.entity_count
    }

    /// Materializes the augmented edge list (data, then inverses, then
    /// self-loops).
    pub fn edges(&self) -> Vec<Triple> {
        let mut out = Vec::with_capacity(self.edge_count());
        out.extend_from_slice(&self.base.triples);
        let inv_base = self.base.relation_count;
        out.extend(
            self.base
                .triples
                .iter()
                .map(|t| Triple::new(t.o, inv_base + t.r, t.s)),
        );
        let self_rel = self.self_loop_relation();
        out.extend((0..self.base.entity_count).map(|i| Triple::new(i, self_rel, i)));
        out
    }
}

/// Adds inverse edges and self-loops; the result carries `2R + 1` relations.
pub fn augment(g: &KnowledgeGraph) -> AugmentedGraph {
    AugmentedGraph { base: g.clone() }
}

/// How per-relation adjacency blocks are concatenated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StackMode {
    Vertical,
    Horizontal,
}

impl std::str::FromStr for StackMode {
    type Err = RgcnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vertical" => Ok(StackMode::Vertical),
            "horizontal" => Ok(StackMode::Horizontal),
            other => Err(RgcnError::Argument(format!(
                "invalid stacking mode '{other}' (expected vertical|horizontal)"
            ))),
        }
    }
}

/// Edge dropout rates. `data_rate` applies jointly to each data edge and
/// its paired inverse (they share one mask so no information leaks through
/// the inverse of a dropped edge); `self_loop_rate` applies to self-loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeDropoutConfig {
    pub data_rate: f64,
    pub self_loop_rate: f64,
}

impl EdgeDropoutConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [("data", self.data_rate), ("self_loop", self.self_loop_rate)] {
            if !(0.0..1.0).contains(&rate) {
                return Err(RgcnError::Argument(format!(
                    "{name} dropout rate {rate} outside [0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// Keeps exactly `floor(keep_fraction * n)` indices of `0..n`, chosen
/// uniformly without replacement.
fn keep_indices(n: usize, keep_fraction: f64, rng: &mut impl Rng) -> Vec<usize> {
    let keep = (keep_fraction * n as f64).floor() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(keep);
    idx.sort_unstable();
    idx
}

/// Builds the stacked, per-relation row-normalized adjacency matrix of an
/// augmented graph. When dropout is given, edges are removed first (the
/// inverse of a dropped data edge is dropped with it) and normalization
/// happens on the survivors.
pub fn build_adjacency(
    ag: &AugmentedGraph,
    mode: StackMode,
    dropout: Option<&EdgeDropoutConfig>,
    rng: &mut impl Rng,
) -> Result<SparseMatrix> {
    if let Some(cfg) = dropout {
        cfg.validate()?;
    }
    let n = ag.base().entity_count();
    let r_total = ag.total_relations();
    let data = ag.base().triples();

    let kept_data: Vec<Triple> = match dropout {
        Some(cfg) if cfg.data_rate > 0.0 => keep_indices(data.len(), 1.0 - cfg.data_rate, rng)
            .into_iter()
            .map(|i| data[i])
            .collect(),
        _ => data.to_vec(),
    };
    let kept_loops: Vec<usize> = match dropout {
        Some(cfg) if cfg.self_loop_rate > 0.0 => keep_indices(n, 1.0 - cfg.self_loop_rate, rng),
        _ => (0..n).collect(),
    };

    let inv_base = ag.base().relation_count();
    let self_rel = ag.self_loop_relation();
    let mut per_relation: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); r_total];
    for t in &kept_data {
        per_relation[t.r].push((t.s, t.o, 1.0));
        per_relation[inv_base + t.r].push((t.o, t.s, 1.0));
    }
    for &i in &kept_loops {
        per_relation[self_rel].push((i, i, 1.0));
    }

    let mut blocks = Vec::with_capacity(r_total);
    for entries in per_relation {
        let a_r = SparseMatrix::from_entries(n, n, entries)?;
        blocks.push(row_normalize(&a_r)?);
    }
    match mode {
        StackMode::Vertical => stack_vertical(&blocks),
        StackMode::Horizontal => stack_horizontal(&blocks),
    }
}

/// Node/class pairs for classification; entity ids distinct, class ids
/// dense in `[0, class_count)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledNodeSet {
    pairs: Vec<(usize, usize)>,
    class_count: usize,
}

impl LabeledNodeSet {
    pub fn new(pairs: Vec<(usize, usize)>, class_count: usize) -> Result<Self> {
        let mut seen = HashSet::new();
        for &(node, class) in &pairs {
            if !seen.insert(node) {
                return Err(RgcnError::Data(format!("entity {node} labeled twice")));
            }
            if class >= class_count {
                return Err(RgcnError::Data(format!(
                    "class id {class} outside [0, {class_count})"
                )));
            }
        }
        Ok(LabeledNodeSet { pairs, class_count })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Result of k-hop pruning: the reduced graph plus the id remappings
/// needed to carry label sets over.
#[derive(Debug, Clone)]
pub struct PrunedGraph {
    pub graph: KnowledgeGraph,
    /// old entity id -> new id (None if pruned away)
    pub entity_map: Vec<Option<usize>>,
    /// old relation id -> new id (None if left without edges)
    pub relation_map: Vec<Option<usize>>,
}

/// Keeps exactly the entities within `k` undirected hops of any target
/// node, re-indexes them densely, drops edges with a pruned endpoint and
/// relations left without edges.
pub fn prune_khop(g: &KnowledgeGraph, targets: &LabeledNodeSet, k: usize) -> Result<PrunedGraph> {
    if k == 0 {
        return Err(RgcnError::Argument("prune_khop requires k >= 1".into()));
    }
    let n = g.entity_count();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in g.triples() {
        adj[t.s].push(t.o);
        adj[t.o].push(t.s);
    }

    // BFS from all targets at once, depth-capped at k
    let mut dist = vec![usize::MAX; n];
    let mut frontier: Vec<usize> = Vec::new();
    for &(node, _) in targets.pairs() {
        if node >= n {
            return Err(RgcnError::Data(format!(
                "target entity {node} outside graph with {n} entities"
            )));
        }
        if dist[node] != 0 {
            dist[node] = 0;
            frontier.push(node);
        }
    }
    let mut depth = 0;
    while depth < k && !frontier.is_empty() {
        depth += 1;
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = depth;
                    next.push(v);
                }
            }
        }
        frontier = next;
    }

    let mut entity_map = vec![None; n];
    let mut kept_entities = 0usize;
    for (old, d) in dist.iter().enumerate() {
        if *d != usize::MAX {
            entity_map[old] = Some(kept_entities);
            kept_entities += 1;
        }
    }

    let mut relation_used = vec![false; g.relation_count()];
    let mut kept: Vec<(usize, usize, usize)> = Vec::new();
    for t in g.triples() {
        if let (Some(s), Some(o)) = (entity_map[t.s], entity_map[t.o]) {
            relation_used[t.r] = true;
            kept.push((s, t.r, o));
        }
    }
    let mut relation_map = vec![None; g.relation_count()];
    let mut kept_relations = 0usize;
    for (old, used) in relation_used.iter().enumerate() {
        if *used {
            relation_map[old] = Some(kept_relations);
            kept_relations += 1;
        }
    }
    let triples = kept
        .into_iter()
        .map(|(s, r, o)| Triple::new(s, relation_map[r].expect("relation kept"), o))
        .collect();
    Ok(PrunedGraph {
        graph: KnowledgeGraph::new(kept_entities, kept_relations, triples)?,
        entity_map,
        relation_map,
    })
}

pub const DEFAULT_NEIGHBORHOOD_INCREMENT: f64 = 1.0;

/// Weighted edge sampling without replacement. Initial weights are
/// proportional to the sum of endpoint degrees; every draw adds
/// `increment` to the weight of the remaining edges sharing an endpoint
/// with the drawn edge, so sampling clusters around already-visited
/// neighborhoods.
pub fn sample_edges_neighborhood(
    g: &KnowledgeGraph,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Triple>> {
    sample_edges_neighborhood_with_increment(g, count, DEFAULT_NEIGHBORHOOD_INCREMENT, rng)
}

pub fn sample_edges_neighborhood_with_increment(
    g: &KnowledgeGraph,
    count: usize,
    increment: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Triple>> {
    let m = g.triples().len();
    if count > m {
        return Err(RgcnError::Argument(format!(
            "cannot sample {count} edges from a graph with {m}"
        )));
    }
    let mut degree = vec![0usize; g.entity_count()];
    for t in g.triples() {
        degree[t.s] += 1;
        degree[t.o] += 1;
    }
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); g.entity_count()];
    for (e, t) in g.triples().iter().enumerate() {
        incident[t.s].push(e);
        if t.o != t.s {
            incident[t.o].push(e);
        }
    }

    let mut weight: Vec<f64> = g
        .triples()
        .iter()
        .map(|t| (degree[t.s] + degree[t.o]) as f64)
        .collect();
    let mut picked = vec![false; m];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let total: f64 = weight.iter().sum();
        let e = if total <= 0.0 {
            // all remaining weights zero: fall back to the first unpicked edge
            picked.iter().position(|p| !p).expect("count <= m")
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &w) in weight.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                target -= w;
                if target <= 0.0 {
                    chosen = Some(i);
                    break;
                }
            }
            chosen.unwrap_or_else(|| picked.iter().position(|p| !p).expect("count <= m"))
        };
        picked[e] = true;
        weight[e] = 0.0;
        let t = g.triples()[e];
        out.push(t);
        for &other in incident[t.s].iter().chain(incident[t.o].iter()) {
            if !picked[other] {
                weight[other] += increment;
            }
        }
    }
    Ok(out)
}

/// Uniform edge sampling without replacement.
pub fn sample_edges_uniform(
    g: &KnowledgeGraph,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Triple>> {
    let m = g.triples().len();
    if count > m {
        return Err(RgcnError::Argument(format!(
            "cannot sample {count} edges from a graph with {m}"
        )));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(rng);
    idx.truncate(count);
    Ok(idx.into_iter().map(|i| g.triples()[i]).collect())
}

/// Positive triples plus their corrupted negatives; `label(i)` is 1 for
/// the positive block and 0 for the negatives.
#[derive(Debug, Clone)]
pub struct EdgeSample {
    pub positives: Vec<Triple>,
    pub negatives: Vec<Triple>,
}

impl EdgeSample {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }

    /// Positives first, then negatives, matching [`EdgeSample::labels`].
    pub fn all_triples(&self) -> impl Iterator<Item = &Triple> {
        self.positives.iter().chain(self.negatives.iter())
    }

    pub fn labels(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::repeat(1.0)
            .take(self.positives.len())
            .chain(std::iter::repeat(0.0).take(self.negatives.len()))
    }
}

/// Produces `omega` corruptions per positive by replacing the subject or
/// the object (probability one half each) with a uniformly random entity.
/// Corruptions that happen to be true triples are kept as negatives.
pub fn negative_sample(
    positives: &[Triple],
    omega: usize,
    entity_count: usize,
    rng: &mut impl Rng,
) -> Result<EdgeSample> {
    if omega < 1 {
        return Err(RgcnError::Argument("negative rate must be >= 1".into()));
    }
    if entity_count < 2 {
        return Err(RgcnError::Argument(
            "negative sampling needs at least 2 entities".into(),
        ));
    }
    let mut negatives = Vec::with_capacity(positives.len() * omega);
    for t in positives {
        for _ in 0..omega {
            let replacement = rng.random_range(0..entity_count);
            if rng.random::<f64>() < 0.5 {
                negatives.push(Triple::new(replacement, t.r, t.o));
            } else {
                negatives.push(Triple::new(t.s, t.r, replacement));
            }
        }
    }
    Ok(EdgeSample {
        positives: positives.to_vec(),
        negatives,
    })
}
