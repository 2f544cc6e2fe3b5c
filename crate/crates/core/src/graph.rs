//! Relation and entity foundation graphs.
//!
//! Both graphs are sets of typed directed edges. The relation graph links
//! relation ids that meet through shared entities across facts (and through
//! primary-relation/key co-occurrence within a fact); the entity graph links
//! entities that co-occur inside one fact. Edge types come from the
//! interaction alphabets in [`crate::interaction`].
//!
//! Every edge is produced by one or more *derivations* (a fact, or an ordered
//! pair of distinct facts sharing an entity). [`SupportedGraph`] keeps the
//! derivation counts so the graph minus one fact can be produced without a
//! rebuild, which is what the training leakage guard needs per query.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::interaction::{EntInteraction, Interaction, InteractionConfig, InteractionSet, RelInteraction};
use crate::kg::{Hkg, PositionRole, RelationId, Vocab};

/// One typed directed edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge<I> {
    pub src: u32,
    pub kind: I,
    pub dst: u32,
}

/// A deduplicated, reciprocity-closed typed edge set over `node_count` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoundationGraph<I: Interaction> {
    node_count: usize,
    edges: Vec<Edge<I>>,
    alphabet: InteractionSet<I>,
}

pub type RelationGraph = FoundationGraph<RelInteraction>;
pub type EntityGraph = FoundationGraph<EntInteraction>;

impl<I: Interaction> FoundationGraph<I> {
    /// Sorts and deduplicates `edges`. Fails if an edge is out of range, has a
    /// type outside `alphabet`, or lacks its reciprocal.
    pub fn from_edges(
        node_count: usize,
        mut edges: Vec<Edge<I>>,
        alphabet: InteractionSet<I>,
    ) -> crate::Result<Self> {
        edges.sort_unstable();
        edges.dedup();
        for e in &edges {
            let idx = e.src.max(e.dst) as usize;
            if idx >= node_count {
                return Err(crate::Error::Index {
                    what: "foundation graph node",
                    index: idx,
                    len: node_count,
                });
            }
            if !alphabet.contains(e.kind) {
                return Err(crate::Error::Config(alloc::format!(
                    "edge type {} outside the active alphabet",
                    e.kind.name()
                )));
            }
        }
        let g = FoundationGraph {
            node_count,
            edges,
            alphabet,
        };
        if !g.is_reciprocity_closed() {
            return Err(crate::Error::Contract(
                "edge set is not closed under reciprocity".into(),
            ));
        }
        Ok(g)
    }

    fn from_sorted(node_count: usize, edges: Vec<Edge<I>>, alphabet: InteractionSet<I>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        FoundationGraph {
            node_count,
            edges,
            alphabet,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Edges sorted by `(src, kind, dst)`.
    pub fn edges(&self) -> &[Edge<I>] {
        &self.edges
    }

    pub fn alphabet(&self) -> InteractionSet<I> {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: &Edge<I>) -> bool {
        self.edges.binary_search(e).is_ok()
    }

    pub fn is_reciprocity_closed(&self) -> bool {
        self.edges.iter().all(|e| {
            self.contains(&Edge {
                src: e.dst,
                kind: e.kind.reciprocal(),
                dst: e.src,
            })
        })
    }

    /// Relabel nodes (`new = perm[old]`).
    pub fn relabeled(&self, perm: &[u32]) -> Self {
        let mut edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| Edge {
                src: perm[e.src as usize],
                kind: e.kind,
                dst: perm[e.dst as usize],
            })
            .collect();
        edges.sort_unstable();
        Self::from_sorted(self.node_count, edges, self.alphabet)
    }

    pub fn stats(&self) -> GraphStats<I> {
        graph_stats(self)
    }

    /// `src TAB type TAB dst` lines; node names are used when `names` is given.
    pub fn to_edge_list(&self, names: Option<&Vocab>) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let node = |n: u32| -> String {
                match names.and_then(|v| v.name(n)) {
                    Some(s) => s.into(),
                    None => alloc::format!("{n}"),
                }
            };
            let _ = writeln!(out, "{}\t{}\t{}", node(e.src), e.kind.name(), node(e.dst));
        }
        out
    }
}

/// Per-type edge counts and out-degree histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphStats<I> {
    pub node_count: usize,
    pub edge_count: usize,
    /// One entry per alphabet member in canonical order, including zeros.
    pub per_type: Vec<(I, usize)>,
    /// `degree_histogram[k]` = number of nodes with out-degree `k`.
    /// Out-degree equals in-degree in a reciprocity-closed graph.
    pub degree_histogram: Vec<usize>,
}

impl<I: Interaction> GraphStats<I> {
    pub fn count(&self, t: I) -> usize {
        self.per_type
            .iter()
            .find(|(k, _)| *k == t)
            .map_or(0, |&(_, c)| c)
    }
}

pub fn graph_stats<I: Interaction>(g: &FoundationGraph<I>) -> GraphStats<I> {
    let mut per_type: Vec<(I, usize)> = I::ALL.iter().map(|&t| (t, 0)).collect();
    let mut degree = alloc::vec![0usize; g.node_count];
    for e in &g.edges {
        per_type[e.kind.ordinal()].1 += 1;
        degree[e.src as usize] += 1;
    }
    let max = degree.iter().copied().max().unwrap_or(0);
    let mut degree_histogram = alloc::vec![0usize; if g.node_count == 0 { 0 } else { max + 1 }];
    for d in degree {
        degree_histogram[d] += 1;
    }
    GraphStats {
        node_count: g.node_count,
        edge_count: g.edges.len(),
        per_type,
        degree_histogram,
    }
}

/// Relation-graph edge type for an ordered pair of roles held by one entity
/// in two distinct facts, or `None` when the pair does not interact.
fn cross_fact_type(from: PositionRole, to: PositionRole) -> Option<RelInteraction> {
    use PositionRole::*;
    use RelInteraction as R;
    Some(match (from, to) {
        (Head, Head) => R::H2H,
        (Head, Tail) => R::H2T,
        (Tail, Head) => R::T2H,
        (Tail, Tail) => R::T2T,
        (Head, Value(_)) => R::H2V,
        (Value(_), Head) => R::V2H,
        (Tail, Value(_)) => R::T2V,
        (Value(_), Tail) => R::V2T,
        (Value(_), Value(_)) => R::V2V,
        _ => return None,
    })
}

/// Relation carried by the position an entity occupies: the primary relation
/// for head/tail, the paired key for a value.
fn anchor_relation(kg: &Hkg, fact: usize, role: PositionRole) -> RelationId {
    let f = &kg.facts()[fact];
    match role {
        PositionRole::Value(i) => f.qualifiers[i].0,
        _ => f.relation,
    }
}

/// Emit every relation-graph derivation as `(edge, fact_a, fact_b)`; intra-fact
/// derivations repeat the fact index.
fn relation_derivations(
    kg: &Hkg,
    alphabet: InteractionSet<RelInteraction>,
    mut emit: impl FnMut(Edge<RelInteraction>, usize, usize),
) {
    use RelInteraction as R;
    let want_r2k = alphabet.contains(R::R2K) || alphabet.contains(R::K2R);
    let want_k2k = alphabet.contains(R::K2K);
    for (fi, f) in kg.facts().iter().enumerate() {
        for (i, &(ki, _)) in f.qualifiers.iter().enumerate() {
            if want_r2k {
                if alphabet.contains(R::R2K) {
                    emit(Edge { src: f.relation.0, kind: R::R2K, dst: ki.0 }, fi, fi);
                }
                if alphabet.contains(R::K2R) {
                    emit(Edge { src: ki.0, kind: R::K2R, dst: f.relation.0 }, fi, fi);
                }
            }
            if want_k2k {
                for (j, &(kj, _)) in f.qualifiers.iter().enumerate() {
                    if i != j {
                        emit(Edge { src: ki.0, kind: R::K2K, dst: kj.0 }, fi, fi);
                    }
                }
            }
        }
    }

    let want_values = [R::H2V, R::V2H, R::T2V, R::V2T, R::V2V]
        .iter()
        .any(|&t| alphabet.contains(t));
    let want_cross = want_values
        || [R::H2H, R::H2T, R::T2H, R::T2T]
            .iter()
            .any(|&t| alphabet.contains(t));
    if !want_cross {
        return;
    }
    let mut occ = Vec::new();
    for e in 0..kg.num_entities() {
        occ.clear();
        occ.extend(
            kg.entity_occurrences(crate::kg::EntityId(e as u32))
                .iter()
                .filter(|o| want_values || !matches!(o.role, PositionRole::Value(_)))
                .copied(),
        );
        for a in &occ {
            for b in &occ {
                if a.fact == b.fact {
                    continue;
                }
                let Some(kind) = cross_fact_type(a.role, b.role) else {
                    continue;
                };
                if !alphabet.contains(kind) {
                    continue;
                }
                let src = anchor_relation(kg, a.fact, a.role).0;
                let dst = anchor_relation(kg, b.fact, b.role).0;
                emit(Edge { src, kind, dst }, a.fact, b.fact);
            }
        }
    }
}

/// Emit every entity-graph derivation as `(edge, fact)`.
fn entity_derivations(
    kg: &Hkg,
    alphabet: InteractionSet<EntInteraction>,
    mut emit: impl FnMut(Edge<EntInteraction>, usize),
) {
    use EntInteraction as E;
    for (fi, f) in kg.facts().iter().enumerate() {
        let (h, t) = (f.head.0, f.tail.0);
        let mut push = |src: u32, kind: E, dst: u32| {
            if alphabet.contains(kind) {
                emit(Edge { src, kind, dst }, fi);
            }
        };
        push(h, E::H2T, t);
        push(t, E::T2H, h);
        for (i, &(_, v)) in f.qualifiers.iter().enumerate() {
            let v = v.0;
            push(h, E::H2V, v);
            push(v, E::V2H, h);
            push(t, E::T2V, v);
            push(v, E::V2T, t);
            for (j, &(_, w)) in f.qualifiers.iter().enumerate() {
                if i != j {
                    push(v, E::V2V, w.0);
                }
            }
        }
    }
}

fn finish<I: Interaction>(node_count: usize, mut edges: Vec<Edge<I>>, alphabet: InteractionSet<I>) -> FoundationGraph<I> {
    edges.sort_unstable();
    edges.dedup();
    FoundationGraph::from_sorted(node_count, edges, alphabet)
}

/// Build the relation foundation graph, skipping derivations that involve
/// any fact in `exclude`.
pub fn build_relation_graph(
    kg: &Hkg,
    cfg: &InteractionConfig,
    exclude: Option<&BTreeSet<usize>>,
) -> RelationGraph {
    let mut edges = Vec::new();
    relation_derivations(kg, cfg.relation, |e, a, b| {
        if let Some(ex) = exclude {
            if ex.contains(&a) || ex.contains(&b) {
                return;
            }
        }
        edges.push(e);
    });
    finish(kg.num_relations(), edges, cfg.relation)
}

/// Build the entity foundation graph, skipping facts in `exclude`.
pub fn build_entity_graph(
    kg: &Hkg,
    cfg: &InteractionConfig,
    exclude: Option<&BTreeSet<usize>>,
) -> EntityGraph {
    let mut edges = Vec::new();
    entity_derivations(kg, cfg.entity, |e, f| {
        if exclude.is_some_and(|ex| ex.contains(&f)) {
            return;
        }
        edges.push(e);
    });
    finish(kg.num_entities(), edges, cfg.entity)
}

/// A foundation graph together with per-edge derivation counts, so that the
/// graph without a single fact can be read off in time linear in its size.
#[derive(Debug, Clone)]
pub struct SupportedGraph<I: Interaction> {
    full: FoundationGraph<I>,
    support: Vec<u32>,
    // fact -> (edge index, derivations of that edge involving the fact)
    by_fact: Vec<Vec<(u32, u32)>>,
}

impl<I: Interaction> SupportedGraph<I> {
    fn from_derivations(
        node_count: usize,
        num_facts: usize,
        alphabet: InteractionSet<I>,
        mut derivations: Vec<(Edge<I>, usize, usize)>,
    ) -> Self {
        derivations.sort_unstable_by_key(|x| x.0);
        let mut edges: Vec<Edge<I>> = Vec::new();
        let mut support = Vec::new();
        let mut touched: Vec<Vec<(u32, u32)>> = alloc::vec![Vec::new(); num_facts];
        for (e, a, b) in derivations {
            if edges.last() != Some(&e) {
                edges.push(e);
                support.push(0);
            }
            let idx = (edges.len() - 1) as u32;
            *support.last_mut().unwrap() += 1;
            let mut bump = |f: usize| {
                let list = &mut touched[f];
                match list.last_mut() {
                    Some((last, c)) if *last == idx => *c += 1,
                    _ => list.push((idx, 1)),
                }
            };
            bump(a);
            if b != a {
                bump(b);
            }
        }
        SupportedGraph {
            full: FoundationGraph::from_sorted(node_count, edges, alphabet),
            support,
            by_fact: touched,
        }
    }

    pub fn full(&self) -> &FoundationGraph<I> {
        &self.full
    }

    /// The graph that would be built with `fact` excluded.
    pub fn without_fact(&self, fact: usize) -> FoundationGraph<I> {
        let Some(touched) = self.by_fact.get(fact) else {
            return self.full.clone();
        };
        if touched.is_empty() {
            return self.full.clone();
        }
        let mut drop = alloc::vec![false; self.full.edges.len()];
        for &(idx, c) in touched {
            if self.support[idx as usize] == c {
                drop[idx as usize] = true;
            }
        }
        let edges = self
            .full
            .edges
            .iter()
            .zip(&drop)
            .filter(|(_, &d)| !d)
            .map(|(e, _)| *e)
            .collect();
        FoundationGraph::from_sorted(self.full.node_count, edges, self.full.alphabet)
    }
}

pub fn supported_relation_graph(kg: &Hkg, cfg: &InteractionConfig) -> SupportedGraph<RelInteraction> {
    let mut derivations = Vec::new();
    relation_derivations(kg, cfg.relation, |e, a, b| derivations.push((e, a, b)));
    SupportedGraph::from_derivations(kg.num_relations(), kg.num_facts(), cfg.relation, derivations)
}

pub fn supported_entity_graph(kg: &Hkg, cfg: &InteractionConfig) -> SupportedGraph<EntInteraction> {
    let mut derivations = Vec::new();
    entity_derivations(kg, cfg.entity, |e, f| derivations.push((e, f, f)));
    SupportedGraph::from_derivations(kg.num_entities(), kg.num_facts(), cfg.entity, derivations)
}

/// Entity-graph edge annotated with the relation attached to its destination
/// position (primary relation for head/tail, the key for a value).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RelationalEdge {
    pub src: u32,
    pub kind: EntInteraction,
    pub dst: u32,
    pub relation: u32,
}

/// Annotated entity edges used by the ULTRA-style wiring, deduplicated on
/// all four fields.
pub fn build_relational_entity_edges(
    kg: &Hkg,
    cfg: &InteractionConfig,
    exclude: Option<&BTreeSet<usize>>,
) -> Vec<RelationalEdge> {
    use EntInteraction as E;
    let mut out = Vec::new();
    for (fi, f) in kg.facts().iter().enumerate() {
        if exclude.is_some_and(|ex| ex.contains(&fi)) {
            continue;
        }
        let (h, t, r) = (f.head.0, f.tail.0, f.relation.0);
        let mut push = |src: u32, kind: E, dst: u32, relation: u32| {
            if cfg.entity.contains(kind) {
                out.push(RelationalEdge { src, kind, dst, relation });
            }
        };
        push(h, E::H2T, t, r);
        push(t, E::T2H, h, r);
        for (i, &(k, v)) in f.qualifiers.iter().enumerate() {
            push(h, E::H2V, v.0, k.0);
            push(v.0, E::V2H, h, k.0);
            push(t, E::T2V, v.0, k.0);
            push(v.0, E::V2T, t, k.0);
            for (j, &(kj, w)) in f.qualifiers.iter().enumerate() {
                if i != j {
                    push(v.0, E::V2V, w.0, kj.0);
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}
