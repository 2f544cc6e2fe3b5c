//! Inductive benchmark construction: cluster and k-hop splits, relation
//! filtering and the inference/valid/test partition.

mod louvain;

pub use louvain::{louvain_communities, modularity, simple_edges, CommunityAssignment};

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kg::Hkg;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMethod {
    KHopSeed,
    LouvainCluster,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub method: SplitMethod,
    pub seed_facts: usize,
    pub hops: usize,
    /// Inference, valid and test shares of the inductive piece.
    pub ratios: (f64, f64, f64),
    pub seed: u64,
    pub relation_disjoint: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            method: SplitMethod::LouvainCluster,
            seed_facts: 10,
            hops: 1,
            ratios: (0.8, 0.1, 0.1),
            seed: 0,
            relation_disjoint: false,
        }
    }
}

pub fn check_ratios((a, b, c): (f64, f64, f64)) -> Result<()> {
    if [a, b, c].iter().any(|r| !(r.is_finite() && *r >= 0.0)) || a <= 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "ratios {a}/{b}/{c} must be non-negative, with a positive inference share, and sum to 1"
        )));
    }
    Ok(())
}

/// Undirected head-tail graph of the primary triplets over all entities.
pub fn primary_edges(kg: &Hkg) -> Vec<(u32, u32)> {
    simple_edges(kg.facts().iter().map(|f| (f.head.0, f.tail.0)))
}

pub fn cluster_communities(kg: &Hkg) -> CommunityAssignment {
    louvain_communities(kg.num_entities(), &primary_edges(kg))
}

fn facts_within(kg: &Hkg, keep: impl Fn(u32) -> bool) -> Vec<usize> {
    kg.facts()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.entities().all(|e| keep(e.0)))
        .map(|(i, _)| i)
        .collect()
}

/// A training piece and an inductive piece over disjoint entities.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Hkg,
    pub ind: Hkg,
}

/// Louvain clusters over primary triplets; a fact belongs to a cluster only
/// when every entity it mentions does. The two largest pieces by fact count
/// become train and ind.
pub fn cluster_split(raw: &Hkg) -> Result<(SplitPair, CommunityAssignment)> {
    let comm = cluster_communities(raw);
    let mut pieces: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, f) in raw.facts().iter().enumerate() {
        let c = comm.community[f.head.index()];
        if f.entities().all(|e| comm.community[e.index()] == c) {
            pieces.entry(c).or_default().push(i);
        }
    }
    let mut ranked: Vec<(u32, Vec<usize>)> = pieces.into_iter().collect();
    // larger first; equal sizes keep the lower community id first
    ranked.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    if ranked.len() < 2 {
        return Err(Error::SplitInfeasible(format!(
            "{} non-empty cluster piece(s); need 2",
            ranked.len()
        )));
    }
    let pair = SplitPair {
        train: raw.subset(&ranked[0].1),
        ind: raw.subset(&ranked[1].1),
    };
    Ok((pair, comm))
}

/// Seed facts plus their `k`-hop neighbourhood form the training entities;
/// everything else is inductive.
pub fn khop_split(raw: &Hkg, seed_facts: usize, hops: usize, seed: u64) -> Result<SplitPair> {
    if seed_facts == 0 {
        return Err(Error::Config("at least one seed fact is required".into()));
    }
    if seed_facts > raw.num_facts() {
        return Err(Error::Config(format!(
            "{seed_facts} seed facts requested from {} facts",
            raw.num_facts()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..raw.num_facts()).collect();
    order.shuffle(&mut rng);
    let n = raw.num_entities();
    let mut adj = alloc::vec![Vec::new(); n];
    for (a, b) in primary_edges(raw) {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }
    let mut dist = alloc::vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &fi in &order[..seed_facts] {
        for e in raw.facts()[fi].entities() {
            if dist[e.index()] == usize::MAX {
                dist[e.index()] = 0;
                queue.push_back(e.0);
            }
        }
    }
    while let Some(u) = queue.pop_front() {
        let d = dist[u as usize];
        if d == hops {
            continue;
        }
        for &v in &adj[u as usize] {
            if dist[v as usize] == usize::MAX {
                dist[v as usize] = d + 1;
                queue.push_back(v);
            }
        }
    }
    let in_train = |e: u32| dist[e as usize] != usize::MAX;
    if (0..n as u32).all(in_train) {
        return Err(Error::SplitInfeasible("no entities left for the inductive side".into()));
    }
    let train = facts_within(raw, in_train);
    let ind = facts_within(raw, |e| !in_train(e));
    if ind.is_empty() {
        return Err(Error::SplitInfeasible("no facts lie entirely outside the training entities".into()));
    }
    Ok(SplitPair {
        train: raw.subset(&train),
        ind: raw.subset(&ind),
    })
}

/// Drop inductive facts that mention any relation name known to `train`.
pub fn relation_disjoint_filter(train: &Hkg, ind: &Hkg) -> Result<Hkg> {
    let keep: Vec<usize> = ind
        .facts()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.relations().all(|r| !train.relations().contains(ind.relation_name(r))))
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::FilterInfeasible(
            "every inductive fact shares a relation with the training graph".into(),
        ));
    }
    Ok(ind.subset(&keep))
}

/// Fact indices of the inductive piece assigned to each role.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InductiveSplit {
    pub inference: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    /// Valid/test facts moved to inference because of unseen vocabulary.
    pub reassigned: usize,
}

/// Seeded shuffle, contiguous ratio split, then any valid/test fact using
/// an entity or relation absent from the inference facts moves to inference.
pub fn split_inductive(ind: &Hkg, ratios: (f64, f64, f64), seed: u64) -> Result<InductiveSplit> {
    check_ratios(ratios)?;
    let n = ind.num_facts();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_inf = Float::round(ratios.0 * n as f64) as usize;
    let n_val = (Float::round(ratios.1 * n as f64) as usize).min(n - n_inf.min(n));
    let n_inf = n_inf.min(n);
    let mut out = InductiveSplit {
        inference: order[..n_inf].to_vec(),
        ..Default::default()
    };
    let mut ents = BTreeSet::new();
    let mut rels = BTreeSet::new();
    let absorb = |i: usize, ents: &mut BTreeSet<u32>, rels: &mut BTreeSet<u32>| {
        let f = &ind.facts()[i];
        ents.extend(f.entities().map(|e| e.0));
        rels.extend(f.relations().map(|r| r.0));
    };
    for &i in &out.inference {
        absorb(i, &mut ents, &mut rels);
    }
    for (pos, &i) in order[n_inf..].iter().enumerate() {
        let f = &ind.facts()[i];
        let known = f.entities().all(|e| ents.contains(&e.0)) && f.relations().all(|r| rels.contains(&r.0));
        if !known {
            out.inference.push(i);
            out.reassigned += 1;
            absorb(i, &mut ents, &mut rels);
        } else if pos < n_val {
            out.valid.push(i);
        } else {
            out.test.push(i);
        }
    }
    Ok(out)
}

/// Entity and relation names shared by two graphs.
pub fn vocabulary_overlap(a: &Hkg, b: &Hkg) -> (Vec<String>, Vec<String>) {
    let ents = a
        .entities()
        .names()
        .iter()
        .filter(|n| b.entities().contains(n))
        .cloned()
        .collect();
    let rels = a
        .relations()
        .names()
        .iter()
        .filter(|n| b.relations().contains(n))
        .cloned()
        .collect();
    (ents, rels)
}
