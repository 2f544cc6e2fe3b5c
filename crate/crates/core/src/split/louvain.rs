//! Louvain community detection on small undirected graphs.
//!
//! Resolution 1.0, nodes swept in ascending id order, each node moved to the
//! neighbouring community with the largest modularity gain (ties keep the
//! current community, then prefer the lower community id). Levels are
//! aggregated until a sweep moves nothing. No randomness is involved.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

/// Community id per node and the modularity of that partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityAssignment {
    pub community: Vec<u32>,
    pub modularity: f64,
}

impl CommunityAssignment {
    pub fn num_communities(&self) -> usize {
        self.community.iter().map(|&c| c as usize + 1).max().unwrap_or(0)
    }
}

const EPS: f64 = 1e-12;

/// Weighted symmetric adjacency; a self-loop's weight counts once in its row.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
}

impl Level {
    fn degree(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|&(_, w)| w).sum()
    }
}

/// Modularity of `community` on the simple graph `edges` over `n` nodes.
/// A graph without edges has modularity 0.
pub fn modularity(n: usize, edges: &[(u32, u32)], community: &[u32]) -> f64 {
    let m = edges.len() as f64;
    if edges.is_empty() {
        return 0.0;
    }
    let mut deg = alloc::vec![0.0; n];
    for &(a, b) in edges {
        deg[a as usize] += 1.0;
        deg[b as usize] += 1.0;
    }
    let mut internal = 0.0;
    let mut tot: BTreeMap<u32, f64> = BTreeMap::new();
    for &(a, b) in edges {
        if community[a as usize] == community[b as usize] {
            internal += 1.0;
        }
    }
    for (i, &c) in community.iter().enumerate() {
        *tot.entry(c).or_default() += deg[i];
    }
    internal / m - tot.values().map(|t| num_traits::Float::powi(t / (2.0 * m), 2)).sum::<f64>()
}

/// Simple undirected graph: self-loops dropped, parallel edges merged.
pub fn simple_edges(edges: impl IntoIterator<Item = (u32, u32)>) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = edges
        .into_iter()
        .filter(|(a, b)| a != b)
        .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn louvain_communities(n: usize, edges: &[(u32, u32)]) -> CommunityAssignment {
    let edges = simple_edges(edges.iter().copied());
    let mut adj = alloc::vec![Vec::new(); n];
    for &(a, b) in &edges {
        adj[a as usize].push((b as usize, 1.0));
        adj[b as usize].push((a as usize, 1.0));
    }
    let mut level = Level { adj };
    // node -> community of the current level's node
    let mut assignment: Vec<usize> = (0..n).collect();
    let two_m: f64 = (0..n).map(|i| level.degree(i)).sum();
    if two_m > 0.0 {
        loop {
            let (comm, moved) = local_moves(&level, two_m);
            if !moved {
                break;
            }
            let (renumbered, count) = renumber(&comm);
            for a in assignment.iter_mut() {
                *a = renumbered[*a];
            }
            level = aggregate(&level, &renumbered, count);
        }
    }
    let (final_ids, _) = renumber(&assignment);
    let community: Vec<u32> = final_ids.iter().map(|&c| c as u32).collect();
    let modularity = modularity(n, &edges, &community);
    CommunityAssignment { community, modularity }
}

fn local_moves(level: &Level, two_m: f64) -> (Vec<usize>, bool) {
    let n = level.adj.len();
    let k: Vec<f64> = (0..n).map(|i| level.degree(i)).collect();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot = k.clone();
    let mut any = false;
    loop {
        let mut improved = false;
        for i in 0..n {
            let own = comm[i];
            tot[own] -= k[i];
            let mut links: BTreeMap<usize, f64> = BTreeMap::new();
            links.insert(own, 0.0);
            for &(j, w) in &level.adj[i] {
                if j != i {
                    *links.entry(comm[j]).or_default() += w;
                }
            }
            let gain = |c: usize, l: f64| l - tot[c] * k[i] / two_m;
            let mut best = own;
            let mut best_gain = gain(own, links[&own]);
            for (&c, &l) in &links {
                let g = gain(c, l);
                if g > best_gain + EPS {
                    best = c;
                    best_gain = g;
                }
            }
            tot[best] += k[i];
            if best != own {
                comm[i] = best;
                improved = true;
                any = true;
            }
        }
        if !improved {
            break;
        }
    }
    (comm, any)
}

/// Dense ids in order of first appearance by node.
fn renumber(comm: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let out = comm
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect();
    (out, map.len())
}

fn aggregate(level: &Level, comm: &[usize], count: usize) -> Level {
    let mut rows: Vec<BTreeMap<usize, f64>> = alloc::vec![BTreeMap::new(); count];
    for (i, row) in level.adj.iter().enumerate() {
        for &(j, w) in row {
            *rows[comm[i]].entry(comm[j]).or_default() += w;
        }
    }
    Level {
        adj: rows.into_iter().map(|r| r.into_iter().collect()).collect(),
    }
}
