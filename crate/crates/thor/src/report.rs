//! Text renderings of metrics, split outcomes and graph statistics.

use std::fmt::{self, Write as _};

use thor_core::eval::{Breakdown, Metrics};
use thor_core::graph::GraphStats;
use thor_core::interaction::Interaction;

use crate::bundle::PartCounts;

fn rows(m: &Metrics) -> [(&'static str, &Breakdown); 3] {
    [("H/T", &m.ht), ("V", &m.value), ("ALL", &m.all)]
}

/// Aligned table, one row per breakdown.
pub fn metrics_table(m: &Metrics) -> String {
    let mut out = format!(
        "{:<9} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "breakdown", "queries", "MRR", "Hits@1", "Hits@3", "Hits@10"
    );
    for (name, b) in rows(m) {
        let _ = writeln!(
            out,
            "{name:<9} {:>8} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            b.count, b.mrr, b.hits1, b.hits3, b.hits10
        );
    }
    out
}

/// `metric TAB breakdown TAB value` lines.
pub fn metrics_tsv(m: &Metrics) -> String {
    let mut out = String::new();
    for (name, b) in rows(m) {
        let _ = writeln!(out, "count\t{name}\t{}", b.count);
        for (metric, v) in [("mrr", b.mrr), ("hits@1", b.hits1), ("hits@3", b.hits3), ("hits@10", b.hits10)] {
            let _ = writeln!(out, "{metric}\t{name}\t{v}");
        }
    }
    out
}

pub fn counts_table(parts: &[(&str, PartCounts)]) -> String {
    let mut out = format!("{:<10} {:>9} {:>9} {:>9}\n", "part", "facts", "entities", "relations");
    for (name, c) in parts {
        let _ = writeln!(out, "{name:<10} {:>9} {:>9} {:>9}", c.facts, c.entities, c.relations);
    }
    out
}

/// Contents of the split report written next to a generated bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub method: String,
    pub seed: u64,
    pub raw: PartCounts,
    pub parts: Vec<(&'static str, PartCounts)>,
    pub reassigned: usize,
    pub entity_disjoint: bool,
    pub relation_disjoint: bool,
    pub relation_filter: bool,
    /// Louvain runs only.
    pub communities: Option<usize>,
    pub modularity: Option<f64>,
}

impl fmt::Display for SplitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method = {}", self.method)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(
            f,
            "raw = {} facts, {} entities, {} relations",
            self.raw.facts, self.raw.entities, self.raw.relations
        )?;
        if let (Some(c), Some(q)) = (self.communities, self.modularity) {
            writeln!(f, "communities = {c}")?;
            writeln!(f, "modularity = {q:.6}")?;
        }
        writeln!(f, "relation_filter = {}", self.relation_filter)?;
        writeln!(f, "reassigned_to_inference = {}", self.reassigned)?;
        writeln!(f, "entity_disjoint = {}", self.entity_disjoint)?;
        writeln!(f, "relation_disjoint = {}", self.relation_disjoint)?;
        f.write_str(&counts_table(&self.parts))
    }
}

pub fn graph_stats_report<I: Interaction>(title: &str, s: &GraphStats<I>) -> String {
    let mut out = format!("{title}: {} nodes, {} edges\n", s.node_count, s.edge_count);
    for (t, c) in &s.per_type {
        let _ = writeln!(out, "  {:<6} {c}", t.name());
    }
    out.push_str("  out-degree histogram (degree: nodes)\n");
    for (d, n) in s.degree_histogram.iter().enumerate().filter(|(_, &n)| n > 0) {
        let _ = writeln!(out, "    {d}: {n}");
    }
    out
}
