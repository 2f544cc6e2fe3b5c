//! Synthetic rule-governed graphs for smoke tests and timing runs.
//!
//! Each group `g` contributes three entities `a, b, c` and three facts:
//!
//! ```text
//! (a, r1, b, [k1: c])
//! (b, r2, c)
//! (a, r3, c)
//! ```
//!
//! The qualifier value of the first fact always equals the tail of the
//! second, so every masked position is determined by the other two facts.

use thor_core::kg::{Hkg, HyperFact};

/// Facts of `groups` groups; `tag` keeps vocabularies of different
/// instances disjoint.
pub fn rule_facts(groups: usize, tag: &str) -> Vec<HyperFact> {
    let rel = |name: &str| format!("{tag}:{name}");
    let mut out = Vec::with_capacity(3 * groups);
    for g in 0..groups {
        let (a, b, c) = (format!("{tag}:a{g}"), format!("{tag}:b{g}"), format!("{tag}:c{g}"));
        out.push(HyperFact::new(&a, &rel("r1"), &b).with_qualifier(&rel("k1"), &c));
        out.push(HyperFact::new(&b, &rel("r2"), &c));
        out.push(HyperFact::new(&a, &rel("r3"), &c));
    }
    out
}

pub fn rule_graph(groups: usize, tag: &str) -> Hkg {
    Hkg::from_hyper_facts(rule_facts(groups, tag))
}
