//! Invariant suites run by `thor selfcheck` and by the acceptance tests:
//! a literal brute-force enumerator for both foundation graphs, central
//! finite-difference gradient checks, and double-equivariance of scores
//! under joint entity/relation relabeling.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thor_core::autodiff::Tape;
use thor_core::decoder::DecoderConfig;
use thor_core::graph::{build_entity_graph, build_relation_graph, supported_entity_graph, supported_relation_graph};
use thor_core::interaction::{Ablation, EntInteraction, Interaction, InteractionConfig, InteractionSet, RelInteraction};
use thor_core::kg::{generate_queries, Fact, Hkg, HyperFact, QueryFact};
use thor_core::model::{GraphContext, ModelConfig, Thor};
use thor_core::train::TrainContext;

use crate::error::Result;

/// Outcome of one suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: usize,
    /// First few failure descriptions; `failed` counts all of them.
    pub failures: Vec<String>,
    pub failed: usize,
    pub elapsed: Duration,
    /// Largest observed error, where the suite measures one.
    pub max_error: Option<f64>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        SuiteReport {
            name,
            checks: 0,
            failures: Vec::new(),
            failed: 0,
            elapsed: Duration::ZERO,
            max_error: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.failed == 0 && self.checks > 0
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failed += 1;
            if self.failures.len() < 5 {
                self.failures.push(describe());
            }
        }
    }

    fn observe(&mut self, err: f64) {
        self.max_error = Some(self.max_error.map_or(err, |m| m.max(err)));
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{}: {} ({} checks, {} failed, {:.2}s",
            self.name,
            if self.passed() { "ok" } else { "FAILED" },
            self.checks,
            self.failed,
            self.elapsed.as_secs_f64()
        );
        if let Some(e) = self.max_error {
            s.push_str(&format!(", max error {e:.3e}"));
        }
        s.push(')');
        for f in &self.failures {
            s.push_str("\n  ");
            s.push_str(f);
        }
        s
    }
}

/// Random graph with at most `max_facts` facts of at most `max_quals`
/// qualifiers each, over small vocabularies so that entities recur.
pub fn random_hkg(rng: &mut impl Rng, max_facts: usize, max_quals: usize) -> Hkg {
    let n_ent = rng.gen_range(2..=7);
    let n_rel = rng.gen_range(1..=4);
    let n_facts = rng.gen_range(1..=max_facts);
    let e = |rng: &mut dyn rand::RngCore| format!("e{}", rng.gen_range(0..n_ent));
    let r = |rng: &mut dyn rand::RngCore| format!("r{}", rng.gen_range(0..n_rel));
    let facts: Vec<HyperFact> = (0..n_facts)
        .map(|_| {
            let mut f = HyperFact::new(&e(rng), &r(rng), &e(rng));
            for _ in 0..rng.gen_range(0..=max_quals) {
                f = f.with_qualifier(&r(rng), &e(rng));
            }
            f
        })
        .collect();
    Hkg::from_hyper_facts(facts)
}

type Triple<I> = (u32, I, u32);

/// Relation-graph edges by the textual rules, over every ordered pair of
/// distinct facts and within each fact.
pub fn oracle_relation_edges(
    kg: &Hkg,
    set: InteractionSet<RelInteraction>,
    exclude: &BTreeSet<usize>,
) -> BTreeSet<Triple<RelInteraction>> {
    use RelInteraction::*;
    let mut out = BTreeSet::new();
    let mut add = |s: u32, t: RelInteraction, d: u32| {
        if set.contains(t) {
            out.insert((s, t, d));
        }
    };
    let live: Vec<(usize, &Fact)> = kg.facts().iter().enumerate().filter(|(i, _)| !exclude.contains(i)).collect();
    for &(_, f) in &live {
        let r = f.relation.0;
        for (i, (k, _)) in f.qualifiers.iter().enumerate() {
            add(r, R2K, k.0);
            add(k.0, K2R, r);
            for (j, (k2, _)) in f.qualifiers.iter().enumerate() {
                if i != j {
                    add(k.0, K2K, k2.0);
                }
            }
        }
    }
    for &(ia, a) in &live {
        for &(ib, b) in &live {
            if ia == ib {
                continue;
            }
            let (ra, rb) = (a.relation.0, b.relation.0);
            if a.head == b.head {
                add(ra, H2H, rb);
            }
            if a.head == b.tail {
                add(ra, H2T, rb);
            }
            if a.tail == b.head {
                add(ra, T2H, rb);
            }
            if a.tail == b.tail {
                add(ra, T2T, rb);
            }
            for &(k, v) in &b.qualifiers {
                if a.head == v {
                    add(ra, H2V, k.0);
                    add(k.0, V2H, ra);
                }
                if a.tail == v {
                    add(ra, T2V, k.0);
                    add(k.0, V2T, ra);
                }
                for &(ka, va) in &a.qualifiers {
                    if va == v {
                        add(ka.0, V2V, k.0);
                    }
                }
            }
        }
    }
    out
}

/// Entity-graph edges by the textual rules, fact by fact.
pub fn oracle_entity_edges(
    kg: &Hkg,
    set: InteractionSet<EntInteraction>,
    exclude: &BTreeSet<usize>,
) -> BTreeSet<Triple<EntInteraction>> {
    use EntInteraction::*;
    let mut out = BTreeSet::new();
    let mut add = |s: u32, t: EntInteraction, d: u32| {
        if set.contains(t) {
            out.insert((s, t, d));
        }
    };
    for (fi, f) in kg.facts().iter().enumerate() {
        if exclude.contains(&fi) {
            continue;
        }
        let (h, t) = (f.head.0, f.tail.0);
        add(h, H2T, t);
        add(t, T2H, h);
        for (i, &(_, v)) in f.qualifiers.iter().enumerate() {
            add(h, H2V, v.0);
            add(v.0, V2H, h);
            add(t, T2V, v.0);
            add(v.0, V2T, t);
            for (j, &(_, w)) in f.qualifiers.iter().enumerate() {
                if i != j {
                    add(v.0, V2V, w.0);
                }
            }
        }
    }
    out
}

fn edge_set<I: Interaction>(g: &thor_core::graph::FoundationGraph<I>) -> BTreeSet<Triple<I>> {
    g.edges().iter().map(|e| (e.src, e.kind, e.dst)).collect()
}

/// Builders against the oracle on `graphs` random graphs, for every preset,
/// with and without one excluded fact; the per-fact support view is checked
/// against the excluded build as well.
pub fn foundation_oracle_suite(graphs: usize, seed: u64) -> SuiteReport {
    let t0 = Instant::now();
    let mut rep = SuiteReport::new("foundation-graph oracle");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in 0..graphs {
        let kg = random_hkg(&mut rng, 8, 3);
        let dropped = rng.gen_range(0..kg.num_facts());
        for &ab in Ablation::ALL {
            let cfg: InteractionConfig = ab.interactions();
            let none = BTreeSet::new();
            let one: BTreeSet<usize> = [dropped].into();
            for ex in [&none, &one] {
                let arg = (!ex.is_empty()).then_some(ex);
                let rel = build_relation_graph(&kg, &cfg, arg);
                let want = oracle_relation_edges(&kg, cfg.relation, ex);
                rep.check(edge_set(&rel) == want && rel.node_count() == kg.num_relations(), || {
                    format!("graph {g}, {ab}, exclude {ex:?}: relation graph differs from oracle")
                });
                let ent = build_entity_graph(&kg, &cfg, arg);
                let want = oracle_entity_edges(&kg, cfg.entity, ex);
                rep.check(edge_set(&ent) == want && ent.node_count() == kg.num_entities(), || {
                    format!("graph {g}, {ab}, exclude {ex:?}: entity graph differs from oracle")
                });
            }
            let srel = supported_relation_graph(&kg, &cfg).without_fact(dropped);
            rep.check(edge_set(&srel) == oracle_relation_edges(&kg, cfg.relation, &one), || {
                format!("graph {g}, {ab}: relation support view differs from oracle")
            });
            let sent = supported_entity_graph(&kg, &cfg).without_fact(dropped);
            rep.check(edge_set(&sent) == oracle_entity_edges(&kg, cfg.entity, &one), || {
                format!("graph {g}, {ab}: entity support view differs from oracle")
            });
        }
    }
    rep.elapsed = t0.elapsed();
    rep
}

/// Small three-fact graph with qualifiers and shared entities.
pub fn gradcheck_graph() -> Hkg {
    Hkg::from_hyper_facts([
        HyperFact::new("a", "r1", "b").with_qualifier("k1", "c"),
        HyperFact::new("b", "r2", "c").with_qualifier("k2", "a").with_qualifier("k1", "d"),
        HyperFact::new("d", "r1", "a"),
    ])
}

pub fn gradcheck_config(variant: usize) -> ModelConfig {
    let base = ModelConfig {
        width: 8,
        encoder_layers: 2,
        decoder: DecoderConfig {
            layers: 2,
            heads: 1,
            ..DecoderConfig::default()
        },
        ..ModelConfig::default()
    };
    match variant {
        0 => base,
        _ => {
            let ab = Ablation::UltraAlike;
            ModelConfig {
                encoder_residual: true,
                encoder_layer_norm: true,
                interactions: Ablation::AddAllFI.interactions(),
                wiring: ab.wiring(),
                decoder: DecoderConfig {
                    zero_other: true,
                    ..base.decoder
                },
                ..base
            }
        }
    }
}

fn mean_loss(model: &Thor<f64>, contexts: &[GraphContext], queries: &[QueryFact]) -> Result<f64> {
    let mut total = 0.0;
    for (q, ctx) in queries.iter().zip(contexts) {
        let mut tape = Tape::new();
        let loss = model.loss(&mut tape, ctx, q)?;
        total += tape.value(loss).get(0, 0);
    }
    Ok(total / queries.len() as f64)
}

/// Analytic gradients of the batch-mean loss (guarded contexts) against
/// central differences with step `h`, for every parameter scalar of both
/// check configurations. Relative error is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradcheck_suite(h: f64, tolerance: f64) -> Result<SuiteReport> {
    let t0 = Instant::now();
    let mut rep = SuiteReport::new("gradient finite differences");
    let kg = gradcheck_graph();
    for variant in 0..2 {
        let cfg = gradcheck_config(variant);
        let mut model = Thor::<f64>::new(cfg, 7 + variant as u64)?;
        let tctx = TrainContext::new(&kg, &cfg)?;
        let queries = generate_queries(&kg);
        let contexts: Vec<GraphContext> = queries.iter().map(|q| tctx.for_query(q, true)).collect::<thor_core::Result<_>>()?;

        let mut store = model.params().clone();
        store.zero_grad();
        for (q, ctx) in queries.iter().zip(&contexts) {
            let mut tape = Tape::new();
            let loss = model.loss(&mut tape, ctx, q)?;
            let s = tape.scale(loss, 1.0 / queries.len() as f64);
            tape.backward(s, &mut store)?;
        }
        let ids: Vec<_> = model.params().ids().collect();
        for id in ids {
            let name = model.params().name(id).to_string();
            let len = model.params().value(id).data().len();
            for k in 0..len {
                let orig = model.params().value(id).data()[k];
                model.params_mut().value_mut(id).data_mut()[k] = orig + h;
                let up = mean_loss(&model, &contexts, &queries)?;
                model.params_mut().value_mut(id).data_mut()[k] = orig - h;
                let down = mean_loss(&model, &contexts, &queries)?;
                model.params_mut().value_mut(id).data_mut()[k] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = store.grad(id).data()[k];
                let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                rep.observe(err);
                rep.check(err <= tolerance, || {
                    format!("variant {variant} {name}[{k}]: analytic {analytic:.6e}, numeric {numeric:.6e}, rel err {err:.2e}")
                });
            }
        }
    }
    rep.elapsed = t0.elapsed();
    Ok(rep)
}

/// Rank with scores within `tol` of the answer's counted as ties.
pub fn tolerant_rank(scores: &[f32], answer: usize, tol: f32) -> f64 {
    let sa = scores[answer];
    let mut above = 0usize;
    let mut ties = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if i == answer {
            continue;
        }
        if s > sa + tol {
            above += 1;
        } else if (s - sa).abs() <= tol {
            ties += 1;
        }
    }
    1.0 + above as f64 + ties as f64 / 2.0
}

fn random_perm(rng: &mut impl Rng, n: usize) -> Vec<u32> {
    let mut p: Vec<u32> = (0..n as u32).collect();
    p.shuffle(rng);
    p
}

/// Scores after a joint entity/relation relabeling equal the relabeled
/// original scores within `tolerance`, and the answer's rank is unchanged
/// (scores closer than `tolerance` count as ties on both sides).
pub fn equivariance_suite(triples: usize, seed: u64, tolerance: f32) -> Result<SuiteReport> {
    let t0 = Instant::now();
    let mut rep = SuiteReport::new("double equivariance");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..triples {
        let kg = random_hkg(&mut rng, 8, 3);
        let ab = Ablation::ALL[t % Ablation::ALL.len()];
        let cfg = ModelConfig {
            width: 16,
            encoder_layers: 3,
            encoder_residual: t % 2 == 1,
            encoder_layer_norm: t % 3 == 1,
            interactions: ab.interactions(),
            wiring: ab.wiring(),
            decoder: DecoderConfig {
                layers: 2,
                heads: 2,
                ..DecoderConfig::default()
            },
        };
        let model = Thor::<f32>::new(cfg, rng.gen())?;
        let queries = generate_queries(&kg);
        let q = queries[rng.gen_range(0..queries.len())].clone();
        let pe = random_perm(&mut rng, kg.num_entities());
        let pr = random_perm(&mut rng, kg.num_relations());
        let kg2 = kg.permuted(&pe, &pr)?;
        let q2 = QueryFact::new(q.fact.relabeled(&pe, &pr), q.masked)?;

        let s = model.scores(&GraphContext::build(&kg, &cfg, None)?, &q)?;
        let s2 = model.scores(&GraphContext::build(&kg2, &cfg, None)?, &q2)?;
        let mut err = 0.0f32;
        for (e, &v) in s.iter().enumerate() {
            err = err.max((s2[pe[e] as usize] - v).abs());
        }
        rep.observe(err as f64);
        rep.check(err <= tolerance, || format!("triple {t} ({ab}): max score deviation {err:.3e}"));
        let a = q.answer.expect("generated").index();
        let (r1, r2) = (tolerant_rank(&s, a, tolerance), tolerant_rank(&s2, pe[a] as usize, tolerance));
        rep.check(r1 == r2, || format!("triple {t} ({ab}): rank {r1} became {r2}"));
    }
    rep.elapsed = t0.elapsed();
    Ok(rep)
}

/// Every set partition of `0..n` as restricted-growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<u32>> {
    fn rec(i: usize, n: usize, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for c in 0..=max + 1 {
            if i == 0 && c > 0 {
                break;
            }
            cur.push(c);
            rec(i + 1, n, if i == 0 { 0 } else { max.max(c) }, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
    } else {
        rec(0, n, 0, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// Modularity written out from the pairwise definition
/// `Q = 1/2m * sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j)`.
pub fn pairwise_modularity(n: usize, edges: &[(u32, u32)], community: &[u32]) -> f64 {
    if edges.is_empty() {
        return 0.0;
    }
    let mut a = vec![vec![0.0f64; n]; n];
    for &(u, v) in edges {
        a[u as usize][v as usize] = 1.0;
        a[v as usize][u as usize] = 1.0;
    }
    let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if community[i] == community[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Best modularity over all partitions of `0..n`.
pub fn exhaustive_max_modularity(n: usize, edges: &[(u32, u32)], partitions: &[Vec<u32>]) -> f64 {
    partitions
        .iter()
        .map(|p| pairwise_modularity(n, edges, p))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The three suites at their standard sizes.
pub fn run_all() -> Result<Vec<SuiteReport>> {
    Ok(vec![
        foundation_oracle_suite(200, 1),
        gradcheck_suite(1e-4, 1e-3)?,
        equivariance_suite(100, 2, 1e-4)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_on_hand_example() {
        // two triples sharing a head: one reciprocal h2h pair
        let kg = Hkg::from_hyper_facts([HyperFact::new("a", "r1", "b"), HyperFact::new("a", "r2", "c")]);
        let e = oracle_relation_edges(&kg, InteractionConfig::default().relation, &BTreeSet::new());
        let want: BTreeSet<_> = [(0, RelInteraction::H2H, 1), (1, RelInteraction::H2H, 0)].into();
        assert_eq!(e, want);
        // one fact with two qualifiers: twelve entity edges
        let kg = Hkg::from_hyper_facts([HyperFact::new("h", "r", "t").with_qualifier("k1", "v1").with_qualifier("k2", "v2")]);
        assert_eq!(oracle_entity_edges(&kg, InteractionSet::all(), &BTreeSet::new()).len(), 12);
    }

    #[test]
    fn small_oracle_run() {
        let r = foundation_oracle_suite(20, 5);
        assert!(r.passed(), "{}", r.summary());
    }

    #[test]
    fn tolerant_rank_ties() {
        assert_eq!(tolerant_rank(&[0.4, 0.4, 0.2], 0, 0.0), 1.5);
        assert_eq!(tolerant_rank(&[0.5, 0.3, 0.2], 1, 1e-6), 2.0);
    }
}
