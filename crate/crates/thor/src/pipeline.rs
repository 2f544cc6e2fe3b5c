//! End-to-end operations behind the subcommands.

use std::path::Path;

use thor_core::eval::{rank_queries, FilterIndex, Metrics, ModelScorer};
use thor_core::kg::{Hkg, HyperFact, MaskedPosition, QueryFact};
use thor_core::model::Thor;
use thor_core::split::{cluster_split, khop_split, relation_disjoint_filter, split_inductive, SplitMethod};
use thor_core::train::{fit, EpochRecord, FitObserver, FitResult, StepReport, ValidSet};

use crate::bundle::{load_bundle, write_bundle, DatasetBundle, PartCounts};
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::report::SplitReport;

/// Split a raw graph into a bundle under `out` and re-load it to confirm the
/// disjointness contracts.
pub fn split_to_bundle(raw: &Hkg, cfg: &RunConfig, out: &Path) -> Result<SplitReport> {
    let s = &cfg.split;
    let (pair, comm) = match s.method {
        SplitMethod::LouvainCluster => {
            let (p, c) = cluster_split(raw)?;
            (p, Some(c))
        }
        SplitMethod::KHopSeed => (khop_split(raw, s.seed_facts, s.hops, s.seed)?, None),
    };
    let ind = if s.relation_disjoint {
        relation_disjoint_filter(&pair.train, &pair.ind)?
    } else {
        pair.ind
    };
    let parts = split_inductive(&ind, s.ratios, s.seed)?;
    let inference = ind.subset(&parts.inference);
    let hyper = |idx: &[usize]| -> Vec<HyperFact> { idx.iter().map(|&i| ind.to_hyper_fact(&ind.facts()[i])).collect() };
    let (valid, test) = (hyper(&parts.valid), hyper(&parts.test));
    write_bundle(out, &pair.train, &inference, &valid, &test)?;

    let bundle = load_bundle(out)?;
    let d = &bundle.diagnostics;
    if !d.entity_disjoint() {
        return Err(Error::Invariant(format!(
            "split shares {} entities between train and inference",
            d.shared_entities.len()
        )));
    }
    if s.relation_disjoint && !d.relation_disjoint() {
        return Err(Error::Invariant(format!(
            "relation filter left {} shared relations",
            d.shared_relations.len()
        )));
    }
    if !d.unresolved.is_empty() {
        return Err(Error::Invariant(format!(
            "{} valid/test facts do not resolve against inference",
            d.unresolved.len()
        )));
    }
    let report = SplitReport {
        method: match s.method {
            SplitMethod::LouvainCluster => "louvain".into(),
            SplitMethod::KHopSeed => format!("khop (seed_facts = {}, hops = {})", s.seed_facts, s.hops),
        },
        seed: s.seed,
        raw: PartCounts::of(raw),
        parts: bundle.counts().to_vec(),
        reassigned: parts.reassigned,
        entity_disjoint: d.entity_disjoint(),
        relation_disjoint: d.relation_disjoint(),
        relation_filter: s.relation_disjoint,
        communities: comm.as_ref().map(|c| c.num_communities()),
        modularity: comm.as_ref().map(|c| c.modularity),
    };
    let path = out.join("split_report.txt");
    std::fs::write(&path, report.to_string()).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

/// Rank `queries` on up to `threads` worker threads; the ranks come back in
/// query order so the result does not depend on the thread count.
pub fn rank_parallel(
    model: &Thor<f32>,
    kg_inf: &Hkg,
    queries: &[QueryFact],
    filter: Option<&FilterIndex>,
    threads: usize,
) -> Result<Vec<f64>> {
    let scorer = ModelScorer::new(model, kg_inf)?;
    if threads <= 1 || queries.len() < 2 {
        return Ok(rank_queries(&scorer, queries, filter)?);
    }
    let chunk = queries.len().div_ceil(threads);
    let scorer = &scorer;
    let parts: Vec<thor_core::Result<Vec<f64>>> = std::thread::scope(|s| {
        let handles: Vec<_> = queries
            .chunks(chunk)
            .map(|c| s.spawn(move || rank_queries(scorer, c, filter)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation thread panicked")).collect()
    });
    let mut ranks = Vec::with_capacity(queries.len());
    for p in parts {
        ranks.extend(p?);
    }
    Ok(ranks)
}

pub fn evaluate_parallel(
    model: &Thor<f32>,
    kg_inf: &Hkg,
    queries: &[QueryFact],
    filter: Option<&FilterIndex>,
    threads: usize,
) -> Result<Metrics> {
    let ranks = rank_parallel(model, kg_inf, queries, filter, threads)?;
    Ok(Metrics::from_ranks(queries, &ranks)?)
}

/// Evaluation context, queries and filter for one part of a bundle.
pub struct EvalTarget {
    pub context: Hkg,
    pub queries: Vec<QueryFact>,
    pub filter: FilterIndex,
}

/// `part` is `valid` or `test`. Transductive mode evaluates over train and
/// inference merged.
pub fn eval_target(bundle: &DatasetBundle, part: &str, transductive: bool) -> Result<EvalTarget> {
    let (context, valid, test) = if transductive {
        bundle.transductive()
    } else {
        (bundle.inference.clone(), bundle.valid.clone(), bundle.test.clone())
    };
    let facts = match part {
        "valid" => &valid,
        "test" => &test,
        _ => return Err(Error::Usage(format!("unknown split part `{part}`; use valid or test"))),
    };
    let mut filter = FilterIndex::from_facts(context.facts());
    for f in valid.iter().chain(&test) {
        filter.insert(f);
    }
    Ok(EvalTarget {
        queries: thor_core::kg::queries_for_facts(facts),
        context,
        filter,
    })
}

struct Progress<'a, F: FnMut(&str)> {
    log: F,
    cfg: &'a RunConfig,
    checkpoint: Option<&'a Path>,
    min_candidates: usize,
    max_candidates: usize,
}

impl<F: FnMut(&str)> FitObserver<f32> for Progress<'_, F> {
    fn on_step(&mut self, _epoch: usize, r: &StepReport) -> thor_core::Result<()> {
        self.min_candidates = self.min_candidates.min(r.min_candidates);
        self.max_candidates = self.max_candidates.max(r.max_candidates);
        Ok(())
    }

    fn on_epoch(&mut self, r: &EpochRecord, _model: &Thor<f32>) -> thor_core::Result<()> {
        let mrr = r.valid_mrr.map_or_else(|| "-".to_string(), |m| format!("{m:.4}"));
        (self.log)(&format!("epoch {}\tloss {:.5}\tvalid_mrr {mrr}", r.epoch, r.loss));
        Ok(())
    }

    fn on_checkpoint(&mut self, epoch: usize, model: &Thor<f32>, history: &[EpochRecord]) -> thor_core::Result<()> {
        let Some(path) = self.checkpoint else { return Ok(()) };
        if epoch == self.cfg.train.epochs {
            return Ok(());
        }
        let mut p = path.as_os_str().to_owned();
        p.push(format!(".epoch{epoch}"));
        let ck = Checkpoint {
            config: self.cfg.clone(),
            epoch,
            history: history.to_vec(),
            model: model.clone(),
        };
        ck.save(Path::new(&p)).map_err(|e| thor_core::Error::Data(e.to_string()))
    }
}

pub struct TrainOutcome {
    pub result: FitResult<f32>,
    pub checkpoint: Checkpoint,
    /// Fewest and most entities any training query was scored against.
    pub candidates: (usize, usize),
    pub train_entities: usize,
}

/// Train on the bundle's training graph, selecting by validation MRR, and
/// save the selected model to the configured checkpoint path if any.
pub fn train_bundle(bundle: &DatasetBundle, cfg: &RunConfig, log: impl FnMut(&str)) -> Result<TrainOutcome> {
    let target = eval_target(bundle, "valid", cfg.transductive)?;
    let train_kg = if cfg.transductive { target.context.clone() } else { bundle.train.clone() };
    let valid = (!target.queries.is_empty()).then(|| ValidSet {
        context: &target.context,
        queries: &target.queries,
        filter: if cfg.raw { None } else { Some(&target.filter) },
    });
    let mut progress = Progress {
        log,
        cfg,
        checkpoint: cfg.checkpoint.as_deref(),
        min_candidates: usize::MAX,
        max_candidates: 0,
    };
    let result = fit::<f32>(&train_kg, valid, &cfg.train, &mut progress)?;
    let candidates = (progress.min_candidates, progress.max_candidates);
    let epoch = result.best.as_ref().map_or(cfg.train.epochs, |(e, _)| *e);
    let checkpoint = Checkpoint {
        config: cfg.clone(),
        epoch,
        history: result.history.clone(),
        model: result.selected().clone(),
    };
    if let Some(path) = &cfg.checkpoint {
        checkpoint.save(path)?;
    }
    Ok(TrainOutcome {
        result,
        checkpoint,
        candidates,
        train_entities: train_kg.num_entities(),
    })
}

/// Parse an ad-hoc query: TAB- (or whitespace-) separated `h r t (k v)*`
/// with exactly one entity slot written as `?`.
pub fn parse_query(text: &str, kg: &Hkg) -> Result<QueryFact> {
    let tokens: Vec<&str> = if text.contains('\t') {
        text.trim_end_matches(['\n', '\r']).split('\t').collect()
    } else {
        text.split_whitespace().collect()
    };
    if tokens.len() < 3 || tokens.len().is_multiple_of(2) {
        return Err(Error::Usage(format!(
            "query needs `h r t (k v)*`, got {} tokens",
            tokens.len()
        )));
    }
    let mut masked = None;
    let mut entity_slots = vec![(0usize, MaskedPosition::Head), (2, MaskedPosition::Tail)];
    for i in 0..(tokens.len() - 3) / 2 {
        entity_slots.push((4 + 2 * i, MaskedPosition::Value(i)));
    }
    let mut placeholder = None;
    for &(idx, pos) in &entity_slots {
        if tokens[idx] == "?" {
            if masked.is_some() {
                return Err(Error::Usage("query must mask exactly one entity".into()));
            }
            masked = Some(pos);
            placeholder = Some(idx);
        }
    }
    let masked = masked.ok_or_else(|| Error::Usage("query must mask one entity with `?`".into()))?;
    if tokens.iter().enumerate().any(|(i, t)| *t == "?" && Some(i) != placeholder) {
        return Err(Error::Usage("`?` may only stand for an entity".into()));
    }
    // any known entity fills the masked slot; the model never reads it
    let filler = kg
        .entities()
        .names()
        .first()
        .ok_or_else(|| Error::Data("inference graph has no entities".into()))?
        .clone();
    let mut hf = HyperFact::new(
        if tokens[0] == "?" { &filler } else { tokens[0] },
        tokens[1],
        if tokens[2] == "?" { &filler } else { tokens[2] },
    );
    for kv in tokens[3..].chunks(2) {
        hf = hf.with_qualifier(kv[0], if kv[1] == "?" { &filler } else { kv[1] });
    }
    let fact = kg.resolve(&hf)?;
    Ok(QueryFact::unanswered(fact, masked)?)
}

/// Top `k` entities by score.
pub fn predict(model: &Thor<f32>, kg: &Hkg, q: &QueryFact, k: usize) -> Result<Vec<(String, f32)>> {
    let ctx = thor_core::model::GraphContext::build(kg, model.config(), None)?;
    let scores = model.scores(&ctx, q)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| (kg.entities().name(i as u32).unwrap_or("?").to_string(), scores[i]))
        .collect())
}
