//! Masked-entity training: every query is scored against all entities.

use alloc::collections::btree_map::{BTreeMap, Entry};
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{clip_grad_norm, Adam, AdamConfig, Tape};
use crate::eval::{evaluate_model, FilterIndex};
use crate::graph::{supported_entity_graph, supported_relation_graph, EntityGraph, RelationGraph, SupportedGraph};
use crate::interaction::{EncoderWiring, EntInteraction, RelInteraction};
use crate::kg::{generate_queries, Hkg, QueryFact, Violation};
use crate::model::{GraphContext, ModelConfig, Thor};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    /// Queries per optimizer step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Exclude each query's own fact from the graphs it is encoded on.
    pub leakage_guard: bool,
    pub clip_norm: f64,
    /// Checkpoint every this many epochs; 0 means only at the end.
    pub checkpoint_every: usize,
    /// Cap on queries drawn per epoch after shuffling.
    pub max_queries_per_epoch: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            epochs: 10,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
            leakage_guard: true,
            clip_norm: 1.0,
            checkpoint_every: 0,
            max_queries_per_epoch: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Error::Config("clip norm must be positive".into()));
        }
        Ok(())
    }
}

/// What one optimizer step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub loss: f64,
    pub queries: usize,
    /// Smallest and largest number of entities a query was scored against.
    pub min_candidates: usize,
    pub max_candidates: usize,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub valid_mrr: Option<f64>,
}

/// Training graph plus the per-fact edge support that the leakage guard reads.
pub struct TrainContext<'a> {
    kg: &'a Hkg,
    cfg: ModelConfig,
    rel: SupportedGraph<RelInteraction>,
    ent: SupportedGraph<EntInteraction>,
    full: GraphContext,
}

impl<'a> TrainContext<'a> {
    pub fn new(kg: &'a Hkg, cfg: &ModelConfig) -> Result<Self> {
        let rel = supported_relation_graph(kg, &cfg.interactions);
        let ent = supported_entity_graph(kg, &cfg.interactions);
        let full = GraphContext::build(kg, cfg, None)?;
        Ok(TrainContext {
            kg,
            cfg: *cfg,
            rel,
            ent,
            full,
        })
    }

    pub fn kg(&self) -> &Hkg {
        self.kg
    }

    pub fn full(&self) -> &GraphContext {
        &self.full
    }

    /// Graphs as they would be built with fact `f` left out.
    pub fn without_fact(&self, f: usize) -> Result<GraphContext> {
        match self.cfg.wiring {
            EncoderWiring::Parallel => {
                let rel: RelationGraph = self.rel.without_fact(f);
                let ent: EntityGraph = self.ent.without_fact(f);
                GraphContext::from_graphs(&self.cfg, &rel, &ent)
            }
            EncoderWiring::UltraAlike => {
                let ex = [f].into_iter().collect();
                GraphContext::build(self.kg, &self.cfg, Some(&ex))
            }
        }
    }

    /// Context used for a query: its source fact removed when `guard` is on.
    pub fn for_query(&self, q: &QueryFact, guard: bool) -> Result<GraphContext> {
        match (guard, q.source) {
            (true, Some(f)) => self.without_fact(f),
            _ => Ok(self.full.clone()),
        }
    }
}

/// Forward, backward, clip and one Adam step on the batch mean loss.
pub fn train_step<T: Real>(
    model: &mut Thor<T>,
    adam: &mut Adam<T>,
    ctx: &TrainContext<'_>,
    batch: &[QueryFact],
    cfg: &TrainConfig,
) -> Result<StepReport> {
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let n = ctx.kg.num_entities();
    for q in batch {
        match q.answer {
            Some(a) if a.index() < n => {}
            Some(a) => return Err(Error::Data(format!("answer {} not in the training vocabulary", a.0))),
            None => return Err(Error::Data("training query without answer".into())),
        }
    }
    model.params_mut().zero_grad();
    // one graph build per distinct source fact in the batch
    let mut cache: BTreeMap<Option<usize>, GraphContext> = BTreeMap::new();
    let scale = T::from_f64(1.0 / batch.len() as f64);
    let mut total = 0.0;
    let (mut lo, mut hi) = (usize::MAX, 0);
    for q in batch {
        let key = if cfg.leakage_guard { q.source } else { None };
        let gctx = match cache.entry(key) {
            Entry::Occupied(o) => o.into_mut(),
            Entry::Vacant(v) => v.insert(ctx.for_query(q, cfg.leakage_guard)?),
        };
        let mut tape = Tape::new();
        let logits = model.forward(&mut tape, gctx, q)?;
        let cands = tape.shape(logits).1;
        lo = lo.min(cands);
        hi = hi.max(cands);
        let answer = q.answer.expect("checked").index();
        let loss = tape.cross_entropy(logits, answer)?;
        total += tape.value(loss).get(0, 0).as_f64();
        let scaled = tape.scale(loss, scale);
        tape.backward(scaled, model.params_mut())?;
    }
    let grad_norm = clip_grad_norm(model.params_mut(), cfg.clip_norm);
    adam.step(model.params_mut());
    Ok(StepReport {
        loss: total / batch.len() as f64,
        queries: batch.len(),
        min_candidates: lo,
        max_candidates: hi,
        grad_norm,
    })
}

/// Held-out queries evaluated after every epoch.
pub struct ValidSet<'a> {
    pub context: &'a Hkg,
    pub queries: &'a [QueryFact],
    pub filter: Option<&'a FilterIndex>,
}

/// Hooks called during [`fit`]; any error aborts training.
pub trait FitObserver<T> {
    fn on_step(&mut self, _epoch: usize, _report: &StepReport) -> Result<()> {
        Ok(())
    }
    fn on_epoch(&mut self, _record: &EpochRecord, _model: &Thor<T>) -> Result<()> {
        Ok(())
    }
    fn on_checkpoint(&mut self, _epoch: usize, _model: &Thor<T>, _history: &[EpochRecord]) -> Result<()> {
        Ok(())
    }
}

impl<T> FitObserver<T> for () {}

pub struct FitResult<T> {
    pub model: Thor<T>,
    /// Best model by validation MRR and the epoch it was seen (0 = initial).
    pub best: Option<(usize, Thor<T>)>,
    pub initial_valid_mrr: Option<f64>,
    pub history: Vec<EpochRecord>,
}

impl<T: Real> FitResult<T> {
    /// Best-validation model if one was tracked, otherwise the final one.
    pub fn selected(&self) -> &Thor<T> {
        self.best.as_ref().map_or(&self.model, |(_, m)| m)
    }
}

/// Seeded end-to-end training on every entity position of every training fact.
pub fn fit<T: Real>(
    kg_train: &Hkg,
    valid: Option<ValidSet<'_>>,
    cfg: &TrainConfig,
    observer: &mut dyn FitObserver<T>,
) -> Result<FitResult<T>> {
    cfg.validate()?;
    // unused vocabulary entries are harmless here; dangling ids are not
    let report = kg_train.validate();
    if let Some(v) = report
        .violations
        .iter()
        .find(|v| !matches!(v, Violation::OrphanEntity { .. } | Violation::OrphanRelation { .. }))
    {
        return Err(Error::Data(format!("training graph invalid: {v}")));
    }
    let mut model = Thor::<T>::new(cfg.model, cfg.seed)?;
    let ctx = TrainContext::new(kg_train, &cfg.model)?;
    let mut adam = Adam::new(
        AdamConfig {
            step_size: cfg.learning_rate,
            ..AdamConfig::default()
        },
        model.params(),
    );
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed_5eed_5eed);
    let queries = generate_queries(kg_train);

    let eval_valid = |m: &Thor<T>| -> Result<Option<f64>> {
        match &valid {
            Some(v) => Ok(Some(evaluate_model(m, v.context, v.queries, v.filter)?.all.mrr)),
            None => Ok(None),
        }
    };
    let initial_valid_mrr = eval_valid(&model)?;
    let mut best = initial_valid_mrr.map(|mrr| (mrr, 0usize, model.clone()));
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..queries.len()).collect();
        order.shuffle(&mut shuffle_rng);
        if let Some(cap) = cfg.max_queries_per_epoch {
            order.truncate(cap);
        }
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<QueryFact> = chunk.iter().map(|&i| queries[i].clone()).collect();
            let rep = train_step(&mut model, &mut adam, &ctx, &batch, cfg)?;
            observer.on_step(epoch, &rep)?;
            loss_sum += rep.loss * rep.queries as f64;
            seen += rep.queries;
        }
        let loss = if seen == 0 { 0.0 } else { loss_sum / seen as f64 };
        let valid_mrr = eval_valid(&model)?;
        if let Some(mrr) = valid_mrr {
            if best.as_ref().is_none_or(|(b, _, _)| mrr > *b) {
                best = Some((mrr, epoch, model.clone()));
            }
        }
        let record = EpochRecord { epoch, loss, valid_mrr };
        history.push(record);
        observer.on_epoch(&record, &model)?;
        if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && epoch != cfg.epochs {
            observer.on_checkpoint(epoch, &model, &history)?;
        }
    }
    observer.on_checkpoint(cfg.epochs, &model, &history)?;
    Ok(FitResult {
        model,
        best: best.map(|(_, e, m)| (e, m)),
        initial_valid_mrr,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::DecoderConfig;
    use crate::kg::{HyperFact, MaskedPosition};

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            model: ModelConfig {
                width: 8,
                encoder_layers: 2,
                decoder: DecoderConfig {
                    layers: 1,
                    heads: 2,
                    ..DecoderConfig::default()
                },
                ..ModelConfig::default()
            },
            epochs: 2,
            batch_size: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn single_fact_guard_empties_graphs() {
        let kg = Hkg::from_hyper_facts([HyperFact::new("a", "r", "b")]);
        let cfg = tiny_cfg();
        let ctx = TrainContext::new(&kg, &cfg.model).unwrap();
        let q = generate_queries(&kg)[0].clone();
        let g = ctx.for_query(&q, true).unwrap();
        assert!(g.relations.is_empty() && g.entities.is_empty());
        assert!(!ctx.for_query(&q, false).unwrap().entities.is_empty());
    }

    #[test]
    fn candidates_are_all_entities() {
        let kg = Hkg::from_hyper_facts([
            HyperFact::new("a", "r", "b").with_qualifier("k", "c"),
            HyperFact::new("b", "s", "d"),
        ]);
        let cfg = tiny_cfg();
        let ctx = TrainContext::new(&kg, &cfg.model).unwrap();
        let mut model = Thor::<f64>::new(cfg.model, 0).unwrap();
        let mut adam = Adam::new(AdamConfig::default(), model.params());
        let rep = train_step(&mut model, &mut adam, &ctx, &generate_queries(&kg), &cfg).unwrap();
        assert_eq!((rep.min_candidates, rep.max_candidates), (4, 4));
        assert_eq!(rep.queries, 5);
    }

    #[test]
    fn unknown_answer_is_data_error() {
        let kg = Hkg::from_hyper_facts([HyperFact::new("a", "r", "b")]);
        let cfg = tiny_cfg();
        let ctx = TrainContext::new(&kg, &cfg.model).unwrap();
        let mut model = Thor::<f64>::new(cfg.model, 0).unwrap();
        let mut adam = Adam::new(AdamConfig::default(), model.params());
        let q = QueryFact::new(crate::kg::Fact::triple(0, 0, 7), MaskedPosition::Tail).unwrap();
        assert!(matches!(train_step(&mut model, &mut adam, &ctx, &[q], &cfg), Err(Error::Data(_))));
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let kg = Hkg::from_hyper_facts([HyperFact::new("a", "r", "b"), HyperFact::new("b", "r", "c")]);
        let cfg = TrainConfig { epochs: 0, ..tiny_cfg() };
        let res = fit::<f32>(&kg, None, &cfg, &mut ()).unwrap();
        assert!(res.history.is_empty());
        assert_eq!(res.model.to_bytes(), Thor::<f32>::new(cfg.model, cfg.seed).unwrap().to_bytes());
    }
}
