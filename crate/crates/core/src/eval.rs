//! Filtered ranking metrics with head/tail and all-position breakdowns.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::kg::{EntityId, Fact, Hkg, MaskedPosition, QueryFact};
use crate::model::{GraphContext, Thor};
use crate::{Error, Real, Result};

/// Mean-tie rank of `answer` among the indices not in `filter_out`.
pub fn rank_of<T: Real>(scores: &[T], answer: usize, filter_out: &BTreeSet<u32>) -> Result<f64> {
    if answer >= scores.len() {
        return Err(Error::Index {
            what: "scores",
            index: answer,
            len: scores.len(),
        });
    }
    if filter_out.contains(&(answer as u32)) {
        return Err(Error::Contract(format!("answer {answer} is filtered out")));
    }
    let s = scores[answer];
    let (mut above, mut ties) = (0usize, 0usize);
    for (i, &x) in scores.iter().enumerate() {
        if i == answer || filter_out.contains(&(i as u32)) {
            continue;
        }
        if x > s {
            above += 1;
        } else if x == s {
            ties += 1;
        }
    }
    Ok(1.0 + above as f64 + ties as f64 / 2.0)
}

/// Known completions of each masked pattern, used to filter competitors.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    known: BTreeMap<(Fact, MaskedPosition), BTreeSet<u32>>,
}

fn pattern(f: &Fact, pos: MaskedPosition) -> Fact {
    let mut p = f.clone();
    p.set_entity_at(pos, EntityId(u32::MAX));
    p
}

impl FilterIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_facts<'a>(facts: impl IntoIterator<Item = &'a Fact>) -> Self {
        let mut idx = Self::new();
        for f in facts {
            idx.insert(f);
        }
        idx
    }

    pub fn insert(&mut self, f: &Fact) {
        for pos in f.entity_positions() {
            if let Some(e) = f.entity_at(pos) {
                self.known.entry((pattern(f, pos), pos)).or_default().insert(e.0);
            }
        }
    }

    pub fn extend_from(&mut self, kg: &Hkg) {
        for f in kg.facts() {
            self.insert(f);
        }
    }

    /// Entities that also complete `q`, excluding its answer.
    pub fn filter_for(&self, q: &QueryFact) -> BTreeSet<u32> {
        let mut out = self
            .known
            .get(&(pattern(&q.fact, q.masked), q.masked))
            .cloned()
            .unwrap_or_default();
        if let Some(a) = q.answer {
            out.remove(&a.0);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Breakdown {
    pub count: usize,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

impl Breakdown {
    fn from_ranks(ranks: &mut [f64]) -> Self {
        if ranks.is_empty() {
            return Breakdown::default();
        }
        // fixed summation order keeps results independent of query order
        ranks.sort_by(|a, b| a.partial_cmp(b).expect("finite rank"));
        let n = ranks.len() as f64;
        let hits = |k: f64| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
        Breakdown {
            count: ranks.len(),
            mrr: ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n,
            hits1: hits(1.0),
            hits3: hits(3.0),
            hits10: hits(10.0),
        }
    }
}

/// Head/tail, value-only and all-position breakdowns from one ranked list.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub ht: Breakdown,
    pub value: Breakdown,
    pub all: Breakdown,
}

impl Metrics {
    /// `ranks[i]` belongs to `queries[i]`.
    pub fn from_ranks(queries: &[QueryFact], ranks: &[f64]) -> Result<Self> {
        if queries.len() != ranks.len() {
            return Err(Error::Contract(format!(
                "{} queries but {} ranks",
                queries.len(),
                ranks.len()
            )));
        }
        let mut ht = Vec::new();
        let mut val = Vec::new();
        for (q, &r) in queries.iter().zip(ranks) {
            if q.masked.is_primary() {
                ht.push(r);
            } else {
                val.push(r);
            }
        }
        let mut all: Vec<f64> = ranks.to_vec();
        Ok(Metrics {
            ht: Breakdown::from_ranks(&mut ht),
            value: Breakdown::from_ranks(&mut val),
            all: Breakdown::from_ranks(&mut all),
        })
    }

    pub fn mrr_ht(&self) -> f64 {
        self.ht.mrr
    }

    pub fn mrr_all(&self) -> f64 {
        self.all.mrr
    }
}

/// Anything that scores every entity for a query.
pub trait Scorer {
    fn scores(&self, q: &QueryFact) -> Result<Vec<f64>>;
}

/// Scores from a trained model over a fixed inference context.
pub struct ModelScorer<'a, T> {
    pub model: &'a Thor<T>,
    pub context: GraphContext,
}

impl<'a, T: Real> ModelScorer<'a, T> {
    /// Foundation graphs are built once from `kg_inf`; queries are not in it.
    pub fn new(model: &'a Thor<T>, kg_inf: &Hkg) -> Result<Self> {
        Ok(ModelScorer {
            model,
            context: GraphContext::build(kg_inf, model.config(), None)?,
        })
    }
}

impl<T: Real> Scorer for ModelScorer<'_, T> {
    fn scores(&self, q: &QueryFact) -> Result<Vec<f64>> {
        Ok(self
            .model
            .scores(&self.context, q)?
            .into_iter()
            .map(|x| x.as_f64())
            .collect())
    }
}

/// Equal score for every entity.
pub struct UniformScorer(pub usize);

impl Scorer for UniformScorer {
    fn scores(&self, _: &QueryFact) -> Result<Vec<f64>> {
        Ok(alloc::vec![1.0 / self.0 as f64; self.0])
    }
}

/// All mass on the answer.
pub struct OracleScorer(pub usize);

impl Scorer for OracleScorer {
    fn scores(&self, q: &QueryFact) -> Result<Vec<f64>> {
        let mut s = alloc::vec![0.0; self.0];
        let a = q.answer.ok_or_else(|| Error::Data("query has no answer".into()))?;
        *s.get_mut(a.index()).ok_or(Error::Index {
            what: "entities",
            index: a.index(),
            len: self.0,
        })? = 1.0;
        Ok(s)
    }
}

/// Rank of each query's answer. `filter = None` gives raw ranks.
pub fn rank_queries<S: Scorer + ?Sized>(scorer: &S, queries: &[QueryFact], filter: Option<&FilterIndex>) -> Result<Vec<f64>> {
    queries.iter().map(|q| rank_query(scorer, q, filter)).collect()
}

pub fn rank_query<S: Scorer + ?Sized>(scorer: &S, q: &QueryFact, filter: Option<&FilterIndex>) -> Result<f64> {
    let answer = q.answer.ok_or_else(|| Error::Data("query has no answer".into()))?;
    let scores = scorer.scores(q)?;
    let out = filter.map(|f| f.filter_for(q)).unwrap_or_default();
    rank_of(&scores, answer.index(), &out)
}

pub fn evaluate<S: Scorer + ?Sized>(scorer: &S, queries: &[QueryFact], filter: Option<&FilterIndex>) -> Result<Metrics> {
    let ranks = rank_queries(scorer, queries, filter)?;
    Metrics::from_ranks(queries, &ranks)
}

/// Evaluate `model` on `queries` over inference graph `kg_inf`, filtering
/// with `known`.
pub fn evaluate_model<T: Real>(model: &Thor<T>, kg_inf: &Hkg, queries: &[QueryFact], known: Option<&FilterIndex>) -> Result<Metrics> {
    let scorer = ModelScorer::new(model, kg_inf)?;
    evaluate(&scorer, queries, known)
}
