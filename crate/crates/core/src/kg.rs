//! Hyper-relational facts, knowledge graphs and masked queries.

use core::borrow::Borrow;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Dense index of an entity inside one [`Hkg`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

/// Dense index of a relation (primary relation or qualifier key) inside one [`Hkg`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Semantic position of an element inside a fact. `Key(i)`/`Value(i)` are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PositionRole {
    Head,
    Tail,
    PrimaryRelation,
    Key(usize),
    Value(usize),
}

/// Entity position hidden by a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MaskedPosition {
    Head,
    Tail,
    Value(usize),
}

impl MaskedPosition {
    pub fn role(self) -> PositionRole {
        match self {
            MaskedPosition::Head => PositionRole::Head,
            MaskedPosition::Tail => PositionRole::Tail,
            MaskedPosition::Value(i) => PositionRole::Value(i),
        }
    }

    /// Head and tail queries form the "H/T" breakdown of the metrics.
    pub fn is_primary(self) -> bool {
        !matches!(self, MaskedPosition::Value(_))
    }
}

impl fmt::Display for MaskedPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskedPosition::Head => f.write_str("head"),
            MaskedPosition::Tail => f.write_str("tail"),
            MaskedPosition::Value(i) => write!(f, "value{i}"),
        }
    }
}

/// A fact as it appears at the boundary: opaque string identifiers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HyperFact {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub qualifiers: Vec<(String, String)>,
}

impl HyperFact {
    pub fn new(head: &str, relation: &str, tail: &str) -> Self {
        HyperFact {
            head: head.to_string(),
            relation: relation.to_string(),
            tail: tail.to_string(),
            qualifiers: Vec::new(),
        }
    }

    pub fn with_qualifier(mut self, key: &str, value: &str) -> Self {
        self.qualifiers.push((key.to_string(), value.to_string()));
        self
    }

    pub fn arity(&self) -> usize {
        self.qualifiers.len()
    }
}

/// A fact over dense ids of one [`Hkg`]. Qualifier order is significant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
    pub qualifiers: Vec<(RelationId, EntityId)>,
}

impl Fact {
    pub fn triple(head: u32, relation: u32, tail: u32) -> Self {
        Fact {
            head: EntityId(head),
            relation: RelationId(relation),
            tail: EntityId(tail),
            qualifiers: Vec::new(),
        }
    }

    pub fn with_qualifier(mut self, key: u32, value: u32) -> Self {
        self.qualifiers.push((RelationId(key), EntityId(value)));
        self
    }

    /// Number of qualifier pairs.
    pub fn arity(&self) -> usize {
        self.qualifiers.len()
    }

    pub fn entity_at(&self, pos: MaskedPosition) -> Option<EntityId> {
        match pos {
            MaskedPosition::Head => Some(self.head),
            MaskedPosition::Tail => Some(self.tail),
            MaskedPosition::Value(i) => self.qualifiers.get(i).map(|&(_, v)| v),
        }
    }

    pub fn set_entity_at(&mut self, pos: MaskedPosition, e: EntityId) {
        match pos {
            MaskedPosition::Head => self.head = e,
            MaskedPosition::Tail => self.tail = e,
            MaskedPosition::Value(i) => self.qualifiers[i].1 = e,
        }
    }

    /// Entity positions in canonical order: head, tail, value 0..n.
    pub fn entity_positions(&self) -> impl Iterator<Item = MaskedPosition> {
        [MaskedPosition::Head, MaskedPosition::Tail]
            .into_iter()
            .chain((0..self.arity()).map(MaskedPosition::Value))
    }

    /// Every `(role, entity)` occurrence.
    pub fn entity_occurrences(&self) -> impl Iterator<Item = (PositionRole, EntityId)> + '_ {
        [(PositionRole::Head, self.head), (PositionRole::Tail, self.tail)]
            .into_iter()
            .chain(
                self.qualifiers
                    .iter()
                    .enumerate()
                    .map(|(i, &(_, v))| (PositionRole::Value(i), v)),
            )
    }

    /// Every `(role, relation)` occurrence: primary relation then keys.
    pub fn relation_occurrences(&self) -> impl Iterator<Item = (PositionRole, RelationId)> + '_ {
        core::iter::once((PositionRole::PrimaryRelation, self.relation)).chain(
            self.qualifiers
                .iter()
                .enumerate()
                .map(|(i, &(k, _))| (PositionRole::Key(i), k)),
        )
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.entity_occurrences().map(|(_, e)| e)
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        self.relation_occurrences().map(|(_, r)| r)
    }

    /// Apply an entity map and a relation map (`new = map[old]`).
    pub fn relabeled(&self, entity_map: &[u32], relation_map: &[u32]) -> Fact {
        Fact {
            head: EntityId(entity_map[self.head.index()]),
            relation: RelationId(relation_map[self.relation.index()]),
            tail: EntityId(entity_map[self.tail.index()]),
            qualifiers: self
                .qualifiers
                .iter()
                .map(|&(k, v)| {
                    (
                        RelationId(relation_map[k.index()]),
                        EntityId(entity_map[v.index()]),
                    )
                })
                .collect(),
        }
    }
}

/// Interned identifier table; ids are assigned in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    lookup: BTreeMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from a list of names; duplicates keep their first position.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Vocab::new();
        for n in names {
            v.intern(n.as_ref());
        }
        v
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.lookup.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.lookup.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lookup.contains_key(name)
    }

    /// Reorder so that the name at old position `i` moves to `perm[i]`.
    fn permuted(&self, perm: &[u32]) -> Vocab {
        let mut names = alloc::vec![String::new(); self.names.len()];
        for (old, name) in self.names.iter().enumerate() {
            names[perm[old] as usize] = name.clone();
        }
        let lookup = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        Vocab { names, lookup }
    }
}

/// Where an id occurs: fact index plus position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Occurrence {
    pub fact: usize,
    pub role: PositionRole,
}

/// A hyper-relational knowledge graph: vocabularies, facts and occurrence indices.
///
/// Immutable once built. Facts may repeat; duplicates are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hkg {
    entities: Vocab,
    relations: Vocab,
    // ids at or beyond these bounds were referenced by facts but never declared
    declared_entities: usize,
    declared_relations: usize,
    facts: Vec<Fact>,
    entity_index: Vec<Vec<Occurrence>>,
    relation_index: Vec<Vec<Occurrence>>,
}

impl Default for Hkg {
    fn default() -> Self {
        Hkg::from_hyper_facts(core::iter::empty::<HyperFact>())
    }
}

impl Hkg {
    /// Build from boundary facts; vocabularies follow first-seen order
    /// (head, relation, tail, then key/value pairs, fact by fact).
    pub fn from_hyper_facts<I>(facts: I) -> Self
    where
        I: IntoIterator,
        I::Item: core::borrow::Borrow<HyperFact>,
    {
        Self::with_vocabularies(Vocab::new(), Vocab::new(), facts, true)
    }

    /// Build with explicitly declared vocabularies. Names used by facts but
    /// absent from the declarations are still interned (after the declared
    /// ones) and reported by [`Hkg::validate`].
    pub fn with_declared_vocabularies<I>(entities: Vocab, relations: Vocab, facts: I) -> Self
    where
        I: IntoIterator,
        I::Item: core::borrow::Borrow<HyperFact>,
    {
        Self::with_vocabularies(entities, relations, facts, false)
    }

    fn with_vocabularies<I>(mut entities: Vocab, mut relations: Vocab, facts: I, open: bool) -> Self
    where
        I: IntoIterator,
        I::Item: core::borrow::Borrow<HyperFact>,
    {
        let declared_e = entities.len();
        let declared_r = relations.len();
        let facts: Vec<Fact> = facts
            .into_iter()
            .map(|hf| {
                let hf = hf.borrow();
                let head = EntityId(entities.intern(&hf.head));
                let relation = RelationId(relations.intern(&hf.relation));
                let tail = EntityId(entities.intern(&hf.tail));
                let qualifiers = hf
                    .qualifiers
                    .iter()
                    .map(|(k, v)| (RelationId(relations.intern(k)), EntityId(entities.intern(v))))
                    .collect();
                Fact {
                    head,
                    relation,
                    tail,
                    qualifiers,
                }
            })
            .collect();
        let (declared_entities, declared_relations) = if open {
            (entities.len(), relations.len())
        } else {
            (declared_e, declared_r)
        };
        Self::assemble(entities, relations, declared_entities, declared_relations, facts)
    }

    /// Build from dense facts over given vocabularies.
    pub fn from_facts(entities: Vocab, relations: Vocab, facts: Vec<Fact>) -> Result<Self> {
        for f in &facts {
            if let Some(e) = f.entities().find(|e| e.index() >= entities.len()) {
                return Err(Error::Index {
                    what: "entity vocabulary",
                    index: e.index(),
                    len: entities.len(),
                });
            }
            if let Some(r) = f.relations().find(|r| r.index() >= relations.len()) {
                return Err(Error::Index {
                    what: "relation vocabulary",
                    index: r.index(),
                    len: relations.len(),
                });
            }
        }
        let (de, dr) = (entities.len(), relations.len());
        Ok(Self::assemble(entities, relations, de, dr, facts))
    }

    fn assemble(
        entities: Vocab,
        relations: Vocab,
        declared_entities: usize,
        declared_relations: usize,
        facts: Vec<Fact>,
    ) -> Self {
        let (entity_index, relation_index) = build_indices(&facts, entities.len(), relations.len());
        Hkg {
            entities,
            relations,
            declared_entities,
            declared_relations,
            facts,
            entity_index,
            relation_index,
        }
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_facts(&self) -> usize {
        self.facts.len()
    }

    pub fn entity_occurrences(&self, e: EntityId) -> &[Occurrence] {
        &self.entity_index[e.index()]
    }

    pub fn relation_occurrences(&self, r: RelationId) -> &[Occurrence] {
        &self.relation_index[r.index()]
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        self.entities.name(e.0).unwrap_or("")
    }

    pub fn relation_name(&self, r: RelationId) -> &str {
        self.relations.name(r.0).unwrap_or("")
    }

    /// Convert a dense fact back to boundary form.
    pub fn to_hyper_fact(&self, f: &Fact) -> HyperFact {
        HyperFact {
            head: self.entity_name(f.head).to_string(),
            relation: self.relation_name(f.relation).to_string(),
            tail: self.entity_name(f.tail).to_string(),
            qualifiers: f
                .qualifiers
                .iter()
                .map(|&(k, v)| {
                    (
                        self.relation_name(k).to_string(),
                        self.entity_name(v).to_string(),
                    )
                })
                .collect(),
        }
    }

    pub fn hyper_facts(&self) -> impl Iterator<Item = HyperFact> + '_ {
        self.facts.iter().map(|f| self.to_hyper_fact(f))
    }

    /// Map a boundary fact into this graph's ids.
    pub fn resolve(&self, hf: &HyperFact) -> Result<Fact> {
        let ent = |name: &str| {
            self.entities
                .get(name)
                .map(EntityId)
                .ok_or_else(|| Error::Vocabulary {
                    kind: "entity",
                    id: name.to_string(),
                })
        };
        let rel = |name: &str| {
            self.relations
                .get(name)
                .map(RelationId)
                .ok_or_else(|| Error::Vocabulary {
                    kind: "relation",
                    id: name.to_string(),
                })
        };
        Ok(Fact {
            head: ent(&hf.head)?,
            relation: rel(&hf.relation)?,
            tail: ent(&hf.tail)?,
            qualifiers: hf
                .qualifiers
                .iter()
                .map(|(k, v)| Ok((rel(k)?, ent(v)?)))
                .collect::<Result<_>>()?,
        })
    }

    /// New graph holding the selected facts, with fresh first-seen vocabularies.
    pub fn subset(&self, fact_indices: &[usize]) -> Hkg {
        Hkg::from_hyper_facts(fact_indices.iter().map(|&i| self.to_hyper_fact(&self.facts[i])))
    }

    /// Relabel entities and relations by bijections (`new = perm[old]`).
    /// Vocabulary names travel with their ids; fact order is unchanged.
    pub fn permuted(&self, entity_perm: &[u32], relation_perm: &[u32]) -> Result<Hkg> {
        check_permutation(entity_perm, self.num_entities(), "entity permutation")?;
        check_permutation(relation_perm, self.num_relations(), "relation permutation")?;
        let facts = self
            .facts
            .iter()
            .map(|f| f.relabeled(entity_perm, relation_perm))
            .collect();
        Hkg::from_facts(
            self.entities.permuted(entity_perm),
            self.relations.permuted(relation_perm),
            facts,
        )
    }

    /// Check every invariant; violations are returned as data.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut entity_used = alloc::vec![false; self.entities.len()];
        let mut relation_used = alloc::vec![false; self.relations.len()];
        for (fi, f) in self.facts.iter().enumerate() {
            for (role, e) in f.entity_occurrences() {
                if e.index() >= self.declared_entities {
                    violations.push(Violation::UnknownEntity {
                        fact: fi,
                        role,
                        id: self.entities.name(e.0).unwrap_or("?").to_string(),
                    });
                }
                if let Some(u) = entity_used.get_mut(e.index()) {
                    *u = true;
                }
            }
            for (role, r) in f.relation_occurrences() {
                if r.index() >= self.declared_relations {
                    violations.push(Violation::UnknownRelation {
                        fact: fi,
                        role,
                        id: self.relations.name(r.0).unwrap_or("?").to_string(),
                    });
                }
                if let Some(u) = relation_used.get_mut(r.index()) {
                    *u = true;
                }
            }
        }
        for (i, used) in entity_used.iter().enumerate().take(self.declared_entities) {
            if !used {
                violations.push(Violation::OrphanEntity {
                    id: self.entities.names()[i].clone(),
                });
            }
        }
        for (i, used) in relation_used.iter().enumerate().take(self.declared_relations) {
            if !used {
                violations.push(Violation::OrphanRelation {
                    id: self.relations.names()[i].clone(),
                });
            }
        }
        let (ei, ri) = build_indices(&self.facts, self.entities.len(), self.relations.len());
        if ei != self.entity_index || ri != self.relation_index {
            violations.push(Violation::IndexMismatch);
        }
        ValidationReport { violations }
    }
}

fn check_permutation(perm: &[u32], n: usize, what: &'static str) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Contract(alloc::format!(
            "{what} has length {} but vocabulary has {n}",
            perm.len()
        )));
    }
    let mut seen = alloc::vec![false; n];
    for &p in perm {
        let slot = seen.get_mut(p as usize).ok_or(Error::Index {
            what,
            index: p as usize,
            len: n,
        })?;
        if *slot {
            return Err(Error::Contract(alloc::format!("{what} is not a bijection")));
        }
        *slot = true;
    }
    Ok(())
}

#[allow(clippy::type_complexity)]
fn build_indices(
    facts: &[Fact],
    n_entities: usize,
    n_relations: usize,
) -> (Vec<Vec<Occurrence>>, Vec<Vec<Occurrence>>) {
    let mut ent = alloc::vec![Vec::new(); n_entities];
    let mut rel = alloc::vec![Vec::new(); n_relations];
    for (fact, f) in facts.iter().enumerate() {
        for (role, e) in f.entity_occurrences() {
            if let Some(list) = ent.get_mut(e.index()) {
                list.push(Occurrence { fact, role });
            }
        }
        for (role, r) in f.relation_occurrences() {
            if let Some(list) = rel.get_mut(r.index()) {
                list.push(Occurrence { fact, role });
            }
        }
    }
    (ent, rel)
}

/// One broken invariant, located by fact index and role where applicable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownEntity {
        fact: usize,
        role: PositionRole,
        id: String,
    },
    UnknownRelation {
        fact: usize,
        role: PositionRole,
        id: String,
    },
    OrphanEntity {
        id: String,
    },
    OrphanRelation {
        id: String,
    },
    IndexMismatch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownEntity { fact, role, id } => {
                write!(f, "fact {fact} {role:?}: entity `{id}` not in vocabulary")
            }
            Violation::UnknownRelation { fact, role, id } => {
                write!(f, "fact {fact} {role:?}: relation `{id}` not in vocabulary")
            }
            Violation::OrphanEntity { id } => write!(f, "entity `{id}` is never used"),
            Violation::OrphanRelation { id } => write!(f, "relation `{id}` is never used"),
            Violation::IndexMismatch => f.write_str("occurrence indices disagree with facts"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A fact with one entity position hidden.
///
/// `fact` still carries an entity in the masked slot (the answer when known);
/// model code never reads it. `source` is the index of the fact in the graph
/// the query was generated from, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryFact {
    pub fact: Fact,
    pub masked: MaskedPosition,
    pub answer: Option<EntityId>,
    pub source: Option<usize>,
}

impl QueryFact {
    pub fn new(fact: Fact, masked: MaskedPosition) -> Result<Self> {
        let answer = fact.entity_at(masked).ok_or_else(|| {
            Error::Contract(alloc::format!(
                "masked position {masked} invalid for arity {}",
                fact.arity()
            ))
        })?;
        Ok(QueryFact {
            fact,
            masked,
            answer: Some(answer),
            source: None,
        })
    }

    /// Query without a known answer (ad-hoc prediction).
    pub fn unanswered(fact: Fact, masked: MaskedPosition) -> Result<Self> {
        let mut q = Self::new(fact, masked)?;
        q.answer = None;
        Ok(q)
    }

    pub fn check(&self) -> Result<()> {
        let at = self.fact.entity_at(self.masked).ok_or_else(|| {
            Error::Contract(alloc::format!(
                "masked position {} invalid for arity {}",
                self.masked,
                self.fact.arity()
            ))
        })?;
        match self.answer {
            Some(a) if a != at => Err(Error::Contract(
                "answer differs from entity at masked position".to_string(),
            )),
            _ => Ok(()),
        }
    }

    /// Entities visible to the model: every entity position except the masked one.
    pub fn visible_entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.fact
            .entity_positions()
            .filter(move |&p| p != self.masked)
            .filter_map(move |p| self.fact.entity_at(p))
    }
}

/// One query per entity position of every fact: fact order, then head, tail, values.
pub fn generate_queries(kg: &Hkg) -> Vec<QueryFact> {
    queries_for_facts(kg.facts())
}

pub fn queries_for_facts(facts: &[Fact]) -> Vec<QueryFact> {
    let mut out = Vec::with_capacity(facts.iter().map(|f| 2 + f.arity()).sum());
    for (i, f) in facts.iter().enumerate() {
        for pos in f.entity_positions() {
            out.push(QueryFact {
                fact: f.clone(),
                masked: pos,
                answer: f.entity_at(pos),
                source: Some(i),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn einstein() -> HyperFact {
        HyperFact::new("AlbertEinstein", "educated_at", "ETH_Zurich")
            .with_qualifier("academic_degree", "BSc")
            .with_qualifier("academic_major", "math_education")
    }

    #[test]
    fn empty_graph_is_valid() {
        assert!(Hkg::default().validate().is_ok());
    }

    #[test]
    fn einstein_fact_validates() {
        let kg = Hkg::from_hyper_facts([einstein()]);
        assert!(kg.validate().is_ok());
        assert_eq!(kg.num_entities(), 4);
        assert_eq!(kg.num_relations(), 3);
        assert_eq!(kg.facts()[0].arity(), 2);
    }

    #[test]
    fn undeclared_entity_is_reported_by_name() {
        let ents = Vocab::from_names(["a", "b"]);
        let rels = Vocab::from_names(["r"]);
        let kg = Hkg::with_declared_vocabularies(ents, rels, [HyperFact::new("a", "r", "ghost")]);
        let report = kg.validate();
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::UnknownEntity { fact: 0, role: PositionRole::Tail, id } if id == "ghost"
        )));
        // b is declared but never used
        assert!(report
            .violations
            .contains(&Violation::OrphanEntity { id: "b".into() }));
    }

    #[test]
    fn validate_is_idempotent() {
        let kg = Hkg::with_declared_vocabularies(
            Vocab::from_names(["x"]),
            Vocab::new(),
            [HyperFact::new("a", "r", "b")],
        );
        assert_eq!(kg.validate(), kg.validate());
    }

    #[test]
    fn vocab_is_first_seen_order() {
        let kg = Hkg::from_hyper_facts([
            HyperFact::new("z", "r2", "y").with_qualifier("k", "a"),
            HyperFact::new("a", "r1", "z"),
        ]);
        assert_eq!(kg.entities().names(), &["z", "y", "a"]);
        assert_eq!(kg.relations().names(), &["r2", "k", "r1"]);
    }

    #[test]
    fn query_counts() {
        let kg = Hkg::from_hyper_facts([HyperFact::new("a", "r", "b")]);
        let qs = generate_queries(&kg);
        assert_eq!(qs.len(), 2);
        assert_eq!(qs[0].masked, MaskedPosition::Head);
        assert_eq!(qs[1].masked, MaskedPosition::Tail);

        let kg = Hkg::from_hyper_facts([einstein()]);
        assert_eq!(generate_queries(&kg).len(), 4);

        // qualifier counts (0, 1, 2) -> 2 + 3 + 4
        let kg = Hkg::from_hyper_facts([
            HyperFact::new("a", "r", "b"),
            HyperFact::new("a", "r", "c").with_qualifier("k", "d"),
            einstein(),
        ]);
        let qs = generate_queries(&kg);
        assert_eq!(qs.len(), 9);
        for q in &qs {
            q.check().unwrap();
        }
        assert_eq!(qs[8].masked, MaskedPosition::Value(1));
    }

    #[test]
    fn query_position_must_fit_arity() {
        let f = Fact::triple(0, 0, 1);
        assert!(QueryFact::new(f.clone(), MaskedPosition::Value(0)).is_err());
        let mut q = QueryFact::new(f, MaskedPosition::Tail).unwrap();
        q.answer = Some(EntityId(0));
        assert!(q.check().is_err());
    }

    #[test]
    fn duplicate_qualifiers_stay_distinct_positions() {
        let kg = Hkg::from_hyper_facts([HyperFact::new("a", "r", "b")
            .with_qualifier("k", "v")
            .with_qualifier("k", "v")]);
        assert_eq!(kg.facts()[0].arity(), 2);
        assert_eq!(kg.entity_occurrences(EntityId(2)).len(), 2);
    }

    #[test]
    fn permutation_moves_names_with_ids() {
        let kg = Hkg::from_hyper_facts([einstein()]);
        let kg2 = kg.permuted(&[3, 2, 1, 0], &[2, 0, 1]).unwrap();
        assert!(kg2.validate().is_ok());
        assert_eq!(kg2.to_hyper_fact(&kg2.facts()[0]), einstein());
        assert!(kg.permuted(&[0, 0, 1, 2], &[0, 1, 2]).is_err());
    }

    #[test]
    fn resolve_maps_names() {
        let kg = Hkg::from_hyper_facts([einstein()]);
        assert_eq!(kg.resolve(&einstein()).unwrap(), kg.facts()[0]);
        let bad = HyperFact::new("nobody", "educated_at", "ETH_Zurich");
        assert!(matches!(kg.resolve(&bad), Err(Error::Vocabulary { .. })));
    }
}
