//! Four-way dataset bundles: `train`, `inference`, `valid` and `test`.

use std::fs;
use std::path::{Path, PathBuf};

use thor_core::eval::FilterIndex;
use thor_core::kg::{queries_for_facts, Fact, Hkg, HyperFact, QueryFact};
use thor_core::split::vocabulary_overlap;

use crate::error::{Error, Result};
use crate::io::{read_facts, write_facts, write_kg};

pub const PARTS: [&str; 4] = ["train", "inference", "valid", "test"];

/// Locate `<part>.txt`, accepting `.txt.gz`, `.jsonl` and `.jsonl.gz` too.
pub fn part_path(dir: &Path, part: &str) -> Result<PathBuf> {
    for ext in ["txt", "txt.gz", "jsonl", "jsonl.gz"] {
        let p = dir.join(format!("{part}.{ext}"));
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::io(
        &dir.join(format!("{part}.txt")),
        std::io::Error::new(std::io::ErrorKind::NotFound, "bundle file not found"),
    ))
}

/// A valid/test fact that cannot be resolved against the inference graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unresolved {
    pub part: &'static str,
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub shared_entities: Vec<String>,
    pub shared_relations: Vec<String>,
    /// Dropped from the query sets.
    pub unresolved: Vec<Unresolved>,
}

impl Diagnostics {
    pub fn entity_disjoint(&self) -> bool {
        self.shared_entities.is_empty()
    }

    pub fn relation_disjoint(&self) -> bool {
        self.shared_relations.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub train: Hkg,
    pub inference: Hkg,
    /// Valid and test facts over the inference vocabularies.
    pub valid: Vec<Fact>,
    pub test: Vec<Fact>,
    pub raw_valid: Vec<HyperFact>,
    pub raw_test: Vec<HyperFact>,
    pub diagnostics: Diagnostics,
}

/// Facts, entities and relations of one part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartCounts {
    pub facts: usize,
    pub entities: usize,
    pub relations: usize,
}

impl PartCounts {
    pub fn of(kg: &Hkg) -> Self {
        PartCounts {
            facts: kg.num_facts(),
            entities: kg.num_entities(),
            relations: kg.num_relations(),
        }
    }
}

fn resolve_all(inf: &Hkg, raw: &[HyperFact], part: &'static str, diag: &mut Diagnostics) -> Vec<Fact> {
    let mut out = Vec::with_capacity(raw.len());
    for (index, hf) in raw.iter().enumerate() {
        match inf.resolve(hf) {
            Ok(f) => out.push(f),
            Err(e) => diag.unresolved.push(Unresolved {
                part,
                index,
                reason: e.to_string(),
            }),
        }
    }
    out
}

impl DatasetBundle {
    pub fn from_parts(train: Vec<HyperFact>, inference: Vec<HyperFact>, valid: Vec<HyperFact>, test: Vec<HyperFact>) -> Self {
        let train = Hkg::from_hyper_facts(train);
        let inference = Hkg::from_hyper_facts(inference);
        let (shared_entities, shared_relations) = vocabulary_overlap(&train, &inference);
        let mut diagnostics = Diagnostics {
            shared_entities,
            shared_relations,
            unresolved: Vec::new(),
        };
        let v = resolve_all(&inference, &valid, "valid", &mut diagnostics);
        let t = resolve_all(&inference, &test, "test", &mut diagnostics);
        DatasetBundle {
            train,
            inference,
            valid: v,
            test: t,
            raw_valid: valid,
            raw_test: test,
            diagnostics,
        }
    }

    pub fn valid_queries(&self) -> Vec<QueryFact> {
        queries_for_facts(&self.valid)
    }

    pub fn test_queries(&self) -> Vec<QueryFact> {
        queries_for_facts(&self.test)
    }

    /// Inference, valid and test facts: everything known at evaluation time.
    pub fn known_facts(&self) -> FilterIndex {
        let mut idx = FilterIndex::from_facts(self.inference.facts());
        for f in self.valid.iter().chain(&self.test) {
            idx.insert(f);
        }
        idx
    }

    pub fn counts(&self) -> [(&'static str, PartCounts); 4] {
        let list = |facts: &[Fact]| {
            let ents: std::collections::BTreeSet<_> = facts.iter().flat_map(|f| f.entities()).collect();
            let rels: std::collections::BTreeSet<_> = facts.iter().flat_map(|f| f.relations()).collect();
            PartCounts {
                facts: facts.len(),
                entities: ents.len(),
                relations: rels.len(),
            }
        };
        [
            ("train", PartCounts::of(&self.train)),
            ("inference", PartCounts::of(&self.inference)),
            ("valid", list(&self.valid)),
            ("test", list(&self.test)),
        ]
    }

    /// Transductive view: train and inference merged into one context, with
    /// valid/test resolved against it.
    pub fn transductive(&self) -> (Hkg, Vec<Fact>, Vec<Fact>) {
        let ctx = Hkg::from_hyper_facts(self.train.hyper_facts().chain(self.inference.hyper_facts()));
        let mut diag = Diagnostics::default();
        let v = resolve_all(&ctx, &self.raw_valid, "valid", &mut diag);
        let t = resolve_all(&ctx, &self.raw_test, "test", &mut diag);
        (ctx, v, t)
    }
}

/// Load all four parts; per-file parsing runs on separate threads.
pub fn load_bundle(dir: &Path) -> Result<DatasetBundle> {
    let paths = PARTS.map(|p| part_path(dir, p));
    let paths: Vec<PathBuf> = paths.into_iter().collect::<Result<_>>()?;
    let parsed: Vec<Result<Vec<HyperFact>>> = std::thread::scope(|s| {
        let handles: Vec<_> = paths.iter().map(|p| s.spawn(move || read_facts(p))).collect();
        handles.into_iter().map(|h| h.join().expect("parser thread panicked")).collect()
    });
    let mut parts = Vec::with_capacity(4);
    let mut parse_errors = Vec::new();
    for r in parsed {
        match r {
            Ok(f) => parts.push(f),
            Err(Error::Parse(p)) => {
                parse_errors.push(p);
                parts.push(Vec::new());
            }
            Err(e) => return Err(e),
        }
    }
    if !parse_errors.is_empty() {
        let msg = parse_errors.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("\n");
        let first = parse_errors.swap_remove(0);
        return Err(if parse_errors.is_empty() {
            Error::Parse(first)
        } else {
            Error::Data(msg)
        });
    }
    let mut it = parts.into_iter();
    let (tr, inf, va, te) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    Ok(DatasetBundle::from_parts(tr, inf, va, te))
}

/// Write a bundle directory in TSV form.
pub fn write_bundle(dir: &Path, train: &Hkg, inference: &Hkg, valid: &[HyperFact], test: &[HyperFact]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_kg(train, &dir.join("train.txt"))?;
    write_kg(inference, &dir.join("inference.txt"))?;
    write_facts(&dir.join("valid.txt"), valid)?;
    write_facts(&dir.join("test.txt"), test)
}
