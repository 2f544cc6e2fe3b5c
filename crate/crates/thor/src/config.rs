//! `key = value` run configuration shared by every subcommand.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thor_core::decoder::DecoderConfig;
use thor_core::interaction::{Ablation, InteractionConfig, InteractionSet};
use thor_core::model::ModelConfig;
use thor_core::split::{check_ratios, SplitConfig, SplitMethod};
use thor_core::train::TrainConfig;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bundle: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: usize,
    pub ablation: Ablation,
    /// Explicit interaction lists override the ablation preset.
    pub relation_interactions: Option<String>,
    pub entity_interactions: Option<String>,
    pub train: TrainConfig,
    pub split: SplitConfig,
    pub raw: bool,
    pub transductive: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            bundle: None,
            checkpoint: None,
            out: None,
            threads: 1,
            ablation: Ablation::Default,
            relation_interactions: None,
            entity_interactions: None,
            train: TrainConfig::default(),
            split: SplitConfig::default(),
            raw: false,
            transductive: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Usage(format!("invalid value {v:?} for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Usage(format!("invalid boolean {v:?} for `{key}`"))),
    }
}

fn path_str(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "-".to_string(), |p| p.display().to_string())
}

impl RunConfig {
    /// Set one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let path = || if v == "-" { None } else { Some(PathBuf::from(v)) };
        let m = &mut self.train.model;
        match key {
            "bundle" => self.bundle = path(),
            "checkpoint" => self.checkpoint = path(),
            "out" => self.out = path(),
            "threads" => self.threads = parse(key, v)?,
            "ablation" => self.ablation = parse(key, v)?,
            "relation_interactions" => self.relation_interactions = (v != "-").then(|| v.to_string()),
            "entity_interactions" => self.entity_interactions = (v != "-").then(|| v.to_string()),
            "seed" => self.train.seed = parse(key, v)?,
            "epochs" => self.train.epochs = parse(key, v)?,
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "learning_rate" => self.train.learning_rate = parse(key, v)?,
            "clip_norm" => self.train.clip_norm = parse(key, v)?,
            "leakage_guard" => self.train.leakage_guard = parse_bool(key, v)?,
            "checkpoint_every" => self.train.checkpoint_every = parse(key, v)?,
            "max_queries_per_epoch" => {
                self.train.max_queries_per_epoch = if v == "-" { None } else { Some(parse(key, v)?) }
            }
            "width" => m.width = parse(key, v)?,
            "encoder_layers" => m.encoder_layers = parse(key, v)?,
            "encoder_residual" => m.encoder_residual = parse_bool(key, v)?,
            "encoder_layer_norm" => m.encoder_layer_norm = parse_bool(key, v)?,
            "heads" => m.decoder.heads = parse(key, v)?,
            "decoder_layers" => m.decoder.layers = parse(key, v)?,
            "ffn_multiplier" => m.decoder.ffn_multiplier = parse(key, v)?,
            "zero_other_bias" => m.decoder.zero_other = parse_bool(key, v)?,
            "split_method" => {
                self.split.method = match v {
                    "louvain" => SplitMethod::LouvainCluster,
                    "khop" => SplitMethod::KHopSeed,
                    _ => return Err(Error::Usage(format!("split_method must be louvain or khop, got {v:?}"))),
                }
            }
            "seed_facts" => self.split.seed_facts = parse(key, v)?,
            "hops" => self.split.hops = parse(key, v)?,
            "ratios" => {
                let parts: Vec<f64> = v.split(',').map(|p| parse(key, p.trim())).collect::<Result<_>>()?;
                let [a, b, c] = parts[..] else {
                    return Err(Error::Usage("ratios needs three comma-separated numbers".into()));
                };
                check_ratios((a, b, c)).map_err(|e| Error::Usage(e.to_string()))?;
                self.split.ratios = (a, b, c);
            }
            "relation_disjoint" => self.split.relation_disjoint = parse_bool(key, v)?,
            "raw" => self.raw = parse_bool(key, v)?,
            "transductive" => self.transductive = parse_bool(key, v)?,
            _ => return Err(Error::Usage(format!("unknown configuration key `{key}`"))),
        }
        self.sync();
        Ok(())
    }

    /// One seed drives both training and splitting.
    fn sync(&mut self) {
        self.split.seed = self.train.seed;
    }

    /// Resolve interaction sets and wiring into the model config.
    pub fn resolve(&mut self) -> Result<()> {
        let mut ic: InteractionConfig = self.ablation.interactions();
        if let Some(r) = &self.relation_interactions {
            ic = InteractionConfig::new(InteractionSet::parse_list(r)?, ic.entity)?;
        }
        if let Some(e) = &self.entity_interactions {
            ic = InteractionConfig::new(ic.relation, InteractionSet::parse_list(e)?)?;
        }
        // canonical form: overrides kept only where they differ from the preset
        let preset = self.ablation.interactions();
        self.relation_interactions = (ic.relation != preset.relation).then(|| ic.relation.to_string());
        self.entity_interactions = (ic.entity != preset.entity).then(|| ic.entity.to_string());
        self.train.model.interactions = ic;
        self.train.model.wiring = self.ablation.wiring();
        self.train.validate()?;
        if self.threads == 0 {
            return Err(Error::Usage("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Take model and training keys from `stored` (a checkpoint's
    /// configuration), keeping this run's paths and evaluation switches.
    pub fn adopt_model(&mut self, stored: &RunConfig) {
        self.ablation = stored.ablation;
        self.relation_interactions = stored.relation_interactions.clone();
        self.entity_interactions = stored.entity_interactions.clone();
        self.train = stored.train;
        self.split = stored.split;
    }

    /// Apply a config file: `key = value` lines, `#` comments, blank lines.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Usage(format!("config line {}: expected `key = value`", i + 1)));
            };
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Usage(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// Every effective value, in a fixed order that parses back.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let m: &ModelConfig = &t.model;
        let d: &DecoderConfig = &m.decoder;
        let s = &self.split;
        vec![
            ("bundle", path_str(&self.bundle)),
            ("checkpoint", path_str(&self.checkpoint)),
            ("out", path_str(&self.out)),
            ("threads", self.threads.to_string()),
            ("ablation", self.ablation.to_string()),
            ("relation_interactions", m.interactions.relation.to_string()),
            ("entity_interactions", m.interactions.entity.to_string()),
            ("seed", t.seed.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("clip_norm", t.clip_norm.to_string()),
            ("leakage_guard", t.leakage_guard.to_string()),
            ("checkpoint_every", t.checkpoint_every.to_string()),
            (
                "max_queries_per_epoch",
                t.max_queries_per_epoch.map_or_else(|| "-".into(), |n| n.to_string()),
            ),
            ("width", m.width.to_string()),
            ("encoder_layers", m.encoder_layers.to_string()),
            ("encoder_residual", m.encoder_residual.to_string()),
            ("encoder_layer_norm", m.encoder_layer_norm.to_string()),
            ("heads", d.heads.to_string()),
            ("decoder_layers", d.layers.to_string()),
            ("ffn_multiplier", d.ffn_multiplier.to_string()),
            ("zero_other_bias", d.zero_other.to_string()),
            (
                "split_method",
                match s.method {
                    SplitMethod::LouvainCluster => "louvain".into(),
                    SplitMethod::KHopSeed => "khop".into(),
                },
            ),
            ("seed_facts", s.seed_facts.to_string()),
            ("hops", s.hops.to_string()),
            ("ratios", format!("{},{},{}", s.ratios.0, s.ratios.1, s.ratios.2)),
            ("relation_disjoint", s.relation_disjoint.to_string()),
            ("raw", self.raw.to_string()),
            ("transductive", self.transductive.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Short hash of the model and training keys (paths excluded).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if matches!(k, "bundle" | "checkpoint" | "out" | "threads") {
                continue;
            }
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
