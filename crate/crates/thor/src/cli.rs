//! Argument parsing and subcommand dispatch.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thor_core::graph::{build_entity_graph, build_relation_graph};

use crate::bundle::{load_bundle, DatasetBundle};
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::read_kg;
use crate::pipeline::{eval_target, evaluate_parallel, parse_query, predict, split_to_bundle, train_bundle};
use crate::report::{counts_table, graph_stats_report, metrics_table, metrics_tsv};
use crate::selfcheck;

#[derive(Debug, Parser)]
#[command(name = "thor", version, about = "Fully-inductive link prediction on hyper-relational knowledge graphs")]
pub struct Cli {
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Worker threads for evaluation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Interaction preset: default, noR2K, noPrim, addK2K, addShareV, addAllFI, noV2V, noP2V, noV, ultra-alike.
    #[arg(long, global = true)]
    pub ablation: Option<String>,
    /// Seed for splitting, initialization and shuffling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an inductive bundle from a raw fact file.
    Split(SplitArgs),
    /// Train on a bundle and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a bundle.
    Eval(EvalArgs),
    /// Foundation-graph statistics for a fact file or bundle part.
    GraphStats(GraphStatsArgs),
    /// Run the gradient, equivariance and graph-oracle suites.
    Selfcheck(SelfcheckArgs),
    /// Score one query against an inference graph.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Raw fact file.
    #[arg(long)]
    pub input: PathBuf,
    /// Output bundle directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// louvain or khop.
    #[arg(long)]
    pub method: Option<String>,
    /// Seed facts for the k-hop split.
    #[arg(long)]
    pub seed_facts: Option<usize>,
    /// Hops grown around the seed facts.
    #[arg(long)]
    pub hops: Option<usize>,
    /// Inference, valid and test shares, e.g. 0.8,0.1,0.1.
    #[arg(long)]
    pub ratios: Option<String>,
    /// Drop inductive facts whose relations occur in training.
    #[arg(long)]
    pub relation_disjoint: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Bundle directory.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Model checkpoint path.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Train and evaluate over train and inference merged.
    #[arg(long)]
    pub transductive: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Bundle directory.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Model checkpoint path.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// valid or test.
    #[arg(long, default_value = "test")]
    pub part: String,
    /// Unfiltered ranks.
    #[arg(long)]
    pub raw: bool,
    /// Encode on train and inference merged.
    #[arg(long)]
    pub transductive: bool,
    /// Also write `metric TAB breakdown TAB value` lines here.
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GraphStatsArgs {
    /// Fact file to analyse.
    #[arg(long, conflicts_with = "bundle")]
    pub facts: Option<PathBuf>,
    /// Bundle directory.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Bundle part: train or inference.
    #[arg(long, default_value = "inference")]
    pub part: String,
    /// Write `relation_graph.tsv` and `entity_graph.tsv` edge lists here.
    #[arg(long)]
    pub edges: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    /// Random graphs for the foundation-graph oracle.
    #[arg(long, default_value_t = 200)]
    pub graphs: usize,
    /// Random (graph, query, permutation) triples for equivariance.
    #[arg(long, default_value_t = 100)]
    pub triples: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model checkpoint path.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Inference fact file (or use --bundle's inference part).
    #[arg(long, conflicts_with = "bundle")]
    pub inference: Option<PathBuf>,
    /// Bundle directory.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// `h r t (k v)*` with `?` in the masked entity slot.
    #[arg(long)]
    pub query: String,
    /// Entities to print.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

impl Cli {
    /// Config file, then `--set`, then dedicated flags.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        let mut set = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(k, &v));
        set("threads", self.threads.map(|t| t.to_string()))?;
        set("ablation", self.ablation.clone())?;
        set("seed", self.seed.map(|s| s.to_string()))?;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let flag = |b: bool| b.then(|| "true".to_string());
        match &self.command {
            Command::Split(a) => {
                set("out", path(&a.out))?;
                set("split_method", a.method.clone())?;
                set("seed_facts", a.seed_facts.map(|n| n.to_string()))?;
                set("hops", a.hops.map(|n| n.to_string()))?;
                set("ratios", a.ratios.clone())?;
                set("relation_disjoint", flag(a.relation_disjoint))?;
            }
            Command::Train(a) => {
                set("bundle", path(&a.bundle))?;
                set("checkpoint", path(&a.checkpoint))?;
                set("epochs", a.epochs.map(|n| n.to_string()))?;
                set("transductive", flag(a.transductive))?;
            }
            Command::Eval(a) => {
                set("bundle", path(&a.bundle))?;
                set("checkpoint", path(&a.checkpoint))?;
                set("raw", flag(a.raw))?;
                set("transductive", flag(a.transductive))?;
            }
            Command::GraphStats(a) => set("bundle", path(&a.bundle))?,
            Command::Selfcheck(_) => {}
            Command::Predict(a) => {
                set("bundle", path(&a.bundle))?;
                set("checkpoint", path(&a.checkpoint))?;
            }
        }
        cfg.resolve()?;
        Ok(cfg)
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| Error::Usage(format!("missing {what} (flag or config key)")))
}

pub fn header(cfg: &RunConfig) -> String {
    format!(
        "# thor {} seed={} config={}",
        env!("CARGO_PKG_VERSION"),
        cfg.train.seed,
        cfg.hash()
    )
}

/// Run one parsed command, writing results to `out` and the run log to `log`.
/// Vocabulary overlap and dropped valid/test facts, on the run log.
fn note_diagnostics(log: &mut dyn Write, bundle: &DatasetBundle) {
    let d = &bundle.diagnostics;
    if !d.entity_disjoint() {
        let _ = writeln!(log, "# warning: {} entities shared by train and inference", d.shared_entities.len());
    }
    for u in &d.unresolved {
        let _ = writeln!(log, "# dropped {} fact {}: {}", u.part, u.index + 1, u.reason);
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let mut cfg = cli.run_config()?;
    let ck = match &cli.command {
        Command::Eval(_) | Command::Predict(_) => {
            let ck = Checkpoint::load(required(&cfg.checkpoint, "--checkpoint")?)?;
            cfg.adopt_model(&ck.config);
            Some(ck)
        }
        _ => None,
    };
    let w = |e: std::io::Error| Error::io(std::path::Path::new("<stdout>"), e);
    writeln!(out, "{}", header(&cfg)).map_err(w)?;
    for (k, v) in cfg.entries() {
        let _ = writeln!(log, "# {k} = {v}");
    }
    match &cli.command {
        Command::Split(a) => {
            let dir = required(&cfg.out, "--out")?;
            let raw = read_kg(&a.input)?;
            let report = split_to_bundle(&raw, &cfg, dir)?;
            write!(out, "{report}").map_err(w)?;
        }
        Command::Train(_) => {
            let bundle = load_bundle(required(&cfg.bundle, "--bundle")?)?;
            note_diagnostics(log, &bundle);
            required(&cfg.checkpoint, "--checkpoint")?;
            let parts = bundle.counts();
            write!(out, "{}", counts_table(&parts)).map_err(w)?;
            let outcome = train_bundle(&bundle, &cfg, |l| {
                let _ = writeln!(out, "{l}");
            })?;
            let (lo, hi) = outcome.candidates;
            if !outcome.result.history.is_empty() {
                writeln!(out, "candidates per query: {lo}..={hi} of {} entities", outcome.train_entities).map_err(w)?;
            }
            writeln!(
                out,
                "saved epoch {} to {}",
                outcome.checkpoint.epoch,
                cfg.checkpoint.as_ref().expect("checked").display()
            )
            .map_err(w)?;
        }
        Command::Eval(a) => {
            let ck = ck.expect("loaded above");
            let bundle = load_bundle(required(&cfg.bundle, "--bundle")?)?;
            note_diagnostics(log, &bundle);
            let target = eval_target(&bundle, &a.part, cfg.transductive)?;
            let filter = (!cfg.raw).then_some(&target.filter);
            let m = evaluate_parallel(&ck.model, &target.context, &target.queries, filter, cfg.threads)?;
            writeln!(out, "{} {} ({})", a.part, if cfg.raw { "raw" } else { "filtered" }, if cfg.transductive { "transductive" } else { "inductive" })
                .map_err(w)?;
            write!(out, "{}", metrics_table(&m)).map_err(w)?;
            if let Some(p) = &a.tsv {
                std::fs::write(p, metrics_tsv(&m)).map_err(|e| Error::io(p, e))?;
            }
        }
        Command::GraphStats(a) => {
            let kg = match (&a.facts, &cfg.bundle) {
                (Some(f), _) => read_kg(f)?,
                (None, Some(b)) => {
                    let bundle = load_bundle(b)?;
                    match a.part.as_str() {
                        "train" => bundle.train,
                        "inference" => bundle.inference,
                        p => return Err(Error::Usage(format!("graph-stats part must be train or inference, got `{p}`"))),
                    }
                }
                (None, None) => return Err(Error::Usage("graph-stats needs --facts or --bundle".into())),
            };
            let ic = cfg.train.model.interactions;
            let rel = build_relation_graph(&kg, &ic, None);
            let ent = build_entity_graph(&kg, &ic, None);
            writeln!(out, "{} facts, {} entities, {} relations", kg.num_facts(), kg.num_entities(), kg.num_relations()).map_err(w)?;
            write!(out, "{}", graph_stats_report("relation graph", &rel.stats())).map_err(w)?;
            write!(out, "{}", graph_stats_report("entity graph", &ent.stats())).map_err(w)?;
            if let Some(dir) = &a.edges {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let p = dir.join("relation_graph.tsv");
                std::fs::write(&p, rel.to_edge_list(Some(kg.relations()))).map_err(|e| Error::io(&p, e))?;
                let p = dir.join("entity_graph.tsv");
                std::fs::write(&p, ent.to_edge_list(Some(kg.entities()))).map_err(|e| Error::io(&p, e))?;
            }
        }
        Command::Selfcheck(a) => {
            let suites = vec![
                selfcheck::foundation_oracle_suite(a.graphs, cfg.train.seed),
                selfcheck::gradcheck_suite(1e-4, 1e-3)?,
                selfcheck::equivariance_suite(a.triples, cfg.train.seed, 1e-4)?,
            ];
            for s in &suites {
                writeln!(out, "{}", s.summary()).map_err(w)?;
            }
            let failed: Vec<&str> = suites.iter().filter(|s| !s.passed()).map(|s| s.name).collect();
            if !failed.is_empty() {
                return Err(Error::Invariant(format!("failed suites: {}", failed.join(", "))));
            }
        }
        Command::Predict(a) => {
            let ck = ck.expect("loaded above");
            let kg = match (&a.inference, &cfg.bundle) {
                (Some(f), _) => read_kg(f)?,
                (None, Some(b)) => load_bundle(b)?.inference,
                (None, None) => return Err(Error::Usage("predict needs --inference or --bundle".into())),
            };
            let q = parse_query(&a.query, &kg)?;
            for (i, (name, p)) in predict(&ck.model, &kg, &q, a.top)?.into_iter().enumerate() {
                writeln!(out, "{}\t{name}\t{p:.6}", i + 1).map_err(w)?;
            }
        }
    }
    Ok(())
}

/// Parse `args`, run, and map the outcome to an exit code.
pub fn main_with(args: impl IntoIterator<Item = std::ffi::OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
