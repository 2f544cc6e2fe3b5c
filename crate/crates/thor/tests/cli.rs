use std::ffi::OsString;
use std::fs;
use std::path::Path;

use thor::cli::main_with;
use thor::io::write_facts;
use thor::synth::rule_facts;
use thor_core::kg::HyperFact;

fn run(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<OsString> = std::iter::once("thor").chain(args.iter().copied()).map(OsString::from).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = main_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Two rule families joined internally by hubs, so that Louvain finds one
/// community per group and the largest pieces have several facts.
fn raw_graph(dir: &Path) -> String {
    let mut facts = Vec::new();
    for tag in ["x", "y"] {
        facts.extend(rule_facts(10, tag));
        for g in 0..10 {
            facts.push(HyperFact::new(&format!("{tag}:hub"), &format!("{tag}:r4"), &format!("{tag}:a{g}")));
        }
    }
    let p = dir.join("raw.txt");
    write_facts(&p, &facts).unwrap();
    p.display().to_string()
}

#[test]
fn split_train_eval_predict_round() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let raw = raw_graph(d);
    let bundle = d.join("bundle").display().to_string();
    let ck = d.join("ck/model.bin").display().to_string();

    let (code, out, err) = run(&["split", "--input", &raw, "--out", &bundle, "--ratios", "0.6,0.2,0.2"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("# thor "));
    assert!(out.contains("entity_disjoint = true"));
    assert!(d.join("bundle/split_report.txt").is_file());

    let train = ["train", "--bundle", &bundle, "--checkpoint", &ck, "--epochs", "2", "--set", "width=8", "--set", "heads=2"];
    let (code, out1, err) = run(&train);
    assert_eq!(code, 0, "{err}");
    assert!(out1.contains("epoch 2\t"));
    // config echo goes to the run log
    assert!(err.contains("# width = 8"));
    let bytes1 = fs::read(&ck).unwrap();
    let (_, out2, _) = run(&train);
    assert_eq!(fs::read(&ck).unwrap(), bytes1);
    assert_eq!(out1, out2);

    let (code, ev, err) = run(&["eval", "--bundle", &bundle, "--checkpoint", &ck, "--threads", "3"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(ev.lines().next(), out1.lines().next(), "same config hash as training");
    assert!(ev.contains("breakdown") && ev.contains("ALL"));
    let (_, ev1, _) = run(&["eval", "--bundle", &bundle, "--checkpoint", &ck, "--threads", "1"]);
    assert_eq!(ev, ev1, "thread count must not change metrics");

    let inf = fs::read_to_string(d.join("bundle/inference.txt")).unwrap();
    let first: Vec<&str> = inf.lines().next().unwrap().split('\t').collect();
    let q = format!("?\t{}\t{}", first[1], first[2]);
    let (code, pred, err) = run(&["predict", "--bundle", &bundle, "--checkpoint", &ck, "--query", &q, "--top", "3"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(pred.lines().filter(|l| !l.starts_with('#')).count(), 3);

    let (code, stats, _) = run(&["graph-stats", "--bundle", &bundle, "--part", "train", "--edges", &d.join("edges").display().to_string()]);
    assert_eq!(code, 0);
    assert!(stats.contains("relation graph") && stats.contains("entity graph"));
    let edges = fs::read_to_string(d.join("edges/entity_graph.tsv")).unwrap();
    assert!(edges.lines().all(|l| l.split('\t').count() == 3));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(&["train", "--bogus"]).0, 1);
    assert_eq!(run(&["--ablation", "noSuch", "graph-stats", "--facts", "x"]).0, 1);
    let cfg = d.join("run.cfg");
    fs::write(&cfg, "epochs = 2\nunknown_key = 1\n").unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "selfcheck"]).0, 1);
    let missing = d.join("none").display().to_string();
    assert_eq!(run(&["eval", "--bundle", &missing, "--checkpoint", &missing]).0, 2);
    let bad = d.join("bad.txt");
    fs::write(&bad, "a\tb\n").unwrap();
    let (code, _, err) = run(&["graph-stats", "--facts", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("line 1"));
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn selfcheck_passes() {
    let (code, out, err) = run(&["selfcheck", "--graphs", "50", "--triples", "20"]);
    assert_eq!(code, 0, "{out}{err}");
    assert_eq!(out.lines().filter(|l| l.contains(": ok (")).count(), 3);
}

#[test]
fn dropped_facts_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let train = thor::synth::rule_graph(2, "s");
    let inf = thor::synth::rule_graph(2, "t");
    let valid = vec![HyperFact::new("t:a0", "t:r3", "t:c0")];
    let test = vec![HyperFact::new("t:a0", "t:r3", "t:zz")];
    thor::bundle::write_bundle(d, &train, &inf, &valid, &test).unwrap();
    let b = d.display().to_string();
    let ck = d.join("m.bin").display().to_string();
    let (code, _, err) = run(&["train", "--bundle", &b, "--checkpoint", &ck, "--epochs", "1", "--set", "width=8"]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("# dropped test fact 1: "), "{err}");
}
