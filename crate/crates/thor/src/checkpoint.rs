//! Checkpoints on disk: the parameter file plus a `<file>.meta` sidecar.
//!
//! The sidecar starts with `# key = value` lines (format version, epoch and
//! the full run configuration), followed by the loss history as
//! `epoch TAB loss TAB valid_mrr` rows under a header line. A missing
//! validation MRR is written as `-`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thor_core::model::Thor;
use thor_core::train::EpochRecord;

use crate::config::RunConfig;
use crate::error::{Error, Result};

const META_VERSION: &str = "1";
const HISTORY_HEADER: &str = "epoch\tloss\tvalid_mrr";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: RunConfig,
    /// Epoch whose parameters are stored.
    pub epoch: usize,
    pub history: Vec<EpochRecord>,
    pub model: Thor<f32>,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn format_meta(config: &RunConfig, epoch: usize, history: &[EpochRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# meta_version = {META_VERSION}");
    let _ = writeln!(out, "# thor_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# config_hash = {}", config.hash());
    let _ = writeln!(out, "# epoch = {epoch}");
    for (k, v) in config.entries() {
        let _ = writeln!(out, "# {k} = {v}");
    }
    out.push_str(HISTORY_HEADER);
    out.push('\n');
    for r in history {
        let mrr = r.valid_mrr.map_or_else(|| "-".to_string(), |m| format!("{m}"));
        let _ = writeln!(out, "{}\t{}\t{mrr}", r.epoch, r.loss);
    }
    out
}

pub fn parse_meta(text: &str) -> Result<(RunConfig, usize, Vec<EpochRecord>)> {
    let bad = |line: usize, msg: &str| Error::Data(format!("checkpoint metadata line {line}: {msg}"));
    let mut config = RunConfig::default();
    let mut epoch = None;
    let mut history = Vec::new();
    let mut in_history = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if let Some(rest) = line.strip_prefix('#') {
            if in_history {
                return Err(bad(n, "header after history rows"));
            }
            let (k, v) = rest.split_once('=').ok_or_else(|| bad(n, "expected `# key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "meta_version" if v != META_VERSION => return Err(bad(n, "unsupported metadata version")),
                "meta_version" | "thor_version" | "config_hash" => {}
                "epoch" => epoch = Some(v.parse().map_err(|_| bad(n, "bad epoch"))?),
                _ => config.set(k, v).map_err(|e| bad(n, &e.to_string()))?,
            }
        } else if line == HISTORY_HEADER {
            in_history = true;
        } else if in_history && !line.is_empty() {
            let cols: Vec<&str> = line.split('\t').collect();
            let [e, l, m] = cols[..] else {
                return Err(bad(n, "history rows need three columns"));
            };
            history.push(EpochRecord {
                epoch: e.parse().map_err(|_| bad(n, "bad epoch"))?,
                loss: l.parse().map_err(|_| bad(n, "bad loss"))?,
                valid_mrr: if m == "-" {
                    None
                } else {
                    Some(m.parse().map_err(|_| bad(n, "bad valid_mrr"))?)
                },
            });
        } else if !line.is_empty() {
            return Err(bad(n, "unexpected line"));
        }
    }
    let epoch = epoch.ok_or_else(|| Error::Data("checkpoint metadata lacks `epoch`".into()))?;
    config.resolve()?;
    Ok((config, epoch, history))
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.model.to_bytes())?;
        write_atomic(&meta_path(path), format_meta(&self.config, self.epoch, &self.history).as_bytes())
    }

    /// Rebuild the model from the sidecar's configuration, then load the
    /// stored parameters into it.
    pub fn load(path: &Path) -> Result<Checkpoint> {
        let meta = meta_path(path);
        let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        let (config, epoch, history) = parse_meta(&text)?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut model = Thor::<f32>::new(config.train.model, config.train.seed)?;
        model
            .load_bytes(&bytes)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Ok(Checkpoint {
            config,
            epoch,
            history,
            model,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = RunConfig::default();
        config.apply_text("width = 8\nheads = 2\nencoder_layers = 1\ndecoder_layers = 1\nseed = 3").unwrap();
        config.resolve().unwrap();
        let model = Thor::<f32>::new(config.train.model, 11).unwrap();
        let history = vec![
            EpochRecord { epoch: 1, loss: 2.5, valid_mrr: None },
            EpochRecord { epoch: 2, loss: 1.25, valid_mrr: Some(0.375) },
        ];
        let ck = Checkpoint { config: config.clone(), epoch: 2, history: history.clone(), model };
        let path = dir.path().join("sub/model.ckpt");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.model.to_bytes(), ck.model.to_bytes());
        assert_eq!(back.history, history);
        assert_eq!(back.epoch, 2);
        assert_eq!(back.config, config);
    }

    #[test]
    fn rejects_garbage_meta() {
        assert!(parse_meta("# epoch = 1\n# widht = 3\n").is_err());
        assert!(parse_meta("# width = 8\n").is_err());
        assert!(parse_meta("# epoch = 1\nepoch\tloss\tvalid_mrr\n1\t2\n").is_err());
    }
}
