//! Fact files: TAB-separated lines `h r t (k v)*`, optionally JSON lines,
//! either of them optionally gzip-compressed.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use thor_core::kg::{Hkg, HyperFact};

use crate::error::{Error, Result};

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// Token count even or below three.
    MalformedLine { tokens: usize },
    /// Token at this zero-based position is empty.
    EmptyToken { index: usize },
    Json(String),
}

/// One offending line (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::MalformedLine { tokens } => write!(
                f,
                "line {}: malformed line with {tokens} tokens (need an odd count of at least 3)",
                self.line
            ),
            ParseErrorKind::EmptyToken { index } => {
                write!(f, "line {}: empty token at position {}", self.line, index + 1)
            }
            ParseErrorKind::Json(msg) => write!(f, "line {}: {msg}", self.line),
        }
    }
}

/// Every parse error of one file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseErrors {
    pub path: PathBuf,
    pub errors: Vec<ParseError>,
}

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} malformed line(s)", self.path.display(), self.errors.len())?;
        for e in &self.errors {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

/// Parse one TSV line. Qualifiers keep their token order.
pub fn parse_fact_line(line: &str) -> std::result::Result<HyperFact, ParseErrorKind> {
    let tokens: Vec<&str> = line.split('\t').collect();
    if tokens.len() < 3 || tokens.len().is_multiple_of(2) {
        return Err(ParseErrorKind::MalformedLine { tokens: tokens.len() });
    }
    if let Some(index) = tokens.iter().position(|t| t.is_empty()) {
        return Err(ParseErrorKind::EmptyToken { index });
    }
    let mut fact = HyperFact::new(tokens[0], tokens[1], tokens[2]);
    for kv in tokens[3..].chunks(2) {
        fact = fact.with_qualifier(kv[0], kv[1]);
    }
    Ok(fact)
}

/// Parse `{"triple": [h, r, t], "qualifiers": [[k, v], ...]}`.
pub fn parse_json_line(line: &str) -> std::result::Result<HyperFact, ParseErrorKind> {
    let bad = |m: &str| ParseErrorKind::Json(m.to_string());
    let v: serde_json::Value = serde_json::from_str(line).map_err(|e| ParseErrorKind::Json(e.to_string()))?;
    let triple = v
        .get("triple")
        .and_then(|t| t.as_array())
        .ok_or_else(|| bad("missing \"triple\" array"))?;
    let strs: Vec<&str> = triple.iter().filter_map(|x| x.as_str()).collect();
    if strs.len() != 3 || triple.len() != 3 {
        return Err(bad("\"triple\" must hold three strings"));
    }
    let mut tokens = strs;
    if let Some(q) = v.get("qualifiers") {
        let pairs = q.as_array().ok_or_else(|| bad("\"qualifiers\" must be an array"))?;
        for p in pairs {
            let kv: Vec<&str> = p
                .as_array()
                .map(|a| a.iter().filter_map(|x| x.as_str()).collect())
                .unwrap_or_default();
            if kv.len() != 2 || p.as_array().map_or(0, |a| a.len()) != 2 {
                return Err(bad("each qualifier must be a [key, value] pair of strings"));
            }
            tokens.extend(kv);
        }
    }
    if let Some(index) = tokens.iter().position(|t| t.is_empty()) {
        return Err(ParseErrorKind::EmptyToken { index });
    }
    let mut fact = HyperFact::new(tokens[0], tokens[1], tokens[2]);
    for kv in tokens[3..].chunks(2) {
        fact = fact.with_qualifier(kv[0], kv[1]);
    }
    Ok(fact)
}

/// Read a file's bytes, inflating gzip if the magic bytes say so.
pub fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Parse fact text; blank lines are skipped, errors are collected.
pub fn parse_facts(text: &str, path: &Path) -> Result<Vec<HyperFact>> {
    let json = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .is_some_and(|l| l.starts_with('{'));
    let mut facts = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let parsed = if json { parse_json_line(line) } else { parse_fact_line(line) };
        match parsed {
            Ok(f) => facts.push(f),
            Err(kind) => errors.push(ParseError { line: i + 1, kind }),
        }
    }
    if errors.is_empty() {
        Ok(facts)
    } else {
        Err(Error::Parse(ParseErrors {
            path: path.to_path_buf(),
            errors,
        }))
    }
}

pub fn read_facts(path: &Path) -> Result<Vec<HyperFact>> {
    let bytes = read_maybe_gzip(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Data(format!("{}: not UTF-8: {e}", path.display())))?;
    parse_facts(&text, path)
}

pub fn read_kg(path: &Path) -> Result<Hkg> {
    Ok(Hkg::from_hyper_facts(read_facts(path)?))
}

/// One TSV line without the trailing newline.
pub fn format_fact_line(f: &HyperFact) -> Result<String> {
    let mut tokens: Vec<&str> = vec![&f.head, &f.relation, &f.tail];
    for (k, v) in &f.qualifiers {
        tokens.push(k);
        tokens.push(v);
    }
    if let Some(t) = tokens.iter().find(|t| t.is_empty() || t.contains(['\t', '\n', '\r'])) {
        return Err(Error::Data(format!("identifier {t:?} cannot be written as a TSV token")));
    }
    Ok(tokens.join("\t"))
}

pub fn write_facts<'a>(path: &Path, facts: impl IntoIterator<Item = &'a HyperFact>) -> Result<()> {
    let mut out = String::new();
    for f in facts {
        out.push_str(&format_fact_line(f)?);
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Write every fact of `kg` in fact order.
pub fn write_kg(kg: &Hkg, path: &Path) -> Result<()> {
    let facts: Vec<HyperFact> = kg.hyper_facts().collect();
    write_facts(path, &facts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_qualified_line() {
        let f = parse_fact_line("AlbertEinstein\teducated_at\tETH_Zurich\tacademic_degree\tBSc\tacademic_major\tmath_education").unwrap();
        assert_eq!(f.arity(), 2);
        assert_eq!(f.qualifiers[1], ("academic_major".to_string(), "math_education".to_string()));
        assert_eq!(parse_fact_line("a\tr\tb").unwrap().arity(), 0);
    }

    #[test]
    fn rejects_bad_lines() {
        assert_eq!(parse_fact_line("a\tr\tb\tk"), Err(ParseErrorKind::MalformedLine { tokens: 4 }));
        assert_eq!(parse_fact_line("a\tr"), Err(ParseErrorKind::MalformedLine { tokens: 2 }));
        assert_eq!(parse_fact_line("a\t\tb"), Err(ParseErrorKind::EmptyToken { index: 1 }));
    }

    #[test]
    fn json_matches_tsv() {
        let j = parse_json_line(r#"{"triple": ["a", "r", "b"], "qualifiers": [["k", "v"]]}"#).unwrap();
        assert_eq!(j, parse_fact_line("a\tr\tb\tk\tv").unwrap());
        assert!(parse_json_line(r#"{"triple": ["a", "r"]}"#).is_err());
        assert!(parse_json_line(r#"{"triple": ["a", "r", "b"], "qualifiers": [["k"]]}"#).is_err());
    }

    #[test]
    fn errors_are_aggregated_with_line_numbers() {
        let text = "a\tr\tb\n\nx\ty\nc\tr\td\te\n";
        let Err(Error::Parse(p)) = parse_facts(text, Path::new("f.txt")) else {
            panic!("expected parse error");
        };
        let lines: Vec<usize> = p.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, [3, 4]);
    }

    #[test]
    fn unwritable_identifier() {
        let f = HyperFact::new("a b", "r", "x\ty");
        assert!(format_fact_line(&f).is_err());
    }
}
