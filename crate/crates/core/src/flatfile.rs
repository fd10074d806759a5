//! Newline-delimited, tab-separated flat files and their provenance headers.
//!
//! Every file written by the toolkit starts with `#`-prefixed provenance lines; readers
//! skip comment and blank lines. Headers carry no wall-clock data so that re-running a
//! pure stage on the same inputs produces byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = concat!("resipscope ", env!("CARGO_PKG_VERSION"));

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::path_io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub stage: String,
    pub config_hash: Option<String>,
    pub seeds: BTreeMap<String, u64>,
    /// (path as given, sha256 of contents)
    pub inputs: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(stage: impl Into<String>) -> Self {
        Provenance {
            stage: stage.into(),
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, name: impl Into<String>, seed: u64) -> Self {
        self.seeds.insert(name.into(), seed);
        self
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = Some(hash.into());
        self
    }

    pub fn with_input(mut self, path: &Path) -> Result<Self> {
        let digest = file_sha256(path)?;
        self.inputs.push((path.display().to_string(), digest));
        Ok(self)
    }

    pub fn header(&self) -> String {
        let mut h = String::new();
        let _ = writeln!(h, "# tool: {TOOL_VERSION}");
        let _ = writeln!(h, "# stage: {}", self.stage);
        if let Some(c) = &self.config_hash {
            let _ = writeln!(h, "# config-sha256: {c}");
        }
        for (name, seed) in &self.seeds {
            let _ = writeln!(h, "# seed.{name}: {seed}");
        }
        for (path, digest) in &self.inputs {
            let _ = writeln!(h, "# input: {path} sha256={digest}");
        }
        h
    }
}

/// Writes `header + body` in one go, creating parent directories.
pub fn write_with_header(path: &Path, prov: &Provenance, body: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::path_io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::path_io(path, e))?;
    f.write_all(prov.header().as_bytes())?;
    f.write_all(body.as_bytes())?;
    Ok(())
}

/// Body of a file written with [`write_with_header`]: leading `#` lines dropped.
pub fn strip_header(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.split_once('\n').map_or("", |(_, r)| r);
    }
    rest
}

/// Reads a headered file and returns its body.
pub fn read_body(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::path_io(path, e))?;
    Ok(strip_header(&text).to_string())
}

/// One data line of a flat file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub line: usize,
    pub fields: Vec<String>,
}

impl Record {
    pub fn field(&self, i: usize) -> Option<&str> {
        self.fields.get(i).map(String::as_str)
    }
}

/// Splits tab-separated text into records, skipping `#` comments and blank lines.
pub fn parse_tsv(text: &str) -> impl Iterator<Item = Record> + '_ {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            return None;
        }
        Some(Record {
            line: i + 1,
            fields: line.split('\t').map(str::to_string).collect(),
        })
    })
}

pub fn read_tsv(path: &Path) -> Result<Vec<Record>> {
    let f = fs::File::open(path).map_err(|e| Error::path_io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::path_io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(Record {
            line: i + 1,
            fields: line.split('\t').map(str::to_string).collect(),
        });
    }
    Ok(out)
}

/// Replaces characters that would break a tab-separated row.
pub fn clean_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_stripped() {
        let body = "{\n  \"a\": 1\n}\n";
        let text = Provenance::new("x").with_seed("s", 3).header() + body;
        assert_eq!(strip_header(&text), body);
        assert_eq!(strip_header("# only"), "");
    }

    #[test]
    fn header_is_deterministic() {
        let p = Provenance::new("pdns.lifetimes")
            .with_seed("gen", 7)
            .with_config_hash("abc");
        assert_eq!(p.header(), p.clone().header());
        assert!(p.header().starts_with("# tool: resipscope "));
        assert!(p.header().contains("# seed.gen: 7\n"));
    }

    #[test]
    fn tsv_skips_comments() {
        let text = "# header\n\na\tb\n#x\nc\td\te\n";
        let recs: Vec<_> = parse_tsv(text).collect();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].line, 3);
        assert_eq!(recs[1].fields, vec!["c", "d", "e"]);
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
