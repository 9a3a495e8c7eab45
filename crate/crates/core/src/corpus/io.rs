//! JSON-lines utterance files and tab-separated link files.
//!
//! Utterances: one object per line, `{"id": int, "speaker": str, "text": str, "ts": str?}`.
//! Links: `child<TAB>parent` per line; blank lines and lines starting with
//! `#` are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{CorpusError, Dialogue, Result, Utterance};

fn parse_err(source_name: &'static str, line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        source_name,
        line,
        message: message.into(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_utterances(reader: impl BufRead) -> Result<Vec<Utterance>> {
    let mut out: Vec<Utterance> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| parse_err("utterances", lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let u: Utterance =
            serde_json::from_str(&line).map_err(|e| parse_err("utterances", lineno, e.to_string()))?;
        if u.speaker.is_empty() {
            return Err(parse_err("utterances", lineno, "empty speaker"));
        }
        if let Some(prev) = out.last() {
            if u.id == prev.id {
                return Err(parse_err("utterances", lineno, format!("duplicate id {}", u.id)));
            }
            if u.id < prev.id {
                return Err(parse_err(
                    "utterances",
                    lineno,
                    format!("id {} decreases after {}", u.id, prev.id),
                ));
            }
        }
        out.push(u);
    }
    Ok(out)
}

/// Reads `child<TAB>parent` lines, checking ids against `known`.
pub fn load_links(reader: impl BufRead, known: &BTreeSet<u64>) -> Result<BTreeMap<u64, u64>> {
    parse_links(reader, Some(known))
}

fn parse_links(reader: impl BufRead, known: Option<&BTreeSet<u64>>) -> Result<BTreeMap<u64, u64>> {
    let mut links = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| parse_err("links", lineno, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let (Some(c), Some(p), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err("links", lineno, "expected `child<TAB>parent`"));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| parse_err("links", lineno, format!("invalid id `{s}`")))
        };
        let (child, parent) = (parse(c)?, parse(p)?);
        if parent > child {
            return Err(parse_err("links", lineno, format!("parent {parent} comes after child {child}")));
        }
        if let Some(known) = known {
            for id in [child, parent] {
                if !known.contains(&id) {
                    return Err(parse_err("links", lineno, format!("unknown id {id}")));
                }
            }
        }
        if links.insert(child, parent).is_some() {
            return Err(parse_err("links", lineno, format!("second link for child {child}")));
        }
    }
    Ok(links)
}

/// Parses an utterance stream and its links; utterances without a link
/// line are self-linked.
pub fn load_dialogue(log: impl BufRead, links: impl BufRead) -> Result<Dialogue> {
    let utterances = load_utterances(log)?;
    let known: BTreeSet<u64> = utterances.iter().map(|u| u.id).collect();
    let links = load_links(links, &known)?;
    Dialogue::new(utterances, Some(links))
}

pub fn load_dialogue_files(log: &Path, links: Option<&Path>) -> Result<Dialogue> {
    let f = File::open(log).map_err(|e| io_err(log, e))?;
    let utterances = load_utterances(BufReader::new(f))?;
    match links {
        None => Dialogue::new(utterances, None),
        Some(lp) => {
            let known: BTreeSet<u64> = utterances.iter().map(|u| u.id).collect();
            let f = File::open(lp).map_err(|e| io_err(lp, e))?;
            let links = load_links(BufReader::new(f), &known)?;
            Dialogue::new(utterances, Some(links))
        }
    }
}

/// Reads a links file on its own; the ids it mentions define the universe.
pub fn read_links_file(path: &Path) -> Result<BTreeMap<u64, u64>> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    parse_links(BufReader::new(f), None)
}

pub fn write_utterances(mut w: impl Write, utterances: &[Utterance]) -> std::io::Result<()> {
    for u in utterances {
        serde_json::to_writer(&mut w, u)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_links<'a>(mut w: impl Write, links: impl IntoIterator<Item = (&'a u64, &'a u64)>) -> std::io::Result<()> {
    for (child, parent) in links {
        writeln!(w, "{child}\t{parent}")?;
    }
    Ok(())
}

pub fn write_utterances_file(path: &Path, utterances: &[Utterance]) -> Result<()> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    write_utterances(&mut w, utterances).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_links_file(path: &Path, links: &BTreeMap<u64, u64>) -> Result<()> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    write_links(&mut w, links).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}
