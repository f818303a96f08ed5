//! File formats: JSON-lines tasks and predictions, JSON corpora, TSV
//! relation triples, and JSON-lines grouped documents.

pub mod adapters;
pub mod synthetic;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Corpus, CorpusSet, TransferTask};

pub use adapters::{pair_by_group, pair_triples, GroupDocument, PairingOutput, RelationTriple};
pub use synthetic::{generate_synthetic, SyntheticBenchmark, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub task_id: String,
    pub prediction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CorpusFile {
    corpus_ref: String,
    facts: Vec<String>,
}

fn parse_error(path: &Path, line: usize, message: impl ToString) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.to_string(),
    }
}

/// Parses one JSON object per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R, path: &Path) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| parse_error(path, i + 1, e))?;
        out.push((i + 1, value));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn read_tasks<R: BufRead>(reader: R, path: &Path) -> Result<Vec<TransferTask>> {
    let mut seen = HashSet::new();
    let mut tasks = Vec::new();
    for (line, task) in read_jsonl::<TransferTask, _>(reader, path)? {
        task.validate().map_err(|e| parse_error(path, line, e))?;
        if !seen.insert(task.task_id.clone()) {
            return Err(Error::DuplicateTask(task.task_id));
        }
        tasks.push(task);
    }
    Ok(tasks)
}

pub fn load_tasks(path: &Path) -> Result<Vec<TransferTask>> {
    read_tasks(BufReader::new(File::open(path)?), path)
}

pub fn save_tasks(path: &Path, tasks: &[TransferTask]) -> Result<()> {
    write_jsonl(create(path)?, tasks)
}

pub fn read_predictions<R: BufRead>(reader: R, path: &Path) -> Result<Vec<Prediction>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (_, p) in read_jsonl::<Prediction, _>(reader, path)? {
        if !seen.insert(p.task_id.clone()) {
            return Err(Error::DuplicateTask(p.task_id));
        }
        out.push(p);
    }
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    read_predictions(BufReader::new(File::open(path)?), path)
}

pub fn save_predictions(path: &Path, preds: &[Prediction]) -> Result<()> {
    write_jsonl(create(path)?, preds)
}

fn read_corpus_file(path: &Path) -> Result<Corpus> {
    let text = std::fs::read_to_string(path)?;
    let file: CorpusFile = serde_json::from_str(&text).map_err(|e| parse_error(path, e.line(), e))?;
    Corpus::new(file.corpus_ref, file.facts)
}

/// Loads one corpus file, or every `*.json` file of a directory.
pub fn load_corpus(path: &Path) -> Result<CorpusSet> {
    let mut files = Vec::new();
    if path.is_dir() {
        for entry in std::fs::read_dir(path)? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == "json") {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    let mut set = CorpusSet::new();
    for f in files {
        let corpus = read_corpus_file(&f)?;
        let name = corpus.corpus_ref().to_string();
        if set.insert(corpus).is_some() {
            return Err(Error::InvalidCorpus {
                corpus_ref: name,
                reason: format!("defined more than once (again in {})", f.display()),
            });
        }
    }
    Ok(set)
}

pub fn save_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let file = CorpusFile {
        corpus_ref: corpus.corpus_ref().to_string(),
        facts: corpus.texts().map(str::to_string).collect(),
    };
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &file)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// File name for a corpus inside a corpus directory.
pub fn corpus_file_name(corpus_ref: &str) -> String {
    let safe: String = corpus_ref
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{safe}.json")
}

/// `subject<TAB>relation<TAB>object` lines.
pub fn read_triples<R: BufRead>(reader: R, path: &Path) -> Result<Vec<RelationTriple>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        match fields[..] {
            [s, r, o] if !s.is_empty() && !r.is_empty() && !o.is_empty() => {
                out.push(RelationTriple {
                    subject: s.into(),
                    relation: r.into(),
                    object: o.into(),
                })
            }
            _ => {
                return Err(parse_error(
                    path,
                    i + 1,
                    "expected three non-empty tab-separated fields",
                ))
            }
        }
    }
    Ok(out)
}

pub fn load_triples(path: &Path) -> Result<Vec<RelationTriple>> {
    read_triples(BufReader::new(File::open(path)?), path)
}

pub fn load_documents(path: &Path) -> Result<Vec<GroupDocument>> {
    let docs = read_jsonl(BufReader::new(File::open(path)?), path)?;
    Ok(docs.into_iter().map(|(_, d)| d).collect())
}
