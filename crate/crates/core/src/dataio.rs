//! Canonical dataset model, vocabulary, and JSONL serialization.
//!
//! Token ids are the internal currency everywhere in this crate; symbol
//! strings only appear at I/O boundaries. The file format is newline
//! delimited JSON with an explicit header object carrying the task name,
//! vocabulary and target labels, followed by one `{"source": .., "target": ..}`
//! object per example. Serialization is deterministic: the same dataset
//! always produces the same bytes.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("missing header")]
    MissingHeader,
    #[error("inconsistent example shape at line {line}: expected {expected}, got {got}")]
    InconsistentShape {
        line: usize,
        expected: String,
        got: String,
    },
    #[error("id out of vocab range: {id} (vocab size {vocab_size})")]
    IdOutOfRange { id: u32, vocab_size: usize },
    #[error("duplicate symbol in vocab: {0:?}")]
    DuplicateSymbol(String),
    #[error("unknown symbol: {0:?}")]
    UnknownSymbol(String),
    #[error("target_labels length {got} does not match target length {expected}")]
    LabelMismatch { got: usize, expected: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Json {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, DataError>;

/// An ordered vocabulary with a bijection between symbols and contiguous ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    symbols: Vec<String>,
    id_of: HashMap<String, u32>,
}

impl Vocab {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        let mut id_of = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if id_of.insert(s.clone(), i as u32).is_some() {
                return Err(DataError::DuplicateSymbol(s.clone()));
            }
        }
        Ok(Vocab { symbols, id_of })
    }

    /// The ten digit symbols `"0".."9"` with id equal to digit value.
    pub fn digits() -> Self {
        Vocab::new((0..10).map(|d| d.to_string())).expect("digits are distinct")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn id_of(&self, symbol: &str) -> Option<u32> {
        self.id_of.get(symbol).copied()
    }

    pub fn symbol(&self, id: u32) -> Result<&str> {
        self.symbols
            .get(id as usize)
            .map(String::as_str)
            .ok_or(DataError::IdOutOfRange {
                id,
                vocab_size: self.symbols.len(),
            })
    }

    /// Appends a symbol if absent and returns its id.
    pub fn intern(&mut self, symbol: &str) -> u32 {
        if let Some(&id) = self.id_of.get(symbol) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbols.push(symbol.to_string());
        self.id_of.insert(symbol.to_string(), id);
        id
    }
}

/// Looks up each id in the vocabulary and returns the symbol strings in order.
pub fn decode(ids: &[u32], vocab: &Vocab) -> Result<Vec<String>> {
    ids.iter()
        .map(|&id| vocab.symbol(id).map(str::to_string))
        .collect()
}

/// One aligned (source, target) row of token ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqExample {
    pub source: Vec<u32>,
    pub target: Vec<u32>,
}

/// A fixed-shape Seq2Seq dataset: every example shares the same source length
/// L1 and target length L2, and all ids index into one shared vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqDataset {
    pub task_name: String,
    pub examples: Vec<SeqExample>,
    pub vocab: Vocab,
    /// One label per target position, e.g. `["C1", "C2", "C3", "C4"]`.
    pub target_labels: Vec<String>,
    /// Optional operator/format annotations, kept ordered for stable bytes.
    pub field_meta: BTreeMap<String, String>,
}

impl SeqDataset {
    pub fn new(
        task_name: impl Into<String>,
        examples: Vec<SeqExample>,
        vocab: Vocab,
        target_labels: Vec<String>,
    ) -> Result<Self> {
        let ds = SeqDataset {
            task_name: task_name.into(),
            examples,
            vocab,
            target_labels,
            field_meta: BTreeMap::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn source_len(&self) -> usize {
        self.examples[0].source.len()
    }

    pub fn target_len(&self) -> usize {
        self.examples[0].target.len()
    }

    /// The target column at `index` across all examples.
    pub fn target_column(&self, index: usize) -> Vec<u32> {
        self.examples.iter().map(|e| e.target[index]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.examples.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        let l1 = self.examples[0].source.len();
        let l2 = self.examples[0].target.len();
        if self.target_labels.len() != l2 {
            return Err(DataError::LabelMismatch {
                got: self.target_labels.len(),
                expected: l2,
            });
        }
        for (i, ex) in self.examples.iter().enumerate() {
            if ex.source.len() != l1 || ex.target.len() != l2 {
                return Err(DataError::InconsistentShape {
                    line: i + 2,
                    expected: format!("L1={} L2={}", l1, l2),
                    got: format!("L1={} L2={}", ex.source.len(), ex.target.len()),
                });
            }
            for &id in ex.source.iter().chain(ex.target.iter()) {
                if id as usize >= self.vocab.len() {
                    return Err(DataError::IdOutOfRange {
                        id,
                        vocab_size: self.vocab.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Keeps `examples[range]`, sharing vocab and labels. Used for
    /// train/test splits of a generated set.
    pub fn slice(&self, range: std::ops::Range<usize>) -> SeqDataset {
        SeqDataset {
            task_name: self.task_name.clone(),
            examples: self.examples[range].to_vec(),
            vocab: self.vocab.clone(),
            target_labels: self.target_labels.clone(),
            field_meta: self.field_meta.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    task_name: String,
    vocab: Vec<String>,
    target_labels: Vec<String>,
    l1: usize,
    l2: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    field_meta: BTreeMap<String, String>,
}

/// Writes `dataset` as header + one JSON object per example.
pub fn save_jsonl(dataset: &SeqDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    dataset.validate()?;
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let header = Header {
        task_name: dataset.task_name.clone(),
        vocab: dataset.vocab.symbols().to_vec(),
        target_labels: dataset.target_labels.clone(),
        l1: dataset.source_len(),
        l2: dataset.target_len(),
        field_meta: dataset.field_meta.clone(),
    };
    let header = serde_json::to_string(&header).expect("header is serializable");
    writeln!(w, "{}", header).map_err(io_err)?;
    for ex in &dataset.examples {
        let line = serde_json::to_string(ex).expect("example is serializable");
        writeln!(w, "{}", line).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads a dataset written by [`save_jsonl`], re-validating every invariant.
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<SeqDataset> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();

    let header_line = match lines.next() {
        Some(line) => line.map_err(io_err)?,
        None => return Err(DataError::MissingHeader),
    };
    let header: Header =
        serde_json::from_str(&header_line).map_err(|_| DataError::MissingHeader)?;
    let vocab = Vocab::new(header.vocab)?;

    let mut examples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: SeqExample = serde_json::from_str(&line).map_err(|source| DataError::Json {
            path: path.display().to_string(),
            line: i + 2,
            source,
        })?;
        if ex.source.len() != header.l1 || ex.target.len() != header.l2 {
            return Err(DataError::InconsistentShape {
                line: i + 2,
                expected: format!("L1={} L2={}", header.l1, header.l2),
                got: format!("L1={} L2={}", ex.source.len(), ex.target.len()),
            });
        }
        examples.push(ex);
    }

    let mut ds = SeqDataset::new(header.task_name, examples, vocab, header.target_labels)?;
    ds.field_meta = header.field_meta;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> SeqDataset {
        let vocab = Vocab::digits();
        SeqDataset::new(
            "tiny",
            vec![SeqExample {
                source: vec![3, 5, 0, 7],
                target: vec![0, 2, 4, 5],
            }],
            vocab,
            vec!["C1", "C2", "C3", "C4"].into_iter().map(String::from).collect(),
        )
        .unwrap()
    }

    #[test]
    fn vocab_bijection() {
        let v = Vocab::digits();
        for (i, s) in v.symbols().iter().enumerate() {
            assert_eq!(v.id_of(s), Some(i as u32));
            assert_eq!(v.symbol(i as u32).unwrap(), s);
        }
        assert!(Vocab::new(["a", "b", "a"]).is_err());
    }

    #[test]
    fn save_single_row_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.jsonl");
        let ds = tiny_dataset();
        save_jsonl(&ds, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2, "header + 1 example");
        let back = load_jsonl(&path).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn empty_dataset_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ds = SeqDataset {
            task_name: "empty".into(),
            examples: vec![],
            vocab: Vocab::digits(),
            target_labels: vec![],
            field_meta: BTreeMap::new(),
        };
        let err = save_jsonl(&ds, dir.path().join("e.jsonl")).unwrap_err();
        assert!(matches!(err, DataError::EmptyDataset));
    }

    #[test]
    fn ragged_target_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ragged.jsonl");
        let mut text = String::new();
        text.push_str(
            r#"{"task_name":"t","vocab":["0","1"],"target_labels":["C1","C2"],"l1":1,"l2":2}"#,
        );
        text.push('\n');
        text.push_str(r#"{"source":[0],"target":[1,0]}"#);
        text.push('\n');
        text.push_str(r#"{"source":[0],"target":[1]}"#);
        text.push('\n');
        std::fs::write(&path, text).unwrap();
        let err = load_jsonl(&path).unwrap_err();
        assert!(matches!(err, DataError::InconsistentShape { line: 3, .. }));
    }

    #[test]
    fn missing_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("no_header.jsonl");
        std::fs::write(&path, "{\"source\":[0],\"target\":[1]}\n").unwrap();
        let err = load_jsonl(&path).unwrap_err();
        assert!(matches!(err, DataError::MissingHeader));

        let empty = dir.path().join("empty.jsonl");
        std::fs::write(&empty, "").unwrap();
        assert!(matches!(load_jsonl(&empty), Err(DataError::MissingHeader)));
    }

    #[test]
    fn id_out_of_range_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("oov.jsonl");
        let mut text = String::new();
        text.push_str(
            r#"{"task_name":"t","vocab":["0","1"],"target_labels":["C1"],"l1":1,"l2":1}"#,
        );
        text.push('\n');
        text.push_str(r#"{"source":[0],"target":[7]}"#);
        text.push('\n');
        std::fs::write(&path, text).unwrap();
        let err = load_jsonl(&path).unwrap_err();
        assert!(matches!(err, DataError::IdOutOfRange { id: 7, .. }));
    }

    #[test]
    fn decode_digits() {
        let v = Vocab::digits();
        assert_eq!(
            decode(&[1, 2, 3, 4], &v).unwrap(),
            vec!["1", "2", "3", "4"]
        );
        assert_eq!(decode(&[], &v).unwrap(), Vec::<String>::new());
        assert!(decode(&[10], &v).is_err());
    }

    #[test]
    fn serialization_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        let ds = tiny_dataset();
        save_jsonl(&ds, &a).unwrap();
        save_jsonl(&ds, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
