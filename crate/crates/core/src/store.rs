//! Append-only JSON Lines record files.
//!
//! Each line is one JSON object carrying `"schema_version"` and `"kind"` ahead
//! of the record's own fields. A trailing line without its newline is a crash
//! artifact: opening the file moves those bytes to `<path>.partial` and
//! truncates the file back to its last complete line.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::hash::Hash;
use std::io::{self, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(
        "schema mismatch at line {line}: expected {expected_kind} v{expected_version}, found {found}"
    )]
    SchemaMismatch {
        line: usize,
        expected_kind: &'static str,
        expected_version: u32,
        found: String,
    },
    #[error("line {line} is not a valid record: {message}")]
    Corrupt { line: usize, message: String },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl StoreError {
    fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// A record type persisted by [`RecordFile`].
pub trait Record: Serialize + DeserializeOwned {
    const KIND: &'static str;
    const SCHEMA_VERSION: u32 = SCHEMA_VERSION;
    /// Identity of the work item a record completes.
    type Key: Eq + Hash + Clone;
    fn key(&self) -> Self::Key;
}

/// One JSON line (no trailing newline) with the schema header fields first.
pub fn encode_line<R: Record>(record: &R) -> Result<String, StoreError> {
    let Value::Object(body) = serde_json::to_value(record)? else {
        return Err(StoreError::Corrupt {
            line: 0,
            message: format!("{} does not serialize to an object", R::KIND),
        });
    };
    let mut obj = Map::new();
    obj.insert("schema_version".into(), R::SCHEMA_VERSION.into());
    obj.insert("kind".into(), R::KIND.into());
    obj.extend(body);
    Ok(serde_json::to_string(&Value::Object(obj))?)
}

/// Parses one line written by [`encode_line`], checking the schema header.
pub fn decode_line<R: Record>(line: &str, line_no: usize) -> Result<R, StoreError> {
    let value: Value = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
        line: line_no,
        message: e.to_string(),
    })?;
    let Value::Object(mut obj) = value else {
        return Err(StoreError::Corrupt {
            line: line_no,
            message: "not a JSON object".into(),
        });
    };
    let version = obj.remove("schema_version");
    let kind = obj.remove("kind");
    let matches = version.as_ref().and_then(Value::as_u64) == Some(R::SCHEMA_VERSION as u64)
        && kind.as_ref().and_then(Value::as_str) == Some(R::KIND);
    if !matches {
        return Err(StoreError::SchemaMismatch {
            line: line_no,
            expected_kind: R::KIND,
            expected_version: R::SCHEMA_VERSION,
            found: format!(
                "{} v{}",
                kind.as_ref().and_then(Value::as_str).unwrap_or("<none>"),
                version.map_or("<none>".to_string(), |v| v.to_string())
            ),
        });
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| StoreError::Corrupt {
        line: line_no,
        message: e.to_string(),
    })
}

/// Path of the quarantine sidecar for `path`.
pub fn partial_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Reads the complete lines of `path`, quarantining a partial trailing line.
/// Returns the lines and the number of bytes quarantined.
fn read_complete_lines(path: &Path) -> Result<(Vec<String>, usize), StoreError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(StoreError::io(path, e)),
    };
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let tail = &bytes[complete..];
    if !tail.is_empty() {
        let sidecar = partial_sidecar(path);
        let mut side = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&sidecar)
            .map_err(|e| StoreError::io(&sidecar, e))?;
        side.write_all(tail)
            .and_then(|_| side.write_all(b"\n"))
            .and_then(|_| side.sync_all())
            .map_err(|e| StoreError::io(&sidecar, e))?;
        let f = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(|e| StoreError::io(path, e))?;
        f.set_len(complete as u64)
            .and_then(|_| f.sync_all())
            .map_err(|e| StoreError::io(path, e))?;
    }
    let text = std::str::from_utf8(&bytes[..complete]).map_err(|e| StoreError::Corrupt {
        line: 0,
        message: e.to_string(),
    })?;
    let lines = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_owned)
        .collect();
    Ok((lines, tail.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResumeCursor {
    /// Index into the plan of the first item without a durable record.
    Next(usize),
    Complete,
}

/// An open JSONL file of records of type `R`.
#[derive(Debug)]
pub struct RecordFile<R: Record> {
    path: PathBuf,
    records: Vec<R>,
    quarantined: usize,
    _kind: PhantomData<R>,
}

impl<R: Record> RecordFile<R> {
    /// Opens (creating if needed) and validates every complete line.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let (lines, quarantined) = read_complete_lines(&path)?;
        let records = lines
            .iter()
            .enumerate()
            .map(|(i, l)| decode_line::<R>(l, i + 1))
            .collect::<Result<Vec<_>, _>>()?;
        if !path.exists() {
            File::create(&path).map_err(|e| StoreError::io(&path, e))?;
        }
        Ok(RecordFile {
            path,
            records,
            quarantined,
            _kind: PhantomData,
        })
    }

    /// Creates an empty file, replacing any existing one.
    pub fn create(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let f = File::create(&path).map_err(|e| StoreError::io(&path, e))?;
        f.sync_all().map_err(|e| StoreError::io(&path, e))?;
        Ok(RecordFile {
            path,
            records: Vec::new(),
            quarantined: 0,
            _kind: PhantomData,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> &[R] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Bytes moved to the `.partial` sidecar when the file was opened.
    pub fn quarantined_bytes(&self) -> usize {
        self.quarantined
    }

    /// Appends one line and syncs it to disk before returning.
    pub fn append(&mut self, record: R) -> Result<(), StoreError> {
        let mut line = encode_line(&record)?;
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| StoreError::io(&self.path, e))?;
        f.write_all(line.as_bytes())
            .and_then(|_| f.sync_data())
            .map_err(|e| StoreError::io(&self.path, e))?;
        self.records.push(record);
        Ok(())
    }

    pub fn completed_keys(&self) -> HashSet<R::Key> {
        self.records.iter().map(Record::key).collect()
    }

    /// Earliest plan item with no durable record.
    pub fn resume_cursor(&self, plan: &[R::Key]) -> ResumeCursor {
        let done = self.completed_keys();
        plan.iter()
            .position(|k| !done.contains(k))
            .map_or(ResumeCursor::Complete, ResumeCursor::Next)
    }
}

/// Opens `path` and appends `record`; fails with `SchemaMismatch` when the file
/// already holds records of another schema.
pub fn append_record<R: Record>(path: impl AsRef<Path>, record: R) -> Result<(), StoreError> {
    RecordFile::<R>::open(path)?.append(record)
}

/// Raw JSON objects of every complete line, schema-agnostic.
pub fn read_values(path: impl AsRef<Path>) -> Result<Vec<Value>, StoreError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(StoreError::io(
            path,
            io::Error::new(io::ErrorKind::NotFound, "no such file"),
        ));
    }
    let (lines, _) = read_complete_lines(path)?;
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StoreError::Corrupt {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Resolves a dotted path (`policy.max_bits`, `probe.0`) inside a record.
pub fn lookup<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(value, |v, seg| match v {
        Value::Object(m) => m.get(seg),
        Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

fn render_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items
            .iter()
            .map(|x| match x {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect::<Vec<_>>()
            .join(";"),
        other => other.to_string(),
    }
}

/// Fails with `UnknownColumn` for a column no record has.
pub fn check_columns(values: &[Value], columns: &[String]) -> Result<(), StoreError> {
    if values.is_empty() {
        return Ok(());
    }
    match columns
        .iter()
        .find(|c| values.iter().all(|v| lookup(v, c).is_none()))
    {
        Some(c) => Err(StoreError::UnknownColumn(c.clone())),
        None => Ok(()),
    }
}

/// Projects records onto `columns` as CSV: one header row plus one row per
/// record. Absent or null fields give empty cells; arrays are joined with `;`.
pub fn export_csv(values: &[Value], columns: &[String], crlf: bool) -> Result<String, StoreError> {
    check_columns(values, columns)?;
    let terminator = if crlf {
        csv::Terminator::CRLF
    } else {
        csv::Terminator::Any(b'\n')
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(terminator)
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| StoreError::Corrupt {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(columns).map_err(csv_err)?;
    for v in values {
        let row: Vec<String> = columns
            .iter()
            .map(|c| lookup(v, c).map(render_cell).unwrap_or_default())
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| StoreError::Corrupt {
        line: 0,
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Item {
        id: u32,
        label: String,
        score: Option<f64>,
        tags: Vec<u32>,
    }

    impl Record for Item {
        const KIND: &'static str = "item";
        type Key = u32;
        fn key(&self) -> u32 {
            self.id
        }
    }

    #[derive(Debug, Serialize, Deserialize)]
    struct ItemV2 {
        id: u32,
    }

    impl Record for ItemV2 {
        const KIND: &'static str = "item";
        const SCHEMA_VERSION: u32 = 2;
        type Key = u32;
        fn key(&self) -> u32 {
            self.id
        }
    }

    fn item(id: u32) -> Item {
        Item {
            id,
            label: format!("item {id}"),
            score: (id % 2 == 0).then_some(id as f64 / 3.0),
            tags: vec![id, id + 1],
        }
    }

    #[test]
    fn append_then_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let mut f = RecordFile::<Item>::open(&path).unwrap();
        f.append(item(1)).unwrap();
        f.append(item(2)).unwrap();
        let again = RecordFile::<Item>::open(&path).unwrap();
        assert_eq!(again.records(), &[item(1), item(2)]);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(r#"{"schema_version":1,"kind":"item","id":1,"#));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn foreign_schema_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        append_record(&path, ItemV2 { id: 9 }).unwrap();
        let err = append_record(&path, item(1)).unwrap_err();
        assert!(matches!(err, StoreError::SchemaMismatch { line: 1, .. }));
    }

    #[test]
    fn truncation_at_every_offset_is_quarantined() {
        let dir = tempfile::tempdir().unwrap();
        let full = dir.path().join("full.jsonl");
        let mut f = RecordFile::<Item>::open(&full).unwrap();
        for i in 0..3 {
            f.append(item(i)).unwrap();
        }
        let bytes = fs::read(&full).unwrap();
        let boundaries: Vec<usize> = bytes
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == b'\n')
            .map(|(i, _)| i + 1)
            .collect();

        for cut in 0..=bytes.len() {
            let path = dir.path().join(format!("cut{cut}.jsonl"));
            fs::write(&path, &bytes[..cut]).unwrap();
            let opened = RecordFile::<Item>::open(&path).unwrap();
            let whole = boundaries.iter().filter(|&&b| b <= cut).count();
            assert_eq!(opened.len(), whole, "cut at {cut}");
            let prefix = boundaries
                .iter()
                .copied()
                .filter(|&b| b <= cut)
                .max()
                .unwrap_or(0);
            assert_eq!(fs::read(&path).unwrap(), &bytes[..prefix]);
            let sidecar = partial_sidecar(&path);
            if prefix == cut {
                assert!(!sidecar.exists());
                assert_eq!(opened.quarantined_bytes(), 0);
            } else {
                let side = fs::read(&sidecar).unwrap();
                assert_eq!(&side[..side.len() - 1], &bytes[prefix..cut]);
                assert_eq!(opened.quarantined_bytes(), cut - prefix);
            }
        }
    }

    #[test]
    fn resume_cursor_positions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let plan: Vec<u32> = (1..=5).collect();
        let mut f = RecordFile::<Item>::open(&path).unwrap();
        assert_eq!(f.resume_cursor(&plan), ResumeCursor::Next(0));
        for i in 1..=3 {
            f.append(item(i)).unwrap();
        }
        assert_eq!(f.resume_cursor(&plan), ResumeCursor::Next(3));
        assert_eq!(f.resume_cursor(&plan), ResumeCursor::Next(3));
        for i in 4..=5 {
            f.append(item(i)).unwrap();
        }
        assert_eq!(f.resume_cursor(&plan), ResumeCursor::Complete);
    }

    #[test]
    fn csv_projection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let mut f = RecordFile::<Item>::open(&path).unwrap();
        f.append(item(1)).unwrap();
        f.append(Item {
            label: "a, b".into(),
            ..item(2)
        })
        .unwrap();
        let values = read_values(&path).unwrap();
        let cols: Vec<String> = ["id", "label", "score", "tags", "tags.1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let csv = export_csv(&values, &cols, false).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "id,label,score,tags,tags.1");
        assert_eq!(lines[1], "1,item 1,,1;2,2");
        assert_eq!(lines[2], "2,\"a, b\",0.6666666666666666,2;3,3");

        let crlf = export_csv(&values, &cols, true).unwrap();
        assert_eq!(crlf.matches("\r\n").count(), 3);

        let err = export_csv(&values, &["nope".to_string()], false).unwrap_err();
        assert!(matches!(err, StoreError::UnknownColumn(c) if c == "nope"));
    }
}
