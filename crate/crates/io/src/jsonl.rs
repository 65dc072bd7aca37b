use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, IoError, Result};

/// First line of every record file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaHeader {
    pub schema: String,
    pub version: u32,
}

impl SchemaHeader {
    pub fn new(schema: impl Into<String>, version: u32) -> Self {
        Self { schema: schema.into(), version }
    }
}

/// Streaming writer: header line, then one compact JSON object per line.
pub struct RecordWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl RecordWriter {
    pub fn create(path: impl AsRef<Path>, header: &SchemaHeader) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut w = Self { out: BufWriter::new(file), path };
        w.write(header)?;
        Ok(w)
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let line = serde_json::to_string(record).map_err(|e| IoError::BadRecord {
            path: self.path.clone(),
            line: 0,
            detail: e.to_string(),
        })?;
        writeln!(self.out, "{line}").map_err(io_err(&self.path))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(io_err(&self.path))
    }
}

pub fn write_records<T: Serialize>(path: impl AsRef<Path>, header: &SchemaHeader, records: &[T]) -> Result<()> {
    let mut w = RecordWriter::create(path, header)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

/// Reads a record file, failing if its header does not match `expected`
/// exactly.
pub fn read_records<T: DeserializeOwned>(path: impl AsRef<Path>, expected: &SchemaHeader) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |line: usize, detail: String| IoError::BadRecord { path: path.to_path_buf(), line, detail };
    let first = lines
        .next()
        .ok_or_else(|| bad(1, "empty file, missing schema header".into()))?
        .map_err(io_err(path))?;
    let header: SchemaHeader = serde_json::from_str(&first).map_err(|e| bad(1, format!("schema header: {e}")))?;
    if &header != expected {
        return Err(IoError::SchemaMismatch {
            path: path.to_path_buf(),
            expected: expected.schema.clone(),
            expected_version: expected.version,
            found: header.schema,
            found_version: header.version,
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| bad(i + 2, e.to_string()))?);
    }
    Ok(out)
}
