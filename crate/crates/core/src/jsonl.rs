//! Line-delimited JSON reading and writing.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("read error")]
    Io(#[from] std::io::Error),
    #[error("line {line}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Streams records from `reader`, skipping blank lines. Errors carry the
/// 1-based line number.
pub fn read_records<T: DeserializeOwned, R: BufRead>(reader: R) -> impl Iterator<Item = Result<T, JsonlError>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(JsonlError::Io(e))),
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(serde_json::from_str(&l).map_err(|source| JsonlError::Parse { line: i + 1, source })),
    })
}

pub fn read_all<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, JsonlError> {
    read_records(reader).collect()
}

pub fn write_record<T: Serialize, W: Write>(out: &mut W, record: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")
}

pub fn write_all<'a, T: Serialize + 'a, W: Write>(
    out: &mut W,
    records: impl IntoIterator<Item = &'a T>,
) -> std::io::Result<()> {
    for r in records {
        write_record(out, r)?;
    }
    Ok(())
}
