//! Small helpers for line-delimited JSON files. Blank lines are skipped;
//! per-line decode errors are surfaced with their 1-based line number so
//! callers can skip or abort as their contract requires.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// A decoded line paired with its 1-based position in the stream.
pub struct Line<T> {
    pub number: usize,
    pub record: Result<T, serde_json::Error>,
}

/// Reads every non-blank line of `reader`, decoding each as `T`.
pub fn read_lines<T: DeserializeOwned, R: BufRead>(reader: R) -> std::io::Result<Vec<Line<T>>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(Line {
            number: idx + 1,
            record: serde_json::from_str(&line),
        });
    }
    Ok(out)
}

/// Reads a whole JSONL file, failing on the first malformed line.
pub fn read_file<T: DeserializeOwned>(path: &Path) -> std::io::Result<Vec<T>> {
    let lines = read_lines(BufReader::new(File::open(path)?))?;
    let mut out = Vec::with_capacity(lines.len());
    for line in lines {
        match line.record {
            Ok(record) => out.push(record),
            Err(err) => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("line {}: {err}", line.number),
                ))
            }
        }
    }
    Ok(out)
}

/// Writes one compact JSON document per line.
pub fn write_lines<T: Serialize, W: Write>(writer: &mut W, records: &[T]) -> std::io::Result<()> {
    for record in records {
        let line = serde_json::to_string(record)?;
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
