//! Line-delimited JSON sequence files.
//!
//! Each non-blank line is one record `{"id":"s0","T":10.0,"events":[0.5,1.25]}`
//! with strictly valid event times in `(0, T]`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::EventSequence;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    #[serde(rename = "T")]
    horizon: f64,
    events: Vec<f64>,
}

/// Parses sequence records from text; line numbers in errors are 1-based.
pub fn parse_sequences(text: &str) -> Result<Vec<EventSequence>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| Error::ParseError { line: line_no, reason: e.to_string() })?;
        let seq = EventSequence::new(rec.id, rec.horizon, rec.events)
            .map_err(|e| Error::ParseError { line: line_no, reason: e.to_string() })?;
        out.push(seq);
    }
    if out.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(out)
}

pub fn ingest(path: impl AsRef<Path>) -> Result<Vec<EventSequence>> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_sequences(&text)
}

/// Canonical text form: one record per line, shortest round-trip decimals.
pub fn format_sequences(seqs: &[EventSequence]) -> String {
    let mut out = String::new();
    for s in seqs {
        let rec = Record { id: s.id().to_owned(), horizon: s.horizon(), events: s.times().to_vec() };
        out.push_str(&serde_json::to_string(&rec).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn emit(path: impl AsRef<Path>, seqs: &[EventSequence]) -> Result<()> {
    let mut f = fs::File::create(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    f.write_all(format_sequences(seqs).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_valid_lines() {
        let text = "{\"id\":\"a\",\"T\":1.0,\"events\":[0.2,0.7]}\n{\"id\":\"b\",\"T\":1.0,\"events\":[]}\n";
        let seqs = parse_sequences(text).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[1].id(), "b");
        assert_eq!(format_sequences(&seqs), text);
    }

    #[test]
    fn descending_times_name_the_line() {
        let text = "{\"id\":\"a\",\"T\":1.0,\"events\":[0.2]}\n{\"id\":\"b\",\"T\":1.0,\"events\":[0.7,0.2]}\n";
        match parse_sequences(text) {
            Err(Error::ParseError { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("ordered"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_and_empty_input() {
        assert!(matches!(parse_sequences("\n  \n"), Err(Error::EmptyFile)));
        assert!(matches!(parse_sequences("{\"id\":\"a\"}"), Err(Error::ParseError { line: 1, .. })));
        assert!(matches!(
            parse_sequences("{\"id\":\"a\",\"T\":1.0,\"events\":[2.0]}"),
            Err(Error::ParseError { line: 1, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let seqs = vec![EventSequence::new("x", 10.0, vec![0.1, 1.0 / 3.0, 9.999999]).unwrap()];
        emit(&path, &seqs).unwrap();
        let first = fs::read(&path).unwrap();
        emit(&path, &ingest(&path).unwrap()).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
        assert!(matches!(ingest(dir.path().join("missing")), Err(Error::Io(_))));
    }
}
