use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

use super::EdgeEvent;

/// Bijection between external integer labels and dense ids `0..N`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMap {
    labels: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Labels `0..n` mapped to themselves.
    pub fn identity(n: usize) -> Self {
        let mut map = Self::new();
        for i in 0..n as u64 {
            map.get_or_insert(i);
        }
        map
    }

    pub fn get_or_insert(&mut self, label: u64) -> usize {
        if let Some(&id) = self.index.get(&label) {
            return id;
        }
        let id = self.labels.len();
        self.labels.push(label);
        self.index.insert(label, id);
        id
    }

    pub fn id(&self, label: u64) -> Option<usize> {
        self.index.get(&label).copied()
    }

    pub fn label(&self, id: usize) -> Option<u64> {
        self.labels.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ParsedEvents {
    pub events: Vec<EdgeEvent>,
    pub id_map: IdMap,
}

impl ParsedEvents {
    pub fn node_count(&self) -> usize {
        self.id_map.len()
    }
}

/// Parses `src dst time [weight]` lines. Lines starting with `#` or `%` and
/// blank lines are skipped.
pub fn parse_edge_events<R: BufRead>(reader: R) -> Result<ParsedEvents> {
    let mut events = Vec::new();
    let mut id_map = IdMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 3 or 4 fields, found {}", fields.len()),
            });
        }
        let src = parse_label(fields[0], lineno)?;
        let dst = parse_label(fields[1], lineno)?;
        let time = parse_real(fields[2], "time", lineno)?;
        if time < 0.0 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("negative timestamp {time}"),
            });
        }
        let weight = match fields.get(3) {
            Some(f) => parse_real(f, "weight", lineno)?,
            None => 1.0,
        };
        if weight < 0.0 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("negative weight {weight}"),
            });
        }
        if weight == 0.0 {
            return Err(Error::Parse {
                line: lineno,
                message: "zero weight".into(),
            });
        }
        let src = id_map.get_or_insert(src);
        let dst = id_map.get_or_insert(dst);
        events.push(EdgeEvent::new(src, dst, time, weight));
    }
    Ok(ParsedEvents { events, id_map })
}

pub fn parse_edge_file(path: &Path) -> Result<ParsedEvents> {
    let file = File::open(path)?;
    parse_edge_events(BufReader::new(file))
}

fn parse_label(field: &str, line: usize) -> Result<u64> {
    field.parse::<u64>().map_err(|_| Error::Parse {
        line,
        message: format!("non-numeric node id `{field}`"),
    })
}

fn parse_real(field: &str, what: &str, line: usize) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("non-numeric {what} `{field}`"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ParsedEvents> {
        parse_edge_events(text.as_bytes())
    }

    #[test]
    fn default_weight() {
        let p = parse("0 1 5").unwrap();
        assert_eq!(p.events, vec![EdgeEvent::new(0, 1, 5.0, 1.0)]);
    }

    #[test]
    fn comments_and_dense_remap() {
        let p = parse("# header\n7 9 2 3.5").unwrap();
        assert_eq!(p.events, vec![EdgeEvent::new(0, 1, 2.0, 3.5)]);
        assert_eq!(p.id_map.id(7), Some(0));
        assert_eq!(p.id_map.id(9), Some(1));
        assert_eq!(p.id_map.label(1), Some(9));
    }

    #[test]
    fn percent_comments_blank_lines_and_crlf() {
        let p = parse("% konect\r\n\r\n3 4 1\r\n4 5 2 2\r\n").unwrap();
        assert_eq!(p.events.len(), 2);
        assert_eq!(p.node_count(), 3);
    }

    #[test]
    fn non_numeric_field_reports_line() {
        match parse("a b 1") {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 1);
                assert!(message.contains("non-numeric"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse("0 1 2\n0 1 x") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_field_count() {
        assert!(matches!(parse("0 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("0 1 2 3 4"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(matches!(parse("0 1 2 -1"), Err(Error::Parse { line: 1, .. })));
    }
}
