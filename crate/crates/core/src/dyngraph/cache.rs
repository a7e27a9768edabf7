//! Binary snapshot cache.
//!
//! Layout (little-endian): magic `ENSN`, version `u16`, flags `u8` (bit 0:
//! directed), node count `u32`, snapshot count `u32`, one external label
//! `u64` per node, then per snapshot an entry count `u32` followed by
//! `(u: u32, v: u32, w: f64)` adjacency entries. Both directions of an
//! undirected edge are stored.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{IdMap, Snapshot, SnapshotSequence};

const MAGIC: &[u8; 4] = b"ENSN";
const VERSION: u16 = 1;

pub fn write_snapshot_cache<W: Write>(seq: &SnapshotSequence, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[u8::from(seq.is_directed())])?;
    out.write_all(&(seq.node_count() as u32).to_le_bytes())?;
    out.write_all(&(seq.len() as u32).to_le_bytes())?;
    for v in 0..seq.node_count() {
        let label = seq.id_map().label(v).unwrap_or(v as u64);
        out.write_all(&label.to_le_bytes())?;
    }
    for s in seq.snapshots() {
        let count: usize = s.adjacency().iter().map(Vec::len).sum();
        out.write_all(&(count as u32).to_le_bytes())?;
        for (u, list) in s.adjacency().iter().enumerate() {
            for &(v, w) in list {
                out.write_all(&(u as u32).to_le_bytes())?;
                out.write_all(&(v as u32).to_le_bytes())?;
                out.write_all(&w.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn save_snapshot_cache(seq: &SnapshotSequence, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_snapshot_cache(seq, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn corrupt(message: impl Into<String>) -> Error {
    Error::Format {
        kind: "snapshot cache",
        message: message.into(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(corrupt("unexpected end of file"));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Whether `bytes` start with the cache magic.
pub fn is_snapshot_cache(bytes: &[u8]) -> bool {
    bytes.starts_with(MAGIC)
}

pub fn read_snapshot_cache<R: Read>(mut input: R) -> Result<SnapshotSequence> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = cur.u16()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let flags = cur.u8()?;
    if flags > 1 {
        return Err(corrupt(format!("unknown flags {flags:#x}")));
    }
    let directed = flags == 1;
    let n = cur.u32()? as usize;
    let t = cur.u32()? as usize;
    if t == 0 {
        return Err(corrupt("zero snapshots"));
    }
    let mut id_map = IdMap::new();
    for v in 0..n {
        let label = cur.u64()?;
        if id_map.get_or_insert(label) != v {
            return Err(corrupt(format!("duplicate node label {label}")));
        }
    }
    let mut raw = Vec::with_capacity(t);
    for k in 0..t {
        let count = cur.u32()? as usize;
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for _ in 0..count {
            let u = cur.u32()? as usize;
            let v = cur.u32()? as usize;
            let w = cur.f64()?;
            if u >= n || v >= n {
                return Err(corrupt(format!("snapshot {}: node id out of range", k + 1)));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(corrupt(format!("snapshot {}: invalid weight {w}", k + 1)));
            }
            adjacency[u].push((v, w));
        }
        raw.push(adjacency);
    }
    if cur.pos != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    let symmetric = directed || raw.iter().all(|adj| {
        adj.iter().enumerate().all(|(u, list)| {
            list.iter().all(|&(v, w)| {
                adj[v]
                    .iter()
                    .any(|&(back, bw)| back == u && bw.to_bits() == w.to_bits())
            })
        })
    });
    if !symmetric {
        return Err(corrupt("undirected snapshot with an unmatched entry"));
    }
    let snapshots = raw
        .into_iter()
        .enumerate()
        .map(|(k, mut adj)| {
            for list in &mut adj {
                list.sort_by_key(|&(v, _)| v);
            }
            Snapshot::from_adjacency(k + 1, adj, directed)
        })
        .collect();
    SnapshotSequence::new(snapshots, n, id_map)
}

pub fn load_snapshot_cache(path: &Path) -> Result<SnapshotSequence> {
    read_snapshot_cache(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyngraph::{partition_snapshots, EdgeEvent};

    fn sample() -> SnapshotSequence {
        let events = vec![
            EdgeEvent::new(0, 1, 0.0, 1.5),
            EdgeEvent::new(1, 2, 1.0, 1.0),
            EdgeEvent::new(2, 3, 2.0, 0.25),
            EdgeEvent::new(0, 3, 3.0, 2.0),
        ];
        partition_snapshots(&events, 4, 3, false, IdMap::identity(4)).unwrap()
    }

    #[test]
    fn round_trip() {
        let seq = sample();
        let mut buf = Vec::new();
        write_snapshot_cache(&seq, &mut buf).unwrap();
        assert!(is_snapshot_cache(&buf));
        let back = read_snapshot_cache(buf.as_slice()).unwrap();
        assert_eq!(back.snapshots(), seq.snapshots());
    }

    #[test]
    fn truncated_and_bad_magic_rejected() {
        let mut buf = Vec::new();
        write_snapshot_cache(&sample(), &mut buf).unwrap();
        assert!(read_snapshot_cache(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_snapshot_cache(bad.as_slice()).is_err());
        let mut ver = buf;
        ver[4] = 9;
        assert!(read_snapshot_cache(ver.as_slice()).is_err());
    }
}
