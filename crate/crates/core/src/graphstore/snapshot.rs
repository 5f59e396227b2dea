//! Snapshot file format.
//!
//! All integers are little-endian. Strings are a `u32` byte length followed
//! by UTF-8 bytes.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "ASKG"
//! 4       4     u32 format version (currently 1)
//! 8       8     u64 schema block length S, then S bytes
//! ..      8     u64 node block length N, then N bytes
//! ..      8     u64 edge block length E, then E bytes
//! end-32  32    SHA-256 over every preceding byte
//! ```
//!
//! Schema block: labels (`u32` count, each a string plus `u32`-counted
//! property strings), relationship types (`u32` count, each a string plus
//! `u32`-counted (source, target) string pairs), unique constraints
//! (`u32` count of (label, property) strings), indexes (`u32` count, each a
//! label plus `u32`-counted property strings).
//!
//! Node block: `u64` next node id, `u64` count, then per node `u64` id,
//! `u32`-counted labels, properties. Edge block: `u64` next relationship id,
//! `u64` count, then per edge `u64` id, type string, `u64` source, `u64`
//! target, properties.
//!
//! Properties: `u32` count, then key string, `u8` tag and payload:
//! 0 string, 1 `i64`, 2 `f64` bits, 3 `u8` boolean, 4 `i32` days since
//! 0001-01-01 (proleptic Gregorian).

use std::fs;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::schema::{GraphSchema, IndexDef, UniqueConstraint};
use super::store::{Node, NodeId, Properties, PropertyGraph, RelId, Relationship};
use super::value::Value;

pub const MAGIC: &[u8; 4] = b"ASKG";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a graph snapshot (bad magic bytes)")]
    BadMagic,
    #[error("snapshot format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("snapshot checksum mismatch (file truncated or corrupted)")]
    Checksum,
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}

pub fn snapshot_save(graph: &PropertyGraph, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
    fs::write(path, encode(graph))?;
    Ok(())
}

pub fn snapshot_load(path: impl AsRef<Path>) -> Result<PropertyGraph, SnapshotError> {
    decode(&fs::read(path)?)
}

pub fn encode(graph: &PropertyGraph) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&payload(graph));
    let sum = Sha256::digest(&out);
    out.extend_from_slice(&sum);
    out
}

pub fn decode(bytes: &[u8]) -> Result<PropertyGraph, SnapshotError> {
    if bytes.len() >= 4 && &bytes[..4] != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    if bytes.len() < 8 + CHECKSUM_LEN {
        return Err(SnapshotError::Checksum);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(SnapshotError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (body, sum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != sum {
        return Err(SnapshotError::Checksum);
    }
    let mut r = Reader::new(&body[8..]);
    let schema_bytes = r.block()?;
    let node_bytes = r.block()?;
    let edge_bytes = r.block()?;
    if !r.at_end() {
        return Err(SnapshotError::Corrupt("trailing bytes after edge block".into()));
    }

    let schema = read_schema(&mut Reader::new(schema_bytes))?;
    let mut graph = PropertyGraph::new();
    graph.set_schema_unchecked(schema);

    let mut nr = Reader::new(node_bytes);
    let next_node = nr.u64()?;
    for _ in 0..nr.u64()? {
        let id = NodeId(nr.u64()?);
        let labels = (0..nr.u32()?).map(|_| nr.string()).collect::<Result<_, _>>()?;
        let properties = read_props(&mut nr)?;
        graph.raw_insert_node(Node {
            id,
            labels,
            properties,
        });
    }
    let mut er = Reader::new(edge_bytes);
    let next_rel = er.u64()?;
    for _ in 0..er.u64()? {
        let id = RelId(er.u64()?);
        let rel_type = er.string()?;
        let source = NodeId(er.u64()?);
        let target = NodeId(er.u64()?);
        let properties = read_props(&mut er)?;
        if !graph.contains_node(source) || !graph.contains_node(target) {
            return Err(SnapshotError::Corrupt(format!(
                "relationship {id} references a missing node"
            )));
        }
        graph.raw_insert_rel(Relationship {
            id,
            rel_type,
            source,
            target,
            properties,
        });
    }
    graph.set_next_ids(next_node, next_rel);
    Ok(graph)
}

impl PropertyGraph {
    /// SHA-256 (hex) of the canonical serialization: schema, nodes and
    /// relationships in id order.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(payload(self)))
    }
}

fn payload(graph: &PropertyGraph) -> Vec<u8> {
    let mut schema = Writer::default();
    write_schema(&mut schema, graph.schema());

    let (next_node, next_rel) = graph.next_ids();
    let mut nodes = Writer::default();
    nodes.u64(next_node);
    nodes.u64(graph.node_count() as u64);
    for n in graph.nodes() {
        nodes.u64(n.id.0);
        nodes.u32(n.labels.len() as u32);
        for l in &n.labels {
            nodes.string(l);
        }
        write_props(&mut nodes, &n.properties);
    }

    let mut edges = Writer::default();
    edges.u64(next_rel);
    edges.u64(graph.relationship_count() as u64);
    for r in graph.relationships() {
        edges.u64(r.id.0);
        edges.string(&r.rel_type);
        edges.u64(r.source.0);
        edges.u64(r.target.0);
        write_props(&mut edges, &r.properties);
    }

    let mut out = Writer::default();
    for block in [schema.0, nodes.0, edges.0] {
        out.u64(block.len() as u64);
        out.0.extend_from_slice(&block);
    }
    out.0
}

fn write_schema(w: &mut Writer, s: &GraphSchema) {
    w.u32(s.node_labels.len() as u32);
    for (label, props) in &s.node_labels {
        w.string(label);
        w.u32(props.len() as u32);
        for p in props {
            w.string(p);
        }
    }
    w.u32(s.relationship_types.len() as u32);
    for (rt, pairs) in &s.relationship_types {
        w.string(rt);
        w.u32(pairs.len() as u32);
        for (a, b) in pairs {
            w.string(a);
            w.string(b);
        }
    }
    w.u32(s.unique_constraints.len() as u32);
    for c in &s.unique_constraints {
        w.string(&c.label);
        w.string(&c.property);
    }
    w.u32(s.indexes.len() as u32);
    for i in &s.indexes {
        w.string(&i.label);
        w.u32(i.properties.len() as u32);
        for p in &i.properties {
            w.string(p);
        }
    }
}

fn read_schema(r: &mut Reader<'_>) -> Result<GraphSchema, SnapshotError> {
    let mut s = GraphSchema::new();
    for _ in 0..r.u32()? {
        let label = r.string()?;
        let props = (0..r.u32()?).map(|_| r.string()).collect::<Result<_, _>>()?;
        s.node_labels.insert(label, props);
    }
    for _ in 0..r.u32()? {
        let rt = r.string()?;
        let mut pairs = std::collections::BTreeSet::new();
        for _ in 0..r.u32()? {
            pairs.insert((r.string()?, r.string()?));
        }
        s.relationship_types.insert(rt, pairs);
    }
    for _ in 0..r.u32()? {
        let label = r.string()?;
        let property = r.string()?;
        s.unique_constraints.insert(UniqueConstraint { label, property });
    }
    for _ in 0..r.u32()? {
        let label = r.string()?;
        let properties = (0..r.u32()?).map(|_| r.string()).collect::<Result<_, _>>()?;
        s.indexes.insert(IndexDef { label, properties });
    }
    if !r.at_end() {
        return Err(SnapshotError::Corrupt("trailing bytes in schema block".into()));
    }
    Ok(s)
}

fn write_props(w: &mut Writer, props: &Properties) {
    w.u32(props.len() as u32);
    for (k, v) in props {
        w.string(k);
        match v {
            Value::Str(s) => {
                w.u8(0);
                w.string(s);
            }
            Value::Int(i) => {
                w.u8(1);
                w.0.extend_from_slice(&i.to_le_bytes());
            }
            Value::Float(f) => {
                w.u8(2);
                w.u64(f.to_bits());
            }
            Value::Bool(b) => {
                w.u8(3);
                w.u8(u8::from(*b));
            }
            Value::Date(d) => {
                w.u8(4);
                w.0.extend_from_slice(&d.num_days_from_ce().to_le_bytes());
            }
        }
    }
}

fn read_props(r: &mut Reader<'_>) -> Result<Properties, SnapshotError> {
    let mut props = Properties::new();
    for _ in 0..r.u32()? {
        let key = r.string()?;
        let value = match r.u8()? {
            0 => Value::Str(r.string()?),
            1 => Value::Int(i64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"))),
            2 => Value::Float(f64::from_bits(r.u64()?)),
            3 => Value::Bool(r.u8()? != 0),
            4 => {
                let days = i32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
                Value::Date(
                    NaiveDate::from_num_days_from_ce_opt(days)
                        .ok_or_else(|| SnapshotError::Corrupt(format!("bad date {days}")))?,
                )
            }
            tag => return Err(SnapshotError::Corrupt(format!("unknown value tag {tag}"))),
        };
        props.insert(key, value);
    }
    Ok(props)
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn at_end(&self) -> bool {
        self.pos == self.buf.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        if self.buf.len() - self.pos < n {
            return Err(SnapshotError::Corrupt("unexpected end of block".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, SnapshotError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn string(&mut self) -> Result<String, SnapshotError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| SnapshotError::Corrupt("invalid utf-8 string".into()))
    }
    fn block(&mut self) -> Result<&'a [u8], SnapshotError> {
        let n = self.u64()? as usize;
        self.take(n)
    }
}
