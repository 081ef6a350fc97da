//! Graph files.
//!
//! Text edge list:
//!
//! ```text
//! # pccseg-graph v1
//! # nodes 27
//! # k 100
//! # classes 2
//! # lambda 1 1 1 ... (23 values, or "none")
//! # labels 0011--1-...  (one char per node: class digit or '-' for unlabeled)
//! 0 4
//! 0 9
//! ```
//!
//! Edge lines hold one `i j` pair with `i < j`. Node-to-pixel mapping is not
//! stored; imported graphs map node `i` to pixel `i`.
//!
//! Binary (little endian): magic `PCCG`, `u32` version, `u64` node count,
//! `u64` k, `u32` class count, `u8` lambda flag followed by 23 `f64` when set,
//! one label byte per node (255 = unlabeled), one `u64` pixel index per node,
//! `n + 1` `u64` CSR offsets, then the `u32` neighbor ids.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use crate::features::{WeightVector, FEATURE_COUNT};
use crate::knn::PixelGraph;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"PCCG";
const VERSION: u32 = 1;
const UNLABELED_BYTE: u8 = 255;

pub fn write_edge_list<W: Write>(graph: &PixelGraph, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# pccseg-graph v1")?;
    writeln!(out, "# nodes {}", graph.node_count())?;
    writeln!(out, "# k {}", graph.k())?;
    writeln!(out, "# classes {}", graph.class_count())?;
    match graph.lambda() {
        Some(l) => {
            let vals: Vec<String> = l.as_array().iter().map(|v| v.to_string()).collect();
            writeln!(out, "# lambda {}", vals.join(" "))?;
        }
        None => writeln!(out, "# lambda none")?,
    }
    let labels: String = graph
        .labels()
        .iter()
        .map(|l| match l {
            Some(c) => char::from_digit(u32::from(*c), 36).unwrap_or('?'),
            None => '-',
        })
        .collect();
    writeln!(out, "# labels {labels}")?;
    for (i, j) in graph.edges() {
        writeln!(out, "{i} {j}")?;
    }
    out.flush()
}

fn format_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("edge list line {line}: {msg}"))
}

pub fn read_edge_list<R: BufRead>(input: R) -> Result<PixelGraph> {
    let mut nodes: Option<usize> = None;
    let mut k = 0usize;
    let mut classes = 2usize;
    let mut lambda = None;
    let mut labels: Option<Vec<Option<u8>>> = None;
    let mut edges = Vec::new();

    for (lineno, line) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| format_err(lineno, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let mut parts = header.split_whitespace();
            let key = parts.next().unwrap_or("");
            let rest: Vec<&str> = parts.collect();
            let single = || {
                rest.first()
                    .ok_or_else(|| format_err(lineno, format!("missing value for {key}")))
            };
            match key {
                "nodes" => nodes = Some(single()?.parse().map_err(|e| format_err(lineno, e))?),
                "k" => k = single()?.parse().map_err(|e| format_err(lineno, e))?,
                "classes" => classes = single()?.parse().map_err(|e| format_err(lineno, e))?,
                "lambda" => {
                    if rest != ["none"] {
                        let vals = rest
                            .iter()
                            .map(|s| s.parse::<f64>())
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|e| format_err(lineno, e))?;
                        lambda = Some(WeightVector::from_slice(&vals)?);
                    }
                }
                "labels" => {
                    let s = single()?;
                    let parsed = s
                        .chars()
                        .map(|c| match c {
                            '-' => Ok(None),
                            c => c
                                .to_digit(36)
                                .map(|d| Some(d as u8))
                                .ok_or_else(|| format_err(lineno, format!("bad label char {c:?}"))),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    labels = Some(parsed);
                }
                _ => {}
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(format_err(lineno, "expected \"i j\""));
        };
        let a: usize = a.parse().map_err(|e| format_err(lineno, e))?;
        let b: usize = b.parse().map_err(|e| format_err(lineno, e))?;
        if a >= b {
            return Err(format_err(lineno, format!("edge {a} {b} must satisfy i < j")));
        }
        edges.push((a, b));
    }

    let n = nodes.ok_or_else(|| Error::Format("edge list has no \"# nodes\" header".into()))?;
    let labels = labels.unwrap_or_else(|| vec![None; n]);
    if labels.len() != n {
        return Err(Error::Format(format!(
            "labels header has {} entries for {n} nodes",
            labels.len()
        )));
    }
    let mut adjacency = vec![Vec::new(); n];
    for (a, b) in edges {
        if b >= n {
            return Err(Error::Format(format!("edge {a} {b} references a node >= {n}")));
        }
        adjacency[a].push(b as u32);
        adjacency[b].push(a as u32);
    }
    PixelGraph::from_adjacency(adjacency, labels, classes)?.with_metadata((0..n).collect(), k, lambda)
}

pub fn load_edge_list(path: &Path) -> Result<PixelGraph> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_edge_list(std::io::BufReader::new(file))
}

pub fn save_edge_list(graph: &PixelGraph, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_edge_list(graph, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn write_binary<W: Write>(graph: &PixelGraph, mut out: W) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(graph.node_count() as u64).to_le_bytes())?;
    out.write_all(&(graph.k() as u64).to_le_bytes())?;
    out.write_all(&(graph.class_count() as u32).to_le_bytes())?;
    match graph.lambda() {
        Some(l) => {
            out.write_all(&[1])?;
            for v in l.as_array() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        None => out.write_all(&[0])?,
    }
    let labels: Vec<u8> = graph.labels().iter().map(|l| l.unwrap_or(UNLABELED_BYTE)).collect();
    out.write_all(&labels)?;
    for &p in graph.node_pixels() {
        out.write_all(&(p as u64).to_le_bytes())?;
    }
    let mut offset = 0u64;
    out.write_all(&offset.to_le_bytes())?;
    for list in graph.adjacency() {
        offset += list.len() as u64;
        out.write_all(&offset.to_le_bytes())?;
    }
    for list in graph.adjacency() {
        for &j in list {
            out.write_all(&j.to_le_bytes())?;
        }
    }
    out.flush()
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("binary graph is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
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

pub fn read_binary<R: Read>(mut input: R) -> Result<PixelGraph> {
    let mut buf = Vec::new();
    input
        .read_to_end(&mut buf)
        .map_err(|e| Error::Format(format!("reading binary graph: {e}")))?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("not a binary graph file (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported binary graph version {version}")));
    }
    let n = c.u64()? as usize;
    let k = c.u64()? as usize;
    let classes = c.u32()? as usize;
    let lambda = match c.take(1)?[0] {
        0 => None,
        1 => {
            let mut w = [0.0; FEATURE_COUNT];
            for v in w.iter_mut() {
                *v = c.f64()?;
            }
            Some(WeightVector::new(w)?)
        }
        other => return Err(Error::Format(format!("bad lambda flag {other}"))),
    };
    let labels = c.take(n)?.iter().map(|&b| (b != UNLABELED_BYTE).then_some(b)).collect();
    let node_pixels = (0..n)
        .map(|_| c.u64().map(|p| p as usize))
        .collect::<Result<Vec<_>>>()?;
    let offsets = (0..=n).map(|_| c.u64()).collect::<Result<Vec<_>>>()?;
    if offsets.windows(2).any(|w| w[0] > w[1]) || offsets[0] != 0 {
        return Err(Error::Format("binary graph offsets are not monotone".into()));
    }
    let mut adjacency = Vec::with_capacity(n);
    for w in offsets.windows(2) {
        let len = (w[1] - w[0]) as usize;
        adjacency.push((0..len).map(|_| c.u32()).collect::<Result<Vec<_>>>()?);
    }
    if c.pos != buf.len() {
        return Err(Error::Format("trailing bytes after binary graph".into()));
    }
    PixelGraph::from_adjacency(adjacency, labels, classes)?.with_metadata(node_pixels, k, lambda)
}

pub fn load_binary(path: &Path) -> Result<PixelGraph> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_binary(std::io::BufReader::new(file))
}

pub fn save_binary(graph: &PixelGraph, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_binary(graph, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Loads either format, sniffing the binary magic.
pub fn load_graph(path: &Path) -> Result<PixelGraph> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        read_binary(bytes.as_slice())
    } else {
        read_edge_list(bytes.as_slice())
    }
}
