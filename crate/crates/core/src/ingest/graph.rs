use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric, loop-free, connected neighbor structure in compressed form.
///
/// `adj[offsets[i]..offsets[i] + num[i]]` lists the neighbors of region `i`
/// in increasing index order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyGraph {
    m: usize,
    adj: Vec<usize>,
    num: Vec<usize>,
    offsets: Vec<usize>,
}

impl AdjacencyGraph {
    /// Builds a graph from undirected edges over regions `0..m`.
    ///
    /// Each edge may be listed in either or both directions. Self-loops and
    /// out-of-range indices are rejected, as are graphs with more than one
    /// connected component.
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidPanel("graph needs at least one region".into()));
        }
        let mut sets = vec![BTreeSet::new(); m];
        for &(a, b) in edges {
            if a >= m || b >= m {
                return Err(Error::UnknownRegion(format!("index {}", a.max(b))));
            }
            if a == b {
                return Err(Error::SelfLoop(format!("index {a}")));
            }
            sets[a].insert(b);
            sets[b].insert(a);
        }
        let num: Vec<usize> = sets.iter().map(BTreeSet::len).collect();
        let mut offsets = Vec::with_capacity(m);
        let mut acc = 0;
        for &n in &num {
            offsets.push(acc);
            acc += n;
        }
        let adj = sets.into_iter().flatten().collect();
        let graph = AdjacencyGraph {
            m,
            adj,
            num,
            offsets,
        };
        let components = graph.component_count();
        if components > 1 {
            return Err(Error::DisconnectedGraph { components });
        }
        Ok(graph)
    }

    /// Cycle 0-1-…-(m-1)-0. Degenerates to a single edge for m = 2 and to an
    /// isolated node for m = 1.
    pub fn ring(m: usize) -> Result<Self> {
        let edges: Vec<(usize, usize)> = match m {
            0 | 1 => Vec::new(),
            2 => vec![(0, 1)],
            _ => (0..m).map(|i| (i, (i + 1) % m)).collect(),
        };
        Self::from_edges(m, &edges)
    }

    pub fn path(m: usize) -> Result<Self> {
        let edges: Vec<(usize, usize)> = (1..m).map(|i| (i - 1, i)).collect();
        Self::from_edges(m, &edges)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn adj(&self) -> &[usize] {
        &self.adj
    }

    pub fn num(&self) -> &[usize] {
        &self.num
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[self.offsets[i]..self.offsets[i] + self.num[i]]
    }

    /// Each undirected edge once, as `(i, l)` with `i < l`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.m).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .filter(move |&&l| l > i)
                .map(move |&l| (i, l))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.adj.len() / 2
    }

    /// Relabels region `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.m {
            return Err(Error::Dimension(format!(
                "permutation of length {} for {} regions",
                perm.len(),
                self.m
            )));
        }
        let edges: Vec<(usize, usize)> = self.edges().map(|(a, b)| (perm[a], perm[b])).collect();
        Self::from_edges(self.m, &edges)
    }

    fn component_count(&self) -> usize {
        let mut seen = vec![false; self.m];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.m {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for &l in self.neighbors(i) {
                    if !seen[l] {
                        seen[l] = true;
                        stack.push(l);
                    }
                }
            }
        }
        count
    }
}

/// Reads a `fips_a,fips_b` edge list and resolves names against `region_ids`.
pub fn load_adjacency(path: impl AsRef<Path>, region_ids: &[String]) -> Result<AdjacencyGraph> {
    let path = path.as_ref();
    let index: HashMap<&str, usize> = region_ids
        .iter()
        .enumerate()
        .map(|(i, r)| (r.as_str(), i))
        .collect();
    let mut reader = super::csv_reader(path)?;
    let cols = super::require_columns(&mut reader, path, &["fips_a", "fips_b"])?;
    let mut edges = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| super::csv_error(path, e))?;
        let line = super::line_of(&rec);
        let a = rec.get(cols[0]).unwrap_or("");
        let b = rec.get(cols[1]).unwrap_or("");
        if a.is_empty() || b.is_empty() {
            return Err(Error::Parse {
                path: path.into(),
                line,
                message: "empty region id".into(),
            });
        }
        let ia = *index.get(a).ok_or_else(|| Error::UnknownRegion(a.to_string()))?;
        let ib = *index.get(b).ok_or_else(|| Error::UnknownRegion(b.to_string()))?;
        if ia == ib {
            return Err(Error::SelfLoop(a.to_string()));
        }
        edges.push((ia, ib));
    }
    AdjacencyGraph::from_edges(region_ids.len(), &edges)
}

/// Writes each undirected edge once as a `fips_a,fips_b` row.
pub fn write_adjacency(
    path: impl AsRef<Path>,
    graph: &AdjacencyGraph,
    region_ids: &[String],
) -> Result<()> {
    let path = path.as_ref();
    let mut w = super::csv_writer(path)?;
    let res: std::result::Result<(), csv::Error> = (|| {
        w.write_record(["fips_a", "fips_b"])?;
        for (a, b) in graph.edges() {
            w.write_record([&region_ids[a], &region_ids[b]])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| super::csv_error(path, e))
}
