//! Graphs and their embedding into a disjoint union of p-adic balls.
//!
//! Vertex `k` (in input order) is sent to the base-`p` code of the integer `k`
//! at precision `N`; the union of the balls `code + p^N Z_p` is the compact
//! domain on which the continuum model lives. A [`LevelGrid`] refines every
//! vertex ball into `p^{M-N}` sub-balls and fixes the canonical site order
//! (vertex major, offset minor) used by every matrix in the crate.

use std::ops::Range;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{checked_pow, is_prime, refine_ball, PAdicCode};

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Array2<u8>,
    labels: Option<Vec<String>>,
}

/// Structural facts reported when a graph is loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphValidation {
    pub symmetric: bool,
    pub zero_diagonal: bool,
}

impl GraphValidation {
    pub fn is_undirected_simple(&self) -> bool {
        self.symmetric && self.zero_diagonal
    }
}

/// Structured graph document. Either `edges` or `adjacency` must be given.
///
/// ```json
/// {"n": 3, "edges": [[0, 1], [1, 2]], "labels": ["a", "b", "c"], "p": 3}
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<Vec<Vec<u8>>>,
    /// Edges are one-way when set; by default every edge is added both ways.
    #[serde(default)]
    pub directed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
}

impl Graph {
    /// Builds a graph from a 0/1 adjacency matrix. With `strict`, self-loops
    /// are rejected.
    pub fn from_adjacency(rows: Vec<Vec<u8>>, strict: bool) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Graph("graph has no vertices".into()));
        }
        let mut adjacency = Array2::zeros((n, n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Graph(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &a) in row.iter().enumerate() {
                if a > 1 {
                    return Err(Error::Graph(format!("entry ({i}, {j}) = {a} is not 0 or 1")));
                }
                if strict && i == j && a != 0 {
                    return Err(Error::Graph(format!("self-loop at vertex {i}")));
                }
                adjacency[(i, j)] = a;
            }
        }
        Ok(Self {
            adjacency,
            labels: None,
        })
    }

    pub fn from_edges(n: usize, edges: &[[usize; 2]], directed: bool, strict: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("graph has no vertices".into()));
        }
        let mut adjacency = Array2::zeros((n, n));
        for &[i, j] in edges {
            if i >= n || j >= n {
                return Err(Error::Graph(format!("edge ({i}, {j}) refers to a vertex >= {n}")));
            }
            if strict && i == j {
                return Err(Error::Graph(format!("self-loop at vertex {i}")));
            }
            adjacency[(i, j)] = 1;
            if !directed {
                adjacency[(j, i)] = 1;
            }
        }
        Ok(Self {
            adjacency,
            labels: None,
        })
    }

    pub fn complete(n: usize) -> Self {
        let mut adjacency = Array2::ones((n, n));
        for i in 0..n {
            adjacency[(i, i)] = 0;
        }
        Self {
            adjacency,
            labels: None,
        }
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<[usize; 2]> = (1..n).map(|i| [i - 1, i]).collect();
        Self::from_edges(n.max(1), &edges, false, true).expect("path edges are valid")
    }

    pub fn cycle(n: usize) -> Self {
        let mut edges: Vec<[usize; 2]> = (1..n).map(|i| [i - 1, i]).collect();
        if n > 2 {
            edges.push([n - 1, 0]);
        }
        Self::from_edges(n.max(1), &edges, false, true).expect("cycle edges are valid")
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Graph(format!(
                "{} labels for {} vertices",
                labels.len(),
                self.n()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Array2<u8> {
        &self.adjacency
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// `γ_I = Σ_J A_{IJ}`.
    pub fn degrees(&self) -> Vec<u32> {
        self.adjacency
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&a| a as u32).sum())
            .collect()
    }

    /// Undirected edge count, each self-loop counted once.
    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .flat_map(|i| (i..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency[(i, j)] != 0 || self.adjacency[(j, i)] != 0)
            .count()
    }

    pub fn validation(&self) -> GraphValidation {
        let n = self.n();
        let symmetric = (0..n).all(|i| (0..i).all(|j| self.adjacency[(i, j)] == self.adjacency[(j, i)]));
        let zero_diagonal = (0..n).all(|i| self.adjacency[(i, i)] == 0);
        GraphValidation {
            symmetric,
            zero_diagonal,
        }
    }

    /// Errors unless the adjacency is symmetric with zero diagonal.
    pub fn require_undirected(&self) -> Result<()> {
        if self.validation().is_undirected_simple() {
            Ok(())
        } else {
            Err(Error::Asymmetric)
        }
    }

    /// Number of connected components of the underlying undirected graph.
    pub fn components(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut count = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let linked = self.adjacency[(i, j)] != 0 || self.adjacency[(j, i)] != 0;
                    if linked && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }
}

impl GraphDocument {
    pub fn to_graph(&self, strict: bool) -> Result<Graph> {
        let graph = match (&self.adjacency, &self.edges) {
            (Some(_), Some(_)) => {
                return Err(Error::Graph("give either `edges` or `adjacency`, not both".into()))
            }
            (Some(rows), None) => {
                if let Some(n) = self.n {
                    if n != rows.len() {
                        return Err(Error::Graph(format!(
                            "n = {n} but adjacency has {} rows",
                            rows.len()
                        )));
                    }
                }
                Graph::from_adjacency(rows.clone(), strict)?
            }
            (None, Some(edges)) => {
                let implied = edges.iter().map(|e| e[0].max(e[1]) + 1).max().unwrap_or(0);
                let n = self.n.unwrap_or(implied);
                Graph::from_edges(n, edges, self.directed, strict)?
            }
            (None, None) => match self.n {
                Some(n) => Graph::from_edges(n, &[], false, strict)?,
                None => return Err(Error::Graph("document has neither `n`, `edges` nor `adjacency`".into())),
            },
        };
        match &self.labels {
            Some(labels) => graph.with_labels(labels.clone()),
            None => Ok(graph),
        }
    }
}

/// Parses a plain-text edge list: one `i j` pair per line, 0-based, `#`
/// starts a comment. An optional `vertices K` line fixes the vertex count
/// (needed for trailing isolated vertices).
pub fn parse_edge_list(text: &str, strict: bool) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut declared = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::GraphParse {
                line: line_no,
                msg: format!("`{s}` is not a vertex index"),
            })
        };
        match fields.as_slice() {
            ["vertices", k] => declared = Some(parse(k)?),
            [i, j] => edges.push([parse(i)?, parse(j)?]),
            _ => {
                return Err(Error::GraphParse {
                    line: line_no,
                    msg: format!("expected `i j`, found `{line}`"),
                })
            }
        }
    }
    let implied = edges.iter().map(|e| e[0].max(e[1]) + 1).max().unwrap_or(0);
    let n = match declared {
        Some(k) if k < implied => {
            return Err(Error::Graph(format!(
                "declared {k} vertices but edges reference vertex {}",
                implied - 1
            )))
        }
        Some(k) => k,
        None => implied,
    };
    Graph::from_edges(n, &edges, false, strict)
}

/// Loaded graph plus any `p`/`N` hints carried by the source document.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub validation: GraphValidation,
    pub p: Option<u32>,
    pub level: Option<usize>,
}

/// Loads either a JSON [`GraphDocument`] (text starting with `{`) or an edge list.
pub fn load_graph(text: &str, strict: bool) -> Result<LoadedGraph> {
    let (graph, p, level) = if text.trim_start().starts_with('{') {
        let doc: GraphDocument = serde_json::from_str(text).map_err(|e| Error::GraphParse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        (doc.to_graph(strict)?, doc.p, doc.level)
    } else {
        (parse_edge_list(text, strict)?, None, None)
    };
    let validation = graph.validation();
    Ok(LoadedGraph {
        graph,
        validation,
        p,
        level,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEmbedding {
    graph: Graph,
    p: u32,
    level: usize,
    codes: Vec<PAdicCode>,
    degrees: Vec<u32>,
    gamma_max: u32,
}

/// Embeds the graph with prime `p` (default 2) at level `N` (default: the
/// smallest `N ≥ 1` with `p^N ≥ n`). Vertex `k` gets the code of `k`.
pub fn embed(graph: &Graph, p: Option<u32>, level: Option<usize>) -> Result<NetworkEmbedding> {
    let p = p.unwrap_or(2);
    if !is_prime(p as u64) {
        return Err(Error::NotPrime(p as u64));
    }
    let n = graph.n() as u64;
    let level = match level {
        Some(0) => return Err(Error::Argument("level N must be at least 1".into())),
        Some(l) => {
            let cap = checked_pow(p as u64, l as u32).unwrap_or(u64::MAX);
            if cap < n {
                return Err(Error::Argument(format!(
                    "p^N = {p}^{l} = {cap} is smaller than the vertex count {n}"
                )));
            }
            l
        }
        None => {
            let mut l = 1;
            while (p as u64).pow(l as u32) < n {
                l += 1;
            }
            l
        }
    };
    let codes = (0..n)
        .map(|k| PAdicCode::from_value(p, k, level))
        .collect::<Result<Vec<_>>>()?;
    let degrees = graph.degrees();
    let gamma_max = degrees.iter().copied().max().unwrap_or(0);
    Ok(NetworkEmbedding {
        graph: graph.clone(),
        p,
        level,
        codes,
        degrees,
        gamma_max,
    })
}

impl NetworkEmbedding {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// The embedding level `N`.
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn codes(&self) -> &[PAdicCode] {
        &self.codes
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn gamma_max(&self) -> u32 {
        self.gamma_max
    }

    /// Vertex whose ball contains `x`, if any.
    pub fn vertex_of(&self, x: &PAdicCode) -> Option<usize> {
        if x.p() != self.p || x.precision() < self.level {
            return None;
        }
        let v = x.value_mod(self.level) as usize;
        (v < self.n()).then_some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub vertex: usize,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelGrid {
    embedding: NetworkEmbedding,
    level: usize,
    block: usize,
    sites: Vec<Site>,
    codes: Vec<PAdicCode>,
}

/// Enumerates the level-`M` sub-balls of every vertex ball.
pub fn refine(embedding: &NetworkEmbedding, m: usize) -> Result<LevelGrid> {
    if m < embedding.level {
        return Err(Error::Argument(format!(
            "grid level M = {m} is below the embedding level N = {}",
            embedding.level
        )));
    }
    let mut sites = Vec::new();
    let mut codes = Vec::new();
    for (vertex, center) in embedding.codes.iter().enumerate() {
        for (offset, code) in refine_ball(center, m)?.into_iter().enumerate() {
            sites.push(Site {
                vertex,
                offset: offset as u64,
            });
            codes.push(code);
        }
    }
    let block = sites.len() / embedding.n();
    Ok(LevelGrid {
        embedding: embedding.clone(),
        level: m,
        block,
        sites,
        codes,
    })
}

impl LevelGrid {
    pub fn embedding(&self) -> &NetworkEmbedding {
        &self.embedding
    }

    /// The grid level `M`.
    pub fn level(&self) -> usize {
        self.level
    }

    /// Sites per vertex ball, `p^{M-N}`.
    pub fn block(&self) -> usize {
        self.block
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn codes(&self) -> &[PAdicCode] {
        &self.codes
    }

    pub fn vertex_of(&self, site: usize) -> usize {
        self.sites[site].vertex
    }

    /// Site indices inside the ball of `vertex`.
    pub fn ball(&self, vertex: usize) -> Range<usize> {
        vertex * self.block..(vertex + 1) * self.block
    }

    /// Index of the site whose code equals `x` on the first `M` digits.
    pub fn index_of(&self, x: &PAdicCode) -> Option<usize> {
        let vertex = self.embedding.vertex_of(x)?;
        if x.precision() < self.level {
            return None;
        }
        let n_level = self.embedding.level;
        let offset = x.value_mod(self.level) / (self.embedding.p as u64).pow(n_level as u32);
        Some(vertex * self.block + offset as usize)
    }
}
