//! Labeled multi-digraphs ("test graphs"), their rooted monomials, and the
//! combinatorics built on them: colored components, the bipartite graph of
//! colored components (GCC), vertex partitions and quotients, and the
//! amalgamations whose blocks meet each colored component at most once.
//!
//! A test graph carries directed edges labeled by a matrix variable and an
//! optional adjoint mark. Loops and parallel edges are first class; graphs are
//! compared by explicit construction, never up to isomorphism. Evaluation in
//! concrete matrices lives in [`eval`], set-partition enumeration in
//! [`partitions`], and the line-oriented text format in [`text`].

pub mod eval;
pub mod partitions;
pub mod text;

use crate::error::{CoreError, Result};

/// Adjoint mark on an edge: evaluate the plain matrix or its conjugate
/// transpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Star {
    One,
    Conj,
}

/// A directed edge `src -> tar` labeled by variable `label`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: usize,
    pub tar: usize,
    pub label: usize,
    pub star: Star,
}

/// A finite labeled multi-digraph with named edge labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TestGraph {
    n_vertices: usize,
    edges: Vec<Edge>,
    labels: Vec<String>,
}

impl TestGraph {
    /// An edgeless graph on `n` vertices with no labels declared yet.
    pub fn new(n: usize) -> Self {
        Self { n_vertices: n, edges: Vec::new(), labels: Vec::new() }
    }

    /// An edgeless graph on `n` vertices with the given label names declared
    /// up front, so label ids are stable across graphs built the same way.
    pub fn with_labels(n: usize, names: &[&str]) -> Self {
        let labels = names.iter().map(|s| s.to_string()).collect();
        Self { n_vertices: n, edges: Vec::new(), labels }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_name(&self, id: usize) -> &str {
        &self.labels[id]
    }

    /// Id of a label name, interning it if new.
    pub fn label_id(&mut self, name: &str) -> usize {
        if let Some(k) = self.labels.iter().position(|s| s == name) {
            return k;
        }
        self.labels.push(name.to_string());
        self.labels.len() - 1
    }

    /// Add a directed edge by label id.
    pub fn add_edge(&mut self, src: usize, tar: usize, label: usize, star: Star) -> Result<()> {
        if src >= self.n_vertices || tar >= self.n_vertices {
            return Err(CoreError::Param(format!(
                "edge ({src},{tar}) out of range for {} vertices",
                self.n_vertices
            )));
        }
        if label >= self.labels.len() {
            return Err(CoreError::Param(format!("label id {label} not declared")));
        }
        self.edges.push(Edge { src, tar, label, star });
        Ok(())
    }

    /// Add a directed edge by label name, interning the name if new.
    pub fn add_edge_named(&mut self, src: usize, tar: usize, name: &str, star: Star) -> Result<()> {
        let label = self.label_id(name);
        self.add_edge(src, tar, label, star)
    }

    /// Connectivity of the underlying undirected graph (isolated vertices
    /// count as separate components).
    pub fn is_connected(&self) -> bool {
        self.connected_component_count() <= 1
    }

    /// Number of connected components of the underlying undirected graph.
    pub fn connected_component_count(&self) -> usize {
        if self.n_vertices == 0 {
            return 0;
        }
        let mut uf = UnionFind::new(self.n_vertices);
        for e in &self.edges {
            uf.union(e.src, e.tar);
        }
        uf.class_count()
    }

    /// The quotient graph: vertices become the blocks of `pi`; every edge is
    /// re-targeted to its endpoints' blocks, keeping multiplicity, label, and
    /// adjoint mark.
    pub fn quotient(&self, pi: &partitions::VertexPartition) -> Result<TestGraph> {
        if pi.n_vertices() != self.n_vertices {
            return Err(CoreError::Dimension(format!(
                "partition of {} vertices applied to graph with {}",
                pi.n_vertices(),
                self.n_vertices
            )));
        }
        let mut q = TestGraph {
            n_vertices: pi.n_blocks(),
            edges: Vec::with_capacity(self.edges.len()),
            labels: self.labels.clone(),
        };
        for e in &self.edges {
            q.edges.push(Edge {
                src: pi.block_of(e.src),
                tar: pi.block_of(e.tar),
                label: e.label,
                star: e.star,
            });
        }
        Ok(q)
    }
}

/// A test graph with distinguished input and output vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMonomial {
    pub graph: TestGraph,
    pub v_in: usize,
    pub v_out: usize,
}

impl GraphMonomial {
    pub fn new(graph: TestGraph, v_in: usize, v_out: usize) -> Result<Self> {
        if v_in >= graph.n_vertices() || v_out >= graph.n_vertices() {
            return Err(CoreError::Param(format!(
                "roots ({v_in},{v_out}) out of range for {} vertices",
                graph.n_vertices()
            )));
        }
        Ok(Self { graph, v_in, v_out })
    }

    /// Quotient by a vertex partition; the roots map to their blocks.
    pub fn quotient(&self, pi: &partitions::VertexPartition) -> Result<GraphMonomial> {
        let graph = self.graph.quotient(pi)?;
        Ok(GraphMonomial {
            graph,
            v_in: pi.block_of(self.v_in),
            v_out: pi.block_of(self.v_out),
        })
    }
}

/// A maximal connected subgraph whose edges all carry one label and which
/// contains at least one edge. Vertex and edge lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoredComponent {
    pub label: usize,
    pub vertices: Vec<usize>,
    /// Indices into the parent graph's edge list.
    pub edges: Vec<usize>,
}

/// Maximal single-label connected subgraphs with at least one edge. They
/// partition the edge set; two components of the same label never share a
/// vertex. Ordered by (label, smallest vertex).
pub fn colored_components(g: &TestGraph) -> Vec<ColoredComponent> {
    let mut out = Vec::new();
    for label in 0..g.n_labels() {
        let mut uf = UnionFind::new(g.n_vertices());
        let mut touched = vec![false; g.n_vertices()];
        for e in g.edges() {
            if e.label == label {
                uf.union(e.src, e.tar);
                touched[e.src] = true;
                touched[e.tar] = true;
            }
        }
        // Group this label's edges and touched vertices by union-find root.
        let mut comps: std::collections::BTreeMap<usize, ColoredComponent> =
            std::collections::BTreeMap::new();
        for (k, e) in g.edges().iter().enumerate() {
            if e.label == label {
                let r = uf.find(e.src);
                comps
                    .entry(r)
                    .or_insert_with(|| ColoredComponent {
                        label,
                        vertices: Vec::new(),
                        edges: Vec::new(),
                    })
                    .edges
                    .push(k);
            }
        }
        for v in 0..g.n_vertices() {
            if touched[v] {
                let r = uf.find(v);
                comps.get_mut(&r).expect("touched vertex has edges").vertices.push(v);
            }
        }
        let mut list: Vec<ColoredComponent> = comps.into_values().collect();
        list.sort_by_key(|c| c.vertices[0]);
        out.extend(list);
    }
    out
}

/// The bipartite graph of colored components: one node per component, one per
/// "connector" vertex lying in at least two components, and an incidence for
/// every (connector, component) containment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GccView {
    pub components: Vec<ColoredComponent>,
    /// Vertices of the underlying graph belonging to >= 2 components, sorted.
    pub connectors: Vec<usize>,
    /// (connector vertex, component index) pairs, sorted.
    pub incidences: Vec<(usize, usize)>,
}

/// Build the graph of colored components. Errors if the graph has no edges
/// (no colored component exists).
pub fn gcc(g: &TestGraph) -> Result<GccView> {
    if g.edges().is_empty() {
        return Err(CoreError::Param(
            "graph of colored components requires at least one edge".into(),
        ));
    }
    let components = colored_components(g);
    let mut membership: Vec<Vec<usize>> = vec![Vec::new(); g.n_vertices()];
    for (c, comp) in components.iter().enumerate() {
        for &v in &comp.vertices {
            membership[v].push(c);
        }
    }
    let mut connectors = Vec::new();
    let mut incidences = Vec::new();
    for (v, comps) in membership.iter().enumerate() {
        if comps.len() >= 2 {
            connectors.push(v);
            for &c in comps {
                incidences.push((v, c));
            }
        }
    }
    Ok(GccView { components, connectors, incidences })
}

impl GccView {
    /// Euler defect |nodes| - |edges| - 1 of the bipartite graph. For graphs
    /// labeled by two families every connector lies in exactly one component
    /// per family, so this equals #components - #connectors - 1.
    pub fn eta(&self) -> i64 {
        eta(self.components.len() + self.connectors.len(), self.incidences.len())
    }

    /// Independent tree test: connected and |edges| = |nodes| - 1.
    pub fn is_tree(&self) -> bool {
        let n_nodes = self.components.len() + self.connectors.len();
        if self.incidences.len() != n_nodes - 1 {
            return false;
        }
        // BFS over the bipartite graph; node ids: components, then connectors.
        let conn_idx: std::collections::HashMap<usize, usize> =
            self.connectors.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for &(v, c) in &self.incidences {
            let cv = self.components.len() + conn_idx[&v];
            adj[c].push(cv);
            adj[cv].push(c);
        }
        let mut seen = vec![false; n_nodes];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        reached == n_nodes
    }
}

/// Euler defect |V| - |E| - 1 of a connected graph: always <= 0, with
/// equality exactly for trees.
pub fn eta(v_count: usize, e_count: usize) -> i64 {
    v_count as i64 - e_count as i64 - 1
}

/// Identify the input vertex of `h2` with that of `h`. The result keeps `h`'s
/// vertices as 0..n_h; the remaining vertices of `h2` follow in increasing
/// order. The root of the result is the identified vertex.
pub fn glue_at_root(h: &GraphMonomial, h2: &GraphMonomial) -> Result<GraphMonomial> {
    if h.v_in != h.v_out || h2.v_in != h2.v_out {
        return Err(CoreError::Param(
            "glue_at_root requires both monomials to have v_in = v_out".into(),
        ));
    }
    let n1 = h.graph.n_vertices();
    let n2 = h2.graph.n_vertices();
    let mut glued = h.graph.clone();
    glued.n_vertices = n1 + n2 - 1;
    // Map h2's vertices into the glued graph: the root lands on h's root,
    // everything else shifts past h's vertex range preserving order.
    let map2: Vec<usize> = (0..n2)
        .map(|v| {
            if v == h2.v_in {
                h.v_in
            } else if v < h2.v_in {
                n1 + v
            } else {
                n1 + v - 1
            }
        })
        .collect();
    for e in h2.graph.edges() {
        let name = h2.graph.label_name(e.label).to_string();
        glued.add_edge_named(map2[e.src], map2[e.tar], &name, e.star)?;
    }
    GraphMonomial::new(glued, h.v_in, h.v_in)
}

/// The directed m-cycle with edge k labeled `coloring[k]` (label ids 0 = "a",
/// 1 = "b"), rooted at its base vertex. A length-1 cycle is a loop.
pub fn cycle_monomial(m: usize, coloring: &[usize]) -> Result<GraphMonomial> {
    if m == 0 {
        return Err(CoreError::Param("cycle length must be >= 1".into()));
    }
    if coloring.len() != m {
        return Err(CoreError::Param(format!(
            "coloring has {} entries for a {m}-cycle",
            coloring.len()
        )));
    }
    let mut g = TestGraph::with_labels(m, &["a", "b"]);
    for (k, &label) in coloring.iter().enumerate() {
        if label > 1 {
            return Err(CoreError::Param(format!("coloring entry {label} is not a label id")));
        }
        g.add_edge(k, (k + 1) % m, label, Star::One)?;
    }
    GraphMonomial::new(g, 0, 0)
}

/// Disjoint-union union-find with path halving.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so class representatives are deterministic.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    pub(crate) fn class_count(&mut self) -> usize {
        let n = self.parent.len();
        (0..n).filter(|&v| self.find(v) == v).count()
    }
}
