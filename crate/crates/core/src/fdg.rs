//! Functional dependency graph.
//!
//! Vertices are single attributes, multi-attribute FD left-hand sides and
//! relation attribute sets. Edges come in three kinds:
//!
//! * `Fd`: one per decomposed FD `X -> y`.
//! * `Containment`: from every composite vertex to each vertex it strictly
//!   contains.
//! * `Union`: `X -> L` for a composite left-hand side `L` that `X`
//!   determines but cannot reach through the first two kinds. Without these,
//!   an FD such as `BC -> D` would be unreachable from `A` under
//!   `A -> B, A -> C`. Schemas whose FDs all have single-attribute left sides
//!   never get union edges.
//!
//! Vertex ids follow the lexicographic order of the attribute sets and edge
//! ids the order of `(src, dst)`, so the graph is a pure function of the
//! schema.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::closure::{attribute_closure, decompose_fds, DecomposedFdSet};
use crate::schema::{AttrId, AttributeSet, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexKind {
    Attribute,
    LhsSet,
    Relation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FdgVertex {
    pub attrs: AttributeSet,
    pub kind: VertexKind,
    /// Set is the left-hand side of some FD (also true for single attributes
    /// that determine something).
    pub is_lhs: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Fd,
    Containment,
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FdgEdge {
    pub src: VertexId,
    pub dst: VertexId,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fdg {
    vertices: Vec<FdgVertex>,
    edges: Vec<FdgEdge>,
    out_adj: Vec<Vec<EdgeId>>,
    in_adj: Vec<Vec<EdgeId>>,
    index: BTreeMap<AttributeSet, VertexId>,
    names: Vec<String>,
}

/// Build the FDG of a validated schema.
pub fn build_fdg(schema: &Schema) -> Fdg {
    let rels: Vec<AttributeSet> = schema.relations.iter().map(|r| r.attributes.clone()).collect();
    Fdg::from_parts(schema.attribute_names(), &rels, &decompose_fds(&schema.fds))
}

impl Fdg {
    /// Build from attribute names, relation attribute sets and decomposed FDs.
    pub fn from_parts(names: &[String], relations: &[AttributeSet], fds: &DecomposedFdSet) -> Fdg {
        let mut kinds: BTreeMap<AttributeSet, (VertexKind, bool)> = BTreeMap::new();
        for i in 0..names.len() {
            kinds.insert(AttributeSet::singleton(AttrId(i as u32)), (VertexKind::Attribute, false));
        }
        for fd in fds.iter() {
            let e = kinds.entry(fd.lhs.clone()).or_insert((VertexKind::LhsSet, false));
            e.1 = true;
        }
        for r in relations {
            if r.len() > 1 {
                let e = kinds.entry(r.clone()).or_insert((VertexKind::Relation, false));
                e.0 = VertexKind::Relation;
            }
        }
        let vertices: Vec<FdgVertex> = kinds
            .into_iter()
            .map(|(attrs, (kind, is_lhs))| FdgVertex { attrs, kind, is_lhs })
            .collect();
        let index: BTreeMap<AttributeSet, VertexId> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.attrs.clone(), VertexId(i as u32)))
            .collect();

        let mut edges: BTreeMap<(VertexId, VertexId), EdgeKind> = BTreeMap::new();
        for fd in fds.iter() {
            let src = index[&fd.lhs];
            let dst = index[&AttributeSet::singleton(fd.rhs)];
            edges.insert((src, dst), EdgeKind::Fd);
        }
        for (si, s) in vertices.iter().enumerate() {
            if s.attrs.len() < 2 {
                continue;
            }
            for (ti, t) in vertices.iter().enumerate() {
                if t.attrs.is_strict_subset(&s.attrs) {
                    edges
                        .entry((VertexId(si as u32), VertexId(ti as u32)))
                        .or_insert(EdgeKind::Containment);
                }
            }
        }

        let composite_lhs: Vec<VertexId> = vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_lhs && v.attrs.len() > 1)
            .map(|(i, _)| VertexId(i as u32))
            .collect();
        if !composite_lhs.is_empty() {
            let base = Fdg::assemble(names, vertices.clone(), index.clone(), &edges);
            let mut extra = Vec::new();
            for (xi, x) in vertices.iter().enumerate() {
                let xid = VertexId(xi as u32);
                let closure = attribute_closure(&x.attrs, fds);
                let reach = base.reachable_from(xid);
                for &l in &composite_lhs {
                    let lattrs = &vertices[l.index()].attrs;
                    if l != xid && lattrs.is_subset(&closure) && !reach.contains(&l) {
                        extra.push((xid, l));
                    }
                }
            }
            for key in extra {
                edges.insert(key, EdgeKind::Union);
            }
        }

        Fdg::assemble(names, vertices, index, &edges)
    }

    fn assemble(
        names: &[String],
        vertices: Vec<FdgVertex>,
        index: BTreeMap<AttributeSet, VertexId>,
        edges: &BTreeMap<(VertexId, VertexId), EdgeKind>,
    ) -> Fdg {
        let edges: Vec<FdgEdge> = edges
            .iter()
            .map(|(&(src, dst), &kind)| FdgEdge { src, dst, kind })
            .collect();
        let mut g = Fdg {
            out_adj: Vec::new(),
            in_adj: Vec::new(),
            vertices,
            edges,
            index,
            names: names.to_vec(),
        };
        g.rebuild_adjacency();
        g
    }

    fn rebuild_adjacency(&mut self) {
        let n = self.vertices.len();
        self.out_adj = vec![Vec::new(); n];
        self.in_adj = vec![Vec::new(); n];
        for (i, e) in self.edges.iter().enumerate() {
            self.out_adj[e.src.index()].push(EdgeId(i as u32));
            self.in_adj[e.dst.index()].push(EdgeId(i as u32));
        }
        let edges = &self.edges;
        for list in &mut self.out_adj {
            list.sort_by_key(|e| edges[e.index()].dst);
        }
        for list in &mut self.in_adj {
            list.sort_by_key(|e| edges[e.index()].src);
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[FdgVertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[FdgEdge] {
        &self.edges
    }

    pub fn vertex(&self, v: VertexId) -> &FdgVertex {
        &self.vertices[v.index()]
    }

    pub fn edge(&self, e: EdgeId) -> &FdgEdge {
        &self.edges[e.index()]
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertices.len() as u32).map(VertexId)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len() as u32).map(EdgeId)
    }

    /// Outgoing edges, ordered by destination vertex.
    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.out_adj[v.index()]
    }

    /// Incoming edges, ordered by source vertex.
    pub fn in_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.in_adj[v.index()]
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.names
    }

    pub fn vertex_of(&self, attrs: &AttributeSet) -> Option<VertexId> {
        self.index.get(attrs).copied()
    }

    pub fn attr_vertex(&self, attr: AttrId) -> Option<VertexId> {
        self.vertex_of(&AttributeSet::singleton(attr))
    }

    pub fn edge_between(&self, src: VertexId, dst: VertexId) -> Option<EdgeId> {
        self.out_adj[src.index()]
            .binary_search_by_key(&dst, |e| self.edges[e.index()].dst)
            .ok()
            .map(|i| self.out_adj[src.index()][i])
    }

    pub fn vertex_label(&self, v: VertexId) -> String {
        self.vertex(v).attrs.label(&self.names)
    }

    /// `SRC->DST`, e.g. `ABCD->A`.
    pub fn edge_label(&self, e: EdgeId) -> String {
        let edge = self.edge(e);
        format!("{}->{}", self.vertex_label(edge.src), self.vertex_label(edge.dst))
    }

    /// Look up an edge by its `SRC->DST` label.
    pub fn edge_by_label(&self, label: &str) -> Option<EdgeId> {
        self.edge_ids().find(|&e| self.edge_label(e) == label)
    }

    /// Attributes on both ends of an edge.
    pub fn edge_attrs(&self, e: EdgeId) -> AttributeSet {
        let edge = self.edge(e);
        self.vertex(edge.src).attrs.union(&self.vertex(edge.dst).attrs)
    }

    pub fn reachable_from(&self, start: VertexId) -> BTreeSet<VertexId> {
        let mut seen = vec![false; self.vertices.len()];
        let mut queue = VecDeque::from([start]);
        seen[start.index()] = true;
        let mut out = BTreeSet::new();
        while let Some(v) = queue.pop_front() {
            for &e in &self.out_adj[v.index()] {
                let d = self.edges[e.index()].dst;
                if !seen[d.index()] {
                    seen[d.index()] = true;
                    out.insert(d);
                    queue.push_back(d);
                }
            }
        }
        out
    }

    /// Same graph with every edge reversed. Edge ids are preserved, so a path
    /// in the reversed graph maps back to original edges by id.
    pub fn reverse_graph(&self) -> Fdg {
        let mut g = self.clone();
        for e in &mut g.edges {
            std::mem::swap(&mut e.src, &mut e.dst);
        }
        g.rebuild_adjacency();
        g
    }
}

/// All ordered pairs `(x, y)`, `x != y`, with a path from `x` to `y`.
pub fn transitive_closure_pairs(fdg: &Fdg) -> BTreeSet<(VertexId, VertexId)> {
    fdg.vertex_ids()
        .flat_map(|v| fdg.reachable_from(v).into_iter().filter(move |&w| w != v).map(move |w| (v, w)))
        .collect()
}

pub fn reverse_graph(fdg: &Fdg) -> Fdg {
    fdg.reverse_graph()
}

/// Render the graph as Graphviz DOT. Edges in `highlight` are drawn red and
/// bold; union edges are dashed.
pub fn export_dot(fdg: &Fdg, highlight: &[EdgeId]) -> String {
    if fdg.vertex_count() == 0 {
        return "digraph fdg {}\n".to_string();
    }
    let marked: BTreeSet<EdgeId> = highlight.iter().copied().collect();
    let mut out = String::from("digraph fdg {\n");
    for v in fdg.vertex_ids() {
        let shape = if fdg.vertex(v).attrs.len() > 1 { "box" } else { "ellipse" };
        let _ = writeln!(out, "  n{} [label=\"{}\", shape={}];", v.0, fdg.vertex_label(v), shape);
    }
    for e in fdg.edge_ids() {
        let edge = fdg.edge(e);
        let mut attrs = Vec::new();
        if marked.contains(&e) {
            attrs.push("color=red");
            attrs.push("style=bold");
        } else if edge.kind == EdgeKind::Union {
            attrs.push("style=dashed");
        }
        if attrs.is_empty() {
            let _ = writeln!(out, "  n{} -> n{};", edge.src.0, edge.dst.0);
        } else {
            let _ = writeln!(out, "  n{} -> n{} [{}];", edge.src.0, edge.dst.0, attrs.join(", "));
        }
    }
    out.push_str("}\n");
    out
}
