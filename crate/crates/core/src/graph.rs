//! Replaceability graphs.
//!
//! Vertex `i` stands for swapping pair `i` of a decomposition. Swapping a pair
//! whose α-component holds single elements pushes those elements out of the
//! α-domain; each such element produces edges to the pairs whose
//! (1 − α)-component holds it, since swapping one of them brings it back.
//! All single/location predicates are evaluated against the decomposition the
//! graph was built from, never against an intermediate swap state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::decomposition::{ElementSet, SpecialDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// The element has exactly one restoring location.
    Obligatory,
    /// The element has several restoring locations.
    Possible,
}

/// A labeled edge. Ordered by `(from, to, element)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub element: usize,
    pub kind: EdgeKind,
}

impl Edge {
    /// `&c1` for obligatory edges, `∨c1` for possible ones.
    pub fn label(&self) -> String {
        match self.kind {
            EdgeKind::Obligatory => format!("&c{}", self.element),
            EdgeKind::Possible => format!("∨c{}", self.element),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("the missing-element set is empty")]
    EmptyMissingSet,
    #[error("element {0} is not missing from the domain")]
    NotMissing(usize),
    #[error("vertex v{0} is not a main vertex")]
    NotAMainVertex(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplGraph {
    pub alpha: bool,
    pub vertices: BTreeSet<usize>,
    pub edges: BTreeSet<Edge>,
    pub mains: BTreeSet<usize>,
    pub finals: BTreeSet<usize>,
    /// Missing element → main vertices whose (1 − α)-component holds it.
    pub main_assoc: BTreeMap<usize, BTreeSet<usize>>,
    /// Vertices with a single element that no (1 − α)-component holds.
    pub dead: BTreeSet<usize>,
}

impl ReplGraph {
    pub fn out_edges(&self, v: usize) -> impl Iterator<Item = &Edge> + '_ {
        let lo = Edge {
            from: v,
            to: 0,
            element: 0,
            kind: EdgeKind::Obligatory,
        };
        self.edges.range(lo..).take_while(move |e| e.from == v)
    }

    pub fn in_edges(&self, v: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.to == v)
    }

    /// Distinct successors of every vertex (multi-edges collapsed).
    pub fn adjacency(&self) -> BTreeMap<usize, BTreeSet<usize>> {
        let mut adj: BTreeMap<usize, BTreeSet<usize>> = self.vertices.iter().map(|&v| (v, BTreeSet::new())).collect();
        for e in &self.edges {
            adj.entry(e.from).or_default().insert(e.to);
        }
        adj
    }

    /// Drops the given vertices together with every edge touching them.
    pub fn remove_vertices(&mut self, gone: &BTreeSet<usize>) {
        self.vertices.retain(|v| !gone.contains(v));
        self.edges.retain(|e| !gone.contains(&e.from) && !gone.contains(&e.to));
        self.mains.retain(|v| !gone.contains(v));
        self.finals.retain(|v| !gone.contains(v));
        self.dead.retain(|v| !gone.contains(v));
        for holders in self.main_assoc.values_mut() {
            holders.retain(|v| !gone.contains(v));
        }
    }

    pub fn remove_edges(&mut self, gone: &BTreeSet<Edge>) {
        self.edges.retain(|e| !gone.contains(e));
    }

    /// Vertices reachable from `start`, including it.
    pub fn reachable_from(&self, start: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        let adj = self.adjacency();
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = start.into_iter().filter(|v| self.vertices.contains(v)).collect();
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                if let Some(next) = adj.get(&v) {
                    stack.extend(next.iter().copied().filter(|w| !seen.contains(w)));
                }
            }
        }
        seen
    }
}

/// Builds `G(missing)` for the α-domain of `d`.
pub fn build_graph(d: &SpecialDecomposition, alpha: bool, missing: &ElementSet) -> Result<ReplGraph, GraphError> {
    if missing.is_empty() {
        return Err(GraphError::EmptyMissingSet);
    }
    let domain = d.domain(alpha);
    if let Some(e) = missing.iter().find(|&e| domain.contains(e)) {
        return Err(GraphError::NotMissing(e));
    }

    let mut main_assoc = BTreeMap::new();
    for e in missing.iter() {
        main_assoc.insert(e, d.element_locations(!alpha, e));
    }
    let mains: BTreeSet<usize> = main_assoc.values().flatten().copied().collect();

    let mut vertices = mains.clone();
    let mut edges = BTreeSet::new();
    let mut finals = BTreeSet::new();
    let mut dead = BTreeSet::new();
    let mut pending = mains.clone();

    while let Some(i) = pending.pop_first() {
        let singles = d.single_elements(i, alpha).expect("vertex is a pair index");
        if singles.is_empty() {
            finals.insert(i);
            continue;
        }
        for e in singles.iter() {
            let locations = d.element_locations(!alpha, e);
            let kind = match locations.len() {
                0 => {
                    dead.insert(i);
                    continue;
                }
                1 => EdgeKind::Obligatory,
                _ => EdgeKind::Possible,
            };
            for to in locations {
                edges.insert(Edge {
                    from: i,
                    to,
                    element: e,
                    kind,
                });
                if vertices.insert(to) {
                    pending.insert(to);
                }
            }
        }
    }

    Ok(ReplGraph {
        alpha,
        vertices,
        edges,
        mains,
        finals,
        main_assoc,
        dead,
    })
}

/// `G[v]`: the part of `g` reachable from main vertex `v`, with `v` as its
/// only main vertex.
pub fn build_subgraph_from(g: &ReplGraph, v: usize) -> Result<ReplGraph, GraphError> {
    if !g.mains.contains(&v) {
        return Err(GraphError::NotAMainVertex(v));
    }
    let keep = g.reachable_from([v]);
    let edges = g
        .edges
        .iter()
        .filter(|e| keep.contains(&e.from) && keep.contains(&e.to))
        .copied()
        .collect();
    let main_assoc = g
        .main_assoc
        .iter()
        .filter(|(_, holders)| holders.contains(&v))
        .map(|(&e, _)| (e, BTreeSet::from([v])))
        .collect();
    Ok(ReplGraph {
        alpha: g.alpha,
        edges,
        mains: BTreeSet::from([v]),
        finals: g.finals.intersection(&keep).copied().collect(),
        dead: g.dead.intersection(&keep).copied().collect(),
        main_assoc,
        vertices: keep,
    })
}

/// All elementary cycles, each rotated to start at its least vertex, sorted.
pub fn enumerate_cycles(g: &ReplGraph) -> Vec<Vec<usize>> {
    elementary_cycles(&g.adjacency())
}

/// The first entry of [`enumerate_cycles`], found without enumerating.
pub fn first_cycle(g: &ReplGraph) -> Option<Vec<usize>> {
    lexicographically_first_cycle(&g.adjacency())
}

/// Johnson's circuit enumeration over a successor map. Self-loops are
/// reported as one-vertex cycles.
pub fn elementary_cycles(adj: &BTreeMap<usize, BTreeSet<usize>>) -> Vec<Vec<usize>> {
    let mut cycles = Vec::new();
    let vertices: Vec<usize> = adj.keys().copied().collect();
    for &start in &vertices {
        let component = strong_component(adj, start);
        if component.len() == 1 && !adj[&start].contains(&start) {
            continue;
        }
        let mut search = CircuitSearch {
            adj,
            start,
            component: &component,
            blocked: BTreeSet::new(),
            block_map: BTreeMap::new(),
            path: vec![start],
            out: &mut cycles,
        };
        search.circuit(start);
    }
    cycles.sort();
    cycles
}

/// Strongly connected component of `start` within the vertices `>= start`.
fn strong_component(adj: &BTreeMap<usize, BTreeSet<usize>>, start: usize) -> BTreeSet<usize> {
    let forward = restricted_reach(adj, start, |w| w >= start, false);
    let backward = restricted_reach(adj, start, |w| w >= start, true);
    forward.intersection(&backward).copied().collect()
}

fn restricted_reach(
    adj: &BTreeMap<usize, BTreeSet<usize>>,
    start: usize,
    allowed: impl Fn(usize) -> bool,
    reverse: bool,
) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        let next: Vec<usize> = if reverse {
            adj.iter()
                .filter(|(_, succ)| succ.contains(&v))
                .map(|(&u, _)| u)
                .collect()
        } else {
            adj.get(&v).map(|s| s.iter().copied().collect()).unwrap_or_default()
        };
        for w in next {
            if allowed(w) && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen
}

struct CircuitSearch<'a> {
    adj: &'a BTreeMap<usize, BTreeSet<usize>>,
    start: usize,
    component: &'a BTreeSet<usize>,
    blocked: BTreeSet<usize>,
    block_map: BTreeMap<usize, BTreeSet<usize>>,
    path: Vec<usize>,
    out: &'a mut Vec<Vec<usize>>,
}

impl CircuitSearch<'_> {
    fn circuit(&mut self, v: usize) -> bool {
        let mut found = false;
        self.blocked.insert(v);
        let successors: Vec<usize> = self
            .adj
            .get(&v)
            .into_iter()
            .flatten()
            .copied()
            .filter(|w| self.component.contains(w))
            .collect();
        for &w in &successors {
            if w == self.start {
                self.out.push(self.path.clone());
                found = true;
            } else if !self.blocked.contains(&w) {
                self.path.push(w);
                if self.circuit(w) {
                    found = true;
                }
                self.path.pop();
            }
        }
        if found {
            self.unblock(v);
        } else {
            for &w in &successors {
                self.block_map.entry(w).or_default().insert(v);
            }
        }
        found
    }

    fn unblock(&mut self, v: usize) {
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if self.blocked.remove(&u) {
                if let Some(waiting) = self.block_map.remove(&u) {
                    stack.extend(waiting);
                }
            }
        }
    }
}

/// Lexicographically least elementary cycle (rotated to its least vertex).
pub fn lexicographically_first_cycle(adj: &BTreeMap<usize, BTreeSet<usize>>) -> Option<Vec<usize>> {
    for &start in adj.keys() {
        if adj[&start].contains(&start) {
            return Some(vec![start]);
        }
        let mut path = vec![start];
        let mut on_path = BTreeSet::from([start]);
        let mut cur = start;
        while let Some(succ) = adj.get(&cur) {
            if cur != start && succ.contains(&start) {
                return Some(path);
            }
            // Smallest successor that can still get back to `start` without
            // revisiting the path.
            let next = succ.iter().copied().find(|&w| {
                w > start
                    && !on_path.contains(&w)
                    && restricted_reach(adj, w, |x| x == start || (x > start && !on_path.contains(&x)), false)
                        .contains(&start)
            });
            match next {
                Some(w) => {
                    path.push(w);
                    on_path.insert(w);
                    cur = w;
                }
                None => break,
            }
        }
    }
    None
}

/// Graphviz rendering: main vertices double-circled, finals shaded, dead
/// vertices dashed.
pub fn to_dot(g: &ReplGraph) -> String {
    let mut out = format!("digraph replaceability_alpha{} {{\n", u8::from(g.alpha));
    for &v in &g.vertices {
        let mut attrs = vec![format!("label=\"v{v}\"")];
        if g.mains.contains(&v) {
            attrs.push("shape=doublecircle".into());
        } else {
            attrs.push("shape=circle".into());
        }
        if g.finals.contains(&v) {
            attrs.push("style=filled".into());
            attrs.push("fillcolor=lightgray".into());
        }
        if g.dead.contains(&v) {
            attrs.push("style=dashed".into());
        }
        let _ = writeln!(out, "  v{v} [{}];", attrs.join(", "));
    }
    for e in &g.edges {
        let _ = writeln!(out, "  v{} -> v{} [label=\"{}\"];", e.from, e.to, e.label());
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d_f1() -> SpecialDecomposition {
        SpecialDecomposition::from_lists(3, &[(&[1], &[3]), (&[2], &[1]), (&[2], &[3])])
    }

    fn d_fc() -> SpecialDecomposition {
        SpecialDecomposition::from_lists(3, &[(&[1], &[2, 3]), (&[2], &[1])])
    }

    fn d_fd() -> SpecialDecomposition {
        SpecialDecomposition::from_lists(3, &[(&[1], &[3]), (&[2], &[1])])
    }

    fn obligatory(from: usize, element: usize, to: usize) -> Edge {
        Edge {
            from,
            to,
            element,
            kind: EdgeKind::Obligatory,
        }
    }

    fn graph_of(d: &SpecialDecomposition, alpha: bool) -> ReplGraph {
        build_graph(d, alpha, &d.missing_elements(alpha)).unwrap()
    }

    fn set(ids: &[usize]) -> BTreeSet<usize> {
        ids.iter().copied().collect()
    }

    #[test]
    fn builds_f1_graph() {
        let g = graph_of(&d_f1(), true);
        assert_eq!(g.vertices, set(&[1, 2, 3]));
        assert_eq!(g.mains, set(&[1, 3]));
        assert_eq!(g.edges, BTreeSet::from([obligatory(1, 1, 2)]));
        assert_eq!(g.finals, set(&[2, 3]));
        assert!(g.dead.is_empty());
        assert_eq!(g.main_assoc, BTreeMap::from([(3, set(&[1, 3]))]));
    }

    #[test]
    fn builds_fc_graph() {
        let g = graph_of(&d_fc(), true);
        assert_eq!(g.vertices, set(&[1, 2]));
        assert_eq!(g.mains, set(&[1]));
        assert_eq!(g.edges, BTreeSet::from([obligatory(1, 1, 2), obligatory(2, 2, 1)]));
        assert!(g.finals.is_empty());
    }

    #[test]
    fn builds_fd_graph_with_dead_vertex() {
        let g = graph_of(&d_fd(), true);
        assert_eq!(g.vertices, set(&[1, 2]));
        assert_eq!(g.mains, set(&[1]));
        assert_eq!(g.edges, BTreeSet::from([obligatory(1, 1, 2)]));
        assert_eq!(g.dead, set(&[2]));
    }

    #[test]
    fn build_errors() {
        let d = d_f1();
        assert_eq!(
            build_graph(&d, true, &ElementSet::empty(3)),
            Err(GraphError::EmptyMissingSet)
        );
        assert_eq!(
            build_graph(&d, true, &ElementSet::from_ids(3, [1])),
            Err(GraphError::NotMissing(1))
        );
    }

    #[test]
    fn possible_edges() {
        // Element 1 is single in pair 1's pos side and sits in two neg sides.
        let d = SpecialDecomposition::from_lists(3, &[(&[1], &[3]), (&[2], &[1]), (&[], &[1, 2])]);
        let g = graph_of(&d, true);
        let kinds: Vec<_> = g.edges.iter().map(|e| (e.from, e.to, e.kind)).collect();
        assert!(kinds.contains(&(1, 2, EdgeKind::Possible)));
        assert!(kinds.contains(&(1, 3, EdgeKind::Possible)));
        assert_eq!(g.out_edges(1).count(), 2);
        assert_eq!(g.edges.iter().find(|e| e.to == 3).unwrap().label(), "∨c1");
    }

    #[test]
    fn subgraphs() {
        let g = graph_of(&d_f1(), true);
        let g1 = build_subgraph_from(&g, 1).unwrap();
        assert_eq!(g1.vertices, set(&[1, 2]));
        assert_eq!(g1.edges, BTreeSet::from([obligatory(1, 1, 2)]));
        assert_eq!(g1.mains, set(&[1]));
        let g3 = build_subgraph_from(&g, 3).unwrap();
        assert_eq!(g3.vertices, set(&[3]));
        assert!(g3.edges.is_empty());
        assert_eq!(g3.finals, set(&[3]));
        assert_eq!(build_subgraph_from(&g, 2), Err(GraphError::NotAMainVertex(2)));
        let fc = graph_of(&d_fc(), true);
        assert_eq!(build_subgraph_from(&fc, 1).unwrap(), fc);
    }

    #[test]
    fn cycle_examples() {
        assert_eq!(enumerate_cycles(&graph_of(&d_fc(), true)), vec![vec![1, 2]]);
        assert!(enumerate_cycles(&graph_of(&d_f1(), true)).is_empty());
        let adj = BTreeMap::from([(1, set(&[2])), (2, set(&[1, 3])), (3, set(&[]))]);
        assert_eq!(elementary_cycles(&adj), vec![vec![1, 2]]);
        assert_eq!(lexicographically_first_cycle(&adj), Some(vec![1, 2]));
    }

    #[test]
    fn first_cycle_prefers_prefix() {
        // 1→2→1 and 1→2→3→1: the shorter one is a prefix and sorts first.
        let adj = BTreeMap::from([(1, set(&[2])), (2, set(&[1, 3])), (3, set(&[1]))]);
        assert_eq!(elementary_cycles(&adj), vec![vec![1, 2], vec![1, 2, 3]]);
        assert_eq!(lexicographically_first_cycle(&adj), Some(vec![1, 2]));
        // Greedy must skip 2, which cannot return to 1.
        let adj = BTreeMap::from([(1, set(&[2, 3])), (2, set(&[])), (3, set(&[1]))]);
        assert_eq!(lexicographically_first_cycle(&adj), Some(vec![1, 3]));
    }

    #[test]
    fn dot_output() {
        let dot = to_dot(&graph_of(&d_f1(), true));
        assert!(dot.contains("v1 -> v2 [label=\"&c1\"]"));
        assert!(dot.contains("v1 [label=\"v1\", shape=doublecircle]"));
        assert!(dot.contains("fillcolor=lightgray"));
        let fc = to_dot(&graph_of(&d_fc(), true));
        assert!(fc.contains("v1 -> v2 [label=\"&c1\"]"));
        assert!(fc.contains("v2 -> v1 [label=\"&c2\"]"));
        let fd = to_dot(&graph_of(&d_fd(), true));
        assert!(fd.contains("v2 [label=\"v2\", shape=circle, style=dashed]"));
        let mut bare = graph_of(&d_f1(), true);
        bare.edges.clear();
        let nodes_only = to_dot(&bare);
        assert!(!nodes_only.contains("->"));
        assert!(nodes_only.contains("v3 ["));
    }
}
