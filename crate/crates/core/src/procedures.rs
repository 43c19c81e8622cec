//! Removal cascades, cycle cleaning and incompatibility elimination.
//!
//! Both procedures share one cascade engine. A cascade runs against a
//! read-only graph and records what it would remove; the caller commits it
//! only when every missing element keeps at least one main vertex. Rolled-back
//! attempts leave nothing behind.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::decomposition::SpecialDecomposition;
use crate::graph::{enumerate_cycles, first_cycle, Edge, EdgeKind, ReplGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Seed {
    /// Remove this vertex.
    Vertex { vertex: usize },
    /// Remove the bundle of edges `from -> to` under the cleaning rules.
    Edge { from: usize, to: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RemovalReason {
    Seed,
    /// Source of an obligatory edge into a removed vertex.
    ObligatoryEdge {
        to: usize,
        element: usize,
    },
    /// Source of a possible edge whose same-element alternatives are gone.
    LastPossibleEdge {
        to: usize,
        element: usize,
    },
    /// Non-main vertex left without incoming edges.
    ZeroInDegree,
    /// Non-main vertex no longer reachable from a surviving main vertex.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    SeedVertex {
        vertex: usize,
    },
    SeedEdge {
        from: usize,
        to: usize,
        elements: Vec<usize>,
    },
    EdgeRemoved {
        from: usize,
        to: usize,
        element: usize,
        kind: EdgeKind,
    },
    VertexRemoved {
        vertex: usize,
        reason: RemovalReason,
    },
    /// Every main vertex associated with the element is gone.
    MainLost {
        element: usize,
    },
    /// α-domain after swapping every surviving vertex, recorded on commit.
    DomainSnapshot {
        elements: Vec<usize>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct RemovalTrace {
    pub events: Vec<TraceEvent>,
}

impl RemovalTrace {
    pub fn removed_vertices(&self) -> Vec<usize> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::VertexRemoved { vertex, .. } => Some(*vertex),
                _ => None,
            })
            .collect()
    }

    /// Every removed vertex has all its outgoing edges logged as removed
    /// before its own removal event.
    pub fn out_edges_precede_removal(&self, g: &ReplGraph) -> bool {
        let mut removed_edges: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
        for event in &self.events {
            match event {
                TraceEvent::EdgeRemoved { from, to, element, .. } => {
                    removed_edges.insert((*from, *to, *element));
                }
                TraceEvent::VertexRemoved { vertex, .. }
                    if !g
                        .out_edges(*vertex)
                        .all(|e| removed_edges.contains(&(e.from, e.to, e.element))) =>
                {
                    return false;
                }
                _ => {}
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProcedureError {
    #[error("seed {0:?} is not present in the graph")]
    SeedAbsent(Seed),
}

/// What a cascade would remove.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Removal {
    pub vertices: BTreeSet<usize>,
    pub edges: BTreeSet<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CascadeOutcome {
    Ok { removal: Removal, trace: RemovalTrace },
    MainExhausted { element: usize, trace: RemovalTrace },
}

impl CascadeOutcome {
    pub fn trace(&self) -> &RemovalTrace {
        match self {
            CascadeOutcome::Ok { trace, .. } | CascadeOutcome::MainExhausted { trace, .. } => trace,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, CascadeOutcome::Ok { .. })
    }
}

/// Runs the removal rules from `seed` to their fixpoint on a scratch view of
/// `g`. Stops as soon as some missing element loses all its main vertices.
pub fn removal_cascade(g: &ReplGraph, seed: Seed) -> Result<CascadeOutcome, ProcedureError> {
    let mut cascade = Cascade::new(g);
    match seed {
        Seed::Vertex { vertex } => {
            if !g.vertices.contains(&vertex) {
                return Err(ProcedureError::SeedAbsent(seed));
            }
            cascade.trace.push(TraceEvent::SeedVertex { vertex });
            cascade.remove_vertex(vertex, RemovalReason::Seed);
        }
        Seed::Edge { from, to } => {
            let bundle: Vec<Edge> = g.out_edges(from).filter(|e| e.to == to).copied().collect();
            if bundle.is_empty() {
                return Err(ProcedureError::SeedAbsent(seed));
            }
            cascade.trace.push(TraceEvent::SeedEdge {
                from,
                to,
                elements: bundle.iter().map(|e| e.element).collect(),
            });
            let detachable = bundle
                .iter()
                .all(|e| e.kind == EdgeKind::Possible && cascade.has_alternative(from, e.element, to));
            if detachable {
                for e in &bundle {
                    cascade.remove_edge(*e);
                }
                cascade.check_zero_in_degree(to);
            } else {
                cascade.remove_vertex(from, RemovalReason::Seed);
            }
        }
    }
    cascade.run();
    Ok(cascade.finish())
}

struct Cascade<'g> {
    g: &'g ReplGraph,
    incoming: BTreeMap<usize, Vec<Edge>>,
    removed_vertices: BTreeSet<usize>,
    removed_edges: BTreeSet<Edge>,
    queue: VecDeque<usize>,
    trace: Vec<TraceEvent>,
    exhausted: Option<usize>,
}

impl<'g> Cascade<'g> {
    fn new(g: &'g ReplGraph) -> Self {
        let mut incoming: BTreeMap<usize, Vec<Edge>> = BTreeMap::new();
        for e in &g.edges {
            incoming.entry(e.to).or_default().push(*e);
        }
        Cascade {
            g,
            incoming,
            removed_vertices: BTreeSet::new(),
            removed_edges: BTreeSet::new(),
            queue: VecDeque::new(),
            trace: Vec::new(),
            exhausted: None,
        }
    }

    fn edge_alive(&self, e: &Edge) -> bool {
        !self.removed_edges.contains(e)
            && !self.removed_vertices.contains(&e.from)
            && !self.removed_vertices.contains(&e.to)
    }

    /// `v` keeps a live edge for `element` to some vertex other than `except`.
    fn has_alternative(&self, v: usize, element: usize, except: usize) -> bool {
        self.g
            .out_edges(v)
            .any(|e| e.element == element && e.to != except && self.edge_alive(e))
    }

    fn remove_edge(&mut self, e: Edge) {
        if self.removed_edges.insert(e) {
            self.trace.push(TraceEvent::EdgeRemoved {
                from: e.from,
                to: e.to,
                element: e.element,
                kind: e.kind,
            });
        }
    }

    fn remove_vertex(&mut self, v: usize, reason: RemovalReason) {
        if self.exhausted.is_some() || !self.removed_vertices.insert(v) {
            return;
        }
        let outgoing: Vec<Edge> = self
            .g
            .out_edges(v)
            .filter(|e| !self.removed_edges.contains(e))
            .copied()
            .collect();
        for e in &outgoing {
            self.remove_edge(*e);
        }
        self.trace.push(TraceEvent::VertexRemoved { vertex: v, reason });
        self.queue.push_back(v);

        if self.g.mains.contains(&v) {
            for (&element, holders) in &self.g.main_assoc {
                if holders.contains(&v) && holders.iter().all(|h| self.removed_vertices.contains(h)) {
                    self.trace.push(TraceEvent::MainLost { element });
                    self.exhausted = Some(element);
                    return;
                }
            }
        }
        for e in &outgoing {
            self.check_zero_in_degree(e.to);
        }
    }

    fn check_zero_in_degree(&mut self, v: usize) {
        if self.removed_vertices.contains(&v) || self.g.mains.contains(&v) {
            return;
        }
        let has_incoming = self
            .incoming
            .get(&v)
            .is_some_and(|edges| edges.iter().any(|e| self.edge_alive(e)));
        if !has_incoming {
            self.remove_vertex(v, RemovalReason::ZeroInDegree);
        }
    }

    fn run(&mut self) {
        loop {
            while let Some(u) = self.queue.pop_front() {
                if self.exhausted.is_some() {
                    return;
                }
                let incoming: Vec<Edge> = self.incoming.get(&u).cloned().unwrap_or_default();
                for e in incoming {
                    if self.removed_edges.contains(&e) || self.removed_vertices.contains(&e.from) {
                        continue;
                    }
                    self.remove_edge(e);
                    match e.kind {
                        EdgeKind::Obligatory => self.remove_vertex(
                            e.from,
                            RemovalReason::ObligatoryEdge {
                                to: u,
                                element: e.element,
                            },
                        ),
                        EdgeKind::Possible => {
                            if !self.has_alternative(e.from, e.element, u) {
                                self.remove_vertex(
                                    e.from,
                                    RemovalReason::LastPossibleEdge {
                                        to: u,
                                        element: e.element,
                                    },
                                );
                            }
                        }
                    }
                    if self.exhausted.is_some() {
                        return;
                    }
                }
            }
            if self.exhausted.is_some() {
                return;
            }
            self.prune_unreachable();
            if self.queue.is_empty() {
                return;
            }
        }
    }

    fn prune_unreachable(&mut self) {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        let mut stack: Vec<usize> = self
            .g
            .mains
            .iter()
            .copied()
            .filter(|v| !self.removed_vertices.contains(v))
            .collect();
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                for e in self.g.out_edges(v) {
                    if self.edge_alive(e) && !seen.contains(&e.to) {
                        stack.push(e.to);
                    }
                }
            }
        }
        let stranded: Vec<usize> = self
            .g
            .vertices
            .iter()
            .copied()
            .filter(|v| !self.removed_vertices.contains(v) && !seen.contains(v))
            .collect();
        for v in stranded {
            self.remove_vertex(v, RemovalReason::Unreachable);
        }
    }

    fn finish(self) -> CascadeOutcome {
        let trace = RemovalTrace { events: self.trace };
        match self.exhausted {
            Some(element) => CascadeOutcome::MainExhausted { element, trace },
            None => CascadeOutcome::Ok {
                removal: Removal {
                    vertices: self.removed_vertices,
                    edges: self.removed_edges,
                },
                trace,
            },
        }
    }
}

/// `swapped(before) ⊆ swapped(after)` for the α-domain, where `swapped(V)`
/// swaps every pair in `V`.
pub fn check_domain_preservation(
    d: &SpecialDecomposition,
    alpha: bool,
    before: &BTreeSet<usize>,
    after: &BTreeSet<usize>,
) -> bool {
    d.swapped_domain(alpha, before)
        .is_subset(&d.swapped_domain(alpha, after))
}

/// Which cycle or incompatible set is processed next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(tag = "order", rename_all = "snake_case")]
pub enum ProcessingOrder {
    /// Lexicographically first cycle, incompatible set with the least element.
    #[default]
    Canonical,
    /// Uniformly random choice at every step, reproducible from the seed.
    Shuffled { seed: u64 },
}

struct Chooser(Option<ChaCha8Rng>);

impl Chooser {
    fn new(order: ProcessingOrder) -> Self {
        match order {
            ProcessingOrder::Canonical => Chooser(None),
            ProcessingOrder::Shuffled { seed } => Chooser(Some(ChaCha8Rng::seed_from_u64(seed))),
        }
    }

    fn pick(&mut self, len: usize) -> usize {
        match &mut self.0 {
            None => 0,
            Some(rng) => rng.gen_range(0..len),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Attempt {
    pub seed: Seed,
    /// Missing element left without main vertices, if the attempt failed.
    pub exhausted: Option<usize>,
    pub trace: RemovalTrace,
}

/// Domain check of one committed cascade.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommitCheck {
    pub before: Vec<usize>,
    pub after: Vec<usize>,
    pub preserved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    DeadVertex {
        vertex: usize,
        attempt: Attempt,
        commit: Option<CommitCheck>,
    },
    Cycle {
        cycle: Vec<usize>,
        attempts: Vec<Attempt>,
        commit: Option<CommitCheck>,
    },
    Incompatibility {
        set: IncompatibleSet,
        attempts: Vec<Attempt>,
        commit: Option<CommitCheck>,
    },
    /// A lost element held by a single swapped pair.
    StructuralAnomaly { vertex: usize, element: usize },
}

impl Step {
    pub fn commit(&self) -> Option<&CommitCheck> {
        match self {
            Step::DeadVertex { commit, .. } | Step::Cycle { commit, .. } | Step::Incompatibility { commit, .. } => {
                commit.as_ref()
            }
            Step::StructuralAnomaly { .. } => None,
        }
    }
}

/// Ordered record of every cleaning and compatibility step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ProcedureLog {
    pub steps: Vec<Step>,
}

impl ProcedureLog {
    pub fn commits(&self) -> impl Iterator<Item = &CommitCheck> + '_ {
        self.steps.iter().filter_map(Step::commit)
    }

    pub fn all_commits_preserve_domain(&self) -> bool {
        self.commits().all(|c| c.preserved)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    DeadVertex,
    Cleaning,
    Compatibility,
}

/// Why a missing-element set is not stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Instability {
    pub stage: Stage,
    /// Missing element whose main vertices were exhausted by the last attempt.
    pub element: Option<usize>,
    /// Set when the failure is a lost element held by a single pair.
    pub structural_anomaly: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CleanOutcome {
    Clean { graph: ReplGraph, log: ProcedureLog },
    Unstable { evidence: Instability, log: ProcedureLog },
}

fn commit(
    d: &SpecialDecomposition,
    g: &mut ReplGraph,
    outcome: &CascadeOutcome,
    log_trace: &mut RemovalTrace,
) -> CommitCheck {
    let CascadeOutcome::Ok { removal, .. } = outcome else {
        unreachable!("only successful cascades are committed")
    };
    let before = g.vertices.clone();
    g.remove_vertices(&removal.vertices);
    g.remove_edges(&removal.edges);
    let after_domain = d.swapped_domain(g.alpha, &g.vertices);
    log_trace.events.push(TraceEvent::DomainSnapshot {
        elements: after_domain.to_vec(),
    });
    CommitCheck {
        before: d.swapped_domain(g.alpha, &before).to_vec(),
        after: after_domain.to_vec(),
        preserved: check_domain_preservation(d, g.alpha, &before, &g.vertices),
    }
}

fn attempt(g: &ReplGraph, seed: Seed) -> (CascadeOutcome, Attempt) {
    let outcome = removal_cascade(g, seed).expect("seeds are taken from the current graph");
    let exhausted = match &outcome {
        CascadeOutcome::MainExhausted { element, .. } => Some(*element),
        CascadeOutcome::Ok { .. } => None,
    };
    let record = Attempt {
        seed,
        exhausted,
        trace: outcome.trace().clone(),
    };
    (outcome, record)
}

/// Removes every dead vertex, then eliminates cycles until none remain.
pub fn clean_graph(d: &SpecialDecomposition, g: &ReplGraph, order: ProcessingOrder) -> CleanOutcome {
    let mut g = g.clone();
    let mut log = ProcedureLog::default();
    let mut chooser = Chooser::new(order);

    let dead: Vec<usize> = g.dead.iter().copied().collect();
    for vertex in dead {
        if !g.vertices.contains(&vertex) {
            continue;
        }
        let (outcome, mut record) = attempt(&g, Seed::Vertex { vertex });
        if let Some(element) = record.exhausted {
            log.steps.push(Step::DeadVertex {
                vertex,
                attempt: record,
                commit: None,
            });
            return CleanOutcome::Unstable {
                evidence: Instability {
                    stage: Stage::DeadVertex,
                    element: Some(element),
                    structural_anomaly: false,
                },
                log,
            };
        }
        let check = commit(d, &mut g, &outcome, &mut record.trace);
        log.steps.push(Step::DeadVertex {
            vertex,
            attempt: record,
            commit: Some(check),
        });
    }

    loop {
        let cycle = match order {
            ProcessingOrder::Canonical => first_cycle(&g),
            ProcessingOrder::Shuffled { .. } => {
                let mut cycles = enumerate_cycles(&g);
                if cycles.is_empty() {
                    None
                } else {
                    let idx = chooser.pick(cycles.len());
                    Some(cycles.swap_remove(idx))
                }
            }
        };
        let Some(cycle) = cycle else {
            return CleanOutcome::Clean { graph: g, log };
        };

        let hops: BTreeSet<(usize, usize)> = cycle
            .iter()
            .zip(cycle.iter().cycle().skip(1))
            .map(|(&a, &b)| (a, b))
            .collect();
        let mut attempts = Vec::new();
        let mut committed = None;
        let mut last_exhausted = None;
        for (from, to) in hops {
            let (outcome, mut record) = attempt(&g, Seed::Edge { from, to });
            if outcome.is_ok() {
                let check = commit(d, &mut g, &outcome, &mut record.trace);
                attempts.push(record);
                committed = Some(check);
                break;
            }
            last_exhausted = record.exhausted;
            attempts.push(record);
        }
        let failed = committed.is_none();
        log.steps.push(Step::Cycle {
            cycle,
            attempts,
            commit: committed,
        });
        if failed {
            return CleanOutcome::Unstable {
                evidence: Instability {
                    stage: Stage::Cleaning,
                    element: last_exhausted,
                    structural_anomaly: false,
                },
                log,
            };
        }
    }
}

/// Pairs that all hold `element` in their α-component, no other pair does,
/// and swapping every vertex of the graph pushes `element` out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IncompatibleSet {
    pub vertices: BTreeSet<usize>,
    pub element: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IncompatibilityScan {
    /// Ordered by element.
    pub sets: Vec<IncompatibleSet>,
    /// Lost elements held by exactly one pair, as `(vertex, element)`.
    pub anomalies: Vec<(usize, usize)>,
}

/// Elements of the α-domain lost when every vertex of `g` is swapped.
pub fn find_incompatible_sets(d: &SpecialDecomposition, g: &ReplGraph) -> IncompatibilityScan {
    let alpha = g.alpha;
    let lost = d.domain(alpha).difference(&d.swapped_domain(alpha, &g.vertices));
    let mut scan = IncompatibilityScan::default();
    for element in lost.iter() {
        let holders = d.element_locations(alpha, element);
        if holders.len() == 1 {
            scan.anomalies.push((*holders.first().expect("one holder"), element));
        } else {
            scan.sets.push(IncompatibleSet {
                vertices: holders,
                element,
            });
        }
    }
    scan
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// Vertex set left after all procedures (the final graph's vertices).
    pub surviving: BTreeSet<usize>,
    pub graph: ReplGraph,
    pub evidence: Option<Instability>,
    pub log: ProcedureLog,
}

/// Eliminates incompatible sets one at a time on a clean graph.
pub fn eliminate_incompatibilities(
    d: &SpecialDecomposition,
    g: &ReplGraph,
    order: ProcessingOrder,
) -> StabilityVerdict {
    let mut g = g.clone();
    let mut log = ProcedureLog::default();
    // Separate stream from the cleaning chooser so the two orders vary
    // independently.
    let mut chooser = Chooser::new(match order {
        ProcessingOrder::Shuffled { seed } => ProcessingOrder::Shuffled {
            seed: seed ^ 0x9e37_79b9_7f4a_7c15,
        },
        other => other,
    });

    loop {
        let mut scan = find_incompatible_sets(d, &g);
        if let Some(&(vertex, element)) = scan.anomalies.first() {
            log.steps.push(Step::StructuralAnomaly { vertex, element });
            return StabilityVerdict {
                stable: false,
                surviving: g.vertices.clone(),
                graph: g,
                evidence: Some(Instability {
                    stage: Stage::Compatibility,
                    element: Some(element),
                    structural_anomaly: true,
                }),
                log,
            };
        }
        if scan.sets.is_empty() {
            return StabilityVerdict {
                stable: true,
                surviving: g.vertices.clone(),
                graph: g,
                evidence: None,
                log,
            };
        }
        let idx = chooser.pick(scan.sets.len());
        let set = scan.sets.swap_remove(idx);

        let mut attempts = Vec::new();
        let mut committed = None;
        let mut last_exhausted = None;
        for &vertex in &set.vertices {
            let (outcome, mut record) = attempt(&g, Seed::Vertex { vertex });
            if outcome.is_ok() {
                let check = commit(d, &mut g, &outcome, &mut record.trace);
                attempts.push(record);
                committed = Some(check);
                break;
            }
            last_exhausted = record.exhausted;
            attempts.push(record);
        }
        let failed = committed.is_none();
        log.steps.push(Step::Incompatibility {
            set,
            attempts,
            commit: committed,
        });
        if failed {
            return StabilityVerdict {
                stable: false,
                surviving: g.vertices.clone(),
                graph: g,
                evidence: Some(Instability {
                    stage: Stage::Compatibility,
                    element: last_exhausted,
                    structural_anomaly: false,
                }),
                log,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn d_f1() -> SpecialDecomposition {
        SpecialDecomposition::from_lists(3, &[(&[1], &[3]), (&[2], &[1]), (&[2], &[3])])
    }

    fn d_fc() -> SpecialDecomposition {
        SpecialDecomposition::from_lists(3, &[(&[1], &[2, 3]), (&[2], &[1])])
    }

    fn d_fd() -> SpecialDecomposition {
        SpecialDecomposition::from_lists(3, &[(&[1], &[3]), (&[2], &[1])])
    }

    fn graph_of(d: &SpecialDecomposition, alpha: bool) -> ReplGraph {
        build_graph(d, alpha, &d.missing_elements(alpha)).unwrap()
    }

    fn set(ids: &[usize]) -> BTreeSet<usize> {
        ids.iter().copied().collect()
    }

    fn removed(outcome: &CascadeOutcome) -> Vec<usize> {
        outcome.trace().removed_vertices()
    }

    #[test]
    fn dead_seed_exhausts_fd() {
        let g = graph_of(&d_fd(), true);
        let outcome = removal_cascade(&g, Seed::Vertex { vertex: 2 }).unwrap();
        assert!(matches!(outcome, CascadeOutcome::MainExhausted { element: 3, .. }));
        assert_eq!(removed(&outcome), vec![2, 1]);
        assert!(outcome.trace().events.contains(&TraceEvent::VertexRemoved {
            vertex: 1,
            reason: RemovalReason::ObligatoryEdge { to: 2, element: 1 },
        }));
        assert_eq!(
            outcome.trace().events.last(),
            Some(&TraceEvent::MainLost { element: 3 })
        );
    }

    #[test]
    fn f1_cascades() {
        let g = graph_of(&d_f1(), true);
        let from_v2 = removal_cascade(&g, Seed::Vertex { vertex: 2 }).unwrap();
        assert!(from_v2.is_ok());
        assert_eq!(removed(&from_v2), vec![2, 1]);
        let from_v3 = removal_cascade(&g, Seed::Vertex { vertex: 3 }).unwrap();
        assert!(from_v3.is_ok());
        assert_eq!(removed(&from_v3), vec![3]);
        assert!(from_v2.trace().out_edges_precede_removal(&g));
    }

    #[test]
    fn absent_seed() {
        let g = graph_of(&d_f1(), true);
        assert!(removal_cascade(&g, Seed::Vertex { vertex: 9 }).is_err());
        assert!(removal_cascade(&g, Seed::Edge { from: 2, to: 1 }).is_err());
    }

    #[test]
    fn possible_edge_with_alternative_is_detached() {
        // Pair 1's single element 1 can be restored by pair 2 or pair 3.
        let d = SpecialDecomposition::from_lists(3, &[(&[1], &[3]), (&[2], &[1]), (&[], &[1, 2])]);
        let g = graph_of(&d, true);
        let outcome = removal_cascade(&g, Seed::Edge { from: 1, to: 3 }).unwrap();
        let CascadeOutcome::Ok { removal, .. } = &outcome else {
            panic!("{outcome:?}")
        };
        // Vertex 3 keeps its in-edge from 2, so only the edge goes.
        assert!(removal.vertices.is_empty());
        assert_eq!(removal.edges.len(), 1);
        assert!(removal.edges.iter().all(|e| e.from == 1 && e.to == 3));
    }

    #[test]
    fn clean_examples() {
        let f1 = graph_of(&d_f1(), true);
        match clean_graph(&d_f1(), &f1, ProcessingOrder::Canonical) {
            CleanOutcome::Clean { graph, log } => {
                assert_eq!(graph, f1);
                assert!(log.steps.is_empty());
            }
            other => panic!("{other:?}"),
        }

        let fc = graph_of(&d_fc(), true);
        match clean_graph(&d_fc(), &fc, ProcessingOrder::Canonical) {
            CleanOutcome::Unstable { evidence, log } => {
                assert_eq!(evidence.stage, Stage::Cleaning);
                assert_eq!(evidence.element, Some(3));
                let Step::Cycle {
                    cycle,
                    attempts,
                    commit,
                } = &log.steps[0]
                else {
                    panic!()
                };
                assert_eq!(cycle, &vec![1, 2]);
                assert_eq!(attempts.len(), 2);
                assert!(attempts.iter().all(|a| a.exhausted == Some(3)));
                assert!(commit.is_none());
            }
            other => panic!("{other:?}"),
        }

        let fd = graph_of(&d_fd(), true);
        match clean_graph(&d_fd(), &fd, ProcessingOrder::Canonical) {
            CleanOutcome::Unstable { evidence, .. } => assert_eq!(evidence.stage, Stage::DeadVertex),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn incompatible_sets() {
        let d = d_f1();
        let g = graph_of(&d, true);
        let scan = find_incompatible_sets(&d, &g);
        assert_eq!(
            scan.sets,
            vec![IncompatibleSet {
                vertices: set(&[2, 3]),
                element: 2
            }]
        );
        assert!(scan.anomalies.is_empty());

        let mut only_v3 = g.clone();
        only_v3.remove_vertices(&set(&[1, 2]));
        assert_eq!(find_incompatible_sets(&d, &only_v3), IncompatibilityScan::default());
    }

    #[test]
    fn eliminate_f1() {
        let d = d_f1();
        let g = graph_of(&d, true);
        let verdict = eliminate_incompatibilities(&d, &g, ProcessingOrder::Canonical);
        assert!(verdict.stable);
        assert_eq!(verdict.surviving, set(&[3]));
        assert!(verdict.log.all_commits_preserve_domain());
    }

    #[test]
    fn eliminate_without_incompatibilities() {
        let d = d_f1();
        let mut g = graph_of(&d, true);
        g.remove_vertices(&set(&[1, 2]));
        let verdict = eliminate_incompatibilities(&d, &g, ProcessingOrder::Canonical);
        assert!(verdict.stable);
        assert_eq!(verdict.surviving, set(&[3]));
    }

    #[test]
    fn eliminate_fd_after_dead_prepass_is_unstable() {
        // Apply the dead-vertex rule by hand and compatibility still fails.
        let d = d_fd();
        let g = graph_of(&d, true);
        let verdict = eliminate_incompatibilities(&d, &g, ProcessingOrder::Canonical);
        // Swapping {1, 2} loses element 2 (held only by pair 2): the
        // single-holder case is reported as a structural anomaly.
        assert!(!verdict.stable);
        assert!(verdict.evidence.unwrap().structural_anomaly);
    }

    #[test]
    fn domain_preservation_examples() {
        let d = d_f1();
        assert!(check_domain_preservation(&d, true, &set(&[1, 2, 3]), &set(&[3])));
        assert!(check_domain_preservation(&d, true, &set(&[1, 2]), &set(&[1, 2])));
        assert!(check_domain_preservation(&d, true, &set(&[1, 2, 3]), &set(&[1, 2])));
    }

    #[test]
    fn dead_vertex_commit_can_shrink_the_swapped_domain() {
        // Pair 3 alone brings c1 back once pairs 1 and 2 are swapped; removing
        // the dead vertex v3 therefore drops c1.
        let d = SpecialDecomposition::from_lists(4, &[(&[1], &[2]), (&[1], &[2]), (&[3, 4], &[1, 2])]);
        let g = graph_of(&d, true);
        assert_eq!(g.dead, set(&[3]));
        let CleanOutcome::Clean { log, .. } = clean_graph(&d, &g, ProcessingOrder::Canonical) else {
            panic!()
        };
        let commit = log.steps[0].commit().unwrap();
        assert_eq!(commit.before, vec![1, 2]);
        assert_eq!(commit.after, vec![2, 3, 4]);
        assert!(!commit.preserved);
    }

    #[test]
    fn incompatibility_order_changes_the_verdict() {
        let d = SpecialDecomposition::from_lists(
            10,
            &[
                (&[4, 10], &[3, 6, 7]),
                (&[2, 9], &[3, 10]),
                (&[2, 4, 8, 9], &[6, 10]),
                (&[2], &[1, 5, 6, 8]),
            ],
        );
        let g = graph_of(&d, true);
        let CleanOutcome::Clean { graph, .. } = clean_graph(&d, &g, ProcessingOrder::Canonical) else {
            panic!()
        };
        let canonical = eliminate_incompatibilities(&d, &graph, ProcessingOrder::Canonical);
        assert!(!canonical.stable);
        let shuffled = eliminate_incompatibilities(&d, &graph, ProcessingOrder::Shuffled { seed: 16028 });
        assert!(shuffled.stable);
        assert_eq!(shuffled.surviving, set(&[1, 2, 4]));
    }
}
