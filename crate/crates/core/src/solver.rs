//! End-to-end decision pipeline and the proportional-form transformation.
//!
//! For each α (1 first, then 0) the pipeline looks for an M^α-covering: the
//! missing elements `S \ M^α` seed a replaceability graph, which is cleaned and
//! then made compatible. Surviving vertices are the pairs to swap. Every
//! satisfiable verdict is re-checked by evaluation before it is returned.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::cnf::{preprocess, Assignment, CnfFormula};
use crate::decomposition::{CoveringSelection, SpecialDecomposition};
use crate::graph::{build_graph, ReplGraph};
use crate::oracle::{brute_force_sat, DEFAULT_ORACLE_CAP};
use crate::procedures::{
    clean_graph, eliminate_incompatibilities, CleanOutcome, Instability, ProcedureLog, ProcessingOrder,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// α = 1, then α = 0.
    #[default]
    Both,
    Only(bool),
}

impl AlphaMode {
    pub fn alphas(self) -> Vec<bool> {
        match self {
            AlphaMode::Both => vec![true, false],
            AlphaMode::Only(a) => vec![a],
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolverConfig {
    pub alpha: AlphaMode,
    pub order: ProcessingOrder,
}

/// Result of the procedures for one α.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AlphaStatus {
    /// `S \ M^α` is empty: the α-components already cover.
    ImmediateCovering,
    Stable {
        surviving: BTreeSet<usize>,
    },
    Unstable {
        evidence: Instability,
    },
    /// Procedures reported stable but the selection failed verification.
    VerificationFailed {
        surviving: BTreeSet<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlphaAttempt {
    pub alpha: bool,
    pub missing: Vec<usize>,
    pub status: AlphaStatus,
    /// Vertices of the raw replaceability graph.
    pub graph_vertices: Vec<usize>,
    pub log: ProcedureLog,
}

impl AlphaAttempt {
    pub fn is_stable(&self) -> bool {
        matches!(self.status, AlphaStatus::ImmediateCovering | AlphaStatus::Stable { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerdictKind {
    Sat {
        /// Over the original variables; variables without occurrences are 1.
        assignment: Assignment,
        /// Over the decomposition of the preprocessed formula.
        selection: CoveringSelection,
        alpha: bool,
    },
    Unsat {
        /// Set when the formula holds an empty clause.
        empty_clause: bool,
    },
    /// A stable outcome failed verification.
    Anomaly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub kind: VerdictKind,
    pub attempts: Vec<AlphaAttempt>,
    /// Original indices of variables removed by preprocessing.
    pub free_vars: Vec<u32>,
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self.kind, VerdictKind::Sat { .. })
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self.kind, VerdictKind::Unsat { .. })
    }

    pub fn is_anomaly(&self) -> bool {
        matches!(self.kind, VerdictKind::Anomaly)
    }

    pub fn assignment(&self) -> Option<&Assignment> {
        match &self.kind {
            VerdictKind::Sat { assignment, .. } => Some(assignment),
            _ => None,
        }
    }

    pub fn attempt(&self, alpha: bool) -> Option<&AlphaAttempt> {
        self.attempts.iter().find(|a| a.alpha == alpha)
    }

    /// Every committed cascade across all attempts kept the swapped domain.
    pub fn all_commits_preserve_domain(&self) -> bool {
        self.attempts.iter().all(|a| a.log.all_commits_preserve_domain())
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            VerdictKind::Sat { .. } => "SATISFIABLE",
            VerdictKind::Unsat { .. } => "UNSATISFIABLE",
            VerdictKind::Anomaly => "ANOMALY",
        }
    }
}

/// `β_i = 1 − α` for surviving pairs, `α` otherwise.
pub fn extract_assignment(
    alpha: bool,
    n: usize,
    surviving: &BTreeSet<usize>,
    graph_vertices: &BTreeSet<usize>,
) -> CoveringSelection {
    debug_assert!(surviving.is_subset(graph_vertices));
    CoveringSelection(
        (1..=n)
            .map(|i| if surviving.contains(&i) { !alpha } else { alpha })
            .collect(),
    )
}

/// Runs the cleaning and compatibility procedures for one α.
pub fn run_alpha(d: &SpecialDecomposition, alpha: bool, order: ProcessingOrder) -> (AlphaAttempt, Option<ReplGraph>) {
    let missing = d.missing_elements(alpha);
    let mut attempt = AlphaAttempt {
        alpha,
        missing: missing.to_vec(),
        status: AlphaStatus::ImmediateCovering,
        graph_vertices: Vec::new(),
        log: ProcedureLog::default(),
    };
    if missing.is_empty() {
        return (attempt, None);
    }
    let graph = build_graph(d, alpha, &missing).expect("missing set is nonempty and outside the domain");
    attempt.graph_vertices = graph.vertices.iter().copied().collect();

    let clean = match clean_graph(d, &graph, order) {
        CleanOutcome::Clean { graph, log } => {
            attempt.log = log;
            graph
        }
        CleanOutcome::Unstable { evidence, log } => {
            attempt.log = log;
            attempt.status = AlphaStatus::Unstable { evidence };
            return (attempt, None);
        }
    };
    let verdict = eliminate_incompatibilities(d, &clean, order);
    attempt.log.steps.extend(verdict.log.steps);
    attempt.status = if verdict.stable {
        AlphaStatus::Stable {
            surviving: verdict.surviving,
        }
    } else {
        AlphaStatus::Unstable {
            evidence: verdict.evidence.expect("unstable verdicts carry evidence"),
        }
    };
    (attempt, Some(verdict.graph))
}

pub fn decide(f: &CnfFormula) -> Verdict {
    decide_with(f, SolverConfig::default())
}

pub fn decide_with(f: &CnfFormula, config: SolverConfig) -> Verdict {
    let pre = preprocess(f);
    if f.has_empty_clause() {
        return Verdict {
            kind: VerdictKind::Unsat { empty_clause: true },
            attempts: Vec::new(),
            free_vars: pre.removed,
        };
    }
    let d = SpecialDecomposition::from_cnf(&pre.formula).expect("preprocessed formula has no unused variables");
    let n = d.len();

    let mut attempts = Vec::new();
    let mut anomaly = false;
    for alpha in config.alpha.alphas() {
        let (mut attempt, _) = run_alpha(&d, alpha, config.order);
        let surviving = match &attempt.status {
            AlphaStatus::ImmediateCovering => BTreeSet::new(),
            AlphaStatus::Stable { surviving } => surviving.clone(),
            _ => {
                attempts.push(attempt);
                continue;
            }
        };
        let graph_vertices: BTreeSet<usize> = attempt.graph_vertices.iter().copied().collect();
        let selection = extract_assignment(alpha, n, &surviving, &graph_vertices);
        let compact = Assignment::new(selection.0.clone());
        let covers = d.is_special_covering(&selection).unwrap_or(false);
        let satisfies = pre.formula.evaluate(&compact).unwrap_or(false);
        if covers && satisfies {
            attempts.push(attempt);
            return Verdict {
                kind: VerdictKind::Sat {
                    assignment: pre.lift(&compact),
                    selection,
                    alpha,
                },
                attempts,
                free_vars: pre.removed,
            };
        }
        anomaly = true;
        attempt.status = AlphaStatus::VerificationFailed { surviving };
        attempts.push(attempt);
    }
    Verdict {
        kind: if anomaly {
            VerdictKind::Anomaly
        } else {
            VerdictKind::Unsat { empty_clause: false }
        },
        attempts,
        free_vars: pre.removed,
    }
}

/// Sat verdicts must satisfy the formula; other verdicts pass vacuously.
pub fn verify_verdict(f: &CnfFormula, v: &Verdict) -> bool {
    match &v.kind {
        VerdictKind::Sat {
            assignment, selection, ..
        } => {
            if f.evaluate(assignment) != Ok(true) {
                return false;
            }
            let pre = preprocess(f);
            match SpecialDecomposition::from_cnf(&pre.formula) {
                Ok(d) => d.is_special_covering(selection).unwrap_or(false),
                Err(_) => false,
            }
        }
        VerdictKind::Unsat { .. } | VerdictKind::Anomaly => true,
    }
}

/// Where `to_proportional` gets its satisfying assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WitnessSource {
    #[default]
    Pipeline,
    /// Brute force, bounded by the given variable cap.
    Oracle { cap: u32 },
}

impl WitnessSource {
    pub fn oracle() -> Self {
        WitnessSource::Oracle {
            cap: DEFAULT_ORACLE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProportionalResult {
    AlreadyProportional,
    Transformed {
        inverted: BTreeSet<u32>,
        formula: CnfFormula,
    },
    NotTransformable {
        reason: String,
    },
}

impl ProportionalResult {
    pub fn is_transformable(&self) -> bool {
        !matches!(self, ProportionalResult::NotTransformable { .. })
    }
}

/// Inverts the variables a satisfying assignment sets to 0, so that the
/// all-ones assignment satisfies the result and every clause holds a positive
/// literal.
pub fn to_proportional(f: &CnfFormula, source: WitnessSource) -> ProportionalResult {
    if f.is_proportional() {
        return ProportionalResult::AlreadyProportional;
    }
    let witness = match source {
        WitnessSource::Pipeline => {
            let verdict = decide(f);
            match verdict.kind {
                VerdictKind::Sat { assignment, .. } => Some(assignment),
                _ => {
                    return ProportionalResult::NotTransformable {
                        reason: format!("decision pipeline returned {}", verdict.label()),
                    }
                }
            }
        }
        WitnessSource::Oracle { cap } => match brute_force_sat(f, cap) {
            Ok(v) => v.witness,
            Err(e) => return ProportionalResult::NotTransformable { reason: e.to_string() },
        },
    };
    let Some(sigma) = witness else {
        return ProportionalResult::NotTransformable {
            reason: "formula is unsatisfiable".into(),
        };
    };
    let inverted: BTreeSet<u32> = sigma
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| !v)
        .map(|(i, _)| i as u32 + 1)
        .collect();
    let formula = f.invert_literals(&inverted).expect("indices come from the assignment");
    debug_assert!(formula.is_proportional());
    ProportionalResult::Transformed { inverted, formula }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;
    use crate::procedures::Stage;

    const F1: &str = "p cnf 3 3\n1 -2 0\n2 3 0\n-1 -3 0\n";
    const FD: &str = "p cnf 2 3\n1 -2 0\n2 0\n-1 0\n";
    const FC: &str = "p cnf 2 3\n1 -2 0\n-1 2 0\n-1 0\n";

    fn set(ids: &[usize]) -> BTreeSet<usize> {
        ids.iter().copied().collect()
    }

    #[test]
    fn decides_f1() {
        let f = parse_dimacs(F1).unwrap();
        let v = decide(&f);
        match &v.kind {
            VerdictKind::Sat {
                assignment,
                selection,
                alpha,
            } => {
                assert_eq!(assignment.to_bits(), "110");
                assert_eq!(selection.to_bits(), "110");
                assert!(*alpha);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(v.attempts.len(), 1);
        assert_eq!(v.attempts[0].status, AlphaStatus::Stable { surviving: set(&[3]) });
        assert!(verify_verdict(&f, &v));
    }

    #[test]
    fn decides_fd() {
        let f = parse_dimacs(FD).unwrap();
        let v = decide(&f);
        assert!(v.is_unsat());
        assert_eq!(v.attempts.len(), 2);
        for a in &v.attempts {
            assert!(matches!(a.status, AlphaStatus::Unstable { .. }));
        }
        assert!(verify_verdict(&f, &v));
    }

    #[test]
    fn decides_fc_at_alpha_zero() {
        let f = parse_dimacs(FC).unwrap();
        let v = decide(&f);
        match &v.kind {
            VerdictKind::Sat { assignment, alpha, .. } => {
                assert_eq!(assignment.to_bits(), "00");
                assert!(!*alpha);
            }
            other => panic!("{other:?}"),
        }
        let first = v.attempt(true).unwrap();
        assert!(matches!(
            &first.status,
            AlphaStatus::Unstable { evidence } if evidence.stage == Stage::Cleaning
        ));
        assert_eq!(v.attempt(false).unwrap().status, AlphaStatus::ImmediateCovering);
    }

    #[test]
    fn empty_clause_short_circuits() {
        let f = parse_dimacs("p cnf 1 2\n1 0\n0\n").unwrap();
        let v = decide(&f);
        assert_eq!(v.kind, VerdictKind::Unsat { empty_clause: true });
    }

    #[test]
    fn free_variables_are_set_to_one() {
        let f = parse_dimacs("p cnf 4 2\n-2 0\n-4 0\n").unwrap();
        let v = decide(&f);
        assert_eq!(v.assignment().unwrap().to_bits(), "1010");
        assert_eq!(v.free_vars, vec![1, 3]);
        assert!(verify_verdict(&f, &v));
    }

    #[test]
    fn single_alpha_mode() {
        let f = parse_dimacs(FC).unwrap();
        let v = decide_with(
            &f,
            SolverConfig {
                alpha: AlphaMode::Only(true),
                ..Default::default()
            },
        );
        assert!(v.is_unsat());
        assert_eq!(v.attempts.len(), 1);
    }

    #[test]
    fn extract_examples() {
        assert_eq!(
            extract_assignment(true, 3, &set(&[3]), &set(&[1, 2, 3])).to_bits(),
            "110"
        );
        assert_eq!(extract_assignment(true, 3, &set(&[]), &set(&[])).to_bits(), "111");
        assert_eq!(extract_assignment(false, 2, &set(&[1]), &set(&[1])).to_bits(), "10");
    }

    #[test]
    fn verify_examples() {
        let f = parse_dimacs(F1).unwrap();
        let mut v = decide(&f);
        assert!(verify_verdict(&f, &v));
        if let VerdictKind::Sat {
            assignment, selection, ..
        } = &mut v.kind
        {
            *assignment = Assignment::from_bits("111").unwrap();
            *selection = CoveringSelection::from_bits("111").unwrap();
        }
        assert!(!verify_verdict(&f, &v));
    }

    #[test]
    fn proportional_examples() {
        let f1 = parse_dimacs(F1).unwrap();
        match to_proportional(&f1, WitnessSource::oracle()) {
            ProportionalResult::Transformed { inverted, formula } => {
                assert_eq!(inverted, BTreeSet::from([1, 2]));
                assert_eq!(
                    formula,
                    CnfFormula::from_ints(3, &[&[-1, 2], &[-2, 3], &[1, -3]]).unwrap()
                );
                assert!(formula.is_proportional());
            }
            other => panic!("{other:?}"),
        }
        match to_proportional(&f1, WitnessSource::Pipeline) {
            ProportionalResult::Transformed { inverted, formula } => {
                assert_eq!(inverted, BTreeSet::from([3]));
                assert!(formula.is_proportional());
            }
            other => panic!("{other:?}"),
        }
        let already = CnfFormula::from_ints(2, &[&[1, 2], &[2, -1]]).unwrap();
        assert_eq!(
            to_proportional(&already, WitnessSource::Pipeline),
            ProportionalResult::AlreadyProportional
        );
        let fd = parse_dimacs(FD).unwrap();
        assert!(!to_proportional(&fd, WitnessSource::oracle()).is_transformable());
        assert!(!to_proportional(&fd, WitnessSource::Pipeline).is_transformable());
    }
}
