//! Ground truth by exhaustive search, seeded random instances, and the
//! differential harness that compares the pipeline against it.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cnf::{preprocess, write_dimacs, Assignment, Clause, CnfFormula, Literal};
use crate::decomposition::{CoveringSelection, SpecialDecomposition};
use crate::solver::{decide_with, AlphaAttempt, AlphaStatus, SolverConfig, Verdict, VerdictKind};

pub const DEFAULT_ORACLE_CAP: u32 = 24;

/// Largest cap the bitmask scans support.
pub const MAX_ORACLE_CAP: u32 = 63;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{found} variables exceed the oracle cap of {cap}")]
    TooManyVariables { found: u32, cap: u32 },
    #[error("{found} pairs exceed the oracle cap of {cap}")]
    TooManyPairs { found: usize, cap: u32 },
    #[error("invalid generator bounds: {0}")]
    InvalidBounds(String),
    #[error("seed {seed}: satisfiability ({sat}) disagrees with covering existence ({covering})")]
    CoveringMismatch { seed: u64, sat: bool, covering: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleVerdict<W> {
    pub satisfiable: bool,
    /// First witness in binary counting order.
    pub witness: Option<W>,
}

/// Bits of counter `k` as a length-`n` vector, first position most significant.
fn counter_bits(k: u64, n: u32) -> Vec<bool> {
    (1..=n).map(|i| (k >> (n - i)) & 1 == 1).collect()
}

/// Scans assignments in binary counting order, all-zeros first, with `x_1`
/// as the most significant bit.
pub fn brute_force_sat(f: &CnfFormula, cap: u32) -> Result<OracleVerdict<Assignment>, OracleError> {
    let n = f.num_vars();
    let cap = cap.min(MAX_ORACLE_CAP);
    if n > cap {
        return Err(OracleError::TooManyVariables { found: n, cap });
    }
    let masks: Vec<(u64, u64)> = f
        .clauses()
        .iter()
        .map(|c| {
            c.literals().iter().fold((0u64, 0u64), |(pos, neg), l| {
                let bit = 1u64 << (n - l.var);
                if l.positive {
                    (pos | bit, neg)
                } else {
                    (pos, neg | bit)
                }
            })
        })
        .collect();
    for k in 0..(1u64 << n) {
        if masks.iter().all(|&(pos, neg)| k & pos != 0 || !k & neg != 0) {
            return Ok(OracleVerdict {
                satisfiable: true,
                witness: Some(Assignment::new(counter_bits(k, n))),
            });
        }
    }
    Ok(OracleVerdict {
        satisfiable: false,
        witness: None,
    })
}

/// Scans selections in binary counting order for a special covering.
pub fn brute_force_covering(
    d: &SpecialDecomposition,
    cap: u32,
) -> Result<OracleVerdict<CoveringSelection>, OracleError> {
    let n = d.len();
    let cap = cap.min(MAX_ORACLE_CAP);
    if n > cap as usize {
        return Err(OracleError::TooManyPairs { found: n, cap });
    }
    let words = d.ground().div_ceil(64);
    let to_words = |ids: Vec<usize>| {
        let mut w = vec![0u64; words];
        for e in ids {
            w[(e - 1) / 64] |= 1 << ((e - 1) % 64);
        }
        w
    };
    let comps: Vec<[Vec<u64>; 2]> = d
        .pairs()
        .iter()
        .map(|p| [to_words(p.neg.to_vec()), to_words(p.pos.to_vec())])
        .collect();
    let mut full = vec![u64::MAX; words];
    if !d.ground().is_multiple_of(64) {
        full[words - 1] = (1u64 << (d.ground() % 64)) - 1;
    }
    let mut acc = vec![0u64; words];
    for k in 0..(1u64 << n) {
        acc.iter_mut().for_each(|w| *w = 0);
        for (i, comp) in comps.iter().enumerate() {
            let bit = (k >> (n - 1 - i)) & 1;
            for (a, c) in acc.iter_mut().zip(&comp[bit as usize]) {
                *a |= c;
            }
        }
        if acc == full {
            return Ok(OracleVerdict {
                satisfiable: true,
                witness: Some(CoveringSelection(counter_bits(k, n as u32))),
            });
        }
    }
    Ok(OracleVerdict {
        satisfiable: false,
        witness: None,
    })
}

/// `m` clauses with lengths uniform in `[min_len, max_len]`, distinct
/// variables per clause (ascending), uniform signs.
pub fn random_cnf(seed: u64, n: u32, m: usize, min_len: usize, max_len: usize) -> Result<CnfFormula, OracleError> {
    if min_len < 1 || min_len > max_len || max_len > n as usize {
        return Err(OracleError::InvalidBounds(format!(
            "need 1 <= min_len ({min_len}) <= max_len ({max_len}) <= n ({n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses = (0..m)
        .map(|_| {
            let len = rng.gen_range(min_len..=max_len);
            let mut vars: Vec<u32> = sample(&mut rng, n as usize, len)
                .into_iter()
                .map(|v| v as u32 + 1)
                .collect();
            vars.sort_unstable();
            let lits: Vec<Literal> = vars.into_iter().map(|v| Literal::new(v, rng.gen_bool(0.5))).collect();
            Clause::new(lits).expect("distinct variables cannot form a tautology")
        })
        .collect();
    Ok(CnfFormula::new(n, clauses).expect("variables drawn from 1..=n"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Agree,
    FalseUnsat,
    FalseSat,
    Anomaly,
}

/// Compact per-α outcome for reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlphaSummary {
    pub alpha: u8,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<crate::procedures::Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element: Option<usize>,
    pub commits: usize,
}

impl AlphaSummary {
    fn of(a: &AlphaAttempt) -> Self {
        let (status, stage, element) = match &a.status {
            AlphaStatus::ImmediateCovering => ("immediate", None, None),
            AlphaStatus::Stable { .. } => ("stable", None, None),
            AlphaStatus::Unstable { evidence } => ("unstable", Some(evidence.stage), evidence.element),
            AlphaStatus::VerificationFailed { .. } => ("verification_failed", None, None),
        };
        AlphaSummary {
            alpha: u8::from(a.alpha),
            status,
            stage,
            element,
            commits: a.log.commits().count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscrepancyReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub num_vars: u32,
    pub num_clauses: usize,
    pub classification: Classification,
    pub oracle_satisfiable: bool,
    pub verdict: &'static str,
    pub per_alpha: Vec<AlphaSummary>,
    /// Oracle says satisfiable yet some attempted α was unstable.
    pub per_alpha_disagreement: bool,
    /// Committed cascades whose swapped domain shrank.
    pub domain_violations: usize,
    /// Full instance and procedure logs, present for non-agreeing cases.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimacs: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<AlphaAttempt>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub agree: usize,
    pub false_unsat: usize,
    pub false_sat: usize,
    pub anomaly: usize,
    pub oracle_sat: usize,
    pub per_alpha_disagreements: usize,
    pub committed_cascades: usize,
    pub domain_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferentialReport {
    pub records: Vec<DiscrepancyReport>,
    pub summary: Summary,
}

impl DifferentialReport {
    /// Assembles a report; the summary is recomputed from the records.
    pub fn new(records: Vec<DiscrepancyReport>) -> Self {
        let mut s = Summary {
            count: records.len(),
            ..Summary::default()
        };
        for r in &records {
            match r.classification {
                Classification::Agree => s.agree += 1,
                Classification::FalseUnsat => s.false_unsat += 1,
                Classification::FalseSat => s.false_sat += 1,
                Classification::Anomaly => s.anomaly += 1,
            }
            s.oracle_sat += usize::from(r.oracle_satisfiable);
            s.per_alpha_disagreements += usize::from(r.per_alpha_disagreement);
            s.committed_cascades += r.per_alpha.iter().map(|a| a.commits).sum::<usize>();
            s.domain_violations += r.domain_violations;
        }
        DifferentialReport { records, summary: s }
    }

    /// One JSON object per instance, then a `{"summary": ...}` trailer.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("report records serialize"));
            out.push('\n');
        }
        let trailer = serde_json::json!({ "summary": self.summary });
        out.push_str(&trailer.to_string());
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone)]
pub struct DifferentialConfig {
    pub seeds: Vec<u64>,
    pub vars: u32,
    pub clauses: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub cap: u32,
    pub solver: SolverConfig,
}

impl DifferentialConfig {
    pub fn new(seeds: impl IntoIterator<Item = u64>, vars: u32, clauses: usize) -> Self {
        DifferentialConfig {
            seeds: seeds.into_iter().collect(),
            vars,
            clauses,
            min_len: 1,
            max_len: 3.min(vars.max(1) as usize),
            cap: DEFAULT_ORACLE_CAP,
            solver: SolverConfig::default(),
        }
    }
}

pub fn classify(oracle_sat: bool, verdict: &Verdict) -> Classification {
    match (&verdict.kind, oracle_sat) {
        (VerdictKind::Anomaly, _) => Classification::Anomaly,
        (VerdictKind::Sat { .. }, true) | (VerdictKind::Unsat { .. }, false) => Classification::Agree,
        (VerdictKind::Unsat { .. }, true) => Classification::FalseUnsat,
        (VerdictKind::Sat { .. }, false) => Classification::FalseSat,
    }
}

/// Checks one instance against the oracle. Fails only if satisfiability and
/// covering existence disagree, which would be an implementation bug.
pub fn check_instance(
    f: &CnfFormula,
    seed: Option<u64>,
    name: Option<String>,
    cap: u32,
    solver: SolverConfig,
) -> Result<DiscrepancyReport, OracleError> {
    let oracle = brute_force_sat(f, cap)?;
    let covering = if f.has_empty_clause() {
        false
    } else {
        let d = SpecialDecomposition::from_cnf(&preprocess(f).formula).expect("preprocessed");
        brute_force_covering(&d, cap)?.satisfiable
    };
    if covering != oracle.satisfiable {
        return Err(OracleError::CoveringMismatch {
            seed: seed.unwrap_or_default(),
            sat: oracle.satisfiable,
            covering,
        });
    }

    let verdict = decide_with(f, solver);
    let classification = classify(oracle.satisfiable, &verdict);
    let per_alpha_disagreement = oracle.satisfiable && verdict.attempts.iter().any(|a| !a.is_stable());
    let domain_violations = verdict
        .attempts
        .iter()
        .flat_map(|a| a.log.commits())
        .filter(|c| !c.preserved)
        .count();
    let full = classification != Classification::Agree || domain_violations > 0;
    Ok(DiscrepancyReport {
        seed,
        name,
        num_vars: f.num_vars(),
        num_clauses: f.num_clauses(),
        classification,
        oracle_satisfiable: oracle.satisfiable,
        verdict: verdict.label(),
        per_alpha: verdict.attempts.iter().map(AlphaSummary::of).collect(),
        per_alpha_disagreement,
        domain_violations,
        dimacs: full.then(|| write_dimacs(f)),
        trace: full.then(|| verdict.attempts.clone()),
    })
}

/// Generates one instance per seed and compares pipeline against oracle.
/// Instances run in parallel; records come back in seed order.
pub fn differential_run(config: &DifferentialConfig) -> Result<DifferentialReport, OracleError> {
    if config.vars > config.cap.min(MAX_ORACLE_CAP) {
        return Err(OracleError::TooManyVariables {
            found: config.vars,
            cap: config.cap,
        });
    }
    random_cnf(0, config.vars, 0, config.min_len, config.max_len)?;
    let records = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let f = random_cnf(seed, config.vars, config.clauses, config.min_len, config.max_len)?;
            check_instance(&f, Some(seed), None, config.cap, config.solver)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DifferentialReport::new(records))
}

/// Differential run over named formulas.
pub fn differential_corpus(
    corpus: &[(String, CnfFormula)],
    cap: u32,
    solver: SolverConfig,
) -> Result<DifferentialReport, OracleError> {
    let records = corpus
        .par_iter()
        .map(|(name, f)| check_instance(f, None, Some(name.clone()), cap, solver))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DifferentialReport::new(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;

    const F1: &str = "p cnf 3 3\n1 -2 0\n2 3 0\n-1 -3 0\n";
    const FD: &str = "p cnf 2 3\n1 -2 0\n2 0\n-1 0\n";
    const FC: &str = "p cnf 2 3\n1 -2 0\n-1 2 0\n-1 0\n";

    #[test]
    fn brute_force_sat_examples() {
        let f1 = parse_dimacs(F1).unwrap();
        let v = brute_force_sat(&f1, DEFAULT_ORACLE_CAP).unwrap();
        assert!(v.satisfiable);
        assert_eq!(v.witness.unwrap().to_bits(), "001");
        assert!(!brute_force_sat(&parse_dimacs(FD).unwrap(), 24).unwrap().satisfiable);
        let unit = parse_dimacs("p cnf 1 1\n1 0\n").unwrap();
        assert_eq!(brute_force_sat(&unit, 24).unwrap().witness.unwrap().to_bits(), "1");
        assert!(matches!(
            brute_force_sat(&f1, 2),
            Err(OracleError::TooManyVariables { found: 3, cap: 2 })
        ));
    }

    #[test]
    fn brute_force_covering_examples() {
        let d = SpecialDecomposition::from_lists(3, &[(&[1], &[3]), (&[2], &[1]), (&[2], &[3])]);
        assert_eq!(brute_force_covering(&d, 24).unwrap().witness.unwrap().to_bits(), "001");
        let fd = SpecialDecomposition::from_lists(3, &[(&[1], &[3]), (&[2], &[1])]);
        assert!(!brute_force_covering(&fd, 24).unwrap().satisfiable);
        let single = SpecialDecomposition::from_lists(1, &[(&[1], &[])]);
        assert_eq!(
            brute_force_covering(&single, 24).unwrap().witness.unwrap().to_bits(),
            "1"
        );
        assert!(matches!(
            brute_force_covering(&d, 1),
            Err(OracleError::TooManyPairs { .. })
        ));
    }

    #[test]
    fn covering_scan_handles_wide_ground_sets() {
        // 70 elements split across two words.
        let all: Vec<usize> = (1..=70).collect();
        let d = SpecialDecomposition::from_lists(70, &[(&all[..40], &all[40..]), (&[], &all[..])]);
        let v = brute_force_covering(&d, 24).unwrap();
        assert_eq!(v.witness.unwrap().to_bits(), "00");
    }

    #[test]
    fn generator_contract() {
        let a = random_cnf(42, 6, 10, 1, 4).unwrap();
        assert_eq!(a, random_cnf(42, 6, 10, 1, 4).unwrap());
        assert_eq!(parse_dimacs(&write_dimacs(&a)).unwrap(), a);
        let small = random_cnf(1, 3, 2, 1, 3).unwrap();
        assert_eq!(small.num_clauses(), 2);
        assert!(small.used_vars().iter().all(|&v| v <= 3));
        for c in a.clauses() {
            assert!((1..=4).contains(&c.len()));
        }
        assert!(matches!(random_cnf(1, 3, 2, 0, 3), Err(OracleError::InvalidBounds(_))));
        assert!(matches!(random_cnf(1, 3, 2, 2, 4), Err(OracleError::InvalidBounds(_))));
    }

    #[test]
    fn corpus_run_on_fixtures() {
        let corpus: Vec<(String, CnfFormula)> = [("F1", F1), ("FD", FD), ("FC", FC)]
            .iter()
            .map(|(n, t)| (n.to_string(), parse_dimacs(t).unwrap()))
            .collect();
        let report = differential_corpus(&corpus, 24, SolverConfig::default()).unwrap();
        assert_eq!(report.summary.agree, 3);
        let fc = &report.records[2];
        assert!(fc.per_alpha_disagreement);
        assert_eq!(fc.per_alpha[0].status, "unstable");
        assert_eq!(fc.per_alpha[1].status, "immediate");
        assert!(report.to_jsonl().ends_with("}}\n"));
    }

    #[test]
    fn run_is_deterministic() {
        let config = DifferentialConfig::new(0..40, 5, 10);
        let a = differential_run(&config).unwrap();
        let b = differential_run(&config).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        let s = &a.summary;
        assert_eq!(s.agree + s.false_unsat + s.anomaly + s.false_sat, 40);
        assert_eq!(s.false_sat, 0);
    }
}
