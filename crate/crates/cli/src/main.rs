use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use covsat::cnf::{parse_dimacs_with, preprocess, write_dimacs, CnfFormula, ParseOptions};
use covsat::decomposition::{CoveringSelection, ElementSet, OrderedPair, SpecialDecomposition};
use covsat::graph::{build_graph, to_dot, ReplGraph};
use covsat::oracle::{
    brute_force_sat, differential_corpus, differential_run, DifferentialConfig, DifferentialReport, DEFAULT_ORACLE_CAP,
};
use covsat::procedures::{clean_graph, eliminate_incompatibilities, CleanOutcome, ProcessingOrder, Step};
use covsat::solver::{
    decide_with, to_proportional, AlphaMode, ProportionalResult, SolverConfig, Verdict, WitnessSource,
};

const EXIT_SAT: u8 = 10;
const EXIT_UNSAT: u8 = 20;
const EXIT_ANOMALY: u8 = 2;
const EXIT_USAGE: u8 = 1;

const CAP_ENV: &str = "COVSAT_ORACLE_CAP";

#[derive(Parser)]
#[command(name = "covsat", version, about = "Covering-based SAT decision procedure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlphaArg {
    #[value(name = "0")]
    Zero,
    #[value(name = "1")]
    One,
    Both,
}

impl AlphaArg {
    fn mode(self) -> AlphaMode {
        match self {
            AlphaArg::Zero => AlphaMode::Only(false),
            AlphaArg::One => AlphaMode::Only(true),
            AlphaArg::Both => AlphaMode::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Bit {
    #[value(name = "0")]
    Zero,
    #[value(name = "1")]
    One,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphStage {
    Raw,
    Clean,
    Final,
}

#[derive(Subcommand)]
enum Command {
    /// Decide satisfiability of a DIMACS CNF file.
    Solve {
        /// Input file, or `-` for stdin.
        path: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        alpha: AlphaArg,
        /// Write the procedure trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the verdict as a JSON document.
        #[arg(long)]
        verdict: Option<PathBuf>,
        /// Cross-check the verdict against brute force.
        #[arg(long)]
        oracle_check: bool,
        #[arg(long)]
        strip_tautologies: bool,
    },
    /// Decide satisfiability by exhaustive search.
    Oracle {
        path: PathBuf,
        /// Variable cap; defaults to $COVSAT_ORACLE_CAP or 24.
        #[arg(long)]
        cap: Option<u32>,
        #[arg(long)]
        strip_tautologies: bool,
    },
    /// Compare the pipeline against brute force on random or given instances.
    Fuzz {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: u64,
        #[arg(long, default_value_t = 6)]
        vars: u32,
        #[arg(long, default_value_t = 12)]
        clauses: usize,
        #[arg(long, default_value_t = 1)]
        min_len: usize,
        #[arg(long, default_value_t = 3)]
        max_len: usize,
        #[arg(long)]
        cap: Option<u32>,
        /// Write the JSON-lines report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Run on these DIMACS files instead of generated instances.
        #[arg(long, num_args = 1..)]
        corpus: Vec<PathBuf>,
    },
    /// Export a replaceability graph in Graphviz format.
    Graph {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "1")]
        alpha: Bit,
        /// Output file; stdout when absent.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "raw")]
        stage: GraphStage,
    },
    /// Invert literals so that every clause holds a positive literal.
    Proportional {
        path: PathBuf,
        /// Take the satisfying assignment from brute force.
        #[arg(long)]
        oracle: bool,
    },
    /// Check whether a selection (one bit per pair) is a covering.
    CheckCover {
        path: PathBuf,
        selection: String,
        /// Read the input as a decomposition instead of DIMACS.
        #[arg(long)]
        decomposition: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Solve {
            path,
            alpha,
            trace,
            verdict,
            oracle_check,
            strip_tautologies,
        } => cmd_solve(
            &path,
            alpha,
            trace.as_deref(),
            verdict.as_deref(),
            oracle_check,
            strip_tautologies,
        ),
        Command::Oracle {
            path,
            cap,
            strip_tautologies,
        } => cmd_oracle(&path, cap, strip_tautologies),
        Command::Fuzz {
            seed,
            count,
            vars,
            clauses,
            min_len,
            max_len,
            cap,
            report,
            corpus,
        } => {
            let cap = oracle_cap(cap)?;
            let result = if corpus.is_empty() {
                let mut config = DifferentialConfig::new(seed..seed.saturating_add(count), vars, clauses);
                config.min_len = min_len;
                config.max_len = max_len;
                config.cap = cap;
                differential_run(&config)?
            } else {
                let named = corpus
                    .iter()
                    .map(|p| Ok((p.display().to_string(), read_cnf(p, false)?)))
                    .collect::<Result<Vec<_>>>()?;
                differential_corpus(&named, cap, SolverConfig::default())?
            };
            cmd_fuzz_output(&result, report.as_deref())
        }
        Command::Graph {
            path,
            alpha,
            dot,
            stage,
        } => cmd_graph(&path, matches!(alpha, Bit::One), dot.as_deref(), stage),
        Command::Proportional { path, oracle } => cmd_proportional(&path, oracle),
        Command::CheckCover {
            path,
            selection,
            decomposition,
        } => cmd_check_cover(&path, &selection, decomposition),
    }
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text)?;
        Ok(text)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn read_cnf(path: &Path, strip_tautologies: bool) -> Result<CnfFormula> {
    let text = read_input(path)?;
    let (f, report) = parse_dimacs_with(&text, ParseOptions { strip_tautologies })
        .with_context(|| format!("parsing {}", path.display()))?;
    for clause in report.stripped_tautologies {
        eprintln!("c dropped tautological clause {clause}");
    }
    Ok(f)
}

fn oracle_cap(flag: Option<u32>) -> Result<u32> {
    if let Some(cap) = flag {
        return Ok(cap);
    }
    match std::env::var(CAP_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{CAP_ENV} must be an integer, got {v:?}")),
        Err(_) => Ok(DEFAULT_ORACLE_CAP),
    }
}

fn cmd_solve(
    path: &Path,
    alpha: AlphaArg,
    trace: Option<&Path>,
    verdict_path: Option<&Path>,
    oracle_check: bool,
    strip_tautologies: bool,
) -> Result<u8> {
    let f = read_cnf(path, strip_tautologies)?;
    let verdict = decide_with(
        &f,
        SolverConfig {
            alpha: alpha.mode(),
            order: ProcessingOrder::Canonical,
        },
    );
    if let Some(p) = trace {
        fs::write(p, trace_jsonl(&verdict)).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = verdict_path {
        let text = serde_json::to_string_pretty(&verdict)? + "\n";
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }

    let mut out = io::stdout().lock();
    writeln!(out, "s {}", verdict.label())?;
    if let Some(assignment) = verdict.assignment() {
        writeln!(out, "v {} 0", assignment.to_dimacs_literals())?;
    }
    if oracle_check {
        let cap = oracle_cap(None)?;
        let oracle = brute_force_sat(&f, cap)?;
        let agrees = verdict.is_anomaly() || oracle.satisfiable == verdict.is_sat();
        writeln!(
            out,
            "c oracle {} {}",
            if oracle.satisfiable {
                "SATISFIABLE"
            } else {
                "UNSATISFIABLE"
            },
            if agrees { "agree" } else { "disagree" }
        )?;
    }
    Ok(if verdict.is_sat() {
        EXIT_SAT
    } else if verdict.is_unsat() {
        EXIT_UNSAT
    } else {
        EXIT_ANOMALY
    })
}

/// One record per cascade event, tagged with its α, step and attempt, plus
/// a status record per α and a closing verdict record.
fn trace_jsonl(verdict: &Verdict) -> String {
    let mut lines: Vec<Value> = Vec::new();
    for a in &verdict.attempts {
        let alpha = u8::from(a.alpha);
        for (step_idx, step) in a.log.steps.iter().enumerate() {
            let (kind, attempts): (&str, Vec<_>) = match step {
                Step::DeadVertex { attempt, .. } => ("dead_vertex", vec![attempt]),
                Step::Cycle { attempts, .. } => ("cycle", attempts.iter().collect()),
                Step::Incompatibility { attempts, .. } => ("incompatibility", attempts.iter().collect()),
                Step::StructuralAnomaly { vertex, element } => {
                    lines.push(json!({
                        "alpha": alpha, "step": step_idx, "step_kind": "structural_anomaly",
                        "event": "structural_anomaly", "vertex": vertex, "element": element,
                    }));
                    continue;
                }
            };
            for (attempt_idx, attempt) in attempts.into_iter().enumerate() {
                for event in &attempt.trace.events {
                    let mut record =
                        json!({ "alpha": alpha, "step": step_idx, "step_kind": kind, "attempt": attempt_idx });
                    if let (Value::Object(base), Ok(Value::Object(fields))) = (&mut record, serde_json::to_value(event))
                    {
                        base.extend(fields);
                    }
                    lines.push(record);
                }
            }
            if let Some(commit) = step.commit() {
                lines.push(json!({
                    "alpha": alpha, "step": step_idx, "step_kind": kind, "event": "commit",
                    "before": commit.before, "after": commit.after, "preserved": commit.preserved,
                }));
            }
        }
        let mut status = json!({ "alpha": alpha, "event": "alpha_status", "missing": a.missing });
        if let (Value::Object(base), Ok(Value::Object(fields))) = (&mut status, serde_json::to_value(&a.status)) {
            base.extend(fields);
        }
        lines.push(status);
    }
    lines.push(json!({ "event": "verdict", "verdict": verdict.label() }));
    lines.iter().map(|l| l.to_string() + "\n").collect()
}

fn cmd_oracle(path: &Path, cap: Option<u32>, strip_tautologies: bool) -> Result<u8> {
    let f = read_cnf(path, strip_tautologies)?;
    let v = brute_force_sat(&f, oracle_cap(cap)?)?;
    let mut out = io::stdout().lock();
    match v.witness {
        Some(w) => {
            writeln!(out, "s SATISFIABLE")?;
            writeln!(out, "v {} 0", w.to_dimacs_literals())?;
            Ok(EXIT_SAT)
        }
        None => {
            writeln!(out, "s UNSATISFIABLE")?;
            Ok(EXIT_UNSAT)
        }
    }
}

fn cmd_fuzz_output(report: &DifferentialReport, path: Option<&Path>) -> Result<u8> {
    if let Some(p) = path {
        fs::write(p, report.to_jsonl()).with_context(|| format!("writing {}", p.display()))?;
    }
    let s = &report.summary;
    let mut out = io::stdout().lock();
    writeln!(out, "count {}", s.count)?;
    writeln!(out, "agree {}", s.agree)?;
    writeln!(out, "false_unsat {}", s.false_unsat)?;
    writeln!(out, "false_sat {}", s.false_sat)?;
    writeln!(out, "anomaly {}", s.anomaly)?;
    writeln!(out, "per_alpha_disagreements {}", s.per_alpha_disagreements)?;
    writeln!(
        out,
        "domain_violations {} of {} committed cascades",
        s.domain_violations, s.committed_cascades
    )?;
    Ok(0)
}

fn cmd_graph(path: &Path, alpha: bool, dot: Option<&Path>, stage: GraphStage) -> Result<u8> {
    let f = read_cnf(path, false)?;
    if f.has_empty_clause() {
        bail!("formula holds an empty clause; it has no decomposition");
    }
    let d = SpecialDecomposition::from_cnf(&preprocess(&f).formula)?;
    let missing = d.missing_elements(alpha);
    let text = if missing.is_empty() {
        eprintln!(
            "c no missing elements for alpha {}: the graph is empty",
            u8::from(alpha)
        );
        format!("digraph replaceability_alpha{} {{\n}}\n", u8::from(alpha))
    } else {
        match stage_graph(&d, alpha, &missing, stage) {
            Ok(g) => to_dot(&g),
            Err(message) => {
                eprintln!("{message}");
                return Ok(EXIT_USAGE);
            }
        }
    };
    match dot {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(0)
}

fn stage_graph(
    d: &SpecialDecomposition,
    alpha: bool,
    missing: &ElementSet,
    stage: GraphStage,
) -> Result<ReplGraph, String> {
    let raw = build_graph(d, alpha, missing).map_err(|e| e.to_string())?;
    if matches!(stage, GraphStage::Raw) {
        return Ok(raw);
    }
    let clean = match clean_graph(d, &raw, ProcessingOrder::Canonical) {
        CleanOutcome::Clean { graph, .. } => graph,
        CleanOutcome::Unstable { evidence, .. } => {
            return Err(format!(
                "cleaning is Unstable for alpha {}: {}; no clean graph exists",
                u8::from(alpha),
                match evidence.element {
                    Some(e) => format!("the main vertices of c{e} were exhausted"),
                    None => "no main vertex survived".into(),
                }
            ))
        }
    };
    if matches!(stage, GraphStage::Clean) {
        return Ok(clean);
    }
    let v = eliminate_incompatibilities(d, &clean, ProcessingOrder::Canonical);
    if v.stable {
        Ok(v.graph)
    } else {
        Err(format!(
            "incompatibility elimination is Unstable for alpha {}; no final graph exists",
            u8::from(alpha)
        ))
    }
}

fn cmd_proportional(path: &Path, oracle: bool) -> Result<u8> {
    let f = read_cnf(path, false)?;
    let source = if oracle {
        WitnessSource::Oracle { cap: oracle_cap(None)? }
    } else {
        WitnessSource::Pipeline
    };
    let mut out = io::stdout().lock();
    match to_proportional(&f, source) {
        ProportionalResult::AlreadyProportional => {
            writeln!(out, "c already proportional")?;
            write!(out, "{}", write_dimacs(&f))?;
        }
        ProportionalResult::Transformed { inverted, formula } => {
            let list: Vec<String> = inverted.iter().map(u32::to_string).collect();
            writeln!(out, "c inverted {{{}}}", list.join(","))?;
            write!(out, "{}", write_dimacs(&formula))?;
        }
        ProportionalResult::NotTransformable { reason } => {
            writeln!(out, "c not transformable: {reason}")?;
        }
    }
    Ok(0)
}

fn cmd_check_cover(path: &Path, bits: &str, as_decomposition: bool) -> Result<u8> {
    let text = read_input(path)?;
    let d: SpecialDecomposition = if as_decomposition {
        text.parse().with_context(|| format!("parsing {}", path.display()))?
    } else {
        let f = parse_dimacs_with(&text, ParseOptions::default())
            .with_context(|| format!("parsing {}", path.display()))?
            .0;
        pairs_of(&f)
    };
    let Some(selection) = CoveringSelection::from_bits(bits) else {
        bail!("selection must be a string of 0 and 1, got {bits:?}");
    };
    let covers = d.is_special_covering(&selection)?;
    writeln!(io::stdout().lock(), "{covers}")?;
    Ok(0)
}

/// One pair per variable, unused variables included as empty pairs, so the
/// selection indexes the variables of the file.
fn pairs_of(f: &CnfFormula) -> SpecialDecomposition {
    let m = f.num_clauses();
    let mut pairs: Vec<OrderedPair> = (0..f.num_vars())
        .map(|_| OrderedPair::new(ElementSet::empty(m), ElementSet::empty(m)))
        .collect();
    for (idx, clause) in f.clauses().iter().enumerate() {
        for lit in clause.literals() {
            let pair = &mut pairs[lit.var as usize - 1];
            if lit.positive {
                pair.pos.insert(idx + 1);
            } else {
                pair.neg.insert(idx + 1);
            }
        }
    }
    SpecialDecomposition::new_unchecked(m, pairs)
}
