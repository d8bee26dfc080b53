//! Command-line front end: analyze programs for non-termination, check a
//! filter against a rule, run bounded derivations, and unfold general
//! programs into binary ones.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nontermclp_core::engine::{binary_unfold, derive, DerivationStatus, DeriveOptions};
use nontermclp_core::filters::filter_from_spec;
use nontermclp_core::inference::{analyze, check_rule_with_filter, AnalyzeOptions};
use nontermclp_core::lin::Limits;
use nontermclp_core::syntax::{
    parse_filter_literal, parse_general_program, pretty_program, pretty_query,
    Domain, VarGen,
};
use nontermclp_core::{load_program, load_query, Error};

const EXIT_INPUT: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser)]
#[command(name = "nontermclp", version, about = "Non-termination prover for binary constraint logic programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Term,
    Rlin,
}

impl From<DomainArg> for Domain {
    fn from(d: DomainArg) -> Domain {
        match d {
            DomainArg::Term => Domain::Term,
            DomainArg::Rlin => Domain::Rlin,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze programs and report certified looping queries
    Analyze {
        /// Program files
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Constraint domain override (default: the file's directive, else term)
        #[arg(long)]
        domain: Option<DomainArg>,
        /// Validate every certificate with a bounded derivation search
        #[arg(long)]
        witness: bool,
        /// Derivation length a witness search must reach
        #[arg(long, default_value_t = 100)]
        witness_depth: usize,
        /// Filter candidates tried per rule
        #[arg(long, default_value_t = 64)]
        filter_budget: usize,
        /// Atom cap for quantifier elimination
        #[arg(long, default_value_t = 100_000)]
        qe_cap: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Worker count for per-rule analysis (1 = sequential)
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Seed for randomized internals
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check one filter for derivation neutrality against one rule
    Check {
        file: PathBuf,
        /// Rule index within the program (0-based)
        #[arg(long, default_value_t = 0)]
        rule: usize,
        /// Filter literal, e.g. "filter p: positions {1}, delta p_t(X) | {X >= 0}"
        #[arg(long)]
        filter: String,
        #[arg(long)]
        domain: Option<DomainArg>,
        #[arg(long, default_value_t = 100_000)]
        qe_cap: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run a bounded derivation from a query and print the trace
    Derive {
        file: PathBuf,
        /// Start query, e.g. "p(X, Y) | {X >= 0}"
        #[arg(long)]
        query: String,
        /// Maximum number of derivation steps
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        domain: Option<DomainArg>,
        #[arg(long, default_value_t = 100_000)]
        qe_cap: usize,
        /// Trace format ("json" for machine-readable steps)
        #[arg(long)]
        trace: Option<String>,
    },
    /// Unfold a general logic program into binary clauses
    Unfold {
        file: PathBuf,
        /// Number of unfolding rounds (at least 1)
        #[arg(long)]
        depth: usize,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_resource() {
                ExitCode::from(EXIT_RESOURCE)
            } else {
                ExitCode::from(EXIT_INPUT)
            }
        }
    }
}

fn read(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn run() -> Result<(), Error> {
    match Cli::parse().command {
        Command::Analyze {
            files,
            domain,
            witness,
            witness_depth,
            filter_budget,
            qe_cap,
            format,
            jobs: _jobs,
            seed,
        } => {
            if witness_depth == 0 {
                return Err(Error::invalid("--witness-depth must be at least 1"));
            }
            let opts = AnalyzeOptions {
                witness,
                witness_depth,
                filter_budget,
                qe_cap,
                seed,
                ..AnalyzeOptions::default()
            };
            for file in &files {
                let text = read(file)?;
                let p = load_program(&text, domain.map(Into::into), Limits::new(qe_cap))?;
                let report = analyze(&p, &opts)?;
                match format {
                    Format::Json => println!("{}", report.to_json()),
                    Format::Text => {
                        println!("# {}", file.display());
                        print!("{}", report.to_text());
                    }
                }
            }
            Ok(())
        }
        Command::Check {
            file,
            rule,
            filter,
            domain,
            qe_cap,
            format,
        } => {
            let limits = Limits::new(qe_cap);
            let text = read(&file)?;
            let p = load_program(&text, domain.map(Into::into), limits)?;
            if rule >= p.rules.len() {
                return Err(Error::invalid(format!(
                    "rule index {rule} out of range (program has {} rules)",
                    p.rules.len()
                )));
            }
            let mut gen = VarGen::for_program(&p);
            let entries = parse_filter_literal(&filter, p.domain, &mut gen)?;
            let f = filter_from_spec(p.domain, &entries, &p.preds, &mut gen, limits)?;
            let (verdict, class) = check_rule_with_filter(&p, rule, &f, &mut gen, limits)?;
            match format {
                Format::Json => {
                    let v = serde_json::json!({
                        "rule": rule,
                        "filter": f.to_literal(),
                        "outcome": verdict.outcome,
                        "dnsyn": verdict.dnsyn,
                        "formula": verdict.formula.as_ref().map(|f| format!("{f:?}")),
                        "loops": class.as_ref().map(|c| pretty_query(&c.query)),
                    });
                    println!("{}", serde_json::to_string_pretty(&v).unwrap());
                }
                Format::Text => {
                    println!("rule {rule}: {}", serde_json::to_value(verdict.outcome).unwrap().as_str().unwrap());
                    if let Some(dnsyn) = verdict.dnsyn {
                        for (i, ok) in dnsyn.iter().enumerate() {
                            println!("  DNsyn{}: {}", i + 1, ok);
                        }
                    }
                    if let Some(formula) = &verdict.formula {
                        println!("  DNlog formula: {formula:?}");
                    }
                    match class {
                        Some(c) => println!("  loops: {}", pretty_query(&c.query)),
                        None => println!("  loops: not established"),
                    }
                }
            }
            Ok(())
        }
        Command::Derive {
            file,
            query,
            steps,
            domain,
            qe_cap,
            trace,
        } => {
            let limits = Limits::new(qe_cap);
            let text = read(&file)?;
            let p = load_program(&text, domain.map(Into::into), limits)?;
            let mut gen = VarGen::for_program(&p);
            let q = load_query(&query, &p, &mut gen)?;
            let d = derive(&p, &q, steps, DeriveOptions::default(), &mut gen, limits)?;
            match trace.as_deref() {
                Some("json") => {
                    let steps: Vec<_> = d
                        .steps
                        .iter()
                        .map(|s| {
                            serde_json::json!({
                                "rule": s.rule_idx,
                                "to": pretty_query(&s.to),
                            })
                        })
                        .collect();
                    let v = serde_json::json!({
                        "start": pretty_query(&d.start),
                        "steps": steps,
                        "status": d.status,
                    });
                    println!("{}", serde_json::to_string_pretty(&v).unwrap());
                }
                Some(other) => {
                    return Err(Error::invalid(format!("unknown trace format `{other}`")))
                }
                None => {
                    println!("{}", pretty_query(&d.start));
                    for s in &d.steps {
                        println!("==> [rule {}] {}", s.rule_idx, pretty_query(&s.to));
                    }
                    match d.status {
                        DerivationStatus::Failed => {
                            println!("failed at step {}", d.steps.len())
                        }
                        DerivationStatus::Running => println!("running"),
                        DerivationStatus::ExhaustedBudget => {
                            println!("stopped after {} steps", d.steps.len())
                        }
                    }
                }
            }
            Ok(())
        }
        Command::Unfold { file, depth } => {
            if depth == 0 {
                return Err(Error::invalid("--depth must be at least 1"));
            }
            let text = read(&file)?;
            let gp = parse_general_program(&text)?;
            let out = binary_unfold(&gp, depth)?;
            print!("{}", pretty_program(&out));
            Ok(())
        }
    }
}
