//! Static non-termination proofs for binary constraint logic programs
//! over finite trees or linear rational arithmetic.
//!
//! The pipeline: parse a binary program, find recursive rules whose body
//! query covers the head query — possibly only outside a set of argument
//! positions governed by a derivation-neutral filter — and propagate the
//! resulting looping queries across the program. Every reported query is
//! the root of an infinite derivation.

pub mod domain;
pub mod engine;
pub mod error;
pub mod filters;
pub mod inference;
pub mod lin;
pub mod syntax;
pub mod term;

pub use error::{Error, Result};
pub use inference::{analyze, AnalyzeOptions, Report};
pub use lin::Limits;
pub use syntax::{Domain, Program, Query};

/// Parse a binary program and validate it: arities are consistent and
/// every rule constraint is satisfiable in the program's domain.
pub fn load_program(
    text: &str,
    domain_override: Option<Domain>,
    limits: Limits,
) -> Result<Program> {
    let p = syntax::parse_program(text, domain_override)?;
    syntax::check_arities(&p)?;
    for (i, r) in p.rules.iter().enumerate() {
        if !domain::solv(p.domain, &r.constraint, limits)? {
            return Err(Error::UnsatRuleConstraint { rule: i.to_string() });
        }
    }
    Ok(p)
}

/// Parse a query against a loaded program.
pub fn load_query(text: &str, p: &Program, gen: &mut syntax::VarGen) -> Result<Query> {
    syntax::parse_query(text, p.domain, &p.preds, gen)
}
