//! Domain-dispatched operations: constraint satisfiability, the
//! "more general than" test on queries, and query compaction.

use crate::error::Result;
use crate::lin::{self, Limits};
use crate::syntax::{Constraint, Domain, HasVars, Query, VarGen};
use crate::term;

/// Satisfiability of a constraint in the given domain.
pub fn solv(domain: Domain, c: &Constraint, limits: Limits) -> Result<bool> {
    match domain {
        Domain::Term => Ok(term::solved_form(c)?.is_some()),
        Domain::Rlin => lin::lin_sat(&lin::constraint_to_atoms(c)?, limits),
    }
}

/// Set inclusion: Set(specific) is contained in Set(general).
pub fn more_general(
    domain: Domain,
    general: &Query,
    specific: &Query,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<bool> {
    match domain {
        Domain::Term => term::term_more_general(general, specific, gen),
        Domain::Rlin => {
            // An unsatisfiable specific query denotes the empty set.
            if !solv(domain, &specific.constraint, limits)? {
                return Ok(true);
            }
            lin::lin_more_general(general, specific, gen, limits)
        }
    }
}

/// Replace a query by a set-equivalent one whose constraint only
/// mentions variables of the atom. Keeps derivations from dragging an
/// ever-growing conjunction along.
pub fn compact_query(domain: Domain, q: &Query, gen: &mut VarGen, limits: Limits) -> Result<Query> {
    match domain {
        Domain::Term => {
            let Some(solved) = term::solved_form(&q.constraint)? else {
                return Ok(q.clone());
            };
            let atom = solved.apply_atom(&q.atom);
            let fresh = crate::syntax::rename_apart_query(
                &Query::new(atom, Constraint::truth()),
                &std::collections::BTreeSet::new(),
                gen,
            );
            Ok(fresh)
        }
        Domain::Rlin => {
            let keep = q.atom.vars();
            let projected = lin::lin_project(&q.constraint, &keep, limits)?;
            Ok(Query::new(q.atom.clone(), projected))
        }
    }
}
