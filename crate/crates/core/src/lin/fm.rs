//! Fourier-Motzkin elimination over exact rationals, with strictness
//! bookkeeping, used both for satisfiability and for full quantifier
//! elimination on boolean combinations (via DNF).

use super::{LinAtom, LinExpr, LinFormula, Rel};
use crate::error::{Error, Result};
use crate::syntax::Variable;
use num::{Signed, Zero};
use std::collections::BTreeSet;

/// Resource caps; blowup turns into a clean error instead of running away.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    /// Maximum number of atoms any intermediate DNF may hold.
    pub max_atoms: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_atoms: 100_000 }
    }
}

impl Limits {
    pub const fn new(max_atoms: usize) -> Self {
        Limits { max_atoms }
    }
}

// ---------------------------------------------------------------------------
// Conjunction-level elimination
// ---------------------------------------------------------------------------

/// Eliminate one variable from a conjunction. Equalities are used as
/// substitutions first; otherwise lower/upper bounds combine, a strict
/// partner making the combination strict.
fn eliminate_var_conj(v: &Variable, atoms: &[LinAtom], limits: Limits) -> Result<Vec<LinAtom>> {
    // substitution via an equality containing v
    if let Some(idx) = atoms
        .iter()
        .position(|a| a.rel == Rel::Eq && !a.expr.coeff(v).is_zero())
    {
        let eq = &atoms[idx];
        let c = eq.expr.coeff(v);
        // v = -(expr - c*v)/c
        let mut rest = eq.expr.clone();
        rest.coeffs.remove(v);
        let image = rest.scale(&(-c.recip()));
        let out: Vec<LinAtom> = atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .map(|(_, a)| LinAtom::new(a.expr.substitute(v, &image), a.rel))
            .collect();
        return Ok(out);
    }

    let mut keep = Vec::new();
    let mut lowers: Vec<(LinExpr, bool)> = Vec::new(); // v >= e (strict flag)
    let mut uppers: Vec<(LinExpr, bool)> = Vec::new(); // v <= e
    for a in atoms {
        let c = a.expr.coeff(v);
        if c.is_zero() {
            keep.push(a.clone());
            continue;
        }
        debug_assert!(a.rel != Rel::Eq);
        let strict = a.rel == Rel::Lt;
        // c*v + r <= 0  =>  v <= -r/c (c>0)  |  v >= -r/c (c<0)
        let mut rest = a.expr.clone();
        rest.coeffs.remove(v);
        let bound = rest.scale(&(-c.recip()));
        if c.is_positive() {
            uppers.push((bound, strict));
        } else {
            lowers.push((bound, strict));
        }
    }
    if lowers.len() * uppers.len() + keep.len() > limits.max_atoms {
        return Err(Error::Resource {
            what: "fourier-motzkin",
            detail: format!(
                "{} atoms would be produced (cap {})",
                lowers.len() * uppers.len() + keep.len(),
                limits.max_atoms
            ),
        });
    }
    for (lo, lo_strict) in &lowers {
        for (up, up_strict) in &uppers {
            let rel = if *lo_strict || *up_strict {
                Rel::Lt
            } else {
                Rel::Le
            };
            keep.push(LinAtom::new(lo.sub(up), rel));
        }
    }
    Ok(keep)
}

/// Eliminate several variables from a conjunction.
pub fn eliminate_conj(vars: &[Variable], atoms: &[LinAtom], limits: Limits) -> Result<Vec<LinAtom>> {
    let mut cur = atoms.to_vec();
    for v in vars {
        cur = eliminate_var_conj(v, &cur, limits)?;
    }
    Ok(cur)
}

/// Check a conjunction of ground atoms; None if any atom still has a
/// variable.
fn conj_ground_truth(atoms: &[LinAtom]) -> Option<bool> {
    let mut all = true;
    for a in atoms {
        match a.ground_truth() {
            Some(true) => {}
            Some(false) => return Some(false),
            None => all = false,
        }
    }
    if all {
        Some(true)
    } else {
        None
    }
}

/// Satisfiability of a conjunction of linear atoms over the rationals.
pub fn lin_sat(atoms: &[LinAtom], limits: Limits) -> Result<bool> {
    let mut vars = BTreeSet::new();
    for a in atoms {
        vars.extend(a.vars());
    }
    let vars: Vec<Variable> = vars.into_iter().collect();
    let ground = eliminate_conj(&vars, atoms, limits)?;
    Ok(conj_ground_truth(&ground).unwrap_or(false))
}

// ---------------------------------------------------------------------------
// Formula-level elimination
// ---------------------------------------------------------------------------

/// Disjunctive normal form of a quantifier-free formula.
fn to_dnf(f: &LinFormula, limits: Limits) -> Result<Vec<Vec<LinAtom>>> {
    fn cap(dnf: &Vec<Vec<LinAtom>>, limits: Limits) -> Result<()> {
        let total: usize = dnf.iter().map(|c| c.len().max(1)).sum();
        if total > limits.max_atoms {
            Err(Error::Resource {
                what: "dnf",
                detail: format!("{total} atoms (cap {})", limits.max_atoms),
            })
        } else {
            Ok(())
        }
    }
    let out = match f {
        LinFormula::True => vec![vec![]],
        LinFormula::False => vec![],
        LinFormula::Atom(a) => vec![vec![a.clone()]],
        LinFormula::Not(g) => to_dnf(&negate(g), limits)?,
        LinFormula::Or(gs) => {
            let mut out = Vec::new();
            for g in gs {
                out.extend(to_dnf(g, limits)?);
                cap(&out, limits)?;
            }
            out
        }
        LinFormula::And(gs) => {
            let mut out = vec![vec![]];
            for g in gs {
                let d = to_dnf(g, limits)?;
                let mut next = Vec::new();
                for lhs in &out {
                    for rhs in &d {
                        let mut c = lhs.clone();
                        c.extend(rhs.iter().cloned());
                        next.push(c);
                    }
                }
                out = next;
                cap(&out, limits)?;
            }
            out
        }
        LinFormula::Implies(a, b) => to_dnf(
            &LinFormula::Or(vec![negate(a), (**b).clone()]),
            limits,
        )?,
        LinFormula::Exists(..) | LinFormula::Forall(..) => {
            return Err(Error::invalid("to_dnf expects a quantifier-free formula"))
        }
    };
    Ok(out)
}

/// Negation pushed one level: returns a formula whose top node is not Not.
fn negate(f: &LinFormula) -> LinFormula {
    match f {
        LinFormula::True => LinFormula::False,
        LinFormula::False => LinFormula::True,
        LinFormula::Atom(a) => a.negate(),
        LinFormula::Not(g) => (**g).clone(),
        LinFormula::And(gs) => LinFormula::Or(gs.iter().map(negate).collect()),
        LinFormula::Or(gs) => LinFormula::And(gs.iter().map(negate).collect()),
        LinFormula::Implies(a, b) => {
            LinFormula::And(vec![(**a).clone(), negate(b)])
        }
        LinFormula::Exists(vs, g) => LinFormula::Forall(vs.clone(), Box::new(negate(g))),
        LinFormula::Forall(vs, g) => LinFormula::Exists(vs.clone(), Box::new(negate(g))),
    }
}

fn dnf_to_formula(dnf: Vec<Vec<LinAtom>>) -> LinFormula {
    let mut disjuncts = Vec::new();
    for conj in dnf {
        match conj_ground_truth(&conj) {
            Some(false) => continue,
            Some(true) if conj.iter().all(|a| a.is_ground()) => return LinFormula::True,
            _ => {}
        }
        let atoms: Vec<LinAtom> = conj.into_iter().filter(|a| a.ground_truth() != Some(true)).collect();
        if atoms.is_empty() {
            return LinFormula::True;
        }
        disjuncts.push(LinFormula::conj(atoms));
    }
    LinFormula::or(disjuncts)
}

/// Existential quantifier elimination: the result mentions no variable
/// from `vars` and holds exactly when some rational assignment of `vars`
/// makes `phi` hold.
pub fn eliminate(vars: &[Variable], phi: &LinFormula, limits: Limits) -> Result<LinFormula> {
    let dnf = to_dnf(phi, limits)?;
    let mut out = Vec::with_capacity(dnf.len());
    for conj in dnf {
        out.push(eliminate_conj(vars, &conj, limits)?);
    }
    Ok(dnf_to_formula(out))
}

/// Replace every quantifier by its elimination, innermost first.
pub fn elim_quants(f: &LinFormula, limits: Limits) -> Result<LinFormula> {
    Ok(match f {
        LinFormula::True | LinFormula::False | LinFormula::Atom(_) => f.clone(),
        LinFormula::Not(g) => LinFormula::Not(Box::new(elim_quants(g, limits)?)),
        LinFormula::And(gs) => LinFormula::And(
            gs.iter()
                .map(|g| elim_quants(g, limits))
                .collect::<Result<_>>()?,
        ),
        LinFormula::Or(gs) => LinFormula::Or(
            gs.iter()
                .map(|g| elim_quants(g, limits))
                .collect::<Result<_>>()?,
        ),
        LinFormula::Implies(a, b) => LinFormula::implies(
            elim_quants(a, limits)?,
            elim_quants(b, limits)?,
        ),
        LinFormula::Exists(vs, g) => eliminate(vs, &elim_quants(g, limits)?, limits)?,
        LinFormula::Forall(vs, g) => {
            // forall x phi == not exists x not phi
            let inner = negate(&elim_quants(g, limits)?);
            negate(&eliminate(vs, &inner, limits)?)
        }
    })
}

/// Evaluate a formula with no free variables and no quantifiers.
pub fn eval_closed(f: &LinFormula) -> Result<bool> {
    match f {
        LinFormula::True => Ok(true),
        LinFormula::False => Ok(false),
        LinFormula::Atom(a) => a
            .ground_truth()
            .ok_or_else(|| Error::invalid("eval_closed: atom has free variables")),
        LinFormula::Not(g) => Ok(!eval_closed(g)?),
        LinFormula::And(gs) => {
            for g in gs {
                if !eval_closed(g)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        LinFormula::Or(gs) => {
            for g in gs {
                if eval_closed(g)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        LinFormula::Implies(a, b) => Ok(!eval_closed(a)? || eval_closed(b)?),
        LinFormula::Exists(..) | LinFormula::Forall(..) => {
            Err(Error::invalid("eval_closed: unexpected quantifier"))
        }
    }
}

/// Validity of the universal closure of `phi`: eliminate quantifiers
/// innermost-out, then universally close over the remaining free
/// variables and evaluate.
pub fn lin_valid(phi: &LinFormula, limits: Limits) -> Result<bool> {
    let qf = elim_quants(phi, limits)?;
    let free: Vec<Variable> = qf.free_vars().into_iter().collect();
    let negated = eliminate(&free, &negate(&qf), limits)?;
    let ground_free: Vec<Variable> = negated.free_vars().into_iter().collect();
    debug_assert!(ground_free.is_empty());
    Ok(!eval_closed(&negated)?)
}
