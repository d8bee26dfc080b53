//! Binary unfolding of a general logic program (finite trees only).
//!
//! The ingestion bridge: a general program is turned into a binary
//! program whose loops cover the loops of the original. We iterate the
//! usual binary-unfolding operator a bounded number of rounds: facts
//! feed resolution of body prefixes, every body atom reachable after
//! resolving the atoms to its left yields a binary clause, and fully
//! resolved bodies yield new facts. Facts stay internal; the result
//! only contains the binary clauses.

use crate::error::{Error, Result};
use crate::syntax::{
    pretty_rule, rename_atom, Atom, Constraint, Domain, GeneralProgram, Program, Rule, VarGen,
    VarMap, Variable,
};
use crate::term::{unify, Substitution};
use std::collections::BTreeSet;

/// Hard cap on the fact / clause sets during unfolding.
const UNFOLD_CAP: usize = 50_000;

/// Compute the depth-`k` binary unfolding of a general program. The
/// result is a binary Term program; each of its rules simulates a
/// resolution sequence of the original program.
pub fn binary_unfold(gp: &GeneralProgram, k: usize) -> Result<Program> {
    let mut gen = VarGen::starting_at(gp.var_bound);
    let mut facts: BTreeSet<String> = BTreeSet::new();
    let mut fact_atoms: Vec<Atom> = Vec::new();
    let mut clauses: BTreeSet<String> = BTreeSet::new();
    let mut rules: Vec<Rule> = Vec::new();

    for _ in 0..k.max(1) {
        let mut new_facts: Vec<Atom> = Vec::new();
        let mut new_rules: Vec<Rule> = Vec::new();
        for cl in &gp.clauses {
            unfold_clause(
                &cl.head,
                &cl.body,
                &fact_atoms,
                &mut gen,
                &mut |head, body| {
                    match body {
                        Some(b) => new_rules.push(Rule {
                            head,
                            constraint: Constraint::truth(),
                            body: b,
                        }),
                        None => new_facts.push(head),
                    }
                    Ok(())
                },
            )?;
        }
        let mut changed = false;
        for a in new_facts {
            let key = canonical_atom_key(&a);
            if facts.insert(key) {
                fact_atoms.push(a);
                changed = true;
            }
        }
        for r in new_rules {
            let key = canonical_rule_key(&r);
            if clauses.insert(key) {
                rules.push(r);
                changed = true;
            }
        }
        if facts.len() + clauses.len() > UNFOLD_CAP {
            return Err(Error::Resource {
                what: "unfold",
                detail: format!("more than {} unfolded clauses", UNFOLD_CAP),
            });
        }
        if !changed {
            break;
        }
    }

    Ok(Program {
        domain: Domain::Term,
        rules,
        preds: gp.preds.clone(),
        var_bound: gen.bound(),
    })
}

/// Enumerate the binary unfoldings of one clause against the current
/// facts: resolve a (possibly empty) prefix of the body with facts and
/// emit the head paired with the next body atom, or a new fact when the
/// whole body resolves away.
fn unfold_clause(
    head: &Atom,
    body: &[Atom],
    facts: &[Atom],
    gen: &mut VarGen,
    emit: &mut dyn FnMut(Atom, Option<Atom>) -> Result<()>,
) -> Result<()> {
    fn go(
        head: &Atom,
        rest: &[Atom],
        subst: &Substitution,
        facts: &[Atom],
        gen: &mut VarGen,
        emit: &mut dyn FnMut(Atom, Option<Atom>) -> Result<()>,
    ) -> Result<()> {
        match rest.split_first() {
            None => emit(subst.apply_atom(head), None),
            Some((b, tail)) => {
                let b_inst = subst.apply_atom(b);
                // stop here: the next atom becomes the binary body
                emit(subst.apply_atom(head), Some(b_inst.clone()))?;
                // or resolve it with a fact and continue rightwards
                for f in facts {
                    if f.pred != b_inst.pred {
                        continue;
                    }
                    let f_fresh = freshen_atom(f, gen);
                    let eqs: Vec<_> = b_inst
                        .args
                        .iter()
                        .cloned()
                        .zip(f_fresh.args.iter().cloned())
                        .collect();
                    if let Some(mgu) = unify(&eqs) {
                        let combined = compose(subst, &mgu);
                        go(head, tail, &combined, facts, gen, emit)?;
                    }
                }
                Ok(())
            }
        }
    }
    go(head, body, &Substitution::new(), facts, gen, emit)
}

fn freshen_atom(a: &Atom, gen: &mut VarGen) -> Atom {
    let mut map = VarMap::new();
    for v in crate::syntax::HasVars::vars(a) {
        map.insert(v.clone(), gen.fresh_like(&v));
    }
    rename_atom(a, &map)
}

/// sigma then theta, as a substitution. Both inputs are idempotent and
/// theta's domain is fresh w.r.t. sigma's images only through unification
/// of sigma-instances, so applying theta to sigma's images keeps the
/// composition idempotent.
fn compose(sigma: &Substitution, theta: &Substitution) -> Substitution {
    let mut dom: BTreeSet<Variable> = sigma.domain();
    dom.extend(theta.domain());
    let pairs = dom.into_iter().filter_map(|v| {
        let t = theta.apply(&sigma.apply(&crate::syntax::Term::Var(v.clone())));
        if t == crate::syntax::Term::Var(v.clone()) {
            None
        } else {
            Some((v, t))
        }
    });
    Substitution::from_raw_pairs(pairs)
}

/// A renaming-invariant key: pretty-print after renumbering variables in
/// first-occurrence order.
fn canonical_atom_key(a: &Atom) -> String {
    let r = Rule {
        head: a.clone(),
        constraint: Constraint::truth(),
        body: a.clone(),
    };
    canonical_rule_key(&r)
}

fn canonical_rule_key(r: &Rule) -> String {
    let mut map = VarMap::new();
    let mut gen = VarGen::new();
    let mut visit = |t: &crate::syntax::Term| {
        collect_vars_in_order(t, &mut map, &mut gen);
    };
    for t in r.head.args.iter().chain(r.body.args.iter()) {
        visit(t);
    }
    pretty_rule(&crate::syntax::rename_rule(r, &map))
}

fn collect_vars_in_order(t: &crate::syntax::Term, map: &mut VarMap, gen: &mut VarGen) {
    match t {
        crate::syntax::Term::Var(v) => {
            if !map.contains_key(v) {
                let fresh = gen.fresh(None);
                map.insert(v.clone(), fresh);
            }
        }
        crate::syntax::Term::App(_, args) => {
            for a in args {
                collect_vars_in_order(a, map, gen);
            }
        }
        crate::syntax::Term::Rat(_) => {}
    }
}
