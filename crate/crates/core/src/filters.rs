//! Position filters and derivation-neutrality checks.
//!
//! A filter assigns to every predicate a set of argument positions
//! (the "filtered" positions) together with a query over the projected
//! predicate that the filtered part of an atom has to satisfy. A filter
//! is derivation neutral for a rule when stepping through the rule
//! neither consults nor constrains the filtered positions beyond what
//! the filter already promises; certifying that lets the loop test
//! ignore those positions.

use crate::domain;
use crate::error::{Error, Result};
use crate::lin::{self, LinFormula, Limits};
use crate::syntax::{
    local_vars, pretty_constraint, pretty_term, rename_apart_query, Atom, Constraint, Domain,
    FilterSpecEntry, FlatRule, HasVars, NormalizedRule, Pred, Prim, Query, Term, VarGen,
    Variable,
};
use crate::term;
use std::collections::{BTreeMap, BTreeSet};

/// A set of argument positions (1-based) per predicate. Predicates not
/// present are treated as having the empty position set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionSet {
    map: BTreeMap<Pred, BTreeSet<usize>>,
}

impl PositionSet {
    pub fn new() -> Self {
        PositionSet {
            map: BTreeMap::new(),
        }
    }

    /// Empty position set for every given predicate.
    pub fn empty_for(preds: &[Pred]) -> Self {
        let mut map = BTreeMap::new();
        for p in preds {
            map.insert(p.clone(), BTreeSet::new());
        }
        PositionSet { map }
    }

    pub fn set(&mut self, pred: Pred, positions: BTreeSet<usize>) -> Result<()> {
        if pred.is_projected() {
            return Err(Error::invalid("position sets are keyed by base predicates"));
        }
        if let Some(&max) = positions.iter().max() {
            if max > pred.arity || positions.iter().any(|&i| i == 0) {
                return Err(Error::invalid(format!(
                    "position out of range for {}/{}",
                    pred.name, pred.arity
                )));
            }
        }
        self.map.insert(pred, positions);
        Ok(())
    }

    pub fn get(&self, pred: &Pred) -> BTreeSet<usize> {
        self.map.get(pred).cloned().unwrap_or_default()
    }

    /// Ascending position list for `pred`.
    pub fn positions(&self, pred: &Pred) -> Vec<usize> {
        self.get(pred).into_iter().collect()
    }

    pub fn preds(&self) -> impl Iterator<Item = &Pred> {
        self.map.keys()
    }

    /// Complement position set, per predicate in this set's key range.
    pub fn complement(&self) -> PositionSet {
        let map = self
            .map
            .iter()
            .map(|(p, tau)| {
                let all: BTreeSet<usize> = (1..=p.arity).collect();
                (p.clone(), all.difference(tau).cloned().collect())
            })
            .collect();
        PositionSet { map }
    }
}

impl Default for PositionSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Pick the sub-tuple of `args` at the given ascending 1-based positions.
pub fn project_args(args: &[Term], positions: &[usize]) -> Vec<Term> {
    positions.iter().map(|&i| args[i - 1].clone()).collect()
}

/// Project an atom on a position list: `p(u~) -> p|tau(u~|tau)`.
pub fn project_atom(a: &Atom, positions: &[usize]) -> Atom {
    Atom::new(a.pred.project(positions), project_args(&a.args, positions))
}

/// Project a query on a position list; the constraint is kept whole.
pub fn project_query(q: &Query, positions: &[usize]) -> Query {
    Query::new(
        project_atom(&q.atom, positions),
        q.constraint.clone(),
    )
}

/// A filter: positions per predicate plus, for each predicate, a query
/// over the projected predicate that filtered argument tuples must
/// satisfy. The delta query of `p` always has predicate `p|tau(p)`.
#[derive(Debug, Clone)]
pub struct Filter {
    pub tau: PositionSet,
    delta: BTreeMap<Pred, Query>,
}

impl Filter {
    /// Build a filter, validating projected arities and that every delta
    /// query is satisfiable (an unsatisfiable delta filters out every
    /// atom and certifies nothing).
    pub fn new(
        domain: Domain,
        tau: PositionSet,
        delta: BTreeMap<Pred, Query>,
        limits: Limits,
    ) -> Result<Filter> {
        for (p, q) in &delta {
            let positions = tau.positions(p);
            let want = p.project(&positions);
            if q.rel() != &want {
                return Err(Error::invalid(format!(
                    "delta query for {} must be over {:?}",
                    p.name, want
                )));
            }
            if !domain::solv(domain, &q.constraint, limits)? {
                return Err(Error::invalid(format!(
                    "unsatisfiable delta query for {}",
                    p.name
                )));
            }
        }
        for p in tau.preds() {
            if !delta.contains_key(p) {
                return Err(Error::invalid(format!("missing delta query for {}", p.name)));
            }
        }
        Ok(Filter { tau, delta })
    }

    /// The open filter on `tau`: every delta query is
    /// `<p|tau(Z~) | true>` with fresh distinct variables, i.e. the
    /// filtered positions are unconstrained.
    pub fn open(tau: PositionSet, gen: &mut VarGen) -> Filter {
        let delta = tau
            .preds()
            .map(|p| {
                let positions = tau.positions(p);
                let args: Vec<Term> = positions.iter().map(|_| Term::Var(gen.fresh(Some("Z")))).collect();
                let atom = Atom::new(p.project(&positions), args);
                (p.clone(), Query::new(atom, Constraint::truth()))
            })
            .collect();
        Filter { tau, delta }
    }

    /// True when every delta query is a distinct-variable atom with the
    /// true constraint.
    pub fn is_open(&self) -> bool {
        self.delta.values().all(|q| {
            let mut seen = BTreeSet::new();
            q.constraint.is_true()
                && q.atom
                    .args
                    .iter()
                    .all(|t| matches!(t, Term::Var(v) if seen.insert(v.clone())))
        })
    }

    pub fn delta(&self, pred: &Pred) -> Result<&Query> {
        self.delta.get(pred).ok_or_else(|| {
            Error::invalid(format!("filter has no entry for predicate {}", pred.name))
        })
    }

    /// Render back to the filter-literal concrete syntax.
    pub fn to_literal(&self) -> String {
        let mut parts = Vec::new();
        for (p, q) in &self.delta {
            let tau = self.tau.positions(p);
            let pos = tau
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(",");
            let mut s = format!("filter {}: positions {{{}}}", p.name, pos);
            if q.constraint.is_true()
                && q.atom.args.iter().all(|t| matches!(t, Term::Var(_)))
            {
                s.push_str(", delta open");
            } else {
                let args = q
                    .atom
                    .args
                    .iter()
                    .map(pretty_term)
                    .collect::<Vec<_>>()
                    .join(",");
                s.push_str(&format!(
                    ", delta {}_t({}) | {}",
                    p.name,
                    args,
                    pretty_constraint(&q.constraint)
                ));
            }
            parts.push(s);
        }
        parts.join("; ")
    }
}

/// Build a filter from parsed filter-literal entries, against the
/// predicate table of a program.
pub fn filter_from_spec(
    domain: Domain,
    entries: &[FilterSpecEntry],
    preds: &BTreeMap<std::sync::Arc<str>, usize>,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<Filter> {
    let mut tau = PositionSet::new();
    let mut delta = BTreeMap::new();
    for e in entries {
        let arity = *preds
            .get(e.pred.as_str())
            .ok_or_else(|| Error::invalid(format!("unknown predicate {}", e.pred)))?;
        let base = Pred::new(&e.pred, arity);
        let positions: BTreeSet<usize> = e.positions.iter().cloned().collect();
        tau.set(base.clone(), positions.clone())?;
        let plist: Vec<usize> = positions.into_iter().collect();
        match &e.delta {
            None => {
                let args: Vec<Term> = plist.iter().map(|_| Term::Var(gen.fresh(Some("Z")))).collect();
                delta.insert(
                    base.clone(),
                    Query::new(Atom::new(base.project(&plist), args), Constraint::truth()),
                );
            }
            Some((args, c)) => {
                if args.len() != plist.len() {
                    return Err(Error::Arity {
                        pred: format!("{}_t", e.pred),
                        declared: plist.len(),
                        used: args.len(),
                    });
                }
                delta.insert(
                    base.clone(),
                    Query::new(Atom::new(base.project(&plist), args.clone()), c.clone()),
                );
            }
        }
    }
    // predicates not mentioned get the empty position set
    for (name, &arity) in preds {
        let base = Pred::new(name, arity);
        if tau.get(&base).is_empty() && !delta.contains_key(&base) {
            tau.set(base.clone(), BTreeSet::new())?;
            delta.insert(
                base.clone(),
                Query::new(Atom::new(base.project(&[]), vec![]), Constraint::truth()),
            );
        }
    }
    Filter::new(domain, tau, delta, limits)
}

/// Does the filtered part of `s` satisfy the filter? True iff the
/// projection of `s` on the filtered positions of its predicate is a
/// subset of the delta query's denotation.
pub fn satisfies(
    domain: Domain,
    s: &Query,
    f: &Filter,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<bool> {
    let positions = f.tau.positions(s.rel());
    let proj = project_query(s, &positions);
    let d = f.delta(s.rel())?;
    domain::more_general(domain, d, &proj, gen, limits)
}

/// `general` is filter-more-general than `specific`: on the unfiltered
/// positions `general` covers `specific`, and `general` itself satisfies
/// the filter on the filtered positions.
pub fn delta_more_general(
    domain: Domain,
    general: &Query,
    specific: &Query,
    f: &Filter,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<bool> {
    if general.rel() != specific.rel() {
        return Ok(false);
    }
    let co = f.tau.complement().positions(general.rel());
    let g = project_query(general, &co);
    let s = project_query(specific, &co);
    Ok(domain::more_general(domain, &g, &s, gen, limits)?
        && satisfies(domain, general, f, gen, limits)?)
}

/// How a derivation-neutrality check concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DnOutcome {
    /// The four syntactic conditions all hold (sufficient).
    CertifiedSyn,
    /// The neutrality formula was proved valid by quantifier elimination.
    CertifiedLog,
    /// The neutrality formula (or a necessary condition of it) fails.
    RefutedLog,
    /// Neither certified nor refuted.
    Unknown,
}

/// Result of a derivation-neutrality check, with the per-condition
/// breakdown of the syntactic test when one was run and the neutrality
/// formula when one was built.
#[derive(Debug, Clone)]
pub struct DnVerdict {
    pub outcome: DnOutcome,
    pub dnsyn: Option<[bool; 4]>,
    pub formula: Option<LinFormula>,
}

impl DnVerdict {
    pub fn certified(&self) -> bool {
        matches!(self.outcome, DnOutcome::CertifiedSyn | DnOutcome::CertifiedLog)
    }
}

/// The four syntactic neutrality conditions on a flat rule
/// `p(X~) <- X~=s~ /\ Y~=t~ <> q(Y~)`:
///  1. `<p(s~)|true>` projected on the filtered positions is more
///     general than delta(p);
///  2. delta(q) is more general than `<q(t~)|true>` projected on the
///     filtered positions;
///  3. the filtered part of s~ shares no variable with its unfiltered part;
///  4. the filtered part of s~ shares no variable with the unfiltered
///     part of t~.
pub fn check_dnsyn(
    domain: Domain,
    flat: &FlatRule,
    f: &Filter,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<[bool; 4]> {
    let tau_p = f.tau.positions(&flat.head_pred);
    let tau_q = f.tau.positions(&flat.body_pred);
    let co_p = f.tau.complement().positions(&flat.head_pred);
    let co_q = f.tau.complement().positions(&flat.body_pred);

    let head_proj = Query::new(
        Atom::new(
            flat.head_pred.project(&tau_p),
            project_args(&flat.s, &tau_p),
        ),
        Constraint::truth(),
    );
    let body_proj = Query::new(
        Atom::new(
            flat.body_pred.project(&tau_q),
            project_args(&flat.t, &tau_q),
        ),
        Constraint::truth(),
    );
    let c1 = domain::more_general(domain, &head_proj, f.delta(&flat.head_pred)?, gen, limits)?;
    let c2 = domain::more_general(domain, f.delta(&flat.body_pred)?, &body_proj, gen, limits)?;

    let vars_of = |ts: &[Term]| -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        for t in ts {
            out.extend(t.vars());
        }
        out
    };
    let s_in = vars_of(&project_args(&flat.s, &tau_p));
    let s_out = vars_of(&project_args(&flat.s, &co_p));
    let t_out = vars_of(&project_args(&flat.t, &co_q));
    let c3 = s_in.is_disjoint(&s_out);
    let c4 = s_in.is_disjoint(&t_out);
    Ok([c1, c2, c3, c4])
}

/// The neutrality formula for a normalized rule `p(X~) <- c <> q(Y~)`:
///
///   c -> Forall X~|tau [ sat(X~|tau, delta(p))
///            -> Exists Y [ sat(Y~|tau, delta(q)) /\ c ] ]
///
/// with Y = Var(Y~|tau) u local_var(r). Only buildable over linear
/// arithmetic; validity is then decidable by quantifier elimination.
pub fn build_dnlog_formula(
    r: &NormalizedRule,
    f: &Filter,
    gen: &mut VarGen,
) -> Result<LinFormula> {
    let tau_p = f.tau.positions(&r.head_pred);
    let tau_q = f.tau.positions(&r.body_pred);
    let xs: Vec<Variable> = tau_p.iter().map(|&i| r.head_vars[i - 1].clone()).collect();
    let ys: Vec<Variable> = tau_q.iter().map(|&i| r.body_vars[i - 1].clone()).collect();

    let c_atoms = lin::constraint_to_atoms(&r.constraint)?;
    let c = LinFormula::conj(c_atoms);
    let xs_terms: Vec<Term> = xs.iter().cloned().map(Term::Var).collect();
    let ys_terms: Vec<Term> = ys.iter().cloned().map(Term::Var).collect();
    let sat_p = lin::sat_formula(&xs_terms, f.delta(&r.head_pred)?, gen)?;
    let sat_q = lin::sat_formula(&ys_terms, f.delta(&r.body_pred)?, gen)?;

    let mut inner_vars: BTreeSet<Variable> = ys.iter().cloned().collect();
    inner_vars.extend(local_vars(r));
    let inner = LinFormula::exists(
        inner_vars.into_iter().collect(),
        LinFormula::and(vec![sat_q, c.clone()]),
    );
    Ok(LinFormula::implies(
        c,
        LinFormula::forall(xs, LinFormula::implies(sat_p, inner)),
    ))
}

/// Decide whether the filter is derivation neutral for the rule.
///
/// Over linear arithmetic the neutrality formula is decided exactly by
/// quantifier elimination. Over finite trees the rule is flattened and
/// the syntactic conditions are checked; all four holding certifies,
/// failure of condition 1 refutes (it is necessary for flat rules), and
/// failure of condition 3 or 4 refutes as well (both necessary over
/// trees). Otherwise the check is inconclusive.
pub fn check_dn(
    domain: Domain,
    r: &NormalizedRule,
    f: &Filter,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<DnVerdict> {
    match domain {
        Domain::Rlin => {
            let formula = build_dnlog_formula(r, f, gen)?;
            let valid = lin::lin_valid(&formula, limits)?;
            let dnsyn = match term::literal_flat_form(r) {
                Some(flat) => Some(check_dnsyn(domain, &flat, f, gen, limits)?),
                None => None,
            };
            Ok(DnVerdict {
                outcome: if valid {
                    DnOutcome::CertifiedLog
                } else {
                    DnOutcome::RefutedLog
                },
                dnsyn,
                formula: Some(formula),
            })
        }
        Domain::Term => {
            let flat = match term::literal_flat_form(r) {
                Some(flat) => flat,
                None => term::flatten_term_rule(r, gen)?,
            };
            let conds = check_dnsyn(domain, &flat, f, gen, limits)?;
            let outcome = if conds.iter().all(|&b| b) {
                DnOutcome::CertifiedSyn
            } else if !conds[0] || !conds[2] || !conds[3] {
                DnOutcome::RefutedLog
            } else {
                DnOutcome::Unknown
            };
            Ok(DnVerdict {
                outcome,
                dnsyn: Some(conds),
                formula: None,
            })
        }
    }
}

/// Candidate filters for a recursive normalized rule, most-filtering
/// first: position subsets in decreasing size, and per subset a
/// constraint-derived delta before the open filter. At most `budget`
/// candidates are produced.
pub fn infer_filters(
    domain: Domain,
    r: &NormalizedRule,
    program_preds: &[Pred],
    budget: usize,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<Vec<Filter>> {
    let p = &r.head_pred;
    debug_assert_eq!(p, &r.body_pred);
    let arity = p.arity;
    let mut subsets: Vec<BTreeSet<usize>> = (0..(1u64 << arity.min(16)))
        .map(|mask| {
            (1..=arity)
                .filter(|&i| mask & (1 << (i - 1)) != 0)
                .collect()
        })
        .collect();
    // decreasing size, lexicographic within a size
    subsets.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));

    let flat = match domain {
        Domain::Term => Some(match term::literal_flat_form(r) {
            Some(f) => f,
            None => term::flatten_term_rule(r, gen)?,
        }),
        Domain::Rlin => None,
    };

    let mut out = Vec::new();
    for tau_p in subsets {
        if out.len() >= budget {
            break;
        }
        if tau_p.is_empty() {
            continue; // the empty filter is the plain more-general test
        }
        let mut tau = PositionSet::empty_for(program_preds);
        tau.set(p.clone(), tau_p.clone())?;
        let plist: Vec<usize> = tau_p.iter().cloned().collect();

        // constraint-derived delta first: it is the strongest promise the
        // rule's own constraint can justify.
        let derived: Option<Query> = match domain {
            Domain::Term => {
                let flat = flat.as_ref().unwrap();
                // delta(p) = <p|tau(Z~) | Z~ = s~|tau> with fresh Z~
                let s_proj = project_args(&flat.s, &plist);
                let zs: Vec<Variable> = plist.iter().map(|_| gen.fresh(Some("Z"))).collect();
                let prims: Vec<Prim> = zs
                    .iter()
                    .zip(&s_proj)
                    .map(|(z, s)| Prim::TreeEq(Term::Var(z.clone()), s.clone()))
                    .collect();
                Some(Query::new(
                    Atom::new(
                        p.project(&plist),
                        zs.into_iter().map(Term::Var).collect(),
                    ),
                    Constraint(prims),
                ))
            }
            Domain::Rlin => {
                // delta(p) = <p|tau(X~|tau) | c projected onto X~|tau>
                let keep: BTreeSet<Variable> = plist
                    .iter()
                    .map(|&i| r.head_vars[i - 1].clone())
                    .collect();
                match lin::lin_project(&r.constraint, &keep, limits) {
                    Ok(c) => {
                        let args: Vec<Term> = plist
                            .iter()
                            .map(|&i| Term::Var(r.head_vars[i - 1].clone()))
                            .collect();
                        let q = Query::new(Atom::new(p.project(&plist), args), c);
                        // rename so the delta owns its variables
                        Some(rename_apart_query(&q, &BTreeSet::new(), gen))
                    }
                    Err(e) if e.is_resource() => return Err(e),
                    Err(_) => None,
                }
            }
        };

        for cand in [derived, None] {
            if out.len() >= budget {
                break;
            }
            match cand {
                Some(dq) => {
                    let mut delta = open_deltas(&tau, gen);
                    if domain::solv(domain, &dq.constraint, limits)? {
                        delta.insert(p.clone(), dq);
                        out.push(Filter {
                            tau: tau.clone(),
                            delta,
                        });
                    }
                }
                None => {
                    out.push(Filter::open(tau.clone(), gen));
                }
            }
        }
    }
    Ok(out)
}

fn open_deltas(tau: &PositionSet, gen: &mut VarGen) -> BTreeMap<Pred, Query> {
    Filter::open(tau.clone(), gen).delta
}

/// Number of atoms in a formula; a cheap size proxy used by tests.
pub fn dnlog_formula_atoms(f: &LinFormula) -> usize {
    fn count(f: &LinFormula, n: &mut usize) {
        match f {
            LinFormula::Atom(_) => *n += 1,
            LinFormula::True | LinFormula::False => {}
            LinFormula::Not(g) => count(g, n),
            LinFormula::And(gs) | LinFormula::Or(gs) => {
                for g in gs {
                    count(g, n)
                }
            }
            LinFormula::Implies(a, b) => {
                count(a, n);
                count(b, n);
            }
            LinFormula::Exists(_, g) | LinFormula::Forall(_, g) => count(g, n),
        }
    }
    let mut n = 0;
    count(f, &mut n);
    n
}
