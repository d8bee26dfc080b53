//! The Term constraint-domain backend: unification over finite trees
//! (occurs-check on), solved forms, one-sided matching, query-set
//! containment, rule flattening and a bounded grounding oracle.

use crate::error::{Error, Result};
use crate::syntax::{
    local_vars, pretty_rule, Atom, Constraint, FlatRule, HasVars, NormalizedRule, Prim, Query,
    Term, VarGen, Variable,
};
use std::collections::{BTreeMap, BTreeSet};

/// An idempotent substitution; never stores a binding X -> X.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    map: BTreeMap<Variable, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, v: &Variable) -> Option<&Term> {
        self.map.get(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> {
        self.map.iter()
    }

    pub fn domain(&self) -> BTreeSet<Variable> {
        self.map.keys().cloned().collect()
    }

    pub fn apply(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => match self.map.get(v) {
                Some(img) => img.clone(),
                None => t.clone(),
            },
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| self.apply(a)).collect())
            }
            Term::Rat(r) => Term::Rat(r.clone()),
        }
    }

    pub fn apply_atom(&self, a: &Atom) -> Atom {
        Atom {
            pred: a.pred.clone(),
            args: a.args.iter().map(|t| self.apply(t)).collect(),
        }
    }

    /// Build from raw pairs the caller guarantees to be idempotent
    /// already (no binding's image mentions another binding's variable).
    pub(crate) fn from_raw_pairs(pairs: impl IntoIterator<Item = (Variable, Term)>) -> Self {
        Substitution {
            map: pairs.into_iter().collect(),
        }
    }

    /// Extend with v -> t, applying the new binding into existing images
    /// to keep the substitution idempotent.
    fn bind(&mut self, v: Variable, t: Term) {
        let single = Substitution {
            map: BTreeMap::from([(v.clone(), t.clone())]),
        };
        for img in self.map.values_mut() {
            *img = single.apply(img);
        }
        if t.as_var() != Some(&v) {
            self.map.insert(v, t);
        }
    }
}

fn occurs(v: &Variable, t: &Term) -> bool {
    match t {
        Term::Var(w) => v == w,
        Term::App(_, args) => args.iter().any(|a| occurs(v, a)),
        Term::Rat(_) => false,
    }
}

/// Most general unifier of a set of equations over finite trees, or None
/// when none exists (clash or occurs-check).
pub fn unify(equations: &[(Term, Term)]) -> Option<Substitution> {
    let mut subst = Substitution::new();
    let mut work: Vec<(Term, Term)> = equations.to_vec();
    while let Some((s, t)) = work.pop() {
        let s = subst.apply(&s);
        let t = subst.apply(&t);
        match (s, t) {
            (Term::Var(v), Term::Var(w)) if v == w => {}
            (Term::Var(v), t) | (t, Term::Var(v)) => {
                if occurs(&v, &t) {
                    return None;
                }
                subst.bind(v, t);
            }
            (Term::App(f, fa), Term::App(g, ga)) => {
                if f != g || fa.len() != ga.len() {
                    return None;
                }
                work.extend(fa.into_iter().zip(ga));
            }
            (Term::Rat(a), Term::Rat(b)) => {
                if a != b {
                    return None;
                }
            }
            (Term::App(..), Term::Rat(..)) | (Term::Rat(..), Term::App(..)) => return None,
        }
    }
    Some(subst)
}

fn constraint_equations(c: &Constraint) -> Result<Vec<(Term, Term)>> {
    c.0.iter()
        .map(|p| match p {
            Prim::TreeEq(s, t) => Ok((s.clone(), t.clone())),
            Prim::Lin(..) => Err(Error::DomainMismatch {
                domain: "term",
                what: "linear relation".to_string(),
            }),
        })
        .collect()
}

/// Solved form of a Term-domain constraint: an mgu of its equations, or
/// None when unsatisfiable over finite trees.
pub fn solved_form(c: &Constraint) -> Result<Option<Substitution>> {
    Ok(unify(&constraint_equations(c)?))
}

/// One-sided matching: a substitution with domain inside Var(general)
/// sending `general` onto `specific` syntactically. The caller renames
/// apart.
pub fn matches(general: &[Term], specific: &[Term]) -> Option<Substitution> {
    fn go(g: &Term, s: &Term, out: &mut BTreeMap<Variable, Term>) -> bool {
        match (g, s) {
            (Term::Var(v), s) => match out.get(v) {
                Some(prev) => prev == s,
                None => {
                    if Term::Var(v.clone()) != *s {
                        out.insert(v.clone(), s.clone());
                    }
                    true
                }
            },
            (Term::App(f, fa), Term::App(h, ha)) => {
                f == h && fa.len() == ha.len() && fa.iter().zip(ha).all(|(a, b)| go(a, b, out))
            }
            (Term::Rat(a), Term::Rat(b)) => a == b,
            _ => false,
        }
    }
    if general.len() != specific.len() {
        return None;
    }
    let mut map = BTreeMap::new();
    if general
        .iter()
        .zip(specific)
        .all(|(g, s)| go(g, s, &mut map))
    {
        Some(Substitution { map })
    } else {
        None
    }
}

/// Set(Sspec) included in Set(Sgen), decided on solved forms by matching.
pub fn term_more_general(sgen: &Query, sspec: &Query, gen: &mut VarGen) -> Result<bool> {
    assert_eq!(sgen.rel(), sspec.rel(), "predicate mismatch in containment");
    let spec_solved = match solved_form(&sspec.constraint)? {
        None => return Ok(true), // empty set is included in everything
        Some(s) => s,
    };
    let gen_solved = match solved_form(&sgen.constraint)? {
        None => return Ok(false), // nonempty set vs empty set
        Some(s) => s,
    };
    let spec_atom = spec_solved.apply_atom(&sspec.atom);
    let gen_atom = gen_solved.apply_atom(&sgen.atom);
    // rename the general side apart from the specific side
    let map: crate::syntax::VarMap = gen_atom
        .vars()
        .into_iter()
        .map(|v| {
            let f = gen.fresh_like(&v);
            (v, f)
        })
        .collect();
    let gen_atom = crate::syntax::rename_atom(&gen_atom, &map);
    Ok(matches(&gen_atom.args, &spec_atom.args).is_some())
}

// ---------------------------------------------------------------------------
// Flattening
// ---------------------------------------------------------------------------

/// Put a Term-domain normalized rule into flat form: constraint becomes
/// X~ = s~ /\ Y~ = t~ with Var(s~,t~) all local. Always succeeds on
/// satisfiable constraints in this domain.
pub fn flatten_term_rule(r: &NormalizedRule, gen: &mut VarGen) -> Result<FlatRule> {
    let solved = solved_form(&r.constraint)?.ok_or_else(|| Error::UnsatRuleConstraint {
        rule: pretty_rule(&r.as_rule()),
    })?;
    let s: Vec<Term> = r
        .head_vars
        .iter()
        .map(|v| solved.apply(&Term::Var(v.clone())))
        .collect();
    let t: Vec<Term> = r
        .body_vars
        .iter()
        .map(|v| solved.apply(&Term::Var(v.clone())))
        .collect();
    // rename every remaining variable in s~,t~ to fresh locals consistently
    let mut vars = BTreeSet::new();
    s.collect_vars(&mut vars);
    t.collect_vars(&mut vars);
    let map: crate::syntax::VarMap = vars
        .into_iter()
        .map(|v| {
            let f = gen.fresh_like(&v);
            (v, f)
        })
        .collect();
    let s: Vec<Term> = s.iter().map(|x| crate::syntax::rename_term(x, &map)).collect();
    let t: Vec<Term> = t.iter().map(|x| crate::syntax::rename_term(x, &map)).collect();
    let locals: BTreeSet<Variable> = map.values().cloned().collect();
    Ok(FlatRule {
        head_pred: r.head_pred.clone(),
        body_pred: r.body_pred.clone(),
        head_vars: r.head_vars.clone(),
        body_vars: r.body_vars.clone(),
        s,
        t,
        locals,
    })
}

/// Recognize a rule whose constraint is literally X~ = s~ /\ Y~ = t~ with
/// all right-hand variables local; keeps the written terms so syntactic
/// checks see the source form. Works for both domains.
pub fn literal_flat_form(r: &NormalizedRule) -> Option<FlatRule> {
    let locals = local_vars(r);
    let mut s: Vec<Option<Term>> = vec![None; r.head_vars.len()];
    let mut t: Vec<Option<Term>> = vec![None; r.body_vars.len()];
    for p in &r.constraint.0 {
        let (lhs, rhs) = match p {
            Prim::TreeEq(a, b) => (a, b),
            Prim::Lin(a, crate::syntax::RelOp::Eq, b) => (a, b),
            Prim::Lin(..) => return None,
        };
        let v = lhs.as_var()?;
        let slot = if let Some(i) = r.head_vars.iter().position(|h| h == v) {
            &mut s[i]
        } else if let Some(i) = r.body_vars.iter().position(|b| b == v) {
            &mut t[i]
        } else {
            return None;
        };
        if slot.is_some() {
            return None;
        }
        let mut rhs_vars = BTreeSet::new();
        rhs.collect_vars(&mut rhs_vars);
        if !rhs_vars.iter().all(|v| locals.contains(v)) {
            return None;
        }
        *slot = Some(rhs.clone());
    }
    let s: Option<Vec<Term>> = s.into_iter().collect();
    let t: Option<Vec<Term>> = t.into_iter().collect();
    Some(FlatRule {
        head_pred: r.head_pred.clone(),
        body_pred: r.body_pred.clone(),
        head_vars: r.head_vars.clone(),
        body_vars: r.body_vars.clone(),
        s: s?,
        t: t?,
        locals,
    })
}

// ---------------------------------------------------------------------------
// Bounded grounding oracle
// ---------------------------------------------------------------------------

/// A finite universe of ground terms: function symbols with arities,
/// closed under application up to the depth bound.
#[derive(Debug, Clone)]
pub struct Universe {
    pub symbols: Vec<(String, usize)>,
    pub depth: usize,
    /// Hard cap on the number of terms enumerated.
    pub cap: usize,
}

impl Universe {
    pub fn new(symbols: Vec<(String, usize)>, depth: usize) -> Self {
        Universe {
            symbols,
            depth,
            cap: 100_000,
        }
    }

    /// All ground terms of depth <= bound.
    pub fn terms(&self) -> Result<Vec<Term>> {
        let mut by_depth: Vec<Vec<Term>> = Vec::new();
        let mut all: Vec<Term> = Vec::new();
        for d in 0..=self.depth {
            let mut level = Vec::new();
            for (name, arity) in &self.symbols {
                if *arity == 0 {
                    if d == 0 {
                        level.push(Term::constant(name));
                    }
                    continue;
                }
                if d == 0 {
                    continue;
                }
                // argument tuples where at least one argument has depth d-1
                let smaller: Vec<Term> = by_depth[..d].concat();
                let mut tuples: Vec<Vec<Term>> = vec![vec![]];
                for _ in 0..*arity {
                    let mut next = Vec::new();
                    for tup in &tuples {
                        for t in &smaller {
                            let mut tt = tup.clone();
                            tt.push(t.clone());
                            next.push(tt);
                        }
                    }
                    tuples = next;
                    if tuples.len() > self.cap {
                        return Err(Error::Resource {
                            what: "universe",
                            detail: format!("more than {} tuples", self.cap),
                        });
                    }
                }
                for tup in tuples {
                    let max_d = tup.iter().map(term_depth).max().unwrap_or(0);
                    if max_d == d - 1 {
                        level.push(Term::app(name, tup));
                    }
                }
            }
            all.extend(level.iter().cloned());
            if all.len() > self.cap {
                return Err(Error::Resource {
                    what: "universe",
                    detail: format!("more than {} terms", self.cap),
                });
            }
            by_depth.push(level);
        }
        Ok(all)
    }
}

fn term_depth(t: &Term) -> usize {
    match t {
        Term::Var(_) | Term::Rat(_) => 0,
        Term::App(_, args) => match args.iter().map(term_depth).max() {
            Some(m) => 1 + m,
            None => 0, // constants sit at depth 0
        },
    }
}

/// The bounded restriction of Set(S): all ground atoms p(v(t~)) for
/// valuations v into the universe satisfying the constraint. Test oracle
/// only.
pub fn ground_instances(s: &Query, universe: &Universe) -> Result<BTreeSet<Atom>> {
    let solved = match solved_form(&s.constraint)? {
        None => return Ok(BTreeSet::new()),
        Some(sub) => sub,
    };
    let atom = solved.apply_atom(&s.atom);
    let vars: Vec<Variable> = atom.vars().into_iter().collect();
    let terms = universe.terms()?;
    let mut out = BTreeSet::new();
    let mut assignment: BTreeMap<Variable, Term> = BTreeMap::new();
    fn go(
        vars: &[Variable],
        terms: &[Term],
        assignment: &mut BTreeMap<Variable, Term>,
        atom: &Atom,
        out: &mut BTreeSet<Atom>,
        cap: usize,
        depth: usize,
    ) -> Result<()> {
        match vars.split_first() {
            None => {
                let sub = Substitution {
                    map: assignment.clone(),
                };
                let inst = sub.apply_atom(atom);
                // keep only atoms that live inside the universe itself,
                // so both sides of an inclusion use the same bound
                if inst.args.iter().any(|t| term_depth(t) > depth) {
                    return Ok(());
                }
                out.insert(inst);
                if out.len() > cap {
                    return Err(Error::Resource {
                        what: "ground_instances",
                        detail: format!("more than {cap} atoms"),
                    });
                }
                Ok(())
            }
            Some((v, rest)) => {
                for t in terms {
                    assignment.insert(v.clone(), t.clone());
                    go(rest, terms, assignment, atom, out, cap, depth)?;
                }
                assignment.remove(v);
                Ok(())
            }
        }
    }
    go(&vars, &terms, &mut assignment, &atom, &mut out, universe.cap, universe.depth)?;
    Ok(out)
}
