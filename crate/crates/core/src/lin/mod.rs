//! Exact linear rational arithmetic: expressions, atoms, formulas with
//! quantifiers, satisfiability and quantifier elimination.

mod fm;

pub use fm::{elim_quants, eliminate, eliminate_conj, eval_closed, lin_sat, lin_valid, Limits};

use crate::error::{Error, Result};
use crate::syntax::{Constraint, Prim, RelOp, Term, Variable};
use crate::syntax::HasVars;
use num::{BigRational, One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type Rat = BigRational;

/// A linear expression: sum of coefficient*variable plus a constant.
/// Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct LinExpr {
    pub coeffs: BTreeMap<Variable, Rat>,
    pub constant: Rat,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn from_const(r: Rat) -> Self {
        LinExpr {
            coeffs: BTreeMap::new(),
            constant: r,
        }
    }

    pub fn from_var(v: Variable) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(v, Rat::from_integer(1.into()));
        LinExpr {
            coeffs,
            constant: Rat::zero(),
        }
    }

    pub fn is_const(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, v: &Variable) -> Rat {
        self.coeffs.get(v).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn add(&self, other: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        for (v, c) in &other.coeffs {
            let e = out.coeffs.entry(v.clone()).or_insert_with(Rat::zero);
            *e += c;
            if e.is_zero() {
                out.coeffs.remove(v);
            }
        }
        out.constant += &other.constant;
        out
    }

    pub fn neg(&self) -> LinExpr {
        LinExpr {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), -c)).collect(),
            constant: -self.constant.clone(),
        }
    }

    pub fn sub(&self, other: &LinExpr) -> LinExpr {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &Rat) -> LinExpr {
        if k.is_zero() {
            return LinExpr::zero();
        }
        LinExpr {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * k)).collect(),
            constant: &self.constant * k,
        }
    }

    /// Substitute `v := e` into this expression.
    pub fn substitute(&self, v: &Variable, e: &LinExpr) -> LinExpr {
        match self.coeffs.get(v) {
            None => self.clone(),
            Some(c) => {
                let c = c.clone();
                let mut rest = self.clone();
                rest.coeffs.remove(v);
                rest.add(&e.scale(&c))
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<Variable> {
        self.coeffs.keys().cloned().collect()
    }

    pub fn eval(&self, valuation: &BTreeMap<Variable, Rat>) -> Option<Rat> {
        let mut acc = self.constant.clone();
        for (v, c) in &self.coeffs {
            acc += c * valuation.get(v)?;
        }
        Some(acc)
    }
}

impl fmt::Debug for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.coeffs {
            if first {
                write!(f, "{c}*{v:?}")?;
            } else if c.is_negative() {
                write!(f, " - {}*{v:?}", -c)?;
            } else {
                write!(f, " + {c}*{v:?}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant.is_zero() {
            Ok(())
        } else if self.constant.is_negative() {
            write!(f, " - {}", -self.constant.clone())
        } else {
            write!(f, " + {}", self.constant)
        }
    }
}

/// Normalized relation against zero: only `<`, `<=` and `=` survive;
/// `>`/`>=` are flipped by negating the expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Lt,
    Le,
    Eq,
}

/// A linear atom `expr rel 0`.
#[derive(Clone, PartialEq, Eq)]
pub struct LinAtom {
    pub expr: LinExpr,
    pub rel: Rel,
}

impl LinAtom {
    pub fn new(expr: LinExpr, rel: Rel) -> Self {
        LinAtom { expr, rel }
    }

    /// e1 rel e2, normalized.
    pub fn relate(e1: &LinExpr, op: RelOp, e2: &LinExpr) -> LinAtom {
        match op {
            RelOp::Lt => LinAtom::new(e1.sub(e2), Rel::Lt),
            RelOp::Le => LinAtom::new(e1.sub(e2), Rel::Le),
            RelOp::Eq => LinAtom::new(e1.sub(e2), Rel::Eq),
            RelOp::Ge => LinAtom::new(e2.sub(e1), Rel::Le),
            RelOp::Gt => LinAtom::new(e2.sub(e1), Rel::Lt),
        }
    }

    pub fn eq(e1: &LinExpr, e2: &LinExpr) -> LinAtom {
        LinAtom::new(e1.sub(e2), Rel::Eq)
    }

    pub fn is_ground(&self) -> bool {
        self.expr.is_const()
    }

    /// Truth value when ground.
    pub fn ground_truth(&self) -> Option<bool> {
        if !self.is_ground() {
            return None;
        }
        let c = &self.expr.constant;
        Some(match self.rel {
            Rel::Lt => c.is_negative(),
            Rel::Le => !c.is_positive(),
            Rel::Eq => c.is_zero(),
        })
    }

    pub fn vars(&self) -> BTreeSet<Variable> {
        self.expr.vars()
    }

    pub fn eval(&self, valuation: &BTreeMap<Variable, Rat>) -> Option<bool> {
        let v = self.expr.eval(valuation)?;
        Some(match self.rel {
            Rel::Lt => v.is_negative(),
            Rel::Le => !v.is_positive(),
            Rel::Eq => v.is_zero(),
        })
    }

    /// The negation as a formula (equality splits into a disjunction).
    pub fn negate(&self) -> LinFormula {
        match self.rel {
            Rel::Lt => LinFormula::Atom(LinAtom::new(self.expr.neg(), Rel::Le)),
            Rel::Le => LinFormula::Atom(LinAtom::new(self.expr.neg(), Rel::Lt)),
            Rel::Eq => LinFormula::Or(vec![
                LinFormula::Atom(LinAtom::new(self.expr.clone(), Rel::Lt)),
                LinFormula::Atom(LinAtom::new(self.expr.neg(), Rel::Lt)),
            ]),
        }
    }
}

impl fmt::Debug for LinAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.rel {
            Rel::Lt => "<",
            Rel::Le => "=<",
            Rel::Eq => "=",
        };
        write!(f, "{:?} {op} 0", self.expr)
    }
}

/// Boolean combinations of linear atoms with explicit quantifiers.
/// Quantifier nesting (with shadowing) is allowed; `lin_valid` eliminates
/// innermost-out.
#[derive(Clone, PartialEq, Eq)]
pub enum LinFormula {
    True,
    False,
    Atom(LinAtom),
    Not(Box<LinFormula>),
    And(Vec<LinFormula>),
    Or(Vec<LinFormula>),
    Implies(Box<LinFormula>, Box<LinFormula>),
    Exists(Vec<Variable>, Box<LinFormula>),
    Forall(Vec<Variable>, Box<LinFormula>),
}

impl LinFormula {
    pub fn and(fs: Vec<LinFormula>) -> LinFormula {
        match fs.len() {
            0 => LinFormula::True,
            1 => fs.into_iter().next().unwrap(),
            _ => LinFormula::And(fs),
        }
    }

    pub fn or(fs: Vec<LinFormula>) -> LinFormula {
        match fs.len() {
            0 => LinFormula::False,
            1 => fs.into_iter().next().unwrap(),
            _ => LinFormula::Or(fs),
        }
    }

    pub fn implies(a: LinFormula, b: LinFormula) -> LinFormula {
        LinFormula::Implies(Box::new(a), Box::new(b))
    }

    pub fn exists(vars: Vec<Variable>, f: LinFormula) -> LinFormula {
        if vars.is_empty() {
            f
        } else {
            LinFormula::Exists(vars, Box::new(f))
        }
    }

    pub fn forall(vars: Vec<Variable>, f: LinFormula) -> LinFormula {
        if vars.is_empty() {
            f
        } else {
            LinFormula::Forall(vars, Box::new(f))
        }
    }

    pub fn conj(atoms: Vec<LinAtom>) -> LinFormula {
        LinFormula::and(atoms.into_iter().map(LinFormula::Atom).collect())
    }

    /// Free variables.
    pub fn free_vars(&self) -> BTreeSet<Variable> {
        fn go(f: &LinFormula, bound: &mut Vec<Variable>, out: &mut BTreeSet<Variable>) {
            match f {
                LinFormula::True | LinFormula::False => {}
                LinFormula::Atom(a) => {
                    for v in a.vars() {
                        if !bound.contains(&v) {
                            out.insert(v);
                        }
                    }
                }
                LinFormula::Not(g) => go(g, bound, out),
                LinFormula::And(gs) | LinFormula::Or(gs) => {
                    gs.iter().for_each(|g| go(g, bound, out))
                }
                LinFormula::Implies(a, b) => {
                    go(a, bound, out);
                    go(b, bound, out);
                }
                LinFormula::Exists(vs, g) | LinFormula::Forall(vs, g) => {
                    let n = bound.len();
                    bound.extend(vs.iter().cloned());
                    go(g, bound, out);
                    bound.truncate(n);
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Exact evaluation under a valuation, resolving quantifiers by
    /// exhaustive search over `grid` (the differential-testing oracle;
    /// refutation-oriented, see `sample_check`).
    pub fn eval_over_grid(
        &self,
        valuation: &BTreeMap<Variable, Rat>,
        grid: &[Rat],
    ) -> Option<bool> {
        match self {
            LinFormula::True => Some(true),
            LinFormula::False => Some(false),
            LinFormula::Atom(a) => a.eval(valuation),
            LinFormula::Not(g) => g.eval_over_grid(valuation, grid).map(|b| !b),
            LinFormula::And(gs) => {
                for g in gs {
                    if !g.eval_over_grid(valuation, grid)? {
                        return Some(false);
                    }
                }
                Some(true)
            }
            LinFormula::Or(gs) => {
                for g in gs {
                    if g.eval_over_grid(valuation, grid)? {
                        return Some(true);
                    }
                }
                Some(false)
            }
            LinFormula::Implies(a, b) => Some(
                !a.eval_over_grid(valuation, grid)? || b.eval_over_grid(valuation, grid)?,
            ),
            LinFormula::Exists(vs, g) => {
                let mut val = valuation.clone();
                Some(search_grid(vs, g, &mut val, grid, true))
            }
            LinFormula::Forall(vs, g) => {
                let mut val = valuation.clone();
                Some(!search_grid(vs, g, &mut val, grid, false))
            }
        }
    }
}

/// DFS over grid assignments to `vs`; returns whether a witness for
/// `want` (true: g holds, false: g fails) exists.
fn search_grid(
    vs: &[Variable],
    g: &LinFormula,
    val: &mut BTreeMap<Variable, Rat>,
    grid: &[Rat],
    want: bool,
) -> bool {
    match vs.split_first() {
        None => g.eval_over_grid(val, grid) == Some(want),
        Some((v, rest)) => {
            for r in grid {
                let old = val.insert(v.clone(), r.clone());
                let hit = search_grid(rest, g, val, grid, want);
                match old {
                    Some(o) => {
                        val.insert(v.clone(), o);
                    }
                    None => {
                        val.remove(v);
                    }
                }
                if hit {
                    return true;
                }
            }
            false
        }
    }
}

impl fmt::Debug for LinFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinFormula::True => write!(f, "true"),
            LinFormula::False => write!(f, "false"),
            LinFormula::Atom(a) => write!(f, "{a:?}"),
            LinFormula::Not(g) => write!(f, "!({g:?})"),
            LinFormula::And(gs) => {
                let parts: Vec<String> = gs.iter().map(|g| format!("({g:?})")).collect();
                write!(f, "{}", parts.join(" & "))
            }
            LinFormula::Or(gs) => {
                let parts: Vec<String> = gs.iter().map(|g| format!("({g:?})")).collect();
                write!(f, "{}", parts.join(" | "))
            }
            LinFormula::Implies(a, b) => write!(f, "({a:?}) -> ({b:?})"),
            LinFormula::Exists(vs, g) => write!(f, "exists {vs:?} ({g:?})"),
            LinFormula::Forall(vs, g) => write!(f, "forall {vs:?} ({g:?})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Surface-term conversion
// ---------------------------------------------------------------------------

/// Convert a surface term to a linear expression. Errors on non-arithmetic
/// symbols, nonlinear products and division by non-literals.
pub fn term_to_linexpr(t: &Term) -> Result<LinExpr> {
    match t {
        Term::Var(v) => Ok(LinExpr::from_var(v.clone())),
        Term::Rat(r) => Ok(LinExpr::from_const(r.clone())),
        Term::App(f, args) => match (f.name(), args.len()) {
            ("+", 2) => Ok(term_to_linexpr(&args[0])?.add(&term_to_linexpr(&args[1])?)),
            ("-", 2) => Ok(term_to_linexpr(&args[0])?.sub(&term_to_linexpr(&args[1])?)),
            ("-", 1) => Ok(term_to_linexpr(&args[0])?.neg()),
            ("*", 2) => {
                let a = term_to_linexpr(&args[0])?;
                let b = term_to_linexpr(&args[1])?;
                if a.is_const() {
                    Ok(b.scale(&a.constant))
                } else if b.is_const() {
                    Ok(a.scale(&b.constant))
                } else {
                    Err(Error::invalid("nonlinear product"))
                }
            }
            ("/", 2) => {
                let a = term_to_linexpr(&args[0])?;
                let b = term_to_linexpr(&args[1])?;
                if !b.is_const() || b.constant.is_zero() {
                    Err(Error::invalid("division must be by a nonzero literal"))
                } else {
                    Ok(a.scale(&b.constant.recip()))
                }
            }
            (name, _) => Err(Error::DomainMismatch {
                domain: "rlin",
                what: format!("function symbol {name}"),
            }),
        },
    }
}

/// Convert a conjunction of Rlin primitives to linear atoms.
pub fn constraint_to_atoms(c: &Constraint) -> Result<Vec<LinAtom>> {
    c.0.iter()
        .map(|p| match p {
            Prim::Lin(a, op, b) => Ok(LinAtom::relate(
                &term_to_linexpr(a)?,
                *op,
                &term_to_linexpr(b)?,
            )),
            Prim::TreeEq(..) => Err(Error::DomainMismatch {
                domain: "rlin",
                what: "tree equation".to_string(),
            }),
        })
        .collect()
}

/// Per-point truth of `phi` on a grid of valuations, quantifiers resolved
/// by grid search. Disagreement with an exact decision proves a bug in the
/// latter only in the witness-found direction; agreement is evidence.
pub fn sample_check(
    phi: &LinFormula,
    points: &[BTreeMap<Variable, Rat>],
    grid: &[Rat],
) -> Vec<Option<bool>> {
    points
        .iter()
        .map(|pt| phi.eval_over_grid(pt, grid))
        .collect()
}

/// Render a linear expression back into a surface arithmetic term
/// (sum of scaled variables plus a constant).
pub fn linexpr_to_term(e: &LinExpr) -> Term {
    let mut parts: Vec<Term> = Vec::new();
    for (v, k) in &e.coeffs {
        let var = Term::Var(v.clone());
        if k.is_one() {
            parts.push(var);
        } else {
            parts.push(Term::App(
                crate::syntax::FuncSym::new("*"),
                vec![Term::Rat(k.clone()), var],
            ));
        }
    }
    if !e.constant.is_zero() || parts.is_empty() {
        parts.push(Term::Rat(e.constant.clone()));
    }
    let mut it = parts.into_iter();
    let first = it.next().unwrap();
    it.fold(first, |acc, t| {
        Term::App(crate::syntax::FuncSym::new("+"), vec![acc, t])
    })
}

/// Render a linear atom as a surface constraint primitive `e op 0`.
pub fn linatom_to_prim(a: &LinAtom) -> Prim {
    let op = match a.rel {
        Rel::Lt => RelOp::Lt,
        Rel::Le => RelOp::Le,
        Rel::Eq => RelOp::Eq,
    };
    Prim::Lin(linexpr_to_term(&a.expr), op, Term::Rat(Rat::zero()))
}

/// Project a satisfiable conjunction onto `keep`: eliminate every other
/// variable by Fourier-Motzkin. The result is again a conjunction.
pub fn lin_project(
    c: &Constraint,
    keep: &BTreeSet<Variable>,
    limits: Limits,
) -> Result<Constraint> {
    let atoms = constraint_to_atoms(c)?;
    let mut drop: Vec<Variable> = Vec::new();
    for a in &atoms {
        for v in a.vars() {
            if !keep.contains(&v) && !drop.contains(&v) {
                drop.push(v);
            }
        }
    }
    let out = fm::eliminate_conj(&drop, &atoms, limits)?;
    Ok(Constraint(out.iter().map(linatom_to_prim).collect()))
}

/// The satisfiability formula sat(t~, S) = Exists Var(S') (t~ = u~' /\ d')
/// for a variant S' = <p(u~')|d'> of S renamed apart from t~.
pub fn sat_formula(
    ts: &[Term],
    s: &crate::syntax::Query,
    gen: &mut crate::syntax::VarGen,
) -> Result<LinFormula> {
    let sp = crate::syntax::rename_apart_query(s, &BTreeSet::new(), gen);
    if sp.atom.args.len() != ts.len() {
        return Err(Error::invalid(format!(
            "sat formula arity mismatch: {} terms vs {}/{}",
            ts.len(),
            sp.atom.pred.name,
            sp.atom.args.len()
        )));
    }
    let mut conj: Vec<LinAtom> = Vec::new();
    for (t, u) in ts.iter().zip(&sp.atom.args) {
        conj.push(LinAtom::eq(&term_to_linexpr(t)?, &term_to_linexpr(u)?));
    }
    conj.extend(constraint_to_atoms(&sp.constraint)?);
    let bound: Vec<Variable> = sp.vars().into_iter().collect();
    Ok(LinFormula::exists(bound, LinFormula::conj(conj)))
}

/// Set-inclusion test: every solution of `specific` is a solution of
/// `general`, decided as validity of d_spec -> sat(t~_spec, general).
pub fn lin_more_general(
    general: &crate::syntax::Query,
    specific: &crate::syntax::Query,
    gen: &mut crate::syntax::VarGen,
    limits: Limits,
) -> Result<bool> {
    if general.rel() != specific.rel() {
        return Ok(false);
    }
    let antecedent = LinFormula::conj(constraint_to_atoms(&specific.constraint)?);
    let sat = sat_formula(&specific.atom.args, general, gen)?;
    fm::lin_valid(&LinFormula::implies(antecedent, sat), limits)
}
