//! Abstract syntax of binary CLP programs and queries over a pluggable
//! constraint domain (finite trees or linear rational arithmetic), plus
//! variable management, rule normalization and local variables.

mod parser;
mod pretty;

pub use parser::{
    parse_filter_literal, parse_general_program, parse_program, parse_query, FilterSpecEntry,
};
pub use pretty::{
    pretty_atom, pretty_constraint, pretty_program, pretty_query, pretty_rule, pretty_term,
};

use crate::error::{Error, Result};
use num::BigRational;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// The two constraint domains the analyzer knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Finite trees, CLP(Term): logic programming.
    Term,
    /// Linear rational arithmetic.
    Rlin,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Term => "term",
            Domain::Rlin => "rlin",
        }
    }
}

/// A logic variable. Identity is the numeric id only; the hint is kept
/// for display.
#[derive(Clone)]
pub struct Variable {
    id: u64,
    hint: Option<Arc<str>>,
}

impl Variable {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn hint(&self) -> Option<&str> {
        self.hint.as_deref()
    }
}

impl PartialEq for Variable {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Variable {}
impl PartialOrd for Variable {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Variable {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.id.cmp(&other.id)
    }
}
impl std::hash::Hash for Variable {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

impl fmt::Debug for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.hint {
            Some(h) => write!(f, "{}#{}", h, self.id),
            None => write!(f, "_V{}", self.id),
        }
    }
}

/// Fresh-variable generator: a monotonic counter, passed explicitly to
/// every operation that needs fresh variables. No global state.
#[derive(Debug, Clone)]
pub struct VarGen {
    next: u64,
}

impl VarGen {
    pub fn new() -> Self {
        VarGen { next: 0 }
    }

    pub fn starting_at(next: u64) -> Self {
        VarGen { next }
    }

    /// A generator guaranteed not to collide with any variable of the program.
    pub fn for_program(p: &Program) -> Self {
        VarGen { next: p.var_bound }
    }

    pub fn fresh(&mut self, hint: Option<&str>) -> Variable {
        let id = self.next;
        self.next += 1;
        Variable {
            id,
            hint: hint.map(Arc::from),
        }
    }

    /// Fresh variable reusing the hint of an existing one.
    pub fn fresh_like(&mut self, v: &Variable) -> Variable {
        self.fresh(v.hint())
    }

    pub fn bound(&self) -> u64 {
        self.next
    }
}

impl Default for VarGen {
    fn default() -> Self {
        Self::new()
    }
}

/// Function symbol of the Term signature, or an arithmetic operator in Rlin.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FuncSym(pub Arc<str>);

impl FuncSym {
    pub fn new(name: &str) -> Self {
        FuncSym(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for FuncSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Predicate symbol. A projected predicate `p|tau` carries the ascending
/// position list it was projected on, so projections on different position
/// sets never compare equal.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pred {
    pub name: Arc<str>,
    pub arity: usize,
    pub proj: Option<Arc<[usize]>>,
}

impl Pred {
    pub fn new(name: &str, arity: usize) -> Self {
        Pred {
            name: Arc::from(name),
            arity,
            proj: None,
        }
    }

    /// The projection p|tau on the given ascending positions.
    pub fn project(&self, positions: &[usize]) -> Pred {
        debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        Pred {
            name: self.name.clone(),
            arity: positions.len(),
            proj: Some(Arc::from(positions)),
        }
    }

    pub fn is_projected(&self) -> bool {
        self.proj.is_some()
    }
}

impl fmt::Debug for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.proj {
            Some(ps) => write!(f, "{}_t{:?}/{}", self.name, ps, self.arity),
            None => write!(f, "{}/{}", self.name, self.arity),
        }
    }
}

/// A term: variable, compound (also covers constants as 0-ary compounds),
/// or a rational literal (Rlin only). Arithmetic in Rlin is kept as the
/// surface tree (`+`, `-`, `*`, `/` compounds) so that syntactic checks
/// like DNsyn see exactly what was written.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Variable),
    App(FuncSym, Vec<Term>),
    Rat(BigRational),
}

impl Term {
    pub fn var(v: Variable) -> Term {
        Term::Var(v)
    }

    pub fn app(name: &str, args: Vec<Term>) -> Term {
        Term::App(FuncSym::new(name), args)
    }

    pub fn constant(name: &str) -> Term {
        Term::App(FuncSym::new(name), vec![])
    }

    pub fn int(n: i64) -> Term {
        Term::Rat(BigRational::from_integer(n.into()))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_var(&self) -> Option<&Variable> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", pretty_term(self))
    }
}

/// Relation symbols of the Rlin constraint language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl RelOp {
    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Lt => "<",
            RelOp::Le => "=<",
            RelOp::Eq => "=",
            RelOp::Ge => ">=",
            RelOp::Gt => ">",
        }
    }
}

/// A primitive constraint: a tree equation (Term domain) or a linear
/// relation (Rlin domain).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Prim {
    /// s = t over finite trees.
    TreeEq(Term, Term),
    /// e1 rel e2 over the rationals.
    Lin(Term, RelOp, Term),
}

impl fmt::Debug for Prim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prim::TreeEq(s, t) => write!(f, "{} = {}", pretty_term(s), pretty_term(t)),
            Prim::Lin(a, op, b) => {
                write!(f, "{} {} {}", pretty_term(a), op.symbol(), pretty_term(b))
            }
        }
    }
}

/// A finite conjunction of primitive constraints; empty means `true`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Constraint(pub Vec<Prim>);

impl Constraint {
    pub fn truth() -> Self {
        Constraint(Vec::new())
    }

    pub fn is_true(&self) -> bool {
        self.0.is_empty()
    }

    pub fn and(&self, other: &Constraint) -> Constraint {
        let mut prims = self.0.clone();
        prims.extend(other.0.iter().cloned());
        Constraint(prims)
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", pretty_constraint(self))
    }
}

/// An atom p(t1,...,tn) with p from the program-defined predicates.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: Pred,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: Pred, args: Vec<Term>) -> Self {
        debug_assert_eq!(pred.arity, args.len());
        Atom { pred, args }
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", pretty_atom(self))
    }
}

/// A query <A | d>. The constraint need not be satisfiable: an
/// unsatisfiable constraint describes the empty set of atoms.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Query {
    pub atom: Atom,
    pub constraint: Constraint,
}

impl Query {
    pub fn new(atom: Atom, constraint: Constraint) -> Self {
        Query { atom, constraint }
    }

    pub fn rel(&self) -> &Pred {
        &self.atom.pred
    }
}

impl fmt::Debug for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", pretty_query(self))
    }
}

/// A binary rule H <- c <> B.
#[derive(Clone, PartialEq, Eq)]
pub struct Rule {
    pub head: Atom,
    pub constraint: Constraint,
    pub body: Atom,
}

impl Rule {
    pub fn head_query(&self) -> Query {
        Query::new(self.head.clone(), self.constraint.clone())
    }

    pub fn body_query(&self) -> Query {
        Query::new(self.body.clone(), self.constraint.clone())
    }

    pub fn is_recursive(&self) -> bool {
        self.head.pred == self.body.pred
    }
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", pretty_rule(self))
    }
}

/// A rule in the normalized shape p(X~) <- c <> q(Y~) where X~ and Y~ are
/// disjoint sequences of distinct variables and c carries all argument
/// equations.
#[derive(Debug, Clone)]
pub struct NormalizedRule {
    pub head_pred: Pred,
    pub body_pred: Pred,
    pub head_vars: Vec<Variable>,
    pub body_vars: Vec<Variable>,
    pub constraint: Constraint,
}

impl NormalizedRule {
    pub fn as_rule(&self) -> Rule {
        Rule {
            head: Atom::new(
                self.head_pred.clone(),
                self.head_vars.iter().cloned().map(Term::Var).collect(),
            ),
            constraint: self.constraint.clone(),
            body: Atom::new(
                self.body_pred.clone(),
                self.body_vars.iter().cloned().map(Term::Var).collect(),
            ),
        }
    }
}

/// A rule in flat form: p(X~) <- X~ = s~ /\ Y~ = t~ <> q(Y~) with
/// Var(s~,t~) contained in the locals, which are disjoint from X~ u Y~.
#[derive(Debug, Clone)]
pub struct FlatRule {
    pub head_pred: Pred,
    pub body_pred: Pred,
    pub head_vars: Vec<Variable>,
    pub body_vars: Vec<Variable>,
    pub s: Vec<Term>,
    pub t: Vec<Term>,
    pub locals: BTreeSet<Variable>,
}

impl FlatRule {
    /// Reconstruct the equivalent normalized rule.
    pub fn as_normalized(&self, domain: Domain) -> NormalizedRule {
        let eq = |x: &Variable, t: &Term| match domain {
            Domain::Term => Prim::TreeEq(Term::Var(x.clone()), t.clone()),
            Domain::Rlin => Prim::Lin(Term::Var(x.clone()), RelOp::Eq, t.clone()),
        };
        let mut prims = Vec::new();
        for (x, s) in self.head_vars.iter().zip(&self.s) {
            prims.push(eq(x, s));
        }
        for (y, t) in self.body_vars.iter().zip(&self.t) {
            prims.push(eq(y, t));
        }
        NormalizedRule {
            head_pred: self.head_pred.clone(),
            body_pred: self.body_pred.clone(),
            head_vars: self.head_vars.clone(),
            body_vars: self.body_vars.clone(),
            constraint: Constraint(prims),
        }
    }
}

/// A clause of a general (not necessarily binary) logic program; the
/// ingestion format of the binary unfolder.
#[derive(Debug, Clone)]
pub struct GeneralClause {
    pub head: Atom,
    pub body: Vec<Atom>,
}

/// A general logic program over the Term domain.
#[derive(Debug, Clone)]
pub struct GeneralProgram {
    pub clauses: Vec<GeneralClause>,
    pub preds: BTreeMap<Arc<str>, usize>,
    pub var_bound: u64,
}

/// A binary CLP program.
#[derive(Debug, Clone)]
pub struct Program {
    pub domain: Domain,
    pub rules: Vec<Rule>,
    /// Declared (or inferred) predicate arities.
    pub preds: BTreeMap<Arc<str>, usize>,
    /// Exclusive upper bound on variable ids used by the program.
    pub var_bound: u64,
}

impl Program {
    pub fn pred(&self, name: &str) -> Option<Pred> {
        self.preds
            .get_key_value(name)
            .map(|(n, a)| Pred {
                name: n.clone(),
                arity: *a,
                proj: None,
            })
    }
}

// ---------------------------------------------------------------------------
// Variable collection
// ---------------------------------------------------------------------------

/// Syntactic objects whose variables can be collected.
pub trait HasVars {
    fn collect_vars(&self, out: &mut BTreeSet<Variable>);

    fn vars(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }
}

impl HasVars for Term {
    fn collect_vars(&self, out: &mut BTreeSet<Variable>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => args.iter().for_each(|t| t.collect_vars(out)),
            Term::Rat(_) => {}
        }
    }
}

impl HasVars for Prim {
    fn collect_vars(&self, out: &mut BTreeSet<Variable>) {
        match self {
            Prim::TreeEq(s, t) => {
                s.collect_vars(out);
                t.collect_vars(out);
            }
            Prim::Lin(a, _, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

impl HasVars for Constraint {
    fn collect_vars(&self, out: &mut BTreeSet<Variable>) {
        self.0.iter().for_each(|p| p.collect_vars(out));
    }
}

impl HasVars for Atom {
    fn collect_vars(&self, out: &mut BTreeSet<Variable>) {
        self.args.iter().for_each(|t| t.collect_vars(out));
    }
}

impl HasVars for Query {
    fn collect_vars(&self, out: &mut BTreeSet<Variable>) {
        self.atom.collect_vars(out);
        self.constraint.collect_vars(out);
    }
}

impl HasVars for Rule {
    fn collect_vars(&self, out: &mut BTreeSet<Variable>) {
        self.head.collect_vars(out);
        self.constraint.collect_vars(out);
        self.body.collect_vars(out);
    }
}

impl<T: HasVars> HasVars for [T] {
    fn collect_vars(&self, out: &mut BTreeSet<Variable>) {
        self.iter().for_each(|x| x.collect_vars(out));
    }
}

impl<T: HasVars> HasVars for Vec<T> {
    fn collect_vars(&self, out: &mut BTreeSet<Variable>) {
        self.as_slice().collect_vars(out);
    }
}

/// Var(O1,...,On) for any mix of syntactic objects.
pub fn variables_of(objects: &[&dyn HasVars]) -> BTreeSet<Variable> {
    let mut out = BTreeSet::new();
    for o in objects {
        o.collect_vars(&mut out);
    }
    out
}

// ---------------------------------------------------------------------------
// Renaming
// ---------------------------------------------------------------------------

pub type VarMap = BTreeMap<Variable, Variable>;

pub fn rename_term(t: &Term, map: &VarMap) -> Term {
    match t {
        Term::Var(v) => Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
        Term::App(f, args) => {
            Term::App(f.clone(), args.iter().map(|a| rename_term(a, map)).collect())
        }
        Term::Rat(r) => Term::Rat(r.clone()),
    }
}

pub fn rename_atom(a: &Atom, map: &VarMap) -> Atom {
    Atom {
        pred: a.pred.clone(),
        args: a.args.iter().map(|t| rename_term(t, map)).collect(),
    }
}

pub fn rename_constraint(c: &Constraint, map: &VarMap) -> Constraint {
    Constraint(
        c.0.iter()
            .map(|p| match p {
                Prim::TreeEq(s, t) => Prim::TreeEq(rename_term(s, map), rename_term(t, map)),
                Prim::Lin(a, op, b) => Prim::Lin(rename_term(a, map), *op, rename_term(b, map)),
            })
            .collect(),
    )
}

pub fn rename_query(q: &Query, map: &VarMap) -> Query {
    Query {
        atom: rename_atom(&q.atom, map),
        constraint: rename_constraint(&q.constraint, map),
    }
}

pub fn rename_rule(r: &Rule, map: &VarMap) -> Rule {
    Rule {
        head: rename_atom(&r.head, map),
        constraint: rename_constraint(&r.constraint, map),
        body: rename_atom(&r.body, map),
    }
}

fn fresh_map_for(vars: &BTreeSet<Variable>, gen: &mut VarGen) -> VarMap {
    vars.iter().map(|v| (v.clone(), gen.fresh_like(v))).collect()
}

/// Standardization apart: a variant sharing no variable with `avoid`.
/// The generator is monotonic, so freshness holds by construction.
pub fn rename_apart_rule(r: &Rule, _avoid: &BTreeSet<Variable>, gen: &mut VarGen) -> Rule {
    let map = fresh_map_for(&r.vars(), gen);
    rename_rule(r, &map)
}

pub fn rename_apart_query(q: &Query, _avoid: &BTreeSet<Variable>, gen: &mut VarGen) -> Query {
    let map = fresh_map_for(&q.vars(), gen);
    rename_query(q, &map)
}

// ---------------------------------------------------------------------------
// Normalization and local variables
// ---------------------------------------------------------------------------

fn distinct_vars(args: &[Term]) -> Option<Vec<Variable>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(args.len());
    for t in args {
        let v = t.as_var()?;
        if !seen.insert(v.clone()) {
            return None;
        }
        out.push(v.clone());
    }
    Some(out)
}

/// Put a rule into the normalized shape p(X~) <- c <> q(Y~).
///
/// A rule that already has distinct-variable head and body arguments with
/// disjoint variable sets is taken as-is, so rules written in flat form
/// keep their literal constraint.
pub fn normalize_rule(domain: Domain, r: &Rule, gen: &mut VarGen) -> NormalizedRule {
    if let (Some(hv), Some(bv)) = (distinct_vars(&r.head.args), distinct_vars(&r.body.args)) {
        let hset: BTreeSet<_> = hv.iter().cloned().collect();
        if bv.iter().all(|v| !hset.contains(v)) {
            return NormalizedRule {
                head_pred: r.head.pred.clone(),
                body_pred: r.body.pred.clone(),
                head_vars: hv,
                body_vars: bv,
                constraint: r.constraint.clone(),
            };
        }
    }
    let eq = |x: &Variable, t: &Term| match domain {
        Domain::Term => Prim::TreeEq(Term::Var(x.clone()), t.clone()),
        Domain::Rlin => Prim::Lin(Term::Var(x.clone()), RelOp::Eq, t.clone()),
    };
    let head_vars: Vec<Variable> = (0..r.head.args.len())
        .map(|i| gen.fresh(Some(&format!("X{}", i + 1))))
        .collect();
    let body_vars: Vec<Variable> = (0..r.body.args.len())
        .map(|i| gen.fresh(Some(&format!("Y{}", i + 1))))
        .collect();
    let mut prims = Vec::new();
    for (x, t) in head_vars.iter().zip(&r.head.args) {
        prims.push(eq(x, t));
    }
    for (y, t) in body_vars.iter().zip(&r.body.args) {
        prims.push(eq(y, t));
    }
    prims.extend(r.constraint.0.iter().cloned());
    NormalizedRule {
        head_pred: r.head.pred.clone(),
        body_pred: r.body.pred.clone(),
        head_vars,
        body_vars,
        constraint: Constraint(prims),
    }
}

/// local_var(r) = Var(c) \ (Var(X~) u Var(Y~)).
pub fn local_vars(r: &NormalizedRule) -> BTreeSet<Variable> {
    let mut vars = r.constraint.vars();
    for v in r.head_vars.iter().chain(&r.body_vars) {
        vars.remove(v);
    }
    vars
}

/// Check that every atom's arity matches the declaration.
pub fn check_arities(p: &Program) -> Result<()> {
    for r in &p.rules {
        for a in [&r.head, &r.body] {
            match p.preds.get(&a.pred.name) {
                Some(&n) if n == a.args.len() => {}
                Some(&n) => {
                    return Err(Error::Arity {
                        pred: a.pred.name.to_string(),
                        declared: n,
                        used: a.args.len(),
                    })
                }
                None => return Err(Error::invalid(format!("undeclared predicate {}", a.pred.name))),
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
