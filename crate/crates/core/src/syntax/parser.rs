//! Concrete syntax.
//!
//! Programs are Prolog-like, one clause per `.`-terminated item:
//!
//! ```text
//! :- domain(rlin).
//! :- pred p/2.            % optional, inferred otherwise
//! p(X,Y) :- {X >= 0, Y =< 10}, p(X+1,Y+1).
//! append([X|Xs],Ys,[X|Zs]) :- append(Xs,Ys,Zs).
//! p(X) :- X = f(A), Y = f(f(A)), p(Y).
//! ```
//!
//! Queries are `atom | constraints`, e.g. `p(X,Y) | {X >= 0}`; filter
//! literals are `filter p: positions {1}, delta p_t(X) | {X >= 0}` with
//! `;`-separated entries for several predicates.

use super::*;
use num::{BigInt, BigRational, Zero};
use std::collections::HashMap;

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),   // lowercase-initial
    VarName(String), // uppercase/underscore-initial
    Num(BigRational),
    Punct(&'static str), // ( ) [ ] { } , | ; :
    Op(&'static str),    // + - * / < =< > >= =
    Neck,                // :-
    Dot,                 // clause terminator
    Eof,
}

#[derive(Debug, Clone)]
struct SpannedTok {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'%') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn next_tok(&mut self) -> Result<SpannedTok> {
        self.skip_ws();
        let (line, col) = (self.line, self.col);
        let mk = |tok| SpannedTok { tok, line, col };
        let c = match self.peek() {
            None => return Ok(mk(Tok::Eof)),
            Some(c) => c,
        };
        let tok = match c {
            b'(' | b')' | b'[' | b']' | b'{' | b'}' | b',' | b'|' | b';' => {
                self.bump();
                Tok::Punct(match c {
                    b'(' => "(",
                    b')' => ")",
                    b'[' => "[",
                    b']' => "]",
                    b'{' => "{",
                    b'}' => "}",
                    b',' => ",",
                    b'|' => "|",
                    _ => ";",
                })
            }
            b':' => {
                self.bump();
                if self.peek() == Some(b'-') {
                    self.bump();
                    Tok::Neck
                } else {
                    Tok::Punct(":")
                }
            }
            b'.' => {
                // a dot is a clause terminator; decimal points are consumed
                // inside number lexing
                self.bump();
                Tok::Dot
            }
            b'+' | b'*' => {
                self.bump();
                Tok::Op(if c == b'+' { "+" } else { "*" })
            }
            b'/' => {
                self.bump();
                Tok::Op("/")
            }
            b'-' => {
                self.bump();
                Tok::Op("-")
            }
            b'<' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Tok::Op("=<") // accept `<=` as a synonym
                } else {
                    Tok::Op("<")
                }
            }
            b'>' => {
                self.bump();
                if self.peek() == Some(b'=') {
                    self.bump();
                    Tok::Op(">=")
                } else {
                    Tok::Op(">")
                }
            }
            b'=' => {
                self.bump();
                if self.peek() == Some(b'<') {
                    self.bump();
                    Tok::Op("=<")
                } else {
                    Tok::Op("=")
                }
            }
            b'0'..=b'9' => {
                let mut int = String::new();
                while let Some(d) = self.peek() {
                    if d.is_ascii_digit() {
                        int.push(self.bump().unwrap() as char);
                    } else {
                        break;
                    }
                }
                let mut frac = String::new();
                if self.peek() == Some(b'.') && self.peek2().map_or(false, |d| d.is_ascii_digit()) {
                    self.bump();
                    while let Some(d) = self.peek() {
                        if d.is_ascii_digit() {
                            frac.push(self.bump().unwrap() as char);
                        } else {
                            break;
                        }
                    }
                }
                let numer: BigInt = format!("{int}{frac}").parse().unwrap();
                let denom = BigInt::from(10u32).pow(frac.len() as u32);
                Tok::Num(BigRational::new(numer, denom))
            }
            c if c == b'_' || c.is_ascii_uppercase() => {
                let mut s = String::new();
                while let Some(d) = self.peek() {
                    if d == b'_' || d.is_ascii_alphanumeric() {
                        s.push(self.bump().unwrap() as char);
                    } else {
                        break;
                    }
                }
                Tok::VarName(s)
            }
            c if c.is_ascii_lowercase() => {
                let mut s = String::new();
                while let Some(d) = self.peek() {
                    if d == b'_' || d.is_ascii_alphanumeric() {
                        s.push(self.bump().unwrap() as char);
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            other => return Err(self.err(format!("unexpected character {:?}", other as char))),
        };
        Ok(mk(tok))
    }
}

fn tokenize(src: &str) -> Result<Vec<SpannedTok>> {
    let mut lx = Lexer::new(src);
    let mut out = Vec::new();
    loop {
        let t = lx.next_tok()?;
        let eof = t.tok == Tok::Eof;
        out.push(t);
        if eof {
            return Ok(out);
        }
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<SpannedTok>,
    pos: usize,
    domain: Option<Domain>,
    gen: VarGen,
    /// Per-clause name -> variable scope.
    scope: HashMap<String, Variable>,
    anon: usize,
}

#[derive(Debug)]
enum Goal {
    Atom(Atom),
    Prim(Prim),
}

impl Parser {
    fn new(toks: Vec<SpannedTok>, gen: VarGen) -> Self {
        Parser {
            toks,
            pos: 0,
            domain: None,
            gen,
            scope: HashMap::new(),
            anon: 0,
        }
    }

    fn cur(&self) -> &SpannedTok {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let t = self.cur();
        Error::Parse {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        }
    }

    fn at(&self, tok: &Tok) -> bool {
        &self.cur().tok == tok
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.err(format!("expected {what}, found {:?}", self.cur().tok)))
        }
    }

    fn eat_ident(&mut self) -> Option<String> {
        if let Tok::Ident(s) = &self.cur().tok {
            let s = s.clone();
            self.pos += 1;
            Some(s)
        } else {
            None
        }
    }

    fn variable(&mut self, name: &str) -> Variable {
        if name == "_" {
            self.anon += 1;
            let hint = format!("_G{}", self.anon);
            return self.gen.fresh(Some(&hint));
        }
        if let Some(v) = self.scope.get(name) {
            return v.clone();
        }
        let v = self.gen.fresh(Some(name));
        self.scope.insert(name.to_string(), v.clone());
        v
    }

    fn begin_clause(&mut self) {
        self.scope.clear();
    }

    // -- terms --------------------------------------------------------------

    /// A term in the Term domain: variable, compound, constant or list.
    fn tree_term(&mut self) -> Result<Term> {
        match self.cur().tok.clone() {
            Tok::VarName(n) => {
                self.pos += 1;
                Ok(Term::Var(self.variable(&n)))
            }
            Tok::Ident(f) => {
                self.pos += 1;
                if self.eat(&Tok::Punct("(")) {
                    let mut args = vec![self.tree_term()?];
                    while self.eat(&Tok::Punct(",")) {
                        args.push(self.tree_term()?);
                    }
                    self.expect(&Tok::Punct(")"), "`)`")?;
                    Ok(Term::app(&f, args))
                } else {
                    Ok(Term::constant(&f))
                }
            }
            Tok::Punct("[") => {
                self.pos += 1;
                self.list_tail()
            }
            other => Err(self.err(format!("expected a term, found {other:?}"))),
        }
    }

    fn list_tail(&mut self) -> Result<Term> {
        if self.eat(&Tok::Punct("]")) {
            return Ok(Term::constant("[]"));
        }
        let mut items = vec![self.tree_term()?];
        while self.eat(&Tok::Punct(",")) {
            items.push(self.tree_term()?);
        }
        let tail = if self.eat(&Tok::Punct("|")) {
            self.tree_term()?
        } else {
            Term::constant("[]")
        };
        self.expect(&Tok::Punct("]"), "`]`")?;
        Ok(items
            .into_iter()
            .rev()
            .fold(tail, |acc, h| Term::app(".", vec![h, acc])))
    }

    // -- arithmetic expressions ----------------------------------------------

    fn lin_expr(&mut self) -> Result<Term> {
        let mut lhs = self.lin_term()?;
        loop {
            if self.eat(&Tok::Op("+")) {
                let rhs = self.lin_term()?;
                lhs = Term::app("+", vec![lhs, rhs]);
            } else if self.eat(&Tok::Op("-")) {
                let rhs = self.lin_term()?;
                lhs = Term::app("-", vec![lhs, rhs]);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn lin_term(&mut self) -> Result<Term> {
        let mut lhs = self.lin_factor()?;
        loop {
            if self.eat(&Tok::Op("*")) {
                let rhs = self.lin_factor()?;
                lhs = Term::app("*", vec![lhs, rhs]);
            } else if self.eat(&Tok::Op("/")) {
                let rhs = self.lin_factor()?;
                // division is restricted to nonzero rational literals to
                // keep expressions linear
                match &rhs {
                    Term::Rat(r) if !r.numer().is_zero() => {}
                    Term::Rat(_) => return Err(self.err("division by zero")),
                    _ => return Err(self.err("division by a non-literal is not linear")),
                }
                lhs = Term::app("/", vec![lhs, rhs]);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn lin_factor(&mut self) -> Result<Term> {
        match self.cur().tok.clone() {
            Tok::Num(r) => {
                self.pos += 1;
                Ok(Term::Rat(r))
            }
            Tok::VarName(n) => {
                self.pos += 1;
                Ok(Term::Var(self.variable(&n)))
            }
            Tok::Op("-") => {
                self.pos += 1;
                let f = self.lin_factor()?;
                Ok(Term::app("-", vec![Term::int(0), f]))
            }
            Tok::Punct("(") => {
                self.pos += 1;
                let e = self.lin_expr()?;
                self.expect(&Tok::Punct(")"), "`)`")?;
                Ok(e)
            }
            other => Err(self.err(format!("expected a linear expression, found {other:?}"))),
        }
    }

    fn domain_term(&mut self, domain: Domain) -> Result<Term> {
        match domain {
            Domain::Term => self.tree_term(),
            Domain::Rlin => {
                let t = self.lin_expr()?;
                crate::lin::term_to_linexpr(&t)
                    .map_err(|e| self.err(format!("non-linear term: {e}")))?;
                Ok(t)
            }
        }
    }

    // -- goals ----------------------------------------------------------------

    fn rel_op(&mut self) -> Option<RelOp> {
        let op = match &self.cur().tok {
            Tok::Op("<") => RelOp::Lt,
            Tok::Op("=<") => RelOp::Le,
            Tok::Op("=") => RelOp::Eq,
            Tok::Op(">=") => RelOp::Ge,
            Tok::Op(">") => RelOp::Gt,
            _ => return None,
        };
        self.pos += 1;
        Some(op)
    }

    /// One relation `e1 rel e2` inside `{...}`.
    fn lin_relation(&mut self) -> Result<Prim> {
        let lhs = self.lin_expr()?;
        let op = self
            .rel_op()
            .ok_or_else(|| self.err("expected a relation symbol"))?;
        let rhs = self.lin_expr()?;
        Ok(Prim::Lin(lhs, op, rhs))
    }

    /// A body goal: `{...}` constraint block, `s = t` equation, or an atom.
    fn goal(&mut self, domain: Domain) -> Result<Vec<Goal>> {
        if self.eat(&Tok::Punct("{")) {
            if domain != Domain::Rlin {
                return Err(self.err("`{...}` constraint goals require the rlin domain"));
            }
            let mut prims = Vec::new();
            if !self.at(&Tok::Punct("}")) {
                prims.push(self.lin_relation()?);
                while self.eat(&Tok::Punct(",")) {
                    prims.push(self.lin_relation()?);
                }
            }
            self.expect(&Tok::Punct("}"), "`}`")?;
            return Ok(prims.into_iter().map(Goal::Prim).collect());
        }
        match domain {
            Domain::Term => {
                // either an atom p(...) or an equation s = t
                if let Tok::Ident(name) = self.cur().tok.clone() {
                    let save = self.pos;
                    self.pos += 1;
                    let mut args = Vec::new();
                    if self.eat(&Tok::Punct("(")) {
                        args.push(self.tree_term()?);
                        while self.eat(&Tok::Punct(",")) {
                            args.push(self.tree_term()?);
                        }
                        self.expect(&Tok::Punct(")"), "`)`")?;
                    }
                    if self.at(&Tok::Op("=")) {
                        // it was a term after all
                        self.pos = save;
                    } else {
                        return Ok(vec![Goal::Atom(Atom {
                            pred: Pred::new(&name, args.len()),
                            args,
                        })]);
                    }
                }
                let lhs = self.tree_term()?;
                self.expect(&Tok::Op("="), "`=`")?;
                let rhs = self.tree_term()?;
                Ok(vec![Goal::Prim(Prim::TreeEq(lhs, rhs))])
            }
            Domain::Rlin => {
                if let Tok::Ident(name) = self.cur().tok.clone() {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if self.eat(&Tok::Punct("(")) {
                        args.push(self.domain_term(domain)?);
                        while self.eat(&Tok::Punct(",")) {
                            args.push(self.domain_term(domain)?);
                        }
                        self.expect(&Tok::Punct(")"), "`)`")?;
                    }
                    return Ok(vec![Goal::Atom(Atom {
                        pred: Pred::new(&name, args.len()),
                        args,
                    })]);
                }
                // bare relation outside braces is also accepted
                Ok(vec![Goal::Prim(self.lin_relation()?)])
            }
        }
    }

    fn head_atom(&mut self, domain: Domain) -> Result<Atom> {
        let name = self
            .eat_ident()
            .ok_or_else(|| self.err("expected a predicate name"))?;
        let mut args = Vec::new();
        if self.eat(&Tok::Punct("(")) {
            args.push(self.domain_term(domain)?);
            while self.eat(&Tok::Punct(",")) {
                args.push(self.domain_term(domain)?);
            }
            self.expect(&Tok::Punct(")"), "`)`")?;
        }
        Ok(Atom {
            pred: Pred::new(&name, args.len()),
            args,
        })
    }
}

fn register_pred(
    preds: &mut BTreeMap<Arc<str>, usize>,
    declared: &BTreeMap<String, usize>,
    atom: &Atom,
) -> Result<()> {
    if let Some(&n) = declared.get(atom.pred.name.as_ref()) {
        if n != atom.args.len() {
            return Err(Error::Arity {
                pred: atom.pred.name.to_string(),
                declared: n,
                used: atom.args.len(),
            });
        }
    }
    match preds.get(atom.pred.name.as_ref()) {
        Some(&n) if n != atom.args.len() => Err(Error::Arity {
            pred: atom.pred.name.to_string(),
            declared: n,
            used: atom.args.len(),
        }),
        Some(_) => Ok(()),
        None => {
            preds.insert(atom.pred.name.clone(), atom.args.len());
            Ok(())
        }
    }
}

/// Parse a binary CLP program. `domain_override` wins over the
/// `:- domain(...)` directive; one of the two must be present.
///
/// This is purely syntactic; rule-constraint satisfiability is checked by
/// `load_program`.
pub fn parse_program(text: &str, domain_override: Option<Domain>) -> Result<Program> {
    let mut p = Parser::new(tokenize(text)?, VarGen::new());
    let mut declared: BTreeMap<String, usize> = BTreeMap::new();
    let mut preds: BTreeMap<Arc<str>, usize> = BTreeMap::new();
    let mut rules = Vec::new();

    loop {
        if p.at(&Tok::Eof) {
            break;
        }
        p.begin_clause();
        if p.eat(&Tok::Neck) {
            // directive
            let name = p.eat_ident().ok_or_else(|| p.err("expected a directive"))?;
            match name.as_str() {
                "domain" => {
                    p.expect(&Tok::Punct("("), "`(`")?;
                    let d = p.eat_ident().ok_or_else(|| p.err("expected a domain name"))?;
                    let d = match d.as_str() {
                        "term" => Domain::Term,
                        "rlin" => Domain::Rlin,
                        other => return Err(p.err(format!("unknown domain `{other}`"))),
                    };
                    p.expect(&Tok::Punct(")"), "`)`")?;
                    if !rules.is_empty() {
                        return Err(p.err("the domain directive must come before all clauses"));
                    }
                    if p.domain.is_none() {
                        p.domain = Some(d);
                    }
                }
                "pred" => {
                    let pr = p.eat_ident().ok_or_else(|| p.err("expected a predicate name"))?;
                    p.expect(&Tok::Op("/"), "`/`")?;
                    let n = match &p.cur().tok {
                        Tok::Num(r) if r.is_integer() => {
                            let n = r.to_integer();
                            p.pos += 1;
                            usize::try_from(n).map_err(|_| p.err("bad arity"))?
                        }
                        _ => return Err(p.err("expected an arity")),
                    };
                    declared.insert(pr, n);
                }
                other => return Err(p.err(format!("unknown directive `{other}`"))),
            }
            p.expect(&Tok::Dot, "`.`")?;
            continue;
        }

        // CLI override wins, then the directive; plain logic programs
        // (no directive) are Term programs.
        let domain = domain_override.or(p.domain).unwrap_or(Domain::Term);

        let head = p.head_atom(domain)?;
        register_pred(&mut preds, &declared, &head)?;
        let mut constraint = Vec::new();
        let mut body_atoms = Vec::new();
        if p.eat(&Tok::Neck) {
            loop {
                for g in p.goal(domain)? {
                    match g {
                        Goal::Atom(a) => body_atoms.push(a),
                        Goal::Prim(c) => constraint.push(c),
                    }
                }
                if !p.eat(&Tok::Punct(",")) {
                    break;
                }
            }
        }
        p.expect(&Tok::Dot, "`.`")?;
        if body_atoms.len() != 1 {
            return Err(p.err(format!(
                "binary rules need exactly one body atom, found {} (use `unfold` for general programs)",
                body_atoms.len()
            )));
        }
        let body = body_atoms.pop().unwrap();
        register_pred(&mut preds, &declared, &body)?;
        rules.push(Rule {
            head,
            constraint: Constraint(constraint),
            body,
        });
    }

    let domain = domain_override.or(p.domain).unwrap_or(Domain::Term);
    // declared-but-unused predicates still count as declared
    for (name, n) in &declared {
        preds.entry(Arc::from(name.as_str())).or_insert(*n);
    }
    let prog = Program {
        domain,
        rules,
        preds,
        var_bound: p.gen.bound(),
    };
    check_arities(&prog)?;
    Ok(prog)
}

/// Parse a general (non-binary) logic program over the Term domain, the
/// input format of the binary unfolder. Facts and multi-atom bodies are
/// allowed; constraints are not.
pub fn parse_general_program(text: &str) -> Result<GeneralProgram> {
    let mut p = Parser::new(tokenize(text)?, VarGen::new());
    let mut declared: BTreeMap<String, usize> = BTreeMap::new();
    let mut preds: BTreeMap<Arc<str>, usize> = BTreeMap::new();
    let mut clauses = Vec::new();
    loop {
        if p.at(&Tok::Eof) {
            break;
        }
        p.begin_clause();
        if p.eat(&Tok::Neck) {
            let name = p.eat_ident().ok_or_else(|| p.err("expected a directive"))?;
            match name.as_str() {
                "domain" => {
                    p.expect(&Tok::Punct("("), "`(`")?;
                    let d = p.eat_ident().ok_or_else(|| p.err("expected a domain name"))?;
                    if d != "term" {
                        return Err(p.err("general programs are Term-domain only"));
                    }
                    p.expect(&Tok::Punct(")"), "`)`")?;
                }
                "pred" => {
                    let pr = p.eat_ident().ok_or_else(|| p.err("expected a predicate name"))?;
                    p.expect(&Tok::Op("/"), "`/`")?;
                    let n = match &p.cur().tok {
                        Tok::Num(r) if r.is_integer() => {
                            let n = r.to_integer();
                            p.pos += 1;
                            usize::try_from(n).map_err(|_| p.err("bad arity"))?
                        }
                        _ => return Err(p.err("expected an arity")),
                    };
                    declared.insert(pr, n);
                }
                other => return Err(p.err(format!("unknown directive `{other}`"))),
            }
            p.expect(&Tok::Dot, "`.`")?;
            continue;
        }
        let head = p.head_atom(Domain::Term)?;
        register_pred(&mut preds, &declared, &head)?;
        let mut body = Vec::new();
        if p.eat(&Tok::Neck) {
            loop {
                for g in p.goal(Domain::Term)? {
                    match g {
                        Goal::Atom(a) => body.push(a),
                        Goal::Prim(_) => {
                            return Err(p.err("constraints are not allowed in general programs"))
                        }
                    }
                }
                if !p.eat(&Tok::Punct(",")) {
                    break;
                }
            }
        }
        p.expect(&Tok::Dot, "`.`")?;
        for a in &body {
            register_pred(&mut preds, &declared, a)?;
        }
        clauses.push(GeneralClause { head, body });
    }
    Ok(GeneralProgram {
        clauses,
        preds,
        var_bound: p.gen.bound(),
    })
}

/// Parse a query `atom | constraints` (constraint part optional) against
/// the given predicate table.
pub fn parse_query(
    text: &str,
    domain: Domain,
    preds: &BTreeMap<Arc<str>, usize>,
    gen: &mut VarGen,
) -> Result<Query> {
    let mut p = Parser::new(tokenize(text)?, gen.clone());
    let atom = p.head_atom(domain)?;
    match preds.get(atom.pred.name.as_ref()) {
        Some(&n) if n == atom.args.len() => {}
        Some(&n) => {
            return Err(Error::Arity {
                pred: atom.pred.name.to_string(),
                declared: n,
                used: atom.args.len(),
            })
        }
        None => {
            return Err(Error::invalid(format!(
                "undeclared predicate {}",
                atom.pred.name
            )))
        }
    }
    let mut prims = Vec::new();
    if p.eat(&Tok::Punct("|")) {
        loop {
            if p.eat(&Tok::Punct("{")) {
                if !p.at(&Tok::Punct("}")) {
                    prims.push(p.lin_relation()?);
                    while p.eat(&Tok::Punct(",")) {
                        prims.push(p.lin_relation()?);
                    }
                }
                p.expect(&Tok::Punct("}"), "`}`")?;
            } else {
                match domain {
                    Domain::Term => {
                        let lhs = p.tree_term()?;
                        p.expect(&Tok::Op("="), "`=`")?;
                        let rhs = p.tree_term()?;
                        prims.push(Prim::TreeEq(lhs, rhs));
                    }
                    Domain::Rlin => prims.push(p.lin_relation()?),
                }
            }
            if !p.eat(&Tok::Punct(",")) {
                break;
            }
        }
    }
    if !p.at(&Tok::Eof) && !p.at(&Tok::Dot) {
        return Err(p.err(format!("trailing input: {:?}", p.cur().tok)));
    }
    *gen = p.gen.clone();
    Ok(Query {
        atom,
        constraint: Constraint(prims),
    })
}

/// One entry of a filter literal: positions for one predicate plus the
/// optional delta query body (absent = open entry).
#[derive(Debug)]
pub struct FilterSpecEntry {
    pub pred: String,
    pub positions: Vec<usize>,
    pub delta: Option<(Vec<Term>, Constraint)>,
}

/// Parse `filter p: positions {1}, delta p_t(X) | {X >= 0}` with
/// `;`-separated entries. `delta ... open` or omitting the delta clause
/// yields an open entry.
pub fn parse_filter_literal(
    text: &str,
    domain: Domain,
    gen: &mut VarGen,
) -> Result<Vec<FilterSpecEntry>> {
    let mut p = Parser::new(tokenize(text)?, gen.clone());
    let mut entries = Vec::new();
    loop {
        match p.eat_ident() {
            Some(kw) if kw == "filter" => {}
            _ => return Err(p.err("expected `filter`")),
        }
        let pred = p.eat_ident().ok_or_else(|| p.err("expected a predicate name"))?;
        p.expect(&Tok::Punct(":"), "`:`")?;
        match p.eat_ident() {
            Some(kw) if kw == "positions" => {}
            _ => return Err(p.err("expected `positions`")),
        }
        p.expect(&Tok::Punct("{"), "`{`")?;
        let mut positions = Vec::new();
        if !p.at(&Tok::Punct("}")) {
            loop {
                match &p.cur().tok {
                    Tok::Num(r) if r.is_integer() => {
                        let n = usize::try_from(r.to_integer())
                            .map_err(|_| p.err("bad position"))?;
                        p.pos += 1;
                        positions.push(n);
                    }
                    _ => return Err(p.err("expected a position number")),
                }
                if !p.eat(&Tok::Punct(",")) {
                    break;
                }
            }
        }
        p.expect(&Tok::Punct("}"), "`}`")?;
        positions.sort_unstable();
        positions.dedup();

        let mut delta = None;
        if p.eat(&Tok::Punct(",")) {
            match p.eat_ident() {
                Some(kw) if kw == "delta" => {}
                _ => return Err(p.err("expected `delta`")),
            }
            if let Tok::Ident(kw) = &p.cur().tok {
                if kw == "open" {
                    p.pos += 1;
                    // explicit open entry
                    entries.push(FilterSpecEntry {
                        pred,
                        positions,
                        delta: None,
                    });
                    if p.eat(&Tok::Punct(";")) {
                        continue;
                    }
                    break;
                }
            }
            // the delta atom's name is decorative; arity must match |positions|
            let atom = p.head_atom(domain)?;
            let mut prims = Vec::new();
            if p.eat(&Tok::Punct("|")) {
                loop {
                    if p.eat(&Tok::Punct("{")) {
                        if !p.at(&Tok::Punct("}")) {
                            prims.push(p.lin_relation()?);
                            while p.eat(&Tok::Punct(",")) {
                                prims.push(p.lin_relation()?);
                            }
                        }
                        p.expect(&Tok::Punct("}"), "`}`")?;
                    } else {
                        match domain {
                            Domain::Term => {
                                let lhs = p.tree_term()?;
                                p.expect(&Tok::Op("="), "`=`")?;
                                let rhs = p.tree_term()?;
                                prims.push(Prim::TreeEq(lhs, rhs));
                            }
                            Domain::Rlin => prims.push(p.lin_relation()?),
                        }
                    }
                    if !p.eat(&Tok::Punct(",")) {
                        break;
                    }
                }
            }
            delta = Some((atom.args, Constraint(prims)));
        }
        entries.push(FilterSpecEntry {
            pred,
            positions,
            delta,
        });
        if !p.eat(&Tok::Punct(";")) {
            break;
        }
    }
    if !p.at(&Tok::Eof) {
        return Err(p.err(format!("trailing input: {:?}", p.cur().tok)));
    }
    *gen = p.gen.clone();
    Ok(entries)
}
