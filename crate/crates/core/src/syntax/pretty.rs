//! Printing back to the concrete syntax. `parse . pretty` is the identity
//! up to whitespace and variable renaming.

use super::*;
use std::collections::HashMap;

/// Assigns each variable a unique printable name, preferring its hint.
struct Namer {
    names: HashMap<u64, String>,
}

impl Namer {
    fn for_vars(vars: &BTreeSet<Variable>) -> Self {
        let mut names = HashMap::new();
        let mut used: HashMap<String, u64> = HashMap::new();
        for v in vars {
            let base = match v.hint() {
                Some(h) if !h.is_empty() && h != "_" => {
                    let mut s = h.to_string();
                    if !s.starts_with(|c: char| c.is_ascii_uppercase() || c == '_') {
                        s = format!("V{s}");
                    }
                    s
                }
                _ => format!("V{}", v.id()),
            };
            let name = if used.contains_key(&base) {
                format!("{base}_{}", v.id())
            } else {
                base
            };
            used.insert(name.clone(), v.id());
            names.insert(v.id(), name);
        }
        Namer { names }
    }

    fn name(&self, v: &Variable) -> String {
        self.names
            .get(&v.id())
            .cloned()
            .unwrap_or_else(|| format!("V{}", v.id()))
    }
}

fn write_term(out: &mut String, t: &Term, namer: &Namer, prec: u8) {
    match t {
        Term::Var(v) => out.push_str(&namer.name(v)),
        Term::Rat(r) => {
            if r.is_integer() {
                out.push_str(&r.to_integer().to_string());
            } else {
                out.push_str(&format!("{}/{}", r.numer(), r.denom()));
            }
        }
        Term::App(f, args) => match (f.name(), args.len()) {
            (".", 2) => write_list(out, t, namer),
            ("+" | "-", 2) => {
                // additive: prec 1
                if prec > 1 {
                    out.push('(');
                }
                write_term(out, &args[0], namer, 1);
                out.push_str(f.name());
                write_term(out, &args[1], namer, 2);
                if prec > 1 {
                    out.push(')');
                }
            }
            ("*" | "/", 2) => {
                if prec > 2 {
                    out.push('(');
                }
                write_term(out, &args[0], namer, 2);
                out.push_str(f.name());
                write_term(out, &args[1], namer, 3);
                if prec > 2 {
                    out.push(')');
                }
            }
            (name, 0) => out.push_str(name),
            (name, _) => {
                out.push_str(name);
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_term(out, a, namer, 0);
                }
                out.push(')');
            }
        },
    }
}

fn write_list(out: &mut String, t: &Term, namer: &Namer) {
    out.push('[');
    let mut cur = t;
    let mut first = true;
    loop {
        match cur {
            Term::App(f, args) if f.name() == "." && args.len() == 2 => {
                if !first {
                    out.push(',');
                }
                write_term(out, &args[0], namer, 0);
                first = false;
                cur = &args[1];
            }
            Term::App(f, args) if f.name() == "[]" && args.is_empty() => break,
            tail => {
                out.push('|');
                write_term(out, tail, namer, 0);
                break;
            }
        }
    }
    out.push(']');
}

fn atom_name(pred: &Pred) -> String {
    if pred.is_projected() {
        format!("{}_t", pred.name)
    } else {
        pred.name.to_string()
    }
}

fn write_atom(out: &mut String, a: &Atom, namer: &Namer) {
    out.push_str(&atom_name(&a.pred));
    if !a.args.is_empty() {
        out.push('(');
        for (i, t) in a.args.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_term(out, t, namer, 0);
        }
        out.push(')');
    }
}

/// Write constraint goals, grouping consecutive linear relations into one
/// `{...}` block so the output re-parses.
fn write_goals(out: &mut String, prims: &[Prim], namer: &Namer, mut sep: bool) {
    let mut i = 0;
    while i < prims.len() {
        if sep {
            out.push_str(", ");
        }
        sep = true;
        match &prims[i] {
            Prim::TreeEq(s, t) => {
                write_term(out, s, namer, 0);
                out.push_str(" = ");
                write_term(out, t, namer, 0);
                i += 1;
            }
            Prim::Lin(..) => {
                out.push('{');
                let mut first = true;
                while let Some(Prim::Lin(a, op, b)) = prims.get(i) {
                    if !first {
                        out.push_str(", ");
                    }
                    write_term(out, a, namer, 0);
                    out.push_str(&format!(" {} ", op.symbol()));
                    write_term(out, b, namer, 0);
                    first = false;
                    i += 1;
                }
                out.push('}');
            }
        }
    }
}

pub fn pretty_term(t: &Term) -> String {
    let namer = Namer::for_vars(&t.vars());
    let mut out = String::new();
    write_term(&mut out, t, &namer, 0);
    out
}

pub fn pretty_atom(a: &Atom) -> String {
    let namer = Namer::for_vars(&a.vars());
    let mut out = String::new();
    write_atom(&mut out, a, &namer);
    out
}

pub fn pretty_constraint(c: &Constraint) -> String {
    if c.is_true() {
        return "true".to_string();
    }
    let namer = Namer::for_vars(&c.vars());
    let mut out = String::new();
    write_goals(&mut out, &c.0, &namer, false);
    out
}

pub fn pretty_query(q: &Query) -> String {
    let namer = Namer::for_vars(&q.vars());
    let mut out = String::new();
    write_atom(&mut out, &q.atom, &namer);
    if !q.constraint.is_true() {
        out.push_str(" | ");
        write_goals(&mut out, &q.constraint.0, &namer, false);
    }
    out
}

pub fn pretty_rule(r: &Rule) -> String {
    let namer = Namer::for_vars(&r.vars());
    let mut out = String::new();
    write_atom(&mut out, &r.head, &namer);
    out.push_str(" :- ");
    write_goals(&mut out, &r.constraint.0, &namer, false);
    if !r.constraint.is_true() {
        out.push_str(", ");
    }
    write_atom(&mut out, &r.body, &namer);
    out.push('.');
    out
}

pub fn pretty_program(p: &Program) -> String {
    let mut out = String::new();
    out.push_str(&format!(":- domain({}).\n", p.domain.name()));
    for (name, arity) in &p.preds {
        out.push_str(&format!(":- pred {name}/{arity}.\n"));
    }
    for r in &p.rules {
        out.push_str(&pretty_rule(r));
        out.push('\n');
    }
    out
}
