use super::*;

fn term_program(text: &str) -> Program {
    parse_program(text, Some(Domain::Term)).expect("parse")
}

fn rlin_program(text: &str) -> Program {
    parse_program(text, Some(Domain::Rlin)).expect("parse")
}

#[test]
fn parses_recursive_term_rule() {
    let p = term_program("p(X) :- X = f(A), Y = f(f(A)), p(Y).");
    assert_eq!(p.rules.len(), 1);
    let r = &p.rules[0];
    assert!(r.is_recursive());
    assert_eq!(r.head.pred.name.as_ref(), "p");
    assert_eq!(r.constraint.0.len(), 2);
    assert!(matches!(r.constraint.0[0], Prim::TreeEq(..)));
}

#[test]
fn parses_rlin_rule_with_braced_constraint() {
    let p = rlin_program("p(X,Y) :- {X >= 0, Y =< 10}, p(X+1, Y+1).");
    let r = &p.rules[0];
    assert_eq!(r.constraint.0.len(), 2);
    assert!(matches!(r.constraint.0[0], Prim::Lin(_, RelOp::Ge, _)));
    assert!(matches!(r.constraint.0[1], Prim::Lin(_, RelOp::Le, _)));
}

#[test]
fn domain_directive_sets_domain() {
    let p = parse_program(":- domain(rlin).\np(X) :- {X > 0}, p(X).", None).unwrap();
    assert_eq!(p.domain, Domain::Rlin);
}

#[test]
fn domain_defaults_to_term() {
    let p = parse_program("p(X) :- p(X).", None).unwrap();
    assert_eq!(p.domain, Domain::Term);
}

#[test]
fn rejects_non_binary_clause() {
    assert!(parse_program("p(X) :- q(X), r(X).", Some(Domain::Term)).is_err());
    assert!(parse_program("p(X).", Some(Domain::Term)).is_err());
}

#[test]
fn rejects_arity_mismatch() {
    let r = parse_program("p(X) :- p(X, X).", Some(Domain::Term));
    assert!(matches!(r, Err(Error::Arity { .. })));
}

#[test]
fn list_sugar_desugars_to_dot_pairs() {
    let p = term_program("append(L,X,Y) :- L = [H|T], Y = [H|Z], append(T,X,Z).");
    let r = &p.rules[0];
    match &r.constraint.0[0] {
        Prim::TreeEq(_, rhs) => match rhs {
            Term::App(f, args) => {
                assert_eq!(f.0.as_ref(), ".");
                assert_eq!(args.len(), 2);
            }
            other => panic!("expected cons cell, got {:?}", other),
        },
        other => panic!("expected tree equation, got {:?}", other),
    }
}

#[test]
fn variables_scoped_per_clause() {
    let p = term_program("p(X) :- p(X).\nq(X) :- q(X).");
    let v0 = p.rules[0].head.args[0].as_var().unwrap().clone();
    let v1 = p.rules[1].head.args[0].as_var().unwrap().clone();
    assert_ne!(v0, v1, "same-named variables in different clauses differ");
}

#[test]
fn pretty_parse_round_trip_term() {
    let src = "p(X) :- X = f(A), Y = f(f(A)), p(Y).";
    let p1 = term_program(src);
    let printed = pretty_program(&p1);
    let p2 = term_program(&printed);
    assert_eq!(pretty_program(&p2), printed, "pretty is a fixpoint of parse∘pretty");
}

#[test]
fn pretty_parse_round_trip_rlin() {
    let src = ":- domain(rlin).\np(X,Y) :- {X >= 0, Y =< 10}, p(X+1, Y+1).";
    let p1 = parse_program(src, None).unwrap();
    let printed = pretty_program(&p1);
    let p2 = parse_program(&printed, None).unwrap();
    assert_eq!(pretty_program(&p2), printed);
}

#[test]
fn rename_apart_is_disjoint_and_structure_preserving() {
    let p = term_program("p(X) :- X = f(A), Y = f(f(A)), p(Y).");
    let mut gen = VarGen::for_program(&p);
    let r = &p.rules[0];
    let rp = rename_apart_rule(r, &r.vars(), &mut gen);
    assert!(r.vars().is_disjoint(&rp.vars()));
    assert_eq!(r.head.pred, rp.head.pred);
    assert_eq!(r.constraint.0.len(), rp.constraint.0.len());
}

#[test]
fn normalize_keeps_flat_rules_literal() {
    let p = term_program("p(X) :- X = f(A), Y = f(f(A)), p(Y).");
    let mut gen = VarGen::for_program(&p);
    let nr = normalize_rule(p.domain, &p.rules[0], &mut gen);
    // head/body args are already distinct disjoint variables: kept as-is
    assert_eq!(nr.constraint, p.rules[0].constraint);
    assert_eq!(nr.head_vars.len(), 1);
    assert_eq!(nr.body_vars.len(), 1);
}

#[test]
fn normalize_introduces_fresh_vars_for_compound_args() {
    let p = rlin_program("p(X,Y) :- {X >= 0, Y =< 10}, p(X+1, Y+1).");
    let mut gen = VarGen::for_program(&p);
    let nr = normalize_rule(p.domain, &p.rules[0], &mut gen);
    assert_eq!(nr.head_vars.len(), 2);
    assert_eq!(nr.body_vars.len(), 2);
    // 2 head + 2 body equations + 2 original constraints
    assert_eq!(nr.constraint.0.len(), 6);
    // freshly introduced variables are new
    for v in nr.head_vars.iter().chain(&nr.body_vars) {
        assert!(!p.rules[0].vars().contains(v) || p.rules[0].head.args.iter().any(|t| t.as_var() == Some(v)));
    }
}

#[test]
fn local_vars_of_flat_rule() {
    let p = term_program("p(X) :- X = f(A), Y = f(f(A)), p(Y).");
    let mut gen = VarGen::for_program(&p);
    let nr = normalize_rule(p.domain, &p.rules[0], &mut gen);
    let locals = local_vars(&nr);
    assert_eq!(locals.len(), 1, "only A is local");
}

#[test]
fn parse_query_accepts_constraint_suffix() {
    let p = rlin_program("p(X) :- {X >= 0}, p(X).");
    let mut gen = VarGen::for_program(&p);
    let q = parse_query("p(X) | {X >= 1}", p.domain, &p.preds, &mut gen).unwrap();
    assert_eq!(q.atom.args.len(), 1);
    assert_eq!(q.constraint.0.len(), 1);
}

#[test]
fn parse_query_rejects_unknown_predicate() {
    let p = term_program("p(X) :- p(X).");
    let mut gen = VarGen::for_program(&p);
    assert!(parse_query("q(X)", p.domain, &p.preds, &mut gen).is_err());
}

#[test]
fn filter_literal_parses_positions_and_delta() {
    let mut gen = VarGen::new();
    let entries =
        parse_filter_literal("filter p: positions {1}, delta p_t(X) | {X >= 0}", Domain::Rlin, &mut gen)
            .unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].pred, "p");
    assert_eq!(entries[0].positions, vec![1]);
    let (args, c) = entries[0].delta.as_ref().unwrap();
    assert_eq!(args.len(), 1);
    assert_eq!(c.0.len(), 1);
}

#[test]
fn filter_literal_open_entry() {
    let mut gen = VarGen::new();
    let entries =
        parse_filter_literal("filter p: positions {1,2}, delta open", Domain::Term, &mut gen).unwrap();
    assert_eq!(entries[0].positions, vec![1, 2]);
    assert!(entries[0].delta.is_none());
}

#[test]
fn general_program_parses_facts_and_long_bodies() {
    let gp = parse_general_program("q.\np :- q, r.\nr :- q.").unwrap();
    assert_eq!(gp.clauses.len(), 3);
    assert_eq!(gp.clauses[0].body.len(), 0);
    assert_eq!(gp.clauses[1].body.len(), 2);
}

#[test]
fn comments_and_whitespace_ignored() {
    let p = term_program("% a comment\np(X) :- p(X). % trailing\n");
    assert_eq!(p.rules.len(), 1);
}

#[test]
fn negative_and_fractional_literals() {
    let p = rlin_program("p(X) :- {X >= -1.5}, p(X - 0.5).");
    assert_eq!(p.rules.len(), 1);
}

#[test]
fn projected_preds_compare_by_positions() {
    let p = Pred::new("p", 3);
    assert_ne!(p.project(&[1]), p.project(&[2]));
    assert_eq!(p.project(&[1, 3]).arity, 2);
    assert_ne!(p.project(&[1]), p);
}
