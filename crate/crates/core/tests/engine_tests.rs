//! Derivation steps, bounded derivations, loop witnessing, the lifting
//! property, and the binary unfolding of general programs.

use std::collections::BTreeSet;

use nontermclp_core::domain::{compact_query, more_general};
use nontermclp_core::engine::{
    binary_unfold, derive, lifting_check, step, witness_loop, DerivationStatus, DeriveOptions,
};
use nontermclp_core::lin::Limits;
use nontermclp_core::syntax::{
    parse_general_program, parse_program, parse_query, Domain, HasVars, Program, Query, VarGen,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LIM: Limits = Limits::new(100_000);

const APPEND: &str = "append([], Ys, Ys) :- q(Ys).\nappend([X | Xs], Ys, [X | Zs]) :- append(Xs, Ys, Zs).";

fn load(text: &str, domain: Domain) -> (Program, VarGen) {
    let p = parse_program(text, Some(domain)).unwrap();
    let gen = VarGen::for_program(&p);
    (p, gen)
}

fn q(text: &str, p: &Program, gen: &mut VarGen) -> Query {
    parse_query(text, p.domain, &p.preds, gen).unwrap()
}

#[test]
fn step_renames_the_rule_apart() {
    let (p, mut gen) = load("p(f(X)) :- p(X).", Domain::Term);
    let s = q("p(X)", &p, &mut gen);
    let st = step(Domain::Term, &s, 0, &p.rules[0], &BTreeSet::new(), &mut gen, LIM)
        .unwrap()
        .expect("applicable");
    let shared: Vec<_> = st.input_rule.vars().intersection(&s.vars()).cloned().collect();
    assert!(shared.is_empty(), "input rule shares {:?} with the query", shared);
    assert_eq!(st.to.rel().name.as_ref(), "p");
}

#[test]
fn step_requires_matching_predicate() {
    let (p, mut gen) = load("p(X) :- q(X).\nq(X) :- p(X).", Domain::Term);
    let s = q("q(a)", &p, &mut gen);
    assert!(step(Domain::Term, &s, 0, &p.rules[0], &BTreeSet::new(), &mut gen, LIM).is_err());
}

#[test]
fn step_fails_on_clash() {
    let (p, mut gen) = load("p(a) :- p(a).", Domain::Term);
    let s = q("p(b)", &p, &mut gen);
    let st = step(Domain::Term, &s, 0, &p.rules[0], &BTreeSet::new(), &mut gen, LIM).unwrap();
    assert!(st.is_none());
}

#[test]
fn rlin_step_accumulates_the_constraint() {
    let (p, mut gen) = load("p(X, Y) :- {X >= 0, Y <= 10}, p(X + 1, Y + 1).", Domain::Rlin);
    let s = q("p(X, Y) | {X >= 0, Y <= 10}", &p, &mut gen);
    let st = step(Domain::Rlin, &s, 0, &p.rules[0], &BTreeSet::new(), &mut gen, LIM)
        .unwrap()
        .expect("applicable");
    // the derived query is set-equivalent to <p(X',Y') | X'>=1 /\ Y'<=11>
    let want = q("p(A, B) | {A >= 1, B <= 11}", &p, &mut gen);
    let got = compact_query(Domain::Rlin, &st.to, &mut gen, LIM).unwrap();
    assert!(more_general(Domain::Rlin, &want, &got, &mut gen, LIM).unwrap());
    assert!(more_general(Domain::Rlin, &got, &want, &mut gen, LIM).unwrap());
}

#[test]
fn derive_follows_program_order() {
    let (p, mut gen) = load(APPEND, Domain::Term);
    let s = q("append(X, Y, Z)", &p, &mut gen);
    // first applicable rule is the base clause, which moves to q/1
    // where no rule applies
    let d = derive(&p, &s, 3, DeriveOptions::default(), &mut gen, LIM).unwrap();
    assert_eq!(d.steps.len(), 1);
    assert_eq!(d.steps[0].rule_idx, 0);
    assert_eq!(d.steps[0].to.rel().name.as_ref(), "q");
    assert_eq!(d.status, DerivationStatus::Failed);
    // a query that rules out the base clause runs the recursion down
    let s2 = q("append([A, B, C | As], Y, Z)", &p, &mut gen);
    let d2 = derive(&p, &s2, 3, DeriveOptions::default(), &mut gen, LIM).unwrap();
    assert_eq!(d2.steps.len(), 3);
    assert!(d2.steps.iter().all(|st| st.rule_idx == 1));
    assert_eq!(d2.status, DerivationStatus::ExhaustedBudget);
}

#[test]
fn derive_zero_budget_reports_running() {
    let (p, mut gen) = load(APPEND, Domain::Term);
    let s = q("append(X, Y, Z)", &p, &mut gen);
    let d = derive(&p, &s, 0, DeriveOptions::default(), &mut gen, LIM).unwrap();
    assert!(d.steps.is_empty());
    assert_eq!(d.status, DerivationStatus::Running);
}

#[test]
fn derive_reports_failure_when_nothing_applies() {
    let (p, mut gen) = load("p(a) :- p(a).", Domain::Term);
    let s = q("p(b)", &p, &mut gen);
    let d = derive(&p, &s, 5, DeriveOptions::default(), &mut gen, LIM).unwrap();
    assert!(d.steps.is_empty());
    assert_eq!(d.status, DerivationStatus::Failed);
}

#[test]
fn witness_finds_long_derivations() {
    let (p, mut gen) = load("append([X | Xs], Ys, [X | Zs]) :- append(Xs, Ys, Zs).", Domain::Term);
    let s = q("append(X, Y, Z)", &p, &mut gen);
    let w = witness_loop(&p, &s, 100, 100_000, &mut gen, LIM).unwrap();
    assert!(w.found);

    let (p2, mut gen2) = load("p(X, Y) :- {X >= 0, Y <= 10}, p(X + 1, Y + 1).", Domain::Rlin);
    let s2 = q("p(X, Y) | {X >= 0, Y <= 10}", &p2, &mut gen2);
    let w2 = witness_loop(&p2, &s2, 100, 100_000, &mut gen2, LIM).unwrap();
    assert!(w2.found);
}

#[test]
fn witness_refuses_when_no_step_exists() {
    let (p, mut gen) = load("p(f(X)) :- p(X).", Domain::Term);
    let s = q("p(a)", &p, &mut gen);
    let w = witness_loop(&p, &s, 1, 100_000, &mut gen, LIM).unwrap();
    assert!(!w.found);
    assert!(!w.budget_exhausted);
}

#[test]
fn witness_backtracks_over_rule_choices() {
    // rule 0 leads to a dead end after one step; rule 1 loops
    let text = "p(X) :- q(X).\np(X) :- p(X).\nq(a) :- r(a).";
    let (p, mut gen) = load(text, Domain::Term);
    let s = q("p(V)", &p, &mut gen);
    let w = witness_loop(&p, &s, 10, 100_000, &mut gen, LIM).unwrap();
    assert!(w.found);
}

#[test]
fn witness_depth_is_monotone() {
    let (p, mut gen) = load("p(f(X)) :- p(X).", Domain::Term);
    // p(f(f(a))) admits exactly two steps
    let s = q("p(f(f(a)))", &p, &mut gen);
    assert!(witness_loop(&p, &s, 1, 100_000, &mut gen, LIM).unwrap().found);
    assert!(witness_loop(&p, &s, 2, 100_000, &mut gen, LIM).unwrap().found);
    assert!(!witness_loop(&p, &s, 3, 100_000, &mut gen, LIM).unwrap().found);
}

#[test]
fn witness_reports_budget_exhaustion() {
    let (p, mut gen) = load("p(X) :- p(f(X)).", Domain::Term);
    let s = q("p(a)", &p, &mut gen);
    let w = witness_loop(&p, &s, 50, 3, &mut gen, LIM).unwrap();
    assert!(!w.found);
    assert!(w.budget_exhausted);
}

#[test]
fn lifting_holds_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x11F7);
    let (p, mut gen) = load("p(f(X), Y) :- p(X, g(Y)).", Domain::Term);
    let mut tried = 0;
    for _ in 0..200 {
        let spec_text = format!(
            "p(f({}), {})",
            ["a", "f(a)", "X", "g(a)"][rng.gen_range(0..4)],
            ["a", "Y", "g(Y)"][rng.gen_range(0..3)]
        );
        let spec = q(&spec_text, &p, &mut gen);
        let general = q("p(f(X), Y)", &p, &mut gen);
        assert!(more_general(Domain::Term, &general, &spec, &mut gen, LIM).unwrap());
        assert!(lifting_check(&p, &general, &spec, 0, &mut gen, LIM).unwrap());
        tried += 1;
    }
    assert_eq!(tried, 200);
}

#[test]
fn unfold_keeps_binary_clauses() {
    let gp = parse_general_program("p(f(X)) :- p(X).").unwrap();
    let out = binary_unfold(&gp, 3).unwrap();
    assert_eq!(out.rules.len(), 1);
    let r = &out.rules[0];
    assert_eq!(r.head.pred.name.as_ref(), "p");
    assert_eq!(r.body.pred.name.as_ref(), "p");
}

#[test]
fn unfold_resolves_facts_inside_bodies() {
    // q is a fact, so p <- q, r unfolds to the binary clause p <- r
    let gp = parse_general_program("p(X) :- q(X), r(X).\nq(a).").unwrap();
    let out = binary_unfold(&gp, 2).unwrap();
    let printed: Vec<String> = out
        .rules
        .iter()
        .map(|r| format!("{:?}", r))
        .collect();
    assert!(
        printed.iter().any(|s| s.contains("p(X") && s.contains("q(")),
        "prefix clause missing: {printed:?}"
    );
    assert!(
        printed.iter().any(|s| s.contains("p(a)") && s.contains("r(a)")),
        "fact-resolved clause missing: {printed:?}"
    );
}

#[test]
fn unfold_output_reparses_as_a_binary_program() {
    let gp = parse_general_program(
        "append([], Ys, Ys).\nappend([X | Xs], Ys, [X | Zs]) :- append(Xs, Ys, Zs).\n\
         q(Xs) :- append(Xs, [o], Zs), q(Zs).",
    )
    .unwrap();
    let out = binary_unfold(&gp, 3).unwrap();
    assert!(!out.rules.is_empty());
    let text = nontermclp_core::syntax::pretty_program(&out);
    let back = parse_program(&text, Some(Domain::Term)).unwrap();
    assert_eq!(back.rules.len(), out.rules.len());
    // the unfolding eventually exposes the direct recursion of q through
    // the base case of append: q([o | T]) <- q-something
    assert!(out
        .rules
        .iter()
        .any(|r| r.head.pred.name.as_ref() == "q"
            && r.body.pred.name.as_ref() == "q"));
}

#[test]
fn unfold_is_idempotent_on_saturated_programs() {
    let gp = parse_general_program("p(f(X)) :- p(X).").unwrap();
    let once = binary_unfold(&gp, 1).unwrap();
    let more = binary_unfold(&gp, 10).unwrap();
    assert_eq!(
        nontermclp_core::syntax::pretty_program(&once),
        nontermclp_core::syntax::pretty_program(&more)
    );
}
