//! Acceptance suite: one test per acceptance criterion, each printing a
//! single pass/fail line through the harness.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nontermclp_core::domain::more_general;
use nontermclp_core::engine::{lifting_check, step, witness_loop};
use nontermclp_core::filters::{check_dn, delta_more_general, filter_from_spec, satisfies, Filter, PositionSet};
use nontermclp_core::inference::{analyze, infer_loop_simple, AnalyzeOptions, CertKind};
use nontermclp_core::lin::{elim_quants, LinAtom, LinExpr, LinFormula, Limits, Rat, Rel};
use nontermclp_core::syntax::{
    parse_filter_literal, parse_program, parse_query, Domain, HasVars, Pred, Program, Query,
    VarGen, Variable,
};
use nontermclp_core::term::{ground_instances, term_more_general, Universe};
use num::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LIM: Limits = Limits::new(100_000);

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

fn load_corpus(name: &str) -> (Program, VarGen) {
    let text = std::fs::read_to_string(corpus(name)).unwrap();
    let p = nontermclp_core::load_program(&text, None, LIM).unwrap();
    let gen = VarGen::for_program(&p);
    (p, gen)
}

fn q(text: &str, p: &Program, gen: &mut VarGen) -> Query {
    parse_query(text, p.domain, &p.preds, gen).unwrap()
}

fn filt(text: &str, p: &Program, gen: &mut VarGen) -> Filter {
    let entries = parse_filter_literal(text, p.domain, gen).unwrap();
    filter_from_spec(p.domain, &entries, &p.preds, gen, LIM).unwrap()
}

/// Plain covering certifies the recursive list-concatenation clause and
/// a depth-100 derivation witnesses it, within a second.
#[test]
fn criterion_01_append_plain_certificate() {
    let started = Instant::now();
    let (p, mut gen) = load_corpus("append.pl");
    let opts = AnalyzeOptions { witness: true, ..AnalyzeOptions::default() };
    let report = analyze(&p, &opts).unwrap();
    assert_eq!(report.rules[0].verdict, "loops");
    assert!(report.rules[0].filter.is_none(), "plain covering suffices");
    let cert = &report.certificates[0];
    assert_eq!(cert.kind, CertKind::MoreGeneral);
    assert!(cert.query.starts_with("append(["), "{}", cert.query);
    assert_eq!(cert.witness_validated, Some(true));
    let head = p.rules[0].head_query();
    let w = witness_loop(&p, &head, 100, 100_000, &mut gen, LIM).unwrap();
    assert!(w.found);
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

/// The moving-counters rule needs a filter: plain covering fails, the
/// sign condition on position 1 is inferred and certified by quantifier
/// elimination, and the head query is certified looping with a witness.
#[test]
fn criterion_02_rlin_filter_certificate() {
    let started = Instant::now();
    let (p, mut gen) = load_corpus("ex6.clp");
    assert!(infer_loop_simple(Domain::Rlin, &p.rules[0], &mut gen, LIM)
        .unwrap()
        .is_none());
    let opts = AnalyzeOptions { witness: true, ..AnalyzeOptions::default() };
    let report = analyze(&p, &opts).unwrap();
    assert_eq!(report.rules[0].verdict, "loops");
    let literal = report.rules[0].filter.as_ref().expect("needs a filter");
    assert!(literal.contains("positions {1}"), "{literal}");
    assert_eq!(
        report.rules[0].dn,
        Some(nontermclp_core::filters::DnOutcome::CertifiedLog)
    );
    // the inferred condition on position 1 denotes exactly X >= 0
    let f = filt(literal, &p, &mut gen);
    let found = f.delta(&Pred::new("p", 2)).unwrap().clone();
    let mut want = q("p(Z, W) | {Z >= 0}", &p, &mut gen);
    want.atom = nontermclp_core::filters::project_atom(&want.atom, &[1]);
    assert!(more_general(Domain::Rlin, &want, &found, &mut gen, LIM).unwrap());
    assert!(more_general(Domain::Rlin, &found, &want, &mut gen, LIM).unwrap());
    // certified class is the head query with its rule constraint
    let cert = &report.certificates[0];
    assert!(cert.query.contains("p(X,Y)"), "{}", cert.query);
    assert!(cert.query.contains("X >= 0"), "{}", cert.query);
    assert!(cert.query.contains("Y =< 10"), "{}", cert.query);
    assert_eq!(cert.witness_validated, Some(true));
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

/// Over finite trees, the unconstrained position-1 filter is refuted for
/// the growing rule, while the shape condition f(_) is certified
/// syntactically and yields a witnessed looping query.
#[test]
fn criterion_03_term_shape_filter() {
    let (p, mut gen) = load_corpus("ex10.pl");
    let nr = nontermclp_core::syntax::normalize_rule(Domain::Term, &p.rules[0], &mut gen);

    let mut tau = PositionSet::new();
    tau.set(Pred::new("p", 1), [1].into_iter().collect()).unwrap();
    let open = Filter::open(tau, &mut gen);
    let open_verdict = check_dn(Domain::Term, &nr, &open, &mut gen, LIM).unwrap();
    assert_eq!(
        open_verdict.outcome,
        nontermclp_core::filters::DnOutcome::RefutedLog
    );

    let f = filt("filter p: positions {1}, delta p_t(f(A))", &p, &mut gen);
    let verdict = check_dn(Domain::Term, &nr, &f, &mut gen, LIM).unwrap();
    assert_eq!(
        verdict.outcome,
        nontermclp_core::filters::DnOutcome::CertifiedSyn
    );

    let opts = AnalyzeOptions { witness: true, ..AnalyzeOptions::default() };
    let report = analyze(&p, &opts).unwrap();
    assert_eq!(report.rules[0].verdict, "loops");
    let cert = &report.certificates[0];
    assert!(cert.query.contains("p(X)"), "{}", cert.query);
    assert!(cert.query.contains("X = f(A)"), "{}", cert.query);
    assert!(cert.query.contains("Y = f(f(A))"), "{}", cert.query);
    assert_eq!(cert.witness_validated, Some(true));
}

/// The `check` command reports the logical/syntactic split exactly: the
/// flat rule with a vanishing second argument is certified logically
/// while the syntactic conditions 2-4 all fail.
#[test]
fn criterion_04_dnlog_without_dnsyn() {
    let out = Command::new(env!("CARGO_BIN_EXE_nontermclp"))
        .args([
            "check",
            corpus("dnlog_not_dnsyn.clp").to_str().unwrap(),
            "--filter",
            "filter p: positions {1}, delta p_t(X) | {X >= 0}",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("certified-log"), "{text}");
    assert!(text.contains("DNsyn2: false"), "{text}");
    assert!(text.contains("DNsyn3: false"), "{text}");
    assert!(text.contains("DNsyn4: false"), "{text}");
}

/// The covering fixtures decide as stated in both directions, and the
/// tree decision agrees with a bounded grounding oracle on 200 random
/// pairs without a single disagreement.
#[test]
fn criterion_05_covering_fixtures_and_oracle() {
    let (p, mut gen) = load_corpus("ex10.pl");
    // universal query covers any instance, never the other way round
    let univ = q("p(X)", &p, &mut gen);
    let inst = q("p(f(Y))", &p, &mut gen);
    assert!(term_more_general(&univ, &inst, &mut gen).unwrap());
    assert!(!term_more_general(&inst, &univ, &mut gen).unwrap());
    // one application of f covers two
    let f1 = q("p(f(X))", &p, &mut gen);
    let f2 = q("p(f(f(X)))", &p, &mut gen);
    assert!(term_more_general(&f1, &f2, &mut gen).unwrap());
    assert!(!term_more_general(&f2, &f1, &mut gen).unwrap());
    // the looser linear bound covers the tighter one
    let (pr, mut rgen) = load_corpus("ex6.clp");
    let loose = q("p(X, Y) | {Y <= X + 2}", &pr, &mut rgen);
    let tight = q("p(X, Y) | {Y <= X + 1}", &pr, &mut rgen);
    assert!(more_general(Domain::Rlin, &loose, &tight, &mut rgen, LIM).unwrap());
    assert!(!more_general(Domain::Rlin, &tight, &loose, &mut rgen, LIM).unwrap());

    // grounding oracle: exact decision vs bounded-set inclusion
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = Universe::new(vec![("a".into(), 0), ("g".into(), 1)], 3);
    let pred = Pred::new("p", 2);
    let mut gen2 = VarGen::starting_at(50_000);
    let mut disagreements = 0;
    let mut checked = 0;
    for _ in 0..200 {
        let q1 = random_tree_query(&pred, &mut rng, &mut gen2);
        let q2 = random_tree_query(&pred, &mut rng, &mut gen2);
        let exact = term_more_general(&q1, &q2, &mut gen2).unwrap();
        let s1 = ground_instances(&q1, &u).unwrap();
        let s2 = ground_instances(&q2, &u).unwrap();
        if s2.is_empty() {
            continue;
        }
        checked += 1;
        if exact != s2.is_subset(&s1) {
            disagreements += 1;
        }
    }
    assert!(checked >= 100, "only {checked} informative pairs");
    assert_eq!(disagreements, 0);
}

fn random_tree_query(pred: &Pred, rng: &mut ChaCha8Rng, gen: &mut VarGen) -> Query {
    fn t(rng: &mut ChaCha8Rng, gen: &mut VarGen, depth: usize) -> nontermclp_core::syntax::Term {
        use nontermclp_core::syntax::Term;
        if depth == 0 || rng.gen_bool(0.3) {
            if rng.gen_bool(0.5) {
                Term::Var(gen.fresh(None))
            } else {
                Term::constant("a")
            }
        } else {
            Term::app("g", vec![t(rng, gen, depth - 1)])
        }
    }
    Query::new(
        nontermclp_core::syntax::Atom::new(
            pred.clone(),
            vec![t(rng, gen, 2), t(rng, gen, 2)],
        ),
        nontermclp_core::syntax::Constraint::truth(),
    )
}

/// Lifting: whenever a rule applies to a query, it applies to any more
/// general one and the results stay in the covering relation. 500
/// randomized trials per domain, all passing.
#[test]
fn criterion_06_lifting() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    let p = parse_program("p(f(X), Y) :- p(X, g(Y)).", Some(Domain::Term)).unwrap();
    let mut gen = VarGen::starting_at(10_000);
    for _ in 0..500 {
        let spec_text = format!(
            "p({}, {})",
            ["f(a)", "f(f(a))", "f(X)", "f(g(a))", "Z"][rng.gen_range(0..5)],
            ["a", "Y", "g(Y)", "g(g(a))"][rng.gen_range(0..4)]
        );
        let spec = q(&spec_text, &p, &mut gen);
        let general = q("p(U, V)", &p, &mut gen);
        assert!(more_general(Domain::Term, &general, &spec, &mut gen, LIM).unwrap());
        assert!(lifting_check(&p, &general, &spec, 0, &mut gen, LIM).unwrap());
    }

    let pr = parse_program("p(X, Y) :- {X >= 0}, p(X + 1, Y).", Some(Domain::Rlin)).unwrap();
    let mut rgen = VarGen::starting_at(10_000);
    for _ in 0..500 {
        let a = rng.gen_range(-3i64..=3);
        let b = a + rng.gen_range(0i64..=3);
        let c = rng.gen_range(-3i64..=3);
        let general = q(&format!("p(X, Y) | {{X >= {a}}}"), &pr, &mut rgen);
        let spec = q(&format!("p(X, Y) | {{X >= {b}, Y =< {c}}}"), &pr, &mut rgen);
        assert!(more_general(Domain::Rlin, &general, &spec, &mut rgen, LIM).unwrap());
        assert!(lifting_check(&pr, &general, &spec, 0, &mut rgen, LIM).unwrap());
    }
}

/// Certified filters really are derivation neutral: on 500 randomized
/// (rule, filter) instances per domain, replacing a query by a
/// filter-more-general one preserves the step with a filter-more-general
/// result. Every analyzer certificate over the corpus also passes a
/// depth-100 witness search.
#[test]
fn criterion_07_dn_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // finite trees: head shape f^m(_), body f^n(_) with n >= m
    for _ in 0..500 {
        let m = rng.gen_range(1..=3);
        let n = m + rng.gen_range(0..=2);
        let wrap = |inner: &str, k: usize| {
            let mut s = inner.to_string();
            for _ in 0..k {
                s = format!("f({s})");
            }
            s
        };
        let text = format!("p(X) :- X = {}, Y = {}, p(Y).", wrap("A", m), wrap("A", n));
        let p = parse_program(&text, Some(Domain::Term)).unwrap();
        let mut gen = VarGen::for_program(&p);
        let f = filt(
            &format!("filter p: positions {{1}}, delta p_t({})", wrap("B", m)),
            &p,
            &mut gen,
        );
        let nr = nontermclp_core::syntax::normalize_rule(Domain::Term, &p.rules[0], &mut gen);
        assert!(check_dn(Domain::Term, &nr, &f, &mut gen, LIM).unwrap().certified());

        let args = ["a", "f(a)", "B", "g(a)"];
        let s = q(&format!("p({})", wrap(args[rng.gen_range(0..4)], m)), &p, &mut gen);
        let s2 = q(&format!("p({})", wrap(args[rng.gen_range(0..4)], m)), &p, &mut gen);
        assert!(satisfies(Domain::Term, &s2, &f, &mut gen, LIM).unwrap());
        assert!(delta_more_general(Domain::Term, &s2, &s, &f, &mut gen, LIM).unwrap());
        let t = step(Domain::Term, &s, 0, &p.rules[0], &s2.vars(), &mut gen, LIM)
            .unwrap()
            .expect("step from the original query");
        let t2 = step(Domain::Term, &s2, 0, &p.rules[0], &t.to.vars(), &mut gen, LIM)
            .unwrap()
            .expect("step survives generalization");
        assert!(delta_more_general(Domain::Term, &t2.to, &t.to, &f, &mut gen, LIM).unwrap());
    }

    // linear arithmetic: guard X >= k, increment d >= 0
    for _ in 0..500 {
        let k = rng.gen_range(-2i64..=2);
        let d = rng.gen_range(0i64..=3);
        let text = format!("p(X, Y) :- {{X >= {k}}}, p(X + {d}, Y).");
        let p = parse_program(&text, Some(Domain::Rlin)).unwrap();
        let mut gen = VarGen::for_program(&p);
        let f = filt(
            &format!("filter p: positions {{1}}, delta p_t(Z) | {{Z >= {k}}}"),
            &p,
            &mut gen,
        );
        let nr = nontermclp_core::syntax::normalize_rule(Domain::Rlin, &p.rules[0], &mut gen);
        assert!(check_dn(Domain::Rlin, &nr, &f, &mut gen, LIM).unwrap().certified());

        let a = k + rng.gen_range(0i64..=3);
        let a2 = k + rng.gen_range(0i64..=3);
        let b = rng.gen_range(-3i64..=3);
        let s = q(&format!("p(X, Y) | {{X >= {a}, Y = {b}}}"), &p, &mut gen);
        let s2 = q(&format!("p(X, Y) | {{X >= {a2}, Y = {b}}}"), &p, &mut gen);
        assert!(delta_more_general(Domain::Rlin, &s2, &s, &f, &mut gen, LIM).unwrap());
        let t = step(Domain::Rlin, &s, 0, &p.rules[0], &s2.vars(), &mut gen, LIM)
            .unwrap()
            .expect("step from the original query");
        let t2 = step(Domain::Rlin, &s2, 0, &p.rules[0], &t.to.vars(), &mut gen, LIM)
            .unwrap()
            .expect("step survives generalization");
        assert!(delta_more_general(Domain::Rlin, &t2.to, &t.to, &f, &mut gen, LIM).unwrap());
    }

    // every certificate over the corpus carries a depth-100 witness
    for name in ["append.pl", "ex6.clp", "ex10.pl", "dnlog_not_dnsyn.clp", "propagate.pl", "nonloop.pl"] {
        let (p, _) = load_corpus(name);
        let opts = AnalyzeOptions { witness: true, ..AnalyzeOptions::default() };
        let report = analyze(&p, &opts).unwrap();
        for cert in &report.certificates {
            assert_eq!(cert.witness_validated, Some(true), "{name}: {}", cert.query);
        }
    }
}

/// Quantifier elimination agrees with grid evaluation on 1000 random
/// one-quantifier formulas over difference constraints. The grid is
/// complete for this family (interval endpoints land on integers, so
/// half-integer sampling decides each quantifier exactly).
#[test]
fn criterion_08_qe_differential() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut gen = VarGen::starting_at(0);
    let vars: Vec<Variable> = (0..4).map(|_| gen.fresh(None)).collect();

    let half_grid: Vec<Rat> = (-16..=16)
        .map(|i| BigRational::new(i.into(), 2.into()))
        .collect();

    for trial in 0..1000 {
        let free = 1 + (trial % 3); // 1..=3 free variables
        let bound = &vars[free];
        let n_atoms = rng.gen_range(1..=6);
        let make_conj = |rng: &mut ChaCha8Rng, n: usize| -> LinFormula {
            let atoms: Vec<LinFormula> = (0..n)
                .map(|_| {
                    // +/- v1 -/+ v2 + c  rel  0, unit coefficients only
                    let v1 = &vars[rng.gen_range(0..=free)];
                    let mut e = LinExpr::from_var(v1.clone());
                    if rng.gen_bool(0.7) {
                        let v2 = &vars[rng.gen_range(0..=free)];
                        e = e.sub(&LinExpr::from_var(v2.clone()));
                    }
                    let c = rng.gen_range(-2i64..=2);
                    e = e.add(&LinExpr::from_const(BigRational::from_integer(c.into())));
                    let rel = if rng.gen_bool(0.8) { Rel::Le } else { Rel::Eq };
                    LinFormula::Atom(LinAtom::new(e, rel))
                })
                .collect();
            LinFormula::and(atoms)
        };
        let body = if n_atoms >= 2 && rng.gen_bool(0.4) {
            let k = n_atoms / 2;
            LinFormula::or(vec![make_conj(&mut rng, k), make_conj(&mut rng, n_atoms - k)])
        } else {
            make_conj(&mut rng, n_atoms)
        };
        let formula = if rng.gen_bool(0.5) {
            LinFormula::exists(vec![bound.clone()], body)
        } else {
            LinFormula::forall(vec![bound.clone()], body)
        };

        let eliminated = elim_quants(&formula, LIM).unwrap();

        // every integer point of the free box
        let mut point = vec![-2i64; free];
        loop {
            let val: BTreeMap<Variable, Rat> = vars[..free]
                .iter()
                .cloned()
                .zip(point.iter().map(|&x| BigRational::from_integer(x.into())))
                .collect();
            let direct = formula.eval_over_grid(&val, &half_grid).unwrap();
            let via_qe = eliminated.eval_over_grid(&val, &half_grid).unwrap();
            assert_eq!(direct, via_qe, "trial {trial} at {point:?}");
            // advance the odometer
            let mut i = 0;
            loop {
                if i == free {
                    break;
                }
                point[i] += 1;
                if point[i] <= 2 {
                    break;
                }
                point[i] = -2;
                i += 1;
            }
            if i == free {
                break;
            }
        }
    }
    assert!(started.elapsed().as_secs_f64() < 60.0, "took {:?}", started.elapsed());
}

/// With an unconstrained filter, the filtered relation is exactly plain
/// covering of the complementary projections: 200 random pairs per
/// domain, exact agreement.
#[test]
fn criterion_09_open_filter_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for domain in [Domain::Term, Domain::Rlin] {
        let (text, dsl): (&str, fn(&mut ChaCha8Rng) -> String) = match domain {
            Domain::Term => ("p(X, Y) :- p(X, Y).", |rng| {
                let pick = |rng: &mut ChaCha8Rng| ["X", "Y", "a", "g(X)", "g(a)"][rng.gen_range(0..5)];
                let (a, b) = (pick(rng), pick(rng));
                let c = ["", " | Z = g(X)"][rng.gen_range(0..2)];
                format!("p({a}, {b}){c}")
            }),
            Domain::Rlin => (":- domain(rlin).\np(X, Y) :- p(X, Y).", |rng| {
                let pick = |rng: &mut ChaCha8Rng| ["X", "Y", "0", "X + 1"][rng.gen_range(0..4)];
                let (a, b) = (pick(rng), pick(rng));
                let c = ["", " | {X >= 0}", " | {X <= Y}", " | {Y = 2}"][rng.gen_range(0..4)];
                format!("p({a}, {b}){c}")
            }),
        };
        let p = parse_program(text, None).unwrap();
        let mut gen = VarGen::starting_at(20_000);
        let mut tau = PositionSet::new();
        tau.set(Pred::new("p", 2), [1].into_iter().collect()).unwrap();
        let f = Filter::open(tau.clone(), &mut gen);
        let co = tau.complement().positions(&Pred::new("p", 2));
        for _ in 0..200 {
            let q1 = q(&dsl(&mut rng), &p, &mut gen);
            let q2 = q(&dsl(&mut rng), &p, &mut gen);
            let filtered = delta_more_general(domain, &q1, &q2, &f, &mut gen, LIM).unwrap();
            let plain = more_general(
                domain,
                &nontermclp_core::filters::project_query(&q1, &co),
                &nontermclp_core::filters::project_query(&q2, &co),
                &mut gen,
                LIM,
            )
            .unwrap();
            assert_eq!(filtered, plain, "{domain:?}: {q1:?} vs {q2:?}");
        }
    }
}

/// Two seeded runs over the whole corpus emit byte-identical JSON once
/// the wall-clock field is removed.
#[test]
fn criterion_10_determinism() {
    let files: Vec<String> = ["append.pl", "ex6.clp", "ex10.pl", "dnlog_not_dnsyn.clp", "propagate.pl", "nonloop.pl"]
        .iter()
        .map(|n| corpus(n).to_str().unwrap().to_string())
        .collect();
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_nontermclp"))
            .arg("analyze")
            .args(&files)
            .args(["--seed", "7", "--witness", "--format", "json"])
            .output()
            .unwrap();
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        // strip the timing field, keep everything else byte-exact
        serde_json::Deserializer::from_str(&text)
            .into_iter::<serde_json::Value>()
            .map(|doc| {
                let mut v = doc.unwrap();
                v.as_object_mut().unwrap().remove("wall_ms");
                serde_json::to_string(&v).unwrap()
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let first = run();
    let second = run();
    assert!(!first.is_empty());
    assert_eq!(first.into_bytes(), second.into_bytes());
}
