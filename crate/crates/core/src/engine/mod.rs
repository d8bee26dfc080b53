//! The operational side: single derivation steps, bounded derivations,
//! loop witnessing by bounded search, and the lifting check.

mod unfold;

pub use unfold::binary_unfold;

use crate::domain;
use crate::error::{Error, Result};
use crate::lin::Limits;
use crate::syntax::{
    rename_apart_rule, variables_of, Constraint, Domain, HasVars, Prim, Program, Query, RelOp,
    Rule, Term, VarGen, Variable,
};
use std::collections::BTreeSet;

/// One derivation step: the renamed-apart input rule used and the query
/// it produced.
#[derive(Debug, Clone)]
pub struct DerivationStep {
    pub rule_idx: usize,
    pub input_rule: Rule,
    pub to: Query,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivationStatus {
    /// Stopped at the step budget; the derivation may well continue.
    Running,
    /// No rule applies to the last query.
    Failed,
    /// The (non-zero) step budget was consumed.
    ExhaustedBudget,
}

/// A finite prefix of a derivation.
#[derive(Debug, Clone)]
pub struct Derivation {
    pub start: Query,
    pub steps: Vec<DerivationStep>,
    pub status: DerivationStatus,
}

/// The constraint `s~' = u~ /\ c' /\ d` of a step, with equality flavored
/// by the domain.
fn step_constraint(domain: Domain, head_args: &[Term], query_args: &[Term], c: &Constraint, d: &Constraint) -> Constraint {
    let mut prims: Vec<Prim> = head_args
        .iter()
        .zip(query_args)
        .map(|(s, u)| match domain {
            Domain::Term => Prim::TreeEq(s.clone(), u.clone()),
            Domain::Rlin => Prim::Lin(s.clone(), RelOp::Eq, u.clone()),
        })
        .collect();
    prims.extend(c.0.iter().cloned());
    prims.extend(d.0.iter().cloned());
    Constraint(prims)
}

/// Attempt one derivation step from `s` through rule `r` (which must be
/// a rule for the predicate of `s`). The rule is renamed apart from `s`
/// and everything in `avoid`. Returns the step when the combined
/// constraint is satisfiable.
pub fn step(
    domain: Domain,
    s: &Query,
    rule_idx: usize,
    r: &Rule,
    avoid: &BTreeSet<Variable>,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<Option<DerivationStep>> {
    if s.rel() != &r.head.pred {
        return Err(Error::invalid(format!(
            "step: rule head {:?} does not match query predicate {:?}",
            r.head.pred,
            s.rel()
        )));
    }
    let mut avoid_all = avoid.clone();
    avoid_all.extend(s.vars());
    let rp = rename_apart_rule(r, &avoid_all, gen);
    let c = step_constraint(domain, &rp.head.args, &s.atom.args, &rp.constraint, &s.constraint);
    if !domain::solv(domain, &c, limits)? {
        return Ok(None);
    }
    Ok(Some(DerivationStep {
        rule_idx,
        input_rule: rp.clone(),
        to: Query::new(rp.body, c),
    }))
}

#[derive(Debug, Clone, Copy)]
pub struct DeriveOptions {
    /// Replace each derived query by a compacted set-equivalent one.
    pub compact: bool,
}

impl Default for DeriveOptions {
    fn default() -> Self {
        DeriveOptions { compact: false }
    }
}

/// Drive a derivation for at most `max_steps` steps, taking at each
/// query the first applicable rule in program order.
pub fn derive(
    p: &Program,
    start: &Query,
    max_steps: usize,
    opts: DeriveOptions,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<Derivation> {
    let mut steps: Vec<DerivationStep> = Vec::new();
    let mut current = start.clone();
    let mut avoid = start.vars();
    loop {
        if steps.len() == max_steps {
            let status = if max_steps == 0 {
                DerivationStatus::Running
            } else {
                DerivationStatus::ExhaustedBudget
            };
            return Ok(Derivation {
                start: start.clone(),
                steps,
                status,
            });
        }
        let mut took = None;
        for (idx, r) in p.rules.iter().enumerate() {
            if &r.head.pred != current.rel() {
                continue;
            }
            if let Some(st) = step(p.domain, &current, idx, r, &avoid, gen, limits)? {
                took = Some(st);
                break;
            }
        }
        match took {
            None => {
                return Ok(Derivation {
                    start: start.clone(),
                    steps,
                    status: DerivationStatus::Failed,
                })
            }
            Some(mut st) => {
                avoid.extend(st.input_rule.vars());
                avoid.extend(st.to.vars());
                if opts.compact {
                    st.to = domain::compact_query(p.domain, &st.to, gen, limits)?;
                    avoid.extend(st.to.vars());
                }
                current = st.to.clone();
                steps.push(st);
            }
        }
    }
}

/// Outcome of a bounded loop-witness search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WitnessOutcome {
    /// A derivation of the requested length exists.
    pub found: bool,
    /// The node budget ran out before the search space was exhausted;
    /// `found == false` is then inconclusive.
    pub budget_exhausted: bool,
}

/// Search for a derivation of length `depth` from `s`, backtracking over
/// rule choices, with a global budget on attempted steps. Queries are
/// compacted between steps; compaction preserves the query's denotation,
/// and applicability of a rule only depends on that denotation.
pub fn witness_loop(
    p: &Program,
    s: &Query,
    depth: usize,
    node_budget: usize,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<WitnessOutcome> {
    struct Ctx<'a> {
        p: &'a Program,
        limits: Limits,
        budget: usize,
        exhausted: bool,
    }
    fn dfs(
        ctx: &mut Ctx,
        q: &Query,
        remaining: usize,
        gen: &mut VarGen,
    ) -> Result<bool> {
        if remaining == 0 {
            return Ok(true);
        }
        let avoid = q.vars();
        for (idx, r) in ctx.p.rules.iter().enumerate() {
            if &r.head.pred != q.rel() {
                continue;
            }
            if ctx.budget == 0 {
                ctx.exhausted = true;
                return Ok(false);
            }
            ctx.budget -= 1;
            if let Some(st) = step(ctx.p.domain, q, idx, r, &avoid, gen, ctx.limits)? {
                let next = domain::compact_query(ctx.p.domain, &st.to, gen, ctx.limits)?;
                if dfs(ctx, &next, remaining - 1, gen)? {
                    return Ok(true);
                }
                if ctx.exhausted {
                    return Ok(false);
                }
            }
        }
        Ok(false)
    }
    let mut ctx = Ctx {
        p,
        limits,
        budget: node_budget,
        exhausted: false,
    };
    let start = domain::compact_query(p.domain, s, gen, limits)?;
    let found = dfs(&mut ctx, &start, depth, gen)?;
    Ok(WitnessOutcome {
        found,
        budget_exhausted: !found && ctx.exhausted,
    })
}

/// The lifting property on one step: if the step could be taken from the
/// specific query, the same rule applies to the more general one and
/// yields a more general result. Used as a structural sanity check.
pub fn lifting_check(
    p: &Program,
    general: &Query,
    specific: &Query,
    rule_idx: usize,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<bool> {
    let r = &p.rules[rule_idx];
    let avoid = variables_of(&[general as &dyn HasVars, specific as &dyn HasVars]);
    let from_specific = step(p.domain, specific, rule_idx, r, &avoid, gen, limits)?;
    let Some(spec_step) = from_specific else {
        // nothing to lift
        return Ok(true);
    };
    let from_general = step(p.domain, general, rule_idx, r, &avoid, gen, limits)?;
    let Some(gen_step) = from_general else {
        return Ok(false);
    };
    domain::more_general(p.domain, &gen_step.to, &spec_step.to, gen, limits)
}
