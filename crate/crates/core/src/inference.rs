//! Loop inference: per-rule certificates, propagation across rules, and
//! the report produced by a full analysis.
//!
//! The soundness chain: a recursive rule whose body query covers its
//! head query loops outright; a recursive rule whose body query covers
//! the head query outside the filtered positions loops as well, provided
//! the filter is derivation neutral for the rule; and any rule whose
//! body query is covered by a known looping query contributes its head
//! query as a new looping query.

use crate::domain;
use crate::engine;
use crate::error::{Error, Result};
use crate::filters::{self, DnOutcome, DnVerdict, Filter, PositionSet};
use crate::lin::Limits;
use crate::syntax::{
    normalize_rule, pretty_query, pretty_rule, Domain, Pred, Program, Query, Rule,
    VarGen,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// A class of queries certified to loop: every query more general than
/// (or filter-more-general than, when a filter is attached) `query`
/// loops too.
#[derive(Debug, Clone)]
pub struct LoopClass {
    pub query: Query,
    pub filter: Option<Filter>,
}

/// Why a query loops: the rule chain from the base certificate.
#[derive(Debug, Clone)]
pub struct LoopCertificate {
    pub class: LoopClass,
    /// Rule indices, base rule first, propagation steps after it.
    pub chain: Vec<usize>,
    /// How the base rule was certified.
    pub kind: CertKind,
    /// Set when a bounded derivation of the requested length was found
    /// from the class query.
    pub witness_validated: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertKind {
    /// Body query more general than head query.
    MoreGeneral,
    /// Body query filter-more-general, filter derivation neutral.
    FilterMoreGeneral,
    /// Head query of a rule whose body is covered by a looping class.
    Propagated,
}

/// Analysis-wide knobs.
#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    /// Validate each certificate by searching a derivation of this length.
    pub witness: bool,
    pub witness_depth: usize,
    /// Maximum number of candidate filters per rule.
    pub filter_budget: usize,
    /// Atom cap for quantifier elimination.
    pub qe_cap: usize,
    /// Per-predicate cap on loop classes during propagation.
    pub class_cap: usize,
    /// Node budget for each witness search.
    pub witness_budget: usize,
    /// Recorded in the report; the analysis itself is deterministic.
    pub seed: u64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            witness: false,
            witness_depth: 100,
            filter_budget: 64,
            qe_cap: 100_000,
            class_cap: 16,
            witness_budget: 100_000,
            seed: 0,
        }
    }
}

/// Per-rule outcome in the report.
#[derive(Debug, Clone, Serialize)]
pub struct RuleVerdict {
    pub rule: usize,
    pub text: String,
    pub recursive: bool,
    /// "loops", "unknown", or "error: ..." when analysis of this rule
    /// aborted (other rules are still analyzed).
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dn: Option<DnOutcome>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub query: String,
    pub kind: CertKind,
    pub chain: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_validated: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Stats {
    pub rules_analyzed: usize,
    pub recursive_rules: usize,
    pub filters_tried: usize,
    pub dn_checks: usize,
    pub witness_searches: usize,
}

/// The result of analyzing a program. Serializes to stable JSON; the
/// wall-clock field is the only part that varies between runs on the
/// same input.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub program_digest: String,
    pub domain: Domain,
    pub seed: u64,
    pub rules: Vec<RuleVerdict>,
    pub certificates: Vec<CertificateReport>,
    pub stats: Stats,
    pub wall_ms: u128,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "program {} ({} domain), {} rules\n",
            &self.program_digest[..12.min(self.program_digest.len())],
            self.domain.name(),
            self.rules.len()
        ));
        for rv in &self.rules {
            out.push_str(&format!("rule {}: {}\n  -> {}", rv.rule, rv.text, rv.verdict));
            if let Some(f) = &rv.filter {
                out.push_str(&format!(" [{}]", f));
            }
            out.push('\n');
        }
        if self.certificates.is_empty() {
            out.push_str("no looping queries found\n");
        } else {
            out.push_str("looping queries:\n");
            for c in &self.certificates {
                out.push_str(&format!("  {}  (rules {:?}", c.query, c.chain));
                if let Some(w) = c.witness_validated {
                    out.push_str(if w { ", witnessed" } else { ", witness search failed" });
                }
                out.push_str(")\n");
            }
        }
        out
    }
}

fn digest(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    format!("{:x}", h.finalize())
}

/// The plain loop test on one recursive rule: the body query with the
/// rule constraint covers the head query with the same constraint.
pub fn infer_loop_simple(
    domain: Domain,
    r: &Rule,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<Option<LoopClass>> {
    if !r.is_recursive() {
        return Ok(None);
    }
    let head_q = r.head_query();
    let body_q = r.body_query();
    if domain::more_general(domain, &body_q, &head_q, gen, limits)? {
        Ok(Some(LoopClass {
            query: head_q,
            filter: None,
        }))
    } else {
        Ok(None)
    }
}

/// The filtered loop test: given a filter already certified derivation
/// neutral for the rule, check that the body query is filter-more-general
/// than the head query.
pub fn infer_loop_base(
    domain: Domain,
    r: &Rule,
    f: &Filter,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<Option<LoopClass>> {
    if !r.is_recursive() {
        return Ok(None);
    }
    let head_q = r.head_query();
    let body_q = r.body_query();
    if filters::delta_more_general(domain, &body_q, &head_q, f, gen, limits)? {
        Ok(Some(LoopClass {
            query: head_q,
            filter: Some(f.clone()),
        }))
    } else {
        Ok(None)
    }
}

/// Propagate looping classes backwards across rules to a fixpoint: when
/// a rule's body query is covered by a looping class, its head query
/// loops too. Classes set-equivalent to a known one for the same
/// predicate are dropped, and each predicate keeps at most `class_cap`
/// classes.
pub fn propagate(
    p: &Program,
    seeds: Vec<LoopCertificate>,
    class_cap: usize,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<Vec<LoopCertificate>> {
    let mut out: Vec<LoopCertificate> = Vec::new();
    let mut queue: Vec<usize> = Vec::new();
    for cert in seeds {
        out.push(cert);
        queue.push(out.len() - 1);
    }
    while let Some(i) = queue.pop() {
        let class = out[i].class.clone();
        let chain = out[i].chain.clone();
        for (idx, r) in p.rules.iter().enumerate() {
            if &r.body.pred != class.query.rel() {
                continue;
            }
            let body_q = r.body_query();
            let covered = match &class.filter {
                None => domain::more_general(p.domain, &class.query, &body_q, gen, limits)?,
                Some(f) => filters::delta_more_general(
                    p.domain, &class.query, &body_q, f, gen, limits,
                )?,
            };
            if !covered {
                continue;
            }
            let head_q = r.head_query();
            // the filter transfers only when it is derivation neutral
            // for this rule as well
            let filter = match &class.filter {
                Some(f) if covers_rule_preds(f, r) => {
                    let nr = normalize_rule(p.domain, r, gen);
                    let v = filters::check_dn(p.domain, &nr, f, gen, limits)?;
                    if v.certified() {
                        Some(f.clone())
                    } else {
                        None
                    }
                }
                _ => None,
            };
            let cand = LoopClass {
                query: head_q,
                filter,
            };
            if is_duplicate(p.domain, &out, &cand, gen, limits)?
                || pred_count(&out, cand.query.rel()) >= class_cap
            {
                continue;
            }
            let mut new_chain = chain.clone();
            new_chain.push(idx);
            out.push(LoopCertificate {
                class: cand,
                chain: new_chain,
                kind: CertKind::Propagated,
                witness_validated: None,
            });
            queue.push(out.len() - 1);
        }
    }
    Ok(out)
}

fn covers_rule_preds(f: &Filter, r: &Rule) -> bool {
    f.delta(&r.head.pred).is_ok() && f.delta(&r.body.pred).is_ok()
}

fn pred_count(certs: &[LoopCertificate], pred: &Pred) -> usize {
    certs.iter().filter(|c| c.class.query.rel() == pred).count()
}

fn is_duplicate(
    domain: Domain,
    certs: &[LoopCertificate],
    cand: &LoopClass,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<bool> {
    for c in certs {
        if c.class.query.rel() != cand.query.rel() {
            continue;
        }
        if domain::more_general(domain, &c.class.query, &cand.query, gen, limits)?
            && domain::more_general(domain, &cand.query, &c.class.query, gen, limits)?
        {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Analyze a whole program: try the plain loop test on every recursive
/// rule, fall back to inferred filters with a neutrality check, then
/// propagate the resulting classes across all rules. Errors while
/// analyzing one rule are contained to that rule's verdict; resource
/// errors from propagation or witnessing abort the analysis.
pub fn analyze(p: &Program, opts: &AnalyzeOptions) -> Result<Report> {
    let started = std::time::Instant::now();
    let mut gen = VarGen::for_program(p);
    let limits = Limits::new(opts.qe_cap);
    let mut stats = Stats::default();
    let mut rules_out: Vec<RuleVerdict> = Vec::new();
    let mut seeds: Vec<LoopCertificate> = Vec::new();

    let program_preds: Vec<Pred> = p
        .preds
        .iter()
        .map(|(name, &arity)| Pred::new(name, arity))
        .collect();

    for (idx, r) in p.rules.iter().enumerate() {
        stats.rules_analyzed += 1;
        let recursive = r.is_recursive();
        if recursive {
            stats.recursive_rules += 1;
        }
        let mut verdict = RuleVerdict {
            rule: idx,
            text: pretty_rule(r),
            recursive,
            verdict: "unknown".to_string(),
            filter: None,
            dn: None,
        };
        match analyze_rule(p, idx, r, &program_preds, opts, &mut gen, limits, &mut stats) {
            Ok(Some((class, kind, dn))) => {
                verdict.verdict = "loops".to_string();
                verdict.filter = class.filter.as_ref().map(|f| f.to_literal());
                verdict.dn = dn;
                seeds.push(LoopCertificate {
                    class,
                    chain: vec![idx],
                    kind,
                    witness_validated: None,
                });
            }
            Ok(None) => {}
            Err(e) if e.is_resource() => return Err(e),
            Err(e) => verdict.verdict = format!("error: {}", e),
        }
        rules_out.push(verdict);
    }

    let mut certs = propagate(p, seeds, opts.class_cap, &mut gen, limits)?;

    if opts.witness {
        for c in &mut certs {
            stats.witness_searches += 1;
            let w = engine::witness_loop(
                p,
                &c.class.query,
                opts.witness_depth,
                opts.witness_budget,
                &mut gen,
                limits,
            )?;
            c.witness_validated = Some(w.found);
        }
    }

    let certificates = certs
        .iter()
        .map(|c| CertificateReport {
            query: pretty_query(&c.class.query),
            kind: c.kind,
            chain: c.chain.clone(),
            filter: c.class.filter.as_ref().map(|f| f.to_literal()),
            witness_validated: c.witness_validated,
        })
        .collect();

    Ok(Report {
        program_digest: digest(&crate::syntax::pretty_program(p)),
        domain: p.domain,
        seed: opts.seed,
        rules: rules_out,
        certificates,
        stats,
        wall_ms: started.elapsed().as_millis(),
    })
}

#[allow(clippy::too_many_arguments)]
fn analyze_rule(
    p: &Program,
    _idx: usize,
    r: &Rule,
    program_preds: &[Pred],
    opts: &AnalyzeOptions,
    gen: &mut VarGen,
    limits: Limits,
    stats: &mut Stats,
) -> Result<Option<(LoopClass, CertKind, Option<DnOutcome>)>> {
    if !r.is_recursive() {
        return Ok(None);
    }
    if let Some(class) = infer_loop_simple(p.domain, r, gen, limits)? {
        return Ok(Some((class, CertKind::MoreGeneral, None)));
    }
    let nr = normalize_rule(p.domain, r, gen);
    let candidates =
        filters::infer_filters(p.domain, &nr, program_preds, opts.filter_budget, gen, limits)?;
    for f in candidates {
        stats.filters_tried += 1;
        stats.dn_checks += 1;
        let v: DnVerdict = match filters::check_dn(p.domain, &nr, &f, gen, limits) {
            Ok(v) => v,
            Err(e) if e.is_resource() => return Err(e),
            Err(_) => continue,
        };
        if !v.certified() {
            continue;
        }
        if let Some(class) = infer_loop_base(p.domain, r, &f, gen, limits)? {
            return Ok(Some((class, CertKind::FilterMoreGeneral, Some(v.outcome))));
        }
    }
    Ok(None)
}

/// Convenience: build the loop class a certified filter and rule induce,
/// as used by the single-rule `check` entry point.
pub fn check_rule_with_filter(
    p: &Program,
    rule_idx: usize,
    f: &Filter,
    gen: &mut VarGen,
    limits: Limits,
) -> Result<(DnVerdict, Option<LoopClass>)> {
    let r = p
        .rules
        .get(rule_idx)
        .ok_or_else(|| Error::invalid(format!("no rule {}", rule_idx)))?;
    let nr = normalize_rule(p.domain, r, gen);
    let v = filters::check_dn(p.domain, &nr, f, gen, limits)?;
    let class = if v.certified() {
        infer_loop_base(p.domain, r, f, gen, limits)?
    } else {
        None
    };
    Ok((v, class))
}

/// A position set with empty positions everywhere, for the plain test.
pub fn empty_positions(p: &Program) -> PositionSet {
    let preds: Vec<Pred> = p
        .preds
        .iter()
        .map(|(name, &arity)| Pred::new(name, arity))
        .collect();
    PositionSet::empty_for(&preds)
}
