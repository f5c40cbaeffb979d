//! The L endofunctor on theories under the base context structure, the
//! prestable structure α for the substitution calculus, and generation of
//! stability and c-stability obligations.

use std::collections::BTreeMap;

use indexmap::IndexMap;

use crate::engine::{prove_sequent, Bounds, ProofOutcome};
use crate::morphism::{canonical_args, Interpretation, MorphismError};
use crate::subst::{base_theory, build_s, ctx_sym, ft_power, ft_sym, star_sym, subst_sym, ty_sym, v_sym};
use crate::syntax::{
    mk_defined, Atom, Formula, RestrictedTerm, Sequent, Sort, SymId, SyntaxError, Term, Var, CTX,
    TM,
};
use crate::theory::{Theory, TheoryError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StabilityError {
    #[error("theory {0} lacks the base context structure")]
    MissingBase(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{0}")]
    Theory(String),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
}

impl From<TheoryError> for StabilityError {
    fn from(e: TheoryError) -> StabilityError {
        match e {
            TheoryError::Syntax(s) => StabilityError::Syntax(s),
            other => StabilityError::Theory(other.to_string()),
        }
    }
}

/// The lifted copy of a symbol.
pub fn lift_sym(sym: &SymId) -> SymId {
    SymId::new(format!("L.{}", sym.name), sym.levels.clone())
}

/// `L(p,n) = (p,n+1)`.
pub fn lift_sort(s: &Sort) -> Sort {
    Sort {
        basic: s.basic.clone(),
        level: s.level + 1,
    }
}

pub(crate) fn is_lifted(sym: &SymId) -> bool {
    sym.name.starts_with("L.")
}

/// `ctx_{p,n}(t)` with the identity symbol `ctx-ctx` elided.
fn ctx_app(th: &Theory, p: &str, n: u32, t: Term) -> Result<Term, SyntaxError> {
    if p == CTX {
        Ok(t)
    } else {
        th.app(ctx_sym(p, n), vec![t])
    }
}

/// `ft^r(ctx_{q,r+1}(t)) = gamma` for `t` of lifted sort `(q,r+1)`.
pub(crate) fn slice_atom(
    th: &Theory,
    q: &str,
    r: u32,
    t: Term,
    gamma: &Term,
) -> Result<Atom, SyntaxError> {
    let inner = ctx_app(th, q, r + 1, t)?;
    let down = ft_power(th, r, 1, inner)?;
    Atom::eq(down, gamma.clone())
}

/// `L(𝕋)`: base structure at the ambient cutoff, a lifted copy `L(σ)` of
/// every symbol of `t` (with the `L(ctx-ctx)` family extended to the ambient
/// cutoff), and the ctx-compatibility axioms in place of `t`'s own axioms.
pub fn lift_theory(t: &Theory, ambient: u32) -> Result<Theory, StabilityError> {
    if !t.basic_sorts.iter().any(|s| s == CTX) {
        return Err(StabilityError::MissingBase(t.name.clone()));
    }
    let sorts: Vec<&str> = t.basic_sorts.iter().map(|s| s.as_str()).collect();
    let mut out = base_theory(&format!("L({})", t.name), &sorts, ambient)?;
    out.provenance.push(format!("lift of {}", t.name));

    let mut lifted_fns: Vec<(SymId, Vec<Sort>, Sort)> = Vec::new();
    for (sym, sig) in &t.functions {
        let mut args = vec![Sort::ctx(1)];
        args.extend(sig.args.iter().map(lift_sort));
        lifted_fns.push((lift_sym(sym), args, lift_sort(&sig.result)));
    }
    // the identity projection family must cover every context level a
    // variable of t can have, which can exceed the ambient cutoff by one
    let max_ctx_level = t
        .functions
        .values()
        .flat_map(|sig| sig.args.iter().chain(std::iter::once(&sig.result)))
        .chain(t.predicates.values().flat_map(|sig| sig.args.iter()))
        .filter(|s| s.basic == CTX)
        .map(|s| s.level)
        .max()
        .unwrap_or(0);
    for n in 0..=ambient.max(max_ctx_level) {
        let sym = lift_sym(&ctx_sym(CTX, n));
        if !lifted_fns.iter().any(|(s, _, _)| *s == sym) {
            lifted_fns.push((
                sym,
                vec![Sort::ctx(1), Sort::ctx(n + 1)],
                Sort::ctx(n + 1),
            ));
        }
    }
    for (sym, args, result) in &lifted_fns {
        out.add_function(sym.clone(), args.clone(), result.clone());
    }
    let mut lifted_preds: Vec<(SymId, Vec<Sort>)> = Vec::new();
    for (sym, sig) in &t.predicates {
        let mut args = vec![Sort::ctx(1)];
        args.extend(sig.args.iter().map(lift_sort));
        lifted_preds.push((lift_sym(sym), args));
    }
    for (sym, args) in &lifted_preds {
        out.add_predicate(sym.clone(), args.clone());
    }

    let gamma = Var::new("G", Sort::ctx(1));

    // ctx-compatibility of the lifted projections
    for p in &t.basic_sorts {
        for n in 0..=ambient {
            let built = (|| -> Result<Sequent, SyntaxError> {
                let x = Var::new("x", Sort::new(p.clone(), n + 1));
                let prem = slice_atom(&out, p, n, Term::Var(x.clone()), &Term::Var(gamma.clone()))?;
                let plain = ctx_app(&out, p, n + 1, Term::Var(x.clone()))?;
                let lifted = out.app(
                    lift_sym(&ctx_sym(p, n)),
                    vec![Term::Var(gamma.clone()), Term::Var(x.clone())],
                )?;
                Sequent::new(
                    vec![gamma.clone(), x],
                    Formula::atom(prem),
                    Formula::atom(Atom::eq(plain, lifted)?),
                )
            })();
            match built {
                Ok(seq) => out.add_axiom(format!("L-ctx-{p}"), vec![("n".into(), n)], seq),
                Err(SyntaxError::UnknownSymbol { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }

    // definedness of a lifted application forces every part into the slice
    for (sym, args, result) in &lifted_fns {
        let vars: Vec<Var> = canonical_args(args);
        let built = (|| -> Result<Vec<(String, Sequent)>, SyntaxError> {
            let app = out.app(
                sym.clone(),
                vars.iter().cloned().map(Term::Var).collect(),
            )?;
            let gamma_t = Term::Var(vars[0].clone());
            let prem = Formula::atom(mk_defined(&app));
            let mut seqs = Vec::new();
            let res = slice_atom(&out, &result.basic, result.level - 1, app, &gamma_t)?;
            seqs.push((
                format!("L-res-{}", sym.token()),
                Sequent::new(vars.clone(), prem.clone(), Formula::atom(res))?,
            ));
            for (i, v) in vars.iter().enumerate().skip(1) {
                let a = slice_atom(
                    &out,
                    &v.sort.basic,
                    v.sort.level - 1,
                    Term::Var(v.clone()),
                    &gamma_t,
                )?;
                seqs.push((
                    format!("L-arg{}-{}", i, sym.token()),
                    Sequent::new(vars.clone(), prem.clone(), Formula::atom(a))?,
                ));
            }
            Ok(seqs)
        })();
        match built {
            Ok(seqs) => {
                for (name, seq) in seqs {
                    out.add_axiom(name, vec![], seq);
                }
            }
            Err(SyntaxError::UnknownSymbol { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    for (sym, args) in &lifted_preds {
        let vars: Vec<Var> = canonical_args(args);
        let built = (|| -> Result<Vec<(String, Sequent)>, SyntaxError> {
            let atom = out.pred_atom(
                sym.clone(),
                vars.iter().cloned().map(Term::Var).collect(),
            )?;
            let gamma_t = Term::Var(vars[0].clone());
            let mut seqs = Vec::new();
            for (i, v) in vars.iter().enumerate().skip(1) {
                let a = slice_atom(
                    &out,
                    &v.sort.basic,
                    v.sort.level - 1,
                    Term::Var(v.clone()),
                    &gamma_t,
                )?;
                seqs.push((
                    format!("L-arg{}-{}", i, sym.token()),
                    Sequent::new(
                        vars.clone(),
                        Formula::atom(atom.clone()),
                        Formula::atom(a),
                    )?,
                ));
            }
            Ok(seqs)
        })();
        match built {
            Ok(seqs) => {
                for (name, seq) in seqs {
                    out.add_axiom(name, vec![], seq);
                }
            }
            Err(SyntaxError::UnknownSymbol { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// `L(Γ,t)`: variables get the slice restriction, applications replay
/// through the lifted symbol.
pub fn lift_term(
    lifted: &Theory,
    gamma: &Term,
    t: &Term,
) -> Result<RestrictedTerm, SyntaxError> {
    match t {
        Term::Var(v) => {
            let lv = Term::Var(Var::new(v.name.clone(), lift_sort(&v.sort)));
            let guard = lifted.app(
                lift_sym(&ctx_sym(&v.sort.basic, v.sort.level)),
                vec![gamma.clone(), lv.clone()],
            )?;
            Ok(RestrictedTerm {
                term: lv,
                restriction: Formula::atom(mk_defined(&guard)),
            })
        }
        Term::App { sym, args, .. } => {
            let mut new_args = vec![gamma.clone()];
            let mut restriction = Formula::truth();
            for a in args {
                let la = lift_term(lifted, gamma, a)?;
                new_args.push(la.term);
                restriction = restriction.and(la.restriction);
            }
            Ok(RestrictedTerm {
                term: lifted.app(lift_sym(sym), new_args)?,
                restriction,
            })
        }
    }
}

/// `L(Γ,φ)` atom by atom; equalities carry both sides' restrictions.
pub fn lift_formula(
    lifted: &Theory,
    gamma: &Term,
    phi: &Formula,
) -> Result<Formula, SyntaxError> {
    let mut out = Formula::truth();
    for atom in &phi.0 {
        match atom {
            Atom::Eq(l, r) => {
                let ll = lift_term(lifted, gamma, l)?;
                let lr = lift_term(lifted, gamma, r)?;
                out = out
                    .and(Formula::atom(Atom::eq(ll.term, lr.term)?))
                    .and(ll.restriction)
                    .and(lr.restriction);
            }
            Atom::Pred { sym, args } => {
                let mut new_args = vec![gamma.clone()];
                let mut restriction = Formula::truth();
                for a in args {
                    let la = lift_term(lifted, gamma, a)?;
                    new_args.push(la.term);
                    restriction = restriction.and(la.restriction);
                }
                out = out
                    .and(Formula::atom(lifted.pred_atom(lift_sym(sym), new_args)?))
                    .and(restriction);
            }
        }
    }
    Ok(out)
}

/// `L(f)` on morphisms: a base symbol maps to itself, `L(σ)` to
/// `L(Γ, f(σ(x̄)))`.
pub fn lift_interpretation(
    f: &Interpretation,
    ambient: u32,
) -> Result<Interpretation, StabilityError> {
    let source = lift_theory(&f.source, ambient)?;
    let target = lift_theory(&f.target, ambient)?;
    let mut functions = IndexMap::new();
    let mut predicates = IndexMap::new();
    let gamma = Term::var("#g", Sort::ctx(1));
    for (sym, sig) in &source.functions {
        if !is_lifted(sym) {
            let args = canonical_args(&sig.args).into_iter().map(Term::Var).collect();
            let t = target.app(sym.clone(), args)?;
            functions.insert(sym.clone(), RestrictedTerm::unrestricted(t));
            continue;
        }
        let orig = SymId::new(sym.name.trim_start_matches("L.").to_string(), sym.levels.clone());
        let body = match f.functions.get(&orig) {
            Some(b) => b.clone(),
            None => {
                // extended L(ctx-ctx) instance outside f's source: identity
                let x1 = Term::var("x1", sig.args[0].clone());
                let x2 = Term::var("x2", sig.args[1].clone());
                functions.insert(
                    sym.clone(),
                    RestrictedTerm::unrestricted(target.app(sym.clone(), vec![x1, x2])?),
                );
                continue;
            }
        };
        let lt = lift_term(&target, &gamma, &body.term)?;
        let lphi = lift_formula(&target, &gamma, &body.restriction)?;
        let rt = RestrictedTerm {
            term: lt.term,
            restriction: lt.restriction.and(lphi),
        };
        functions.insert(sym.clone(), shift_canonical(rt, &sig.args));
    }
    for (sym, sig) in &source.predicates {
        let orig = SymId::new(sym.name.trim_start_matches("L.").to_string(), sym.levels.clone());
        let body = f.predicates.get(&orig).ok_or_else(|| {
            StabilityError::Theory(format!("no assignment for {}", orig.token()))
        })?;
        let lphi = lift_formula(&target, &gamma, body)?;
        let rt = RestrictedTerm {
            term: gamma.clone(),
            restriction: lphi,
        };
        let shifted = shift_canonical(rt, &sig.args);
        predicates.insert(sym.clone(), shifted.restriction);
    }
    Ok(Interpretation {
        source,
        target,
        functions,
        predicates,
    })
}

/// Renames `#g → x1` and `xi → x(i+1)` so a body lifted over the marker
/// context variable matches the lifted symbol's canonical arguments.
fn shift_canonical(rt: RestrictedTerm, lifted_args: &[Sort]) -> RestrictedTerm {
    let vars = canonical_args(lifted_args);
    let mut map: BTreeMap<Var, Term> = BTreeMap::new();
    map.insert(
        Var::new("#g", Sort::ctx(1)),
        Term::Var(vars[0].clone()),
    );
    for (i, v) in vars.iter().enumerate().skip(1) {
        map.insert(
            Var::new(format!("x{i}"), v.sort.clone()),
            Term::Var(v.clone()),
        );
    }
    RestrictedTerm {
        term: rt.term.substitute_many(&map),
        restriction: rt.restriction.substitute_many(&map),
    }
}

/// A theory together with its lift and a prestable structure
/// α : L(inner) → theory. For level-indexed theories the lifted side is the
/// presentation one cutoff down, so every α assignment stays in range.
#[derive(Debug, Clone)]
pub struct PrestableTheory {
    pub inner: Theory,
    pub theory: Theory,
    pub lifted: Theory,
    pub alpha: Interpretation,
}

/// The α assignment for a lifted base-calculus symbol, or `None` when the
/// symbol is not part of the substitution calculus. `terms` are the lifted
/// symbol's arguments, the leading one being the slice context.
pub(crate) fn base_alpha_assignment(
    theory: &Theory,
    sym: &SymId,
    terms: &[Term],
) -> Result<Option<RestrictedTerm>, StabilityError> {
    let gamma = terms[0].clone();
    let slice = |t: Term, n: u32| -> Result<Formula, SyntaxError> {
        Ok(Formula::atom(Atom::eq(
            ft_power(theory, n, 1, t)?,
            gamma.clone(),
        )?))
    };
    let name = sym.name.trim_start_matches("L.");
    let levels = &sym.levels;
    let rt = if *sym == lift_sym(&star_sym()) {
        RestrictedTerm::unrestricted(gamma.clone())
    } else if name == "ft" {
        let n = levels[0];
        RestrictedTerm {
            term: theory.app(ft_sym(n + 1), vec![terms[1].clone()])?,
            restriction: slice(terms[1].clone(), n + 1)?,
        }
    } else if name == "ctx-ctx" {
        let n = levels[0];
        RestrictedTerm {
            term: terms[1].clone(),
            restriction: slice(terms[1].clone(), n)?,
        }
    } else if name == "ctx-tm" {
        let n = levels[0];
        let proj = theory.app(ctx_sym(TM, n + 1), vec![terms[1].clone()])?;
        RestrictedTerm {
            term: proj.clone(),
            restriction: slice(proj, n)?,
        }
    } else if name == "ty" {
        let n = levels[0];
        let proj = theory.app(ctx_sym(TM, n + 1), vec![terms[1].clone()])?;
        RestrictedTerm {
            term: theory.app(ty_sym(n + 1), vec![terms[1].clone()])?,
            restriction: slice(proj, n)?,
        }
    } else if name == "v" {
        let (n, i) = (levels[0], levels[1]);
        RestrictedTerm {
            term: theory.app(v_sym(n + 1, i), vec![terms[1].clone()])?,
            restriction: slice(terms[1].clone(), n)?,
        }
    } else if let Some(p) = name.strip_prefix("subst-") {
        let (n, k) = (levels[0], levels[1]);
        let delta = terms[1].clone();
        let mut args = vec![delta.clone(), terms[2].clone()];
        args.push(theory.app(v_sym(n + 1, n), vec![delta.clone()])?);
        args.extend(terms[3..].iter().cloned());
        RestrictedTerm {
            term: theory.app(subst_sym(p, n + 1, k + 1), args)?,
            restriction: slice(delta, n)?,
        }
    } else {
        return Ok(None);
    };
    Ok(Some(rt))
}

/// The prestable structure of the substitution calculus:
/// each lifted symbol maps to its level-successor restricted to the slice
/// over Γ, and `L(subst)` inserts the extra variable component.
pub fn alpha_s(cutoff: u32) -> Result<PrestableTheory, StabilityError> {
    assert!(cutoff >= 1, "alpha needs headroom below the cutoff");
    let inner = build_s(cutoff - 1);
    let theory = build_s(cutoff);
    let lifted = lift_theory(&inner, cutoff)?;

    let mut functions = IndexMap::new();
    let predicates = IndexMap::new();
    for (sym, sig) in &lifted.functions {
        let vars = canonical_args(&sig.args);
        let terms: Vec<Term> = vars.iter().cloned().map(Term::Var).collect();
        if !is_lifted(sym) {
            functions.insert(
                sym.clone(),
                RestrictedTerm::unrestricted(theory.app(sym.clone(), terms)?),
            );
            continue;
        }
        let rt = base_alpha_assignment(&theory, sym, &terms)?.ok_or_else(|| {
            StabilityError::Theory(format!("no α assignment for {}", sym.token()))
        })?;
        functions.insert(sym.clone(), rt);
    }
    let alpha = Interpretation {
        source: lifted.clone(),
        target: theory.clone(),
        functions,
        predicates,
    };
    alpha.validate()?;
    Ok(PrestableTheory {
        inner,
        theory,
        lifted,
        alpha,
    })
}

/// One discharged (or not) obligation.
#[derive(Debug, Clone, PartialEq)]
pub struct Obligation {
    pub axiom: String,
    pub valuation: Vec<(String, u32)>,
    pub sequent: Sequent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObligationResult {
    pub obligation: Obligation,
    pub outcome: ProofOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub results: Vec<ObligationResult>,
    pub bounds: Bounds,
}

impl StabilityReport {
    pub fn all_proven(&self) -> bool {
        self.results.iter().all(|r| r.outcome.is_proven())
    }

    pub fn failures(&self) -> Vec<&ObligationResult> {
        self.results
            .iter()
            .filter(|r| !r.outcome.is_proven())
            .collect()
    }
}

/// One transport step of a sequent `φ ⊢_{x̄} ψ` over the inner theory:
/// `αL(Γ,φ) ∧ ⋀ᵢ ft^{rᵢ}(ctx(xᵢ)) = Γ ⊢_{Γ,x̄} αL(Γ,ψ)`.
pub fn transport_sequent(
    p: &PrestableTheory,
    seq: &Sequent,
) -> Result<Sequent, StabilityError> {
    let gamma_v = Var::new("G", Sort::ctx(1));
    let gamma = Term::Var(gamma_v.clone());
    let lp = lift_formula(&p.lifted, &gamma, &seq.premise)?;
    let lc = lift_formula(&p.lifted, &gamma, &seq.conclusion)?;
    let mut premise = p.alpha.apply_to_formula(&lp)?;
    for v in &seq.context {
        premise = premise.and(Formula::atom(slice_atom(
            &p.theory,
            &v.sort.basic,
            v.sort.level,
            Term::Var(Var::new(v.name.clone(), lift_sort(&v.sort))),
            &gamma,
        )?));
    }
    let conclusion = p.alpha.apply_to_formula(&lc)?;
    let mut ctx = vec![gamma_v];
    ctx.extend(
        seq.context
            .iter()
            .map(|v| Var::new(v.name.clone(), lift_sort(&v.sort))),
    );
    Ok(Sequent::new(ctx, premise, conclusion)?)
}

/// The transport of every inner axiom, the stability proof obligations.
pub fn stability_obligations(p: &PrestableTheory) -> Result<Vec<Obligation>, StabilityError> {
    let mut out = Vec::new();
    for ax in &p.inner.axioms {
        out.push(Obligation {
            axiom: ax.name.clone(),
            valuation: ax.valuation.clone(),
            sequent: transport_sequent(p, &ax.sequent)?,
        });
    }
    Ok(out)
}

/// The three c-stability families: α-images of lifted symbols force
/// `Γ = c`, and the axiom transports are taken at `Γ := c`.
pub fn cstable_obligations(
    p: &PrestableTheory,
    c: &Term,
) -> Result<Vec<Obligation>, StabilityError> {
    let c_vars: Vec<Var> = RestrictedTerm::unrestricted(c.clone())
        .free_vars()
        .into_iter()
        .collect();
    let mut out = Vec::new();
    for (sym, rt) in &p.alpha.functions {
        if !is_lifted(sym) {
            continue;
        }
        let sig = p.lifted.fn_sig(sym)?;
        let mut vars = canonical_args(&sig.args);
        let gamma = Term::Var(vars[0].clone());
        vars.extend(c_vars.iter().cloned());
        out.push(Obligation {
            axiom: format!("c-fun-{}", sym.token()),
            valuation: vec![],
            sequent: Sequent::new(
                vars,
                rt.definedness(),
                Formula::atom(Atom::eq(gamma, c.clone())?),
            )?,
        });
    }
    for (sym, body) in &p.alpha.predicates {
        let sig = p.lifted.pred_sig(sym)?;
        let mut vars = canonical_args(&sig.args);
        let gamma = Term::Var(vars[0].clone());
        vars.extend(c_vars.iter().cloned());
        out.push(Obligation {
            axiom: format!("c-pred-{}", sym.token()),
            valuation: vec![],
            sequent: Sequent::new(
                vars,
                body.clone(),
                Formula::atom(Atom::eq(gamma, c.clone())?),
            )?,
        });
    }
    // axiom transports are the stability obligations at Γ := c
    let gamma_v = Var::new("G", Sort::ctx(1));
    let mut map = BTreeMap::new();
    map.insert(gamma_v.clone(), c.clone());
    for ob in stability_obligations(p)? {
        let mut ctx: Vec<Var> = ob
            .sequent
            .context
            .iter()
            .filter(|v| **v != gamma_v)
            .cloned()
            .collect();
        ctx.extend(c_vars.iter().cloned());
        out.push(Obligation {
            axiom: format!("c-axiom-{}", ob.axiom),
            valuation: ob.valuation,
            sequent: Sequent::new(
                ctx,
                ob.sequent.premise.substitute_many(&map),
                ob.sequent.conclusion.substitute_many(&map),
            )?,
        });
    }
    Ok(out)
}

/// Attempts every obligation with the bounded prover.
pub fn discharge(
    theory: &Theory,
    obligations: Vec<Obligation>,
    bounds: &Bounds,
) -> StabilityReport {
    let results = obligations
        .into_iter()
        .map(|ob| {
            let outcome = prove_sequent(theory, &ob.sequent, bounds);
            ObligationResult {
                obligation: ob,
                outcome,
            }
        })
        .collect();
    StabilityReport {
        results,
        bounds: bounds.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphism::{check_equivalence, Verdict};

    fn tiny() -> Theory {
        // base structure plus one unary symbol on contexts
        let mut th = base_theory("tiny", &[CTX], 1).unwrap();
        th.add_function(SymId::new("f", vec![]), vec![Sort::ctx(0)], Sort::ctx(0));
        th
    }

    #[test]
    fn lift_sort_bumps_level() {
        assert_eq!(lift_sort(&Sort::ctx(0)), Sort::ctx(1));
        assert_eq!(lift_sort(&Sort::tm(2)), Sort::tm(3));
    }

    #[test]
    fn lift_of_base_theory_content() {
        let b = base_theory("b", &[CTX], 1).unwrap();
        let l = lift_theory(&b, 1).unwrap();
        // base symbols: *, ft@0, ft@1, ctx-ctx@0, ctx-ctx@1; each also
        // lifted, plus the extended L.ctx-ctx@2 covering (ctx,2) variables
        assert_eq!(l.functions.len(), 11);
        assert!(l.functions.contains_key(&lift_sym(&star_sym())));
        assert!(l.functions.contains_key(&lift_sym(&ft_sym(0))));
        // lifted unary symbol gains the leading context argument
        let sig = l.fn_sig(&lift_sym(&ctx_sym(CTX, 0))).unwrap();
        assert_eq!(sig.args, vec![Sort::ctx(1), Sort::ctx(1)]);
        assert_eq!(sig.result, Sort::ctx(1));
        // base axioms present alongside the compatibility families
        assert!(l.find_axiom("star-def", &[]).is_some());
        assert!(l.find_axiom("L-ctx-ctx", &[("n".into(), 0)]).is_some());
        assert!(l
            .find_axiom(&format!("L-res-{}", lift_sym(&star_sym()).token()), &[])
            .is_some());
    }

    #[test]
    fn lift_term_variable_shape() {
        let th = tiny();
        let l = lift_theory(&th, 1).unwrap();
        let gamma = Term::var("G", Sort::ctx(1));
        let x = Term::var("x", Sort::ctx(0));
        let lt = lift_term(&l, &gamma, &x).unwrap();
        assert_eq!(lt.term, Term::var("x", Sort::ctx(1)));
        let guard = l
            .app(
                lift_sym(&ctx_sym(CTX, 0)),
                vec![gamma, Term::var("x", Sort::ctx(1))],
            )
            .unwrap();
        assert_eq!(lt.restriction, Formula::atom(mk_defined(&guard)));
    }

    #[test]
    fn lift_term_application_shape() {
        let th = tiny();
        let l = lift_theory(&th, 1).unwrap();
        let gamma = Term::var("G", Sort::ctx(1));
        let fx = th
            .app(SymId::new("f", vec![]), vec![Term::var("x", Sort::ctx(0))])
            .unwrap();
        let lt = lift_term(&l, &gamma, &fx).unwrap();
        match &lt.term {
            Term::App { sym, args, .. } => {
                assert_eq!(sym.token(), "L.f");
                assert_eq!(args.len(), 2);
                assert_eq!(args[0], gamma);
            }
            other => panic!("expected application, got {other:?}"),
        }
        // the argument's slice guard travels outward
        assert_eq!(lt.restriction.0.len(), 1);
    }

    #[test]
    fn lift_term_free_vars_subset() {
        let th = tiny();
        let l = lift_theory(&th, 1).unwrap();
        let gamma = Term::var("G", Sort::ctx(1));
        let fx = th
            .app(SymId::new("f", vec![]), vec![Term::var("x", Sort::ctx(0))])
            .unwrap();
        let lt = lift_term(&l, &gamma, &fx).unwrap();
        let fv = lt.free_vars();
        assert!(fv.contains(&Var::new("G", Sort::ctx(1))));
        assert!(fv.contains(&Var::new("x", Sort::ctx(1))));
        assert_eq!(fv.len(), 2);
    }

    #[test]
    fn lift_preserves_identity_up_to_equivalence() {
        let th = tiny();
        // ambient one above the cutoff so boundary symbols keep their
        // slice axioms
        let id = Interpretation::identity(&th);
        let lid = lift_interpretation(&id, 2).unwrap();
        lid.validate().unwrap();
        let direct = Interpretation::identity(&lid.source);
        let bounds = Bounds::default();
        assert_eq!(
            check_equivalence(&lid, &direct, &bounds).unwrap(),
            Verdict::Proven
        );
    }

    #[test]
    fn lift_preserves_composition_up_to_equivalence() {
        let th = tiny();
        // endomorphism sending f to f∘f
        let mut g = Interpretation::identity(&th);
        let f_sym = SymId::new("f", vec![]);
        let x1 = Term::var("x1", Sort::ctx(0));
        let ffx = th
            .app(f_sym.clone(), vec![th.app(f_sym.clone(), vec![x1]).unwrap()])
            .unwrap();
        g.functions
            .insert(f_sym.clone(), RestrictedTerm::unrestricted(ffx));
        let gg = Interpretation::compose(&g, &g).unwrap();
        let lifted_of_comp = lift_interpretation(&gg, 1).unwrap();
        let comp_of_lifted = Interpretation::compose(
            &lift_interpretation(&g, 1).unwrap(),
            &lift_interpretation(&g, 1).unwrap(),
        )
        .unwrap();
        let bounds = Bounds::default();
        assert_eq!(
            check_equivalence(&lifted_of_comp, &comp_of_lifted, &bounds).unwrap(),
            Verdict::Proven
        );
    }

    #[test]
    fn alpha_s_validates_at_cutoff_one() {
        let p = alpha_s(1).unwrap();
        assert_eq!(p.inner.cutoff, 0);
        assert_eq!(p.theory.cutoff, 1);
        // every lifted symbol has an assignment
        assert_eq!(p.alpha.functions.len(), p.lifted.functions.len());
    }

    #[test]
    fn stability_obligations_match_inner_axioms() {
        let p = alpha_s(1).unwrap();
        let obs = stability_obligations(&p).unwrap();
        assert_eq!(obs.len(), p.inner.axioms.len());
        // each obligation context carries the slice context variable
        for ob in &obs {
            assert!(ob.sequent.context.contains(&Var::new("G", Sort::ctx(1))));
        }
    }

    #[test]
    fn stability_of_s_at_cutoff_one() {
        let p = alpha_s(1).unwrap();
        let obs = stability_obligations(&p).unwrap();
        let report = discharge(&p.theory, obs, &Bounds::default());
        for r in report.failures() {
            panic!(
                "obligation {} {:?} not proven",
                r.obligation.axiom, r.obligation.valuation
            );
        }
    }

    #[test]
    fn cstable_counts_for_small_theory() {
        // prestable structure on the bare base: lift maps to itself
        let p = alpha_s(1).unwrap();
        let c = Term::var("c", Sort::ctx(1));
        let obs = cstable_obligations(&p, &c).unwrap();
        let lifted_fns = p
            .alpha
            .functions
            .keys()
            .filter(|s| is_lifted(s))
            .count();
        assert_eq!(obs.len(), lifted_fns + p.inner.axioms.len());
        // predicate-free theory: no c-pred obligations, and every c-fun
        // conclusion is the forcing equation
        for ob in &obs {
            if ob.axiom.starts_with("c-fun-") {
                assert_eq!(ob.sequent.conclusion.0.len(), 1);
            }
        }
    }
}
