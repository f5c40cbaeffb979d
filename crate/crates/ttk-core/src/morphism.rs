//! Interpretations and morphisms between theories over the same sorts:
//! extension to terms and formulas, composition, preservation obligations
//! with cached certificates, and model reducts.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use indexmap::IndexMap;

use crate::engine::{
    check_equivalence_formulas, check_equivalence_terms, prove_sequent, Bounds, ProofOutcome,
};
use crate::model::{FiniteModel, ModelError};
use crate::sexpr::{self, Sexpr};
use crate::syntax::{
    Atom, Formula, RestrictedTerm, Sequent, Sort, SymId, SyntaxError, Term, Var,
};
use crate::theory::{sequent_digest, FnSig, TermParser, Theory, TheoryError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MorphismError {
    #[error("theories {left} and {right} have different sort structure")]
    SortMismatch { left: String, right: String },
    #[error("no assignment for {kind} symbol {sym}")]
    MissingAssignment { kind: &'static str, sym: String },
    #[error("assignment for {sym} is not a {kind} symbol of the source")]
    ExtraAssignment { kind: &'static str, sym: String },
    #[error("assignment for {sym} has free variables {got:?}, expected {expected:?}")]
    FreeVarMismatch {
        sym: String,
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("assignment for {sym} has sort {got}, expected {expected}")]
    ResultSort {
        sym: String,
        expected: String,
        got: String,
    },
    #[error("morphism endpoints {expected} expected, file names {got}")]
    WrongTheory { expected: String, got: String },
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Theory(String),
    #[error(transparent)]
    Parse(#[from] sexpr::ParseError),
    #[error("in {context}: expected {expected}, got {got}")]
    Malformed {
        context: String,
        expected: String,
        got: String,
    },
}

impl From<TheoryError> for MorphismError {
    fn from(e: TheoryError) -> MorphismError {
        match e {
            TheoryError::Syntax(s) => MorphismError::Syntax(s),
            other => MorphismError::Theory(other.to_string()),
        }
    }
}

/// The canonical argument variables `x1 … xk` of a function or predicate
/// signature; assignment bodies are written over exactly these.
pub fn canonical_args(args: &[Sort]) -> Vec<Var> {
    args.iter()
        .enumerate()
        .map(|(i, s)| Var::new(format!("x{}", i + 1), s.clone()))
        .collect()
}

/// A symbol-wise translation of one theory into another with the same basic
/// sorts and cutoff: each function maps to a restricted term, each predicate
/// to a formula, over the canonical argument variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interpretation {
    pub source: Theory,
    pub target: Theory,
    pub functions: IndexMap<SymId, RestrictedTerm>,
    pub predicates: IndexMap<SymId, Formula>,
}

impl Interpretation {
    pub fn identity(theory: &Theory) -> Interpretation {
        let mut functions = IndexMap::new();
        for (sym, sig) in &theory.functions {
            let args = canonical_args(&sig.args)
                .into_iter()
                .map(Term::Var)
                .collect();
            let t = theory.app(sym.clone(), args).expect("canonical application");
            functions.insert(sym.clone(), RestrictedTerm::unrestricted(t));
        }
        let mut predicates = IndexMap::new();
        for (sym, sig) in &theory.predicates {
            let args = canonical_args(&sig.args)
                .into_iter()
                .map(Term::Var)
                .collect();
            let atom = theory
                .pred_atom(sym.clone(), args)
                .expect("canonical application");
            predicates.insert(sym.clone(), Formula::atom(atom));
        }
        Interpretation {
            source: theory.clone(),
            target: theory.clone(),
            functions,
            predicates,
        }
    }

    /// Structural validity: matching sort structure, a well-sorted assignment
    /// for every symbol and nothing else, free variables exactly the
    /// canonical arguments.
    pub fn validate(&self) -> Result<(), MorphismError> {
        let mismatch = || MorphismError::SortMismatch {
            left: self.source.name.clone(),
            right: self.target.name.clone(),
        };
        let mut src_sorts = self.source.basic_sorts.clone();
        let mut tgt_sorts = self.target.basic_sorts.clone();
        src_sorts.sort();
        tgt_sorts.sort();
        if src_sorts != tgt_sorts || self.source.cutoff != self.target.cutoff {
            return Err(mismatch());
        }
        for (sym, sig) in &self.source.functions {
            let body = self
                .functions
                .get(sym)
                .ok_or_else(|| MorphismError::MissingAssignment {
                    kind: "function",
                    sym: sym.token(),
                })?;
            self.check_fv(sym, &sig.args, body.free_vars())?;
            self.check_formula(&body.restriction)?;
            self.target.check_term(&body.term)?;
            if body.sort() != &sig.result {
                return Err(MorphismError::ResultSort {
                    sym: sym.token(),
                    expected: sig.result.to_string(),
                    got: body.sort().to_string(),
                });
            }
        }
        for sym in self.functions.keys() {
            if !self.source.functions.contains_key(sym) {
                return Err(MorphismError::ExtraAssignment {
                    kind: "function",
                    sym: sym.token(),
                });
            }
        }
        for (sym, sig) in &self.source.predicates {
            let body = self
                .predicates
                .get(sym)
                .ok_or_else(|| MorphismError::MissingAssignment {
                    kind: "predicate",
                    sym: sym.token(),
                })?;
            self.check_fv(sym, &sig.args, body.free_vars())?;
            self.check_formula(body)?;
        }
        for sym in self.predicates.keys() {
            if !self.source.predicates.contains_key(sym) {
                return Err(MorphismError::ExtraAssignment {
                    kind: "predicate",
                    sym: sym.token(),
                });
            }
        }
        Ok(())
    }

    fn check_fv(
        &self,
        sym: &SymId,
        args: &[Sort],
        got: BTreeSet<Var>,
    ) -> Result<(), MorphismError> {
        let expected: BTreeSet<Var> = canonical_args(args).into_iter().collect();
        if got != expected {
            return Err(MorphismError::FreeVarMismatch {
                sym: sym.token(),
                expected: expected.iter().map(|v| v.name.clone()).collect(),
                got: got.iter().map(|v| v.name.clone()).collect(),
            });
        }
        Ok(())
    }

    fn check_formula(&self, phi: &Formula) -> Result<(), MorphismError> {
        for atom in &phi.0 {
            match atom {
                Atom::Eq(l, r) => {
                    self.target.check_term(l)?;
                    self.target.check_term(r)?;
                }
                Atom::Pred { sym, args } => {
                    // re-form the atom to re-run the signature check
                    self.target.pred_atom(sym.clone(), args.clone())?;
                    for a in args {
                        self.target.check_term(a)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// `f(t)` by induction: variables are unrestricted, applications
    /// substitute the translated arguments into the assignment body and
    /// conjoin all restrictions.
    pub fn apply_to_term(&self, t: &Term) -> Result<RestrictedTerm, MorphismError> {
        match t {
            Term::Var(_) => Ok(RestrictedTerm::unrestricted(t.clone())),
            Term::App { sym, args, .. } => {
                let body = self
                    .functions
                    .get(sym)
                    .ok_or_else(|| MorphismError::MissingAssignment {
                        kind: "function",
                        sym: sym.token(),
                    })?;
                let sig = self.source.fn_sig(sym)?;
                let translated = args
                    .iter()
                    .map(|a| self.apply_to_term(a))
                    .collect::<Result<Vec<_>, _>>()?;
                let map: BTreeMap<Var, Term> = canonical_args(&sig.args)
                    .into_iter()
                    .zip(translated.iter().map(|r| r.term.clone()))
                    .collect();
                let mut restriction = body.restriction.substitute_many(&map);
                for r in &translated {
                    restriction = restriction.and(r.restriction.clone());
                }
                Ok(RestrictedTerm {
                    term: body.term.substitute_many(&map),
                    restriction,
                })
            }
        }
    }

    pub fn apply_to_atom(&self, atom: &Atom) -> Result<Formula, MorphismError> {
        match atom {
            Atom::Eq(l, r) => {
                let l = self.apply_to_term(l)?;
                let r = self.apply_to_term(r)?;
                let eq = Atom::eq(l.term, r.term)?;
                Ok(Formula::atom(eq).and(l.restriction).and(r.restriction))
            }
            Atom::Pred { sym, args } => {
                let body = self
                    .predicates
                    .get(sym)
                    .ok_or_else(|| MorphismError::MissingAssignment {
                        kind: "predicate",
                        sym: sym.token(),
                    })?;
                let sig = self.source.pred_sig(sym)?;
                let translated = args
                    .iter()
                    .map(|a| self.apply_to_term(a))
                    .collect::<Result<Vec<_>, _>>()?;
                let map: BTreeMap<Var, Term> = canonical_args(&sig.args)
                    .into_iter()
                    .zip(translated.iter().map(|r| r.term.clone()))
                    .collect();
                let mut out = body.substitute_many(&map);
                for r in &translated {
                    out = out.and(r.restriction.clone());
                }
                Ok(out)
            }
        }
    }

    pub fn apply_to_formula(&self, phi: &Formula) -> Result<Formula, MorphismError> {
        let mut out = Formula::truth();
        for atom in &phi.0 {
            out = out.and(self.apply_to_atom(atom)?);
        }
        Ok(out)
    }

    pub fn apply_to_restricted(
        &self,
        rt: &RestrictedTerm,
    ) -> Result<RestrictedTerm, MorphismError> {
        let t = self.apply_to_term(&rt.term)?;
        let phi = self.apply_to_formula(&rt.restriction)?;
        Ok(RestrictedTerm {
            term: t.term,
            restriction: t.restriction.and(phi),
        })
    }

    /// `f(φ) ⊢_V f(ψ)`, same context.
    pub fn apply_to_sequent(&self, seq: &Sequent) -> Result<Sequent, MorphismError> {
        Ok(Sequent::new(
            seq.context.clone(),
            self.apply_to_formula(&seq.premise)?,
            self.apply_to_formula(&seq.conclusion)?,
        )?)
    }

    /// One preservation obligation per source axiom.
    pub fn obligations(&self) -> Result<Vec<(String, Vec<(String, u32)>, Sequent)>, MorphismError> {
        let mut out = Vec::new();
        for ax in &self.source.axioms {
            out.push((
                ax.name.clone(),
                ax.valuation.clone(),
                self.apply_to_sequent(&ax.sequent)?,
            ));
        }
        Ok(out)
    }

    /// `(g ∘ f)(S) = g(f(S))` symbol-wise.
    pub fn compose(g: &Interpretation, f: &Interpretation) -> Result<Interpretation, MorphismError> {
        if f.target.digest() != g.source.digest() {
            return Err(MorphismError::SortMismatch {
                left: f.target.name.clone(),
                right: g.source.name.clone(),
            });
        }
        let mut functions = IndexMap::new();
        for (sym, body) in &f.functions {
            functions.insert(sym.clone(), g.apply_to_restricted(body)?);
        }
        let mut predicates = IndexMap::new();
        for (sym, body) in &f.predicates {
            predicates.insert(sym.clone(), g.apply_to_formula(body)?);
        }
        Ok(Interpretation {
            source: f.source.clone(),
            target: g.target.clone(),
            functions,
            predicates,
        })
    }
}

/// Combined verdict over a set of proof attempts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Proven,
    Unknown,
    Refuted,
}

impl Verdict {
    fn join(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Refuted, _) | (_, Refuted) => Refuted,
            (Unknown, _) | (_, Unknown) => Unknown,
            _ => Proven,
        }
    }

    fn of(outcome: &ProofOutcome) -> Verdict {
        match outcome {
            ProofOutcome::Proven(_) => Verdict::Proven,
            ProofOutcome::Unknown(_) => Verdict::Unknown,
            ProofOutcome::Refuted(_) => Verdict::Refuted,
        }
    }
}

/// Equivalence of interpretations: every function assignment pair is
/// Kleene-equal and every predicate assignment pair interderivable, all in
/// the common target theory.
pub fn check_equivalence(
    f: &Interpretation,
    g: &Interpretation,
    bounds: &Bounds,
) -> Result<Verdict, MorphismError> {
    if f.source.digest() != g.source.digest() || f.target.digest() != g.target.digest() {
        return Err(MorphismError::SortMismatch {
            left: f.source.name.clone(),
            right: g.source.name.clone(),
        });
    }
    let mut verdict = Verdict::Proven;
    for (sym, a) in &f.functions {
        let b = g
            .functions
            .get(sym)
            .ok_or_else(|| MorphismError::MissingAssignment {
                kind: "function",
                sym: sym.token(),
            })?;
        let (fwd, bwd) = check_equivalence_terms(&f.target, a, b, bounds)?;
        verdict = verdict.join(Verdict::of(&fwd)).join(Verdict::of(&bwd));
    }
    for (sym, a) in &f.predicates {
        let b = g
            .predicates
            .get(sym)
            .ok_or_else(|| MorphismError::MissingAssignment {
                kind: "predicate",
                sym: sym.token(),
            })?;
        let (fwd, bwd) = check_equivalence_formulas(&f.target, a, b, bounds)?;
        verdict = verdict.join(Verdict::of(&fwd)).join(Verdict::of(&bwd));
    }
    Ok(verdict)
}

/// Proof state of one preservation obligation.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub axiom: String,
    pub valuation: Vec<(String, u32)>,
    pub sequent: Sequent,
    pub outcome: ProofOutcome,
}

/// Prover outcomes keyed by (target theory digest, sequent digest), shared
/// across certification runs.
#[derive(Debug, Clone, Default)]
pub struct CertCache {
    entries: HashMap<(String, String), ProofOutcome>,
}

impl CertCache {
    pub fn new() -> CertCache {
        CertCache::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// An interpretation together with certificates for all its obligations.
/// It represents the morphism given by the interpretation's equivalence
/// class; equality of morphisms goes through [`check_equivalence`].
#[derive(Debug, Clone, PartialEq)]
pub struct Morphism {
    pub interp: Interpretation,
    pub certificates: Vec<Certificate>,
}

impl Morphism {
    pub fn verified(&self) -> bool {
        self.certificates.iter().all(|c| c.outcome.is_proven())
    }

    pub fn identity(theory: &Theory, bounds: &Bounds, cache: &mut CertCache) -> Morphism {
        certify(Interpretation::identity(theory), bounds, cache)
            .expect("identity interpretation is valid")
    }

    pub fn compose(
        g: &Morphism,
        f: &Morphism,
        bounds: &Bounds,
        cache: &mut CertCache,
    ) -> Result<Morphism, MorphismError> {
        certify(Interpretation::compose(&g.interp, &f.interp)?, bounds, cache)
    }
}

/// Discharges every obligation of the interpretation with the bounded
/// prover, reusing cached outcomes.
pub fn certify(
    interp: Interpretation,
    bounds: &Bounds,
    cache: &mut CertCache,
) -> Result<Morphism, MorphismError> {
    interp.validate()?;
    let target_digest = interp.target.digest();
    let mut certificates = Vec::new();
    for (axiom, valuation, sequent) in interp.obligations()? {
        let key = (target_digest.clone(), sequent_digest(&sequent));
        let outcome = match cache.entries.get(&key) {
            Some(o) => o.clone(),
            None => {
                let o = prove_sequent(&interp.target, &sequent, bounds);
                cache.entries.insert(key, o.clone());
                o
            }
        };
        certificates.push(Certificate {
            axiom,
            valuation,
            sequent,
            outcome,
        });
    }
    Ok(Morphism {
        interp,
        certificates,
    })
}

/// `f*(M)`: the reduct of a target model along the morphism, interpreting
/// each source symbol by evaluating its assignment; undefined wherever the
/// restriction fails or the body is undefined.
pub fn reduct_model(f: &Interpretation, m: &FiniteModel) -> Result<FiniteModel, MorphismError> {
    let mut functions = BTreeMap::new();
    for (sym, sig) in &f.source.functions {
        let body = f
            .functions
            .get(sym)
            .ok_or_else(|| MorphismError::MissingAssignment {
                kind: "function",
                sym: sym.token(),
            })?;
        let vars = canonical_args(&sig.args);
        let mut table = BTreeMap::new();
        for env in m.environments(&vars) {
            if !m.formula_holds(&body.restriction, &env)? {
                continue;
            }
            if let Some(e) = m.eval_term(&body.term, &env)? {
                let tuple = vars.iter().map(|v| env[v].clone()).collect();
                table.insert(tuple, e);
            }
        }
        functions.insert(sym.clone(), table);
    }
    let mut predicates = BTreeMap::new();
    for (sym, sig) in &f.source.predicates {
        let body = f
            .predicates
            .get(sym)
            .ok_or_else(|| MorphismError::MissingAssignment {
                kind: "predicate",
                sym: sym.token(),
            })?;
        let vars = canonical_args(&sig.args);
        let mut set = BTreeSet::new();
        for env in m.environments(&vars) {
            if m.formula_holds(body, &env)? {
                set.insert(vars.iter().map(|v| env[v].clone()).collect());
            }
        }
        predicates.insert(sym.clone(), set);
    }
    Ok(FiniteModel {
        name: format!("{}-reduct", m.name),
        cutoff: f.source.cutoff,
        carriers: m.carriers.clone(),
        functions,
        predicates,
    })
}

impl Interpretation {
    pub fn to_sexpr(&self) -> Sexpr {
        let mut items = vec![
            Sexpr::atom("morphism"),
            Sexpr::list(vec![Sexpr::atom("source"), Sexpr::atom(&self.source.name)]),
            Sexpr::list(vec![Sexpr::atom("target"), Sexpr::atom(&self.target.name)]),
        ];
        for (sym, body) in &self.functions {
            items.push(Sexpr::list(vec![
                Sexpr::atom("fun"),
                Sexpr::atom(sym.token()),
                Sexpr::list(vec![Sexpr::atom("term"), body.term.to_sexpr()]),
                Sexpr::list(vec![Sexpr::atom("restrict"), body.restriction.to_sexpr()]),
            ]));
        }
        for (sym, body) in &self.predicates {
            items.push(Sexpr::list(vec![
                Sexpr::atom("pred"),
                Sexpr::atom(sym.token()),
                Sexpr::list(vec![Sexpr::atom("formula"), body.to_sexpr()]),
            ]));
        }
        Sexpr::list(items)
    }

    pub fn to_text(&self) -> String {
        format!("{}\n", self.to_sexpr())
    }

    pub fn parse(
        source: &Theory,
        target: &Theory,
        input: &str,
    ) -> Result<Interpretation, MorphismError> {
        let e = sexpr::parse_one(input)?;
        Self::from_sexpr(source, target, &e)
    }

    pub fn from_sexpr(
        source: &Theory,
        target: &Theory,
        e: &Sexpr,
    ) -> Result<Interpretation, MorphismError> {
        let malformed = |ctx: &str, expected: &str, got: &Sexpr| MorphismError::Malformed {
            context: ctx.into(),
            expected: expected.into(),
            got: got.to_string(),
        };
        let items = e
            .tagged("morphism")
            .ok_or_else(|| malformed("morphism", "(morphism ...)", e))?;
        let mut interp = Interpretation {
            source: source.clone(),
            target: target.clone(),
            functions: IndexMap::new(),
            predicates: IndexMap::new(),
        };
        let no_levels = BTreeMap::new();
        for item in items {
            let Some(head) = item.head() else {
                return Err(malformed("morphism", "a tagged clause", item));
            };
            let parts = item.as_list().unwrap();
            match head {
                "source" | "target" => {
                    let [_, n] = parts else {
                        return Err(malformed(head, &format!("({head} name)"), item));
                    };
                    let named = n.as_atom().unwrap_or_default();
                    let expected = if head == "source" {
                        &source.name
                    } else {
                        &target.name
                    };
                    if named != expected {
                        return Err(MorphismError::WrongTheory {
                            expected: expected.clone(),
                            got: named.to_string(),
                        });
                    }
                }
                "fun" => {
                    let [_, tok, term, restrict] = parts else {
                        return Err(malformed(
                            "fun",
                            "(fun sym (term ...) (restrict ...))",
                            item,
                        ));
                    };
                    let (sym, vars) =
                        assignment_env(source, tok, |sig: &FnSig| sig.args.clone(), &malformed)?;
                    let parser = TermParser {
                        theory: target,
                        vars: &vars,
                        levels: &no_levels,
                    };
                    let [t] = term
                        .tagged("term")
                        .ok_or_else(|| malformed("fun", "(term ...)", term))?
                    else {
                        return Err(malformed("fun", "(term ...)", term));
                    };
                    let [phi] = restrict
                        .tagged("restrict")
                        .ok_or_else(|| malformed("fun", "(restrict (and ...))", restrict))?
                    else {
                        return Err(malformed("fun", "(restrict (and ...))", restrict));
                    };
                    interp.functions.insert(
                        sym,
                        RestrictedTerm {
                            term: parser.parse_term(t)?,
                            restriction: parser.parse_formula(phi)?,
                        },
                    );
                }
                "pred" => {
                    let [_, tok, formula] = parts else {
                        return Err(malformed("pred", "(pred sym (formula (and ...)))", item));
                    };
                    let (sym, vars) = assignment_env(
                        source,
                        tok,
                        |sig: &crate::theory::PredSig| sig.args.clone(),
                        &malformed,
                    )?;
                    let parser = TermParser {
                        theory: target,
                        vars: &vars,
                        levels: &no_levels,
                    };
                    let [phi] = formula
                        .tagged("formula")
                        .ok_or_else(|| malformed("pred", "(formula (and ...))", formula))?
                    else {
                        return Err(malformed("pred", "(formula (and ...))", formula));
                    };
                    interp.predicates.insert(sym, parser.parse_formula(phi)?);
                }
                other => {
                    return Err(malformed(
                        "morphism",
                        "source/target/fun/pred",
                        &Sexpr::atom(other),
                    ))
                }
            }
        }
        interp.validate()?;
        Ok(interp)
    }
}

fn assignment_env<Sig>(
    source: &Theory,
    tok: &Sexpr,
    args_of: impl Fn(&Sig) -> Vec<Sort>,
    malformed: &impl Fn(&str, &str, &Sexpr) -> MorphismError,
) -> Result<(SymId, BTreeMap<String, Sort>), MorphismError>
where
    Theory: SigLookup<Sig>,
{
    let token = tok
        .as_atom()
        .ok_or_else(|| malformed("assignment", "a symbol token", tok))?;
    let sym = SymId::from_token(token)?;
    let sig = source.lookup(&sym)?;
    let vars = canonical_args(&args_of(sig))
        .into_iter()
        .map(|v| (v.name, v.sort))
        .collect();
    Ok((sym, vars))
}

/// Helper trait so the file parser can resolve both kinds of signature.
pub trait SigLookup<Sig> {
    fn lookup(&self, sym: &SymId) -> Result<&Sig, SyntaxError>;
}

impl SigLookup<FnSig> for Theory {
    fn lookup(&self, sym: &SymId) -> Result<&FnSig, SyntaxError> {
        self.fn_sig(sym)
    }
}

impl SigLookup<crate::theory::PredSig> for Theory {
    fn lookup(&self, sym: &SymId) -> Result<&crate::theory::PredSig, SyntaxError> {
        self.pred_sig(sym)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::singleton_model;

    fn mono() -> Theory {
        Theory::parse(
            "mono",
            "\
(sort ctx)
(fun e (args) (result (ctx 0)))
(fun op (args (ctx 0) (ctx 0)) (result (ctx 0)))
(axiom e-def (vars) (seq (and) (and (def (e)))))
(axiom op-def (vars (x (ctx 0)) (y (ctx 0))) (seq (and) (and (def (op x y)))))
(axiom unit-l (vars (x (ctx 0))) (seq (and) (and (= (op (e) x) x))))
(axiom unit-r (vars (x (ctx 0))) (seq (and) (and (= (op x (e)) x))))
",
            1,
        )
        .unwrap()
    }

    /// mono with op flipped; used as a non-identity endomorphism target.
    fn flip() -> Interpretation {
        let th = mono();
        let mut interp = Interpretation::identity(&th);
        let x1 = Term::var("x1", Sort::ctx(0));
        let x2 = Term::var("x2", Sort::ctx(0));
        let flipped = th.app(SymId::new("op", vec![]), vec![x2, x1]).unwrap();
        interp
            .functions
            .insert(SymId::new("op", vec![]), RestrictedTerm::unrestricted(flipped));
        interp
    }

    #[test]
    fn identity_translates_terms_unrestricted() {
        let th = mono();
        let id = Interpretation::identity(&th);
        id.validate().unwrap();
        let x = Term::var("x", Sort::ctx(0));
        let t = th
            .app(
                SymId::new("op", vec![]),
                vec![th.app(SymId::new("e", vec![]), vec![]).unwrap(), x],
            )
            .unwrap();
        let out = id.apply_to_term(&t).unwrap();
        assert_eq!(out, RestrictedTerm::unrestricted(t));
    }

    #[test]
    fn two_deep_unfolding() {
        // f(op) = op(x2, x1) restricted by x1 = e; f(e) = e
        let th = mono();
        let mut f = flip();
        let e = th.app(SymId::new("e", vec![]), vec![]).unwrap();
        let x1 = Term::var("x1", Sort::ctx(0));
        let guard = Formula::atom(Atom::eq(x1.clone(), e.clone()).unwrap());
        let op = SymId::new("op", vec![]);
        let body = f.functions.get(&op).unwrap().term.clone();
        f.functions.insert(
            op.clone(),
            RestrictedTerm {
                term: body,
                restriction: guard,
            },
        );
        // t = op(e, y): substitution puts e for x1 in body and guard
        let y = Term::var("y", Sort::ctx(0));
        let t = th.app(op.clone(), vec![e.clone(), y.clone()]).unwrap();
        let out = f.apply_to_term(&t).unwrap();
        let expected_term = th.app(op, vec![y, e.clone()]).unwrap();
        assert_eq!(out.term, expected_term);
        assert_eq!(
            out.restriction,
            Formula::atom(Atom::eq(e.clone(), e).unwrap())
        );
    }

    #[test]
    fn equality_atom_conjoins_restrictions() {
        let th = mono();
        let mut f = flip();
        let op = SymId::new("op", vec![]);
        let e = th.app(SymId::new("e", vec![]), vec![]).unwrap();
        let x1 = Term::var("x1", Sort::ctx(0));
        let body = f.functions.get(&op).unwrap().term.clone();
        let guard = Formula::atom(Atom::eq(x1, e.clone()).unwrap());
        f.functions.insert(
            op.clone(),
            RestrictedTerm {
                term: body,
                restriction: guard,
            },
        );
        let y = Term::var("y", Sort::ctx(0));
        let t = th.app(op, vec![e.clone(), y.clone()]).unwrap();
        let atom = Atom::eq(t, y.clone()).unwrap();
        let out = f.apply_to_atom(&atom).unwrap();
        // translated equality first, then the instantiated guard
        assert_eq!(out.0.len(), 2);
        assert_eq!(out.0[1], Atom::eq(e.clone(), e).unwrap());
    }

    #[test]
    fn identity_certifies() {
        let th = mono();
        let mut cache = CertCache::new();
        let id = Morphism::identity(&th, &Bounds::default(), &mut cache);
        assert!(id.verified());
        assert_eq!(id.certificates.len(), th.axioms.len());
        // a second run hits the cache
        let before = cache.len();
        let id2 = Morphism::identity(&th, &Bounds::default(), &mut cache);
        assert!(id2.verified());
        assert_eq!(cache.len(), before);
    }

    #[test]
    fn flip_is_a_morphism_and_composes_to_identity_up_to_equivalence() {
        let th = mono();
        let bounds = Bounds::default();
        let mut cache = CertCache::new();
        let flip = certify(flip(), &bounds, &mut cache).unwrap();
        assert!(flip.verified());
        let id = Morphism::identity(&th, &bounds, &mut cache);
        // flip ∘ flip restores the original order
        let twice = Morphism::compose(&flip, &flip, &bounds, &mut cache).unwrap();
        assert!(twice.verified());
        assert_eq!(
            check_equivalence(&twice.interp, &id.interp, &bounds).unwrap(),
            Verdict::Proven
        );
        // flip itself is not the identity; a small budget keeps the
        // exhaustive failure search quick
        let small = Bounds {
            steps: 500,
            ..bounds
        };
        assert_eq!(
            check_equivalence(&flip.interp, &id.interp, &small).unwrap(),
            Verdict::Unknown
        );
    }

    #[test]
    fn compose_with_identity_is_equivalent() {
        let bounds = Bounds::default();
        let mut cache = CertCache::new();
        let f = certify(flip(), &bounds, &mut cache).unwrap();
        let id = Interpretation::identity(&f.interp.source);
        let left = Interpretation::compose(&f.interp, &id).unwrap();
        let right = Interpretation::compose(&id, &f.interp).unwrap();
        assert_eq!(
            check_equivalence(&left, &f.interp, &bounds).unwrap(),
            Verdict::Proven
        );
        assert_eq!(
            check_equivalence(&right, &f.interp, &bounds).unwrap(),
            Verdict::Proven
        );
    }

    #[test]
    fn identity_reduct_is_identity() {
        let th = mono();
        let m = singleton_model(&th);
        let id = Interpretation::identity(&th);
        let back = reduct_model(&id, &m).unwrap();
        assert_eq!(back.functions, m.functions);
        assert_eq!(back.predicates, m.predicates);
        assert_eq!(back.carriers, m.carriers);
    }

    #[test]
    fn restricted_reduct_is_partial_where_guard_fails() {
        let th = mono();
        let mut m = singleton_model(&th);
        m.carriers.insert(Sort::ctx(0), vec!["a".into(), "b".into()]);
        let op = SymId::new("op", vec![]);
        let e_sym = SymId::new("e", vec![]);
        m.functions.insert(e_sym.clone(), BTreeMap::from([(vec![], "a".to_string())]));
        let mut table = BTreeMap::new();
        for x in ["a", "b"] {
            for y in ["a", "b"] {
                table.insert(vec![x.to_string(), y.to_string()], y.to_string());
            }
        }
        m.functions.insert(op.clone(), table);
        // guard op by x1 = e: the reduct's op is only defined on x1 = a
        let mut f = Interpretation::identity(&th);
        let x1 = Term::var("x1", Sort::ctx(0));
        let e = th.app(e_sym, vec![]).unwrap();
        let body = f.functions.get(&op).unwrap().term.clone();
        f.functions.insert(
            op.clone(),
            RestrictedTerm {
                term: body,
                restriction: Formula::atom(Atom::eq(x1, e).unwrap()),
            },
        );
        let red = reduct_model(&f, &m).unwrap();
        let table = &red.functions[&op];
        assert_eq!(table.len(), 2);
        assert!(table.contains_key(&vec!["a".to_string(), "a".to_string()]));
        assert!(table.contains_key(&vec!["a".to_string(), "b".to_string()]));
    }

    #[test]
    fn reduct_of_valid_model_is_valid() {
        let th = mono();
        let bounds = Bounds::default();
        let mut cache = CertCache::new();
        let f = certify(flip(), &bounds, &mut cache).unwrap();
        let m = singleton_model(&th);
        assert!(m.check_model(&th).unwrap().passed());
        let red = reduct_model(&f.interp, &m).unwrap();
        assert!(red.check_model(&th).unwrap().passed());
    }

    #[test]
    fn file_round_trip() {
        let th = mono();
        let f = flip();
        let text = f.to_text();
        let back = Interpretation::parse(&th, &th, &text).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn differing_sort_sets_rejected() {
        let a = mono();
        let b = Theory::parse(
            "other",
            "(sort ctx)\n(sort tm)\n(fun e (args) (result (ctx 0)))\n(fun op (args (ctx 0) (ctx 0)) (result (ctx 0)))",
            1,
        )
        .unwrap();
        let mut f = Interpretation::identity(&a);
        f.target = b;
        assert!(matches!(
            f.validate(),
            Err(MorphismError::SortMismatch { .. })
        ));
    }
}
