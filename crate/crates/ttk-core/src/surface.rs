//! Surface syntax for contextual presentations: basic symbol declarations,
//! rule files in s-expression and infix form, the elaborator into the core
//! calculus, and the inverse printer.
//!
//! A basic symbol `σ : (p₁,n₁) × … × (p_k,n_k) → (p,n)` denotes the family
//! `σ_m : (ctx,m) × (p₁,n₁+m) × … → (p,n+m)` instantiated for every `m` up
//! to the level cutoff. Judgments elaborate against an ambient named context
//! of length `m`; metavariables stay core variables, bound names become `v`
//! projections, and weakening is inserted where a metavariable is used below
//! extra binders.

use std::collections::BTreeMap;

use crate::sexpr::{self, Sexpr};
use crate::subst::{ctx_sym, ft_sym, star, subst_sym, ty_sym, v_sym, weaken};
use crate::syntax::{
    mk_defined, ArgGroup, Atom, Formula, LevelExpr, LevelParam, Sequent, Sort, SortExpr, SymId,
    SymbolKind, SymbolSchema, SyntaxError, Term, Var, CTX, TM, TY,
};
use crate::theory::{Theory, TheoryError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SurfaceError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Elab(String),
}

impl From<sexpr::ParseError> for SurfaceError {
    fn from(e: sexpr::ParseError) -> SurfaceError {
        SurfaceError::Parse(e.to_string())
    }
}

impl From<TheoryError> for SurfaceError {
    fn from(e: TheoryError) -> SurfaceError {
        match e {
            TheoryError::Syntax(s) => SurfaceError::Syntax(s),
            other => SurfaceError::Elab(other.to_string()),
        }
    }
}

/// A declared basic function symbol, sorts in resolved (ctx/tm) form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicFn {
    pub name: String,
    pub args: Vec<Sort>,
    pub result: Sort,
}

/// A declared basic predicate symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicPred {
    pub name: String,
    pub args: Vec<Sort>,
}

/// The `m`-th member of a basic symbol's family.
pub fn fam_sym(name: &str, m: u32) -> SymId {
    SymId::new(name, vec![m])
}

/// The paper-level reading of a resolved sort: `tm` stays itself, a positive
/// `ctx` level is a type one level down, `(ctx,0)` is the base context sort.
pub fn paper_kind(s: &Sort) -> (&'static str, u32) {
    if s.basic == TM {
        (TM, s.level)
    } else if s.level > 0 {
        (TY, s.level - 1)
    } else {
        (CTX, 0)
    }
}

/// A surface term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SurfaceTerm {
    /// A named bound variable or metavariable.
    Ref(String),
    /// `ft` of a type (one level of context truncation).
    Ft(Box<SurfaceTerm>),
    /// The type of a term.
    TyOf(Box<SurfaceTerm>),
    /// `X[x ↦ a, …]` metavariable instantiation with identity filling.
    Sub {
        meta: String,
        repl: Vec<(String, SurfaceTerm)>,
    },
    /// Application of a basic symbol.
    App { sym: String, args: Vec<SurfaceArg> },
}

/// One argument of a basic-symbol application: binder names (optionally
/// annotated with their types) and the body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceArg {
    pub binders: Vec<(String, Option<SurfaceTerm>)>,
    pub body: SurfaceTerm,
}

impl SurfaceArg {
    pub fn plain(body: SurfaceTerm) -> SurfaceArg {
        SurfaceArg {
            binders: vec![],
            body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JudgmentBody {
    Type(SurfaceTerm),
    Of(SurfaceTerm, SurfaceTerm),
    Eq(SurfaceTerm, SurfaceTerm),
    Defined(SurfaceTerm),
    Holds(String, Vec<SurfaceArg>),
}

/// `x₁ : A₁, …, x_m : A_m ⊢ body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgment {
    pub context: Vec<(String, SurfaceTerm)>,
    pub body: JudgmentBody,
}

/// A metavariable declaration: resolved sort and (optionally inferred)
/// context variable names, one per paper level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaDecl {
    pub name: String,
    pub sort: Sort,
    pub context: Option<Vec<String>>,
}

impl MetaDecl {
    pub fn arity(&self) -> u32 {
        paper_kind(&self.sort).1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceRule {
    pub name: String,
    pub metas: Vec<MetaDecl>,
    pub premises: Vec<Judgment>,
    pub conclusion: Judgment,
}

/// A parsed rule file: basic symbols plus rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextualSpec {
    pub name: String,
    pub converse: bool,
    pub functions: Vec<BasicFn>,
    pub predicates: Vec<BasicPred>,
    pub rules: Vec<SurfaceRule>,
}

/// The substitution calculus plus every family instance `σ_m`, `R_m` for
/// `m` up to the cutoff. Results of sort `(ctx,0)` are rejected.
pub fn instantiate_signature(
    name: &str,
    functions: &[BasicFn],
    predicates: &[BasicPred],
    cutoff: u32,
) -> Result<Theory, SurfaceError> {
    let mut th = crate::subst::build_s(cutoff);
    th.name = format!("{name}@{cutoff}");
    for f in functions {
        if f.result == Sort::ctx(0) {
            return Err(SurfaceError::Elab(format!(
                "basic symbol {} targets (ctx 0); declare it as a predicate",
                f.name
            )));
        }
        let mut args = vec![ArgGroup::One(SortExpr::new(CTX, LevelExpr::var("m")))];
        for a in &f.args {
            args.push(ArgGroup::One(SortExpr::new(
                a.basic.clone(),
                LevelExpr::plus("m", a.level as i64),
            )));
        }
        th.add_schema(SymbolSchema {
            name: f.name.clone(),
            kind: SymbolKind::Function,
            params: vec![LevelParam::plain("m")],
            args,
            result: Some(SortExpr::new(
                f.result.basic.clone(),
                LevelExpr::plus("m", f.result.level as i64),
            )),
        })?;
    }
    for p in predicates {
        let mut args = vec![ArgGroup::One(SortExpr::new(CTX, LevelExpr::var("m")))];
        for a in &p.args {
            args.push(ArgGroup::One(SortExpr::new(
                a.basic.clone(),
                LevelExpr::plus("m", a.level as i64),
            )));
        }
        th.add_schema(SymbolSchema {
            name: p.name.clone(),
            kind: SymbolKind::Predicate,
            params: vec![LevelParam::plain("m")],
            args,
            result: None,
        })?;
    }
    Ok(th)
}

type Env = Vec<(String, Option<Term>)>;

/// Elaborates rules of one presentation; meta contexts left open in the
/// declarations are frozen at first use.
pub struct Elaborator<'a> {
    pub th: &'a Theory,
    fns: BTreeMap<String, BasicFn>,
    preds: BTreeMap<String, BasicPred>,
    metas: BTreeMap<String, MetaDecl>,
}

/// A rule together with its elaborated sequent and resolved metavariables.
#[derive(Debug, Clone, PartialEq)]
pub struct ElaboratedRule {
    pub name: String,
    pub metas: Vec<MetaDecl>,
    pub sequent: Sequent,
    /// The converse closure sequent, when the conclusion is a typing or
    /// type-formation judgment and the rule has premises.
    pub converse: Option<Sequent>,
}

impl<'a> Elaborator<'a> {
    pub fn new(
        th: &'a Theory,
        functions: &[BasicFn],
        predicates: &[BasicPred],
    ) -> Elaborator<'a> {
        Elaborator {
            th,
            fns: functions
                .iter()
                .map(|f| (f.name.clone(), f.clone()))
                .collect(),
            preds: predicates
                .iter()
                .map(|p| (p.name.clone(), p.clone()))
                .collect(),
            metas: BTreeMap::new(),
        }
    }

    fn ctx_term(&self, env: &Env) -> Result<Term, SurfaceError> {
        match env.last() {
            None => Ok(star(self.th)?),
            Some((name, Some(t))) => {
                let _ = name;
                Ok(t.clone())
            }
            Some((name, None)) => Err(SurfaceError::Elab(format!(
                "binder {name} needs a type annotation here"
            ))),
        }
    }

    fn decode_var(&self, env: &Env, pos: usize) -> Result<Term, SurfaceError> {
        let m = env.len() as u32;
        let c = self.ctx_term(env)?;
        Ok(self.th.app(v_sym(m, m - 1 - pos as u32), vec![c])?)
    }

    fn meta(&self, name: &str) -> Option<&MetaDecl> {
        self.metas.get(name)
    }

    /// Freezes the context of `name` to `ctx` or checks it against the
    /// frozen value.
    fn resolve_meta_ctx(&mut self, name: &str, ctx: Vec<String>) -> Result<(), SurfaceError> {
        let decl = self
            .metas
            .get_mut(name)
            .ok_or_else(|| SurfaceError::Elab(format!("unknown metavariable {name}")))?;
        match &decl.context {
            None => {
                decl.context = Some(ctx);
                Ok(())
            }
            Some(have) if *have == ctx => Ok(()),
            Some(have) => Err(SurfaceError::Elab(format!(
                "metavariable {name} used with context {ctx:?}, declared {have:?}"
            ))),
        }
    }

    /// A metavariable occurrence as a term in `env`: direct when aligned,
    /// weakened when its context is a proper prefix of `env`.
    fn meta_occurrence(&mut self, name: &str, env: &Env) -> Result<Term, SurfaceError> {
        let decl = self
            .meta(name)
            .cloned()
            .ok_or_else(|| SurfaceError::Elab(format!("unknown name {name}")))?;
        let n = decl.arity() as usize;
        let m = env.len();
        if n > m {
            return Err(SurfaceError::Elab(format!(
                "metavariable {name} of arity {n} used in a context of length {m}"
            )));
        }
        let prefix: Vec<String> = env[..n].iter().map(|(s, _)| s.clone()).collect();
        self.resolve_meta_ctx(name, prefix)?;
        let raw = Term::Var(Var::new(name, decl.sort.clone()));
        if n == m {
            return Ok(raw);
        }
        let (p, lvl) = paper_kind(&decl.sort);
        if p == CTX {
            return Err(SurfaceError::Elab(format!(
                "cannot weaken metavariable {name} of sort (ctx 0)"
            )));
        }
        let c = self.ctx_term(env)?;
        Ok(weaken(self.th, (m - n) as u32, 0, p, lvl, &c, &raw)?)
    }

    pub fn elab_term(&mut self, env: &Env, t: &SurfaceTerm) -> Result<Term, SurfaceError> {
        match t {
            SurfaceTerm::Ref(name) => {
                if let Some(pos) = env.iter().rposition(|(n, _)| n == name) {
                    return self.decode_var(env, pos);
                }
                self.meta_occurrence(name, env)
            }
            SurfaceTerm::Ft(_) => {
                let mut wraps = 0u32;
                let mut cur = t;
                while let SurfaceTerm::Ft(inner) = cur {
                    wraps += 1;
                    cur = inner;
                }
                if let SurfaceTerm::Ref(name) = cur {
                    let bound = env.iter().any(|(n, _)| n == name);
                    if !bound && self.meta(name).is_some() {
                        return self.ft_of_meta(env, name, wraps);
                    }
                }
                let mut out = self.elab_term(env, cur)?;
                for _ in 0..wraps {
                    let lvl = out.sort().level;
                    if out.sort().basic != CTX || lvl == 0 {
                        return Err(SurfaceError::Elab(format!(
                            "ft applied to a term of sort {}",
                            out.sort()
                        )));
                    }
                    out = self.th.app(ft_sym(lvl - 1), vec![out])?;
                }
                Ok(out)
            }
            SurfaceTerm::TyOf(inner) => {
                let it = self.elab_term(env, inner)?;
                if it.sort().basic != TM {
                    return Err(SurfaceError::Elab(format!(
                        "ty applied to a term of sort {}",
                        it.sort()
                    )));
                }
                Ok(self.th.app(ty_sym(it.sort().level), vec![it])?)
            }
            SurfaceTerm::Sub { meta, repl } => self.elab_sub(env, meta, repl),
            SurfaceTerm::App { sym, args } => {
                let bf = self
                    .fns
                    .get(sym)
                    .cloned()
                    .ok_or_else(|| SurfaceError::Elab(format!("unknown symbol {sym}")))?;
                if args.len() != bf.args.len() {
                    return Err(SurfaceError::Elab(format!(
                        "{sym} expects {} arguments, got {}",
                        bf.args.len(),
                        args.len()
                    )));
                }
                let m = env.len() as u32;
                let c = self.ctx_term(env)?;
                let mut targs = vec![c.clone()];
                for (sa, sort) in args.iter().zip(bf.args.iter()) {
                    targs.push(self.elab_arg(env, &c, sort, sa)?);
                }
                Ok(self.th.app(fam_sym(sym, m), targs)?)
            }
        }
    }

    /// `ft^i(X)` behaves as a metavariable with the first `n-i` context
    /// variables of `X`.
    fn ft_of_meta(&mut self, env: &Env, name: &str, wraps: u32) -> Result<Term, SurfaceError> {
        let decl = self.meta(name).cloned().unwrap();
        let (p, lvl) = paper_kind(&decl.sort);
        if p != TY || wraps > lvl {
            return Err(SurfaceError::Elab(format!(
                "ft^{wraps} cannot apply to metavariable {name} of sort {}",
                decl.sort
            )));
        }
        let n = (lvl - wraps) as usize;
        let m = env.len();
        if n > m {
            return Err(SurfaceError::Elab(format!(
                "ft^{wraps}({name}) has arity {n}, used in a context of length {m}"
            )));
        }
        match &decl.context {
            Some(have) => {
                let prefix: Vec<String> = env[..n].iter().map(|(s, _)| s.clone()).collect();
                if have[..n] != prefix[..] {
                    return Err(SurfaceError::Elab(format!(
                        "ft^{wraps}({name}) used with context {prefix:?}, declared {:?}",
                        &have[..n]
                    )));
                }
            }
            None => {
                return Err(SurfaceError::Elab(format!(
                    "metavariable {name} needs a declared context to appear under ft"
                )))
            }
        }
        let mut raw = Term::Var(Var::new(name, decl.sort.clone()));
        for _ in 0..wraps {
            let l = raw.sort().level;
            raw = self.th.app(ft_sym(l - 1), vec![raw])?;
        }
        if n == m {
            return Ok(raw);
        }
        let c = self.ctx_term(env)?;
        Ok(weaken(self.th, (m - n) as u32, 0, TY, n as u32, &c, &raw)?)
    }

    fn elab_sub(
        &mut self,
        env: &Env,
        meta: &str,
        repl: &[(String, SurfaceTerm)],
    ) -> Result<Term, SurfaceError> {
        let decl = self
            .meta(meta)
            .cloned()
            .ok_or_else(|| SurfaceError::Elab(format!("unknown metavariable {meta}")))?;
        let n = decl.arity();
        let ctx = match &decl.context {
            Some(c) => c.clone(),
            None if repl.len() == n as usize => {
                let names: Vec<String> = repl.iter().map(|(x, _)| x.clone()).collect();
                self.resolve_meta_ctx(meta, names.clone())?;
                names
            }
            None => {
                return Err(SurfaceError::Elab(format!(
                    "metavariable {meta} needs a declared context for partial substitution"
                )))
            }
        };
        for (x, _) in repl {
            if !ctx.contains(x) {
                return Err(SurfaceError::Elab(format!(
                    "{meta}[{x} ↦ …]: {x} is not in {meta}'s context"
                )));
            }
        }
        let m = env.len() as u32;
        let c = self.ctx_term(env)?;
        let mut comps = Vec::new();
        for name in &ctx {
            if let Some((_, e)) = repl.iter().find(|(x, _)| x == name) {
                comps.push(self.elab_term(env, e)?);
            } else if let Some(pos) = env.iter().rposition(|(x, _)| x == name) {
                comps.push(self.decode_var(env, pos)?);
            } else {
                return Err(SurfaceError::Elab(format!(
                    "context variable {name} of {meta} is neither replaced nor in scope"
                )));
            }
        }
        let (p, _) = paper_kind(&decl.sort);
        if p == CTX {
            return Err(SurfaceError::Elab(format!(
                "cannot substitute into {meta} of sort (ctx 0)"
            )));
        }
        let mut args = vec![c, Term::Var(Var::new(meta, decl.sort.clone()))];
        args.extend(comps);
        Ok(self.th.app(subst_sym(p, m, n), args)?)
    }

    /// One argument of a basic-symbol application. A bare metavariable whose
    /// context is exactly the binder list weakens below the ambient context;
    /// anything else elaborates under the extended environment.
    fn elab_arg(
        &mut self,
        env: &Env,
        c: &Term,
        sort: &Sort,
        sa: &SurfaceArg,
    ) -> Result<Term, SurfaceError> {
        let (p, n_i) = paper_kind(sort);
        if sa.binders.len() != n_i as usize {
            return Err(SurfaceError::Elab(format!(
                "argument of sort {sort} expects {n_i} binders, got {}",
                sa.binders.len()
            )));
        }
        if n_i == 0 {
            return self.elab_term(env, &sa.body);
        }
        let m = env.len() as u32;
        if let SurfaceTerm::Ref(name) = &sa.body {
            let bound = env.iter().any(|(x, _)| x == name);
            if !bound {
                if let Some(decl) = self.meta(name).cloned() {
                    let (dp, dn) = paper_kind(&decl.sort);
                    if (dp, dn) != (p, n_i) {
                        return Err(SurfaceError::Elab(format!(
                            "metavariable {name} of sort {} cannot fill an argument of sort {sort}",
                            decl.sort
                        )));
                    }
                    let names: Vec<String> =
                        sa.binders.iter().map(|(x, _)| x.clone()).collect();
                    self.resolve_meta_ctx(name, names)?;
                    let raw = Term::Var(Var::new(name, decl.sort));
                    return if m == 0 {
                        Ok(raw)
                    } else {
                        Ok(weaken(self.th, m, n_i, p, 0, c, &raw)?)
                    };
                }
            }
        }
        let mut env2 = env.clone();
        for (bn, ann) in &sa.binders {
            let ty = match ann {
                Some(a) => {
                    let t = self.elab_term(&env2, a)?;
                    let want = env2.len() as u32 + 1;
                    if t.sort().basic != CTX || t.sort().level != want {
                        return Err(SurfaceError::Elab(format!(
                            "binder {bn}: annotation has sort {}, expected (ctx {want})",
                            t.sort()
                        )));
                    }
                    Some(t)
                }
                None => None,
            };
            env2.push((bn.clone(), ty));
        }
        self.elab_term(&env2, &sa.body)
    }

    /// Builds the named environment of a judgment, elaborating annotations
    /// left to right.
    fn judgment_env(&mut self, j: &Judgment) -> Result<Env, SurfaceError> {
        let mut env: Env = Vec::new();
        for (name, ty) in &j.context {
            let t = self.elab_term(&env, ty)?;
            let want = env.len() as u32 + 1;
            if t.sort().basic != CTX || t.sort().level != want {
                return Err(SurfaceError::Elab(format!(
                    "context entry {name}: type has sort {}, expected (ctx {want})",
                    t.sort()
                )));
            }
            env.push((name.clone(), Some(t)));
        }
        Ok(env)
    }

    /// The formula of a judgment, and the elaborated subject term for
    /// converse closure when the body is a typing judgment.
    pub fn elab_judgment(
        &mut self,
        j: &Judgment,
    ) -> Result<(Formula, Option<Term>), SurfaceError> {
        let env = self.judgment_env(j)?;
        let m = env.len() as u32;
        match &j.body {
            JudgmentBody::Type(a) => {
                let t = self.elab_term(&env, a)?;
                if t.sort().basic != CTX || t.sort().level != m + 1 {
                    return Err(SurfaceError::Elab(format!(
                        "type judgment subject has sort {}, expected (ty {m})",
                        t.sort()
                    )));
                }
                Ok((Formula::atom(mk_defined(&t)), None))
            }
            JudgmentBody::Of(a, ty) => {
                let ta = self.elab_term(&env, a)?;
                if *ta.sort() != Sort::tm(m) {
                    return Err(SurfaceError::Elab(format!(
                        "typing judgment subject has sort {}, expected (tm {m})",
                        ta.sort()
                    )));
                }
                let tt = self.elab_term(&env, ty)?;
                let lhs = self.th.app(ty_sym(m), vec![ta.clone()])?;
                Ok((Formula::atom(Atom::eq(lhs, tt)?), Some(ta)))
            }
            JudgmentBody::Eq(a, b) => {
                let ta = self.elab_term(&env, a)?;
                let tb = self.elab_term(&env, b)?;
                Ok((Formula::atom(Atom::eq(ta, tb)?), None))
            }
            JudgmentBody::Defined(a) => {
                let t = self.elab_term(&env, a)?;
                Ok((Formula::atom(mk_defined(&t)), None))
            }
            JudgmentBody::Holds(r, args) => {
                let bp = self
                    .preds
                    .get(r)
                    .cloned()
                    .ok_or_else(|| SurfaceError::Elab(format!("unknown predicate {r}")))?;
                if args.len() != bp.args.len() {
                    return Err(SurfaceError::Elab(format!(
                        "{r} expects {} arguments, got {}",
                        bp.args.len(),
                        args.len()
                    )));
                }
                let c = self.ctx_term(&env)?;
                let mut targs = vec![c.clone()];
                for (sa, sort) in args.iter().zip(bp.args.iter()) {
                    targs.push(self.elab_arg(&env, &c, sort, sa)?);
                }
                Ok((
                    Formula::atom(self.th.pred_atom(fam_sym(r, m), targs)?),
                    None,
                ))
            }
        }
    }

    /// Elaborates a whole rule. `converse` controls the closure convention:
    /// a premised rule concluding `Γ ⊢ A type` gains `Γ ⊢ A type ⊢ φ`, one
    /// concluding `Γ ⊢ a : A` gains `Γ ⊢ a↓ ⊢ φ`.
    pub fn elab_rule(
        &mut self,
        rule: &SurfaceRule,
        converse: bool,
    ) -> Result<ElaboratedRule, SurfaceError> {
        self.metas = rule
            .metas
            .iter()
            .map(|d| (d.name.clone(), d.clone()))
            .collect();
        let mut premise = Formula::truth();
        for j in &rule.premises {
            let (f, _) = self.elab_judgment(j)?;
            premise = premise.and(f);
        }
        let (conclusion, subject) = self.elab_judgment(&rule.conclusion)?;
        let ctx: Vec<Var> = rule
            .metas
            .iter()
            .map(|d| Var::new(d.name.clone(), d.sort.clone()))
            .collect();
        let sequent = Sequent::new(ctx.clone(), premise.clone(), conclusion.clone())
            .map_err(|e| SurfaceError::Elab(format!("rule {}: {e}", rule.name)))?;
        let conv = if converse && !rule.premises.is_empty() {
            let conv_premise = match (&rule.conclusion.body, subject) {
                (JudgmentBody::Type(_), _) => Some(conclusion),
                (JudgmentBody::Of(..), Some(t)) => Some(Formula::atom(mk_defined(&t))),
                _ => None,
            };
            match conv_premise {
                Some(p) => Some(
                    Sequent::new(ctx, p, premise)
                        .map_err(|e| SurfaceError::Elab(format!("rule {}: {e}", rule.name)))?,
                ),
                None => None,
            }
        } else {
            None
        };
        Ok(ElaboratedRule {
            name: rule.name.clone(),
            metas: self.metas.values().cloned().collect(),
            sequent,
            converse: conv,
        })
    }
}

/// True when every substitution in `t` applies to a metavariable (possibly
/// under `ft` truncations), the elaborator's output normal form.
pub fn subst_heads_are_vars(t: &Term) -> bool {
    fn ft_chain_of_var(t: &Term) -> bool {
        match t {
            Term::Var(_) => true,
            Term::App { sym, args, .. } if sym.name == "ft" => ft_chain_of_var(&args[0]),
            _ => false,
        }
    }
    match t {
        Term::Var(_) => true,
        Term::App { sym, args, .. } => {
            let head_ok =
                !sym.name.starts_with("subst-") || ft_chain_of_var(&args[1]);
            head_ok && args.iter().all(subst_heads_are_vars)
        }
    }
}

/// Prints elaborator-normal core terms back to surface syntax.
pub struct Printer<'a> {
    pub th: &'a Theory,
    fns: BTreeMap<String, BasicFn>,
    metas: Vec<MetaDecl>,
}

impl<'a> Printer<'a> {
    pub fn new(th: &'a Theory, functions: &[BasicFn], metas: &[MetaDecl]) -> Printer<'a> {
        Printer {
            th,
            fns: functions
                .iter()
                .map(|f| (f.name.clone(), f.clone()))
                .collect(),
            metas: metas.to_vec(),
        }
    }

    fn meta(&self, name: &str) -> Option<&MetaDecl> {
        self.metas.iter().find(|d| d.name == name)
    }

    fn ctx_term_of(&self, env: &Env) -> Result<Term, SurfaceError> {
        match env.last() {
            None => Ok(star(self.th)?),
            Some((_, Some(t))) => Ok(t.clone()),
            Some((n, None)) => Err(SurfaceError::Elab(format!(
                "printer: binder {n} lacks a recovered type"
            ))),
        }
    }

    /// The identity decode of `name` in `env`, if bound.
    fn decode_of(&self, env: &Env, name: &str) -> Option<Term> {
        let pos = env.iter().rposition(|(x, _)| x == name)?;
        let m = env.len() as u32;
        let c = self.ctx_term_of(env).ok()?;
        self.th
            .app(v_sym(m, m - 1 - pos as u32), vec![c])
            .ok()
    }

    pub fn print_term(&self, env: &Env, t: &Term) -> Result<SurfaceTerm, SurfaceError> {
        let m = env.len() as u32;
        match t {
            Term::Var(v) => {
                let decl = self.meta(&v.name).ok_or_else(|| {
                    SurfaceError::Elab(format!("printer: stray variable {}", v.name))
                })?;
                if decl.arity() != m {
                    return Err(SurfaceError::Elab(format!(
                        "printer: metavariable {} of arity {} at depth {m}",
                        v.name,
                        decl.arity()
                    )));
                }
                Ok(SurfaceTerm::Ref(v.name.clone()))
            }
            Term::App { sym, args, .. } => self.print_app(env, sym, args),
        }
    }

    fn print_app(
        &self,
        env: &Env,
        sym: &SymId,
        args: &[Term],
    ) -> Result<SurfaceTerm, SurfaceError> {
        let m = env.len() as u32;
        match sym.name.as_str() {
            "v" => {
                let i = sym.levels[1];
                if sym.levels[0] != m {
                    return Err(SurfaceError::Elab(format!(
                        "printer: v at level {} in a context of length {m}",
                        sym.levels[0]
                    )));
                }
                let pos = (m - 1 - i) as usize;
                Ok(SurfaceTerm::Ref(env[pos].0.clone()))
            }
            "ft" => {
                // an ft chain over a metavariable prints as iterated ft
                let mut wraps = 1u32;
                let mut cur = &args[0];
                while let Term::App { sym: s, args: a, .. } = cur {
                    if s.name == "ft" {
                        wraps += 1;
                        cur = &a[0];
                    } else {
                        break;
                    }
                }
                if let Term::Var(v) = cur {
                    if let Some(decl) = self.meta(&v.name) {
                        if decl.arity() >= wraps {
                            let mut out = SurfaceTerm::Ref(v.name.clone());
                            for _ in 0..wraps {
                                out = SurfaceTerm::Ft(Box::new(out));
                            }
                            return Ok(out);
                        }
                    }
                }
                Ok(SurfaceTerm::Ft(Box::new(
                    self.print_term(env, &args[0])?,
                )))
            }
            "ty" => {
                if sym.levels[0] != m {
                    return Err(SurfaceError::Elab(format!(
                        "printer: ty at level {} in a context of length {m}",
                        sym.levels[0]
                    )));
                }
                Ok(SurfaceTerm::TyOf(Box::new(
                    self.print_term(env, &args[0])?,
                )))
            }
            "subst-tm" | "subst-ty" => self.print_subst(env, sym, args),
            name if self.fns.contains_key(name) => {
                if sym.levels[0] != m {
                    return Err(SurfaceError::Elab(format!(
                        "printer: {name} instance at level {} in a context of length {m}",
                        sym.levels[0]
                    )));
                }
                let bf = self.fns[name].clone();
                let mut out = Vec::new();
                for (a, sort) in args[1..].iter().zip(bf.args.iter()) {
                    out.push(self.print_arg(env, sort, a)?);
                }
                Ok(SurfaceTerm::App {
                    sym: name.to_string(),
                    args: out,
                })
            }
            other => Err(SurfaceError::Elab(format!(
                "printer: no surface form for {other}"
            ))),
        }
    }

    /// A substitution with a metavariable head: a bare reference when every
    /// component is the identity decode, otherwise explicit `X[…]` sugar.
    fn print_subst(
        &self,
        env: &Env,
        sym: &SymId,
        args: &[Term],
    ) -> Result<SurfaceTerm, SurfaceError> {
        let (head, wraps) = {
            let mut wraps = 0u32;
            let mut cur = &args[1];
            while let Term::App { sym: s, args: a, .. } = cur {
                if s.name == "ft" {
                    wraps += 1;
                    cur = &a[0];
                } else {
                    break;
                }
            }
            (cur, wraps)
        };
        let Term::Var(v) = head else {
            return Err(SurfaceError::Elab(
                "printer: substitution of a non-variable".into(),
            ));
        };
        let decl = self
            .meta(&v.name)
            .ok_or_else(|| SurfaceError::Elab(format!("printer: stray variable {}", v.name)))?;
        let ctx = decl.context.clone().ok_or_else(|| {
            SurfaceError::Elab(format!("printer: metavariable {} lacks a context", v.name))
        })?;
        let n = (decl.arity() - wraps) as usize;
        let comps = &args[2..];
        if comps.len() != n {
            return Err(SurfaceError::Elab(format!(
                "printer: substitution arity mismatch on {}",
                v.name
            )));
        }
        let mut repl = Vec::new();
        for (name, comp) in ctx[..n].iter().zip(comps.iter()) {
            if self.decode_of(env, name).as_ref() == Some(comp) {
                continue;
            }
            repl.push((name.clone(), self.print_term(env, comp)?));
        }
        let base = if wraps == 0 {
            if repl.is_empty() {
                return Ok(SurfaceTerm::Ref(v.name.clone()));
            }
            return Ok(SurfaceTerm::Sub {
                meta: v.name.clone(),
                repl,
            });
        } else {
            if !repl.is_empty() {
                return Err(SurfaceError::Elab(format!(
                    "printer: ft-truncated {} with non-identity components",
                    v.name
                )));
            }
            let mut out = SurfaceTerm::Ref(v.name.clone());
            for _ in 0..wraps {
                out = SurfaceTerm::Ft(Box::new(out));
            }
            out
        };
        Ok(base)
    }

    /// One σ-argument: first try each metavariable's weakened occurrence,
    /// then fall back to printing under recovered binders.
    fn print_arg(&self, env: &Env, sort: &Sort, t: &Term) -> Result<SurfaceArg, SurfaceError> {
        let (p, n_i) = paper_kind(sort);
        if n_i == 0 {
            return Ok(SurfaceArg::plain(self.print_term(env, t)?));
        }
        let m = env.len() as u32;
        for decl in &self.metas {
            if paper_kind(&decl.sort) != (p, n_i) {
                continue;
            }
            let raw = Term::Var(Var::new(decl.name.clone(), decl.sort.clone()));
            let candidate = if m == 0 {
                raw
            } else {
                let c = self.ctx_term_of(env)?;
                weaken(self.th, m, n_i, p, 0, &c, &raw)?
            };
            if candidate == *t {
                let names = decl.context.clone().unwrap_or_default();
                return Ok(SurfaceArg {
                    binders: names.into_iter().map(|x| (x, None)).collect(),
                    body: SurfaceTerm::Ref(decl.name.clone()),
                });
            }
        }
        if n_i != 1 {
            return Err(SurfaceError::Elab(
                "printer: compound bodies under several binders are not supported".into(),
            ));
        }
        // recover the binder name from an aligned metavariable in the body,
        // and its type from any inner application's leading context argument
        let binder = self.recover_binder_name(t, m + 1);
        let ann_core = find_context_argument(t, m + 1);
        let ann = match &ann_core {
            Some(c) => Some(self.print_term(env, c)?),
            None => None,
        };
        let mut env2 = env.clone();
        env2.push((binder.clone(), ann_core));
        let body = self.print_term(&env2, t)?;
        Ok(SurfaceArg {
            binders: vec![(binder, ann)],
            body,
        })
    }

    fn recover_binder_name(&self, t: &Term, depth: u32) -> String {
        let mut out = None;
        t.free_vars().into_iter().for_each(|v| {
            if out.is_some() {
                return;
            }
            if let Some(decl) = self.meta(&v.name) {
                if decl.arity() == depth {
                    if let Some(ctx) = &decl.context {
                        out = ctx.last().cloned();
                    }
                }
            }
        });
        out.unwrap_or_else(|| "b1".to_string())
    }
}

/// The leading context argument of the outermost level-`depth` application
/// in `t`, used to recover a binder annotation.
fn find_context_argument(t: &Term, depth: u32) -> Option<Term> {
    if let Term::App { sym, args, .. } = t {
        if !args.is_empty()
            && (sym.name == "v" || sym.name.starts_with("subst-") || sym.levels.len() == 1)
        {
            let c = &args[0];
            if *c.sort() == Sort::ctx(depth) && sym.name != "ft" && sym.name != "ty" {
                return Some(c.clone());
            }
        }
        for a in args {
            if let Some(c) = find_context_argument(a, depth) {
                return Some(c);
            }
        }
    }
    None
}

impl std::fmt::Display for SurfaceTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

impl SurfaceTerm {
    pub fn to_sexpr(&self) -> Sexpr {
        match self {
            SurfaceTerm::Ref(n) => Sexpr::atom(n.clone()),
            SurfaceTerm::Ft(t) => Sexpr::list(vec![Sexpr::atom("ft"), t.to_sexpr()]),
            SurfaceTerm::TyOf(t) => Sexpr::list(vec![Sexpr::atom("ty"), t.to_sexpr()]),
            SurfaceTerm::Sub { meta, repl } => {
                let mut items = vec![Sexpr::atom("sub"), Sexpr::atom(meta.clone())];
                for (x, e) in repl {
                    items.push(Sexpr::list(vec![Sexpr::atom(x.clone()), e.to_sexpr()]));
                }
                Sexpr::list(items)
            }
            SurfaceTerm::App { sym, args } => {
                let mut items = vec![Sexpr::atom(sym.clone())];
                for a in args {
                    items.push(a.to_sexpr());
                }
                Sexpr::list(items)
            }
        }
    }
}

impl SurfaceArg {
    pub fn to_sexpr(&self) -> Sexpr {
        if self.binders.is_empty() {
            return self.body.to_sexpr();
        }
        let binders = Sexpr::list(
            self.binders
                .iter()
                .map(|(n, ann)| match ann {
                    None => Sexpr::atom(n.clone()),
                    Some(a) => Sexpr::list(vec![Sexpr::atom(n.clone()), a.to_sexpr()]),
                })
                .collect(),
        );
        Sexpr::list(vec![Sexpr::atom("bind"), binders, self.body.to_sexpr()])
    }
}

fn sort_from_sexpr(s: &Sexpr) -> Result<Sort, SurfaceError> {
    let items = s
        .as_list()
        .ok_or_else(|| SurfaceError::Parse(format!("expected a sort, got {s}")))?;
    if items.len() != 2 {
        return Err(SurfaceError::Parse(format!("expected (kind level), got {s}")));
    }
    let kind = items[0]
        .as_atom()
        .ok_or_else(|| SurfaceError::Parse(format!("bad sort kind in {s}")))?;
    if ![CTX, TY, TM].contains(&kind) {
        return Err(SurfaceError::Parse(format!("unknown sort kind {kind}")));
    }
    let level: u32 = items[1]
        .as_atom()
        .and_then(|a| a.parse().ok())
        .ok_or_else(|| SurfaceError::Parse(format!("bad sort level in {s}")))?;
    Ok(Sort::new(kind, level))
}

fn term_from_sexpr(s: &Sexpr) -> Result<SurfaceTerm, SurfaceError> {
    if let Some(a) = s.as_atom() {
        return Ok(SurfaceTerm::Ref(a.to_string()));
    }
    let items = s.as_list().unwrap();
    let head = items
        .first()
        .and_then(|h| h.as_atom())
        .ok_or_else(|| SurfaceError::Parse(format!("bad term {s}")))?;
    match head {
        "ft" if items.len() == 2 => Ok(SurfaceTerm::Ft(Box::new(term_from_sexpr(&items[1])?))),
        "ty" if items.len() == 2 => Ok(SurfaceTerm::TyOf(Box::new(term_from_sexpr(&items[1])?))),
        "sub" => {
            let meta = items
                .get(1)
                .and_then(|x| x.as_atom())
                .ok_or_else(|| SurfaceError::Parse(format!("bad sub {s}")))?;
            let mut repl = Vec::new();
            for e in &items[2..] {
                let pair = e
                    .as_list()
                    .filter(|l| l.len() == 2)
                    .ok_or_else(|| SurfaceError::Parse(format!("bad sub entry in {s}")))?;
                let x = pair[0]
                    .as_atom()
                    .ok_or_else(|| SurfaceError::Parse(format!("bad sub entry in {s}")))?;
                repl.push((x.to_string(), term_from_sexpr(&pair[1])?));
            }
            Ok(SurfaceTerm::Sub {
                meta: meta.to_string(),
                repl,
            })
        }
        _ => {
            let mut args = Vec::new();
            for e in &items[1..] {
                args.push(arg_from_sexpr(e)?);
            }
            Ok(SurfaceTerm::App {
                sym: head.to_string(),
                args,
            })
        }
    }
}

fn arg_from_sexpr(s: &Sexpr) -> Result<SurfaceArg, SurfaceError> {
    if let Some(items) = s.tagged("bind") {
        if items.len() != 2 {
            return Err(SurfaceError::Parse(format!("bad bind {s}")));
        }
        let blist = items[0]
            .as_list()
            .ok_or_else(|| SurfaceError::Parse(format!("bad binder list in {s}")))?;
        let mut binders = Vec::new();
        for b in blist {
            match (b.as_atom(), b.as_list()) {
                (Some(n), _) => binders.push((n.to_string(), None)),
                (None, Some(pair)) if pair.len() == 2 => {
                    let n = pair[0]
                        .as_atom()
                        .ok_or_else(|| SurfaceError::Parse(format!("bad binder in {s}")))?;
                    binders.push((n.to_string(), Some(term_from_sexpr(&pair[1])?)));
                }
                _ => return Err(SurfaceError::Parse(format!("bad binder in {s}"))),
            }
        }
        return Ok(SurfaceArg {
            binders,
            body: term_from_sexpr(&items[1])?,
        });
    }
    Ok(SurfaceArg::plain(term_from_sexpr(s)?))
}

fn judgment_from_sexpr(s: &Sexpr) -> Result<Judgment, SurfaceError> {
    let items = s
        .tagged("judg")
        .ok_or_else(|| SurfaceError::Parse(format!("expected (judg …), got {s}")))?;
    if items.len() != 2 {
        return Err(SurfaceError::Parse(format!("bad judgment {s}")));
    }
    let ctx_items = items[0]
        .tagged("ctx")
        .ok_or_else(|| SurfaceError::Parse(format!("expected (ctx …) in {s}")))?;
    let mut context = Vec::new();
    for e in ctx_items {
        let pair = e
            .as_list()
            .filter(|l| l.len() == 2)
            .ok_or_else(|| SurfaceError::Parse(format!("bad context entry in {s}")))?;
        let n = pair[0]
            .as_atom()
            .ok_or_else(|| SurfaceError::Parse(format!("bad context entry in {s}")))?;
        context.push((n.to_string(), term_from_sexpr(&pair[1])?));
    }
    let body_items = items[1]
        .as_list()
        .ok_or_else(|| SurfaceError::Parse(format!("bad judgment body in {s}")))?;
    let head = body_items
        .first()
        .and_then(|h| h.as_atom())
        .ok_or_else(|| SurfaceError::Parse(format!("bad judgment body in {s}")))?;
    let body = match (head, body_items.len()) {
        ("type", 2) => JudgmentBody::Type(term_from_sexpr(&body_items[1])?),
        ("of", 3) => JudgmentBody::Of(
            term_from_sexpr(&body_items[1])?,
            term_from_sexpr(&body_items[2])?,
        ),
        ("eq", 3) => JudgmentBody::Eq(
            term_from_sexpr(&body_items[1])?,
            term_from_sexpr(&body_items[2])?,
        ),
        ("def", 2) => JudgmentBody::Defined(term_from_sexpr(&body_items[1])?),
        ("holds", n) if n >= 2 => {
            let r = body_items[1]
                .as_atom()
                .ok_or_else(|| SurfaceError::Parse(format!("bad holds body in {s}")))?;
            let mut args = Vec::new();
            for e in &body_items[2..] {
                args.push(arg_from_sexpr(e)?);
            }
            JudgmentBody::Holds(r.to_string(), args)
        }
        _ => return Err(SurfaceError::Parse(format!("bad judgment body in {s}"))),
    };
    Ok(Judgment { context, body })
}

fn rule_from_sexpr(items: &[Sexpr]) -> Result<SurfaceRule, SurfaceError> {
    let name = items
        .first()
        .and_then(|x| x.as_atom())
        .ok_or_else(|| SurfaceError::Parse("rule needs a name".into()))?;
    let mut metas = Vec::new();
    let mut premises = Vec::new();
    let mut conclusion = None;
    for e in &items[1..] {
        if let Some(ms) = e.tagged("meta") {
            for md in ms {
                let parts = md
                    .as_list()
                    .filter(|l| l.len() >= 2)
                    .ok_or_else(|| SurfaceError::Parse(format!("bad meta decl {md}")))?;
                let mname = parts[0]
                    .as_atom()
                    .ok_or_else(|| SurfaceError::Parse(format!("bad meta decl {md}")))?;
                let sort = sort_from_sexpr(&parts[1])?;
                let context = match parts.get(2) {
                    None => None,
                    Some(c) => {
                        let names = c
                            .tagged("ctx")
                            .ok_or_else(|| SurfaceError::Parse(format!("bad meta context {md}")))?;
                        Some(
                            names
                                .iter()
                                .map(|x| {
                                    x.as_atom().map(|a| a.to_string()).ok_or_else(|| {
                                        SurfaceError::Parse(format!("bad meta context {md}"))
                                    })
                                })
                                .collect::<Result<Vec<_>, _>>()?,
                        )
                    }
                };
                metas.push(MetaDecl {
                    name: mname.to_string(),
                    sort,
                    context,
                });
            }
        } else if let Some(ps) = e.tagged("premise") {
            for p in ps {
                premises.push(judgment_from_sexpr(p)?);
            }
        } else if let Some(cs) = e.tagged("conclude") {
            if cs.len() != 1 || conclusion.is_some() {
                return Err(SurfaceError::Parse(format!(
                    "rule {name} needs exactly one conclusion"
                )));
            }
            conclusion = Some(judgment_from_sexpr(&cs[0])?);
        } else {
            return Err(SurfaceError::Parse(format!("unexpected rule clause {e}")));
        }
    }
    Ok(SurfaceRule {
        name: name.to_string(),
        metas,
        premises,
        conclusion: conclusion
            .ok_or_else(|| SurfaceError::Parse(format!("rule {name} lacks a conclusion")))?,
    })
}

/// Parses the s-expression rule-file format.
pub fn parse_contextual(src: &str) -> Result<ContextualSpec, SurfaceError> {
    let top = sexpr::parse_one(src)?;
    let items = top
        .tagged("contextual")
        .ok_or_else(|| SurfaceError::Parse("expected (contextual NAME …)".into()))?;
    let name = items
        .first()
        .and_then(|x| x.as_atom())
        .ok_or_else(|| SurfaceError::Parse("contextual block needs a name".into()))?;
    let mut spec = ContextualSpec {
        name: name.to_string(),
        converse: false,
        functions: Vec::new(),
        predicates: Vec::new(),
        rules: Vec::new(),
    };
    for e in &items[1..] {
        if e.tagged("converse").is_some() {
            spec.converse = true;
        } else if let Some(bs) = e.tagged("basic") {
            let bname = bs
                .first()
                .and_then(|x| x.as_atom())
                .ok_or_else(|| SurfaceError::Parse(format!("bad basic decl {e}")))?;
            let mut args = Vec::new();
            let mut result = None;
            for c in &bs[1..] {
                if let Some(asorts) = c.tagged("args") {
                    for s in asorts {
                        args.push(sort_from_sexpr(s)?);
                    }
                } else if let Some(r) = c.tagged("result") {
                    if r.len() != 1 {
                        return Err(SurfaceError::Parse(format!("bad result in {e}")));
                    }
                    result = Some(sort_from_sexpr(&r[0])?);
                } else {
                    return Err(SurfaceError::Parse(format!("bad basic clause {c}")));
                }
            }
            spec.functions.push(BasicFn {
                name: bname.to_string(),
                args,
                result: result
                    .ok_or_else(|| SurfaceError::Parse(format!("basic {bname} lacks a result")))?,
            });
        } else if let Some(ps) = e.tagged("pred") {
            let pname = ps
                .first()
                .and_then(|x| x.as_atom())
                .ok_or_else(|| SurfaceError::Parse(format!("bad pred decl {e}")))?;
            let mut args = Vec::new();
            for c in &ps[1..] {
                if let Some(asorts) = c.tagged("args") {
                    for s in asorts {
                        args.push(sort_from_sexpr(s)?);
                    }
                } else {
                    return Err(SurfaceError::Parse(format!("bad pred clause {c}")));
                }
            }
            spec.predicates.push(BasicPred {
                name: pname.to_string(),
                args,
            });
        } else if let Some(rs) = e.tagged("rule") {
            spec.rules.push(rule_from_sexpr(rs)?);
        } else {
            return Err(SurfaceError::Parse(format!("unexpected clause {e}")));
        }
    }
    Ok(spec)
}

// ---------------------------------------------------------------------------
// infix rule files

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Colon,
    Arrow,
    Turnstile,
    EqEq,
}

fn tokenize(line: &str) -> Result<Vec<Tok>, SurfaceError> {
    let mut out = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '#' => break,
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            '[' => {
                out.push(Tok::LBracket);
                i += 1;
            }
            ']' => {
                out.push(Tok::RBracket);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            '.' => {
                out.push(Tok::Dot);
                i += 1;
            }
            ':' => {
                out.push(Tok::Colon);
                i += 1;
            }
            '=' if chars.get(i + 1) == Some(&'=') => {
                out.push(Tok::EqEq);
                i += 2;
            }
            '|' if chars.get(i + 1) == Some(&'-') => {
                out.push(Tok::Turnstile);
                i += 2;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push(Tok::Arrow);
                i += 2;
            }
            _ if c.is_alphanumeric() || c == '_' || c == '\'' || c == '-' => {
                let start = i;
                while i < chars.len() {
                    let d = chars[i];
                    let name_char = d.is_alphanumeric() || d == '_' || d == '\'' || d == '-';
                    if !name_char || (d == '-' && chars.get(i + 1) == Some(&'>')) {
                        break;
                    }
                    i += 1;
                }
                out.push(Tok::Name(chars[start..i].iter().collect()));
            }
            other => {
                return Err(SurfaceError::Parse(format!(
                    "unexpected character {other:?} in {line:?}"
                )))
            }
        }
    }
    Ok(out)
}

struct TokStream {
    toks: Vec<Tok>,
    pos: usize,
}

impl TokStream {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: &Tok) -> Result<(), SurfaceError> {
        match self.next() {
            Some(got) if got == *t => Ok(()),
            other => Err(SurfaceError::Parse(format!(
                "expected {t:?}, got {other:?}"
            ))),
        }
    }

    fn name(&mut self) -> Result<String, SurfaceError> {
        match self.next() {
            Some(Tok::Name(n)) => Ok(n),
            other => Err(SurfaceError::Parse(format!("expected a name, got {other:?}"))),
        }
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

fn parse_infix_term(ts: &mut TokStream) -> Result<SurfaceTerm, SurfaceError> {
    let name = ts.name()?;
    let mut out = if ts.peek() == Some(&Tok::LParen) {
        ts.next();
        let mut args = Vec::new();
        if ts.peek() != Some(&Tok::RParen) {
            loop {
                args.push(parse_infix_arg(ts)?);
                match ts.next() {
                    Some(Tok::Comma) => continue,
                    Some(Tok::RParen) => break,
                    other => {
                        return Err(SurfaceError::Parse(format!(
                            "expected , or ) in argument list, got {other:?}"
                        )))
                    }
                }
            }
        } else {
            ts.next();
        }
        match name.as_str() {
            "ft" | "ty" if args.len() == 1 && args[0].binders.is_empty() => {
                let body = Box::new(args.remove(0).body);
                if name == "ft" {
                    SurfaceTerm::Ft(body)
                } else {
                    SurfaceTerm::TyOf(body)
                }
            }
            _ => SurfaceTerm::App { sym: name, args },
        }
    } else {
        SurfaceTerm::Ref(name)
    };
    while ts.peek() == Some(&Tok::LBracket) {
        ts.next();
        let meta = match &out {
            SurfaceTerm::Ref(n) => n.clone(),
            _ => {
                return Err(SurfaceError::Parse(
                    "substitution sugar applies to a metavariable".into(),
                ))
            }
        };
        let mut repl = Vec::new();
        loop {
            let x = ts.name()?;
            ts.expect(&Tok::Arrow)?;
            repl.push((x, parse_infix_term(ts)?));
            match ts.next() {
                Some(Tok::Comma) => continue,
                Some(Tok::RBracket) => break,
                other => {
                    return Err(SurfaceError::Parse(format!(
                        "expected , or ] in substitution, got {other:?}"
                    )))
                }
            }
        }
        out = SurfaceTerm::Sub { meta, repl };
    }
    Ok(out)
}

/// `x y. body` introduces binders; otherwise a plain term.
fn parse_infix_arg(ts: &mut TokStream) -> Result<SurfaceArg, SurfaceError> {
    // look ahead for a dot before the argument ends at depth zero
    let mut depth = 0usize;
    let mut names_then_dot = false;
    for t in &ts.toks[ts.pos..] {
        match t {
            Tok::Name(_) => continue,
            Tok::Dot if depth == 0 => {
                names_then_dot = true;
                break;
            }
            Tok::LParen | Tok::LBracket => {
                depth += 1;
                break;
            }
            _ => break,
        }
    }
    let mut binders = Vec::new();
    if names_then_dot {
        while let Some(Tok::Name(_)) = ts.peek() {
            binders.push((ts.name()?, None));
        }
        ts.expect(&Tok::Dot)?;
    }
    let _ = depth;
    Ok(SurfaceArg {
        binders,
        body: parse_infix_term(ts)?,
    })
}

fn parse_infix_judgment(ts: &mut TokStream) -> Result<Judgment, SurfaceError> {
    let mut context = Vec::new();
    if ts.peek() != Some(&Tok::Turnstile) {
        loop {
            let n = ts.name()?;
            ts.expect(&Tok::Colon)?;
            context.push((n, parse_infix_term(ts)?));
            match ts.next() {
                Some(Tok::Comma) => continue,
                Some(Tok::Turnstile) => break,
                other => {
                    return Err(SurfaceError::Parse(format!(
                        "expected , or |- in judgment context, got {other:?}"
                    )))
                }
            }
        }
    } else {
        ts.next();
    }
    let first = parse_infix_term(ts)?;
    let body = match ts.next() {
        Some(Tok::Colon) => JudgmentBody::Of(first, parse_infix_term(ts)?),
        Some(Tok::EqEq) => JudgmentBody::Eq(first, parse_infix_term(ts)?),
        Some(Tok::Name(kw)) if kw == "type" => JudgmentBody::Type(first),
        Some(Tok::Name(kw)) if kw == "def" => JudgmentBody::Defined(first),
        None => match first {
            SurfaceTerm::App { sym, args } => JudgmentBody::Holds(sym, args),
            other => {
                return Err(SurfaceError::Parse(format!(
                    "judgment body {other} needs type/def/:/== "
                )))
            }
        },
        other => {
            return Err(SurfaceError::Parse(format!(
                "unexpected token {other:?} in judgment"
            )))
        }
    };
    if !ts.done() {
        return Err(SurfaceError::Parse("trailing tokens in judgment".into()));
    }
    Ok(Judgment { context, body })
}

fn parse_infix_sorts(ts: &mut TokStream) -> Result<Vec<Sort>, SurfaceError> {
    let mut out = Vec::new();
    loop {
        let kind = ts.name()?;
        let level: u32 = ts
            .name()?
            .parse()
            .map_err(|_| SurfaceError::Parse("bad sort level".into()))?;
        out.push(Sort::new(kind, level));
        if ts.peek() == Some(&Tok::Comma) {
            ts.next();
            continue;
        }
        break;
    }
    Ok(out)
}

/// Parses the line-oriented infix rule-file format.
pub fn parse_contextual_infix(src: &str) -> Result<ContextualSpec, SurfaceError> {
    let mut spec: Option<ContextualSpec> = None;
    let mut rule: Option<SurfaceRule> = None;
    for (lineno, raw) in src.lines().enumerate() {
        let toks = tokenize(raw)
            .map_err(|e| SurfaceError::Parse(format!("line {}: {e}", lineno + 1)))?;
        if toks.is_empty() {
            continue;
        }
        let mut ts = TokStream { toks, pos: 0 };
        let keyword = ts.name()?;
        let at = |e: SurfaceError| SurfaceError::Parse(format!("line {}: {e}", lineno + 1));
        match keyword.as_str() {
            "contextual" => {
                let name = ts.name().map_err(at)?;
                spec = Some(ContextualSpec {
                    name,
                    converse: false,
                    functions: Vec::new(),
                    predicates: Vec::new(),
                    rules: Vec::new(),
                });
            }
            "converse" => {
                spec.as_mut()
                    .ok_or_else(|| at(SurfaceError::Parse("converse before contextual".into())))?
                    .converse = true;
            }
            "basic" => {
                let s = spec
                    .as_mut()
                    .ok_or_else(|| at(SurfaceError::Parse("basic before contextual".into())))?;
                let name = ts.name().map_err(at)?;
                ts.expect(&Tok::Colon).map_err(at)?;
                let mut sorts = parse_infix_sorts(&mut ts).map_err(at)?;
                let result = if ts.peek() == Some(&Tok::Arrow) {
                    ts.next();
                    let r = parse_infix_sorts(&mut ts).map_err(at)?;
                    if r.len() != 1 {
                        return Err(at(SurfaceError::Parse("one result sort expected".into())));
                    }
                    r[0].clone()
                } else {
                    if sorts.len() != 1 {
                        return Err(at(SurfaceError::Parse(
                            "constant declarations take a single result sort".into(),
                        )));
                    }
                    let r = sorts.remove(0);
                    sorts.clear();
                    r
                };
                s.functions.push(BasicFn {
                    name,
                    args: sorts,
                    result,
                });
            }
            "pred" => {
                let s = spec
                    .as_mut()
                    .ok_or_else(|| at(SurfaceError::Parse("pred before contextual".into())))?;
                let name = ts.name().map_err(at)?;
                ts.expect(&Tok::Colon).map_err(at)?;
                let args = if ts.done() {
                    vec![]
                } else {
                    parse_infix_sorts(&mut ts).map_err(at)?
                };
                s.predicates.push(BasicPred { name, args });
            }
            "rule" => {
                if let Some(r) = rule.take() {
                    spec.as_mut()
                        .ok_or_else(|| at(SurfaceError::Parse("rule before contextual".into())))?
                        .rules
                        .push(r);
                }
                rule = Some(SurfaceRule {
                    name: ts.name().map_err(at)?,
                    metas: Vec::new(),
                    premises: Vec::new(),
                    conclusion: Judgment {
                        context: vec![],
                        body: JudgmentBody::Defined(SurfaceTerm::Ref("#pending".into())),
                    },
                });
            }
            "meta" => {
                let r = rule
                    .as_mut()
                    .ok_or_else(|| at(SurfaceError::Parse("meta outside a rule".into())))?;
                let name = ts.name().map_err(at)?;
                ts.expect(&Tok::Colon).map_err(at)?;
                let kind = ts.name().map_err(at)?;
                let level: u32 = ts
                    .name()
                    .map_err(at)?
                    .parse()
                    .map_err(|_| at(SurfaceError::Parse("bad sort level".into())))?;
                let context = if ts.peek() == Some(&Tok::LBracket) {
                    ts.next();
                    let mut names = Vec::new();
                    while ts.peek() != Some(&Tok::RBracket) {
                        names.push(ts.name().map_err(at)?);
                    }
                    ts.next();
                    Some(names)
                } else {
                    None
                };
                r.metas.push(MetaDecl {
                    name,
                    sort: Sort::new(kind, level),
                    context,
                });
            }
            "premise" => {
                let r = rule
                    .as_mut()
                    .ok_or_else(|| at(SurfaceError::Parse("premise outside a rule".into())))?;
                r.premises.push(parse_infix_judgment(&mut ts).map_err(at)?);
            }
            "conclude" => {
                let r = rule
                    .as_mut()
                    .ok_or_else(|| at(SurfaceError::Parse("conclude outside a rule".into())))?;
                r.conclusion = parse_infix_judgment(&mut ts).map_err(at)?;
            }
            "end" => {
                if let Some(r) = rule.take() {
                    spec.as_mut()
                        .ok_or_else(|| at(SurfaceError::Parse("end before contextual".into())))?
                        .rules
                        .push(r);
                }
            }
            other => {
                return Err(at(SurfaceError::Parse(format!(
                    "unknown keyword {other}"
                ))))
            }
        }
    }
    let mut spec =
        spec.ok_or_else(|| SurfaceError::Parse("missing contextual header".into()))?;
    if let Some(r) = rule.take() {
        spec.rules.push(r);
    }
    for r in &spec.rules {
        if r.conclusion.body == JudgmentBody::Defined(SurfaceTerm::Ref("#pending".into())) {
            return Err(SurfaceError::Parse(format!(
                "rule {} lacks a conclusion",
                r.name
            )));
        }
    }
    Ok(spec)
}

/// Parses either rule-file format, keyed on the leading character.
pub fn parse_spec(src: &str) -> Result<ContextualSpec, SurfaceError> {
    if src.trim_start().starts_with('(') {
        parse_contextual(src)
    } else {
        parse_contextual_infix(src)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subst::ft_power;

    fn unit_spec() -> ContextualSpec {
        parse_contextual(
            r#"(contextual unit-eta
                 (converse)
                 (basic top (args) (result (ty 0)))
                 (basic unit (args) (result (tm 0)))
                 (rule top-ty (conclude (judg (ctx) (type (top)))))
                 (rule unit-tm (conclude (judg (ctx) (of (unit) (top)))))
                 (rule unit-eta (meta (t (tm 0)))
                   (premise (judg (ctx) (of t (top))))
                   (conclude (judg (ctx) (eq t (unit))))))"#,
        )
        .unwrap()
    }

    fn sigma_spec() -> ContextualSpec {
        parse_contextual(
            r#"(contextual sigma-eta
                 (converse)
                 (basic Sigma (args (ty 1)) (result (ty 0)))
                 (basic pair (args (ty 1) (tm 0) (tm 0)) (result (tm 0)))
                 (basic proj1 (args (ty 1) (tm 0)) (result (tm 0)))
                 (rule Sigma-ty (meta (B (ty 1) (ctx x)))
                   (conclude (judg (ctx) (type (Sigma (bind (x) B))))))
                 (rule pair-tm (meta (B (ty 1) (ctx x)) (a (tm 0)) (b (tm 0)))
                   (premise (judg (ctx) (of b (sub B (x a)))))
                   (conclude (judg (ctx) (of (pair (bind (x) B) a b) (Sigma (bind (x) B))))))
                 (rule proj1-tm (meta (B (ty 1) (ctx x)) (p (tm 0)))
                   (premise (judg (ctx) (of p (Sigma (bind (x) B)))))
                   (conclude (judg (ctx) (of (proj1 (bind (x) B) p) (ft B)))))))"#,
        )
        .unwrap()
    }

    #[test]
    fn infix_matches_sexpr_for_unit() {
        let infix = parse_contextual_infix(
            r#"contextual unit-eta
converse
basic top : ty 0
basic unit : tm 0
rule top-ty
  conclude |- top() type
rule unit-tm
  conclude |- unit() : top()
rule unit-eta
  meta t : tm 0
  premise |- t : top()
  conclude |- t == unit()
end"#,
        )
        .unwrap();
        assert_eq!(infix, unit_spec());
    }

    #[test]
    fn unit_rules_elaborate() {
        let spec = unit_spec();
        let th = instantiate_signature(&spec.name, &spec.functions, &spec.predicates, 1).unwrap();
        let mut el = Elaborator::new(&th, &spec.functions, &spec.predicates);
        let star_t = star(&th).unwrap();
        let top0 = th.app(fam_sym("top", 0), vec![star_t.clone()]).unwrap();

        let r0 = el.elab_rule(&spec.rules[0], spec.converse).unwrap();
        assert!(r0.sequent.premise.is_truth());
        assert_eq!(r0.sequent.conclusion, Formula::atom(mk_defined(&top0)));
        assert!(r0.converse.is_none());

        // ⊢ t : ⊤ becomes ty(t) = ⊤ with t a plain core variable
        let r2 = el.elab_rule(&spec.rules[2], spec.converse).unwrap();
        let t = Term::var("t", Sort::tm(0));
        let tyt = th.app(ty_sym(0), vec![t.clone()]).unwrap();
        assert_eq!(
            r2.sequent.premise,
            Formula::atom(Atom::eq(tyt, top0).unwrap())
        );
        let unit0 = th.app(fam_sym("unit", 0), vec![star_t]).unwrap();
        assert_eq!(
            r2.sequent.conclusion,
            Formula::atom(Atom::eq(t.clone(), unit0).unwrap())
        );
        // converse closure: eq conclusions get none, typing premises do
        assert!(r2.converse.is_none());

        let r1 = el.elab_rule(&spec.rules[1], spec.converse).unwrap();
        assert!(r1.converse.is_none(), "premise-free rule has no converse");
    }

    #[test]
    fn sigma_rules_elaborate_with_sugar() {
        let spec = sigma_spec();
        let th = instantiate_signature(&spec.name, &spec.functions, &spec.predicates, 1).unwrap();
        let mut el = Elaborator::new(&th, &spec.functions, &spec.predicates);
        let star_t = star(&th).unwrap();
        let b = Term::var("B", Sort::ty(1));
        let a = Term::var("a", Sort::tm(0));

        // Σ(x.B) at the empty context takes the metavariable directly
        let r0 = el.elab_rule(&spec.rules[0], spec.converse).unwrap();
        let sigma_b = th
            .app(fam_sym("Sigma", 0), vec![star_t.clone(), b.clone()])
            .unwrap();
        assert_eq!(r0.sequent.conclusion, Formula::atom(mk_defined(&sigma_b)));

        // B[x ↦ a] is subst-ty@{0,1}(*, B, a)
        let r1 = el.elab_rule(&spec.rules[1], spec.converse).unwrap();
        let bsub = th
            .app(subst_sym(TY, 0, 1), vec![star_t.clone(), b.clone(), a.clone()])
            .unwrap();
        let tyb = th
            .app(ty_sym(0), vec![Term::var("b", Sort::tm(0))])
            .unwrap();
        assert_eq!(
            r1.sequent.premise,
            Formula::atom(Atom::eq(tyb, bsub).unwrap())
        );
        // the typing conclusion yields a definedness converse
        let conv = r1.converse.expect("typing conclusion converse");
        let pair = th
            .app(
                fam_sym("pair", 0),
                vec![star_t.clone(), b.clone(), a.clone(), Term::var("b", Sort::tm(0))],
            )
            .unwrap();
        assert_eq!(conv.premise, Formula::atom(mk_defined(&pair)));

        // ft(B) in the conclusion of proj1
        let r2 = el.elab_rule(&spec.rules[2], spec.converse).unwrap();
        let ftb = ft_power(&th, 1, 1, b.clone()).unwrap();
        let proj = th
            .app(
                fam_sym("proj1", 0),
                vec![star_t, b, Term::var("p", Sort::tm(0))],
            )
            .unwrap();
        let typ = th.app(ty_sym(0), vec![proj]).unwrap();
        assert_eq!(
            r2.sequent.conclusion,
            Formula::atom(Atom::eq(typ, ftb).unwrap())
        );
    }

    #[test]
    fn unknown_name_is_a_scope_error() {
        let spec = parse_contextual(
            r#"(contextual broken
                 (basic top (args) (result (ty 0)))
                 (rule bad (conclude (judg (ctx) (def b)))))"#,
        )
        .unwrap();
        let th = instantiate_signature(&spec.name, &spec.functions, &spec.predicates, 1).unwrap();
        let mut el = Elaborator::new(&th, &spec.functions, &spec.predicates);
        let err = el.elab_rule(&spec.rules[0], false).unwrap_err();
        assert!(matches!(err, SurfaceError::Elab(ref m) if m.contains("unknown name b")));
    }

    #[test]
    fn judgment_context_decodes_named_variables() {
        // x : ⊤ ⊢ x : ⊤ uses v@{1,0}
        let spec = parse_contextual(
            r#"(contextual unit-x
                 (basic top (args) (result (ty 0)))
                 (rule var-typing
                   (conclude (judg (ctx (x (top))) (of x (top))))))"#,
        )
        .unwrap();
        let th = instantiate_signature(&spec.name, &spec.functions, &spec.predicates, 1).unwrap();
        let mut el = Elaborator::new(&th, &spec.functions, &spec.predicates);
        let r = el.elab_rule(&spec.rules[0], false).unwrap();
        let star_t = star(&th).unwrap();
        let top0 = th.app(fam_sym("top", 0), vec![star_t]).unwrap();
        let v = th.app(v_sym(1, 0), vec![top0.clone()]).unwrap();
        let ty_v = th.app(ty_sym(1), vec![v]).unwrap();
        let top1 = th.app(fam_sym("top", 1), vec![top0]).unwrap();
        assert_eq!(
            r.sequent.conclusion,
            Formula::atom(Atom::eq(ty_v, top1).unwrap())
        );
    }

    #[test]
    fn meta_under_binders_weakens() {
        // pair(x.B, x, y) inside the context x : ft(B), y : B
        let spec = parse_contextual(
            r#"(contextual sig
                 (basic Sigma (args (ty 1)) (result (ty 0)))
                 (basic pair (args (ty 1) (tm 0) (tm 0)) (result (tm 0)))
                 (rule probe (meta (B (ty 1) (ctx x)))
                   (conclude (judg (ctx (x (ft B)) (y B)) (def (pair (bind (x) B) x y))))))"#,
        )
        .unwrap();
        let th = instantiate_signature(&spec.name, &spec.functions, &spec.predicates, 3).unwrap();
        let mut el = Elaborator::new(&th, &spec.functions, &spec.predicates);
        let r = el.elab_rule(&spec.rules[0], false).unwrap();
        // conclusion is def of pair@2(C, wk^{2,1}(C,B), v@{2,1}(C), v@{2,0}(C))
        let b = Term::var("B", Sort::ty(1));
        let ftb = ft_power(&th, 1, 1, b.clone()).unwrap();
        // the annotation of y elaborates B at depth 1: aligned, so plain B
        let c = b.clone();
        let _ = ftb;
        let wk_b = weaken(&th, 2, 1, TY, 0, &c, &b).unwrap();
        let v1 = th.app(v_sym(2, 1), vec![c.clone()]).unwrap();
        let v0 = th.app(v_sym(2, 0), vec![c.clone()]).unwrap();
        let pair = th
            .app(fam_sym("pair", 2), vec![c, wk_b, v1, v0])
            .unwrap();
        assert_eq!(r.sequent.conclusion, Formula::atom(mk_defined(&pair)));
        for atom in &r.sequent.conclusion.0 {
            match atom {
                Atom::Eq(l, rr) => {
                    assert!(subst_heads_are_vars(l) && subst_heads_are_vars(rr));
                }
                Atom::Pred { args, .. } => args.iter().for_each(|t| {
                    assert!(subst_heads_are_vars(t));
                }),
            }
        }
    }

    #[test]
    fn roundtrip_unit_and_sigma_rules() {
        for spec in [unit_spec(), sigma_spec()] {
            let th =
                instantiate_signature(&spec.name, &spec.functions, &spec.predicates, 2).unwrap();
            let mut el = Elaborator::new(&th, &spec.functions, &spec.predicates);
            for rule in &spec.rules {
                let r = el.elab_rule(rule, false).unwrap();
                let printer = Printer::new(&th, &spec.functions, &r.metas);
                // round-trip every judgment subject through the printer
                let mut el2 = Elaborator::new(&th, &spec.functions, &spec.predicates);
                el2.metas = r
                    .metas
                    .iter()
                    .map(|d| (d.name.clone(), d.clone()))
                    .collect();
                for j in rule.premises.iter().chain([&rule.conclusion]) {
                    let env = el2.judgment_env(j).unwrap();
                    let subjects: Vec<&SurfaceTerm> = match &j.body {
                        JudgmentBody::Type(a) | JudgmentBody::Defined(a) => vec![a],
                        JudgmentBody::Of(a, b) | JudgmentBody::Eq(a, b) => vec![a, b],
                        JudgmentBody::Holds(..) => vec![],
                    };
                    for s in subjects {
                        let core = el2.elab_term(&env, s).unwrap();
                        let printed = printer.print_term(&env, &core).unwrap();
                        let back = el2.elab_term(&env, &printed).unwrap();
                        assert_eq!(
                            core, back,
                            "rule {} subject {s} reprints as {printed}",
                            rule.name
                        );
                    }
                }
            }
        }
    }
}
