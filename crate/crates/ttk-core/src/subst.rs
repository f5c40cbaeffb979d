//! The built-in substitution calculus: the base context structure shared by
//! all level-indexed theories, derived notation (iterated ft, ctx-of, the
//! Hom expansion), and the full theory builder.
//!
//! Axiom families are instantiated at every valuation whose symbol instances
//! all stay within the level cutoff; valuations referencing an out-of-range
//! symbol are skipped, mirroring schematic axiom loading.

use crate::syntax::{
    mk_defined, ArgGroup, Atom, CmpOp, Constraint, Formula, LevelExpr, LevelParam, Sequent, Sort,
    SortExpr, SymId, SymbolKind, SymbolSchema, SyntaxError, Term, Var, CTX, TM, TY,
};
use crate::theory::{Theory, TheoryError};

pub fn star_sym() -> SymId {
    SymId::new("*", vec![])
}

pub fn ft_sym(n: u32) -> SymId {
    SymId::new("ft", vec![n])
}

pub fn ty_sym(n: u32) -> SymId {
    SymId::new("ty", vec![n])
}

pub fn v_sym(n: u32, i: u32) -> SymId {
    SymId::new("v", vec![n, i])
}

/// `p` is `tm` or `ty`.
pub fn subst_sym(p: &str, n: u32, k: u32) -> SymId {
    SymId::new(format!("subst-{p}"), vec![n, k])
}

pub fn ctx_sym(p: &str, n: u32) -> SymId {
    SymId::new(format!("ctx-{p}"), vec![n])
}

pub fn star(th: &Theory) -> Result<Term, SyntaxError> {
    th.app(star_sym(), vec![])
}

/// `ft^i_n(a)` for `a : (ctx, n+i)`, by the recursion
/// `ft^{i+1}_n(a) = ft^i_n(ft_{n+i}(a))`.
pub fn ft_power(th: &Theory, i: u32, n: u32, a: Term) -> Result<Term, SyntaxError> {
    if i == 0 {
        return Ok(a);
    }
    let inner = th.app(ft_sym(n + i - 1), vec![a])?;
    ft_power(th, i - 1, n, inner)
}

/// The context of a term of sort `(p, n)`: the identity symbol for `ctx`,
/// `ft` for `ty`, `ft ∘ ty` for `tm`.
pub fn ctx_of(th: &Theory, p: &str, n: u32, t: Term) -> Result<Term, SyntaxError> {
    match p {
        CTX => th.app(ctx_sym(CTX, n), vec![t]),
        TY => th.app(ft_sym(n), vec![t]),
        TM => {
            let ty = th.app(ty_sym(n), vec![t])?;
            th.app(ft_sym(n), vec![ty])
        }
        other => Err(SyntaxError::Other(format!(
            "ctx-of is defined for ctx, ty, tm, not {other}"
        ))),
    }
}

/// A morphism candidate: `components` of sort `(tm, n)` from `domain :
/// (ctx, k)` to `codomain : (ctx, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomSpec {
    pub n: u32,
    pub k: u32,
    pub codomain: Term,
    pub domain: Term,
    pub components: Vec<Term>,
}

/// The defining expansion of `Hom_{n,k}`: for each `1 ≤ i ≤ k`,
/// `ty(a_i) = subst-ty_{n,i-1}(B, ft^{k-i}_i(A), a_1 … a_{i-1})`.
pub fn hom_formula(th: &Theory, spec: &HomSpec) -> Result<Formula, SyntaxError> {
    if spec.components.len() != spec.k as usize {
        return Err(SyntaxError::Other(format!(
            "Hom_{{{},{}}} needs {} components, got {}",
            spec.n,
            spec.k,
            spec.k,
            spec.components.len()
        )));
    }
    let mut atoms = Vec::new();
    for i in 1..=spec.k {
        let ai = spec.components[(i - 1) as usize].clone();
        let lhs = th.app(ty_sym(spec.n), vec![ai])?;
        let ftp = ft_power(th, spec.k - i, i, spec.domain.clone())?;
        let mut args = vec![spec.codomain.clone(), ftp];
        args.extend(spec.components[..(i - 1) as usize].iter().cloned());
        let rhs = th.app(subst_sym(TY, spec.n, i - 1), args)?;
        atoms.push(Atom::eq(lhs, rhs)?);
    }
    Ok(Formula(atoms))
}

/// The base theory over the given basic sorts (which must include `ctx`):
/// the empty context `*`, context tails `ft`, projections `ctx-p`, and the
/// axioms making `(ctx, 0)` trivial and `ctx-ctx` the identity.
pub fn base_theory(
    name: &str,
    basic_sorts: &[&str],
    cutoff: u32,
) -> Result<Theory, TheoryError> {
    assert!(basic_sorts.contains(&CTX));
    let mut th = Theory::new(
        name,
        basic_sorts.iter().map(|s| s.to_string()).collect(),
        cutoff,
    );
    th.add_schema(SymbolSchema {
        name: "*".into(),
        kind: SymbolKind::Function,
        params: vec![],
        args: vec![],
        result: Some(SortExpr::new(CTX, LevelExpr::lit(0))),
    })?;
    th.add_schema(SymbolSchema {
        name: "ft".into(),
        kind: SymbolKind::Function,
        params: vec![LevelParam::plain("n")],
        args: vec![ArgGroup::One(SortExpr::new(CTX, LevelExpr::plus("n", 1)))],
        result: Some(SortExpr::new(CTX, LevelExpr::var("n"))),
    })?;
    for p in basic_sorts {
        th.add_schema(SymbolSchema {
            name: format!("ctx-{p}"),
            kind: SymbolKind::Function,
            params: vec![LevelParam::plain("n")],
            args: vec![ArgGroup::One(SortExpr::new(*p, LevelExpr::var("n")))],
            result: Some(SortExpr::new(CTX, LevelExpr::var("n"))),
        })?;
    }
    let star_t = star(&th)?;
    th.add_axiom(
        "star-def",
        vec![],
        Sequent::new(
            vec![],
            Formula::truth(),
            Formula::atom(mk_defined(&star_t)),
        )?,
    );
    let x0 = Var::new("x", Sort::ctx(0));
    th.add_axiom(
        "ctx0-triv",
        vec![],
        Sequent::new(
            vec![x0.clone()],
            Formula::truth(),
            Formula::atom(Atom::eq(Term::Var(x0), star_t)?),
        )?,
    );
    for n in 0..=cutoff {
        let x = Var::new("x", Sort::ctx(n));
        let app = th.app(ctx_sym(CTX, n), vec![Term::Var(x.clone())])?;
        th.add_axiom(
            "ctx-ctx-id",
            vec![("n".into(), n)],
            Sequent::new(
                vec![x.clone()],
                Formula::truth(),
                Formula::atom(Atom::eq(app, Term::Var(x))?),
            )?,
        );
    }
    Ok(th)
}

fn psort(p: &str, n: u32) -> Sort {
    match p {
        TM => Sort::tm(n),
        TY => Sort::ty(n),
        _ => Sort::ctx(n),
    }
}

fn components(prefix: &str, count: u32, sort: Sort) -> Vec<Var> {
    (1..=count)
        .map(|i| Var::new(format!("{prefix}{i}"), sort.clone()))
        .collect()
}

fn fv_sequent(premise: Formula, conclusion: Formula) -> Result<Sequent, SyntaxError> {
    let mut ctx: Vec<Var> = premise.free_vars().into_iter().collect();
    ctx.extend(conclusion.free_vars());
    Sequent::new(ctx, premise, conclusion)
}

/// Adds an axiom instance, skipping valuations that reference a symbol
/// outside the cutoff fragment.
fn add_instance(
    th: &mut Theory,
    name: &str,
    valuation: &[(&str, u32)],
    seq: Result<Sequent, SyntaxError>,
) {
    match seq {
        Ok(s) => th.add_axiom(
            name,
            valuation.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            s,
        ),
        Err(SyntaxError::UnknownSymbol { .. }) => {}
        Err(e) => panic!("substitution calculus builder: {e}"),
    }
}

/// The full substitution calculus at the given cutoff: base structure, the
/// symbols `ty`, `v`, `subst`, and the axiom families for definedness,
/// typing, behavior on indices, and associativity.
pub fn build_s(cutoff: u32) -> Theory {
    let mut th = base_theory("S", &[CTX, TM], cutoff).expect("base theory builds");
    th.provenance.push("builtin substitution calculus".into());
    th.add_schema(SymbolSchema {
        name: "ty".into(),
        kind: SymbolKind::Function,
        params: vec![LevelParam::plain("n")],
        args: vec![ArgGroup::One(SortExpr::new(TM, LevelExpr::var("n")))],
        result: Some(SortExpr::new(CTX, LevelExpr::plus("n", 1))),
    })
    .expect("ty schema");
    th.add_schema(SymbolSchema {
        name: "v".into(),
        kind: SymbolKind::Function,
        params: vec![
            LevelParam::plain("n"),
            LevelParam {
                name: "i".into(),
                constraints: vec![Constraint {
                    lhs: LevelExpr::var("i"),
                    op: CmpOp::Lt,
                    rhs: LevelExpr::var("n"),
                }],
            },
        ],
        args: vec![ArgGroup::One(SortExpr::new(CTX, LevelExpr::var("n")))],
        result: Some(SortExpr::new(TM, LevelExpr::var("n"))),
    })
    .expect("v schema");
    th.add_schema(SymbolSchema {
        name: "subst-tm".into(),
        kind: SymbolKind::Function,
        params: vec![LevelParam::plain("n"), LevelParam::plain("k")],
        args: vec![
            ArgGroup::One(SortExpr::new(CTX, LevelExpr::var("n"))),
            ArgGroup::One(SortExpr::new(TM, LevelExpr::var("k"))),
            ArgGroup::Rep {
                count: "k".into(),
                sort: SortExpr::new(TM, LevelExpr::var("n")),
            },
        ],
        result: Some(SortExpr::new(TM, LevelExpr::var("n"))),
    })
    .expect("subst-tm schema");
    th.add_schema(SymbolSchema {
        name: "subst-ty".into(),
        kind: SymbolKind::Function,
        params: vec![LevelParam::plain("n"), LevelParam::plain("k")],
        args: vec![
            ArgGroup::One(SortExpr::new(CTX, LevelExpr::var("n"))),
            ArgGroup::One(SortExpr::new(CTX, LevelExpr::plus("k", 1))),
            ArgGroup::Rep {
                count: "k".into(),
                sort: SortExpr::new(TM, LevelExpr::var("n")),
            },
        ],
        result: Some(SortExpr::new(CTX, LevelExpr::plus("n", 1))),
    })
    .expect("subst-ty schema");

    let c = cutoff;

    // ctx-tm agrees with ft ∘ ty wherever either side is defined
    for n in 0..=c {
        let t = Var::new("t", Sort::tm(n));
        let build = |th: &Theory, dir: bool| -> Result<Sequent, SyntaxError> {
            let lhs = th.app(ctx_sym(TM, n), vec![Term::Var(t.clone())])?;
            let rhs = ctx_of(th, TM, n, Term::Var(t.clone()))?;
            let prem = if dir { lhs.clone() } else { rhs.clone() };
            fv_sequent(
                Formula::atom(mk_defined(&prem)),
                Formula::atom(Atom::eq(lhs, rhs)?),
            )
        };
        let fwd = build(&th, true);
        let bwd = build(&th, false);
        add_instance(&mut th, "ctx-tm-def-fwd", &[("n", n)], fwd);
        add_instance(&mut th, "ctx-tm-def-bwd", &[("n", n)], bwd);
    }

    // variables are total
    for n in 1..=c {
        for i in 0..n {
            let a = Var::new("A", Sort::ctx(n));
            let seq = (|| {
                let v = th.app(v_sym(n, i), vec![Term::Var(a.clone())])?;
                fv_sequent(Formula::truth(), Formula::atom(mk_defined(&v)))
            })();
            add_instance(&mut th, "def-var", &[("n", n), ("i", i)], seq);
        }
    }

    // substitution is defined exactly on morphisms
    for p in [TM, TY] {
        for n in 0..=c {
            for k in 0..=c {
                let b = Var::new("B", Sort::ctx(n));
                let a = Var::new("a", psort(p, k));
                let comps = components("a", k, Sort::tm(n));
                let built = (|| -> Result<(Formula, Formula), SyntaxError> {
                    let dom = ctx_of(&th, p, k, Term::Var(a.clone()))?;
                    let hom = hom_formula(
                        &th,
                        &HomSpec {
                            n,
                            k,
                            codomain: Term::Var(b.clone()),
                            domain: dom,
                            components: comps.iter().cloned().map(Term::Var).collect(),
                        },
                    )?;
                    let mut args = vec![Term::Var(b.clone()), Term::Var(a.clone())];
                    args.extend(comps.iter().cloned().map(Term::Var));
                    let sub = th.app(subst_sym(p, n, k), args)?;
                    Ok((hom, Formula::atom(mk_defined(&sub))))
                })();
                let name_fwd = format!("def-subst-{p}-fwd");
                let name_bwd = format!("def-subst-{p}-bwd");
                let val = [("n", n), ("k", k)];
                match built {
                    Ok((hom, def)) => {
                        add_instance(&mut th, &name_fwd, &val, fv_sequent(hom.clone(), def.clone()));
                        add_instance(&mut th, &name_bwd, &val, fv_sequent(def, hom));
                    }
                    Err(SyntaxError::UnknownSymbol { .. }) => {}
                    Err(e) => panic!("substitution calculus builder: {e}"),
                }
            }
        }
    }

    // typing of variables
    for n in 1..=c {
        for i in 0..n {
            let a = Var::new("A", Sort::ctx(n));
            let seq = (|| {
                let v = th.app(v_sym(n, i), vec![Term::Var(a.clone())])?;
                let lhs = th.app(ty_sym(n), vec![v])?;
                let ftp = ft_power(&th, i, n - i, Term::Var(a.clone()))?;
                let mut args = vec![Term::Var(a.clone()), ftp];
                for j in ((i + 1)..n).rev() {
                    args.push(th.app(v_sym(n, j), vec![Term::Var(a.clone())])?);
                }
                let rhs = th.app(subst_sym(TY, n, n - i - 1), args)?;
                fv_sequent(Formula::truth(), Formula::atom(Atom::eq(lhs, rhs)?))
            })();
            add_instance(&mut th, "type-var", &[("n", n), ("i", i)], seq);
        }
    }

    // typing of type substitution
    for n in 0..=c {
        for k in 0..=c {
            let b = Var::new("B", Sort::ctx(n));
            let a = Var::new("A", Sort::ty(k));
            let comps = components("a", k, Sort::tm(n));
            let seq = (|| {
                let dom = th.app(ft_sym(k), vec![Term::Var(a.clone())])?;
                let hom = hom_formula(
                    &th,
                    &HomSpec {
                        n,
                        k,
                        codomain: Term::Var(b.clone()),
                        domain: dom,
                        components: comps.iter().cloned().map(Term::Var).collect(),
                    },
                )?;
                let mut args = vec![Term::Var(b.clone()), Term::Var(a.clone())];
                args.extend(comps.iter().cloned().map(Term::Var));
                let sub = th.app(subst_sym(TY, n, k), args)?;
                let lhs = th.app(ft_sym(n), vec![sub])?;
                fv_sequent(hom, Formula::atom(Atom::eq(lhs, Term::Var(b.clone()))?))
            })();
            add_instance(&mut th, "type-subst-ty", &[("n", n), ("k", k)], seq);
        }
    }

    // typing of term substitution (Kleene equality, two directions)
    for n in 0..=c {
        for k in 0..=c {
            let b = Var::new("B", Sort::ctx(n));
            let a = Var::new("a", Sort::tm(k));
            let comps = components("a", k, Sort::tm(n));
            let built = (|| -> Result<(Term, Term), SyntaxError> {
                let mut args = vec![Term::Var(b.clone()), Term::Var(a.clone())];
                args.extend(comps.iter().cloned().map(Term::Var));
                let sub_tm = th.app(subst_sym(TM, n, k), args)?;
                let t = th.app(ty_sym(n), vec![sub_tm])?;
                let tyk = th.app(ty_sym(k), vec![Term::Var(a.clone())])?;
                let mut args = vec![Term::Var(b.clone()), tyk];
                args.extend(comps.iter().cloned().map(Term::Var));
                let s = th.app(subst_sym(TY, n, k), args)?;
                Ok((t, s))
            })();
            let val = [("n", n), ("k", k)];
            match built {
                Ok((t, s)) => {
                    let eq = Atom::eq(t.clone(), s.clone()).expect("same sort");
                    add_instance(
                        &mut th,
                        "type-subst-tm-fwd",
                        &val,
                        fv_sequent(Formula::atom(mk_defined(&t)), Formula::atom(eq.clone())),
                    );
                    add_instance(
                        &mut th,
                        "type-subst-tm-bwd",
                        &val,
                        fv_sequent(Formula::atom(mk_defined(&s)), Formula::atom(eq)),
                    );
                }
                Err(SyntaxError::UnknownSymbol { .. }) => {}
                Err(e) => panic!("substitution calculus builder: {e}"),
            }
        }
    }

    // substituting all the variables of a context is the identity
    for p in [TM, TY] {
        for n in 0..=c {
            let a = Var::new("a", psort(p, n));
            let seq = (|| {
                let cpa = ctx_of(&th, p, n, Term::Var(a.clone()))?;
                let mut args = vec![cpa.clone(), Term::Var(a.clone())];
                for j in (0..n).rev() {
                    args.push(th.app(v_sym(n, j), vec![cpa.clone()])?);
                }
                let lhs = th.app(subst_sym(p, n, n), args)?;
                fv_sequent(
                    Formula::truth(),
                    Formula::atom(Atom::eq(lhs, Term::Var(a.clone()))?),
                )
            })();
            add_instance(&mut th, &format!("subst-var-{p}"), &[("n", n)], seq);
        }
    }

    // substitution picks out components on variables
    for n in 0..=c {
        for k in 1..=c {
            for i in 0..k {
                let b = Var::new("B", Sort::ctx(n));
                let a = Var::new("A", Sort::ctx(k));
                let comps = components("a", k, Sort::tm(n));
                let seq = (|| {
                    let hom = hom_formula(
                        &th,
                        &HomSpec {
                            n,
                            k,
                            codomain: Term::Var(b.clone()),
                            domain: Term::Var(a.clone()),
                            components: comps.iter().cloned().map(Term::Var).collect(),
                        },
                    )?;
                    let vki = th.app(v_sym(k, i), vec![Term::Var(a.clone())])?;
                    let mut args = vec![Term::Var(b.clone()), vki];
                    args.extend(comps.iter().cloned().map(Term::Var));
                    let lhs = th.app(subst_sym(TM, n, k), args)?;
                    let rhs = Term::Var(comps[(k - i - 1) as usize].clone());
                    fv_sequent(hom, Formula::atom(Atom::eq(lhs, rhs)?))
                })();
                add_instance(&mut th, "var-subst", &[("n", n), ("k", k), ("i", i)], seq);
            }
        }
    }

    // associativity of substitution
    for p in [TM, TY] {
        for n in 0..=c {
            for k in 0..=c {
                for m in 0..=c {
                    let cc = Var::new("C", Sort::ctx(n));
                    let bb = Var::new("B", Sort::ctx(k));
                    let a = Var::new("a", psort(p, m));
                    let bs = components("b", k, Sort::tm(n));
                    let asv = components("a", m, Sort::tm(k));
                    let seq = (|| {
                        let hom1 = hom_formula(
                            &th,
                            &HomSpec {
                                n,
                                k,
                                codomain: Term::Var(cc.clone()),
                                domain: Term::Var(bb.clone()),
                                components: bs.iter().cloned().map(Term::Var).collect(),
                            },
                        )?;
                        let cpa = ctx_of(&th, p, m, Term::Var(a.clone()))?;
                        let hom2 = hom_formula(
                            &th,
                            &HomSpec {
                                n: k,
                                k: m,
                                codomain: Term::Var(bb.clone()),
                                domain: cpa,
                                components: asv.iter().cloned().map(Term::Var).collect(),
                            },
                        )?;
                        let mut inner_args = vec![Term::Var(bb.clone()), Term::Var(a.clone())];
                        inner_args.extend(asv.iter().cloned().map(Term::Var));
                        let inner = th.app(subst_sym(p, k, m), inner_args)?;
                        let mut lhs_args = vec![Term::Var(cc.clone()), inner];
                        lhs_args.extend(bs.iter().cloned().map(Term::Var));
                        let lhs = th.app(subst_sym(p, n, k), lhs_args)?;
                        let mut rhs_args = vec![Term::Var(cc.clone()), Term::Var(a.clone())];
                        for aj in &asv {
                            let mut sub_args =
                                vec![Term::Var(cc.clone()), Term::Var(aj.clone())];
                            sub_args.extend(bs.iter().cloned().map(Term::Var));
                            rhs_args.push(th.app(subst_sym(TM, n, k), sub_args)?);
                        }
                        let rhs = th.app(subst_sym(p, n, m), rhs_args)?;
                        fv_sequent(hom1.and(hom2), Formula::atom(Atom::eq(lhs, rhs)?))
                    })();
                    add_instance(
                        &mut th,
                        &format!("subst-subst-{p}"),
                        &[("n", n), ("k", k), ("m", m)],
                        seq,
                    );
                }
            }
        }
    }

    th
}

/// `wk^{m,l}_{p,n}(Γ, a)` weakens `a : (p, n+l)` by `m` fresh variables
/// inserted below its top `l` variables, landing over `Γ : (ctx, n+m)`.
///
/// `wk^{m,0}_{p,n}(Γ,a) = subst_{p,n+m,n}(Γ, a, v_{n+m-1} … v_m)` and
/// `wk^{m,l+1}_{p,n}(Γ,a) = subst_{p,n+m+l+1,n+l+1}(Γ′, a, v_{n+m+l} … v_{m+l+1}, v_l … v_0)`
/// with `Γ′ = wk^{m,l}_{ty,n}(Γ, ctx(a))`; for `p = ctx` the base case is `Γ`
/// and the step defers to the `ty` reading.
pub fn weaken(
    th: &Theory,
    m: u32,
    l: u32,
    p: &str,
    n: u32,
    gamma: &Term,
    a: &Term,
) -> Result<Term, SyntaxError> {
    if p == CTX {
        return if l == 0 {
            Ok(gamma.clone())
        } else {
            weaken(th, m, l - 1, TY, n, gamma, a)
        };
    }
    if l == 0 {
        let mut args = vec![gamma.clone(), a.clone()];
        for i in (m..n + m).rev() {
            args.push(th.app(v_sym(n + m, i), vec![gamma.clone()])?);
        }
        return th.app(subst_sym(p, n + m, n), args);
    }
    let ctx_a = ctx_of(th, p, n + l, a.clone())?;
    let gamma2 = weaken(th, m, l - 1, TY, n, gamma, &ctx_a)?;
    let level = n + m + l;
    let mut args = vec![gamma2.clone(), a.clone()];
    for i in (m + l..level).rev() {
        args.push(th.app(v_sym(level, i), vec![gamma2.clone()])?);
    }
    for i in (0..l).rev() {
        args.push(th.app(v_sym(level, i), vec![gamma2.clone()])?);
    }
    th.app(subst_sym(p, level, n + l), args)
}

/// `subst^m_{p,n,k}(B, a, ā)` substitutes the `k` base variables of
/// `a : (p, k+m)` while carrying its top `m` variables along, landing over
/// `B : (ctx, n)` with components `ā : (tm, n)`.
///
/// `subst^0_{ctx,n,k}(B,A,ā) = B`, `subst^{m+1}_{ctx,n,k} = subst^m_{ty,n,k}`,
/// and for `p ∈ {ty, tm}`
/// `subst^m_{p,n,k}(B,a,ā) = subst_{p,n+m,k+m}(B′, a, wk^{m,0}_{tm,n}(B′,a₁) …, v_{m-1} … v_0)`
/// with `B′ = subst^m_{ctx,n,k}(B, ctx_{k+m}(a), ā)`.
pub fn subst_iter(
    th: &Theory,
    m: u32,
    p: &str,
    n: u32,
    k: u32,
    b: &Term,
    a: &Term,
    comps: &[Term],
) -> Result<Term, SyntaxError> {
    if comps.len() != k as usize {
        return Err(SyntaxError::Other(format!(
            "subst^{m} at ({p},{n},{k}) needs {k} components, got {}",
            comps.len()
        )));
    }
    if p == CTX {
        return if m == 0 {
            Ok(b.clone())
        } else {
            subst_iter(th, m - 1, TY, n, k, b, a, comps)
        };
    }
    let ctx_a = ctx_of(th, p, k + m, a.clone())?;
    let b2 = subst_iter(th, m, CTX, n, k, b, &ctx_a, comps)?;
    let mut args = vec![b2.clone(), a.clone()];
    for c in comps {
        args.push(weaken(th, m, 0, TM, n, &b2, c)?);
    }
    for i in (0..m).rev() {
        args.push(th.app(v_sym(n + m, i), vec![b2.clone()])?);
    }
    th.app(subst_sym(p, n + m, k + m), args)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{prove_sequent, Bounds, ProofOutcome};

    #[test]
    fn v_instances_at_cutoff_2() {
        let th = build_s(2);
        let vs: Vec<&SymId> = th
            .functions
            .keys()
            .filter(|s| s.name == "v")
            .collect();
        assert_eq!(
            vs,
            vec![&v_sym(1, 0), &v_sym(2, 0), &v_sym(2, 1)]
        );
    }

    #[test]
    fn def_var_instance_shape() {
        let th = build_s(2);
        let ax = th
            .find_axiom("def-var", &[("n".into(), 1), ("i".into(), 0)])
            .unwrap();
        let a = Var::new("A", Sort::ctx(1));
        let v = th.app(v_sym(1, 0), vec![Term::Var(a.clone())]).unwrap();
        assert_eq!(ax.sequent.context, vec![a]);
        assert!(ax.sequent.premise.is_truth());
        assert_eq!(ax.sequent.conclusion, Formula::atom(mk_defined(&v)));
    }

    #[test]
    fn subst_var_tm_instance_at_1() {
        let th = build_s(2);
        let ax = th
            .find_axiom("subst-var-tm", &[("n".into(), 1)])
            .unwrap();
        let a = Var::new("a", Sort::tm(1));
        let cpa = ctx_of(&th, TM, 1, Term::Var(a.clone())).unwrap();
        let v = th.app(v_sym(1, 0), vec![cpa.clone()]).unwrap();
        let lhs = th
            .app(subst_sym(TM, 1, 1), vec![cpa, Term::Var(a.clone()), v])
            .unwrap();
        assert_eq!(
            ax.sequent.conclusion,
            Formula::atom(Atom::eq(lhs, Term::Var(a)).unwrap())
        );
    }

    #[test]
    fn ft_power_unfolds() {
        let th = build_s(3);
        let a1 = Term::Var(Var::new("A", Sort::ctx(1)));
        assert_eq!(ft_power(&th, 0, 1, a1.clone()).unwrap(), a1);
        let a0 = Term::Var(Var::new("A", Sort::ctx(1)));
        assert_eq!(
            ft_power(&th, 1, 0, a0.clone()).unwrap(),
            th.app(ft_sym(0), vec![a0]).unwrap()
        );
        let a3 = Term::Var(Var::new("A", Sort::ctx(3)));
        let inner = th.app(ft_sym(2), vec![a3.clone()]).unwrap();
        assert_eq!(
            ft_power(&th, 2, 1, a3).unwrap(),
            th.app(ft_sym(1), vec![inner]).unwrap()
        );
    }

    #[test]
    fn ctx_of_examples() {
        let th = build_s(2);
        let a = Term::Var(Var::new("A", Sort::ty(0)));
        assert_eq!(
            ctx_of(&th, TY, 0, a.clone()).unwrap(),
            th.app(ft_sym(0), vec![a]).unwrap()
        );
        let x = Term::Var(Var::new("x", Sort::ctx(1)));
        assert_eq!(
            ctx_of(&th, CTX, 1, x.clone()).unwrap(),
            th.app(ctx_sym(CTX, 1), vec![x]).unwrap()
        );
        let t = Term::Var(Var::new("t", Sort::tm(1)));
        let ty = th.app(ty_sym(1), vec![t.clone()]).unwrap();
        assert_eq!(
            ctx_of(&th, TM, 1, t).unwrap(),
            th.app(ft_sym(1), vec![ty]).unwrap()
        );
    }

    #[test]
    fn hom_expansion_sizes() {
        let th = build_s(2);
        let b = Term::Var(Var::new("B", Sort::ctx(0)));
        let a1 = Term::Var(Var::new("A", Sort::ctx(1)));
        let a2 = Term::Var(Var::new("A", Sort::ctx(2)));
        let t1 = Term::Var(Var::new("t1", Sort::tm(0)));
        let t2 = Term::Var(Var::new("t2", Sort::tm(0)));
        let h0 = hom_formula(
            &th,
            &HomSpec {
                n: 0,
                k: 0,
                codomain: b.clone(),
                domain: Term::Var(Var::new("E", Sort::ctx(0))),
                components: vec![],
            },
        )
        .unwrap();
        assert!(h0.is_truth());
        let h1 = hom_formula(
            &th,
            &HomSpec {
                n: 0,
                k: 1,
                codomain: b.clone(),
                domain: a1,
                components: vec![t1.clone()],
            },
        )
        .unwrap();
        assert_eq!(h1.0.len(), 1);
        let h2 = hom_formula(
            &th,
            &HomSpec {
                n: 0,
                k: 2,
                codomain: b,
                domain: a2,
                components: vec![t1.clone(), t2],
            },
        )
        .unwrap();
        assert_eq!(h2.0.len(), 2);
        // the second atom's right side carries the first component
        let Atom::Eq(_, rhs) = &h2.0[1] else {
            panic!("expected equality");
        };
        assert!(rhs.contains_var(&Var::new("t1", Sort::tm(0))));
    }

    #[test]
    fn all_axioms_well_sorted_at_cutoff_3() {
        let th = build_s(3);
        assert!(!th.axioms.is_empty());
        for ax in &th.axioms {
            th.check_sequent(&ax.sequent)
                .unwrap_or_else(|e| panic!("{} {:?}: {e}", ax.name, ax.valuation));
        }
    }

    /// The substitution-calculus signature without any axioms, so derived
    /// operators can be exercised at high levels cheaply.
    fn signature_only(cutoff: u32) -> Theory {
        let mut th = base_theory("S-sig", &[CTX, TM], cutoff).unwrap();
        th.add_schema(SymbolSchema {
            name: "ty".into(),
            kind: SymbolKind::Function,
            params: vec![LevelParam::plain("n")],
            args: vec![ArgGroup::One(SortExpr::new(TM, LevelExpr::var("n")))],
            result: Some(SortExpr::new(CTX, LevelExpr::plus("n", 1))),
        })
        .unwrap();
        th.add_schema(SymbolSchema {
            name: "v".into(),
            kind: SymbolKind::Function,
            params: vec![
                LevelParam::plain("n"),
                LevelParam {
                    name: "i".into(),
                    constraints: vec![Constraint {
                        lhs: LevelExpr::var("i"),
                        op: CmpOp::Lt,
                        rhs: LevelExpr::var("n"),
                    }],
                },
            ],
            args: vec![ArgGroup::One(SortExpr::new(CTX, LevelExpr::var("n")))],
            result: Some(SortExpr::new(TM, LevelExpr::var("n"))),
        })
        .unwrap();
        for (name, middle, result) in [
            ("subst-tm", SortExpr::new(TM, LevelExpr::var("k")), SortExpr::new(TM, LevelExpr::var("n"))),
            ("subst-ty", SortExpr::new(CTX, LevelExpr::plus("k", 1)), SortExpr::new(CTX, LevelExpr::plus("n", 1))),
        ] {
            th.add_schema(SymbolSchema {
                name: name.into(),
                kind: SymbolKind::Function,
                params: vec![LevelParam::plain("n"), LevelParam::plain("k")],
                args: vec![
                    ArgGroup::One(SortExpr::new(CTX, LevelExpr::var("n"))),
                    ArgGroup::One(middle),
                    ArgGroup::Rep {
                        count: "k".into(),
                        sort: SortExpr::new(TM, LevelExpr::var("n")),
                    },
                ],
                result: Some(result),
            })
            .unwrap();
        }
        th
    }

    fn paper_var(name: &str, p: &str, level: u32) -> Term {
        let sort = match p {
            TM => Sort::tm(level),
            TY => Sort::ty(level),
            _ => Sort::ctx(level),
        };
        Term::var(name, sort)
    }

    #[test]
    fn weaken_base_case_shape() {
        // wk^{1,0}_{tm,1}(Γ,a) = subst-tm@{2,1}(Γ, a, v@{2,1}(Γ))
        let th = signature_only(4);
        let g = Term::var("G", Sort::ctx(2));
        let a = Term::var("a", Sort::tm(1));
        let got = weaken(&th, 1, 0, TM, 1, &g, &a).unwrap();
        let v = th.app(v_sym(2, 1), vec![g.clone()]).unwrap();
        let want = th.app(subst_sym(TM, 2, 1), vec![g, a, v]).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn weaken_ctx_base_is_gamma() {
        let th = signature_only(4);
        let g = Term::var("G", Sort::ctx(2));
        let a = Term::var("A", Sort::ctx(1));
        assert_eq!(weaken(&th, 1, 0, CTX, 1, &g, &a).unwrap(), g);
    }

    #[test]
    fn subst_iter_base_ctx_is_b() {
        let th = signature_only(4);
        let b = Term::var("B", Sort::ctx(1));
        let a = Term::var("A", Sort::ctx(2));
        let c = Term::var("c", Sort::tm(1));
        assert_eq!(
            subst_iter(&th, 0, CTX, 1, 1, &b, &a, &[c]).unwrap(),
            b
        );
    }

    #[test]
    fn subst_iter_one_carried_variable_shape() {
        // subst^1_{tm,1,1}(B, a, a1) substitutes below one carried variable
        let th = signature_only(4);
        let b = Term::var("B", Sort::ctx(1));
        let a = Term::var("a", Sort::tm(2));
        let a1 = Term::var("a1", Sort::tm(1));
        let got = subst_iter(&th, 1, TM, 1, 1, &b, &a, &[a1.clone()]).unwrap();
        let ctx_a = ctx_of(&th, TM, 2, a.clone()).unwrap();
        let b2 = subst_iter(&th, 1, CTX, 1, 1, &b, &ctx_a, &[a1.clone()]).unwrap();
        let w = weaken(&th, 1, 0, TM, 1, &b2, &a1).unwrap();
        let v0 = th.app(v_sym(2, 0), vec![b2.clone()]).unwrap();
        let want = th.app(subst_sym(TM, 2, 2), vec![b2, a, w, v0]).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn weaken_well_sorted_over_level_tuples() {
        let th = signature_only(10);
        for p in [CTX, TY, TM] {
            for m in 0u32..=3 {
                for l in 0u32..=3 {
                    for n in 0u32..=3 {
                        let g = Term::var("G", Sort::ctx(n + m));
                        let a = paper_var("a", p, n + l);
                        let got = weaken(&th, m, l, p, n, &g, &a)
                            .unwrap_or_else(|e| panic!("wk^{{{m},{l}}}_{{{p},{n}}}: {e}"));
                        let want = paper_var("r", p, n + m + l).sort().clone();
                        assert_eq!(got.sort(), &want, "wk^{{{m},{l}}}_{{{p},{n}}}");
                    }
                }
            }
        }
    }

    #[test]
    fn subst_iter_well_sorted_over_level_tuples() {
        let th = signature_only(10);
        for p in [CTX, TY, TM] {
            for m in 0u32..=3 {
                for n in 0u32..=3 {
                    for k in 0u32..=3 {
                        let b = Term::var("B", Sort::ctx(n));
                        let a = paper_var("a", p, k + m);
                        let comps: Vec<Term> = (0..k)
                            .map(|i| Term::var(format!("c{i}"), Sort::tm(n)))
                            .collect();
                        let got = subst_iter(&th, m, p, n, k, &b, &a, &comps)
                            .unwrap_or_else(|e| panic!("subst^{m}_{{{p},{n},{k}}}: {e}"));
                        let want = paper_var("r", p, n + m).sort().clone();
                        assert_eq!(got.sort(), &want, "subst^{m}_{{{p},{n},{k}}}");
                    }
                }
            }
        }
    }

    #[test]
    fn hom_implies_codomain_equation() {
        // if Hom_{0,1}(B, A, a1) then ft(ty(a1)) = B
        let th = build_s(2);
        let b = Var::new("B", Sort::ctx(0));
        let a = Var::new("A", Sort::ctx(1));
        let a1 = Var::new("a1", Sort::tm(0));
        let hom = hom_formula(
            &th,
            &HomSpec {
                n: 0,
                k: 1,
                codomain: Term::Var(b.clone()),
                domain: Term::Var(a.clone()),
                components: vec![Term::Var(a1.clone())],
            },
        )
        .unwrap();
        let lhs = ctx_of(&th, TM, 0, Term::Var(a1.clone())).unwrap();
        let goal = Sequent::new(
            vec![b.clone(), a, a1],
            hom,
            Formula::atom(Atom::eq(lhs, Term::Var(b)).unwrap()),
        )
        .unwrap();
        match prove_sequent(&th, &goal, &Bounds::default()) {
            ProofOutcome::Proven(d) => {
                d.check(&th).unwrap();
            }
            other => panic!("expected Proven, got {other:?}"),
        }
    }
}
