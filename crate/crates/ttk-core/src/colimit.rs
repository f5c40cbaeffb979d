//! Coproducts, coequalizers, pushouts, and sequential colimits of theories
//! over a fixed sort structure, plus the universal-property mediators used
//! by the test suite.

use std::collections::BTreeMap;

use indexmap::IndexMap;

use crate::engine::{interderivable_sequents, iso_sequents};
use crate::morphism::{canonical_args, Interpretation, MorphismError};
use crate::syntax::{Atom, Formula, RestrictedTerm, Sequent, SymId, SyntaxError, Term};
use crate::theory::Theory;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ColimitError {
    #[error("theories {left} and {right} have different sort structure")]
    SortMismatch { left: String, right: String },
    #[error("empty coproduct requires an explicit sort structure; got no theories")]
    Empty,
    #[error("morphisms {f} and {g} are not parallel")]
    NotParallel { f: String, g: String },
    #[error("chain link {index} has source {got}, expected {expected}")]
    BrokenChain {
        index: usize,
        expected: String,
        got: String,
    },
    #[error("chain of length {len} has no stage {stage}")]
    StageOutOfRange { len: usize, stage: usize },
    #[error("cocone has {got} legs, coproduct has {expected} components")]
    CoconeArity { expected: usize, got: usize },
    #[error("cocone legs have different targets")]
    CoconeTarget,
    #[error("mediating morphism for a coequalizer needs h∘f = h∘g on symbol {sym}")]
    NotCoequalized { sym: String },
    #[error(transparent)]
    Morphism(#[from] MorphismError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

fn rename_term(map: &BTreeMap<SymId, SymId>, t: &Term) -> Term {
    match t {
        Term::Var(_) => t.clone(),
        Term::App { sym, args, sort } => Term::App {
            sym: map.get(sym).cloned().unwrap_or_else(|| sym.clone()),
            args: args.iter().map(|a| rename_term(map, a)).collect(),
            sort: sort.clone(),
        },
    }
}

fn rename_atom(map: &BTreeMap<SymId, SymId>, a: &Atom) -> Atom {
    match a {
        Atom::Eq(l, r) => Atom::Eq(rename_term(map, l), rename_term(map, r)),
        Atom::Pred { sym, args } => Atom::Pred {
            sym: map.get(sym).cloned().unwrap_or_else(|| sym.clone()),
            args: args.iter().map(|t| rename_term(map, t)).collect(),
        },
    }
}

fn rename_formula(map: &BTreeMap<SymId, SymId>, phi: &Formula) -> Formula {
    Formula(phi.0.iter().map(|a| rename_atom(map, a)).collect())
}

fn rename_sequent(map: &BTreeMap<SymId, SymId>, seq: &Sequent) -> Sequent {
    Sequent {
        context: seq.context.clone(),
        premise: rename_formula(map, &seq.premise),
        conclusion: rename_formula(map, &seq.conclusion),
    }
}

/// A coproduct presentation together with its injections and the mapping
/// from coproduct symbols back to (component, original symbol).
#[derive(Debug, Clone)]
pub struct Coproduct {
    pub theory: Theory,
    pub injections: Vec<Interpretation>,
    pub origin: BTreeMap<SymId, (usize, SymId)>,
}

/// Disjoint union of symbols and axioms. Symbol families whose names occur
/// in more than one component are mangled `index.name`; unambiguous names
/// are kept as written.
pub fn coproduct(parts: &[Theory]) -> Result<Coproduct, ColimitError> {
    let first = parts.first().ok_or(ColimitError::Empty)?;
    let mut sorts0 = first.basic_sorts.clone();
    sorts0.sort();
    for p in &parts[1..] {
        let mut s = p.basic_sorts.clone();
        s.sort();
        if s != sorts0 || p.cutoff != first.cutoff {
            return Err(ColimitError::SortMismatch {
                left: first.name.clone(),
                right: p.name.clone(),
            });
        }
    }

    let mut name_owners: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut axiom_owners: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in parts.iter().enumerate() {
        for sym in p.functions.keys().chain(p.predicates.keys()) {
            let owners = name_owners.entry(&sym.name).or_default();
            if owners.last() != Some(&i) {
                owners.push(i);
            }
        }
        for ax in &p.axioms {
            let owners = axiom_owners.entry(&ax.name).or_default();
            if owners.last() != Some(&i) {
                owners.push(i);
            }
        }
    }
    let mangle = |i: usize, name: &str, owners: &BTreeMap<&str, Vec<usize>>| {
        if owners[name].len() > 1 {
            format!("{i}.{name}")
        } else {
            name.to_string()
        }
    };

    let name = parts
        .iter()
        .map(|p| p.name.as_str())
        .collect::<Vec<_>>()
        .join("+");
    let mut out = Theory::new(name, first.basic_sorts.clone(), first.cutoff);
    out.provenance.push(format!(
        "coproduct of {}",
        parts
            .iter()
            .map(|p| p.name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    ));
    let mut origin = BTreeMap::new();
    let mut maps: Vec<BTreeMap<SymId, SymId>> = Vec::new();
    for (i, p) in parts.iter().enumerate() {
        let mut map = BTreeMap::new();
        for (sym, sig) in &p.functions {
            let new = SymId::new(mangle(i, &sym.name, &name_owners), sym.levels.clone());
            out.add_function(new.clone(), sig.args.clone(), sig.result.clone());
            origin.insert(new.clone(), (i, sym.clone()));
            map.insert(sym.clone(), new);
        }
        for (sym, sig) in &p.predicates {
            let new = SymId::new(mangle(i, &sym.name, &name_owners), sym.levels.clone());
            out.add_predicate(new.clone(), sig.args.clone());
            origin.insert(new.clone(), (i, sym.clone()));
            map.insert(sym.clone(), new);
        }
        for ax in &p.axioms {
            out.add_axiom(
                mangle(i, &ax.name, &axiom_owners),
                ax.valuation.clone(),
                rename_sequent(&map, &ax.sequent),
            );
        }
        maps.push(map);
    }

    let mut injections = Vec::new();
    for (i, p) in parts.iter().enumerate() {
        let mut functions = IndexMap::new();
        for (sym, sig) in &p.functions {
            let args = canonical_args(&sig.args).into_iter().map(Term::Var).collect();
            let t = out.app(maps[i][sym].clone(), args)?;
            functions.insert(sym.clone(), RestrictedTerm::unrestricted(t));
        }
        let mut predicates = IndexMap::new();
        for (sym, sig) in &p.predicates {
            let args = canonical_args(&sig.args).into_iter().map(Term::Var).collect();
            let atom = out.pred_atom(maps[i][sym].clone(), args)?;
            predicates.insert(sym.clone(), Formula::atom(atom));
        }
        injections.push(Interpretation {
            source: p.clone(),
            target: out.clone(),
            functions,
            predicates,
        });
    }
    // injections were built against a clone taken per-iteration; refresh
    // their shared target to the finished theory
    for inj in &mut injections {
        inj.target = out.clone();
    }
    Ok(Coproduct {
        theory: out,
        injections,
        origin,
    })
}

/// A coequalizer presentation with the quotient map `e` (identity on
/// symbols).
#[derive(Debug, Clone)]
pub struct Coequalizer {
    pub theory: Theory,
    pub e: Interpretation,
}

/// Target theory plus, per source symbol, the sequents expanding
/// `f(σ(x̄)) ≅ g(σ(x̄))` and `f(R(x̄)) ⊣⊢ g(R(x̄))`.
pub fn coequalizer(f: &Interpretation, g: &Interpretation) -> Result<Coequalizer, ColimitError> {
    if f.source.digest() != g.source.digest() || f.target.digest() != g.target.digest() {
        return Err(ColimitError::NotParallel {
            f: format!("{}→{}", f.source.name, f.target.name),
            g: format!("{}→{}", g.source.name, g.target.name),
        });
    }
    let mut out = f.target.clone();
    out.name = format!("coeq({})", out.name);
    out.provenance.push(format!(
        "coequalizer of two morphisms {} → {}",
        f.source.name, f.target.name
    ));
    for sym in f.source.functions.keys() {
        let a = f.functions[sym].clone();
        let b = g.functions[sym].clone();
        let (fwd, bwd) = iso_sequents(&a, &b)?;
        out.add_axiom(format!("coeq-{}-1", sym.token()), vec![], fwd);
        out.add_axiom(format!("coeq-{}-2", sym.token()), vec![], bwd);
    }
    for sym in f.source.predicates.keys() {
        let a = &f.predicates[sym];
        let b = &g.predicates[sym];
        let (fwd, bwd) = interderivable_sequents(a, b)?;
        out.add_axiom(format!("coeq-{}-1", sym.token()), vec![], fwd);
        out.add_axiom(format!("coeq-{}-2", sym.token()), vec![], bwd);
    }
    let mut e = Interpretation::identity(&f.target);
    e.target = out.clone();
    Ok(Coequalizer { theory: out, e })
}

/// A pushout presentation with its two legs and the quotient map from the
/// underlying coproduct.
#[derive(Debug, Clone)]
pub struct Pushout {
    pub theory: Theory,
    pub left: Interpretation,
    pub right: Interpretation,
    pub e: Interpretation,
}

/// Coequalizer of the two composites into the binary coproduct.
pub fn pushout(f: &Interpretation, g: &Interpretation) -> Result<Pushout, ColimitError> {
    if f.source.digest() != g.source.digest() {
        return Err(ColimitError::NotParallel {
            f: format!("{}→{}", f.source.name, f.target.name),
            g: format!("{}→{}", g.source.name, g.target.name),
        });
    }
    let cop = coproduct(&[f.target.clone(), g.target.clone()])?;
    let into_b = Interpretation::compose(&cop.injections[0], f)?;
    let into_c = Interpretation::compose(&cop.injections[1], g)?;
    let coeq = coequalizer(&into_b, &into_c)?;
    let left = Interpretation::compose(&coeq.e, &cop.injections[0])?;
    let right = Interpretation::compose(&coeq.e, &cop.injections[1])?;
    Ok(Pushout {
        theory: coeq.theory,
        left,
        right,
        e: coeq.e,
    })
}

/// The `stages`-th theory of a composable chain `T₀ → T₁ → …`; all earlier
/// symbols are transported by the chain morphisms, so the stage itself is
/// the truncated colimit.
pub fn sequential_colimit(
    start: &Theory,
    chain: &[Interpretation],
    stages: usize,
) -> Result<Theory, ColimitError> {
    let mut prev = start.digest();
    for (i, link) in chain.iter().enumerate() {
        if link.source.digest() != prev {
            return Err(ColimitError::BrokenChain {
                index: i,
                expected: prev,
                got: link.source.digest(),
            });
        }
        prev = link.target.digest();
    }
    if stages > chain.len() {
        return Err(ColimitError::StageOutOfRange {
            len: chain.len(),
            stage: stages,
        });
    }
    Ok(if stages == 0 {
        start.clone()
    } else {
        chain[stages - 1].target.clone()
    })
}

/// Mediating morphism for a cocone over a coproduct: the coproduct symbol
/// `i.σ` is sent to leg `i`'s assignment for `σ`.
pub fn coproduct_mediator(
    cop: &Coproduct,
    cocone: &[Interpretation],
) -> Result<Interpretation, ColimitError> {
    if cocone.len() != cop.injections.len() {
        return Err(ColimitError::CoconeArity {
            expected: cop.injections.len(),
            got: cocone.len(),
        });
    }
    let target = &cocone.first().ok_or(ColimitError::Empty)?.target;
    for leg in cocone {
        if leg.target.digest() != target.digest() {
            return Err(ColimitError::CoconeTarget);
        }
    }
    let mut functions = IndexMap::new();
    let mut predicates = IndexMap::new();
    for (sym, (i, orig)) in &cop.origin {
        if cop.theory.functions.contains_key(sym) {
            functions.insert(sym.clone(), cocone[*i].functions[orig].clone());
        } else {
            predicates.insert(sym.clone(), cocone[*i].predicates[orig].clone());
        }
    }
    Ok(Interpretation {
        source: cop.theory.clone(),
        target: target.clone(),
        functions,
        predicates,
    })
}

/// Mediating morphism for a coequalizer: `h : target → X` with
/// `h∘f = h∘g` factors through `e` by reusing its assignments.
pub fn coequalizer_mediator(
    coeq: &Coequalizer,
    h: &Interpretation,
) -> Result<Interpretation, ColimitError> {
    Ok(Interpretation {
        source: coeq.theory.clone(),
        target: h.target.clone(),
        functions: h.functions.clone(),
        predicates: h.predicates.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Bounds;
    use crate::morphism::{certify, check_equivalence, CertCache, Verdict};
    use crate::syntax::Sort;

    fn one_const(name: &str, cname: &str) -> Theory {
        let mut th = Theory::new(name, vec!["ctx".into()], 1);
        th.add_function(SymId::new(cname, vec![]), vec![], Sort::ctx(0));
        th.add_axiom(
            format!("{cname}-def"),
            vec![],
            Sequent::new(
                vec![],
                Formula::truth(),
                RestrictedTerm::unrestricted(
                    th.app(SymId::new(cname, vec![]), vec![]).unwrap(),
                )
                .definedness(),
            )
            .unwrap(),
        );
        th
    }

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

    #[test]
    fn singleton_coproduct_is_isomorphic() {
        let th = mono();
        let cop = coproduct(&[th.clone()]).unwrap();
        // no mangling needed, so the presentation is unchanged up to name
        assert_eq!(cop.theory.functions, th.functions);
        assert_eq!(cop.theory.axioms, th.axioms);
        let id = Interpretation::identity(&th);
        assert_eq!(cop.injections[0].functions, id.functions);
        cop.injections[0].validate().unwrap();
    }

    #[test]
    fn empty_unit_law() {
        let th = mono();
        let empty = Theory::new("empty", vec!["ctx".into()], 1);
        let cop = coproduct(&[empty, th.clone()]).unwrap();
        assert_eq!(cop.theory.functions, th.functions);
        assert_eq!(cop.theory.axioms, th.axioms);
    }

    #[test]
    fn coproduct_counts_and_mangling() {
        let a = one_const("a", "c");
        let b = one_const("b", "c");
        let c = one_const("c", "d");
        let cop = coproduct(&[a, b, c]).unwrap();
        assert_eq!(cop.theory.functions.len(), 3);
        assert_eq!(cop.theory.axioms.len(), 3);
        let toks: Vec<String> = cop.theory.functions.keys().map(|s| s.token()).collect();
        assert_eq!(toks, vec!["0.c", "1.c", "d"]);
        for inj in &cop.injections {
            inj.validate().unwrap();
        }
    }

    #[test]
    fn coequalizer_of_equal_pair_is_reflexive() {
        let th = mono();
        let id = Interpretation::identity(&th);
        let coeq = coequalizer(&id, &id).unwrap();
        // two sequents per function symbol, no predicates
        assert_eq!(coeq.theory.axioms.len(), th.axioms.len() + 4);
        let bounds = Bounds::default();
        let mut cache = CertCache::new();
        let e = certify(coeq.e.clone(), &bounds, &mut cache).unwrap();
        assert!(e.verified());
    }

    #[test]
    fn coequalizer_added_sequent_count() {
        let mut th = Theory::new("fp", vec!["ctx".into()], 1);
        th.add_function(
            SymId::new("f", vec![]),
            vec![Sort::ctx(0)],
            Sort::ctx(0),
        );
        th.add_predicate(SymId::new("P", vec![]), vec![Sort::ctx(0)]);
        let id = Interpretation::identity(&th);
        let coeq = coequalizer(&id, &id).unwrap();
        assert_eq!(coeq.theory.axioms.len(), 4);
    }

    #[test]
    fn coequalizer_merges_constants() {
        // two constants, coequalize the swap with the identity: e∘f ≡ e∘g
        let mut th = Theory::new("two", vec!["ctx".into()], 1);
        for c in ["a", "b"] {
            th.add_function(SymId::new(c, vec![]), vec![], Sort::ctx(0));
            th.add_axiom(
                format!("{c}-def"),
                vec![],
                Sequent::new(
                    vec![],
                    Formula::truth(),
                    RestrictedTerm::unrestricted(th.app(SymId::new(c, vec![]), vec![]).unwrap())
                        .definedness(),
                )
                .unwrap(),
            );
        }
        let id = Interpretation::identity(&th);
        let mut swap = id.clone();
        let a = th.app(SymId::new("a", vec![]), vec![]).unwrap();
        let b = th.app(SymId::new("b", vec![]), vec![]).unwrap();
        swap.functions
            .insert(SymId::new("a", vec![]), RestrictedTerm::unrestricted(b));
        swap.functions
            .insert(SymId::new("b", vec![]), RestrictedTerm::unrestricted(a));
        let coeq = coequalizer(&id, &swap).unwrap();
        let bounds = Bounds::default();
        let ef = Interpretation::compose(&coeq.e, &id).unwrap();
        let eg = Interpretation::compose(&coeq.e, &swap).unwrap();
        assert_eq!(
            check_equivalence(&ef, &eg, &bounds).unwrap(),
            Verdict::Proven
        );
    }

    #[test]
    fn pushout_of_constant_extensions() {
        let empty = Theory::new("empty", vec!["ctx".into()], 1);
        let b = one_const("b", "cb");
        let c = one_const("c", "cc");
        let f = Interpretation {
            source: empty.clone(),
            target: b,
            functions: IndexMap::new(),
            predicates: IndexMap::new(),
        };
        let g = Interpretation {
            source: empty,
            target: c,
            functions: IndexMap::new(),
            predicates: IndexMap::new(),
        };
        let po = pushout(&f, &g).unwrap();
        assert_eq!(po.theory.functions.len(), 2);
        // nothing to coequalize over the empty source
        assert_eq!(po.theory.axioms.len(), 2);
        po.left.validate().unwrap();
        po.right.validate().unwrap();
    }

    #[test]
    fn sequential_colimit_stages() {
        let th = mono();
        let id = Interpretation::identity(&th);
        let chain = vec![id.clone(), id];
        assert_eq!(
            sequential_colimit(&th, &chain, 0).unwrap().digest(),
            th.digest()
        );
        assert_eq!(
            sequential_colimit(&th, &chain, 2).unwrap().digest(),
            th.digest()
        );
        assert!(matches!(
            sequential_colimit(&th, &chain, 3),
            Err(ColimitError::StageOutOfRange { .. })
        ));
    }

    #[test]
    fn coproduct_universal_property() {
        let a = one_const("a", "ca");
        let b = one_const("b", "cb");
        let cop = coproduct(&[a.clone(), b.clone()]).unwrap();
        // cocone into mono: both constants to e
        let x = mono();
        let e = x.app(SymId::new("e", vec![]), vec![]).unwrap();
        let leg = |src: &Theory, cname: &str| Interpretation {
            source: src.clone(),
            target: x.clone(),
            functions: IndexMap::from([(
                SymId::new(cname, vec![]),
                RestrictedTerm::unrestricted(e.clone()),
            )]),
            predicates: IndexMap::new(),
        };
        let cocone = vec![leg(&a, "ca"), leg(&b, "cb")];
        let u = coproduct_mediator(&cop, &cocone).unwrap();
        u.validate().unwrap();
        let bounds = Bounds::default();
        let mut cache = CertCache::new();
        assert!(certify(u.clone(), &bounds, &mut cache).unwrap().verified());
        // triangles: u ∘ inj_i ≡ leg_i
        for (inj, leg) in cop.injections.iter().zip(&cocone) {
            let comp = Interpretation::compose(&u, inj).unwrap();
            assert_eq!(
                check_equivalence(&comp, leg, &bounds).unwrap(),
                Verdict::Proven
            );
        }
    }

    #[test]
    fn coequalizer_universal_property() {
        // coequalize swap with identity on the two-constant theory, then
        // factor the collapse-everything cocone through e
        let mut th = Theory::new("two", vec!["ctx".into()], 1);
        for c in ["a", "b"] {
            th.add_function(SymId::new(c, vec![]), vec![], Sort::ctx(0));
            th.add_axiom(
                format!("{c}-def"),
                vec![],
                Sequent::new(
                    vec![],
                    Formula::truth(),
                    RestrictedTerm::unrestricted(th.app(SymId::new(c, vec![]), vec![]).unwrap())
                        .definedness(),
                )
                .unwrap(),
            );
        }
        let id = Interpretation::identity(&th);
        let mut swap = id.clone();
        let a = th.app(SymId::new("a", vec![]), vec![]).unwrap();
        let b = th.app(SymId::new("b", vec![]), vec![]).unwrap();
        swap.functions
            .insert(SymId::new("a", vec![]), RestrictedTerm::unrestricted(b.clone()));
        swap.functions
            .insert(SymId::new("b", vec![]), RestrictedTerm::unrestricted(a.clone()));
        let coeq = coequalizer(&id, &swap).unwrap();
        // h : two → mono sending both constants to e satisfies h∘f = h∘g
        let x = mono();
        let e = x.app(SymId::new("e", vec![]), vec![]).unwrap();
        let h = Interpretation {
            source: th.clone(),
            target: x,
            functions: IndexMap::from([
                (SymId::new("a", vec![]), RestrictedTerm::unrestricted(e.clone())),
                (SymId::new("b", vec![]), RestrictedTerm::unrestricted(e)),
            ]),
            predicates: IndexMap::new(),
        };
        let u = coequalizer_mediator(&coeq, &h).unwrap();
        u.validate().unwrap();
        let bounds = Bounds::default();
        let mut cache = CertCache::new();
        // u must also discharge the added coequalizer axioms
        assert!(certify(u.clone(), &bounds, &mut cache).unwrap().verified());
        let through = Interpretation::compose(&u, &coeq.e).unwrap();
        assert_eq!(
            check_equivalence(&through, &h, &bounds).unwrap(),
            Verdict::Proven
        );
    }
}
