//! Proof objects for partial Horn logic and their checker.
//!
//! Rules: b1 identity, b2 cut, b3 truth, b4/b5 projection, b6 pairing,
//! a1 variable definedness, a2 variable replacement, a3 substitution, plus
//! axiom leaves (a named instance with a variable renaming) and an explicit
//! context-weakening rule. Contexts are sets of sorted variables and never
//! shrink; a3's conclusion keeps the substituted variable in its context.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sexpr::{self, Sexpr};
use crate::syntax::{Atom, Formula, Sequent, Sort, SyntaxError, Term, Var};
use crate::theory::{TermParser, Theory, TheoryError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    B1,
    B2,
    B3,
    B4 { split: usize },
    B5 { split: usize },
    B6,
    A1,
    A2 { x: Var, y: Var },
    A3 { x: Var, t: Term },
    AxiomLeaf {
        name: String,
        valuation: Vec<(String, u32)>,
        renaming: BTreeMap<String, String>,
    },
    CtxWeaken,
}

impl Rule {
    pub fn tag(&self) -> &'static str {
        match self {
            Rule::B1 => "b1",
            Rule::B2 => "b2",
            Rule::B3 => "b3",
            Rule::B4 { .. } => "b4",
            Rule::B5 { .. } => "b5",
            Rule::B6 => "b6",
            Rule::A1 => "a1",
            Rule::A2 { .. } => "a2",
            Rule::A3 { .. } => "a3",
            Rule::AxiomLeaf { .. } => "axiom",
            Rule::CtxWeaken => "weaken",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub rule: Rule,
    pub children: Vec<Derivation>,
    pub conclusion: Sequent,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("node {}: {reason}", path_string(.path))]
pub struct CheckError {
    pub path: Vec<usize>,
    pub reason: String,
}

fn path_string(path: &[usize]) -> String {
    if path.is_empty() {
        "root".to_string()
    } else {
        path.iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

fn fail(path: &[usize], reason: impl Into<String>) -> CheckError {
    CheckError {
        path: path.to_vec(),
        reason: reason.into(),
    }
}

/// Variable-for-variable formula substitution used by a2 and axiom renaming.
fn rename_formula(phi: &Formula, map: &BTreeMap<Var, Var>) -> Formula {
    let map: BTreeMap<Var, Term> = map
        .iter()
        .map(|(k, v)| (k.clone(), Term::Var(v.clone())))
        .collect();
    phi.substitute_many(&map)
}

impl Derivation {
    fn leaf(rule: Rule, conclusion: Sequent) -> Derivation {
        Derivation {
            rule,
            children: Vec::new(),
            conclusion,
        }
    }

    pub fn b1(context: Vec<Var>, phi: Formula) -> Result<Derivation, SyntaxError> {
        let seq = Sequent::new(context, phi.clone(), phi)?;
        Ok(Derivation::leaf(Rule::B1, seq))
    }

    pub fn b2(d1: Derivation, d2: Derivation) -> Result<Derivation, SyntaxError> {
        let seq = Sequent::new(
            d1.conclusion.context.clone(),
            d1.conclusion.premise.clone(),
            d2.conclusion.conclusion.clone(),
        )?;
        Ok(Derivation {
            rule: Rule::B2,
            children: vec![d1, d2],
            conclusion: seq,
        })
    }

    pub fn b3(context: Vec<Var>, phi: Formula) -> Result<Derivation, SyntaxError> {
        let seq = Sequent::new(context, phi, Formula::truth())?;
        Ok(Derivation::leaf(Rule::B3, seq))
    }

    pub fn b4(context: Vec<Var>, phi: Formula, split: usize) -> Result<Derivation, SyntaxError> {
        let head = Formula(phi.0[..split].to_vec());
        let seq = Sequent::new(context, phi, head)?;
        Ok(Derivation::leaf(Rule::B4 { split }, seq))
    }

    pub fn b5(context: Vec<Var>, phi: Formula, split: usize) -> Result<Derivation, SyntaxError> {
        let tail = Formula(phi.0[split..].to_vec());
        let seq = Sequent::new(context, phi, tail)?;
        Ok(Derivation::leaf(Rule::B5 { split }, seq))
    }

    pub fn b6(d1: Derivation, d2: Derivation) -> Result<Derivation, SyntaxError> {
        let seq = Sequent::new(
            d1.conclusion.context.clone(),
            d1.conclusion.premise.clone(),
            d1.conclusion
                .conclusion
                .clone()
                .and(d2.conclusion.conclusion.clone()),
        )?;
        Ok(Derivation {
            rule: Rule::B6,
            children: vec![d1, d2],
            conclusion: seq,
        })
    }

    pub fn a1(x: Var) -> Result<Derivation, SyntaxError> {
        let t = Term::Var(x.clone());
        let seq = Sequent::new(
            vec![x.clone()],
            Formula::truth(),
            Formula::atom(crate::syntax::mk_defined(&t)),
        )?;
        Ok(Derivation::leaf(Rule::A1, seq))
    }

    pub fn a2(context: Vec<Var>, x: Var, y: Var, phi: Formula) -> Result<Derivation, SyntaxError> {
        let mut ctx = context;
        ctx.push(x.clone());
        ctx.push(y.clone());
        let premise = Formula::atom(Atom::eq(
            Term::Var(x.clone()),
            Term::Var(y.clone()),
        )?)
        .and(phi.clone());
        let conclusion = phi.substitute_unchecked(&x, &Term::Var(y.clone()));
        let seq = Sequent::new(ctx, premise, conclusion)?;
        Ok(Derivation::leaf(Rule::A2 { x, y }, seq))
    }

    pub fn a3(
        child: Derivation,
        x: Var,
        t: Term,
        extra: Vec<Var>,
    ) -> Result<Derivation, SyntaxError> {
        if t.sort() != &x.sort {
            return Err(SyntaxError::SortMismatch {
                expected: x.sort.clone(),
                got: t.sort().clone(),
                context: format!("a3 substitution for {}", x.name),
            });
        }
        let mut ctx = child.conclusion.context.clone();
        ctx.extend(extra);
        ctx.extend(t.free_vars());
        let premise = child.conclusion.premise.substitute_unchecked(&x, &t);
        let conclusion = child.conclusion.conclusion.substitute_unchecked(&x, &t);
        let seq = Sequent::new(ctx, premise, conclusion)?;
        Ok(Derivation {
            rule: Rule::A3 { x, t },
            children: vec![child],
            conclusion: seq,
        })
    }

    pub fn axiom(
        theory: &Theory,
        name: &str,
        valuation: Vec<(String, u32)>,
        renaming: BTreeMap<String, String>,
    ) -> Result<Derivation, CheckError> {
        let axiom = theory.find_axiom(name, &valuation).ok_or_else(|| {
            fail(&[], format!("unknown axiom {name} at {valuation:?}"))
        })?;
        let seq = rename_sequent(&axiom.sequent, &renaming).map_err(|r| fail(&[], r))?;
        Ok(Derivation::leaf(
            Rule::AxiomLeaf {
                name: name.to_string(),
                valuation,
                renaming,
            },
            seq,
        ))
    }

    pub fn weaken(child: Derivation, extra: Vec<Var>) -> Result<Derivation, SyntaxError> {
        let mut ctx = child.conclusion.context.clone();
        ctx.extend(extra);
        let seq = Sequent::new(
            ctx,
            child.conclusion.premise.clone(),
            child.conclusion.conclusion.clone(),
        )?;
        Ok(Derivation {
            rule: Rule::CtxWeaken,
            children: vec![child],
            conclusion: seq,
        })
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Derivation::size).sum::<usize>()
    }

    /// Validates every node against the rule it claims, bottom-up.
    pub fn check(&self, theory: &Theory) -> Result<(), CheckError> {
        let mut path = Vec::new();
        self.check_at(theory, &mut path)
    }

    fn check_at(&self, theory: &Theory, path: &mut Vec<usize>) -> Result<(), CheckError> {
        for (i, child) in self.children.iter().enumerate() {
            path.push(i);
            child.check_at(theory, path)?;
            path.pop();
        }
        let c = &self.conclusion;
        c.check_scope().map_err(|e| fail(path, e.to_string()))?;
        theory
            .check_sequent(c)
            .map_err(|e| fail(path, e.to_string()))?;
        let arity = match self.rule {
            Rule::B2 | Rule::B6 => 2,
            Rule::A3 { .. } | Rule::CtxWeaken => 1,
            _ => 0,
        };
        if self.children.len() != arity {
            return Err(fail(
                path,
                format!(
                    "{} expects {arity} subderivations, has {}",
                    self.rule.tag(),
                    self.children.len()
                ),
            ));
        }
        match &self.rule {
            Rule::B1 => {
                if c.premise != c.conclusion {
                    return Err(fail(path, "b1 requires premise = conclusion"));
                }
            }
            Rule::B2 => {
                let l = &self.children[0].conclusion;
                let r = &self.children[1].conclusion;
                if l.context != c.context || r.context != c.context {
                    return Err(fail(path, "b2 context mismatch"));
                }
                if l.premise != c.premise {
                    return Err(fail(path, "b2 left premise mismatch"));
                }
                if l.conclusion != r.premise {
                    return Err(fail(path, "b2 cut formula mismatch"));
                }
                if r.conclusion != c.conclusion {
                    return Err(fail(path, "b2 right conclusion mismatch"));
                }
            }
            Rule::B3 => {
                if !c.conclusion.is_truth() {
                    return Err(fail(path, "b3 conclusion must be the empty conjunction"));
                }
            }
            Rule::B4 { split } => {
                if *split > c.premise.0.len() {
                    return Err(fail(path, "b4 split exceeds premise length"));
                }
                if c.conclusion.0 != c.premise.0[..*split] {
                    return Err(fail(path, "b4 conclusion must be the premise prefix"));
                }
            }
            Rule::B5 { split } => {
                if *split > c.premise.0.len() {
                    return Err(fail(path, "b5 split exceeds premise length"));
                }
                if c.conclusion.0 != c.premise.0[*split..] {
                    return Err(fail(path, "b5 conclusion must be the premise suffix"));
                }
            }
            Rule::B6 => {
                let l = &self.children[0].conclusion;
                let r = &self.children[1].conclusion;
                if l.context != c.context || r.context != c.context {
                    return Err(fail(path, "b6 context mismatch"));
                }
                if l.premise != c.premise || r.premise != c.premise {
                    return Err(fail(path, "b6 premise mismatch"));
                }
                let mut merged = l.conclusion.0.clone();
                merged.extend(r.conclusion.0.iter().cloned());
                if c.conclusion.0 != merged {
                    return Err(fail(path, "b6 conclusion must concatenate the children"));
                }
            }
            Rule::A1 => {
                if c.context.len() != 1 {
                    return Err(fail(path, "a1 context must be a single variable"));
                }
                let x = Term::Var(c.context[0].clone());
                if !c.premise.is_truth() || c.conclusion.0 != [crate::syntax::mk_defined(&x)] {
                    return Err(fail(path, "a1 concludes x = x from no premise"));
                }
            }
            Rule::A2 { x, y } => {
                if x.sort != y.sort {
                    return Err(fail(path, "a2 variables must share a sort"));
                }
                if !c.has_var(x) || !c.has_var(y) {
                    return Err(fail(path, "a2 context must contain x and y"));
                }
                let Some((first, rest)) = c.premise.0.split_first() else {
                    return Err(fail(path, "a2 premise must start with x = y"));
                };
                if *first != Atom::Eq(Term::Var(x.clone()), Term::Var(y.clone())) {
                    return Err(fail(path, "a2 premise must start with x = y"));
                }
                let phi = Formula(rest.to_vec());
                let expected = phi.substitute_unchecked(x, &Term::Var(y.clone()));
                if c.conclusion != expected {
                    return Err(fail(path, "a2 conclusion must be the premise with y for x"));
                }
            }
            Rule::A3 { x, t } => {
                let ch = &self.children[0].conclusion;
                if !ch.premise.free_vars().contains(x) {
                    return Err(fail(path, format!("a3 requires {} \u{2208} FV(premise)", x.name)));
                }
                if t.sort() != &x.sort {
                    return Err(fail(path, "a3 term sort must match the variable"));
                }
                theory
                    .check_term(t)
                    .map_err(|e| fail(path, e.to_string()))?;
                for v in &ch.context {
                    if !c.has_var(v) {
                        return Err(fail(path, "a3 conclusion context must extend the child's"));
                    }
                }
                if c.premise != ch.premise.substitute_unchecked(x, t) {
                    return Err(fail(path, "a3 premise is not the substituted child premise"));
                }
                if c.conclusion != ch.conclusion.substitute_unchecked(x, t) {
                    return Err(fail(path, "a3 conclusion is not the substituted child conclusion"));
                }
            }
            Rule::AxiomLeaf {
                name,
                valuation,
                renaming,
            } => {
                let Some(axiom) = theory.find_axiom(name, valuation) else {
                    return Err(fail(path, format!("unknown axiom {name} at {valuation:?}")));
                };
                let expected =
                    rename_sequent(&axiom.sequent, renaming).map_err(|r| fail(path, r))?;
                if *c != expected {
                    return Err(fail(path, format!("axiom {name} conclusion mismatch")));
                }
            }
            Rule::CtxWeaken => {
                let ch = &self.children[0].conclusion;
                if c.premise != ch.premise || c.conclusion != ch.conclusion {
                    return Err(fail(path, "weaken must preserve premise and conclusion"));
                }
                for v in &ch.context {
                    if !c.has_var(v) {
                        return Err(fail(path, "weaken context must extend the child's"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_sexpr(&self) -> Sexpr {
        let mut items = vec![Sexpr::atom(self.rule.tag())];
        match &self.rule {
            Rule::B1 | Rule::B3 => {
                items.push(vars_sexpr(&self.conclusion.context));
                items.push(self.conclusion.premise.to_sexpr());
            }
            Rule::B4 { split } | Rule::B5 { split } => {
                items.push(Sexpr::atom(split.to_string()));
                items.push(vars_sexpr(&self.conclusion.context));
                items.push(self.conclusion.premise.to_sexpr());
            }
            Rule::A1 => {
                items.push(var_sexpr(&self.conclusion.context[0]));
            }
            Rule::A2 { x, y } => {
                items.push(vars_sexpr(&self.conclusion.context));
                items.push(Sexpr::atom(&x.name));
                items.push(Sexpr::atom(&y.name));
                items.push(Formula(self.conclusion.premise.0[1..].to_vec()).to_sexpr());
            }
            Rule::A3 { x, t } => {
                items.push(var_sexpr(x));
                items.push(t.to_sexpr());
                let child_ctx = &self.children[0].conclusion.context;
                let extra: Vec<Var> = self
                    .conclusion
                    .context
                    .iter()
                    .filter(|v| !child_ctx.contains(v))
                    .cloned()
                    .collect();
                items.push(vars_sexpr(&extra));
            }
            Rule::AxiomLeaf {
                name,
                valuation,
                renaming,
            } => {
                items.push(Sexpr::atom(name));
                let mut vals = Vec::new();
                for (n, v) in valuation {
                    vals.push(Sexpr::List(vec![
                        Sexpr::atom(n),
                        Sexpr::atom(v.to_string()),
                    ]));
                }
                items.push(Sexpr::List(vals));
                let mut rens = Vec::new();
                for (from, to) in renaming {
                    rens.push(Sexpr::List(vec![Sexpr::atom(from), Sexpr::atom(to)]));
                }
                items.push(Sexpr::List(rens));
            }
            Rule::CtxWeaken => {
                let child_ctx = &self.children[0].conclusion.context;
                let extra: Vec<Var> = self
                    .conclusion
                    .context
                    .iter()
                    .filter(|v| !child_ctx.contains(v))
                    .cloned()
                    .collect();
                items.push(vars_sexpr(&extra));
            }
            Rule::B2 | Rule::B6 => {}
        }
        for child in &self.children {
            items.push(child.to_sexpr());
        }
        Sexpr::List(items)
    }

    /// Parses a `(derivation ...)` file against a theory, recomputing every
    /// conclusion bottom-up.
    pub fn parse(theory: &Theory, input: &str) -> Result<Derivation, TheoryError> {
        let e = sexpr::parse_one(input)?;
        let Some([node]) = e.tagged("derivation") else {
            return Err(TheoryError::Malformed {
                context: "derivation file".into(),
                expected: "(derivation node)".into(),
                got: e.to_string(),
            });
        };
        Derivation::from_sexpr(theory, node)
    }

    pub fn from_sexpr(theory: &Theory, e: &Sexpr) -> Result<Derivation, TheoryError> {
        let bad = |expected: &str| TheoryError::Malformed {
            context: "derivation node".into(),
            expected: expected.into(),
            got: e.to_string(),
        };
        let syn = |err: SyntaxError| TheoryError::Syntax(err);
        let Some(items) = e.as_list() else {
            return Err(bad("(rule ...)"));
        };
        let Some(Sexpr::Atom(tag)) = items.first() else {
            return Err(bad("(rule ...)"));
        };
        let rest = &items[1..];
        match tag.as_str() {
            "b1" | "b3" => {
                let [vars, phi] = rest else {
                    return Err(bad("(b1 (vars ...) (and ...))"));
                };
                let vars = parse_vars(theory, vars)?;
                let phi = parse_formula_in(theory, &vars, phi)?;
                if tag == "b1" {
                    Derivation::b1(vars, phi).map_err(syn)
                } else {
                    Derivation::b3(vars, phi).map_err(syn)
                }
            }
            "b4" | "b5" => {
                let [split, vars, phi] = rest else {
                    return Err(bad("(b4 k (vars ...) (and ...))"));
                };
                let split = split
                    .as_atom()
                    .and_then(|a| a.parse::<usize>().ok())
                    .ok_or_else(|| bad("a numeral split"))?;
                let vars = parse_vars(theory, vars)?;
                let phi = parse_formula_in(theory, &vars, phi)?;
                if split > phi.0.len() {
                    return Err(bad("split within the premise"));
                }
                if tag == "b4" {
                    Derivation::b4(vars, phi, split).map_err(syn)
                } else {
                    Derivation::b5(vars, phi, split).map_err(syn)
                }
            }
            "b2" | "b6" => {
                let [c1, c2] = rest else {
                    return Err(bad("two subderivations"));
                };
                let d1 = Derivation::from_sexpr(theory, c1)?;
                let d2 = Derivation::from_sexpr(theory, c2)?;
                if tag == "b2" {
                    Derivation::b2(d1, d2).map_err(syn)
                } else {
                    Derivation::b6(d1, d2).map_err(syn)
                }
            }
            "a1" => {
                let [v] = rest else {
                    return Err(bad("(a1 (x (sort n)))"));
                };
                let mut vars = parse_vars(theory, &Sexpr::List(vec![Sexpr::atom("vars"), v.clone()]))?;
                let Some(x) = vars.pop() else {
                    return Err(bad("(a1 (x (sort n)))"));
                };
                Derivation::a1(x).map_err(syn)
            }
            "a2" => {
                let [vars, x, y, phi] = rest else {
                    return Err(bad("(a2 (vars ...) x y (and ...))"));
                };
                let vars = parse_vars(theory, vars)?;
                let lookup = |a: &Sexpr| -> Option<Var> {
                    let name = a.as_atom()?;
                    vars.iter().find(|v| v.name == name).cloned()
                };
                let x = lookup(x).ok_or_else(|| bad("x declared in vars"))?;
                let y = lookup(y).ok_or_else(|| bad("y declared in vars"))?;
                let phi = parse_formula_in(theory, &vars, phi)?;
                Derivation::a2(vars, x, y, phi).map_err(syn)
            }
            "a3" => {
                let [xv, t, extra, child] = rest else {
                    return Err(bad("(a3 (x (sort n)) term (vars ...) child)"));
                };
                let mut xs =
                    parse_vars(theory, &Sexpr::List(vec![Sexpr::atom("vars"), xv.clone()]))?;
                let Some(x) = xs.pop() else {
                    return Err(bad("a declared variable"));
                };
                let extra = parse_vars(theory, extra)?;
                let child = Derivation::from_sexpr(theory, child)?;
                let mut env: BTreeMap<String, Sort> = child
                    .conclusion
                    .context
                    .iter()
                    .map(|v| (v.name.clone(), v.sort.clone()))
                    .collect();
                for v in &extra {
                    env.insert(v.name.clone(), v.sort.clone());
                }
                let parser = TermParser {
                    theory,
                    vars: &env,
                    levels: &BTreeMap::new(),
                };
                let t = parser.parse_term(t)?;
                Derivation::a3(child, x, t, extra).map_err(syn)
            }
            "axiom" => {
                let [name, vals, rens] = rest else {
                    return Err(bad("(axiom name ((n 1)...) ((x y)...))"));
                };
                let name = name.as_atom().ok_or_else(|| bad("an axiom name"))?;
                let mut valuation = Vec::new();
                for v in vals.as_list().ok_or_else(|| bad("a valuation list"))? {
                    let Some([Sexpr::Atom(n), Sexpr::Atom(val)]) = v.as_list().map(|l| l) else {
                        return Err(bad("(param value) pairs"));
                    };
                    let val = val.parse::<u32>().map_err(|_| bad("numeral values"))?;
                    valuation.push((n.clone(), val));
                }
                let mut renaming = BTreeMap::new();
                for r in rens.as_list().ok_or_else(|| bad("a renaming list"))? {
                    let Some([Sexpr::Atom(from), Sexpr::Atom(to)]) = r.as_list().map(|l| l) else {
                        return Err(bad("(from to) pairs"));
                    };
                    renaming.insert(from.clone(), to.clone());
                }
                Derivation::axiom(theory, name, valuation, renaming).map_err(|e| {
                    TheoryError::Malformed {
                        context: "axiom leaf".into(),
                        expected: "a known axiom instance".into(),
                        got: e.to_string(),
                    }
                })
            }
            "weaken" => {
                let [extra, child] = rest else {
                    return Err(bad("(weaken (vars ...) child)"));
                };
                let extra = parse_vars(theory, extra)?;
                let child = Derivation::from_sexpr(theory, child)?;
                Derivation::weaken(child, extra).map_err(syn)
            }
            _ => Err(bad("a rule tag")),
        }
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(derivation {})", self.to_sexpr())
    }
}

fn rename_sequent(
    seq: &Sequent,
    renaming: &BTreeMap<String, String>,
) -> Result<Sequent, String> {
    let mut map = BTreeMap::new();
    let mut new_ctx = Vec::new();
    for v in &seq.context {
        let to = renaming.get(&v.name).cloned().unwrap_or_else(|| v.name.clone());
        let nv = Var::new(to, v.sort.clone());
        map.insert(v.clone(), nv.clone());
        new_ctx.push(nv);
    }
    let mut seen = new_ctx.clone();
    seen.sort();
    seen.dedup();
    if seen.len() != seq.context.len() {
        return Err("axiom renaming must be injective on the context".into());
    }
    let premise = rename_formula(&seq.premise, &map);
    let conclusion = rename_formula(&seq.conclusion, &map);
    Sequent::new(new_ctx, premise, conclusion).map_err(|e| e.to_string())
}

fn var_sexpr(v: &Var) -> Sexpr {
    Sexpr::List(vec![
        Sexpr::atom(&v.name),
        Sexpr::List(vec![
            Sexpr::atom(&v.sort.basic),
            Sexpr::atom(v.sort.level.to_string()),
        ]),
    ])
}

fn vars_sexpr(vars: &[Var]) -> Sexpr {
    let mut items = vec![Sexpr::atom("vars")];
    items.extend(vars.iter().map(var_sexpr));
    Sexpr::List(items)
}

fn parse_vars(theory: &Theory, e: &Sexpr) -> Result<Vec<Var>, TheoryError> {
    let Some(items) = e.tagged("vars") else {
        return Err(TheoryError::Malformed {
            context: "variable list".into(),
            expected: "(vars (x (sort n)) ...)".into(),
            got: e.to_string(),
        });
    };
    let mut out = Vec::new();
    for v in items {
        let Some([Sexpr::Atom(name), sort]) = v.as_list().map(|l| l) else {
            return Err(TheoryError::Malformed {
                context: "variable".into(),
                expected: "(name (sort n))".into(),
                got: v.to_string(),
            });
        };
        let Some([Sexpr::Atom(basic), Sexpr::Atom(level)]) = sort.as_list().map(|l| l) else {
            return Err(TheoryError::Malformed {
                context: "variable sort".into(),
                expected: "(basic level)".into(),
                got: sort.to_string(),
            });
        };
        let level = level.parse::<u32>().map_err(|_| TheoryError::Malformed {
            context: "variable sort".into(),
            expected: "a numeral level".into(),
            got: sort.to_string(),
        })?;
        if !theory.has_basic_sort(basic) && basic != crate::syntax::TY {
            return Err(TheoryError::UnknownBasicSort(basic.clone()));
        }
        out.push(Var::new(name.clone(), Sort::new(basic.clone(), level)));
    }
    Ok(out)
}

fn parse_formula_in(
    theory: &Theory,
    vars: &[Var],
    e: &Sexpr,
) -> Result<Formula, TheoryError> {
    let env: BTreeMap<String, Sort> = vars
        .iter()
        .map(|v| (v.name.clone(), v.sort.clone()))
        .collect();
    let parser = TermParser {
        theory,
        vars: &env,
        levels: &BTreeMap::new(),
    };
    parser.parse_formula(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::mk_defined;

    fn frag() -> Theory {
        Theory::parse(
            "frag",
            "\
(sort ctx)
(sort tm)
(fun * (args) (result (ctx 0)))
(fun ft (params (n)) (args (ty n)) (result (ctx n)))
(fun ty (params (n)) (args (tm n)) (result (ty n)))
(axiom ctx0-star (vars (G (ctx 0))) (seq (and (def G)) (and (= G (*)))))
",
            2,
        )
        .unwrap()
    }

    #[test]
    fn b1_accepts() {
        let t = frag();
        let g = Var::new("G", Sort::ctx(0));
        let phi = Formula::atom(mk_defined(&Term::Var(g.clone())));
        let d = Derivation::b1(vec![g], phi).unwrap();
        d.check(&t).unwrap();
    }

    #[test]
    fn axiom_leaf_and_cut() {
        let t = frag();
        // ctx0-star renamed to H, cut with b1
        let d = Derivation::axiom(
            &t,
            "ctx0-star",
            vec![],
            BTreeMap::from([("G".to_string(), "H".to_string())]),
        )
        .unwrap();
        d.check(&t).unwrap();
        let h = Var::new("H", Sort::ctx(0));
        let phi = Formula::atom(mk_defined(&Term::Var(h.clone())));
        let pre = Derivation::b1(vec![h], phi).unwrap();
        let cut = Derivation::b2(pre, d).unwrap();
        cut.check(&t).unwrap();
        assert_eq!(cut.conclusion.conclusion.0.len(), 1);
    }

    #[test]
    fn a3_side_condition_rejected() {
        let t = frag();
        // child: G↓ ⊢ ⊤ ; substitute for a variable not free in the premise
        let g = Var::new("G", Sort::ctx(0));
        let h = Var::new("H", Sort::ctx(0));
        let phi = Formula::atom(mk_defined(&Term::Var(g.clone())));
        let child = Derivation::b3(vec![g, h.clone()], phi).unwrap();
        let star = t.app(crate::syntax::SymId::new("*", vec![]), vec![]).unwrap();
        let d = Derivation::a3(child, h, star, vec![]).unwrap();
        let err = d.check(&t).unwrap_err();
        assert!(err.reason.contains("FV"));
    }

    #[test]
    fn a2_replacement() {
        let t = frag();
        let a = Var::new("a", Sort::tm(0));
        let b = Var::new("b", Sort::tm(0));
        let ty_a = t
            .app(
                crate::syntax::SymId::new("ty", vec![0]),
                vec![Term::Var(a.clone())],
            )
            .unwrap();
        let phi = Formula::atom(mk_defined(&ty_a));
        let d = Derivation::a2(vec![], a.clone(), b.clone(), phi).unwrap();
        d.check(&t).unwrap();
        // conclusion talks about ty(b)
        let ty_b = t
            .app(
                crate::syntax::SymId::new("ty", vec![0]),
                vec![Term::Var(b.clone())],
            )
            .unwrap();
        assert_eq!(d.conclusion.conclusion, Formula::atom(mk_defined(&ty_b)));
    }

    #[test]
    fn file_round_trip() {
        let t = frag();
        let d = Derivation::axiom(
            &t,
            "ctx0-star",
            vec![],
            BTreeMap::from([("G".to_string(), "H".to_string())]),
        )
        .unwrap();
        let h = Var::new("H", Sort::ctx(0));
        let phi = Formula::atom(mk_defined(&Term::Var(h.clone())));
        let pre = Derivation::b1(vec![h], phi).unwrap();
        let cut = Derivation::b2(pre, d).unwrap();
        let text = cut.to_string();
        let parsed = Derivation::parse(&t, &text).unwrap();
        assert_eq!(parsed, cut);
        parsed.check(&t).unwrap();
    }

    #[test]
    fn broken_derivation_reports_path() {
        let t = frag();
        let g = Var::new("G", Sort::ctx(0));
        let phi = Formula::atom(mk_defined(&Term::Var(g.clone())));
        let good = Derivation::b1(vec![g.clone()], phi.clone()).unwrap();
        let mut bad = Derivation::b2(good.clone(), good).unwrap();
        // corrupt the right child's premise
        bad.children[1].conclusion.premise = Formula::truth();
        let err = bad.check(&t).unwrap_err();
        assert_eq!(err.path, vec![1]);
    }
}
