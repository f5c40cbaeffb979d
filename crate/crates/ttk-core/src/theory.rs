//! Theories: signatures of concrete symbol instances plus concrete axiom
//! instances, both obtained by instantiating level-indexed families at all
//! levels up to a cutoff.
//!
//! The textual theory format is line-oriented s-expressions:
//!
//! ```text
//! (sort ctx)
//! (fun ft (params (n)) (args (ty n)) (result (ctx n)))
//! (fun v (params (n) (i (< i n))) (args (ctx n)) (result (tm n)))
//! (axiom ft-star (vars (A (ty 0))) (seq (and) (and (= (ft@0 A) (*)))))
//! ```
//!
//! Inside axiom bodies a symbol instance is a single token `name@e1,e2`
//! where each level component is a numeral, a level parameter, or a
//! parameter plus or minus a numeral (`n+1`, `n-1`). A family with no level
//! parameters is written bare (`*`). `(def t)` desugars to `(= t t)` and
//! `(ty e)` is stored as `(ctx e+1)`.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::sexpr::{self, Sexpr};
use crate::syntax::{
    ArgGroup, Atom, CmpOp, Constraint, Formula, LevelExpr, LevelParam, Sequent, Sort, SortExpr,
    SymId, SymbolKind, SymbolSchema, SyntaxError, Term, Var,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnSig {
    pub args: Vec<Sort>,
    pub result: Sort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredSig {
    pub args: Vec<Sort>,
}

/// One concrete axiom: an instance of a named family at a level valuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axiom {
    pub name: String,
    pub valuation: Vec<(String, u32)>,
    pub sequent: Sequent,
}

/// A schematic axiom kept for round-tripping theory files: the body is
/// stored unparsed and re-parsed per level valuation at load time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomSchema {
    pub name: String,
    pub params: Vec<LevelParam>,
    pub vars: Vec<(String, SortExpr)>,
    pub premise: String,
    pub conclusion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theory {
    pub name: String,
    pub basic_sorts: Vec<String>,
    pub cutoff: u32,
    pub schemas: Vec<SymbolSchema>,
    pub axiom_schemas: Vec<AxiomSchema>,
    pub functions: IndexMap<SymId, FnSig>,
    pub predicates: IndexMap<SymId, PredSig>,
    pub axioms: Vec<Axiom>,
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TheoryError {
    #[error(transparent)]
    Parse(#[from] sexpr::ParseError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("in {context}: expected {expected}, got {got}")]
    Malformed {
        context: String,
        expected: String,
        got: String,
    },
    #[error("unknown basic sort {0}")]
    UnknownBasicSort(String),
    #[error("duplicate {kind} {name}")]
    Duplicate { kind: String, name: String },
    #[error("axiom {name} has no valid instance at cutoff, last failure: {reason}")]
    AxiomUninstantiable { name: String, reason: String },
    #[error("unknown axiom instance {name} at {valuation:?}")]
    UnknownAxiom {
        name: String,
        valuation: Vec<(String, u32)>,
    },
}

fn malformed(context: &str, expected: &str, got: &Sexpr) -> TheoryError {
    TheoryError::Malformed {
        context: context.to_string(),
        expected: expected.to_string(),
        got: got.to_string(),
    }
}

impl Theory {
    pub fn new(name: impl Into<String>, basic_sorts: Vec<String>, cutoff: u32) -> Theory {
        Theory {
            name: name.into(),
            basic_sorts,
            cutoff,
            schemas: Vec::new(),
            axiom_schemas: Vec::new(),
            functions: IndexMap::new(),
            predicates: IndexMap::new(),
            axioms: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn has_basic_sort(&self, basic: &str) -> bool {
        self.basic_sorts.iter().any(|s| s == basic)
    }

    pub fn fn_sig(&self, sym: &SymId) -> Result<&FnSig, SyntaxError> {
        self.functions
            .get(sym)
            .ok_or_else(|| SyntaxError::UnknownSymbol { sym: sym.clone() })
    }

    pub fn pred_sig(&self, sym: &SymId) -> Result<&PredSig, SyntaxError> {
        self.predicates
            .get(sym)
            .ok_or_else(|| SyntaxError::UnknownSymbol { sym: sym.clone() })
    }

    /// Builds a well-sorted application, checking arity and argument sorts.
    pub fn app(&self, sym: SymId, args: Vec<Term>) -> Result<Term, SyntaxError> {
        let sig = self.fn_sig(&sym)?;
        if sig.args.len() != args.len() {
            return Err(SyntaxError::ArityMismatch {
                sym,
                expected: sig.args.len(),
                got: args.len(),
            });
        }
        for (i, (expected, arg)) in sig.args.iter().zip(&args).enumerate() {
            if arg.sort() != expected {
                return Err(SyntaxError::SortMismatch {
                    expected: expected.clone(),
                    got: arg.sort().clone(),
                    context: format!("argument {i} of {sym}"),
                });
            }
        }
        let sort = sig.result.clone();
        Ok(Term::App { sym, args, sort })
    }

    /// Builds a well-sorted predicate atom.
    pub fn pred_atom(&self, sym: SymId, args: Vec<Term>) -> Result<Atom, SyntaxError> {
        let sig = self.pred_sig(&sym)?;
        if sig.args.len() != args.len() {
            return Err(SyntaxError::ArityMismatch {
                sym,
                expected: sig.args.len(),
                got: args.len(),
            });
        }
        for (i, (expected, arg)) in sig.args.iter().zip(&args).enumerate() {
            if arg.sort() != expected {
                return Err(SyntaxError::SortMismatch {
                    expected: expected.clone(),
                    got: arg.sort().clone(),
                    context: format!("argument {i} of {sym}"),
                });
            }
        }
        Ok(Atom::Pred { sym, args })
    }

    /// Checks that every application and predicate atom in a sequent
    /// matches the signature.
    pub fn check_sequent(&self, seq: &Sequent) -> Result<(), SyntaxError> {
        seq.check_scope()?;
        for atom in seq.premise.0.iter().chain(seq.conclusion.0.iter()) {
            match atom {
                Atom::Eq(l, r) => {
                    self.check_term(l)?;
                    self.check_term(r)?;
                    if l.sort() != r.sort() {
                        return Err(SyntaxError::SortMismatch {
                            expected: l.sort().clone(),
                            got: r.sort().clone(),
                            context: "equality atom".into(),
                        });
                    }
                }
                Atom::Pred { sym, args } => {
                    for a in args {
                        self.check_term(a)?;
                    }
                    self.pred_atom(sym.clone(), args.clone())?;
                }
            }
        }
        Ok(())
    }

    pub fn check_term(&self, t: &Term) -> Result<(), SyntaxError> {
        match t {
            Term::Var(v) => {
                if !self.has_basic_sort(&v.sort.basic) {
                    return Err(SyntaxError::Other(format!(
                        "variable {} has unknown basic sort {}",
                        v.name, v.sort.basic
                    )));
                }
                Ok(())
            }
            Term::App { sym, args, sort } => {
                for a in args {
                    self.check_term(a)?;
                }
                let rebuilt = self.app(sym.clone(), args.clone())?;
                if rebuilt.sort() != sort {
                    return Err(SyntaxError::SortMismatch {
                        expected: rebuilt.sort().clone(),
                        got: sort.clone(),
                        context: format!("cached sort of {sym}"),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn add_function(&mut self, sym: SymId, args: Vec<Sort>, result: Sort) {
        self.functions.insert(sym, FnSig { args, result });
    }

    pub fn add_predicate(&mut self, sym: SymId, args: Vec<Sort>) {
        self.predicates.insert(sym, PredSig { args });
    }

    pub fn add_axiom(&mut self, name: impl Into<String>, valuation: Vec<(String, u32)>, sequent: Sequent) {
        self.axioms.push(Axiom {
            name: name.into(),
            valuation,
            sequent,
        });
    }

    pub fn find_axiom(&self, name: &str, valuation: &[(String, u32)]) -> Option<&Axiom> {
        self.axioms
            .iter()
            .find(|a| a.name == name && a.valuation == valuation)
    }

    /// Registers a schema and instantiates it at every constraint-satisfying
    /// valuation with all parameters in `0..=cutoff`, in lexicographic order.
    pub fn add_schema(&mut self, schema: SymbolSchema) -> Result<(), TheoryError> {
        schema.validate()?;
        for valuation in enumerate_valuations(&schema.params, self.cutoff) {
            let mut ok = true;
            for p in &schema.params {
                for c in &p.constraints {
                    if !c.holds(&valuation)? {
                        ok = false;
                    }
                }
            }
            if !ok {
                continue;
            }
            let concrete = schema.instantiate(&valuation)?;
            match schema.kind {
                SymbolKind::Function => {
                    let result = concrete.result.clone().ok_or_else(|| TheoryError::Malformed {
                        context: schema.name.clone(),
                        expected: "a result sort".into(),
                        got: "none".into(),
                    })?;
                    if self.functions.contains_key(&concrete.id) {
                        return Err(TheoryError::Duplicate {
                            kind: "function".into(),
                            name: concrete.id.token(),
                        });
                    }
                    self.add_function(concrete.id, concrete.args, result);
                }
                SymbolKind::Predicate => {
                    if self.predicates.contains_key(&concrete.id) {
                        return Err(TheoryError::Duplicate {
                            kind: "predicate".into(),
                            name: concrete.id.token(),
                        });
                    }
                    self.add_predicate(concrete.id, concrete.args);
                }
            }
        }
        self.schemas.push(schema);
        Ok(())
    }

    /// Registers a schematic axiom and instantiates it at every valuation in
    /// `0..=cutoff` passing its constraints. Valuations whose body mentions a
    /// symbol instance outside the signature fragment are skipped; if every
    /// constraint-satisfying valuation is skipped the axiom is rejected.
    pub fn add_axiom_schema(&mut self, schema: AxiomSchema) -> Result<(), TheoryError> {
        let premise = sexpr::parse_one(&schema.premise)?;
        let conclusion = sexpr::parse_one(&schema.conclusion)?;
        let mut attempted = 0usize;
        let mut produced = 0usize;
        let mut last_failure = String::new();
        for valuation in enumerate_valuations(&schema.params, self.cutoff) {
            let mut ok = true;
            for p in &schema.params {
                for c in &p.constraints {
                    if !c.holds(&valuation)? {
                        ok = false;
                    }
                }
            }
            if !ok {
                continue;
            }
            attempted += 1;
            match self.instantiate_axiom_body(&schema, &premise, &conclusion, &valuation) {
                Ok(sequent) => {
                    let valuation = schema
                        .params
                        .iter()
                        .map(|p| (p.name.clone(), valuation[&p.name]))
                        .collect();
                    self.axioms.push(Axiom {
                        name: schema.name.clone(),
                        valuation,
                        sequent,
                    });
                    produced += 1;
                }
                Err(TheoryError::Syntax(SyntaxError::UnknownSymbol { sym })) => {
                    last_failure = format!("unknown symbol {sym}");
                }
                Err(TheoryError::Syntax(SyntaxError::NegativeLevel { expr, value })) => {
                    last_failure = format!("level {expr} = {value}");
                }
                Err(other) => return Err(other),
            }
        }
        if attempted > 0 && produced == 0 {
            return Err(TheoryError::AxiomUninstantiable {
                name: schema.name.clone(),
                reason: last_failure,
            });
        }
        self.axiom_schemas.push(schema);
        Ok(())
    }

    fn instantiate_axiom_body(
        &self,
        schema: &AxiomSchema,
        premise: &Sexpr,
        conclusion: &Sexpr,
        valuation: &BTreeMap<String, u32>,
    ) -> Result<Sequent, TheoryError> {
        let mut vars = BTreeMap::new();
        for (name, sort) in &schema.vars {
            vars.insert(name.clone(), sort.eval(valuation)?);
        }
        let parser = TermParser {
            theory: self,
            vars: &vars,
            levels: valuation,
        };
        let premise = parser.parse_formula(premise)?;
        let conclusion = parser.parse_formula(conclusion)?;
        let context = vars
            .iter()
            .map(|(n, s)| Var::new(n.clone(), s.clone()))
            .collect();
        Ok(Sequent::new(context, premise, conclusion)?)
    }

    /// Loads a theory from its textual format, instantiated at `cutoff`.
    pub fn parse(name: impl Into<String>, input: &str, cutoff: u32) -> Result<Theory, TheoryError> {
        let items = sexpr::parse_many(input)?;
        Theory::from_sexprs(name, &items, cutoff)
    }

    pub fn from_sexprs(
        name: impl Into<String>,
        items: &[Sexpr],
        cutoff: u32,
    ) -> Result<Theory, TheoryError> {
        let mut theory = Theory::new(name, Vec::new(), cutoff);
        for item in items {
            match item.head() {
                Some("sort") => {
                    let rest = item.tagged("sort").unwrap();
                    let [Sexpr::Atom(s)] = rest else {
                        return Err(malformed("sort declaration", "(sort name)", item));
                    };
                    if theory.has_basic_sort(s) {
                        return Err(TheoryError::Duplicate {
                            kind: "sort".into(),
                            name: s.clone(),
                        });
                    }
                    theory.basic_sorts.push(s.clone());
                }
                Some("fun") => {
                    let schema = parse_symbol_schema(item, SymbolKind::Function)?;
                    theory.add_schema(schema)?;
                }
                Some("pred") => {
                    let schema = parse_symbol_schema(item, SymbolKind::Predicate)?;
                    theory.add_schema(schema)?;
                }
                Some("axiom") => {
                    let schema = parse_axiom_schema(item)?;
                    theory.add_axiom_schema(schema)?;
                }
                _ => {
                    return Err(malformed(
                        "theory file",
                        "(sort ...), (fun ...), (pred ...) or (axiom ...)",
                        item,
                    ))
                }
            }
        }
        Ok(theory)
    }

    /// Writes the theory back in its textual format. Schematic declarations
    /// are preserved; axioms added natively (no schema) are emitted as
    /// concrete instances with an explicit `(levels ...)` valuation.
    pub fn to_sexprs(&self) -> Vec<Sexpr> {
        let mut out = Vec::new();
        for s in &self.basic_sorts {
            out.push(Sexpr::List(vec![Sexpr::atom("sort"), Sexpr::atom(s)]));
        }
        for schema in &self.schemas {
            out.push(symbol_schema_to_sexpr(schema));
        }
        let schematic: Vec<&str> = self.axiom_schemas.iter().map(|a| a.name.as_str()).collect();
        for schema in &self.axiom_schemas {
            out.push(axiom_schema_to_sexpr(schema));
        }
        for axiom in &self.axioms {
            if schematic.contains(&axiom.name.as_str()) {
                continue;
            }
            out.push(axiom_to_sexpr(axiom));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in self.to_sexprs() {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    /// Content digest over the concrete signature and axioms, independent of
    /// provenance notes.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.name.as_bytes());
        h.update([0]);
        for s in &self.basic_sorts {
            h.update(s.as_bytes());
            h.update([0]);
        }
        h.update(self.cutoff.to_le_bytes());
        for (sym, sig) in &self.functions {
            h.update(sym.token().as_bytes());
            h.update(serde_json::to_vec(sig).unwrap());
        }
        for (sym, sig) in &self.predicates {
            h.update(sym.token().as_bytes());
            h.update(serde_json::to_vec(sig).unwrap());
        }
        for a in &self.axioms {
            h.update(serde_json::to_vec(a).unwrap());
        }
        format!("{:x}", h.finalize())
    }
}

/// Digest of a single sequent, used to key certificate caches.
pub fn sequent_digest(seq: &Sequent) -> String {
    let mut h = Sha256::new();
    h.update(seq.to_sexpr().to_string().as_bytes());
    format!("{:x}", h.finalize())
}

/// All assignments of the given parameters to `0..=cutoff`, lexicographic
/// in declaration order. Constraints are not checked here.
pub fn enumerate_valuations(params: &[LevelParam], cutoff: u32) -> Vec<BTreeMap<String, u32>> {
    let mut out = vec![BTreeMap::new()];
    for p in params {
        let mut next = Vec::new();
        for partial in &out {
            for v in 0..=cutoff {
                let mut m = partial.clone();
                m.insert(p.name.clone(), v);
                next.push(m);
            }
        }
        out = next;
    }
    out
}

/// Parses terms, atoms and formulas against a theory signature, a variable
/// environment, and a level-parameter valuation.
pub struct TermParser<'a> {
    pub theory: &'a Theory,
    pub vars: &'a BTreeMap<String, Sort>,
    pub levels: &'a BTreeMap<String, u32>,
}

impl<'a> TermParser<'a> {
    pub fn parse_term(&self, e: &Sexpr) -> Result<Term, TheoryError> {
        match e {
            Sexpr::Atom(name) => {
                let sort = self.vars.get(name).ok_or_else(|| {
                    TheoryError::Syntax(SyntaxError::Other(format!(
                        "undeclared variable {name}"
                    )))
                })?;
                Ok(Term::var(name.clone(), sort.clone()))
            }
            Sexpr::List(items) => {
                let Some(Sexpr::Atom(head)) = items.first() else {
                    return Err(malformed("term", "(symbol args...)", e));
                };
                let sym = self.parse_sym_token(head)?;
                let args = items[1..]
                    .iter()
                    .map(|a| self.parse_term(a))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(self.theory.app(sym, args)?)
            }
        }
    }

    /// Token `name@e1,e2` with each component a numeral, a level parameter,
    /// or parameter±numeral.
    pub fn parse_sym_token(&self, token: &str) -> Result<SymId, TheoryError> {
        match token.rsplit_once('@') {
            None => Ok(SymId::new(token, Vec::new())),
            Some((name, comps)) => {
                let levels = comps
                    .split(',')
                    .map(|c| self.parse_level_component(token, c))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(SymId::new(name, levels))
            }
        }
    }

    fn parse_level_component(&self, token: &str, comp: &str) -> Result<u32, TheoryError> {
        let expr = parse_level_component_expr(comp).ok_or_else(|| TheoryError::Malformed {
            context: format!("symbol token {token}"),
            expected: "numeral, parameter, or parameter±numeral".into(),
            got: comp.to_string(),
        })?;
        Ok(expr.eval(self.levels)?)
    }

    pub fn parse_atom(&self, e: &Sexpr) -> Result<Atom, TheoryError> {
        let Some(items) = e.as_list() else {
            return Err(malformed("atom", "(= t t), (def t) or (P t...)", e));
        };
        match items.first().and_then(Sexpr::as_atom) {
            Some("=") if items.len() == 3 => {
                let l = self.parse_term(&items[1])?;
                let r = self.parse_term(&items[2])?;
                Ok(Atom::eq(l, r)?)
            }
            Some("def") if items.len() == 2 => {
                let t = self.parse_term(&items[1])?;
                Ok(crate::syntax::mk_defined(&t))
            }
            Some(head) if head != "=" && head != "def" => {
                let sym = self.parse_sym_token(head)?;
                let args = items[1..]
                    .iter()
                    .map(|a| self.parse_term(a))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(self.theory.pred_atom(sym, args)?)
            }
            _ => Err(malformed("atom", "(= t t), (def t) or (P t...)", e)),
        }
    }

    pub fn parse_formula(&self, e: &Sexpr) -> Result<Formula, TheoryError> {
        let Some(items) = e.tagged("and") else {
            return Err(malformed("formula", "(and atom...)", e));
        };
        let atoms = items
            .iter()
            .map(|a| self.parse_atom(a))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Formula(atoms))
    }
}

fn parse_level_component_expr(comp: &str) -> Option<LevelExpr> {
    if let Ok(n) = comp.parse::<u32>() {
        return Some(LevelExpr::lit(n));
    }
    for (sep, sign) in [('+', 1i64), ('-', -1i64)] {
        if let Some((var, off)) = comp.rsplit_once(sep) {
            if !var.is_empty() {
                if let Ok(off) = off.parse::<i64>() {
                    return Some(LevelExpr::plus(var, sign * off));
                }
            }
        }
    }
    if comp.is_empty() {
        None
    } else {
        Some(LevelExpr::var(comp))
    }
}

fn parse_sort_expr(e: &Sexpr, context: &str) -> Result<SortExpr, TheoryError> {
    let Some([Sexpr::Atom(basic), level]) = e.as_list().map(|l| l) else {
        return Err(malformed(context, "(basic level)", e));
    };
    let level = parse_level_expr(level, context)?;
    Ok(SortExpr::new(basic.clone(), level))
}

fn parse_level_expr(e: &Sexpr, context: &str) -> Result<LevelExpr, TheoryError> {
    match e {
        Sexpr::Atom(a) => parse_level_component_expr(a).ok_or_else(|| TheoryError::Malformed {
            context: context.to_string(),
            expected: "level expression".into(),
            got: a.clone(),
        }),
        Sexpr::List(items) => match items.as_slice() {
            [Sexpr::Atom(op), Sexpr::Atom(var), Sexpr::Atom(n)] if op == "+" || op == "-" => {
                let off = n.parse::<i64>().map_err(|_| TheoryError::Malformed {
                    context: context.to_string(),
                    expected: "numeral offset".into(),
                    got: n.clone(),
                })?;
                let sign = if op == "+" { 1 } else { -1 };
                Ok(LevelExpr::plus(var.clone(), sign * off))
            }
            _ => Err(malformed(context, "(+ var n) or (- var n)", e)),
        },
    }
}

fn parse_params(e: &Sexpr) -> Result<Vec<LevelParam>, TheoryError> {
    let Some(items) = e.tagged("params") else {
        return Err(malformed("params", "(params (n) (i (< i n)) ...)", e));
    };
    let mut out = Vec::new();
    for p in items {
        let Some(parts) = p.as_list() else {
            return Err(malformed("param", "(name constraints...)", p));
        };
        let Some(Sexpr::Atom(name)) = parts.first() else {
            return Err(malformed("param", "(name constraints...)", p));
        };
        let mut constraints = Vec::new();
        for c in &parts[1..] {
            let Some(cs) = c.as_list() else {
                return Err(malformed("constraint", "(op lhs rhs)", c));
            };
            let [Sexpr::Atom(op), lhs, rhs] = cs else {
                return Err(malformed("constraint", "(op lhs rhs)", c));
            };
            let op = match op.as_str() {
                "<" => CmpOp::Lt,
                "<=" => CmpOp::Le,
                "=" => CmpOp::Eq,
                _ => return Err(malformed("constraint", "<, <= or =", c)),
            };
            constraints.push(Constraint {
                lhs: parse_level_expr(lhs, "constraint")?,
                op,
                rhs: parse_level_expr(rhs, "constraint")?,
            });
        }
        out.push(LevelParam {
            name: name.clone(),
            constraints,
        });
    }
    Ok(out)
}

fn parse_symbol_schema(e: &Sexpr, kind: SymbolKind) -> Result<SymbolSchema, TheoryError> {
    let tag = match kind {
        SymbolKind::Function => "fun",
        SymbolKind::Predicate => "pred",
    };
    let items = e.tagged(tag).unwrap();
    let Some(Sexpr::Atom(name)) = items.first() else {
        return Err(malformed(tag, "a symbol name", e));
    };
    let mut params = Vec::new();
    let mut args = Vec::new();
    let mut result = None;
    for item in &items[1..] {
        match item.head() {
            Some("params") => params = parse_params(item)?,
            Some("args") => {
                for a in item.tagged("args").unwrap() {
                    if let Some(rep) = a.tagged("rep") {
                        let [Sexpr::Atom(count), sort] = rep else {
                            return Err(malformed("rep group", "(rep count (basic level))", a));
                        };
                        args.push(ArgGroup::Rep {
                            count: count.clone(),
                            sort: parse_sort_expr(sort, "rep group")?,
                        });
                    } else {
                        args.push(ArgGroup::One(parse_sort_expr(a, "argument")?));
                    }
                }
            }
            Some("result") => {
                let [sort] = item.tagged("result").unwrap() else {
                    return Err(malformed("result", "(result (basic level))", item));
                };
                result = Some(parse_sort_expr(sort, "result")?);
            }
            _ => return Err(malformed(tag, "(params ...), (args ...) or (result ...)", item)),
        }
    }
    if kind == SymbolKind::Function && result.is_none() {
        return Err(malformed(tag, "a (result ...) clause", e));
    }
    Ok(SymbolSchema {
        name: name.clone(),
        kind,
        params,
        args,
        result,
    })
}

fn parse_axiom_schema(e: &Sexpr) -> Result<AxiomSchema, TheoryError> {
    let items = e.tagged("axiom").unwrap();
    let Some(Sexpr::Atom(name)) = items.first() else {
        return Err(malformed("axiom", "an axiom name", e));
    };
    let mut params = Vec::new();
    let mut vars = Vec::new();
    let mut body = None;
    for item in &items[1..] {
        match item.head() {
            Some("params") => params = parse_params(item)?,
            Some("vars") => {
                for v in item.tagged("vars").unwrap() {
                    let Some([Sexpr::Atom(vname), sort]) = v.as_list().map(|l| l) else {
                        return Err(malformed("vars", "(name (basic level))", v));
                    };
                    vars.push((vname.clone(), parse_sort_expr(sort, "variable sort")?));
                }
            }
            Some("seq") => {
                let [premise, conclusion] = item.tagged("seq").unwrap() else {
                    return Err(malformed("seq", "(seq (and ...) (and ...))", item));
                };
                body = Some((premise.to_string(), conclusion.to_string()));
            }
            _ => return Err(malformed("axiom", "(params ...), (vars ...) or (seq ...)", item)),
        }
    }
    let (premise, conclusion) =
        body.ok_or_else(|| malformed("axiom", "a (seq ...) clause", e))?;
    Ok(AxiomSchema {
        name: name.clone(),
        params,
        vars,
        premise,
        conclusion,
    })
}

fn level_expr_to_sexpr(e: &LevelExpr) -> Sexpr {
    match (&e.var, e.offset) {
        (None, n) => Sexpr::atom(n.to_string()),
        (Some(v), 0) => Sexpr::atom(v),
        (Some(v), n) if n > 0 => Sexpr::List(vec![
            Sexpr::atom("+"),
            Sexpr::atom(v),
            Sexpr::atom(n.to_string()),
        ]),
        (Some(v), n) => Sexpr::List(vec![
            Sexpr::atom("-"),
            Sexpr::atom(v),
            Sexpr::atom((-n).to_string()),
        ]),
    }
}

fn sort_expr_to_sexpr(s: &SortExpr) -> Sexpr {
    Sexpr::List(vec![Sexpr::atom(&s.basic), level_expr_to_sexpr(&s.level)])
}

fn params_to_sexpr(params: &[LevelParam]) -> Sexpr {
    let mut items = vec![Sexpr::atom("params")];
    for p in params {
        let mut parts = vec![Sexpr::atom(&p.name)];
        for c in &p.constraints {
            parts.push(Sexpr::List(vec![
                Sexpr::atom(c.op.to_string()),
                level_expr_to_sexpr(&c.lhs),
                level_expr_to_sexpr(&c.rhs),
            ]));
        }
        items.push(Sexpr::List(parts));
    }
    Sexpr::List(items)
}

fn symbol_schema_to_sexpr(schema: &SymbolSchema) -> Sexpr {
    let tag = match schema.kind {
        SymbolKind::Function => "fun",
        SymbolKind::Predicate => "pred",
    };
    let mut items = vec![Sexpr::atom(tag), Sexpr::atom(&schema.name)];
    if !schema.params.is_empty() {
        items.push(params_to_sexpr(&schema.params));
    }
    let mut args = vec![Sexpr::atom("args")];
    for g in &schema.args {
        match g {
            ArgGroup::One(s) => args.push(sort_expr_to_sexpr(s)),
            ArgGroup::Rep { count, sort } => args.push(Sexpr::List(vec![
                Sexpr::atom("rep"),
                Sexpr::atom(count),
                sort_expr_to_sexpr(sort),
            ])),
        }
    }
    items.push(Sexpr::List(args));
    if let Some(r) = &schema.result {
        items.push(Sexpr::List(vec![
            Sexpr::atom("result"),
            sort_expr_to_sexpr(r),
        ]));
    }
    Sexpr::List(items)
}

fn axiom_schema_to_sexpr(schema: &AxiomSchema) -> Sexpr {
    let mut items = vec![Sexpr::atom("axiom"), Sexpr::atom(&schema.name)];
    if !schema.params.is_empty() {
        items.push(params_to_sexpr(&schema.params));
    }
    let mut vars = vec![Sexpr::atom("vars")];
    for (name, sort) in &schema.vars {
        vars.push(Sexpr::List(vec![
            Sexpr::atom(name),
            sort_expr_to_sexpr(sort),
        ]));
    }
    items.push(Sexpr::List(vars));
    items.push(Sexpr::List(vec![
        Sexpr::atom("seq"),
        sexpr::parse_one(&schema.premise).expect("stored premise parses"),
        sexpr::parse_one(&schema.conclusion).expect("stored conclusion parses"),
    ]));
    Sexpr::List(items)
}

fn axiom_to_sexpr(axiom: &Axiom) -> Sexpr {
    let mut vars = vec![Sexpr::atom("vars")];
    for v in &axiom.sequent.context {
        vars.push(Sexpr::List(vec![
            Sexpr::atom(&v.name),
            Sexpr::List(vec![
                Sexpr::atom(&v.sort.basic),
                Sexpr::atom(v.sort.level.to_string()),
            ]),
        ]));
    }
    let mut levels = vec![Sexpr::atom("levels")];
    for (name, value) in &axiom.valuation {
        levels.push(Sexpr::List(vec![
            Sexpr::atom(name),
            Sexpr::atom(value.to_string()),
        ]));
    }
    let mut items = vec![Sexpr::atom("axiom"), Sexpr::atom(&axiom.name)];
    if axiom.valuation.is_empty() {
        items.push(Sexpr::List(vec![Sexpr::atom("params")]));
    } else {
        items.push(Sexpr::List(levels));
    }
    items.push(Sexpr::List(vars));
    items.push(Sexpr::List(vec![
        Sexpr::atom("seq"),
        axiom.sequent.premise.to_sexpr(),
        axiom.sequent.conclusion.to_sexpr(),
    ]));
    Sexpr::List(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRAGMENT: &str = "\
(sort ctx)
(sort tm)
(fun * (args) (result (ctx 0)))
(fun ft (params (n)) (args (ty n)) (result (ctx n)))
(fun ty (params (n)) (args (tm n)) (result (ty n)))
(fun v (params (n) (i (< i n))) (args (ctx n)) (result (tm n)))
(axiom ctx0-star (vars (G (ctx 0))) (seq (and (def G)) (and (= G (*)))))
(axiom v-def (params (n (< 0 n)) (i (< i n))) (vars (G (ctx n))) (seq (and (def (v@n,i G))) (and (def G))))
";

    #[test]
    fn load_fragment() {
        let t = Theory::parse("frag", FRAGMENT, 2).unwrap();
        assert_eq!(t.basic_sorts, vec!["ctx", "tm"]);
        // * ; ft_0..2 ; ty_0..2 ; v at (1,0),(2,0),(2,1)
        assert_eq!(t.functions.len(), 1 + 3 + 3 + 3);
        assert!(t.functions.contains_key(&SymId::new("v", vec![2, 1])));
        assert!(!t.functions.contains_key(&SymId::new("v", vec![1, 1])));
        // ctx0-star once, v-def at the three v instances
        assert_eq!(t.axioms.len(), 1 + 3);
        let a = t.find_axiom("v-def", &[("n".into(), 2), ("i".into(), 1)]).unwrap();
        assert_eq!(a.sequent.context.len(), 1);
        t.check_sequent(&a.sequent).unwrap();
    }

    #[test]
    fn round_trip_identical_tree() {
        let t = Theory::parse("frag", FRAGMENT, 2).unwrap();
        let text = t.to_text();
        let t2 = Theory::parse("frag", &text, 2).unwrap();
        assert_eq!(t.functions, t2.functions);
        assert_eq!(t.axioms, t2.axioms);
        assert_eq!(t.to_text(), t2.to_text());
    }

    #[test]
    fn app_sort_checking() {
        let t = Theory::parse("frag", FRAGMENT, 2).unwrap();
        let a = Term::var("A", Sort::ty(0));
        let ft = t.app(SymId::new("ft", vec![0]), vec![a.clone()]).unwrap();
        assert_eq!(ft.sort(), &Sort::ctx(0));
        // wrong sort
        let err = t.app(SymId::new("ft", vec![1]), vec![a.clone()]).unwrap_err();
        assert!(matches!(err, SyntaxError::SortMismatch { .. }));
        // wrong arity
        let err = t.app(SymId::new("ft", vec![0]), vec![a.clone(), a]).unwrap_err();
        assert!(matches!(err, SyntaxError::ArityMismatch { .. }));
    }

    #[test]
    fn def_desugars_to_eq() {
        let t = Theory::parse("frag", FRAGMENT, 2).unwrap();
        let a = t.find_axiom("ctx0-star", &[]).unwrap();
        let atom = &a.sequent.premise.0[0];
        assert!(atom.is_defined_form().is_some());
        match atom {
            Atom::Eq(l, r) => assert_eq!(l, r),
            _ => panic!(),
        }
    }

    #[test]
    fn uninstantiable_axiom_rejected() {
        let bad = format!("{FRAGMENT}(axiom broken (vars (G (ctx 0))) (seq (and) (and (def (missing G)))))");
        let err = Theory::parse("frag", &bad, 2).unwrap_err();
        assert!(matches!(err, TheoryError::AxiomUninstantiable { .. }));
    }

    #[test]
    fn digest_stable_and_sensitive() {
        let t = Theory::parse("frag", FRAGMENT, 2).unwrap();
        let d1 = t.digest();
        assert_eq!(d1, Theory::parse("frag", FRAGMENT, 2).unwrap().digest());
        let mut t2 = Theory::parse("frag", FRAGMENT, 2).unwrap();
        t2.axioms.pop();
        assert_ne!(d1, t2.digest());
    }
}
