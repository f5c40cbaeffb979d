//! Sorts, level-indexed symbol schemas, terms, restricted terms, Horn
//! formulas and sequents, plus the meta-level substitution the logic rules
//! are built on.
//!
//! Binding does not exist at this layer: every term is a first-order tree
//! over globally named, sorted variables. The `(ty, n)` sort is an alias and
//! is always stored resolved as `(ctx, n+1)`.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const CTX: &str = "ctx";
pub const TM: &str = "tm";
pub const TY: &str = "ty";

/// A concrete sort: basic sort name plus a level.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Sort {
    pub basic: String,
    pub level: u32,
}

impl Sort {
    pub fn new(basic: impl Into<String>, level: u32) -> Sort {
        let basic = basic.into();
        if basic == TY {
            Sort {
                basic: CTX.into(),
                level: level + 1,
            }
        } else {
            Sort { basic, level }
        }
    }

    pub fn ctx(level: u32) -> Sort {
        Sort::new(CTX, level)
    }

    pub fn ty(level: u32) -> Sort {
        Sort::new(TY, level)
    }

    pub fn tm(level: u32) -> Sort {
        Sort::new(TM, level)
    }

    /// Shifts the level by `d` (used by the context-extension functor).
    pub fn shifted(&self, d: u32) -> Sort {
        Sort {
            basic: self.basic.clone(),
            level: self.level + d,
        }
    }

    /// True if this sort is `(ty, n)` in alias form, i.e. `(ctx, n+1)`.
    pub fn is_ty(&self) -> bool {
        self.basic == CTX && self.level > 0
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {})", self.basic, self.level)
    }
}

/// A level expression: an integer, or a level variable plus an offset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelExpr {
    pub var: Option<String>,
    pub offset: i64,
}

impl LevelExpr {
    pub fn lit(n: u32) -> LevelExpr {
        LevelExpr {
            var: None,
            offset: n as i64,
        }
    }

    pub fn var(name: impl Into<String>) -> LevelExpr {
        LevelExpr {
            var: Some(name.into()),
            offset: 0,
        }
    }

    pub fn plus(name: impl Into<String>, offset: i64) -> LevelExpr {
        LevelExpr {
            var: Some(name.into()),
            offset,
        }
    }

    pub fn eval(&self, valuation: &BTreeMap<String, u32>) -> Result<u32, SyntaxError> {
        let base = match &self.var {
            None => 0i64,
            Some(v) => *valuation.get(v).ok_or_else(|| SyntaxError::UnboundLevelVar {
                var: v.clone(),
            })? as i64,
        };
        let value = base + self.offset;
        if value < 0 {
            return Err(SyntaxError::NegativeLevel {
                expr: self.to_string(),
                value,
            });
        }
        Ok(value as u32)
    }
}

impl fmt::Display for LevelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.var, self.offset) {
            (None, n) => write!(f, "{n}"),
            (Some(v), 0) => write!(f, "{v}"),
            (Some(v), n) if n > 0 => write!(f, "(+ {v} {n})"),
            (Some(v), n) => write!(f, "(- {v} {})", -n),
        }
    }
}

/// A schematic sort whose level is a level expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortExpr {
    pub basic: String,
    pub level: LevelExpr,
}

impl SortExpr {
    pub fn new(basic: impl Into<String>, level: LevelExpr) -> SortExpr {
        let basic = basic.into();
        if basic == TY {
            SortExpr {
                basic: CTX.into(),
                level: LevelExpr {
                    var: level.var,
                    offset: level.offset + 1,
                },
            }
        } else {
            SortExpr { basic, level }
        }
    }

    pub fn eval(&self, valuation: &BTreeMap<String, u32>) -> Result<Sort, SyntaxError> {
        Ok(Sort {
            basic: self.basic.clone(),
            level: self.level.eval(valuation)?,
        })
    }
}

impl fmt::Display for SortExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {})", self.basic, self.level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmpOp::Lt => write!(f, "<"),
            CmpOp::Le => write!(f, "<="),
            CmpOp::Eq => write!(f, "="),
        }
    }
}

/// A side constraint on level parameters, e.g. `i < n`. Only comparisons
/// between a level variable and a variable-plus-offset are supported; that
/// covers every family in the substitution calculus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub lhs: LevelExpr,
    pub op: CmpOp,
    pub rhs: LevelExpr,
}

impl Constraint {
    pub fn holds(&self, valuation: &BTreeMap<String, u32>) -> Result<bool, SyntaxError> {
        let l = self.lhs.eval(valuation)?;
        let r = self.rhs.eval(valuation)?;
        Ok(match self.op {
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Eq => l == r,
        })
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.op, self.lhs, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelParam {
    pub name: String,
    pub constraints: Vec<Constraint>,
}

impl LevelParam {
    pub fn plain(name: impl Into<String>) -> LevelParam {
        LevelParam {
            name: name.into(),
            constraints: Vec::new(),
        }
    }
}

/// One argument position of a schema: a single sort, or a group repeated
/// `count` times where `count` is a level variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArgGroup {
    One(SortExpr),
    Rep { count: String, sort: SortExpr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymbolKind {
    Function,
    Predicate,
}

/// A schematic function or predicate symbol: a whole level-indexed family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSchema {
    pub name: String,
    pub kind: SymbolKind,
    pub params: Vec<LevelParam>,
    pub args: Vec<ArgGroup>,
    pub result: Option<SortExpr>,
}

impl SymbolSchema {
    /// All level variables a schema may mention must be declared parameters.
    pub fn validate(&self) -> Result<(), SyntaxError> {
        let declared: BTreeSet<&str> = self.params.iter().map(|p| p.name.as_str()).collect();
        let check = |e: &LevelExpr| -> Result<(), SyntaxError> {
            if let Some(v) = &e.var {
                if !declared.contains(v.as_str()) {
                    return Err(SyntaxError::UndeclaredLevelVar {
                        schema: self.name.clone(),
                        var: v.clone(),
                    });
                }
            }
            Ok(())
        };
        for g in &self.args {
            match g {
                ArgGroup::One(s) => check(&s.level)?,
                ArgGroup::Rep { count, sort } => {
                    if !declared.contains(count.as_str()) {
                        return Err(SyntaxError::UndeclaredLevelVar {
                            schema: self.name.clone(),
                            var: count.clone(),
                        });
                    }
                    check(&sort.level)?;
                }
            }
        }
        if let Some(r) = &self.result {
            check(&r.level)?;
        }
        Ok(())
    }

    /// Instantiates the schema at a concrete level valuation, expanding
    /// repeated groups and checking the declared side constraints.
    pub fn instantiate(
        &self,
        valuation: &BTreeMap<String, u32>,
    ) -> Result<ConcreteSymbol, SyntaxError> {
        for p in &self.params {
            if !valuation.contains_key(&p.name) {
                return Err(SyntaxError::UnboundLevelVar {
                    var: p.name.clone(),
                });
            }
            for c in &p.constraints {
                if !c.holds(valuation)? {
                    return Err(SyntaxError::ConstraintViolation {
                        schema: self.name.clone(),
                        constraint: c.to_string(),
                    });
                }
            }
        }
        let mut args = Vec::new();
        for g in &self.args {
            match g {
                ArgGroup::One(s) => args.push(s.eval(valuation)?),
                ArgGroup::Rep { count, sort } => {
                    let n = LevelExpr::var(count.clone()).eval(valuation)?;
                    let s = sort.eval(valuation)?;
                    for _ in 0..n {
                        args.push(s.clone());
                    }
                }
            }
        }
        let result = match &self.result {
            Some(r) => Some(r.eval(valuation)?),
            None => None,
        };
        let levels = self
            .params
            .iter()
            .map(|p| valuation[&p.name])
            .collect::<Vec<_>>();
        Ok(ConcreteSymbol {
            id: SymId {
                name: self.name.clone(),
                levels,
            },
            kind: self.kind,
            args,
            result,
        })
    }
}

/// Identity of a concrete symbol instance: family name plus level values.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SymId {
    pub name: String,
    pub levels: Vec<u32>,
}

impl SymId {
    pub fn new(name: impl Into<String>, levels: Vec<u32>) -> SymId {
        SymId {
            name: name.into(),
            levels,
        }
    }

    /// Printed as a single token: `v@2,1`, `ft@0`, `*`.
    pub fn token(&self) -> String {
        if self.levels.is_empty() {
            self.name.clone()
        } else {
            let levels = self
                .levels
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(",");
            format!("{}@{}", self.name, levels)
        }
    }

    pub fn from_token(token: &str) -> Result<SymId, SyntaxError> {
        match token.rsplit_once('@') {
            None => Ok(SymId {
                name: token.to_string(),
                levels: Vec::new(),
            }),
            Some((name, levels)) => {
                let levels = levels
                    .split(',')
                    .map(|l| l.parse::<u32>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| SyntaxError::BadSymbolToken {
                        token: token.to_string(),
                    })?;
                Ok(SymId {
                    name: name.to_string(),
                    levels,
                })
            }
        }
    }
}

impl fmt::Display for SymId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.token())
    }
}

/// A fully instantiated symbol with an expanded argument sort list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcreteSymbol {
    pub id: SymId,
    pub kind: SymbolKind,
    pub args: Vec<Sort>,
    pub result: Option<Sort>,
}

/// A sorted variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Var {
    pub name: String,
    pub sort: Sort,
}

impl Var {
    pub fn new(name: impl Into<String>, sort: Sort) -> Var {
        Var {
            name: name.into(),
            sort,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {}", self.name, self.sort)
    }
}

/// Binder-free first-order terms. Application nodes carry their result sort
/// so sorting is local; well-sortedness against a signature is enforced at
/// construction time by [`crate::theory::Theory::app`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(Var),
    App {
        sym: SymId,
        args: Vec<Term>,
        sort: Sort,
    },
}

impl Term {
    pub fn var(name: impl Into<String>, sort: Sort) -> Term {
        Term::Var(Var::new(name, sort))
    }

    pub fn sort(&self) -> &Sort {
        match self {
            Term::Var(v) => &v.sort,
            Term::App { sort, .. } => sort,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App { args, .. } => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App { args, .. } => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    /// Capture is impossible (no binders), so substitution is plain
    /// occurrence replacement. The replacement must have the variable's sort.
    pub fn substitute(&self, x: &Var, s: &Term) -> Result<Term, SyntaxError> {
        if s.sort() != &x.sort {
            return Err(SyntaxError::SortMismatch {
                expected: x.sort.clone(),
                got: s.sort().clone(),
                context: format!("substituting for {}", x.name),
            });
        }
        Ok(self.substitute_unchecked(x, s))
    }

    pub fn substitute_unchecked(&self, x: &Var, s: &Term) -> Term {
        match self {
            Term::Var(v) if v == x => s.clone(),
            Term::Var(_) => self.clone(),
            Term::App { sym, args, sort } => Term::App {
                sym: sym.clone(),
                args: args.iter().map(|a| a.substitute_unchecked(x, s)).collect(),
                sort: sort.clone(),
            },
        }
    }

    /// Simultaneous substitution; variables are matched by name and sort.
    pub fn substitute_many(&self, map: &BTreeMap<Var, Term>) -> Term {
        match self {
            Term::Var(v) => match map.get(v) {
                Some(t) => t.clone(),
                None => self.clone(),
            },
            Term::App { sym, args, sort } => Term::App {
                sym: sym.clone(),
                args: args.iter().map(|a| a.substitute_many(map)).collect(),
                sort: sort.clone(),
            },
        }
    }

    pub fn contains_var(&self, x: &Var) -> bool {
        match self {
            Term::Var(v) => v == x,
            Term::App { args, .. } => args.iter().any(|a| a.contains_var(x)),
        }
    }

    pub fn to_sexpr(&self) -> crate::sexpr::Sexpr {
        use crate::sexpr::Sexpr;
        match self {
            Term::Var(v) => Sexpr::atom(&v.name),
            Term::App { sym, args, .. } => {
                let mut items = vec![Sexpr::atom(sym.token())];
                items.extend(args.iter().map(Term::to_sexpr));
                Sexpr::List(items)
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

/// `t↓` is stored as `t = t`.
pub fn mk_defined(t: &Term) -> Atom {
    Atom::Eq(t.clone(), t.clone())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Atom {
    Eq(Term, Term),
    Pred { sym: SymId, args: Vec<Term> },
}

impl Atom {
    /// Equality atoms between distinct sorts are rejected at construction.
    pub fn eq(lhs: Term, rhs: Term) -> Result<Atom, SyntaxError> {
        if lhs.sort() != rhs.sort() {
            return Err(SyntaxError::SortMismatch {
                expected: lhs.sort().clone(),
                got: rhs.sort().clone(),
                context: "equality atom".into(),
            });
        }
        Ok(Atom::Eq(lhs, rhs))
    }

    pub fn is_defined_form(&self) -> Option<&Term> {
        match self {
            Atom::Eq(l, r) if l == r => Some(l),
            _ => None,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Atom::Eq(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Atom::Pred { args, .. } => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    pub fn substitute_unchecked(&self, x: &Var, s: &Term) -> Atom {
        match self {
            Atom::Eq(l, r) => Atom::Eq(l.substitute_unchecked(x, s), r.substitute_unchecked(x, s)),
            Atom::Pred { sym, args } => Atom::Pred {
                sym: sym.clone(),
                args: args.iter().map(|a| a.substitute_unchecked(x, s)).collect(),
            },
        }
    }

    pub fn substitute_many(&self, map: &BTreeMap<Var, Term>) -> Atom {
        match self {
            Atom::Eq(l, r) => Atom::Eq(l.substitute_many(map), r.substitute_many(map)),
            Atom::Pred { sym, args } => Atom::Pred {
                sym: sym.clone(),
                args: args.iter().map(|a| a.substitute_many(map)).collect(),
            },
        }
    }

    pub fn to_sexpr(&self) -> crate::sexpr::Sexpr {
        use crate::sexpr::Sexpr;
        match self {
            Atom::Eq(l, r) if l == r => {
                Sexpr::List(vec![Sexpr::atom("def"), l.to_sexpr()])
            }
            Atom::Eq(l, r) => Sexpr::List(vec![Sexpr::atom("="), l.to_sexpr(), r.to_sexpr()]),
            Atom::Pred { sym, args } => {
                let mut items = vec![Sexpr::atom(sym.token())];
                items.extend(args.iter().map(Term::to_sexpr));
                Sexpr::List(items)
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

/// A Horn formula: a flattened conjunction of atoms. The empty conjunction
/// is the canonical truth.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Formula(pub Vec<Atom>);

impl Formula {
    pub fn truth() -> Formula {
        Formula(Vec::new())
    }

    pub fn atom(a: Atom) -> Formula {
        Formula(vec![a])
    }

    pub fn and(mut self, other: Formula) -> Formula {
        self.0.extend(other.0);
        self
    }

    pub fn is_truth(&self) -> bool {
        self.0.is_empty()
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for a in &self.0 {
            a.collect_vars(&mut out);
        }
        out
    }

    pub fn substitute_unchecked(&self, x: &Var, s: &Term) -> Formula {
        Formula(self.0.iter().map(|a| a.substitute_unchecked(x, s)).collect())
    }

    pub fn substitute_many(&self, map: &BTreeMap<Var, Term>) -> Formula {
        Formula(self.0.iter().map(|a| a.substitute_many(map)).collect())
    }

    pub fn to_sexpr(&self) -> crate::sexpr::Sexpr {
        use crate::sexpr::Sexpr;
        let mut items = vec![Sexpr::atom("and")];
        items.extend(self.0.iter().map(Atom::to_sexpr));
        Sexpr::List(items)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

/// A restricted term `t|_φ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestrictedTerm {
    pub term: Term,
    pub restriction: Formula,
}

impl RestrictedTerm {
    pub fn unrestricted(term: Term) -> RestrictedTerm {
        RestrictedTerm {
            term,
            restriction: Formula::truth(),
        }
    }

    pub fn sort(&self) -> &Sort {
        self.term.sort()
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = self.term.free_vars();
        out.extend(self.restriction.free_vars());
        out
    }

    /// `t|_φ ↓` as a formula: `t↓ ∧ φ`.
    pub fn definedness(&self) -> Formula {
        let mut atoms = vec![mk_defined(&self.term)];
        atoms.extend(self.restriction.0.iter().cloned());
        Formula(atoms)
    }

    pub fn substitute_many(&self, map: &BTreeMap<Var, Term>) -> RestrictedTerm {
        RestrictedTerm {
            term: self.term.substitute_many(map),
            restriction: self.restriction.substitute_many(map),
        }
    }
}

impl fmt::Display for RestrictedTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.term, self.restriction)
    }
}

/// A sequent `φ ⊢_V ψ`. The context is a set of sorted variables, kept in a
/// canonical order for deterministic printing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sequent {
    pub context: Vec<Var>,
    pub premise: Formula,
    pub conclusion: Formula,
}

impl Sequent {
    pub fn new(
        mut context: Vec<Var>,
        premise: Formula,
        conclusion: Formula,
    ) -> Result<Sequent, SyntaxError> {
        context.sort();
        context.dedup();
        let seq = Sequent {
            context,
            premise,
            conclusion,
        };
        seq.check_scope()?;
        Ok(seq)
    }

    pub fn check_scope(&self) -> Result<(), SyntaxError> {
        let declared: BTreeSet<&Var> = self.context.iter().collect();
        for v in self
            .premise
            .free_vars()
            .iter()
            .chain(self.conclusion.free_vars().iter())
        {
            if !declared.contains(v) {
                return Err(SyntaxError::UnscopedVar { var: v.clone() });
            }
        }
        Ok(())
    }

    pub fn has_var(&self, v: &Var) -> bool {
        self.context.binary_search(v).is_ok()
    }

    pub fn to_sexpr(&self) -> crate::sexpr::Sexpr {
        use crate::sexpr::Sexpr;
        let mut vars = vec![Sexpr::atom("vars")];
        for v in &self.context {
            vars.push(Sexpr::List(vec![
                Sexpr::atom(&v.name),
                Sexpr::List(vec![
                    Sexpr::atom(&v.sort.basic),
                    Sexpr::atom(v.sort.level.to_string()),
                ]),
            ]));
        }
        Sexpr::List(vec![
            Sexpr::atom("seq"),
            Sexpr::List(vars),
            self.premise.to_sexpr(),
            self.conclusion.to_sexpr(),
        ])
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SyntaxError {
    #[error("sort mismatch in {context}: expected {expected}, got {got}")]
    SortMismatch {
        expected: Sort,
        got: Sort,
        context: String,
    },
    #[error("level variable {var} is unbound")]
    UnboundLevelVar { var: String },
    #[error("level expression {expr} evaluates to negative value {value}")]
    NegativeLevel { expr: String, value: i64 },
    #[error("schema {schema} mentions undeclared level variable {var}")]
    UndeclaredLevelVar { schema: String, var: String },
    #[error("schema {schema} constraint {constraint} violated")]
    ConstraintViolation { schema: String, constraint: String },
    #[error("bad symbol token {token}")]
    BadSymbolToken { token: String },
    #[error("variable {var} not declared in the sequent context")]
    UnscopedVar { var: Var },
    #[error("unknown symbol {sym}")]
    UnknownSymbol { sym: SymId },
    #[error("{sym} applied to {got} arguments, expects {expected}")]
    ArityMismatch {
        sym: SymId,
        expected: usize,
        got: usize,
    },
    #[error("{0}")]
    Other(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig_ft(n: u32) -> SymId {
        SymId::new("ft", vec![n])
    }

    #[test]
    fn ty_alias_resolves() {
        assert_eq!(Sort::ty(0), Sort::ctx(1));
        assert_eq!(Sort::new("ty", 2), Sort::new("ctx", 3));
        let se = SortExpr::new("ty", LevelExpr::var("n"));
        assert_eq!(se.basic, "ctx");
        assert_eq!(se.level, LevelExpr::plus("n", 1));
    }

    #[test]
    fn substitute_direct_and_vacuous() {
        let x = Var::new("x", Sort::ctx(0));
        let a = Term::var("A", Sort::ctx(1));
        let ft_a = Term::App {
            sym: sig_ft(0),
            args: vec![a.clone()],
            sort: Sort::ctx(0),
        };
        // direct replacement
        let t = Term::Var(x.clone());
        assert_eq!(t.substitute(&x, &ft_a).unwrap(), ft_a);
        // vacuous
        assert_eq!(a.substitute(&x, &ft_a).unwrap(), a);
        // sort mismatch rejected with both sorts reported
        let bad = Term::var("B", Sort::ctx(2));
        let err = t.substitute(&x, &bad).unwrap_err();
        match err {
            SyntaxError::SortMismatch { expected, got, .. } => {
                assert_eq!(expected, Sort::ctx(0));
                assert_eq!(got, Sort::ctx(2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn substitute_structural() {
        // subst-like nesting: replacing a variable deep in the tree
        let a = Var::new("A", Sort::ctx(1));
        let b = Term::var("B", Sort::ctx(2));
        let c = Term::var("C", Sort::ctx(2));
        let ft_c = Term::App {
            sym: sig_ft(1),
            args: vec![c],
            sort: Sort::ctx(1),
        };
        let t = Term::App {
            sym: SymId::new("subst_ty", vec![1, 0]),
            args: vec![b.clone(), Term::Var(a.clone())],
            sort: Sort::ctx(2),
        };
        let t2 = t.substitute(&a, &ft_c).unwrap();
        match &t2 {
            Term::App { args, .. } => assert_eq!(args[1], ft_c),
            _ => panic!(),
        }
    }

    #[test]
    fn free_vars_and_defined() {
        let x = Term::var("x", Sort::tm(0));
        let y = Term::var("y", Sort::tm(0));
        assert!(Formula::truth().free_vars().is_empty());
        let eq = Atom::eq(x.clone(), y.clone()).unwrap();
        let fv = eq.free_vars();
        assert_eq!(fv.len(), 2);
        let d = mk_defined(&x);
        assert_eq!(d, Atom::Eq(x.clone(), x.clone()));
        assert!(d.is_defined_form().is_some());
        // restricted term free vars are the union
        let rt = RestrictedTerm {
            term: x.clone(),
            restriction: Formula::atom(eq),
        };
        assert_eq!(rt.free_vars().len(), 2);
    }

    #[test]
    fn instantiate_v_schema() {
        // v_{n,i} : (ctx,n) -> (tm,n), 0 <= i < n
        let schema = SymbolSchema {
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
            args: vec![ArgGroup::One(SortExpr::new("ctx", LevelExpr::var("n")))],
            result: Some(SortExpr::new("tm", LevelExpr::var("n"))),
        };
        schema.validate().unwrap();
        let val = BTreeMap::from([("n".to_string(), 2u32), ("i".to_string(), 1u32)]);
        let sym = schema.instantiate(&val).unwrap();
        assert_eq!(sym.id, SymId::new("v", vec![2, 1]));
        assert_eq!(sym.args, vec![Sort::ctx(2)]);
        assert_eq!(sym.result, Some(Sort::tm(2)));
        // constraint boundary: i = n rejected
        let bad = BTreeMap::from([("n".to_string(), 1u32), ("i".to_string(), 1u32)]);
        assert!(matches!(
            schema.instantiate(&bad),
            Err(SyntaxError::ConstraintViolation { .. })
        ));
    }

    #[test]
    fn instantiate_rep_group() {
        // subst_{ty,n,k} : (ctx,n) x (ty,k) x (tm,n)^k -> (ty,n)
        let schema = SymbolSchema {
            name: "subst_ty".into(),
            kind: SymbolKind::Function,
            params: vec![LevelParam::plain("n"), LevelParam::plain("k")],
            args: vec![
                ArgGroup::One(SortExpr::new("ctx", LevelExpr::var("n"))),
                ArgGroup::One(SortExpr::new("ty", LevelExpr::var("k"))),
                ArgGroup::Rep {
                    count: "k".into(),
                    sort: SortExpr::new("tm", LevelExpr::var("n")),
                },
            ],
            result: Some(SortExpr::new("ty", LevelExpr::var("n"))),
        };
        let val = BTreeMap::from([("n".to_string(), 1u32), ("k".to_string(), 2u32)]);
        let sym = schema.instantiate(&val).unwrap();
        assert_eq!(
            sym.args,
            vec![Sort::ctx(1), Sort::ty(2), Sort::tm(1), Sort::tm(1)]
        );
        assert_eq!(sym.result, Some(Sort::ty(1)));
    }

    #[test]
    fn symid_token_round_trip() {
        for id in [
            SymId::new("*", vec![]),
            SymId::new("v", vec![2, 1]),
            SymId::new("L.ty", vec![0]),
        ] {
            assert_eq!(SymId::from_token(&id.token()).unwrap(), id);
        }
    }
}
