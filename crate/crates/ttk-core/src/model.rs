//! Finite models with partial function tables, axiom checking, and
//! brute-force enumeration. Absence of a tuple from a table means the
//! function is undefined there.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::sexpr::{self, Sexpr};
use crate::syntax::{Atom, Formula, Sequent, Sort, SymId, Term, Var};
use crate::theory::Theory;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteModel {
    pub name: String,
    pub cutoff: u32,
    pub carriers: BTreeMap<Sort, Vec<String>>,
    pub functions: BTreeMap<SymId, BTreeMap<Vec<String>, String>>,
    pub predicates: BTreeMap<SymId, BTreeSet<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("variable {0} is not assigned by the environment")]
    UnboundVar(String),
    #[error("model cutoff {model} does not match theory cutoff {theory}")]
    CutoffMismatch { model: u32, theory: u32 },
    #[error("unknown symbol {0} in table")]
    UnknownSymbol(String),
    #[error("in table for {sym}: {reason}")]
    BadTable { sym: String, reason: String },
    #[error("element {element} is not in the carrier of {sort}")]
    ForeignElement { element: String, sort: String },
    #[error(transparent)]
    Parse(#[from] sexpr::ParseError),
    #[error("in {context}: expected {expected}, got {got}")]
    Malformed {
        context: String,
        expected: String,
        got: String,
    },
}

pub type Env = BTreeMap<Var, String>;

/// One axiom instance's verdict: `violation` holds the first assignment
/// under which the premise is satisfied but the conclusion is not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxiomCheck {
    pub axiom: String,
    pub valuation: Vec<(String, u32)>,
    pub violation: Option<Env>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelReport {
    pub checks: Vec<AxiomCheck>,
}

impl ModelReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.violation.is_none())
    }

    pub fn failures(&self) -> Vec<&AxiomCheck> {
        self.checks
            .iter()
            .filter(|c| c.violation.is_some())
            .collect()
    }
}

impl FiniteModel {
    pub fn carrier(&self, sort: &Sort) -> &[String] {
        self.carriers.get(sort).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Strict partial evaluation: an undefined subterm makes the whole
    /// term undefined.
    pub fn eval_term(&self, t: &Term, env: &Env) -> Result<Option<String>, ModelError> {
        match t {
            Term::Var(v) => match env.get(v) {
                Some(e) => Ok(Some(e.clone())),
                None => Err(ModelError::UnboundVar(v.name.clone())),
            },
            Term::App { sym, args, .. } => {
                let mut tuple = Vec::with_capacity(args.len());
                for a in args {
                    match self.eval_term(a, env)? {
                        Some(e) => tuple.push(e),
                        None => return Ok(None),
                    }
                }
                Ok(self
                    .functions
                    .get(sym)
                    .and_then(|table| table.get(&tuple))
                    .cloned())
            }
        }
    }

    /// An equation holds when both sides are defined and equal; a predicate
    /// atom when all arguments are defined and the tuple is in the table.
    pub fn atom_holds(&self, atom: &Atom, env: &Env) -> Result<bool, ModelError> {
        match atom {
            Atom::Eq(t, s) => {
                let l = self.eval_term(t, env)?;
                let r = self.eval_term(s, env)?;
                Ok(matches!((l, r), (Some(a), Some(b)) if a == b))
            }
            Atom::Pred { sym, args } => {
                let mut tuple = Vec::with_capacity(args.len());
                for a in args {
                    match self.eval_term(a, env)? {
                        Some(e) => tuple.push(e),
                        None => return Ok(false),
                    }
                }
                Ok(self
                    .predicates
                    .get(sym)
                    .is_some_and(|set| set.contains(&tuple)))
            }
        }
    }

    pub fn formula_holds(&self, phi: &Formula, env: &Env) -> Result<bool, ModelError> {
        for atom in &phi.0 {
            if !self.atom_holds(atom, env)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// All assignments of carrier elements to the context variables, in
    /// carrier order.
    pub fn environments(&self, context: &[Var]) -> Vec<Env> {
        let mut envs = vec![Env::new()];
        for v in context {
            let carrier = self.carrier(&v.sort).to_vec();
            let mut next = Vec::with_capacity(envs.len() * carrier.len());
            for env in &envs {
                for e in &carrier {
                    let mut e2 = env.clone();
                    e2.insert(v.clone(), e.clone());
                    next.push(e2);
                }
            }
            envs = next;
        }
        envs
    }

    /// First environment under which the sequent fails, if any.
    pub fn check_sequent(&self, seq: &Sequent) -> Result<Option<Env>, ModelError> {
        for env in self.environments(&seq.context) {
            if self.formula_holds(&seq.premise, &env)?
                && !self.formula_holds(&seq.conclusion, &env)?
            {
                return Ok(Some(env));
            }
        }
        Ok(None)
    }

    pub fn check_model(&self, theory: &Theory) -> Result<ModelReport, ModelError> {
        if self.cutoff != theory.cutoff {
            return Err(ModelError::CutoffMismatch {
                model: self.cutoff,
                theory: theory.cutoff,
            });
        }
        let mut checks = Vec::new();
        for ax in &theory.axioms {
            checks.push(AxiomCheck {
                axiom: ax.name.clone(),
                valuation: ax.valuation.clone(),
                violation: self.check_sequent(&ax.sequent)?,
            });
        }
        Ok(ModelReport { checks })
    }

    /// Shape validation: every table belongs to a declared symbol, has the
    /// right arity, and draws elements from the right carriers.
    pub fn validate_against(&self, theory: &Theory) -> Result<(), ModelError> {
        for (sym, table) in &self.functions {
            let sig = theory
                .fn_sig(sym)
                .map_err(|_| ModelError::UnknownSymbol(sym.token()))?;
            for (tuple, result) in table {
                if tuple.len() != sig.args.len() {
                    return Err(ModelError::BadTable {
                        sym: sym.token(),
                        reason: format!(
                            "tuple of length {}, expected {}",
                            tuple.len(),
                            sig.args.len()
                        ),
                    });
                }
                for (e, sort) in tuple.iter().zip(&sig.args) {
                    self.require_element(e, sort)?;
                }
                self.require_element(result, &sig.result)?;
            }
        }
        for (sym, set) in &self.predicates {
            let sig = theory
                .pred_sig(sym)
                .map_err(|_| ModelError::UnknownSymbol(sym.token()))?;
            for tuple in set {
                if tuple.len() != sig.args.len() {
                    return Err(ModelError::BadTable {
                        sym: sym.token(),
                        reason: format!(
                            "tuple of length {}, expected {}",
                            tuple.len(),
                            sig.args.len()
                        ),
                    });
                }
                for (e, sort) in tuple.iter().zip(&sig.args) {
                    self.require_element(e, sort)?;
                }
            }
        }
        Ok(())
    }

    fn require_element(&self, e: &str, sort: &Sort) -> Result<(), ModelError> {
        if self.carrier(sort).iter().any(|x| x == e) {
            Ok(())
        } else {
            Err(ModelError::ForeignElement {
                element: e.to_string(),
                sort: sort.to_string(),
            })
        }
    }

    pub fn to_sexpr(&self) -> Sexpr {
        let mut items = vec![
            Sexpr::atom("model"),
            Sexpr::list(vec![Sexpr::atom("name"), Sexpr::atom(&self.name)]),
            Sexpr::list(vec![
                Sexpr::atom("cutoff"),
                Sexpr::atom(self.cutoff.to_string()),
            ]),
        ];
        for (sort, elems) in &self.carriers {
            items.push(Sexpr::list(vec![
                Sexpr::atom("carrier"),
                Sexpr::list(vec![
                    Sexpr::atom(&sort.basic),
                    Sexpr::atom(sort.level.to_string()),
                ]),
                Sexpr::list(elems.iter().map(Sexpr::atom).collect()),
            ]));
        }
        for (sym, table) in &self.functions {
            let mut entry = vec![Sexpr::atom("fun"), Sexpr::atom(sym.token())];
            for (tuple, result) in table {
                entry.push(Sexpr::list(vec![
                    Sexpr::list(tuple.iter().map(Sexpr::atom).collect()),
                    Sexpr::atom(result),
                ]));
            }
            items.push(Sexpr::list(entry));
        }
        for (sym, set) in &self.predicates {
            let mut entry = vec![Sexpr::atom("pred"), Sexpr::atom(sym.token())];
            for tuple in set {
                entry.push(Sexpr::list(tuple.iter().map(Sexpr::atom).collect()));
            }
            items.push(Sexpr::list(entry));
        }
        Sexpr::list(items)
    }

    pub fn to_text(&self) -> String {
        format!("{}\n", self.to_sexpr())
    }

    pub fn parse(input: &str) -> Result<FiniteModel, ModelError> {
        let e = sexpr::parse_one(input)?;
        Self::from_sexpr(&e)
    }

    pub fn from_sexpr(e: &Sexpr) -> Result<FiniteModel, ModelError> {
        let malformed = |ctx: &str, expected: &str, got: &Sexpr| ModelError::Malformed {
            context: ctx.into(),
            expected: expected.into(),
            got: got.to_string(),
        };
        let items = e
            .tagged("model")
            .ok_or_else(|| malformed("model", "(model ...)", e))?;
        let mut model = FiniteModel {
            name: String::new(),
            cutoff: 0,
            carriers: BTreeMap::new(),
            functions: BTreeMap::new(),
            predicates: BTreeMap::new(),
        };
        for item in items {
            let Some(head) = item.head() else {
                return Err(malformed("model", "a tagged clause", item));
            };
            let parts = item.as_list().unwrap();
            match head {
                "name" => {
                    let [_, n] = parts else {
                        return Err(malformed("name", "(name id)", item));
                    };
                    model.name = n
                        .as_atom()
                        .ok_or_else(|| malformed("name", "an atom", n))?
                        .to_string();
                }
                "cutoff" => {
                    let [_, n] = parts else {
                        return Err(malformed("cutoff", "(cutoff n)", item));
                    };
                    model.cutoff = n
                        .as_atom()
                        .and_then(|a| a.parse().ok())
                        .ok_or_else(|| malformed("cutoff", "a number", n))?;
                }
                "carrier" => {
                    let [_, sort, elems] = parts else {
                        return Err(malformed("carrier", "(carrier (basic n) (elems))", item));
                    };
                    let sort = parse_sort(sort)
                        .ok_or_else(|| malformed("carrier", "(basic level)", sort))?;
                    let elems = elems
                        .as_list()
                        .ok_or_else(|| malformed("carrier", "an element list", elems))?
                        .iter()
                        .map(|x| {
                            x.as_atom()
                                .map(str::to_string)
                                .ok_or_else(|| malformed("carrier", "an atom", x))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    model.carriers.insert(sort, elems);
                }
                "fun" | "pred" => {
                    let sym = parts
                        .get(1)
                        .and_then(|s| s.as_atom())
                        .ok_or_else(|| malformed(head, "a symbol token", item))?;
                    let sym = SymId::from_token(sym).map_err(|_| {
                        malformed(head, "name or name@l1,l2", &parts[1].clone())
                    })?;
                    for entry in &parts[2..] {
                        if head == "fun" {
                            let Some([tuple, result]) = entry.as_list() else {
                                return Err(malformed("fun", "((args) result)", entry));
                            };
                            let tuple = parse_tuple(tuple)
                                .ok_or_else(|| malformed("fun", "an argument tuple", tuple))?;
                            let result = result
                                .as_atom()
                                .ok_or_else(|| malformed("fun", "an element", result))?;
                            model
                                .functions
                                .entry(sym.clone())
                                .or_default()
                                .insert(tuple, result.to_string());
                        } else {
                            let tuple = parse_tuple(entry)
                                .ok_or_else(|| malformed("pred", "an argument tuple", entry))?;
                            model.predicates.entry(sym.clone()).or_default().insert(tuple);
                        }
                    }
                    // symbols with empty tables still get an entry
                    if parts.len() == 2 {
                        if head == "fun" {
                            model.functions.entry(sym).or_default();
                        } else {
                            model.predicates.entry(sym).or_default();
                        }
                    }
                }
                other => {
                    return Err(malformed("model", "name/cutoff/carrier/fun/pred", &Sexpr::atom(other)));
                }
            }
        }
        Ok(model)
    }
}

fn parse_sort(e: &Sexpr) -> Option<Sort> {
    let [basic, level] = e.as_list()? else {
        return None;
    };
    Some(Sort::new(basic.as_atom()?, level.as_atom()?.parse().ok()?))
}

fn parse_tuple(e: &Sexpr) -> Option<Vec<String>> {
    e.as_list()?
        .iter()
        .map(|x| x.as_atom().map(str::to_string))
        .collect()
}

/// All sorts a theory's finite models need carriers for: signature argument
/// and result sorts plus axiom context sorts.
pub fn model_sorts(theory: &Theory) -> Vec<Sort> {
    let mut sorts = BTreeSet::new();
    for sig in theory.functions.values() {
        sorts.extend(sig.args.iter().cloned());
        sorts.insert(sig.result.clone());
    }
    for sig in theory.predicates.values() {
        sorts.extend(sig.args.iter().cloned());
    }
    for ax in &theory.axioms {
        sorts.extend(ax.sequent.context.iter().map(|v| v.sort.clone()));
    }
    sorts.into_iter().collect()
}

/// The one-element-per-sort model with every function total. Satisfies any
/// purely equational axiom set.
pub fn singleton_model(theory: &Theory) -> FiniteModel {
    let mut carriers = BTreeMap::new();
    for sort in model_sorts(theory) {
        let name = format!("{}{}", sort.basic, sort.level);
        carriers.insert(sort, vec![name]);
    }
    let mut functions = BTreeMap::new();
    for (sym, sig) in &theory.functions {
        let tuple: Vec<String> = sig
            .args
            .iter()
            .map(|s| format!("{}{}", s.basic, s.level))
            .collect();
        let result = format!("{}{}", sig.result.basic, sig.result.level);
        let mut table = BTreeMap::new();
        table.insert(tuple, result);
        functions.insert(sym.clone(), table);
    }
    FiniteModel {
        name: format!("{}-singleton", theory.name),
        cutoff: theory.cutoff,
        carriers,
        functions,
        predicates: theory
            .predicates
            .keys()
            .map(|s| (s.clone(), BTreeSet::new()))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// enumeration

const UNKNOWN: i16 = -2;
const UNDEF: i16 = -1;

/// One decision slot: a function table entry or a predicate tuple. Used by
/// the naive leaf-checking enumerator.
#[derive(Debug, Clone)]
enum Slot {
    Fun { sym: SymId, tuple: Vec<String> },
    Pred { sym: SymId, tuple: Vec<String> },
}

/// A term grounded against a fixed carrier assignment: elements are interned
/// as indices, applications index a flat table via base/stride arithmetic.
#[derive(Debug, Clone)]
enum GTerm {
    Elem(i16),
    App {
        base: usize,
        strides: Vec<usize>,
        args: Vec<GTerm>,
    },
}

#[derive(Debug, Clone)]
enum GAtom {
    Eq(GTerm, GTerm),
    Pred {
        base: usize,
        strides: Vec<usize>,
        args: Vec<GTerm>,
    },
}

/// One axiom instance under one environment, fully grounded.
#[derive(Debug, Clone)]
struct GSeq {
    premise: Vec<GAtom>,
    conclusion: Vec<GAtom>,
}

#[derive(Debug, Clone)]
struct FunLayout {
    sym: SymId,
    base: usize,
    strides: Vec<usize>,
    arg_cards: Vec<usize>,
    result_card: usize,
}

#[derive(Debug, Clone)]
struct PredLayout {
    sym: SymId,
    base: usize,
    strides: Vec<usize>,
    arg_cards: Vec<usize>,
}

#[derive(Debug, Clone)]
struct CSlot {
    fun: bool,
    layout: usize,
    index: usize,
    tuple: Vec<i16>,
}

/// The enumerator working over the compiled representation. States are flat
/// arrays; UNKNOWN marks undecided entries so partially built tables can be
/// checked with three-valued evaluation.
struct Compiled<'a> {
    theory: &'a Theory,
    carriers: &'a BTreeMap<Sort, Vec<String>>,
    funs: Vec<FunLayout>,
    preds: Vec<PredLayout>,
    fun_state: Vec<i16>,
    pred_state: Vec<i16>,
    gseqs: Vec<GSeq>,
    // gseq indices to recheck per (is_fun, layout index)
    watching: BTreeMap<(bool, usize), Vec<usize>>,
    slots: Vec<CSlot>,
}

impl<'a> Compiled<'a> {
    fn build(theory: &'a Theory, carriers: &'a BTreeMap<Sort, Vec<String>>) -> Compiled<'a> {
        let card = |sort: &Sort| carriers.get(sort).map(|v| v.len()).unwrap_or(0);
        let layout_of = |sorts: &[Sort]| {
            let cards: Vec<usize> = sorts.iter().map(&card).collect();
            let mut strides = vec![1usize; cards.len()];
            for i in (0..cards.len()).rev() {
                if i + 1 < cards.len() {
                    strides[i] = strides[i + 1] * cards[i + 1];
                }
            }
            let total: usize = cards.iter().product();
            (cards, strides, total)
        };
        let mut funs = Vec::new();
        let mut fun_index = HashMap::new();
        let mut fun_total = 0usize;
        for (sym, sig) in &theory.functions {
            let (arg_cards, strides, total) = layout_of(&sig.args);
            fun_index.insert(sym.clone(), funs.len());
            funs.push(FunLayout {
                sym: sym.clone(),
                base: fun_total,
                strides,
                arg_cards,
                result_card: card(&sig.result),
            });
            fun_total += total;
        }
        let mut preds = Vec::new();
        let mut pred_index = HashMap::new();
        let mut pred_total = 0usize;
        for (sym, sig) in &theory.predicates {
            let (arg_cards, strides, total) = layout_of(&sig.args);
            pred_index.insert(sym.clone(), preds.len());
            preds.push(PredLayout {
                sym: sym.clone(),
                base: pred_total,
                strides,
                arg_cards,
            });
            pred_total += total;
        }
        let mut slots = Vec::new();
        for (li, f) in funs.iter().enumerate() {
            let total: usize = f.arg_cards.iter().product();
            for index in 0..total {
                slots.push(CSlot {
                    fun: true,
                    layout: li,
                    index: f.base + index,
                    tuple: decompose(index, &f.strides),
                });
            }
        }
        for (li, p) in preds.iter().enumerate() {
            let total: usize = p.arg_cards.iter().product();
            for index in 0..total {
                slots.push(CSlot {
                    fun: false,
                    layout: li,
                    index: p.base + index,
                    tuple: decompose(index, &p.strides),
                });
            }
        }
        // ground every axiom under every environment
        let mut gseqs: Vec<GSeq> = Vec::new();
        let mut watching: BTreeMap<(bool, usize), Vec<usize>> = BTreeMap::new();
        for ax in &theory.axioms {
            let mut envs: Vec<BTreeMap<Var, i16>> = vec![BTreeMap::new()];
            for v in &ax.sequent.context {
                let n = card(&v.sort);
                let mut next = Vec::with_capacity(envs.len() * n);
                for env in &envs {
                    for e in 0..n {
                        let mut e2 = env.clone();
                        e2.insert(v.clone(), e as i16);
                        next.push(e2);
                    }
                }
                envs = next;
            }
            for env in envs {
                let mut touched = BTreeSet::new();
                let ground = |phi: &Formula, touched: &mut BTreeSet<(bool, usize)>| {
                    phi.0
                        .iter()
                        .map(|atom| {
                            compile_atom(atom, &env, &fun_index, &pred_index, &funs, &preds, touched)
                        })
                        .collect::<Vec<_>>()
                };
                let premise = ground(&ax.sequent.premise, &mut touched);
                let conclusion = ground(&ax.sequent.conclusion, &mut touched);
                let id = gseqs.len();
                gseqs.push(GSeq { premise, conclusion });
                for key in touched {
                    watching.entry(key).or_default().push(id);
                }
            }
        }
        Compiled {
            theory,
            carriers,
            fun_state: vec![UNKNOWN; fun_total],
            pred_state: vec![UNKNOWN; pred_total],
            funs,
            preds,
            gseqs,
            watching,
            slots,
        }
    }

    fn eval(&self, t: &GTerm) -> i16 {
        match t {
            GTerm::Elem(e) => *e,
            GTerm::App {
                base,
                strides,
                args,
            } => {
                let mut idx = *base;
                let mut unknown = false;
                for (a, st) in args.iter().zip(strides) {
                    match self.eval(a) {
                        UNDEF => return UNDEF,
                        UNKNOWN => unknown = true,
                        e => idx += e as usize * st,
                    }
                }
                if unknown {
                    UNKNOWN
                } else {
                    self.fun_state[idx]
                }
            }
        }
    }

    /// Three-valued atom truth: 0 false, 1 true, UNKNOWN undecided.
    fn atom_truth(&self, atom: &GAtom) -> i16 {
        match atom {
            GAtom::Eq(l, r) => match (self.eval(l), self.eval(r)) {
                (UNDEF, _) | (_, UNDEF) => 0,
                (UNKNOWN, _) | (_, UNKNOWN) => UNKNOWN,
                (a, b) => (a == b) as i16,
            },
            GAtom::Pred {
                base,
                strides,
                args,
            } => {
                let mut idx = *base;
                for (a, st) in args.iter().zip(strides) {
                    match self.eval(a) {
                        UNDEF => return 0,
                        UNKNOWN => return UNKNOWN,
                        e => idx += e as usize * st,
                    }
                }
                self.pred_state[idx]
            }
        }
    }

    /// True when the ground sequent is violated under every completion of
    /// the current partial tables.
    fn definitely_violated(&self, gi: usize) -> bool {
        let g = &self.gseqs[gi];
        if g.premise.iter().any(|a| self.atom_truth(a) != 1) {
            return false;
        }
        g.conclusion.iter().any(|a| self.atom_truth(a) == 0)
    }

    fn slot_value(&self, si: usize) -> i16 {
        let slot = &self.slots[si];
        if slot.fun {
            self.fun_state[slot.index]
        } else {
            self.pred_state[slot.index]
        }
    }

    fn set_slot(&mut self, si: usize, v: i16) {
        let slot = &self.slots[si];
        if slot.fun {
            self.fun_state[slot.index] = v;
        } else {
            self.pred_state[slot.index] = v;
        }
    }

    /// Values of the slot not immediately contradicting a watched sequent.
    fn options(&mut self, si: usize) -> Vec<i16> {
        let slot = self.slots[si].clone();
        let watch = (slot.fun, slot.layout);
        let candidates: Vec<i16> = if slot.fun {
            let card = self.funs[slot.layout].result_card as i16;
            (UNDEF..card).collect()
        } else {
            vec![0, 1]
        };
        let mut out = Vec::with_capacity(candidates.len());
        for v in candidates {
            self.set_slot(si, v);
            if !self.pruned(&watch) {
                out.push(v);
            }
        }
        self.set_slot(si, UNKNOWN);
        out
    }

    /// Backtracking search with unit propagation: forced slots (a single
    /// surviving value) are assigned eagerly, dead slots (none) abort the
    /// branch, and branching picks the most constrained remaining slot.
    fn search(&mut self, out: &mut Vec<FiniteModel>) {
        let mut trail: Vec<usize> = Vec::new();
        loop {
            let mut changed = false;
            let mut all_assigned = true;
            let mut best: Option<(usize, Vec<i16>)> = None;
            for si in 0..self.slots.len() {
                if self.slot_value(si) != UNKNOWN {
                    continue;
                }
                all_assigned = false;
                let opts = self.options(si);
                match opts.len() {
                    0 => {
                        self.unwind(&trail);
                        return;
                    }
                    1 => {
                        self.set_slot(si, opts[0]);
                        trail.push(si);
                        changed = true;
                    }
                    n => {
                        if best.as_ref().is_none_or(|(_, b)| n < b.len()) {
                            best = Some((si, opts));
                        }
                    }
                }
            }
            if all_assigned {
                out.push(self.to_model());
                self.unwind(&trail);
                return;
            }
            if changed {
                continue;
            }
            let (si, opts) = best.expect("unassigned slot without options handled above");
            for v in opts {
                self.set_slot(si, v);
                self.search(out);
            }
            self.set_slot(si, UNKNOWN);
            self.unwind(&trail);
            return;
        }
    }

    fn unwind(&mut self, trail: &[usize]) {
        for &si in trail {
            self.set_slot(si, UNKNOWN);
        }
    }

    fn pruned(&self, watch: &(bool, usize)) -> bool {
        let Some(ids) = self.watching.get(watch) else {
            return false;
        };
        ids.iter().any(|&gi| self.definitely_violated(gi))
    }

    fn to_model(&self) -> FiniteModel {
        let name_of = |sort: &Sort, e: i16| self.carriers[sort][e as usize].clone();
        let mut functions: BTreeMap<SymId, BTreeMap<Vec<String>, String>> = self
            .theory
            .functions
            .keys()
            .map(|s| (s.clone(), BTreeMap::new()))
            .collect();
        let mut predicates: BTreeMap<SymId, BTreeSet<Vec<String>>> = self
            .theory
            .predicates
            .keys()
            .map(|s| (s.clone(), BTreeSet::new()))
            .collect();
        for slot in &self.slots {
            if slot.fun {
                let v = self.fun_state[slot.index];
                if v < 0 {
                    continue;
                }
                let f = &self.funs[slot.layout];
                let sig = self.theory.fn_sig(&f.sym).expect("layout symbol");
                let tuple = slot
                    .tuple
                    .iter()
                    .zip(&sig.args)
                    .map(|(&e, sort)| name_of(sort, e))
                    .collect();
                functions
                    .get_mut(&f.sym)
                    .unwrap()
                    .insert(tuple, name_of(&sig.result, v));
            } else {
                if self.pred_state[slot.index] != 1 {
                    continue;
                }
                let p = &self.preds[slot.layout];
                let sig = self.theory.pred_sig(&p.sym).expect("layout symbol");
                let tuple = slot
                    .tuple
                    .iter()
                    .zip(&sig.args)
                    .map(|(&e, sort)| name_of(sort, e))
                    .collect();
                predicates.get_mut(&p.sym).unwrap().insert(tuple);
            }
        }
        FiniteModel {
            name: String::new(),
            cutoff: self.theory.cutoff,
            carriers: self.carriers.clone(),
            functions,
            predicates,
        }
    }
}

fn decompose(mut index: usize, strides: &[usize]) -> Vec<i16> {
    let mut out = Vec::with_capacity(strides.len());
    for st in strides {
        out.push((index / st) as i16);
        index %= st;
    }
    out
}

fn compile_term(
    t: &Term,
    env: &BTreeMap<Var, i16>,
    fun_index: &HashMap<SymId, usize>,
    funs: &[FunLayout],
    touched: &mut BTreeSet<(bool, usize)>,
) -> GTerm {
    match t {
        Term::Var(v) => GTerm::Elem(env[v]),
        Term::App { sym, args, .. } => {
            let li = fun_index[sym];
            touched.insert((true, li));
            let f = &funs[li];
            GTerm::App {
                base: f.base,
                strides: f.strides.clone(),
                args: args
                    .iter()
                    .map(|a| compile_term(a, env, fun_index, funs, touched))
                    .collect(),
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn compile_atom(
    atom: &Atom,
    env: &BTreeMap<Var, i16>,
    fun_index: &HashMap<SymId, usize>,
    pred_index: &HashMap<SymId, usize>,
    funs: &[FunLayout],
    preds: &[PredLayout],
    touched: &mut BTreeSet<(bool, usize)>,
) -> GAtom {
    match atom {
        Atom::Eq(l, r) => GAtom::Eq(
            compile_term(l, env, fun_index, funs, touched),
            compile_term(r, env, fun_index, funs, touched),
        ),
        Atom::Pred { sym, args } => {
            let li = pred_index[sym];
            touched.insert((false, li));
            let p = &preds[li];
            GAtom::Pred {
                base: p.base,
                strides: p.strides.clone(),
                args: args
                    .iter()
                    .map(|a| compile_term(a, env, fun_index, funs, touched))
                    .collect(),
            }
        }
    }
}

fn tuples(carriers: &BTreeMap<Sort, Vec<String>>, sorts: &[Sort]) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for sort in sorts {
        let carrier = carriers.get(sort).cloned().unwrap_or_default();
        let mut next = Vec::new();
        for tuple in &out {
            for e in &carrier {
                let mut t2 = tuple.clone();
                t2.push(e.clone());
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

/// All models of the theory with carriers of size at most `max_carrier`,
/// in a deterministic order. With `prune_iso`, one representative per
/// isomorphism class (carrier renamings) is kept.
pub fn enumerate_models(theory: &Theory, max_carrier: usize, prune_iso: bool) -> Vec<FiniteModel> {
    let sorts = model_sorts(theory);
    let mut out = Vec::new();
    let mut sizes = vec![0usize; sorts.len()];
    loop {
        let carriers: BTreeMap<Sort, Vec<String>> = sorts
            .iter()
            .zip(&sizes)
            .map(|(s, &n)| {
                let elems = (0..n)
                    .map(|i| format!("{}{}_{}", s.basic, s.level, i))
                    .collect();
                (s.clone(), elems)
            })
            .collect();
        out.extend(enumerate_with_carriers(theory, carriers, prune_iso));
        // next size vector, counting up in base (max_carrier + 1)
        let mut i = 0;
        loop {
            if i == sizes.len() {
                let mut named = out;
                for (i, m) in named.iter_mut().enumerate() {
                    m.name = format!("{}-m{}", theory.name, i);
                }
                return named;
            }
            if sizes[i] < max_carrier {
                sizes[i] += 1;
                break;
            }
            sizes[i] = 0;
            i += 1;
        }
    }
}

fn enumerate_with_carriers(
    theory: &Theory,
    carriers: BTreeMap<Sort, Vec<String>>,
    prune_iso: bool,
) -> Vec<FiniteModel> {
    let mut compiled = Compiled::build(theory, &carriers);
    // sequents without function or predicate symbols are never watched by a
    // slot assignment; they are decided by the carriers alone, so test all
    // ground sequents once before searching
    if (0..compiled.gseqs.len()).any(|gi| compiled.definitely_violated(gi)) {
        return Vec::new();
    }
    let mut found = Vec::new();
    compiled.search(&mut found);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for model in found {
        debug_assert_eq!(
            model.check_model(theory).map(|r| r.passed()),
            Ok(true),
            "enumerated model fails the direct checker"
        );
        if prune_iso && !seen.insert(canonical_form(&model)) {
            continue;
        }
        out.push(model);
    }
    out
}

/// Exhaustive product enumeration with a leaf check only. Slow; kept as an
/// independent oracle for the pruned enumerator.
pub fn enumerate_models_naive(theory: &Theory, max_carrier: usize) -> Vec<FiniteModel> {
    let sorts = model_sorts(theory);
    let mut out = Vec::new();
    let mut sizes = vec![0usize; sorts.len()];
    loop {
        let carriers: BTreeMap<Sort, Vec<String>> = sorts
            .iter()
            .zip(&sizes)
            .map(|(s, &n)| {
                let elems = (0..n)
                    .map(|i| format!("{}{}_{}", s.basic, s.level, i))
                    .collect();
                (s.clone(), elems)
            })
            .collect();
        naive_tables(theory, &carriers, &mut out);
        let mut i = 0;
        loop {
            if i == sizes.len() {
                return out;
            }
            if sizes[i] < max_carrier {
                sizes[i] += 1;
                break;
            }
            sizes[i] = 0;
            i += 1;
        }
    }
}

fn naive_tables(
    theory: &Theory,
    carriers: &BTreeMap<Sort, Vec<String>>,
    out: &mut Vec<FiniteModel>,
) {
    // every slot with every option, depth-first, checking only at leaves
    let mut slots = Vec::new();
    for (sym, sig) in &theory.functions {
        for tuple in tuples(carriers, &sig.args) {
            let mut options: Vec<Option<String>> = vec![None];
            options.extend(carriers.get(&sig.result).cloned().unwrap_or_default().into_iter().map(Some));
            slots.push((Slot::Fun { sym: sym.clone(), tuple }, options));
        }
    }
    for (sym, sig) in &theory.predicates {
        for tuple in tuples(carriers, &sig.args) {
            slots.push((
                Slot::Pred { sym: sym.clone(), tuple },
                vec![None, Some("1".to_string())],
            ));
        }
    }
    fn rec(
        theory: &Theory,
        carriers: &BTreeMap<Sort, Vec<String>>,
        slots: &[(Slot, Vec<Option<String>>)],
        depth: usize,
        functions: &mut BTreeMap<SymId, BTreeMap<Vec<String>, String>>,
        predicates: &mut BTreeMap<SymId, BTreeSet<Vec<String>>>,
        out: &mut Vec<FiniteModel>,
    ) {
        if depth == slots.len() {
            let model = FiniteModel {
                name: String::new(),
                cutoff: theory.cutoff,
                carriers: carriers.clone(),
                functions: functions.clone(),
                predicates: predicates.clone(),
            };
            if model.check_model(theory).map(|r| r.passed()) == Ok(true) {
                out.push(model);
            }
            return;
        }
        let (slot, options) = &slots[depth];
        for opt in options {
            match (slot, opt) {
                (Slot::Fun { sym, tuple }, Some(v)) => {
                    functions
                        .entry(sym.clone())
                        .or_default()
                        .insert(tuple.clone(), v.clone());
                    rec(theory, carriers, slots, depth + 1, functions, predicates, out);
                    functions.get_mut(sym).unwrap().remove(tuple);
                }
                (Slot::Fun { .. }, None) => {
                    rec(theory, carriers, slots, depth + 1, functions, predicates, out);
                }
                (Slot::Pred { sym, tuple }, Some(_)) => {
                    predicates.entry(sym.clone()).or_default().insert(tuple.clone());
                    rec(theory, carriers, slots, depth + 1, functions, predicates, out);
                    predicates.get_mut(sym).unwrap().remove(tuple);
                }
                (Slot::Pred { .. }, None) => {
                    rec(theory, carriers, slots, depth + 1, functions, predicates, out);
                }
            }
        }
    }
    let mut functions: BTreeMap<SymId, BTreeMap<Vec<String>, String>> = theory
        .functions
        .keys()
        .map(|s| (s.clone(), BTreeMap::new()))
        .collect();
    let mut predicates: BTreeMap<SymId, BTreeSet<Vec<String>>> = theory
        .predicates
        .keys()
        .map(|s| (s.clone(), BTreeSet::new()))
        .collect();
    rec(theory, carriers, &slots, 0, &mut functions, &mut predicates, out);
}

/// A canonical serialization invariant under carrier renamings, computed by
/// minimizing over all per-sort permutations.
pub fn canonical_form(model: &FiniteModel) -> String {
    let sorts: Vec<&Sort> = model.carriers.keys().collect();
    let mut best: Option<String> = None;
    let mut perms: Vec<Vec<Vec<usize>>> = Vec::new();
    for s in &sorts {
        perms.push(permutations(model.carriers[*s].len()));
    }
    let mut choice = vec![0usize; sorts.len()];
    loop {
        // build the renaming for this choice of permutations
        let mut rename: BTreeMap<&str, String> = BTreeMap::new();
        for (si, s) in sorts.iter().enumerate() {
            let elems = &model.carriers[*s];
            let perm = &perms[si][choice[si]];
            for (i, e) in elems.iter().enumerate() {
                rename.insert(e.as_str(), elems[perm[i]].clone());
            }
        }
        let mut renamed = model.clone();
        renamed.name = String::new();
        for table in renamed.functions.values_mut() {
            *table = table
                .iter()
                .map(|(tuple, v)| {
                    (
                        tuple.iter().map(|e| rename[e.as_str()].clone()).collect(),
                        rename[v.as_str()].clone(),
                    )
                })
                .collect();
        }
        for set in renamed.predicates.values_mut() {
            *set = set
                .iter()
                .map(|tuple| tuple.iter().map(|e| rename[e.as_str()].clone()).collect())
                .collect();
        }
        let text = renamed.to_text();
        if best.as_ref().is_none_or(|b| text < *b) {
            best = Some(text);
        }
        let mut i = 0;
        loop {
            if i == choice.len() {
                return best.unwrap_or_default();
            }
            if choice[i] + 1 < perms[i].len() {
                choice[i] += 1;
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..n {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subst::{self, build_s};

    fn tiny_theory() -> Theory {
        Theory::parse(
            "tiny",
            "\
(sort ctx)
(sort tm)
(fun f (args (tm 0)) (result (tm 0)))
(axiom f-total (vars (x (tm 0))) (seq (and) (and (def (f x)))))
",
            1,
        )
        .unwrap()
    }

    #[test]
    fn eval_variable_and_missing_tuple() {
        let th = tiny_theory();
        let mut m = singleton_model(&th);
        let x = Var::new("x", Sort::tm(0));
        let mut env = Env::new();
        env.insert(x.clone(), "tm0".into());
        assert_eq!(
            m.eval_term(&Term::Var(x.clone()), &env).unwrap(),
            Some("tm0".into())
        );
        let fx = th
            .app(SymId::new("f", vec![]), vec![Term::Var(x.clone())])
            .unwrap();
        assert_eq!(m.eval_term(&fx, &env).unwrap(), Some("tm0".into()));
        m.functions.get_mut(&SymId::new("f", vec![])).unwrap().clear();
        assert_eq!(m.eval_term(&fx, &env).unwrap(), None);
    }

    #[test]
    fn composite_table_lookup() {
        let th = build_s(1);
        let mut m = singleton_model(&th);
        // a 2-element (ctx,1) carrier with ft mapping both down to ctx0
        m.carriers.insert(Sort::ctx(1), vec!["A".into(), "B".into()]);
        let ft = m.functions.get_mut(&subst::ft_sym(0)).unwrap();
        ft.clear();
        ft.insert(vec!["A".into()], "ctx0".into());
        ft.insert(vec!["B".into()], "ctx0".into());
        let ty = m.functions.get_mut(&subst::ty_sym(0)).unwrap();
        ty.clear();
        ty.insert(vec!["tm0".into()], "B".into());
        let a = Var::new("a", Sort::tm(0));
        let mut env = Env::new();
        env.insert(a.clone(), "tm0".into());
        let t = subst::ctx_of(&th, crate::syntax::TM, 0, Term::Var(a)).unwrap();
        assert_eq!(m.eval_term(&t, &env).unwrap(), Some("ctx0".into()));
    }

    #[test]
    fn singleton_model_of_s_passes() {
        let th = build_s(2);
        let m = singleton_model(&th);
        m.validate_against(&th).unwrap();
        let report = m.check_model(&th).unwrap();
        assert!(report.passed(), "failures: {:?}", report.failures());
    }

    #[test]
    fn violation_names_axiom_and_assignment() {
        let th = build_s(1);
        let mut m = singleton_model(&th);
        // break substitution on identities
        m.functions
            .get_mut(&subst::subst_sym(crate::syntax::TM, 0, 0))
            .unwrap()
            .clear();
        let report = m.check_model(&th).unwrap();
        let failures = report.failures();
        assert!(failures.iter().any(|f| f.axiom == "subst-var-tm"));
        let f = failures.iter().find(|f| f.axiom == "subst-var-tm").unwrap();
        assert!(f.violation.is_some());
    }

    #[test]
    fn empty_carriers_fail_star_def() {
        let th = build_s(1);
        let m = FiniteModel {
            name: "empty".into(),
            cutoff: 1,
            carriers: BTreeMap::new(),
            functions: BTreeMap::new(),
            predicates: BTreeMap::new(),
        };
        let report = m.check_model(&th).unwrap();
        let failures = report.failures();
        assert!(failures.iter().any(|f| f.axiom == "star-def"));
    }

    #[test]
    fn file_round_trip() {
        let th = tiny_theory();
        let m = singleton_model(&th);
        let text = m.to_text();
        let back = FiniteModel::parse(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn collapse_axiom_limits_carriers() {
        let th = Theory::parse(
            "collapse",
            "\
(sort ctx)
(fun c (args) (result (ctx 0)))
(axiom one (vars (x (ctx 0)) (y (ctx 0))) (seq (and) (and (= x y))))
",
            1,
        )
        .unwrap();
        let models = enumerate_models(&th, 2, false);
        assert!(!models.is_empty());
        for m in &models {
            assert!(m.carrier(&Sort::ctx(0)).len() <= 1);
        }
    }

    #[test]
    fn pruned_matches_naive_on_tiny_theory() {
        let th = tiny_theory();
        let pruned = enumerate_models(&th, 2, false);
        let naive = enumerate_models_naive(&th, 2);
        assert_eq!(pruned.len(), naive.len());
        let canon = |ms: &[FiniteModel]| {
            let mut v: Vec<String> = ms
                .iter()
                .map(|m| {
                    let mut m = m.clone();
                    m.name = String::new();
                    m.to_text()
                })
                .collect();
            v.sort();
            v
        };
        assert_eq!(canon(&pruned), canon(&naive));
    }

    #[test]
    fn iso_pruning_reduces_count() {
        let th = tiny_theory();
        let all = enumerate_models(&th, 2, false);
        let pruned = enumerate_models(&th, 2, true);
        assert!(pruned.len() <= all.len());
        // every model is isomorphic to some representative
        let reps: HashSet<String> = pruned.iter().map(canonical_form).collect();
        for m in &all {
            assert!(reps.contains(&canonical_form(m)));
        }
    }
}

#[cfg(test)]
mod s_enumeration {
    use super::*;
    use crate::subst::build_s;

    #[test]
    fn s_cutoff1_models_carriers_up_to_1() {
        let th = build_s(1);
        let models = enumerate_models(&th, 1, true);
        assert_eq!(models.len(), 3);
        for m in &models {
            assert!(m.check_model(&th).unwrap().passed());
        }
    }

    #[test]
    fn s_cutoff1_models_carriers_up_to_2() {
        let th = build_s(1);
        let models = enumerate_models(&th, 2, true);
        assert_eq!(models.len(), 13);
        for m in &models {
            assert!(m.check_model(&th).unwrap().passed());
            // the base axioms force a one-point (ctx, 0) carrier
            assert_eq!(m.carrier(&Sort::ctx(0)).len(), 1);
        }
    }
}
