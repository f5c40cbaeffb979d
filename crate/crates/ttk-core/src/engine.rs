//! Bounded saturation prover with proof reconstruction.
//!
//! The search state is a ground e-graph over the terms mentioned so far:
//! hashconsed nodes, a union-find whose every edge carries an already
//! materialized equality fact, and a set of defined classes. Axioms are
//! applied by e-matching their premises against defined classes and stored
//! predicate facts. Every derived fact records a justification that maps
//! onto a small derivation template, so a `Proven` outcome carries a
//! derivation the checker accepts.
//!
//! Contexts only ever grow (rule a3 keeps the substituted variable), so a
//! proof of a goal may conclude with a context that is a superset of the
//! goal's; the premise and conclusion formulas match the goal exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::derivation::Derivation;
use crate::model::FiniteModel;
use crate::syntax::{mk_defined, Atom, Formula, RestrictedTerm, Sequent, Sort, SymId, Term, Var};
use crate::theory::Theory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub term_depth: usize,
    pub steps: usize,
    pub level_cutoff: u32,
}

impl Default for Bounds {
    fn default() -> Bounds {
        Bounds {
            term_depth: 6,
            steps: 50_000,
            level_cutoff: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SearchStats {
    pub steps: usize,
    pub facts: usize,
    pub nodes: usize,
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProofOutcome {
    Proven(Box<Derivation>),
    Unknown(SearchStats),
    Refuted(Box<FiniteModel>),
}

impl ProofOutcome {
    pub fn is_proven(&self) -> bool {
        matches!(self, ProofOutcome::Proven(_))
    }
}

type NodeId = usize;
type FactId = usize;

/// New-term-producing axiom instances admitted in the first generative
/// round; the allowance doubles each round so total re-matching work stays
/// within a constant factor of the final saturation size.
const GENERATIVE_BASE: usize = 64;

#[derive(Debug, Clone)]
enum Just {
    Hyp {
        index: usize,
    },
    VarDef {
        var: Var,
    },
    Axiom {
        name: String,
        valuation: Vec<(String, u32)>,
        subst: Vec<(String, Term)>,
        premises: Vec<FactId>,
        defs: Vec<FactId>,
        concl_index: usize,
    },
    Sym {
        eq: FactId,
        def: FactId,
    },
    Trans {
        ab: FactId,
        bc: FactId,
    },
    Cong {
        pos: usize,
        eq: FactId,
        def: FactId,
    },
    PredCong {
        pos: usize,
        eq: FactId,
        of: FactId,
    },
    EqDefL {
        of: FactId,
    },
    EqDefR {
        of: FactId,
    },
    SubtermDef {
        of: FactId,
        pos: usize,
    },
    PredArgDef {
        of: FactId,
        pos: usize,
    },
}

#[derive(Debug, Clone)]
struct Fact {
    atom: Atom,
    just: Just,
}

struct Search<'a> {
    theory: &'a Theory,
    context: Vec<Var>,
    hyps: Formula,
    bounds: Bounds,
    nodes: Vec<Term>,
    node_children: Vec<Vec<NodeId>>,
    node_sym: Vec<Option<SymId>>,
    by_sym: HashMap<SymId, Vec<NodeId>>,
    // derivation distance from the seed terms, min over a class (at roots)
    class_gen: Vec<u32>,
    cur_gen: u32,
    node_ids: HashMap<Term, NodeId>,
    uf: Vec<NodeId>,
    uf_size: Vec<usize>,
    // class member and parent lists, valid at class roots only
    members: Vec<Vec<NodeId>>,
    parents: Vec<Vec<NodeId>>,
    // congruence signature index plus worklists for incremental rebuild
    sig: HashMap<(SymId, Vec<NodeId>), NodeId>,
    pending: Vec<NodeId>,
    blocked: Vec<(NodeId, NodeId)>,
    pf_parent: Vec<Option<(NodeId, FactId)>>,
    defined: HashMap<NodeId, (NodeId, FactId)>,
    facts: Vec<Fact>,
    fact_ids: HashMap<Atom, FactId>,
    pred_facts: Vec<FactId>,
    pred_by_sym: HashMap<SymId, Vec<FactId>>,
    eq_memo: HashMap<(NodeId, NodeId), FactId>,
    applied: HashSet<(usize, Vec<Term>)>,
    // defined roots snapshot taken at the start of each axiom pass
    roots_snapshot: Vec<NodeId>,
    defined_version: u64,
    blocked_version: u64,
    gen_round: u32,
    steps: usize,
    // total premise matches enumerated; bounds wall time on unprovable goals
    work: usize,
    exhausted: bool,
}

impl<'a> Search<'a> {
    fn new(theory: &'a Theory, context: Vec<Var>, hyps: Formula, bounds: Bounds) -> Search<'a> {
        Search {
            theory,
            context,
            hyps,
            bounds,
            nodes: Vec::new(),
            node_children: Vec::new(),
            node_sym: Vec::new(),
            by_sym: HashMap::new(),
            class_gen: Vec::new(),
            cur_gen: 0,
            node_ids: HashMap::new(),
            uf: Vec::new(),
            uf_size: Vec::new(),
            members: Vec::new(),
            parents: Vec::new(),
            sig: HashMap::new(),
            pending: Vec::new(),
            blocked: Vec::new(),
            pf_parent: Vec::new(),
            defined: HashMap::new(),
            facts: Vec::new(),
            fact_ids: HashMap::new(),
            pred_facts: Vec::new(),
            pred_by_sym: HashMap::new(),
            eq_memo: HashMap::new(),
            applied: HashSet::new(),
            roots_snapshot: Vec::new(),
            defined_version: 0,
            blocked_version: u64::MAX,
            gen_round: 0,
            steps: 0,
            work: 0,
            exhausted: false,
        }
    }

    fn add_node(&mut self, t: &Term) -> NodeId {
        if let Some(&n) = self.node_ids.get(t) {
            return n;
        }
        let children = match t {
            Term::Var(_) => Vec::new(),
            Term::App { args, .. } => args.iter().map(|a| self.add_node(a)).collect(),
        };
        let n = self.nodes.len();
        self.nodes.push(t.clone());
        self.node_children.push(children.clone());
        let head = match t {
            Term::Var(_) => None,
            Term::App { sym, .. } => Some(sym.clone()),
        };
        if let Some(s) = &head {
            self.by_sym.entry(s.clone()).or_default().push(n);
        }
        self.node_sym.push(head);
        self.class_gen.push(self.cur_gen);
        self.node_ids.insert(t.clone(), n);
        self.uf.push(n);
        self.uf_size.push(1);
        self.members.push(vec![n]);
        self.parents.push(Vec::new());
        self.pf_parent.push(None);
        for c in children {
            let r = self.find(c);
            self.parents[r].push(n);
        }
        if matches!(self.nodes[n], Term::App { .. }) {
            self.pending.push(n);
        }
        n
    }

    fn find(&mut self, mut n: NodeId) -> NodeId {
        while self.uf[n] != n {
            self.uf[n] = self.uf[self.uf[n]];
            n = self.uf[n];
        }
        n
    }

    fn is_defined(&mut self, n: NodeId) -> bool {
        let r = self.find(n);
        self.defined.contains_key(&r)
    }

    /// Reroots the proof forest so `n` becomes the root of its tree.
    fn reroot(&mut self, n: NodeId) {
        let mut prev: Option<(NodeId, FactId)> = None;
        let mut cur = n;
        loop {
            let next = self.pf_parent[cur];
            self.pf_parent[cur] = prev;
            match next {
                Some((p, f)) => {
                    prev = Some((cur, f));
                    cur = p;
                }
                None => break,
            }
        }
    }

    /// Merges the classes of `a` and `b`; the edge carries the fact id of a
    /// materialized equality between exactly `term(a)` and `term(b)`.
    fn union(&mut self, a: NodeId, b: NodeId, fact: FactId) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return;
        }
        self.reroot(a);
        self.pf_parent[a] = Some((b, fact));
        let (big, small) = if self.uf_size[ra] >= self.uf_size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.uf[small] = big;
        self.uf_size[big] += self.uf_size[small];
        self.class_gen[big] = self.class_gen[big].min(self.class_gen[small]);
        let small_members = std::mem::take(&mut self.members[small]);
        self.members[big].extend(small_members);
        let small_parents = std::mem::take(&mut self.parents[small]);
        // signatures of the absorbed class's parents changed
        self.pending.extend(small_parents.iter().copied());
        self.parents[big].extend(small_parents);
        let da = self.defined.remove(&ra);
        let db = self.defined.remove(&rb);
        if da.is_some() != db.is_some() {
            // definedness spread to a previously undefined class
            self.defined_version += 1;
        }
        let keep = match (da, db) {
            (Some(x), Some(y)) => Some(if x.1 <= y.1 { x } else { y }),
            (x, y) => x.or(y),
        };
        if let Some(w) = keep {
            self.defined.insert(big, w);
        }
    }

    fn add_fact(&mut self, atom: Atom, just: Just) -> FactId {
        if let Some(&f) = self.fact_ids.get(&atom) {
            return f;
        }
        let fid = self.facts.len();
        self.facts.push(Fact {
            atom: atom.clone(),
            just,
        });
        self.fact_ids.insert(atom.clone(), fid);
        match &atom {
            Atom::Eq(t, s) => {
                let nt = self.add_node(&t.clone());
                let ns = self.add_node(&s.clone());
                if t == s {
                    let r = self.find(nt);
                    if !self.defined.contains_key(&r) {
                        self.defined.insert(r, (nt, fid));
                        self.defined_version += 1;
                    }
                    // subterms of a defined application are defined
                    if matches!(t, Term::App { .. }) {
                        let children = self.node_children[nt].clone();
                        for (i, c) in children.into_iter().enumerate() {
                            let ct = self.nodes[c].clone();
                            self.add_fact(
                                Atom::Eq(ct.clone(), ct),
                                Just::SubtermDef { of: fid, pos: i },
                            );
                        }
                    }
                } else {
                    if self.find(nt) != self.find(ns) {
                        self.union(nt, ns, fid);
                    }
                    let tt = t.clone();
                    let ss = s.clone();
                    self.add_fact(Atom::Eq(tt.clone(), tt), Just::EqDefL { of: fid });
                    self.add_fact(Atom::Eq(ss.clone(), ss), Just::EqDefR { of: fid });
                }
            }
            Atom::Pred { sym, args } => {
                self.pred_facts.push(fid);
                self.pred_by_sym.entry(sym.clone()).or_default().push(fid);
                for (i, a) in args.clone().into_iter().enumerate() {
                    self.add_node(&a);
                    self.add_fact(
                        Atom::Eq(a.clone(), a),
                        Just::PredArgDef { of: fid, pos: i },
                    );
                }
            }
        }
        fid
    }

    /// Fact proving `term(n) = term(n)`; the class of `n` must be defined.
    fn materialize_def(&mut self, n: NodeId) -> FactId {
        let r = self.find(n);
        let (w, wf) = *self.defined.get(&r).expect("class is defined");
        if w == n {
            return wf;
        }
        let eq = self.materialize_eq(n, w);
        let t = self.nodes[n].clone();
        self.add_fact(Atom::Eq(t.clone(), t), Just::EqDefL { of: eq })
    }

    /// Fact proving `term(a) = term(b)` for two nodes of one class.
    fn materialize_eq(&mut self, a: NodeId, b: NodeId) -> FactId {
        assert_ne!(a, b);
        if let Some(&f) = self.eq_memo.get(&(a, b)) {
            return f;
        }
        let path = self.explain_path(a, b);
        let mut acc: Option<FactId> = None;
        let mut from = a;
        for (to, edge) in path {
            let hop = self.orient_eq(edge, from, to);
            acc = Some(match acc {
                None => hop,
                Some(prev) => {
                    // prev: term(a) = term(from); hop: term(from) = term(to)
                    let atom = Atom::Eq(self.nodes[a].clone(), self.nodes[to].clone());
                    self.add_fact(atom, Just::Trans { ab: prev, bc: hop })
                }
            });
            from = to;
        }
        let fact = acc.expect("nonempty path");
        self.eq_memo.insert((a, b), fact);
        fact
    }

    /// Given an edge fact between nodes `u` and `v`, returns a fact whose
    /// atom is exactly `term(u) = term(v)`, flipping with the symmetry
    /// template if the stored orientation is the other way.
    fn orient_eq(&mut self, edge: FactId, u: NodeId, v: NodeId) -> FactId {
        let tu = self.nodes[u].clone();
        let tv = self.nodes[v].clone();
        let Atom::Eq(l, r) = self.facts[edge].atom.clone() else {
            panic!("edge fact is not an equality");
        };
        if l == tu && r == tv {
            return edge;
        }
        assert!(l == tv && r == tu, "edge endpoints mismatch");
        let def = self.add_fact(Atom::Eq(l.clone(), l), Just::EqDefL { of: edge });
        self.add_fact(Atom::Eq(tu, tv), Just::Sym { eq: edge, def })
    }

    /// Path from `a` to `b` in the proof forest as `(next_node, edge_fact)`
    /// hops.
    fn explain_path(&mut self, a: NodeId, b: NodeId) -> Vec<(NodeId, FactId)> {
        let chain = |s: &Search, mut n: NodeId| {
            let mut out = vec![n];
            while let Some((p, _)) = s.pf_parent[n] {
                out.push(p);
                n = p;
            }
            out
        };
        let ca = chain(self, a);
        let cb = chain(self, b);
        let set_b: HashMap<NodeId, usize> = cb.iter().copied().zip(0..).collect();
        let (meet_ia, meet_ib) = ca
            .iter()
            .enumerate()
            .find_map(|(i, n)| set_b.get(n).map(|&j| (i, j)))
            .expect("nodes share a tree");
        let mut hops = Vec::new();
        let mut cur = a;
        for &next in &ca[1..=meet_ia] {
            let (_, f) = self.pf_parent[cur].unwrap();
            hops.push((next, f));
            cur = next;
        }
        // walk b's chain down from the meet point
        for j in (0..meet_ib).rev() {
            let n = cb[j];
            let (_, f) = self.pf_parent[n].unwrap();
            hops.push((n, f));
        }
        hops
    }

    /// Incremental congruence: processes the pending worklist, merging
    /// application nodes whose children are classwise equal, gated on one
    /// side being defined. Gated-off pairs wait in `blocked` and are
    /// retried once a side becomes defined. Each merge is materialized
    /// into facts immediately.
    fn rebuild(&mut self) {
        if self.pending.is_empty() && self.blocked_version == self.defined_version {
            return;
        }
        loop {
            while let Some(n) = self.pending.pop() {
                let Term::App { sym, .. } = self.nodes[n].clone() else {
                    continue;
                };
                let key_children: Vec<NodeId> = self.node_children[n]
                    .clone()
                    .into_iter()
                    .map(|c| self.find(c))
                    .collect();
                match self.sig.entry((sym, key_children)) {
                    std::collections::hash_map::Entry::Occupied(e) => {
                        let m = *e.get();
                        if self.find(m) != self.find(n) {
                            self.try_merge(m, n);
                        }
                    }
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(n);
                    }
                }
            }
            let waiting = std::mem::take(&mut self.blocked);
            let mut progress = false;
            for (m, n) in waiting {
                if self.find(m) == self.find(n) {
                    continue;
                }
                if self.is_defined(m) || self.is_defined(n) {
                    self.try_merge(m, n);
                    progress = true;
                } else {
                    self.blocked.push((m, n));
                }
            }
            if !progress && self.pending.is_empty() {
                break;
            }
        }
        self.blocked_version = self.defined_version;
    }

    fn try_merge(&mut self, m: NodeId, n: NodeId) {
        let dm = self.is_defined(m);
        let dn = self.is_defined(n);
        if !dm && !dn {
            self.blocked.push((m, n));
            return;
        }
        let (base, other) = if dm { (m, n) } else { (n, m) };
        self.merge_cong(base, other);
    }

    /// Merges `other` into the defined class of `base` by chaining
    /// one-position congruence facts.
    fn merge_cong(&mut self, base: NodeId, other: NodeId) {
        let Term::App { sym, sort, .. } = self.nodes[base].clone() else {
            panic!("congruence on a variable");
        };
        let bc = self.node_children[base].clone();
        let oc = self.node_children[other].clone();
        let mut cur_args: Vec<Term> = bc.iter().map(|&c| self.nodes[c].clone()).collect();
        let mut cur = self.nodes[base].clone();
        let mut def = self.materialize_def(base);
        let mut acc: Option<FactId> = None;
        for i in 0..bc.len() {
            if bc[i] == oc[i] {
                continue;
            }
            let eq = self.materialize_eq(bc[i], oc[i]);
            cur_args[i] = self.nodes[oc[i]].clone();
            let next = Term::App {
                sym: sym.clone(),
                args: cur_args.clone(),
                sort: sort.clone(),
            };
            let step = self.add_fact(
                Atom::Eq(next.clone(), cur.clone()),
                Just::Cong { pos: i, eq, def },
            );
            def = self.add_fact(Atom::Eq(next.clone(), next.clone()), Just::EqDefL { of: step });
            acc = Some(match acc {
                None => step,
                Some(prev) => {
                    // step: next = cur ; prev: cur = base
                    let atom = Atom::Eq(next.clone(), self.nodes[base].clone());
                    self.add_fact(atom, Just::Trans { ab: step, bc: prev })
                }
            });
            cur = next;
        }
        let total = acc.expect("congruent nodes differ in some child");
        // total proves term(other) = term(base); add_fact already unioned
        // the endpoints through the intermediate steps, but make sure.
        let _ = total;
        assert_eq!(self.find(base), self.find(other));
    }

    fn process_hyps(&mut self) {
        let ctx = self.context.clone();
        for v in ctx {
            let t = Term::Var(v.clone());
            self.add_fact(mk_defined(&t), Just::VarDef { var: v });
        }
        let atoms = self.hyps.0.clone();
        for (i, atom) in atoms.into_iter().enumerate() {
            self.add_fact(atom, Just::Hyp { index: i });
        }
    }

    fn seed_terms(&mut self, goal: &Formula) {
        for atom in &goal.0 {
            match atom {
                Atom::Eq(l, r) => {
                    self.add_node(&l.clone());
                    self.add_node(&r.clone());
                }
                Atom::Pred { args, .. } => {
                    for a in args {
                        self.add_node(&a.clone());
                    }
                }
            }
        }
    }

    fn class_members(&mut self, root: NodeId) -> Vec<NodeId> {
        self.members[root].clone()
    }

    /// Smallest node id in the class: the canonical representative bound by
    /// pattern variables.
    fn rep(&self, root: NodeId) -> NodeId {
        *self.members[root].iter().min().expect("nonempty class")
    }

    fn defined_roots(&mut self) -> Vec<NodeId> {
        let mut roots: Vec<NodeId> = (0..self.nodes.len())
            .filter(|&n| self.find(n) == n && self.defined.contains_key(&n))
            .collect();
        roots.sort();
        roots
    }

    /// Matches `pattern` against the class rooted at `root`, extending
    /// `theta`. Variables bind the class representative, so each
    /// instantiation is canonical per class tuple.
    fn match_class(
        &mut self,
        pattern: &Term,
        root: NodeId,
        theta: &BTreeMap<Var, NodeId>,
        out: &mut Vec<BTreeMap<Var, NodeId>>,
    ) {
        match pattern {
            Term::Var(x) => {
                let rep = self.rep(root);
                if self.nodes[rep].sort() != &x.sort {
                    return;
                }
                match theta.get(x) {
                    Some(&bound) => {
                        if self.find(bound) == root {
                            out.push(theta.clone());
                        }
                    }
                    None => {
                        let mut t2 = theta.clone();
                        t2.insert(x.clone(), rep);
                        out.push(t2);
                    }
                }
            }
            Term::App { sym, args, .. } => {
                for m in self.class_members(root) {
                    if self.node_sym[m].as_ref() != Some(sym) {
                        continue;
                    }
                    let children = self.node_children[m].clone();
                    let mut partial = vec![theta.clone()];
                    for (p, c) in args.iter().zip(children) {
                        let cr = self.find(c);
                        let mut next = Vec::new();
                        for th in &partial {
                            self.match_class(p, cr, th, &mut next);
                        }
                        partial = next;
                        if partial.is_empty() {
                            break;
                        }
                    }
                    out.extend(partial);
                }
            }
        }
    }

    /// Matches `pattern` against every defined class, using the head-symbol
    /// index for application patterns; yields the matched class root with
    /// each substitution.
    fn match_pattern(
        &mut self,
        pattern: &Term,
        theta: &BTreeMap<Var, NodeId>,
        out: &mut Vec<(NodeId, BTreeMap<Var, NodeId>)>,
    ) {
        match pattern {
            Term::Var(x) => match theta.get(x) {
                Some(&bound) => {
                    let root = self.find(bound);
                    if self.defined.contains_key(&root) {
                        out.push((root, theta.clone()));
                    }
                }
                None => {
                    for root in self.roots_snapshot.clone() {
                        let root = self.find(root);
                        if !self.defined.contains_key(&root) {
                            continue;
                        }
                        let rep = self.rep(root);
                        if self.nodes[rep].sort() != &x.sort {
                            continue;
                        }
                        let mut t2 = theta.clone();
                        t2.insert(x.clone(), rep);
                        out.push((root, t2));
                    }
                }
            },
            Term::App { sym, args, .. } => {
                for m in self.by_sym.get(sym).cloned().unwrap_or_default() {
                    let root = self.find(m);
                    if !self.defined.contains_key(&root) {
                        continue;
                    }
                    let children = self.node_children[m].clone();
                    let mut partial = vec![theta.clone()];
                    for (p, c) in args.iter().zip(children) {
                        let cr = self.find(c);
                        let mut next = Vec::new();
                        for th in &partial {
                            self.match_class(p, cr, th, &mut next);
                        }
                        partial = next;
                        if partial.is_empty() {
                            break;
                        }
                    }
                    out.extend(partial.into_iter().map(|th| (root, th)));
                }
            }
        }
    }

    /// Rough upper bound on the number of top-level candidates an atom's
    /// pattern can match, used to order premise joins.
    fn candidate_estimate(&self, atom: &Atom) -> usize {
        let head_count = |t: &Term| match t {
            Term::Var(_) => usize::MAX,
            Term::App { sym, .. } => self.by_sym.get(sym).map_or(0, |v| v.len()),
        };
        match atom {
            Atom::Eq(t, s) => head_count(t).min(head_count(s)),
            Atom::Pred { sym, .. } => self.pred_by_sym.get(sym).map_or(0, |v| v.len()),
        }
    }

    fn match_atom(
        &mut self,
        atom: &Atom,
        theta: &BTreeMap<Var, NodeId>,
        out: &mut Vec<BTreeMap<Var, NodeId>>,
    ) {
        match atom {
            Atom::Eq(t, s) if t == s => {
                let mut found = Vec::new();
                self.match_pattern(t, theta, &mut found);
                out.extend(found.into_iter().map(|(_, th)| th));
            }
            Atom::Eq(t, s) => {
                // index on the application side when only one side has one
                let (first, second) =
                    if matches!(t, Term::Var(_)) && matches!(s, Term::App { .. }) {
                        (s, t)
                    } else {
                        (t, s)
                    };
                let mut found = Vec::new();
                self.match_pattern(first, theta, &mut found);
                for (root, th) in found {
                    self.match_class(second, root, &th, out);
                }
            }
            Atom::Pred { sym, args } => {
                for fid in self.pred_by_sym.get(sym).cloned().unwrap_or_default() {
                    let Atom::Pred { args: fargs, .. } = self.facts[fid].atom.clone() else {
                        continue;
                    };
                    let mut partial = vec![theta.clone()];
                    for (p, fa) in args.iter().zip(&fargs) {
                        let node = self.add_node(fa);
                        let root = self.find(node);
                        let mut next = Vec::new();
                        for th in &partial {
                            self.match_class(p, root, th, &mut next);
                        }
                        partial = next;
                        if partial.is_empty() {
                            break;
                        }
                    }
                    out.extend(partial);
                }
            }
        }
    }

    /// One round of axiom application. Returns true if any new fact
    /// appeared.
    /// Derivation distance of an instance: one past the furthest class it
    /// binds.
    fn instance_gen(&mut self, theta: &BTreeMap<Var, NodeId>) -> u32 {
        let mut g = 0;
        for &n in theta.values() {
            let r = self.find(n);
            g = g.max(self.class_gen[r]);
        }
        g + 1
    }

    /// True when every term of the instantiated conclusion is already
    /// hashconsed, i.e. applying the instance creates no new nodes.
    fn conclusion_known(&self, concl: &Formula) -> bool {
        let known = |t: &Term| self.node_ids.contains_key(t);
        concl.0.iter().all(|atom| match atom {
            Atom::Eq(l, r) => known(l) && known(r),
            Atom::Pred { args, .. } => args.iter().all(known),
        })
    }

    /// One round of axiom application. In non-generative mode only
    /// instances whose conclusions mention already-present terms are
    /// applied; generative rounds admit the rest, shallowest conclusions
    /// first and capped per round, throttling the growth of the term
    /// universe. Returns true if any new fact appeared.
    fn axiom_pass(&mut self, generative: bool) -> bool {
        let before = self.facts.len();
        let mut deferred: Vec<(u32, usize, usize, BTreeMap<Var, NodeId>)> = Vec::new();
        self.roots_snapshot = self.defined_roots();
        let theory = self.theory;
        for ai in 0..theory.axioms.len() {
            if self.steps >= self.bounds.steps {
                self.exhausted = true;
                return self.facts.len() > before;
            }
            // matching itself costs one step per axiom per pass
            self.steps += 1;
            let axiom = &theory.axioms[ai];
            if axiom
                .valuation
                .iter()
                .any(|(_, v)| *v > self.bounds.level_cutoff)
            {
                continue;
            }
            let budget = (self.bounds.steps - self.steps).saturating_add(1);
            let mut thetas = vec![BTreeMap::new()];
            let mut remaining: Vec<&Atom> = axiom.sequent.premise.0.iter().collect();
            while !remaining.is_empty() && !thetas.is_empty() {
                // greedy join order: most-constrained atom first
                let bound: BTreeSet<&Var> =
                    thetas.first().map(|t| t.keys().collect()).unwrap_or_default();
                let pick = remaining
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, a)| {
                        let free = a
                            .free_vars()
                            .iter()
                            .filter(|v| !bound.contains(v))
                            .count();
                        (free, self.candidate_estimate(a))
                    })
                    .map(|(i, _)| i)
                    .expect("nonempty remaining");
                let atom = remaining.remove(pick);
                let mut next = Vec::new();
                for th in &thetas {
                    self.match_atom(atom, th, &mut next);
                    if next.len() > budget {
                        break;
                    }
                }
                next.truncate(budget);
                thetas = next;
            }
            // enumerate any context variables not bound by the premise;
            // low node ids (the goal's own terms) come first, so a modest
            // cap keeps relevant instances while damping the flood
            let enum_budget = budget.min(2048);
            for v in &axiom.sequent.context {
                let mut next = Vec::new();
                'outer: for th in &thetas {
                    if th.contains_key(v) {
                        next.push(th.clone());
                        continue;
                    }
                    for root in self.roots_snapshot.clone() {
                        let root = self.find(root);
                        if !self.defined.contains_key(&root) {
                            continue;
                        }
                        let rep = self.rep(root);
                        if self.nodes[rep].sort() != &v.sort {
                            continue;
                        }
                        let mut t2 = th.clone();
                        t2.insert(v.clone(), rep);
                        next.push(t2);
                        if next.len() > enum_budget {
                            break 'outer;
                        }
                    }
                }
                next.truncate(enum_budget);
                self.work += next.len();
                thetas = next;
            }
            let thetas: BTreeSet<BTreeMap<Var, NodeId>> = thetas.into_iter().collect();
            self.work += thetas.len();
            for theta in thetas {
                if self.steps >= self.bounds.steps {
                    self.exhausted = true;
                    return self.facts.len() > before;
                }
                if generative {
                    let subst: BTreeMap<Var, Term> = theta
                        .iter()
                        .map(|(v, &n)| (v.clone(), self.nodes[n].clone()))
                        .collect();
                    let key: Vec<Term> = axiom
                        .sequent
                        .context
                        .iter()
                        .map(|v| subst[v].clone())
                        .collect();
                    if self.applied.contains(&(ai, key)) {
                        continue;
                    }
                    let concl = axiom.sequent.conclusion.substitute_many(&subst);
                    let depth = concl
                        .0
                        .iter()
                        .map(|a| match a {
                            Atom::Eq(l, r) => l.depth().max(r.depth()),
                            Atom::Pred { args, .. } => {
                                args.iter().map(|t| t.depth()).max().unwrap_or(0)
                            }
                        })
                        .max()
                        .unwrap_or(0);
                    let gen = self.instance_gen(&theta);
                    deferred.push((gen, depth, ai, theta));
                } else {
                    self.apply_instance(ai, axiom, &theta, false);
                }
            }
        }
        if generative {
            let cap = GENERATIVE_BASE.saturating_mul(1 << self.gen_round.min(32));
            self.gen_round += 1;
            deferred.sort_by_key(|(g, d, _, _)| (*g, *d));
            for (_, _, ai, theta) in deferred.into_iter().take(cap) {
                if self.steps >= self.bounds.steps {
                    self.exhausted = true;
                    break;
                }
                let axiom = &theory.axioms[ai];
                self.apply_instance(ai, axiom, &theta, true);
            }
        }
        self.facts.len() > before
    }

    fn apply_instance(
        &mut self,
        ai: usize,
        axiom: &crate::theory::Axiom,
        theta: &BTreeMap<Var, NodeId>,
        generative: bool,
    ) {
        let subst: BTreeMap<Var, Term> = theta
            .iter()
            .map(|(v, &n)| (v.clone(), self.nodes[n].clone()))
            .collect();
        let key: Vec<Term> = axiom
            .sequent
            .context
            .iter()
            .map(|v| subst[v].clone())
            .collect();
        if self.applied.contains(&(ai, key.clone())) {
            return;
        }
        if !generative && !self.conclusion_known(&axiom.sequent.conclusion.substitute_many(&subst))
        {
            return;
        }
        self.steps += 1;
        self.applied.insert((ai, key));
        self.cur_gen = self.instance_gen(theta);
        // instantiate and verify the premise modulo the e-graph
        let prem = axiom.sequent.premise.substitute_many(&subst);
        for atom in &prem.0 {
            match atom {
                Atom::Eq(l, r) => {
                    let nl = self.add_node(&l.clone());
                    let nr = self.add_node(&r.clone());
                    let _ = (nl, nr);
                }
                Atom::Pred { args, .. } => {
                    for a in args {
                        self.add_node(&a.clone());
                    }
                }
            }
        }
        self.rebuild();
        let mut premise_facts = Vec::new();
        for atom in &prem.0 {
            match self.verify_and_materialize(atom) {
                Some(f) => premise_facts.push(f),
                None => return,
            }
        }
        let mut defs = Vec::new();
        for v in &axiom.sequent.context {
            let n = theta[v];
            if !self.is_defined(n) {
                return;
            }
            defs.push(self.materialize_def(n));
        }
        let concl = axiom.sequent.conclusion.substitute_many(&subst);
        for atom in &concl.0 {
            let too_deep = match atom {
                Atom::Eq(l, r) => {
                    l.depth() > self.bounds.term_depth || r.depth() > self.bounds.term_depth
                }
                Atom::Pred { args, .. } => {
                    args.iter().any(|a| a.depth() > self.bounds.term_depth)
                }
            };
            if too_deep {
                return;
            }
        }
        let just_subst: Vec<(String, Term)> = axiom
            .sequent
            .context
            .iter()
            .map(|v| (v.name.clone(), subst[v].clone()))
            .collect();
        for (k, atom) in concl.0.iter().enumerate() {
            self.add_fact(
                atom.clone(),
                Just::Axiom {
                    name: axiom.name.clone(),
                    valuation: axiom.valuation.clone(),
                    subst: just_subst.clone(),
                    premises: premise_facts.clone(),
                    defs: defs.clone(),
                    concl_index: k,
                },
            );
        }
    }

    /// Checks that a ground atom holds in the current state and produces a
    /// fact with exactly that atom.
    fn verify_and_materialize(&mut self, atom: &Atom) -> Option<FactId> {
        if let Some(&f) = self.fact_ids.get(atom) {
            return Some(f);
        }
        match atom {
            Atom::Eq(l, r) => {
                let nl = self.add_node(&l.clone());
                let nr = self.add_node(&r.clone());
                if self.find(nl) != self.find(nr) || !self.is_defined(nl) {
                    return None;
                }
                if nl == nr {
                    Some(self.materialize_def(nl))
                } else {
                    Some(self.materialize_eq(nl, nr))
                }
            }
            Atom::Pred { sym, args } => {
                let arg_nodes: Vec<NodeId> =
                    args.iter().map(|a| self.add_node(&a.clone())).collect();
                for fid in self.pred_by_sym.get(sym).cloned().unwrap_or_default() {
                    let Atom::Pred { args: fargs, .. } = self.facts[fid].atom.clone() else {
                        continue;
                    };
                    if fargs.len() != arg_nodes.len() {
                        continue;
                    }
                    let fact_nodes: Vec<NodeId> =
                        fargs.iter().map(|a| self.add_node(&a.clone())).collect();
                    let all_eq = arg_nodes
                        .iter()
                        .zip(&fact_nodes)
                        .all(|(&a, &b)| self.find(a) == self.find(b));
                    if !all_eq {
                        continue;
                    }
                    // chain predicate congruence position by position
                    let mut cur = fid;
                    let mut cur_args = fargs.clone();
                    for i in 0..arg_nodes.len() {
                        if cur_args[i] == args[i] {
                            continue;
                        }
                        let na = self.add_node(&cur_args[i].clone());
                        let nb = arg_nodes[i];
                        let eq = self.materialize_eq(na, nb);
                        cur_args[i] = args[i].clone();
                        cur = self.add_fact(
                            Atom::Pred {
                                sym: sym.clone(),
                                args: cur_args.clone(),
                            },
                            Just::PredCong {
                                pos: i,
                                eq,
                                of: cur,
                            },
                        );
                    }
                    return Some(cur);
                }
                None
            }
        }
    }

    fn run(&mut self, goal: &Formula) -> Option<Vec<FactId>> {
        self.process_hyps();
        self.seed_terms(goal);
        self.rebuild();
        loop {
            if let Some(facts) = self.try_goal(goal) {
                return Some(facts);
            }
            if self.steps >= self.bounds.steps
                || self.work >= self.bounds.steps.saturating_mul(100)
                || self.nodes.len() >= 100_000 + self.bounds.steps.saturating_mul(4)
            {
                self.exhausted = true;
                return None;
            }
            // close over existing terms before growing the term universe
            let progressed = self.axiom_pass(false);
            self.rebuild();
            if std::env::var_os("TTK_TRACE").is_some() {
                eprintln!(
                    "pass gen_round={} steps={} work={} facts={} nodes={} progressed={}",
                    self.gen_round,
                    self.steps,
                    self.work,
                    self.facts.len(),
                    self.nodes.len(),
                    progressed
                );
            }
            if progressed {
                continue;
            }
            let grew = self.axiom_pass(true);
            self.rebuild();
            if !grew {
                return self.try_goal(goal);
            }
        }
    }

    fn try_goal(&mut self, goal: &Formula) -> Option<Vec<FactId>> {
        let mut out = Vec::new();
        for atom in &goal.0 {
            out.push(self.verify_and_materialize(&atom.clone())?);
        }
        Some(out)
    }

    fn stats(&self) -> SearchStats {
        SearchStats {
            steps: self.steps,
            facts: self.facts.len(),
            nodes: self.nodes.len(),
            exhausted: self.exhausted,
        }
    }
}

/// Rebuilds checkable derivations from fact justifications.
struct Reconstructor<'a> {
    theory: &'a Theory,
    context: Vec<Var>,
    hyps: Formula,
    facts: &'a [Fact],
    memo: HashMap<FactId, Derivation>,
    fresh: usize,
}

impl<'a> Reconstructor<'a> {
    fn fresh_var(&mut self, sort: &Sort) -> Var {
        let v = Var::new(format!("~a{}", self.fresh), sort.clone());
        self.fresh += 1;
        v
    }

    fn expect<T, E: std::fmt::Debug>(r: Result<T, E>) -> T {
        r.expect("reconstruction builds valid rule instances")
    }

    /// Weakens both derivations to the union of their contexts.
    fn align(&self, d1: Derivation, d2: Derivation) -> (Derivation, Derivation) {
        let mut union: Vec<Var> = d1.conclusion.context.clone();
        union.extend(d2.conclusion.context.iter().cloned());
        union.sort();
        union.dedup();
        let widen = |d: Derivation| {
            if d.conclusion.context == union {
                d
            } else {
                Self::expect(Derivation::weaken(d, union.clone()))
            }
        };
        (widen(d1), widen(d2))
    }

    /// From `d : φ ⊢ ψ` builds `φ ⊢ ψ_k`.
    fn project(&self, d: Derivation, k: usize) -> Derivation {
        let psi = d.conclusion.conclusion.clone();
        if psi.0.len() == 1 && k == 0 {
            return d;
        }
        let ctx = d.conclusion.context.clone();
        let tail = Self::expect(Derivation::b5(ctx.clone(), psi.clone(), k));
        let suffix = tail.conclusion.conclusion.clone();
        let head = Self::expect(Derivation::b4(ctx, suffix, 1));
        let chain = Self::expect(Derivation::b2(tail, head));
        Self::expect(Derivation::b2(d, chain))
    }

    /// φ ⊢ ⋀(conclusions of parts), assuming every part has premise φ.
    fn combine(&self, parts: Vec<Derivation>) -> Derivation {
        let mut iter = parts.into_iter();
        let mut acc = iter.next().expect("at least one part");
        for next in iter {
            let (a, b) = self.align(acc, next);
            acc = Self::expect(Derivation::b6(a, b));
        }
        acc
    }

    /// Applies ground substitutions to a template sequent derivation and
    /// discharges the resulting premise with previously derived facts.
    fn close(
        &mut self,
        template: Derivation,
        subst: Vec<(Var, Term)>,
        premises: &[FactId],
    ) -> Derivation {
        let mut d = template;
        for (x, t) in subst {
            d = Self::expect(Derivation::a3(d, x, t, Vec::new()));
        }
        let prem_atoms = d.conclusion.premise.0.clone();
        assert_eq!(
            prem_atoms.len(),
            premises.len(),
            "template premise and fact list must align"
        );
        let feeder = if premises.is_empty() {
            Self::expect(Derivation::b3(self.context.clone(), self.hyps.clone()))
        } else {
            let mut parts = Vec::new();
            for (&fid, atom) in premises.iter().zip(&prem_atoms) {
                let part = self.derive(fid);
                assert_eq!(
                    part.conclusion.conclusion.0.as_slice(),
                    std::slice::from_ref(atom),
                    "fact atom must match the template premise"
                );
                parts.push(part);
            }
            self.combine(parts)
        };
        let (feeder, d) = self.align(feeder, d);
        Self::expect(Derivation::b2(feeder, d))
    }

    /// Template `ψ ⊢ x↓` for any formula ψ with x among its context.
    fn defined_template(&mut self, x: &Var, psi: Formula) -> Derivation {
        let mut ctx: Vec<Var> = psi.free_vars().into_iter().collect();
        ctx.push(x.clone());
        ctx.sort();
        ctx.dedup();
        let truth_side = Self::expect(Derivation::b3(ctx.clone(), psi));
        let a1 = Self::expect(Derivation::a1(x.clone()));
        let widened = Self::expect(Derivation::weaken(a1, ctx));
        Self::expect(Derivation::b2(truth_side, widened))
    }

    fn derive(&mut self, fid: FactId) -> Derivation {
        if let Some(d) = self.memo.get(&fid) {
            return d.clone();
        }
        let fact = self.facts[fid].clone();
        let d = self.derive_uncached(&fact);
        debug_assert_eq!(
            d.conclusion.conclusion.0.as_slice(),
            std::slice::from_ref(&fact.atom)
        );
        self.memo.insert(fid, d.clone());
        d
    }

    fn derive_uncached(&mut self, fact: &Fact) -> Derivation {
        match fact.just.clone() {
            Just::Hyp { index } => {
                let base = Self::expect(Derivation::b1(self.context.clone(), self.hyps.clone()));
                self.project(base, index)
            }
            Just::VarDef { var } => {
                let truth = Self::expect(Derivation::b3(self.context.clone(), self.hyps.clone()));
                let a1 = Self::expect(Derivation::a1(var));
                let widened = Self::expect(Derivation::weaken(a1, self.context.clone()));
                let (truth, widened) = self.align(truth, widened);
                Self::expect(Derivation::b2(truth, widened))
            }
            Just::Axiom {
                name,
                valuation,
                subst,
                premises,
                defs,
                concl_index,
            } => {
                let axiom = self
                    .theory
                    .find_axiom(&name, &valuation)
                    .expect("axiom instance exists")
                    .clone();
                let mut renaming = BTreeMap::new();
                let mut fresh_of = BTreeMap::new();
                for v in &axiom.sequent.context {
                    let f = self.fresh_var(&v.sort);
                    renaming.insert(v.name.clone(), f.name.clone());
                    fresh_of.insert(v.name.clone(), f);
                }
                let leaf = Derivation::axiom(self.theory, &name, valuation, renaming)
                    .expect("axiom leaf builds");
                let alpha = leaf.conclusion.premise.clone();
                let ctx = leaf.conclusion.context.clone();
                let mut pi = alpha.clone();
                for v in &axiom.sequent.context {
                    pi.0.push(mk_defined(&Term::Var(fresh_of[&v.name].clone())));
                }
                let strengthen = Self::expect(Derivation::b4(ctx, pi, alpha.0.len()));
                let body = Self::expect(Derivation::b2(strengthen, leaf));
                let subst_map: BTreeMap<String, Term> = subst.into_iter().collect();
                let ground: Vec<(Var, Term)> = axiom
                    .sequent
                    .context
                    .iter()
                    .map(|v| (fresh_of[&v.name].clone(), subst_map[&v.name].clone()))
                    .collect();
                let mut all_premises = premises;
                all_premises.extend(defs);
                let full = self.close(body, ground, &all_premises);
                self.project(full, concl_index)
            }
            Just::Sym { eq, def } => {
                let Atom::Eq(t, s) = self.facts[eq].atom.clone() else {
                    panic!("sym of a predicate fact");
                };
                let sort = t.sort().clone();
                let x = self.fresh_var(&sort);
                let y = self.fresh_var(&sort);
                let z = self.fresh_var(&sort);
                let phi = Formula::atom(Self::expect(Atom::eq(
                    Term::Var(x.clone()),
                    Term::Var(z.clone()),
                )));
                let base = Self::expect(Derivation::a2(
                    vec![z.clone()],
                    x.clone(),
                    y.clone(),
                    phi,
                ));
                self.close(
                    base,
                    vec![(z, Term::Var(x.clone())), (x, t), (y, s)],
                    &[eq, def],
                )
            }
            Just::Trans { ab, bc } => {
                let Atom::Eq(t, u) = self.facts[ab].atom.clone() else {
                    panic!("trans of a predicate fact");
                };
                let Atom::Eq(_, s) = self.facts[bc].atom.clone() else {
                    panic!("trans of a predicate fact");
                };
                let sort = t.sort().clone();
                let p = self.fresh_var(&sort);
                let q = self.fresh_var(&sort);
                let r = self.fresh_var(&sort);
                let phi = Formula::atom(Self::expect(Atom::eq(
                    Term::Var(r.clone()),
                    Term::Var(p.clone()),
                )));
                let base = Self::expect(Derivation::a2(
                    vec![r.clone()],
                    p.clone(),
                    q.clone(),
                    phi,
                ));
                self.close(base, vec![(p, u), (q, s), (r, t)], &[bc, ab])
            }
            Just::Cong { pos, eq, def } => {
                let Atom::Eq(orig, _) = self.facts[def].atom.clone() else {
                    panic!("cong def is not an equality");
                };
                let Term::App { sym, args, sort } = orig else {
                    panic!("cong over a variable");
                };
                let Atom::Eq(a_i, b_i) = self.facts[eq].atom.clone() else {
                    panic!("cong eq is not an equality");
                };
                let x = self.fresh_var(a_i.sort());
                let y = self.fresh_var(a_i.sort());
                let z = self.fresh_var(&sort);
                let mut ws = Vec::new();
                let mut pat_args = Vec::new();
                for (j, a) in args.iter().enumerate() {
                    if j == pos {
                        pat_args.push(Term::Var(x.clone()));
                    } else {
                        let w = self.fresh_var(a.sort());
                        pat_args.push(Term::Var(w.clone()));
                        ws.push((w, a.clone()));
                    }
                }
                let pat = Term::App {
                    sym,
                    args: pat_args,
                    sort,
                };
                let phi = Formula::atom(Self::expect(Atom::eq(
                    pat.clone(),
                    Term::Var(z.clone()),
                )));
                let mut ctx = vec![z.clone()];
                ctx.extend(ws.iter().map(|(w, _)| w.clone()));
                let base =
                    Self::expect(Derivation::a2(ctx, x.clone(), y.clone(), phi));
                let mut subst = vec![(z, pat), (x, a_i), (y, b_i)];
                subst.extend(ws);
                self.close(base, subst, &[eq, def])
            }
            Just::PredCong { pos, eq, of } => {
                let Atom::Pred { sym, args } = self.facts[of].atom.clone() else {
                    panic!("pred-cong of an equality fact");
                };
                let Atom::Eq(s_i, t_i) = self.facts[eq].atom.clone() else {
                    panic!("pred-cong eq is not an equality");
                };
                let x = self.fresh_var(s_i.sort());
                let y = self.fresh_var(s_i.sort());
                let mut ws = Vec::new();
                let mut pat_args = Vec::new();
                for (j, a) in args.iter().enumerate() {
                    if j == pos {
                        pat_args.push(Term::Var(x.clone()));
                    } else {
                        let w = self.fresh_var(a.sort());
                        pat_args.push(Term::Var(w.clone()));
                        ws.push((w, a.clone()));
                    }
                }
                let phi = Formula::atom(Atom::Pred {
                    sym,
                    args: pat_args,
                });
                let ctx = ws.iter().map(|(w, _)| w.clone()).collect();
                let base =
                    Self::expect(Derivation::a2(ctx, x.clone(), y.clone(), phi));
                let mut subst = vec![(x, s_i), (y, t_i)];
                subst.extend(ws);
                self.close(base, subst, &[eq, of])
            }
            Just::EqDefL { of } => {
                let Atom::Eq(t, s) = self.facts[of].atom.clone() else {
                    panic!("eq-def of a predicate fact");
                };
                let x = self.fresh_var(t.sort());
                let psi = Formula::atom(Self::expect(Atom::eq(Term::Var(x.clone()), s)));
                let base = self.defined_template(&x, psi);
                self.close(base, vec![(x, t)], &[of])
            }
            Just::EqDefR { of } => {
                let Atom::Eq(t, s) = self.facts[of].atom.clone() else {
                    panic!("eq-def of a predicate fact");
                };
                let x = self.fresh_var(s.sort());
                let psi = Formula::atom(Self::expect(Atom::eq(t, Term::Var(x.clone()))));
                let base = self.defined_template(&x, psi);
                self.close(base, vec![(x, s)], &[of])
            }
            Just::SubtermDef { of, pos } => {
                let Atom::Eq(parent, _) = self.facts[of].atom.clone() else {
                    panic!("subterm-def of a predicate fact");
                };
                let Term::App { sym, args, sort } = parent else {
                    panic!("subterm-def over a variable");
                };
                let x = self.fresh_var(args[pos].sort());
                let mut pat_args = args.clone();
                pat_args[pos] = Term::Var(x.clone());
                let pat = Term::App {
                    sym,
                    args: pat_args,
                    sort,
                };
                let psi = Formula::atom(mk_defined(&pat));
                let base = self.defined_template(&x, psi);
                self.close(base, vec![(x, args[pos].clone())], &[of])
            }
            Just::PredArgDef { of, pos } => {
                let Atom::Pred { sym, args } = self.facts[of].atom.clone() else {
                    panic!("pred-arg-def of an equality fact");
                };
                let x = self.fresh_var(args[pos].sort());
                let mut pat_args = args.clone();
                pat_args[pos] = Term::Var(x.clone());
                let psi = Formula::atom(Atom::Pred {
                    sym,
                    args: pat_args,
                });
                let base = self.defined_template(&x, psi);
                self.close(base, vec![(x, args[pos].clone())], &[of])
            }
        }
    }
}

/// Bounded forward-chaining proof search for `hyps ⊢_context goal`.
pub fn saturate(
    theory: &Theory,
    context: &[Var],
    hyps: &Formula,
    goal: &Formula,
    bounds: &Bounds,
) -> ProofOutcome {
    let mut ctx = context.to_vec();
    ctx.sort();
    ctx.dedup();
    let mut search = Search::new(theory, ctx.clone(), hyps.clone(), *bounds);
    if goal.is_truth() {
        let d = Derivation::b3(ctx, hyps.clone()).expect("b3 builds");
        return ProofOutcome::Proven(Box::new(d));
    }
    match search.run(goal) {
        None => ProofOutcome::Unknown(search.stats()),
        Some(goal_facts) => {
            let mut rec = Reconstructor {
                theory,
                context: ctx,
                hyps: hyps.clone(),
                facts: &search.facts.clone(),
                memo: HashMap::new(),
                fresh: 0,
            };
            let parts: Vec<Derivation> =
                goal_facts.iter().map(|&f| rec.derive(f)).collect();
            let combined = rec.combine(parts);
            ProofOutcome::Proven(Box::new(combined))
        }
    }
}

pub fn prove_sequent(theory: &Theory, seq: &Sequent, bounds: &Bounds) -> ProofOutcome {
    saturate(theory, &seq.context, &seq.premise, &seq.conclusion, bounds)
}

/// Checks whether a proven derivation establishes the goal: premise and
/// conclusion must match exactly, and the derivation's context may extend
/// the goal's with auxiliary variables.
pub fn derivation_establishes(d: &Derivation, goal: &Sequent) -> bool {
    d.conclusion.premise == goal.premise
        && d.conclusion.conclusion == goal.conclusion
        && goal.context.iter().all(|v| d.conclusion.has_var(v))
}

/// The two sequents expressing `t|φ ≅ s|ψ`: each side's definedness entails
/// the other's restriction and the equality.
pub fn iso_sequents(
    a: &RestrictedTerm,
    b: &RestrictedTerm,
) -> Result<(Sequent, Sequent), crate::syntax::SyntaxError> {
    let mut ctx: Vec<Var> = a.free_vars().into_iter().collect();
    ctx.extend(b.free_vars());
    ctx.sort();
    ctx.dedup();
    let eq = Atom::eq(a.term.clone(), b.term.clone())?;
    let forward = Sequent::new(
        ctx.clone(),
        a.definedness(),
        b.restriction.clone().and(Formula::atom(eq.clone())),
    )?;
    let backward = Sequent::new(
        ctx,
        b.definedness(),
        a.restriction.clone().and(Formula::atom(eq)),
    )?;
    Ok((forward, backward))
}

/// The two sequents expressing `φ ⊣⊢ ψ`.
pub fn interderivable_sequents(
    a: &Formula,
    b: &Formula,
) -> Result<(Sequent, Sequent), crate::syntax::SyntaxError> {
    let mut ctx: Vec<Var> = a.free_vars().into_iter().collect();
    ctx.extend(b.free_vars());
    ctx.sort();
    ctx.dedup();
    let forward = Sequent::new(ctx.clone(), a.clone(), b.clone())?;
    let backward = Sequent::new(ctx, b.clone(), a.clone())?;
    Ok((forward, backward))
}

/// `t|φ ≅ s|ψ`, one outcome per direction.
pub fn check_equivalence_terms(
    theory: &Theory,
    a: &RestrictedTerm,
    b: &RestrictedTerm,
    bounds: &Bounds,
) -> Result<(ProofOutcome, ProofOutcome), crate::syntax::SyntaxError> {
    if a.sort() != b.sort() {
        return Err(crate::syntax::SyntaxError::SortMismatch {
            expected: a.sort().clone(),
            got: b.sort().clone(),
            context: "restricted term equivalence".into(),
        });
    }
    let (fwd, bwd) = iso_sequents(a, b)?;
    Ok((
        prove_sequent(theory, &fwd, bounds),
        prove_sequent(theory, &bwd, bounds),
    ))
}

/// `φ ⊣⊢ ψ`, one outcome per direction.
pub fn check_equivalence_formulas(
    theory: &Theory,
    a: &Formula,
    b: &Formula,
    bounds: &Bounds,
) -> Result<(ProofOutcome, ProofOutcome), crate::syntax::SyntaxError> {
    let (fwd, bwd) = interderivable_sequents(a, b)?;
    Ok((
        prove_sequent(theory, &fwd, bounds),
        prove_sequent(theory, &bwd, bounds),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::SymId;

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
(axiom ty-total (params (n)) (vars (a (tm n))) (seq (and (def a)) (and (def (ty@n a)))))
",
            2,
        )
        .unwrap()
    }

    fn proven_checks(theory: &Theory, outcome: &ProofOutcome, goal: &Sequent) {
        match outcome {
            ProofOutcome::Proven(d) => {
                d.check(theory).unwrap();
                assert!(derivation_establishes(d, goal));
            }
            other => panic!("expected Proven, got {other:?}"),
        }
    }

    #[test]
    fn goal_in_hyps() {
        let t = frag();
        let a = Var::new("a", Sort::tm(0));
        let b = Var::new("b", Sort::tm(0));
        let hyp = Formula::atom(
            Atom::eq(Term::Var(a.clone()), Term::Var(b.clone())).unwrap(),
        );
        let goal = Sequent::new(vec![a, b], hyp.clone(), hyp).unwrap();
        let out = prove_sequent(&t, &goal, &Bounds::default());
        proven_checks(&t, &out, &goal);
    }

    #[test]
    fn axiom_application() {
        let t = frag();
        let g = Var::new("G", Sort::ctx(0));
        let star = t.app(SymId::new("*", vec![]), vec![]).unwrap();
        let goal = Sequent::new(
            vec![g.clone()],
            Formula::truth(),
            Formula::atom(Atom::eq(Term::Var(g), star).unwrap()),
        )
        .unwrap();
        let out = prove_sequent(&t, &goal, &Bounds::default());
        proven_checks(&t, &out, &goal);
    }

    #[test]
    fn congruence_through_ty() {
        let t = frag();
        let a = Var::new("a", Sort::tm(0));
        let b = Var::new("b", Sort::tm(0));
        let ty = |x: &Var| {
            t.app(SymId::new("ty", vec![0]), vec![Term::Var(x.clone())])
                .unwrap()
        };
        let hyp = Formula::atom(
            Atom::eq(Term::Var(a.clone()), Term::Var(b.clone())).unwrap(),
        );
        // both directions of ty(a) = ty(b)
        for (l, r) in [(&a, &b), (&b, &a)] {
            let goal = Sequent::new(
                vec![a.clone(), b.clone()],
                hyp.clone(),
                Formula::atom(Atom::eq(ty(l), ty(r)).unwrap()),
            )
            .unwrap();
            let out = prove_sequent(&t, &goal, &Bounds::default());
            proven_checks(&t, &out, &goal);
        }
    }

    #[test]
    fn transitivity_chain() {
        let t = frag();
        let vars: Vec<Var> = ["a", "b", "c", "d"]
            .iter()
            .map(|n| Var::new(*n, Sort::tm(0)))
            .collect();
        let mut hyp = Formula::truth();
        for w in vars.windows(2) {
            hyp.0.push(
                Atom::eq(Term::Var(w[0].clone()), Term::Var(w[1].clone())).unwrap(),
            );
        }
        let goal = Sequent::new(
            vars.clone(),
            hyp,
            Formula::atom(
                Atom::eq(Term::Var(vars[3].clone()), Term::Var(vars[0].clone())).unwrap(),
            ),
        )
        .unwrap();
        let out = prove_sequent(&t, &goal, &Bounds::default());
        proven_checks(&t, &out, &goal);
    }

    #[test]
    fn unknown_on_unrelated() {
        let t = frag();
        let a = Var::new("a", Sort::tm(0));
        let b = Var::new("b", Sort::tm(0));
        let goal = Sequent::new(
            vec![a.clone(), b.clone()],
            Formula::truth(),
            Formula::atom(Atom::eq(Term::Var(a), Term::Var(b)).unwrap()),
        )
        .unwrap();
        match prove_sequent(&t, &goal, &Bounds::default()) {
            ProofOutcome::Unknown(_) => {}
            other => panic!("expected Unknown, got {other:?}"),
        }
    }

    #[test]
    fn bound_exhaustion_reported() {
        let t = frag();
        let a = Var::new("a", Sort::tm(0));
        let b = Var::new("b", Sort::tm(0));
        let goal = Sequent::new(
            vec![a.clone(), b.clone()],
            Formula::truth(),
            Formula::atom(Atom::eq(Term::Var(a), Term::Var(b)).unwrap()),
        )
        .unwrap();
        let bounds = Bounds {
            steps: 1,
            ..Bounds::default()
        };
        match prove_sequent(&t, &goal, &bounds) {
            ProofOutcome::Unknown(stats) => assert!(stats.exhausted),
            other => panic!("expected Unknown, got {other:?}"),
        }
    }

    #[test]
    fn subterm_definedness() {
        let t = frag();
        let a = Var::new("a", Sort::tm(1));
        let ty_a = t
            .app(SymId::new("ty", vec![1]), vec![Term::Var(a.clone())])
            .unwrap();
        let ft_ty_a = t.app(SymId::new("ft", vec![1]), vec![ty_a.clone()]).unwrap();
        // hyp: ft(ty(a))↓ ; goal: ty(a)↓ (a5 instance shape)
        let goal = Sequent::new(
            vec![a],
            Formula::atom(mk_defined(&ft_ty_a)),
            Formula::atom(mk_defined(&ty_a)),
        )
        .unwrap();
        let out = prove_sequent(&t, &goal, &Bounds::default());
        proven_checks(&t, &out, &goal);
    }

    #[test]
    fn equivalence_reflexive() {
        let t = frag();
        let a = Var::new("a", Sort::tm(0));
        let rt = RestrictedTerm::unrestricted(Term::Var(a));
        let (f, b) = check_equivalence_terms(&t, &rt, &rt, &Bounds::default()).unwrap();
        assert!(f.is_proven() && b.is_proven());
    }

    #[test]
    fn monotone_in_bounds() {
        let t = frag();
        let g = Var::new("G", Sort::ctx(0));
        let star = t.app(SymId::new("*", vec![]), vec![]).unwrap();
        let goal = Sequent::new(
            vec![g.clone()],
            Formula::truth(),
            Formula::atom(Atom::eq(Term::Var(g), star).unwrap()),
        )
        .unwrap();
        let small = Bounds {
            steps: 200,
            ..Bounds::default()
        };
        let big = Bounds {
            steps: 50_000,
            term_depth: 8,
            level_cutoff: 3,
        };
        if prove_sequent(&t, &goal, &small).is_proven() {
            assert!(prove_sequent(&t, &goal, &big).is_proven());
        }
    }
}
