//! Lazy coinductive transducers.
//!
//! A transducer is an output distribution together with a step function that
//! is only defined on `(input, supported output)`. Nodes are immutable and
//! shared; children of combinator nodes are cached on first use.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::machines::UnifilarMachine;
use crate::prob::{check_weights, FiniteDist, Probability, Rational, Symbol, Trajectory};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Fresh process-wide identifier for machines and other keyed objects.
pub fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Canonical identity of a finite-state node. Two nodes with equal keys are
/// behaviorally identical; solvers and planners memoize on keys.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateKey {
    Machine { id: u64, state: usize },
    Belief { id: u64, belief: usize },
    Node(u64),
    Wrap { tag: &'static str, inner: Arc<StateKey> },
    Pair(Arc<StateKey>, Arc<StateKey>),
    Mix(Arc<Vec<(Probability, StateKey)>>),
}

impl StateKey {
    pub fn wrap(tag: &'static str, inner: StateKey) -> Self {
        StateKey::Wrap { tag, inner: Arc::new(inner) }
    }

    pub fn pair(a: StateKey, b: StateKey) -> Self {
        StateKey::Pair(Arc::new(a), Arc::new(b))
    }
}

impl fmt::Debug for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateKey::Machine { id, state } => write!(f, "m{id}.{state}"),
            StateKey::Belief { id, belief } => write!(f, "b{id}.{belief}"),
            StateKey::Node(id) => write!(f, "n{id}"),
            StateKey::Wrap { tag, inner } => write!(f, "{tag}({inner:?})"),
            StateKey::Pair(a, b) => write!(f, "<{a:?}, {b:?}>"),
            StateKey::Mix(parts) => {
                f.write_str("mix[")?;
                for (k, (w, key)) in parts.iter().enumerate() {
                    if k > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{w}*{key:?}")?;
                }
                f.write_str("]")
            }
        }
    }
}

/// User-defined lazy behavior.
pub trait Behavior<I: Symbol, O: Symbol>: Send + Sync {
    fn emit(&self) -> FiniteDist<O>;

    /// Only called with `output` in the support of [`Behavior::emit`].
    fn step(&self, input: &I, output: &O) -> Transducer<I, O>;

    fn key(&self) -> Option<StateKey> {
        None
    }

    /// Zero-success certificate: true only if nothing "successful" can ever
    /// be emitted from here. The meaning of success is fixed by the caller
    /// (see the teleo module); the default claims nothing.
    fn certified(&self) -> bool {
        false
    }
}

enum Repr<I: Symbol, O: Symbol> {
    Machine { machine: Arc<UnifilarMachine<I, O>>, state: usize },
    Mixture(Vec<(Probability, Transducer<I, O>)>),
    Custom(Arc<dyn Behavior<I, O>>),
}

struct Node<I: Symbol, O: Symbol> {
    repr: Repr<I, O>,
    emit: OnceLock<FiniteDist<O>>,
    key: OnceLock<Option<StateKey>>,
    children: Mutex<HashMap<(I, O), Transducer<I, O>>>,
}

/// Shared handle to a lazy transducer node.
pub struct Transducer<I: Symbol, O: Symbol>(Arc<Node<I, O>>);

impl<I: Symbol, O: Symbol> Clone for Transducer<I, O> {
    fn clone(&self) -> Self {
        Transducer(self.0.clone())
    }
}

impl<I: Symbol, O: Symbol> fmt::Debug for Transducer<I, O> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.key() {
            Some(k) => write!(f, "Transducer({k:?})"),
            None => write!(f, "Transducer(@{:p})", Arc::as_ptr(&self.0)),
        }
    }
}

impl<I: Symbol, O: Symbol> Transducer<I, O> {
    fn from_repr(repr: Repr<I, O>) -> Self {
        Transducer(Arc::new(Node {
            repr,
            emit: OnceLock::new(),
            key: OnceLock::new(),
            children: Mutex::new(HashMap::new()),
        }))
    }

    pub(crate) fn machine_node(machine: Arc<UnifilarMachine<I, O>>, state: usize) -> Self {
        Self::from_repr(Repr::Machine { machine, state })
    }

    pub fn custom(behavior: impl Behavior<I, O> + 'static) -> Self {
        Self::from_repr(Repr::Custom(Arc::new(behavior)))
    }

    /// I.i.d. transducer emitting `dist` forever.
    pub fn iid(inputs: Vec<I>, dist: FiniteDist<O>) -> Self {
        let machine = UnifilarMachine::iid(inputs, dist);
        Arc::new(machine).transducer(0).expect("single state exists")
    }

    pub fn emit(&self) -> &FiniteDist<O> {
        match &self.0.repr {
            Repr::Machine { machine, state } => machine.output(*state),
            Repr::Mixture(parts) => self.0.emit.get_or_init(|| {
                let (ws, ds): (Vec<_>, Vec<_>) =
                    parts.iter().map(|(w, t)| (w.clone(), t.emit().clone())).unzip();
                FiniteDist::mix(&ws, &ds).expect("mixture weights are normalized")
            }),
            Repr::Custom(b) => self.0.emit.get_or_init(|| b.emit()),
        }
    }

    /// One step of evolution; `None` when `output` is unsupported.
    pub fn step(&self, input: &I, output: &O) -> Option<Transducer<I, O>> {
        if !self.emit().contains(output) {
            return None;
        }
        if let Repr::Machine { machine, state } = &self.0.repr {
            let next = machine.next_state(*state, input, output)?;
            return Some(Transducer::machine_node(machine.clone(), next));
        }
        let cache_key = (input.clone(), output.clone());
        if let Some(hit) = self.0.children.lock().unwrap().get(&cache_key) {
            return Some(hit.clone());
        }
        let child = match &self.0.repr {
            Repr::Machine { .. } => unreachable!(),
            Repr::Mixture(parts) => mixture_step(parts, input, output),
            Repr::Custom(b) => b.step(input, output),
        };
        self.0.children.lock().unwrap().entry(cache_key).or_insert(child).clone().into()
    }

    /// Folds [`Transducer::step`] over a trajectory.
    pub fn evolve(&self, traj: &Trajectory<I, O>) -> Option<Transducer<I, O>> {
        let mut cur = self.clone();
        for (i, o) in traj.pairs() {
            cur = cur.step(i, o)?;
        }
        Some(cur)
    }

    pub fn key(&self) -> Option<StateKey> {
        self.0
            .key
            .get_or_init(|| match &self.0.repr {
                Repr::Machine { machine, state } => Some(StateKey::Machine { id: machine.id(), state: *state }),
                Repr::Mixture(parts) => {
                    let mut keyed = parts
                        .iter()
                        .map(|(w, t)| Some((w.clone(), t.key()?)))
                        .collect::<Option<Vec<_>>>()?;
                    keyed.sort_by(|a, b| a.1.cmp(&b.1));
                    Some(StateKey::Mix(Arc::new(keyed)))
                }
                Repr::Custom(b) => b.key(),
            })
            .clone()
    }

    /// Zero-success certificate; see [`Behavior::certified`].
    pub fn certified(&self) -> bool {
        match &self.0.repr {
            Repr::Machine { machine, state } => machine.is_certified(*state),
            Repr::Mixture(parts) => parts.iter().all(|(_, t)| t.certified()),
            Repr::Custom(b) => b.certified(),
        }
    }

    /// Weighted components when this node is a mixture.
    pub fn components(&self) -> Option<&[(Probability, Transducer<I, O>)]> {
        match &self.0.repr {
            Repr::Mixture(parts) => Some(parts),
            _ => None,
        }
    }

    /// The backing machine and state, for machine nodes.
    pub fn machine(&self) -> Option<(&Arc<UnifilarMachine<I, O>>, usize)> {
        match &self.0.repr {
            Repr::Machine { machine, state } => Some((machine, *state)),
            _ => None,
        }
    }

    pub fn ptr_eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Replaces the continuation after exactly `traj` with `then`.
    pub fn splice(&self, traj: &Trajectory<I, O>, then: Transducer<I, O>) -> Result<Transducer<I, O>> {
        if self.evolve(traj).is_none() {
            return Err(Error::InvalidTrajectory);
        }
        Ok(splice_unchecked(self.clone(), traj.pairs(), then))
    }
}

fn splice_unchecked<I: Symbol, O: Symbol>(t: Transducer<I, O>, path: &[(I, O)], then: Transducer<I, O>) -> Transducer<I, O> {
    if path.is_empty() {
        return then;
    }
    Transducer::custom(Splice { base: t, path: path.to_vec(), then })
}

struct Splice<I: Symbol, O: Symbol> {
    base: Transducer<I, O>,
    path: Vec<(I, O)>,
    then: Transducer<I, O>,
}

impl<I: Symbol, O: Symbol> Behavior<I, O> for Splice<I, O> {
    fn emit(&self) -> FiniteDist<O> {
        self.base.emit().clone()
    }

    fn step(&self, input: &I, output: &O) -> Transducer<I, O> {
        let next = self.base.step(input, output).expect("supported output");
        if (input, output) == (&self.path[0].0, &self.path[0].1) {
            splice_unchecked(next, &self.path[1..], self.then.clone())
        } else {
            next
        }
    }
}

/// Weighted mixture. Nested mixtures are flattened, components with equal
/// keys merged and zero weights dropped; a single surviving component is
/// returned as is.
pub fn mix<I: Symbol, O: Symbol>(weights: &[Probability], ts: &[Transducer<I, O>]) -> Result<Transducer<I, O>> {
    if weights.len() != ts.len() {
        return Err(Error::LengthMismatch(weights.len(), ts.len()));
    }
    check_weights(weights)?;
    if ts.is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    Ok(mix_normalized(weights.iter().cloned().zip(ts.iter().cloned()).collect()))
}

fn mix_normalized<I: Symbol, O: Symbol>(parts: Vec<(Probability, Transducer<I, O>)>) -> Transducer<I, O> {
    let mut flat: Vec<(Rational, Transducer<I, O>)> = Vec::new();
    let mut by_key: HashMap<StateKey, usize> = HashMap::new();
    let mut push = |w: Rational, t: Transducer<I, O>, flat: &mut Vec<(Rational, Transducer<I, O>)>| {
        if w.is_zero() {
            return;
        }
        if let Some(k) = t.key() {
            if let Some(&at) = by_key.get(&k) {
                flat[at].0 += w;
                return;
            }
            by_key.insert(k, flat.len());
        }
        flat.push((w, t));
    };
    for (w, t) in parts {
        match t.components() {
            Some(inner) => {
                for (v, c) in inner {
                    push(w.value() * v.value(), c.clone(), &mut flat);
                }
            }
            None => push(w.into_rational(), t, &mut flat),
        }
    }
    if flat.len() == 1 {
        return flat.pop().unwrap().1;
    }
    let parts = flat.into_iter().map(|(w, t)| (Probability::new(w).expect("weights stay in [0,1]"), t)).collect();
    Transducer::from_repr(Repr::Mixture(parts))
}

/// Posterior weights `α_k P_k(o) / Σ α_l P_l(o)` over the components that
/// support `o`, paired with their stepped continuations.
pub fn posterior<I: Symbol, O: Symbol>(
    parts: &[(Probability, Transducer<I, O>)],
    input: &I,
    output: &O,
) -> Vec<(Probability, Transducer<I, O>)> {
    let joint: Vec<(Rational, &Transducer<I, O>)> = parts
        .iter()
        .map(|(w, t)| (w.value() * t.emit().prob(output).value(), t))
        .filter(|(m, _)| !m.is_zero())
        .collect();
    let total: Rational = joint.iter().map(|(m, _)| m).sum();
    joint
        .into_iter()
        .map(|(m, t)| {
            let w = Probability::new(m / &total).expect("posterior is a probability");
            (w, t.step(input, output).expect("component supports output"))
        })
        .collect()
}

fn mixture_step<I: Symbol, O: Symbol>(parts: &[(Probability, Transducer<I, O>)], input: &I, output: &O) -> Transducer<I, O> {
    mix_normalized(posterior(parts, input, output))
}

/// Causal conditional output tables `p_n : I^n -> P(O^{n+1})` up to a depth.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct UnrolledTable<I: Symbol, O: Symbol> {
    depth: usize,
    inputs: Vec<I>,
    tables: Vec<BTreeMap<Vec<I>, FiniteDist<Vec<O>>>>,
}

type Level<I, O> = BTreeMap<Vec<I>, BTreeMap<Vec<O>, Rational>>;

impl<I: Symbol, O: Symbol> UnrolledTable<I, O> {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn inputs(&self) -> &[I] {
        &self.inputs
    }

    /// `p_n(· ∥ inputs)` with `n = inputs.len()`.
    pub fn get(&self, inputs: &[I]) -> Option<&FiniteDist<Vec<O>>> {
        self.tables.get(inputs.len())?.get(inputs)
    }

    /// `p_0` as a distribution over single outputs.
    pub fn first(&self) -> FiniteDist<O> {
        self.tables[0][&Vec::new()].map(|os| os[0].clone())
    }

    pub fn levels(&self) -> &[BTreeMap<Vec<I>, FiniteDist<Vec<O>>>] {
        &self.tables
    }

    /// Every output symbol appearing anywhere in the table.
    pub fn output_symbols(&self) -> Vec<O> {
        let mut seen: Vec<O> = self
            .tables
            .iter()
            .flat_map(|lvl| lvl.values())
            .flat_map(|d| d.support())
            .flat_map(|os| os.iter().cloned())
            .collect();
        seen.sort();
        seen.dedup();
        seen
    }

    /// `Σ_o p_{n+1}(𝐨·o ∥ 𝐢·i) = p_n(𝐨 ∥ 𝐢)` for every level.
    pub fn causality_holds(&self) -> bool {
        for n in 0..self.depth {
            for (ins, longer) in &self.tables[n + 1] {
                let shorter = match self.tables[n].get(&ins[..n]) {
                    Some(d) => d,
                    None => return false,
                };
                let marginal = longer.map(|os| os[..n + 1].to_vec());
                if &marginal != shorter {
                    return false;
                }
            }
        }
        true
    }
}

/// Unrolls `t` to the given depth over the input alphabet `inputs`.
/// Zero-probability branches are never stepped into.
pub fn unroll<I: Symbol, O: Symbol>(t: &Transducer<I, O>, depth: usize, inputs: &[I]) -> UnrolledTable<I, O> {
    let mut memo = HashMap::new();
    let levels = unroll_levels(t, depth, inputs, &mut memo);
    let tables = levels
        .iter()
        .map(|lvl| {
            lvl.iter()
                .map(|(ins, entries)| {
                    let dist = FiniteDist::from_normalized(
                        entries
                            .iter()
                            .filter(|(_, p)| !p.is_zero())
                            .map(|(os, p)| (os.clone(), Probability::new(p.clone()).expect("table entry")))
                            .collect(),
                    );
                    (ins.clone(), dist)
                })
                .collect()
        })
        .collect();
    UnrolledTable { depth, inputs: inputs.to_vec(), tables }
}

fn unroll_levels<I: Symbol, O: Symbol>(
    t: &Transducer<I, O>,
    depth: usize,
    inputs: &[I],
    memo: &mut HashMap<(StateKey, usize), Arc<Vec<Level<I, O>>>>,
) -> Arc<Vec<Level<I, O>>> {
    let key = t.key();
    if let Some(k) = &key {
        if let Some(hit) = memo.get(&(k.clone(), depth)) {
            return hit.clone();
        }
    }
    let emit = t.emit();
    let mut levels: Vec<Level<I, O>> = vec![BTreeMap::new(); depth + 1];
    levels[0].insert(Vec::new(), emit.iter().map(|(o, p)| (vec![o.clone()], p.value().clone())).collect());
    if depth > 0 {
        for (o, p) in emit.iter() {
            for i in inputs {
                let child = t.step(i, o).expect("supported output");
                let sub = unroll_levels(&child, depth - 1, inputs, memo);
                for (n, lvl) in sub.iter().enumerate() {
                    for (ins, entries) in lvl {
                        let mut full_in = Vec::with_capacity(n + 1);
                        full_in.push(i.clone());
                        full_in.extend(ins.iter().cloned());
                        let slot = levels[n + 1].entry(full_in).or_default();
                        for (os, q) in entries {
                            let mut full_out = Vec::with_capacity(n + 2);
                            full_out.push(o.clone());
                            full_out.extend(os.iter().cloned());
                            *slot.entry(full_out).or_insert_with(Rational::zero) += p.value() * q;
                        }
                    }
                }
            }
        }
    }
    let levels = Arc::new(levels);
    if let Some(k) = key {
        memo.insert((k, depth), levels.clone());
    }
    levels
}

/// Bayesian conditioning of a table on the first pair `(i, o)`.
pub fn unrolled_step<I: Symbol, O: Symbol>(table: &UnrolledTable<I, O>, input: &I, output: &O) -> Result<UnrolledTable<I, O>> {
    if table.depth == 0 {
        return Err(Error::TableExhausted);
    }
    let p0 = table.first().prob(output);
    if p0.is_zero() {
        return Err(Error::UnsupportedOutput);
    }
    let mut tables = Vec::with_capacity(table.depth);
    for n in 0..table.depth {
        let mut level = BTreeMap::new();
        for (ins, dist) in &table.tables[n + 1] {
            if &ins[0] != input {
                continue;
            }
            let entries: BTreeMap<Vec<O>, Probability> = dist
                .iter()
                .filter(|(os, _)| &os[0] == output)
                .map(|(os, p)| (os[1..].to_vec(), p / &p0))
                .collect();
            level.insert(ins[1..].to_vec(), FiniteDist::from_normalized(entries));
        }
        tables.push(level);
    }
    Ok(UnrolledTable { depth: table.depth - 1, inputs: table.inputs.clone(), tables })
}

/// Inverse of [`unroll`]. Past the table depth the result continues as a
/// uniform i.i.d. filler over the table's output symbols; that part carries
/// no information and is not meant to be compared.
pub fn reroll<I: Symbol, O: Symbol>(table: &UnrolledTable<I, O>) -> Transducer<I, O> {
    let filler_symbols = table.output_symbols();
    Transducer::custom(Reroll { table: Arc::new(table.clone()), filler_symbols: Arc::new(filler_symbols) })
}

struct Reroll<I: Symbol, O: Symbol> {
    table: Arc<UnrolledTable<I, O>>,
    filler_symbols: Arc<Vec<O>>,
}

impl<I: Symbol, O: Symbol> Behavior<I, O> for Reroll<I, O> {
    fn emit(&self) -> FiniteDist<O> {
        self.table.first()
    }

    fn step(&self, input: &I, output: &O) -> Transducer<I, O> {
        if self.table.depth == 0 {
            let uniform = FiniteDist::uniform(self.filler_symbols.iter().cloned()).expect("nonempty");
            return Transducer::iid(self.table.inputs.clone(), uniform);
        }
        let next = unrolled_step(&self.table, input, output).expect("supported output");
        Transducer::custom(Reroll { table: Arc::new(next), filler_symbols: self.filler_symbols.clone() })
    }
}

/// Equality of the unrolled tables to `depth`, decided by a joint walk that
/// compares emissions and recurses on every supported pair.
pub fn behaviorally_equal<I: Symbol, O: Symbol>(a: &Transducer<I, O>, b: &Transducer<I, O>, depth: usize, inputs: &[I]) -> bool {
    let mut seen = HashSet::new();
    equal_walk(a, b, depth, inputs, &mut seen)
}

fn equal_walk<I: Symbol, O: Symbol>(
    a: &Transducer<I, O>,
    b: &Transducer<I, O>,
    depth: usize,
    inputs: &[I],
    seen: &mut HashSet<(StateKey, StateKey, usize)>,
) -> bool {
    if a.ptr_eq(b) {
        return true;
    }
    let memo = match (a.key(), b.key()) {
        (Some(x), Some(y)) => {
            if x == y {
                return true;
            }
            let k = (x, y, depth);
            if seen.contains(&k) {
                return true;
            }
            Some(k)
        }
        _ => None,
    };
    if a.emit() != b.emit() {
        return false;
    }
    if depth > 0 {
        for o in a.emit().support() {
            for i in inputs {
                let (na, nb) = (a.step(i, o).unwrap(), b.step(i, o).unwrap());
                if !equal_walk(&na, &nb, depth - 1, inputs, seen) {
                    return false;
                }
            }
        }
    }
    if let Some(k) = memo {
        seen.insert(k);
    }
    true
}

/// All valid trajectories of length exactly `len`, in lexicographic order,
/// with their probabilities given the inputs.
pub fn valid_trajectories<I: Symbol, O: Symbol>(
    t: &Transducer<I, O>,
    len: usize,
    inputs: &[I],
) -> Vec<(Trajectory<I, O>, Probability, Transducer<I, O>)> {
    let mut out = Vec::new();
    let mut stack = vec![(Trajectory::empty(), Probability::one(), t.clone())];
    while let Some((traj, p, node)) = stack.pop() {
        if traj.len() == len {
            out.push((traj, p, node));
            continue;
        }
        for i in inputs.iter().rev() {
            for (o, q) in node.emit().iter().collect::<Vec<_>>().into_iter().rev() {
                let next = node.step(i, o).unwrap();
                stack.push((traj.then(i.clone(), o.clone()), &p * q, next));
            }
        }
    }
    out
}
