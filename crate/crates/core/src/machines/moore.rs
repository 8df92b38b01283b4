use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::prob::{FiniteDist, Probability, Rational, Symbol};
use crate::transducer::{fresh_id, Behavior, StateKey, Transducer};

use super::UnifilarMachine;

/// Distribution over the hidden states of a Moore machine.
pub type BeliefState = FiniteDist<usize>;

/// Finite-state stochastic Moore machine `(ψ, φ, θ)`: hidden state `y`
/// emits from `φ(y)`, then moves according to `θ(y, i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MooreMachine<I: Symbol, O: Symbol> {
    inputs: Vec<I>,
    names: Vec<String>,
    init: BeliefState,
    outputs: Vec<FiniteDist<O>>,
    transitions: Vec<BTreeMap<I, BeliefState>>,
}

impl<I: Symbol, O: Symbol> MooreMachine<I, O> {
    pub fn new(
        inputs: Vec<I>,
        names: Vec<String>,
        init: BeliefState,
        outputs: Vec<FiniteDist<O>>,
        transitions: Vec<BTreeMap<I, BeliefState>>,
    ) -> Result<Self> {
        let n = names.len();
        if n == 0 || inputs.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        if outputs.len() != n || transitions.len() != n {
            return Err(Error::MalformedMachine(format!("{n} states but {} output and {} transition kernels", outputs.len(), transitions.len())));
        }
        let in_range = |d: &BeliefState| d.support().all(|y| *y < n);
        if !in_range(&init) {
            return Err(Error::MalformedMachine("initial distribution mentions a missing state".into()));
        }
        for (y, row) in transitions.iter().enumerate() {
            if row.len() != inputs.len() || !inputs.iter().all(|i| row.contains_key(i)) {
                return Err(Error::MalformedMachine(format!("state {} needs one kernel per input", names[y])));
            }
            if !row.values().all(in_range) {
                return Err(Error::MalformedMachine(format!("state {} moves to a missing state", names[y])));
            }
        }
        Ok(MooreMachine { inputs, names, init, outputs, transitions })
    }

    pub fn inputs(&self) -> &[I] {
        &self.inputs
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn init(&self) -> &BeliefState {
        &self.init
    }

    pub fn output(&self, y: usize) -> &FiniteDist<O> {
        &self.outputs[y]
    }

    pub fn kernel(&self, y: usize, input: &I) -> &BeliefState {
        &self.transitions[y][input]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Same kernels, different initial distribution.
    pub fn with_init(&self, init: BeliefState) -> Result<Self> {
        Self::new(self.inputs.clone(), self.names.clone(), init, self.outputs.clone(), self.transitions.clone())
    }

    /// Output at belief `ψ`: `Σ_y ψ(y) φ(y)`.
    pub fn belief_output(&self, belief: &BeliefState) -> FiniteDist<O> {
        let (ws, ds): (Vec<Probability>, Vec<FiniteDist<O>>) =
            belief.iter().map(|(y, w)| (w.clone(), self.outputs[*y].clone())).unzip();
        FiniteDist::mix(&ws, &ds).expect("belief is normalized")
    }

    /// Posterior over next states after `(input, output)`:
    /// normalized `Σ_y θ(y, i) φ(o | y) ψ(y)`. `None` if `o` has zero
    /// probability at `ψ`.
    pub fn belief_step(&self, belief: &BeliefState, input: &I, output: &O) -> Option<BeliefState> {
        let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
        for (y, w) in belief.iter() {
            let like = self.outputs[*y].prob(output);
            if like.is_zero() {
                continue;
            }
            let weight = w.value() * like.value();
            for (y2, q) in self.transitions[*y][input].iter() {
                *acc.entry(*y2).or_insert_with(Rational::zero) += &weight * q.value();
            }
        }
        let total: Rational = acc.values().sum();
        if total.is_zero() {
            return None;
        }
        let entries = acc
            .into_iter()
            .filter(|(_, v)| !v.is_zero())
            .map(|(y, v)| (y, Probability::new(v / &total).expect("posterior")))
            .collect();
        Some(FiniteDist::from_normalized(entries))
    }
}

/// Interned beliefs that still carry a state key.
pub const BELIEF_KEY_CAP: usize = 512;

/// Reachable-belief automaton of a Moore machine, built on demand. Beliefs
/// are interned, so a filter that revisits a belief reuses its state.
pub struct BeliefMachine<I: Symbol, O: Symbol> {
    id: u64,
    moore: Arc<MooreMachine<I, O>>,
    interned: Mutex<(HashMap<BeliefState, usize>, Vec<BeliefState>)>,
}

impl<I: Symbol, O: Symbol> BeliefMachine<I, O> {
    pub fn moore(&self) -> &MooreMachine<I, O> {
        &self.moore
    }

    fn intern(&self, belief: BeliefState) -> usize {
        let mut guard = self.interned.lock().unwrap();
        let (index, list) = &mut *guard;
        if let Some(&at) = index.get(&belief) {
            return at;
        }
        let at = list.len();
        list.push(belief.clone());
        index.insert(belief, at);
        at
    }

    pub fn belief(&self, index: usize) -> BeliefState {
        self.interned.lock().unwrap().1[index].clone()
    }

    /// Number of beliefs interned so far.
    pub fn interned_count(&self) -> usize {
        self.interned.lock().unwrap().1.len()
    }

    pub fn transducer(self: &Arc<Self>, belief: BeliefState) -> Transducer<I, O> {
        let index = self.intern(belief);
        Transducer::custom(BeliefNode { machine: self.clone(), index })
    }

    /// Explicit unifilar machine over the beliefs reachable from `start`,
    /// failing when more than `cap` beliefs are reachable.
    pub fn materialize(&self, start: &BeliefState, cap: usize) -> Result<(UnifilarMachine<I, O>, Vec<BeliefState>)> {
        let mut index: HashMap<BeliefState, usize> = HashMap::new();
        let mut beliefs = vec![start.clone()];
        index.insert(start.clone(), 0);
        let mut rows: Vec<BTreeMap<(I, O), usize>> = Vec::new();
        let mut outputs = Vec::new();
        let mut at = 0;
        while at < beliefs.len() {
            let b = beliefs[at].clone();
            let out = self.moore.belief_output(&b);
            let mut row = BTreeMap::new();
            for i in &self.moore.inputs {
                for o in out.support() {
                    let next = self.moore.belief_step(&b, i, o).expect("supported output");
                    let to = match index.get(&next) {
                        Some(&k) => k,
                        None => {
                            if beliefs.len() >= cap {
                                return Err(Error::NotFiniteState(format!("more than {cap} reachable beliefs")));
                            }
                            index.insert(next.clone(), beliefs.len());
                            beliefs.push(next);
                            beliefs.len() - 1
                        }
                    };
                    row.insert((i.clone(), o.clone()), to);
                }
            }
            outputs.push(out);
            rows.push(row);
            at += 1;
        }
        let names = (0..beliefs.len()).map(|k| format!("b{k}")).collect();
        let machine = UnifilarMachine::new(self.moore.inputs.clone(), names, outputs, rows)?;
        Ok((machine, beliefs))
    }
}

struct BeliefNode<I: Symbol, O: Symbol> {
    machine: Arc<BeliefMachine<I, O>>,
    index: usize,
}

impl<I: Symbol, O: Symbol> Behavior<I, O> for BeliefNode<I, O> {
    fn emit(&self) -> FiniteDist<O> {
        self.machine.moore.belief_output(&self.machine.belief(self.index))
    }

    fn step(&self, input: &I, output: &O) -> Transducer<I, O> {
        let next = self.machine.moore.belief_step(&self.machine.belief(self.index), input, output).expect("supported output");
        self.machine.transducer(next)
    }

    /// Beliefs past [`BELIEF_KEY_CAP`] get no key, so exact methods treat
    /// the filter as infinite instead of chasing ever longer posteriors.
    fn key(&self) -> Option<StateKey> {
        (self.index < BELIEF_KEY_CAP).then(|| StateKey::Belief { id: self.machine.id, belief: self.index })
    }
}

/// The pointed belief automaton: initial belief and the lazy machine.
pub fn moore_to_unifilar<I: Symbol, O: Symbol>(m: &MooreMachine<I, O>) -> (BeliefState, Arc<BeliefMachine<I, O>>) {
    let machine = Arc::new(BeliefMachine {
        id: fresh_id(),
        moore: Arc::new(m.clone()),
        interned: Mutex::new((HashMap::new(), Vec::new())),
    });
    (m.init.clone(), machine)
}

pub fn moore_to_transducer<I: Symbol, O: Symbol>(m: &MooreMachine<I, O>) -> Transducer<I, O> {
    let (init, machine) = moore_to_unifilar(m);
    machine.transducer(init)
}
