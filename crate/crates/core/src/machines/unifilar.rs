use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::prob::{FiniteDist, Symbol};
use crate::transducer::{fresh_id, Transducer};

/// Finite unifilar machine: stochastic outputs per state, deterministic
/// state update on `(input, output)`.
#[derive(Debug)]
pub struct UnifilarMachine<I: Symbol, O: Symbol> {
    id: u64,
    inputs: Vec<I>,
    names: Vec<String>,
    outputs: Vec<FiniteDist<O>>,
    next: Vec<BTreeMap<(I, O), usize>>,
    certified: Vec<bool>,
}

impl<I: Symbol, O: Symbol> Clone for UnifilarMachine<I, O> {
    /// The clone is a distinct machine with a fresh id.
    fn clone(&self) -> Self {
        UnifilarMachine {
            id: fresh_id(),
            inputs: self.inputs.clone(),
            names: self.names.clone(),
            outputs: self.outputs.clone(),
            next: self.next.clone(),
            certified: self.certified.clone(),
        }
    }
}

impl<I: Symbol, O: Symbol> PartialEq for UnifilarMachine<I, O> {
    /// Structural equality; ids and certificates are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.inputs == other.inputs && self.names == other.names && self.outputs == other.outputs && self.next == other.next
    }
}

impl<I: Symbol, O: Symbol> UnifilarMachine<I, O> {
    /// Checks that the transition table is defined exactly on
    /// `inputs × support(output(state))` and points at existing states.
    pub fn new(
        inputs: Vec<I>,
        names: Vec<String>,
        outputs: Vec<FiniteDist<O>>,
        next: Vec<BTreeMap<(I, O), usize>>,
    ) -> Result<Self> {
        let n = names.len();
        if n == 0 || inputs.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        if outputs.len() != n || next.len() != n {
            return Err(Error::MalformedMachine(format!("{n} states but {} outputs and {} transition rows", outputs.len(), next.len())));
        }
        for (s, (dist, row)) in outputs.iter().zip(&next).enumerate() {
            let expected = inputs.len() * dist.len();
            if row.len() != expected {
                return Err(Error::MalformedMachine(format!(
                    "state {} has {} transitions, expected {expected}",
                    names[s],
                    row.len()
                )));
            }
            for ((i, o), to) in row {
                if !inputs.contains(i) || !dist.contains(o) {
                    return Err(Error::MalformedMachine(format!("state {} has a transition on ({i:?}, {o:?}) outside its domain", names[s])));
                }
                if *to >= n {
                    return Err(Error::MalformedMachine(format!("state {} transitions to missing state #{to}", names[s])));
                }
            }
        }
        Ok(UnifilarMachine { id: fresh_id(), inputs, names, outputs, next, certified: vec![false; n] })
    }

    /// Builds the table from a transition function.
    pub fn from_fn(
        inputs: Vec<I>,
        names: Vec<String>,
        outputs: Vec<FiniteDist<O>>,
        mut f: impl FnMut(usize, &I, &O) -> usize,
    ) -> Result<Self> {
        let next = outputs
            .iter()
            .enumerate()
            .map(|(s, d)| {
                let mut row = BTreeMap::new();
                for i in &inputs {
                    for o in d.support() {
                        row.insert((i.clone(), o.clone()), f(s, i, o));
                    }
                }
                row
            })
            .collect();
        Self::new(inputs, names, outputs, next)
    }

    /// One-state machine, i.e. an i.i.d. transducer.
    pub fn iid(inputs: Vec<I>, dist: FiniteDist<O>) -> Self {
        Self::from_fn(inputs, vec!["iid".into()], vec![dist], |_, _, _| 0).expect("well-formed")
    }

    /// Marks the states from which no reachable state can emit an output
    /// satisfying `is_success`. Found by backward graph search.
    pub fn with_certificate(mut self, is_success: impl Fn(&O) -> bool) -> Self {
        let n = self.names.len();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (s, row) in self.next.iter().enumerate() {
            for to in row.values() {
                preds[*to].push(s);
            }
        }
        let mut can_succeed = vec![false; n];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for s in 0..n {
            if self.outputs[s].support().any(&is_success) {
                can_succeed[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            for &p in &preds[s] {
                if !can_succeed[p] {
                    can_succeed[p] = true;
                    queue.push_back(p);
                }
            }
        }
        self.certified = can_succeed.into_iter().map(|c| !c).collect();
        self
    }

    pub fn transducer(self: &Arc<Self>, state: usize) -> Result<Transducer<I, O>> {
        if state >= self.names.len() {
            return Err(Error::UnknownState(format!("#{state}")));
        }
        Ok(Transducer::machine_node(self.clone(), state))
    }

    pub fn transducer_named(self: &Arc<Self>, name: &str) -> Result<Transducer<I, O>> {
        let state = self.state_index(name).ok_or_else(|| Error::UnknownState(name.to_string()))?;
        self.transducer(state)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn inputs(&self) -> &[I] {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn output(&self, state: usize) -> &FiniteDist<O> {
        &self.outputs[state]
    }

    pub fn transitions(&self, state: usize) -> &BTreeMap<(I, O), usize> {
        &self.next[state]
    }

    pub fn next_state(&self, state: usize, input: &I, output: &O) -> Option<usize> {
        self.next[state].get(&(input.clone(), output.clone())).copied()
    }

    pub fn is_certified(&self, state: usize) -> bool {
        self.certified[state]
    }

    /// Same behavior with one extra unreachable state appended.
    pub fn padded(&self) -> Self {
        let mut names = self.names.clone();
        let mut fresh = format!("{}'", names[0]);
        while names.contains(&fresh) {
            fresh.push('\'');
        }
        names.push(fresh);
        let mut outputs = self.outputs.clone();
        outputs.push(self.outputs[0].clone());
        let mut next = self.next.clone();
        next.push(self.next[0].clone());
        let mut certified = self.certified.clone();
        certified.push(self.certified[0]);
        UnifilarMachine { id: fresh_id(), inputs: self.inputs.clone(), names, outputs, next, certified }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Probability;
    use crate::transducer::{behaviorally_equal, unroll};

    #[test]
    fn one_state_machine_is_iid() {
        let d = FiniteDist::new([(0u8, Probability::frac(1, 3)), (1, Probability::frac(2, 3))]).unwrap();
        let t = Transducer::iid(vec!['x', 'y'], d.clone());
        let table = unroll(&t, 2, &['x', 'y']);
        assert_eq!(table.get(&['x', 'y']).unwrap().prob(&vec![1, 0, 1]), Probability::frac(4, 27));
        for (i, o) in [('x', 0u8), ('y', 1)] {
            assert_eq!(t.step(&i, &o).unwrap().emit(), &d);
        }
        assert!(behaviorally_equal(&t, &t, 5, &['x', 'y']));
    }

    #[test]
    fn malformed_tables_are_rejected() {
        let outputs = vec![FiniteDist::uniform([0u8, 1]).unwrap()];
        let mut row = BTreeMap::new();
        row.insert(('i', 0u8), 0usize);
        let err = UnifilarMachine::new(vec!['i'], vec!["x".into()], outputs.clone(), vec![row.clone()]).unwrap_err();
        assert!(matches!(err, Error::MalformedMachine(_)));
        row.insert(('i', 1), 3);
        let err = UnifilarMachine::new(vec!['i'], vec!["x".into()], outputs, vec![row]).unwrap_err();
        assert!(matches!(err, Error::MalformedMachine(_)));
    }

    #[test]
    fn unknown_state() {
        let m = Arc::new(UnifilarMachine::iid(vec![0u8], FiniteDist::point(1u8)));
        assert!(matches!(m.transducer(4), Err(Error::UnknownState(_))));
        assert!(matches!(m.transducer_named("nope"), Err(Error::UnknownState(_))));
    }

    #[test]
    fn certificate_by_reachability() {
        // 0 -> 1 -> 2 -> 2, only state 1 emits 'w'
        let m = UnifilarMachine::from_fn(
            vec![()],
            vec!["a".into(), "b".into(), "c".into()],
            vec![FiniteDist::point('n'), FiniteDist::point('w'), FiniteDist::point('n')],
            |s, _, _| (s + 1).min(2),
        )
        .unwrap()
        .with_certificate(|o| *o == 'w');
        assert_eq!((0..3).map(|s| m.is_certified(s)).collect::<Vec<_>>(), vec![false, false, true]);
    }

    #[test]
    fn padding_keeps_behavior() {
        let m = Arc::new(
            UnifilarMachine::from_fn(
                vec![0u8, 1],
                vec!["p".into(), "q".into()],
                vec![FiniteDist::uniform(['a', 'b']).unwrap(), FiniteDist::point('a')],
                |s, i, o| if *o == 'a' { (s + *i as usize) % 2 } else { 0 },
            )
            .unwrap(),
        );
        let padded = Arc::new(m.padded());
        assert_eq!(padded.len(), 3);
        assert!(behaviorally_equal(&m.transducer(0).unwrap(), &padded.transducer(0).unwrap(), 5, &[0, 1]));
    }
}
