use std::collections::VecDeque;

use crate::prob::{FiniteDist, Probability, Trajectory};
use crate::teleo::{Action, Policy, State};
use crate::transducer::{behaviorally_equal, mix, Behavior, StateKey, Transducer};

type P = Transducer<State, Action>;

/// `policy ≡ alpha·first + (1 - alpha)·second`, with the two components
/// differing only in the emission after `at`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub alpha: Probability,
    pub first: Policy,
    pub second: Policy,
    pub at: Trajectory<State, Action>,
    /// Emissions of the two components after `at`.
    pub split: (FiniteDist<Action>, FiniteDist<Action>),
}

/// Same steps as `base`, different emission.
struct Reweighted {
    base: P,
    emit: FiniteDist<Action>,
    tag: &'static str,
}

impl Behavior<State, Action> for Reweighted {
    fn emit(&self) -> FiniteDist<Action> {
        self.emit.clone()
    }

    fn step(&self, s: &State, a: &Action) -> P {
        self.base.step(s, a).expect("component support is the base support")
    }

    fn key(&self) -> Option<StateKey> {
        Some(StateKey::wrap(self.tag, self.base.key()?))
    }
}

/// Shifts mass `delta` between the two least actions of `d`.
fn shifted(d: &FiniteDist<Action>, delta: &Probability, up: bool) -> FiniteDist<Action> {
    let support: Vec<Action> = d.support().copied().collect();
    let (lo, hi) = (support[0], support[1]);
    let (gain, lose) = if up { (lo, hi) } else { (hi, lo) };
    FiniteDist::new(d.iter().map(|(a, p)| {
        let q = if *a == gain {
            p + delta
        } else if *a == lose {
            p.checked_sub(delta).expect("delta below every weight")
        } else {
            p.clone()
        };
        (*a, q)
    }))
    .expect("mass preserved")
}

/// Breadth-first search for the first stochastic node within `search_depth`
/// steps; splits it with `delta` half the least support weight and
/// `alpha = 1/2`. `None` if the policy is deterministic that far.
pub fn pointwise_decompose(policy: &Policy, search_depth: usize) -> Option<Decomposition> {
    let mut queue = VecDeque::from([(Trajectory::empty(), policy.t.clone())]);
    while let Some((traj, node)) = queue.pop_front() {
        let d = node.emit();
        if d.len() >= 2 {
            let min = d.iter().map(|(_, p)| p).min().expect("nonempty").clone();
            let delta = &min * &Probability::frac(1, 2);
            let (up, down) = (shifted(d, &delta, true), shifted(d, &delta, false));
            let part = |emit: FiniteDist<Action>, tag| {
                let then = Transducer::custom(Reweighted { base: node.clone(), emit, tag });
                Policy::new(policy.t.splice(&traj, then).expect("trajectory is valid"), policy.states, policy.actions)
            };
            let first = part(up.clone(), "split+");
            let second = part(down.clone(), "split-");
            return Some(Decomposition { alpha: Probability::frac(1, 2), first, second, at: traj, split: (up, down) });
        }
        if traj.len() >= search_depth {
            continue;
        }
        for s in policy.state_alphabet() {
            for a in d.support() {
                queue.push_back((traj.then(s, *a), node.step(&s, a).expect("supported")));
            }
        }
    }
    None
}

impl Decomposition {
    /// Whether the weighted mixture of the components is behaviorally equal
    /// to `policy` to `depth`.
    pub fn verify(&self, policy: &Policy, depth: usize) -> bool {
        let m = mix(&[self.alpha.clone(), self.alpha.complement()], &[self.first.t.clone(), self.second.t.clone()]).expect("normalized");
        behaviorally_equal(&m, &policy.t, depth, &policy.state_alphabet())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::UnifilarMachine;
    use std::sync::Arc;

    fn coin() -> FiniteDist<Action> {
        FiniteDist::uniform([Action(0), Action(1)]).unwrap()
    }

    #[test]
    fn fair_coin() {
        let pi = Policy::iid(coin(), 1, 2);
        let d = pointwise_decompose(&pi, 3).unwrap();
        assert_eq!(d.alpha, Probability::frac(1, 2));
        assert_eq!(d.split.0.prob(&Action(0)), Probability::frac(3, 4));
        assert_eq!(d.split.1.prob(&Action(0)), Probability::frac(1, 4));
        assert!(d.at.is_empty());
        assert!(d.verify(&pi, 3));
        assert!(!behaviorally_equal(&d.first.t, &pi.t, 1, &pi.state_alphabet()));
    }

    #[test]
    fn deterministic_not_found() {
        assert!(pointwise_decompose(&Policy::constant(1, 2, 2), 5).is_none());
    }

    #[test]
    fn late_coin() {
        // two deterministic steps, then a fair coin forever
        let outputs = vec![FiniteDist::point(Action(0)), FiniteDist::point(Action(1)), coin()];
        let m = UnifilarMachine::from_fn(vec![State(0), State(1)], vec!["a".into(), "b".into(), "c".into()], outputs, |x, _, _| (x + 1).min(2)).unwrap();
        let pi = Policy::from_machine(Arc::new(m), 0, 2, 2).unwrap();
        let d = pointwise_decompose(&pi, 4).unwrap();
        assert_eq!(d.at.len(), 2);
        assert_eq!(d.at.outputs(), vec![Action(0), Action(1)]);
        assert!(d.verify(&pi, 4));
        // the components agree with the policy off the split trajectory
        let off = Trajectory::empty().then(State(1), Action(0)).then(State(1), Action(1));
        assert_ne!(off, d.at);
        for part in [&d.first, &d.second] {
            let a = part.evolve(&off).unwrap();
            let b = pi.evolve(&off).unwrap();
            assert!(behaviorally_equal(&a.t, &b.t, 2, &pi.state_alphabet()));
        }
    }
}
