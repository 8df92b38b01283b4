use crate::error::{Error, Result};
use crate::prob::FiniteDist;
use crate::transducer::{Behavior, StateKey, Transducer};

use super::{Action, Joint, Obs, Policy, State, TeleoEnvironment};

/// Policy and environment run against each other: both emit at once, then
/// the policy reads the state and the environment reads the action.
#[derive(Clone, Debug)]
pub struct CoupledSystem {
    pub t: Transducer<(), Joint>,
    pub policy: Policy,
    pub env: TeleoEnvironment,
}

pub fn couple(policy: &Policy, env: &TeleoEnvironment) -> Result<CoupledSystem> {
    if policy.states != env.states || policy.actions != env.actions {
        return Err(Error::AlphabetMismatch(format!(
            "policy reads {} states and plays {} actions, environment emits {} states and reads {} actions",
            policy.states, policy.actions, env.states, env.actions
        )));
    }
    Ok(CoupledSystem {
        t: coupled_node(policy.t.clone(), env.t.clone()),
        policy: policy.clone(),
        env: env.clone(),
    })
}

fn coupled_node(p: Transducer<State, Action>, e: Transducer<Action, Obs>) -> Transducer<(), Joint> {
    Transducer::custom(Coupled { p, e })
}

struct Coupled {
    p: Transducer<State, Action>,
    e: Transducer<Action, Obs>,
}

impl Behavior<(), Joint> for Coupled {
    fn emit(&self) -> FiniteDist<Joint> {
        self.p.emit().product(self.e.emit()).map(|(a, o)| Joint { state: o.state, telos: o.telos, action: *a })
    }

    fn step(&self, _: &(), j: &Joint) -> Transducer<(), Joint> {
        let obs = Obs { state: j.state, telos: j.telos };
        let p = self.p.step(&j.state, &j.action).expect("supported action");
        let e = self.e.step(&j.action, &obs).expect("supported observation");
        coupled_node(p, e)
    }

    fn key(&self) -> Option<StateKey> {
        Some(StateKey::pair(self.p.key()?, self.e.key()?))
    }

    fn certified(&self) -> bool {
        self.e.certified()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Probability;
    use crate::teleo::zoo;
    use crate::teleo::Telos;

    #[test]
    fn uniform_policy_with_despair() {
        let pi = Policy::iid(FiniteDist::uniform([Action(0), Action(1)]).unwrap(), 1, 2);
        let c = couple(&pi, &zoo::despair(1, 2)).unwrap();
        let j = Joint { state: State(0), telos: Telos::Success, action: Action(0) };
        assert_eq!(c.t.emit().prob(&j), Probability::frac(1, 4));
    }

    #[test]
    fn doom_never_succeeds() {
        let pi = Policy::iid(FiniteDist::uniform([Action(0), Action(1)]).unwrap(), 2, 2);
        let c = couple(&pi, &zoo::doom(2, 2)).unwrap();
        let mut frontier = vec![c.t.clone()];
        for _ in 0..=4 {
            let mut next = Vec::new();
            for node in &frontier {
                assert!(node.emit().support().all(|j| j.telos == Telos::Nothing));
                for j in node.emit().support() {
                    next.push(node.step(&(), j).unwrap());
                }
            }
            next.truncate(64);
            frontier = next;
        }
    }

    #[test]
    fn alphabets_must_agree() {
        let pi = Policy::constant(0, 2, 2);
        assert!(matches!(couple(&pi, &zoo::doom(3, 2)), Err(Error::AlphabetMismatch(_))));
    }
}
