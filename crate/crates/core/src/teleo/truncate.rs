use crate::error::{Error, Result};
use crate::prob::FiniteDist;
use crate::transducer::{mix, Behavior, StateKey, Transducer};

use super::{Action, Obs, State, TeleoEnvironment, Telos};

/// Success-ambivalent evolution: the mixture of the `⊥` and `⊤` steps
/// weighted by their relative emission probabilities.
pub fn ambivalent_evolve(env: &TeleoEnvironment, a: Action, s: State) -> Result<TeleoEnvironment> {
    Ok(TeleoEnvironment::new(ambivalent(&env.t, a, s)?, env.states, env.actions))
}

fn ambivalent(e: &Transducer<Action, Obs>, a: Action, s: State) -> Result<Transducer<Action, Obs>> {
    let nothing = Obs { state: s, telos: Telos::Nothing };
    let success = Obs { state: s, telos: Telos::Success };
    let (pn, ps) = (e.emit().prob(&nothing), e.emit().prob(&success));
    let total = &pn + &ps;
    if total.is_zero() {
        return Err(Error::UnsupportedObservation);
    }
    let mut weights = Vec::new();
    let mut parts = Vec::new();
    for (p, o) in [(pn, nothing), (ps, success)] {
        if !p.is_zero() {
            weights.push(&p / &total);
            parts.push(e.step(&a, &o).expect("supported observation"));
        }
    }
    mix(&weights, &parts)
}

/// Single-success truncation `Z`: identical until the first success, then
/// continues as the doomed continuation.
pub fn truncate_single_success(env: &TeleoEnvironment) -> TeleoEnvironment {
    TeleoEnvironment::new(z_node(env.t.clone()), env.states, env.actions)
}

/// Dooming `D`: success mass folded into nothing for the same state; steps
/// through ambivalent evolution of the original.
pub fn doomify(env: &TeleoEnvironment) -> TeleoEnvironment {
    TeleoEnvironment::new(d_node(env.t.clone()), env.states, env.actions)
}

fn z_node(inner: Transducer<Action, Obs>) -> Transducer<Action, Obs> {
    Transducer::custom(Truncated { inner })
}

fn d_node(inner: Transducer<Action, Obs>) -> Transducer<Action, Obs> {
    Transducer::custom(Doomed { inner })
}

struct Truncated {
    inner: Transducer<Action, Obs>,
}

impl Behavior<Action, Obs> for Truncated {
    fn emit(&self) -> FiniteDist<Obs> {
        self.inner.emit().clone()
    }

    fn step(&self, a: &Action, o: &Obs) -> Transducer<Action, Obs> {
        let next = self.inner.step(a, o).expect("supported observation");
        match o.telos {
            Telos::Nothing => z_node(next),
            Telos::Success => d_node(next),
        }
    }

    fn key(&self) -> Option<StateKey> {
        Some(StateKey::wrap("Z", self.inner.key()?))
    }

    fn certified(&self) -> bool {
        self.inner.certified()
    }
}

struct Doomed {
    inner: Transducer<Action, Obs>,
}

impl Behavior<Action, Obs> for Doomed {
    fn emit(&self) -> FiniteDist<Obs> {
        self.inner.emit().map(|o| Obs { state: o.state, telos: Telos::Nothing })
    }

    fn step(&self, a: &Action, o: &Obs) -> Transducer<Action, Obs> {
        d_node(ambivalent(&self.inner, *a, o.state).expect("state has positive mass"))
    }

    fn key(&self) -> Option<StateKey> {
        Some(StateKey::wrap("D", self.inner.key()?))
    }

    fn certified(&self) -> bool {
        true
    }
}
