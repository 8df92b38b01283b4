//! Named environments and policies. All environments are machine-backed
//! and carry zero-success certificates.
//!
//! In the mimic family, state id `k` stands for state `k + 1` of the
//! one-based numbering `S = {1..n}`, and action id `n` is the extra
//! "give up" action `n + 1`.

use std::sync::Arc;

use crate::error::Result;
use crate::machines::UnifilarMachine;
use crate::prob::{FiniteDist, Probability};

use super::{explore_deterministic, telos_mix, uniform_nothing, uniform_success, Action, Obs, Policy, State, TeleoEnvironment};

/// Largest deterministic policy the testing constructors will unfold.
pub const TESTING_POLICY_CAP: usize = 10_000;

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Never succeeds.
pub fn doom(states: u32, actions: u32) -> TeleoEnvironment {
    TeleoEnvironment::from_fn(names(&["doom"]), vec![uniform_nothing(states)], 0, states, actions, |_, _, _| 0).expect("well-formed")
}

/// Succeeds with probability 1/2 on the first step, then doom.
pub fn despair(states: u32, actions: u32) -> TeleoEnvironment {
    TeleoEnvironment::from_fn(
        names(&["despair", "doom"]),
        vec![telos_mix(&Probability::frac(1, 2), states), uniform_nothing(states)],
        0,
        states,
        actions,
        |_, _, _| 1,
    )
    .expect("well-formed")
}

/// Succeeds surely on the first step, then doom.
pub fn success_env(states: u32, actions: u32) -> TeleoEnvironment {
    TeleoEnvironment::from_fn(
        names(&["success", "doom"]),
        vec![uniform_success(states), uniform_nothing(states)],
        0,
        states,
        actions,
        |_, _, _| 1,
    )
    .expect("well-formed")
}

pub const CONTINUE: Action = Action(0);
pub const EXIT: Action = Action(1);

/// One state; success comes only from continuing once and then exiting.
pub fn absent_minded_env() -> TeleoEnvironment {
    // 0 start, 1 please-exit, 2 success, 3 doom
    TeleoEnvironment::from_fn(
        names(&["start", "please-exit", "success", "doom"]),
        vec![uniform_nothing(1), uniform_nothing(1), uniform_success(1), uniform_nothing(1)],
        0,
        1,
        2,
        |x, a, _| match (x, *a) {
            (0, CONTINUE) => 1,
            (1, EXIT) => 2,
            _ => 3,
        },
    )
    .expect("well-formed")
}

/// Probability `2^-(k+1)` of success in the mimic state with id `k`.
pub fn mimic_weight(k: u32) -> Probability {
    Probability::frac(1, 1i64 << (k + 1))
}

fn mimic_names(n: u32) -> Vec<String> {
    let mut v: Vec<String> = (0..n).map(|k| format!("mimic{}", k + 1)).collect();
    v.push("despair".into());
    v.push("doom".into());
    v
}

fn mimic_outputs(n: u32) -> Vec<FiniteDist<Obs>> {
    let mut v: Vec<_> = (0..n).map(|k| telos_mix(&mimic_weight(k), n)).collect();
    v.push(telos_mix(&Probability::frac(1, 2), n));
    v.push(uniform_nothing(n));
    v
}

fn mimic_machine(n: u32, with_init: bool) -> (Vec<String>, Vec<FiniteDist<Obs>>, impl Fn(usize, &Action, &Obs) -> usize) {
    let (despair, doom) = (n as usize, n as usize + 1);
    let mut names = mimic_names(n);
    let mut outputs = mimic_outputs(n);
    if with_init {
        names.push("init".into());
        outputs.push(uniform_nothing(n));
    }
    let init = n as usize + 2;
    let f = move |x: usize, a: &Action, o: &Obs| {
        if x == init {
            return if a.0 == n { o.state.0 as usize } else { doom };
        }
        if x < n as usize {
            if a.0 as usize == x {
                o.state.0 as usize
            } else if a.0 == n {
                despair
            } else {
                doom
            }
        } else {
            doom
        }
    };
    (names, outputs, f)
}

/// Mimic environment for state id `s_prev`: success with probability
/// `2^-(s_prev+1)` now; repeating `s_prev` as the action moves on to the
/// mimic environment of the state just emitted, giving up leads to despair,
/// anything else to doom.
///
/// Panics unless `n >= 2` and `s_prev < n`.
pub fn mimic(n: u32, s_prev: u32) -> TeleoEnvironment {
    assert!(n >= 2 && s_prev < n);
    let (names, outputs, f) = mimic_machine(n, false);
    TeleoEnvironment::from_fn(names, outputs, s_prev as usize, n, n + 1, f).expect("well-formed")
}

/// First step emits nothing and requires the give-up action; then the
/// mimic environment of the emitted state, read literally (success is paid
/// in the mimic state itself, whatever the action).
pub fn counterexample_env_literal(n: u32) -> TeleoEnvironment {
    assert!(n >= 2);
    let (names, outputs, f) = mimic_machine(n, true);
    TeleoEnvironment::from_fn(names, outputs, n as usize + 2, n, n + 1, f).expect("well-formed")
}

/// Counterexample environment with the mimic payout delayed by one step:
/// correctly repeating state `k` pays `2^-(k+1)` on the following step.
/// This is the reading under which the `n`-state policy scores
/// `(2^{n-1} + 2^{n-2} - 1) / (2^n - 1)`.
pub fn counterexample_env(n: u32) -> TeleoEnvironment {
    assert!(n >= 2);
    let nn = n as usize;
    // pay(s, w): remembering state s, with w = 0 for no pending payout and
    // w = k + 1 for a payout of 2^-(k+1)
    let pay = move |s: usize, w: usize| s * (nn + 1) + w;
    let init = nn * (nn + 1);
    let (despair, doom) = (init + 1, init + 2);
    let mut names = Vec::new();
    let mut outputs = Vec::new();
    for s in 0..nn {
        for w in 0..=nn {
            names.push(if w == 0 { format!("mimic{}", s + 1) } else { format!("mimic{}-pay{}", s + 1, w) });
            outputs.push(if w == 0 { uniform_nothing(n) } else { telos_mix(&mimic_weight(w as u32 - 1), n) });
        }
    }
    names.extend(["init".to_string(), "despair".to_string(), "doom".to_string()]);
    outputs.extend([uniform_nothing(n), telos_mix(&Probability::frac(1, 2), n), uniform_nothing(n)]);
    TeleoEnvironment::from_fn(names, outputs, init, n, n + 1, move |x, a, o| {
        let s = o.state.0 as usize;
        if x == init {
            return if a.0 == n { pay(s, 0) } else { doom };
        }
        if x < init {
            let remembered = x / (nn + 1);
            if a.0 as usize == remembered {
                pay(s, remembered + 1)
            } else if a.0 == n {
                despair
            } else {
                doom
            }
        } else {
            doom
        }
    })
    .expect("well-formed")
}

fn policy_machine(n_states: usize, state_alphabet: u32, outputs: Vec<FiniteDist<Action>>, f: impl FnMut(usize, &State, &Action) -> usize) -> Arc<UnifilarMachine<State, Action>> {
    let names = (0..n_states).map(|k| format!("x{}", k + 1)).collect();
    Arc::new(UnifilarMachine::from_fn((0..state_alphabet).map(State).collect(), names, outputs, f).expect("well-formed"))
}

/// The `n`-state policy that mimics states `1..n-1` and gives up on `n`.
/// Starts in the memory state of `n`, so its first action is to give up.
pub fn imperfect_mimic_policy(n: u32) -> Policy {
    let outputs = (0..n).map(|x| FiniteDist::point(Action(if x == n - 1 { n } else { x }))).collect();
    let m = policy_machine(n as usize, n, outputs, |_, s, _| s.0 as usize);
    Policy::from_machine(m, n as usize - 1, n, n + 1).expect("state exists")
}

/// Perfect mimic except that in the memory state of `n` it gives up with
/// probability `alpha`. Starts there.
pub fn alpha_mimic_policy(n: u32, alpha: &Probability) -> Policy {
    let outputs = (0..n)
        .map(|x| {
            if x == n - 1 {
                FiniteDist::new([(Action(x), alpha.complement()), (Action(n), alpha.clone())]).expect("normalized")
            } else {
                FiniteDist::point(Action(x))
            }
        })
        .collect();
    let m = policy_machine(n as usize, n, outputs, |_, s, _| s.0 as usize);
    Policy::from_machine(m, n as usize - 1, n, n + 1).expect("state exists")
}

/// `(1/4) U_⊥ + (3/4) U_⊤` for as long as the actions agree with the
/// deterministic policy `pi`; doom after the first disagreement.
pub fn uniform_testing(pi: &Policy) -> Result<TeleoEnvironment> {
    let g = explore_deterministic(pi, TESTING_POLICY_CAP)?;
    let k = g.nodes.len();
    let doom = k;
    let mut names: Vec<String> = (0..k).map(|i| format!("test{i}")).collect();
    names.push("doom".into());
    let mut outputs = vec![telos_mix(&Probability::frac(3, 4), pi.states); k];
    outputs.push(uniform_nothing(pi.states));
    TeleoEnvironment::from_fn(names, outputs, 0, pi.states, pi.actions, |x, a, o| {
        if x < k && *a == g.action[x] {
            g.next[x][o.state.0 as usize]
        } else {
            doom
        }
    })
}

/// Tests `pi` until the first success, then tests `other`. A disagreement
/// with `pi` on a nothing step leads to doom; any success step moves to the
/// testing environment of `other`.
pub fn tricky_testing(pi: &Policy, other: &Policy) -> Result<TeleoEnvironment> {
    let g = explore_deterministic(pi, TESTING_POLICY_CAP)?;
    let h = explore_deterministic(other, TESTING_POLICY_CAP)?;
    let (k, k2) = (g.nodes.len(), h.nodes.len());
    let doom = k + k2;
    let mut names: Vec<String> = (0..k).map(|i| format!("tricky{i}")).collect();
    names.extend((0..k2).map(|i| format!("test{i}")));
    names.push("doom".into());
    let mut outputs = vec![telos_mix(&Probability::frac(3, 4), pi.states); k + k2];
    outputs.push(uniform_nothing(pi.states));
    TeleoEnvironment::from_fn(names, outputs, 0, pi.states, pi.actions, |x, a, o| {
        let s = o.state.0 as usize;
        if x < k {
            if o.is_success() {
                k
            } else if *a == g.action[x] {
                g.next[x][s]
            } else {
                doom
            }
        } else if x < k + k2 && *a == h.action[x - k] {
            k + h.next[x - k][s]
        } else {
            doom
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teleo::{success_exact, Telos};

    #[test]
    fn absent_minded_shape() {
        let env = absent_minded_env();
        assert_eq!((env.states, env.actions), (1, 2));
        assert_eq!(env.emit(), &uniform_nothing(1));
        let exit_next = env.step_nothing(CONTINUE, State(0)).unwrap();
        assert!(!exit_next.certified());
        assert!(env.step_nothing(EXIT, State(0)).unwrap().certified());
        let won = exit_next.step_nothing(EXIT, State(0)).unwrap();
        assert_eq!(won.success_mass(), Probability::one());
    }

    #[test]
    fn counterexample_first_step() {
        let env = counterexample_env(2);
        assert_eq!(env.success_mass(), Probability::zero());
        for s in 0..2 {
            for a in 0..2 {
                assert!(env.step_nothing(Action(a), State(s)).unwrap().certified());
            }
            assert!(!env.step_nothing(Action(2), State(s)).unwrap().certified());
        }
    }

    #[test]
    fn testing_emission_and_doom() {
        let pi = Policy::constant(2, 3, 3);
        let env = uniform_testing(&pi).unwrap();
        assert_eq!(env.emit(), &telos_mix(&Probability::frac(3, 4), 3));
        for t in [Telos::Nothing, Telos::Success] {
            let o = Obs { state: State(1), telos: t };
            assert!(env.step(Action(0), o).unwrap().certified());
            assert!(!env.step(Action(2), o).unwrap().certified());
        }
    }

    #[test]
    fn stochastic_policy_rejected() {
        let coin = Policy::iid(FiniteDist::uniform([Action(0), Action(1)]).unwrap(), 1, 2);
        assert_eq!(uniform_testing(&coin).unwrap_err(), crate::Error::NonDeterministicPolicy);
        assert_eq!(tricky_testing(&coin, &Policy::constant(0, 1, 2)).unwrap_err(), crate::Error::NonDeterministicPolicy);
    }

    #[test]
    fn mimic_optimal_mimic_succeeds_surely() {
        // the perfect mimic starting in the remembered state
        for n in [2, 3] {
            for s in 0..n {
                let outputs = (0..n).map(|x| FiniteDist::point(Action(x))).collect();
                let m = policy_machine(n as usize, n, outputs, |_, st, _| st.0 as usize);
                let pi = Policy::from_machine(m, s as usize, n, n + 1).unwrap();
                assert_eq!(success_exact(&pi, &mimic(n, s)).unwrap(), Probability::one());
            }
        }
    }
}
