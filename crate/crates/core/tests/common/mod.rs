#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use teleo_core::machines::{MooreMachine, UnifilarMachine};
use teleo_core::teleo::{uniform_nothing, Action, Obs, Policy, State, TeleoEnvironment, Telos};
use teleo_core::{FiniteDist, Probability, Symbol};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random distribution with small integer weights. With `full` every
/// symbol gets positive mass.
pub fn dist<X: Symbol>(r: &mut ChaCha8Rng, xs: &[X], full: bool) -> FiniteDist<X> {
    loop {
        let w: Vec<i64> = xs.iter().map(|_| r.gen_range(if full { 1..=4 } else { 0..=4 })).collect();
        let total: i64 = w.iter().sum();
        if total == 0 {
            continue;
        }
        return FiniteDist::new(xs.iter().cloned().zip(w.iter().map(|&k| Probability::frac(k, total)))).unwrap();
    }
}

pub fn prob(r: &mut ChaCha8Rng) -> Probability {
    let d = r.gen_range(1..=12);
    Probability::frac(r.gen_range(0..=d), d)
}

pub fn states(n: u32) -> Vec<State> {
    (0..n).map(State).collect()
}

pub fn actions(n: u32) -> Vec<Action> {
    (0..n).map(Action).collect()
}

pub fn observations(n: u32) -> Vec<Obs> {
    (0..n).flat_map(|s| [Obs::nothing(s), Obs::success(s)]).collect()
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|x| format!("q{x}")).collect()
}

/// Unifilar policy with `k` memory states.
pub fn policy(r: &mut ChaCha8Rng, k: usize, s: u32, a: u32, deterministic: bool) -> Policy {
    let outputs: Vec<FiniteDist<Action>> = (0..k)
        .map(|_| if deterministic { FiniteDist::point(Action(r.gen_range(0..a))) } else { dist(r, &actions(a), false) })
        .collect();
    let m = UnifilarMachine::from_fn(states(s), names(k), outputs, |_, _, _| r.gen_range(0..k)).unwrap();
    Policy::from_machine(Arc::new(m), 0, s, a).unwrap()
}

/// Random sizes within the criteria bounds.
pub fn policy_any(r: &mut ChaCha8Rng, s: u32, a: u32, deterministic: bool) -> Policy {
    let k = r.gen_range(1..=3);
    policy(r, k, s, a, deterministic)
}

/// Unifilar environment with `k` live states and a doom state.
pub fn env(r: &mut ChaCha8Rng, k: usize, s: u32, a: u32) -> TeleoEnvironment {
    let obs = observations(s);
    let mut outputs: Vec<FiniteDist<Obs>> = (0..k).map(|_| dist(r, &obs, false)).collect();
    outputs.push(uniform_nothing(s));
    let mut n = names(k);
    n.push("doom".into());
    TeleoEnvironment::from_fn(n, outputs, 0, s, a, |x, _, _| if x == k || r.gen_bool(0.15) { k } else { r.gen_range(0..k) }).unwrap()
}

pub fn env_any(r: &mut ChaCha8Rng, s: u32, a: u32) -> TeleoEnvironment {
    let k = r.gen_range(1..=3);
    env(r, k, s, a)
}

/// Every no-success path reaches the certified doom state within three
/// steps: layers 0, 1, 2 of `width` states each, then doom.
pub fn layered_env(r: &mut ChaCha8Rng, width: usize, s: u32, a: u32) -> TeleoEnvironment {
    let obs = observations(s);
    let live = 3 * width;
    let mut outputs: Vec<FiniteDist<Obs>> = (0..live).map(|_| dist(r, &obs, false)).collect();
    outputs.push(uniform_nothing(s));
    let mut n = names(live);
    n.push("doom".into());
    TeleoEnvironment::from_fn(n, outputs, 0, s, a, |x, _, o| {
        let layer = x / width;
        if x == live || layer == 2 || o.telos == Telos::Success {
            live
        } else {
            (layer + 1) * width + r.gen_range(0..width)
        }
    })
    .unwrap()
}

/// Byte-alphabet unifilar machine.
pub fn machine(r: &mut ChaCha8Rng, k: usize, inputs: &[u8], outputs: &[u8]) -> Arc<UnifilarMachine<u8, u8>> {
    let outs = (0..k).map(|_| dist(r, outputs, false)).collect();
    Arc::new(UnifilarMachine::from_fn(inputs.to_vec(), names(k), outs, |_, _, _| r.gen_range(0..k)).unwrap())
}

pub fn moore(r: &mut ChaCha8Rng, k: usize, inputs: &[u8], outputs: &[u8]) -> MooreMachine<u8, u8> {
    let ys: Vec<usize> = (0..k).collect();
    let init = dist(r, &ys, false);
    let outs = (0..k).map(|_| dist(r, outputs, false)).collect();
    let kernels = (0..k).map(|_| inputs.iter().map(|i| (*i, dist(r, &ys, false))).collect::<BTreeMap<_, _>>()).collect();
    MooreMachine::new(inputs.to_vec(), names(k), init, outs, kernels).unwrap()
}
