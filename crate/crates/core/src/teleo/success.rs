use std::collections::HashMap;

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::prob::{Probability, Rational};
use crate::transducer::{StateKey, Transducer};

use super::chain::solve_reachability;
use super::{couple, Action, CoupledSystem, Joint, Obs, Policy, State, TeleoEnvironment, Telos};

/// Largest product chain [`success_exact`] will build.
pub const EXACT_STATE_CAP: usize = 20_000;

/// First terms of the success sequence plus the mass still undecided.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BssPrefix {
    pub bound: Probability,
    /// `terms[k]`: probability that the first success happens at step `k`.
    pub terms: Vec<Probability>,
    /// Probability of no success so far, on branches whose environment is
    /// not certified to stay silent.
    pub live_mass: Probability,
}

impl BssPrefix {
    /// `n`-step sum.
    pub fn sum(&self) -> Probability {
        self.terms.iter().cloned().sum()
    }
}

/// Sound bounds on the success probability.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuccessInterval {
    pub lo: Probability,
    pub hi: Probability,
    pub exact: Option<Probability>,
    pub horizon_used: usize,
}

/// Success-sequence prefix `terms[0..=n]`. Frontier nodes with equal keys
/// are merged; nodes whose environment is certified are dropped.
pub fn success_prefix(c: &CoupledSystem, n: usize) -> BssPrefix {
    let mut frontier: Vec<(Rational, Transducer<(), Joint>)> = Vec::new();
    if !c.t.certified() {
        frontier.push((Rational::from_integer(1.into()), c.t.clone()));
    }
    let mut terms = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        let mut term = Rational::zero();
        let mut next: Vec<(Rational, Transducer<(), Joint>)> = Vec::new();
        let mut index: HashMap<StateKey, usize> = HashMap::new();
        for (w, node) in &frontier {
            for (j, p) in node.emit().iter() {
                let mass = w * p.value();
                if j.telos == Telos::Success {
                    term += mass;
                    continue;
                }
                let child = node.step(&(), j).expect("supported output");
                if child.certified() {
                    continue;
                }
                match child.key() {
                    Some(k) => match index.get(&k) {
                        Some(&at) => next[at].0 += mass,
                        None => {
                            index.insert(k, next.len());
                            next.push((mass, child));
                        }
                    },
                    None => next.push((mass, child)),
                }
            }
        }
        terms.push(Probability::new(term).expect("term is a probability"));
        frontier = next;
    }
    let live: Rational = frontier.iter().map(|(w, _)| w).sum();
    BssPrefix { bound: Probability::one(), terms, live_mass: Probability::new(live).expect("live mass") }
}

/// `[Σ terms, Σ terms + live]`, plus the exact value when both sides are
/// finite-state.
pub fn success_interval(policy: &Policy, env: &TeleoEnvironment, horizon: usize) -> Result<SuccessInterval> {
    let c = couple(policy, env)?;
    let prefix = success_prefix(&c, horizon);
    let lo = prefix.sum();
    let hi = &lo + &prefix.live_mass;
    let exact = match success_exact(policy, env) {
        Ok(v) => Some(v),
        Err(Error::NotFiniteState(_)) => None,
        Err(e) => return Err(e),
    };
    if let Some(x) = &exact {
        assert!(&lo <= x && x <= &hi, "exact value {x} outside [{lo}, {hi}]");
    }
    Ok(SuccessInterval { lo, hi, exact, horizon_used: horizon })
}

type P = Transducer<State, Action>;
type E = Transducer<Action, Obs>;

/// Exact success probability on the product chain of two finite-state
/// behaviors. Mixture nodes contribute the weighted values of their
/// components; certified environments contribute 0.
pub fn success_exact(policy: &Policy, env: &TeleoEnvironment) -> Result<Probability> {
    if policy.states != env.states || policy.actions != env.actions {
        return Err(Error::AlphabetMismatch("policy and environment alphabets differ".into()));
    }
    if env.t.certified() {
        return Ok(Probability::zero());
    }
    let mut chain = Chain::default();
    let root = chain.intern(policy.t.clone(), env.t.clone())?;
    let mut at = 0;
    while at < chain.nodes.len() {
        let (p, e) = chain.nodes[at].clone();
        let mut b = Rational::zero();
        let mut row = Vec::new();
        if let Some(parts) = p.components() {
            for (w, comp) in parts {
                row.push((chain.intern(comp.clone(), e.clone())?, w.value().clone()));
            }
        } else if let Some(parts) = e.components() {
            for (w, comp) in parts {
                if !comp.certified() {
                    row.push((chain.intern(p.clone(), comp.clone())?, w.value().clone()));
                }
            }
        } else {
            for (a, pa) in p.emit().iter() {
                for (o, pe) in e.emit().iter() {
                    let mass = pa.value() * pe.value();
                    if o.telos == Telos::Success {
                        b += mass;
                        continue;
                    }
                    let e2 = e.step(a, o).expect("supported observation");
                    if e2.certified() {
                        continue;
                    }
                    let p2 = p.step(&o.state, a).expect("supported action");
                    row.push((chain.intern(p2, e2)?, mass));
                }
            }
        }
        chain.b.push(b);
        chain.edges.push(row);
        at += 1;
    }
    let values = solve_reachability(&chain.b, &chain.edges);
    Ok(Probability::new(values[root].clone()).expect("success probability"))
}

#[derive(Default)]
struct Chain {
    index: HashMap<(StateKey, StateKey), usize>,
    nodes: Vec<(P, E)>,
    b: Vec<Rational>,
    edges: Vec<Vec<(usize, Rational)>>,
}

impl Chain {
    fn intern(&mut self, p: P, e: E) -> Result<usize> {
        let pk = p.key().ok_or_else(|| Error::NotFiniteState("policy node has no state key".into()))?;
        let ek = e.key().ok_or_else(|| Error::NotFiniteState("environment node has no state key".into()))?;
        if let Some(&k) = self.index.get(&(pk.clone(), ek.clone())) {
            return Ok(k);
        }
        if self.nodes.len() >= EXACT_STATE_CAP {
            return Err(Error::NotFiniteState(format!("product chain exceeds {EXACT_STATE_CAP} states")));
        }
        let k = self.nodes.len();
        self.index.insert((pk, ek), k);
        self.nodes.push((p, e));
        Ok(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::FiniteDist;
    use crate::teleo::zoo;

    fn p(n: i64, d: i64) -> Probability {
        Probability::frac(n, d)
    }

    #[test]
    fn despair_prefix() {
        let pi = Policy::constant(0, 1, 1);
        let c = couple(&pi, &zoo::despair(1, 1)).unwrap();
        let pre = success_prefix(&c, 0);
        assert_eq!(pre.terms, vec![p(1, 2)]);
        assert_eq!(pre.live_mass, Probability::zero());
        assert_eq!(success_prefix(&c, 3).terms, vec![p(1, 2), p(0, 1), p(0, 1), p(0, 1)]);
    }

    #[test]
    fn doom_prefix_is_certified_empty() {
        let pi = Policy::constant(0, 2, 2);
        let c = couple(&pi, &zoo::doom(2, 2)).unwrap();
        let pre = success_prefix(&c, 0);
        assert_eq!(pre.terms, vec![Probability::zero()]);
        assert_eq!(pre.live_mass, Probability::zero());
        let iv = success_interval(&pi, &zoo::doom(2, 2), 4).unwrap();
        assert_eq!((iv.lo, iv.hi, iv.exact), (Probability::zero(), Probability::zero(), Some(Probability::zero())));
    }

    #[test]
    fn testing_geometric_terms() {
        let pi = Policy::constant(1, 2, 2);
        let env = zoo::uniform_testing(&pi).unwrap();
        let pre = success_prefix(&couple(&pi, &env).unwrap(), 5);
        for (k, t) in pre.terms.iter().enumerate() {
            assert_eq!(*t, &p(3, 4) * &Probability::frac(1, 4i64.pow(k as u32)));
        }
        let iv = success_interval(&pi, &env, 5).unwrap();
        assert_eq!(iv.lo, Probability::frac(4i64.pow(6) - 1, 4i64.pow(6)));
        assert_eq!(iv.hi, Probability::one());
        assert_eq!(iv.exact, Some(Probability::one()));
    }

    #[test]
    fn constant_mismatch_is_three_quarters() {
        let pi = Policy::constant(0, 1, 2);
        let other = Policy::constant(1, 1, 2);
        let env = zoo::uniform_testing(&other).unwrap();
        assert_eq!(success_exact(&pi, &env).unwrap(), p(3, 4));
        assert_eq!(success_interval(&pi, &env, 1).unwrap().exact, Some(p(3, 4)));
    }

    #[test]
    fn absent_minded_iid_is_product() {
        let env = zoo::absent_minded_env();
        for (c, e) in [(1, 2), (1, 3), (3, 7), (1, 1), (0, 1)] {
            let pc = p(c, e);
            let dist = FiniteDist::new([(Action(0), pc.clone()), (Action(1), pc.complement())]).unwrap();
            let pi = Policy::iid(dist, 1, 2);
            assert_eq!(success_exact(&pi, &env).unwrap(), &pc * &pc.complement());
        }
    }

    #[test]
    fn ufs_counterexample_values() {
        for (n, num, den) in [(2u32, 2, 3), (3, 5, 7)] {
            let env = zoo::counterexample_env(n);
            let pi = zoo::imperfect_mimic_policy(n);
            assert_eq!(success_exact(&pi, &env).unwrap(), p(num, den));
            let literal = zoo::counterexample_env_literal(n);
            assert_eq!(success_exact(&pi, &literal).unwrap(), p(3, 4));
        }
    }

    #[test]
    fn keyless_nodes_are_not_finite() {
        let pi = Policy::constant(0, 1, 1);
        let table = crate::transducer::unroll(&zoo::despair(1, 1).t, 2, &[Action(0)]);
        let env = TeleoEnvironment::new(crate::transducer::reroll(&table), 1, 1);
        assert!(matches!(success_exact(&pi, &env), Err(Error::NotFiniteState(_))));
        let iv = success_interval(&pi, &env, 2).unwrap();
        assert_eq!(iv.exact, None);
        assert_eq!(iv.lo, p(1, 2));
    }
}
