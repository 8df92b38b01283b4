//! Scenario documents: alphabets, named policies and environments, tasks.
//!
//! ```toml
//! states = ["here"]
//! actions = ["continue", "exit"]
//!
//! [policies.coin]
//! kind = "iid"
//! weights = { continue = "1/2", exit = "1/2" }
//!
//! [environments.road]
//! kind = "absent-minded"
//!
//! [[tasks]]
//! kind = "eval"
//! policy = "coin"
//! env = "road"
//! expect = "1/4"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use teleo_core::machines::{moore_to_transducer, MachineDoc, MooreDoc};
use teleo_core::planner::iid_policy;
use teleo_core::teleo::{ambivalent_evolve, doomify, truncate_single_success, zoo, Action, Obs, Policy, State, TeleoEnvironment};
use teleo_core::{mix, FiniteDist, Probability, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicyDef {
    Constant { action: String },
    Iid { weights: BTreeMap<String, Probability> },
    Machine { machine: MachineDoc },
    ImperfectMimic { n: u32 },
    AlphaMimic { n: u32, alpha: Probability },
    Mix { weights: Vec<Probability>, of: Vec<String> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvolveMode {
    #[default]
    ValueLaden,
    Sensorimotor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvDef {
    Doom,
    Despair,
    Success,
    AbsentMinded,
    Counterexample { n: u32 },
    CounterexampleLiteral { n: u32 },
    Testing { policy: String },
    Tricky { policy: String, other: String },
    Truncate { env: String },
    Doomify { env: String },
    Machine { machine: MachineDoc },
    Moore { machine: MooreDoc },
    Mix { weights: Vec<Probability>, of: Vec<String> },
    Evolve {
        env: String,
        trajectory: Vec<(String, String)>,
        #[serde(default)]
        mode: EvolveMode,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskDef {
    Eval {
        policy: String,
        env: String,
        horizon: Option<usize>,
        expect: Option<Probability>,
    },
    Plan {
        env: String,
        horizon: Option<usize>,
        expect: Option<Probability>,
    },
    CheckOptimal {
        policy: String,
        env: String,
        #[serde(default)]
        class: ClassDef,
        horizon: Option<usize>,
        grid: Option<u32>,
        n: Option<usize>,
        expect: Option<String>,
    },
    CheckBellman {
        policy: String,
        env: String,
        trajectory: Vec<(String, String)>,
        horizon: Option<usize>,
        expect: Option<String>,
    },
    CheckSensorimotor {
        policy: String,
        env: String,
        trajectory: Vec<(String, String)>,
        horizon: Option<usize>,
        expect: Option<String>,
    },
    CheckSpecifiable {
        policy: String,
        env: String,
        horizon: Option<usize>,
        expect: Option<bool>,
    },
    Preconditions {
        policy: String,
        env: String,
        depth: Option<usize>,
        expect: Option<bool>,
    },
    Decompose {
        policy: String,
        depth: Option<usize>,
    },
    Sweep {
        env: String,
        grid: Option<u32>,
        expect: Option<Probability>,
    },
    Equivalent {
        left: String,
        right: String,
        depth: Option<usize>,
        expect: Option<bool>,
    },
    Demo {
        name: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassDef {
    #[default]
    All,
    Deterministic,
    Iid,
    DetUfs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    #[serde(default)]
    pub policies: BTreeMap<String, PolicyDef>,
    #[serde(default)]
    pub environments: BTreeMap<String, EnvDef>,
    #[serde(default)]
    pub tasks: Vec<TaskDef>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| anyhow!("parse error: {}", e.to_string().trim_end()))?;
        s.check_alphabets()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    fn check_alphabets(&self) -> Result<()> {
        for (what, names) in [("state", &self.states), ("action", &self.actions)] {
            if names.is_empty() {
                bail!("validation error: the {what} alphabet is empty");
            }
            let unique: BTreeSet<&String> = names.iter().collect();
            if unique.len() != names.len() {
                bail!("validation error: duplicate {what} names");
            }
        }
        Ok(())
    }
}

/// Canonical observation names: `<state>:none` and `<state>:success`.
pub fn obs_names(states: &[String]) -> Vec<String> {
    states.iter().flat_map(|s| [format!("{s}:none"), format!("{s}:success")]).collect()
}

fn obs_values(n: u32) -> Vec<Obs> {
    (0..n).flat_map(|s| [Obs::nothing(s), Obs::success(s)]).collect()
}

/// Built definitions.
pub struct World {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub policies: BTreeMap<String, Policy>,
    pub envs: BTreeMap<String, TeleoEnvironment>,
}

impl World {
    pub fn ns(&self) -> u32 {
        self.states.len() as u32
    }

    pub fn na(&self) -> u32 {
        self.actions.len() as u32
    }

    pub fn state(&self, name: &str) -> Result<State> {
        self.states.iter().position(|s| s == name).map(|k| State(k as u32)).ok_or_else(|| anyhow!("validation error: unknown state {name:?}"))
    }

    pub fn action(&self, name: &str) -> Result<Action> {
        self.actions.iter().position(|s| s == name).map(|k| Action(k as u32)).ok_or_else(|| anyhow!("validation error: unknown action {name:?}"))
    }

    pub fn policy(&self, name: &str) -> Result<&Policy> {
        self.policies.get(name).ok_or_else(|| anyhow!("validation error: unknown policy {name:?}"))
    }

    pub fn env(&self, name: &str) -> Result<&TeleoEnvironment> {
        self.envs.get(name).ok_or_else(|| anyhow!("validation error: unknown environment {name:?}"))
    }

    pub fn trajectory(&self, pairs: &[(String, String)]) -> Result<Trajectory<State, Action>> {
        let mut t = Trajectory::empty();
        for (s, a) in pairs {
            t.push(self.state(s)?, self.action(a)?);
        }
        Ok(t)
    }

    pub fn state_name(&self, s: State) -> &str {
        &self.states[s.0 as usize]
    }

    pub fn action_name(&self, a: Action) -> &str {
        &self.actions[a.0 as usize]
    }

    pub fn build(s: &Scenario) -> Result<World> {
        let mut w = World { states: s.states.clone(), actions: s.actions.clone(), policies: BTreeMap::new(), envs: BTreeMap::new() };
        for name in s.policies.keys() {
            w.build_policy(s, name, &mut Vec::new())?;
        }
        for name in s.environments.keys() {
            w.build_env(s, name, &mut Vec::new())?;
        }
        Ok(w)
    }

    fn build_policy(&mut self, s: &Scenario, name: &str, stack: &mut Vec<String>) -> Result<Policy> {
        if let Some(p) = self.policies.get(name) {
            return Ok(p.clone());
        }
        let def = s.policies.get(name).ok_or_else(|| anyhow!("validation error: unknown policy {name:?}"))?;
        if stack.iter().any(|n| n == name) {
            bail!("validation error: policy {name:?} is defined in terms of itself");
        }
        stack.push(name.to_string());
        let (ns, na) = (self.ns(), self.na());
        let p = (|| -> Result<Policy> {
            Ok(match def {
                PolicyDef::Constant { action } => Policy::constant(self.action(action)?.0, ns, na),
                PolicyDef::Iid { weights } => {
                    let mut w = vec![Probability::zero(); na as usize];
                    for (a, p) in weights {
                        w[self.action(a)?.0 as usize] = p.clone();
                    }
                    FiniteDist::new(w.iter().cloned().enumerate().map(|(k, p)| (Action(k as u32), p)))?;
                    iid_policy(&w, ns)
                }
                PolicyDef::Machine { machine } => {
                    let inputs: Vec<State> = machine.inputs.iter().map(|x| self.state(x)).collect::<Result<_>>()?;
                    let outputs: Vec<Action> = machine.outputs.iter().map(|x| self.action(x)).collect::<Result<_>>()?;
                    if inputs.len() != ns as usize {
                        bail!("validation error: machine must read every state");
                    }
                    let (m, init) = machine.build(&inputs, &outputs)?;
                    Policy::from_machine(Arc::new(m), init, ns, na)?
                }
                PolicyDef::ImperfectMimic { n } => {
                    self.mimic_sizes(*n)?;
                    zoo::imperfect_mimic_policy(*n)
                }
                PolicyDef::AlphaMimic { n, alpha } => {
                    self.mimic_sizes(*n)?;
                    zoo::alpha_mimic_policy(*n, alpha)
                }
                PolicyDef::Mix { weights, of } => {
                    let parts = of.iter().map(|n| self.build_policy(s, n, stack).map(|p| p.t)).collect::<Result<Vec<_>>>()?;
                    Policy::new(mix(weights, &parts)?, ns, na)
                }
            })
        })()
        .with_context(|| format!("in policy {name:?}"))?;
        stack.pop();
        self.policies.insert(name.to_string(), p.clone());
        Ok(p)
    }

    fn mimic_sizes(&self, n: u32) -> Result<()> {
        if n < 2 || self.ns() != n || self.na() != n + 1 {
            bail!("validation error: the mimic family with n = {n} needs {n} states and {} actions", n + 1);
        }
        Ok(())
    }

    fn build_env(&mut self, s: &Scenario, name: &str, stack: &mut Vec<String>) -> Result<TeleoEnvironment> {
        if let Some(e) = self.envs.get(name) {
            return Ok(e.clone());
        }
        let def = s.environments.get(name).ok_or_else(|| anyhow!("validation error: unknown environment {name:?}"))?;
        if stack.iter().any(|n| n == name) {
            bail!("validation error: environment {name:?} is defined in terms of itself");
        }
        stack.push(name.to_string());
        let (ns, na) = (self.ns(), self.na());
        let e = (|| -> Result<TeleoEnvironment> {
            Ok(match def {
                EnvDef::Doom => zoo::doom(ns, na),
                EnvDef::Despair => zoo::despair(ns, na),
                EnvDef::Success => zoo::success_env(ns, na),
                EnvDef::AbsentMinded => {
                    if (ns, na) != (1, 2) {
                        bail!("validation error: the absent-minded environment needs 1 state and 2 actions");
                    }
                    zoo::absent_minded_env()
                }
                EnvDef::Counterexample { n } => {
                    self.mimic_sizes(*n)?;
                    zoo::counterexample_env(*n)
                }
                EnvDef::CounterexampleLiteral { n } => {
                    self.mimic_sizes(*n)?;
                    zoo::counterexample_env_literal(*n)
                }
                EnvDef::Testing { policy } => zoo::uniform_testing(&self.build_policy(s, policy, &mut Vec::new())?)?,
                EnvDef::Tricky { policy, other } => {
                    let p = self.build_policy(s, policy, &mut Vec::new())?;
                    let q = self.build_policy(s, other, &mut Vec::new())?;
                    zoo::tricky_testing(&p, &q)?
                }
                EnvDef::Truncate { env } => truncate_single_success(&self.build_env(s, env, stack)?),
                EnvDef::Doomify { env } => doomify(&self.build_env(s, env, stack)?),
                EnvDef::Machine { machine } => {
                    let inputs: Vec<Action> = machine.inputs.iter().map(|x| self.action(x)).collect::<Result<_>>()?;
                    if inputs.len() != na as usize {
                        bail!("validation error: machine must read every action");
                    }
                    let outputs = self.observations(&machine.outputs)?;
                    let (m, init) = machine.build(&inputs, &outputs)?;
                    TeleoEnvironment::from_machine(m, init, ns, na)?
                }
                EnvDef::Moore { machine } => {
                    let inputs: Vec<Action> = machine.inputs.iter().map(|x| self.action(x)).collect::<Result<_>>()?;
                    if inputs.len() != na as usize {
                        bail!("validation error: machine must read every action");
                    }
                    let outputs = self.observations(&machine.outputs)?;
                    TeleoEnvironment::new(moore_to_transducer(&machine.build(&inputs, &outputs)?), ns, na)
                }
                EnvDef::Mix { weights, of } => {
                    let parts = of.iter().map(|n| self.build_env(s, n, stack).map(|e| e.t)).collect::<Result<Vec<_>>>()?;
                    TeleoEnvironment::new(mix(weights, &parts)?, ns, na)
                }
                EnvDef::Evolve { env, trajectory, mode } => {
                    let mut e = self.build_env(s, env, stack)?;
                    for (st, a) in trajectory {
                        let (st, a) = (self.state(st)?, self.action(a)?);
                        e = match mode {
                            EvolveMode::ValueLaden => e.step_nothing(a, st).ok_or_else(|| anyhow!("trajectory leaves the support"))?,
                            EvolveMode::Sensorimotor => ambivalent_evolve(&e, a, st)?,
                        };
                    }
                    e
                }
            })
        })()
        .with_context(|| format!("in environment {name:?}"))?;
        stack.pop();
        self.envs.insert(name.to_string(), e.clone());
        Ok(e)
    }

    fn observations(&self, names: &[String]) -> Result<Vec<Obs>> {
        let all = obs_names(&self.states);
        let values = obs_values(self.ns());
        names
            .iter()
            .map(|n| all.iter().position(|x| x == n).map(|k| values[k]).ok_or_else(|| anyhow!("validation error: unknown observation {n:?}")))
            .collect()
    }

    /// The scenario with every machine-backed definition written out as an
    /// explicit machine. Other definitions are kept as written.
    pub fn dump(&self, s: &Scenario) -> Result<Scenario> {
        let mut out = s.clone();
        let state_values: Vec<State> = (0..self.ns()).map(State).collect();
        let action_values: Vec<Action> = (0..self.na()).map(Action).collect();
        let obs = (obs_names(&self.states), obs_values(self.ns()));
        for (name, p) in &self.policies {
            if let Some((m, init)) = p.t.machine() {
                let doc = MachineDoc::from_machine(m, init, (&self.states, &state_values), (&self.actions, &action_values))?;
                out.policies.insert(name.clone(), PolicyDef::Machine { machine: doc });
            }
        }
        for (name, e) in &self.envs {
            if let Some((m, init)) = e.t.machine() {
                let doc = MachineDoc::from_machine(m, init, (&self.actions, &action_values), (&obs.0, &obs.1))?;
                out.environments.insert(name.clone(), EnvDef::Machine { machine: doc });
            }
        }
        Ok(out)
    }
}
