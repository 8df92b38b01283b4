//! TOML machine documents. Symbols and states are referred to by name and
//! probabilities are quoted `"p/q"` strings.
//!
//! ```toml
//! inputs = ["go"]
//! outputs = ["a", "b"]
//! initial = "x"
//!
//! [[states]]
//! name = "x"
//! emit = { a = "1/2", b = "1/2" }
//! next = [
//!     { input = "go", output = "a", to = "x" },
//!     { input = "go", output = "b", to = "x" },
//! ]
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{FiniteDist, Probability, Symbol};

use super::{MooreMachine, UnifilarMachine};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionDoc {
    pub input: String,
    pub output: String,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDoc {
    pub name: String,
    pub emit: BTreeMap<String, Probability>,
    #[serde(default)]
    pub next: Vec<TransitionDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineDoc {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub initial: String,
    pub states: Vec<StateDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MooreStateDoc {
    pub name: String,
    pub emit: BTreeMap<String, Probability>,
    /// Next-state kernel per input name.
    #[serde(rename = "move")]
    pub moves: BTreeMap<String, BTreeMap<String, Probability>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MooreDoc {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub init: BTreeMap<String, Probability>,
    pub states: Vec<MooreStateDoc>,
}

fn lookup<X: Clone>(names: &[String], values: &[X], name: &str, what: &str) -> Result<X> {
    names
        .iter()
        .position(|n| n == name)
        .map(|k| values[k].clone())
        .ok_or_else(|| Error::Format(format!("unknown {what} {name:?}")))
}

fn dist_from_doc<X: Symbol>(entries: &BTreeMap<String, Probability>, names: &[String], values: &[X], what: &str) -> Result<FiniteDist<X>> {
    let parsed = entries
        .iter()
        .map(|(k, p)| Ok((lookup(names, values, k, what)?, p.clone())))
        .collect::<Result<Vec<_>>>()?;
    FiniteDist::new(parsed)
}

fn dist_to_doc<X: Symbol>(d: &FiniteDist<X>, name: impl Fn(&X) -> String) -> BTreeMap<String, Probability> {
    d.iter().map(|(x, p)| (name(x), p.clone())).collect()
}

fn position<X: PartialEq>(values: &[X], x: &X, what: &str) -> Result<usize> {
    values.iter().position(|v| v == x).ok_or_else(|| Error::Format(format!("{what} missing from alphabet")))
}

impl MachineDoc {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Builds the machine; `input_values[k]` is the symbol named `inputs[k]`,
    /// likewise for outputs. Returns the machine and its initial state.
    pub fn build<I: Symbol, O: Symbol>(&self, input_values: &[I], output_values: &[O]) -> Result<(UnifilarMachine<I, O>, usize)> {
        if input_values.len() != self.inputs.len() || output_values.len() != self.outputs.len() {
            return Err(Error::AlphabetMismatch("document alphabets differ in size from the supplied symbols".into()));
        }
        let names: Vec<String> = self.states.iter().map(|s| s.name.clone()).collect();
        let index: Vec<usize> = (0..names.len()).collect();
        let mut outputs = Vec::new();
        let mut rows = Vec::new();
        for st in &self.states {
            outputs.push(dist_from_doc(&st.emit, &self.outputs, output_values, "output")?);
            let mut row = BTreeMap::new();
            for tr in &st.next {
                let key = (
                    lookup(&self.inputs, input_values, &tr.input, "input")?,
                    lookup(&self.outputs, output_values, &tr.output, "output")?,
                );
                let to = lookup(&names, &index, &tr.to, "state")?;
                if row.insert(key, to).is_some() {
                    return Err(Error::Format(format!("duplicate transition ({}, {}) in state {}", tr.input, tr.output, st.name)));
                }
            }
            rows.push(row);
        }
        let initial = lookup(&names, &index, &self.initial, "state")?;
        Ok((UnifilarMachine::new(input_values.to_vec(), names, outputs, rows)?, initial))
    }

    /// Document for `m` pointed at `initial`, naming symbols by position in
    /// the given alphabets.
    pub fn from_machine<I: Symbol, O: Symbol>(
        m: &UnifilarMachine<I, O>,
        initial: usize,
        inputs: (&[String], &[I]),
        outputs: (&[String], &[O]),
    ) -> Result<Self> {
        let out_name = |o: &O| position(outputs.1, o, "output").map(|k| outputs.0[k].clone());
        let mut states = Vec::new();
        for s in 0..m.len() {
            let emit = m
                .output(s)
                .iter()
                .map(|(o, p)| Ok((out_name(o)?, p.clone())))
                .collect::<Result<BTreeMap<_, _>>>()?;
            let mut next = Vec::new();
            for i in m.inputs() {
                for o in m.output(s).support() {
                    next.push(TransitionDoc {
                        input: inputs.0[position(inputs.1, i, "input")?].clone(),
                        output: out_name(o)?,
                        to: m.names()[m.next_state(s, i, o).expect("total")].clone(),
                    });
                }
            }
            states.push(StateDoc { name: m.names()[s].clone(), emit, next });
        }
        Ok(MachineDoc {
            inputs: inputs.0.to_vec(),
            outputs: outputs.0.to_vec(),
            initial: m.names()[initial].clone(),
            states,
        })
    }
}

impl MooreDoc {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn build<I: Symbol, O: Symbol>(&self, input_values: &[I], output_values: &[O]) -> Result<MooreMachine<I, O>> {
        if input_values.len() != self.inputs.len() || output_values.len() != self.outputs.len() {
            return Err(Error::AlphabetMismatch("document alphabets differ in size from the supplied symbols".into()));
        }
        let names: Vec<String> = self.states.iter().map(|s| s.name.clone()).collect();
        let index: Vec<usize> = (0..names.len()).collect();
        let init = dist_from_doc(&self.init, &names, &index, "state")?;
        let mut outputs = Vec::new();
        let mut kernels = Vec::new();
        for st in &self.states {
            outputs.push(dist_from_doc(&st.emit, &self.outputs, output_values, "output")?);
            let mut row = BTreeMap::new();
            for (input, kernel) in &st.moves {
                row.insert(lookup(&self.inputs, input_values, input, "input")?, dist_from_doc(kernel, &names, &index, "state")?);
            }
            kernels.push(row);
        }
        MooreMachine::new(input_values.to_vec(), names, init, outputs, kernels)
    }

    pub fn from_machine<I: Symbol, O: Symbol>(m: &MooreMachine<I, O>, inputs: (&[String], &[I]), outputs: (&[String], &[O])) -> Result<Self> {
        let names = m.names();
        let state_name = |y: &usize| names[*y].clone();
        let mut states = Vec::new();
        for y in 0..m.len() {
            let mut emit = BTreeMap::new();
            for (o, p) in m.output(y).iter() {
                emit.insert(outputs.0[position(outputs.1, o, "output")?].clone(), p.clone());
            }
            let mut moves = BTreeMap::new();
            for i in m.inputs() {
                moves.insert(inputs.0[position(inputs.1, i, "input")?].clone(), dist_to_doc(m.kernel(y, i), state_name));
            }
            states.push(MooreStateDoc { name: names[y].clone(), emit, moves });
        }
        Ok(MooreDoc {
            inputs: inputs.0.to_vec(),
            outputs: outputs.0.to_vec(),
            init: dist_to_doc(m.init(), state_name),
            states,
        })
    }
}
