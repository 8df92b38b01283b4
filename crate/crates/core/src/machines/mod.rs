//! Finite-state generators of transducers.

mod format;
mod moore;
mod unifilar;

pub use format::{MachineDoc, MooreDoc, MooreStateDoc, StateDoc, TransitionDoc};
pub use moore::{moore_to_transducer, moore_to_unifilar, BeliefMachine, BeliefState, MooreMachine, BELIEF_KEY_CAP};
pub use unifilar::UnifilarMachine;
