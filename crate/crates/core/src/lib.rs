//! Interpreter and refinement checker for a concurrent probabilistic
//! ML-style language with presampling tapes.

pub mod dist;
pub mod lang;
pub mod sched;
pub mod fisch;
pub mod coupling;
pub mod harness;
