//! Exact oracles for SAT-derived weighted languages, their constructive
//! witnesses, and a small learning stack contrasting locally normalized
//! autoregressive models with residual energy-based models.

pub mod bits;
pub mod formula;
pub mod language;
pub mod datagen;
pub mod rng;
pub mod witness;
pub mod seqmodel;
pub mod rebm;
