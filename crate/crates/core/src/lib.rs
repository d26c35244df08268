//! Learning unknown quantum processes from randomized product-state experiments.

pub mod cli;
pub mod dense;
pub mod error;
pub mod experiments;
pub mod fermion;
pub mod learner;
pub mod norms;
pub mod optimize;
pub mod pauli;
pub mod rng;
pub mod shadow;
pub mod states;

pub use error::{Error, Result};
pub use pauli::{ExpansionProfile, KahanSum, Pauli, PauliExpectation, PauliString, SparsePauliOp};
pub use states::{ProductState, StabLabel};
