//! Experiment harness for equivariant box and observable distances:
//! instance generators, file formats, convergence experiments, reports and
//! the verification suite behind the `eqbox` binary.

pub mod corpus;
pub mod experiment;
pub mod gen;
pub mod io;
pub mod report;
pub mod verify;
