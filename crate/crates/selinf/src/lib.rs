//! Data files, simulation harness and command-line front end for
//! `selinf-core`.

pub mod cli;
pub mod harness;
pub mod io;
pub mod methods;
pub mod scenario;
pub mod simulate;
