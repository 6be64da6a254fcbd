//! Convolution powers of probability measures on unitary groups: Haar sampling, gate
//! ensembles, Fourier analysis on SU(2), moment operators on U(D), and operational probes of
//! convergence to the Haar measure.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod haar;
pub mod moments;
pub mod numkernel;
pub mod peterweyl;
pub mod probes;
pub mod report;

pub use error::{Error, Result};
