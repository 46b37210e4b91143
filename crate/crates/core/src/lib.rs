//! Tomographic reconstruction from circular means with transducers on a
//! circle, covering interior, exterior and mixed supports, together with
//! the intravascular photoacoustic (Abel) and ultrasound (Born/Volterra)
//! measurement models and a finite-difference wave simulator.

pub mod cli;
pub mod cmt;
pub mod error;
pub mod io;
pub mod ivpa;
pub mod ivus;
pub mod phantom;
pub mod specfun;
pub mod wavesim;

pub use error::{Error, Result};
