//! Liouvillian spectra, steady states and relaxation dynamics of a
//! monitored free-fermion chain, with and without unitary feedback after
//! each measurement, under open or periodic boundaries.
//!
//! ```no_run
//! use skinlab::model::{Boundary, ModelSpec};
//! use skinlab::superop::{full_spectrum, Lindbladian, Precision};
//!
//! let spec = ModelSpec::new(20, Boundary::Obc, 0.6, true).unwrap();
//! let lv = Lindbladian::from_spec(&spec).unwrap();
//! let s = full_spectrum(&lv, Precision::Double).unwrap();
//! println!("gap = {}", s.gap);
//! ```

pub mod dynamics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod manybody;
pub mod model;
pub mod perturb;
pub mod steady;
pub mod superop;

pub use error::{Error, Result};
pub use model::{Boundary, ModelSpec};
