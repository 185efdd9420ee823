//! Numerical laboratory for simultaneous blowup in the system
//! `u_t = u_xx + exp(p v)`, `v_t = mu v_xx + exp(q u)`.

pub mod error;
pub mod io;
pub mod model;
pub mod modes;
pub mod regions;
pub mod shooting;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use model::Params;
