//! Distribution-free regression for the relative treatment effect
//! θ(z1, z2) = P(T1 > T2 | Z1 = z1, Z2 = z2) from possibly right-censored
//! two-sample data.
//!
//! The pipeline is: Kaplan–Meier curves ([`survival`]) → two-sample jackknife
//! pseudo-observations ([`pseudo`]) → estimating-equation fit ([`gee`]) →
//! bootstrap tests ([`inference`]) → tie-corrected predictions ([`predict`]).
//! [`sim`] reproduces the Weibull simulation design used to study the tests.

pub mod error;
pub mod exec;
pub mod gee;
pub mod inference;
pub mod link;
pub mod predict;
pub mod pseudo;
pub mod sim;
pub mod stats;
pub mod survival;

pub use error::{Error, Result};
pub use exec::Execution;
pub use link::Link;
