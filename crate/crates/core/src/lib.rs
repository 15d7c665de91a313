//! Optimal minimum-error state discrimination in finitely generated
//! generalized probabilistic theories (GPTs).
//!
//! A GPT is described here by a polyhedral state cone, a polyhedral effect
//! cone and a unit effect `u`, all living in a real vector space where states
//! and effects pair through the Euclidean inner product. Given an ensemble of
//! states `w_x` with priors `q_x`, the crate
//!
//! - solves the measurement problem `max Σ q_x e_x[w_x]` over measurements
//!   `Σ e_x = u`, and the symmetry-operator problem `min u[K]` subject to
//!   `K ≥ q_x w_x` in the order induced by the effect cone, as linear programs;
//! - extracts the complementary decomposition `K = q_x w_x + r_x d_x` and
//!   certifies optimality through the complementarity conditions;
//! - checks the congruence of the state and complementary polytopes, and the
//!   ratio formula for uniform priors;
//! - generates the regular polygon family of GPTs and runs its worked
//!   examples;
//! - provides brute-force oracles independent of the simplex engine.
//!
//! ```
//! use gptdisc::{discrimination, polygon};
//!
//! let ens = polygon::uniform_ensemble(4).unwrap();
//! let sol = discrimination::solve_discrimination(&ens, 1e-9).unwrap();
//! assert!((sol.p_guess - 0.5).abs() < 1e-9);
//! ```

pub mod cone;
pub mod discrimination;
mod error;
pub mod geometry;
pub mod io;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod polygon;

pub use error::{Error, Result};
pub use model::{Ensemble, GptModel, Measurement, Point, ValidationReport};

/// Default absolute tolerance for equality and sign checks.
pub const DEFAULT_TOL: f64 = 1e-9;
