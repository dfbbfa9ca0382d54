//! Numerical engine for normal geodesics of left-invariant (sub-)Riemannian
//! metrics on matrix Lie groups.
//!
//! Two independent geodesic methods are provided and cross-validated: the
//! costate system driven purely by structure constants
//! (ψ̇_j = Σ c_ij^k ψ_i ψ_k with ġ = g·embed(u), u the rank-r truncation of
//! ψ), and the coadjoint vector-field method (u(g) is the projection of
//! (Ad g)*(ψ_0) onto the distribution). Five worked models ship with
//! closed-form oracles: the Heisenberg group, the hyperbolic groups G_n,
//! SO(3), SH(2), and SE(2). Constructive controllability turns adapted
//! bracket words into bang control schedules that steer between group
//! elements.

pub mod algebra;
pub mod cli;
pub mod error;
pub mod files;
pub mod geodesics;
pub mod group;
pub mod models;
pub mod reachability;

pub use error::{Error, FileError};
