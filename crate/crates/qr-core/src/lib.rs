//! Computational word metrics on finitely generated groups.
//!
//! The crate materializes finite balls of Cayley graphs for a fixed set of
//! group families (free abelian, free, Heisenberg, Sol lattices, BS(1,n),
//! direct and free products), measures quasi-geodesic constants of discrete
//! paths, runs avoidant-path divergence experiments, and executes the
//! quasi-redirecting construction that turns one ray into another while
//! keeping uniform constants.
//!
//! Everything here is `no_std` + `alloc`: pure deterministic computation over
//! immutable values. File formats, plotting and the CLI live in the `qrlab`
//! companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod avoidant;
pub mod ball;
pub mod divergence;
pub mod fmath;
pub mod group;
pub mod oracle;
pub mod path;
pub mod redirect;
pub mod surgery;
#[cfg(test)]
pub(crate) mod testutil;
pub mod trials;

pub use ball::{grow_ball, Ball, BallError, DEFAULT_VERTEX_BUDGET};
pub use group::{parse_group_spec, Family, GroupElement, GroupError, GroupSpec};
pub use oracle::{Distance, DistanceOracle, OracleError, OracleMode};
pub use path::{qg_constants, DiscretePath, PathError, QGReport};
