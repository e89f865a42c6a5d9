//! Multilevel multi-integration for two-dimensional integral transforms with
//! the asymptotically smooth kernel `1/|y - x|`.
//!
//! The transform is discretized with a second-order (bilinear) scheme, which
//! turns it into a dense multisummation against the twice-integrated kernel
//! `G^(2,2)`. That multisummation is evaluated in `O(n)` operations by
//! softening the kernel near its singular lines, transferring the softened
//! sum to ever coarser grids by anterpolation and interpolation, and adding
//! local corrections which are themselves evaluated by semi-coarsening.
//!
//! Module map:
//!
//! * [`grid`] uniform grids on `[-1, 1]²` and the 1-D transfer operators.
//! * [`kernels`] closed-form kernels and the exact derivative engine.
//! * [`softening`] continuity-condition softening per axis and in the corner.
//! * [`discretization`] the model problem, the `U` stencil and dense sums.
//! * [`transfer_params`] selection of the per-level `(p, m)` parameters.
//! * [`fast_eval`] the multilevel evaluator and its operation counter.
//! * [`bench`] the table-producing benchmark harness behind `mlmi-bench`.

pub mod bench;
pub mod counter;
pub mod discretization;
pub mod error;
pub mod fast_eval;
pub mod grid;
pub mod kernels;
pub mod quadrature;
pub mod softening;
pub mod transfer_params;

pub use counter::OpCounter;
pub use error::{Error, Result};
