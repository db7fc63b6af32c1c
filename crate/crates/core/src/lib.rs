//! Numerical analysis of a Darcy free-boundary model of cell motility with
//! membrane undercooling.
//!
//! * [`model`] holds parameters, force laws, the resting disk and its
//!   stability threshold.
//! * [`special`] provides complex modified Bessel functions and the root,
//!   Newton and continuation kernels.
//! * [`stability`] evaluates the per-mode dispersion function, locates its
//!   roots and classifies the resting state.
//! * [`traveling_wave`] discretises the traveling-wave boundary problem in an
//!   even cosine basis, solves it and continues the branch that bifurcates from
//!   the disk.
//! * [`acceptance`] bundles the end-to-end numerical checks together with
//!   independent reference evaluations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod model;
pub mod special;
pub mod stability;
pub mod traveling_wave;

pub use model::{chi_c_star, resting_state, ForceFamily, ForceLaw, LawKind, ModelError, ModelParams, RestingState};
pub use special::ComplexValue;
pub use stability::{classify, dispersion_h, eigenmode, mode_spectrum, Classification, EigenMode, ModeSpectrum};
pub use traveling_wave::{
    bifurcation_report, continue_branch, solve_at_velocity, BifurcationReport, Branch, Shape, TravelingWaveState,
};
