//! Traveling waves: shapes translating at constant speed `V` along `x`.
//!
//! A wave is described by an even cosine series `rho`, the speed `V`, a
//! pressure constant `p1` and the active strength `chi_c`. The boundary
//! condition
//!
//! ```text
//! gamma kappa + chi_c [f_act(c1 e^{-a V (R0 + rho) cos}) - f_act(c0)] + chi_u f_und(V n_1)
//!     + V (R0 + rho) cos - p1 - gamma / R0 = 0
//! ```
//!
//! is collocated on `2N` equispaced angles and projected onto the cosine modes
//! `0..=N`, then closed by the area constraint `int (R0 + rho)^2 - R0^2 = 0`
//! and the centering constraint `int rho cos = 0`. `p1` is measured from the
//! resting pressure, so the disk with `V = p1 = 0` solves the system for every
//! `chi_c`; the physical pressure constant is `p1 + gamma / R0 + chi_c f_act(c0)`.

mod diagnostics;
mod residual;
mod shape;
mod solve;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ForceLaw, ModelError, ModelParams};
use crate::special::newton::NewtonError;

pub use diagnostics::{
    bifurcation_report, bifurcation_report_with, bifurcation_structure, candidate_second_derivatives,
    curvature_equation_residual, order_sensitivity, BifurcationReport, BifurcationStructure, ExpansionCandidates, ReportOptions, ShapeDecay, Verdict,
};
pub use residual::{marker_normalization, marker_normalization_with, radial_moment, residual_f, TwProblem};
pub use shape::{collocation_nodes, cosine_table, project_cosine, BoundarySamples, Shape};
pub use solve::{continue_branch, continue_branch_with, solve_at_velocity, solve_at_velocity_with, BranchOptions};

pub const DEFAULT_ORDER: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TwError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-positive radius {radius} at theta = {theta}")]
    Geometry { theta: f64, radius: f64 },
    #[error("V = 0 is singular: every chi_c solves the system with the disk; use V > 0")]
    RestingVelocity,
    #[error("velocity must be positive and finite, got {0}")]
    InvalidVelocity(f64),
    #[error("Newton solve failed at V = {v}: {source}")]
    Solver {
        v: f64,
        #[source]
        source: NewtonError,
    },
    #[error("converged state has non-positive boundary concentration {0}")]
    NegativeConcentration(f64),
    #[error("continuation stalled at V = {v_reached} after {} states", partial.states.len())]
    Stalled { partial: Box<Branch>, v_reached: f64 },
    #[error("insufficient branch resolution: {0}")]
    Resolution(String),
    #[error("truncation order must be at least 2, got {0}")]
    Order(usize),
}

/// One solution of the traveling-wave system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelingWaveState {
    pub shape: Shape,
    pub v: f64,
    /// Pressure constant measured from the resting pressure.
    pub p1: f64,
    pub chi_c: f64,
    /// Marker normalisation `c1(V, rho)`.
    pub c1: f64,
}

impl TravelingWaveState {
    /// The bifurcation point: the disk at rest with `chi_c = chi_c*`.
    pub fn resting(params: &ModelParams, chi_c: f64, order: usize) -> Self {
        Self {
            shape: Shape::disk(params.r0, order),
            v: 0.0,
            p1: 0.0,
            chi_c,
            c1: params.c0(),
        }
    }

    /// Physical pressure constant `p1 + gamma / R0 + chi_c f_act(c0)`.
    pub fn pressure_constant(&self, params: &ModelParams, f_act: &ForceLaw) -> f64 {
        self.p1 + params.gamma / params.r0 + self.chi_c * f_act.eval(params.c0())
    }

    /// Image under the reflection `x -> -x`, which maps `V` to `-V`.
    pub fn reflected(&self) -> Self {
        let mut out = self.clone();
        for (k, a) in out.shape.rho_cos.iter_mut().enumerate() {
            if k % 2 == 1 {
                *a = -*a;
            }
        }
        out.v = -self.v;
        out
    }
}

/// States ordered by increasing `V`, starting at the bifurcation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub states: Vec<TravelingWaveState>,
    /// Index of the first state computed by pseudo-arclength continuation, if
    /// the Jacobian became too ill-conditioned for stepping in `V`.
    pub arclength_from: Option<usize>,
}

impl Branch {
    pub fn nearest(&self, v: f64) -> Option<&TravelingWaveState> {
        self.states
            .iter()
            .min_by(|a, b| (a.v - v).abs().total_cmp(&(b.v - v).abs()))
    }

    pub fn v_max(&self) -> f64 {
        self.states.iter().map(|s| s.v).fold(f64::NEG_INFINITY, f64::max)
    }
}
