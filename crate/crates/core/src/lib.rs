//! Ginzburg–Landau heat flow in curved thin domains around closed plane
//! curves, its thin-film limit on the curve, and the tools to compare them.
//!
//! The thin domain `Ω_ε = {γ(θ) + r ν(θ) : ε g0(θ) < r < ε g1(θ)}` is
//! handled in reference coordinates `(θ, σ) ∈ [0, 2π) × [0, 1]`; see
//! [`discretization`] for the grid and [`averaging`] for the weighted
//! average `M_ε` that maps thin-domain fields to the curve.

pub mod averaging;
pub mod banded;
pub mod cli;
pub mod config;
pub mod discretization;
pub mod error;
pub mod experiments;
pub mod galerkin;
pub mod geometry;
pub mod imex;
pub mod invariants;
pub mod io;
pub mod reaction;
pub mod surface_solver;
pub mod thin_solver;
pub mod trace;

pub use discretization::{GLParams, NormKind, SurfaceField, SurfaceGrid, ThinField, ThinGrid};
pub use error::{Error, Result};
pub use geometry::{CurveFamily, PlaneCurve, ProfileFn, ThicknessProfile, ThinDomain};
