//! Consensus analysis for identical linear agents coupled over a directed
//! graph with non-uniform, time-varying communication delays.
//!
//! The pipeline: build the graph and its per-edge Laplacians ([`graph`]),
//! reduce the closed loop to the consensus-error system ([`model`]), assemble
//! the delay-dependent stability LMI ([`lmi`]), decide it with a certified
//! interior-point search ([`sdp`]), search delay margins ([`margin`]) and
//! integrate the delayed dynamics ([`sim`]) with Lyapunov–Krasovskii
//! diagnostics on the result ([`diagnostics`]).

pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod lmi;
pub mod margin;
pub mod matrix;
pub mod model;
pub mod sdp;
pub mod sim;

pub use diagnostics::{check_lemma1, check_lemma2, lyapunov_series, LyapunovSeries, QuadratureTrace};
pub use error::{Error, Result};
pub use graph::{DelayGraph, Edge, TopologyReport};
pub use lmi::{LmiAffineMap, Variable, VariableLayout, VariableValues};
pub use margin::{bisect_scale, coordinate_margins, probe, MarginQuery, MarginResult, SearchMode};
pub use matrix::{eig_sym, kron, min_eig_sym, spectral_abscissa, Matrix, SymEigResult};
pub use model::{assemble_error_system, AgentSystem, DelayBounds, ErrorSystem, ProtocolSign};
pub use sdp::{
    solve_feasibility, verify_certificate, Certificate, FeasibilityProblem, FeasibilityResult, Margins,
    SolverOptions, Status,
};
pub use sim::{
    make_sinusoidal_profile, simulate_x, simulate_z, DelayProfile, HistorySpec, StateKind, Trajectory,
};
