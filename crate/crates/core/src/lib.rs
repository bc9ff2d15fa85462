//! Sparse identification of graph-structured nonlinear dynamics.
//!
//! The crate fits governing equations `ẋ = Θ(x) Ξ` from trajectory data with
//! sequentially thresholded ridge regression (SINDy) and with a variant
//! whose ridge penalty is weighted per term by network connectivity
//! (SINDyG). It also ships a coupled Stuart–Landau simulator for ground
//! truth, scoring metrics, and the experiment drivers behind the `sindyg`
//! command-line tool.

pub mod error;
pub mod experiment;
pub mod graph;
pub mod library;
pub mod metrics;
pub mod oscillator;
pub mod regression;
pub mod trajectory;

pub use error::{Result, SindyError};
pub use graph::{generate_er, generate_sf, load_graph, save_graph, StateVariableMap, WeightedGraph};
pub use library::{column_normalize, FeatureLibrary, TermDescriptor};
pub use metrics::{cei, complexity, mse, r_squared, timed_fit, MetricsReport};
pub use oscillator::{
    integrate_rk4, integrate_rk4_strided, random_initial_state, sample_random_params, sl_rhs,
    true_coefficients, SlNetwork, SlParams,
};
pub use regression::{
    compute_penalty, fit_coefficients, penalized_ridge_solve, penalty_value, predict_derivs,
    ridge_solve, simulate_model, stlsq, stlsq_graph, CoefficientMatrix, Method, ModelFile,
    PenaltyMatrix, SolverConfig,
};
pub use trajectory::{finite_diff_derivs, Trajectory};
