//! Small-noise limits of skew diffusions with non-Lipschitz drift.
//!
//! The pieces, bottom up: the problem model and its admissibility checks,
//! the skew transform to an ordinary Itô equation, the extremal solutions
//! of the noiseless equation, the limiting weight of the upper extremal,
//! Euler–Maruyama simulation and Monte Carlo ensembles.

pub mod gamma;
pub mod mc;
pub mod model;
pub mod ode;
pub mod presets;
pub mod quad;
pub mod rational;
pub mod rng;
pub mod roots;
pub mod sim;
pub mod transform;

pub use gamma::{
    gamma_closed_form, gamma_numeric, gamma_numeric_limit, GammaBranch, GammaError, GammaLimit,
    GammaResult,
};
pub use mc::{
    converge_sweep, run_ensemble, Classification, Ensemble, EnsembleConfig, EnsembleStats, McError,
    StepRule,
};
pub use model::{
    classify_case, default_grid, validate_conditions, CaseLabel, ConditionId, ConditionReport,
    Diffusion, ModelError, Problem, Side, SidedDrift, SigmaBranch, Sign, ValidatedProblem,
};
pub use ode::{
    extremal_solutions, funnel_solution, ExtremalPair, FunnelBranch, FunnelSolution, OdeError,
};
pub use rational::Rational;
pub use sim::{simulate_path, Path, SimError, SimParams};
pub use transform::{kappa, phi, transform_problem, ItoProblem, SkewMap, TransformError};
