//! The piecewise-linear change of variables that removes the local-time
//! term: `ξ = κ(η)` where `η` solves an ordinary Itô equation.

use std::sync::Arc;

use thiserror::Error;

use crate::model::Problem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("skewness must satisfy |beta| < 1, got {0}")]
    InvalidBeta(f64),
}

/// Sign with `sgn(0) = 0`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `κ(x) = (1+β)x` for `x ≥ 0`, `(1-β)x` for `x ≤ 0`, and its inverse `φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewMap {
    beta: f64,
}

impl SkewMap {
    pub fn new(beta: f64) -> Result<Self, TransformError> {
        if beta.is_nan() || beta.abs() >= 1.0 {
            return Err(TransformError::InvalidBeta(beta));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub fn kappa(&self, x: f64) -> f64 {
        if x >= 0.0 {
            (1.0 + self.beta) * x
        } else {
            (1.0 - self.beta) * x
        }
    }

    #[inline]
    pub fn phi(&self, x: f64) -> f64 {
        if x >= 0.0 {
            x / (1.0 + self.beta)
        } else {
            x / (1.0 - self.beta)
        }
    }

    /// `1 + β·sgn(x)`.
    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        1.0 + self.beta * sgn(x)
    }
}

pub fn kappa(x: f64, beta: f64) -> Result<f64, TransformError> {
    Ok(SkewMap::new(beta)?.kappa(x))
}

pub fn phi(x: f64, beta: f64) -> Result<f64, TransformError> {
    Ok(SkewMap::new(beta)?.phi(x))
}

/// `η = ∫b̃(η)ds + ε∫σ̃(η)dw` with `b̃ = b∘κ / (1+β sgn)` and
/// `σ̃ = σ∘κ / (1+β sgn)`, built by composition over the original problem.
#[derive(Debug, Clone)]
pub struct ItoProblem {
    problem: Arc<Problem>,
    map: SkewMap,
}

impl ItoProblem {
    pub fn new(problem: Arc<Problem>) -> Result<Self, TransformError> {
        let map = SkewMap::new(problem.beta())?;
        Ok(Self { problem, map })
    }

    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        self.problem.drift(self.map.kappa(x)) / self.map.slope(x)
    }

    #[inline]
    pub fn diffusion(&self, x: f64) -> f64 {
        self.problem.sigma(self.map.kappa(x)) / self.map.slope(x)
    }

    pub fn map(&self) -> SkewMap {
        self.map
    }

    pub fn beta(&self) -> f64 {
        self.map.beta
    }

    pub fn horizon(&self) -> f64 {
        self.problem.horizon()
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }
}

pub fn transform_problem(problem: &Problem) -> Result<ItoProblem, TransformError> {
    ItoProblem::new(Arc::new(problem.clone()))
}
