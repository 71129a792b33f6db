//! Euler–Maruyama for the transformed equation, mapped back by `κ`.
//!
//! The skew equation has a local-time term; the transformed one does not,
//! so the scheme is the plain explicit one on `η` and `ξ = κ(η)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::NormalStream;
use crate::transform::{sgn, ItoProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("eps must be positive and finite, got {0}")]
    InvalidEps(f64),
    #[error("step must be positive and at most the horizon {horizon}, got {step}")]
    InvalidStep { step: f64, horizon: f64 },
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("grid mismatch: path has {path} points, estimate has {estimate}")]
    GridMismatch { path: usize, estimate: usize },
}

/// Noise level, nominal step and the near-zero refinement switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub eps: f64,
    pub step: f64,
    /// Split a step in two (Brownian bridge midpoint) while `|η| < ε√h`.
    #[serde(default)]
    pub refine_near_zero: bool,
}

impl SimParams {
    pub fn new(eps: f64, step: f64) -> Self {
        Self {
            eps,
            step,
            refine_near_zero: false,
        }
    }

    pub fn with_refinement(mut self, on: bool) -> Self {
        self.refine_near_zero = on;
        self
    }

    /// `(n, T/n)` with `n = round(T/h)`.
    pub fn grid(&self, horizon: f64) -> Result<(usize, f64), SimError> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(SimError::InvalidEps(self.eps));
        }
        if !(self.step.is_finite() && self.step > 0.0 && self.step <= horizon) {
            return Err(SimError::InvalidStep {
                step: self.step,
                horizon,
            });
        }
        let n = (horizon / self.step).round().max(1.0) as usize;
        Ok((n, horizon / n as f64))
    }
}

/// Drives one Euler–Maruyama path without storing it: `visit(i, η_{i+1},
/// Δw_i)` is called after every step `i = 0..n`.
pub fn walk(
    ito: &ItoProblem,
    params: &SimParams,
    seed: u64,
    stream: u64,
    mut visit: impl FnMut(usize, f64, f64),
) -> Result<(), SimError> {
    let (n, h) = params.grid(ito.horizon())?;
    let eps = params.eps;
    let sqrt_h = h.sqrt();
    let mut normals = NormalStream::new(seed, stream);
    let mut eta = 0.0f64;
    let threshold = eps * sqrt_h;
    for i in 0..n {
        let z = normals.next_normal();
        let dw = sqrt_h * z;
        if params.refine_near_zero {
            // Always consume the second draw so step i owns a fixed slot.
            let z2 = normals.next_normal();
            if eta.abs() < threshold {
                let half = 0.5 * h;
                let dw1 = 0.5 * dw + 0.5 * sqrt_h * z2;
                let mid = eta + ito.drift(eta) * half + eps * ito.diffusion(eta) * dw1;
                eta = mid + ito.drift(mid) * half + eps * ito.diffusion(mid) * (dw - dw1);
            } else {
                eta += ito.drift(eta) * h + eps * ito.diffusion(eta) * dw;
            }
        } else {
            eta += ito.drift(eta) * h + eps * ito.diffusion(eta) * dw;
        }
        if !eta.is_finite() {
            return Err(SimError::NonFinite { step: i });
        }
        visit(i, eta, dw);
    }
    Ok(())
}

/// A stored path on the uniform grid `t_k = k·h`, `k = 0..=n`.
#[derive(Debug, Clone)]
pub struct Path {
    ito: ItoProblem,
    eps: f64,
    step: f64,
    seed: u64,
    stream: u64,
    eta: Vec<f64>,
    increments: Vec<f64>,
}

impl PartialEq for Path {
    fn eq(&self, other: &Self) -> bool {
        self.eps == other.eps
            && self.step == other.step
            && self.seed == other.seed
            && self.stream == other.stream
            && self.eta == other.eta
            && self.increments == other.increments
    }
}

impl Path {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn problem(&self) -> &ItoProblem {
        &self.ito
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn xi(&self, k: usize) -> f64 {
        self.ito.map().kappa(self.eta[k])
    }

    pub fn xi_values(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.xi(k)).collect()
    }

    /// `Δw_i = w(t_{i+1}) - w(t_i)`, one per step.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }
}

pub fn simulate_path(
    ito: &ItoProblem,
    params: &SimParams,
    seed: u64,
    stream: u64,
) -> Result<Path, SimError> {
    let (n, h) = params.grid(ito.horizon())?;
    let mut eta = Vec::with_capacity(n + 1);
    let mut increments = Vec::with_capacity(n);
    eta.push(0.0);
    walk(ito, params, seed, stream, |_, e, dw| {
        eta.push(e);
        increments.push(dw);
    })?;
    Ok(Path {
        ito: ito.clone(),
        eps: params.eps,
        step: h,
        seed,
        stream,
        eta,
        increments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalTimeMethod {
    Occupation,
    Tanaka,
}

/// `L̂(t_k, 0)` for every grid point of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeEstimate {
    pub method: LocalTimeMethod,
    pub bandwidth: Option<f64>,
    pub values: Vec<f64>,
}

/// `10·ε·√h`.
pub fn default_bandwidth(path: &Path) -> f64 {
    10.0 * path.eps * path.step.sqrt()
}

/// Occupation: `(1/2δ)·Σ_{i<k} 1{|ξ_i| < δ}·ε²σ²(ξ_i)·h`, i.e. the
/// occupation density in the clock of `⟨ξ⟩`, which is the normalization
/// under which the skew equation's local time enters.
/// Tanaka: `|η_k| - Σ_{i<k} sgn(η_i)(η_{i+1} - η_i)` with `η = φ(ξ)` and
/// `sgn(0) = 0`. The symmetric local time of `ξ` at 0 equals that of `η`;
/// the same sum taken on `ξ` itself does not converge to it when `β ≠ 0`,
/// because Euler steps overshoot 0 by amounts that differ on the two sides
/// and the `β|η|` part of `ξ` picks that up.
pub fn estimate_local_time(
    path: &Path,
    method: LocalTimeMethod,
    bandwidth: Option<f64>,
) -> Result<LocalTimeEstimate, SimError> {
    let mut values = Vec::with_capacity(path.len());
    values.push(0.0);
    match method {
        LocalTimeMethod::Occupation => {
            let delta = bandwidth.unwrap_or_else(|| default_bandwidth(path));
            if !(delta.is_finite() && delta > 0.0) {
                return Err(SimError::InvalidBandwidth(delta));
            }
            let problem = path.ito.problem();
            let scale = path.eps * path.eps * path.step / (2.0 * delta);
            let mut acc = 0.0;
            for k in 0..path.len() - 1 {
                let x = path.xi(k);
                if x.abs() < delta {
                    acc += scale * problem.sigma(x).powi(2);
                }
                values.push(acc);
            }
            Ok(LocalTimeEstimate {
                method,
                bandwidth: Some(delta),
                values,
            })
        }
        LocalTimeMethod::Tanaka => {
            let mut sum = 0.0;
            for w in path.eta.windows(2) {
                sum += sgn(w[0]) * (w[1] - w[0]);
                values.push(w[1].abs() - sum);
            }
            Ok(LocalTimeEstimate {
                method,
                bandwidth: None,
                values,
            })
        }
    }
}

/// `sup_k |ξ_k - β·L̂_k - Σ_{i<k} b(ξ_i)h - ε·Σ_{i<k} σ(ξ_i)Δw_i|`.
pub fn residual_check(path: &Path, lt: &LocalTimeEstimate) -> Result<f64, SimError> {
    if lt.values.len() != path.len() {
        return Err(SimError::GridMismatch {
            path: path.len(),
            estimate: lt.values.len(),
        });
    }
    let problem = path.ito.problem();
    let (h, eps, beta) = (path.step, path.eps, problem.beta());
    let mut integral = 0.0;
    let mut worst = 0.0f64;
    for k in 1..path.len() {
        let x = path.xi(k - 1);
        integral += problem.drift(x) * h + eps * problem.sigma(x) * path.increments[k - 1];
        worst = worst.max((path.xi(k) - beta * lt.values[k] - integral).abs());
    }
    Ok(worst)
}
