//! Ensembles of paths classified against the extremal solutions.
//!
//! Paths are keyed by `(master_seed, stream)` with streams `0..n`, walked
//! without being stored, and reduced in stream order, so an ensemble is
//! bitwise reproducible under any worker count.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gamma::{self, GammaError};
use crate::model::{CaseLabel, Problem};
use crate::ode::{extremal_solutions, ExtremalPair, OdeError};
use crate::sim::{self, Path, SimError, SimParams};
use crate::transform::{ItoProblem, TransformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("extremal solutions are both zero (case {0}); there is nothing to classify against")]
    Degenerate(CaseLabel),
    #[error("all {n} paths were ambiguous at eps = {eps}; try a smaller eps")]
    AllAmbiguous { n: usize, eps: f64 },
    #[error("an ensemble needs at least {min} paths, got {0}", min = MIN_PATHS)]
    TooFewPaths(usize),
    #[error("eps ladder must be nonempty and strictly decreasing")]
    BadLadder,
    #[error("classification tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Gamma(#[from] GammaError),
}

pub const MIN_PATHS: usize = 100;
pub const DEFAULT_TOLERANCE: f64 = 0.1;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Upper,
    Lower,
    Ambiguous,
}

/// Extremal solutions sampled on a path grid, with the separation used to
/// scale the classification tolerance.
#[derive(Debug, Clone)]
pub struct SampledExtremals {
    upper: Vec<f64>,
    lower: Vec<f64>,
    gap: f64,
    step: f64,
}

impl SampledExtremals {
    /// `n + 1` points `k·h`; the gap is `max(ȳ(T) - y̲(T), 10ε)`.
    pub fn new(pair: &ExtremalPair, n: usize, step: f64, eps: f64) -> Result<Self, McError> {
        if pair.is_degenerate() {
            return Err(McError::Degenerate(pair.case()));
        }
        let horizon = pair.horizon();
        let mut upper = Vec::with_capacity(n + 1);
        let mut lower = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = (k as f64 * step).min(horizon);
            upper.push(pair.try_upper(t)?);
            lower.push(pair.try_lower(t)?);
        }
        let gap = (upper[n] - lower[n]).max(10.0 * eps);
        Ok(Self {
            upper,
            lower,
            gap,
            step,
        })
    }

    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// `[F(ȳ), F(y̲)]` for each functional, on the same grid and quadrature
    /// rule as the paths.
    fn functionals(&self) -> [[f64; 2]; 3] {
        let mut u = FunctionalAcc::new(self.step);
        let mut l = FunctionalAcc::new(self.step);
        for k in 0..self.len() {
            u.push(self.upper[k]);
            l.push(self.lower[k]);
        }
        let (fu, fl) = (u.finish(), l.finish());
        [[fu[0], fl[0]], [fu[1], fl[1]], [fu[2], fl[2]]]
    }
}

/// Running uniform distances to both extremals.
#[derive(Debug, Clone, Copy, Default)]
struct DistanceTracker {
    to_upper: f64,
    to_lower: f64,
}

impl DistanceTracker {
    #[inline]
    fn push(&mut self, ext: &SampledExtremals, k: usize, xi: f64) {
        self.to_upper = self.to_upper.max((xi - ext.upper[k]).abs());
        self.to_lower = self.to_lower.max((xi - ext.lower[k]).abs());
    }

    fn classify(&self, gap: f64, tol: f64) -> Classification {
        let margin = tol * gap;
        if self.to_upper < self.to_lower - margin {
            Classification::Upper
        } else if self.to_lower < self.to_upper - margin {
            Classification::Lower
        } else {
            Classification::Ambiguous
        }
    }
}

/// Upper if the uniform distance to `ȳ` beats the one to `y̲` by more than
/// `tol·gap`, Lower symmetrically, Ambiguous otherwise.
pub fn classify_trajectory(
    path: &Path,
    extremals: &ExtremalPair,
    tol: f64,
) -> Result<Classification, McError> {
    check_tolerance(tol)?;
    let ext = SampledExtremals::new(extremals, path.len() - 1, path.step(), path.eps())?;
    Ok(classify_sampled(&path.xi_values(), &ext, tol))
}

/// Same rule for a trajectory given directly as values on the grid of
/// `ext`.
pub fn classify_sampled(xi: &[f64], ext: &SampledExtremals, tol: f64) -> Classification {
    let mut tracker = DistanceTracker::default();
    for (k, &x) in xi.iter().enumerate().take(ext.len()) {
        tracker.push(ext, k, x);
    }
    tracker.classify(ext.gap, tol)
}

fn check_tolerance(tol: f64) -> Result<(), McError> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(McError::BadTolerance(tol))
    }
}

/// The fixed catalog of path functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `f ↦ f(T)`
    FinalValue,
    /// `f ↦ max |f|`
    SupNorm,
    /// `f ↦ ∫₀ᵀ f` (trapezoid rule on the grid)
    Integral,
}

impl Functional {
    pub const ALL: [Functional; 3] = [
        Functional::FinalValue,
        Functional::SupNorm,
        Functional::Integral,
    ];

    fn index(self) -> usize {
        match self {
            Functional::FinalValue => 0,
            Functional::SupNorm => 1,
            Functional::Integral => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Functional::FinalValue => "final_value",
            Functional::SupNorm => "sup_norm",
            Functional::Integral => "integral",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct FunctionalAcc {
    step: f64,
    last: Option<f64>,
    sup: f64,
    integral: f64,
}

impl FunctionalAcc {
    fn new(step: f64) -> Self {
        Self {
            step,
            last: None,
            sup: 0.0,
            integral: 0.0,
        }
    }

    #[inline]
    fn push(&mut self, x: f64) {
        if let Some(prev) = self.last {
            self.integral += 0.5 * self.step * (prev + x);
        }
        self.sup = self.sup.max(x.abs());
        self.last = Some(x);
    }

    fn finish(&self) -> [f64; 3] {
        [self.last.unwrap_or(0.0), self.sup, self.integral]
    }
}

/// What one path contributes to an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRecord {
    pub class: Classification,
    pub functionals: [f64; 3],
    /// Fraction of grid times `t_k`, `k ≥ 1`, with `ξ > 0`.
    pub positive_fraction: f64,
}

/// Ensemble totals; merging is associative with [`Tally::default`] as the
/// unit, and counts merge exactly in any order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tally {
    pub n_paths: usize,
    pub upper: usize,
    pub lower: usize,
    pub ambiguous: usize,
    sum: [f64; 3],
    sum_sq: [f64; 3],
    positive: f64,
    positive_sq: f64,
}

impl Tally {
    pub fn push(&mut self, rec: &PathRecord) {
        self.n_paths += 1;
        match rec.class {
            Classification::Upper => self.upper += 1,
            Classification::Lower => self.lower += 1,
            Classification::Ambiguous => self.ambiguous += 1,
        }
        for i in 0..3 {
            self.sum[i] += rec.functionals[i];
            self.sum_sq[i] += rec.functionals[i] * rec.functionals[i];
        }
        self.positive += rec.positive_fraction;
        self.positive_sq += rec.positive_fraction * rec.positive_fraction;
    }

    pub fn merge(mut self, other: &Tally) -> Tally {
        self.n_paths += other.n_paths;
        self.upper += other.upper;
        self.lower += other.lower;
        self.ambiguous += other.ambiguous;
        for i in 0..3 {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
        }
        self.positive += other.positive;
        self.positive_sq += other.positive_sq;
        self
    }

    /// `(mean, standard error)` of a functional over all paths.
    pub fn functional_mean(&self, f: Functional) -> (f64, f64) {
        let n = self.n_paths as f64;
        let i = f.index();
        let mean = self.sum[i] / n;
        let var = (self.sum_sq[i] / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }

    /// `(mean, standard error)` of the per-path fraction of time with
    /// `ξ > 0`.
    pub fn positive_fraction(&self) -> (f64, f64) {
        let n = self.n_paths as f64;
        let mean = self.positive / n;
        let var = (self.positive_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // At p = 0 or 1 the bound equals p exactly; keep roundoff from
    // crossing it.
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub functional: Functional,
    pub empirical_mean: f64,
    pub std_error: f64,
    /// `Γ·F(ȳ) + (1-Γ)·F(y̲)` with the reference Γ.
    pub predicted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub eps: f64,
    pub step: f64,
    pub n_paths: usize,
    pub count_upper: usize,
    pub count_lower: usize,
    pub count_ambiguous: usize,
    pub gamma_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub positive_fraction: f64,
    pub positive_fraction_se: f64,
    pub functionals: Vec<FunctionalReport>,
}

/// Knobs of one ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub eps: f64,
    pub step: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    pub tolerance: f64,
    pub refine_near_zero: bool,
}

impl EnsembleConfig {
    pub fn new(eps: f64, step: f64, n_paths: usize, master_seed: u64) -> Self {
        Self {
            eps,
            step,
            n_paths,
            master_seed,
            tolerance: DEFAULT_TOLERANCE,
            refine_near_zero: false,
        }
    }

    fn sim_params(&self) -> SimParams {
        SimParams::new(self.eps, self.step).with_refinement(self.refine_near_zero)
    }
}

/// Limit weight to compare against: the closed form in case A1,
/// the concentrated side otherwise.
pub fn reference_gamma(problem: &Problem) -> Option<f64> {
    let case = CaseLabel::from_drifts(problem.drift_plus(), problem.drift_minus());
    match case {
        CaseLabel::A1 => gamma::asymptotic_params(problem)
            .and_then(|p| gamma::gamma_closed_form(&p, problem.beta()))
            .ok()
            .map(|g| g.value),
        CaseLabel::A2 | CaseLabel::A4 => Some(1.0),
        CaseLabel::A3 | CaseLabel::A5 => Some(0.0),
        CaseLabel::ZeroFunnel | CaseLabel::Unsupported => None,
    }
}

/// A problem prepared for repeated ensembles: transformed coefficients and
/// extremal solutions computed once.
#[derive(Debug, Clone)]
pub struct Ensemble {
    ito: ItoProblem,
    pair: ExtremalPair,
    reference: Option<f64>,
}

impl Ensemble {
    pub fn new(problem: &Problem) -> Result<Self, McError> {
        let ito = ItoProblem::new(std::sync::Arc::new(problem.clone()))?;
        let case = CaseLabel::from_drifts(problem.drift_plus(), problem.drift_minus());
        let pair = extremal_solutions(problem, case)?;
        if pair.is_degenerate() {
            return Err(McError::Degenerate(case));
        }
        Ok(Self {
            ito,
            pair,
            reference: reference_gamma(problem),
        })
    }

    pub fn extremals(&self) -> &ExtremalPair {
        &self.pair
    }

    pub fn reference_gamma(&self) -> Option<f64> {
        self.reference
    }

    fn sample(&self, config: &EnsembleConfig) -> Result<SampledExtremals, McError> {
        check_tolerance(config.tolerance)?;
        let (n, h) = config.sim_params().grid(self.ito.horizon())?;
        SampledExtremals::new(&self.pair, n, h, config.eps)
    }

    fn record(
        &self,
        config: &EnsembleConfig,
        ext: &SampledExtremals,
        stream: u64,
    ) -> Result<PathRecord, McError> {
        let map = self.ito.map();
        let mut tracker = DistanceTracker::default();
        let mut acc = FunctionalAcc::new(ext.step);
        let mut positive = 0usize;
        tracker.push(ext, 0, 0.0);
        acc.push(0.0);
        let mut steps = 0usize;
        sim::walk(
            &self.ito,
            &config.sim_params(),
            config.master_seed,
            stream,
            |i, eta, _| {
                let xi = map.kappa(eta);
                tracker.push(ext, i + 1, xi);
                acc.push(xi);
                positive += (xi > 0.0) as usize;
                steps += 1;
            },
        )?;
        Ok(PathRecord {
            class: tracker.classify(ext.gap, config.tolerance),
            functionals: acc.finish(),
            positive_fraction: positive as f64 / steps as f64,
        })
    }

    /// Per-path records for `streams`, in stream order.
    pub fn records(
        &self,
        config: &EnsembleConfig,
        streams: Range<u64>,
    ) -> Result<Vec<PathRecord>, McError> {
        let ext = self.sample(config)?;
        streams
            .into_par_iter()
            .map(|s| self.record(config, &ext, s))
            .collect()
    }

    /// Totals over `streams`, reduced in stream order.
    pub fn tally(&self, config: &EnsembleConfig, streams: Range<u64>) -> Result<Tally, McError> {
        let mut tally = Tally::default();
        for rec in self.records(config, streams)? {
            tally.push(&rec);
        }
        Ok(tally)
    }

    pub fn run(&self, config: &EnsembleConfig) -> Result<EnsembleStats, McError> {
        if config.n_paths < MIN_PATHS {
            return Err(McError::TooFewPaths(config.n_paths));
        }
        let tally = self.tally(config, 0..config.n_paths as u64)?;
        let ext = self.sample(config)?;
        self.stats(config, &tally, &ext)
    }

    pub fn stats(
        &self,
        config: &EnsembleConfig,
        tally: &Tally,
        ext: &SampledExtremals,
    ) -> Result<EnsembleStats, McError> {
        let decided = tally.upper + tally.lower;
        if decided == 0 {
            return Err(McError::AllAmbiguous {
                n: tally.n_paths,
                eps: config.eps,
            });
        }
        let gamma_hat = tally.upper as f64 / decided as f64;
        let (ci_low, ci_high) = wilson_interval(tally.upper, decided);
        let on_extremals = ext.functionals();
        let functionals = Functional::ALL
            .iter()
            .map(|&f| {
                let (mean, se) = tally.functional_mean(f);
                let [fu, fl] = on_extremals[f.index()];
                FunctionalReport {
                    functional: f,
                    empirical_mean: mean,
                    std_error: se,
                    predicted: self.reference.map(|g| g * fu + (1.0 - g) * fl),
                }
            })
            .collect();
        Ok(EnsembleStats {
            eps: config.eps,
            step: ext.step,
            n_paths: tally.n_paths,
            count_upper: tally.upper,
            count_lower: tally.lower,
            count_ambiguous: tally.ambiguous,
            gamma_hat,
            ci_low,
            ci_high,
            positive_fraction: tally.positive_fraction().0,
            positive_fraction_se: tally.positive_fraction().1,
            functionals,
        })
    }
}

pub fn run_ensemble(problem: &Problem, config: &EnsembleConfig) -> Result<EnsembleStats, McError> {
    Ensemble::new(problem)?.run(config)
}

/// Step size as a function of ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum StepRule {
    Fixed(f64),
    /// `min(1e-4, ε²/10)`
    Default,
}

impl StepRule {
    pub fn step(&self, eps: f64) -> f64 {
        match *self {
            StepRule::Fixed(h) => h,
            StepRule::Default => (1e-4f64).min(eps * eps / 10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub stats: Result<EnsembleStats, String>,
    pub gamma_closed_form: Option<f64>,
    /// `Γ_K(ε)` at this row's ε, averaged over the K list.
    pub gamma_numeric: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_paths: usize,
    pub step_rule: StepRule,
    pub master_seed: u64,
    pub tolerance: f64,
    pub refine_near_zero: bool,
}

/// One ensemble per ε; a failing row is recorded and the sweep goes on.
pub fn converge_sweep(
    problem: &Problem,
    eps_ladder: &[f64],
    config: &SweepConfig,
    k_list: &[f64],
) -> Result<Vec<SweepRow>, McError> {
    if eps_ladder.is_empty() || eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(McError::BadLadder);
    }
    let ensemble = Ensemble::new(problem)?;
    let closed = ensemble.reference_gamma();
    let rows = eps_ladder
        .iter()
        .map(|&eps| {
            let cfg = EnsembleConfig {
                eps,
                step: config.step_rule.step(eps),
                n_paths: config.n_paths,
                master_seed: config.master_seed,
                tolerance: config.tolerance,
                refine_near_zero: config.refine_near_zero,
            };
            let stats = ensemble.run(&cfg).map_err(|e| e.to_string());
            if let Err(e) = &stats {
                log::warn!("sweep row eps = {eps} failed: {e}");
            }
            let numeric = if k_list.is_empty() {
                None
            } else {
                let vals: Result<Vec<f64>, _> = k_list
                    .iter()
                    .map(|&k| gamma::gamma_numeric(k, eps, problem))
                    .collect();
                vals.ok().map(|v| v.iter().sum::<f64>() / v.len() as f64)
            };
            SweepRow {
                eps,
                stats,
                gamma_closed_form: closed,
                gamma_numeric: numeric,
            }
        })
        .collect();
    Ok(rows)
}
