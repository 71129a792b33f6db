//! Coefficient families, the standing conditions on them, and the
//! classification of the singular Cauchy problem `y' = b(y), y(0) = 0`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{self, Rational};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid drift: {0}")]
    InvalidDrift(String),
    #[error("invalid diffusion: {0}")]
    InvalidDiffusion(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("malformed validation grid: {0}")]
    MalformedGrid(String),
    #[error("standing conditions fail: {}", .0.summary())]
    ConditionsFailed(Box<ConditionReport>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

/// Which half-line a quantity lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Positive,
    Negative,
}

/// One side of the drift: `b(x) = sign · c · |x|^α · (|ln|x|| + 1)^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SidedDrift {
    sign: Sign,
    amplitude: f64,
    exponent: Rational,
    log_power: Rational,
    alpha: f64,
    p: f64,
}

impl SidedDrift {
    pub fn new(
        sign: Sign,
        amplitude: f64,
        exponent: Rational,
        log_power: Rational,
    ) -> Result<Self, ModelError> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(ModelError::InvalidDrift(format!(
                "amplitude must be positive and finite, got {amplitude}"
            )));
        }
        let zero = Rational::from_integer(0);
        let one = Rational::from_integer(1);
        if exponent <= zero || exponent > one {
            return Err(ModelError::InvalidDrift(format!(
                "exponent alpha must lie in (0, 1], got {}",
                rational::Display(&exponent)
            )));
        }
        if log_power < zero {
            return Err(ModelError::InvalidDrift(format!(
                "log power p must be nonnegative, got {}",
                rational::Display(&log_power)
            )));
        }
        Ok(Self {
            sign,
            amplitude,
            alpha: rational::to_f64(&exponent),
            p: rational::to_f64(&log_power),
            exponent,
            log_power,
        })
    }

    /// Pure power `sign · c · |x|^α`.
    pub fn power(sign: Sign, amplitude: f64, exponent: Rational) -> Result<Self, ModelError> {
        Self::new(sign, amplitude, exponent, Rational::from_integer(0))
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn exponent(&self) -> Rational {
        self.exponent
    }

    pub fn log_power(&self) -> Rational {
        self.log_power
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `|b|` at distance `u ≥ 0` from the origin.
    pub fn magnitude(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        let mut m = self.amplitude * u.powf(self.alpha);
        if self.p != 0.0 {
            m *= (u.ln().abs() + 1.0).powf(self.p);
        }
        m
    }

    /// `ln |b|` as a function of `ln u`; finite even where `u` underflows.
    pub fn ln_magnitude(&self, ln_u: f64) -> f64 {
        let mut l = self.amplitude.ln() + self.alpha * ln_u;
        if self.p != 0.0 {
            l += self.p * (ln_u.abs() + 1.0).ln();
        }
        l
    }

    /// Signed value at a point `x` of this drift's side.
    pub fn eval(&self, x: f64) -> f64 {
        self.sign.value() * self.magnitude(x.abs())
    }

    /// Whether `∫₀^δ du / |b(u)|` is finite: `α < 1`, or `α = 1` and `p > 1`.
    pub fn integral_converges(&self) -> bool {
        let one = Rational::from_integer(1);
        self.exponent < one || self.log_power > one
    }

    pub fn with_sign(&self, sign: Sign) -> Self {
        Self {
            sign,
            ..self.clone()
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, ModelError> {
        Self::new(
            self.sign,
            self.amplitude * factor,
            self.exponent,
            self.log_power,
        )
    }
}

/// Declarative form of one side of σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaBranch {
    /// `σ(x) = value`
    Constant { value: f64 },
    /// `σ(x) = offset + amplitude · cos x`
    Cosine { offset: f64, amplitude: f64 },
    /// `σ(x) = intercept + slope · x`
    Affine { intercept: f64, slope: f64 },
}

impl SigmaBranch {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SigmaBranch::Constant { value } => value,
            SigmaBranch::Cosine { offset, amplitude } => offset + amplitude * x.cos(),
            SigmaBranch::Affine { intercept, slope } => intercept + slope * x,
        }
    }
}

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Diffusion coefficient with its one-sided values at 0 and the declared
/// growth/ellipticity constant `Λ`.
#[derive(Clone)]
pub struct Diffusion {
    eval: Evaluator,
    sigma0_plus: f64,
    sigma0_minus: f64,
    lambda: f64,
    branches: Option<(SigmaBranch, SigmaBranch)>,
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Diffusion")
            .field("sigma0_plus", &self.sigma0_plus)
            .field("sigma0_minus", &self.sigma0_minus)
            .field("lambda", &self.lambda)
            .field("branches", &self.branches)
            .finish()
    }
}

impl Diffusion {
    pub fn from_fn(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma0_plus: f64,
        sigma0_minus: f64,
        lambda: f64,
    ) -> Result<Self, ModelError> {
        if !(lambda.is_finite() && lambda >= 1.0) {
            return Err(ModelError::InvalidDiffusion(format!(
                "lambda must be finite and >= 1, got {lambda}"
            )));
        }
        if !sigma0_plus.is_finite() || !sigma0_minus.is_finite() {
            return Err(ModelError::InvalidDiffusion(
                "one-sided limits at 0 must be finite".into(),
            ));
        }
        Ok(Self {
            eval: Arc::new(eval),
            sigma0_plus,
            sigma0_minus,
            lambda,
            branches: None,
        })
    }

    /// `σ(x) = plus(x)` for `x ≥ 0`, `minus(x)` for `x < 0`.
    pub fn piecewise(
        plus: SigmaBranch,
        minus: SigmaBranch,
        lambda: f64,
    ) -> Result<Self, ModelError> {
        let mut d = Self::from_fn(
            move |x| {
                if x >= 0.0 {
                    plus.eval(x)
                } else {
                    minus.eval(x)
                }
            },
            plus.eval(0.0),
            minus.eval(0.0),
            lambda,
        )?;
        d.branches = Some((plus, minus));
        Ok(d)
    }

    pub fn constant(plus: f64, minus: f64, lambda: f64) -> Result<Self, ModelError> {
        Self::piecewise(
            SigmaBranch::Constant { value: plus },
            SigmaBranch::Constant { value: minus },
            lambda,
        )
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn sigma0_plus(&self) -> f64 {
        self.sigma0_plus
    }

    pub fn sigma0_minus(&self) -> f64 {
        self.sigma0_minus
    }

    pub fn sigma0(&self, side: Side) -> f64 {
        match side {
            Side::Positive => self.sigma0_plus,
            Side::Negative => self.sigma0_minus,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn branches(&self) -> Option<(SigmaBranch, SigmaBranch)> {
        self.branches
    }

    /// Same diffusion multiplied by `factor` (Λ is kept).
    pub fn scaled(&self, factor: f64) -> Self {
        let inner = self.eval.clone();
        Self {
            eval: Arc::new(move |x| factor * inner(x)),
            sigma0_plus: factor * self.sigma0_plus,
            sigma0_minus: factor * self.sigma0_minus,
            lambda: self.lambda,
            branches: None,
        }
    }
}

/// The local-time SDE `ξ = βL(t,0) + ∫b(ξ)ds + ε∫σ(ξ)dw` on `[0, T]`,
/// without ε (which is an experiment parameter).
#[derive(Debug, Clone)]
pub struct Problem {
    drift_plus: SidedDrift,
    drift_minus: SidedDrift,
    diffusion: Diffusion,
    beta: f64,
    horizon: f64,
}

impl Problem {
    /// `β` is only required to be finite here; `|β| < 1` is checked by
    /// [`validate_conditions`] so that a violating problem still yields a
    /// report.
    pub fn new(
        drift_plus: SidedDrift,
        drift_minus: SidedDrift,
        diffusion: Diffusion,
        beta: f64,
        horizon: f64,
    ) -> Result<Self, ModelError> {
        if !beta.is_finite() {
            return Err(ModelError::InvalidProblem(format!(
                "beta must be finite, got {beta}"
            )));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(ModelError::InvalidProblem(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self {
            drift_plus,
            drift_minus,
            diffusion,
            beta,
            horizon,
        })
    }

    pub fn drift_plus(&self) -> &SidedDrift {
        &self.drift_plus
    }

    pub fn drift_minus(&self) -> &SidedDrift {
        &self.drift_minus
    }

    pub fn sided_drift(&self, side: Side) -> &SidedDrift {
        match side {
            Side::Positive => &self.drift_plus,
            Side::Negative => &self.drift_minus,
        }
    }

    pub fn diffusion(&self) -> &Diffusion {
        &self.diffusion
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.drift_plus.eval(x)
        } else if x < 0.0 {
            self.drift_minus.eval(x)
        } else {
            0.0
        }
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        self.diffusion.eval(x)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self, ModelError> {
        Self::new(
            self.drift_plus.clone(),
            self.drift_minus.clone(),
            self.diffusion.clone(),
            beta,
            self.horizon,
        )
    }

    pub fn with_diffusion(&self, diffusion: Diffusion) -> Self {
        Self {
            diffusion,
            ..self.clone()
        }
    }

    pub fn with_drifts(&self, plus: SidedDrift, minus: SidedDrift) -> Self {
        Self {
            drift_plus: plus,
            drift_minus: minus,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    I1,
    I2,
    I3,
    I4,
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionItem {
    pub id: ConditionId,
    pub passed: bool,
    pub diagnostic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub items: Vec<ConditionItem>,
    pub grid: Vec<f64>,
    pub lambda: f64,
}

impl ConditionReport {
    pub fn item(&self, id: ConditionId) -> &ConditionItem {
        self.items
            .iter()
            .find(|i| i.id == id)
            .expect("report holds every condition")
    }

    pub fn passed(&self, id: ConditionId) -> bool {
        self.item(id).passed
    }

    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    /// I1, I2 and I4: what the two-extremal limit theorem needs.
    pub fn admits_limit_experiments(&self) -> bool {
        [ConditionId::I1, ConditionId::I2, ConditionId::I4]
            .iter()
            .all(|&id| self.passed(id))
    }

    pub fn failures(&self) -> Vec<ConditionId> {
        self.items
            .iter()
            .filter(|i| !i.passed)
            .map(|i| i.id)
            .collect()
    }

    pub fn summary(&self) -> String {
        let failed = self.failures();
        if failed.is_empty() {
            "all conditions pass".into()
        } else {
            let names: Vec<String> = failed.iter().map(|id| id.to_string()).collect();
            format!("failed: {}", names.join(", "))
        }
    }
}

/// `±{0.1, 0.2, …, 2.0}`.
pub fn default_grid() -> Vec<f64> {
    let pos: Vec<f64> = (1..=20).map(|k| k as f64 / 10.0).collect();
    let mut grid: Vec<f64> = pos.iter().rev().map(|x| -x).collect();
    grid.extend(pos);
    grid
}

/// Checks I1–I4. I1 and I4 are decided exactly; I2 and I3 are spot-checked
/// on `grid` together with the one-sided values `σ(0±)`. Bounded variation
/// of σ is taken as declared.
pub fn validate_conditions(problem: &Problem, grid: &[f64]) -> Result<ConditionReport, ModelError> {
    if grid.is_empty() {
        return Err(ModelError::MalformedGrid("grid is empty".into()));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
        return Err(ModelError::MalformedGrid(format!("non-finite point {x}")));
    }
    if !grid.iter().any(|&x| x > 0.0) || !grid.iter().any(|&x| x < 0.0) {
        return Err(ModelError::MalformedGrid(
            "grid must contain points of both signs".into(),
        ));
    }
    let lambda = problem.diffusion.lambda;
    let mut items = Vec::with_capacity(4);

    let (bp, bm) = (&problem.drift_plus, &problem.drift_minus);
    items.push(ConditionItem {
        id: ConditionId::I1,
        passed: bp.amplitude > 0.0 && bm.amplitude > 0.0 && bp.alpha > 0.0 && bm.alpha > 0.0,
        diagnostic: format!(
            "b continuous with b(0)=0; amplitudes c+={}, c-={} are positive so 0 is the only zero",
            bp.amplitude, bm.amplitude
        ),
    });

    let mut i2_violation = None;
    let one_sided = [
        ("sigma(0+)", problem.diffusion.sigma0_plus),
        ("sigma(0-)", problem.diffusion.sigma0_minus),
    ];
    for (name, s) in one_sided {
        if s * s < 1.0 / lambda || s * s > lambda {
            i2_violation.get_or_insert(format!(
                "{name}={s}: sigma^2 outside [1/Lambda, Lambda] with Lambda={lambda}"
            ));
        }
    }
    for &x in grid {
        let b = problem.drift(x);
        let s = problem.sigma(x);
        if !s.is_finite() {
            i2_violation.get_or_insert(format!("sigma({x}) is not finite"));
        } else if s * s < 1.0 / lambda {
            i2_violation.get_or_insert(format!(
                "sigma^2({x})={} < 1/Lambda={}",
                s * s,
                1.0 / lambda
            ));
        } else if b * b + s * s > lambda * (1.0 + x * x) {
            i2_violation.get_or_insert(format!(
                "|b|^2+sigma^2 at x={x} is {} > Lambda(1+x^2)={}",
                b * b + s * s,
                lambda * (1.0 + x * x)
            ));
        }
    }
    items.push(ConditionItem {
        id: ConditionId::I2,
        passed: i2_violation.is_none(),
        diagnostic: i2_violation.unwrap_or_else(|| {
            format!(
                "growth and ellipticity bounds hold on {} grid points with Lambda={lambda}",
                grid.len()
            )
        }),
    });

    let values: Vec<(String, f64)> = one_sided
        .iter()
        .map(|(n, s)| (n.to_string(), *s))
        .chain(
            grid.iter()
                .map(|&x| (format!("sigma({x})"), problem.sigma(x))),
        )
        .collect();
    let all_pos = values.iter().all(|(_, s)| *s > 0.0);
    let all_neg = values.iter().all(|(_, s)| *s < 0.0);
    let i3_diag = if all_pos || all_neg {
        "sigma keeps one strict sign on the grid; bounded variation is declared, not checked".into()
    } else {
        let first_positive = values[0].1 > 0.0;
        let bad = values
            .iter()
            .find(|(_, s)| *s == 0.0 || s.is_nan() || (*s > 0.0) != first_positive)
            .map(|(n, s)| format!("{n}={s}"))
            .unwrap_or_default();
        format!(
            "sigma(x)sigma(y) > 0 fails: {bad} vs {}={}",
            values[0].0, values[0].1
        )
    };
    items.push(ConditionItem {
        id: ConditionId::I3,
        passed: all_pos || all_neg,
        diagnostic: i3_diag,
    });

    let beta = problem.beta;
    items.push(ConditionItem {
        id: ConditionId::I4,
        passed: beta.abs() < 1.0,
        diagnostic: format!(
            "|beta| = {} {} 1",
            beta.abs(),
            if beta.abs() < 1.0 { "<" } else { ">=" }
        ),
    });

    Ok(ConditionReport {
        items,
        grid: grid.to_vec(),
        lambda,
    })
}

/// A problem whose report admits the limit experiments (I1, I2, I4).
#[derive(Debug, Clone)]
pub struct ValidatedProblem {
    problem: Arc<Problem>,
    report: ConditionReport,
}

impl ValidatedProblem {
    pub fn new(problem: Problem, grid: &[f64]) -> Result<Self, ModelError> {
        let report = validate_conditions(&problem, grid)?;
        if !report.admits_limit_experiments() {
            return Err(ModelError::ConditionsFailed(Box::new(report)));
        }
        Ok(Self {
            problem: Arc::new(problem),
            report,
        })
    }

    pub fn with_default_grid(problem: Problem) -> Result<Self, ModelError> {
        Self::new(problem, &default_grid())
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn shared(&self) -> Arc<Problem> {
        self.problem.clone()
    }

    pub fn report(&self) -> &ConditionReport {
        &self.report
    }

    /// Full condition (I), needed for the one-extremal cases A2–A5.
    pub fn satisfies_full_conditions(&self) -> bool {
        self.report.all_passed()
    }

    pub fn case(&self) -> CaseLabel {
        classify_case(self)
    }
}

impl std::ops::Deref for ValidatedProblem {
    type Target = Problem;
    fn deref(&self) -> &Problem {
        &self.problem
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    A1,
    A2,
    A3,
    A4,
    A5,
    ZeroFunnel,
    Unsupported,
}

impl CaseLabel {
    /// Classification from the two sides of the drift family.
    pub fn from_drifts(plus: &SidedDrift, minus: &SidedDrift) -> Self {
        use Sign::*;
        let (cp, cm) = (plus.integral_converges(), minus.integral_converges());
        match (plus.sign, minus.sign) {
            (Positive, Negative) => match (cp, cm) {
                (true, true) => CaseLabel::A1,
                (true, false) => CaseLabel::A2,
                (false, true) => CaseLabel::A3,
                (false, false) => CaseLabel::Unsupported,
            },
            (Positive, Positive) if cp => CaseLabel::A4,
            (Negative, Negative) if cm => CaseLabel::A5,
            (Negative, Positive) => CaseLabel::ZeroFunnel,
            _ => CaseLabel::Unsupported,
        }
    }

    /// Whether the limit law charges the upper (resp. lower) extremal
    /// solution with a nonzero curve.
    pub fn has_upper(self) -> bool {
        matches!(self, CaseLabel::A1 | CaseLabel::A2 | CaseLabel::A4)
    }

    pub fn has_lower(self) -> bool {
        matches!(self, CaseLabel::A1 | CaseLabel::A3 | CaseLabel::A5)
    }

    /// `b(x)x > 0` away from the origin.
    pub fn is_outward(self) -> bool {
        matches!(self, CaseLabel::A1 | CaseLabel::A2 | CaseLabel::A3)
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub fn classify_case(problem: &ValidatedProblem) -> CaseLabel {
    CaseLabel::from_drifts(&problem.drift_plus, &problem.drift_minus)
}
