//! Escape-time functions `H`, `K`, their inverses, and the integral funnel
//! of `y' = b(y), y(0) = 0`.
//!
//! On each side of the origin the funnel is generated by a single function:
//! the time `H(u) = ∫₀ᵘ dv/|b(±v)|` the fastest solution needs to reach
//! distance `u`. Its inverse is the extremal solution on that side; delayed
//! copies `H⁻¹((t-λ)⁺)` fill the funnel.
//!
//! `1/b` is singular at 0. For the drift family the integral is taken after
//! the substitution `v = u·s^{1/(1-α)}` (or `v = u·exp(1 - s^{-1/(p-1)})`
//! when `α = 1`), which makes the integrand bounded at `s = 0`; pure powers
//! use the closed form instead.

use std::sync::Arc;

use thiserror::Error;

use crate::model::{CaseLabel, Problem, Side, SidedDrift, Sign};
use crate::quad::{self, Tolerance};
use crate::roots::{self, RootError};
use crate::transform::ItoProblem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("integral of 1/b diverges at 0 on the {side:?} side (case {case})")]
    Divergent { side: Side, case: CaseLabel },
    #[error("drift on the {0:?} side points toward 0; no solution leaves the origin there")]
    Inward(Side),
    #[error("time {t} is out of reach: the escape time tops out at {reached} (x = {at})")]
    OutOfRange { t: f64, reached: f64, at: f64 },
    #[error("case {0} has no extremal solutions")]
    Unsupported(CaseLabel),
    #[error("{branch:?} funnel branch is trivial in case {case}")]
    InadmissibleBranch {
        branch: FunnelBranch,
        case: CaseLabel,
    },
    #[error("funnel delay must be finite and nonnegative, got {0}")]
    InvalidDelay(f64),
    #[error(transparent)]
    Root(#[from] RootError),
}

type LnMagnitude = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One side of a drift seen from the origin: `u ↦ |b(±u)|`, given through
/// its logarithm, with the local exponents `α`, `p` of
/// `|b| ~ c·u^α·|ln u|^p`.
#[derive(Clone)]
pub struct Branch {
    ln_magnitude: LnMagnitude,
    side: Side,
    alpha: f64,
    p: f64,
    outward: bool,
    convergent: bool,
    closed_form: Option<f64>,
}

impl std::fmt::Debug for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Branch")
            .field("side", &self.side)
            .field("alpha", &self.alpha)
            .field("p", &self.p)
            .field("outward", &self.outward)
            .field("closed_form", &self.closed_form)
            .finish()
    }
}

impl Branch {
    pub fn of_drift(drift: &SidedDrift, side: Side) -> Self {
        let outward = match side {
            Side::Positive => drift.sign() == Sign::Positive,
            Side::Negative => drift.sign() == Sign::Negative,
        };
        let d = drift.clone();
        Self {
            ln_magnitude: Arc::new(move |ln_u| d.ln_magnitude(ln_u)),
            side,
            alpha: drift.alpha(),
            p: drift.p(),
            outward,
            convergent: drift.integral_converges(),
            closed_form: (drift.p() == 0.0 && drift.alpha() < 1.0).then_some(drift.amplitude()),
        }
    }

    /// `u ↦ |b|(scale·u) / divisor`, composed on the original branch.
    pub fn rescaled(&self, scale: f64, divisor: f64) -> Self {
        let inner = self.ln_magnitude.clone();
        let (ln_scale, ln_div) = (scale.ln(), divisor.ln());
        Self {
            ln_magnitude: Arc::new(move |ln_u| inner(ln_u + ln_scale) - ln_div),
            closed_form: None,
            ..self.clone()
        }
    }

    /// Same branch, forced onto the quadrature route.
    pub fn without_closed_form(mut self) -> Self {
        self.closed_form = None;
        self
    }

    pub fn magnitude(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            (self.ln_magnitude)(u.ln()).exp()
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    fn check_escapable(&self, case: CaseLabel) -> Result<(), OdeError> {
        if !self.outward {
            return Err(OdeError::Inward(self.side));
        }
        if !self.convergent {
            return Err(OdeError::Divergent {
                side: self.side,
                case,
            });
        }
        Ok(())
    }

    /// `∫₀ᵘ dv/|b(v)|` through a substitution that removes the singularity.
    fn singular_integral(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let ln_u = u.ln();
        let lnm = &self.ln_magnitude;
        let tol = Tolerance::relative(1e-13);
        let breaks = quad::geometric_breakpoints(1.0, 48);
        if self.alpha < 1.0 {
            let m = 1.0 / (1.0 - self.alpha);
            let ln_m = m.ln();
            quad::integrate(
                |s: f64| {
                    let ln_s = s.ln();
                    (ln_m + ln_u + (m - 1.0) * ln_s - lnm(ln_u + m * ln_s)).exp()
                },
                &breaks,
                tol,
            )
            .value
        } else {
            let q = 1.0 / (self.p - 1.0);
            let ln_q = q.ln();
            quad::integrate(
                |s: f64| {
                    let ln_s = s.ln();
                    let ln_v = ln_u + 1.0 - (-q * ln_s).exp();
                    (ln_v + ln_q - (q + 1.0) * ln_s - lnm(ln_v)).exp()
                },
                &breaks,
                tol,
            )
            .value
        }
    }

    /// `∫_{a}^{b} dv/|b(v)|` for `0 < a ≤ b`.
    fn regular_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let lnm = &self.ln_magnitude;
        let mut breaks = vec![a];
        if self.p != 0.0 && a < 1.0 && 1.0 < b {
            breaks.push(1.0);
        }
        breaks.push(b);
        quad::integrate(
            |v: f64| (-lnm(v.ln())).exp(),
            &breaks,
            Tolerance::relative(1e-13),
        )
        .value
    }
}

/// The escape-time function of one branch, tabulated for inversion.
#[derive(Debug, Clone)]
pub struct EscapeTime {
    branch: Branch,
    // Ascending log-spaced positions and their escape times.
    us: Vec<f64>,
    ts: Vec<f64>,
}

impl EscapeTime {
    /// Builds the table far enough out that every `t ≤ reach` can be
    /// inverted (unless the escape time is bounded below `reach`, which
    /// surfaces as [`OdeError::OutOfRange`] on inversion).
    pub fn new(branch: Branch, reach: f64) -> Result<Self, OdeError> {
        branch
            .check_escapable(CaseLabel::Unsupported)
            .map_err(|e| match e {
                OdeError::Divergent { side, .. } => OdeError::Divergent {
                    side,
                    case: CaseLabel::Unsupported,
                },
                other => other,
            })?;
        if branch.closed_form.is_some() {
            return Ok(Self {
                branch,
                us: Vec::new(),
                ts: Vec::new(),
            });
        }
        let mut top = 1.0f64;
        while branch.singular_integral(top) < reach * 1.05 && top < 1e100 {
            top *= 4.0;
        }
        // Half-octave nodes from the smallest normal float up to `top`. With
        // α = 1 the escape time decays like a power of |ln u|, so moderate
        // times can correspond to positions near the bottom of the range.
        let half_octave = 0.5 * std::f64::consts::LN_2;
        let half_steps = ((top.ln() - f64::MIN_POSITIVE.ln()) / half_octave).floor() as i32;
        let us: Vec<f64> = (0..=half_steps)
            .rev()
            .map(|j| (top.ln() - j as f64 * half_octave).exp())
            .collect();
        let mut ts = Vec::with_capacity(us.len());
        ts.push(branch.singular_integral(us[0]));
        for w in us.windows(2) {
            let last = *ts.last().expect("nonempty");
            ts.push(last + branch.regular_integral(w[0], w[1]));
        }
        Ok(Self { branch, us, ts })
    }

    pub fn branch(&self) -> &Branch {
        &self.branch
    }

    fn closed(&self) -> Option<(f64, f64)> {
        self.branch.closed_form.map(|c| (c, self.branch.alpha))
    }

    /// Escape time to distance `u ≥ 0`.
    pub fn time(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if let Some((c, alpha)) = self.closed() {
            return u.powf(1.0 - alpha) / (c * (1.0 - alpha));
        }
        if u < self.us[0] {
            return self.branch.singular_integral(u);
        }
        let k = self.us.partition_point(|&x| x <= u) - 1;
        self.ts[k] + self.branch.regular_integral(self.us[k], u)
    }

    /// Distance reached at time `t ≥ 0`: the inverse of [`Self::time`].
    pub fn position(&self, t: f64) -> Result<f64, OdeError> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        if let Some((c, alpha)) = self.closed() {
            return Ok((c * (1.0 - alpha) * t).powf(1.0 / (1.0 - alpha)));
        }
        let last = self.ts.len() - 1;
        if t > self.ts[last] {
            return Err(OdeError::OutOfRange {
                t,
                reached: self.ts[last],
                at: self.us[last],
            });
        }
        if t <= self.ts[0] {
            // Below the smallest normal float.
            return Ok(0.0);
        }
        let k = (self.ts.partition_point(|&s| s < t) - 1).min(last - 1);
        let (u0, t0) = (self.us[k], self.ts[k]);
        let b = &self.branch;
        Ok(roots::brent(
            |u| t0 + b.regular_integral(u0, u) - t,
            u0,
            self.us[k + 1],
            1e-13,
            0.0,
        )?)
    }
}

/// Access to the two drift branches of a problem, for the ODE machinery.
pub trait DriftBranches {
    fn branch(&self, side: Side) -> Branch;
    fn horizon(&self) -> f64;
    fn case(&self) -> CaseLabel;
    fn drift_at(&self, x: f64) -> f64;
}

impl DriftBranches for Problem {
    fn branch(&self, side: Side) -> Branch {
        Branch::of_drift(self.sided_drift(side), side)
    }

    fn horizon(&self) -> f64 {
        Problem::horizon(self)
    }

    fn case(&self) -> CaseLabel {
        CaseLabel::from_drifts(self.drift_plus(), self.drift_minus())
    }

    fn drift_at(&self, x: f64) -> f64 {
        self.drift(x)
    }
}

/// The transformed drift `b̃` on each side is the original branch with its
/// argument scaled by `1 ± β` and divided by the same factor.
impl DriftBranches for ItoProblem {
    fn branch(&self, side: Side) -> Branch {
        let factor = 1.0 + self.beta() * if side == Side::Positive { 1.0 } else { -1.0 };
        Branch::of_drift(self.problem().sided_drift(side), side).rescaled(factor, factor)
    }

    fn horizon(&self) -> f64 {
        self.problem().horizon()
    }

    fn case(&self) -> CaseLabel {
        DriftBranches::case(self.problem())
    }

    fn drift_at(&self, x: f64) -> f64 {
        self.drift(x)
    }
}

fn positive_branch(drift: &SidedDrift) -> Result<Branch, OdeError> {
    let b = Branch::of_drift(drift, Side::Positive);
    b.check_escapable(CaseLabel::from_drifts(
        drift,
        &drift.with_sign(Sign::Negative),
    ))?;
    Ok(b)
}

fn negative_branch(drift: &SidedDrift) -> Result<Branch, OdeError> {
    let b = Branch::of_drift(drift, Side::Negative);
    b.check_escapable(CaseLabel::from_drifts(
        &drift.with_sign(Sign::Positive),
        drift,
    ))?;
    Ok(b)
}

/// `H(x) = ∫₀ˣ dy/b(y)` for `x ≥ 0`, with `b` the positive-side drift.
pub fn h_function(drift_plus: &SidedDrift, x: f64) -> Result<f64, OdeError> {
    let b = positive_branch(drift_plus)?;
    Ok(EscapeTime::new(b, 0.0)?.time(x.max(0.0)))
}

/// `K(x) = ∫ₓ⁰ dy/|b(y)|` for `x ≤ 0`, with `b` the negative-side drift.
/// Returned as a nonnegative time.
pub fn k_function(drift_minus: &SidedDrift, x: f64) -> Result<f64, OdeError> {
    let b = negative_branch(drift_minus)?;
    Ok(EscapeTime::new(b, 0.0)?.time((-x).max(0.0)))
}

pub fn h_inverse(drift_plus: &SidedDrift, t: f64) -> Result<f64, OdeError> {
    EscapeTime::new(positive_branch(drift_plus)?, t)?.position(t)
}

/// Nonpositive point reached by the lower extremal solution at time `t`.
pub fn k_inverse(drift_minus: &SidedDrift, t: f64) -> Result<f64, OdeError> {
    Ok(-EscapeTime::new(negative_branch(drift_minus)?, t)?.position(t)?)
}

/// Upper and lower extremal solutions `ȳ`, `y̲` on `[0, T]`.
#[derive(Debug, Clone)]
pub struct ExtremalPair {
    upper: Option<Arc<EscapeTime>>,
    lower: Option<Arc<EscapeTime>>,
    case: CaseLabel,
    horizon: f64,
}

impl ExtremalPair {
    pub fn case(&self) -> CaseLabel {
        self.case
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Both extremals vanish identically.
    pub fn is_degenerate(&self) -> bool {
        self.upper.is_none() && self.lower.is_none()
    }

    pub fn try_upper(&self, t: f64) -> Result<f64, OdeError> {
        match &self.upper {
            Some(e) => e.position(t),
            None => Ok(0.0),
        }
    }

    pub fn try_lower(&self, t: f64) -> Result<f64, OdeError> {
        match &self.lower {
            Some(e) => Ok(-e.position(t)?),
            None => Ok(0.0),
        }
    }

    /// `ȳ(t)` for `t` in `[0, T]`.
    pub fn upper(&self, t: f64) -> f64 {
        self.try_upper(t).expect("extremal table covers [0, T]")
    }

    /// `y̲(t)` for `t` in `[0, T]`.
    pub fn lower(&self, t: f64) -> f64 {
        self.try_lower(t).expect("extremal table covers [0, T]")
    }

    /// `(ȳ(tᵢ), y̲(tᵢ))` on a grid.
    pub fn sample(&self, times: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            times.iter().map(|&t| self.upper(t)).collect(),
            times.iter().map(|&t| self.lower(t)).collect(),
        )
    }
}

pub fn extremal_solutions<P: DriftBranches + ?Sized>(
    problem: &P,
    case: CaseLabel,
) -> Result<ExtremalPair, OdeError> {
    let horizon = problem.horizon();
    if matches!(case, CaseLabel::Unsupported) {
        return Err(OdeError::Unsupported(case));
    }
    let build = |side: Side| -> Result<Arc<EscapeTime>, OdeError> {
        let b = problem.branch(side);
        b.check_escapable(case)?;
        let e = EscapeTime::new(b, horizon)?;
        // Make sure the whole horizon is reachable before handing it out.
        e.position(horizon)?;
        Ok(Arc::new(e))
    };
    let upper = if case.has_upper() {
        Some(build(Side::Positive)?)
    } else {
        None
    };
    let lower = if case.has_lower() {
        Some(build(Side::Negative)?)
    } else {
        None
    };
    Ok(ExtremalPair {
        upper,
        lower,
        case,
        horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FunnelBranch {
    Upper,
    Lower,
}

/// A delayed extremal solution `H⁻¹((t-λ)⁺)` or `K⁻¹((t-μ)⁺)`.
#[derive(Debug, Clone)]
pub struct FunnelSolution {
    escape: Arc<EscapeTime>,
    delay: f64,
    direction: f64,
    horizon: f64,
}

impl FunnelSolution {
    pub fn eval(&self, t: f64) -> f64 {
        let s = (t - self.delay).max(0.0);
        self.direction * self.escape.position(s).expect("funnel table covers [0, T]")
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// `max_k |y(t_k) - ∫₀^{t_k} b(y(s))ds| / (1 + |y(t_k)|)` over `points`
    /// equal steps of `[0, T]`.
    pub fn residual(&self, drift: impl Fn(f64) -> f64, points: usize) -> f64 {
        let h = self.horizon / points as f64;
        let mut integral = 0.0;
        let mut worst = 0.0f64;
        for k in 1..=points {
            let (a, b) = ((k - 1) as f64 * h, k as f64 * h);
            let mut breaks = vec![a];
            if a < self.delay && self.delay < b {
                breaks.push(self.delay);
            }
            breaks.push(b);
            integral += quad::integrate(
                |s| drift(self.eval(s)),
                &breaks,
                Tolerance::relative(1e-12).with_abs(1e-15),
            )
            .value;
            let y = self.eval(b);
            worst = worst.max((y - integral).abs() / (1.0 + y.abs()));
        }
        worst
    }
}

pub fn funnel_solution(
    pair: &ExtremalPair,
    delay: f64,
    branch: FunnelBranch,
) -> Result<FunnelSolution, OdeError> {
    if !(delay.is_finite() && delay >= 0.0) {
        return Err(OdeError::InvalidDelay(delay));
    }
    let (escape, direction) = match branch {
        FunnelBranch::Upper => (&pair.upper, 1.0),
        FunnelBranch::Lower => (&pair.lower, -1.0),
    };
    let escape = escape.clone().ok_or(OdeError::InadmissibleBranch {
        branch,
        case: pair.case,
    })?;
    Ok(FunnelSolution {
        escape,
        delay,
        direction,
        horizon: pair.horizon,
    })
}
