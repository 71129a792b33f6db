//! The limiting weight `Γ` of the upper extremal solution.
//!
//! Two independent routes: the closed form from the small-`x` asymptotics of
//! the potential `L(x) = ∫₀ˣ b/σ²`, and direct quadrature of the finite-ε
//! ratio `Γ_K(ε) = P/(P + Q)` with `P = ∫_{-K}^0 e^{-2L_β/ε²}`,
//! `Q = ∫_0^K e^{-2L_β/ε²}`.

use std::cmp::Ordering;

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CaseLabel, Problem, Side, Sign};
use crate::quad::{self, Tolerance};
use crate::rational::Rational;
use crate::transform::{SkewMap, TransformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GammaError {
    #[error("case {0} has no small-x asymptotics for the limit weight")]
    Domain(CaseLabel),
    #[error("eps must be positive and finite, got {0}; for eps = 0 use the limit routine")]
    InvalidEps(f64),
    #[error("K must be positive and finite, got {0}")]
    InvalidK(f64),
    #[error("both tail integrals degenerate at eps = {eps}; try a larger eps")]
    Degenerate { eps: f64 },
    #[error("limit grid needs at least two K values and a strictly decreasing eps ladder")]
    InvalidGrid,
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Default ladder and K values for the numeric limit.
pub const DEFAULT_EPS_LADDER: [f64; 5] = [0.2, 0.1, 0.05, 0.02, 0.01];
pub const DEFAULT_K_LIST: [f64; 3] = [0.5, 1.0, 2.0];

const DEPTH: usize = 64;

// `u ↦ d/du L(±u)`, so that `∫₀ᵘ` of it is `L(±u)` on either side.
fn integrand_on(problem: &Problem, side: Side) -> impl Fn(f64) -> f64 + '_ {
    move |u: f64| match side {
        Side::Positive => problem.drift(u) / problem.sigma(u).powi(2),
        Side::Negative => -problem.drift(-u) / problem.sigma(-u).powi(2),
    }
}

/// `L(x) = ∫₀ˣ b(y)/σ²(y) dy`.
pub fn potential(x: f64, problem: &Problem) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let side = if x > 0.0 {
        Side::Positive
    } else {
        Side::Negative
    };
    let u = x.abs();
    quad::integrate(
        integrand_on(problem, side),
        &quad::geometric_breakpoints(u, DEPTH),
        Tolerance::relative(1e-12),
    )
    .value
}

/// `L` on `[0, reach]` of one side, tabulated at geometric panel ends so
/// that every evaluation is one short integral.
#[derive(Debug, Clone)]
struct SideTable {
    side: Side,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl SideTable {
    fn new(problem: &Problem, side: Side, reach: f64) -> Self {
        let nodes = quad::geometric_breakpoints(reach, DEPTH);
        let f = integrand_on(problem, side);
        let mut values = vec![0.0];
        for w in nodes.windows(2) {
            let step = quad::integrate(&f, w, Tolerance::relative(1e-13)).value;
            values.push(values.last().expect("nonempty") + step);
        }
        Self {
            side,
            nodes,
            values,
        }
    }

    /// `L(±u)` for `u ≥ 0`.
    fn eval(&self, problem: &Problem, u: f64) -> f64 {
        let k = self.nodes.partition_point(|&x| x <= u).saturating_sub(1);
        let (a, base) = (self.nodes[k], self.values[k]);
        if u <= a {
            return base;
        }
        base + quad::integrate(
            integrand_on(problem, self.side),
            &[a, u],
            Tolerance::relative(1e-13),
        )
        .value
    }
}

/// `L_β(z) = L((1+β)z)` for `z > 0`, `L((1-β)z)` for `z < 0`.
pub struct SkewedPotential<'a> {
    problem: &'a Problem,
    map: SkewMap,
    plus: SideTable,
    minus: SideTable,
}

impl<'a> SkewedPotential<'a> {
    /// Prepared for `|z| ≤ reach`.
    pub fn new(problem: &'a Problem, reach: f64) -> Result<Self, GammaError> {
        let map = SkewMap::new(problem.beta())?;
        Ok(Self {
            problem,
            map,
            plus: SideTable::new(problem, Side::Positive, map.kappa(reach)),
            minus: SideTable::new(problem, Side::Negative, -map.kappa(-reach)),
        })
    }

    pub fn eval(&self, z: f64) -> f64 {
        let x = self.map.kappa(z);
        if x >= 0.0 {
            self.plus.eval(self.problem, x)
        } else {
            self.minus.eval(self.problem, -x)
        }
    }

    /// `ln |A_β^ε(x)|`.
    fn ln_abs_a(&self, x: f64, eps: f64) -> f64 {
        if x == 0.0 {
            return f64::NEG_INFINITY;
        }
        let scale = 2.0 / (eps * eps);
        let sign = x.signum();
        let breaks = quad::geometric_breakpoints(x.abs(), DEPTH);
        quad::integrate_log(|u| -scale * self.eval(sign * u), &breaks, 1e-12, 20_000).ln_value
    }

    /// `A_β^ε(x) = ∫₀ˣ exp(-2L_β(z)/ε²) dz`.
    pub fn a_beta_eps(&self, x: f64, eps: f64) -> f64 {
        x.signum() * self.ln_abs_a(x, eps).exp()
    }
}

fn check_eps(eps: f64) -> Result<(), GammaError> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(GammaError::InvalidEps(eps))
    }
}

pub fn a_beta_eps(x: f64, eps: f64, problem: &Problem) -> Result<f64, GammaError> {
    check_eps(eps)?;
    Ok(SkewedPotential::new(problem, x.abs().max(f64::MIN_POSITIVE))?.a_beta_eps(x, eps))
}

/// `Γ_K(ε) = -A(-K) / (A(K) - A(-K))`, computed from logarithms of the two
/// tail integrals.
pub fn gamma_numeric(k: f64, eps: f64, problem: &Problem) -> Result<f64, GammaError> {
    check_eps(eps)?;
    if !(k.is_finite() && k > 0.0) {
        return Err(GammaError::InvalidK(k));
    }
    let pot = SkewedPotential::new(problem, k)?;
    gamma_from_potential(&pot, k, eps)
}

fn gamma_from_potential(pot: &SkewedPotential<'_>, k: f64, eps: f64) -> Result<f64, GammaError> {
    let ln_lower = pot.ln_abs_a(-k, eps);
    let ln_upper = pot.ln_abs_a(k, eps);
    if !ln_lower.is_finite() || !ln_upper.is_finite() {
        return Err(GammaError::Degenerate { eps });
    }
    Ok(1.0 / (1.0 + (ln_upper - ln_lower).exp()))
}

/// Exponents of `L(x)|ln L(x)|^γ ~ d·x^δ` at `0+` and
/// `L(x)|ln L(x)|^θ ~ k·|x|^μ` at `0-`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    pub d: f64,
    pub delta: Rational,
    pub gamma_exp: Rational,
    pub k: f64,
    pub mu: Rational,
    pub theta: Rational,
}

/// `δ = α+1`, `γ = -p`, `d = c/(σ(0±)²(α+1)^{1+p})` on each side.
pub fn asymptotic_params(problem: &Problem) -> Result<AsymptoticParams, GammaError> {
    let case = CaseLabel::from_drifts(problem.drift_plus(), problem.drift_minus());
    // A divergent but outward pair still has well-defined constants.
    let outward = problem.drift_plus().sign() == Sign::Positive
        && problem.drift_minus().sign() == Sign::Negative;
    if case == CaseLabel::ZeroFunnel || (case == CaseLabel::Unsupported && !outward) {
        return Err(GammaError::Domain(case));
    }
    let side = |s: Side| {
        let b = problem.sided_drift(s);
        let sigma0 = problem.diffusion().sigma0(s);
        let delta = b.exponent() + Rational::from_integer(1);
        let scale = b.amplitude() / (sigma0 * sigma0 * (b.alpha() + 1.0).powf(1.0 + b.p()));
        (scale, delta, -b.log_power())
    };
    let (d, delta, gamma_exp) = side(Side::Positive);
    let (k, mu, theta) = side(Side::Negative);
    Ok(AsymptoticParams {
        d,
        delta,
        gamma_exp,
        k,
        mu,
        theta,
    })
}

/// `L(x)|ln L(x)|^γ / (d·x^δ)` at a point; tends to 1 as `x → 0` when the
/// constants are right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCheck {
    pub x: f64,
    pub ratio_plus: f64,
    pub ratio_minus: f64,
}

pub const ASYMPTOTIC_CHECK_POINTS: [f64; 3] = [1e-4, 1e-6, 1e-8];

pub fn check_asymptotics(problem: &Problem, params: &AsymptoticParams) -> Vec<AsymptoticCheck> {
    let ratio = |x: f64, scale: f64, exp: Rational, log_exp: Rational| {
        let l = potential(x, problem).abs();
        l * l.ln().abs().powf(to_f64(log_exp)) / (scale * x.abs().powf(to_f64(exp)))
    };
    ASYMPTOTIC_CHECK_POINTS
        .iter()
        .map(|&x| AsymptoticCheck {
            x,
            ratio_plus: ratio(x, params.d, params.delta, params.gamma_exp),
            ratio_minus: ratio(-x, params.k, params.mu, params.theta),
        })
        .collect()
}

/// Both ratios extrapolated to `x → 0` by a polynomial in `1/|ln x|`
/// through the check points. With a log factor the raw ratios approach 1
/// only like `1 + c/|ln x|`.
pub fn extrapolated_ratios(checks: &[AsymptoticCheck]) -> (f64, f64) {
    let s: Vec<f64> = checks.iter().map(|c| 1.0 / c.x.ln().abs()).collect();
    let at_zero = |vals: &dyn Fn(&AsymptoticCheck) -> f64| {
        (0..s.len())
            .map(|i| {
                let weight: f64 = (0..s.len())
                    .filter(|&j| j != i)
                    .map(|j| -s[j] / (s[i] - s[j]))
                    .product();
                weight * vals(&checks[i])
            })
            .sum::<f64>()
    };
    (at_zero(&|c| c.ratio_plus), at_zero(&|c| c.ratio_minus))
}

fn to_f64(r: Rational) -> f64 {
    r.to_f64().expect("small rational")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaBranch {
    Case1,
    Case2One,
    Case3Zero,
}

impl std::fmt::Display for GammaBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GammaBranch::Case1 => "case1",
            GammaBranch::Case2One => "case2_one",
            GammaBranch::Case3Zero => "case3_zero",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    NumericLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaResult {
    pub value: f64,
    pub branch: GammaBranch,
    pub provenance: Provenance,
}

/// Branch by exact lexicographic comparison of `(δ, γ)` with `(μ, θ)`.
pub fn gamma_branch(params: &AsymptoticParams) -> GammaBranch {
    match (params.delta, params.gamma_exp).cmp(&(params.mu, params.theta)) {
        Ordering::Less => GammaBranch::Case2One,
        Ordering::Greater => GammaBranch::Case3Zero,
        Ordering::Equal => GammaBranch::Case1,
    }
}

pub fn gamma_closed_form(params: &AsymptoticParams, beta: f64) -> Result<GammaResult, GammaError> {
    SkewMap::new(beta)?;
    let branch = gamma_branch(params);
    let value = match branch {
        GammaBranch::Case2One => 1.0,
        GammaBranch::Case3Zero => 0.0,
        GammaBranch::Case1 => {
            let delta = to_f64(params.delta);
            log::debug!(
                "d* = {}, k* = {}",
                params.d * (1.0 + beta).powf(delta),
                params.k * (1.0 - beta).powf(to_f64(params.mu))
            );
            1.0 / (1.0 + (1.0 - beta) / (1.0 + beta) * (params.k / params.d).powf(1.0 / delta))
        }
    };
    Ok(GammaResult {
        value,
        branch,
        provenance: Provenance::ClosedForm,
    })
}

/// One cell of the `(K, ε)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCell {
    pub k: f64,
    pub eps: f64,
    pub value: Option<f64>,
    /// Moved against the trend of the previous two ladder steps by more
    /// than the tolerance.
    pub non_monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaLimit {
    pub result: GammaResult,
    /// ε at which `result` was read off.
    pub eps: f64,
    /// `max_K Γ_K - min_K Γ_K` at that ε.
    pub k_spread: f64,
    pub table: Vec<GammaCell>,
}

const TREND_TOL: f64 = 1e-3;

/// Evaluates `Γ_K(ε)` on the full grid (in parallel, output in
/// `K`-major order) and reads off the value at the smallest ε where every
/// K succeeded, averaged over K.
pub fn gamma_numeric_limit(
    problem: &Problem,
    ks: &[f64],
    eps_ladder: &[f64],
) -> Result<GammaLimit, GammaError> {
    if ks.len() < 2 || eps_ladder.is_empty() || eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(GammaError::InvalidGrid);
    }
    for &e in eps_ladder {
        check_eps(e)?;
    }
    for &k in ks {
        if !(k.is_finite() && k > 0.0) {
            return Err(GammaError::InvalidK(k));
        }
    }
    let k_max = ks.iter().cloned().fold(0.0, f64::max);
    let pot = SkewedPotential::new(problem, k_max)?;
    let cells: Vec<(f64, f64)> = ks
        .iter()
        .flat_map(|&k| eps_ladder.iter().map(move |&e| (k, e)))
        .collect();
    let values: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(k, e)| gamma_from_potential(&pot, k, e).ok())
        .collect();
    let n_eps = eps_ladder.len();
    let mut table: Vec<GammaCell> = cells
        .iter()
        .zip(&values)
        .map(|(&(k, eps), &value)| GammaCell {
            k,
            eps,
            value,
            non_monotone: false,
        })
        .collect();
    for row in table.chunks_mut(n_eps) {
        for i in 2..row.len() {
            if let (Some(a), Some(b), Some(c)) = (row[i - 2].value, row[i - 1].value, row[i].value)
            {
                let (prev, now) = (b - a, c - b);
                row[i].non_monotone = prev * now < 0.0 && now.abs() > TREND_TOL;
            }
        }
    }
    let column = |j: usize| -> Option<Vec<f64>> {
        (0..ks.len()).map(|i| table[i * n_eps + j].value).collect()
    };
    let (j, vals) = (0..n_eps)
        .rev()
        .find_map(|j| column(j).map(|v| (j, v)))
        .ok_or(GammaError::Degenerate {
            eps: eps_ladder[n_eps - 1],
        })?;
    let value = vals.iter().sum::<f64>() / vals.len() as f64;
    let spread = vals.iter().cloned().fold(f64::MIN, f64::max)
        - vals.iter().cloned().fold(f64::MAX, f64::min);
    let branch = if value > 1.0 - 1e-2 {
        GammaBranch::Case2One
    } else if value < 1e-2 {
        GammaBranch::Case3Zero
    } else {
        GammaBranch::Case1
    };
    Ok(GammaLimit {
        result: GammaResult {
            value,
            branch,
            provenance: Provenance::NumericLimit,
        },
        eps: eps_ladder[j],
        k_spread: spread,
        table,
    })
}

/// Index (0 or 1) of the candidate closer to `value`.
pub fn closer_of(value: f64, a: f64, b: f64) -> usize {
    if (value - a).abs() <= (value - b).abs() {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use num_rational::Ratio;

    fn r(n: i64, d: i64) -> Rational {
        Ratio::new(n, d)
    }

    #[test]
    fn potential_examples() {
        let p = presets::example1(r(1, 2), r(1, 2), 1.0, 2.0, 1.0, 0.0);
        for x in [1e-6f64, 0.3, 1.0, 2.0] {
            let want = x.powf(1.5) / (4.0 * 1.5);
            assert!((potential(x, &p) / want - 1.0).abs() < 1e-11);
        }
        assert_eq!(potential(0.0, &p), 0.0);
        let lin = presets::example1(r(1, 1), r(1, 1), 1.0, 1.0, 1.0, 0.0);
        assert!((potential(1.0, &lin) - 0.5).abs() < 1e-14);
        // Outward drift on the left: L is positive there too.
        assert!((potential(-1.0, &lin) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn skewed_potential_scales_the_argument() {
        let p = presets::example3(r(1, 2), 0.5);
        let pot = SkewedPotential::new(&p, 2.0).unwrap();
        for z in [-2.0, -0.7, -1e-5, 0.0, 1e-5, 0.4, 2.0] {
            let x = SkewMap::new(0.5).unwrap().kappa(z);
            let want = potential(x, &p);
            assert!(
                (pot.eval(z) - want).abs() <= 1e-12 * want.abs().max(1e-300),
                "z={z}"
            );
        }
    }

    #[test]
    fn a_matches_error_function_for_linear_drift() {
        // b = x, σ = 1: A(x) = ε√π/2·erf(x/ε).
        let p = presets::example1(r(1, 1), r(1, 1), 1.0, 1.0, 1.0, 0.0);
        for eps in [0.5, 0.05, 1e-3] {
            for x in [-1.0, -0.01, 0.002, 0.3, 2.0] {
                let got = a_beta_eps(x, eps, &p).unwrap();
                let want =
                    eps * std::f64::consts::PI.sqrt() / 2.0 * statrs::function::erf::erf(x / eps);
                assert!(
                    (got / want - 1.0).abs() < 1e-9,
                    "eps={eps} x={x}: {got} vs {want}"
                );
            }
        }
        assert_eq!(a_beta_eps(0.0, 0.1, &p).unwrap(), 0.0);
        assert!(matches!(
            a_beta_eps(1.0, 0.0, &p),
            Err(GammaError::InvalidEps(_))
        ));
    }

    #[test]
    fn a_is_odd_for_symmetric_data_and_increasing() {
        let p = presets::example3(r(1, 2), 0.0)
            .with_diffusion(crate::model::Diffusion::constant(1.5, 1.5, 100.0).unwrap());
        let pot = SkewedPotential::new(&p, 2.0).unwrap();
        let mut last = f64::NEG_INFINITY;
        for k in -20..=20 {
            let x = k as f64 / 10.0;
            let a = pot.a_beta_eps(x, 0.5);
            assert!((a + pot.a_beta_eps(-x, 0.5)).abs() <= 1e-13 * a.abs().max(1e-300));
            assert!(a > last);
            last = a;
        }
    }

    #[test]
    fn closed_form_examples() {
        let sym =
            asymptotic_params(&presets::example1(r(1, 2), r(1, 2), 1.0, 1.0, 1.0, 0.0)).unwrap();
        assert_eq!(gamma_closed_form(&sym, 0.0).unwrap().value, 0.5);
        let g = gamma_closed_form(&sym, 0.5).unwrap();
        assert!((g.value - 0.75).abs() < 1e-15);
        assert_eq!(g.branch, GammaBranch::Case1);

        let lin =
            asymptotic_params(&presets::example1(r(1, 1), r(1, 1), 1.0, 1.0, 1.0, 0.0)).unwrap();
        assert_eq!((lin.d, lin.delta, lin.gamma_exp), (0.5, r(2, 1), r(0, 1)));

        let skew =
            asymptotic_params(&presets::example1(r(3, 10), r(7, 10), 1.0, 1.0, 1.0, 0.0)).unwrap();
        assert_eq!(
            gamma_closed_form(&skew, 0.0).unwrap().branch,
            GammaBranch::Case2One
        );
        let mirror =
            asymptotic_params(&presets::example1(r(7, 10), r(3, 10), 1.0, 1.0, 1.0, 0.0)).unwrap();
        let g = gamma_closed_form(&mirror, 0.3).unwrap();
        assert_eq!((g.branch, g.value), (GammaBranch::Case3Zero, 0.0));

        // Equal exponents with general amplitude and one-sided noise levels.
        let (c, s1, s2, beta, alpha) = (2.0, 1.5, 0.7, -0.2, 0.5);
        let params =
            asymptotic_params(&presets::example1(r(1, 2), r(1, 2), c, s1, s2, beta)).unwrap();
        let want = 1.0
            / (1.0
                + (1.0 - beta) / (1.0 + beta)
                    * (c * s1 * s1 / (s2 * s2)).powf(1.0 / (alpha + 1.0)));
        assert!((gamma_closed_form(&params, beta).unwrap().value - want).abs() < 1e-14);
    }

    #[test]
    fn log_corrected_side_uses_the_derived_constant() {
        let p = presets::example2(r(1, 2), 1.0, 1.0, 0.0);
        let params = asymptotic_params(&p).unwrap();
        assert_eq!((params.delta, params.gamma_exp), (r(3, 2), r(-1, 1)));
        assert!((params.d - 1.0 / 2.25).abs() < 1e-15);
        let checks = check_asymptotics(&p, &params);
        let ratios: Vec<f64> = checks.iter().map(|c| c.ratio_plus).collect();
        assert!(ratios
            .windows(2)
            .all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()));
        assert!(checks.iter().all(|c| (c.ratio_minus - 1.0).abs() < 1e-9));
        // Extrapolated, the derived constant gives 1; the alternative
        // 1/(σ²(α+1)) would give 1/1.5.
        let (plus, minus) = extrapolated_ratios(&checks);
        assert!((plus - 1.0).abs() < 0.05, "{ratios:?} -> {plus}");
        assert!((minus - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sigma_scaling_leaves_closed_form_unchanged() {
        for factor in [0.3, 1.0, 4.0] {
            let p = presets::example3(r(1, 2), 0.4);
            let scaled = p.with_diffusion(p.diffusion().scaled(factor));
            let a = gamma_closed_form(&asymptotic_params(&p).unwrap(), 0.4)
                .unwrap()
                .value;
            let b = gamma_closed_form(&asymptotic_params(&scaled).unwrap(), 0.4)
                .unwrap()
                .value;
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn numeric_gamma_symmetric_and_skewed() {
        let sym = presets::example1(r(1, 2), r(1, 2), 1.0, 1.0, 1.0, 0.0);
        for k in DEFAULT_K_LIST {
            for eps in DEFAULT_EPS_LADDER {
                assert!((gamma_numeric(k, eps, &sym).unwrap() - 0.5).abs() < 1e-12);
            }
        }
        let skew = sym.with_beta(0.5).unwrap();
        let lim = gamma_numeric_limit(&skew, &DEFAULT_K_LIST, &DEFAULT_EPS_LADDER).unwrap();
        assert!((lim.result.value - 0.75).abs() < 1e-2, "{lim:?}");
        assert!(lim.k_spread <= 1e-3);
        assert_eq!(lim.table.len(), 15);
    }

    #[test]
    fn numeric_gamma_nondecreasing_in_beta() {
        let base = presets::example3(r(1, 2), 0.0);
        for eps in [0.1, 0.02] {
            let g: Vec<f64> = [-0.5, 0.0, 0.5]
                .iter()
                .map(|&b| gamma_numeric(1.0, eps, &base.with_beta(b).unwrap()).unwrap())
                .collect();
            assert!(g[0] <= g[1] && g[1] <= g[2], "{g:?}");
            assert!(g.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn example_three_limit_matches_base_one_ninth() {
        let p = presets::example3(r(1, 2), 0.5);
        let lim = gamma_numeric_limit(&p, &DEFAULT_K_LIST, &DEFAULT_EPS_LADDER).unwrap();
        let closed = gamma_closed_form(&asymptotic_params(&p).unwrap(), 0.5)
            .unwrap()
            .value;
        let one_ninth = 1.0 / (1.0 + (1.0 / 3.0) * (1.0f64 / 9.0).powf(2.0 / 3.0));
        let nine = 1.0 / (1.0 + (1.0 / 3.0) * 9.0f64.powf(2.0 / 3.0));
        assert!((closed - one_ninth).abs() < 1e-14);
        assert!((lim.result.value - one_ninth).abs() < 1e-2, "{lim:?}");
        assert_eq!(closer_of(lim.result.value, one_ninth, nine), 0);
    }

    #[test]
    fn degenerate_branches_drift_toward_their_limits() {
        let p = presets::example1(r(3, 10), r(7, 10), 1.0, 1.0, 1.0, 0.5);
        let g: Vec<f64> = DEFAULT_EPS_LADDER
            .iter()
            .map(|&e| gamma_numeric(1.0, e, &p).unwrap())
            .collect();
        assert!(g.windows(2).all(|w| w[1] > w[0]), "{g:?}");
        let q = presets::example1(r(7, 10), r(3, 10), 1.0, 1.0, 1.0, 0.5);
        let g: Vec<f64> = DEFAULT_EPS_LADDER
            .iter()
            .map(|&e| gamma_numeric(1.0, e, &q).unwrap())
            .collect();
        assert!(g.windows(2).all(|w| w[1] < w[0]), "{g:?}");
    }

    #[test]
    fn limit_rejects_bad_grids() {
        let p = presets::example1(r(1, 2), r(1, 2), 1.0, 1.0, 1.0, 0.0);
        assert_eq!(
            gamma_numeric_limit(&p, &[1.0], &[0.1]).unwrap_err(),
            GammaError::InvalidGrid
        );
        assert_eq!(
            gamma_numeric_limit(&p, &[1.0, 2.0], &[0.1, 0.2]).unwrap_err(),
            GammaError::InvalidGrid
        );
        assert!(matches!(
            gamma_numeric(-1.0, 0.1, &p),
            Err(GammaError::InvalidK(_))
        ));
    }
}
