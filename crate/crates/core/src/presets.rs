//! Ready-made problems matching the worked examples of the theory: pure
//! power drifts with piecewise-constant noise, a logarithmically corrected
//! drift, and a smoothly varying noise coefficient.

use crate::model::{Diffusion, Problem, SidedDrift, SigmaBranch, Sign};
use crate::rational::Rational;

/// Λ used by the presets; generous enough for every preset on `±[0.1, 2]`.
pub const PRESET_LAMBDA: f64 = 100.0;

/// `b = x^α₁` (x ≥ 0), `-C|x|^α₂` (x < 0); `σ = σ₁` (x ≥ 0), `σ₂` (x < 0).
pub fn example1(
    alpha1: Rational,
    alpha2: Rational,
    c: f64,
    sigma1: f64,
    sigma2: f64,
    beta: f64,
) -> Problem {
    Problem::new(
        SidedDrift::power(Sign::Positive, 1.0, alpha1).expect("valid alpha1"),
        SidedDrift::power(Sign::Negative, c, alpha2).expect("valid alpha2"),
        Diffusion::constant(sigma1, sigma2, PRESET_LAMBDA).expect("valid sigma"),
        beta,
        1.0,
    )
    .expect("valid preset")
}

/// `b = x^α(|ln x| + 1)` (x > 0), `-|x|^α` (x ≤ 0); σ as in [`example1`].
pub fn example2(alpha: Rational, sigma1: f64, sigma2: f64, beta: f64) -> Problem {
    Problem::new(
        SidedDrift::new(Sign::Positive, 1.0, alpha, Rational::from_integer(1))
            .expect("valid alpha"),
        SidedDrift::power(Sign::Negative, 1.0, alpha).expect("valid alpha"),
        Diffusion::constant(sigma1, sigma2, PRESET_LAMBDA).expect("valid sigma"),
        beta,
        1.0,
    )
    .expect("valid preset")
}

/// `b = x^α` (x ≥ 0), `-|x|^α` (x < 0); `σ = 2 - cos x` (x ≥ 0), `2 + cos x` (x < 0).
pub fn example3(alpha: Rational, beta: f64) -> Problem {
    Problem::new(
        SidedDrift::power(Sign::Positive, 1.0, alpha).expect("valid alpha"),
        SidedDrift::power(Sign::Negative, 1.0, alpha).expect("valid alpha"),
        Diffusion::piecewise(
            SigmaBranch::Cosine {
                offset: 2.0,
                amplitude: -1.0,
            },
            SigmaBranch::Cosine {
                offset: 2.0,
                amplitude: 1.0,
            },
            PRESET_LAMBDA,
        )
        .expect("valid sigma"),
        beta,
        1.0,
    )
    .expect("valid preset")
}
