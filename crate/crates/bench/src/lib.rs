//! Problems shared by the benchmarks.

use skewlimit::model::{Diffusion, Problem, SidedDrift, Sign};
use skewlimit::presets;
use skewlimit::rational::parse_rational;

/// The equal-exponent square-root problem with β = 0.5.
pub fn square_root() -> Problem {
    let half = parse_rational("1/2").expect("literal");
    presets::example1(half, half, 1.0, 1.0, 1.0, 0.5)
}

/// A logarithmically corrected drift at α = 1, the slowest escape-time
/// tables to build.
pub fn log_corrected() -> Problem {
    let one = parse_rational("1").expect("literal");
    let p = parse_rational("3/2").expect("literal");
    Problem::new(
        SidedDrift::new(Sign::Positive, 1.0, one, p).expect("valid drift"),
        SidedDrift::new(Sign::Negative, 1.0, one, p).expect("valid drift"),
        Diffusion::constant(1.0, 1.0, presets::PRESET_LAMBDA).expect("valid sigma"),
        0.3,
        1.0,
    )
    .expect("valid problem")
}
