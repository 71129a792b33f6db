//! Named problems selectable with `--preset`.

use skewlimit::presets::{example1, example2, example3};
use skewlimit::{Diffusion, Problem, Rational, SidedDrift, Sign};

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

pub struct Preset {
    pub name: &'static str,
    pub about: &'static str,
    pub build: fn() -> Problem,
}

fn skew_bm() -> Problem {
    // A drift this small never moves a unit-noise path measurably, so the
    // process is skew Brownian motion for practical purposes.
    Problem::new(
        SidedDrift::power(Sign::Positive, 1e-12, r(1, 2)).expect("valid drift"),
        SidedDrift::power(Sign::Negative, 1e-12, r(1, 2)).expect("valid drift"),
        Diffusion::constant(1.0, 1.0, skewlimit::presets::PRESET_LAMBDA).expect("valid sigma"),
        0.5,
        1.0,
    )
    .expect("valid preset")
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "example1",
        about: "x^(1/2) / -|x|^(1/2), unit noise, beta = 0.5 (Gamma = 3/4)",
        build: || example1(r(1, 2), r(1, 2), 1.0, 1.0, 1.0, 0.5),
    },
    Preset {
        name: "example1-upper",
        about: "exponents 0.3 / 0.7, beta = 0.5 (Gamma = 1)",
        build: || example1(r(3, 10), r(7, 10), 1.0, 1.0, 1.0, 0.5),
    },
    Preset {
        name: "example1-lower",
        about: "exponents 0.7 / 0.3, beta = -0.5 (Gamma = 0)",
        build: || example1(r(7, 10), r(3, 10), 1.0, 1.0, 1.0, -0.5),
    },
    Preset {
        name: "symmetric",
        about: "x^(1/2) / -|x|^(1/2), unit noise, beta = 0 (Gamma = 1/2)",
        build: || example1(r(1, 2), r(1, 2), 1.0, 1.0, 1.0, 0.0),
    },
    Preset {
        name: "example2",
        about: "log-corrected drift on the right, alpha = 1/2, beta = 0.5 (Gamma = 1)",
        build: || example2(r(1, 2), 1.0, 1.0, 0.5),
    },
    Preset {
        name: "example3",
        about: "alpha = 1/2, sigma = 2 -/+ cos x, beta = 0.5",
        build: || example3(r(1, 2), 0.5),
    },
    Preset {
        name: "a2",
        about: "exponents 1/2 / 1: only the upper extremal leaves 0",
        build: || example1(r(1, 2), r(1, 1), 1.0, 1.0, 1.0, 0.5),
    },
    Preset {
        name: "a3",
        about: "exponents 1 / 1/2: only the lower extremal leaves 0",
        build: || example1(r(1, 1), r(1, 2), 1.0, 1.0, 1.0, 0.5),
    },
    Preset {
        name: "skew-bm",
        about: "negligible drift, unit noise, beta = 0.5",
        build: skew_bm,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}
