//! Invariants checked on random members of the drift family.

use proptest::prelude::*;
use skewlimit::gamma::{self, GammaBranch};
use skewlimit::presets::{example1, PRESET_LAMBDA};
use skewlimit::{
    extremal_solutions, funnel_solution, transform_problem, CaseLabel, Diffusion, FunnelBranch,
    Problem, Rational, SidedDrift, Sign,
};

fn outward_side(sign: Sign) -> impl Strategy<Value = SidedDrift> {
    let power = (1i64..20, 0i64..3, 0.5f64..2.0).prop_map(move |(a, p, c)| {
        SidedDrift::new(sign, c, Rational::new(a, 20), Rational::new(p, 2)).unwrap()
    });
    // Linear growth damped by (|ln u| + 1)^p escapes to infinity at time
    // 2/(c(p-1)); keep that beyond the horizon 1.
    let damped_linear = (3i64..6, 0.0f64..1.0).prop_map(move |(p, u)| {
        let c_max = (1.9 / (p as f64 / 2.0 - 1.0)).min(2.0);
        let c = 0.5 + u * (c_max - 0.5);
        SidedDrift::new(sign, c, Rational::from_integer(1), Rational::new(p, 2)).unwrap()
    });
    prop_oneof![4 => power, 1 => damped_linear]
}

fn a1_problem() -> impl Strategy<Value = Problem> {
    (
        outward_side(Sign::Positive),
        outward_side(Sign::Negative),
        0.5f64..2.0,
        0.5f64..2.0,
        -0.9f64..0.9,
    )
        .prop_map(|(plus, minus, s1, s2, beta)| {
            Problem::new(
                plus,
                minus,
                Diffusion::constant(s1, s2, PRESET_LAMBDA).unwrap(),
                beta,
                1.0,
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn funnel_lies_between_the_extremals(p in a1_problem(), lambda in 0.0f64..1.0, mu in 0.0f64..1.0) {
        let pair = extremal_solutions(&p, CaseLabel::A1).unwrap();
        let up = funnel_solution(&pair, lambda, FunnelBranch::Upper).unwrap();
        let down = funnel_solution(&pair, mu, FunnelBranch::Lower).unwrap();
        for k in 0..=200 {
            let t = k as f64 / 200.0;
            prop_assert!(pair.lower(t) <= down.eval(t));
            prop_assert!(down.eval(t) <= 0.0);
            prop_assert!(0.0 <= up.eval(t));
            prop_assert!(up.eval(t) <= pair.upper(t));
        }
        prop_assert!(up.residual(|x| p.drift(x), 200) <= 1e-6);
        prop_assert!(down.residual(|x| p.drift(x), 200) <= 1e-6);
    }

    #[test]
    fn extremals_map_through_the_skew_transform(p in a1_problem()) {
        let ito = transform_problem(&p).unwrap();
        let map = ito.map();
        let y = extremal_solutions(&p, CaseLabel::A1).unwrap();
        let z = extremal_solutions(&ito, CaseLabel::A1).unwrap();
        let scale = 1.0 + y.upper(1.0).max(-y.lower(1.0));
        for k in 0..=50 {
            let t = k as f64 / 50.0;
            prop_assert!((y.upper(t) - map.kappa(z.upper(t))).abs() <= 1e-6 * scale);
            prop_assert!((y.lower(t) - map.kappa(z.lower(t))).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn closed_form_weight_grows_with_beta(
        a in 1i64..20, c in 0.2f64..5.0, s1 in 0.5f64..2.0, s2 in 0.5f64..2.0,
        b1 in -0.95f64..0.95, b2 in -0.95f64..0.95,
    ) {
        let alpha = Rational::new(a, 20);
        let params = gamma::asymptotic_params(&example1(alpha, alpha, c, s1, s2, 0.0)).unwrap();
        let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        let g_lo = gamma::gamma_closed_form(&params, lo).unwrap();
        let g_hi = gamma::gamma_closed_form(&params, hi).unwrap();
        prop_assert_eq!(g_lo.branch, GammaBranch::Case1);
        prop_assert!(g_lo.value <= g_hi.value + 1e-15);
        prop_assert!(0.0 < g_lo.value && g_hi.value < 1.0);
    }

    #[test]
    fn numeric_weight_matches_closed_form_for_equal_exponents(
        a in 2i64..9, c in 0.5f64..2.0, beta in -0.6f64..0.6,
    ) {
        let alpha = Rational::new(a, 10);
        let p = example1(alpha, alpha, c, 1.0, 1.0, beta);
        let closed = gamma::gamma_closed_form(&gamma::asymptotic_params(&p).unwrap(), beta).unwrap();
        let numeric = gamma::gamma_numeric(1.0, 0.01, &p).unwrap();
        prop_assert!((numeric - closed.value).abs() <= 1e-2, "{} vs {}", numeric, closed.value);
    }

    #[test]
    fn branch_follows_exponent_order(a in 1i64..20, b in 1i64..20) {
        let p = example1(Rational::new(a, 20), Rational::new(b, 20), 1.0, 1.0, 1.0, 0.3);
        let branch = gamma::gamma_branch(&gamma::asymptotic_params(&p).unwrap());
        let expected = match a.cmp(&b) {
            std::cmp::Ordering::Less => GammaBranch::Case2One,
            std::cmp::Ordering::Greater => GammaBranch::Case3Zero,
            std::cmp::Ordering::Equal => GammaBranch::Case1,
        };
        prop_assert_eq!(branch, expected);
    }
}
