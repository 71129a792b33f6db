//! Acceptance checks, one PASS/FAIL line each with the measured numbers.
//!
//! The process exits 0 after reporting so that the rest of the test suite
//! still runs; set `SKEWLIMIT_ACCEPTANCE_STRICT=1` to exit 1 on any FAIL.
//! `SKEWLIMIT_ACCEPTANCE_ONLY=4,7` runs a subset.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skewlimit::gamma::{self, GammaBranch, DEFAULT_EPS_LADDER, DEFAULT_K_LIST};
use skewlimit::mc::{self, Ensemble, EnsembleConfig, StepRule, SweepConfig};
use skewlimit::presets::{example1, PRESET_LAMBDA};
use skewlimit::{
    extremal_solutions, funnel_solution, transform_problem, CaseLabel, Diffusion, FunnelBranch,
    Problem, Rational, SidedDrift, Sign,
};
use skewlimit_cli::commands::{self, ReproduceSettings};
use skewlimit_cli::Table;

struct Verdict {
    id: usize,
    pass: bool,
    detail: String,
}

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn preset(name: &str) -> Problem {
    (skewlimit_cli::presets::find(name).expect("preset").build)()
}

fn criterion_1() -> Verdict {
    let p = preset("example1");
    let closed =
        gamma::gamma_closed_form(&gamma::asymptotic_params(&p).unwrap(), p.beta()).unwrap();
    let start = Instant::now();
    let vals: Vec<f64> = DEFAULT_K_LIST
        .iter()
        .map(|&k| gamma::gamma_numeric(k, 0.01, &p).unwrap())
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let spread = vals.iter().cloned().fold(f64::MIN, f64::max)
        - vals.iter().cloned().fold(f64::MAX, f64::min);
    let worst = vals
        .iter()
        .map(|v| (v - closed.value).abs())
        .fold(0.0, f64::max);
    Verdict {
        id: 1,
        pass: closed.value == 0.75 && worst <= 1e-2 && spread <= 1e-3 && secs <= 10.0,
        detail: format!(
            "closed form {} ; Gamma_K(0.01) for K=0.5,1,2: {:?} ; max |diff| {:.2e} ; K-spread {:.2e} ; {:.3} s",
            closed.value, vals, worst, spread, secs
        ),
    }
}

fn criterion_2() -> Verdict {
    let p = preset("example1");
    let start = Instant::now();
    let s = mc::run_ensemble(&p, &EnsembleConfig::new(0.02, 1e-4, 4000, 2024)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        id: 2,
        pass: (s.gamma_hat - 0.75).abs() <= 0.03 && s.ci_low <= 0.75 && 0.75 <= s.ci_high && secs <= 300.0,
        detail: format!(
            "gamma_hat {:.4} Wilson [{:.4}, {:.4}] (upper {}, lower {}, ambiguous {}) vs 0.75 ; {:.1} s",
            s.gamma_hat, s.ci_low, s.ci_high, s.count_upper, s.count_lower, s.count_ambiguous, secs
        ),
    }
}

fn criterion_3() -> Verdict {
    let p = preset("symmetric");
    let closed =
        gamma::gamma_closed_form(&gamma::asymptotic_params(&p).unwrap(), p.beta()).unwrap();
    let limit = gamma::gamma_numeric_limit(&p, &DEFAULT_K_LIST, &DEFAULT_EPS_LADDER).unwrap();
    let worst = limit
        .table
        .iter()
        .map(|c| c.value.map(|v| (v - 0.5).abs()).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let s = mc::run_ensemble(&p, &EnsembleConfig::new(0.02, 1e-4, 4000, 2024)).unwrap();
    Verdict {
        id: 3,
        pass: closed.value == 0.5 && worst <= 1e-6 && (0.47..=0.53).contains(&s.gamma_hat),
        detail: format!(
            "closed form {} ; max |Gamma_K(eps) - 0.5| over {} cells {:.2e} ; gamma_hat {:.4} [{:.4}, {:.4}]",
            closed.value,
            limit.table.len(),
            worst,
            s.gamma_hat,
            s.ci_low,
            s.ci_high
        ),
    }
}

fn criterion_4() -> Verdict {
    // Right exponent below the left one gives weight 1; the mirror image
    // (exponents swapped, beta negated) gives weight 0.
    let cases = [
        (
            "0.3/0.7, beta=0.5",
            example1(r(3, 10), r(7, 10), 1.0, 1.0, 1.0, 0.5),
            GammaBranch::Case2One,
        ),
        (
            "0.7/0.3, beta=-0.5",
            example1(r(7, 10), r(3, 10), 1.0, 1.0, 1.0, -0.5),
            GammaBranch::Case3Zero,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, p, expected) in cases {
        let g = gamma::gamma_closed_form(&gamma::asymptotic_params(&p).unwrap(), p.beta()).unwrap();
        let s = mc::run_ensemble(&p, &EnsembleConfig::new(0.01, 1e-5, 2000, 2024)).unwrap();
        let numeric = gamma::gamma_numeric(1.0, 0.01, &p).unwrap();
        let wrong = match expected {
            GammaBranch::Case2One => s.count_lower,
            _ => s.count_upper,
        } as f64
            / s.n_paths as f64;
        pass &= g.branch == expected && wrong <= 0.02;
        parts.push(format!(
            "{label}: branch {} Gamma={} ; MC fraction on the other extremal {:.4} ({} of {}) ; Gamma_1(0.01) = {:.4}",
            g.branch,
            g.value,
            wrong,
            (wrong * s.n_paths as f64).round(),
            s.n_paths,
            numeric
        ));
    }
    Verdict {
        id: 4,
        pass,
        detail: parts.join(" | "),
    }
}

fn criterion_5() -> Verdict {
    let p = preset("a2");
    let cfg = SweepConfig {
        n_paths: 2000,
        step_rule: StepRule::Default,
        master_seed: 2024,
        tolerance: mc::DEFAULT_TOLERANCE,
        refine_near_zero: false,
    };
    let rows = mc::converge_sweep(&p, &[0.05, 0.02, 0.01], &cfg, &DEFAULT_K_LIST).unwrap();
    let fractions: Vec<String> = rows
        .iter()
        .map(|row| match &row.stats {
            Ok(s) => format!(
                "eps={} lower {}/{} = {:.4} (ambiguous {})",
                row.eps,
                s.count_lower,
                s.n_paths,
                s.count_lower as f64 / s.n_paths as f64,
                s.count_ambiguous
            ),
            Err(e) => format!("eps={} failed: {e}", row.eps),
        })
        .collect();
    let last = rows.last().unwrap();
    let pass = match &last.stats {
        Ok(s) => s.count_lower as f64 / s.n_paths as f64 <= 0.02,
        Err(_) => false,
    };
    Verdict {
        id: 5,
        pass,
        detail: format!(
            "{} ; Gamma_K(0.01) mean over K {}",
            fractions.join(" ; "),
            last.gamma_numeric
                .map(|g| format!("{g:.4}"))
                .unwrap_or_default()
        ),
    }
}

fn criterion_6() -> Verdict {
    let names = [
        "example1",
        "example1-upper",
        "example1-lower",
        "symmetric",
        "example2",
        "example3",
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for name in names {
        let p = preset(name);
        let case = CaseLabel::from_drifts(p.drift_plus(), p.drift_minus());
        assert_eq!(case, CaseLabel::A1, "{name}");
        let ito = transform_problem(&p).unwrap();
        let map = ito.map();
        let y = extremal_solutions(&p, case).unwrap();
        let z = extremal_solutions(&ito, case).unwrap();
        let scale = 1.0 + y.upper(p.horizon()).abs().max(y.lower(p.horizon()).abs());
        let worst = (0..=1000)
            .map(|k| {
                let t = p.horizon() * k as f64 / 1000.0;
                (y.upper(t) - map.kappa(z.upper(t)))
                    .abs()
                    .max((y.lower(t) - map.kappa(z.lower(t))).abs())
            })
            .fold(0.0, f64::max);
        pass &= worst <= 1e-6 * scale;
        parts.push(format!("{name} {:.1e}", worst / scale));
    }
    Verdict {
        id: 6,
        pass,
        detail: format!("max |y - kappa(z)| / (1+|y(T)|): {}", parts.join(", ")),
    }
}

fn random_side(rng: &mut ChaCha8Rng, sign: Sign) -> SidedDrift {
    let c = rng.gen_range(0.5..2.0);
    if rng.gen_bool(0.2) {
        // Linear growth damped by (|ln u| + 1)^p leaves 0 in finite time and
        // blows up at time 2/(c(p-1)); keep that beyond the horizon 1.
        let p = [r(3, 2), r(2, 1), r(5, 2)][rng.gen_range(0..3)];
        let c_max = (1.9 / (skewlimit::rational::to_f64(&p) - 1.0)).min(2.0);
        SidedDrift::new(sign, rng.gen_range(0.5..c_max), r(1, 1), p).unwrap()
    } else {
        let alpha = r(rng.gen_range(1..20), 20);
        let p = [r(0, 1), r(1, 2), r(1, 1)][rng.gen_range(0..3)];
        SidedDrift::new(sign, c, alpha, p).unwrap()
    }
}

fn log_draw(draw: usize, p: &Problem, res: f64) {
    if std::env::var_os("SKEWLIMIT_ACCEPTANCE_VERBOSE").is_some() {
        eprintln!(
            "  draw {draw}: + a={} p={} ; - a={} p={} ; residual {res:.1e}",
            p.drift_plus().alpha(),
            p.drift_plus().p(),
            p.drift_minus().alpha(),
            p.drift_minus().p()
        );
    }
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_order = 0.0f64;
    let mut worst_residual = 0.0f64;
    let mut failures = Vec::new();
    for draw in 0..20 {
        let p = Problem::new(
            random_side(&mut rng, Sign::Positive),
            random_side(&mut rng, Sign::Negative),
            Diffusion::constant(1.0, 1.0, PRESET_LAMBDA).unwrap(),
            0.0,
            1.0,
        )
        .unwrap();
        let pair = extremal_solutions(&p, CaseLabel::A1).unwrap();
        let lambda = rng.gen_range(0.0..1.0);
        let mu = rng.gen_range(0.0..1.0);
        let up = funnel_solution(&pair, lambda, FunnelBranch::Upper).unwrap();
        let down = funnel_solution(&pair, mu, FunnelBranch::Lower).unwrap();
        for k in 0..=1000 {
            let t = k as f64 / 1000.0;
            let chain = [pair.lower(t), down.eval(t), 0.0, up.eval(t), pair.upper(t)];
            let violation = chain.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
            worst_order = worst_order.max(violation);
        }
        let drift = |x: f64| p.drift(x);
        let res = up.residual(drift, 1000).max(down.residual(drift, 1000));
        worst_residual = worst_residual.max(res);
        log_draw(draw, &p, res);
        if res > 1e-6 {
            failures.push(format!(
                "draw {draw} (+: a={}, p={} ; -: a={}, p={}) residual {res:.1e}",
                p.drift_plus().alpha(),
                p.drift_plus().p(),
                p.drift_minus().alpha(),
                p.drift_minus().p()
            ));
        }
    }
    Verdict {
        id: 7,
        pass: worst_order <= 0.0 && worst_residual <= 1e-6,
        detail: format!(
            "20 draws: worst ordering violation {worst_order:.1e}, worst residual {worst_residual:.1e}{}",
            if failures.is_empty() { String::new() } else { format!(" ; {}", failures.join(" ; ")) }
        ),
    }
}

fn criterion_8() -> Verdict {
    let p = preset("skew-bm");
    let ensemble = Ensemble::new(&p).unwrap();
    let cfg = EnsembleConfig::new(1.0, 1e-4, 4000, 2024);
    let tally = ensemble.tally(&cfg, 0..4000).unwrap();
    let (mean, se) = tally.positive_fraction();
    let target = (1.0 + p.beta()) / 2.0;
    Verdict {
        id: 8,
        pass: (mean - target).abs() <= 1.959_963_984_540_054 * se,
        detail: format!(
            "time fraction with xi > 0: {mean:.4} +- {:.4} (95%) vs {target} over 4000 paths, h = 1e-4",
            1.96 * se
        ),
    }
}

fn criterion_9() -> Verdict {
    let settings = ReproduceSettings::default();
    let row = commands::example_row("example3", &settings).unwrap();
    let candidates = [row.gamma_closed_form, row.gamma_alternative];
    let by_mc = gamma::closer_of(row.stats.gamma_hat, candidates[0], candidates[1]);
    let by_numeric = gamma::closer_of(row.gamma_numeric_limit, candidates[0], candidates[1]);
    let matched = candidates[by_mc];
    Verdict {
        id: 9,
        pass: by_mc == by_numeric
            && (row.stats.gamma_hat - matched).abs() <= 0.03
            && row.verdict == format!("matches {}", row.candidates[by_mc]),
        detail: format!(
            "{} = {:.4}, {} = {:.4} ; numeric limit {:.4} (eps {}) ; gamma_hat {:.4} [{:.4}, {:.4}] ; verdict: {}",
            row.candidates[0],
            candidates[0],
            row.candidates[1],
            candidates[1],
            row.gamma_numeric_limit,
            row.numeric_limit_eps,
            row.stats.gamma_hat,
            row.stats.ci_low,
            row.stats.ci_high,
            row.verdict
        ),
    }
}

const SMALL_CONFIG: &str = r#"
[problem]
beta = 0.5

[problem.drift_plus]
sign = "+"
c = 1.0
alpha = "1/2"

[problem.drift_minus]
sign = "-"
c = 1.0
alpha = "1/2"

[problem.sigma]
plus = { kind = "constant", value = 1.0 }
minus = { kind = "constant", value = 1.0 }

[run]
eps_ladder = [0.1, 0.05, 0.02]
n_paths = 500
h = 1e-4
master_seed = 99
"#;

fn criterion_10() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, SMALL_CONFIG).unwrap();
    let run = |sub: &str, workers: &str| -> Vec<u8> {
        let out = dir.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_skewlimit"))
            .args(["converge", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .args(["--workers", workers])
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        std::fs::read(out.join("converge.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    let text = String::from_utf8(a.clone()).unwrap();
    let round_trip = Table::from_csv(&text)
        .map(|t| t.to_csv() == text)
        .unwrap_or(false);
    Verdict {
        id: 10,
        pass: a == b && a == c && round_trip,
        detail: format!(
            "two runs byte-identical: {} ; identical with 3 workers: {} ; reader round trip exact: {} ; {} bytes",
            a == b,
            a == c,
            round_trip,
            a.len()
        ),
    }
}

fn main() {
    // Ignore libtest flags such as --nocapture or filters.
    let checks: [fn() -> Verdict; 10] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ];
    let only: Option<Vec<usize>> = std::env::var("SKEWLIMIT_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    let mut ran = 0;
    for (i, check) in checks.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {} [{:.1} s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.id,
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria pass", ran - failed, ran);
    if failed > 0 && std::env::var("SKEWLIMIT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
