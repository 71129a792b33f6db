//! Gauss–Kronrod quadrature: a plain globally adaptive driver and a
//! log-domain variant for integrands that span thousands of orders of
//! magnitude.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

// Kronrod 15-point abscissae (positive half, descending) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss 7-point weights, attached to XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self {
            abs: 0.0,
            rel,
            max_panels: 4000,
        }
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }
}

/// One 15-point Kronrod panel on `[a, b]`; the error is `|K15 - G7|`.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    Estimate {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

struct Panel {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Globally adaptive integration over the partition given by `breakpoints`
/// (at least two increasing points). The panel with the largest error is
/// bisected until the summed error meets the tolerance.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, breakpoints: &[f64], tol: Tolerance) -> Estimate {
    assert!(breakpoints.len() >= 2, "need at least one panel");
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            heap.push(Panel {
                a: w[0],
                b: w[1],
                est: gk15(&mut f, w[0], w[1]),
            });
        }
    }
    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.est.value, e + p.est.error));
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target || heap.len() >= tol.max_panels {
            return Estimate { value, error };
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            heap.push(Panel {
                est: Estimate {
                    value: worst.est.value,
                    error: 0.0,
                },
                ..worst
            });
            continue;
        }
        heap.push(Panel {
            a: worst.a,
            b: mid,
            est: gk15(&mut f, worst.a, mid),
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            est: gk15(&mut f, mid, worst.b),
        });
    }
}

/// `[0, x·2^-depth, …, x/4, x/2, x]`: panels that shrink geometrically
/// toward an endpoint singularity at 0.
pub fn geometric_breakpoints(x: f64, depth: usize) -> Vec<f64> {
    let mut pts = Vec::with_capacity(depth + 2);
    pts.push(0.0);
    for k in (0..=depth).rev() {
        pts.push(x * 0.5f64.powi(k as i32));
    }
    pts
}

/// Natural logarithm of a positive quantity plus the log of its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEstimate {
    pub ln_value: f64,
    pub ln_error: f64,
}

impl LogEstimate {
    pub fn relative_error(&self) -> f64 {
        (self.ln_error - self.ln_value).exp()
    }
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.into_iter().collect();
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

struct LogPanel {
    a: f64,
    b: f64,
    ln_value: f64,
    ln_error: f64,
}

impl PartialEq for LogPanel {
    fn eq(&self, other: &Self) -> bool {
        self.ln_error == other.ln_error
    }
}
impl Eq for LogPanel {}
impl PartialOrd for LogPanel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for LogPanel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ln_error.total_cmp(&other.ln_error)
    }
}

fn log_gk15<F: FnMut(f64) -> f64>(ln_f: &mut F, a: f64, b: f64) -> LogPanel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut nodes = [0.0f64; 15];
    nodes[7] = ln_f(center);
    for j in 0..7 {
        let dx = half * XGK[j];
        nodes[j] = ln_f(center - dx);
        nodes[14 - j] = ln_f(center + dx);
    }
    let m = nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return LogPanel {
            a,
            b,
            ln_value: f64::NEG_INFINITY,
            ln_error: f64::NEG_INFINITY,
        };
    }
    let e = |i: usize| (nodes[i] - m).exp();
    let mut kronrod = WGK[7] * e(7);
    let mut gauss = WG[3] * e(7);
    for j in 0..7 {
        let sum = e(j) + e(14 - j);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    LogPanel {
        a,
        b,
        ln_value: m + (kronrod * half).ln(),
        ln_error: m + ((kronrod - gauss).abs() * half).ln(),
    }
}

/// Computes `ln ∫ exp(ln_f(x)) dx` over the partition `breakpoints`.
///
/// Every panel is evaluated with its own maximum subtracted, so integrands
/// like `exp(-x²/ε²)` at tiny `ε` neither underflow nor lose the panels that
/// carry the mass.
pub fn integrate_log<F: FnMut(f64) -> f64>(
    mut ln_f: F,
    breakpoints: &[f64],
    rel_tol: f64,
    max_panels: usize,
) -> LogEstimate {
    assert!(breakpoints.len() >= 2, "need at least one panel");
    let mut heap: BinaryHeap<LogPanel> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| log_gk15(&mut ln_f, w[0], w[1]))
        .collect();
    let ln_tol = rel_tol.ln();
    loop {
        let ln_value = log_sum_exp(heap.iter().map(|p| p.ln_value));
        let ln_error = log_sum_exp(heap.iter().map(|p| p.ln_error));
        if !ln_value.is_finite() || ln_error - ln_value <= ln_tol || heap.len() >= max_panels {
            return LogEstimate { ln_value, ln_error };
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(LogPanel {
                ln_error: f64::NEG_INFINITY,
                ..worst
            });
            continue;
        }
        heap.push(log_gk15(&mut ln_f, worst.a, mid));
        heap.push(log_gk15(&mut ln_f, mid, worst.b));
    }
}
