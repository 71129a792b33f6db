//! Experiment configuration: a TOML file with a `[problem]` block, an
//! optional `[run]` block and an optional `[output]` block.
//!
//! `alpha` and `p` are exact rationals and may be written as strings
//! (`"3/10"`, `"0.3"`) or plain numbers.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skewlimit::gamma::{DEFAULT_EPS_LADDER, DEFAULT_K_LIST};
use skewlimit::mc::{StepRule, DEFAULT_TOLERANCE};
use skewlimit::rational::{self, Rational};
use skewlimit::{Diffusion, Problem, SidedDrift, SigmaBranch, Sign};
use thiserror::Error;
use toml::Spanned;

/// A config problem with the line it points at (when known).
#[derive(Debug, Error)]
pub struct ConfigError {
    pub source_name: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.source_name, line, self.message),
            None => write!(f, "{}: {}", self.source_name, self.message),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RationalInput {
    Int(i64),
    Float(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrift {
    sign: Spanned<String>,
    c: Spanned<f64>,
    alpha: Spanned<RationalInput>,
    #[serde(default)]
    p: Option<Spanned<RationalInput>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSigma {
    plus: Spanned<SigmaBranch>,
    minus: Spanned<SigmaBranch>,
    #[serde(default)]
    lambda: Option<Spanned<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    drift_plus: RawDrift,
    drift_minus: RawDrift,
    sigma: RawSigma,
    beta: Spanned<f64>,
    #[serde(default)]
    horizon: Option<Spanned<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    eps_ladder: Option<Spanned<Vec<f64>>>,
    n_paths: Option<Spanned<i64>>,
    h: Option<Spanned<f64>>,
    h_rule: Option<Spanned<String>>,
    master_seed: Option<Spanned<i64>>,
    k_list: Option<Spanned<Vec<f64>>>,
    tolerance: Option<Spanned<f64>>,
    refine_near_zero: Option<bool>,
    validation_grid: Option<Spanned<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<String>,
    formats: Option<Spanned<Vec<String>>>,
    dump_paths: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// One side of the drift as resolved from the config, kept in the exact
/// form it was given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub sign: Sign,
    pub c: f64,
    pub alpha: String,
    pub p: String,
}

impl DriftSpec {
    pub fn of(d: &SidedDrift) -> Self {
        Self {
            sign: d.sign(),
            c: d.amplitude(),
            alpha: rational::Display(&d.exponent()).to_string(),
            p: rational::Display(&d.log_power()).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSpec {
    pub plus: SigmaBranch,
    pub minus: SigmaBranch,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub drift_plus: DriftSpec,
    pub drift_minus: DriftSpec,
    pub sigma: SigmaSpec,
    pub beta: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub eps_ladder: Vec<f64>,
    pub n_paths: usize,
    pub step_rule: StepRule,
    pub master_seed: u64,
    pub k_list: Vec<f64>,
    pub tolerance: f64,
    pub refine_near_zero: bool,
    pub validation_grid: Vec<f64>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            eps_ladder: DEFAULT_EPS_LADDER.to_vec(),
            n_paths: 4000,
            step_rule: StepRule::Default,
            master_seed: 2024,
            k_list: DEFAULT_K_LIST.to_vec(),
            tolerance: DEFAULT_TOLERANCE,
            refine_near_zero: false,
            validation_grid: skewlimit::default_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub dump_paths: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: None,
            formats: vec![Format::Csv],
            dump_paths: 0,
        }
    }
}

/// A fully resolved experiment: every default filled in. This is what
/// reports echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub run: RunSpec,
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_problem(problem: &Problem) -> Self {
        let (plus, minus) = problem
            .diffusion()
            .branches()
            .expect("declarative diffusion");
        Self {
            problem: ProblemSpec {
                drift_plus: DriftSpec::of(problem.drift_plus()),
                drift_minus: DriftSpec::of(problem.drift_minus()),
                sigma: SigmaSpec {
                    plus,
                    minus,
                    lambda: problem.diffusion().lambda(),
                },
                beta: problem.beta(),
                horizon: problem.horizon(),
            },
            run: RunSpec::default(),
            output: OutputSpec::default(),
        }
    }

    /// Builds the core problem. Only fails for hand-built specs; specs
    /// from [`parse`] were checked already.
    pub fn build_problem(&self) -> Result<Problem, skewlimit::ModelError> {
        let drift = |d: &DriftSpec| -> Result<SidedDrift, skewlimit::ModelError> {
            let alpha = rational::parse_rational(&d.alpha)
                .map_err(|e| skewlimit::ModelError::InvalidDrift(e.to_string()))?;
            let p = rational::parse_rational(&d.p)
                .map_err(|e| skewlimit::ModelError::InvalidDrift(e.to_string()))?;
            SidedDrift::new(d.sign, d.c, alpha, p)
        };
        let s = &self.problem.sigma;
        Problem::new(
            drift(&self.problem.drift_plus)?,
            drift(&self.problem.drift_minus)?,
            Diffusion::piecewise(s.plus, s.minus, s.lambda)?,
            self.problem.beta,
            self.problem.horizon,
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&TomlEcho::from(self)).expect("config serializes")
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

// TOML echo keeps the file layout users write (alpha/p as strings, h or
// h_rule, no nulls).
#[derive(Serialize)]
struct TomlEcho {
    problem: ProblemSpec,
    run: TomlRun,
}

#[derive(Serialize)]
struct TomlRun {
    eps_ladder: Vec<f64>,
    n_paths: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h_rule: Option<&'static str>,
    master_seed: u64,
    k_list: Vec<f64>,
    tolerance: f64,
    refine_near_zero: bool,
}

impl From<&ExperimentConfig> for TomlEcho {
    fn from(c: &ExperimentConfig) -> Self {
        let (h, h_rule) = match c.run.step_rule {
            StepRule::Fixed(h) => (Some(h), None),
            StepRule::Default => (None, Some("default")),
        };
        Self {
            problem: c.problem.clone(),
            run: TomlRun {
                eps_ladder: c.run.eps_ladder.clone(),
                n_paths: c.run.n_paths,
                h,
                h_rule,
                master_seed: c.run.master_seed,
                k_list: c.run.k_list.clone(),
                tolerance: c.run.tolerance,
                refine_near_zero: c.run.refine_near_zero,
            },
        }
    }
}

struct Ctx<'a> {
    name: &'a str,
    text: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn err(&self, span: Range<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            source_name: self.name.to_string(),
            line: Some(self.line(span)),
            message: message.into(),
        }
    }

    fn rational(&self, field: &str, v: &Spanned<RationalInput>) -> Result<Rational, ConfigError> {
        let parsed = match v.get_ref() {
            RationalInput::Int(i) => Ok(Rational::from_integer(*i)),
            RationalInput::Float(x) => rational::rational_from_decimal_f64(*x),
            RationalInput::Text(s) => rational::parse_rational(s),
        };
        parsed.map_err(|e| self.err(v.span(), format!("{field}: {e}")))
    }

    fn drift(&self, which: &str, raw: &RawDrift) -> Result<SidedDrift, ConfigError> {
        let sign = match raw.sign.get_ref().to_ascii_lowercase().as_str() {
            "+" | "positive" | "+1" => Sign::Positive,
            "-" | "negative" | "-1" => Sign::Negative,
            other => {
                return Err(self.err(
                    raw.sign.span(),
                    format!("{which}.sign: expected \"+\" or \"-\", got \"{other}\""),
                ))
            }
        };
        let alpha = self.rational(&format!("{which}.alpha"), &raw.alpha)?;
        let p = match &raw.p {
            Some(p) => self.rational(&format!("{which}.p"), p)?,
            None => Rational::from_integer(0),
        };
        SidedDrift::new(sign, *raw.c.get_ref(), alpha, p).map_err(|e| {
            // Point at the field most likely responsible.
            let span = if !(raw.c.get_ref().is_finite() && *raw.c.get_ref() > 0.0) {
                raw.c.span()
            } else if let Some(raw_p) = raw.p.as_ref().filter(|_| p < Rational::from_integer(0)) {
                raw_p.span()
            } else {
                raw.alpha.span()
            };
            self.err(span, format!("{which}: {e}"))
        })
    }
}

/// Parses and checks a config text. `name` is used in error messages.
pub fn parse(text: &str, name: &str) -> Result<ExperimentConfig, ConfigError> {
    let ctx = Ctx { name, text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        source_name: name.to_string(),
        line: e.span().map(|s| ctx.line(s)),
        message: e.message().trim().to_string(),
    })?;
    let pr = &raw.problem;
    let drift_plus = ctx.drift("drift_plus", &pr.drift_plus)?;
    let drift_minus = ctx.drift("drift_minus", &pr.drift_minus)?;
    let lambda = pr
        .sigma
        .lambda
        .as_ref()
        .map(|l| *l.get_ref())
        .unwrap_or(100.0);
    let diffusion =
        Diffusion::piecewise(*pr.sigma.plus.get_ref(), *pr.sigma.minus.get_ref(), lambda).map_err(
            |e| {
                let span = pr
                    .sigma
                    .lambda
                    .as_ref()
                    .map(|l| l.span())
                    .unwrap_or(pr.sigma.plus.span());
                ctx.err(span, e.to_string())
            },
        )?;
    let horizon = pr.horizon.as_ref().map(|h| *h.get_ref()).unwrap_or(1.0);
    let problem = Problem::new(
        drift_plus,
        drift_minus,
        diffusion,
        *pr.beta.get_ref(),
        horizon,
    )
    .map_err(|e| {
        let span = match &pr.horizon {
            Some(h) if h.get_ref().is_nan() || *h.get_ref() <= 0.0 => h.span(),
            _ => pr.beta.span(),
        };
        ctx.err(span, e.to_string())
    })?;

    let defaults = RunSpec::default();
    let r = &raw.run;
    let eps_ladder = match &r.eps_ladder {
        Some(l) => {
            let v = l.get_ref();
            if v.is_empty()
                || v.iter().any(|e| !(e.is_finite() && *e > 0.0))
                || v.windows(2).any(|w| w[1] >= w[0])
            {
                return Err(ctx.err(
                    l.span(),
                    "run.eps_ladder must be positive and strictly decreasing",
                ));
            }
            v.clone()
        }
        None => defaults.eps_ladder,
    };
    let n_paths = match &r.n_paths {
        Some(n) if *n.get_ref() < skewlimit::mc::MIN_PATHS as i64 => {
            return Err(ctx.err(
                n.span(),
                format!("run.n_paths must be at least {}", skewlimit::mc::MIN_PATHS),
            ))
        }
        Some(n) => *n.get_ref() as usize,
        None => defaults.n_paths,
    };
    let step_rule = match (&r.h, &r.h_rule) {
        (Some(h), None) => {
            if !(h.get_ref().is_finite() && *h.get_ref() > 0.0 && *h.get_ref() <= horizon) {
                return Err(ctx.err(h.span(), "run.h must be in (0, horizon]"));
            }
            StepRule::Fixed(*h.get_ref())
        }
        (None, Some(rule)) if rule.get_ref() == "default" => StepRule::Default,
        (None, Some(rule)) => {
            return Err(ctx.err(
                rule.span(),
                format!(
                    "run.h_rule: unknown rule \"{}\" (expected \"default\")",
                    rule.get_ref()
                ),
            ))
        }
        (Some(h), Some(_)) => {
            return Err(ctx.err(h.span(), "give either run.h or run.h_rule, not both"))
        }
        (None, None) => StepRule::Default,
    };
    let master_seed = match &r.master_seed {
        Some(s) if *s.get_ref() < 0 => {
            return Err(ctx.err(s.span(), "run.master_seed must be nonnegative"))
        }
        Some(s) => *s.get_ref() as u64,
        None => defaults.master_seed,
    };
    let k_list = match &r.k_list {
        Some(k) => {
            let v = k.get_ref();
            if v.len() < 2 || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(ctx.err(k.span(), "run.k_list needs at least two positive values"));
            }
            v.clone()
        }
        None => defaults.k_list,
    };
    let tolerance = match &r.tolerance {
        Some(t) if !(t.get_ref().is_finite() && *t.get_ref() > 0.0) => {
            return Err(ctx.err(t.span(), "run.tolerance must be positive"))
        }
        Some(t) => *t.get_ref(),
        None => defaults.tolerance,
    };
    let validation_grid = match &r.validation_grid {
        Some(g) => {
            skewlimit::validate_conditions(&problem, g.get_ref())
                .map_err(|e| ctx.err(g.span(), e.to_string()))?;
            g.get_ref().clone()
        }
        None => defaults.validation_grid,
    };
    let formats = match &raw.output.formats {
        Some(f) => f
            .get_ref()
            .iter()
            .map(|s| s.parse::<Format>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ctx.err(f.span(), format!("output.formats: {e}")))?,
        None => vec![Format::Csv],
    };

    let mut config = ExperimentConfig::from_problem(&problem);
    config.run = RunSpec {
        eps_ladder,
        n_paths,
        step_rule,
        master_seed,
        k_list,
        tolerance,
        refine_near_zero: r.refine_near_zero.unwrap_or(false),
        validation_grid,
    };
    config.output = OutputSpec {
        directory: raw.output.directory.map(PathBuf::from),
        formats,
        dump_paths: raw.output.dump_paths.unwrap_or(0),
    };
    Ok(config)
}

pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        source_name: name.clone(),
        line: None,
        message: format!("cannot read config: {e}"),
    })?;
    parse(&text, &name)
}
