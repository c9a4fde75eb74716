//! Flat `section.key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Values may be
//! quoted. Every key is checked against the schema of the selected kinds
//! before anything is computed; errors carry the offending line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use vohedge::montecarlo::Strategy;

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw key-value pairs with their source lines.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
    source: String,
}

impl RawConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| anyhow!("{source}:{line}: expected `key = value`, got `{s}`"))?;
            let key = k.trim().to_string();
            if key.is_empty() || key.contains(char::is_whitespace) {
                bail!("{source}:{line}: malformed key `{}`", k.trim());
            }
            let mut value = v.trim();
            if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
                value = &value[1..value.len() - 1];
            }
            if let Some(prev) = entries.insert(key.clone(), Entry { value: value.to_string(), line }) {
                bail!("{source}:{line}: key `{key}` already set on line {}", prev.line);
            }
        }
        Ok(Self { entries, source: source.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn at(&self, key: &str) -> String {
        match self.entries.get(key) {
            Some(e) => format!("{}:{}", self.source, e.line),
            None => self.source.clone(),
        }
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| anyhow!("{}: cannot parse `{key} = {v}`", self.at(key))),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.parsed(key)?;
        if let Some(x) = v {
            if !x.is_finite() {
                bail!("{}: `{key}` must be finite", self.at(key));
            }
        }
        Ok(v)
    }

    fn need_f64(&self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| anyhow!("{}: missing required key `{key}`", self.source))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.str(key) else { return Ok(None) };
        let xs = v
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| anyhow!("{}: `{key}` must be a comma-separated list of numbers", self.at(key)))?;
        if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) {
            bail!("{}: `{key}` must hold finite numbers", self.at(key));
        }
        Ok(Some(xs))
    }

    /// `a:b, c:d, ...`
    fn pairs(&self, key: &str) -> Result<Option<Vec<(f64, f64)>>> {
        let Some(v) = self.str(key) else { return Ok(None) };
        let mut out = Vec::new();
        for item in v.split(',') {
            let pair = item.split_once(':').and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            match pair {
                Some(p) => out.push(p),
                None => bail!("{}: `{key}` must be a list of `x:y` pairs, bad item `{}`", self.at(key), item.trim()),
            }
        }
        Ok(Some(out))
    }

    fn keys(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Exponential,
    Arithmetic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DriverSpec {
    Nig { alpha: f64, beta: f64, delta: f64, mu: f64 },
    VarianceGamma { alpha: f64, beta: f64, delta: f64, mu: f64 },
    Poisson { lambda_p: f64 },
    Brownian { sigma: f64, m: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub driver: DriverSpec,
    /// Moment-matched rescaling factor `C` of an NIG driver.
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Constant(f64),
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PiiSpec {
    Levy,
    Wiener { kernel: KernelSpec },
    TwoFactor { sigma_s: f64, lambda_mr: f64, sigma_l: f64, delivery: f64, trend: Option<Vec<(f64, f64)>> },
    TimeChangedBrownian { psi: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffKind {
    Call,
    Put,
    Digital,
    SelfQuanto,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantSpec {
    Auto,
    AboveOne,
    UnitInterval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayoffSpec {
    pub kind: PayoffKind,
    /// Strike grid, or barrier grid for the digital.
    pub levels: Vec<f64>,
    pub r: Option<f64>,
    pub variant: VariantSpec,
    /// `(exponent, weight)` for exponential, `(frequency, weight)` for arithmetic.
    pub atoms: Vec<(f64, f64)>,
    /// Reconstruction points of `payoff-check`.
    pub check_points: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    pub umax: Option<f64>,
    pub log2_panels: Option<u32>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FsSpec {
    pub j0_umax: Option<f64>,
    pub j0_log2_panels: Option<u32>,
    pub j0_time_steps: Option<usize>,
    pub j0_tol: Option<f64>,
    pub j0_max_doublings: Option<u32>,
    pub plan_umax: Option<f64>,
    pub plan_log2_panels: Option<u32>,
    pub plan_truncation_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestSpec {
    pub n: Vec<usize>,
    pub paths: usize,
    pub seed: u64,
    pub substeps: usize,
    pub strategies: Vec<Strategy>,
    pub dump_errors: bool,
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub engine: Engine,
    pub model: Option<ModelSpec>,
    pub pii: PiiSpec,
    pub horizon: f64,
    pub grid: Option<usize>,
    /// `s0` for the exponential engine, `x0` for the arithmetic one.
    pub level0: f64,
    pub payoff: PayoffSpec,
    pub quadrature: QuadratureSpec,
    pub fs: FsSpec,
    pub backtest: BacktestSpec,
    pub output_dir: Option<PathBuf>,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Exponential => "exponential",
            Engine::Arithmetic => "arithmetic",
        })
    }
}

const FS_KEYS: [&str; 8] = [
    "fs.j0_umax",
    "fs.j0_log2_panels",
    "fs.j0_time_steps",
    "fs.j0_tol",
    "fs.j0_max_doublings",
    "fs.plan_umax",
    "fs.plan_log2_panels",
    "fs.plan_truncation_tol",
];

const BACKTEST_KEYS: [&str; 6] =
    ["backtest.N", "backtest.paths", "backtest.seed", "backtest.substeps", "backtest.strategies", "backtest.dump_errors"];

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let mut allowed: Vec<&str> = vec!["engine", "output.dir", "pii.kind", "pii.T", "pii.grid", "payoff.kind"];
        allowed.extend(["quadrature.umax", "quadrature.log2_panels", "quadrature.tol"]);
        allowed.extend(FS_KEYS);
        allowed.extend(BACKTEST_KEYS);

        let engine = match raw.str("engine").unwrap_or("exponential") {
            "exponential" => Engine::Exponential,
            "arithmetic" => Engine::Arithmetic,
            other => bail!("{}: unknown engine `{other}` (exponential | arithmetic)", raw.at("engine")),
        };
        allowed.push(match engine {
            Engine::Exponential => "market.s0",
            Engine::Arithmetic => "market.x0",
        });

        let pii_kind = raw.str("pii.kind").unwrap_or("levy");
        let needs_driver = pii_kind != "time_changed_brownian";
        let model = if needs_driver {
            allowed.extend(["model.kind", "model.scale"]);
            let kind = raw.str("model.kind").ok_or_else(|| anyhow!("{}: missing required key `model.kind`", raw.source))?;
            let driver = match kind {
                "nig" | "vg" => {
                    allowed.extend(["model.alpha", "model.beta", "model.delta", "model.mu"]);
                    let (alpha, beta, delta) =
                        (raw.need_f64("model.alpha")?, raw.need_f64("model.beta")?, raw.need_f64("model.delta")?);
                    let mu = raw.f64("model.mu")?.unwrap_or(0.0);
                    if kind == "nig" {
                        DriverSpec::Nig { alpha, beta, delta, mu }
                    } else {
                        DriverSpec::VarianceGamma { alpha, beta, delta, mu }
                    }
                }
                "poisson" => {
                    allowed.push("model.lambda_p");
                    DriverSpec::Poisson { lambda_p: raw.need_f64("model.lambda_p")? }
                }
                "brownian" => {
                    allowed.extend(["model.sigma", "model.m"]);
                    DriverSpec::Brownian { sigma: raw.need_f64("model.sigma")?, m: raw.f64("model.m")?.unwrap_or(0.0) }
                }
                other => bail!("{}: unknown model.kind `{other}` (nig | vg | poisson | brownian)", raw.at("model.kind")),
            };
            let scale = raw.f64("model.scale")?;
            if scale.is_some() && !matches!(driver, DriverSpec::Nig { .. }) {
                bail!("{}: `model.scale` applies to model.kind = nig only", raw.at("model.scale"));
            }
            Some(ModelSpec { driver, scale })
        } else {
            None
        };

        let pii = match pii_kind {
            "levy" => PiiSpec::Levy,
            "wiener" => {
                allowed.push("pii.kernel");
                let kernel = match raw.f64("pii.kernel") {
                    Ok(Some(c)) => KernelSpec::Constant(c),
                    Ok(None) => bail!("{}: missing required key `pii.kernel`", raw.source),
                    Err(_) => KernelSpec::Table(raw.pairs("pii.kernel")?.unwrap()),
                };
                PiiSpec::Wiener { kernel }
            }
            "two_factor" => {
                allowed.extend(["pii.sigma_s", "pii.lambda_mr", "pii.sigma_l", "pii.delivery_Td", "pii.trend"]);
                let trend = match raw.str("pii.trend") {
                    None | Some("zero") => None,
                    Some(_) => raw.pairs("pii.trend")?,
                };
                PiiSpec::TwoFactor {
                    sigma_s: raw.need_f64("pii.sigma_s")?,
                    lambda_mr: raw.f64("pii.lambda_mr")?.unwrap_or(0.0),
                    sigma_l: raw.f64("pii.sigma_l")?.unwrap_or(0.0),
                    delivery: raw.need_f64("pii.delivery_Td")?,
                    trend,
                }
            }
            "time_changed_brownian" => {
                allowed.push("pii.psi");
                let psi = raw.pairs("pii.psi")?.ok_or_else(|| anyhow!("{}: missing required key `pii.psi`", raw.source))?;
                PiiSpec::TimeChangedBrownian { psi }
            }
            other => bail!(
                "{}: unknown pii.kind `{other}` (levy | wiener | two_factor | time_changed_brownian)",
                raw.at("pii.kind")
            ),
        };

        let payoff_kind = match raw.str("payoff.kind").unwrap_or("call") {
            "call" => PayoffKind::Call,
            "put" => PayoffKind::Put,
            "digital" => PayoffKind::Digital,
            "self_quanto" => PayoffKind::SelfQuanto,
            "custom" => PayoffKind::Custom,
            other => bail!("{}: unknown payoff.kind `{other}`", raw.at("payoff.kind")),
        };
        match (engine, payoff_kind) {
            (Engine::Exponential, PayoffKind::Digital | PayoffKind::SelfQuanto) => bail!(
                "{}: payoff.kind digital and self_quanto are Fourier payoffs; use engine = arithmetic",
                raw.at("payoff.kind")
            ),
            (Engine::Arithmetic, PayoffKind::Call | PayoffKind::Put) => bail!(
                "{}: payoff.kind call and put are contour payoffs; use engine = exponential",
                raw.at("payoff.kind")
            ),
            _ => {}
        }
        allowed.push("payoff.check_points");
        let level_key = match payoff_kind {
            PayoffKind::Call | PayoffKind::Put | PayoffKind::SelfQuanto => Some("payoff.K"),
            PayoffKind::Digital => Some("payoff.B"),
            PayoffKind::Custom => None,
        };
        let levels = match level_key {
            Some(key) => {
                allowed.push(key);
                let xs = raw.list(key)?.ok_or_else(|| anyhow!("{}: missing required key `{key}`", raw.source))?;
                if xs.iter().any(|&x| x <= 0.0) {
                    bail!("{}: `{key}` must be positive", raw.at(key));
                }
                xs
            }
            None => Vec::new(),
        };
        let mut variant = VariantSpec::Auto;
        if matches!(payoff_kind, PayoffKind::Call | PayoffKind::Put) {
            allowed.push("payoff.R");
        }
        if payoff_kind == PayoffKind::Call {
            allowed.push("payoff.variant");
            variant = match raw.str("payoff.variant").unwrap_or("auto") {
                "auto" => VariantSpec::Auto,
                "above_one" => VariantSpec::AboveOne,
                "unit_interval" => VariantSpec::UnitInterval,
                other => bail!(
                    "{}: unknown payoff.variant `{other}` (auto | above_one | unit_interval)",
                    raw.at("payoff.variant")
                ),
            };
            if variant == VariantSpec::Auto && raw.str("payoff.R").is_some() {
                bail!("{}: `payoff.R` needs an explicit payoff.variant", raw.at("payoff.R"));
            }
        }
        let atoms = if payoff_kind == PayoffKind::Custom {
            allowed.push("payoff.atoms");
            raw.pairs("payoff.atoms")?.ok_or_else(|| anyhow!("{}: missing required key `payoff.atoms`", raw.source))?
        } else {
            Vec::new()
        };
        let payoff = PayoffSpec {
            kind: payoff_kind,
            levels,
            r: raw.f64("payoff.R")?,
            variant,
            atoms,
            check_points: raw.list("payoff.check_points")?,
        };

        for key in raw.keys() {
            if !allowed.contains(&key.as_str()) {
                bail!("{}: unknown or unused key `{key}` for engine = {engine}, pii.kind = {pii_kind}", raw.at(key));
            }
        }

        let horizon = raw.need_f64("pii.T")?;
        if horizon <= 0.0 {
            bail!("{}: `pii.T` must be positive", raw.at("pii.T"));
        }
        let level0 = match engine {
            Engine::Exponential => {
                let s0 = raw.f64("market.s0")?.unwrap_or(100.0);
                if s0 <= 0.0 {
                    bail!("{}: `market.s0` must be positive", raw.at("market.s0"));
                }
                s0
            }
            Engine::Arithmetic => raw.f64("market.x0")?.unwrap_or(0.0),
        };

        let strategies = match raw.str("backtest.strategies") {
            None => Strategy::ALL.to_vec(),
            Some(v) => v
                .split(',')
                .map(|s| {
                    Strategy::parse(s.trim()).ok_or_else(|| {
                        anyhow!("{}: unknown strategy `{}` (VO | BS | VO_with_BS_capital)", raw.at("backtest.strategies"), s.trim())
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let n = match raw.list("backtest.N")? {
            None => vec![12],
            Some(xs) => xs
                .iter()
                .map(|&x| {
                    if x >= 1.0 && x.fract() == 0.0 {
                        Ok(x as usize)
                    } else {
                        Err(anyhow!("{}: `backtest.N` must hold positive integers", raw.at("backtest.N")))
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let dump_errors = match raw.str("backtest.dump_errors") {
            None | Some("false") => false,
            Some("true") => true,
            Some(v) => bail!("{}: `backtest.dump_errors = {v}` must be true or false", raw.at("backtest.dump_errors")),
        };
        let backtest = BacktestSpec {
            n,
            paths: raw.parsed("backtest.paths")?.unwrap_or(5000),
            seed: raw.parsed("backtest.seed")?.unwrap_or(0),
            substeps: raw.parsed("backtest.substeps")?.unwrap_or(64),
            strategies,
            dump_errors,
        };

        Ok(Self {
            engine,
            model,
            pii,
            horizon,
            grid: raw.parsed("pii.grid")?,
            level0,
            payoff,
            quadrature: QuadratureSpec {
                umax: raw.f64("quadrature.umax")?,
                log2_panels: raw.parsed("quadrature.log2_panels")?,
                tol: raw.f64("quadrature.tol")?,
            },
            fs: FsSpec {
                j0_umax: raw.f64("fs.j0_umax")?,
                j0_log2_panels: raw.parsed("fs.j0_log2_panels")?,
                j0_time_steps: raw.parsed("fs.j0_time_steps")?,
                j0_tol: raw.f64("fs.j0_tol")?,
                j0_max_doublings: raw.parsed("fs.j0_max_doublings")?,
                plan_umax: raw.f64("fs.plan_umax")?,
                plan_log2_panels: raw.parsed("fs.plan_log2_panels")?,
                plan_truncation_tol: raw.f64("fs.plan_truncation_tol")?,
            },
            backtest,
            output_dir: raw.str("output.dir").map(PathBuf::from),
        })
    }
}
