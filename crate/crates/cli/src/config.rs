//! Run configuration: command-line flags layered over an optional key=value file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use plasmashell::scattering::MAX_PARTIAL_WAVES;
use serde::Serialize;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Every setting is optional here so that file values can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Plasma frequency Ω of the shell, in units of 1/R.
    #[arg(long, global = true)]
    pub omega: Option<f64>,
    /// Shell radius R; frequencies and temperatures are then in units of 1/R.
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Temperature for table1 and entropy.
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Lowest temperature of a scan [default: Ω/50].
    #[arg(long, global = true)]
    pub t_min: Option<f64>,
    /// Highest temperature of a scan [default: Ω].
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    /// Number of temperatures in a scan.
    #[arg(long, global = true)]
    pub t_count: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub t_spacing: Option<Spacing>,
    /// Lowest frequency of the phase grid.
    #[arg(long, global = true)]
    pub w_min: Option<f64>,
    /// Highest frequency of the phase grid.
    #[arg(long, global = true)]
    pub w_max: Option<f64>,
    #[arg(long, global = true)]
    pub w_count: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub w_spacing: Option<Spacing>,
    /// Highest order for table1, resonances and phase; phase sums are cut there instead
    /// of adaptively.
    #[arg(long, global = true)]
    pub ell_max: Option<u32>,
    /// Relative tolerance of integrals and partial-wave sums.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// key=value file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, Failure> {
    value
        .parse()
        .map_err(|_| Failure::Usage(format!("config: cannot parse {key} = {value:?}")))
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T, Failure> {
    T::from_str(value, true).map_err(|_| Failure::Usage(format!("config: bad {key} = {value:?}")))
}

impl Flags {
    /// Reads `key = value` lines; `#` starts a comment. Keys are the flag names, with
    /// `-` or `_`.
    pub fn from_file(path: &Path) -> Result<Flags, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Flags, Failure> {
        let mut f = Flags::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Failure::Usage(format!(
                    "config line {}: expected key=value",
                    n + 1
                )));
            };
            let (key, value) = (key.trim().replace('_', "-"), value.trim());
            match key.as_str() {
                "omega" => f.omega = Some(parse(&key, value)?),
                "radius" => f.radius = Some(parse(&key, value)?),
                "temperature" => f.temperature = Some(parse(&key, value)?),
                "t-min" => f.t_min = Some(parse(&key, value)?),
                "t-max" => f.t_max = Some(parse(&key, value)?),
                "t-count" => f.t_count = Some(parse(&key, value)?),
                "t-spacing" => f.t_spacing = Some(parse_enum(&key, value)?),
                "w-min" => f.w_min = Some(parse(&key, value)?),
                "w-max" => f.w_max = Some(parse(&key, value)?),
                "w-count" => f.w_count = Some(parse(&key, value)?),
                "w-spacing" => f.w_spacing = Some(parse_enum(&key, value)?),
                "ell-max" => f.ell_max = Some(parse(&key, value)?),
                "tol" => f.tol = Some(parse(&key, value)?),
                "format" => f.format = Some(parse_enum(&key, value)?),
                "out" => f.out = Some(PathBuf::from(value)),
                _ => {
                    return Err(Failure::Usage(format!(
                        "config line {}: unknown key {key:?}",
                        n + 1
                    )))
                }
            }
        }
        Ok(f)
    }

    /// Fills every unset field from `file`.
    pub fn over(self, file: Flags) -> Flags {
        Flags {
            omega: self.omega.or(file.omega),
            radius: self.radius.or(file.radius),
            temperature: self.temperature.or(file.temperature),
            t_min: self.t_min.or(file.t_min),
            t_max: self.t_max.or(file.t_max),
            t_count: self.t_count.or(file.t_count),
            t_spacing: self.t_spacing.or(file.t_spacing),
            w_min: self.w_min.or(file.w_min),
            w_max: self.w_max.or(file.w_max),
            w_count: self.w_count.or(file.w_count),
            w_spacing: self.w_spacing.or(file.w_spacing),
            ell_max: self.ell_max.or(file.ell_max),
            tol: self.tol.or(file.tol),
            format: self.format.or(file.format),
            out: self.out.or(file.out),
            config: self.config,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let s = i as f64 / last;
                if i + 1 == self.count {
                    return self.max;
                }
                match self.spacing {
                    Spacing::Linear => self.min + (self.max - self.min) * s,
                    Spacing::Log => self.min * (self.max / self.min).powf(s),
                }
            })
            .collect()
    }

    fn check(&self, name: &str) -> Result<(), Failure> {
        if !(self.min.is_finite() && self.min > 0.0 && self.max.is_finite() && self.max > self.min)
        {
            return Err(Failure::Usage(format!(
                "{name} grid needs 0 < min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.count < 2 {
            return Err(Failure::Usage(format!(
                "{name} grid needs at least 2 points"
            )));
        }
        Ok(())
    }
}

/// Fully resolved, validated settings.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub omega_p: f64,
    pub radius: f64,
    pub temperature: f64,
    pub t_grid: Grid,
    pub w_grid: Grid,
    pub ell_max: Option<u32>,
    pub tol: f64,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn positive(name: &str, value: f64) -> Result<f64, Failure> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Failure::Usage(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

impl RunConfig {
    pub fn resolve(flags: Flags) -> Result<RunConfig, Failure> {
        let flags = match &flags.config {
            Some(path) => {
                let file = Flags::from_file(path)?;
                flags.over(file)
            }
            None => flags,
        };
        let omega_p = positive("--omega", flags.omega.unwrap_or(0.05))?;
        let radius = positive("--radius", flags.radius.unwrap_or(1.0))?;
        let temperature = positive("--temperature", flags.temperature.unwrap_or(0.0105))?;
        let t_grid = Grid {
            min: flags.t_min.unwrap_or(omega_p / 50.0),
            max: flags.t_max.unwrap_or(omega_p),
            count: flags.t_count.unwrap_or(64),
            spacing: flags.t_spacing.unwrap_or(Spacing::Log),
        };
        t_grid.check("temperature")?;
        let w_grid = Grid {
            min: flags.w_min.unwrap_or(0.01 / radius),
            max: flags.w_max.unwrap_or(10.0 / radius),
            count: flags.w_count.unwrap_or(1000),
            spacing: flags.w_spacing.unwrap_or(Spacing::Linear),
        };
        w_grid.check("frequency")?;
        if let Some(l) = flags.ell_max {
            if !(1..=MAX_PARTIAL_WAVES).contains(&l) {
                return Err(Failure::Usage(format!(
                    "--ell-max must lie in 1..={MAX_PARTIAL_WAVES}, got {l}"
                )));
            }
        }
        let tol = flags.tol.unwrap_or(1e-8);
        if !(tol.is_finite() && tol > 0.0 && tol <= 1e-2) {
            return Err(Failure::Usage(format!(
                "--tol must lie in (0, 1e-2], got {tol}"
            )));
        }
        Ok(RunConfig {
            omega_p,
            radius,
            temperature,
            t_grid,
            w_grid,
            ell_max: flags.ell_max,
            tol,
            format: flags.format.unwrap_or(Format::Csv),
            out: flags.out,
        })
    }
}
