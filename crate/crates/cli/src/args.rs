use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use serde::Deserialize;

use crate::Validation;

/// Flags shared by every subcommand. A `--config` file supplies the same keys
/// as a flat TOML table; flags given on the command line win.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Flat TOML file whose keys match the flag names
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Covariance family: identity, diagonal, band, hilbert,
    /// toeplitz_geometric, rank_one, triangular_factor
    #[arg(long)]
    pub family: Option<String>,
    /// Sequence for diagonal standard deviations or rank-one vectors
    /// (ones, inv_sqrt, const:v, power:s,o,e, geometric:s,r, cycle:..., list:...)
    #[arg(long)]
    pub sigma: Option<String>,
    /// Band width (default weights 2^-k)
    #[arg(long)]
    pub bandwidth: Option<i64>,
    /// Explicit band template K(0), K(1), ...
    #[arg(long)]
    pub template: Option<String>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Triangular factor scale
    #[arg(long)]
    pub scale: Option<f64>,
    /// Triangular factor ratio
    #[arg(long)]
    pub ratio: Option<f64>,

    /// Series: single:n, boundary, random, dyadic:k, coeffs:a,b,..., file:path
    #[arg(long)]
    pub f: Option<String>,
    /// Real coefficients a_0, a_1, ... (shorthand for --f coeffs:...)
    #[arg(long)]
    pub coeffs: Option<String>,
    /// Multiplier sequence for diag (same syntax as --sigma)
    #[arg(long)]
    pub seq: Option<String>,
    /// Mean sequence for sample (same syntax as --sigma)
    #[arg(long)]
    pub mean: Option<String>,

    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Truncation degree N
    #[arg(long, visible_alias = "N", allow_negative_numbers = true)]
    #[serde(alias = "N")]
    pub degree: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    pub trials: Option<i64>,
    /// Boundary grid size M (default: next power of two >= max(8(N+1), 64))
    #[arg(long, visible_alias = "M", allow_negative_numbers = true)]
    #[serde(alias = "M")]
    pub grid: Option<i64>,
    /// Root seed (default: GL_SEED, then a fixed value)
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stream: Option<u64>,

    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Degrees for sweep, comma separated
    #[arg(long)]
    pub degrees: Option<String>,
    /// Diagnostic for diag: linf, duren, decay, wiener, lacunary
    #[arg(long)]
    pub check: Option<String>,
    /// Covariance column m for the decay diagnostic
    #[arg(long)]
    pub column: Option<i64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Power-iteration tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<i64>,
    /// Comma-separated criteria for selftest (default: all)
    #[arg(long)]
    pub only: Option<String>,

    /// Directory for CSV/JSON artifacts
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($flags:expr, $file:expr, $($field:ident),* $(,)?) => {
        Params {
            config: $flags.config,
            $($field: $flags.$field.or($file.$field),)*
        }
    };
}

impl Params {
    /// Fills unset flags from the config file, if one was given.
    pub fn resolve(self) -> anyhow::Result<Params> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let file: Params = toml::from_str(&text)
            .map_err(|e| Validation(format!("config {}: {}", path.display(), e.message())))?;
        Ok(overlay!(
            self, file, family, sigma, bandwidth, template, sigma2, c, scale, ratio, f, coeffs,
            seq, mean, p, q, degree, trials, grid, seed, stream, lambda, degrees, check, column,
            epsilon, tol, max_iter, only, out,
        ))
    }

    pub fn seed(&self) -> anyhow::Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var("GL_SEED") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Validation(format!("GL_SEED must be an unsigned integer, got {v:?}")).into()),
            Err(_) => Ok(gausslit::acceptance::DEFAULT_SEED),
        }
    }

    pub fn degree_or(&self, default: usize) -> anyhow::Result<usize> {
        non_negative("degree", self.degree, default)
    }

    pub fn trials_or(&self, default: usize) -> anyhow::Result<usize> {
        let t = non_negative("trials", self.trials, default)?;
        if t < 2 {
            bail!(Validation(format!("trials must be at least 2, got {t}")));
        }
        Ok(t)
    }

    pub fn grid(&self) -> anyhow::Result<Option<usize>> {
        match self.grid {
            None => Ok(None),
            Some(m) if m >= 1 => Ok(Some(m as usize)),
            Some(m) => bail!(Validation(format!("grid must be at least 1, got {m}"))),
        }
    }

    pub fn p_or(&self, default: f64) -> anyhow::Result<f64> {
        let p = self.p.unwrap_or(default);
        if !(p > 0.0 && p.is_finite()) {
            bail!(Validation(format!("p must be positive and finite, got {p}")));
        }
        Ok(p)
    }

    pub fn q_or(&self, default: f64) -> anyhow::Result<f64> {
        let q = self.q.unwrap_or(default);
        if !(q >= 1.0 && q.is_finite()) {
            bail!(Validation(format!("q must be finite and >= 1, got {q}")));
        }
        Ok(q)
    }
}

pub fn non_negative(key: &str, value: Option<i64>, default: usize) -> anyhow::Result<usize> {
    match value {
        None => Ok(default),
        Some(v) if v >= 0 => Ok(v as usize),
        Some(v) => bail!(Validation(format!("{key} must be >= 0, got {v}"))),
    }
}
