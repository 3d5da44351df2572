//! Diagnostics for coefficient multipliers and for the necessary conditions on
//! the covariance: `ℓ^∞` and Duren growth tests, row decay, Wiener-algebra
//! summability and the lacunary `ℓ²` criterion.
//!
//! Growth tests are finite-`N` proxies: a quantity is called bounded when it
//! does not grow from `N` to `2N` beyond [`GROWTH_TOL`].

use serde::{Deserialize, Serialize};

use crate::covops::{apply, finite_section_norm, truncate, CovarianceModel};
use crate::error::{Error, Result};
use crate::gp::{ProcessSampler, SeedSpec};
use crate::hardy::LacunarySeries;
use crate::littlewood::run_trials;
use crate::report::{BoundKind, BoundReport, ReportContext};
use crate::stats::{mean_stderr, pairwise_sum};

pub use crate::sequence::SequenceSpec;

/// Relative growth under `N`-doubling still counted as stable.
pub const GROWTH_TOL: f64 = 1e-9;
/// Required per-window shrink factor of the decay diagnostic.
pub const DECAY_FACTOR: f64 = 0.9;
/// Dyadic windows skipped before the decay trend is checked.
pub const DECAY_BURN_IN: usize = 2;

/// A supremum at `N` and at `2N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub degree: usize,
    pub value: f64,
    pub doubled: f64,
    /// `doubled <= value (1 + GROWTH_TOL)`.
    pub stable: bool,
}

impl GrowthCheck {
    fn new(degree: usize, value: f64, doubled: f64) -> Self {
        Self {
            degree,
            value,
            doubled,
            stable: doubled <= value * (1.0 + GROWTH_TOL),
        }
    }

    pub fn to_report(&self, name: &str, p: f64) -> BoundReport {
        ReportContext::deterministic(p).report(
            name,
            BoundKind::Upper,
            self.doubled,
            0.0,
            self.value * (1.0 + GROWTH_TOL),
        )
    }
}

/// `sup_{n<=N} |λ_n|`.
pub fn linf_bound(seq: &SequenceSpec, degree: usize) -> Result<f64> {
    seq.validate()?;
    Ok(seq.prefix(degree + 1)?.iter().fold(0.0, |m, x| m.max(x.abs())))
}

/// [`linf_bound`] at `N` and `2N`; stability is the `(H², H^p)`, `p <= 2`, test.
pub fn linf_check(seq: &SequenceSpec, degree: usize) -> Result<GrowthCheck> {
    Ok(GrowthCheck::new(
        degree,
        linf_bound(seq, degree)?,
        linf_bound(seq, 2 * degree)?,
    ))
}

/// `sup_{1<=n<=N} |c_n| n^{1/2-1/p}`, the Duren sufficient condition for
/// `(H², H^p)` with `p > 2`.
pub fn duren_rate(seq: &SequenceSpec, p: f64, degree: usize) -> Result<f64> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(Error::invalid(format!("duren rate needs finite p > 2, got {p}")));
    }
    if degree < 1 {
        return Err(Error::invalid("duren rate needs degree >= 1"));
    }
    seq.validate()?;
    let c = seq.prefix(degree + 1)?;
    let e = 0.5 - 1.0 / p;
    Ok((1..=degree).fold(0.0, |m, n| m.max(c[n].abs() * (n as f64).powf(e))))
}

pub fn duren_check(seq: &SequenceSpec, p: f64, degree: usize) -> Result<GrowthCheck> {
    Ok(GrowthCheck::new(
        degree,
        duren_rate(seq, p, degree)?,
        duren_rate(seq, p, 2 * degree)?,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub column: usize,
    pub epsilon: f64,
    pub p: f64,
    pub degree: usize,
    /// First index from which `|K(n,m)|` is nonincreasing up to `N`.
    pub monotone_from: usize,
    /// The row is monotone on at least the upper half of `0..=N`.
    pub applicable: bool,
    /// `sup |K(n,m)| n^{1/2-ε}` over `[2^j, 2^{j+1}) ∩ [1, N]`.
    pub window_sups: Vec<f64>,
    /// Largest ratio of consecutive window sups after the burn-in (0 when
    /// the row vanishes there).
    pub worst_ratio: f64,
    /// Every post-burn-in window shrinks by at least [`DECAY_FACTOR`].
    pub decaying: bool,
    /// `Σ_{n=1}^{N/2} (n+1)^{p-2} (|K(n,m)| / n^{1/2+ε})^p`.
    pub series_half: f64,
    /// The same sum up to `N`.
    pub series_full: f64,
    /// The two partial sums agree to 1e-6 relative.
    pub series_converged: bool,
    /// `applicable && decaying`.
    pub passes: bool,
}

impl DecayReport {
    pub fn to_report(&self) -> BoundReport {
        ReportContext::deterministic(self.p).report(
            "decay_trend",
            BoundKind::Upper,
            self.worst_ratio,
            0.0,
            DECAY_FACTOR,
        )
    }
}

/// Dyadic-window test of `K(n,m) = o(n^{-1/2+ε})` along column `m`, plus
/// partial sums of the series that controls it.
pub fn necessary_decay_diagnostic(
    model: &CovarianceModel,
    column: usize,
    epsilon: f64,
    p: f64,
    degree: usize,
) -> Result<DecayReport> {
    model.validate()?;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("p must be finite and >= 1, got {p}")));
    }
    if degree < 4 {
        return Err(Error::invalid("decay diagnostic needs degree >= 4"));
    }
    if column > degree {
        return Err(Error::invalid("column index exceeds the degree"));
    }
    let row: Vec<f64> = (0..=degree).map(|n| model.entry(n, column).abs()).collect();
    let monotone_from = (1..=degree)
        .rev()
        .find(|&n| row[n] > row[n - 1])
        .unwrap_or(0);
    let applicable = monotone_from <= degree / 2;

    let weight = 0.5 - epsilon;
    let mut window_sups = Vec::new();
    let mut lo = 1usize;
    while lo <= degree {
        let hi = (2 * lo).min(degree + 1);
        window_sups.push((lo..hi).fold(0.0, |m: f64, n| m.max(row[n] * (n as f64).powf(weight))));
        lo *= 2;
    }
    // Windows before the monotone tail are part of the burn-in too.
    let first = window_sups
        .iter()
        .enumerate()
        .position(|(j, _)| (1usize << j) >= monotone_from)
        .unwrap_or(window_sups.len())
        .max(DECAY_BURN_IN);
    let worst_ratio = window_sups
        .windows(2)
        .skip(first.saturating_sub(1))
        .map(|w| if w[1] == 0.0 { 0.0 } else { w[1] / w[0] })
        .fold(0.0, f64::max);
    let decaying = worst_ratio <= DECAY_FACTOR;

    let terms: Vec<f64> = (1..=degree)
        .map(|n| {
            let x = n as f64;
            (x + 1.0).powf(p - 2.0) * (row[n] / x.powf(0.5 + epsilon)).powf(p)
        })
        .collect();
    let series_half = pairwise_sum(&terms[..degree / 2]);
    let series_full = pairwise_sum(&terms);
    let series_converged = series_full - series_half <= 1e-6 * series_full;

    Ok(DecayReport {
        column,
        epsilon,
        p,
        degree,
        monotone_from,
        applicable,
        window_sups,
        worst_ratio,
        decaying,
        series_half,
        series_full,
        series_converged,
        passes: applicable && decaying,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WienerReport {
    pub degree: usize,
    /// `(Kλ)_n = E(X X_n)` for `X = Σ λ_k X_k`.
    pub row: Vec<f64>,
    /// `Σ_n |(Kλ)_n a_n|`.
    pub weighted_sum: f64,
    pub row_l2: f64,
    pub op_norm: f64,
    pub lambda_l2: f64,
    /// `‖Kλ‖₂ <= ‖K_N‖ ‖λ‖₂ + 1e-9`.
    pub l2_holds: bool,
}

impl WienerReport {
    pub fn to_report(&self) -> BoundReport {
        ReportContext::deterministic(2.0).report(
            "wiener_l2",
            BoundKind::Upper,
            self.row_l2,
            0.0,
            self.op_norm * self.lambda_l2 + 1e-9,
        )
    }
}

fn l2(v: &[f64]) -> f64 {
    let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
    pairwise_sum(&sq).sqrt()
}

/// The covariance row of `X = Σ_{k<=N} λ_k X_k` against `X_n`, its
/// `a`-weighted absolute sum, and the `ℓ²` step `‖Kλ‖ <= ‖K‖ ‖λ‖`.
pub fn wiener_check(
    model: &CovarianceModel,
    lambda: &[f64],
    a: &[f64],
    degree: usize,
) -> Result<WienerReport> {
    if lambda.len() != degree + 1 || a.len() != degree + 1 {
        return Err(Error::invalid(format!(
            "lambda and a must have length {} (degree {degree})",
            degree + 1
        )));
    }
    if lambda.iter().chain(a).any(|x| !x.is_finite()) {
        return Err(Error::invalid("lambda and a must be finite"));
    }
    let t = truncate(model, degree)?;
    let row = apply(&t, lambda)?;
    let weighted: Vec<f64> = row.iter().zip(a).map(|(r, x)| (r * x).abs()).collect();
    let weighted_sum = pairwise_sum(&weighted);
    let row_l2 = l2(&row);
    let op_norm = finite_section_norm(model, degree)?;
    let lambda_l2 = l2(lambda);
    Ok(WienerReport {
        degree,
        weighted_sum,
        row_l2,
        op_norm,
        lambda_l2,
        l2_holds: row_l2 <= op_norm * lambda_l2 + 1e-9,
        row,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LacunaryReport {
    /// Mean over trials of `Σ |a_n X_n|²`.
    pub mean: f64,
    pub stderr: f64,
    /// `Σ |a_n|² K(n,n)`.
    pub expected: f64,
    /// `sup_n K(n,n) Σ |a_n|²`.
    pub sup_bound: f64,
    pub trials: usize,
    pub seed: SeedSpec,
}

impl LacunaryReport {
    pub fn to_reports(&self) -> [BoundReport; 2] {
        let ctx = ReportContext {
            p: 2.0,
            q: 2.0,
            trials: self.trials,
            grid_size: 0,
            seed: self.seed,
        };
        [
            ctx.report("lacunary_expected", BoundKind::Equal, self.mean, self.stderr, self.expected),
            // Exact on both sides; the bound is attained when K(n,n) is constant.
            ctx.report("lacunary_sup_bound", BoundKind::Upper, self.expected, 0.0, self.sup_bound),
        ]
    }
}

/// Monte Carlo `E Σ |a_n X_n|²` for a lacunary `f`, against its exact value
/// and the bound `sup_n K(n,n) Σ |a_n|²`.
pub fn lacunary_hp_criterion(
    f: &LacunarySeries,
    model: &CovarianceModel,
    trials: usize,
    seed: SeedSpec,
) -> Result<LacunaryReport> {
    if !f.is_lacunary() {
        return Err(Error::invalid(format!(
            "support is not lacunary (gap ratio {})",
            f.gap_ratio
        )));
    }
    if trials < 2 {
        return Err(Error::invalid(format!("need at least 2 trials, got {trials}")));
    }
    let series = &f.series;
    let sampler = ProcessSampler::new(model, series.degree())?;
    let abs2: Vec<f64> = series.coeffs().iter().map(|c| c.norm_sqr()).collect();
    let values: Vec<f64> = run_trials(trials, |t| {
        let x = sampler.draw(seed.trial(t));
        let terms: Vec<f64> = f.support.iter().map(|&n| abs2[n] * x[n] * x[n]).collect();
        pairwise_sum(&terms)
    });
    let (mean, stderr) = mean_stderr(&values);
    let weighted: Vec<f64> = f.support.iter().map(|&n| abs2[n] * model.variance(n)).collect();
    let sup_var = (0..=series.degree()).map(|n| model.variance(n)).fold(0.0, f64::max);
    Ok(LacunaryReport {
        mean,
        stderr,
        expected: pairwise_sum(&weighted),
        sup_bound: sup_var * pairwise_sum(&abs2),
        trials,
        seed,
    })
}
