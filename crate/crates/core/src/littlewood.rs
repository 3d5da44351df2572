//! The randomization operator `R: Σ a_n z^n ↦ Σ a_n X_n z^n` and Monte Carlo
//! estimates of the mixed norms `‖Rf‖_{L^q(Ω, H^p)}`.
//!
//! Almost-sure membership cannot be decided from finitely many samples.
//! Everything here estimates moments at a fixed truncation and compares them
//! with the explicit constants of the bound theorems, using a 4σ band.
//!
//! Trials are independent: trial `t` draws from stream `seed.trial(t)`, the
//! per-trial values are collected in trial order and reduced by pairwise
//! summation, so results do not depend on the thread count.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covops::{finite_section_norm, CovarianceModel};
use crate::error::{Error, Result};
use crate::gp::{GaussianSample, ProcessSampler, SeedSpec};
use crate::hardy::{boundary_norm, default_grid_size, eval_on_grid, l2_norm, CoefficientSeries};
use crate::report::{BoundKind, BoundReport, ReportContext};
use crate::special::ln_gamma;
use crate::stats::{covariance, mean, mean_stderr, median, pairwise_sum};

/// `Rf` for one realization: coefficientwise `a_n X_n`. The sample must
/// cover the degree of `f`; extra sample entries are ignored.
pub fn randomize(f: &CoefficientSeries, sample: &GaussianSample) -> Result<CoefficientSeries> {
    randomize_values(f, &sample.values)
}

fn randomize_values(f: &CoefficientSeries, values: &[f64]) -> Result<CoefficientSeries> {
    if values.len() < f.coeffs().len() {
        return Err(Error::invalid(format!(
            "sample has degree {}, series has degree {}",
            values.len().saturating_sub(1),
            f.degree()
        )));
    }
    f.multiply_by(values)
}

/// The deterministic part `Σ a_n μ_n z^n` of a mean-shifted randomization.
pub fn mean_part(f: &CoefficientSeries, mu: &[f64]) -> Result<CoefficientSeries> {
    f.multiply_by(mu)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub p: f64,
    pub q: f64,
    /// `E‖Rf‖_{H^p}^q`.
    pub moment: f64,
    pub moment_stderr: f64,
    /// `(E‖Rf‖_{H^p}^q)^{1/q}`, the `L^q(Ω, H^p)` norm.
    pub mean: f64,
    /// Delta-method standard error of `mean`.
    pub stderr: f64,
    pub trials: usize,
    pub grid_size: usize,
    pub seed: SeedSpec,
    /// `p < 1`: the `H^p` functional is only a quasi-norm.
    pub quasi_norm: bool,
}

impl MomentEstimate {
    fn context(&self) -> ReportContext {
        ReportContext {
            p: self.p,
            q: self.q,
            trials: self.trials,
            grid_size: self.grid_size,
            seed: self.seed,
        }
    }
}

/// Runs `trials` independent evaluations in parallel, returned in trial order.
pub fn run_trials<R, F>(trials: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64) -> R + Sync + Send,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < 2 {
        return Err(Error::invalid(format!("need at least 2 trials, got {trials}")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::invalid(format!("p must be positive and finite, got {p}")));
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::invalid(format!("q must be finite and >= 1, got {q}")));
    }
    Ok(())
}

/// Per-trial `‖Rf‖_{H^p}` on an `M`-point grid.
pub fn trial_norms(
    f: &CoefficientSeries,
    sampler: &ProcessSampler,
    p: f64,
    grid_size: usize,
    trials: usize,
    seed: SeedSpec,
) -> Result<Vec<f64>> {
    check_p(p)?;
    if sampler.degree() < f.degree() {
        return Err(Error::invalid("sampler degree is below the series degree"));
    }
    if grid_size == 0 {
        return Err(Error::invalid("grid size must be positive"));
    }
    run_trials(trials, |t| {
        let x = sampler.draw(seed.trial(t));
        let rf = randomize_values(f, &x)?;
        Ok(boundary_norm(&eval_on_grid(&rf, grid_size)?.values, p))
    })
    .into_iter()
    .collect()
}

/// Raw `q`-th moment and its `1/q` power, both with standard errors.
fn summarize(norms: &[f64], p: f64, q: f64, grid_size: usize, seed: SeedSpec) -> MomentEstimate {
    let powers: Vec<f64> = norms.iter().map(|x| x.powf(q)).collect();
    let (moment, moment_stderr) = mean_stderr(&powers);
    let mean = moment.powf(1.0 / q);
    let stderr = if moment > 0.0 {
        mean / (q * moment) * moment_stderr
    } else {
        0.0
    };
    MomentEstimate {
        p,
        q,
        moment,
        moment_stderr,
        mean,
        stderr,
        trials: norms.len(),
        grid_size,
        seed,
        quasi_norm: p < 1.0,
    }
}

/// Monte Carlo `‖Rf‖_{L^q(Ω, H^p)}` on the default grid.
pub fn estimate_mixed_norm(
    f: &CoefficientSeries,
    model: &CovarianceModel,
    p: f64,
    q: f64,
    trials: usize,
    seed: SeedSpec,
) -> Result<MomentEstimate> {
    let sampler = ProcessSampler::new(model, f.degree())?;
    estimate_mixed_norm_with(f, &sampler, p, q, trials, default_grid_size(f.degree()), seed)
}

pub fn estimate_mixed_norm_with(
    f: &CoefficientSeries,
    sampler: &ProcessSampler,
    p: f64,
    q: f64,
    trials: usize,
    grid_size: usize,
    seed: SeedSpec,
) -> Result<MomentEstimate> {
    check_q(q)?;
    check_trials(trials)?;
    let norms = trial_norms(f, sampler, p, grid_size, trials, seed)?;
    Ok(summarize(&norms, p, q, grid_size, seed))
}

/// `c_q = (E|ξ|^q)^{1/q} = √2 (Γ((q+1)/2)/√π)^{1/q}`.
pub fn c_q(q: f64) -> Result<f64> {
    check_q(q)?;
    Ok(std::f64::consts::SQRT_2 * ((ln_gamma(0.5 * (q + 1.0)) - 0.5 * PI.ln()) / q).exp())
}

/// Upper constant for `‖R‖: H² → L²(Ω, H^p)` given a Bessel bound:
/// `2√(2C)` for `1 <= p < 2` and `2√C Γ((p+1)/2)^{1/p} / π^{1/(2p)}` for `p >= 2`.
pub fn bessel_upper_constant(p: f64, c_bes: f64) -> f64 {
    if p < 2.0 {
        2.0 * (2.0 * c_bes).sqrt()
    } else {
        2.0 * c_bes.sqrt() * (ln_gamma(0.5 * (p + 1.0)) / p).exp() / PI.powf(0.5 / p)
    }
}

/// Lower constant `C₁` for `p >= 2`.
pub const LOWER_C1: f64 = 0.25;
/// Upper constant `C₂` for `1 <= p <= 2`.
pub const UPPER_C2: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Checks the `q = 2` bounds that apply at this `p`:
///
/// * `upper_bes`: `‖Rf‖ <= const(p, C_BES) ‖f‖₂`, with `C_BES` the finite-section norm;
/// * `upper_c2` (`1 <= p <= 2`): `‖Rf‖ <= 2√2 sup σ_n ‖f‖₂`;
/// * `lower_c1` (`p >= 2`): `‖Rf‖ >= ¼ inf σ_n ‖f‖₂`;
/// * at `p = 2`, `exact_p2`: `‖Rf‖² = Σ |a_n|² K(n,n)`. This identity also
///   gives `‖R‖ = sup σ_n`, which an upper report could never confirm at 4σ
///   because the bound is attained.
///
/// Returns no reports for `p < 1`.
pub fn verify_bounds(
    f: &CoefficientSeries,
    model: &CovarianceModel,
    p: f64,
    trials: usize,
    seed: SeedSpec,
) -> Result<Vec<BoundReport>> {
    check_p(p)?;
    let est = estimate_mixed_norm(f, model, p, 2.0, trials, seed)?;
    if p < 1.0 {
        return Ok(Vec::new());
    }
    let n = f.degree();
    let fnorm = l2_norm(f);
    let c_bes = finite_section_norm(model, n)?;
    let variances: Vec<f64> = (0..=n).map(|k| model.variance(k)).collect();
    let sigma_sup = variances.iter().fold(0.0f64, |m, v| m.max(*v)).sqrt();
    let sigma_inf = variances.iter().fold(f64::INFINITY, |m, v| m.min(*v)).sqrt();

    let ctx = est.context();
    let mut out = vec![ctx.report(
        "upper_bes",
        BoundKind::Upper,
        est.mean,
        est.stderr,
        bessel_upper_constant(p, c_bes) * fnorm,
    )];
    if p <= 2.0 {
        out.push(ctx.report(
            "upper_c2",
            BoundKind::Upper,
            est.mean,
            est.stderr,
            UPPER_C2 * sigma_sup * fnorm,
        ));
    }
    if p >= 2.0 {
        out.push(ctx.report(
            "lower_c1",
            BoundKind::Lower,
            est.mean,
            est.stderr,
            LOWER_C1 * sigma_inf * fnorm,
        ));
    }
    if p == 2.0 {
        let weighted: Vec<f64> = f
            .coeffs()
            .iter()
            .zip(&variances)
            .map(|(a, v)| a.norm_sqr() * v)
            .collect();
        out.push(ctx.report(
            "exact_p2",
            BoundKind::Equal,
            est.mean,
            est.stderr,
            pairwise_sum(&weighted).sqrt(),
        ));
    }
    Ok(out)
}

/// Checks the moment equivalence between `L^q(Ω, H^p)` and `L²(Ω, H^p)` on
/// the ratio `r = ‖Rf‖_{L^q} / ‖Rf‖_{L²}`, both norms from the same trials:
/// `1 <= r <= 2c_q` for `q >= 2` and `c_q/2 <= r <= 1` for `1 <= q < 2`.
pub fn moment_equivalence_check(
    f: &CoefficientSeries,
    model: &CovarianceModel,
    p: f64,
    q: f64,
    trials: usize,
    seed: SeedSpec,
) -> Result<(BoundReport, BoundReport)> {
    check_q(q)?;
    check_trials(trials)?;
    if f.is_zero() {
        return Err(Error::invalid("moment ratio is undefined for f = 0"));
    }
    let grid = default_grid_size(f.degree());
    let sampler = ProcessSampler::new(model, f.degree())?;
    let norms = trial_norms(f, &sampler, p, grid, trials, seed)?;
    let a: Vec<f64> = norms.iter().map(|x| x.powf(q)).collect();
    let b: Vec<f64> = norms.iter().map(|x| x * x).collect();
    let (ma, mb) = (mean(&a), mean(&b));
    let ratio = ma.powf(1.0 / q) / mb.sqrt();
    // Delta method on ln r = (1/q) ln Ā − ½ ln B̄.
    let t = trials as f64;
    let var_log = (covariance(&a, &a) / (q * q * ma * ma) + covariance(&b, &b) / (4.0 * mb * mb)
        - covariance(&a, &b) / (q * ma * mb))
        / t;
    let stderr = ratio * var_log.max(0.0).sqrt();
    let cq = c_q(q)?;
    let (lo, hi) = if q >= 2.0 { (1.0, 2.0 * cq) } else { (0.5 * cq, 1.0) };
    let ctx = ReportContext {
        p,
        q,
        trials,
        grid_size: grid,
        seed,
    };
    Ok((
        ctx.report("moment_ratio_lower", BoundKind::Lower, ratio, stderr, lo),
        ctx.report("moment_ratio_upper", BoundKind::Upper, ratio, stderr, hi),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpEstimate {
    pub lambda: f64,
    /// Mean over trials of `(1/M) Σ_k exp(λ |Rf(ω_k)|²)`.
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub grid_size: usize,
    pub seed: SeedSpec,
    /// `1 / (2 ‖K_N‖² Σ |a_k|²)`, below which the expectation is finite.
    pub threshold: f64,
    /// Trials whose integrand overflowed.
    pub overflowed_trials: usize,
    /// Mean over the first half of the trials.
    pub half_mean: f64,
    /// Hill estimate of the tail index of the per-trial values.
    pub tail_index: f64,
    /// Set on overflow, on a doubling running mean, or when the tail index
    /// is at most 1 (the per-trial mean does not exist).
    pub blow_up: bool,
}

/// Hill estimator on the top `k = max(10, ⌊√T⌋)` order statistics.
pub fn hill_tail_index(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite() && *x > 0.0).collect();
    if v.len() < 20 {
        return f64::INFINITY;
    }
    v.sort_by(|a, b| b.total_cmp(a));
    let k = ((v.len() as f64).sqrt() as usize).max(10).min(v.len() - 1);
    let base = v[k].ln();
    let logs: Vec<f64> = v[..k].iter().map(|x| x.ln() - base).collect();
    let h = pairwise_sum(&logs) / k as f64;
    if h > 0.0 {
        1.0 / h
    } else {
        f64::INFINITY
    }
}

/// Tail index at or below which the estimator is flagged.
pub const BLOW_UP_TAIL_INDEX: f64 = 1.0;

/// Monte Carlo estimate of `E (1/M) Σ_k exp(λ |Rf(ω_k)|²)`.
pub fn exp_integral_estimate(
    f: &CoefficientSeries,
    model: &CovarianceModel,
    lambda: f64,
    trials: usize,
    grid_size: usize,
    seed: SeedSpec,
) -> Result<ExpEstimate> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    check_trials(trials)?;
    if grid_size == 0 {
        return Err(Error::invalid("grid size must be positive"));
    }
    let sampler = ProcessSampler::new(model, f.degree())?;
    let norm_k = finite_section_norm(model, f.degree())?;
    let fsq = l2_norm(f).powi(2);
    let threshold = 1.0 / (2.0 * norm_k * norm_k * fsq);

    let values: Vec<f64> = run_trials(trials, |t| {
        let x = sampler.draw(seed.trial(t));
        let rf = randomize_values(f, &x)?;
        let bv = eval_on_grid(&rf, grid_size)?;
        let terms: Vec<f64> = bv.values.iter().map(|v| (lambda * v.norm_sqr()).exp()).collect();
        Ok(pairwise_sum(&terms) / grid_size as f64)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let overflowed_trials = values.iter().filter(|v| !v.is_finite()).count();
    let (mean_all, stderr) = mean_stderr(&values);
    let half_mean = mean(&values[..trials / 2]);
    let tail_index = hill_tail_index(&values);
    let blow_up = overflowed_trials > 0
        || mean_all >= 2.0 * half_mean
        || tail_index <= BLOW_UP_TAIL_INDEX;
    Ok(ExpEstimate {
        lambda,
        mean: mean_all,
        stderr,
        trials,
        grid_size,
        seed,
        threshold,
        overflowed_trials,
        half_mean,
        tail_index,
        blow_up,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub degree: usize,
    pub grid_size: usize,
    /// `‖f_N‖_{H^p}`.
    pub deterministic: f64,
    /// Median over trials of `‖Rf_N‖_{H^p}`.
    pub randomized_median: f64,
}

/// Deterministic versus randomized `H^p` norms of a family `f_N` across degrees.
pub fn improvement_sweep<G>(
    family: G,
    model: &CovarianceModel,
    p: f64,
    degrees: &[usize],
    trials: usize,
    seed: SeedSpec,
) -> Result<Vec<SweepRow>>
where
    G: Fn(usize) -> CoefficientSeries,
{
    check_p(p)?;
    check_trials(trials)?;
    degrees
        .iter()
        .map(|&degree| {
            let f = family(degree);
            let grid = default_grid_size(f.degree());
            let deterministic = boundary_norm(&eval_on_grid(&f, grid)?.values, p);
            let sampler = ProcessSampler::new(model, f.degree())?;
            let norms = trial_norms(&f, &sampler, p, grid, trials, seed)?;
            Ok(SweepRow {
                degree,
                grid_size: grid,
                deterministic,
                randomized_median: median(&norms),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::sample_process;
    use crate::hardy::hp_norm;
    use crate::sequence::SequenceSpec;
    use num_complex::Complex64;

    #[test]
    fn randomize_examples() {
        let f = CoefficientSeries::from_real(&[1.0, -2.0, 3.0]).unwrap();
        let ones = GaussianSample::from_values(vec![1.0; 3]).unwrap();
        assert_eq!(randomize(&f, &ones).unwrap(), f);

        let e0 = CoefficientSeries::from_real(&[1.0, 0.0, 0.0]).unwrap();
        let s = sample_process(&CovarianceModel::Hilbert, 2, SeedSpec::new(1, 2), None).unwrap();
        let rf = randomize(&e0, &s).unwrap();
        assert_eq!(rf.coeffs()[0].re, s.values[0]);
        assert_eq!(rf.coeffs()[1], Complex64::new(0.0, 0.0));

        let longer = GaussianSample::from_values(vec![2.0; 5]).unwrap();
        assert_eq!(randomize(&f, &longer).unwrap().degree(), 2);
        let shorter = GaussianSample::from_values(vec![2.0; 2]).unwrap();
        assert!(randomize(&f, &shorter).is_err());
    }

    #[test]
    fn rank_one_randomization_scales() {
        let m = CovarianceModel::RankOne(SequenceSpec::ones());
        let f = crate::hardy::make_boundary_example(40);
        for t in 0..5 {
            let s = sample_process(&m, 40, SeedSpec::new(8, t), None).unwrap();
            let rf = randomize(&f, &s).unwrap();
            for p in [2.0, 4.0] {
                let lhs = hp_norm(&rf, p).unwrap().value;
                let rhs = s.values[0].abs() * hp_norm(&f, p).unwrap().value;
                assert!((lhs - rhs).abs() <= 1e-12 * rhs);
            }
        }
    }

    #[test]
    fn zero_series_estimate_is_zero() {
        let f = CoefficientSeries::zeros(5);
        let e = estimate_mixed_norm(&f, &CovarianceModel::Identity, 2.0, 2.0, 10, SeedSpec::new(1, 0))
            .unwrap();
        assert_eq!((e.mean, e.stderr, e.moment, e.moment_stderr), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn identity_unit_series_p2() {
        let h = 1.0 / 2f64.sqrt();
        let f = CoefficientSeries::from_real(&[h, h]).unwrap();
        let e = estimate_mixed_norm(&f, &CovarianceModel::Identity, 2.0, 2.0, 10_000, SeedSpec::new(7, 0))
            .unwrap();
        assert!((e.moment - 1.0).abs() <= 4.0 * e.moment_stderr);
        assert!((e.mean - 1.0).abs() <= 4.0 * e.stderr);
    }

    #[test]
    fn argument_validation() {
        let f = CoefficientSeries::monomial(1);
        let id = CovarianceModel::Identity;
        let s = SeedSpec::default();
        assert!(estimate_mixed_norm(&f, &id, 2.0, 0.5, 10, s).is_err());
        assert!(estimate_mixed_norm(&f, &id, 2.0, 2.0, 1, s).is_err());
        assert!(estimate_mixed_norm(&f, &id, -1.0, 2.0, 10, s).is_err());
        assert!(exp_integral_estimate(&f, &id, -0.1, 10, 8, s).is_err());
        assert!(c_q(0.5).is_err());
    }

    #[test]
    fn quasi_norm_estimates_run_without_reports() {
        let f = CoefficientSeries::from_real(&[1.0, 0.5]).unwrap();
        let e = estimate_mixed_norm(&f, &CovarianceModel::Identity, 0.5, 2.0, 50, SeedSpec::new(2, 0))
            .unwrap();
        assert!(e.quasi_norm && e.mean > 0.0);
        let r = verify_bounds(&f, &CovarianceModel::Identity, 0.5, 50, SeedSpec::new(2, 0)).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn c_q_closed_forms() {
        assert!((c_q(2.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((c_q(4.0).unwrap() - 3f64.powf(0.25)).abs() < 1e-12);
        assert!((c_q(1.0).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn c_q_matches_double_factorial_moments() {
        // E|ξ|^q = (q-1)!! for even q and √(2/π)(q-1)!! for odd q.
        for q in 1..=64u32 {
            let dfact: f64 = (1..q).rev().step_by(2).map(f64::from).product();
            let moment = if q % 2 == 0 { dfact } else { (2.0 / PI).sqrt() * dfact };
            let oracle = moment.powf(1.0 / f64::from(q));
            let got = c_q(f64::from(q)).unwrap();
            assert!((got - oracle).abs() < 1e-10, "q={q}: {got} vs {oracle}");
        }
    }

    #[test]
    fn bessel_constant_at_two_is_sqrt_two_c() {
        // Γ(3/2) = √π/2, so the p >= 2 branch gives √(2C) at p = 2.
        for c in [0.5, 1.0, 3.0] {
            assert!((bessel_upper_constant(2.0, c) - (2.0 * c).sqrt()).abs() < 1e-14);
        }
        assert_eq!(bessel_upper_constant(1.5, 2.0), 4.0);
    }

    #[test]
    fn mean_part_examples() {
        let f = CoefficientSeries::from_real(&[1.0, 2.0, -3.0]).unwrap();
        assert!(mean_part(&f, &[0.0; 3]).unwrap().is_zero());
        assert_eq!(mean_part(&f, &[1.0; 3]).unwrap(), f);
        let flipped = mean_part(&f, &[1.0, -1.0, 1.0]).unwrap();
        assert_eq!(flipped.coeffs()[1].re, -2.0);
        assert_eq!(l2_norm(&flipped), l2_norm(&f));
    }

    #[test]
    fn exp_lambda_zero_is_one() {
        let f = CoefficientSeries::from_real(&[1.0, 0.3]).unwrap();
        let e = exp_integral_estimate(&f, &CovarianceModel::Identity, 0.0, 100, 64, SeedSpec::new(3, 0))
            .unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.stderr, 0.0);
        assert!(!e.blow_up);
    }

    #[test]
    fn hill_recovers_pareto_index() {
        // Quantile transform of equally spaced uniforms: P(X > x) = x^{-α}.
        for alpha in [0.5, 2.0] {
            let n = 40_000;
            let xs: Vec<f64> = (0..n)
                .map(|i| ((i as f64 + 0.5) / n as f64).powf(-1.0 / alpha))
                .collect();
            let est = hill_tail_index(&xs);
            assert!((est - alpha).abs() < 0.05 * alpha, "α={alpha}: {est}");
        }
    }
}
