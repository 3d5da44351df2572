//! Truncated power series on the unit disk and their Hardy-space norms.
//!
//! Norms use the normalized circle measure `dθ/2π` and equally spaced
//! boundary samples at the `M`-th roots of unity. For a series of degree `N`
//! the rule is exact for `p = 2m` once `M >= 2mN + 1`, because `|f|^{2m}` is
//! then a trigonometric polynomial the rule integrates without aliasing.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::pairwise_sum;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Coefficients `a_0..a_N` of `f(z) = Σ a_n z^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSeries {
    coeffs: Vec<Complex64>,
}

impl CoefficientSeries {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("a series needs at least one coefficient"));
        }
        if let Some(n) = coeffs.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid(format!("coefficient {n} is not finite")));
        }
        Ok(Self { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// The zero series of the given degree.
    pub fn zeros(degree: usize) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); degree + 1],
        }
    }

    /// `z^n`, stored with degree `n`.
    pub fn monomial(n: usize) -> Self {
        let mut s = Self::zeros(n);
        s.coeffs[n] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Coefficientwise product with a real sequence; `mult` must cover the degree.
    pub fn multiply_by(&self, mult: &[f64]) -> Result<Self> {
        if mult.len() < self.coeffs.len() {
            return Err(Error::invalid(format!(
                "multiplier has {} entries, series needs {}",
                mult.len(),
                self.coeffs.len()
            )));
        }
        Self::new(self.coeffs.iter().zip(mult).map(|(a, x)| a * x).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema=1")?;
        let mut wtr = csv::Writer::from_writer(w);
        for (index, c) in self.coeffs.iter().enumerate() {
            wtr.serialize(CoefRow {
                index,
                re: c.re,
                im: c.im,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let mut coeffs = Vec::new();
        for row in rdr.deserialize() {
            let row: CoefRow = row?;
            if row.index != coeffs.len() {
                return Err(Error::Parse(format!(
                    "expected coefficient index {}, found {}",
                    coeffs.len(),
                    row.index
                )));
            }
            coeffs.push(Complex64::new(row.re, row.im));
        }
        Self::new(coeffs)
    }

    /// JSON array of `[re, im]` pairs.
    pub fn to_json(&self) -> Result<String> {
        let pairs: Vec<[f64; 2]> = self.coeffs.iter().map(|c| [c.re, c.im]).collect();
        Ok(serde_json::to_string(&pairs)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let pairs: Vec<[f64; 2]> = serde_json::from_str(s)?;
        Self::new(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct CoefRow {
    index: usize,
    re: f64,
    im: f64,
}

/// Series values at the `M`-th roots of unity, `values[k] = f(e^{2πik/M})`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryValues {
    pub values: Vec<Complex64>,
}

impl BoundaryValues {
    pub fn grid_size(&self) -> usize {
        self.values.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub p: f64,
    pub value: f64,
    pub grid_size: usize,
    /// Set when the quadrature is exact for this `p` and degree.
    pub exact: bool,
}

/// Smallest power of two `>= max(8(N+1), 64)`.
pub fn default_grid_size(degree: usize) -> usize {
    (8 * (degree + 1)).max(64).next_power_of_two()
}

/// Whether `M` points integrate `|f|^p` exactly for a degree-`N` series.
pub fn quadrature_is_exact(p: f64, degree: usize, grid_size: usize) -> bool {
    even_order(p).is_some_and(|m| grid_size > 2 * m * degree)
}

fn even_order(p: f64) -> Option<usize> {
    let half = p / 2.0;
    (half >= 1.0 && half.fract() == 0.0 && half <= 1e6).then_some(half as usize)
}

/// Boundary values by an inverse FFT of the coefficients folded modulo `M`.
pub fn eval_on_grid(f: &CoefficientSeries, grid_size: usize) -> Result<BoundaryValues> {
    if grid_size == 0 {
        return Err(Error::invalid("grid size must be positive"));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); grid_size];
    for (n, a) in f.coeffs.iter().enumerate() {
        buf[n % grid_size] += a;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(grid_size));
    fft.process(&mut buf);
    Ok(BoundaryValues { values: buf })
}

/// Boundary values by Horner's rule at each root of unity.
pub fn eval_on_grid_horner(f: &CoefficientSeries, grid_size: usize) -> Result<BoundaryValues> {
    if grid_size == 0 {
        return Err(Error::invalid("grid size must be positive"));
    }
    let values = (0..grid_size)
        .map(|k| {
            let z = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / grid_size as f64);
            f.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| acc * z + a)
        })
        .collect();
    Ok(BoundaryValues { values })
}

/// `((1/M) Σ |values[k]|^p)^{1/p}`; a quasi-norm when `p < 1`.
pub fn hp_norm_grid(f: &CoefficientSeries, p: f64, grid_size: usize) -> Result<NormResult> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::invalid(format!("p must be positive and finite, got {p}")));
    }
    let bv = eval_on_grid(f, grid_size)?;
    Ok(NormResult {
        p,
        value: boundary_norm(&bv.values, p),
        grid_size,
        exact: quadrature_is_exact(p, f.degree(), grid_size),
    })
}

/// [`hp_norm_grid`] on the default grid.
pub fn hp_norm(f: &CoefficientSeries, p: f64) -> Result<NormResult> {
    hp_norm_grid(f, p, default_grid_size(f.degree()))
}

pub(crate) fn boundary_norm(values: &[Complex64], p: f64) -> f64 {
    let powers: Vec<f64> = match even_order(p) {
        Some(m) => values
            .iter()
            .map(|v| v.norm_sqr().powi(m as i32))
            .collect(),
        None => values.iter().map(|v| v.norm_sqr().powf(0.5 * p)).collect(),
    };
    let mean = pairwise_sum(&powers) / values.len() as f64;
    if p == 2.0 {
        mean.sqrt()
    } else {
        mean.powf(1.0 / p)
    }
}

/// `‖f‖_{2m}` as `‖f^m‖_2^{1/m}`, with `f^m` formed by repeated coefficient
/// convolution. No boundary grid is involved.
pub fn hp_norm_even_oracle(f: &CoefficientSeries, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("oracle order m must be >= 1"));
    }
    let mut power = f.coeffs.clone();
    for _ in 1..m {
        let mut next = vec![Complex64::new(0.0, 0.0); power.len() + f.coeffs.len() - 1];
        for (i, x) in power.iter().enumerate() {
            for (j, y) in f.coeffs.iter().enumerate() {
                next[i + j] += x * y;
            }
        }
        power = next;
    }
    let sq: Vec<f64> = power.iter().map(|c| c.norm_sqr()).collect();
    let l2 = pairwise_sum(&sq).sqrt();
    Ok(if m == 1 { l2 } else { l2.powf(1.0 / m as f64) })
}

/// `(Σ |a_n|^2)^{1/2}`.
pub fn l2_norm(f: &CoefficientSeries) -> f64 {
    let sq: Vec<f64> = f.coeffs.iter().map(|c| c.norm_sqr()).collect();
    pairwise_sum(&sq).sqrt()
}

/// `a_n = 1 / (sqrt(n+1) ln(n+2))`: square-summable, with slowly converging
/// partial norms and `H^p` norms that grow without bound for `p > 2`.
pub fn make_boundary_example(degree: usize) -> CoefficientSeries {
    let coeffs = (0..=degree)
        .map(|n| {
            let x = n as f64;
            Complex64::new(1.0 / ((x + 1.0).sqrt() * (x + 2.0).ln()), 0.0)
        })
        .collect();
    CoefficientSeries { coeffs }
}

/// A series supported on a sparse index set, with its gap ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct LacunarySeries {
    pub series: CoefficientSeries,
    pub support: Vec<usize>,
    /// `inf n_{k+1}/n_k` over consecutive positive support indices
    /// (`+inf` with fewer than two).
    pub gap_ratio: f64,
}

impl LacunarySeries {
    pub fn is_lacunary(&self) -> bool {
        self.is_lacunary_with(1.0)
    }

    /// Gap ratio strictly above `threshold`.
    pub fn is_lacunary_with(&self, threshold: f64) -> bool {
        self.gap_ratio > threshold
    }
}

pub fn gap_ratio(support: &[usize]) -> f64 {
    support
        .iter()
        .filter(|&&n| n > 0)
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| *w[1] as f64 / *w[0] as f64)
        .fold(f64::INFINITY, f64::min)
}

pub fn make_lacunary(support: &[usize], amplitudes: &[f64]) -> Result<LacunarySeries> {
    if support.is_empty() {
        return Err(Error::invalid("lacunary support is empty"));
    }
    if support.len() != amplitudes.len() {
        return Err(Error::invalid(format!(
            "{} support indices but {} amplitudes",
            support.len(),
            amplitudes.len()
        )));
    }
    if support.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("lacunary support must be strictly increasing"));
    }
    let degree = *support.last().expect("nonempty");
    let mut coeffs = vec![Complex64::new(0.0, 0.0); degree + 1];
    for (&n, &a) in support.iter().zip(amplitudes) {
        coeffs[n] = Complex64::new(a, 0.0);
    }
    Ok(LacunarySeries {
        series: CoefficientSeries::new(coeffs)?,
        support: support.to_vec(),
        gap_ratio: gap_ratio(support),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{gaussian_stream, SeedSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub(crate) fn random_series(degree: usize, stream: u64) -> CoefficientSeries {
        let z = gaussian_stream(SeedSpec::new(0xA11CE, stream), 2 * (degree + 1));
        CoefficientSeries::new(z.chunks(2).map(|p| c(p[0], p[1])).collect()).unwrap()
    }

    #[test]
    fn constant_series_is_constant_on_grid() {
        let f = CoefficientSeries::new(vec![c(2.0, -1.0)]).unwrap();
        for m in [1, 3, 8] {
            let bv = eval_on_grid(&f, m).unwrap();
            assert!(bv.values.iter().all(|v| *v == c(2.0, -1.0)));
        }
    }

    #[test]
    fn identity_map_hits_roots_of_unity() {
        let f = CoefficientSeries::from_real(&[0.0, 1.0]).unwrap();
        let bv = eval_on_grid(&f, 4).unwrap();
        let expect = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for (v, e) in bv.values.iter().zip(expect) {
            assert!((v - e).norm() < 1e-15);
        }
    }

    #[test]
    fn fft_matches_horner() {
        let f = random_series(8, 1);
        let a = eval_on_grid(&f, 32).unwrap();
        let b = eval_on_grid_horner(&f, 32).unwrap();
        let scale: f64 = f.coeffs().iter().map(|x| x.norm()).sum();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn aliasing_when_grid_is_coarse() {
        let f = random_series(20, 2);
        let a = eval_on_grid(&f, 7).unwrap();
        let b = eval_on_grid_horner(&f, 7).unwrap();
        let scale: f64 = f.coeffs().iter().map(|x| x.norm()).sum();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn zero_grid_rejected() {
        let f = CoefficientSeries::monomial(2);
        assert!(eval_on_grid(&f, 0).is_err());
        assert!(hp_norm_grid(&f, 2.0, 0).is_err());
        assert!(hp_norm_grid(&f, 0.0, 8).is_err());
        assert!(hp_norm_grid(&f, f64::NAN, 8).is_err());
    }

    #[test]
    fn constant_norm_any_p() {
        let f = CoefficientSeries::new(vec![c(3.0, 4.0)]).unwrap();
        let r = hp_norm_grid(&f, 3.7, 16).unwrap();
        assert!((r.value - 5.0).abs() < 1e-14);
        assert!(!r.exact);
    }

    #[test]
    fn one_plus_z_in_h4() {
        // ∫|1+e^{iθ}|^4 dθ/2π = ∫(2+2cosθ)^2 dθ/2π = 4 + 2 = 6
        let f = CoefficientSeries::from_real(&[1.0, 1.0]).unwrap();
        let expect = 6f64.powf(0.25);
        for m in [5, 6, 64] {
            let r = hp_norm_grid(&f, 4.0, m).unwrap();
            assert!(r.exact);
            assert!((r.value - expect).abs() < 1e-14, "{}", r.value);
        }
        assert!(!hp_norm_grid(&f, 4.0, 4).unwrap().exact);
        assert!((hp_norm_even_oracle(&f, 2).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn monomial_oracle_is_one() {
        for m in 1..5 {
            let v = hp_norm_even_oracle(&CoefficientSeries::monomial(7), m).unwrap();
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert!(hp_norm_even_oracle(&CoefficientSeries::monomial(1), 0).is_err());
    }

    #[test]
    fn degree_six_oracle_agrees_with_grid() {
        let f = random_series(6, 3);
        let grid = hp_norm_grid(&f, 6.0, 37).unwrap();
        assert!(grid.exact);
        let oracle = hp_norm_even_oracle(&f, 3).unwrap();
        assert!((grid.value - oracle).abs() <= 1e-10 * oracle);
    }

    #[test]
    fn l2_examples() {
        assert_eq!(l2_norm(&CoefficientSeries::from_real(&[1.0, 0.0]).unwrap()), 1.0);
        assert_eq!(l2_norm(&CoefficientSeries::from_real(&[3.0, 4.0]).unwrap()), 5.0);
    }

    #[test]
    fn default_grid_rule() {
        assert_eq!(default_grid_size(0), 64);
        assert_eq!(default_grid_size(7), 64);
        assert_eq!(default_grid_size(8), 128);
        assert_eq!(default_grid_size(64), 1024);
        for n in [0, 5, 64, 1000] {
            assert!(quadrature_is_exact(8.0, n, default_grid_size(n)));
        }
    }

    #[test]
    fn non_even_p_converges_under_refinement() {
        let f = random_series(12, 4);
        let m = default_grid_size(12);
        for p in [1.0, 1.5, 3.0] {
            let a = hp_norm_grid(&f, p, m).unwrap().value;
            let b = hp_norm_grid(&f, p, 2 * m).unwrap().value;
            assert!((a - b).abs() <= 1e-3 * b);
        }
    }

    #[test]
    fn boundary_example_values() {
        let f = make_boundary_example(100);
        assert!((f.coeffs()[0].re - 1.0 / 2f64.ln()).abs() < 1e-15);
        // 1/ln 2
        assert!((f.coeffs()[0].re - std::f64::consts::LOG2_E).abs() < 1e-15);
        assert!(f.coeffs().windows(2).all(|w| w[1].re < w[0].re));
    }

    #[test]
    fn boundary_example_l2_tail_is_small() {
        // Σ_{n>N} 1/((n+1) ln²(n+2)) ≈ 1/ln(N), so the norm still creeps up.
        let a = l2_norm(&make_boundary_example(1 << 14));
        let b = l2_norm(&make_boundary_example(1 << 15));
        assert!(b > a && b < 1.01 * a);
    }

    #[test]
    fn lacunary_gap_ratios() {
        let support: Vec<usize> = (0..=10).map(|k| 1 << k).collect();
        let amps = vec![1.0; support.len()];
        let s = make_lacunary(&support, &amps).unwrap();
        assert_eq!(s.gap_ratio, 2.0);
        assert!(s.is_lacunary());
        assert_eq!(s.series.degree(), 1024);

        let s = make_lacunary(&[1, 2, 3], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.gap_ratio, 1.5);
        assert!(s.is_lacunary());

        let squares: Vec<usize> = (1..=1000).map(|k| k * k).collect();
        let s = make_lacunary(&squares, &vec![1.0; 1000]).unwrap();
        assert!(s.gap_ratio < 1.01);
        assert!(!s.is_lacunary_with(1.01));

        assert!(make_lacunary(&[2, 2], &[1.0, 1.0]).is_err());
        assert!(make_lacunary(&[1, 2], &[1.0]).is_err());
    }

    #[test]
    fn csv_and_json_roundtrip() {
        let f = CoefficientSeries::new(vec![c(0.1, -1e-300), c(f64::MAX, 5e-324), c(-0.0, 1.0 / 3.0)])
            .unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# schema=1\nindex,re,im\n"));
        let back = CoefficientSeries::read_csv(&buf[..]).unwrap();
        for (x, y) in f.coeffs().iter().zip(back.coeffs()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
        let back = CoefficientSeries::from_json(&f.to_json().unwrap()).unwrap();
        for (x, y) in f.coeffs().iter().zip(back.coeffs()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    #[test]
    fn rejects_nonfinite() {
        assert!(CoefficientSeries::from_real(&[1.0, f64::INFINITY]).is_err());
        assert!(CoefficientSeries::new(vec![]).is_err());
    }
}
