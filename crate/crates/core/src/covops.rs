//! Covariance operators on ℓ²: the model families, their finite sections,
//! norm estimates and triangular factors.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::SequenceSpec;
use crate::stats::pairwise_sum;

pub const DEFAULT_PSD_TOL: f64 = 1e-10;
pub const DEFAULT_POWER_TOL: f64 = 1e-12;
pub const DEFAULT_POWER_MAX_ITER: usize = 10_000;

/// Lower-triangular rule `b_k^n` (row `n`, column `k <= n`) of a canonical
/// representation `X_n = Σ_{k<=n} b_k^n ξ_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorRule {
    /// `b_k^n = scale * ratio^(n-k)`.
    Geometric { scale: f64, ratio: f64 },
    /// Explicit rows; row `n` holds `b_0^n..b_n^n`.
    Stored(Vec<Vec<f64>>),
}

impl FactorRule {
    /// `a_{i,j} = 2^{j-i}` for `i >= j`: the factor whose process is singular
    /// with respect to white noise yet has a bounded covariance.
    pub fn dyadic() -> Self {
        FactorRule::Geometric {
            scale: 1.0,
            ratio: 0.5,
        }
    }

    pub fn coeff(&self, n: usize, k: usize) -> f64 {
        if k > n {
            return 0.0;
        }
        match self {
            FactorRule::Geometric { scale, ratio } => scale * powi(*ratio, n - k),
            FactorRule::Stored(rows) => rows
                .get(n)
                .map_or(f64::NAN, |row| row.get(k).copied().unwrap_or(0.0)),
        }
    }
}

fn powi(x: f64, n: usize) -> f64 {
    x.powi(i32::try_from(n).unwrap_or(i32::MAX))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceModel {
    Identity,
    /// Independent entries with standard deviations `σ_n`, so `K(n,n) = σ_n²`.
    Diagonal(SequenceSpec),
    /// Banded Toeplitz kernel `K(i,j) = template[|i-j|]`, zero once
    /// `|i-j| >= template.len()` (the bandwidth).
    Band { template: Vec<f64> },
    /// `K(i,j) = 1/(i+j+1)`.
    Hilbert,
    /// Stationary Markov kernel `σ² c^{|i-j|}`.
    ToeplitzGeometric { sigma2: f64, c: f64 },
    /// `K(i,j) = c_i c_j`, the law of `X_n = c_n ξ`.
    RankOne(SequenceSpec),
    /// `K = B Bᵀ` for a lower-triangular rule `B`.
    TriangularFactor(FactorRule),
}

impl CovarianceModel {
    /// Band kernel of the moving average `X_n = Σ_k w_k ξ_{n-k}`; the result is
    /// positive semidefinite for any weights.
    pub fn band_moving_average(weights: &[f64]) -> Self {
        let m = weights.len();
        let template = (0..m)
            .map(|d| (0..m - d).map(|k| weights[k] * weights[k + d]).sum())
            .collect();
        CovarianceModel::Band { template }
    }

    /// Bandwidth-`m` band with weights `2^{-k}`.
    pub fn band_default(bandwidth: usize) -> Self {
        let weights: Vec<f64> = (0..bandwidth).map(|k| powi(0.5, k)).collect();
        Self::band_moving_average(&weights)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CovarianceModel::Identity | CovarianceModel::Hilbert => Ok(()),
            CovarianceModel::Diagonal(s) | CovarianceModel::RankOne(s) => s.validate(),
            CovarianceModel::Band { template } => {
                if template.is_empty() {
                    return Err(Error::invalid("band template must have bandwidth >= 1"));
                }
                if template.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("band template entries must be finite"));
                }
                Ok(())
            }
            CovarianceModel::ToeplitzGeometric { sigma2, c } => {
                if !(sigma2.is_finite() && *sigma2 > 0.0) {
                    return Err(Error::invalid("sigma2 must be positive"));
                }
                if c.is_nan() || c.abs() >= 1.0 {
                    return Err(Error::invalid("toeplitz ratio c must satisfy |c| < 1"));
                }
                Ok(())
            }
            CovarianceModel::TriangularFactor(rule) => match rule {
                FactorRule::Geometric { scale, ratio } if scale.is_finite() && ratio.is_finite() => {
                    Ok(())
                }
                FactorRule::Geometric { .. } => {
                    Err(Error::invalid("factor rule parameters must be finite"))
                }
                FactorRule::Stored(rows) => {
                    if rows.iter().flatten().any(|x| !x.is_finite()) {
                        Err(Error::invalid("factor rule entries must be finite"))
                    } else {
                        Ok(())
                    }
                }
            },
        }
    }

    /// Kernel value `K(i,j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let d = i.abs_diff(j);
        match self {
            CovarianceModel::Identity => {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            }
            CovarianceModel::Diagonal(sigma) => {
                if i == j {
                    sigma.get(i).map_or(f64::NAN, |s| s * s)
                } else {
                    0.0
                }
            }
            CovarianceModel::Band { template } => template.get(d).copied().unwrap_or(0.0),
            CovarianceModel::Hilbert => 1.0 / ((i + j + 1) as f64),
            CovarianceModel::ToeplitzGeometric { sigma2, c } => sigma2 * powi(*c, d),
            CovarianceModel::RankOne(c) => match (c.get(i), c.get(j)) {
                (Some(a), Some(b)) => a * b,
                _ => f64::NAN,
            },
            CovarianceModel::TriangularFactor(rule) => match rule {
                FactorRule::Geometric { scale, ratio } => {
                    let lo = i.min(j);
                    let r2 = ratio * ratio;
                    let sum = if r2 == 1.0 {
                        (lo + 1) as f64
                    } else {
                        (1.0 - powi(r2, lo + 1)) / (1.0 - r2)
                    };
                    scale * scale * powi(*ratio, d) * sum
                }
                FactorRule::Stored(_) => {
                    let (lo, hi) = (i.min(j), i.max(j));
                    (0..=lo).map(|k| rule.coeff(lo, k) * rule.coeff(hi, k)).sum()
                }
            },
        }
    }

    /// `EX_n² = K(n,n)`.
    pub fn variance(&self, n: usize) -> f64 {
        self.entry(n, n)
    }
}

impl fmt::Display for CovarianceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovarianceModel::Identity => write!(f, "identity"),
            CovarianceModel::Diagonal(s) => write!(f, "diagonal(sigma={s})"),
            CovarianceModel::Band { template } => {
                write!(f, "band(bandwidth={},template={template:?})", template.len())
            }
            CovarianceModel::Hilbert => write!(f, "hilbert"),
            CovarianceModel::ToeplitzGeometric { sigma2, c } => {
                write!(f, "toeplitz_geometric(sigma2={sigma2},c={c})")
            }
            CovarianceModel::RankOne(s) => write!(f, "rank_one(c={s})"),
            CovarianceModel::TriangularFactor(FactorRule::Geometric { scale, ratio }) => {
                write!(f, "triangular_factor(scale={scale},ratio={ratio})")
            }
            CovarianceModel::TriangularFactor(FactorRule::Stored(rows)) => {
                write!(f, "triangular_factor(stored,rows={})", rows.len())
            }
        }
    }
}

/// Dense symmetric section `K(i,j)`, `0 <= i,j <= N`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedMatrix {
    data: DMatrix<f64>,
}

impl TruncatedMatrix {
    /// Builds from explicit rows, which must be square, finite and exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("matrix rows must form a nonempty square"));
        }
        let data = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_matrix(data)
    }

    fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        let n = data.nrows();
        for i in 0..n {
            for j in 0..i {
                if data[(i, j)].to_bits() != data[(j, i)].to_bits() {
                    return Err(Error::invalid(format!("matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { data })
    }

    /// Number of rows, `N + 1`.
    pub fn order(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Ascending eigenvalues from a dense symmetric eigendecomposition.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.data.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Row-major CSV with a header comment carrying the order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema=1")?;
        writeln!(w, "# order={}", self.order())?;
        for i in 0..self.order() {
            let row: Vec<String> = (0..self.order()).map(|j| self.get(i, j).to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// The `(N+1)×(N+1)` section of `model`; symmetric by construction.
pub fn truncate(model: &CovarianceModel, degree: usize) -> Result<TruncatedMatrix> {
    model.validate()?;
    let n = degree
        .checked_add(1)
        .filter(|n| n.checked_mul(*n).is_some_and(|sq| sq <= (1 << 28)))
        .ok_or_else(|| Error::invalid(format!("truncation degree {degree} is too large for dense storage")))?;
    let mut data = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = model.entry(i, j);
            data[(i, j)] = v;
            data[(j, i)] = v;
        }
    }
    TruncatedMatrix::from_matrix(data)
}

/// Outcome of a converged power iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerIteration {
    /// `|λ|` for the dominant eigenvalue `λ`; the operator norm when PSD.
    pub norm: f64,
    pub eigenvalue: f64,
    pub iterations: usize,
    pub residual: f64,
    pub restarted: bool,
}

enum Run {
    Converged(f64, f64),
    Stalled(f64, f64),
    Exhausted(f64, f64),
}

fn power_run(a: &DMatrix<f64>, start: DVector<f64>, tol: f64, budget: usize, used: &mut usize) -> Run {
    let mut x = start.normalize();
    let mut prev_lambda = f64::NAN;
    let mut prev_res = f64::INFINITY;
    let mut lambda = 0.0;
    let mut res = f64::INFINITY;
    for _ in 0..budget {
        *used += 1;
        let y = a * &x;
        lambda = x.dot(&y);
        let ynorm = y.norm();
        if ynorm == 0.0 {
            return Run::Converged(0.0, 0.0);
        }
        res = (&y - &x * lambda).norm() / lambda.abs().max(f64::MIN_POSITIVE);
        if res <= tol {
            return Run::Converged(lambda, res);
        }
        let change = (lambda - prev_lambda).abs() / lambda.abs();
        if change < tol {
            // The Rayleigh quotient error is second order in the residual, so
            // a settled eigenvalue with residual below √tol is accurate to ~tol.
            if res * res <= tol {
                return Run::Converged(lambda, res);
            }
            // Stalled: the eigenvalue has settled while the residual stopped shrinking.
            if res >= 0.999 * prev_res {
                return Run::Stalled(lambda, res);
            }
        }
        prev_lambda = lambda;
        prev_res = res;
        x = y / ynorm;
    }
    Run::Exhausted(lambda, res)
}

/// Dominant eigenvalue by power iteration from `(1,…,1)/√(N+1)`, restarting
/// once from the alternating-sign vector if the residual stalls.
pub fn op_norm_power_iter(t: &TruncatedMatrix, tol: f64, max_iter: usize) -> Result<PowerIteration> {
    if tol.is_nan() || tol <= 0.0 || max_iter == 0 {
        return Err(Error::invalid("power iteration needs tol > 0 and max_iter >= 1"));
    }
    let n = t.order();
    let mut used = 0;
    let ones = DVector::from_element(n, 1.0);
    let (lambda, res, restarted) = match power_run(&t.data, ones, tol, max_iter, &mut used) {
        Run::Converged(l, r) => (l, r, false),
        Run::Exhausted(l, r) => {
            return Err(Error::NotConverged {
                estimate: l.abs(),
                iterations: used,
                residual: r,
            })
        }
        Run::Stalled(..) => {
            let alt = DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
            match power_run(&t.data, alt, tol, max_iter - used.min(max_iter), &mut used) {
                Run::Converged(l, r) => (l, r, true),
                Run::Stalled(l, r) | Run::Exhausted(l, r) => {
                    return Err(Error::NotConverged {
                        estimate: l.abs(),
                        iterations: used,
                        residual: r,
                    })
                }
            }
        }
    };
    Ok(PowerIteration {
        norm: lambda.abs(),
        eigenvalue: lambda,
        iterations: used,
        residual: res,
        restarted,
    })
}

/// Finite-section norm `‖K_N‖`: closed forms where the section is diagonal or
/// rank one, power iteration otherwise (dense eigenvalues if it does not converge).
pub fn finite_section_norm(model: &CovarianceModel, degree: usize) -> Result<f64> {
    model.validate()?;
    match model {
        CovarianceModel::Identity => Ok(1.0),
        CovarianceModel::Diagonal(sigma) => Ok(sigma
            .prefix(degree + 1)?
            .iter()
            .fold(0.0, |m, s| m.max(s * s))),
        CovarianceModel::RankOne(c) => rank_one_norm(c, degree),
        _ => {
            let t = truncate(model, degree)?;
            match op_norm_power_iter(&t, DEFAULT_POWER_TOL, DEFAULT_POWER_MAX_ITER) {
                Ok(r) => Ok(r.norm),
                // Tightly clustered spectra: fall back to the dense eigensolver.
                Err(Error::NotConverged { .. }) => {
                    Ok(t.eigenvalues().iter().fold(0.0, |m: f64, x| m.max(x.abs())))
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Unit-weight Schur bound `max_i Σ_j |K(i,j)|` on the section.
pub fn schur_bound(model: &CovarianceModel, degree: usize) -> f64 {
    (0..=degree)
        .map(|i| {
            let row: Vec<f64> = (0..=degree).map(|j| model.entry(i, j).abs()).collect();
            pairwise_sum(&row)
        })
        .fold(0.0, f64::max)
}

/// Schur bound of the infinite operator, where a closed form exists.
pub fn schur_limit(model: &CovarianceModel) -> Option<f64> {
    match model {
        CovarianceModel::Identity => Some(1.0),
        CovarianceModel::Band { template } => {
            Some(template[0].abs() + 2.0 * template[1..].iter().map(|x| x.abs()).sum::<f64>())
        }
        CovarianceModel::ToeplitzGeometric { sigma2, c } => {
            Some(sigma2 * (1.0 + c.abs()) / (1.0 - c.abs()))
        }
        _ => None,
    }
}

/// Smallest eigenvalue of the section.
pub fn min_eigenvalue(t: &TruncatedMatrix) -> f64 {
    t.eigenvalues()[0]
}

fn psd_threshold(t: &TruncatedMatrix, psd_tol: f64) -> f64 {
    psd_tol * t.max_abs().max(1.0)
}

/// True iff the smallest eigenvalue is at least `-psd_tol * max(1, ‖T‖_max)`.
pub fn psd_check(t: &TruncatedMatrix, psd_tol: f64) -> bool {
    min_eigenvalue(t) >= -psd_threshold(t, psd_tol)
}

/// `‖K_N‖ = Σ_{n<=N} c_n²` for the rank-one kernel `c cᵀ`.
pub fn rank_one_norm(c: &SequenceSpec, degree: usize) -> Result<f64> {
    let sq: Vec<f64> = c.prefix(degree + 1)?.iter().map(|x| x * x).collect();
    Ok(pairwise_sum(&sq))
}

/// Matrix-vector product `T v`.
pub fn apply(t: &TruncatedMatrix, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != t.order() {
        return Err(Error::invalid(format!(
            "vector has length {}, matrix has order {}",
            v.len(),
            t.order()
        )));
    }
    let x = DVector::from_column_slice(v);
    Ok((&t.data * x).iter().copied().collect())
}

#[derive(Clone, Debug, PartialEq)]
enum FactorRepr {
    Diagonal(Vec<f64>),
    /// Only column 0 is nonzero.
    Column(Vec<f64>),
    /// `L[n][k] = weights[k] * ratio^(n-k)`, i.e. `X_n = ratio X_{n-1} + weights[n] ξ_n`.
    Geometric { ratio: f64, weights: Vec<f64> },
    Dense(DMatrix<f64>),
}

/// Lower-triangular `L` with `L Lᵀ = K_N`. Structured families keep an O(N)
/// representation; everything else is dense.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorMatrix {
    order: usize,
    repr: FactorRepr,
}

impl FactorMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    /// `L[n][k]`; zero above the diagonal.
    pub fn get(&self, n: usize, k: usize) -> f64 {
        if k > n {
            return 0.0;
        }
        match &self.repr {
            FactorRepr::Diagonal(d) => {
                if n == k {
                    d[n]
                } else {
                    0.0
                }
            }
            FactorRepr::Column(c) => {
                if k == 0 {
                    c[n]
                } else {
                    0.0
                }
            }
            FactorRepr::Geometric { ratio, weights } => weights[k] * powi(*ratio, n - k),
            FactorRepr::Dense(l) => l[(n, k)],
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.order, self.order, |i, j| self.get(i, j))
    }

    /// `L ξ`.
    pub fn apply(&self, xi: &[f64]) -> Vec<f64> {
        assert_eq!(xi.len(), self.order, "noise length must equal the factor order");
        match &self.repr {
            FactorRepr::Diagonal(d) => d.iter().zip(xi).map(|(s, z)| s * z).collect(),
            FactorRepr::Column(c) => c.iter().map(|s| s * xi[0]).collect(),
            FactorRepr::Geometric { ratio, weights } => {
                let mut prev = 0.0;
                weights
                    .iter()
                    .zip(xi)
                    .map(|(w, z)| {
                        prev = ratio * prev + w * z;
                        prev
                    })
                    .collect()
            }
            FactorRepr::Dense(l) => (0..self.order)
                .map(|n| (0..=n).map(|k| l[(n, k)] * xi[k]).sum())
                .collect(),
        }
    }

    /// `‖L Lᵀ − T‖_max`.
    pub fn reconstruction_error(&self, t: &TruncatedMatrix) -> f64 {
        let l = self.to_dense();
        let rec = &l * l.transpose();
        (rec - t.matrix()).iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Triangular factor of a dense section: Cholesky when the section is
/// strictly positive definite, otherwise an eigendecomposition with
/// eigenvalues in `[-tol, 0]` clipped to zero, re-triangularized by QR.
pub fn factor(t: &TruncatedMatrix, psd_tol: f64) -> Result<FactorMatrix> {
    let order = t.order();
    let threshold = psd_threshold(t, psd_tol);
    let eig = SymmetricEigen::new(t.data.clone());
    let lam_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lam_min < -threshold {
        return Err(Error::NotACovariance {
            min_eigenvalue: lam_min,
            tolerance: threshold,
        });
    }
    if lam_min > threshold {
        if let Some(ch) = t.data.clone().cholesky() {
            return Ok(FactorMatrix {
                order,
                repr: FactorRepr::Dense(ch.l()),
            });
        }
    }
    // A = V Λ^{1/2}, so T = A Aᵀ; with Aᵀ = Q R we get T = Rᵀ R.
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let a = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
    let r = a.transpose().qr().r();
    let mut l = r.transpose();
    for k in 0..order {
        if l[(k, k)] < 0.0 {
            for n in k..order {
                l[(n, k)] = -l[(n, k)];
            }
        }
    }
    Ok(FactorMatrix {
        order,
        repr: FactorRepr::Dense(l),
    })
}

/// Factor of the degree-`N` section of `model`, using the canonical
/// representation directly for families that have one in closed form.
pub fn factor_model(model: &CovarianceModel, degree: usize, psd_tol: f64) -> Result<FactorMatrix> {
    model.validate()?;
    let order = degree + 1;
    let repr = match model {
        CovarianceModel::Identity => FactorRepr::Diagonal(vec![1.0; order]),
        CovarianceModel::Diagonal(sigma) => {
            FactorRepr::Diagonal(sigma.prefix(order)?.iter().map(|s| s.abs()).collect())
        }
        CovarianceModel::RankOne(c) => FactorRepr::Column(c.prefix(order)?),
        CovarianceModel::ToeplitzGeometric { sigma2, c } => {
            let sigma = sigma2.sqrt();
            let innov = sigma * (1.0 - c * c).sqrt();
            let weights = (0..order).map(|k| if k == 0 { sigma } else { innov }).collect();
            FactorRepr::Geometric { ratio: *c, weights }
        }
        CovarianceModel::TriangularFactor(FactorRule::Geometric { scale, ratio }) => {
            FactorRepr::Geometric {
                ratio: *ratio,
                weights: vec![*scale; order],
            }
        }
        CovarianceModel::TriangularFactor(rule @ FactorRule::Stored(rows)) => {
            if rows.len() < order {
                return Err(Error::invalid(format!(
                    "stored factor has {} rows, {} needed",
                    rows.len(),
                    order
                )));
            }
            FactorRepr::Dense(DMatrix::from_fn(order, order, |n, k| rule.coeff(n, k)))
        }
        CovarianceModel::Band { .. } | CovarianceModel::Hilbert => {
            return factor(&truncate(model, degree)?, psd_tol);
        }
    };
    Ok(FactorMatrix { order, repr })
}
