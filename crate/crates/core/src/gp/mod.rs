//! Seeded sampling of Gaussian processes `X = Lξ + μ`.

pub mod philox;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::covops::{factor_model, CovarianceModel, FactorMatrix, DEFAULT_PSD_TOL};
use crate::error::{Error, Result};
use crate::stats::pairwise_sum;

/// Identifies one variate stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub root_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub const fn new(root_seed: u64, stream_id: u64) -> Self {
        Self {
            root_seed,
            stream_id,
        }
    }

    /// Seed of Monte Carlo trial `t`: same root, stream offset by `t`.
    pub fn trial(self, t: u64) -> Self {
        Self {
            root_seed: self.root_seed,
            stream_id: self.stream_id.wrapping_add(t),
        }
    }
}

impl fmt::Display for SeedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.root_seed, self.stream_id)
    }
}

/// `count` iid standard normals from Philox4x32-10 and Box–Muller.
pub fn gaussian_stream(seed: SeedSpec, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    philox::fill_normals(seed.root_seed, seed.stream_id, &mut out);
    out
}

/// One realization `X_0..X_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSample {
    pub values: Vec<f64>,
    pub model_id: String,
    pub seed: SeedSpec,
    pub mean: Option<Vec<f64>>,
}

impl GaussianSample {
    /// A sample with prescribed values, e.g. for deterministic checks.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("sample values must be nonempty and finite"));
        }
        Ok(Self {
            values,
            model_id: "explicit".to_string(),
            seed: SeedSpec::default(),
            mean: None,
        })
    }

    pub fn degree(&self) -> usize {
        self.values.len() - 1
    }

    /// CSV `n,X_n` preceded by comments that allow a full replay.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema=1")?;
        writeln!(
            w,
            "# model={} root_seed={} stream_id={} mean={}",
            self.model_id,
            self.seed.root_seed,
            self.seed.stream_id,
            if self.mean.is_some() { "given" } else { "none" }
        )?;
        writeln!(w, "n,X_n")?;
        for (n, x) in self.values.iter().enumerate() {
            writeln!(w, "{n},{x}")?;
        }
        Ok(())
    }
}

/// A factored section ready to draw many samples.
#[derive(Clone, Debug)]
pub struct ProcessSampler {
    factor: FactorMatrix,
    model_id: String,
}

impl ProcessSampler {
    pub fn new(model: &CovarianceModel, degree: usize) -> Result<Self> {
        Ok(Self {
            factor: factor_model(model, degree, DEFAULT_PSD_TOL)?,
            model_id: model.to_string(),
        })
    }

    pub fn degree(&self) -> usize {
        self.factor.order() - 1
    }

    pub fn factor(&self) -> &FactorMatrix {
        &self.factor
    }

    /// Centered draw `Lξ` with `ξ = gaussian_stream(seed, N+1)`.
    pub fn draw(&self, seed: SeedSpec) -> Vec<f64> {
        self.factor.apply(&gaussian_stream(seed, self.factor.order()))
    }

    pub fn sample(&self, seed: SeedSpec, mean: Option<&[f64]>) -> Result<GaussianSample> {
        let mut values = self.draw(seed);
        if let Some(mu) = mean {
            if mu.len() != values.len() {
                return Err(Error::invalid(format!(
                    "mean has length {}, sample has {}",
                    mu.len(),
                    values.len()
                )));
            }
            if mu.iter().any(|m| !m.is_finite()) {
                return Err(Error::invalid("mean entries must be finite"));
            }
            for (x, m) in values.iter_mut().zip(mu) {
                *x += m;
            }
        }
        Ok(GaussianSample {
            values,
            model_id: self.model_id.clone(),
            seed,
            mean: mean.map(<[f64]>::to_vec),
        })
    }
}

pub fn sample_process(
    model: &CovarianceModel,
    degree: usize,
    seed: SeedSpec,
    mean: Option<&[f64]>,
) -> Result<GaussianSample> {
    ProcessSampler::new(model, degree)?.sample(seed, mean)
}

/// Empirical `E(X_i X_j)` with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovEstimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// `(1/T) Σ_t X_i X_j` over centered samples; the standard error is
/// `sqrt(mean((X_i X_j)²) / T)`.
pub fn empirical_cov(samples: &[GaussianSample], i: usize, j: usize) -> Result<CovEstimate> {
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.values.as_slice()).collect();
    empirical_cov_rows(&rows, i, j)
}

pub fn empirical_cov_rows(rows: &[&[f64]], i: usize, j: usize) -> Result<CovEstimate> {
    if rows.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let mut prods = Vec::with_capacity(rows.len());
    for r in rows {
        match (r.get(i), r.get(j)) {
            (Some(a), Some(b)) => prods.push(a * b),
            _ => return Err(Error::invalid(format!("index ({i},{j}) outside sample"))),
        }
    }
    let t = prods.len() as f64;
    let value = pairwise_sum(&prods) / t;
    let sq: Vec<f64> = prods.iter().map(|x| x * x).collect();
    let stderr = (pairwise_sum(&sq) / t / t).sqrt();
    Ok(CovEstimate {
        value,
        stderr,
        trials: prods.len(),
    })
}

/// `max_{n0<=n<=N} |X_n|^{1/n}`; zero entries contribute 0.
pub fn radius_statistic(sample: &GaussianSample, n0: usize) -> Result<f64> {
    let n_max = sample.degree();
    if n0 == 0 || n0 > n_max {
        return Err(Error::invalid(format!("need 1 <= n0 <= {n_max}, got {n0}")));
    }
    Ok(sample.values[n0..]
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let n = (n0 + k) as f64;
            if *x == 0.0 {
                0.0
            } else {
                x.abs().powf(1.0 / n)
            }
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covops::truncate;
    use crate::sequence::SequenceSpec;

    #[test]
    fn empty_stream() {
        assert!(gaussian_stream(SeedSpec::new(1, 2), 0).is_empty());
    }

    #[test]
    fn stream_is_deterministic_and_seed_sensitive() {
        let a = gaussian_stream(SeedSpec::new(5, 0), 101);
        let b = gaussian_stream(SeedSpec::new(5, 0), 101);
        let c = gaussian_stream(SeedSpec::new(5, 1), 101);
        let d = gaussian_stream(SeedSpec::new(6, 0), 101);
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn stream_moments() {
        let z = gaussian_stream(SeedSpec::new(20_240_601, 0), 1_000_000);
        let n = z.len() as f64;
        let m1 = pairwise_sum(&z) / n;
        let m2 = pairwise_sum(&z.iter().map(|x| x * x).collect::<Vec<_>>()) / n;
        let m4 = pairwise_sum(&z.iter().map(|x| x.powi(4)).collect::<Vec<_>>()) / n;
        let var = m2 - m1 * m1;
        assert!(m1.abs() < 0.005, "mean {m1}");
        assert!(var > 0.99 && var < 1.01, "variance {var}");
        assert!(m4 > 2.9 && m4 < 3.1, "fourth moment {m4}");
    }

    #[test]
    fn identity_sample_is_noise_plus_mean() {
        let seed = SeedSpec::new(3, 9);
        let mu: Vec<f64> = (0..8).map(|n| n as f64).collect();
        let s = sample_process(&CovarianceModel::Identity, 7, seed, Some(&mu)).unwrap();
        let xi = gaussian_stream(seed, 8);
        for n in 0..8 {
            assert_eq!(s.values[n], xi[n] + mu[n]);
        }
    }

    #[test]
    fn mean_shift_is_exact() {
        let m = CovarianceModel::Hilbert;
        let seed = SeedSpec::new(11, 4);
        let mu = vec![0.25; 6];
        let centered = sample_process(&m, 5, seed, None).unwrap();
        let shifted = sample_process(&m, 5, seed, Some(&mu)).unwrap();
        for (c, s) in centered.values.iter().zip(&shifted.values) {
            assert_eq!(c + 0.25, *s);
        }
        assert!(sample_process(&m, 5, seed, Some(&[1.0])).is_err());
    }

    #[test]
    fn rank_one_ones_sample_is_constant() {
        let m = CovarianceModel::RankOne(SequenceSpec::ones());
        let s = sample_process(&m, 50, SeedSpec::new(1, 1), None).unwrap();
        assert!(s.values.iter().all(|x| *x == s.values[0]));
    }

    #[test]
    fn not_a_covariance_propagates() {
        let m = CovarianceModel::Band {
            template: vec![1.0, 2.0],
        };
        assert!(matches!(
            sample_process(&m, 4, SeedSpec::default(), None),
            Err(Error::NotACovariance { .. })
        ));
    }

    #[test]
    fn toeplitz_empirical_covariance() {
        let m = CovarianceModel::ToeplitzGeometric { sigma2: 1.0, c: 0.5 };
        let sampler = ProcessSampler::new(&m, 16).unwrap();
        let draws: Vec<Vec<f64>> = (0..10_000).map(|t| sampler.draw(SeedSpec::new(77, t))).collect();
        let rows: Vec<&[f64]> = draws.iter().map(Vec::as_slice).collect();
        let k = truncate(&m, 16).unwrap();
        for i in 0..17 {
            for j in i..17 {
                let e = empirical_cov_rows(&rows, i, j).unwrap();
                assert!((e.value - k.get(i, j)).abs() <= 4.0 * e.stderr, "({i},{j})");
            }
        }
    }

    #[test]
    fn radius_examples() {
        let ones = GaussianSample::from_values(vec![1.0; 10]).unwrap();
        assert_eq!(radius_statistic(&ones, 1).unwrap(), 1.0);
        let geo = GaussianSample::from_values((0..20).map(|n| 2f64.powi(n)).collect()).unwrap();
        assert!((radius_statistic(&geo, 3).unwrap() - 2.0).abs() < 1e-14);
        let zeros = GaussianSample::from_values(vec![0.0; 5]).unwrap();
        assert_eq!(radius_statistic(&zeros, 1).unwrap(), 0.0);
        assert!(radius_statistic(&ones, 0).is_err());
        assert!(radius_statistic(&ones, 10).is_err());
    }

    #[test]
    fn sample_csv_header() {
        let s = sample_process(&CovarianceModel::Identity, 2, SeedSpec::new(7, 0), None).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# schema=1");
        assert_eq!(lines[1], "# model=identity root_seed=7 stream_id=0 mean=none");
        assert_eq!(lines[2], "n,X_n");
        assert_eq!(lines.len(), 6);
    }
}
