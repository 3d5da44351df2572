//! Parsing of the string specs accepted by `--family`, `--f` and the sequence flags.

use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context};
use gausslit::covops::{CovarianceModel, FactorRule};
use gausslit::gp::{gaussian_stream, SeedSpec};
use gausslit::hardy::{make_boundary_example, make_lacunary, CoefficientSeries, LacunarySeries};
use gausslit::sequence::SequenceSpec;

use crate::args::{non_negative, Params};
use crate::Validation;

fn invalid<T>(msg: String) -> anyhow::Result<T> {
    Err(Validation(msg).into())
}

pub fn parse_list(key: &str, s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Validation(format!("{key}: cannot parse {x:?} as a number")).into())
        })
        .collect()
}

pub fn parse_usize_list(key: &str, s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .map_err(|_| Validation(format!("{key}: cannot parse {x:?} as a degree")).into())
        })
        .collect()
}

/// `ones`, `inv_sqrt`, `const:v`, `power:scale,offset,exponent`,
/// `geometric:scale,ratio`, `cycle:a,b,...`, `list:a,b,...`,
/// `alt:<spec>`, `signs:<seed>:<spec>`.
pub fn parse_sequence(key: &str, s: &str) -> anyhow::Result<SequenceSpec> {
    let (head, rest) = s.split_once(':').unwrap_or((s, ""));
    let nums = |n: usize| -> anyhow::Result<Vec<f64>> {
        let v = parse_list(key, rest)?;
        if v.len() != n {
            return invalid(format!("{key}: {head} takes {n} numbers, got {}", v.len()));
        }
        Ok(v)
    };
    let spec = match head {
        "ones" => SequenceSpec::ones(),
        "inv_sqrt" => SequenceSpec::inv_sqrt(),
        "const" => SequenceSpec::Constant(nums(1)?[0]),
        "power" => {
            let v = nums(3)?;
            SequenceSpec::power(v[0], v[1], v[2])
        }
        "geometric" => {
            let v = nums(2)?;
            SequenceSpec::Geometric {
                scale: v[0],
                ratio: v[1],
            }
        }
        "cycle" => SequenceSpec::Cycle(parse_list(key, rest)?),
        "list" => SequenceSpec::Prefix(parse_list(key, rest)?),
        "alt" => SequenceSpec::Alternating(Box::new(parse_sequence(key, rest)?)),
        "signs" => {
            let Some((seed, inner)) = rest.split_once(':') else {
                return invalid(format!("{key}: expected signs:<seed>:<spec>"));
            };
            let seed = seed
                .parse()
                .map_err(|_| Validation(format!("{key}: bad sign seed {seed:?}")))?;
            SequenceSpec::RandomSigns {
                seed,
                inner: Box::new(parse_sequence(key, inner)?),
            }
        }
        _ => return invalid(format!("{key}: unknown sequence {s:?}")),
    };
    spec.validate()
        .map_err(|e| Validation(format!("{key}: {e}")))?;
    Ok(spec)
}

pub fn parse_model(params: &Params) -> anyhow::Result<CovarianceModel> {
    let family = params.family.as_deref().unwrap_or("identity");
    let seq = |default: SequenceSpec| -> anyhow::Result<SequenceSpec> {
        params
            .sigma
            .as_deref()
            .map_or(Ok(default), |s| parse_sequence("sigma", s))
    };
    let model = match family {
        "identity" => CovarianceModel::Identity,
        "hilbert" => CovarianceModel::Hilbert,
        "diagonal" => CovarianceModel::Diagonal(seq(SequenceSpec::ones())?),
        "rank_one" => CovarianceModel::RankOne(seq(SequenceSpec::ones())?),
        "band" => match &params.template {
            Some(t) => CovarianceModel::Band {
                template: parse_list("template", t)?,
            },
            None => {
                let m = non_negative("bandwidth", params.bandwidth, 3)?;
                if m == 0 {
                    return invalid("bandwidth must be at least 1".into());
                }
                CovarianceModel::band_default(m)
            }
        },
        "toeplitz_geometric" => CovarianceModel::ToeplitzGeometric {
            sigma2: params.sigma2.unwrap_or(1.0),
            c: params.c.unwrap_or(0.5),
        },
        "triangular_factor" => CovarianceModel::TriangularFactor(FactorRule::Geometric {
            scale: params.scale.unwrap_or(1.0),
            ratio: params.ratio.unwrap_or(0.5),
        }),
        other => return invalid(format!("family: unknown covariance family {other:?}")),
    };
    model
        .validate()
        .map_err(|e| Validation(format!("family {family}: {e}")))?;
    Ok(model)
}

/// Stream reserved for `--f random` so it never collides with trial streams.
const RANDOM_SERIES_STREAM: u64 = 1 << 63;

pub fn parse_series(params: &Params) -> anyhow::Result<CoefficientSeries> {
    if let Some(c) = &params.coeffs {
        return Ok(CoefficientSeries::from_real(&parse_list("coeffs", c)?)?);
    }
    let spec = params.f.as_deref().unwrap_or("boundary");
    series_for_degree(spec, params, params.degree_or(16)?)
}

/// Builds the series `spec` at the given degree; specs with an intrinsic
/// degree (`single`, `coeffs`, `file`, `dyadic`) ignore it.
pub fn series_for_degree(spec: &str, params: &Params, degree: usize) -> anyhow::Result<CoefficientSeries> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match head {
        "single" => {
            let n = rest
                .parse()
                .map_err(|_| Validation(format!("f: single:n needs an index, got {rest:?}")))?;
            CoefficientSeries::monomial(n)
        }
        "boundary" => make_boundary_example(degree),
        "random" => CoefficientSeries::from_real(&gaussian_stream(
            SeedSpec::new(params.seed()?, RANDOM_SERIES_STREAM),
            degree + 1,
        ))?,
        "dyadic" => dyadic(rest)?.series,
        "coeffs" => CoefficientSeries::from_real(&parse_list("f", rest)?)?,
        "file" => read_series(Path::new(rest))?,
        _ => return invalid(format!("f: unknown series spec {spec:?}")),
    })
}

/// Support `2^k`, `k < count`, amplitudes `2^{-k/2}`.
fn dyadic(rest: &str) -> anyhow::Result<LacunarySeries> {
    let count: u32 = rest
        .parse()
        .map_err(|_| Validation(format!("f: dyadic:k needs a count, got {rest:?}")))?;
    if count == 0 || count > 30 {
        return invalid(format!("f: dyadic count must be in 1..=30, got {count}"));
    }
    let support: Vec<usize> = (0..count).map(|k| 1usize << k).collect();
    let amps: Vec<f64> = (0..count).map(|k| 2f64.powf(-0.5 * f64::from(k))).collect();
    Ok(make_lacunary(&support, &amps)?)
}

fn read_series(path: &Path) -> anyhow::Result<CoefficientSeries> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(CoefficientSeries::from_json(&text)?)
    } else {
        let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(CoefficientSeries::read_csv(file)?)
    }
}

/// The nonzero support of a real series, as a lacunary candidate.
pub fn as_lacunary(f: &CoefficientSeries) -> anyhow::Result<LacunarySeries> {
    if f.coeffs().iter().any(|c| c.im != 0.0) {
        bail!(Validation("lacunary check needs real coefficients".into()));
    }
    let (support, amps): (Vec<usize>, Vec<f64>) = f
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.re != 0.0)
        .map(|(n, c)| (n, c.re))
        .unzip();
    if support.is_empty() {
        return Ok(make_lacunary(&[0], &[0.0])?);
    }
    Ok(make_lacunary(&support, &amps)?)
}
