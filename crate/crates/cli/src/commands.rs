use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use gausslit::acceptance::{render_artifacts, run_criterion, run_suite_with, write_artifacts};
use gausslit::covops::{
    op_norm_power_iter, schur_bound, schur_limit, truncate, DEFAULT_POWER_MAX_ITER, DEFAULT_POWER_TOL,
};
use gausslit::gp::{sample_process, ProcessSampler, SeedSpec};
use gausslit::hardy::{default_grid_size, hp_norm, hp_norm_grid, CoefficientSeries};
use gausslit::littlewood::{estimate_mixed_norm_with, exp_integral_estimate, improvement_sweep, verify_bounds};
use gausslit::multipliers::{
    duren_check, lacunary_hp_criterion, linf_check, necessary_decay_diagnostic, wiener_check,
};
use gausslit::report::{format_sig as sig, reports_to_json, summary_line, write_reports_csv, BoundReport};
use serde::Serialize;
use serde_json::json;

use crate::args::{non_negative, Params};
use crate::specs::{as_lacunary, parse_model, parse_sequence, parse_usize_list, series_for_degree, parse_series};
use crate::{Command, Validation};

pub fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Norm(p) => norm(p.resolve()?),
        Command::Covnorm(p) => covnorm(p.resolve()?),
        Command::Sample(p) => sample(p.resolve()?),
        Command::Estimate(p) => estimate(p.resolve()?),
        Command::Verify(p) => verify(p.resolve()?),
        Command::Expint(p) => expint(p.resolve()?),
        Command::Sweep(p) => sweep(p.resolve()?),
        Command::Diag(p) => diag(p.resolve()?),
        Command::Selftest(p) => selftest(p.resolve()?),
    }
    .map(|()| ExitCode::SUCCESS)
    .or_else(|e| match e.downcast::<SelftestFailed>() {
        Ok(_) => Ok(ExitCode::from(1)),
        Err(e) => Err(e),
    })
}

#[derive(Debug)]
struct SelftestFailed;

impl std::fmt::Display for SelftestFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("selftest failed")
    }
}

impl std::error::Error for SelftestFailed {}

/// Artifact sink: nothing is written unless `--out` was given.
struct Out(Option<PathBuf>);

impl Out {
    fn new(params: &Params) -> anyhow::Result<Self> {
        if let Some(dir) = &params.out {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(Out(params.out.clone()))
    }

    fn write(&self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        if let Some(dir) = &self.0 {
            let path = dir.join(name);
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn table(&self, name: &str, header: &str, rows: &[Vec<String>]) -> anyhow::Result<()> {
        let mut s = format!("# schema=1\n{header}\n");
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.write(name, s.as_bytes())
    }

    fn reports(&self, stem: &str, reports: &[BoundReport]) -> anyhow::Result<()> {
        let mut csv = Vec::new();
        write_reports_csv(&mut csv, reports)?;
        self.write(&format!("{stem}.csv"), &csv)?;
        let mut text = reports_to_json(reports)?;
        text.push('\n');
        self.write(&format!("{stem}.json"), text.as_bytes())
    }
}

fn seed_spec(params: &Params) -> anyhow::Result<SeedSpec> {
    Ok(SeedSpec::new(params.seed()?, params.stream.unwrap_or(0)))
}

fn norm(params: Params) -> anyhow::Result<()> {
    let f = parse_series(&params)?;
    let p = params.p_or(2.0)?;
    let r = match params.grid()? {
        Some(m) => hp_norm_grid(&f, p, m)?,
        None => hp_norm(&f, p)?,
    };
    println!(
        "norm p={} N={} M={} exact={}: {}",
        sig(p),
        f.degree(),
        r.grid_size,
        r.exact,
        sig(r.value)
    );
    let out = Out::new(&params)?;
    out.table(
        "norm.csv",
        "p,degree,M,exact,value",
        &[vec![sig(p), f.degree().to_string(), r.grid_size.to_string(), r.exact.to_string(), sig(r.value)]],
    )?;
    out.json("norm.json", &json!({ "degree": f.degree(), "result": r }))
}

fn covnorm(params: Params) -> anyhow::Result<()> {
    let model = parse_model(&params)?;
    let n = params.degree_or(16)?;
    let tol = params.tol.unwrap_or(DEFAULT_POWER_TOL);
    if tol.is_nan() || tol <= 0.0 {
        return Err(Validation(format!("tol must be positive, got {tol}")).into());
    }
    let max_iter = non_negative("max_iter", params.max_iter, DEFAULT_POWER_MAX_ITER)?;
    let t = truncate(&model, n)?;
    let r = op_norm_power_iter(&t, tol, max_iter)?;
    let schur = schur_bound(&model, n);
    let limit = schur_limit(&model);
    println!(
        "covnorm {model} N={n}: {} (iterations {}, residual {}{})",
        sig(r.norm),
        r.iterations,
        sig(r.residual),
        if r.restarted { ", restarted" } else { "" }
    );
    match limit {
        Some(l) => println!("schur bound {} (limit {})", sig(schur), sig(l)),
        None => println!("schur bound {}", sig(schur)),
    }
    let out = Out::new(&params)?;
    if out.0.is_some() {
        let mut m = Vec::new();
        t.write_csv(&mut m)?;
        out.write("matrix.csv", &m)?;
    }
    out.table(
        "covnorm.csv",
        "model,degree,norm,iterations,residual,schur_bound",
        &[vec![
            format!("\"{model}\""),
            n.to_string(),
            sig(r.norm),
            r.iterations.to_string(),
            sig(r.residual),
            sig(schur),
        ]],
    )?;
    out.json(
        "covnorm.json",
        &json!({
            "model": model.to_string(),
            "degree": n,
            "norm": r.norm,
            "eigenvalue": r.eigenvalue,
            "iterations": r.iterations,
            "residual": r.residual,
            "restarted": r.restarted,
            "schur_bound": schur,
            "schur_limit": limit,
        }),
    )
}

fn sample(params: Params) -> anyhow::Result<()> {
    let model = parse_model(&params)?;
    let n = params.degree_or(16)?;
    let seed = seed_spec(&params)?;
    let mean = params
        .mean
        .as_deref()
        .map(|s| parse_sequence("mean", s)?.prefix(n + 1).map_err(anyhow::Error::from))
        .transpose()?;
    let s = sample_process(&model, n, seed, mean.as_deref())?;
    let mut csv = Vec::new();
    s.write_csv(&mut csv)?;
    if params.out.is_none() {
        std::io::stdout().write_all(&csv)?;
        return Ok(());
    }
    let out = Out::new(&params)?;
    out.write("sample.csv", &csv)?;
    let (lo, hi) = s
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    println!(
        "sample {model} N={n} seed={seed}: X_0={} min={} max={}",
        sig(s.values[0]),
        sig(lo),
        sig(hi)
    );
    Ok(())
}

fn sampler_and_grid(params: &Params, f: &CoefficientSeries) -> anyhow::Result<(ProcessSampler, usize)> {
    let model = parse_model(params)?;
    let grid = params.grid()?.unwrap_or_else(|| default_grid_size(f.degree()));
    Ok((ProcessSampler::new(&model, f.degree())?, grid))
}

fn estimate(params: Params) -> anyhow::Result<()> {
    let f = parse_series(&params)?;
    let p = params.p_or(2.0)?;
    let q = params.q_or(2.0)?;
    let trials = params.trials_or(1000)?;
    let seed = seed_spec(&params)?;
    let (sampler, grid) = sampler_and_grid(&params, &f)?;
    let e = estimate_mixed_norm_with(&f, &sampler, p, q, trials, grid, seed)?;
    println!(
        "estimate p={} q={} T={trials} M={grid}: mean {} stderr {} (moment {} stderr {}){}",
        sig(p),
        sig(q),
        sig(e.mean),
        sig(e.stderr),
        sig(e.moment),
        sig(e.moment_stderr),
        if e.quasi_norm { " [p < 1: quasi-norm]" } else { "" }
    );
    let out = Out::new(&params)?;
    out.table(
        "estimate.csv",
        "p,q,T,M,seed,moment,moment_stderr,mean,stderr",
        &[vec![
            sig(p),
            sig(q),
            trials.to_string(),
            grid.to_string(),
            seed.to_string(),
            sig(e.moment),
            sig(e.moment_stderr),
            sig(e.mean),
            sig(e.stderr),
        ]],
    )?;
    out.json("estimate.json", &e)
}

fn verify(params: Params) -> anyhow::Result<()> {
    let f = parse_series(&params)?;
    let model = parse_model(&params)?;
    let p = params.p_or(2.0)?;
    let trials = params.trials_or(1000)?;
    let reports = verify_bounds(&f, &model, p, trials, seed_spec(&params)?)?;
    if reports.is_empty() {
        println!("p={} < 1: the estimate runs but no bound applies", sig(p));
    }
    for r in &reports {
        println!("{}", summary_line(r));
    }
    Out::new(&params)?.reports("reports", &reports)
}

fn expint(params: Params) -> anyhow::Result<()> {
    let f = parse_series(&params)?;
    let model = parse_model(&params)?;
    let lambda = params
        .lambda
        .ok_or_else(|| Validation("lambda is required for expint".into()))?;
    let trials = params.trials_or(1000)?;
    let grid = params.grid()?.unwrap_or_else(|| default_grid_size(f.degree()));
    let e = exp_integral_estimate(&f, &model, lambda, trials, grid, seed_spec(&params)?)?;
    println!(
        "expint lambda={} T={trials} M={grid}: mean {} stderr {}; threshold {}; tail index {}; blow_up {}",
        sig(lambda),
        sig(e.mean),
        sig(e.stderr),
        sig(e.threshold),
        sig(e.tail_index),
        e.blow_up
    );
    let out = Out::new(&params)?;
    out.table(
        "expint.csv",
        "lambda,T,M,mean,stderr,threshold,half_mean,tail_index,overflowed,blow_up",
        &[vec![
            sig(lambda),
            trials.to_string(),
            grid.to_string(),
            sig(e.mean),
            sig(e.stderr),
            sig(e.threshold),
            sig(e.half_mean),
            sig(e.tail_index),
            e.overflowed_trials.to_string(),
            e.blow_up.to_string(),
        ]],
    )?;
    out.json("expint.json", &e)
}

fn sweep(params: Params) -> anyhow::Result<()> {
    let model = parse_model(&params)?;
    let p = params.p_or(6.0)?;
    let trials = params.trials_or(200)?;
    let degrees = parse_usize_list("degrees", params.degrees.as_deref().unwrap_or("256,1024,4096"))?;
    let spec = params.f.as_deref().unwrap_or("boundary");
    let family: Vec<(usize, CoefficientSeries)> = degrees
        .iter()
        .map(|&n| Ok((n, series_for_degree(spec, &params, n)?)))
        .collect::<anyhow::Result<_>>()?;
    let lookup = |n: usize| {
        family
            .iter()
            .find(|(d, _)| *d == n)
            .map(|(_, f)| f.clone())
            .expect("degree was prepared")
    };
    let rows = improvement_sweep(lookup, &model, p, &degrees, trials, seed_spec(&params)?)?;
    println!("sweep p={} T={trials} model={model}", sig(p));
    for r in &rows {
        println!(
            "  N={:<6} M={:<7} deterministic {}  randomized median {}",
            r.degree,
            r.grid_size,
            sig(r.deterministic),
            sig(r.randomized_median)
        );
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.degree.to_string(),
                r.grid_size.to_string(),
                sig(r.deterministic),
                sig(r.randomized_median),
            ]
        })
        .collect();
    let out = Out::new(&params)?;
    out.table("sweep.csv", "degree,M,deterministic,randomized_median", &table)?;
    out.json("sweep.json", &rows)
}

fn diag(params: Params) -> anyhow::Result<()> {
    let check = params
        .check
        .as_deref()
        .ok_or_else(|| Validation("check is required: linf, duren, decay, wiener or lacunary".into()))?;
    let out = Out::new(&params)?;
    let seq = |default: &str| parse_sequence("seq", params.seq.as_deref().unwrap_or(default));
    match check {
        "linf" => {
            let n = params.degree_or(1024)?;
            let g = linf_check(&seq("ones")?, n)?;
            println!(
                "linf N={n}: {} (at 2N: {}) {}",
                sig(g.value),
                sig(g.doubled),
                if g.stable { "bounded" } else { "growing" }
            );
            out.reports("diag", &[g.to_report("linf_doubling", 2.0)])?;
            out.json("diag.json", &g)
        }
        "duren" => {
            let n = params.degree_or(1024)?;
            let p = params.p_or(4.0)?;
            let g = duren_check(&seq("inv_sqrt")?, p, n)?;
            println!(
                "duren p={} N={n}: {} (at 2N: {}) {}",
                sig(p),
                sig(g.value),
                sig(g.doubled),
                if g.stable { "bounded" } else { "growing" }
            );
            out.reports("diag", &[g.to_report("duren_doubling", p)])?;
            out.json("diag.json", &g)
        }
        "decay" => {
            let model = parse_model(&params)?;
            let n = params.degree_or(1024)?;
            let m = non_negative("column", params.column, 0)?;
            let eps = params.epsilon.unwrap_or(0.25);
            let d = necessary_decay_diagnostic(&model, m, eps, params.p_or(2.0)?, n)?;
            println!(
                "decay {model} m={m} eps={} N={n}: applicable {} decaying {} (worst window ratio {}); series {} -> {} converged {}",
                sig(eps),
                d.applicable,
                d.decaying,
                sig(d.worst_ratio),
                sig(d.series_half),
                sig(d.series_full),
                d.series_converged
            );
            out.reports("diag", &[d.to_report()])?;
            out.json("diag.json", &d)
        }
        "wiener" => {
            let model = parse_model(&params)?;
            let n = params.degree_or(64)?;
            let lambda = seq("inv_sqrt")?.prefix(n + 1)?;
            let f = series_for_degree(params.f.as_deref().unwrap_or("random"), &params, n)?;
            let mut a: Vec<f64> = f.coeffs().iter().map(|c| c.re).collect();
            a.resize(n + 1, 0.0);
            let w = wiener_check(&model, &lambda, &a, n)?;
            println!(
                "wiener {model} N={n}: sum |(K lambda)_n a_n| = {}; ||K lambda|| {} <= {} * {}: {}",
                sig(w.weighted_sum),
                sig(w.row_l2),
                sig(w.op_norm),
                sig(w.lambda_l2),
                w.l2_holds
            );
            out.reports("diag", &[w.to_report()])?;
            out.json("diag.json", &w)
        }
        "lacunary" => {
            let model = parse_model(&params)?;
            let f = as_lacunary(&series_for_degree(params.f.as_deref().unwrap_or("dyadic:8"), &params, 0)?)?;
            let trials = params.trials_or(1000)?;
            let r = lacunary_hp_criterion(&f, &model, trials, seed_spec(&params)?)?;
            let reports = r.to_reports();
            println!(
                "lacunary gap ratio {}: mean {} stderr {}",
                sig(f.gap_ratio),
                sig(r.mean),
                sig(r.stderr)
            );
            for rep in &reports {
                println!("{}", summary_line(rep));
            }
            out.reports("diag", &reports)?;
            out.json("diag.json", &r)
        }
        other => Err(Validation(format!(
            "check: unknown diagnostic {other:?} (linf, duren, decay, wiener, lacunary)"
        ))
        .into()),
    }
}

fn selftest(params: Params) -> anyhow::Result<()> {
    let seed = params.seed()?;
    let outcomes = match &params.only {
        None => run_suite_with(seed, |o| println!("{}", o.line())),
        Some(list) => parse_usize_list("only", list)?
            .into_iter()
            .map(|id| {
                let o = run_criterion(id as u32, seed);
                println!("{}", o.line());
                o
            })
            .collect(),
    };
    if let Some(dir) = &params.out {
        write_artifacts(dir, &render_artifacts(&outcomes, seed))
            .with_context(|| format!("writing artifacts to {}", dir.display()))?;
    }
    let passed = outcomes.iter().filter(|o| o.passed()).count();
    println!("selftest seed {seed}: {passed}/{} criteria passed", outcomes.len());
    if passed == outcomes.len() {
        Ok(())
    } else {
        Err(SelftestFailed.into())
    }
}
