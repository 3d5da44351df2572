//! Bound reports and their CSV/JSON encodings.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gp::SeedSpec;

/// Width of the Monte Carlo acceptance band, in standard errors.
pub const SIGMA_MARGIN: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `estimate + 4σ <= bound`.
    Upper,
    /// `estimate - 4σ >= bound`.
    Lower,
    /// `|estimate - bound| <= 4σ`.
    Equal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub bound_name: String,
    pub kind: BoundKind,
    pub estimate: f64,
    pub stderr: f64,
    pub bound_value: f64,
    pub satisfied: bool,
    /// Slack in the satisfied direction; negative when violated.
    pub margin: f64,
    pub p: f64,
    pub q: f64,
    pub trials: usize,
    pub grid_size: usize,
    pub seed: SeedSpec,
}

/// Everything in a report except the verdict, which [`ReportContext::report`] derives.
#[derive(Clone, Copy, Debug)]
pub struct ReportContext {
    pub p: f64,
    pub q: f64,
    pub trials: usize,
    pub grid_size: usize,
    pub seed: SeedSpec,
}

impl ReportContext {
    pub fn deterministic(p: f64) -> Self {
        Self {
            p,
            q: 0.0,
            trials: 0,
            grid_size: 0,
            seed: SeedSpec::default(),
        }
    }

    pub fn report(
        &self,
        name: &str,
        kind: BoundKind,
        estimate: f64,
        stderr: f64,
        bound_value: f64,
    ) -> BoundReport {
        let band = SIGMA_MARGIN * stderr;
        let margin = match kind {
            BoundKind::Upper => bound_value - (estimate + band),
            BoundKind::Lower => (estimate - band) - bound_value,
            BoundKind::Equal => band - (estimate - bound_value).abs(),
        };
        BoundReport {
            bound_name: name.to_string(),
            kind,
            estimate,
            stderr,
            bound_value,
            satisfied: margin >= 0.0,
            margin,
            p: self.p,
            q: self.q,
            trials: self.trials,
            grid_size: self.grid_size,
            seed: self.seed,
        }
    }
}

/// `%.9g`-style rendering: nine significant digits, trailing zeros trimmed.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Serialize, Deserialize)]
struct ReportRecord {
    bound_name: String,
    estimate: f64,
    stderr: f64,
    bound_value: f64,
    satisfied: bool,
    margin: f64,
    p: f64,
    q: f64,
    #[serde(rename = "T")]
    trials: usize,
    #[serde(rename = "M")]
    grid_size: usize,
    seed: String,
}

impl From<&BoundReport> for ReportRecord {
    fn from(r: &BoundReport) -> Self {
        Self {
            bound_name: r.bound_name.clone(),
            estimate: r.estimate,
            stderr: r.stderr,
            bound_value: r.bound_value,
            satisfied: r.satisfied,
            margin: r.margin,
            p: r.p,
            q: r.q,
            trials: r.trials,
            grid_size: r.grid_size,
            seed: r.seed.to_string(),
        }
    }
}

pub const REPORT_COLUMNS: &str = "bound_name,estimate,stderr,bound_value,satisfied,margin,p,q,T,M,seed";

/// One row per report, floats at nine significant digits.
pub fn write_reports_csv<W: Write>(mut w: W, reports: &[BoundReport]) -> Result<()> {
    writeln!(w, "# schema=1")?;
    writeln!(w, "{REPORT_COLUMNS}")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.bound_name,
            format_sig(r.estimate),
            format_sig(r.stderr),
            format_sig(r.bound_value),
            r.satisfied,
            format_sig(r.margin),
            format_sig(r.p),
            format_sig(r.q),
            r.trials,
            r.grid_size,
            r.seed
        )?;
    }
    Ok(())
}

/// JSON array mirroring the CSV columns at full precision.
pub fn reports_to_json(reports: &[BoundReport]) -> Result<String> {
    let records: Vec<ReportRecord> = reports.iter().map(ReportRecord::from).collect();
    Ok(serde_json::to_string_pretty(&records)?)
}

/// One-line human summary.
pub fn summary_line(r: &BoundReport) -> String {
    let rel = match r.kind {
        BoundKind::Upper => "<=",
        BoundKind::Lower => ">=",
        BoundKind::Equal => "==",
    };
    format!(
        "{} {}: {} ± {} {} {} (margin {})",
        if r.satisfied { "PASS" } else { "FAIL" },
        r.bound_name,
        format_sig(r.estimate),
        format_sig(r.stderr),
        rel,
        format_sig(r.bound_value),
        format_sig(r.margin)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(6f64.powf(0.25)), "1.56508458");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(0.5), "0.5");
        assert_eq!(format_sig(-25.0 / 12.0), "-2.08333333");
        assert_eq!(format_sig(1.23456789e-7), "1.23456789e-7");
        assert_eq!(format_sig(123456789012.0), "1.23456789e11");
        assert_eq!(format_sig(100.0), "100");
        assert_eq!(format_sig(f64::INFINITY), "inf");
    }

    #[test]
    fn verdicts() {
        let ctx = ReportContext::deterministic(2.0);
        assert!(ctx.report("u", BoundKind::Upper, 1.0, 0.1, 1.4).satisfied);
        assert!(!ctx.report("u", BoundKind::Upper, 1.0, 0.1, 1.39).satisfied);
        assert!(ctx.report("l", BoundKind::Lower, 1.0, 0.1, 0.6).satisfied);
        assert!(!ctx.report("l", BoundKind::Lower, 1.0, 0.1, 0.61).satisfied);
        let e = ctx.report("e", BoundKind::Equal, 1.0, 0.1, 1.3);
        assert!(e.satisfied);
        assert!((e.margin - 0.1).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let ctx = ReportContext {
            p: 1.5,
            q: 2.0,
            trials: 100,
            grid_size: 64,
            seed: SeedSpec::new(7, 0),
        };
        let r = ctx.report("upper_bes", BoundKind::Upper, 1.0 / 3.0, 0.01, 2.0);
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, std::slice::from_ref(&r)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# schema=1");
        assert_eq!(lines[1], REPORT_COLUMNS);
        assert_eq!(lines[2], "upper_bes,0.333333333,0.01,2,true,1.62666667,1.5,2,100,64,7:0");
        let json: serde_json::Value = serde_json::from_str(&reports_to_json(&[r]).unwrap()).unwrap();
        assert_eq!(json[0]["estimate"], serde_json::json!(1.0 / 3.0));
        assert_eq!(json[0]["T"], serde_json::json!(100));
    }
}
