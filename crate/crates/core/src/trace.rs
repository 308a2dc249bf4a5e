//! Per-iteration trial records and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "k,alpha,AE,CE,sumsq_v_err,max_R_norm,bound_env_1,bound_env_2,scenario_counts,condition1_flag";

/// State after `k` steps together with diagnostics of step `k-1 -> k`.
/// Record 0 is the initial state and carries `alpha = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub k: usize,
    pub alpha: f64,
    pub ae: f64,
    pub ce: f64,
    /// `sum_i ||v_i(k) - x*||^2`.
    pub sumsq_v_err: f64,
    pub max_r_norm: f64,
    pub bound_env_1: Option<f64>,
    pub bound_env_2: Option<f64>,
    /// Servers that were disconnected / exact / ignoring / using stale gradients.
    pub scenario_counts: [usize; 4],
    pub condition1: bool,
    pub division2: bool,
    /// `max_{window, q} ||v_q - x*||` used by the residual bound.
    pub window_err: f64,
    pub bound_rhs: f64,
    pub min_slack: f64,
    pub violations: usize,
    /// Violations of the bound without the subpartition-minimizer term.
    pub tight_violations: usize,
    pub identity_gap: f64,
    pub max_age: usize,
    pub stragglers: usize,
    /// Partition drawn by each server, 0 for none and `i+1` for partition `i`.
    pub partitions: Vec<i64>,
}

impl Record {
    pub fn initial(k: usize) -> Self {
        Self {
            k,
            alpha: 0.0,
            ae: 0.0,
            ce: 0.0,
            sumsq_v_err: 0.0,
            max_r_norm: 0.0,
            bound_env_1: None,
            bound_env_2: None,
            scenario_counts: [0; 4],
            condition1: true,
            division2: false,
            window_err: 0.0,
            bound_rhs: 0.0,
            min_slack: f64::INFINITY,
            violations: 0,
            tight_violations: 0,
            identity_gap: 0.0,
            max_age: 0,
            stragglers: 0,
            partitions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    pub label: String,
    pub seed: u64,
    pub records: Vec<Record>,
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

impl TrialTrace {
    pub fn new(label: &str, seed: u64) -> Self {
        Self {
            label: label.to_string(),
            seed,
            records: Vec::new(),
        }
    }

    /// Number of steps executed.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_ae(&self) -> f64 {
        self.records.last().map(|r| r.ae).unwrap_or(f64::NAN)
    }

    pub fn total_violations(&self) -> usize {
        self.records.iter().map(|r| r.violations).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 96);
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let c = r.scenario_counts;
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}/{}/{}/{},{}",
                r.k,
                fmt_f64(r.alpha),
                fmt_f64(r.ae),
                fmt_f64(r.ce),
                fmt_f64(r.sumsq_v_err),
                fmt_f64(r.max_r_norm),
                fmt_opt(r.bound_env_1),
                fmt_opt(r.bound_env_2),
                c[0],
                c[1],
                c[2],
                c[3],
                u8::from(r.condition1)
            )
            .unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// One parsed row of a trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub k: usize,
    pub alpha: f64,
    pub ae: f64,
    pub ce: f64,
    pub sumsq_v_err: f64,
    pub max_r_norm: f64,
    pub bound_env_1: Option<f64>,
    pub bound_env_2: Option<f64>,
    pub scenario_counts: [usize; 4],
    pub condition1: bool,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        location: format!("line {line}"),
        message: message.into(),
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        Some((_, h)) => return Err(parse_err(1, format!("unexpected header {h:?}"))),
        None => return Err(parse_err(1, "empty trace file")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let ln = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 10 {
            return Err(parse_err(ln, format!("expected 10 fields, found {}", f.len())));
        }
        let num = |s: &str, name: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| parse_err(ln, format!("{name}: cannot parse {s:?}")))
        };
        let opt = |s: &str, name: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, name).map(Some)
            }
        };
        let counts: Vec<usize> = f[8]
            .split('/')
            .map(|c| c.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(ln, format!("scenario_counts: cannot parse {:?}", f[8])))?;
        if counts.len() != 4 {
            return Err(parse_err(ln, "scenario_counts needs four entries"));
        }
        rows.push(CsvRow {
            k: f[0]
                .parse()
                .map_err(|_| parse_err(ln, format!("k: cannot parse {:?}", f[0])))?,
            alpha: num(f[1], "alpha")?,
            ae: num(f[2], "AE")?,
            ce: num(f[3], "CE")?,
            sumsq_v_err: num(f[4], "sumsq_v_err")?,
            max_r_norm: num(f[5], "max_R_norm")?,
            bound_env_1: opt(f[6], "bound_env_1")?,
            bound_env_2: opt(f[7], "bound_env_2")?,
            scenario_counts: [counts[0], counts[1], counts[2], counts[3]],
            condition1: match f[9] {
                "1" => true,
                "0" => false,
                other => return Err(parse_err(ln, format!("condition1_flag: {other:?}"))),
            },
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text).map_err(|e| match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}:{location}", path.display()),
            message,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_values() {
        let mut t = TrialTrace::new("srdo", 1);
        let mut r = Record::initial(0);
        r.ae = 1.0;
        t.records.push(r.clone());
        r.k = 1;
        r.alpha = 0.1 + 0.2;
        r.ae = 1e-300;
        r.ce = 0.5;
        r.bound_env_1 = Some(2.5e10);
        r.scenario_counts = [1, 2, 0, 3];
        r.condition1 = false;
        t.records.push(r.clone());
        let text = t.to_csv();
        assert!(text.starts_with(CSV_HEADER));
        let rows = parse_csv(&text).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].alpha.to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(rows[1].ae, 1e-300);
        assert_eq!(rows[1].bound_env_1, Some(2.5e10));
        assert_eq!(rows[1].bound_env_2, None);
        assert_eq!(rows[1].scenario_counts, [1, 2, 0, 3]);
        assert!(!rows[1].condition1);
        assert!(rows[0].condition1);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(parse_csv("k,alpha\n0,0\n").is_err());
        assert!(parse_csv("").is_err());
    }
}
