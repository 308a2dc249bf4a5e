//! Multi-trial experiments: per-trial instances, baselines, aggregation and
//! the output directory layout.
//!
//! ```text
//! <out>/srdo_trial_0000.csv          per-trial SRDO trace
//! <out>/<baseline>_trial_0000.csv    per-trial baseline traces
//! <out>/aggregate.csv                k,series,metric,mean,median,q1,q3
//! <out>/manifest.json                config, hash, seeds, per-trial constants
//! ```

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{self, AuditConstants, Envelope, RateInputs};
use crate::codec::CodingScheme;
use crate::config::ExperimentConfig;
use crate::engine::{self, EngineParams, TrialContext};
use crate::problem::generate_least_squares_scaled;
use crate::topology::build_weight_matrix;
use crate::trace::{fmt_f64, TrialTrace};
use crate::{rng, Error, Result};

/// Problem, codes and weights of trial `trial`, all derived from its seed.
pub fn build_context(cfg: &ExperimentConfig, trial_seed: u64) -> Result<TrialContext<f64>> {
    let problem = generate_least_squares_scaled::<f64>(
        cfg.n,
        cfg.m_bar,
        cfg.p,
        cfg.n_r,
        rng::derive_seed(trial_seed, 0, rng::PROBLEM),
        cfg.g_scale(),
    )?;
    let schemes = (0..cfg.p)
        .map(|i| {
            CodingScheme::cyclic(cfg.n_r, cfg.s, rng::derive_seed(trial_seed, i as u64, rng::ENCODER))
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = build_weight_matrix(&cfg.adjacency()?, cfg.mu)?;
    TrialContext::new(problem, schemes, weights)
}

pub fn rate_inputs(
    cfg: &ExperimentConfig,
    params: &EngineParams,
    ctx: &TrialContext<f64>,
    trace: &TrialTrace,
) -> Result<RateInputs> {
    let index_set_size = cfg
        .index_set_size
        .unwrap_or_else(|| trace.records.iter().filter(|r| r.division2).count());
    Ok(RateInputs {
        lipschitz: ctx.lipschitz,
        coding_norm: ctx.coding_norm,
        mu: cfg.mu,
        gamma0: cfg.gamma0,
        gamma_max: params.gamma.iter().copied().fold(0.0, f64::max),
        p: cfg.p,
        n_servers: cfg.n_servers(),
        delay_bound: cfg.delay_bound,
        schedule: cfg.schedule,
        partition_gap: ctx.problem.partition_minimizer_gap(&ctx.x_star)?,
        minimizer_gap: ctx.minimizer_gap,
        index_set_size,
    })
}

pub fn describe_envelope(e: &Envelope) -> String {
    match e {
        Envelope::Vacuous { reason } => format!("vacuous: {reason}"),
        Envelope::Active { base, kbar, bound } => format!(
            "active: base={}, kbar={kbar}, V0={}, eta={}",
            fmt_f64(*base),
            fmt_f64(bound.v0),
            fmt_f64(bound.eta)
        ),
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub index: usize,
    pub seed: u64,
    pub srdo: TrialTrace,
    pub baselines: Vec<TrialTrace>,
    pub constants: AuditConstants,
    pub envelopes: (Envelope, Envelope),
}

/// Runs trial `index` and its baselines.
pub fn run_single(cfg: &ExperimentConfig, index: usize) -> Result<(TrialResult, TrialContext<f64>)> {
    let params = cfg.engine_params()?;
    params.validate(cfg.p)?;
    let seed = rng::trial_seed(cfg.seed, index as u64);
    let ctx = build_context(cfg, seed)?;
    let mut srdo = engine::run_trial(&ctx, &params, seed, cfg.iters);
    let inputs = rate_inputs(cfg, &params, &ctx, &srdo)?;
    let envelopes = analysis::attach_envelopes(&mut srdo, &inputs);
    let baselines = cfg
        .baselines
        .iter()
        .map(|&m| engine::run_centralized_baseline(&ctx, &params, m, seed, cfg.iters))
        .collect();
    Ok((
        TrialResult {
            index,
            seed,
            srdo,
            baselines,
            constants: AuditConstants::from_context(&ctx, cfg.delay_bound),
            envelopes,
        },
        ctx,
    ))
}

/// Runs all trials on a pool of `cfg.workers` threads (0 = available
/// parallelism). Results are ordered by trial index regardless of scheduling.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_single(cfg, t).map(|(r, _)| r))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Summary {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(values: &[f64]) -> Summary {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Summary {
        mean: v.iter().sum::<f64>() / v.len() as f64,
        median: quantile(&v, 0.5),
        q1: quantile(&v, 0.25),
        q3: quantile(&v, 0.75),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub k: usize,
    pub ae: Summary,
    pub ce: Summary,
}

/// Per-iteration AE / CE statistics across trials of equal length.
pub fn aggregate(traces: &[&TrialTrace]) -> Result<Vec<AggregateRow>> {
    let Some(first) = traces.first() else {
        return Err(Error::InvalidArgument("no traces to aggregate".into()));
    };
    let len = first.records.len();
    if let Some(t) = traces.iter().find(|t| t.records.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            found: t.records.len(),
        });
    }
    Ok((0..len)
        .map(|k| {
            let ae: Vec<f64> = traces.iter().map(|t| t.records[k].ae).collect();
            let ce: Vec<f64> = traces.iter().map(|t| t.records[k].ce).collect();
            AggregateRow {
                k: first.records[k].k,
                ae: summarize(&ae),
                ce: summarize(&ce),
            }
        })
        .collect())
}

pub const AGGREGATE_HEADER: &str = "k,series,metric,mean,median,q1,q3";

fn aggregate_lines(out: &mut String, series: &str, rows: &[AggregateRow]) {
    for r in rows {
        for (metric, s) in [("AE", &r.ae), ("CE", &r.ce)] {
            out.push_str(&format!(
                "{},{series},{metric},{},{},{},{}\n",
                r.k,
                fmt_f64(s.mean),
                fmt_f64(s.median),
                fmt_f64(s.q1),
                fmt_f64(s.q3)
            ));
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialEntry {
    pub index: usize,
    pub seed: u64,
    pub files: Vec<String>,
    pub trace: String,
    pub lipschitz: f64,
    pub coding_norm: f64,
    pub minimizer_gap: f64,
    pub delay_bound: usize,
    pub iterations: usize,
    pub final_ae: f64,
    pub residual_violations: usize,
    pub envelope_1: String,
    pub envelope_2: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub rng: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub config: std::collections::BTreeMap<String, String>,
    pub warnings: Vec<String>,
    pub trials: Vec<TrialEntry>,
    pub aggregate: String,
}

pub const MANIFEST: &str = "manifest.json";
pub const AGGREGATE: &str = "aggregate.csv";

pub fn trace_file_name(label: &str, index: usize) -> String {
    format!("{label}_trial_{index:04}.csv")
}

/// Everything written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ArtifactSet {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub trials: Vec<TrialResult>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs every trial and writes traces, aggregates and the manifest to
/// `cfg.out`. Output bytes depend only on the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ArtifactSet> {
    let trials = run_trials(cfg)?;
    let out = cfg.out.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let mut entries = Vec::new();
    for t in &trials {
        let mut files = Vec::new();
        for tr in std::iter::once(&t.srdo).chain(&t.baselines) {
            let name = trace_file_name(&tr.label, t.index);
            tr.write_csv(&out.join(&name))?;
            files.push(name);
        }
        entries.push(TrialEntry {
            index: t.index,
            seed: t.seed,
            trace: files[0].clone(),
            files,
            lipschitz: t.constants.lipschitz,
            coding_norm: t.constants.coding_norm,
            minimizer_gap: t.constants.minimizer_gap,
            delay_bound: t.constants.delay_bound,
            iterations: t.srdo.iterations(),
            final_ae: t.srdo.final_ae(),
            residual_violations: t.srdo.total_violations(),
            envelope_1: describe_envelope(&t.envelopes.0),
            envelope_2: describe_envelope(&t.envelopes.1),
        });
    }

    let mut agg = String::from(AGGREGATE_HEADER);
    agg.push('\n');
    // early stopping can leave trials of unequal length; aggregate only
    // when every trial ran the same number of steps
    let srdo: Vec<&TrialTrace> = trials.iter().map(|t| &t.srdo).collect();
    if let Ok(rows) = aggregate(&srdo) {
        aggregate_lines(&mut agg, "srdo", &rows);
    }
    for (b, mode) in cfg.baselines.iter().enumerate() {
        let series: Vec<&TrialTrace> = trials.iter().map(|t| &t.baselines[b]).collect();
        if let Ok(rows) = aggregate(&series) {
            aggregate_lines(&mut agg, mode.name(), &rows);
        }
    }
    let agg_path = out.join(AGGREGATE);
    std::fs::write(&agg_path, agg).map_err(|e| Error::io(&agg_path, e))?;

    if cfg.dump_codec || cfg.dump_problem {
        // instance of the first trial
        let (_, ctx) = run_context_only(cfg, 0)?;
        if cfg.dump_codec {
            for (i, sc) in ctx.schemes.iter().enumerate() {
                crate::io::dump_codec(&out, &format!("codec_partition_{i}"), sc)?;
            }
        }
        if cfg.dump_problem {
            let dir = out.join("problem");
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            crate::io::dump_problem(&dir, &ctx.problem)?;
        }
    }

    let mut config = cfg.entries();
    config.remove("experiment.out");
    config.remove("experiment.workers");
    let manifest = Manifest {
        tool: "srdo".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        rng: rng::ALGORITHM.into(),
        config_hash: cfg.hash(),
        master_seed: cfg.seed,
        config,
        warnings: cfg.warnings(),
        trials: entries,
        aggregate: AGGREGATE.into(),
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(ArtifactSet {
        out_dir: out,
        manifest,
        trials,
    })
}

fn run_context_only(cfg: &ExperimentConfig, index: usize) -> Result<(u64, TrialContext<f64>)> {
    let seed = rng::trial_seed(cfg.seed, index as u64);
    Ok((seed, build_context(cfg, seed)?))
}

/// Audit constants for `trace_name` from a manifest next to it.
pub fn constants_from_manifest(manifest: &Path, trace_name: &str) -> Result<AuditConstants> {
    let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let trials = v["trials"].as_array().ok_or_else(|| Error::Parse {
        location: manifest.display().to_string(),
        message: "missing trials array".into(),
    })?;
    let entry = trials
        .iter()
        .find(|t| {
            t["files"]
                .as_array()
                .is_some_and(|f| f.iter().any(|n| n.as_str() == Some(trace_name)))
        })
        .ok_or_else(|| Error::Parse {
            location: manifest.display().to_string(),
            message: format!("no trial lists {trace_name}"),
        })?;
    Ok(serde_json::from_value(entry.clone())?)
}
