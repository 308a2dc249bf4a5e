use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use srdo_core::analysis::{self, rate_base_scenario1, rho3_eta3};
use srdo_core::codec::{verify_scheme, CodingScheme};
use srdo_core::config::ExperimentConfig;
use srdo_core::engine::stepsize;
use srdo_core::experiment::{self, describe_envelope, MANIFEST};
use srdo_core::trace::fmt_f64;
use srdo_core::{io, trace, Error};

#[derive(Parser)]
#[command(name = "srdo", version, about = "Coded, straggler-tolerant distributed optimization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Number of trials (experiment.trials)
    #[arg(long)]
    trials: Option<usize>,
    /// Iterations per trial (experiment.iters)
    #[arg(long)]
    iters: Option<usize>,
    /// Master seed (experiment.seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (experiment.out)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of an experiment and write traces, aggregates and a manifest
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Build cyclic codes for a range of seeds and check A B = 1
    VerifyCodec {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        /// Seeds 0..SEEDS are checked
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Write B and A of every seed into this directory
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Re-check the residual bound along a trace CSV
    Audit {
        trace: PathBuf,
        /// Manifest holding the trial constants; defaults to manifest.json next to the trace
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Rate constants and envelopes for the first trial of a configuration
    Bounds {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn load_config(path: &Path, o: &Overrides) -> srdo_core::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(t) = o.trials {
        cfg.trials = t;
    }
    if let Some(k) = o.iters {
        cfg.iters = k;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(out) = &o.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn run(config: &Path, o: &Overrides) -> Result<()> {
    let cfg = load_config(config, o)?;
    let art = experiment::run_experiment(&cfg)?;
    for t in &art.manifest.trials {
        println!(
            "trial {:>4}  final AE {:<24}  residual violations {}",
            t.index,
            fmt_f64(t.final_ae),
            t.residual_violations
        );
    }
    println!("wrote {} trials to {}", art.trials.len(), art.out_dir.display());
    Ok(())
}

fn verify_codec(n: usize, s: usize, seeds: u64, tol: f64, dump: Option<&Path>) -> Result<bool> {
    if let Some(d) = dump {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let mut worst = 0.0f64;
    let mut ok = true;
    for seed in 0..seeds {
        let sc = CodingScheme::<f64>::cyclic(n, s, seed)?;
        let (pass, dev) = verify_scheme(&sc.a, &sc.b, tol)?;
        worst = worst.max(dev);
        ok &= pass;
        println!("seed {seed:>4}  max |AB - 1| {}  {}", fmt_f64(dev), if pass { "ok" } else { "FAIL" });
        if let Some(d) = dump {
            io::dump_codec(d, &format!("codec_n{n}_s{s}_seed{seed}"), &sc)?;
        }
    }
    println!("n={n} s={s} seeds={seeds}: worst deviation {} ({})", fmt_f64(worst), if ok { "pass" } else { "fail" });
    Ok(ok)
}

fn audit(trace_path: &Path, manifest: Option<&Path>) -> Result<bool> {
    let manifest = match manifest {
        Some(m) => m.to_path_buf(),
        None => trace_path.parent().unwrap_or(Path::new(".")).join(MANIFEST),
    };
    let name = trace_path
        .file_name()
        .and_then(|n| n.to_str())
        .context("trace path has no file name")?;
    let constants = experiment::constants_from_manifest(&manifest, name)?;
    let rows = trace::read_csv(trace_path)?;
    let rep = analysis::audit_csv(&rows, &constants);
    println!(
        "{}: {} iterations audited, {} violations, min slack {}",
        trace_path.display(),
        rep.per_iteration.len(),
        rep.violations,
        fmt_f64(rep.min_slack)
    );
    Ok(rep.passed())
}

fn bounds(config: &Path, o: &Overrides) -> Result<()> {
    let cfg = load_config(config, o)?;
    let (trial, ctx) = experiment::run_single(&cfg, 0)?;
    let params = cfg.engine_params()?;
    let inputs = experiment::rate_inputs(&cfg, &params, &ctx, &trial.srdo)?;
    println!("L = {}", fmt_f64(inputs.lipschitz));
    println!("kappa = {}", fmt_f64(inputs.coding_norm));
    println!("subpartition minimizer gap = {}", fmt_f64(inputs.minimizer_gap));
    println!("partition minimizer gap = {}", fmt_f64(inputs.partition_gap));
    println!("index set size = {}", inputs.index_set_size);
    println!("scenario-1 envelope: {}", describe_envelope(&trial.envelopes.0));
    println!("general envelope: {}", describe_envelope(&trial.envelopes.1));

    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let path = cfg.out.join("bounds.csv");
    let mut text = String::from("k,alpha,rate_base_1,rho3_pow,eta3,sumsq_v_err,bound_env_1,bound_env_2\n");
    for r in &trial.srdo.records {
        let alpha = stepsize(&cfg.schedule, r.k);
        let c = rho3_eta3(&inputs, alpha);
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.k,
            fmt_f64(alpha),
            fmt_f64(rate_base_scenario1(inputs.lipschitz, inputs.coding_norm, inputs.mu, inputs.gamma0, alpha)),
            fmt_f64(c.rho_pow),
            fmt_f64(c.eta),
            fmt_f64(r.sumsq_v_err),
            opt(r.bound_env_1),
            opt(r.bound_env_2)
        ));
    }
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, overrides } => run(&config, &overrides)?,
        Command::VerifyCodec { n, s, seeds, tol, dump } => {
            if !verify_codec(n, s, seeds, tol, dump.as_deref())? {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Audit { trace, manifest } => {
            if !audit(&trace, manifest.as_deref())? {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Bounds { config, overrides } => bounds(&config, &overrides)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            let validation = matches!(
                e.downcast_ref::<Error>(),
                Some(Error::Validation(_) | Error::InvalidArgument(_))
            );
            eprintln!("error: {e:#}");
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}
