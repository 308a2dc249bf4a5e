//! Acceptance suite. Each test prints one `[N] name: PASS|FAIL ...` line.
//!
//! The long multi-trial runs are computed once and shared between the
//! criteria that inspect them. Timed sections hold a global lock so the
//! measured wall time is not inflated by other tests on the same cores.

use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::Rng;

use srdo_core::analysis::{martingale_bound_1, martingale_bound_2};
use srdo_core::codec::{subsets, verify_scheme, CodingScheme};
use srdo_core::config::ExperimentConfig;
use srdo_core::engine::{self, stepsize, EngineState, Policy, TrialContext};
use srdo_core::experiment::{self, TrialResult};
use srdo_core::problem::generate_least_squares_scaled;
use srdo_core::topology::build_weight_matrix;
use srdo_core::{rng, trace::TrialTrace};

static HEAVY: Mutex<()> = Mutex::new(());

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let _g = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn report(n: usize, name: &str, pass: bool, detail: &str) {
    println!("[{n}] {name}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn median_ae_at(traces: &[&TrialTrace], k: usize) -> f64 {
    median(traces.iter().map(|t| t.records[k].ae).collect())
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).expect("acceptance configuration is valid")
}

const COMMON: &str = "problem.N = 100\nproblem.m_bar = 100\nproblem.p = 5\n\
    network.mu = 0.05\nrandom.gamma0 = 0.05\nstepsize.a = 300\n\
    experiment.iters = 3000\nexperiment.trials = 20\nexperiment.seed = 2024\n";

struct Shared {
    full_gradient_match: (Vec<TrialResult>, Duration),
    scenarios: Vec<(Policy, Vec<TrialResult>)>,
    delays: Vec<(usize, f64, Vec<TrialResult>)>,
}

fn full_gradient_match() -> &'static (Vec<TrialResult>, Duration) {
    &shared().full_gradient_match
}

fn shared() -> &'static Shared {
    static S: OnceLock<Shared> = OnceLock::new();
    S.get_or_init(|| {
        let c3 = config(&format!(
            "{COMMON}problem.n_r = 5\ncoding.s = 2\nrandom.pi = 0.3\n\
             stepsize.theta = 0.55\nengine.scenario = allowed_only\n\
             experiment.baselines = full_no_failures\n"
        ));
        let full_gradient_match = timed(|| experiment::run_trials(&c3).unwrap());

        let scenarios = [Policy::AllowedOnly, Policy::IgnoreStragglers, Policy::StaleGradients]
            .into_iter()
            .map(|pol| {
                let cfg = config(&format!(
                    "{COMMON}problem.n_r = 3\ncoding.s = 1\nrandom.pi = 0.5\nrandom.H = 20\n\
                     stepsize.theta = 0.75\nengine.scenario = {}\nexperiment.baselines = none\n",
                    pol.name()
                ));
                (pol, timed(|| experiment::run_trials(&cfg).unwrap()).0)
            })
            .collect();

        let delays = [(5usize, 0.35f64), (10, 0.55), (20, 0.75)]
            .into_iter()
            .map(|(h, theta)| {
                let cfg = config(&format!(
                    "{COMMON}problem.n_r = 3\ncoding.s = 2\nrandom.pi = 0.5\nrandom.H = {h}\n\
                     stepsize.theta = {theta}\nengine.scenario = stale_gradients\n\
                     experiment.baselines = none\n"
                ));
                (h, theta, timed(|| experiment::run_trials(&cfg).unwrap()).0)
            })
            .collect();

        Shared {
            full_gradient_match,
            scenarios,
            delays,
        }
    })
}

#[test]
fn c1_codec_identity_and_exact_decode() {
    let ((worst_id, worst_dec), dt) = timed(|| {
        let mut worst_id = 0.0f64;
        for (n, s) in [(3, 1), (5, 2), (10, 3)] {
            for seed in 0..20 {
                let sc = CodingScheme::<f64>::cyclic(n, s, seed).unwrap();
                worst_id = worst_id.max(verify_scheme(&sc.a, &sc.b, 1e-8).unwrap().1);
            }
        }
        let mut worst_dec = 0.0f64;
        for (n, s) in [(3, 0), (3, 1), (3, 2), (4, 1), (4, 2), (5, 1), (5, 2), (5, 3)] {
            for seed in 0..20u64 {
                let prob = generate_least_squares_scaled::<f64>(12, 6, 1, n, seed, 0.3).unwrap();
                let sc = CodingScheme::<f64>::cyclic(n, s, seed).unwrap();
                let mut r = rng::from_seed(seed + 1000);
                let x = DVector::from_fn(12, |_, _| r.random_range(-1.0..1.0));
                let direct = prob.partition_gradient(0, &x).unwrap();
                let coded: Vec<DVector<f64>> = (0..n)
                    .map(|w| prob.coded_worker_gradient(&sc, 0, 0, w, &x).unwrap())
                    .collect();
                for size in n - s..=n {
                    for alive in subsets(n, size) {
                        let fit = sc.select_fit(&alive);
                        let got = srdo_core::codec::decode_partition_gradient(
                            &sc,
                            &fit,
                            fit.usable_workers.iter().map(|&w| (w, &coded[w])),
                            12,
                        )
                        .unwrap();
                        worst_dec = worst_dec.max((&got - &direct).norm() / direct.norm());
                    }
                }
            }
        }
        (worst_id, worst_dec)
    });
    let pass = worst_id <= 1e-8 && worst_dec <= 1e-9 && dt < Duration::from_secs(5);
    report(
        1,
        "codec identity",
        pass,
        &format!("max |AB-1| {worst_id:.2e}, max decode rel err {worst_dec:.2e}, {:.2}s", dt.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn c2_exact_when_nothing_fails() {
    let cfg = config(
        "problem.N = 20\nproblem.m_bar = 10\nproblem.p = 4\nproblem.n_r = 4\ncoding.s = 1\n\
         network.servers = 5\nnetwork.mu = 0.05\nrandom.pi = 0\nrandom.H = 0\nrandom.gamma0 = 0.05\n\
         random.source = puller\nstepsize.a = 300\nstepsize.theta = 0.55\nengine.init = uniform\n",
    );
    let params = cfg.engine_params().unwrap();
    let seed = rng::trial_seed(cfg.seed, 0);
    let ctx: TrialContext<f64> = experiment::build_context(&cfg, seed).unwrap();
    let w = build_weight_matrix::<f64>(&cfg.adjacency().unwrap(), cfg.mu).unwrap().w;
    let mut st = EngineState::new(&ctx, &params, seed);
    let mut reference = st.v.clone();
    let (mut max_r, mut max_dev) = (0.0f64, 0.0f64);
    for k in 0..200 {
        let rep = engine::step(&mut st, &ctx, &params);
        let alpha = stepsize(&cfg.schedule, k);
        let x: Vec<DVector<f64>> = reference
            .iter()
            .zip(&rep.servers)
            .map(|(v, s)| match s.partition {
                Some(part) => v - ctx.problem.partition_gradient(part, v).unwrap() * alpha,
                None => v.clone(),
            })
            .collect();
        reference = (0..x.len())
            .map(|i| x.iter().enumerate().fold(DVector::zeros(20), |acc, (j, xj)| acc + xj * w[(i, j)]))
            .collect();
        for s in &rep.servers {
            max_r = max_r.max(s.residual.amax());
        }
        for (a, b) in st.v.iter().zip(&reference) {
            max_dev = max_dev.max((a - b).amax());
        }
    }
    let pass = max_r == 0.0 && max_dev <= 1e-12;
    report(
        2,
        "degenerate exactness",
        pass,
        &format!("max |R| {max_r:.2e}, max deviation from reference {max_dev:.2e} over 200 steps"),
    );
    assert!(pass);
}

#[test]
fn c3_coded_run_tracks_full_gradient_baseline() {
    let (runs, dt) = full_gradient_match();
    let k = runs[0].srdo.iterations();
    let srdo: Vec<&TrialTrace> = runs.iter().map(|r| &r.srdo).collect();
    let base: Vec<&TrialTrace> = runs.iter().map(|r| &r.baselines[0]).collect();
    let (s_end, b_end) = (median_ae_at(&srdo, k), median_ae_at(&base, k));
    let (s_0, b_0) = (median_ae_at(&srdo, 0), median_ae_at(&base, 0));
    let ratio = s_end / b_end;
    let pass = (0.5..=2.0).contains(&ratio)
        && s_0 / s_end >= 100.0
        && b_0 / b_end >= 100.0
        && *dt < Duration::from_secs(120);
    report(
        3,
        "coded run tracks full-gradient baseline",
        pass,
        &format!(
            "median AE at k={k}: coded {s_end:.3e}, baseline {b_end:.3e} (ratio {ratio:.2}); \
             decrease coded {:.1}x, baseline {:.1}x; {:.1}s",
            s_0 / s_end,
            b_0 / b_end,
            dt.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn c4_scenario_ordering() {
    let sh = shared();
    let fin: Vec<(Policy, f64)> = sh
        .scenarios
        .iter()
        .map(|(p, runs)| {
            let t: Vec<&TrialTrace> = runs.iter().map(|r| &r.srdo).collect();
            (*p, median_ae_at(&t, t[0].iterations()))
        })
        .collect();
    let get = |p: Policy| fin.iter().find(|(q, _)| *q == p).unwrap().1;
    let (s1, s2, s3) = (
        get(Policy::AllowedOnly),
        get(Policy::IgnoreStragglers),
        get(Policy::StaleGradients),
    );
    let pass = s2 >= 1.1 * s3 && s3 >= 1.1 * s1;
    report(
        4,
        "scenario ordering",
        pass,
        &format!("median final AE: ignore {s2:.3e}, stale {s3:.3e}, allowed {s1:.3e}"),
    );
    assert!(pass);
}

#[test]
fn c5_larger_delay_bound_degrades() {
    let sh = shared();
    let fin: Vec<(usize, f64, f64)> = sh
        .delays
        .iter()
        .map(|(h, theta, runs)| {
            let t: Vec<&TrialTrace> = runs.iter().map(|r| &r.srdo).collect();
            (*h, *theta, median_ae_at(&t, t[0].iterations()))
        })
        .collect();
    let pass = fin.windows(2).all(|w| w[1].2 >= w[0].2);
    let detail = fin
        .iter()
        .map(|(h, th, ae)| format!("H={h} theta={th}: {ae:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(5, "delay-bound sensitivity", pass, &format!("median final AE {detail}"));
    assert!(pass);
}

#[test]
fn c6_residual_bound_never_violated() {
    let sh = shared();
    let mut traces: Vec<&TrialTrace> = sh.full_gradient_match.0.iter().map(|r| &r.srdo).collect();
    for (_, runs) in &sh.scenarios {
        traces.extend(runs.iter().map(|r| &r.srdo));
    }
    for (_, _, runs) in &sh.delays {
        traces.extend(runs.iter().map(|r| &r.srdo));
    }
    let violations: usize = traces.iter().map(|t| t.total_violations()).sum();
    let audited: usize = traces.iter().map(|t| t.iterations()).sum();
    let min_slack = traces
        .iter()
        .flat_map(|t| t.records.iter().skip(1).map(|r| r.min_slack))
        .fold(f64::INFINITY, f64::min);
    let pass = violations == 0;
    report(
        6,
        "residual bound audit",
        pass,
        &format!("{} traces, {audited} steps, {violations} violations, min slack {min_slack:.3e}", traces.len()),
    );
    assert!(pass);
}

/// Recursion driven at equality with the window maximum (the extremal case),
/// or scaled down by a random factor in `[0.5, 1]`.
#[allow(clippy::too_many_arguments)]
fn simulate(
    r: &mut impl Rng,
    a1: f64,
    a2: &[f64],
    a3: &[f64],
    window: usize,
    init: &[f64],
    len: usize,
    extremal: bool,
) -> Vec<f64> {
    let mut v = init.to_vec();
    while v.len() < len {
        let k = v.len() - 1;
        let m = v[k.saturating_sub(window)..=k].iter().copied().fold(0.0f64, f64::max);
        let next = a1 * v[k] + a2[k] * m + a3.get(k).copied().unwrap_or(0.0);
        let u = if extremal { 1.0 } else { r.random_range(0.5..=1.0) };
        v.push(u * next);
    }
    v
}

#[test]
fn c7_martingale_envelopes_dominate() {
    const DRAWS: usize = 10_000;
    const LEN: usize = 500;
    let ((v1, v2, checked), dt) = timed(|| {
        let mut r = rng::from_seed(7);
        let (mut v1, mut v2, mut checked) = (0usize, 0usize, 0usize);
        for d in 0..DRAWS {
            let extremal = d % 2 == 0;
            let window = r.random_range(0..=10usize);
            let kbar = window + r.random_range(0..=20usize);
            let init: Vec<f64> = (0..=window).map(|_| r.random_range(0.0..10.0)).collect();

            // delayed-max recursion without additive term
            let a1 = r.random_range(0.0..0.99);
            let top = r.random_range(0.0..(1.0 - a1));
            let mut a2: Vec<f64> = (0..LEN).map(|_| r.random_range(0.0..=top)).collect();
            a2.sort_by(|x, y| y.total_cmp(x));
            if a1 + a2[kbar] > 0.0 {
                let v = simulate(&mut r, a1, &a2, &[], window, &init, LEN, extremal);
                let bs = martingale_bound_1(a1, &a2, window, kbar, &v).unwrap();
                for (k, b) in bs.emit(LEN) {
                    checked += 1;
                    if v[k] > b * (1.0 + 1e-10) {
                        v1 += 1;
                    }
                }
            }

            // with additive term a3_k <= b_{k+1} eta / l
            let l = r.random_range(1.0..5.0);
            let theta = r.random_range(0.05..=1.0);
            let offset = r.random_range(1.0..500.0);
            let cap = (1.0 - 1.0 / l) / (window as f64 + 2.0).powf(theta);
            let a1 = r.random_range(0.0..=cap);
            let top = r.random_range(0.0..=(cap - a1));
            let mut a2: Vec<f64> = (0..LEN).map(|_| r.random_range(0.0..=top)).collect();
            a2.sort_by(|x, y| y.total_cmp(x));
            if a1 + a2[kbar] == 0.0 {
                continue;
            }
            let eta = r.random_range(0.0..10.0);
            let a3: Vec<f64> = (0..LEN)
                .map(|k| r.random_range(0.0..=1.0) * (k as f64 + 1.0 + offset).powf(-theta) * eta / l)
                .collect();
            let v = simulate(&mut r, a1, &a2, &a3, window, &init, LEN, extremal);
            let bs = martingale_bound_2(a1, &a2, &a3, window, kbar, offset, l, theta, &v).unwrap();
            for (k, b) in bs.emit(LEN) {
                checked += 1;
                if v[k] > b * (1.0 + 1e-10) {
                    v2 += 1;
                }
            }
        }
        (v1, v2, checked)
    });
    let pass = v1 == 0 && v2 == 0 && dt < Duration::from_secs(30);
    report(
        7,
        "martingale envelopes",
        pass,
        &format!(
            "{DRAWS} draws of each recursion, {checked} points checked, violations {v1} / {v2}, {:.2}s",
            dt.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn c8_rate_envelope_dominates_when_active() {
    let (runs, _) = full_gradient_match();
    let (mut active, mut vacuous, mut checked, mut violations) = (0, 0, 0, 0);
    let mut reasons = Vec::new();
    for r in runs {
        match &r.envelopes.0 {
            srdo_core::analysis::Envelope::Vacuous { reason } => {
                vacuous += 1;
                if reasons.is_empty() {
                    reasons.push(reason.clone());
                }
            }
            env => {
                active += 1;
                for rec in &r.srdo.records {
                    if let Some(b) = env.value_at(rec.k) {
                        checked += 1;
                        if rec.sumsq_v_err > b * (1.0 + 1e-9) {
                            violations += 1;
                        }
                    }
                }
            }
        }
    }
    let pass = violations == 0;
    let mut detail = format!("{active} active, {vacuous} vacuous, {checked} points checked, {violations} violations");
    if let Some(r) = reasons.first() {
        detail.push_str(&format!("; vacuous because {r}"));
    }
    report(8, "rate envelope", pass, &detail);
    assert!(pass);
}

#[test]
fn c9_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(
        "problem.N = 20\nproblem.m_bar = 10\nproblem.p = 3\nproblem.n_r = 3\ncoding.s = 1\n\
         random.pi = 0.4\nrandom.H = 4\nengine.scenario = stale_gradients\nstepsize.a = 300\n\
         experiment.iters = 200\nexperiment.trials = 4\nexperiment.seed = 99\n\
         experiment.baselines = full_no_failures,same_failures\n",
    );
    let read_all = |d: &std::path::Path| {
        let mut files: Vec<_> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files
            .into_iter()
            .map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(&p).unwrap()))
            .collect::<Vec<_>>()
    };
    cfg.out = dir.path().join("a");
    experiment::run_experiment(&cfg).unwrap();
    cfg.out = dir.path().join("b");
    cfg.workers = 2;
    experiment::run_experiment(&cfg).unwrap();
    let (a, b) = (read_all(&dir.path().join("a")), read_all(&dir.path().join("b")));
    let pass = a.len() >= 14 && a == b;
    report(9, "determinism", pass, &format!("{} files compared", a.len()));
    assert!(pass);
}
