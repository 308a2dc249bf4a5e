//! Flat `key=value` experiment configuration.
//!
//! Lines are `section.key = value`; blank lines and `#` comments are ignored.
//! Unknown keys and malformed values are collected into one report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::engine::{BaselineMode, EngineParams, Init, Policy, Schedule, SourcePolicy};
use crate::topology::{uniform_gamma, Adjacency};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum AdjacencySpec {
    Complete,
    Edges(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m_bar: usize,
    pub p: usize,
    pub n_r: usize,
    /// Multiplier on the standard-normal entries of `G`; `None` means
    /// `1/sqrt(m_bar)`.
    pub g_scale: Option<f64>,
    pub s: usize,
    pub servers: Option<usize>,
    pub mu: f64,
    pub adjacency: AdjacencySpec,
    pub edge_dropout: f64,
    pub pi: f64,
    pub delay_bound: usize,
    pub gamma0: f64,
    pub source: SourcePolicy,
    pub schedule: Schedule,
    pub policy: Policy,
    pub init: Init,
    pub early_stop: bool,
    pub tol: f64,
    pub iters: usize,
    pub trials: usize,
    pub seed: u64,
    pub baselines: Vec<BaselineMode>,
    /// Trial worker pool size; 0 picks the available parallelism.
    pub workers: usize,
    pub out: PathBuf,
    pub dump_codec: bool,
    pub dump_problem: bool,
    /// `|I|` in the general-rate constant; `None` counts Division-2 steps.
    pub index_set_size: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 100,
            m_bar: 100,
            p: 5,
            n_r: 3,
            g_scale: None,
            s: 1,
            servers: None,
            mu: 0.05,
            adjacency: AdjacencySpec::Complete,
            edge_dropout: 0.0,
            pi: 0.3,
            delay_bound: 0,
            gamma0: 0.05,
            source: SourcePolicy::Uniform,
            schedule: Schedule {
                a: 300.0,
                theta: 0.55,
            },
            policy: Policy::AllowedOnly,
            init: Init::Zero,
            early_stop: false,
            tol: 1e-10,
            iters: 3000,
            trials: 20,
            seed: 1,
            baselines: vec![BaselineMode::FullNoFailures],
            workers: 0,
            out: PathBuf::from("out"),
            dump_codec: false,
            dump_problem: false,
            index_set_size: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "problem.N",
    "problem.m_bar",
    "problem.p",
    "problem.n_r",
    "problem.g_scale",
    "coding.s",
    "network.servers",
    "network.mu",
    "network.adjacency",
    "network.edge_dropout",
    "random.pi",
    "random.H",
    "random.gamma0",
    "random.delay",
    "random.source",
    "random.rng",
    "stepsize.a",
    "stepsize.theta",
    "engine.scenario",
    "engine.init",
    "engine.early_stop",
    "engine.tol",
    "experiment.iters",
    "experiment.trials",
    "experiment.seed",
    "experiment.baselines",
    "experiment.workers",
    "experiment.out",
    "output.dump_codec",
    "output.dump_problem",
    "analysis.index_set_size",
];

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

fn parse_edges(v: &str) -> Option<Vec<(usize, usize)>> {
    v.split(',')
        .filter(|e| !e.trim().is_empty())
        .map(|e| {
            let (a, b) = e.trim().split_once('-')?;
            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses and validates; every problem found is reported at once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut errs = Vec::new();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errs.push(format!("line {}: expected key = value, found {line:?}", i + 1));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if let Some(prev) = seen.insert(key.to_string(), i + 1) {
                errs.push(format!("line {}: {key} already set on line {prev}", i + 1));
                continue;
            }
            if let Err(e) = cfg.set(key, value) {
                errs.push(format!("line {}: {e}", i + 1));
            }
        }
        errs.extend(cfg.problems());
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Assigns one key; the message names the key on failure.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse()
                .map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        match key {
            "problem.N" => self.n = num(key, value)?,
            "problem.m_bar" => self.m_bar = num(key, value)?,
            "problem.p" => self.p = num(key, value)?,
            "problem.n_r" => self.n_r = num(key, value)?,
            "problem.g_scale" => {
                self.g_scale = if value == "auto" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "coding.s" => self.s = num(key, value)?,
            "network.servers" => {
                self.servers = if value == "auto" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "network.mu" => self.mu = num(key, value)?,
            "network.adjacency" => {
                self.adjacency = if value == "complete" {
                    AdjacencySpec::Complete
                } else {
                    AdjacencySpec::Edges(parse_edges(value).ok_or_else(|| {
                        format!("{key}: expected 'complete' or an edge list like 0-1,1-2, found {value:?}")
                    })?)
                }
            }
            "network.edge_dropout" => self.edge_dropout = num(key, value)?,
            "random.pi" => self.pi = num(key, value)?,
            "random.H" => self.delay_bound = num(key, value)?,
            "random.gamma0" => self.gamma0 = num(key, value)?,
            "random.delay" => {
                if value != "uniform" {
                    return Err(format!("{key}: only 'uniform' is supported, found {value:?}"));
                }
            }
            "random.source" => {
                self.source = match value {
                    "uniform" => SourcePolicy::Uniform,
                    "puller" => SourcePolicy::Puller,
                    _ => return Err(format!("{key}: expected uniform or puller, found {value:?}")),
                }
            }
            "random.rng" => {
                if value != "chacha20" {
                    return Err(format!("{key}: only 'chacha20' is supported, found {value:?}"));
                }
            }
            "stepsize.a" => self.schedule.a = num(key, value)?,
            "stepsize.theta" => self.schedule.theta = num(key, value)?,
            "engine.scenario" => {
                self.policy = Policy::parse(value).ok_or_else(|| {
                    format!("{key}: expected allowed_only, ignore_stragglers or stale_gradients, found {value:?}")
                })?
            }
            "engine.init" => {
                self.init = match value {
                    "zero" => Init::Zero,
                    "uniform" => Init::Uniform,
                    _ => return Err(format!("{key}: expected zero or uniform, found {value:?}")),
                }
            }
            "engine.early_stop" => {
                self.early_stop =
                    parse_bool(value).ok_or_else(|| format!("{key}: expected true or false"))?
            }
            "engine.tol" => self.tol = num(key, value)?,
            "experiment.iters" => self.iters = num(key, value)?,
            "experiment.trials" => self.trials = num(key, value)?,
            "experiment.seed" => self.seed = num(key, value)?,
            "experiment.baselines" => {
                self.baselines = if value == "none" || value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|b| {
                            BaselineMode::parse(b.trim()).ok_or_else(|| {
                                format!("{key}: unknown baseline {:?}", b.trim())
                            })
                        })
                        .collect::<std::result::Result<_, _>>()?
                }
            }
            "experiment.workers" => self.workers = num(key, value)?,
            "experiment.out" => self.out = PathBuf::from(value),
            "output.dump_codec" => {
                self.dump_codec =
                    parse_bool(value).ok_or_else(|| format!("{key}: expected true or false"))?
            }
            "output.dump_problem" => {
                self.dump_problem =
                    parse_bool(value).ok_or_else(|| format!("{key}: expected true or false"))?
            }
            "analysis.index_set_size" => {
                self.index_set_size = if value == "auto" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn n_servers(&self) -> usize {
        self.servers.unwrap_or(self.p)
    }

    pub fn g_scale(&self) -> f64 {
        self.g_scale.unwrap_or(1.0 / (self.m_bar as f64).sqrt())
    }

    pub fn adjacency(&self) -> Result<Adjacency> {
        match &self.adjacency {
            AdjacencySpec::Complete => Ok(Adjacency::complete(self.n_servers())),
            AdjacencySpec::Edges(e) => Adjacency::from_edges(self.n_servers(), e),
        }
    }

    /// Constraint violations, each naming the assumption it breaks.
    pub fn problems(&self) -> Vec<String> {
        let mut e = Vec::new();
        if self.n == 0 || self.m_bar == 0 || self.p == 0 || self.n_r == 0 {
            e.push("problem dimensions N, m_bar, p and n_r must all be positive".into());
        } else if self.p * self.n_r * self.m_bar < self.n {
            e.push(format!(
                "least-squares system must be overdetermined: M = p*n_r*m_bar = {} < N = {}",
                self.p * self.n_r * self.m_bar,
                self.n
            ));
        }
        if let Some(g) = self.g_scale {
            if !(g > 0.0 && g.is_finite()) {
                e.push(format!("problem.g_scale must be positive, got {g}"));
            }
        }
        if self.s >= self.n_r {
            e.push(format!(
                "coding.s = {} must be below problem.n_r = {} (the code tolerates fewer stragglers than workers per replica)",
                self.s, self.n_r
            ));
        }
        if self.n_servers() == 0 {
            e.push("network.servers must be positive".into());
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            e.push(format!(
                "network.mu = {} must lie in (0, 1) (consensus rows and columns sum to 1 - mu)",
                self.mu
            ));
        }
        match self.adjacency() {
            Ok(a) if !a.is_connected() => e.push(
                "network.adjacency must describe a connected server graph (consensus weights need a connected graph)".into(),
            ),
            Err(err) => e.push(format!("network.adjacency: {err}")),
            _ => {}
        }
        if !(self.edge_dropout >= 0.0 && self.edge_dropout < 1.0) {
            e.push(format!("network.edge_dropout = {} must lie in [0, 1)", self.edge_dropout));
        }
        if !(self.pi >= 0.0 && self.pi < 1.0) {
            e.push(format!(
                "random.pi = {} must lie in [0, 1) (per-worker straggling probability)",
                self.pi
            ));
        }
        if !(self.gamma0 >= 0.0 && self.gamma0 < 1.0) {
            e.push(format!(
                "random.gamma0 = {} must lie in [0, 1) (partition-selection probabilities must sum to 1)",
                self.gamma0
            ));
        }
        if !(self.schedule.theta > 0.0 && self.schedule.theta <= 1.0) {
            e.push(format!(
                "stepsize.theta = {} must lie in (0, 1] (diminishing stepsize)",
                self.schedule.theta
            ));
        }
        if !(self.schedule.a >= 0.0 && self.schedule.a.is_finite()) {
            e.push(format!("stepsize.a = {} must be nonnegative", self.schedule.a));
        } else if self.schedule.a == 0.0 {
            e.push("stepsize.a = 0 makes the first stepsize infinite".into());
        }
        if self.early_stop && !(self.tol >= 0.0) {
            e.push(format!("engine.tol = {} must be nonnegative", self.tol));
        }
        if self.iters == 0 {
            e.push("experiment.iters must be at least 1".into());
        }
        if self.trials == 0 {
            e.push("experiment.trials must be at least 1".into());
        }
        e
    }

    /// Non-fatal remarks recorded alongside the results.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.schedule.theta <= 0.5 {
            w.push(format!(
                "stepsize.theta = {} <= 0.5: the squared stepsizes are not summable, so the convergence guarantee does not apply",
                self.schedule.theta
            ));
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.problems();
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(e))
        }
    }

    pub fn engine_params(&self) -> Result<EngineParams> {
        Ok(EngineParams {
            n_servers: self.n_servers(),
            mu: self.mu,
            pi: self.pi,
            delay_bound: self.delay_bound,
            gamma: uniform_gamma(self.gamma0, self.p),
            schedule: self.schedule,
            policy: self.policy,
            source: self.source,
            adjacency: self.adjacency()?,
            edge_dropout: self.edge_dropout,
            init: self.init,
            early_stop: self.early_stop.then_some(self.tol),
        })
    }

    /// Every key with its effective value, sorted by key.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let f = crate::trace::fmt_f64;
        let opt = |o: Option<usize>| o.map(|v| v.to_string()).unwrap_or_else(|| "auto".into());
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("problem.N", self.n.to_string());
        put("problem.m_bar", self.m_bar.to_string());
        put("problem.p", self.p.to_string());
        put("problem.n_r", self.n_r.to_string());
        put("problem.g_scale", self.g_scale.map(f).unwrap_or_else(|| "auto".into()));
        put("coding.s", self.s.to_string());
        put("network.servers", opt(self.servers));
        put("network.mu", f(self.mu));
        put(
            "network.adjacency",
            match &self.adjacency {
                AdjacencySpec::Complete => "complete".into(),
                AdjacencySpec::Edges(e) => e
                    .iter()
                    .map(|(a, b)| format!("{a}-{b}"))
                    .collect::<Vec<_>>()
                    .join(","),
            },
        );
        put("network.edge_dropout", f(self.edge_dropout));
        put("random.pi", f(self.pi));
        put("random.H", self.delay_bound.to_string());
        put("random.gamma0", f(self.gamma0));
        put("random.delay", "uniform".into());
        put(
            "random.source",
            match self.source {
                SourcePolicy::Uniform => "uniform",
                SourcePolicy::Puller => "puller",
            }
            .into(),
        );
        put("random.rng", "chacha20".into());
        put("stepsize.a", f(self.schedule.a));
        put("stepsize.theta", f(self.schedule.theta));
        put("engine.scenario", self.policy.name().into());
        put(
            "engine.init",
            match self.init {
                Init::Zero => "zero",
                Init::Uniform => "uniform",
            }
            .into(),
        );
        put("engine.early_stop", self.early_stop.to_string());
        put("engine.tol", f(self.tol));
        put("experiment.iters", self.iters.to_string());
        put("experiment.trials", self.trials.to_string());
        put("experiment.seed", self.seed.to_string());
        put(
            "experiment.baselines",
            if self.baselines.is_empty() {
                "none".into()
            } else {
                self.baselines
                    .iter()
                    .map(|b| b.name())
                    .collect::<Vec<_>>()
                    .join(",")
            },
        );
        put("experiment.workers", self.workers.to_string());
        put("experiment.out", self.out.display().to_string());
        put("output.dump_codec", self.dump_codec.to_string());
        put("output.dump_problem", self.dump_problem.to_string());
        put("analysis.index_set_size", opt(self.index_set_size));
        m
    }

    /// Canonical `key=value` text; parsing it reproduces `self`.
    pub fn to_text(&self) -> String {
        self.entries()
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// SHA-256 of the canonical text, excluding keys that do not affect
    /// results (output directory and pool size).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if k == "experiment.out" || k == "experiment.workers" {
                continue;
            }
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.update(rng::ALGORITHM.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
