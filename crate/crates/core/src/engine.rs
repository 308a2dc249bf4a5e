//! The SRDO iteration: push, delayed coded worker gradients, scenario-aware
//! decoding at the servers, local step and consensus.
//!
//! Servers, partitions and workers are indexed from 0; a drawn partition of
//! `None` means the server reached no partition this iteration.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;

use crate::codec::{CodingScheme, FitSelection};
use crate::problem::PartitionedProblem;
use crate::rng::{self, Stream};
use crate::topology::{self, Adjacency, WeightMatrix};
use crate::trace::{Record, TrialTrace};
use crate::{analysis, Error, Real, Result};

/// `alpha_k = (k + a)^-theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub a: f64,
    pub theta: f64,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "stepsize offset a must be a finite nonnegative number, got {}",
                self.a
            )));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "stepsize exponent theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if self.a == 0.0 {
            return Err(Error::InvalidArgument(
                "stepsize offset a = 0 makes alpha_0 infinite".into(),
            ));
        }
        Ok(())
    }

    /// Whether the squared stepsizes fail to be summable.
    pub fn square_summable(&self) -> bool {
        self.theta > 0.5
    }
}

pub fn stepsize(schedule: &Schedule, k: usize) -> f64 {
    (k as f64 + schedule.a).powf(-schedule.theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    AllowedOnly,
    IgnoreStragglers,
    StaleGradients,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::AllowedOnly => "allowed_only",
            Policy::IgnoreStragglers => "ignore_stragglers",
            Policy::StaleGradients => "stale_gradients",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "allowed_only" => Some(Policy::AllowedOnly),
            "ignore_stragglers" => Some(Policy::IgnoreStragglers),
            "stale_gradients" => Some(Policy::StaleGradients),
            _ => None,
        }
    }
}

/// Gradient computation path taken by one server in one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// No partition reached: `x_i(k+1) = v_i(k)`.
    Disconnected,
    /// At most `s` stragglers: exact decoding.
    Allowed,
    /// More than `s` stragglers, missing workers dropped.
    Ignore,
    /// More than `s` stragglers, missing workers filled from the stale cache.
    Stale,
}

impl Scenario {
    pub fn index(self) -> usize {
        match self {
            Scenario::Disconnected => 0,
            Scenario::Allowed => 1,
            Scenario::Ignore => 2,
            Scenario::Stale => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Zero,
    /// Each server's entries uniform on [-1, 1].
    Uniform,
}

/// Which server's weighted average a worker evaluates its gradient at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourcePolicy {
    /// Uniform over all servers, per message.
    Uniform,
    /// The server that pulls the message.
    Puller,
}

#[derive(Debug, Clone)]
pub struct EngineParams {
    pub n_servers: usize,
    pub mu: f64,
    pub pi: f64,
    pub delay_bound: usize,
    /// Partition probabilities, entry 0 for "none".
    pub gamma: Vec<f64>,
    pub schedule: Schedule,
    pub policy: Policy,
    pub source: SourcePolicy,
    pub adjacency: Adjacency,
    pub edge_dropout: f64,
    pub init: Init,
    /// Stop once `max_i ||v_i(k+1) - v_i(k)|| <= tol`.
    pub early_stop: Option<f64>,
}

impl EngineParams {
    pub fn validate(&self, p: usize) -> Result<()> {
        let mut errs = Vec::new();
        if self.n_servers == 0 {
            errs.push("at least one server is required".to_string());
        }
        if self.adjacency.len() != self.n_servers {
            errs.push(format!(
                "adjacency describes {} servers but {} are configured",
                self.adjacency.len(),
                self.n_servers
            ));
        } else if !self.adjacency.is_connected() {
            errs.push("server graph must be connected".into());
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            errs.push(format!("consensus leakage mu must lie in (0, 1), got {}", self.mu));
        }
        if !(self.pi >= 0.0 && self.pi < 1.0) {
            errs.push(format!("straggler probability must lie in [0, 1), got {}", self.pi));
        }
        if !(self.edge_dropout >= 0.0 && self.edge_dropout < 1.0) {
            errs.push(format!("edge dropout must lie in [0, 1), got {}", self.edge_dropout));
        }
        if self.gamma.len() != p + 1 {
            errs.push(format!(
                "need {} partition probabilities (none + {p} partitions), got {}",
                p + 1,
                self.gamma.len()
            ));
        } else if let Err(e) = topology::validate_gamma(&self.gamma) {
            errs.push(e.to_string());
        }
        if let Err(e) = self.schedule.validate() {
            errs.push(e.to_string());
        }
        if let Some(t) = self.early_stop {
            if !(t >= 0.0) {
                errs.push(format!("early-stop tolerance must be nonnegative, got {t}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

/// Everything fixed for the duration of a trial.
#[derive(Debug, Clone)]
pub struct TrialContext<T: Real> {
    pub problem: PartitionedProblem<T>,
    /// One scheme per partition (replica 0).
    pub schemes: Vec<CodingScheme<T>>,
    pub weights: WeightMatrix<T>,
    pub x_star: DVector<T>,
    /// Global Lipschitz constant `L`.
    pub lipschitz: T,
    /// `max_i ||A_i||_inf ||B_i||_{2,inf}`.
    pub coding_norm: T,
    /// `max ||x* - x^{l,r}||` over subpartition minimizers.
    pub minimizer_gap: T,
}

impl<T: Real> TrialContext<T> {
    pub fn new(
        problem: PartitionedProblem<T>,
        schemes: Vec<CodingScheme<T>>,
        weights: WeightMatrix<T>,
    ) -> Result<Self> {
        if schemes.len() != problem.n_partitions() {
            return Err(Error::InvalidArgument(format!(
                "{} coding schemes for {} partitions",
                schemes.len(),
                problem.n_partitions()
            )));
        }
        for (i, sc) in schemes.iter().enumerate() {
            if sc.n_workers != problem.n_subpartitions(i, 0) {
                return Err(Error::InvalidArgument(format!(
                    "scheme of partition {i} has {} workers, partition has {} subpartitions",
                    sc.n_workers,
                    problem.n_subpartitions(i, 0)
                )));
            }
        }
        let x_star = problem.optimum()?;
        let minimizer_gap = problem.subpartition_minimizer_gap(&x_star)?;
        let lipschitz = problem.lipschitz().1;
        let coding_norm = schemes
            .iter()
            .map(|s| s.a_inf_norm() * s.b_2inf_norm())
            .fold(T::zero(), |a, b| a.max(b));
        Ok(Self {
            problem,
            schemes,
            weights,
            x_star,
            lipschitz,
            coding_norm,
            minimizer_gap,
        })
    }

    pub fn n_partitions(&self) -> usize {
        self.schemes.len()
    }
}

/// One coded gradient as received by a server.
#[derive(Debug, Clone)]
pub struct Message<T: Real> {
    pub worker: usize,
    pub source: usize,
    pub k_eval: usize,
    /// Subpartition gradients at the evaluation point, aligned with the
    /// encoder support of `worker`.
    pub components: Vec<DVector<T>>,
    pub coded: DVector<T>,
}

/// Result of one server's pull-and-decode.
#[derive(Debug, Clone)]
pub struct GradientEstimate<T: Real> {
    pub partition: Option<usize>,
    pub gradient: DVector<T>,
    pub scenario: Scenario,
    pub fit: Option<FitSelection>,
    /// Messages entering the decode, fresh or cached.
    pub contributions: Vec<Arc<Message<T>>>,
    /// `(worker, source, k_eval)` of each contribution.
    pub provenance: Vec<(usize, usize, usize)>,
    pub residual_eligible: bool,
}

/// Per-worker random draws of one server for one iteration.
#[derive(Debug, Clone, Copy)]
pub struct WorkerDraw {
    pub delay: usize,
    pub source: usize,
}

type CacheKey = (usize, usize, usize);

#[derive(Debug, Clone)]
pub struct EngineState<T: Real> {
    pub k: usize,
    pub v: Vec<DVector<T>>,
    pub x: Vec<DVector<T>>,
    /// `v` at iterations `k - depth + 1 ..= k`, oldest first.
    pub history: VecDeque<Arc<Vec<DVector<T>>>>,
    /// `max_q ||v_q - x*||` aligned with `history`.
    history_err: VecDeque<T>,
    pub stale_cache: Vec<BTreeMap<CacheKey, Arc<Message<T>>>>,
    pub policy: Policy,
    pub delay_bound: usize,
    streams: Streams,
}

#[derive(Debug, Clone)]
struct Streams {
    partition: Stream,
    stragglers: Stream,
    delays: Stream,
    source: Stream,
    dropout: Stream,
}

impl Streams {
    fn new(seed: u64) -> Self {
        Self {
            partition: rng::substream(seed, 0, rng::PARTITION),
            stragglers: rng::substream(seed, 0, rng::STRAGGLERS),
            delays: rng::substream(seed, 0, rng::DELAYS),
            source: rng::substream(seed, 0, rng::SOURCE),
            dropout: rng::substream(seed, 0, rng::DROPOUT),
        }
    }
}

/// Per-server outcome of a step, kept for tracing and tests.
#[derive(Debug, Clone)]
pub struct ServerStep<T: Real> {
    pub partition: Option<usize>,
    pub scenario: Scenario,
    pub stragglers: usize,
    /// `R_i(k)` from the residual expression.
    pub residual: DVector<T>,
    /// `||x_i(k+1) - v_i(k) + alpha grad f_i(v_i(k)) - R_i(k)||`.
    pub identity_gap: T,
    pub max_age: usize,
    /// Right-hand side of the universal residual bound.
    pub bound: T,
    /// Right-hand side without the minimizer term.
    pub bound_tight: T,
}

#[derive(Debug, Clone)]
pub struct StepReport<T: Real> {
    pub k: usize,
    pub alpha: T,
    pub servers: Vec<ServerStep<T>>,
    /// `max_{k-H <= kh <= k, q} ||v_q(kh) - x*||`.
    pub window_err: T,
    pub condition1: bool,
    pub max_move: T,
}

impl<T: Real> EngineState<T> {
    pub fn new(ctx: &TrialContext<T>, params: &EngineParams, seed: u64) -> Self {
        let n = params.n_servers;
        let dim = ctx.problem.dim();
        let v: Vec<DVector<T>> = match params.init {
            Init::Zero => vec![DVector::zeros(dim); n],
            Init::Uniform => {
                let mut r = rng::substream(seed, 0, rng::INIT);
                (0..n)
                    .map(|_| DVector::from_fn(dim, |_, _| T::lit(r.random_range(-1.0..=1.0))))
                    .collect()
            }
        };
        Self {
            k: 0,
            x: v.clone(),
            v,
            history: VecDeque::new(),
            history_err: VecDeque::new(),
            stale_cache: vec![BTreeMap::new(); n],
            policy: params.policy,
            delay_bound: params.delay_bound,
            streams: Streams::new(seed),
        }
    }

    fn push(&mut self, x_star: &DVector<T>) {
        let err = self
            .v
            .iter()
            .map(|vi| (vi - x_star).norm())
            .fold(T::zero(), |a, b| a.max(b));
        self.history.push_back(Arc::new(self.v.clone()));
        self.history_err.push_back(err);
        while self.history.len() > self.delay_bound + 1 {
            self.history.pop_front();
            self.history_err.pop_front();
        }
    }

    /// `v_q` at iteration `k_eval`, which must lie in the history window.
    pub fn v_at(&self, q: usize, k_eval: usize) -> &DVector<T> {
        let oldest = self.k + 1 - self.history.len();
        &self.history[k_eval - oldest][q]
    }

    fn window_err(&self) -> T {
        self.history_err.iter().fold(T::zero(), |a, &b| a.max(b))
    }
}

fn make_message<T: Real>(
    state: &EngineState<T>,
    problem: &PartitionedProblem<T>,
    scheme: &CodingScheme<T>,
    part: usize,
    w: usize,
    draw: WorkerDraw,
) -> Message<T> {
    let k_eval = state.k - draw.delay;
    let point = state.v_at(draw.source, k_eval);
    let dim = problem.dim();
    let mut coded = DVector::zeros(dim);
    let mut components = Vec::with_capacity(scheme.s + 1);
    for l in scheme.encoder_support(w) {
        let mut g = DVector::zeros(dim);
        problem.subpartition_gradient_into(part, 0, l, point, &mut g);
        coded.axpy(scheme.b[(w, l)], &g, T::one());
        components.push(g);
    }
    Message {
        worker: w,
        source: draw.source,
        k_eval,
        components,
        coded,
    }
}

/// Pull step of server `server` for partition `part`.
///
/// `connected` lists the workers whose coded gradients arrived; `draws[w]`
/// gives the delay and source server of worker `w`'s evaluation point.
pub fn compute_partition_gradient<T: Real>(
    state: &mut EngineState<T>,
    ctx: &TrialContext<T>,
    server: usize,
    part: usize,
    connected: &[usize],
    draws: &[WorkerDraw],
) -> GradientEstimate<T> {
    let scheme = &ctx.schemes[part];
    let n_w = scheme.n_workers;
    let missing = n_w - connected.len();
    let scenario = if missing <= scheme.s {
        Scenario::Allowed
    } else {
        match state.policy {
            Policy::StaleGradients => Scenario::Stale,
            _ => Scenario::Ignore,
        }
    };
    let fit = scheme.select_fit(connected);
    let k = state.k;
    let h = state.delay_bound;

    let fresh_for: Vec<usize> = if state.policy == Policy::StaleGradients {
        connected.to_vec()
    } else {
        fit.usable_workers.clone()
    };
    let fresh: Vec<Arc<Message<T>>> = fresh_for
        .iter()
        .map(|&w| Arc::new(make_message(state, &ctx.problem, scheme, part, w, draws[w])))
        .collect();

    let mut contributions: Vec<Arc<Message<T>>> = fresh
        .iter()
        .filter(|m| fit.usable_workers.contains(&m.worker))
        .cloned()
        .collect();

    if state.policy == Policy::StaleGradients {
        let cache = &mut state.stale_cache[server];
        cache.retain(|_, m| k - m.k_eval <= h);
        if scenario == Scenario::Stale {
            for &w in &fit.fit_support {
                if fit.usable_workers.contains(&w) {
                    continue;
                }
                if let Some(m) = cache.get(&(part, 0, w)) {
                    contributions.push(m.clone());
                }
            }
        }
        for m in &fresh {
            let key = (part, 0, m.worker);
            match cache.get(&key) {
                Some(old) if old.k_eval >= m.k_eval => {}
                _ => {
                    cache.insert(key, m.clone());
                }
            }
        }
    }
    contributions.sort_by_key(|m| m.worker);

    let dim = ctx.problem.dim();
    let mut gradient = DVector::zeros(dim);
    for m in &contributions {
        gradient.axpy(scheme.a[(fit.fit_index, m.worker)], &m.coded, T::one());
    }
    let provenance = contributions
        .iter()
        .map(|m| (m.worker, m.source, m.k_eval))
        .collect();
    GradientEstimate {
        partition: Some(part),
        gradient,
        scenario,
        fit: Some(fit),
        contributions,
        provenance,
        residual_eligible: true,
    }
}

/// `R_i(k) = -alpha sum_{w in fit} A_fit,w sum_l B_wl (g_l(eval_w) - g_l(v_i))`,
/// where a worker with no message contributes `g_l(eval_w) = 0`. Returns `R`
/// and the exact partition gradient at `v_i`.
pub fn residual<T: Real>(
    ctx: &TrialContext<T>,
    part: usize,
    estimate: &GradientEstimate<T>,
    v_i: &DVector<T>,
    alpha: T,
) -> (DVector<T>, DVector<T>) {
    let scheme = &ctx.schemes[part];
    let dim = ctx.problem.dim();
    let at_v: Vec<DVector<T>> = (0..scheme.n_workers)
        .map(|l| {
            let mut g = DVector::zeros(dim);
            ctx.problem.subpartition_gradient_into(part, 0, l, v_i, &mut g);
            g
        })
        .collect();
    let exact = at_v.iter().fold(DVector::zeros(dim), |a, g| a + g);
    let mut r = DVector::zeros(dim);
    if let Some(fit) = &estimate.fit {
        for &w in &fit.fit_support {
            let aw = scheme.a[(fit.fit_index, w)];
            let msg = estimate.contributions.iter().find(|m| m.worker == w);
            for (t, l) in scheme.encoder_support(w).into_iter().enumerate() {
                let c = aw * scheme.b[(w, l)];
                if let Some(m) = msg {
                    r.axpy(c, &m.components[t], T::one());
                }
                r.axpy(-c, &at_v[l], T::one());
            }
        }
    }
    r *= -alpha;
    (r, exact)
}

/// One full iteration `k -> k+1`.
pub fn step<T: Real>(
    state: &mut EngineState<T>,
    ctx: &TrialContext<T>,
    params: &EngineParams,
) -> StepReport<T> {
    state.push(&ctx.x_star);
    let k = state.k;
    let h = state.delay_bound;
    for cache in &mut state.stale_cache {
        cache.retain(|_, m| k - m.k_eval <= h);
    }
    let alpha = T::lit(stepsize(&params.schedule, k));
    let window_err = state.window_err();
    let condition1 = ctx.minimizer_gap <= window_err;
    let two = T::lit(2.0);
    let bound_tight = alpha * ctx.coding_norm * two * ctx.lipschitz * window_err;
    let bound = bound_tight + alpha * ctx.coding_norm * ctx.lipschitz * ctx.minimizer_gap;

    let n = params.n_servers;
    let mut servers = Vec::with_capacity(n);
    let mut x_next = Vec::with_capacity(n);
    for i in 0..n {
        let drawn = topology::sample_partition_assignment(&mut state.streams.partition, &params.gamma);
        // draws are taken for the widest replica whatever the outcome, so the
        // streams stay aligned across policies
        let n_w = if drawn == 0 { 0 } else { ctx.schemes[drawn - 1].n_workers };
        let n_max = ctx.schemes.iter().map(|s| s.n_workers).max().unwrap_or(0);
        let strag_all = topology::sample_stragglers(&mut state.streams.stragglers, params.pi, n_max);
        let draws: Vec<WorkerDraw> = (0..n_max)
            .map(|_| {
                let delay = topology::sample_delay(&mut state.streams.delays, params.delay_bound, k);
                let q = state.streams.source.random_range(0..n);
                WorkerDraw {
                    delay,
                    source: match params.source {
                        SourcePolicy::Uniform => q,
                        SourcePolicy::Puller => i,
                    },
                }
            })
            .collect();
        let vi = state.v[i].clone();
        if drawn == 0 {
            x_next.push(vi);
            servers.push(ServerStep {
                partition: None,
                scenario: Scenario::Disconnected,
                stragglers: 0,
                residual: DVector::zeros(ctx.problem.dim()),
                identity_gap: T::zero(),
                max_age: 0,
                bound,
                bound_tight,
            });
            continue;
        }
        let part = drawn - 1;
        let scheme = &ctx.schemes[part];
        let mut strag: Vec<usize> = strag_all.into_iter().filter(|&w| w < n_w).collect();
        if params.policy == Policy::AllowedOnly {
            strag.truncate(scheme.s);
        }
        let connected: Vec<usize> = (0..n_w).filter(|w| !strag.contains(w)).collect();
        let est = compute_partition_gradient(state, ctx, i, part, &connected, &draws[..n_w]);
        let xi = &vi - &est.gradient * alpha;
        let (r, exact) = residual(ctx, part, &est, &vi, alpha);
        let identity_gap = (&xi - &vi + &exact * alpha - &r).norm();
        let max_age = est.provenance.iter().map(|&(_, _, ke)| k - ke).max().unwrap_or(0);
        servers.push(ServerStep {
            partition: Some(part),
            scenario: est.scenario,
            stragglers: strag.len(),
            residual: r,
            identity_gap,
            max_age,
            bound,
            bound_tight,
        });
        x_next.push(xi);
    }

    let w = if params.edge_dropout > 0.0 {
        let adj = params.adjacency.dropout(&mut state.streams.dropout, params.edge_dropout);
        topology::realised_weight_matrix(&adj, ctx.weights.mu).w
    } else {
        ctx.weights.w.clone()
    };
    let dim = ctx.problem.dim();
    let mut max_move = T::zero();
    let mut v_next = Vec::with_capacity(n);
    for i in 0..n {
        let mut vi = DVector::zeros(dim);
        for (j, xj) in x_next.iter().enumerate() {
            let wij = w[(i, j)];
            if wij != T::zero() {
                vi.axpy(wij, xj, T::one());
            }
        }
        max_move = max_move.max((&vi - &state.v[i]).norm());
        v_next.push(vi);
    }
    state.x = x_next;
    state.v = v_next;
    state.k += 1;
    StepReport {
        k,
        alpha,
        servers,
        window_err,
        condition1,
        max_move,
    }
}

fn record_state<T: Real>(state: &EngineState<T>, ctx: &TrialContext<T>) -> Record {
    let x_o = &ctx.problem.x_o;
    let xs: Vec<_> = state.x.iter().collect();
    let mut rec = Record::initial(state.k);
    rec.ae = analysis::absolute_error(&xs, x_o).as_f64();
    rec.ce = analysis::consensus_error(&xs, x_o).as_f64();
    rec.sumsq_v_err = state
        .v
        .iter()
        .map(|v| (v - &ctx.x_star).norm_squared())
        .fold(T::zero(), |a, b| a + b)
        .as_f64();
    rec
}

/// Runs `iters` iterations of SRDO; record `k` holds the state after `k`
/// steps and the diagnostics of the step that produced it.
pub fn run_trial<T: Real>(
    ctx: &TrialContext<T>,
    params: &EngineParams,
    seed: u64,
    iters: usize,
) -> TrialTrace {
    let mut state = EngineState::new(ctx, params, seed);
    let mut trace = TrialTrace::new("srdo", seed);
    trace.records.push(record_state(&state, ctx));
    for _ in 0..iters {
        let rep = step(&mut state, ctx, params);
        let mut rec = record_state(&state, ctx);
        rec.alpha = rep.alpha.as_f64();
        rec.window_err = rep.window_err.as_f64();
        rec.condition1 = rep.condition1;
        for s in &rep.servers {
            rec.scenario_counts[s.scenario.index()] += 1;
            rec.stragglers += s.stragglers;
            rec.partitions.push(s.partition.map(|p| p as i64 + 1).unwrap_or(0));
            if s.scenario != Scenario::Disconnected {
                let rn = s.residual.norm();
                rec.max_r_norm = rec.max_r_norm.max(rn.as_f64());
                rec.identity_gap = rec.identity_gap.max(s.identity_gap.as_f64());
                rec.max_age = rec.max_age.max(s.max_age);
                let slack = (s.bound - rn).as_f64();
                rec.min_slack = rec.min_slack.min(slack);
                if rn.as_f64() > s.bound.as_f64() * (1.0 + 1e-9) {
                    rec.violations += 1;
                }
                if rn.as_f64() > s.bound_tight.as_f64() * (1.0 + 1e-9) {
                    rec.tight_violations += 1;
                }
                if s.scenario == Scenario::Ignore && !rep.condition1 {
                    rec.division2 = true;
                }
            }
        }
        rec.bound_rhs = rep.servers.first().map(|s| s.bound.as_f64()).unwrap_or(0.0);
        trace.records.push(rec);
        if let Some(tol) = params.early_stop {
            if rep.max_move.as_f64() <= tol {
                break;
            }
        }
    }
    trace
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    FullNoFailures,
    SameFailures,
}

impl BaselineMode {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMode::FullNoFailures => "full_no_failures",
            BaselineMode::SameFailures => "same_failures",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full_no_failures" => Some(BaselineMode::FullNoFailures),
            "same_failures" => Some(BaselineMode::SameFailures),
            _ => None,
        }
    }
}

/// Centralized gradient descent on a single estimate. `SameFailures` drops
/// the subpartition gradients of stragglers drawn per (iteration, partition)
/// with the same probability as SRDO's workers, without coding.
pub fn run_centralized_baseline<T: Real>(
    ctx: &TrialContext<T>,
    params: &EngineParams,
    mode: BaselineMode,
    seed: u64,
    iters: usize,
) -> TrialTrace {
    let dim = ctx.problem.dim();
    let x_o = &ctx.problem.x_o;
    let mut x: DVector<T> = match params.init {
        Init::Zero => DVector::zeros(dim),
        Init::Uniform => {
            let mut r = rng::substream(seed, 0, rng::INIT);
            DVector::from_fn(dim, |_, _| T::lit(r.random_range(-1.0..=1.0)))
        }
    };
    let mut strag_rng = rng::substream(seed, 0, rng::STRAGGLERS);
    let mut trace = TrialTrace::new(mode.name(), seed);
    let rec_of = |x: &DVector<T>, k: usize| {
        let mut rec = Record::initial(k);
        rec.ae = analysis::absolute_error(&[x], x_o).as_f64();
        rec.ce = 0.0;
        rec.sumsq_v_err = (x - &ctx.x_star).norm_squared().as_f64();
        rec
    };
    trace.records.push(rec_of(&x, 0));
    let mut g = DVector::zeros(dim);
    let mut tmp = DVector::zeros(dim);
    for k in 0..iters {
        let alpha = T::lit(stepsize(&params.schedule, k));
        let mut stragglers = 0;
        match mode {
            BaselineMode::FullNoFailures => ctx.problem.full_gradient_into(&x, &mut g),
            BaselineMode::SameFailures => {
                g.fill(T::zero());
                for (part, sc) in ctx.schemes.iter().enumerate() {
                    let strag = topology::sample_stragglers(&mut strag_rng, params.pi, sc.n_workers);
                    stragglers += strag.len();
                    for l in (0..sc.n_workers).filter(|l| !strag.contains(l)) {
                        ctx.problem.subpartition_gradient_into(part, 0, l, &x, &mut tmp);
                        g += &tmp;
                    }
                }
            }
        }
        let prev = x.clone();
        x.axpy(-alpha, &g, T::one());
        let mut rec = rec_of(&x, k + 1);
        rec.alpha = alpha.as_f64();
        rec.stragglers = stragglers;
        trace.records.push(rec);
        if let Some(tol) = params.early_stop {
            if (&x - &prev).norm().as_f64() <= tol {
                break;
            }
        }
    }
    trace
}
