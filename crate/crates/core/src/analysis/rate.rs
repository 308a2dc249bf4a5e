//! Convergence-rate envelopes overlaid on `sum_i ||v_i(k) - x*||^2`.

use crate::engine::{stepsize, Schedule};
use crate::trace::TrialTrace;
use crate::{Error, Result};

use super::martingale::{martingale_bound_1, BoundSequence};

/// Constants entering the rate expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct RateInputs {
    pub lipschitz: f64,
    /// `max ||A||_inf ||B||_{2,inf}`.
    pub coding_norm: f64,
    pub mu: f64,
    pub gamma0: f64,
    pub gamma_max: f64,
    pub p: usize,
    pub n_servers: usize,
    pub delay_bound: usize,
    pub schedule: Schedule,
    /// `max_i ||x* - xbar^(i)||` over partition minimizers.
    pub partition_gap: f64,
    /// `max ||x* - x^{l,r}||` over subpartition minimizers.
    pub minimizer_gap: f64,
    /// Size of the index set `I` in the additive constant.
    pub index_set_size: usize,
}

/// Outcome of an envelope construction.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    Vacuous { reason: String },
    Active { base: f64, kbar: usize, bound: BoundSequence },
}

impl Envelope {
    pub fn is_vacuous(&self) -> bool {
        matches!(self, Envelope::Vacuous { .. })
    }

    pub fn value_at(&self, k: usize) -> Option<f64> {
        match self {
            Envelope::Active { bound, .. } if k >= bound.start() => Some(bound.bound_at(k)),
            _ => None,
        }
    }
}

/// `1 - mu + 4 (1-gamma0) L alpha kappa (1 + 2 L alpha kappa)`.
pub fn rate_base_scenario1(lipschitz: f64, coding_norm: f64, mu: f64, gamma0: f64, alpha: f64) -> f64 {
    let t = lipschitz * alpha * coding_norm;
    1.0 - mu + 4.0 * (1.0 - gamma0) * t * (1.0 + 2.0 * t)
}

/// Smallest `k` in `from..until` with `base(alpha_k) < 1`.
pub fn first_contracting_index(
    schedule: &Schedule,
    from: usize,
    until: usize,
    base: impl Fn(f64) -> f64,
) -> Option<usize> {
    if from >= until {
        return None;
    }
    // base is increasing in alpha and alpha is decreasing in k
    if base(stepsize(schedule, until - 1)) >= 1.0 {
        return None;
    }
    let (mut lo, mut hi) = (from, until - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if base(stepsize(schedule, mid)) < 1.0 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

/// Geometric envelope `base^(k/(H+1)) V0`, `k >= kbar1 + H + 1`, with `base`
/// evaluated at `alpha_kbar1` and `V0` built from `v` on the window ending at
/// `kbar1`. Returns a vacuous report when `base >= 1`.
pub fn theoretical_rate_scenario1(
    inputs: &RateInputs,
    alpha_kbar1: f64,
    kbar1: usize,
    v: &[f64],
) -> Result<Envelope> {
    let base = rate_base_scenario1(
        inputs.lipschitz,
        inputs.coding_norm,
        inputs.mu,
        inputs.gamma0,
        alpha_kbar1,
    );
    if !(base < 1.0) {
        return Ok(Envelope::Vacuous {
            reason: format!("contraction base {base} is not below 1 at alpha = {alpha_kbar1}"),
        });
    }
    let h = inputs.delay_bound;
    if kbar1 < h || kbar1 >= v.len() {
        return Err(Error::Precondition(format!(
            "burn-in index {kbar1} must lie in [{h}, {})",
            v.len()
        )));
    }
    // a1 + a2 = base with a2 carried by the delayed window
    let a2 = vec![0.0; kbar1 + 1];
    let bound = martingale_bound_1(base, &a2, h, kbar1, v)?;
    Ok(Envelope::Active {
        base,
        kbar: kbar1,
        bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rho3Eta3 {
    /// `rho_3^(H+1)`.
    pub rho_pow: f64,
    pub rho: f64,
    pub eta31: f64,
    pub eta32: f64,
    pub eta: f64,
    pub vacuous: bool,
}

/// General-rate constants at stepsize `alpha`; the denominator is taken as
/// `1 - rho_3^(H+1)` and a nonpositive value marks the bound vacuous.
pub fn rho3_eta3(inputs: &RateInputs, alpha: f64) -> Rho3Eta3 {
    let p = inputs.p as f64;
    let n = inputs.n_servers as f64;
    let l = inputs.lipschitz;
    let kappa = inputs.coding_norm;
    let g0 = 1.0 - inputs.gamma0;
    let rho_pow = (1.0 - inputs.mu)
        + 4.0 * p * l * alpha * kappa
        + 8.0 * p * g0 * l * l * alpha * alpha * kappa * kappa
        + 8.0 * g0 * alpha * alpha * p * inputs.gamma_max * l * l
        + alpha * (1.0 + 4.0 * g0 * alpha * l) * p * l;
    let rho = rho_pow.powf(1.0 / (inputs.delay_bound as f64 + 1.0));
    let eta31 = 2.0
        * alpha
        * n
        * (inputs.index_set_size as f64 + 2.0 * p)
        * inputs.gamma_max
        * l
        * inputs.partition_gap.powi(2)
        + alpha * n * (1.0 + 4.0 * g0 * alpha * l * kappa) * p * l * kappa
            * inputs.minimizer_gap.powi(2)
            / (1.0 - inputs.mu);
    let eta32 = 1.0 - rho_pow;
    let vacuous = !(eta32 > 0.0);
    Rho3Eta3 {
        rho_pow,
        rho,
        eta31,
        eta32,
        eta: if vacuous { f64::INFINITY } else { eta31 / eta32 },
        vacuous,
    }
}

/// `(1/(1-c)) limsup u`, the limsup taken as the maximum over the final 10%
/// of `u` (at least 50 samples, or all of `u` if shorter).
pub fn rate_lemma6_limit(c: f64, u: &[f64]) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidArgument(format!("c must lie in (0, 1), got {c}")));
    }
    if u.is_empty() {
        return Ok(0.0);
    }
    let window = ((u.len() as f64 * 0.1).ceil() as usize).max(50).min(u.len());
    let tail = u[u.len() - window..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(tail.max(0.0) / (1.0 - c))
}

/// Envelopes for a whole trace: the Scenario-1 rate and the general
/// `rho_3^k V0 + alpha_k eta_3` overlay.
pub fn envelopes_for(inputs: &RateInputs, v: &[f64]) -> (Envelope, Envelope) {
    let h = inputs.delay_bound;
    let len = v.len();
    let s1 = |alpha: f64| {
        rate_base_scenario1(inputs.lipschitz, inputs.coding_norm, inputs.mu, inputs.gamma0, alpha)
    };
    let env1 = match first_contracting_index(&inputs.schedule, h, len, s1) {
        None => Envelope::Vacuous {
            reason: format!(
                "contraction base is not below 1 for any k in [{h}, {len}); base at the last step {}",
                s1(stepsize(&inputs.schedule, len.saturating_sub(1)))
            ),
        },
        Some(kbar) => theoretical_rate_scenario1(inputs, stepsize(&inputs.schedule, kbar), kbar, v)
            .unwrap_or_else(|e| Envelope::Vacuous {
                reason: e.to_string(),
            }),
    };
    let r3 = |alpha: f64| rho3_eta3(inputs, alpha).rho_pow;
    let env2 = match first_contracting_index(&inputs.schedule, h, len, r3) {
        None => Envelope::Vacuous {
            reason: "rho_3 is not below 1 for any k in the trace".into(),
        },
        Some(kbar) => {
            let alpha = stepsize(&inputs.schedule, kbar);
            let c = rho3_eta3(inputs, alpha);
            let a2 = vec![0.0; kbar + 1];
            match martingale_bound_1(c.rho_pow, &a2, h, kbar, v) {
                Ok(mut b) => {
                    b.eta = c.eta;
                    b.b_schedule = Some((inputs.schedule.a, inputs.schedule.theta));
                    Envelope::Active {
                        base: c.rho_pow,
                        kbar,
                        bound: b,
                    }
                }
                Err(e) => Envelope::Vacuous {
                    reason: e.to_string(),
                },
            }
        }
    };
    (env1, env2)
}

/// Fill `bound_env_1` / `bound_env_2` of every record and return both envelopes.
pub fn attach_envelopes(trace: &mut TrialTrace, inputs: &RateInputs) -> (Envelope, Envelope) {
    let v: Vec<f64> = trace.records.iter().map(|r| r.sumsq_v_err).collect();
    let (e1, e2) = envelopes_for(inputs, &v);
    for r in &mut trace.records {
        r.bound_env_1 = e1.value_at(r.k);
        r.bound_env_2 = e2.value_at(r.k);
    }
    (e1, e2)
}
