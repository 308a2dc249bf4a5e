//! Residual-norm audit along traces.
//!
//! The universal bound checked at every step is
//! `||R_i(k)|| <= alpha_k * kappa * (2 L W_k + L gap)` with
//! `kappa = max ||A||_inf ||B||_{2,inf}`, `W_k` the largest `||v_q(j) - x*||`
//! over servers `q` and `k - H <= j <= k`, and `gap = max ||x* - x^{l,r}||`.

use serde::{Deserialize, Serialize};

use crate::engine::TrialContext;
use crate::trace::{CsvRow, TrialTrace};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConstants {
    pub lipschitz: f64,
    pub coding_norm: f64,
    pub minimizer_gap: f64,
    pub delay_bound: usize,
}

impl AuditConstants {
    pub fn from_context<T: Real>(ctx: &TrialContext<T>, delay_bound: usize) -> Self {
        Self {
            lipschitz: ctx.lipschitz.as_f64(),
            coding_norm: ctx.coding_norm.as_f64(),
            minimizer_gap: ctx.minimizer_gap.as_f64(),
            delay_bound,
        }
    }

    pub fn rhs(&self, alpha: f64, window_err: f64) -> f64 {
        alpha
            * self.coding_norm
            * (2.0 * self.lipschitz * window_err + self.lipschitz * self.minimizer_gap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    /// `(k, passed, slack)` per audited record.
    pub per_iteration: Vec<(usize, bool, f64)>,
    pub violations: usize,
    pub min_slack: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

const REL_TOL: f64 = 1e-9;

/// Audit from the exact per-server quantities logged by the engine.
pub fn audit_trace(trace: &TrialTrace) -> AuditReport {
    let mut per = Vec::new();
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    for r in trace.records.iter().skip(1) {
        let active = r.scenario_counts[1] + r.scenario_counts[2] + r.scenario_counts[3];
        if active == 0 {
            continue;
        }
        violations += r.violations;
        min_slack = min_slack.min(r.min_slack);
        per.push((r.k, r.violations == 0, r.min_slack));
    }
    AuditReport {
        per_iteration: per,
        violations,
        min_slack,
    }
}

/// Audit from a trace CSV. The window term uses `sqrt(sumsq_v_err)`, an
/// upper bound on the per-server maximum, so a reported violation is a
/// violation of the exact bound as well.
pub fn audit_csv(rows: &[CsvRow], c: &AuditConstants) -> AuditReport {
    let proxy: Vec<f64> = rows.iter().map(|r| r.sumsq_v_err.sqrt()).collect();
    let mut per = Vec::new();
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    for (idx, r) in rows.iter().enumerate().skip(1) {
        let active = r.scenario_counts[1] + r.scenario_counts[2] + r.scenario_counts[3];
        if active == 0 {
            continue;
        }
        let hi = idx - 1;
        let lo = hi.saturating_sub(c.delay_bound);
        let w = proxy[lo..=hi].iter().copied().fold(0.0f64, f64::max);
        let rhs = c.rhs(r.alpha, w);
        let slack = rhs - r.max_r_norm;
        let ok = r.max_r_norm <= rhs * (1.0 + REL_TOL);
        if !ok {
            violations += 1;
        }
        min_slack = min_slack.min(slack);
        per.push((r.k, ok, slack));
    }
    AuditReport {
        per_iteration: per,
        violations,
        min_slack,
    }
}
