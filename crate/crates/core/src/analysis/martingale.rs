//! Envelopes for delayed-max recursions
//! `v_{k+1} <= a1 v_k + a2_k max_{k-B <= j <= k} v_j (+ a3_k)`.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSequence {
    pub rho: f64,
    pub v0: f64,
    pub eta: f64,
    pub kbar: usize,
    pub window: usize,
    /// Offset `a` and exponent `theta` of `b_k = (k + a)^-theta`; absent
    /// when there is no additive term.
    pub b_schedule: Option<(f64, f64)>,
}

impl BoundSequence {
    /// First index from which `bound_at` is claimed to hold.
    pub fn start(&self) -> usize {
        self.kbar + self.window + 1
    }

    pub fn b(&self, k: usize) -> f64 {
        match self.b_schedule {
            Some((a, theta)) => (k as f64 + a).powf(-theta),
            None => 0.0,
        }
    }

    /// `rho^k V0 + b_k eta`.
    pub fn bound_at(&self, k: usize) -> f64 {
        self.rho.powf(k as f64) * self.v0 + self.b(k) * self.eta
    }

    /// `(k, bound)` for `start() <= k < horizon`.
    pub fn emit(&self, horizon: usize) -> Vec<(usize, f64)> {
        (self.start()..horizon).map(|k| (k, self.bound_at(k))).collect()
    }
}

fn check_common(a1: f64, a2: &[f64], window: usize, kbar: usize, v: &[f64]) -> Result<()> {
    let mut errs = Vec::new();
    if kbar < window {
        errs.push(format!("burn-in index kbar={kbar} must be at least the window B={window}"));
    }
    if v.len() <= kbar {
        errs.push(format!(
            "sequence has {} values, needs entries up to kbar={kbar}",
            v.len()
        ));
    }
    if v.iter().any(|&x| !(x >= 0.0)) {
        errs.push("sequence values must be nonnegative".into());
    }
    if !(a1 >= 0.0) {
        errs.push(format!("a1 must be nonnegative, got {a1}"));
    }
    if a2.len() <= kbar {
        errs.push(format!("a2 needs entries up to kbar={kbar}, has {}", a2.len()));
    }
    if a2.iter().any(|&x| !(x >= 0.0)) {
        errs.push("a2 must be nonnegative".into());
    }
    if a2.windows(2).any(|w| w[1] > w[0]) {
        errs.push("a2 must be nonincreasing".into());
    }
    if a2.iter().any(|&x| a1 + x > 1.0) {
        errs.push("a1 + a2_k must not exceed 1".into());
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "bound not applicable: {}",
            errs.join("; ")
        )))
    }
}

/// `rho = (a1 + a2_kbar)^(1/(B+1))` and the window constant: the values at
/// `kbar-B ..= kbar`, sorted descending, are assigned exponents
/// `kbar, kbar+1, ..`, and `V0 = max v / rho^exponent`.
fn rho_v0(a1: f64, a2_kbar: f64, window: usize, kbar: usize, v: &[f64]) -> Result<(f64, f64)> {
    let base = a1 + a2_kbar;
    let rho = base.powf(1.0 / (window as f64 + 1.0));
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Precondition(format!(
            "bound not applicable: rho = {rho} is outside (0, 1)"
        )));
    }
    let mut win: Vec<f64> = v[kbar - window..=kbar].to_vec();
    win.sort_by(|a, b| b.total_cmp(a));
    let v0 = win
        .iter()
        .enumerate()
        .map(|(j, &x)| x / rho.powf((kbar + j) as f64))
        .fold(0.0f64, f64::max);
    Ok((rho, v0))
}

/// Envelope `v_k <= rho^k V0` for `k >= kbar + B + 1`.
pub fn martingale_bound_1(
    a1: f64,
    a2: &[f64],
    window: usize,
    kbar: usize,
    v: &[f64],
) -> Result<BoundSequence> {
    check_common(a1, a2, window, kbar, v)?;
    let (rho, v0) = rho_v0(a1, a2[kbar], window, kbar, v)?;
    Ok(BoundSequence {
        rho,
        v0,
        eta: 0.0,
        kbar,
        window,
        b_schedule: None,
    })
}

/// Envelope `v_k <= rho^k V0 + b_k eta` for `k >= kbar + B + 1`, where
/// `b_k = (k + b_offset)^-theta`.
///
/// The hypotheses are `a1 + a2_kbar <= (1 - 1/l)/(B+2)^theta`, `l >= 1`,
/// `theta in (0, 1]`. `eta` is the larger of `sup a3 / (1 - a1 - a2_kbar)`
/// and the smallest value with `a3_k <= b_{k+1} eta / l` for every given k.
#[allow(clippy::too_many_arguments)]
pub fn martingale_bound_2(
    a1: f64,
    a2: &[f64],
    a3: &[f64],
    window: usize,
    kbar: usize,
    b_offset: f64,
    l: f64,
    theta: f64,
    v: &[f64],
) -> Result<BoundSequence> {
    check_common(a1, a2, window, kbar, v)?;
    let mut errs = Vec::new();
    if !(l >= 1.0) {
        errs.push(format!("l must be at least 1, got {l}"));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        errs.push(format!("theta must lie in (0, 1], got {theta}"));
    }
    if !(b_offset > 0.0) {
        errs.push(format!("b_k offset must be positive, got {b_offset}"));
    }
    if a3.iter().any(|&x| !(x >= 0.0)) {
        errs.push("a3 must be nonnegative".into());
    }
    if errs.is_empty() {
        let c = (1.0 - 1.0 / l) / (window as f64 + 2.0).powf(theta);
        if a1 + a2[kbar] > c {
            errs.push(format!(
                "a1 + a2_kbar = {} exceeds (1 - 1/l)/(B+2)^theta = {c}",
                a1 + a2[kbar]
            ));
        }
    }
    if !errs.is_empty() {
        return Err(Error::Precondition(format!(
            "bound not applicable: {}",
            errs.join("; ")
        )));
    }
    let (rho, v0) = rho_v0(a1, a2[kbar], window, kbar, v)?;
    let b = |k: usize| (k as f64 + b_offset).powf(-theta);
    let a3_sup = a3.iter().copied().fold(0.0f64, f64::max);
    let eta_sup = a3_sup / (1.0 - a1 - a2[kbar]);
    let eta_min = a3
        .iter()
        .enumerate()
        .map(|(k, &x)| l * x / b(k + 1))
        .fold(0.0f64, f64::max);
    Ok(BoundSequence {
        rho,
        v0,
        eta: eta_sup.max(eta_min),
        kbar,
        window,
        b_schedule: Some((b_offset, theta)),
    })
}
