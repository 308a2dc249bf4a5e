//! Error metrics, residual-bound audits and the theoretical bound sequences
//! overlaid on simulated traces.

mod audit;
mod martingale;
mod rate;

pub use audit::{audit_csv, audit_trace, AuditConstants, AuditReport};
pub use martingale::{martingale_bound_1, martingale_bound_2, BoundSequence};
pub use rate::{
    attach_envelopes, first_contracting_index, rate_base_scenario1, rate_lemma6_limit,
    rho3_eta3, theoretical_rate_scenario1, Envelope, RateInputs, Rho3Eta3,
};

use nalgebra::DVector;

use crate::Real;

/// `max_i ||x_i - x_o|| / ||x_o||`. Returns NaN when `x_o = 0`.
pub fn absolute_error<T: Real>(xs: &[&DVector<T>], x_o: &DVector<T>) -> T {
    let denom = x_o.norm();
    if denom == T::zero() {
        return T::lit(f64::NAN);
    }
    xs.iter()
        .map(|x| (*x - x_o).norm())
        .fold(T::zero(), |a, b| a.max(b))
        / denom
}

/// `max_i ||x_i - mean(x)|| / ||x_o||`. Returns NaN when `x_o = 0`.
pub fn consensus_error<T: Real>(xs: &[&DVector<T>], x_o: &DVector<T>) -> T {
    let denom = x_o.norm();
    if denom == T::zero() || xs.is_empty() {
        return T::lit(f64::NAN);
    }
    let mut mean = DVector::<T>::zeros(x_o.len());
    for x in xs {
        mean += *x;
    }
    mean /= T::lit(xs.len() as f64);
    xs.iter()
        .map(|x| (*x - &mean).norm())
        .fold(T::zero(), |a, b| a.max(b))
        / denom
}

/// Checked variant of [`absolute_error`] and [`consensus_error`].
pub fn errors<T: Real>(xs: &[&DVector<T>], x_o: &DVector<T>) -> crate::Result<(T, T)> {
    if x_o.norm() == T::zero() {
        return Err(crate::Error::InvalidArgument(
            "ground truth x_o is zero; relative errors are undefined".into(),
        ));
    }
    Ok((absolute_error(xs, x_o), consensus_error(xs, x_o)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn metric_examples() {
        let x_o: DVector<f64> = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let same = [&x_o, &x_o];
        assert_eq!(errors(&same, &x_o).unwrap(), (0.0, 0.0));
        let twice = &x_o * 2.0;
        let (ae, ce) = errors(&[&twice, &twice], &x_o).unwrap();
        assert!((ae - 1.0).abs() < 1e-15);
        assert_eq!(ce, 0.0);
        let zero = DVector::zeros(3);
        let (ae, ce) = errors(&[&x_o, &zero], &x_o).unwrap();
        assert!((ae - 1.0).abs() < 1e-15);
        assert!((ce - 0.5).abs() < 1e-15);
        assert!(errors(&[&x_o], &zero).is_err());
    }

    proptest! {
        #[test]
        fn metrics_scale_invariant(
            vals in proptest::collection::vec(-5.0f64..5.0, 12),
            c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0],
        ) {
            let x_o = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
            let xs: Vec<DVector<f64>> = vals.chunks(4).map(|v| DVector::from_vec(v.to_vec())).collect();
            let refs: Vec<&DVector<f64>> = xs.iter().collect();
            let (ae, ce) = errors(&refs, &x_o).unwrap();
            let scaled: Vec<DVector<f64>> = xs.iter().map(|x| x * c).collect();
            let sref: Vec<&DVector<f64>> = scaled.iter().collect();
            let (ae2, ce2) = errors(&sref, &(&x_o * c)).unwrap();
            prop_assert!((ae - ae2).abs() <= 1e-12 * ae.max(1.0));
            prop_assert!((ce - ce2).abs() <= 1e-12 * ce.max(1.0));
        }
    }
}
