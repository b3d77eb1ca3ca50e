//! Memory kernels over a history of past consumption times.
//!
//! Two quantities are computed from the same history:
//!
//! ```text
//! base level:       B(t) = ln  sum_j 1[t > t_j] (t - t_j)^(-d)
//! exposure kernel:  K(t) =     sum_j 1[t > t_j] (t - t_j + c)^(-d)
//! ```
//!
//! The base level is the ACT-R activation used by the analysis curves and
//! the BL baselines. The exposure kernel drops the logarithm and adds a
//! cutoff `c`, so it is bounded by `n * c^(-d)` and zero for an empty history.

use crate::error::{Error, Result};

/// Default decay, fixed during training.
pub const DEFAULT_DECAY: f64 = 0.5;

/// Owned, validated history of past positive-consumption times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History(Vec<f64>);

impl History {
    /// Times must be finite, non-negative and strictly increasing.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Validation(format!(
                    "history time {t} at position {i} is not a finite non-negative value"
                )));
            }
            if i > 0 && times[i - 1] >= t {
                return Err(Error::Validation(format!(
                    "history is not strictly increasing at position {i}"
                )));
            }
        }
        Ok(History(times))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Appends a new event; it must be later than every stored time.
    pub fn push(&mut self, t: f64) -> Result<()> {
        if let Some(&last) = self.0.last() {
            if t <= last {
                return Err(Error::Validation(format!(
                    "event at {t} is not after last event {last}"
                )));
            }
        }
        self.0.push(t);
        Ok(())
    }
}

impl AsRef<[f64]> for History {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// ACT-R base-level activation at time `t`.
///
/// Only events strictly before `t` contribute. When none do, the result is
/// `f64::NEG_INFINITY`, which orders below every finite activation.
pub fn base_level(history: &[f64], t: f64, decay: f64) -> f64 {
    let sum: f64 = history
        .iter()
        .filter(|&&tj| t > tj)
        .map(|&tj| (t - tj).powf(-decay))
        .sum();
    if sum > 0.0 {
        sum.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Exposure kernel with cutoff `c` at time `t`. Zero for an empty effective history.
pub fn exposure_kernel(history: &[f64], t: f64, cutoff: f64, decay: f64) -> f64 {
    history
        .iter()
        .filter(|&&tj| t > tj)
        .map(|&tj| (t - tj + cutoff).powf(-decay))
        .sum()
}

/// Exposure kernel together with its derivative with respect to the cutoff.
pub(crate) fn exposure_kernel_with_cutoff_grad(
    history: &[f64],
    t: f64,
    cutoff: f64,
    decay: f64,
) -> (f64, f64) {
    let mut value = 0.0;
    let mut d_cutoff = 0.0;
    for &tj in history {
        if t > tj {
            let x = t - tj + cutoff;
            let term = x.powf(-decay);
            value += term;
            d_cutoff += -decay * term / x;
        }
    }
    (value, d_cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn base_level_of_empty_history_is_sentinel() {
        assert_eq!(base_level(&[], 10.0, 0.5), f64::NEG_INFINITY);
    }

    #[test]
    fn base_level_excludes_event_at_evaluation_time() {
        assert_eq!(base_level(&[10.0], 10.0, 0.5), f64::NEG_INFINITY);
    }

    #[test]
    fn base_level_worked_value() {
        let b = base_level(&[0.0, 1.0, 3.0], 10.0, 0.5);
        let expected = (10f64.powf(-0.5) + 9f64.powf(-0.5) + 7f64.powf(-0.5)).ln();
        assert!((b - expected).abs() < 1e-15);
        assert!((b - 0.027_153_555).abs() < 1e-9);
        assert!((b - 0.02716).abs() < 1e-5);
    }

    #[test]
    fn base_level_unit_gap_is_zero() {
        assert_eq!(base_level(&[0.0], 1.0, 0.5), 0.0);
    }

    #[test]
    fn exposure_kernel_worked_value() {
        let k = exposure_kernel(&[0.0, 1.0, 3.0], 10.0, 3.0, 0.5);
        assert!((k - 0.882253).abs() < 5e-7);
    }

    #[test]
    fn exposure_kernel_empty_and_far_future() {
        assert_eq!(exposure_kernel(&[], 5.0, 3.0, 0.5), 0.0);
        assert!(exposure_kernel(&[0.0], 1e12, 3.0, 0.5) < 1e-5);
    }

    #[test]
    fn cutoff_gradient_matches_central_difference() {
        let h = [0.0, 2.5, 4.0, 7.25];
        let (k, dk) = exposure_kernel_with_cutoff_grad(&h, 9.0, 2.0, 0.5);
        assert_eq!(k, exposure_kernel(&h, 9.0, 2.0, 0.5));
        let eps = 1e-6;
        let num = (exposure_kernel(&h, 9.0, 2.0 + eps, 0.5)
            - exposure_kernel(&h, 9.0, 2.0 - eps, 0.5))
            / (2.0 * eps);
        assert!((dk - num).abs() < 1e-8);
    }

    #[test]
    fn history_rejects_unsorted_times() {
        assert!(History::new(vec![1.0, 1.0]).is_err());
        assert!(History::new(vec![-1.0]).is_err());
        let mut h = History::new(vec![1.0]).unwrap();
        assert!(h.push(0.5).is_err());
        h.push(2.0).unwrap();
        assert_eq!(h.len(), 2);
    }

    fn sorted_history() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..20.0, 0..30).prop_map(|gaps| {
            let mut t = 0.0;
            gaps.into_iter()
                .map(|g| {
                    t += g;
                    t
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn kernels_are_shift_invariant(h in sorted_history(), dt in 0.0f64..50.0, shift in 0.0f64..1e3) {
            let t = h.last().copied().unwrap_or(0.0) + dt;
            let shifted: Vec<f64> = h.iter().map(|x| x + shift).collect();
            let k0 = exposure_kernel(&h, t, 3.0, 0.5);
            let k1 = exposure_kernel(&shifted, t + shift, 3.0, 0.5);
            prop_assert!((k0 - k1).abs() <= 1e-9 * (1.0 + k0));
            let b0 = base_level(&h, t, 0.5);
            let b1 = base_level(&shifted, t + shift, 0.5);
            if b0.is_finite() {
                prop_assert!((b0 - b1).abs() <= 1e-8 * (1.0 + b0.abs()));
            }
        }

        #[test]
        fn kernel_bounded_by_cutoff(h in sorted_history(), dt in 0.0f64..50.0, c in 0.01f64..10.0) {
            let t = h.last().copied().unwrap_or(0.0) + dt;
            let k = exposure_kernel(&h, t, c, 0.5);
            prop_assert!(k >= 0.0);
            prop_assert!(k <= h.len() as f64 * c.powf(-0.5) + 1e-12);
        }

        #[test]
        fn kernel_grows_with_new_event(h in sorted_history(), gap in 0.01f64..10.0, dt in 0.01f64..10.0) {
            let last = h.last().copied().unwrap_or(0.0);
            let mut longer = h.clone();
            longer.push(last + gap);
            let t = last + gap + dt;
            prop_assert!(exposure_kernel(&longer, t, 3.0, 0.5) > exposure_kernel(&h, t, 3.0, 0.5));
            prop_assert!(base_level(&longer, t, 0.5) > base_level(&h, t, 0.5));
        }
    }
}
