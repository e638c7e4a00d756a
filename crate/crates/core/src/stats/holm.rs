use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-down Holm-Bonferroni decisions, reported in input order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolmOutcome {
    pub alpha: f64,
    pub p_values: Vec<f64>,
    /// Input indices sorted by ascending p-value (stable on ties).
    pub order: Vec<usize>,
    /// Holm-adjusted p-values, monotone along `order`, capped at 1.
    pub adjusted: Vec<f64>,
    pub reject: Vec<bool>,
}

pub fn holm_bonferroni(p_values: &[f64], alpha: f64) -> Result<HolmOutcome> {
    if p_values.is_empty() {
        return Err(Error::invalid("Holm-Bonferroni needs at least one p-value"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));

    let mut reject = vec![false; m];
    for (k, &i) in order.iter().enumerate() {
        if p_values[i] <= alpha / (m - k) as f64 {
            reject[i] = true;
        } else {
            break;
        }
    }
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (k, &i) in order.iter().enumerate() {
        running = running.max(((m - k) as f64 * p_values[i]).min(1.0));
        adjusted[i] = running;
    }
    Ok(HolmOutcome {
        alpha,
        p_values: p_values.to_vec(),
        order,
        adjusted,
        reject,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn step_down_stops_at_first_failure() {
        let h = holm_bonferroni(&[0.01, 0.04, 0.03], 0.05).unwrap();
        assert_eq!(h.reject, vec![true, false, false]);
        assert_eq!(h.order, vec![0, 2, 1]);
        assert!((h.adjusted[0] - 0.03).abs() < 1e-15);
        assert!((h.adjusted[2] - 0.06).abs() < 1e-15);
        assert!((h.adjusted[1] - 0.06).abs() < 1e-15);
    }

    #[test]
    fn no_rejections_when_all_p_are_one() {
        let h = holm_bonferroni(&[1.0; 4], 0.05).unwrap();
        assert!(h.reject.iter().all(|r| !r));
    }

    #[test]
    fn single_hypothesis_is_a_plain_threshold() {
        assert!(holm_bonferroni(&[0.05], 0.05).unwrap().reject[0]);
        assert!(!holm_bonferroni(&[0.0501], 0.05).unwrap().reject[0]);
    }

    #[test]
    fn invalid_inputs() {
        assert!(holm_bonferroni(&[], 0.05).is_err());
        assert!(holm_bonferroni(&[1.2], 0.05).is_err());
        assert!(holm_bonferroni(&[0.2], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn rejections_form_a_sorted_prefix_and_grow_with_alpha(
            ps in proptest::collection::vec(0.0f64..=1.0, 1..20),
            a1 in 0.001f64..0.5, a2 in 0.001f64..0.5,
        ) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let h_lo = holm_bonferroni(&ps, lo).unwrap();
            let h_hi = holm_bonferroni(&ps, hi).unwrap();
            let flags: Vec<bool> = h_lo.order.iter().map(|&i| h_lo.reject[i]).collect();
            prop_assert!(flags.windows(2).all(|w| w[0] || !w[1]));
            for i in 0..ps.len() {
                prop_assert!(!h_lo.reject[i] || h_hi.reject[i]);
            }
        }
    }
}
