//! Loss functions over already-softmaxed distributions, plus the joint
//! objective. (Training itself differentiates a fused logits-level op; these
//! are the reference formulas and the public contract.)

use ndarray::Array2;

use crate::error::{Error, Result};

/// Token-averaged cross-entropy against the smoothed target distribution
/// `q = (1 - eps) * onehot + eps / V`. Rows whose target id is in
/// `exclude` (padding) are left out of the average.
pub fn label_smoothed_loss(
    distributions: &Array2<f64>,
    target_ids: &[u32],
    eps: f64,
    exclude: &[u32],
) -> Result<f64> {
    if distributions.nrows() != target_ids.len() {
        return Err(Error::Shape {
            context: "label smoothed loss".into(),
            left: format!("{} rows", distributions.nrows()),
            right: format!("{} targets", target_ids.len()),
        });
    }
    let vocab = distributions.ncols() as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for (row, &t) in distributions.rows().into_iter().zip(target_ids) {
        if exclude.contains(&t) {
            continue;
        }
        if t as usize >= distributions.ncols() {
            return Err(Error::Vocabulary {
                id: t,
                vocab: "loss targets".into(),
                size: distributions.ncols(),
            });
        }
        let mut ce = 0.0;
        for (j, &p) in row.iter().enumerate() {
            let q = if j == t as usize { 1.0 - eps + eps / vocab } else { eps / vocab };
            ce -= q * p.max(f64::MIN_POSITIVE).ln();
        }
        total += ce;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Argument("no non-excluded target positions".into()));
    }
    Ok(total / count as f64)
}

/// `l_mmt + lambda * l_vqa`
pub fn total_loss(l_mmt: f64, l_vqa: f64, lambda: f64) -> Result<f64> {
    for (name, v) in [("l_mmt", l_mmt), ("l_vqa", l_vqa), ("lambda", lambda)] {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("{name} is not finite: {v}")));
        }
    }
    if l_mmt < 0.0 || l_vqa < 0.0 {
        return Err(Error::Numeric("losses must be nonnegative".into()));
    }
    Ok(l_mmt + lambda * l_vqa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_distribution_costs_ln_v_for_any_eps() {
        let v = 6;
        let dist = Array2::from_elem((3, v), 1.0 / v as f64);
        for eps in [0.0, 0.1, 0.5] {
            let loss = label_smoothed_loss(&dist, &[0, 3, 5], eps, &[]).unwrap();
            assert!((loss - (v as f64).ln()).abs() < 1e-12, "eps {eps}");
        }
    }

    #[test]
    fn eps_zero_is_negative_log_likelihood() {
        let dist = array![[0.7, 0.1, 0.1, 0.1], [0.25, 0.5, 0.2, 0.05]];
        let loss = label_smoothed_loss(&dist, &[0, 1], 0.0, &[]).unwrap();
        let expect = -(0.7f64.ln() + 0.5f64.ln()) / 2.0;
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn smoothed_case_matches_direct_formula() {
        // V=4, model [0.7, 0.1, 0.1, 0.1], target 0, eps = 0.1
        let dist = array![[0.7, 0.1, 0.1, 0.1]];
        let loss = label_smoothed_loss(&dist, &[0], 0.1, &[]).unwrap();
        let q0 = 0.9 + 0.1 / 4.0;
        let q_rest = 0.1 / 4.0;
        let expect = -(q0 * 0.7f64.ln() + 3.0 * q_rest * 0.1f64.ln());
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn excluded_targets_do_not_count() {
        let dist = array![[0.5, 0.5], [0.9, 0.1]];
        let with = label_smoothed_loss(&dist, &[0, 0], 0.0, &[]).unwrap();
        let without = label_smoothed_loss(&dist, &[0, 0], 0.0, &[0]);
        assert!(without.is_err(), "all rows excluded");
        let pad_last = label_smoothed_loss(&dist, &[1, 0], 0.0, &[0]).unwrap();
        assert!((pad_last - -(0.5f64.ln())).abs() < 1e-12);
        assert!(with > 0.0);
    }

    #[test]
    fn total_loss_is_the_weighted_sum() {
        assert_eq!(total_loss(2.0, 1.0, 0.3).unwrap(), 2.3);
        assert_eq!(total_loss(1.7, 9.0, 0.0).unwrap(), 1.7);
        assert!(matches!(total_loss(f64::NAN, 1.0, 0.3), Err(Error::Numeric(_))));
    }
}
