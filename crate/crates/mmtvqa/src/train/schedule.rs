//! Learning-rate schedule: linear warmup to `base_lr` over `warmup_steps`
//! updates, then inverse-square-root decay.

/// Learning rate at a 1-based step count.
pub fn lr_at(step: usize, base_lr: f64, warmup_steps: usize) -> f64 {
    assert!(step >= 1, "steps are 1-based");
    let warmup = warmup_steps.max(1);
    if step <= warmup {
        base_lr * step as f64 / warmup as f64
    } else {
        base_lr * (warmup as f64 / step as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoint_is_base_lr() {
        assert_eq!(lr_at(2000, 0.005, 2000), 0.005);
    }

    #[test]
    fn ramp_start_is_base_over_warmup() {
        assert_eq!(lr_at(1, 0.005, 2000), 0.005 / 2000.0);
    }

    #[test]
    fn sqrt_decay_halves_at_four_warmups() {
        assert!((lr_at(8000, 0.005, 2000) - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn continuous_at_the_warmup_boundary() {
        let before = lr_at(1999, 0.005, 2000);
        let at = lr_at(2000, 0.005, 2000);
        let after = lr_at(2001, 0.005, 2000);
        assert!(before < at);
        assert!(after < at);
        assert!((at - after) < 1e-5);
    }
}
