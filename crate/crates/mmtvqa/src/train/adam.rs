//! Adam with bias correction, learning rate driven by the warmup schedule.

use indexmap::IndexMap;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::params::ParamStore;
use crate::train::schedule::lr_at;

/// Optimizer hyperparameters and per-tensor moment accumulators.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub step: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub base_lr: f64,
    pub warmup_steps: usize,
    /// Optional global gradient clipping (L2 over all tensors); 0 = off.
    pub max_grad_norm: f64,
    first: IndexMap<String, Array2<f64>>,
    second: IndexMap<String, Array2<f64>>,
}

impl OptimizerState {
    /// Fresh state with the training recipe's defaults: beta1 0.9,
    /// beta2 0.98, eps 1e-8, base lr 0.005, 2000 warmup steps.
    pub fn new(params: &ParamStore) -> Self {
        Self::with_hyperparams(params, 0.9, 0.98, 1e-8, 0.005, 2000)
    }

    pub fn with_hyperparams(
        params: &ParamStore,
        beta1: f64,
        beta2: f64,
        eps: f64,
        base_lr: f64,
        warmup_steps: usize,
    ) -> Self {
        let zeros = |p: &ParamStore| -> IndexMap<String, Array2<f64>> {
            p.iter().map(|(n, t)| (n.to_string(), Array2::zeros(t.raw_dim()))).collect()
        };
        OptimizerState {
            step: 0,
            beta1,
            beta2,
            eps,
            base_lr,
            warmup_steps,
            max_grad_norm: 0.0,
            first: zeros(params),
            second: zeros(params),
        }
    }

    pub fn lr(&self) -> f64 {
        lr_at(self.step.max(1), self.base_lr, self.warmup_steps)
    }
}

/// One Adam update in place. `grads` may omit tensors (treated as zero
/// gradient, which leaves them unchanged at zero moments).
pub fn adam_step(
    params: &mut ParamStore,
    grads: &IndexMap<String, Array2<f64>>,
    state: &mut OptimizerState,
) -> Result<()> {
    for (name, g) in grads {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient for tensor {name}")));
        }
    }
    let clip = if state.max_grad_norm > 0.0 {
        let norm: f64 = grads.values().map(|g| g.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt();
        if norm > state.max_grad_norm {
            state.max_grad_norm / norm
        } else {
            1.0
        }
    } else {
        1.0
    };

    state.step += 1;
    let t = state.step as i32;
    let lr = lr_at(state.step, state.base_lr, state.warmup_steps);
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);

    let names: Vec<String> = params.names().map(|s| s.to_string()).collect();
    for name in names {
        let Some(g) = grads.get(&name) else { continue };
        let m = state.first.get_mut(&name).expect("moments mirror params");
        let v = state.second.get_mut(&name).expect("moments mirror params");
        if m.dim() != g.dim() {
            return Err(Error::Shape {
                context: format!("adam step {name}"),
                left: format!("{:?}", m.dim()),
                right: format!("{:?}", g.dim()),
            });
        }
        let mut tensor = params.get(&name).unwrap().to_owned();
        ndarray::Zip::from(&mut tensor).and(m).and(v).and(g).for_each(|p, m, v, &g| {
            let g = g * clip;
            *m = state.beta1 * *m + (1.0 - state.beta1) * g;
            *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + state.eps);
        });
        params.set(&name, tensor)?;
    }
    Ok(())
}
