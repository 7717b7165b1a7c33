//! AdamW with bias correction and decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

pub fn adam_update(params: &mut [f64], grads: &[f64], opt: &mut OptimizerState, lr: f64, wd: f64) -> Result<()> {
    check_len(params.len(), grads.len())?;
    check_len(params.len(), opt.m.len())?;
    check_len(params.len(), opt.v.len())?;
    opt.t += 1;
    let c1 = 1.0 - opt.beta1.powi(opt.t as i32);
    let c2 = 1.0 - opt.beta2.powi(opt.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * g;
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * g * g;
        let mhat = opt.m[i] / c1;
        let vhat = opt.v[i] / c2;
        params[i] -= lr * wd * params[i];
        params[i] -= lr * mhat / (vhat.sqrt() + opt.eps);
    }
    Ok(())
}
