//! One-step loss and its exact adjoint through the composed Strang steps.

use serde::{Deserialize, Serialize};

use super::model::OperatorGrads;
use crate::error::{Error, Result};
use crate::phcore::{stiffness_apply_into, CanonicalState, SplitWiring};
use crate::stepper::{StepPlan, System};

/// Which state components enter the loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTarget {
    Q,
    P,
    #[default]
    Both,
}

impl LossTarget {
    fn weights(self) -> (f64, f64) {
        match self {
            LossTarget::Q => (1.0, 0.0),
            LossTarget::P => (0.0, 1.0),
            LossTarget::Both => (1.0, 1.0),
        }
    }

    fn count(self, n: usize) -> f64 {
        match self {
            LossTarget::Both => 2.0 * n as f64,
            _ => n as f64,
        }
    }
}

/// Mean squared error over the selected components.
pub fn mse(a: &CanonicalState, b: &CanonicalState, target: LossTarget) -> f64 {
    let (wq, wp) = target.weights();
    let mut s = 0.0;
    for i in 0..a.len() {
        s += wq * (a.q[i] - b.q[i]).powi(2) + wp * (a.p[i] - b.p[i]).powi(2);
    }
    s / target.count(a.len())
}

struct Tape {
    q0: Vec<f64>,
    p0: Vec<f64>,
    p2: Vec<f64>,
    q1: Vec<f64>,
    p3: Vec<f64>,
}

struct Buffers {
    edge_a: Vec<f64>,
    edge_b: Vec<f64>,
    node: Vec<f64>,
}

fn half_damp_factors(system: &System<'_>, h: f64) -> Option<Vec<f64>> {
    system.damping.map(|r| r.iter().map(|r| (-0.5 * h * r).exp()).collect())
}

fn forward(
    system: &System<'_>,
    plan: &StepPlan,
    z0: &CanonicalState,
    bufs: &mut Buffers,
) -> (CanonicalState, Vec<Tape>) {
    let h = plan.dt_sub;
    let d = half_damp_factors(system, h);
    let m = &system.hodge.mass;
    let mut q = z0.q.clone();
    let mut p = z0.p.clone();
    let mut tapes = Vec::with_capacity(plan.n_sub);
    for _ in 0..plan.n_sub {
        let q0 = q.clone();
        let p0 = p.clone();
        if let Some(d) = &d {
            p.iter_mut().zip(d).for_each(|(p, d)| *p *= d);
        }
        stiffness_apply_into(system.wiring, &system.hodge.weight, &q, &mut bufs.edge_a, &mut bufs.node);
        p.iter_mut().zip(&bufs.node).for_each(|(p, f)| *p -= 0.5 * h * f);
        let p2 = p.clone();
        for i in 0..q.len() {
            q[i] += h * p[i] / m[i];
        }
        let q1 = q.clone();
        stiffness_apply_into(system.wiring, &system.hodge.weight, &q, &mut bufs.edge_a, &mut bufs.node);
        p.iter_mut().zip(&bufs.node).for_each(|(p, f)| *p -= 0.5 * h * f);
        let p3 = p.clone();
        if let Some(d) = &d {
            p.iter_mut().zip(d).for_each(|(p, d)| *p *= d);
        }
        tapes.push(Tape { q0, p0, p2, q1, p3 });
    }
    (CanonicalState { q, p }, tapes)
}

/// Adjoint of `p ← p + c·K q` with respect to `q` and the operators:
/// `λq += c·Kᵀλp`, `gW += c·(Sλp)⊙(Gq)`, and wiring coefficients if learned.
#[allow(clippy::too_many_arguments)]
fn kick_adjoint(
    system: &System<'_>,
    learned: Option<&SplitWiring>,
    c: f64,
    q: &[f64],
    lp: &[f64],
    lq: &mut [f64],
    grads: &mut OperatorGrads,
    bufs: &mut Buffers,
) {
    let w = &system.hodge.weight;
    system.wiring.gather(q, &mut bufs.edge_a);
    system.wiring.scatter_adjoint(lp, &mut bufs.edge_b);
    for e in 0..w.len() {
        grads.weight[e] += c * bufs.edge_a[e] * bufs.edge_b[e];
    }
    if let Some(lw) = learned {
        for (e, [t, hd]) in lw.gather.ends.iter().enumerate() {
            let (a, b) = (bufs.edge_a[e], bufs.edge_b[e]);
            let s = c * w[e];
            grads.coef[e][0] += s * (b * q[*t] + a * lp[*t]);
            grads.coef[e][1] += s * (b * q[*hd] + a * lp[*hd]);
        }
    }
    for e in 0..w.len() {
        bufs.edge_b[e] *= w[e];
    }
    system.wiring.gather_adjoint(&bufs.edge_b, &mut bufs.node);
    lq.iter_mut().zip(&bufs.node).for_each(|(l, k)| *l += c * k);
}

/// Loss of one pair and, when `grads` is given, its gradient scaled by
/// `scale` accumulated into `grads`. `learned` must be the system's wiring
/// when its coefficients are trainable.
pub fn pair_loss_grad(
    system: System<'_>,
    learned: Option<&SplitWiring>,
    plan: &StepPlan,
    pair: &(CanonicalState, CanonicalState),
    target: LossTarget,
    scale: f64,
    grads: Option<&mut OperatorGrads>,
) -> Result<f64> {
    let n = system.wiring.n_nodes();
    let mut bufs = Buffers {
        edge_a: vec![0.0; system.wiring.n_edges()],
        edge_b: vec![0.0; system.wiring.n_edges()],
        node: vec![0.0; n],
    };
    let (pred, tapes) = forward(&system, plan, &pair.0, &mut bufs);
    if !pred.is_finite() {
        return Err(Error::NonFiniteState { frame: 1 });
    }
    let loss = mse(&pred, &pair.1, target);
    let Some(grads) = grads else {
        return Ok(loss);
    };

    let (wq, wp) = target.weights();
    let norm = 2.0 * scale / target.count(n);
    let mut lq: Vec<f64> = (0..n).map(|i| norm * wq * (pred.q[i] - pair.1.q[i])).collect();
    let mut lp: Vec<f64> = (0..n).map(|i| norm * wp * (pred.p[i] - pair.1.p[i])).collect();
    let h = plan.dt_sub;
    let d = half_damp_factors(&system, h);
    let m = &system.hodge.mass;
    for tape in tapes.iter().rev() {
        // Out half-damp: p4 = d ⊙ p3.
        if let Some(d) = &d {
            for i in 0..n {
                grads.rates[i] += lp[i] * tape.p3[i] * d[i] * (-0.5 * h);
                lp[i] *= d[i];
            }
        }
        // Second kick: p3 = p2 − h/2 K q1.
        kick_adjoint(&system, learned, -0.5 * h, &tape.q1, &lp, &mut lq, grads, &mut bufs);
        // Drift: q1 = q0 + h p2 / M.
        for i in 0..n {
            grads.mass[i] -= h * lq[i] * tape.p2[i] / (m[i] * m[i]);
            lp[i] += h * lq[i] / m[i];
        }
        // First kick: p2 = p1 − h/2 K q0.
        kick_adjoint(&system, learned, -0.5 * h, &tape.q0, &lp, &mut lq, grads, &mut bufs);
        // In half-damp: p1 = d ⊙ p0.
        if let Some(d) = &d {
            for i in 0..n {
                grads.rates[i] += lp[i] * tape.p0[i] * d[i] * (-0.5 * h);
                lp[i] *= d[i];
            }
        }
    }
    Ok(loss)
}

/// One-step loss of `system` on `pair`.
pub fn step_loss(
    system: System<'_>,
    plan: &StepPlan,
    pair: &(CanonicalState, CanonicalState),
    target: LossTarget,
) -> Result<f64> {
    pair_loss_grad(system, None, plan, pair, target, 1.0, None)
}
