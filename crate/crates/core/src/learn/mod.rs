//! Trainable metric and damping: networks, exact gradients through the
//! integrator, AdamW, and the one-step teacher-forcing loop.

mod adam;
mod grad;
mod mlp;
mod model;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use adam::{adam_update, OptimizerState};
pub use grad::{mse, pair_loss_grad, step_loss, LossTarget};
pub use mlp::{sigmoid, softplus, FeatureStats, Mlp, MlpArch, STD_FLOOR};
pub use model::{
    damping_from_features, hodge_from_features, DampNet, Features, GainMode, HodgeNet, Materialized, Model,
    OperatorGrads, WiringSpec, DEFAULT_HIDDEN,
};

use crate::error::{Error, Result};
use crate::mesher::MeshGeometry;
use crate::phcore::CanonicalState;
use crate::rng;
use crate::stepper::{estimate_omega_max_with, StepPlan, DEFAULT_CFL};
use crate::wavegen::PairDataset;

/// Checkpoint format version.
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub loss: LossTarget,
    pub cfl: f64,
    /// Relative change in `ω_max` that triggers a new substep plan.
    pub replan_tolerance: f64,
    /// Optimizer steps between `ω_max` checks.
    pub replan_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 8,
            learning_rate: 1e-3,
            weight_decay: 1e-6,
            seed: 0,
            loss: LossTarget::Both,
            cfl: DEFAULT_CFL,
            replan_tolerance: 0.05,
            replan_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("learning_rate must be positive and weight_decay nonnegative");
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl must lie in (0, 1]");
        }
        if self.replan_every == 0 {
            return bad("replan_every must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub step: usize,
    pub train_loss: f64,
    pub val_mse: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<TrainLogRow>,
    /// `(step, n_sub)` every time the substep plan changed.
    pub replans: Vec<(usize, usize)>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,step,train_loss,val_mse\n");
        for r in &self.rows {
            writeln!(out, "{},{},{:e},{:e}", r.epoch, r.step, r.train_loss, r.val_mse).expect("string write");
        }
        out
    }
}

/// Substep plan for a materialized model.
pub fn model_plan(mat: &Materialized, geom: &MeshGeometry, dt: f64, cfl: f64) -> Result<StepPlan> {
    let sys = mat.system(geom);
    let est = estimate_omega_max_with(sys.wiring, sys.hodge)?;
    StepPlan::for_omega(dt, est.omega_max, cfl)
}

/// Batch-mean loss and flat parameter gradient.
pub fn batch_loss_grad(
    model: &Model,
    geom: &MeshGeometry,
    feats: &Features,
    pairs: &[&(CanonicalState, CanonicalState)],
    plan: &StepPlan,
    target: LossTarget,
) -> Result<(f64, Vec<f64>)> {
    let mat = model.materialize(geom, feats)?;
    let sys = mat.system(geom);
    let learned = if model.has_learned_coef() { mat.wiring.as_ref() } else { None };
    let mut og = OperatorGrads::zeros(geom.n_nodes(), geom.n_edges(), learned.is_some());
    let scale = 1.0 / pairs.len() as f64;
    let mut loss = 0.0;
    for pair in pairs {
        loss += scale * pair_loss_grad(sys, learned, plan, pair, target, scale, Some(&mut og))?;
    }
    let mut g = vec![0.0; model.n_params()];
    model.backprop(geom, feats, &mat, &og, &mut g);
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    Ok((loss, g))
}

/// Mean one-step MSE over a dataset (teacher forcing, both components).
pub fn evaluate_mse(model: &Model, geom: &MeshGeometry, data: &PairDataset, plan: &StepPlan) -> Result<f64> {
    let mat = model.materialize(geom, &Features::new(geom))?;
    let sys = mat.system(geom);
    let mut s = 0.0;
    for pair in &data.pairs {
        s += step_loss(sys, plan, pair, LossTarget::Both)?;
    }
    Ok(s / data.len().max(1) as f64)
}

pub struct TrainOutcome {
    pub model: Model,
    pub log: TrainLog,
    pub plan: StepPlan,
    pub optimizer: OptimizerState,
}

/// Epochs of shuffled mini-batches, AdamW on the batch-mean one-step loss.
pub fn train(
    mut model: Model,
    geom: &MeshGeometry,
    data: &PairDataset,
    validation: Option<&PairDataset>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let feats = Features::new(geom);
    let mut params = model.params();
    let mut opt = OptimizerState::new(params.len());
    let mut plan = model_plan(&model.materialize(geom, &feats)?, geom, data.dt, cfg.cfl)?;
    let mut log = TrainLog { rows: Vec::new(), replans: vec![(0, plan.n_sub)] };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng::stream(cfg.seed, 0x5348_0000 + epoch as u64));
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let pairs: Vec<_> = chunk.iter().map(|&i| &data.pairs[i]).collect();
            let (loss, g) = match batch_loss_grad(&model, geom, &feats, &pairs, &plan, cfg.loss) {
                Ok(v) => v,
                Err(Error::NonFiniteState { .. } | Error::NonFiniteGradient) => {
                    return Err(Error::Diverged { epoch, step })
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, step });
            }
            adam_update(&mut params, &g, &mut opt, cfg.learning_rate, cfg.weight_decay)?;
            model.set_params(&params)?;
            epoch_loss += loss;
            batches += 1;
            step += 1;
            if step % cfg.replan_every == 0 {
                let fresh = model_plan(&model.materialize(geom, &feats)?, geom, data.dt, cfg.cfl)?;
                if (fresh.omega_max - plan.omega_max).abs() > cfg.replan_tolerance * plan.omega_max {
                    if fresh.n_sub != plan.n_sub {
                        log.replans.push((step, fresh.n_sub));
                    }
                    plan = fresh;
                }
            }
        }
        let val_mse = match validation {
            Some(v) => evaluate_mse(&model, geom, v, &plan)?,
            None => f64::NAN,
        };
        log.rows.push(TrainLogRow { epoch, step, train_loss: epoch_loss / batches as f64, val_mse });
    }
    Ok(TrainOutcome { model, log, plan, optimizer: opt })
}

/// Serialized trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub mesh: String,
    pub dt: f64,
    pub node_stats: FeatureStats,
    pub edge_stats: FeatureStats,
    pub damp_stats: FeatureStats,
    pub config: serde_json::Value,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(model: Model, geom: &MeshGeometry, dt: f64, seed: u64, config: serde_json::Value) -> Self {
        let f = Features::new(geom);
        Self {
            version: CHECKPOINT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            mesh: geom.meta.spec.clone(),
            dt,
            node_stats: f.node_stats,
            edge_stats: f.edge_stats,
            damp_stats: f.damp_stats,
            config,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(s)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointMismatch(format!("checkpoint version {} unsupported", ck.version)));
        }
        let m = &ck.model;
        Mlp::from_params(m.hodge.node.arch.clone(), m.hodge.node.params.clone())?;
        Mlp::from_params(m.hodge.edge.arch.clone(), m.hodge.edge.params.clone())?;
        if let Some(d) = &m.damp {
            Mlp::from_params(d.mlp.arch.clone(), d.mlp.params.clone())?;
        }
        Ok(ck)
    }

    /// Fails unless `other` has the same architectures and wiring kind.
    pub fn check_compatible(&self, other: &Model) -> Result<()> {
        let a = &self.model;
        let same = a.hodge.node.arch == other.hodge.node.arch
            && a.hodge.edge.arch == other.hodge.edge.arch
            && a.damp.as_ref().map(|d| &d.mlp.arch) == other.damp.as_ref().map(|d| &d.mlp.arch)
            && std::mem::discriminant(&a.wiring) == std::mem::discriminant(&other.wiring)
            && a.gain == other.gain;
        if same {
            Ok(())
        } else {
            Err(Error::CheckpointMismatch("architecture descriptors differ".into()))
        }
    }
}
