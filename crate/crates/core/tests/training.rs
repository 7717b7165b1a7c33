use meshft::learn::{
    batch_loss_grad, damping_from_features, hodge_from_features, step_loss, train, Checkpoint, DampNet, Features,
    HodgeNet, LossTarget, Model, TrainConfig,
};
use meshft::mesher::{periodic_delaunay, periodic_grid};
use meshft::phcore::{theory_hodge, CanonicalState};
use meshft::rng;
use meshft::stepper::{plan_steps, StepPlan, System};
use meshft::wavegen::{PairDataset, SamplerConfig};
use meshft::Error;

#[test]
fn zero_networks_give_ln2_scaled_geometry() {
    let g = periodic_delaunay(50, 1.0, 2).unwrap();
    let h = hodge_from_features(&HodgeNet::zeros(16), &g).unwrap();
    let ln2 = std::f64::consts::LN_2;
    for (m, v) in h.mass.iter().zip(&g.v0) {
        assert!((m - ln2 * v).abs() <= 1e-15 * v);
    }
    for (w, v) in h.weight.iter().zip(&g.v1inv) {
        assert!((w - ln2 * v).abs() <= 1e-15 * v);
    }
    let r = damping_from_features(&DampNet::zeros(16), &g).unwrap();
    assert!(r.rates.iter().all(|x| (x - ln2).abs() < 1e-15));
}

#[test]
fn networks_are_permutation_equivariant() {
    let g = periodic_delaunay(60, 1.0, 8).unwrap();
    let mut r = rng::stream(1, 0);
    let hn = HodgeNet::new(16, &mut r);
    let dn = DampNet::new(16, &mut r);
    let perm: Vec<usize> = (0..60).map(|i| (i * 7 + 3) % 60).collect();
    let gp = g.permute_nodes(&perm).unwrap();
    let (h, hp) = (hodge_from_features(&hn, &g).unwrap(), hodge_from_features(&hn, &gp).unwrap());
    let (d, dp) = (damping_from_features(&dn, &g).unwrap(), damping_from_features(&dn, &gp).unwrap());
    for (i, &j) in perm.iter().enumerate() {
        assert!((h.mass[i] - hp.mass[j]).abs() <= 1e-12 * h.mass[i]);
        assert!((d.rates[i] - dp.rates[j]).abs() <= 1e-12 * d.rates[i].max(1e-300));
    }
    assert_eq!(h.weight, hp.weight);
}

#[test]
fn theory_pairs_only_carry_integrator_error() {
    let g = periodic_grid(32, 32, 1.0).unwrap();
    let th = theory_hodge(&g, 1.0);
    let data = PairDataset::generate(&g, 0.002, 16, 3, &SamplerConfig::default()).unwrap();
    let plan = plan_steps(&g, &th, 0.002, 0.5).unwrap();
    for pair in &data.pairs {
        let l = step_loss(System::structured(&g, &th, None), &plan, pair, LossTarget::Both).unwrap();
        assert!(l <= 1e-8, "{l}");
    }
}

#[test]
fn doubled_states_double_root_loss() {
    let g = periodic_grid(8, 8, 1.0).unwrap();
    let wrong = theory_hodge(&g, 1.3);
    let data = PairDataset::generate(&g, 0.01, 1, 5, &SamplerConfig::default()).unwrap();
    let (a, b) = &data.pairs[0];
    let twice = |z: &CanonicalState| CanonicalState {
        q: z.q.iter().map(|v| 2.0 * v).collect(),
        p: z.p.iter().map(|v| 2.0 * v).collect(),
    };
    let plan = StepPlan::fixed(0.01, 2);
    let sys = System::structured(&g, &wrong, None);
    let l1 = step_loss(sys, &plan, &(a.clone(), b.clone()), LossTarget::P).unwrap();
    let l2 = step_loss(sys, &plan, &(twice(a), twice(b)), LossTarget::P).unwrap();
    assert!((l2.sqrt() / l1.sqrt() - 2.0).abs() < 1e-12);
}

#[test]
fn damping_gradient_vanishes_without_momentum() {
    let g = periodic_grid(4, 4, 1.0).unwrap();
    let feats = Features::new(&g);
    let model = Model::structured(8, true, 3);
    let rest = (CanonicalState::zeros(16), CanonicalState { q: vec![0.1; 16], p: vec![0.0; 16] });
    let (_, grad) = batch_loss_grad(&model, &g, &feats, &[&rest], &StepPlan::fixed(0.01, 2), LossTarget::Both).unwrap();
    let n_hodge = model.hodge.node.params.len() + model.hodge.edge.params.len();
    let damp = &grad[n_hodge..n_hodge + model.damp.as_ref().unwrap().mlp.params.len()];
    assert!(damp.iter().all(|v| *v == 0.0));
}

#[test]
fn constant_feature_columns_get_no_gradient() {
    let g = periodic_grid(4, 4, 1.0).unwrap();
    let feats = Features::new(&g);
    let model = Model::structured(8, false, 4);
    let data = PairDataset::generate(&g, 0.01, 2, 1, &SamplerConfig::default()).unwrap();
    let pairs: Vec<_> = data.pairs.iter().collect();
    let (_, grad) = batch_loss_grad(&model, &g, &feats, &pairs, &StepPlan::fixed(0.01, 1), LossTarget::Both).unwrap();
    // Every node has the same area on a uniform grid, so the third input is zero.
    let hidden = model.hodge.node.arch.layers()[0].1;
    for j in 0..hidden {
        assert_eq!(grad[j * 3 + 2], 0.0);
    }
}

#[test]
fn short_training_lowers_validation_error_and_checkpoints_round_trip() {
    let g = periodic_grid(8, 8, 1.0).unwrap();
    let tr =
        PairDataset::generate(&g, 0.004, 64, 2, &SamplerConfig { kmax_x: 2, kmax_y: 2, ..SamplerConfig::default() })
            .unwrap();
    let va = PairDataset::generate_validation(&g, 0.004, 16, 2, &tr.sampler).unwrap();
    let cfg = TrainConfig { epochs: 3, seed: 2, learning_rate: 3e-3, ..TrainConfig::default() };
    let out = train(Model::structured(16, false, 2), &g, &tr, Some(&va), &cfg).unwrap();
    let first = out.log.rows.first().unwrap().val_mse;
    let last = out.log.rows.last().unwrap().val_mse;
    assert!(last < first, "{first} -> {last}");

    let ck = Checkpoint::new(out.model.clone(), &g, 0.004, 2, serde_json::json!({"epochs": 3}));
    let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
    assert_eq!(back.model, out.model);
    assert!(back.check_compatible(&Model::structured(16, false, 9)).is_ok());
    assert!(matches!(back.check_compatible(&Model::structured(8, false, 9)), Err(Error::CheckpointMismatch(_))));
}

#[test]
fn bad_config_is_rejected() {
    let g = periodic_grid(4, 4, 1.0).unwrap();
    let tr = PairDataset::generate(&g, 0.01, 4, 1, &SamplerConfig::default()).unwrap();
    let cfg = TrainConfig { batch_size: 0, ..TrainConfig::default() };
    assert!(train(Model::structured(4, false, 1), &g, &tr, None, &cfg).is_err());
}
