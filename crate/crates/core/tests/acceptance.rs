//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Failing criteria are reported,
//! not hidden; set `ACCEPTANCE_STRICT=1` to turn any failure into a nonzero
//! exit status.

use std::time::Instant;

use meshft::complex::{build_complex, ComplexSpec, OrientationGauge};
use meshft::learn::{batch_loss_grad, evaluate_mse, train, Features, LossTarget, Model, TrainConfig, TrainOutcome};
use meshft::maxwell2d::{self, Coupling, MaxwellGrid, MaxwellStars};
use meshft::mesher::{periodic_delaunay, periodic_grid, MeshGeometry};
use meshft::phcore::stiffness_apply_into;
use meshft::phcore::{theory_hodge, CanonicalState, DampingField, HodgeStar};
use meshft::physlab::{
    amp_phase_fit, canonical_consistency, energy_drift_and_injection, equipartition, evaluate_rollouts, make_ablation,
    momentum_variation, pde_residual, rebind_model, system_field, vf_alignment, wave_speed_error, AblationVariant,
    RolloutSummary,
};
use meshft::rng;
use meshft::stepper::{plan_steps, rollout_with, StepPlan, System};
use meshft::wavegen::{
    draw_sample, exact_trajectory, plane_wave_state, PairDataset, SamplerConfig, WaveNumber, WaveSample,
};
use rand::Rng;

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
    budget: f64,
}

fn report(lines: &mut Vec<Line>, id: usize, name: &'static str, budget: f64, f: impl FnOnce() -> (bool, String)) {
    let t = Instant::now();
    let (ok, detail) = f();
    let secs = t.elapsed().as_secs_f64();
    let line = Line { id, name, pass: ok && secs <= budget, detail, secs, budget };
    println!(
        "criterion {:>2} {:<34} {}  {}  [{:.1}s / {:.0}s]",
        line.id,
        line.name,
        if line.pass { "PASS" } else { "FAIL" },
        line.detail,
        line.secs,
        line.budget
    );
    lines.push(line);
}

fn grid32() -> MeshGeometry {
    periodic_grid(32, 32, 1.0).unwrap()
}

fn samples(seed: u64, count: usize, cfg: &SamplerConfig) -> Vec<WaveSample> {
    (0..count).map(|i| draw_sample(&mut rng::stream(seed, i as u64), 1.0, cfg)).collect()
}

struct Trained {
    geom: MeshGeometry,
    out: TrainOutcome,
    val: PairDataset,
}

impl Trained {
    fn summary(&self, samples: &[WaveSample], frames: usize, c: f64) -> RolloutSummary {
        let mat = self.out.model.materialize(&self.geom, &Features::new(&self.geom)).unwrap();
        evaluate_rollouts(
            mat.system(&self.geom),
            &self.out.plan,
            &self.geom,
            &theory_hodge(&self.geom, c),
            samples,
            frames,
        )
        .unwrap()
    }
}

fn fit(
    geom: MeshGeometry,
    model: Model,
    dt: f64,
    n_train: usize,
    sampler: &SamplerConfig,
    cfg: TrainConfig,
) -> meshft::Result<Trained> {
    let tr = PairDataset::generate(&geom, dt, n_train, cfg.seed, sampler)?;
    let val = PairDataset::generate_validation(&geom, dt, 256, cfg.seed, sampler)?;
    let out = train(model, &geom, &tr, Some(&val), &cfg)?;
    Ok(Trained { geom, out, val })
}

fn conservative_run(seed: u64) -> Trained {
    let cfg = TrainConfig { seed, ..TrainConfig::default() };
    fit(grid32(), Model::structured(64, false, seed), 0.002, 2000, &SamplerConfig::default(), cfg).unwrap()
}

fn c1_chain() -> (bool, String) {
    let tri = build_complex(&ComplexSpec {
        n_nodes: 3,
        edges: vec![[0, 1], [1, 2], [2, 0]],
        higher: vec![vec![vec![(0, 1), (1, 1), (2, 1)]]],
    })
    .unwrap();
    let mut worst = tri.chain_defect();
    let mut meshes = vec![grid32(), periodic_grid(4, 3, 1.0).unwrap()];
    for s in 1..=3 {
        meshes.push(periodic_delaunay(256, 1.0, s).unwrap());
    }
    for m in &meshes {
        worst = worst.max(m.complex.chain_defect());
    }
    (worst == 0, format!("max|D1 D0| = {worst} over 6 complexes"))
}

fn c2_golden() -> (bool, String) {
    let tri = build_complex(&ComplexSpec {
        n_nodes: 3,
        edges: vec![[0, 1], [1, 2], [2, 0]],
        higher: vec![vec![vec![(0, 1), (1, 1), (2, 1)]]],
    })
    .unwrap();
    let (d0, d1) = (tri.incidence(0), tri.incidence(1));
    let q = [0.3, -1.7, 2.9];
    let u = [1.25, -0.5, 4.0];
    let mut ok = d0.to_dense() == vec![vec![-1, 1, 0], vec![0, -1, 1], vec![1, 0, -1]];
    ok &= d1.to_dense() == vec![vec![1, 1, 1]];
    ok &= d0.apply(&q).unwrap() == vec![q[1] - q[0], q[2] - q[1], q[0] - q[2]];
    ok &= d1.apply(&u).unwrap() == vec![u[0] + u[1] + u[2]];
    ok &= d0.apply_transpose(&u).unwrap() == vec![-u[0] + u[2], u[0] - u[1], u[1] - u[2]];
    (ok, "D0, D1, D0q, D1u, D0ᵀu entrywise".into())
}

fn c3_integrator() -> (bool, String) {
    let g = grid32();
    let th = theory_hodge(&g, 1.0);
    let plan = plan_steps(&g, &th, 0.002, 0.5).unwrap();
    let sys = System::structured(&g, &th, None);
    let (mut drift, mut mom) = (0.0f64, 0.0f64);
    for s in samples(3, 8, &SamplerConfig::default()) {
        let z0 = plane_wave_state(&g, &s, s.t0).unwrap();
        let traj = rollout_with(sys, &z0, &plan, 200).unwrap();
        drift = drift.max(energy_drift_and_injection(&traj, &g, &th).0);
        mom = mom.max(momentum_variation(&traj));
    }
    (
        drift <= 1e-3 && mom <= 1e-6,
        format!("drift {drift:.2e} (≤1e-3), momentum {mom:.2e} (≤1e-6), n_sub {}", plan.n_sub),
    )
}

fn c4_damping() -> (bool, String) {
    let g = periodic_grid(4, 4, 1.0).unwrap();
    let h = HodgeStar::unchecked(g.v0.clone(), vec![0.0; g.n_edges()]);
    let damp = DampingField::uniform(16, 0.05).unwrap();
    let sys = System::structured(&g, &h, Some(&damp));
    let mut r = rng::stream(4, 0);
    let z0 = CanonicalState {
        q: (0..16).map(|_| r.gen_range(-1.0..1.0)).collect(),
        p: (0..16).map(|_| r.gen_range(-1.0..1.0)).collect(),
    };
    let dt = 0.01;
    let traj = rollout_with(sys, &z0, &StepPlan::fixed(dt, 1), 100).unwrap();
    let mut worst = 0.0f64;
    for (t, s) in traj.states.iter().enumerate() {
        let f = (-0.05 * t as f64 * dt).exp();
        for (p, p0) in s.p.iter().zip(&z0.p) {
            worst = worst.max((p - f * p0).abs() / (f * p0).abs());
        }
    }
    (worst <= 1e-12, format!("max relative error {worst:.2e} (≤1e-12)"))
}

fn c5_gauge() -> (bool, String) {
    let g = periodic_delaunay(96, 1.0, 5).unwrap();
    let th = theory_hodge(&g, 1.0);
    let plan = plan_steps(&g, &th, 0.002, 0.5).unwrap();
    let s = draw_sample(&mut rng::stream(5, 0), 1.0, &SamplerConfig::default());
    let z0 = plane_wave_state(&g, &s, s.t0).unwrap();
    let base = rollout_with(System::structured(&g, &th, None), &z0, &plan, 100).unwrap();

    let mut r = rng::stream(5, 1);
    let signs = (0..g.n_edges()).map(|_| if r.gen_bool(0.5) { -1 } else { 1 }).collect();
    let mut flipped = g.clone();
    flipped.complex = g.complex.flip_orientation(&OrientationGauge::new(1, signs).unwrap()).unwrap();
    let tf = rollout_with(System::structured(&flipped, &th, None), &z0, &plan, 100).unwrap();

    let mut perm: Vec<usize> = (0..g.n_nodes()).collect();
    rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
    let gp = g.permute_nodes(&perm).unwrap();
    let mut hp = th.clone();
    for (i, &j) in perm.iter().enumerate() {
        hp.mass[j] = th.mass[i];
    }
    let tp = rollout_with(System::structured(&gp, &hp, None), &z0.permuted(&perm), &plan, 100).unwrap();

    let (mut ef, mut ep) = (0.0f64, 0.0f64);
    for t in 0..=100 {
        let a = &base.states[t];
        for (x, y) in a.concat().iter().zip(tf.states[t].concat()) {
            ef = ef.max((x - y).abs());
        }
        for (x, y) in a.permuted(&perm).concat().iter().zip(tp.states[t].concat()) {
            ep = ep.max((x - y).abs());
        }
    }
    (ef <= 1e-12 && ep <= 1e-12, format!("edge flips {ef:.1e}, node permutation {ep:.1e} (≤1e-12)"))
}

fn c6_gradient() -> (bool, String) {
    let g = periodic_grid(4, 4, 1.0).unwrap();
    let feats = Features::new(&g);
    let mut model = Model::structured(8, true, 6);
    let mut r = rng::stream(6, 1);
    let mut theta = model.params();
    theta.iter_mut().for_each(|v| *v += 0.3 * r.gen_range(-1.0..1.0));
    model.set_params(&theta).unwrap();
    let data =
        PairDataset::generate(&g, 0.01, 4, 6, &SamplerConfig { kmax_x: 2, kmax_y: 2, ..SamplerConfig::damped() })
            .unwrap();
    let pairs: Vec<_> = data.pairs.iter().collect();
    let plan = StepPlan::fixed(0.01, 3);
    let (_, grad) = batch_loss_grad(&model, &g, &feats, &pairs, &plan, LossTarget::Both).unwrap();
    let loss_at = |th: &[f64]| {
        let mut m = model.clone();
        m.set_params(th).unwrap();
        batch_loss_grad(&m, &g, &feats, &pairs, &plan, LossTarget::Both).unwrap().0
    };
    let mut worst = 0.0f64;
    let mut passed = 0;
    let picks = 24;
    for _ in 0..picks {
        let i = r.gen_range(0..theta.len());
        let h = 1e-4 * theta[i].abs().max(1.0);
        let at = |d: f64| {
            let mut t = theta.clone();
            t[i] += d;
            loss_at(&t)
        };
        let fd = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
        let ratio = (grad[i] - fd).abs() / (1e-5 * (fd.abs() + 1e-8));
        worst = worst.max(ratio);
        if ratio <= 1.0 {
            passed += 1;
        }
    }
    (passed == picks, format!("{passed}/{picks} coordinates within tolerance, worst |g−fd|/tol {worst:.2e}"))
}

fn c7_conservative(run: &Trained) -> (bool, String) {
    let val = run.out.log.rows.last().map_or(f64::NAN, |r| r.val_mse);
    let sum = run.summary(&run.val.samples[..16], 200, 1.0);
    (
        val <= 1e-6 && sum.drift_max <= 1e-2,
        format!(
            "val MSE {val:.2e} (≤1e-6), rollout drift max {:.2e} mean {:.2e} (≤1e-2)",
            sum.drift_max, sum.drift_mean
        ),
    )
}

fn c8_dissipative() -> (bool, String) {
    let sampler = SamplerConfig { kmax_x: 6, kmax_y: 6, ..SamplerConfig::damped() };
    let cfg = TrainConfig { seed: 8, epochs: 20, batch_size: 16, ..TrainConfig::default() };
    let run = fit(grid32(), Model::structured(64, true, 8), 0.002, 4000, &sampler, cfg).unwrap();
    let sum = run.summary(&run.val.samples[..32], 200, 1.0);
    let val = run.out.log.rows.last().map_or(f64::NAN, |r| r.val_mse);
    (sum.nee_mean <= 1e-1, format!("NEE {:.2e} (≤1e-1), val MSE {val:.2e}", sum.nee_mean))
}

fn c9_calibration() -> (bool, String) {
    let g = grid32();
    let th = theory_hodge(&g, 1.0);
    let s = WaveSample::new(WaveNumber::new(1, 0, 1.0).unwrap(), 1.0, 1.0, 0.3, 0.0, 0.0);
    let traj = exact_trajectory(&g, &s, 0.002, 2500).unwrap();
    let d0 = g.d0();
    let k_apply = |q: &[f64], out: &mut [f64]| {
        let mut e = vec![0.0; g.n_edges()];
        stiffness_apply_into(d0, &th.weight, q, &mut e, out)
    };
    let ws = wave_speed_error(&traj, &g, &s.k, 1.0).unwrap();
    let can = canonical_consistency(&traj, &th.mass).unwrap();
    let res = pde_residual(&traj, &th.mass, &k_apply).unwrap();
    let eq = equipartition(&traj, &g, &th).unwrap();
    let mom = momentum_variation(&traj);
    let ok = ws <= 1e-6 && can <= 1e-8 && res <= 1e-4 && eq <= 2e-2 && mom <= 1e-10;
    (ok, format!("wave {ws:.1e} canonical {can:.1e} residual {res:.1e} equipartition {eq:.1e} momentum {mom:.1e}"))
}

fn c10_trained_diagnostics(run: &Trained) -> (bool, String) {
    let g = &run.geom;
    let th = theory_hodge(g, 1.0);
    let mat = run.out.model.materialize(g, &Features::new(g)).unwrap();
    let sys = mat.system(g);
    let theory_sys = System::structured(g, &th, None);
    let val = &run.val.samples[..32];
    let (mut ws, mut can, mut phase) = (0.0, 0.0, 0.0);
    let (mut mf, mut tf) = (Vec::new(), Vec::new());
    for s in val {
        let z0 = plane_wave_state(g, s, s.t0).unwrap();
        let traj = rollout_with(sys, &z0, &run.out.plan, 200).unwrap();
        ws += wave_speed_error(&traj, g, &s.k, 1.0).unwrap() / val.len() as f64;
        can += canonical_consistency(&traj, &th.mass).unwrap() / val.len() as f64;
        let t = 16;
        let f = amp_phase_fit(
            &traj.states[t].q,
            g,
            &s.k,
            s.envelope(t as f64 * traj.dt),
            s.phase_at(s.t0 + t as f64 * traj.dt),
        )
        .unwrap();
        phase += f.phase_err_deg / val.len() as f64;
    }
    for (z, _) in &run.val.pairs {
        mf.push(system_field(sys, z));
        tf.push(system_field(theory_sys, z));
    }
    let (cos, _) = vf_alignment(&mf, &tf).unwrap();
    let ok = ws <= 5e-2 && can <= 1e-3 && cos >= 0.999 && phase <= 3.0;
    (ok, format!("wave {ws:.2e} (≤5e-2) canonical {can:.2e} (≤1e-3) cosine {cos:.6} (≥0.999) phase {phase:.2}° (≤3°)"))
}

fn c11_ablations() -> (bool, String) {
    let geom = periodic_delaunay(256, 1.0, 11).unwrap();
    let base = Model::structured(64, false, 11);
    let cfg = TrainConfig { seed: 11, epochs: 5, ..TrainConfig::default() };
    let sampler = SamplerConfig::default();
    let eval = samples(0x11_0000, 8, &sampler);
    let mut stats = Vec::new();
    for v in [
        AblationVariant::Structured,
        AblationVariant::NoOrientation,
        AblationVariant::ScrambledTopology,
        AblationVariant::LearnedJPsd,
        AblationVariant::LearnedJFree,
    ] {
        let model = make_ablation(v, &geom, &base, 11).unwrap();
        let (drift, mom) = match fit(geom.clone(), model, 0.002, 1000, &sampler, cfg.clone()) {
            Ok(run) => {
                let s = run.summary(&eval, 200, 1.0);
                (s.drift_mean, s.momentum_max)
            }
            Err(_) => (f64::INFINITY, f64::INFINITY),
        };
        stats.push((v, drift, mom));
    }
    let get = |v| stats.iter().find(|s| s.0 == v).map(|s| (s.1, s.2)).unwrap();
    let (sd, sm) = get(AblationVariant::Structured);
    let (_, nm) = get(AblationVariant::NoOrientation);
    let (scd, scm) = get(AblationVariant::ScrambledTopology);
    let (pd, _) = get(AblationVariant::LearnedJPsd);
    let (fd, _) = get(AblationVariant::LearnedJFree);
    let a = nm >= 1e3 * sm;
    let b = scd >= 1e2 * sd && scm <= 1e-6;
    let c = fd >= 10.0 * pd;
    (
        a && b && c,
        format!(
            "(a) momentum no_orientation {nm:.1e} vs structured {sm:.1e} {}; (b) drift scrambled {scd:.1e} vs {sd:.1e}, momentum {scm:.1e} {}; (c) drift free {fd:.1e} vs psd {pd:.1e} {}",
            ok_tag(a),
            ok_tag(b),
            ok_tag(c)
        ),
    )
}

fn ok_tag(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "NOT MET"
    }
}

fn c12_maxwell() -> (bool, String) {
    let g = periodic_grid(64, 64, 1.0).unwrap();
    let grid = MaxwellGrid::new(&g).unwrap();
    let stars = MaxwellStars::randomized(&g, 12, 1.5).unwrap();
    let dt = grid.cfl_dt(&stars, 0.5).unwrap();
    let s0 = maxwell2d::te_mode(&g, &grid, [1, 0], 1.0, 0.2).unwrap();
    let traj = grid.rollout(&stars, &s0, dt, 500, Coupling::Signed).unwrap();
    let charge = maxwell2d::charge_invariant(&traj, g.d0()).unwrap();
    let drift = maxwell2d::energy_drift(&stars, &traj).unwrap();
    let bad = grid.rollout(&stars, &s0, dt, 500, Coupling::Unsigned).unwrap();
    let broken = maxwell2d::charge_invariant(&bad, g.d0()).unwrap();
    (
        charge <= 1e-12 && drift <= 1e-3 && broken > 1e-3,
        format!(
            "charge {charge:.1e} (≤1e-12), energy drift {drift:.1e} (≤1e-3), unsigned control {broken:.1e} (>1e-3)"
        ),
    )
}

fn c13_ood() -> (bool, String) {
    let dt = 0.004;
    let cfg = TrainConfig { seed: 13, batch_size: 16, epochs: 10, ..TrainConfig::default() };
    let base = Model::structured(64, false, 13);
    let g = grid32();
    let scrambled = make_ablation(AblationVariant::ScrambledTopology, &g, &base, 13).unwrap();
    let sampler = SamplerConfig::default();
    let runs = [
        fit(g.clone(), base, dt, 4000, &sampler, cfg.clone()).unwrap(),
        fit(g.clone(), scrambled, dt, 4000, &sampler, cfg).unwrap(),
    ];
    let g64 = periodic_grid(64, 64, 1.0).unwrap();
    let shifts: [(&str, &MeshGeometry, SamplerConfig); 3] = [
        ("frequency", &g, SamplerConfig { kmax_x: 6, kmax_y: 6, ..sampler.clone() }),
        ("wave speed", &g, SamplerConfig { c: 1.4, ..sampler.clone() }),
        ("resolution", &g64, sampler.clone()),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, mesh, sc) in &shifts {
        let eval = samples(0x13_0000, 16, sc);
        let test = PairDataset::generate(mesh, dt, 512, 0x13, sc).unwrap();
        let mut drifts = Vec::new();
        let mut mse = f64::NAN;
        for (i, run) in runs.iter().enumerate() {
            let model = rebind_model(&run.out.model, mesh, 13).unwrap();
            let mat = model.materialize(mesh, &Features::new(mesh)).unwrap();
            let plan = meshft::learn::model_plan(&mat, mesh, dt, 0.5).unwrap();
            let s = evaluate_rollouts(mat.system(mesh), &plan, mesh, &theory_hodge(mesh, sc.c), &eval, 200).unwrap();
            if i == 0 {
                mse = evaluate_mse(&model, mesh, &test, &plan).unwrap();
            }
            drifts.push(s.drift_mean);
        }
        let pass = drifts[0] <= 1e-1 && drifts[0] < drifts[1];
        ok &= pass;
        parts.push(format!(
            "{name}: drift {:.1e} vs scrambled {:.1e}, one-step MSE {mse:.1e} {}",
            drifts[0],
            drifts[1],
            ok_tag(pass)
        ));
    }
    (ok, parts.join("; "))
}

fn c14_determinism(first: &Trained) -> (bool, String) {
    let again = conservative_run(7);
    let same_params =
        first.out.model.params().iter().zip(again.out.model.params()).all(|(a, b)| a.to_bits() == b.to_bits());
    let same_log = first.out.log.to_csv() == again.out.log.to_csv();
    let e1 = first.summary(&first.val.samples[..4], 200, 1.0);
    let e2 = again.summary(&again.val.samples[..4], 200, 1.0);
    let same_metrics =
        e1.drift_max.to_bits() == e2.drift_max.to_bits() && e1.tsmse_mean.to_bits() == e2.tsmse_mean.to_bits();
    (
        same_params && same_log && same_metrics,
        format!("parameters {same_params}, log {same_log}, rollout metrics {same_metrics}"),
    )
}

fn main() {
    let mut lines = Vec::new();
    report(&mut lines, 1, "chain property", 1.0, c1_chain);
    report(&mut lines, 2, "golden triangle", 1.0, c2_golden);
    report(&mut lines, 3, "conservative integrator fidelity", 10.0, c3_integrator);
    report(&mut lines, 4, "exact damping", 1.0, c4_damping);
    report(&mut lines, 5, "gauge equivariance", 5.0, c5_gauge);
    report(&mut lines, 6, "gradient oracle", 30.0, c6_gradient);
    let t = Instant::now();
    let run = conservative_run(7);
    let train_secs = t.elapsed().as_secs_f64();
    report(&mut lines, 7, "desk training (conservative)", 600.0 - train_secs, || c7_conservative(&run));
    if let Some(l) = lines.last_mut() {
        l.secs += train_secs;
    }
    report(&mut lines, 8, "desk training (dissipative)", 1200.0, c8_dissipative);
    report(&mut lines, 9, "diagnostics calibration", 10.0, c9_calibration);
    report(&mut lines, 10, "trained-model diagnostics", 60.0, || c10_trained_diagnostics(&run));
    report(&mut lines, 11, "ablation directionality", 900.0, c11_ablations);
    report(&mut lines, 12, "maxwell invariant", 10.0, c12_maxwell);
    report(&mut lines, 13, "ood shape", 600.0, c13_ood);
    report(&mut lines, 14, "determinism", 600.0, || c14_determinism(&run));
    let passed = lines.iter().filter(|l| l.pass).count();
    println!("acceptance: {passed}/{} criteria passed", lines.len());
    if passed < lines.len() && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
