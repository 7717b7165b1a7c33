use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use meshft::learn::{evaluate_mse, model_plan, train, Checkpoint, Features, Model, TrainOutcome};
use meshft::maxwell2d::{self, Coupling, MaxwellGrid, MaxwellStars};
use meshft::mesher::{MeshGeometry, MeshSpec};
use meshft::phcore::{theory_hodge, Trajectory};
use meshft::physlab::{self, evaluate_rollouts, make_ablation, AblationVariant, DiagnosticsReport, RolloutSummary};
use meshft::rng;
use meshft::stepper::{plan_steps, rollout_with, StepPlan};
use meshft::wavegen::{draw_sample, plane_wave_state, PairDataset, SamplerConfig, WaveSample};
use serde::{Deserialize, Serialize};

use crate::artifacts::{Artifacts, Plot, Provenance, TOOL, TOOL_VERSION};
use crate::config::{sha256_hex, ExperimentConfig};
use crate::{CliError, Command, CommonArgs};

/// Seed salt for evaluation waves, keeping them apart from training pairs.
pub const EVAL_SALT: u64 = 0x0e7a_15a1_7000_0001;
/// Seed salt for shifted test pairs.
pub const OOD_SALT: u64 = 0x00dd_5a17_0000_0002;

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    common: &'a CommonArgs,
    hash: String,
    command: &'static str,
}

impl Ctx<'_> {
    fn artifacts(&self, checkpoint_sha256: Option<String>) -> Result<Artifacts, CliError> {
        let prov = Provenance {
            tool: TOOL,
            tool_version: TOOL_VERSION,
            command: self.command.into(),
            config_sha256: self.hash.clone(),
            seed: self.cfg.seed,
            checkpoint_sha256,
        };
        Artifacts::new(&self.common.out, prov)
    }

    fn mesh(&self, spec: &MeshSpec) -> Result<MeshGeometry, CliError> {
        spec.build(self.cfg.box_length).map_err(|e| CliError::stage(&format!("mesh {spec}"), e))
    }

    fn checkpoint_path(&self) -> PathBuf {
        self.common.checkpoint.clone().unwrap_or_else(|| self.common.out.join("checkpoint.json"))
    }

    /// Reads the checkpoint and checks it against the configured model.
    fn checkpoint(&self, geom: &MeshGeometry) -> Result<(Checkpoint, String), CliError> {
        let path = self.checkpoint_path();
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("checkpoint {}: {e}", path.display())))?;
        let ck = Checkpoint::from_json(&text)
            .map_err(|e| CliError::Config(format!("checkpoint {}: {e}", path.display())))?;
        ck.check_compatible(&build_model(self.cfg, geom)?).map_err(|e| CliError::stage("checkpoint", e))?;
        Ok((ck, sha256_hex(text.as_bytes())))
    }

    fn finish(&self, failures: Vec<String>) -> Result<(), CliError> {
        if self.common.check && !failures.is_empty() {
            Err(CliError::Check(failures))
        } else {
            Ok(())
        }
    }
}

/// Records a failure unless `value ≤ limit` (NaN fails).
fn at_most(fails: &mut Vec<String>, name: &str, value: f64, limit: f64) {
    if !(value <= limit) {
        fails.push(format!("{name} {value:.3e} > {limit:.1e}"));
    }
}

fn build_model(cfg: &ExperimentConfig, geom: &MeshGeometry) -> Result<Model, CliError> {
    let base = Model::structured(cfg.hidden, cfg.damping, cfg.seed);
    make_ablation(cfg.variant()?, geom, &base, cfg.seed).map_err(|e| CliError::stage("model", e))
}

fn datasets(
    cfg: &ExperimentConfig,
    geom: &MeshGeometry,
    n_train: usize,
) -> Result<(PairDataset, PairDataset), CliError> {
    let stage = |e| CliError::stage("gen", e);
    let tr = PairDataset::generate(geom, cfg.dt, n_train, cfg.seed, &cfg.sampler).map_err(stage)?;
    let va = PairDataset::generate_validation(geom, cfg.dt, cfg.val_pairs, cfg.seed, &cfg.sampler).map_err(stage)?;
    Ok((tr, va))
}

/// Evaluation waves: stream `i` of the salted seed.
pub fn eval_samples(seed: u64, count: usize, box_length: f64, sampler: &SamplerConfig) -> Vec<WaveSample> {
    (0..count).map(|i| draw_sample(&mut rng::stream(seed ^ EVAL_SALT, i as u64), box_length, sampler)).collect()
}

/// Runs `f` over `items` on up to `threads` workers; results keep item order.
fn par_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("every item ran")).collect()
}

/// A trained model with its rollout plan on the training mesh.
struct Fitted {
    out: TrainOutcome,
    val_mse: f64,
}

fn fit(
    cfg: &ExperimentConfig,
    geom: &MeshGeometry,
    model: Model,
    tr: &PairDataset,
    va: &PairDataset,
) -> Result<Fitted, CliError> {
    let out = train(model, geom, tr, Some(va), &cfg.train_config()).map_err(|e| CliError::stage("train", e))?;
    let val_mse = out.log.rows.last().map_or(f64::NAN, |r| r.val_mse);
    Ok(Fitted { out, val_mse })
}

fn summarize(
    model: &Model,
    geom: &MeshGeometry,
    plan: &StepPlan,
    c: f64,
    samples: &[WaveSample],
    frames: usize,
) -> Result<RolloutSummary, CliError> {
    let mat = model.materialize(geom, &Features::new(geom)).map_err(|e| CliError::stage("rollout", e))?;
    evaluate_rollouts(mat.system(geom), plan, geom, &theory_hodge(geom, c), samples, frames)
        .map_err(|e| CliError::stage("rollout", e))
}

pub fn execute(command: &Command, common: &CommonArgs, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let ctx = Ctx { cfg, common, hash: cfg.hash(), command: command.name() };
    match command {
        Command::Gen => gen(&ctx),
        Command::Train => train_cmd(&ctx),
        Command::Rollout => rollout_cmd(&ctx),
        Command::Diagnose { trajectory } => diagnose_cmd(&ctx, trajectory.as_deref()),
        Command::Ablate => ablate(&ctx),
        Command::Ood => ood(&ctx),
        Command::Sweep { .. } => sweep(&ctx),
        Command::MaxwellDemo => maxwell_demo(&ctx),
    }
}

#[derive(Serialize)]
struct GenMetrics {
    mesh: String,
    n_nodes: usize,
    n_edges: usize,
    n_faces: usize,
    dt: f64,
    train_pairs: usize,
    val_pairs: usize,
    theory_omega_max: f64,
    theory_n_sub: usize,
}

fn gen(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let geom = ctx.mesh(&cfg.mesh)?;
    let (tr, va) = datasets(cfg, &geom, cfg.train_pairs)?;
    let plan = plan_steps(&geom, &theory_hodge(&geom, cfg.sampler.c), cfg.dt, cfg.cfl)
        .map_err(|e| CliError::stage("gen", e))?;
    let art = ctx.artifacts(None)?;
    let mesh_json: serde_json::Value = serde_json::from_str(&geom.to_json().map_err(|e| CliError::stage("gen", e))?)
        .map_err(|e| CliError::Io(e.to_string()))?;
    art.write_json("mesh.json", &mesh_json)?;
    let mut log = String::from("split,index,ux,uy,amplitude,phase,t0,gamma,c\n");
    for (name, d) in [("train", &tr), ("val", &va)] {
        art.write_json(&format!("{name}.json"), &d.header())?;
        art.write_csv(&format!("{name}.csv"), &d.pairs_csv())?;
        for (i, s) in d.samples.iter().enumerate() {
            let [ux, uy] = s.k.index;
            log += &format!("{name},{i},{ux},{uy},{},{},{},{},{}\n", s.amplitude, s.phase, s.t0, s.gamma, s.c);
        }
    }
    art.write_csv("log.csv", &log)?;
    art.write_json(
        "metrics.json",
        &GenMetrics {
            mesh: cfg.mesh.to_string(),
            n_nodes: geom.n_nodes(),
            n_edges: geom.n_edges(),
            n_faces: geom.n_faces(),
            dt: cfg.dt,
            train_pairs: tr.len(),
            val_pairs: va.len(),
            theory_omega_max: plan.omega_max,
            theory_n_sub: plan.n_sub,
        },
    )?;
    let mut fails = Vec::new();
    if tr.len() != cfg.train_pairs || va.len() != cfg.val_pairs {
        fails.push(format!("dataset sizes {}/{} differ from config", tr.len(), va.len()));
    }
    ctx.finish(fails)
}

#[derive(Serialize)]
struct TrainMetrics {
    variant: String,
    n_params: usize,
    final_train_loss: f64,
    val_mse: f64,
    n_sub: usize,
    omega_max: f64,
    replans: Vec<(usize, usize)>,
    rollout: RolloutSummary,
}

fn loss_plot(out: &TrainOutcome) -> Plot {
    let rows = &out.log.rows;
    Plot {
        title: "training loss".into(),
        x_label: "epoch".into(),
        y_label: "MSE".into(),
        log_y: true,
        series: vec![
            ("train".into(), rows.iter().map(|r| (r.epoch as f64 + 1.0, r.train_loss)).collect()),
            ("validation".into(), rows.iter().map(|r| (r.epoch as f64 + 1.0, r.val_mse)).collect()),
        ],
    }
}

fn train_cmd(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let geom = ctx.mesh(&cfg.mesh)?;
    let (tr, va) = datasets(cfg, &geom, cfg.train_pairs)?;
    let fitted = fit(cfg, &geom, build_model(cfg, &geom)?, &tr, &va)?;
    let out = &fitted.out;
    let samples = eval_samples(cfg.seed, cfg.eval_samples, cfg.box_length, &cfg.sampler);
    let summary = summarize(&out.model, &geom, &out.plan, cfg.sampler.c, &samples, cfg.frames)?;
    let ck_config = serde_json::json!({ "config_sha256": ctx.hash, "config": cfg });
    let ck = Checkpoint::new(out.model.clone(), &geom, cfg.dt, cfg.seed, ck_config);
    let ck_text = ck.to_json().map_err(|e| CliError::stage("checkpoint", e))?;
    let art = ctx.artifacts(Some(sha256_hex(ck_text.as_bytes())))?;
    art.write_raw("checkpoint.json", &ck_text)?;
    art.write_csv("log.csv", &out.log.to_csv())?;
    art.write_svg("loss.svg", &loss_plot(out))?;
    art.write_json(
        "metrics.json",
        &TrainMetrics {
            variant: cfg.variant.clone(),
            n_params: out.model.n_params(),
            final_train_loss: out.log.rows.last().map_or(f64::NAN, |r| r.train_loss),
            val_mse: fitted.val_mse,
            n_sub: out.plan.n_sub,
            omega_max: out.plan.omega_max,
            replans: out.log.replans.clone(),
            rollout: summary.clone(),
        },
    )?;
    if !fitted.val_mse.is_finite() {
        return Err(CliError::Numeric(format!("validation MSE {}", fitted.val_mse)));
    }
    let mut fails = Vec::new();
    at_most(&mut fails, "val_mse", fitted.val_mse, cfg.check.val_mse);
    at_most(&mut fails, "drift_max", summary.drift_max, cfg.check.drift);
    at_most(&mut fails, "momentum_max", summary.momentum_max, cfg.check.momentum);
    ctx.finish(fails)
}

/// `rollout --dump-states` output, read back by `diagnose`.
#[derive(Debug, Serialize, Deserialize)]
pub struct StateDump {
    pub mesh: String,
    pub sample: WaveSample,
    pub trajectory: Trajectory,
}

#[derive(Serialize)]
struct RolloutMetrics {
    mesh: String,
    dt: f64,
    n_sub: usize,
    omega_max: f64,
    summary: RolloutSummary,
}

fn rollout_cmd(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let geom = ctx.mesh(&cfg.mesh)?;
    let (ck, ck_hash) = ctx.checkpoint(&geom)?;
    let mat = ck.model.materialize(&geom, &Features::new(&geom)).map_err(|e| CliError::stage("rollout", e))?;
    let plan = model_plan(&mat, &geom, cfg.dt, cfg.cfl).map_err(|e| CliError::stage("rollout", e))?;
    let samples = eval_samples(cfg.seed, cfg.eval_samples, cfg.box_length, &cfg.sampler);
    let summary = summarize(&ck.model, &geom, &plan, cfg.sampler.c, &samples, cfg.frames)?;
    let art = ctx.artifacts(Some(ck_hash))?;
    art.write_json(
        "metrics.json",
        &RolloutMetrics {
            mesh: cfg.mesh.to_string(),
            dt: cfg.dt,
            n_sub: plan.n_sub,
            omega_max: plan.omega_max,
            summary: summary.clone(),
        },
    )?;
    let s0 = &samples[0];
    let z0 = plane_wave_state(&geom, s0, s0.t0).map_err(|e| CliError::stage("rollout", e))?;
    let traj = rollout_with(mat.system(&geom), &z0, &plan, cfg.frames);
    if let Ok(traj) = &traj {
        let theory = theory_hodge(&geom, cfg.sampler.c);
        art.write_csv("log.csv", &traj.summary_csv(&geom, &theory).map_err(|e| CliError::stage("rollout", e))?)?;
        let e = physlab::energy_series(traj, &geom, &theory);
        let plot = Plot {
            title: "energy of the first evaluation wave".into(),
            x_label: "t".into(),
            y_label: "H / H(0)".into(),
            log_y: false,
            series: vec![("model".into(), e.iter().enumerate().map(|(i, h)| (i as f64 * cfg.dt, h / e[0])).collect())],
        };
        art.write_svg("energy.svg", &plot)?;
        if ctx.common.dump_states {
            art.write_json(
                "trajectory.json",
                &StateDump { mesh: cfg.mesh.to_string(), sample: *s0, trajectory: traj.clone() },
            )?;
        }
    }
    if summary.diverged > 0 {
        return Err(CliError::Numeric(format!("{} of {} rollouts diverged", summary.diverged, summary.samples)));
    }
    traj.map_err(|e| CliError::stage("rollout", e))?;
    let mut fails = Vec::new();
    at_most(&mut fails, "drift_max", summary.drift_max, cfg.check.drift);
    at_most(&mut fails, "momentum_max", summary.momentum_max, cfg.check.momentum);
    ctx.finish(fails)
}

#[derive(Serialize)]
struct DiagnoseMetrics {
    source: String,
    sample: WaveSample,
    report: DiagnosticsReport,
}

fn diagnose_cmd(ctx: &Ctx, dump: Option<&std::path::Path>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let geom = ctx.mesh(&cfg.mesh)?;
    let (source, sample, traj, ck_hash) = match dump {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let d: StateDump =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if d.mesh != cfg.mesh.to_string() || d.trajectory.states.first().map(|s| s.len()) != Some(geom.n_nodes()) {
                return Err(CliError::Config(format!(
                    "trajectory mesh {} does not match config mesh {}",
                    d.mesh, cfg.mesh
                )));
            }
            (path.display().to_string(), d.sample, d.trajectory, None)
        }
        None => {
            let (ck, hash) = ctx.checkpoint(&geom)?;
            let mat = ck.model.materialize(&geom, &Features::new(&geom)).map_err(|e| CliError::stage("diagnose", e))?;
            let plan = model_plan(&mat, &geom, cfg.dt, cfg.cfl).map_err(|e| CliError::stage("diagnose", e))?;
            let s0 = eval_samples(cfg.seed, 1, cfg.box_length, &cfg.sampler)[0];
            let z0 = plane_wave_state(&geom, &s0, s0.t0).map_err(|e| CliError::stage("diagnose", e))?;
            let traj =
                rollout_with(mat.system(&geom), &z0, &plan, cfg.frames).map_err(|e| CliError::stage("diagnose", e))?;
            (ctx.checkpoint_path().display().to_string(), s0, traj, Some(hash))
        }
    };
    let c = cfg.sampler.c;
    let report = physlab::diagnose(&traj, &geom, &theory_hodge(&geom, c), &sample.k, c)
        .map_err(|e| CliError::stage("diagnose", e))?;
    let art = ctx.artifacts(ck_hash)?;
    art.write_json("metrics.json", &DiagnoseMetrics { source, sample, report: report.clone() })?;
    art.write_csv("log.csv", &format!("{}\n{}\n", DiagnosticsReport::CSV_HEADER, report.csv_row()))?;
    let mut fails = Vec::new();
    at_most(&mut fails, "wave_speed_err", report.wave_speed_err, cfg.check.wave_speed);
    at_most(&mut fails, "canonical_err", report.canonical_err, cfg.check.canonical);
    at_most(&mut fails, "momentum_variation", report.momentum_variation, cfg.check.momentum);
    ctx.finish(fails)
}

#[derive(Clone, Serialize)]
struct VariantResult {
    variant: String,
    status: String,
    val_mse: f64,
    drift_mean: f64,
    drift_max: f64,
    injection_mean: f64,
    momentum_max: f64,
    tsmse_mean: f64,
}

fn ablate(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let geom = ctx.mesh(&cfg.mesh)?;
    let (tr, va) = datasets(cfg, &geom, cfg.train_pairs)?;
    let base = Model::structured(cfg.hidden, cfg.damping, cfg.seed);
    let samples = eval_samples(cfg.seed, cfg.eval_samples, cfg.box_length, &cfg.sampler);
    let variants = cfg.ablation_variants()?;
    let results = par_map(&variants, cfg.sweep.threads, |&v| -> Result<VariantResult, CliError> {
        let model = make_ablation(v, &geom, &base, cfg.seed).map_err(|e| CliError::stage("ablate", e))?;
        let mut r = VariantResult {
            variant: v.tag().into(),
            status: "ok".into(),
            val_mse: f64::INFINITY,
            drift_mean: f64::INFINITY,
            drift_max: f64::INFINITY,
            injection_mean: f64::INFINITY,
            momentum_max: f64::INFINITY,
            tsmse_mean: f64::INFINITY,
        };
        match fit(cfg, &geom, model, &tr, &va) {
            Ok(f) => {
                let s = summarize(&f.out.model, &geom, &f.out.plan, cfg.sampler.c, &samples, cfg.frames)?;
                r.val_mse = f.val_mse;
                (r.drift_mean, r.drift_max, r.injection_mean, r.momentum_max, r.tsmse_mean) =
                    (s.drift_mean, s.drift_max, s.injection_mean, s.momentum_max, s.tsmse_mean);
                if s.diverged > 0 {
                    r.status = format!("{} rollouts diverged", s.diverged);
                }
            }
            Err(CliError::Numeric(m)) => r.status = m,
            Err(e) => return Err(e),
        }
        Ok(r)
    });
    let results: Vec<VariantResult> = results.into_iter().collect::<Result<_, _>>()?;
    let art = ctx.artifacts(None)?;
    let mut csv = String::from("variant,val_mse,drift_mean,drift_max,injection_mean,momentum_max,tsmse_mean,status\n");
    for r in &results {
        csv += &format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{}\n",
            r.variant,
            r.val_mse,
            r.drift_mean,
            r.drift_max,
            r.injection_mean,
            r.momentum_max,
            r.tsmse_mean,
            r.status.replace(',', ";")
        );
    }
    art.write_csv("log.csv", &csv)?;
    art.write_json("metrics.json", &serde_json::json!({ "mesh": cfg.mesh.to_string(), "variants": results }))?;
    let get = |v: AblationVariant| results.iter().find(|r| r.variant == v.tag());
    let mut fails = Vec::new();
    if let Some(s) = get(AblationVariant::Structured) {
        if let Some(n) = get(AblationVariant::NoOrientation) {
            if !(n.momentum_max >= 1e3 * s.momentum_max) {
                fails.push(format!(
                    "no_orientation momentum {:.1e} not 1e3 above structured {:.1e}",
                    n.momentum_max, s.momentum_max
                ));
            }
        }
        if let Some(n) = get(AblationVariant::ScrambledTopology) {
            if !(n.drift_mean >= 1e2 * s.drift_mean) {
                fails.push(format!(
                    "scrambled drift {:.1e} not 1e2 above structured {:.1e}",
                    n.drift_mean, s.drift_mean
                ));
            }
            at_most(&mut fails, "scrambled momentum_max", n.momentum_max, cfg.check.momentum);
        }
    }
    if let (Some(p), Some(f)) = (get(AblationVariant::LearnedJPsd), get(AblationVariant::LearnedJFree)) {
        if !(f.drift_mean >= 10.0 * p.drift_mean) {
            fails.push(format!("learned_J_free drift {:.1e} not 10x learned_J_psd {:.1e}", f.drift_mean, p.drift_mean));
        }
    }
    ctx.finish(fails)
}

#[derive(Clone, Serialize)]
struct ShiftResult {
    shift: &'static str,
    mesh: String,
    kmax: u32,
    c: f64,
    one_step_mse: f64,
    tsmse_mean: f64,
    drift_mean: f64,
    drift_max: f64,
    momentum_max: f64,
    nee_mean: f64,
}

fn ood(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let geom = ctx.mesh(&cfg.mesh)?;
    let (ck, ck_hash) = ctx.checkpoint(&geom)?;
    let shifted = |kmax: Option<u32>, c: Option<f64>| SamplerConfig {
        kmax_x: kmax.unwrap_or(cfg.sampler.kmax_x),
        kmax_y: kmax.unwrap_or(cfg.sampler.kmax_y),
        c: c.unwrap_or(cfg.sampler.c),
        ..cfg.sampler.clone()
    };
    let shifts = [
        ("identity", cfg.mesh.clone(), shifted(None, None)),
        ("frequency", cfg.mesh.clone(), shifted(Some(cfg.ood.test_kmax), None)),
        ("parameter", cfg.mesh.clone(), shifted(None, Some(cfg.ood.test_c))),
        ("resolution", cfg.ood.test_mesh.clone(), shifted(None, None)),
    ];
    let results = par_map(&shifts, cfg.sweep.threads, |(name, spec, sc)| -> Result<ShiftResult, CliError> {
        let mesh = ctx.mesh(spec)?;
        let stage = |e| CliError::stage(&format!("ood {name}"), e);
        let model = physlab::rebind_model(&ck.model, &mesh, cfg.seed).map_err(stage)?;
        let mat = model.materialize(&mesh, &Features::new(&mesh)).map_err(stage)?;
        let plan = model_plan(&mat, &mesh, cfg.dt, cfg.cfl).map_err(stage)?;
        let test = PairDataset::generate(&mesh, cfg.dt, cfg.ood.test_pairs, cfg.seed ^ OOD_SALT, sc).map_err(stage)?;
        let one_step_mse = evaluate_mse(&model, &mesh, &test, &plan).map_err(stage)?;
        let samples = eval_samples(cfg.seed ^ OOD_SALT, cfg.ood.rollouts, cfg.box_length, sc);
        let s = summarize(&model, &mesh, &plan, sc.c, &samples, cfg.frames)?;
        Ok(ShiftResult {
            shift: name,
            mesh: spec.to_string(),
            kmax: sc.kmax_x,
            c: sc.c,
            one_step_mse,
            tsmse_mean: s.tsmse_mean,
            drift_mean: s.drift_mean,
            drift_max: s.drift_max,
            momentum_max: s.momentum_max,
            nee_mean: s.nee_mean,
        })
    });
    let results: Vec<ShiftResult> = results.into_iter().collect::<Result<_, _>>()?;
    let art = ctx.artifacts(Some(ck_hash))?;
    let mut csv =
        String::from("shift,mesh,kmax,c,one_step_mse,tsmse_mean,drift_mean,drift_max,momentum_max,nee_mean\n");
    for r in &results {
        csv += &format!(
            "{},\"{}\",{},{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            r.shift,
            r.mesh,
            r.kmax,
            r.c,
            r.one_step_mse,
            r.tsmse_mean,
            r.drift_mean,
            r.drift_max,
            r.momentum_max,
            r.nee_mean
        );
    }
    art.write_csv("log.csv", &csv)?;
    art.write_json("metrics.json", &serde_json::json!({ "dt": cfg.dt, "frames": cfg.frames, "shifts": results }))?;
    let mut fails = Vec::new();
    for r in &results {
        at_most(&mut fails, &format!("{} drift_mean", r.shift), r.drift_mean, cfg.check.ood_drift);
    }
    ctx.finish(fails)
}

#[derive(Clone, Serialize)]
struct SweepPoint {
    size: usize,
    one_step_mse: f64,
    drift_mean: f64,
    drift_max: f64,
    tsmse_mean: f64,
}

fn sweep(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let geom = ctx.mesh(&cfg.mesh)?;
    let samples = eval_samples(cfg.seed, cfg.eval_samples, cfg.box_length, &cfg.sampler);
    let (_, va) = datasets(cfg, &geom, 0)?;
    let points = par_map(&cfg.sweep.sizes, cfg.sweep.threads, |&n| -> Result<SweepPoint, CliError> {
        let tr =
            PairDataset::generate(&geom, cfg.dt, n, cfg.seed, &cfg.sampler).map_err(|e| CliError::stage("sweep", e))?;
        let f = fit(cfg, &geom, build_model(cfg, &geom)?, &tr, &va)?;
        let s = summarize(&f.out.model, &geom, &f.out.plan, cfg.sampler.c, &samples, cfg.frames)?;
        Ok(SweepPoint {
            size: n,
            one_step_mse: f.val_mse,
            drift_mean: s.drift_mean,
            drift_max: s.drift_max,
            tsmse_mean: s.tsmse_mean,
        })
    });
    let points: Vec<SweepPoint> = points.into_iter().collect::<Result<_, _>>()?;
    let art = ctx.artifacts(None)?;
    let mut csv = String::from("size,one_step_mse,drift\n");
    for p in &points {
        csv += &format!("{},{:e},{:e}\n", p.size, p.one_step_mse, p.drift_mean);
    }
    art.write_csv("log.csv", &csv)?;
    art.write_svg(
        "sweep.svg",
        &Plot {
            title: "data efficiency".into(),
            x_label: "training pairs".into(),
            y_label: "metric".into(),
            log_y: true,
            series: vec![
                ("one-step MSE".into(), points.iter().map(|p| (p.size as f64, p.one_step_mse)).collect()),
                ("drift".into(), points.iter().map(|p| (p.size as f64, p.drift_mean)).collect()),
            ],
        },
    )?;
    art.write_json("metrics.json", &serde_json::json!({ "mesh": cfg.mesh.to_string(), "points": points }))?;
    let mut fails = Vec::new();
    let by_size = |p: &&SweepPoint| p.size;
    if let (Some(small), Some(large)) = (points.iter().min_by_key(by_size), points.iter().max_by_key(by_size)) {
        if small.size < large.size && !(large.one_step_mse < small.one_step_mse) {
            fails.push(format!(
                "one-step MSE at {} pairs ({:.2e}) not below {} pairs ({:.2e})",
                large.size, large.one_step_mse, small.size, small.one_step_mse
            ));
        }
    }
    for p in &points {
        if !p.one_step_mse.is_finite() {
            fails.push(format!("size {} has non-finite MSE", p.size));
        }
    }
    ctx.finish(fails)
}

#[derive(Serialize)]
struct MaxwellMetrics {
    mesh: String,
    n_faces: usize,
    n_edges: usize,
    steps: usize,
    dt: f64,
    omega_max: f64,
    spread: f64,
    energy_drift: f64,
    charge_invariant: f64,
    unsigned_charge_invariant: f64,
}

fn maxwell_demo(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let mc = &cfg.maxwell;
    let geom = ctx.mesh(&mc.mesh)?;
    let stage = |e| CliError::stage("maxwell-demo", e);
    let grid = MaxwellGrid::new(&geom).map_err(stage)?;
    let stars = MaxwellStars::randomized(&geom, cfg.seed, mc.spread).map_err(stage)?;
    let omega = grid.omega_max(&stars).map_err(stage)?.omega_max;
    let dt = grid.cfl_dt(&stars, mc.cfl).map_err(stage)?;
    let s0 = maxwell2d::te_mode(&geom, &grid, mc.mode, 1.0, 0.2).map_err(stage)?;
    let traj = grid.rollout(&stars, &s0, dt, mc.steps, Coupling::Signed).map_err(stage)?;
    let control = grid.rollout(&stars, &s0, dt, mc.steps, Coupling::Unsigned).map_err(stage)?;
    let d0 = geom.d0();
    let e0 = maxwell2d::energy(&stars, &s0);
    let mut csv = String::from("t,energy,charge_invariant\n");
    let mut energy_pts = Vec::new();
    for (i, s) in traj.iter().enumerate() {
        let e = maxwell2d::energy(&stars, s);
        let q = maxwell2d::charge_invariant(&[s0.clone(), s.clone()], d0).map_err(stage)?;
        let t = i as f64 * dt;
        csv += &format!("{t},{e:e},{q:e}\n");
        energy_pts.push((t, e / e0));
    }
    let metrics = MaxwellMetrics {
        mesh: mc.mesh.to_string(),
        n_faces: grid.n_faces(),
        n_edges: grid.n_edges(),
        steps: mc.steps,
        dt,
        omega_max: omega,
        spread: mc.spread,
        energy_drift: maxwell2d::energy_drift(&stars, &traj).map_err(stage)?,
        charge_invariant: maxwell2d::charge_invariant(&traj, d0).map_err(stage)?,
        unsigned_charge_invariant: maxwell2d::charge_invariant(&control, d0).map_err(stage)?,
    };
    let art = ctx.artifacts(None)?;
    art.write_csv("log.csv", &csv)?;
    art.write_svg(
        "energy.svg",
        &Plot {
            title: "Maxwell energy".into(),
            x_label: "t".into(),
            y_label: "E / E(0)".into(),
            log_y: false,
            series: vec![("signed".into(), energy_pts)],
        },
    )?;
    art.write_json("metrics.json", &metrics)?;
    if !metrics.energy_drift.is_finite() {
        return Err(CliError::Numeric("non-finite Maxwell energy".into()));
    }
    let mut fails = Vec::new();
    at_most(&mut fails, "charge_invariant", metrics.charge_invariant, cfg.check.charge);
    at_most(&mut fails, "energy_drift", metrics.energy_drift, cfg.check.maxwell_drift);
    ctx.finish(fails)
}
