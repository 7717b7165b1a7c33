//! Physics-consistency diagnostics, energy bookkeeping, and the structural
//! ablation factory.
//!
//! All energies here are measured with a caller-supplied reference metric,
//! normally the shared theory Hodge, never with a model's own metric.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::learn::{GainMode, Model, WiringSpec};
use crate::mesher::MeshGeometry;
use crate::phcore::{
    kinetic_energy, potential_energy, stiffness_apply_into, CanonicalState, EdgeMap, HodgeStar, SplitWiring,
    Trajectory, Wiring,
};
use crate::rng;
use crate::stepper::{rollout_with, StepPlan, System};
use crate::wavegen::{exact_trajectory, WaveNumber, WaveSample};

/// Guard added to energy denominators.
pub const ENERGY_EPS: f64 = 1e-12;
/// Frames in the short PDE-residual window.
pub const SHORT_WINDOW: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub wave_speed_err: f64,
    pub canonical_err: f64,
    pub pde_residual_short: f64,
    pub pde_residual_long: f64,
    pub equipartition_err: f64,
    pub momentum_variation: f64,
    pub energy_drift: f64,
    pub energy_injection: f64,
    pub steps: usize,
    pub dt: f64,
    pub c: f64,
}

impl DiagnosticsReport {
    pub const CSV_HEADER: &'static str = "wave_speed_err,canonical_err,pde_residual_short,pde_residual_long,equipartition_err,momentum_variation,energy_drift,energy_injection";

    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.wave_speed_err,
            self.canonical_err,
            self.pde_residual_short,
            self.pde_residual_long,
            self.equipartition_err,
            self.momentum_variation,
            self.energy_drift,
            self.energy_injection
        )
    }
}

/// Least-squares fit `q ≈ a sin(kᵀx) + b cos(kᵀx)`.
pub fn fit_sin_cos(q: &[f64], geom: &MeshGeometry, k: &WaveNumber) -> Result<(f64, f64)> {
    check_len(geom.n_nodes(), q.len())?;
    let (mut ss, mut sc, mut cc, mut qs, mut qc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (th, &v) in k.phases(geom).iter().zip(q) {
        let (s, c) = th.sin_cos();
        ss += s * s;
        sc += s * c;
        cc += c * c;
        qs += v * s;
        qc += v * c;
    }
    let det = ss * cc - sc * sc;
    if det.abs() <= 1e-12 * (ss + cc).powi(2) {
        return Err(Error::SingularFit);
    }
    Ok(((qs * cc - qc * sc) / det, (qc * ss - qs * sc) / det))
}

/// Result of a plane-wave fit against a known truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmpPhaseFit {
    pub amp_err_rel: f64,
    pub phase_err_deg: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Wraps an angle in degrees into `(−180, 180]`.
pub fn wrap_degrees(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Fits `(Â, φ̂)` and compares with the truth `(A, φ_eff)`.
pub fn amp_phase_fit(
    q: &[f64],
    geom: &MeshGeometry,
    k: &WaveNumber,
    amplitude: f64,
    phase_eff: f64,
) -> Result<AmpPhaseFit> {
    let (a, b) = fit_sin_cos(q, geom, k)?;
    let amp = a.hypot(b);
    let phase = b.atan2(a);
    Ok(AmpPhaseFit {
        amp_err_rel: (amp - amplitude).abs() / amplitude.abs(),
        phase_err_deg: wrap_degrees((phase - phase_eff).to_degrees()).abs(),
        amplitude: amp,
        phase,
    })
}

/// Relative wave-speed error from amplitude-weighted phase increments.
pub fn wave_speed_error(traj: &Trajectory, geom: &MeshGeometry, k: &WaveNumber, c: f64) -> Result<f64> {
    let frames = traj.states.len();
    if frames < 3 {
        return Err(Error::TooShort { need: 3, got: frames });
    }
    let mut phase = Vec::with_capacity(frames);
    let mut mag = Vec::with_capacity(frames);
    for s in &traj.states {
        let (a, b) = fit_sin_cos(&s.q, geom, k)?;
        phase.push(b.atan2(a));
        mag.push(a.hypot(b));
    }
    let tiny = mag.iter().filter(|&&m| m < 1e-12).count();
    if 2 * tiny > frames {
        return Err(Error::ZeroModeAmplitude);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for t in 0..frames - 1 {
        let w = 0.5 * (mag[t] + mag[t + 1]);
        let mut d = phase[t + 1] - phase[t];
        d = (d + PI).rem_euclid(2.0 * PI) - PI;
        num += w * d;
        den += w;
    }
    let omega = -num / (den * traj.dt);
    let c_hat = omega / k.norm();
    Ok((c_hat - c).abs() / c)
}

fn check_traj(traj: &Trajectory, need: usize, n: usize) -> Result<()> {
    if traj.states.len() < need {
        return Err(Error::TooShort { need, got: traj.states.len() });
    }
    check_len(n, traj.states[0].len())
}

/// `Σ‖p_mid − M q̇‖² / Σ‖M q̇‖²` over interior frames.
pub fn canonical_consistency(traj: &Trajectory, mass: &[f64]) -> Result<f64> {
    check_traj(traj, 3, mass.len())?;
    let s = &traj.states;
    let (mut num, mut den) = (0.0, 0.0);
    for t in 1..s.len() - 1 {
        for i in 0..mass.len() {
            let mqd = mass[i] * (s[t + 1].q[i] - s[t - 1].q[i]) / (2.0 * traj.dt);
            let pm = 0.5 * (s[t + 1].p[i] + s[t - 1].p[i]);
            num += (pm - mqd).powi(2);
            den += mqd * mqd;
        }
    }
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

/// `Σ‖M q̈ + K q‖² / Σ(‖M q̈‖² + ‖K q‖²)` over interior frames; 0/0 gives 0.
pub fn pde_residual(traj: &Trajectory, mass: &[f64], k_apply: &dyn Fn(&[f64], &mut [f64])) -> Result<f64> {
    check_traj(traj, 3, mass.len())?;
    let s = &traj.states;
    let n = mass.len();
    let mut kq = vec![0.0; n];
    let (mut num, mut den) = (0.0, 0.0);
    let dt2 = traj.dt * traj.dt;
    for t in 1..s.len() - 1 {
        k_apply(&s[t].q, &mut kq);
        for i in 0..n {
            let mqdd = mass[i] * (s[t + 1].q[i] - 2.0 * s[t].q[i] + s[t - 1].q[i]) / dt2;
            num += (mqdd + kq[i]).powi(2);
            den += mqdd * mqdd + kq[i] * kq[i];
        }
    }
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

/// `|⟨T⟩ − ⟨U⟩| / (⟨T⟩ + ⟨U⟩)`.
pub fn equipartition(traj: &Trajectory, geom: &MeshGeometry, hodge: &HodgeStar) -> Result<f64> {
    check_traj(traj, 1, geom.n_nodes())?;
    let (mut kin, mut pot) = (0.0, 0.0);
    for s in &traj.states {
        kin += kinetic_energy(&hodge.mass, &s.p);
        pot += potential_energy(geom, &hodge.weight, &s.q);
    }
    let f = traj.states.len() as f64;
    let (kin, pot) = (kin / f, pot / f);
    if kin + pot < 1e-14 {
        return Err(Error::ZeroEnergy);
    }
    Ok((kin - pot).abs() / (kin + pot))
}

/// `(max m_t − min m_t) / mean_t Σ|p_t|` with `m_t = Σ p_t`.
pub fn momentum_variation(traj: &Trajectory) -> f64 {
    let (mut lo, mut hi, mut l1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for s in &traj.states {
        let m: f64 = s.p.iter().sum();
        lo = lo.min(m);
        hi = hi.max(m);
        l1 += s.p.iter().map(|v| v.abs()).sum::<f64>();
    }
    let mean = l1 / traj.states.len().max(1) as f64;
    if mean == 0.0 || traj.states.is_empty() {
        0.0
    } else {
        (hi - lo) / mean
    }
}

/// Energy of every frame under `hodge`.
pub fn energy_series(traj: &Trajectory, geom: &MeshGeometry, hodge: &HodgeStar) -> Vec<f64> {
    traj.states
        .iter()
        .map(|s| potential_energy(geom, &hodge.weight, &s.q) + kinetic_energy(&hodge.mass, &s.p))
        .collect()
}

/// `(max_t |E_t − E_0| / |E_0|, Σ max(E_{t+1} − E_t, 0) / |E_0|)`, both ε-guarded.
pub fn energy_drift_and_injection(traj: &Trajectory, geom: &MeshGeometry, hodge: &HodgeStar) -> (f64, f64) {
    drift_and_injection(&energy_series(traj, geom, hodge))
}

pub fn drift_and_injection(e: &[f64]) -> (f64, f64) {
    let Some(&e0) = e.first() else {
        return (0.0, 0.0);
    };
    let den = e0.abs() + ENERGY_EPS;
    let drift = e.iter().map(|x| (x - e0).abs()).fold(0.0, f64::max) / den;
    let inj = e.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum::<f64>() / den;
    (drift, inj)
}

/// Mean over frames of `|Ê_t − E_t| / |E_0|`, with `E` from the reference trajectory.
pub fn normalized_energy_error(
    pred: &Trajectory,
    reference: &Trajectory,
    geom: &MeshGeometry,
    hodge: &HodgeStar,
) -> Result<f64> {
    if pred.states.len() != reference.states.len() {
        return Err(Error::ShapeMismatch("trajectories differ in length".into()));
    }
    let a = energy_series(pred, geom, hodge);
    let b = energy_series(reference, geom, hodge);
    let den = b[0].abs() + ENERGY_EPS;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / (den * a.len() as f64))
}

/// Mean over frames `1..=T` of the per-frame MSE against the reference.
pub fn tsmse(pred: &Trajectory, reference: &Trajectory) -> Result<f64> {
    if pred.states.len() != reference.states.len() || pred.states.len() < 2 {
        return Err(Error::ShapeMismatch("trajectories differ in length or are too short".into()));
    }
    let t = pred.states.len() - 1;
    Ok(pred.states[1..]
        .iter()
        .zip(&reference.states[1..])
        .map(|(a, b)| crate::learn::mse(a, b, crate::learn::LossTarget::Both))
        .sum::<f64>()
        / t as f64)
}

/// `[M⁻¹p, −Kq − r⊙p]` of a system at one state.
pub fn system_field(system: System<'_>, state: &CanonicalState) -> Vec<f64> {
    let n = state.len();
    let mut edge = vec![0.0; system.wiring.n_edges()];
    let mut kq = vec![0.0; n];
    stiffness_apply_into(system.wiring, &system.hodge.weight, &state.q, &mut edge, &mut kq);
    let mut out: Vec<f64> = state.p.iter().zip(&system.hodge.mass).map(|(p, m)| p / m).collect();
    for i in 0..n {
        let damp = system.damping.map_or(0.0, |r| r[i] * state.p[i]);
        out.push(-kq[i] - damp);
    }
    out
}

/// Batch-aggregated cosine similarity and relative L2 error.
pub fn vf_alignment(model: &[Vec<f64>], theory: &[Vec<f64>]) -> Result<(f64, f64)> {
    if model.len() != theory.len() || model.is_empty() {
        return Err(Error::ShapeMismatch("field batches differ in size or are empty".into()));
    }
    let (mut dot, mut nm, mut nt, mut diff) = (0.0, 0.0, 0.0, 0.0);
    for (a, b) in model.iter().zip(theory) {
        check_len(b.len(), a.len())?;
        for (x, y) in a.iter().zip(b) {
            dot += x * y;
            nm += x * x;
            nt += y * y;
            diff += (x - y).powi(2);
        }
    }
    if nm == 0.0 || nt == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok((dot / (nm.sqrt() * nt.sqrt()), (diff / nt).sqrt()))
}

/// Full Table-6 report on one trajectory with known wavenumber.
pub fn diagnose(
    traj: &Trajectory,
    geom: &MeshGeometry,
    theory: &HodgeStar,
    k: &WaveNumber,
    c: f64,
) -> Result<DiagnosticsReport> {
    let d0 = geom.d0();
    let mut edge = vec![0.0; geom.n_edges()];
    let edge_cell = std::cell::RefCell::new(&mut edge);
    let k_apply = |q: &[f64], out: &mut [f64]| {
        let mut e = edge_cell.borrow_mut();
        stiffness_apply_into(d0, &theory.weight, q, &mut e, out)
    };
    let short = Trajectory {
        dt: traj.dt,
        states: traj.states[..traj.states.len().min(SHORT_WINDOW + 1)].to_vec(),
        meta: traj.meta.clone(),
    };
    let (energy_drift, energy_injection) = energy_drift_and_injection(traj, geom, theory);
    Ok(DiagnosticsReport {
        wave_speed_err: wave_speed_error(traj, geom, k, c)?,
        canonical_err: canonical_consistency(traj, &theory.mass)?,
        pde_residual_short: pde_residual(&short, &theory.mass, &k_apply)?,
        pde_residual_long: pde_residual(traj, &theory.mass, &k_apply)?,
        equipartition_err: equipartition(traj, geom, theory)?,
        momentum_variation: momentum_variation(traj),
        energy_drift,
        energy_injection,
        steps: traj.steps(),
        dt: traj.dt,
        c,
    })
}

/// Open-loop rollouts from a set of waves, scored against their exact
/// trajectories under a shared reference metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub samples: usize,
    pub frames: usize,
    pub drift_mean: f64,
    pub drift_max: f64,
    pub injection_mean: f64,
    pub tsmse_mean: f64,
    pub nee_mean: f64,
    pub momentum_max: f64,
    /// Rollouts that produced non-finite states; they score `inf`.
    pub diverged: usize,
}

pub fn evaluate_rollouts(
    system: System<'_>,
    plan: &StepPlan,
    geom: &MeshGeometry,
    reference: &HodgeStar,
    samples: &[WaveSample],
    frames: usize,
) -> Result<RolloutSummary> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to roll out".into()));
    }
    let mut out = RolloutSummary {
        samples: samples.len(),
        frames,
        drift_mean: 0.0,
        drift_max: 0.0,
        injection_mean: 0.0,
        tsmse_mean: 0.0,
        nee_mean: 0.0,
        momentum_max: 0.0,
        diverged: 0,
    };
    let f = 1.0 / samples.len() as f64;
    for s in samples {
        let exact = exact_trajectory(geom, s, plan.dt_data, frames)?;
        let pred = match rollout_with(system, &exact.states[0], plan, frames) {
            Ok(t) => t,
            Err(Error::NonFiniteState { .. }) => {
                out.diverged += 1;
                for v in [
                    &mut out.drift_mean,
                    &mut out.drift_max,
                    &mut out.injection_mean,
                    &mut out.tsmse_mean,
                    &mut out.nee_mean,
                    &mut out.momentum_max,
                ] {
                    *v = f64::INFINITY;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let (d, i) = energy_drift_and_injection(&pred, geom, reference);
        out.drift_mean += f * d;
        out.drift_max = out.drift_max.max(d);
        out.injection_mean += f * i;
        out.tsmse_mean += f * tsmse(&pred, &exact)?;
        out.nee_mean += f * normalized_energy_error(&pred, &exact, geom, reference)?;
        out.momentum_max = out.momentum_max.max(momentum_variation(&pred));
    }
    Ok(out)
}

/// Structural ablation tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Structured,
    NoOrientation,
    ScrambledTopology,
    IndefiniteMetric,
    LearnedJPsd,
    LearnedJFree,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 6] = [
        AblationVariant::Structured,
        AblationVariant::NoOrientation,
        AblationVariant::ScrambledTopology,
        AblationVariant::IndefiniteMetric,
        AblationVariant::LearnedJPsd,
        AblationVariant::LearnedJFree,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            AblationVariant::Structured => "structured",
            AblationVariant::NoOrientation => "no_orientation",
            AblationVariant::ScrambledTopology => "scrambled_topology",
            AblationVariant::IndefiniteMetric => "indefinite_metric",
            AblationVariant::LearnedJPsd => "learned_J_psd",
            AblationVariant::LearnedJFree => "learned_J_free",
        }
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for AblationVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|v| v.tag() == s).ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

/// Endpoints re-paired uniformly at random; self-loops are rejected by
/// swapping heads with a random other edge.
pub fn scramble_endpoints(ends: &[[usize; 2]], seed: u64) -> Result<Vec<[usize; 2]>> {
    let mut r = rng::stream(seed, 0x5343_5241);
    let mut slots: Vec<usize> = ends.iter().flatten().copied().collect();
    slots.shuffle(&mut r);
    let mut out: Vec<[usize; 2]> = slots.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let m = out.len();
    for e in 0..m {
        let mut tries = 0;
        while out[e][0] == out[e][1] {
            let f = r.gen_range(0..m);
            if f != e && out[f][0] != out[e][1] && out[e][0] != out[f][1] {
                let tmp = out[e][1];
                out[e][1] = out[f][1];
                out[f][1] = tmp;
            }
            tries += 1;
            if tries > 10 * m + 100 {
                return Err(Error::InvalidArgument("cannot re-pair endpoints without self-loops".into()));
            }
        }
    }
    Ok(out)
}

/// Builds the ablated model around `base`'s networks.
pub fn make_ablation(variant: AblationVariant, geom: &MeshGeometry, base: &Model, seed: u64) -> Result<Model> {
    let ends = geom.edge_ends();
    let n = geom.n_nodes();
    let mut m = base.clone();
    m.variant = variant.tag().into();
    match variant {
        AblationVariant::Structured => {}
        AblationVariant::NoOrientation => {
            // Forces are scattered through |D0|, so Σ force no longer vanishes.
            let wiring = SplitWiring { gather: EdgeMap::signed(n, ends.clone()), scatter: EdgeMap::unsigned(n, ends) };
            m.wiring = WiringSpec::Fixed { wiring };
        }
        AblationVariant::ScrambledTopology => {
            let scrambled = scramble_endpoints(&ends, seed)?;
            let map = EdgeMap::signed(n, scrambled);
            m.wiring = WiringSpec::Fixed { wiring: SplitWiring { gather: map.clone(), scatter: map } };
        }
        AblationVariant::IndefiniteMetric => {
            let mut r = rng::stream(seed, 0x494e_4445);
            m.weight_sign = Some((0..geom.n_edges()).map(|_| if r.gen_bool(0.5) { -1.0 } else { 1.0 }).collect());
        }
        AblationVariant::LearnedJPsd | AblationVariant::LearnedJFree => {
            let mut r = rng::stream(seed, 0x4c4a_0000);
            let coef = (0..ends.len()).map(|_| [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]).collect();
            m.wiring = WiringSpec::Learned { ends, coef };
            m.gain = if variant == AblationVariant::LearnedJPsd { GainMode::Softplus } else { GainMode::Free };
        }
    }
    Ok(m)
}

/// Moves a trained model to another mesh. The networks are kept; the
/// variant's mesh-bound structure (scrambled wiring, sign mask) is drawn
/// again for `geom` with `seed`. Learned wirings carry per-edge
/// coefficients and cannot move.
pub fn rebind_model(model: &Model, geom: &MeshGeometry, seed: u64) -> Result<Model> {
    let variant: AblationVariant = model.variant.parse()?;
    if matches!(variant, AblationVariant::LearnedJPsd | AblationVariant::LearnedJFree) {
        return Err(Error::InvalidArgument(format!("{} wiring is tied to the training mesh", variant.tag())));
    }
    let mut base = model.clone();
    base.wiring = WiringSpec::Structured;
    base.weight_sign = None;
    make_ablation(variant, geom, &base, seed)
}

/// Dense mixed-packing interconnection `J = A − Aᵀ`, `A = [[0, G], [0, 0]]`
/// when gather equals scatter; otherwise `[[0, G], [−Sᵀ, 0]]`. Variables
/// are edge strains followed by node momenta.
pub fn mixed_interconnection(wiring: &dyn Wiring) -> Vec<Vec<f64>> {
    let (n, m) = (wiring.n_nodes(), wiring.n_edges());
    let size = m + n;
    let mut g = vec![vec![0.0; n]; m];
    let mut s = vec![vec![0.0; n]; m];
    let mut unit = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        unit[j] = 1.0;
        wiring.gather(&unit, &mut col);
        (0..m).for_each(|e| g[e][j] = col[e]);
        wiring.scatter_adjoint(&unit, &mut col);
        (0..m).for_each(|e| s[e][j] = col[e]);
        unit[j] = 0.0;
    }
    let mut a = vec![vec![0.0; size]; size];
    for e in 0..m {
        for j in 0..n {
            a[e][m + j] = g[e][j];
        }
    }
    let mut jm = vec![vec![0.0; size]; size];
    for r in 0..size {
        for c in 0..size {
            jm[r][c] = a[r][c] - a[c][r];
        }
    }
    if g != s {
        for e in 0..m {
            for j in 0..n {
                jm[m + j][e] = -s[e][j];
            }
        }
    }
    jm
}

/// `max |J + Jᵀ|`.
pub fn skew_defect(j: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..j.len() {
        for c in 0..j.len() {
            worst = worst.max((j[r][c] + j[c][r]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::Features;
    use crate::mesher::periodic_grid;
    use crate::phcore::theory_hodge;

    fn wave(ux: i64, uy: i64) -> WaveSample {
        WaveSample::new(WaveNumber::new(ux, uy, 1.0).unwrap(), 1.0, 1.2, 0.4, 0.3, 0.0)
    }

    #[test]
    fn rebind_moves_mesh_bound_variants() {
        let (g, g2) = (periodic_grid(4, 4, 1.0).unwrap(), periodic_grid(6, 6, 1.0).unwrap());
        let base = Model::structured(4, false, 1);
        for v in [AblationVariant::Structured, AblationVariant::ScrambledTopology, AblationVariant::IndefiniteMetric] {
            let m = make_ablation(v, &g, &base, 2).unwrap();
            assert!(m.materialize(&g2, &Features::new(&g2)).is_err() || v == AblationVariant::Structured);
            let moved = rebind_model(&m, &g2, 2).unwrap();
            assert_eq!(moved.hodge, m.hodge);
            moved.materialize(&g2, &Features::new(&g2)).unwrap();
        }
        let learned = make_ablation(AblationVariant::LearnedJPsd, &g, &base, 2).unwrap();
        assert!(matches!(rebind_model(&learned, &g2, 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fit_recovers_amplitude_and_phase() {
        let g = periodic_grid(16, 16, 1.0).unwrap();
        let k = WaveNumber::new(2, 1, 1.0).unwrap();
        let q: Vec<f64> = k.phases(&g).iter().map(|t| 2.0 * t.sin()).collect();
        let f = amp_phase_fit(&q, &g, &k, 2.0, 0.0).unwrap();
        assert!(f.amp_err_rel < 1e-14 && f.phase_err_deg < 1e-12);
        let q: Vec<f64> = k.phases(&g).iter().map(|t| (t + PI / 4.0).sin()).collect();
        let f = amp_phase_fit(&q, &g, &k, 1.0, PI / 4.0).unwrap();
        assert!((f.phase.to_degrees() - 45.0).abs() < 1e-10);
    }

    #[test]
    fn nyquist_mode_is_singular() {
        let g = periodic_grid(4, 4, 1.0).unwrap();
        let k = WaveNumber::new(2, 0, 1.0).unwrap();
        assert_eq!(fit_sin_cos(&[1.0; 16], &g, &k).unwrap_err(), Error::SingularFit);
    }

    #[test]
    fn frozen_trajectory_has_unit_speed_error() {
        let g = periodic_grid(16, 16, 1.0).unwrap();
        let s = wave(1, 0);
        let mut traj = exact_trajectory(&g, &s, 0.01, 4).unwrap();
        let first = traj.states[0].clone();
        traj.states.iter_mut().for_each(|x| *x = first.clone());
        assert_eq!(wave_speed_error(&traj, &g, &s.k, 1.0).unwrap(), 1.0);
        let exact = exact_trajectory(&g, &s, 0.01, 4).unwrap();
        assert!(wave_speed_error(&exact, &g, &s.k, 1.0).unwrap() < 1e-12);
    }

    #[test]
    fn zero_trajectory_guards() {
        let g = periodic_grid(4, 4, 1.0).unwrap();
        let traj = Trajectory { dt: 0.1, states: vec![CanonicalState::zeros(16); 4], meta: Default::default() };
        let k = WaveNumber::new(1, 0, 1.0).unwrap();
        assert_eq!(wave_speed_error(&traj, &g, &k, 1.0).unwrap_err(), Error::ZeroModeAmplitude);
        assert_eq!(pde_residual(&traj, &g.v0, &|_, o: &mut [f64]| o.fill(0.0)).unwrap(), 0.0);
        assert_eq!(momentum_variation(&traj), 0.0);
        assert_eq!(equipartition(&traj, &g, &theory_hodge(&g, 1.0)).unwrap_err(), Error::ZeroEnergy);
        let short = Trajectory { dt: 0.1, states: vec![CanonicalState::zeros(16); 2], meta: Default::default() };
        assert!(matches!(canonical_consistency(&short, &g.v0), Err(Error::TooShort { .. })));
    }

    #[test]
    fn p_zero_with_moving_q_is_fully_inconsistent() {
        let g = periodic_grid(8, 8, 1.0).unwrap();
        let mut traj = exact_trajectory(&g, &wave(1, 1), 0.01, 6).unwrap();
        traj.states.iter_mut().for_each(|s| s.p.fill(0.0));
        assert!((canonical_consistency(&traj, &g.v0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kinetic_only_sequence_has_unit_equipartition() {
        let g = periodic_grid(4, 4, 1.0).unwrap();
        let h = HodgeStar::unchecked(g.v0.clone(), vec![0.0; 32]);
        let mut s = CanonicalState::zeros(16);
        s.p[0] = 1.0;
        s.q[3] = 1.0;
        let traj = Trajectory { dt: 0.1, states: vec![s; 3], meta: Default::default() };
        assert_eq!(equipartition(&traj, &g, &h).unwrap(), 1.0);
    }

    #[test]
    fn alignment_extremes() {
        let v = vec![vec![1.0, -2.0, 0.5]];
        let neg = vec![vec![-1.0, 2.0, -0.5]];
        let (c, r) = vf_alignment(&v, &v).unwrap();
        assert!((c - 1.0).abs() < 1e-15 && r == 0.0);
        let (c, r) = vf_alignment(&neg, &v).unwrap();
        assert!((c + 1.0).abs() < 1e-15 && (r - 2.0).abs() < 1e-15);
        assert_eq!(vf_alignment(&[vec![0.0; 3]], &v).unwrap_err(), Error::ZeroField);
    }

    #[test]
    fn monotone_decay_has_no_injection() {
        let (d, i) = drift_and_injection(&[1.0, 0.9, 0.5, 0.1]);
        assert_eq!(i, 0.0);
        assert!((d - 0.9).abs() < 1e-11);
        let (_, i) = drift_and_injection(&[1.0, 1.1, 1.0]);
        assert!((i - 0.1).abs() < 1e-11);
    }

    #[test]
    fn wrap_degrees_range() {
        assert_eq!(wrap_degrees(190.0), -170.0);
        assert_eq!(wrap_degrees(-180.0), 180.0);
        assert_eq!(wrap_degrees(45.0), 45.0);
    }

    #[test]
    fn variants_parse_and_reject_unknown() {
        for v in AblationVariant::ALL {
            assert_eq!(v.tag().parse::<AblationVariant>().unwrap(), v);
        }
        assert_eq!("nope".parse::<AblationVariant>().unwrap_err(), Error::UnknownVariant("nope".into()));
    }

    #[test]
    fn scrambling_keeps_degrees_and_avoids_loops() {
        let g = periodic_grid(6, 6, 1.0).unwrap();
        let ends = g.edge_ends();
        let s = scramble_endpoints(&ends, 3).unwrap();
        assert_ne!(s, ends);
        let mut deg_a = vec![0; 36];
        let mut deg_b = vec![0; 36];
        for ([a, b], [c, d]) in ends.iter().zip(&s) {
            deg_a[*a] += 1;
            deg_a[*b] += 1;
            deg_b[*c] += 1;
            deg_b[*d] += 1;
            assert_ne!(c, d);
        }
        assert_eq!(deg_a, deg_b);
    }

    #[test]
    fn force_sums_by_variant() {
        let g = crate::mesher::periodic_delaunay(36, 1.0, 4).unwrap();
        let base = Model::structured(8, false, 2);
        let q: Vec<f64> = (0..36).map(|i| ((i * i) as f64 * 0.37).sin()).collect();
        let feats = Features::new(&g);
        let force_sum = |v: AblationVariant| {
            let m = make_ablation(v, &g, &base, 5).unwrap();
            let mat = m.materialize(&g, &feats).unwrap();
            let sys = mat.system(&g);
            let mut e = vec![0.0; g.n_edges()];
            let mut f = vec![0.0; 36];
            stiffness_apply_into(sys.wiring, &sys.hodge.weight, &q, &mut e, &mut f);
            let scale: f64 = f.iter().map(|x| x.abs()).sum();
            f.iter().sum::<f64>().abs() / scale
        };
        assert!(force_sum(AblationVariant::Structured) < 1e-14);
        assert!(force_sum(AblationVariant::ScrambledTopology) < 1e-14);
        assert!(force_sum(AblationVariant::NoOrientation) > 1e-3);
        assert_eq!(make_ablation(AblationVariant::Structured, &g, &base, 5).unwrap(), base);
    }

    #[test]
    fn interconnection_skewness_by_variant() {
        let g = periodic_grid(3, 3, 1.0).unwrap();
        let base = Model::structured(4, false, 1);
        let feats = Features::new(&g);
        for v in AblationVariant::ALL {
            let m = make_ablation(v, &g, &base, 9).unwrap();
            let mat = m.materialize(&g, &feats).unwrap();
            let j = mixed_interconnection(mat.system(&g).wiring);
            let defect = skew_defect(&j);
            if v == AblationVariant::NoOrientation {
                assert!(defect > 0.5);
            } else {
                assert_eq!(defect, 0.0, "{v}");
            }
        }
    }
}
