//! Strang-split time stepping: exact half-damp, kick–drift–kick under the
//! conservative wiring, exact half-damp, repeated over CFL-guarded substeps.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::mesher::MeshGeometry;
use crate::phcore::{
    stiffness_apply_into, CanonicalState, DampingField, HodgeStar, Trajectory, TrajectoryMeta, Wiring,
};
use crate::rng;

/// Default target Courant number.
pub const DEFAULT_CFL: f64 = 0.5;
const POWER_MAX_ITERS: usize = 200;
const POWER_RTOL: f64 = 1e-6;

/// Everything the integrator needs: force wiring, stars and optional damping.
#[derive(Clone, Copy)]
pub struct System<'a> {
    pub wiring: &'a dyn Wiring,
    pub hodge: &'a HodgeStar,
    pub damping: Option<&'a [f64]>,
}

impl<'a> System<'a> {
    /// The structured system: `K = D0ᵀ W D0`.
    pub fn structured(geom: &'a MeshGeometry, hodge: &'a HodgeStar, damping: Option<&'a DampingField>) -> Self {
        System { wiring: geom.d0(), hodge, damping: damping.map(|d| d.rates.as_slice()) }
    }

    fn check(&self, state: &CanonicalState) -> Result<()> {
        let n = self.wiring.n_nodes();
        check_len(n, self.hodge.mass.len())?;
        check_len(self.wiring.n_edges(), self.hodge.weight.len())?;
        check_len(n, state.q.len())?;
        check_len(n, state.p.len())?;
        if let Some(r) = self.damping {
            check_len(n, r.len())?;
        }
        Ok(())
    }
}

/// Power-iteration estimate of the largest angular frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaEstimate {
    pub omega_max: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; the estimate is still returned.
    pub converged: bool,
}

/// Substep schedule for one data step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub dt_data: f64,
    pub n_sub: usize,
    pub dt_sub: f64,
    pub cfl_target: f64,
    pub omega_max: f64,
}

impl StepPlan {
    /// A plan with a fixed substep count, bypassing the guard.
    pub fn fixed(dt_data: f64, n_sub: usize) -> Self {
        let n_sub = n_sub.max(1);
        StepPlan { dt_data, n_sub, dt_sub: dt_data / n_sub as f64, cfl_target: DEFAULT_CFL, omega_max: f64::NAN }
    }

    /// Guarded plan for a known `ω_max`: `n_sub = max(1, ⌈dt·ω/(2·cfl)⌉)`.
    pub fn for_omega(dt_data: f64, omega_max: f64, cfl_target: f64) -> Result<Self> {
        if !(dt_data > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt_data}")));
        }
        if !(cfl_target > 0.0 && cfl_target <= 1.0) {
            return Err(Error::InvalidArgument(format!("cfl target {cfl_target} outside (0, 1]")));
        }
        let n_sub = ((dt_data * omega_max / (2.0 * cfl_target)).ceil() as usize).max(1);
        Ok(StepPlan { dt_data, n_sub, dt_sub: dt_data / n_sub as f64, cfl_target, omega_max })
    }
}

/// High-frequency starting vector: a greedy two-colouring of the node graph
/// plus a small seeded perturbation.
fn start_vector(wiring: &dyn Wiring) -> Vec<f64> {
    use rand::Rng;
    let n = wiring.n_nodes();
    let m = wiring.n_edges();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in 0..m {
        let [a, b] = wiring.endpoints(e);
        if a != b {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut sign = vec![0.0f64; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        if sign[s] != 0.0 {
            continue;
        }
        sign[s] = 1.0;
        queue.push_back(s);
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if sign[b] == 0.0 {
                    sign[b] = -sign[a];
                    queue.push_back(b);
                }
            }
        }
    }
    let mut rng = rng::stream(0x0e6a_ba5e, 0);
    sign.iter().map(|s| s * (1.0 + 0.1 * rng.gen_range(-1.0..1.0))).collect()
}

/// Power iteration on `M^{-1/2} K M^{-1/2}`; returns `ω_max = √λ_max`.
pub fn estimate_omega_max_with(wiring: &dyn Wiring, hodge: &HodgeStar) -> Result<OmegaEstimate> {
    let n = wiring.n_nodes();
    check_len(n, hodge.mass.len())?;
    check_len(wiring.n_edges(), hodge.weight.len())?;
    if let Some(i) = hodge.mass.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::NonPositiveMass(i));
    }
    let inv_sqrt: Vec<f64> = hodge.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut x = start_vector(wiring);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);

    let mut edge = vec![0.0; wiring.n_edges()];
    let mut y = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut lambda = 0.0;
    for it in 1..=POWER_MAX_ITERS {
        for i in 0..n {
            tmp[i] = x[i] * inv_sqrt[i];
        }
        stiffness_apply_into(wiring, &hodge.weight, &tmp, &mut edge, &mut y);
        for i in 0..n {
            y[i] *= inv_sqrt[i];
        }
        let ny = norm(&y);
        if ny == 0.0 {
            return Ok(OmegaEstimate { omega_max: 0.0, iterations: it, converged: true });
        }
        let prev = lambda;
        lambda = ny;
        for i in 0..n {
            x[i] = y[i] / ny;
        }
        if it > 1 && (lambda - prev).abs() <= POWER_RTOL * lambda {
            return Ok(OmegaEstimate { omega_max: lambda.sqrt(), iterations: it, converged: true });
        }
    }
    Ok(OmegaEstimate { omega_max: lambda.sqrt(), iterations: POWER_MAX_ITERS, converged: false })
}

/// `ω_max` of the structured system on `geom`.
pub fn estimate_omega_max(geom: &MeshGeometry, hodge: &HodgeStar) -> Result<OmegaEstimate> {
    estimate_omega_max_with(geom.d0(), hodge)
}

/// CFL-guarded substep plan for the structured system.
pub fn plan_steps(geom: &MeshGeometry, hodge: &HodgeStar, dt_data: f64, cfl_target: f64) -> Result<StepPlan> {
    let est = estimate_omega_max(geom, hodge)?;
    StepPlan::for_omega(dt_data, est.omega_max, cfl_target)
}

/// Reusable buffers for stepping one system.
pub struct Integrator<'a> {
    system: System<'a>,
    edge: Vec<f64>,
    force: Vec<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(system: System<'a>) -> Self {
        let n = system.wiring.n_nodes();
        Integrator { system, edge: vec![0.0; system.wiring.n_edges()], force: vec![0.0; n] }
    }

    fn half_damp(&self, p: &mut [f64], dt: f64) {
        if let Some(r) = self.system.damping {
            for (p, r) in p.iter_mut().zip(r) {
                *p *= (-0.5 * dt * r).exp();
            }
        }
    }

    fn kick(&mut self, q: &[f64], p: &mut [f64], dt: f64) {
        stiffness_apply_into(self.system.wiring, &self.system.hodge.weight, q, &mut self.edge, &mut self.force);
        for (p, f) in p.iter_mut().zip(&self.force) {
            *p -= 0.5 * dt * f;
        }
    }

    /// One Strang step in place.
    pub fn step_in_place(&mut self, state: &mut CanonicalState, dt: f64) {
        let CanonicalState { q, p } = state;
        self.half_damp(p, dt);
        self.kick(q, p, dt);
        for ((q, p), m) in q.iter_mut().zip(p.iter()).zip(&self.system.hodge.mass) {
            *q += dt * p / m;
        }
        self.kick(q, p, dt);
        self.half_damp(p, dt);
    }

    /// One data step: `plan.n_sub` substeps of `plan.dt_sub`.
    pub fn advance(&mut self, state: &mut CanonicalState, plan: &StepPlan) {
        for _ in 0..plan.n_sub {
            self.step_in_place(state, plan.dt_sub);
        }
    }
}

/// One Strang step of the given system.
pub fn kdk_step_with(system: System<'_>, state: &CanonicalState, dt: f64) -> Result<CanonicalState> {
    system.check(state)?;
    let mut out = state.clone();
    Integrator::new(system).step_in_place(&mut out, dt);
    if !out.is_finite() {
        return Err(Error::NonFiniteState { frame: 1 });
    }
    Ok(out)
}

/// Half-damp, kick–drift–kick, half-damp on the structured system.
pub fn kdk_step(
    geom: &MeshGeometry,
    hodge: &HodgeStar,
    damping: Option<&DampingField>,
    state: &CanonicalState,
    dt: f64,
) -> Result<CanonicalState> {
    kdk_step_with(System::structured(geom, hodge, damping), state, dt)
}

/// Open-loop rollout of `frames` data steps, always feeding back the prediction.
pub fn rollout_with(system: System<'_>, state0: &CanonicalState, plan: &StepPlan, frames: usize) -> Result<Trajectory> {
    if frames < 1 {
        return Err(Error::InvalidArgument("rollout needs T >= 1".into()));
    }
    system.check(state0)?;
    let mut integ = Integrator::new(system);
    let mut states = Vec::with_capacity(frames + 1);
    let mut s = state0.clone();
    states.push(s.clone());
    for t in 1..=frames {
        integ.advance(&mut s, plan);
        if !s.is_finite() {
            return Err(Error::NonFiniteState { frame: t });
        }
        states.push(s.clone());
    }
    Ok(Trajectory { dt: plan.dt_data, states, meta: TrajectoryMeta::default() })
}

/// Modified energy `½pᵀM⁻¹p + ½qᵀ(K − (h²/4) K M⁻¹ K) q` that the undamped
/// KDK map with step `h` conserves exactly for linear forces. The half-damps
/// only shrink `p`, so it never increases across a damped step either.
pub fn shadow_energy(system: System<'_>, state: &CanonicalState, h: f64) -> Result<f64> {
    system.check(state)?;
    let w = system.wiring;
    let m = &system.hodge.mass;
    let mut edge = vec![0.0; w.n_edges()];
    let mut kq = vec![0.0; w.n_nodes()];
    stiffness_apply_into(w, &system.hodge.weight, &state.q, &mut edge, &mut kq);
    let mut out = 0.0;
    for i in 0..m.len() {
        out += 0.5 * state.p[i] * state.p[i] / m[i] + 0.5 * state.q[i] * kq[i] - 0.125 * h * h * kq[i] * kq[i] / m[i];
    }
    Ok(out)
}

/// Rollout of the structured system.
pub fn rollout(
    geom: &MeshGeometry,
    hodge: &HodgeStar,
    damping: Option<&DampingField>,
    state0: &CanonicalState,
    plan: &StepPlan,
    frames: usize,
) -> Result<Trajectory> {
    let mut traj = rollout_with(System::structured(geom, hodge, damping), state0, plan, frames)?;
    traj.meta.mesh = geom.meta.spec.clone();
    traj.meta.model = "structured".into();
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesher::periodic_grid;
    use crate::phcore::{energy, theory_hodge};

    #[test]
    fn zero_weight_means_zero_frequency() {
        let g = periodic_grid(4, 4, 1.0).unwrap();
        let h = HodgeStar::unchecked(g.v0.clone(), vec![0.0; g.n_edges()]);
        assert_eq!(estimate_omega_max(&g, &h).unwrap().omega_max, 0.0);
        let plan = StepPlan::for_omega(0.01, 0.0, 0.5).unwrap();
        assert_eq!(plan.n_sub, 1);
    }

    #[test]
    fn plan_arithmetic() {
        assert_eq!(StepPlan::for_omega(0.002, 100.0, 0.5).unwrap().n_sub, 1);
        assert_eq!(StepPlan::for_omega(0.1, 100.0, 0.5).unwrap().n_sub, 10);
        assert!(StepPlan::for_omega(0.0, 1.0, 0.5).is_err());
        assert!(StepPlan::for_omega(0.1, 1.0, 1.5).is_err());
    }

    #[test]
    fn free_drift_without_stiffness() {
        let g = periodic_grid(3, 3, 1.0).unwrap();
        let h = HodgeStar::unchecked(vec![2.0; 9], vec![0.0; g.n_edges()]);
        let s = CanonicalState { q: vec![1.0; 9], p: (0..9).map(|i| i as f64).collect() };
        let out = kdk_step(&g, &h, None, &s, 0.1).unwrap();
        for i in 0..9 {
            assert_eq!(out.p[i], s.p[i]);
            assert!((out.q[i] - (1.0 + 0.1 * i as f64 / 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_is_reported() {
        let g = periodic_grid(3, 3, 1.0).unwrap();
        let h = theory_hodge(&g, 1.0);
        let mut s = CanonicalState::zeros(9);
        s.q[0] = f64::NAN;
        assert_eq!(kdk_step(&g, &h, None, &s, 0.01).unwrap_err(), Error::NonFiniteState { frame: 1 });
    }

    #[test]
    fn rollout_frame_count_and_single_step() {
        let g = periodic_grid(4, 4, 1.0).unwrap();
        let h = theory_hodge(&g, 1.0);
        let mut s = CanonicalState::zeros(16);
        s.q[3] = 1.0;
        let plan = StepPlan::fixed(0.01, 3);
        let traj = rollout(&g, &h, None, &s, &plan, 1).unwrap();
        assert_eq!(traj.states.len(), 2);
        let mut manual = s.clone();
        for _ in 0..3 {
            manual = kdk_step(&g, &h, None, &manual, plan.dt_sub).unwrap();
        }
        assert_eq!(traj.states[1], manual);
        assert!(rollout(&g, &h, None, &s, &plan, 0).is_err());
    }

    #[test]
    fn unstable_step_diverges_to_error() {
        let g = periodic_grid(8, 8, 1.0).unwrap();
        let h = theory_hodge(&g, 1.0);
        let mut s = CanonicalState::zeros(64);
        for (i, q) in s.q.iter_mut().enumerate() {
            *q = if (i % 8 + i / 8) % 2 == 0 { 1.0 } else { -1.0 };
        }
        // Far beyond the stability bound: the checkerboard mode explodes.
        let err = rollout(&g, &h, None, &s, &StepPlan::fixed(1.0, 1), 2000).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }));
        let e0 = energy(&g, &h, &s).unwrap();
        assert!(e0 > 0.0);
    }
}
