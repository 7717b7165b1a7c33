//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations: a plane-wave simulation whose force wiring can be swapped
//! for a structural ablation, a Maxwell run reporting the charge invariant with
//! signed and unsigned coupling, and a mesh viewer.

use meshft::maxwell2d::{self, Coupling, MaxwellGrid, MaxwellStars};
use meshft::mesher::{periodic_grid, MeshGeometry, MeshSpec};
use meshft::phcore::{self, theory_hodge, total_momentum, CanonicalState, EdgeMap, HodgeStar, SplitWiring, Wiring};
use meshft::physlab::{scramble_endpoints, AblationVariant};
use meshft::rng;
use meshft::stepper::{plan_steps, Integrator, StepPlan, System};
use meshft::wavegen::{plane_wave_state, WaveNumber, WaveSample};
use rand::Rng;
use wasm_bindgen::prelude::*;

/// Variants whose structure needs no training.
pub const SIM_VARIANTS: [AblationVariant; 4] = [
    AblationVariant::Structured,
    AblationVariant::NoOrientation,
    AblationVariant::ScrambledTopology,
    AblationVariant::IndefiniteMetric,
];

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Plane wave on a periodic mesh under the theory stars.
#[wasm_bindgen]
pub struct WaveSim {
    geom: MeshGeometry,
    hodge: HodgeStar,
    wiring: Option<SplitWiring>,
    state: CanonicalState,
    plan: StepPlan,
    frame: usize,
    e0: f64,
    p0: f64,
}

impl WaveSim {
    pub fn build(mesh: &str, variant: &str, kx: i64, ky: i64, seed: u64) -> Result<Self, String> {
        let variant: AblationVariant = variant.parse().map_err(err)?;
        if !SIM_VARIANTS.contains(&variant) {
            return Err(format!("{} needs a trained model", variant.tag()));
        }
        let geom = mesh.parse::<MeshSpec>().map_err(err)?.build(1.0).map_err(err)?;
        let mut hodge = theory_hodge(&geom, 1.0);
        // The step is planned on the structured system so every variant runs
        // with the same dt.
        let plan = plan_steps(&geom, &hodge, 2e-3, 0.5).map_err(err)?;
        let ends = geom.edge_ends();
        let nn = geom.n_nodes();
        let wiring = match variant {
            AblationVariant::NoOrientation => {
                Some(SplitWiring { gather: EdgeMap::signed(nn, ends.clone()), scatter: EdgeMap::unsigned(nn, ends) })
            }
            AblationVariant::ScrambledTopology => {
                let map = EdgeMap::signed(nn, scramble_endpoints(&ends, seed).map_err(err)?);
                Some(SplitWiring { gather: map.clone(), scatter: map })
            }
            _ => None,
        };
        if variant == AblationVariant::IndefiniteMetric {
            let mut r = rng::stream(seed, 0x494e_4445);
            let weight = hodge.weight.iter().map(|w| if r.gen_bool(0.5) { -w } else { *w }).collect();
            hodge = HodgeStar::unchecked(hodge.mass, weight);
        }
        let k = WaveNumber::new(kx, ky, 1.0).map_err(err)?;
        let sample = WaveSample::new(k, 1.0, 1.0, 0.0, 0.0, 0.0);
        let state = plane_wave_state(&geom, &sample, 0.0).map_err(err)?;
        let p0 = total_momentum(&state);
        let mut sim = WaveSim { geom, hodge, wiring, state, plan, frame: 0, e0: 0.0, p0 };
        sim.e0 = sim.energy();
        Ok(sim)
    }

    fn system(&self) -> System<'_> {
        let wiring: &dyn Wiring = match &self.wiring {
            Some(w) => w,
            None => self.geom.d0(),
        };
        System { wiring, hodge: &self.hodge, damping: None }
    }
}

#[wasm_bindgen]
impl WaveSim {
    #[wasm_bindgen(constructor)]
    pub fn new(mesh: &str, variant: &str, kx: i32, ky: i32, seed: u32) -> Result<WaveSim, JsError> {
        Self::build(mesh, variant, kx.into(), ky.into(), seed.into()).map_err(|e| JsError::new(&e))
    }

    /// Advances by `frames` data steps; returns false once the state is no
    /// longer finite.
    pub fn advance(&mut self, frames: usize) -> bool {
        let plan = self.plan;
        let mut state = std::mem::replace(&mut self.state, CanonicalState::zeros(0));
        let mut done = 0;
        let mut integ = Integrator::new(self.system());
        while done < frames && state.is_finite() {
            integ.advance(&mut state, &plan);
            done += 1;
        }
        self.frame += done;
        self.state = state;
        self.state.is_finite()
    }

    pub fn time(&self) -> f64 {
        self.frame as f64 * self.plan.dt_data
    }

    /// `½pᵀM⁻¹p + ½(Gq)ᵀW(Gq)` of the running system.
    pub fn energy(&self) -> f64 {
        let w = self.system().wiring;
        let mut e = vec![0.0; w.n_edges()];
        w.gather(&self.state.q, &mut e);
        let kin: f64 = self.state.p.iter().zip(&self.hodge.mass).map(|(p, m)| p * p / m).sum();
        let pot: f64 = e.iter().zip(&self.hodge.weight).map(|(e, w)| w * e * e).sum();
        0.5 * (kin + pot)
    }

    /// `|E(t) − E(0)| / E(0)`.
    pub fn energy_drift(&self) -> f64 {
        (self.energy() - self.e0).abs() / self.e0
    }

    /// `|Σp(t) − Σp(0)|`.
    pub fn momentum_change(&self) -> f64 {
        (total_momentum(&self.state) - self.p0).abs()
    }

    /// Displacement per node.
    pub fn field(&self) -> Vec<f64> {
        self.state.q.clone()
    }

    /// `x, y` per node.
    pub fn positions(&self) -> Vec<f64> {
        self.geom.positions.iter().flatten().copied().collect()
    }

    pub fn omega_max(&self) -> f64 {
        self.plan.omega_max
    }
}

/// Traces of one TE Maxwell run with randomized stars.
#[wasm_bindgen]
pub struct MaxwellRun {
    energy: Vec<f64>,
    signed: Vec<f64>,
    unsigned: Vec<f64>,
    dt: f64,
}

impl MaxwellRun {
    pub fn build(n: usize, steps: usize, spread: f64, seed: u64) -> Result<Self, String> {
        let geom = periodic_grid(n, n, 1.0).map_err(err)?;
        let grid = MaxwellGrid::new(&geom).map_err(err)?;
        let stars = MaxwellStars::randomized(&geom, seed, spread).map_err(err)?;
        let dt = grid.cfl_dt(&stars, 0.5).map_err(err)?;
        let s0 = maxwell2d::te_mode(&geom, &grid, [1, 0], 1.0, 0.2).map_err(err)?;
        let d0 = geom.d0();
        let trace = |coupling| -> Result<(Vec<f64>, Vec<f64>), String> {
            let traj = grid.rollout(&stars, &s0, dt, steps, coupling).map_err(err)?;
            let mut charge = Vec::with_capacity(traj.len());
            for s in &traj {
                charge.push(maxwell2d::charge_invariant(&[s0.clone(), s.clone()], d0).map_err(err)?);
            }
            Ok((traj.iter().map(|s| maxwell2d::energy(&stars, s)).collect(), charge))
        };
        let (energy, signed) = trace(Coupling::Signed)?;
        let (_, unsigned) = trace(Coupling::Unsigned)?;
        Ok(Self { energy, signed, unsigned, dt })
    }
}

#[wasm_bindgen]
impl MaxwellRun {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, steps: usize, spread: f64, seed: u32) -> Result<MaxwellRun, JsError> {
        Self::build(n, steps, spread, seed.into()).map_err(|e| JsError::new(&e))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Energy relative to the initial energy, per step.
    pub fn energy(&self) -> Vec<f64> {
        self.energy.iter().map(|e| e / self.energy[0]).collect()
    }

    /// `‖D0ᵀD_t − D0ᵀD_0‖∞` per step with signed coupling.
    pub fn signed_charge(&self) -> Vec<f64> {
        self.signed.clone()
    }

    /// Same with the orientation-blind coupling.
    pub fn unsigned_charge(&self) -> Vec<f64> {
        self.unsigned.clone()
    }
}

/// Edges of a mesh as minimum-image segments.
#[wasm_bindgen]
pub struct MeshView {
    segments: Vec<f64>,
    counts: [usize; 3],
    weights: Vec<f64>,
}

impl MeshView {
    pub fn build(spec: &str) -> Result<Self, String> {
        let spec: MeshSpec = spec.parse().map_err(err)?;
        let geom = spec.build(1.0).map_err(err)?;
        let mut segments = Vec::with_capacity(4 * geom.n_edges());
        for ([a, _], [dx, dy]) in geom.edge_ends().iter().zip(&geom.edge_vectors) {
            let [x, y] = geom.positions[*a];
            segments.extend([x, y, x + dx, y + dy]);
        }
        let weights = phcore::theory_hodge(&geom, 1.0).weight;
        Ok(Self { segments, counts: [geom.n_nodes(), geom.n_edges(), geom.n_faces()], weights })
    }
}

#[wasm_bindgen]
impl MeshView {
    #[wasm_bindgen(constructor)]
    pub fn new(spec: &str) -> Result<MeshView, JsError> {
        Self::build(spec).map_err(|e| JsError::new(&e))
    }

    /// `x0, y0, x1, y1` per edge.
    pub fn segments(&self) -> Vec<f64> {
        self.segments.clone()
    }

    /// Theory edge weights `c²·V1⁻¹`, one per edge.
    pub fn weights(&self) -> Vec<f64> {
        self.weights.clone()
    }

    pub fn n_nodes(&self) -> usize {
        self.counts[0]
    }

    pub fn n_edges(&self) -> usize {
        self.counts[1]
    }

    pub fn n_faces(&self) -> usize {
        self.counts[2]
    }
}
