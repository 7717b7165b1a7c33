//! Source-free 2D TE Maxwell on the edge–face part of a closed complex.
//!
//! `B` lives on faces, `D` on edges, `H = ⋆μ⁻¹ B`, `E = ⋆ε⁻¹ D`, and
//! `Ḃ = −D1 E`, `Ḋ = D1ᵀ H`. Gauss's law `D0ᵀ D = const` follows from
//! `D1 D0 = 0` for any stars.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::complex::SignedIncidence;
use crate::error::{check_len, Error, Result};
use crate::mesher::MeshGeometry;
use crate::phcore::{EdgeMap, HodgeStar, SplitWiring};
use crate::rng;
use crate::stepper::{estimate_omega_max_with, OmegaEstimate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxwellState {
    pub b: Vec<f64>,
    pub dflux: Vec<f64>,
}

impl MaxwellState {
    pub fn zeros(n_faces: usize, n_edges: usize) -> Self {
        Self { b: vec![0.0; n_faces], dflux: vec![0.0; n_edges] }
    }

    pub fn is_finite(&self) -> bool {
        self.b.iter().chain(&self.dflux).all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxwellStars {
    pub star_mu_inv: Vec<f64>,
    pub star_eps_inv: Vec<f64>,
}

impl MaxwellStars {
    pub fn new(star_mu_inv: Vec<f64>, star_eps_inv: Vec<f64>) -> Result<Self> {
        for (name, v) in [("star_mu_inv", &star_mu_inv), ("star_eps_inv", &star_eps_inv)] {
            if let Some(x) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} entry {x} is not positive")));
            }
        }
        Ok(Self { star_mu_inv, star_eps_inv })
    }

    /// Diagonal stars of a uniform medium: `1/(μ·area)` per face and
    /// `(ℓ/ℓ*)/ε` per edge.
    pub fn geometric(geom: &MeshGeometry, eps: f64, mu: f64) -> Result<Self> {
        let faces = face_areas(geom)?;
        Self::new(faces.iter().map(|a| 1.0 / (mu * a)).collect(), geom.v1inv.iter().map(|w| 1.0 / (eps * w)).collect())
    }

    /// Geometric stars scaled by seeded factors drawn from `[1/s, s]`.
    pub fn randomized(geom: &MeshGeometry, seed: u64, spread: f64) -> Result<Self> {
        if !(spread >= 1.0) {
            return Err(Error::InvalidArgument(format!("spread must be ≥ 1, got {spread}")));
        }
        let mut r = rng::stream(seed, 0x4d41_5857);
        let base = Self::geometric(geom, 1.0, 1.0)?;
        let mut draw = |v: f64| v * spread.powf(r.gen_range(-1.0..=1.0));
        let mu: Vec<f64> = base.star_mu_inv.iter().map(|&v| draw(v)).collect();
        let eps: Vec<f64> = base.star_eps_inv.iter().map(|&v| draw(v)).collect();
        Self::new(mu, eps)
    }
}

/// Face areas from the grid cell sizes or the triangle list.
pub fn face_areas(geom: &MeshGeometry) -> Result<Vec<f64>> {
    let nf = geom.n_faces();
    if nf == 0 {
        return Err(Error::ShapeMismatch("mesh has no faces".into()));
    }
    if geom.triangles.len() == nf {
        return Ok(geom.triangles.iter().map(|t| t.area()).collect());
    }
    Ok(vec![geom.total_area() / nf as f64; nf])
}

/// How the Ampère kick scatters `H` back to edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    Signed,
    /// `|D1|ᵀ`: a deliberately broken update that violates Gauss's law.
    Unsigned,
}

/// The edge–face operators of a 2D closed complex.
#[derive(Clone, Debug)]
pub struct MaxwellGrid {
    d1: SignedIncidence,
    face_wiring: SplitWiring,
    abs_d1: EdgeMap,
}

impl MaxwellGrid {
    /// Requires every edge to bound exactly two faces with opposite signs.
    pub fn new(geom: &MeshGeometry) -> Result<Self> {
        if geom.complex.dim() < 2 {
            return Err(Error::ShapeMismatch("complex has no faces".into()));
        }
        let d1 = geom.complex.incidence(1).clone();
        let mut ends = Vec::with_capacity(d1.cols());
        for e in 0..d1.cols() {
            let col: Vec<(usize, i8)> = d1.col(e).collect();
            match col.as_slice() {
                [(a, sa), (b, sb)] if sa + sb == 0 => ends.push(if *sa < 0 { [*a, *b] } else { [*b, *a] }),
                _ => {
                    return Err(Error::ShapeMismatch(format!("edge {e} does not bound two oppositely oriented faces")))
                }
            }
        }
        let nf = d1.rows();
        let map = EdgeMap::signed(nf, ends.clone());
        Ok(Self {
            d1,
            face_wiring: SplitWiring { gather: map.clone(), scatter: map },
            abs_d1: EdgeMap::unsigned(nf, ends),
        })
    }

    pub fn n_faces(&self) -> usize {
        self.d1.rows()
    }

    pub fn n_edges(&self) -> usize {
        self.d1.cols()
    }

    /// `D1ᵀ` seen as a signed face-to-edge wiring.
    pub fn face_wiring(&self) -> &SplitWiring {
        &self.face_wiring
    }

    /// The scalar-wave Hodge pair `(M, W) = (1/⋆μ⁻¹, ⋆ε⁻¹)` on faces.
    pub fn face_hodge(&self, stars: &MaxwellStars) -> HodgeStar {
        HodgeStar::unchecked(stars.star_mu_inv.iter().map(|v| 1.0 / v).collect(), stars.star_eps_inv.clone())
    }

    pub fn omega_max(&self, stars: &MaxwellStars) -> Result<OmegaEstimate> {
        self.check(stars)?;
        estimate_omega_max_with(&self.face_wiring, &self.face_hodge(stars))
    }

    /// Largest stable-with-margin step `2·cfl/ω_max`.
    pub fn cfl_dt(&self, stars: &MaxwellStars, cfl: f64) -> Result<f64> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidArgument(format!("cfl must lie in (0, 1], got {cfl}")));
        }
        Ok(2.0 * cfl / self.omega_max(stars)?.omega_max)
    }

    fn check(&self, stars: &MaxwellStars) -> Result<()> {
        check_len(self.n_faces(), stars.star_mu_inv.len())?;
        check_len(self.n_edges(), stars.star_eps_inv.len())
    }

    fn check_state(&self, stars: &MaxwellStars, s: &MaxwellState) -> Result<()> {
        self.check(stars)?;
        check_len(self.n_faces(), s.b.len())?;
        check_len(self.n_edges(), s.dflux.len())
    }

    fn ampere_kick(&self, stars: &MaxwellStars, s: &mut MaxwellState, h: f64, coupling: Coupling, buf: &mut [f64]) {
        let hfield: Vec<f64> = s.b.iter().zip(&stars.star_mu_inv).map(|(b, m)| b * m).collect();
        match coupling {
            Coupling::Signed => self.d1.apply_transpose_into(&hfield, buf),
            Coupling::Unsigned => self.abs_d1.apply_into(&hfield, buf),
        }
        s.dflux.iter_mut().zip(buf.iter()).for_each(|(d, c)| *d += h * c);
    }

    /// One leapfrog step: half Ampère kick, full Faraday update, half kick.
    pub fn step(
        &self,
        stars: &MaxwellStars,
        state: &MaxwellState,
        dt: f64,
        coupling: Coupling,
    ) -> Result<MaxwellState> {
        self.check_state(stars, state)?;
        let mut s = state.clone();
        let mut buf = vec![0.0; self.n_edges()];
        self.ampere_kick(stars, &mut s, 0.5 * dt, coupling, &mut buf);
        let efield: Vec<f64> = s.dflux.iter().zip(&stars.star_eps_inv).map(|(d, k)| d * k).collect();
        let mut curl = vec![0.0; self.n_faces()];
        self.d1.apply_into(&efield, &mut curl);
        s.b.iter_mut().zip(&curl).for_each(|(b, c)| *b -= dt * c);
        self.ampere_kick(stars, &mut s, 0.5 * dt, coupling, &mut buf);
        Ok(s)
    }

    /// `steps + 1` frames starting from `state0`.
    pub fn rollout(
        &self,
        stars: &MaxwellStars,
        state0: &MaxwellState,
        dt: f64,
        steps: usize,
        coupling: Coupling,
    ) -> Result<Vec<MaxwellState>> {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(state0.clone());
        for t in 0..steps {
            let next = self.step(stars, &out[t], dt, coupling)?;
            if !next.is_finite() {
                return Err(Error::NonFiniteState { frame: t + 1 });
            }
            out.push(next);
        }
        Ok(out)
    }
}

/// `½ Bᵀ H + ½ Dᵀ E`.
pub fn energy(stars: &MaxwellStars, s: &MaxwellState) -> f64 {
    let mag: f64 = s.b.iter().zip(&stars.star_mu_inv).map(|(b, m)| b * b * m).sum();
    let ele: f64 = s.dflux.iter().zip(&stars.star_eps_inv).map(|(d, k)| d * d * k).sum();
    0.5 * (mag + ele)
}

/// `max_t ‖D0ᵀ D_t − D0ᵀ D_0‖_∞`.
pub fn charge_invariant(traj: &[MaxwellState], d0: &SignedIncidence) -> Result<f64> {
    let Some(first) = traj.first() else {
        return Ok(0.0);
    };
    let q0 = d0.apply_transpose(&first.dflux)?;
    let mut worst: f64 = 0.0;
    for s in traj {
        let q = d0.apply_transpose(&s.dflux)?;
        worst = q.iter().zip(&q0).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    Ok(worst)
}

/// `max_t |E_t − E_0| / |E_0|`.
pub fn energy_drift(stars: &MaxwellStars, traj: &[MaxwellState]) -> Result<f64> {
    let e: Vec<f64> = traj.iter().map(|s| energy(stars, s)).collect();
    let e0 = *e.first().ok_or(Error::TooShort { need: 1, got: 0 })?;
    if e0 == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    Ok(e.iter().map(|x| (x - e0).abs()).fold(0.0, f64::max) / e0.abs())
}

/// Standing TE mode `B_f = A sin(kᵀx_f + φ)` at face centroids, `D = 0`.
pub fn te_mode(
    geom: &MeshGeometry,
    grid: &MaxwellGrid,
    index: [i64; 2],
    amplitude: f64,
    phase: f64,
) -> Result<MaxwellState> {
    let k = crate::wavegen::WaveNumber::new(index[0], index[1], geom.box_length)?;
    let d1 = geom.complex.incidence(1);
    let d0 = geom.d0();
    let mut b = vec![0.0; grid.n_faces()];
    for (f, bf) in b.iter_mut().enumerate() {
        let nodes: Vec<usize> = d1.row(f).flat_map(|(e, _)| d0.row(e).map(|(n, _)| n)).collect();
        let anchor = geom.positions[nodes[0]];
        let l = geom.box_length;
        let unwrap = |x: f64, a: f64| a + (x - a + 0.5 * l).rem_euclid(l) - 0.5 * l;
        let (mut cx, mut cy) = (0.0, 0.0);
        for &n in &nodes {
            cx += unwrap(geom.positions[n][0], anchor[0]);
            cy += unwrap(geom.positions[n][1], anchor[1]);
        }
        let m = nodes.len() as f64;
        *bf = amplitude * (k.k[0] * cx / m + k.k[1] * cy / m + phase).sin();
    }
    Ok(MaxwellState { b, dflux: vec![0.0; grid.n_edges()] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesher::periodic_grid;
    use crate::phcore::CanonicalState;
    use crate::stepper::{kdk_step_with, System};

    fn random_state(grid: &MaxwellGrid, seed: u64) -> MaxwellState {
        let mut r = rng::stream(seed, 1);
        MaxwellState {
            b: (0..grid.n_faces()).map(|_| r.gen_range(-1.0..1.0)).collect(),
            dflux: (0..grid.n_edges()).map(|_| r.gen_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn zero_fields_stay_zero() {
        let g = periodic_grid(4, 4, 1.0).unwrap();
        let grid = MaxwellGrid::new(&g).unwrap();
        let stars = MaxwellStars::geometric(&g, 1.0, 1.0).unwrap();
        let z = MaxwellState::zeros(16, 32);
        assert_eq!(grid.step(&stars, &z, 0.01, Coupling::Signed).unwrap(), z);
    }

    #[test]
    fn charge_is_conserved_and_unsigned_control_breaks_it() {
        let g = periodic_grid(8, 8, 1.0).unwrap();
        let grid = MaxwellGrid::new(&g).unwrap();
        let stars = MaxwellStars::randomized(&g, 4, 2.0).unwrap();
        let dt = grid.cfl_dt(&stars, 0.5).unwrap();
        let s0 = random_state(&grid, 2);
        let ok = grid.rollout(&stars, &s0, dt, 200, Coupling::Signed).unwrap();
        assert!(charge_invariant(&ok, g.d0()).unwrap() <= 1e-12);
        let bad = grid.rollout(&stars, &s0, dt, 200, Coupling::Unsigned).unwrap();
        assert!(charge_invariant(&bad, g.d0()).unwrap() > 1e-3);
    }

    #[test]
    fn leapfrog_matches_scalar_kdk_on_faces() {
        let g = periodic_grid(4, 4, 1.0).unwrap();
        let grid = MaxwellGrid::new(&g).unwrap();
        let stars = MaxwellStars::randomized(&g, 8, 1.5).unwrap();
        let hodge = grid.face_hodge(&stars);
        let sys = System { wiring: grid.face_wiring(), hodge: &hodge, damping: None };
        let dt = 0.3 * grid.cfl_dt(&stars, 1.0).unwrap();
        let mut s = random_state(&grid, 3);
        let to_canonical = |s: &MaxwellState| {
            let e: Vec<f64> = s.dflux.iter().zip(&stars.star_eps_inv).map(|(d, k)| d * k).collect();
            CanonicalState {
                q: s.b.iter().zip(&stars.star_mu_inv).map(|(b, m)| b * m).collect(),
                p: grid.d1.apply(&e).unwrap().iter().map(|v| -v).collect(),
            }
        };
        let mut c = to_canonical(&s);
        for _ in 0..20 {
            s = grid.step(&stars, &s, dt, Coupling::Signed).unwrap();
            c = kdk_step_with(sys, &c, dt).unwrap();
            let m = to_canonical(&s);
            for (a, b) in m.q.iter().chain(&m.p).zip(c.q.iter().chain(&c.p)) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn te_mode_energy_is_nearly_constant() {
        let g = periodic_grid(64, 64, 1.0).unwrap();
        let grid = MaxwellGrid::new(&g).unwrap();
        let stars = MaxwellStars::geometric(&g, 1.0, 1.0).unwrap();
        let dt = grid.cfl_dt(&stars, 0.5).unwrap();
        let s0 = te_mode(&g, &grid, [1, 0], 1.0, 0.2).unwrap();
        let traj = grid.rollout(&stars, &s0, dt, 500, Coupling::Signed).unwrap();
        assert!(energy_drift(&stars, &traj).unwrap() <= 1e-3);
    }

    #[test]
    fn triangle_mesh_has_no_closed_surface() {
        let g = crate::mesher::triangle_mesh(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[[0, 1, 2]]).unwrap();
        assert!(MaxwellGrid::new(&g).is_err());
    }
}
