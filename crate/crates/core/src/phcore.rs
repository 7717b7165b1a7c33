//! Port-Hamiltonian state model in canonical packing `z = (q, p)`, `p = M q̇`.
//!
//! The storage is `H = ½ qᵀK q + ½ pᵀM⁻¹p` with `K = D0ᵀ W D0`, and the
//! conservative field is `(M⁻¹p, −Kq)`. `K` is only ever applied as
//! gather / diagonal scale / scatter.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::complex::SignedIncidence;
use crate::error::{check_len, Error, Result};
use crate::mesher::MeshGeometry;

/// Diagonal Hodge stars: `mass` on nodes (M) and `weight` on edges (W).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HodgeStar {
    pub mass: Vec<f64>,
    pub weight: Vec<f64>,
}

impl HodgeStar {
    /// Checked constructor: every entry must be strictly positive.
    pub fn new(mass: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        if let Some(i) = mass.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::NonPositiveMass(i));
        }
        if let Some(e) = weight.iter().position(|&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument(format!("non-positive edge weight at {e}")));
        }
        Ok(Self { mass, weight })
    }

    /// No positivity check. Zero or signed weights are used by free-drift
    /// tests and by the indefinite-metric ablation.
    pub fn unchecked(mass: Vec<f64>, weight: Vec<f64>) -> Self {
        Self { mass, weight }
    }

    fn check(&self, geom: &MeshGeometry) -> Result<()> {
        check_len(geom.n_nodes(), self.mass.len())?;
        check_len(geom.n_edges(), self.weight.len())
    }
}

/// Canonical state: nodal displacement `q` and momentum `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl CanonicalState {
    pub fn zeros(n: usize) -> Self {
        Self { q: vec![0.0; n], p: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|v| v.is_finite())
    }

    /// `q` followed by `p`.
    pub fn concat(&self) -> Vec<f64> {
        let mut v = self.q.clone();
        v.extend_from_slice(&self.p);
        v
    }

    /// Reorders nodes: entry `i` moves to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.len());
        for (i, &j) in perm.iter().enumerate() {
            out.q[j] = self.q[i];
            out.p[j] = self.p[i];
        }
        out
    }
}

/// Nodewise Rayleigh rates, `R = diag(r)` acting on momentum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingField {
    pub rates: Vec<f64>,
}

impl DampingField {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some(i) = rates.iter().position(|&r| !(r >= 0.0)) {
            return Err(Error::InvalidArgument(format!("negative damping rate at node {i}")));
        }
        Ok(Self { rates })
    }

    pub fn uniform(n: usize, rate: f64) -> Result<Self> {
        Self::new(vec![rate; n])
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub mesh: String,
    pub model: String,
}

/// Uniformly spaced frames `t = 0..=T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<CanonicalState>,
    #[serde(default)]
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    /// Number of steps `T` (frames minus one).
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// Summary CSV with columns `t,H,p_total`, energies under `hodge`.
    pub fn summary_csv(&self, geom: &MeshGeometry, hodge: &HodgeStar) -> Result<String> {
        let mut out = String::from("t,H,p_total\n");
        for (i, s) in self.states.iter().enumerate() {
            let h = energy(geom, hodge, s)?;
            writeln!(out, "{},{:e},{:e}", i as f64 * self.dt, h, total_momentum(s)).expect("string write");
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Force wiring: `Kq = Sᵀ(w ⊙ G q)` for an edge×node gather map `G` and
/// scatter map `S`. The structured model has `G = S = D0`.
pub trait Wiring: Sync {
    fn n_nodes(&self) -> usize;
    fn n_edges(&self) -> usize;
    /// `out = G q`.
    fn gather(&self, q: &[f64], out: &mut [f64]);
    /// `out = Sᵀ e`.
    fn scatter(&self, e: &[f64], out: &mut [f64]);
    /// `out = Gᵀ e`.
    fn gather_adjoint(&self, e: &[f64], out: &mut [f64]);
    /// `out = S q`.
    fn scatter_adjoint(&self, q: &[f64], out: &mut [f64]);
    /// Nodes read by edge `e` in the gather map.
    fn endpoints(&self, e: usize) -> [usize; 2];
}

impl Wiring for SignedIncidence {
    fn n_nodes(&self) -> usize {
        self.cols()
    }
    fn n_edges(&self) -> usize {
        self.rows()
    }
    fn gather(&self, q: &[f64], out: &mut [f64]) {
        self.apply_into(q, out)
    }
    fn scatter(&self, e: &[f64], out: &mut [f64]) {
        self.apply_transpose_into(e, out)
    }
    fn gather_adjoint(&self, e: &[f64], out: &mut [f64]) {
        self.apply_transpose_into(e, out)
    }
    fn scatter_adjoint(&self, q: &[f64], out: &mut [f64]) {
        self.apply_into(q, out)
    }
    fn endpoints(&self, e: usize) -> [usize; 2] {
        let mut it = self.row(e).map(|(c, _)| c);
        let a = it.next().unwrap_or(0);
        [a, it.next().unwrap_or(a)]
    }
}

/// Real-valued edge×node map with two entries per row (one per endpoint).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeMap {
    pub n_nodes: usize,
    pub ends: Vec<[usize; 2]>,
    pub coef: Vec<[f64; 2]>,
}

impl EdgeMap {
    /// The signed incidence pattern: `-1` at the tail, `+1` at the head.
    pub fn signed(n_nodes: usize, ends: Vec<[usize; 2]>) -> Self {
        let coef = vec![[-1.0, 1.0]; ends.len()];
        Self { n_nodes, ends, coef }
    }

    /// Orientation-even pattern `|D0|`.
    pub fn unsigned(n_nodes: usize, ends: Vec<[usize; 2]>) -> Self {
        let coef = vec![[1.0, 1.0]; ends.len()];
        Self { n_nodes, ends, coef }
    }

    pub fn apply_into(&self, q: &[f64], out: &mut [f64]) {
        for ((o, [t, h]), [ct, ch]) in out.iter_mut().zip(&self.ends).zip(&self.coef) {
            *o = ct * q[*t] + ch * q[*h];
        }
    }

    pub fn apply_transpose_into(&self, e: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for ((v, [t, h]), [ct, ch]) in e.iter().zip(&self.ends).zip(&self.coef) {
            out[*t] += ct * v;
            out[*h] += ch * v;
        }
    }
}

/// A gather map and a scatter map, possibly different.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitWiring {
    pub gather: EdgeMap,
    pub scatter: EdgeMap,
}

impl Wiring for SplitWiring {
    fn n_nodes(&self) -> usize {
        self.gather.n_nodes
    }
    fn n_edges(&self) -> usize {
        self.gather.ends.len()
    }
    fn gather(&self, q: &[f64], out: &mut [f64]) {
        self.gather.apply_into(q, out)
    }
    fn scatter(&self, e: &[f64], out: &mut [f64]) {
        self.scatter.apply_transpose_into(e, out)
    }
    fn gather_adjoint(&self, e: &[f64], out: &mut [f64]) {
        self.gather.apply_transpose_into(e, out)
    }
    fn scatter_adjoint(&self, q: &[f64], out: &mut [f64]) {
        self.scatter.apply_into(q, out)
    }
    fn endpoints(&self, e: usize) -> [usize; 2] {
        self.gather.ends[e]
    }
}

/// `out = Sᵀ(w ⊙ G q)`; `edge_buf` must have one slot per edge.
pub fn stiffness_apply_into<W: Wiring + ?Sized>(
    wiring: &W,
    weight: &[f64],
    q: &[f64],
    edge_buf: &mut [f64],
    out: &mut [f64],
) {
    wiring.gather(q, edge_buf);
    for (e, w) in edge_buf.iter_mut().zip(weight) {
        *e *= w;
    }
    wiring.scatter(edge_buf, out);
}

/// `K q = D0ᵀ(W ⊙ D0 q)` without forming `K`.
pub fn stiffness_apply(geom: &MeshGeometry, hodge: &HodgeStar, q: &[f64]) -> Result<Vec<f64>> {
    hodge.check(geom)?;
    check_len(geom.n_nodes(), q.len())?;
    let mut edge = vec![0.0; geom.n_edges()];
    let mut out = vec![0.0; geom.n_nodes()];
    stiffness_apply_into(geom.d0(), &hodge.weight, q, &mut edge, &mut out);
    Ok(out)
}

/// `H = ½ Σ_e W_e (D0 q)_e² + ½ Σ_i p_i² / M_i`.
pub fn energy(geom: &MeshGeometry, hodge: &HodgeStar, state: &CanonicalState) -> Result<f64> {
    hodge.check(geom)?;
    check_len(geom.n_nodes(), state.q.len())?;
    check_len(geom.n_nodes(), state.p.len())?;
    if let Some(i) = hodge.mass.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::NonPositiveMass(i));
    }
    Ok(potential_energy(geom, &hodge.weight, &state.q) + kinetic_energy(&hodge.mass, &state.p))
}

pub(crate) fn potential_energy(geom: &MeshGeometry, weight: &[f64], q: &[f64]) -> f64 {
    let mut dq = vec![0.0; geom.n_edges()];
    geom.d0().apply_into(q, &mut dq);
    0.5 * dq.iter().zip(weight).map(|(d, w)| w * d * d).sum::<f64>()
}

pub(crate) fn kinetic_energy(mass: &[f64], p: &[f64]) -> f64 {
    0.5 * p.iter().zip(mass).map(|(p, m)| p * p / m).sum::<f64>()
}

/// Co-energy `∇H = (Kq, M⁻¹p)`.
pub fn co_energy(geom: &MeshGeometry, hodge: &HodgeStar, state: &CanonicalState) -> Result<(Vec<f64>, Vec<f64>)> {
    let kq = stiffness_apply(geom, hodge, &state.q)?;
    check_len(geom.n_nodes(), state.p.len())?;
    let v = state.p.iter().zip(&hodge.mass).map(|(p, m)| p / m).collect();
    Ok((kq, v))
}

/// Conservative field `J∇H = (M⁻¹p, −Kq)`.
pub fn conservative_field(
    geom: &MeshGeometry,
    hodge: &HodgeStar,
    state: &CanonicalState,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (kq, v) = co_energy(geom, hodge, state)?;
    Ok((v, kq.into_iter().map(|f| -f).collect()))
}

/// Total momentum `Σ p`, summed in node order.
pub fn total_momentum(state: &CanonicalState) -> f64 {
    state.p.iter().sum()
}

/// Shared evaluation metric `(M, W) = (V0, c² V1⁻¹)`.
pub fn theory_hodge(geom: &MeshGeometry, wave_speed: f64) -> HodgeStar {
    let c2 = wave_speed * wave_speed;
    HodgeStar { mass: geom.v0.clone(), weight: geom.v1inv.iter().map(|w| c2 * w).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{build_complex, ComplexSpec};
    use crate::mesher::{periodic_grid, MeshMeta};

    fn triangle_geom() -> MeshGeometry {
        let complex = build_complex(&ComplexSpec {
            n_nodes: 3,
            edges: vec![[0, 1], [1, 2], [2, 0]],
            higher: vec![vec![vec![(0, 1), (1, 1), (2, 1)]]],
        })
        .unwrap();
        MeshGeometry {
            complex,
            positions: vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.8]],
            box_length: 1.0,
            v0: vec![1.0; 3],
            v1inv: vec![1.0; 3],
            edge_vectors: vec![[1.0, 0.0], [-0.5, 0.8], [-0.5, -0.8]],
            triangles: vec![],
            periodic: false,
            meta: MeshMeta { spec: "triangle".into(), rng: None, area_floor: None, weight_floor: None },
        }
    }

    #[test]
    fn triangle_stiffness_and_energy() {
        let g = triangle_geom();
        let h = HodgeStar::new(vec![1.0; 3], vec![1.0; 3]).unwrap();
        assert_eq!(stiffness_apply(&g, &h, &[1.0, 0.0, 0.0]).unwrap(), vec![2.0, -1.0, -1.0]);
        let s = CanonicalState { q: vec![1.0, 0.0, 0.0], p: vec![0.0; 3] };
        assert_eq!(energy(&g, &h, &s).unwrap(), 1.0);
        assert_eq!(energy(&g, &h, &CanonicalState::zeros(3)).unwrap(), 0.0);
    }

    #[test]
    fn constant_q_has_no_force() {
        let g = periodic_grid(5, 4, 1.0).unwrap();
        let h = theory_hodge(&g, 1.3);
        let kq = stiffness_apply(&g, &h, &vec![2.5; g.n_nodes()]).unwrap();
        assert!(kq.iter().all(|&f| f == 0.0));
        let s = CanonicalState { q: vec![2.5; g.n_nodes()], p: vec![0.0; g.n_nodes()] };
        let (qd, pd) = conservative_field(&g, &h, &s).unwrap();
        assert!(qd.iter().chain(&pd).all(|&v| v == 0.0));
    }

    #[test]
    fn non_positive_mass_rejected() {
        let g = triangle_geom();
        assert_eq!(HodgeStar::new(vec![1.0, 0.0, 1.0], vec![1.0; 3]).unwrap_err(), Error::NonPositiveMass(1));
        let h = HodgeStar::unchecked(vec![1.0, -1.0, 1.0], vec![1.0; 3]);
        assert_eq!(energy(&g, &h, &CanonicalState::zeros(3)).unwrap_err(), Error::NonPositiveMass(1));
    }

    #[test]
    fn momentum_sums() {
        let g = periodic_grid(32, 32, 1.0).unwrap();
        let s = CanonicalState { q: vec![0.0; 1024], p: vec![1.0; 1024] };
        assert_eq!(total_momentum(&s), 1024.0);
        assert_eq!(total_momentum(&CanonicalState::zeros(g.n_nodes())), 0.0);
    }

    #[test]
    fn theory_hodge_scales_weights() {
        let g = periodic_grid(4, 4, 1.0).unwrap();
        let h1 = theory_hodge(&g, 1.0);
        assert_eq!(h1.mass, g.v0);
        assert_eq!(h1.weight, g.v1inv);
        let h = theory_hodge(&g, 1.4);
        for (w, v) in h.weight.iter().zip(&g.v1inv) {
            assert!((w - 1.96 * v).abs() < 1e-15);
        }
    }

    #[test]
    fn split_wiring_matches_incidence() {
        let g = periodic_grid(4, 3, 1.0).unwrap();
        let ends = g.edge_ends();
        let split = SplitWiring {
            gather: EdgeMap::signed(g.n_nodes(), ends.clone()),
            scatter: EdgeMap::signed(g.n_nodes(), ends),
        };
        let q: Vec<f64> = (0..g.n_nodes()).map(|i| (i as f64 * 0.7).sin()).collect();
        let w: Vec<f64> = (0..g.n_edges()).map(|e| 1.0 + 0.1 * e as f64).collect();
        let mut buf = vec![0.0; g.n_edges()];
        let mut a = vec![0.0; g.n_nodes()];
        let mut b = vec![0.0; g.n_nodes()];
        stiffness_apply_into(g.d0(), &w, &q, &mut buf, &mut a);
        stiffness_apply_into(&split, &w, &q, &mut buf, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}
