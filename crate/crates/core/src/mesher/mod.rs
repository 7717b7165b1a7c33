//! Periodic 2D meshes with their metric raw material.
//!
//! Every mesh carries node dual areas `V0` and edge weights `V1⁻¹`. Grids use
//! the finite-difference ratio (dual length / primal length), which is 1 on
//! square cells; triangulations use cotangent weights and barycentric areas,
//! both floored at their 1% quantile.

mod delaunay;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{build_complex, CellComplex, ComplexDoc, ComplexSpec};
use crate::error::{Error, Result};
use crate::rng;

/// Absolute floor applied to cotangent weights.
pub const WEIGHT_FLOOR_ABS: f64 = 1e-8;
/// Quantile used for the weight and area floors.
pub const FLOOR_QUANTILE: f64 = 0.01;

/// A triangle of a triangulated mesh, with corners unwrapped into the plane.
#[derive(Clone, Debug, PartialEq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub corners: [[f64; 2]; 3],
    /// Edge opposite each corner, with the edge's sign in the face boundary.
    pub edges: [(usize, i8); 3],
}

impl Triangle {
    pub fn area(&self) -> f64 {
        0.5 * delaunay::orient(self.corners[0], self.corners[1], self.corners[2])
    }
}

/// Provenance of a mesh, kept in exported metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshMeta {
    pub spec: String,
    pub rng: Option<String>,
    pub area_floor: Option<f64>,
    pub weight_floor: Option<f64>,
}

/// Oriented 2-complex with positions and Hodge raw material.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshGeometry {
    pub complex: CellComplex,
    pub positions: Vec<[f64; 2]>,
    pub box_length: f64,
    pub v0: Vec<f64>,
    pub v1inv: Vec<f64>,
    /// Tail-to-head displacement of each edge (minimum image when periodic).
    pub edge_vectors: Vec<[f64; 2]>,
    pub triangles: Vec<Triangle>,
    pub periodic: bool,
    pub meta: MeshMeta,
}

impl MeshGeometry {
    pub fn n_nodes(&self) -> usize {
        self.complex.count(0)
    }

    pub fn n_edges(&self) -> usize {
        self.complex.count(1)
    }

    pub fn n_faces(&self) -> usize {
        if self.complex.dim() >= 2 {
            self.complex.count(2)
        } else {
            0
        }
    }

    pub fn d0(&self) -> &crate::complex::SignedIncidence {
        self.complex.incidence(0)
    }

    /// Node features `(x, y, V0)`.
    pub fn node_features(&self) -> Vec<[f64; 3]> {
        self.positions.iter().zip(&self.v0).map(|(p, &a)| [p[0], p[1], a]).collect()
    }

    /// Edge features `(Δx, Δy, ‖e‖)`.
    pub fn edge_features(&self) -> Vec<[f64; 3]> {
        self.edge_vectors.iter().map(|d| [d[0], d[1], d[0].hypot(d[1])]).collect()
    }

    /// Tail and head node of every edge.
    pub fn edge_ends(&self) -> Vec<[usize; 2]> {
        let d0 = self.d0();
        (0..d0.rows())
            .map(|e| {
                let mut ends = [0, 0];
                for (c, s) in d0.row(e) {
                    ends[usize::from(s > 0)] = c;
                }
                ends
            })
            .collect()
    }

    pub fn total_area(&self) -> f64 {
        self.v0.iter().sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MeshDoc {
            complex: ComplexDoc::from(&self.complex),
            box_length: self.box_length,
            periodic: self.periodic,
            positions: self.positions.clone(),
            v0: self.v0.clone(),
            v1inv: self.v1inv.clone(),
            meta: self.meta.clone(),
        })?)
    }

    /// Applies a node relabeling (old node `i` becomes `perm[i]`).
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Self> {
        let complex = self.complex.permute_cells(0, perm)?;
        let mut positions = vec![[0.0; 2]; perm.len()];
        let mut v0 = vec![0.0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            positions[p] = self.positions[i];
            v0[p] = self.v0[i];
        }
        let triangles =
            self.triangles.iter().map(|t| Triangle { nodes: t.nodes.map(|n| perm[n]), ..t.clone() }).collect();
        Ok(Self { complex, positions, v0, triangles, ..self.clone() })
    }
}

#[derive(Serialize, Deserialize)]
struct MeshDoc {
    complex: ComplexDoc,
    box_length: f64,
    periodic: bool,
    positions: Vec<[f64; 2]>,
    v0: Vec<f64>,
    v1inv: Vec<f64>,
    meta: MeshMeta,
}

/// Mesh family selector, written `grid:NX,NY` or `delaunay:N,SEED`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MeshSpec {
    Grid { nx: usize, ny: usize },
    Delaunay { n_points: usize, seed: u64 },
}

impl MeshSpec {
    pub fn build(&self, box_length: f64) -> Result<MeshGeometry> {
        match *self {
            MeshSpec::Grid { nx, ny } => periodic_grid(nx, ny, box_length),
            MeshSpec::Delaunay { n_points, seed } => periodic_delaunay(n_points, box_length, seed),
        }
    }
}

impl fmt::Display for MeshSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshSpec::Grid { nx, ny } => write!(f, "grid:{nx},{ny}"),
            MeshSpec::Delaunay { n_points, seed } => write!(f, "delaunay:{n_points},{seed}"),
        }
    }
}

impl FromStr for MeshSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("mesh spec `{s}` (expected grid:NX,NY or delaunay:N,SEED)"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let (a, b) = args.split_once(',').ok_or_else(bad)?;
        match kind.trim() {
            "grid" => Ok(MeshSpec::Grid {
                nx: a.trim().parse().map_err(|_| bad())?,
                ny: b.trim().parse().map_err(|_| bad())?,
            }),
            "delaunay" => Ok(MeshSpec::Delaunay {
                n_points: a.trim().parse().map_err(|_| bad())?,
                seed: b.trim().parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for MeshSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MeshSpec> for String {
    fn from(m: MeshSpec) -> String {
        m.to_string()
    }
}

/// Periodic axis-aligned grid on `[0, L)²` with `nx × ny` nodes.
///
/// Node `i + nx·j` sits at `(i·L/nx, j·L/ny)`. Node `n` owns edge `2n`
/// (towards +x) and edge `2n + 1` (towards +y); face `n` is the cell whose
/// lower-left corner is node `n`, oriented counterclockwise.
pub fn periodic_grid(nx: usize, ny: usize, box_length: f64) -> Result<MeshGeometry> {
    if nx < 2 || ny < 2 {
        return Err(Error::BadDimension(format!("grid {nx}x{ny} needs at least 2 nodes per axis")));
    }
    if !(box_length > 0.0) || !box_length.is_finite() {
        return Err(Error::BadDimension(format!("box length {box_length}")));
    }
    let (hx, hy) = (box_length / nx as f64, box_length / ny as f64);
    let node = |i: usize, j: usize| (i % nx) + nx * (j % ny);
    let n0 = nx * ny;

    let mut positions = Vec::with_capacity(n0);
    let mut edges = Vec::with_capacity(2 * n0);
    let mut edge_vectors = Vec::with_capacity(2 * n0);
    let mut v1inv = Vec::with_capacity(2 * n0);
    let mut faces = Vec::with_capacity(n0);
    for j in 0..ny {
        for i in 0..nx {
            let n = node(i, j);
            positions.push([i as f64 * hx, j as f64 * hy]);
            edges.push([n, node(i + 1, j)]);
            edge_vectors.push([hx, 0.0]);
            v1inv.push(hy / hx);
            edges.push([n, node(i, j + 1)]);
            edge_vectors.push([0.0, hy]);
            v1inv.push(hx / hy);
            faces.push(vec![(2 * n, 1), (2 * node(i + 1, j) + 1, 1), (2 * node(i, j + 1), -1), (2 * n + 1, -1)]);
        }
    }
    let complex = build_complex(&ComplexSpec { n_nodes: n0, edges, higher: vec![faces] })?;
    Ok(MeshGeometry {
        complex,
        positions,
        box_length,
        v0: vec![hx * hy; n0],
        v1inv,
        edge_vectors,
        triangles: Vec::new(),
        periodic: true,
        meta: MeshMeta { spec: MeshSpec::Grid { nx, ny }.to_string(), rng: None, area_floor: None, weight_floor: None },
    })
}

/// Periodic grid with every cell split along its (+x, +y) diagonal, using the
/// triangle pipeline for weights and areas.
pub fn periodic_grid_triangulated(nx: usize, ny: usize, box_length: f64) -> Result<MeshGeometry> {
    if nx < 2 || ny < 2 {
        return Err(Error::BadDimension(format!("grid {nx}x{ny} needs at least 2 nodes per axis")));
    }
    let (hx, hy) = (box_length / nx as f64, box_length / ny as f64);
    let positions: Vec<[f64; 2]> = (0..nx * ny).map(|n| [(n % nx) as f64 * hx, (n / nx) as f64 * hy]).collect();
    let corner = |i: usize, j: usize| {
        let id = (i % nx) + nx * (j % ny);
        (id, [(i / nx) as i32, (j / ny) as i32])
    };
    let mut tris = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    let mut geom = from_periodic_triangles(positions, &tris, box_length)?;
    geom.meta.spec = format!("grid-tri:{nx},{ny}");
    Ok(geom)
}

/// Periodic Delaunay mesh of `n_points` uniform random points on `[0, L)²`.
///
/// The points are tiled 3×3, triangulated, and the triangles whose centroid
/// falls in the central tile are kept; boundary copies are identified back to
/// their originals.
pub fn periodic_delaunay(n_points: usize, box_length: f64, seed: u64) -> Result<MeshGeometry> {
    if n_points < 8 {
        return Err(Error::BadDimension(format!("periodic Delaunay needs at least 8 points, got {n_points}")));
    }
    if !(box_length > 0.0) || !box_length.is_finite() {
        return Err(Error::BadDimension(format!("box length {box_length}")));
    }
    let mut rng = rng::stream(seed, 0);
    let positions: Vec<[f64; 2]> =
        (0..n_points).map(|_| [rng.gen::<f64>() * box_length, rng.gen::<f64>() * box_length]).collect();

    const TILES: [[i32; 2]; 9] = [[0, 0], [-1, -1], [0, -1], [1, -1], [-1, 0], [1, 0], [-1, 1], [0, 1], [1, 1]];
    let mut tiled = Vec::with_capacity(9 * n_points);
    for t in TILES {
        for p in &positions {
            tiled.push([p[0] + f64::from(t[0]) * box_length, p[1] + f64::from(t[1]) * box_length]);
        }
    }
    let mut tris = Vec::new();
    for v in delaunay::triangulate(&tiled) {
        let cx = (tiled[v[0]][0] + tiled[v[1]][0] + tiled[v[2]][0]) / 3.0;
        let cy = (tiled[v[0]][1] + tiled[v[1]][1] + tiled[v[2]][1]) / 3.0;
        if (0.0..box_length).contains(&cx) && (0.0..box_length).contains(&cy) {
            tris.push(v.map(|x| (x % n_points, TILES[x / n_points])));
        }
    }
    let mut geom = from_periodic_triangles(positions, &tris, box_length)?;
    geom.meta.spec = MeshSpec::Delaunay { n_points, seed }.to_string();
    geom.meta.rng = Some(rng::RNG_ALGORITHM.to_string());
    Ok(geom)
}

type Corner = (usize, [i32; 2]);

/// Builds a periodic triangle mesh from counterclockwise triangles whose
/// corners are `(node, tile offset)` pairs.
fn from_periodic_triangles(positions: Vec<[f64; 2]>, tris: &[[Corner; 3]], box_length: f64) -> Result<MeshGeometry> {
    let n0 = positions.len();
    // Edge key: (lower node, higher node, tile offset of higher minus lower).
    let key = |a: Corner, b: Corner| -> Result<((usize, usize, [i32; 2]), i8)> {
        if a.0 == b.0 {
            return Err(Error::MeshingFailure(format!("edge from node {} to its own periodic copy", a.0)));
        }
        let off = [b.1[0] - a.1[0], b.1[1] - a.1[1]];
        Ok(if a.0 < b.0 { ((a.0, b.0, off), 1) } else { ((b.0, a.0, [-off[0], -off[1]]), -1) })
    };
    let mut edge_map: BTreeMap<(usize, usize, [i32; 2]), (usize, i32)> = BTreeMap::new();
    for t in tris {
        for k in 0..3 {
            let (k_e, s) = key(t[(k + 1) % 3], t[(k + 2) % 3])?;
            let entry = edge_map.entry(k_e).or_insert((0, 0));
            entry.0 += 1;
            entry.1 += i32::from(s);
        }
    }
    for (k, &(count, sign_sum)) in &edge_map {
        if count != 2 || sign_sum != 0 {
            return Err(Error::MeshingFailure(format!(
                "edge {k:?} bounded by {count} triangles (sign sum {sign_sum})"
            )));
        }
    }
    let mut edges = Vec::with_capacity(edge_map.len());
    let mut edge_vectors = Vec::with_capacity(edge_map.len());
    for (idx, ((t, h, off), slot)) in edge_map.iter_mut().enumerate() {
        slot.0 = idx;
        edges.push([*t, *h]);
        edge_vectors.push([
            positions[*h][0] + f64::from(off[0]) * box_length - positions[*t][0],
            positions[*h][1] + f64::from(off[1]) * box_length - positions[*t][1],
        ]);
    }

    let unwrap = |c: Corner| {
        [positions[c.0][0] + f64::from(c.1[0]) * box_length, positions[c.0][1] + f64::from(c.1[1]) * box_length]
    };
    let mut triangles = Vec::with_capacity(tris.len());
    let mut faces = Vec::with_capacity(tris.len());
    for t in tris {
        let mut tri_edges = [(0usize, 0i8); 3];
        for k in 0..3 {
            let (k_e, s) = key(t[(k + 1) % 3], t[(k + 2) % 3])?;
            tri_edges[k] = (edge_map[&k_e].0, s);
        }
        // Boundary order a→b, b→c, c→a.
        faces.push(vec![tri_edges[2], tri_edges[0], tri_edges[1]]);
        triangles.push(Triangle { nodes: t.map(|c| c.0), corners: t.map(unwrap), edges: tri_edges });
    }

    let complex = build_complex(&ComplexSpec { n_nodes: n0, edges, higher: vec![faces] })?;
    let mut geom = MeshGeometry {
        complex,
        positions,
        box_length,
        v0: Vec::new(),
        v1inv: Vec::new(),
        edge_vectors,
        triangles,
        periodic: true,
        meta: MeshMeta { spec: String::new(), rng: None, area_floor: None, weight_floor: None },
    };
    if geom.complex.euler_characteristic() != 0 {
        return Err(Error::MeshingFailure(format!(
            "Euler characteristic {} is not that of a torus",
            geom.complex.euler_characteristic()
        )));
    }
    let (w, wf) = floored_cotangent_weights(&geom)?;
    let (a, af) = floored_dual_areas(&geom)?;
    geom.v1inv = w;
    geom.v0 = a;
    geom.meta.weight_floor = Some(wf);
    geom.meta.area_floor = Some(af);
    Ok(geom)
}

/// Non-periodic triangle mesh from counterclockwise node triples.
///
/// Boundary edges receive a single cotangent contribution.
pub fn triangle_mesh(positions: Vec<[f64; 2]>, tris: &[[usize; 3]]) -> Result<MeshGeometry> {
    let mut edge_map: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for t in tris {
        for k in 0..3 {
            let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
            if a == b {
                return Err(Error::DegenerateCell(edge_map.len()));
            }
            edge_map.insert((a.min(b), a.max(b)), 0);
        }
    }
    let mut edges = Vec::new();
    let mut edge_vectors = Vec::new();
    for (idx, ((t, h), slot)) in edge_map.iter_mut().enumerate() {
        *slot = idx;
        edges.push([*t, *h]);
        edge_vectors.push([positions[*h][0] - positions[*t][0], positions[*h][1] - positions[*t][1]]);
    }
    let mut triangles = Vec::new();
    let mut faces = Vec::new();
    for t in tris {
        let mut tri_edges = [(0usize, 0i8); 3];
        for k in 0..3 {
            let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
            tri_edges[k] = (edge_map[&(a.min(b), a.max(b))], if a < b { 1 } else { -1 });
        }
        faces.push(vec![tri_edges[2], tri_edges[0], tri_edges[1]]);
        triangles.push(Triangle { nodes: *t, corners: t.map(|n| positions[n]), edges: tri_edges });
    }
    let n0 = positions.len();
    let extent = positions.iter().flat_map(|p| p.iter().copied()).fold(0.0f64, |m, v| m.max(v.abs()));
    let complex = build_complex(&ComplexSpec { n_nodes: n0, edges, higher: vec![faces] })?;
    let mut geom = MeshGeometry {
        complex,
        positions,
        box_length: extent.max(f64::MIN_POSITIVE),
        v0: Vec::new(),
        v1inv: Vec::new(),
        edge_vectors,
        triangles,
        periodic: false,
        meta: MeshMeta { spec: "triangles".into(), rng: None, area_floor: None, weight_floor: None },
    };
    let (w, wf) = floored_cotangent_weights(&geom)?;
    let (a, af) = floored_dual_areas(&geom)?;
    geom.v1inv = w;
    geom.v0 = a;
    geom.meta.weight_floor = Some(wf);
    geom.meta.area_floor = Some(af);
    Ok(geom)
}

/// Linear-interpolated quantile of `values`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn check_triangles(geom: &MeshGeometry) -> Result<()> {
    if geom.triangles.is_empty() {
        return Err(Error::InvalidArgument("mesh has no triangles".into()));
    }
    let min_area = 1e-14 * geom.box_length * geom.box_length;
    for (i, t) in geom.triangles.iter().enumerate() {
        if t.area() < min_area {
            return Err(Error::DegenerateTriangle(i));
        }
    }
    Ok(())
}

/// Raw cotangent weights `½ Σ cot(opposite angle)`, before flooring.
pub fn raw_cotangent_weights(geom: &MeshGeometry) -> Result<Vec<f64>> {
    check_triangles(geom)?;
    let mut w = vec![0.0; geom.n_edges()];
    for t in &geom.triangles {
        for k in 0..3 {
            let o = t.corners[k];
            let a = t.corners[(k + 1) % 3];
            let b = t.corners[(k + 2) % 3];
            let u = [a[0] - o[0], a[1] - o[1]];
            let v = [b[0] - o[0], b[1] - o[1]];
            let dot = u[0] * v[0] + u[1] * v[1];
            let cross = u[0] * v[1] - u[1] * v[0];
            w[t.edges[k].0] += 0.5 * dot / cross;
        }
    }
    Ok(w)
}

fn floored_cotangent_weights(geom: &MeshGeometry) -> Result<(Vec<f64>, f64)> {
    let raw = raw_cotangent_weights(geom)?;
    let positive: Vec<f64> = raw.iter().copied().filter(|&w| w > 0.0).collect();
    let q = if positive.is_empty() { 0.0 } else { quantile(&positive, FLOOR_QUANTILE) };
    let floor = q.max(WEIGHT_FLOOR_ABS);
    Ok((raw.into_iter().map(|w| w.max(floor)).collect(), floor))
}

/// Floored cotangent weights `max(½(cot α + cot β), max(q₀₁, 1e-8))`.
pub fn cotangent_weights(geom: &MeshGeometry) -> Result<Vec<f64>> {
    Ok(floored_cotangent_weights(geom)?.0)
}

/// Barycentric lumping: every triangle gives a third of its area to each corner.
pub fn raw_dual_areas(geom: &MeshGeometry) -> Result<Vec<f64>> {
    check_triangles(geom)?;
    let mut a = vec![0.0; geom.n_nodes()];
    for t in &geom.triangles {
        let third = t.area() / 3.0;
        for &n in &t.nodes {
            a[n] += third;
        }
    }
    Ok(a)
}

fn floored_dual_areas(geom: &MeshGeometry) -> Result<(Vec<f64>, f64)> {
    let raw = raw_dual_areas(geom)?;
    let total: f64 = raw.iter().sum();
    let floor = quantile(&raw, FLOOR_QUANTILE);
    let mut a: Vec<f64> = raw.iter().map(|&v| v.max(floor)).collect();
    // Flooring only raises values; rescale so the areas still tile the domain.
    let scale = total / a.iter().sum::<f64>();
    for v in &mut a {
        *v *= scale;
    }
    Ok((a, floor))
}

/// Floored barycentric dual areas, rescaled to preserve the total area.
pub fn dual_areas(geom: &MeshGeometry) -> Result<Vec<f64>> {
    Ok(floored_dual_areas(geom)?.0)
}
