//! Geometry-conditioned metric and damping networks, and the trainable
//! model that wraps them together with a force wiring.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{sigmoid, softplus, FeatureStats, Mlp, MlpArch};
use crate::error::{check_len, Error, Result};
use crate::mesher::MeshGeometry;
use crate::phcore::{DampingField, HodgeStar, SplitWiring, Wiring};
use crate::rng;
use crate::stepper::System;

pub const DEFAULT_HIDDEN: usize = 64;

/// `M = V0·softplus(node_mlp(x, y, V0))`, `W = V1⁻¹·softplus(edge_mlp(Δx, Δy, |e|))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HodgeNet {
    pub node: Mlp,
    pub edge: Mlp,
}

impl HodgeNet {
    pub fn new(hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            node: Mlp::glorot(MlpArch::tanh(3, &[hidden], 1), rng),
            edge: Mlp::glorot(MlpArch::tanh(3, &[hidden], 1), rng),
        }
    }

    pub fn zeros(hidden: usize) -> Self {
        Self { node: Mlp::zeros(MlpArch::tanh(3, &[hidden], 1)), edge: Mlp::zeros(MlpArch::tanh(3, &[hidden], 1)) }
    }
}

/// Per-node rates `r = softplus(mlp(node features ‖ mean incident edge features))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampNet {
    pub mlp: Mlp,
}

impl DampNet {
    /// Output bias of a fresh head; rates start at `softplus(-4) ≈ 0.018`,
    /// close to the conservative system.
    pub const INIT_BIAS: f64 = -4.0;

    pub fn new(hidden: usize, rng: &mut impl Rng) -> Self {
        let mut mlp = Mlp::glorot(MlpArch::tanh(6, &[hidden], 1), rng);
        *mlp.params.last_mut().expect("nonempty head") = Self::INIT_BIAS;
        Self { mlp }
    }

    pub fn zeros(hidden: usize) -> Self {
        Self { mlp: Mlp::zeros(MlpArch::tanh(6, &[hidden], 1)) }
    }
}

/// Standardized network inputs for one mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    pub node: Vec<[f64; 3]>,
    pub edge: Vec<[f64; 3]>,
    pub damp: Vec<[f64; 6]>,
    pub node_stats: FeatureStats,
    pub edge_stats: FeatureStats,
    pub damp_stats: FeatureStats,
}

impl Features {
    pub fn new(geom: &MeshGeometry) -> Self {
        let node_raw = geom.node_features();
        let edge_raw = geom.edge_features();
        let d0 = geom.d0();
        let damp_raw: Vec<[f64; 6]> = (0..geom.n_nodes())
            .map(|i| {
                let mut f = [node_raw[i][0], node_raw[i][1], node_raw[i][2], 0.0, 0.0, 0.0];
                let mut deg = 0.0;
                for (e, _) in d0.col(i) {
                    for k in 0..3 {
                        f[3 + k] += edge_raw[e][k];
                    }
                    deg += 1.0;
                }
                if deg > 0.0 {
                    for v in &mut f[3..] {
                        *v /= deg;
                    }
                }
                f
            })
            .collect();
        let node_stats = FeatureStats::from_rows(&node_raw);
        let edge_stats = FeatureStats::from_rows(&edge_raw);
        let damp_stats = FeatureStats::from_rows(&damp_raw);
        Self {
            node: node_stats.apply(&node_raw),
            edge: edge_stats.apply(&edge_raw),
            damp: damp_stats.apply(&damp_raw),
            node_stats,
            edge_stats,
            damp_stats,
        }
    }
}

fn scalar_outputs<const D: usize>(mlp: &Mlp, rows: &[[f64; D]]) -> Vec<f64> {
    let mut acts = Vec::new();
    rows.iter()
        .map(|x| {
            mlp.forward_cached(x, &mut acts);
            acts.last().map_or(0.0, |y| y[0])
        })
        .collect()
}

/// Metric from the Hodge network, standardized on `geom` itself.
pub fn hodge_from_features(net: &HodgeNet, geom: &MeshGeometry) -> Result<HodgeStar> {
    check_arch(&net.node, 3)?;
    check_arch(&net.edge, 3)?;
    let f = Features::new(geom);
    let mass = scalar_outputs(&net.node, &f.node).iter().zip(&geom.v0).map(|(s, v)| v * softplus(*s)).collect();
    let weight = scalar_outputs(&net.edge, &f.edge).iter().zip(&geom.v1inv).map(|(s, v)| v * softplus(*s)).collect();
    Ok(HodgeStar::unchecked(mass, weight))
}

/// Rates from the damping network.
pub fn damping_from_features(net: &DampNet, geom: &MeshGeometry) -> Result<DampingField> {
    check_arch(&net.mlp, 6)?;
    let f = Features::new(geom);
    Ok(DampingField { rates: scalar_outputs(&net.mlp, &f.damp).into_iter().map(softplus).collect() })
}

fn check_arch(mlp: &Mlp, input: usize) -> Result<()> {
    if mlp.arch.input != input || mlp.arch.output != 1 {
        return Err(Error::ShapeMismatch(format!(
            "network maps {} -> {}, expected {input} -> 1",
            mlp.arch.input, mlp.arch.output
        )));
    }
    if mlp.params.len() != mlp.arch.n_params() {
        return Err(Error::ShapeMismatch("parameter count does not match architecture".into()));
    }
    Ok(())
}

/// How edge gains are produced from the edge network output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    Softplus,
    Free,
}

/// Force wiring of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WiringSpec {
    /// `G = S = D0` from the mesh.
    Structured,
    /// A fixed replacement wiring (ablations).
    Fixed { wiring: SplitWiring },
    /// `G = S = B` with trainable coefficients on the given edge endpoints.
    Learned { ends: Vec<[usize; 2]>, coef: Vec<[f64; 2]> },
}

/// Everything trainable, plus the fixed structural choices around it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub variant: String,
    pub hodge: HodgeNet,
    pub damp: Option<DampNet>,
    pub wiring: WiringSpec,
    /// Fixed ±1 mask multiplied into `W`.
    pub weight_sign: Option<Vec<f64>>,
    pub gain: GainMode,
}

/// A model evaluated on one mesh: operators plus the pre-activation values
/// needed for backpropagation.
pub struct Materialized {
    pub hodge: HodgeStar,
    pub damping: Option<Vec<f64>>,
    pub wiring: Option<SplitWiring>,
    node_pre: Vec<f64>,
    edge_pre: Vec<f64>,
    damp_pre: Vec<f64>,
}

impl Materialized {
    pub fn system<'a>(&'a self, geom: &'a MeshGeometry) -> System<'a> {
        let wiring: &dyn Wiring = match &self.wiring {
            Some(w) => w,
            None => geom.d0(),
        };
        System { wiring, hodge: &self.hodge, damping: self.damping.as_deref() }
    }
}

/// Gradients of a scalar with respect to the operators of a `Materialized`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorGrads {
    pub mass: Vec<f64>,
    pub weight: Vec<f64>,
    pub rates: Vec<f64>,
    pub coef: Vec<[f64; 2]>,
}

impl OperatorGrads {
    pub fn zeros(n_nodes: usize, n_edges: usize, learned_coef: bool) -> Self {
        Self {
            mass: vec![0.0; n_nodes],
            weight: vec![0.0; n_edges],
            rates: vec![0.0; n_nodes],
            coef: if learned_coef { vec![[0.0; 2]; n_edges] } else { Vec::new() },
        }
    }
}

impl Model {
    /// Structured model with Glorot-initialized networks.
    pub fn structured(hidden: usize, damping: bool, seed: u64) -> Self {
        let mut r = rng::stream(seed, 0x4d4f_4445);
        let hodge = HodgeNet::new(hidden, &mut r);
        let damp = damping.then(|| DampNet::new(hidden, &mut r));
        Self {
            variant: "structured".into(),
            hodge,
            damp,
            wiring: WiringSpec::Structured,
            weight_sign: None,
            gain: GainMode::Softplus,
        }
    }

    pub fn n_params(&self) -> usize {
        self.hodge.node.params.len()
            + self.hodge.edge.params.len()
            + self.damp.as_ref().map_or(0, |d| d.mlp.params.len())
            + self.learned_coef().map_or(0, |c| 2 * c.len())
    }

    fn learned_coef(&self) -> Option<&Vec<[f64; 2]>> {
        match &self.wiring {
            WiringSpec::Learned { coef, .. } => Some(coef),
            _ => None,
        }
    }

    /// Flat parameter vector: node net, edge net, damping net, wiring coefficients.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend(&self.hodge.node.params);
        out.extend(&self.hodge.edge.params);
        if let Some(d) = &self.damp {
            out.extend(&d.mlp.params);
        }
        if let Some(c) = self.learned_coef() {
            out.extend(c.iter().flatten());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        check_len(self.n_params(), flat.len())?;
        let mut off = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[off..off + dst.len()]);
            off += dst.len();
        };
        take(&mut self.hodge.node.params);
        take(&mut self.hodge.edge.params);
        if let Some(d) = &mut self.damp {
            take(&mut d.mlp.params);
        }
        if let WiringSpec::Learned { coef, .. } = &mut self.wiring {
            for c in coef.iter_mut() {
                take(c);
            }
        }
        Ok(())
    }

    pub fn validate(&self, geom: &MeshGeometry) -> Result<()> {
        check_arch(&self.hodge.node, 3)?;
        check_arch(&self.hodge.edge, 3)?;
        if let Some(d) = &self.damp {
            check_arch(&d.mlp, 6)?;
        }
        let m = geom.n_edges();
        if let Some(s) = &self.weight_sign {
            check_len(m, s.len())?;
        }
        match &self.wiring {
            WiringSpec::Structured => {}
            WiringSpec::Fixed { wiring } => {
                check_len(m, wiring.n_edges())?;
                check_len(geom.n_nodes(), wiring.n_nodes())?;
            }
            WiringSpec::Learned { ends, coef } => {
                check_len(m, ends.len())?;
                check_len(m, coef.len())?;
            }
        }
        Ok(())
    }

    fn gain(&self, t: f64) -> (f64, f64) {
        match self.gain {
            GainMode::Softplus => (softplus(t), sigmoid(t)),
            GainMode::Free => (t, 1.0),
        }
    }

    pub fn materialize(&self, geom: &MeshGeometry, feats: &Features) -> Result<Materialized> {
        self.validate(geom)?;
        let node_pre = scalar_outputs(&self.hodge.node, &feats.node);
        let edge_pre = scalar_outputs(&self.hodge.edge, &feats.edge);
        let mass = node_pre.iter().zip(&geom.v0).map(|(s, v)| v * softplus(*s)).collect();
        let mut weight: Vec<f64> = edge_pre.iter().zip(&geom.v1inv).map(|(t, v)| v * self.gain(*t).0).collect();
        if let Some(sign) = &self.weight_sign {
            weight.iter_mut().zip(sign).for_each(|(w, s)| *w *= s);
        }
        let (damping, damp_pre) = match &self.damp {
            Some(d) => {
                let pre = scalar_outputs(&d.mlp, &feats.damp);
                (Some(pre.iter().map(|&u| softplus(u)).collect()), pre)
            }
            None => (None, Vec::new()),
        };
        let wiring = match &self.wiring {
            WiringSpec::Structured => None,
            WiringSpec::Fixed { wiring } => Some(wiring.clone()),
            WiringSpec::Learned { ends, coef } => {
                let map = crate::phcore::EdgeMap { n_nodes: geom.n_nodes(), ends: ends.clone(), coef: coef.clone() };
                Some(SplitWiring { gather: map.clone(), scatter: map })
            }
        };
        Ok(Materialized { hodge: HodgeStar::unchecked(mass, weight), damping, wiring, node_pre, edge_pre, damp_pre })
    }

    /// Chains operator gradients back to the flat parameter layout,
    /// accumulating into `out`.
    pub fn backprop(
        &self,
        geom: &MeshGeometry,
        feats: &Features,
        mat: &Materialized,
        g: &OperatorGrads,
        out: &mut [f64],
    ) {
        let n_node = self.hodge.node.params.len();
        let n_edge = self.hodge.edge.params.len();
        let mut acts = Vec::new();
        let (node_out, rest) = out.split_at_mut(n_node);
        let (edge_out, rest) = rest.split_at_mut(n_edge);
        for i in 0..geom.n_nodes() {
            let d = g.mass[i] * geom.v0[i] * sigmoid(mat.node_pre[i]);
            if d != 0.0 {
                self.hodge.node.forward_cached(&feats.node[i], &mut acts);
                self.hodge.node.backward(&acts, &[d], node_out);
            }
        }
        for e in 0..geom.n_edges() {
            let sign = self.weight_sign.as_ref().map_or(1.0, |s| s[e]);
            let d = g.weight[e] * geom.v1inv[e] * sign * self.gain(mat.edge_pre[e]).1;
            if d != 0.0 {
                self.hodge.edge.forward_cached(&feats.edge[e], &mut acts);
                self.hodge.edge.backward(&acts, &[d], edge_out);
            }
        }
        let mut rest = rest;
        if let Some(dn) = &self.damp {
            let (damp_out, r) = rest.split_at_mut(dn.mlp.params.len());
            rest = r;
            for i in 0..geom.n_nodes() {
                let d = g.rates[i] * sigmoid(mat.damp_pre[i]);
                if d != 0.0 {
                    dn.mlp.forward_cached(&feats.damp[i], &mut acts);
                    dn.mlp.backward(&acts, &[d], damp_out);
                }
            }
        }
        if self.learned_coef().is_some() {
            for (o, c) in rest.chunks_exact_mut(2).zip(&g.coef) {
                o[0] += c[0];
                o[1] += c[1];
            }
        }
    }

    pub fn has_learned_coef(&self) -> bool {
        self.learned_coef().is_some()
    }
}
