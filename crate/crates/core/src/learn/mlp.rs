//! Small dense MLPs with tanh hidden layers, evaluated row by row.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub activation: String,
}

impl MlpArch {
    pub fn tanh(input: usize, hidden: &[usize], output: usize) -> Self {
        Self { input, hidden: hidden.to_vec(), output, activation: "tanh".into() }
    }

    /// `(fan_in, fan_out)` of every affine layer.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input];
        dims.extend(&self.hidden);
        dims.push(self.output);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.activation != "tanh" {
            return Err(Error::CheckpointMismatch(format!("unsupported activation {}", self.activation)));
        }
        if self.input == 0 || self.output == 0 || self.hidden.contains(&0) {
            return Err(Error::ShapeMismatch("zero-width layer".into()));
        }
        Ok(())
    }
}

/// Parameters are stored flat, layer by layer: weights row-major
/// (`out × in`) followed by biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub arch: MlpArch,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn zeros(arch: MlpArch) -> Self {
        let n = arch.n_params();
        Self { arch, params: vec![0.0; n] }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(arch: MlpArch, rng: &mut impl Rng) -> Self {
        let mut params = Vec::with_capacity(arch.n_params());
        for (i, o) in arch.layers() {
            let a = (6.0 / (i + o) as f64).sqrt();
            params.extend((0..i * o).map(|_| rng.gen_range(-a..a)));
            params.extend(std::iter::repeat_n(0.0, o));
        }
        Self { arch, params }
    }

    pub fn from_params(arch: MlpArch, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.n_params() {
            return Err(Error::CheckpointMismatch(format!(
                "mlp expects {} parameters, got {}",
                arch.n_params(),
                params.len()
            )));
        }
        Ok(Self { arch, params })
    }

    /// Output for one input row; `acts` receives every post-activation
    /// vector (input first, output last) for use by `backward`.
    pub fn forward_cached(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        let layers = self.arch.layers();
        acts.resize_with(layers.len() + 1, Vec::new);
        acts[0].clear();
        acts[0].extend_from_slice(x);
        let mut off = 0;
        for (l, &(i, o)) in layers.iter().enumerate() {
            let (w, rest) = self.params[off..].split_at(i * o);
            let b = &rest[..o];
            off += i * o + o;
            let (prev, next) = acts.split_at_mut(l + 1);
            let inp = &prev[l];
            let out = &mut next[0];
            out.clear();
            let last = l + 1 == layers.len();
            for r in 0..o {
                let row = &w[r * i..(r + 1) * i];
                let z = b[r] + row.iter().zip(inp).map(|(a, b)| a * b).sum::<f64>();
                out.push(if last { z } else { z.tanh() });
            }
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut acts = Vec::new();
        self.forward_cached(x, &mut acts);
        acts.pop().unwrap_or_default()
    }

    /// Accumulates `∂(doutᵀ y)/∂θ` into `grad` given the cache of the
    /// matching forward pass.
    pub fn backward(&self, acts: &[Vec<f64>], dout: &[f64], grad: &mut [f64]) {
        let layers = self.arch.layers();
        let mut offsets = Vec::with_capacity(layers.len());
        let mut off = 0;
        for &(i, o) in &layers {
            offsets.push(off);
            off += i * o + o;
        }
        let mut delta = dout.to_vec();
        for l in (0..layers.len()).rev() {
            let (i, o) = layers[l];
            let off = offsets[l];
            let inp = &acts[l];
            for r in 0..o {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                let g = &mut grad[off + r * i..off + (r + 1) * i];
                for (g, a) in g.iter_mut().zip(inp) {
                    *g += d * a;
                }
                grad[off + i * o + r] += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + i * o];
            let mut prev = vec![0.0; i];
            for r in 0..o {
                let d = delta[r];
                for (p, wv) in prev.iter_mut().zip(&w[r * i..(r + 1) * i]) {
                    *p += d * wv;
                }
            }
            for (p, a) in prev.iter_mut().zip(inp) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }
}

/// Numerically stable `ln(1 + eˣ)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Derivative of softplus.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-column mean and floored standard deviation of a feature table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl FeatureStats {
    pub fn from_rows<const D: usize>(rows: &[[f64; D]]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; D];
        for r in rows {
            for k in 0..D {
                mean[k] += r[k];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; D];
        for r in rows {
            for k in 0..D {
                var[k] += (r[k] - mean[k]).powi(2);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Self { mean, std }
    }

    /// Standardizes every row; a column whose spread sits at the floor is
    /// mapped to exactly zero.
    pub fn apply<const D: usize>(&self, rows: &[[f64; D]]) -> Vec<[f64; D]> {
        rows.iter()
            .map(|r| {
                let mut out = [0.0; D];
                for k in 0..D {
                    out[k] = if self.std[k] <= STD_FLOOR { 0.0 } else { (r[k] - self.mean[k]) / self.std[k] };
                }
                out
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn loss(m: &Mlp, x: &[f64]) -> f64 {
        m.forward(x).iter().enumerate().map(|(i, y)| (i as f64 + 1.0) * y).sum()
    }

    #[test]
    fn backward_matches_central_differences() {
        let arch = MlpArch::tanh(3, &[5, 4], 2);
        let mut m = Mlp::glorot(arch, &mut rng::stream(1, 0));
        m.params.iter_mut().enumerate().for_each(|(i, p)| *p += 0.01 * (i as f64).sin());
        let x = [0.3, -1.2, 0.7];
        let mut acts = Vec::new();
        m.forward_cached(&x, &mut acts);
        let mut g = vec![0.0; m.params.len()];
        m.backward(&acts, &[1.0, 2.0], &mut g);
        let h = 1e-6;
        for j in 0..m.params.len() {
            let mut a = m.clone();
            a.params[j] += h;
            let mut b = m.clone();
            b.params[j] -= h;
            let fd = (loss(&a, &x) - loss(&b, &x)) / (2.0 * h);
            assert!((g[j] - fd).abs() <= 1e-7 * (fd.abs() + 1e-6), "param {j}: {} vs {fd}", g[j]);
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = Mlp::zeros(MlpArch::tanh(3, &[64], 1));
        assert_eq!(m.forward(&[1.0, 2.0, 3.0]), vec![0.0]);
        assert_eq!(m.arch.n_params(), 3 * 64 + 64 + 64 + 1);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-16);
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let arch = MlpArch::tanh(3, &[64], 1);
        let m = Mlp::glorot(arch, &mut rng::stream(2, 0));
        let a = (6.0f64 / 67.0).sqrt();
        assert!(m.params[..192].iter().all(|w| w.abs() < a));
        assert!(m.params[192..256].iter().all(|&b| b == 0.0));
        assert_eq!(m.params[320], 0.0);
    }

    #[test]
    fn constant_column_standardizes_to_zero() {
        let rows = [[1.0, 0.5], [3.0, 0.5], [5.0, 0.5]];
        let st = FeatureStats::from_rows(&rows);
        let z = st.apply(&rows);
        assert!(z.iter().all(|r| r[1] == 0.0));
        assert!((z[0][0] + z[2][0]).abs() < 1e-15);
    }
}
