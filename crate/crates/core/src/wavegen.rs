//! Analytic plane-wave data: one-step training pairs, conservative and
//! Rayleigh-damped, plus exact reference trajectories.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesher::MeshGeometry;
use crate::phcore::{CanonicalState, Trajectory, TrajectoryMeta};
use crate::rng;

/// Mixed into the seed for the validation stream so it never overlaps training.
pub const VALIDATION_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Wavenumber `k = 2π/L · (ux, uy)` on a periodic box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveNumber {
    pub index: [i64; 2],
    pub k: [f64; 2],
}

impl WaveNumber {
    pub fn new(ux: i64, uy: i64, box_length: f64) -> Result<Self> {
        if ux == 0 && uy == 0 {
            return Err(Error::InvalidArgument("zero wavenumber".into()));
        }
        let s = TAU / box_length;
        Ok(Self { index: [ux, uy], k: [s * ux as f64, s * uy as f64] })
    }

    /// Recovers integer indices from a physical vector; fails unless both
    /// components are integer multiples of `2π/L`.
    pub fn from_vector(k: [f64; 2], box_length: f64) -> Result<Self> {
        let u = k.map(|c| c * box_length / TAU);
        let r = u.map(f64::round);
        if (0..2).any(|i| (u[i] - r[i]).abs() > 1e-9 * r[i].abs().max(1.0)) {
            return Err(Error::NonCommensurate(k[0], k[1]));
        }
        Self::new(r[0] as i64, r[1] as i64, box_length)
    }

    pub fn norm(&self) -> f64 {
        self.k[0].hypot(self.k[1])
    }

    /// `kᵀx` at every node.
    pub fn phases(&self, geom: &MeshGeometry) -> Vec<f64> {
        geom.positions.iter().map(|x| self.k[0] * x[0] + self.k[1] * x[1]).collect()
    }
}

/// One plane wave `q = a e^{−γt} sin(kᵀx − ωt + φ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveSample {
    pub k: WaveNumber,
    pub omega: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub t0: f64,
    pub gamma: f64,
    pub c: f64,
}

impl WaveSample {
    pub fn new(k: WaveNumber, c: f64, amplitude: f64, phase: f64, t0: f64, gamma: f64) -> Self {
        Self { omega: c * k.norm(), k, amplitude, phase, t0, gamma, c }
    }

    /// Effective phase `φ − ωt` of the spatial pattern at time `t`.
    pub fn phase_at(&self, t: f64) -> f64 {
        self.phase - self.omega * t
    }

    /// Envelope `a e^{−γt}`.
    pub fn envelope(&self, t: f64) -> f64 {
        self.amplitude * (-self.gamma * t).exp()
    }
}

/// Sampler knobs; defaults follow the conservative training recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub kmax_x: u32,
    pub kmax_y: u32,
    pub c: f64,
    pub amplitude: [f64; 2],
    /// `None` draws conservative waves; `Some([lo, hi])` draws `γ ~ U[lo, hi]`.
    pub gamma: Option<[f64; 2]>,
    /// Draw `|kx|` from `0..=kmax_x` like `ky` (off by default).
    pub symmetric: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { kmax_x: 4, kmax_y: 4, c: 1.0, amplitude: [0.5, 1.5], gamma: None, symmetric: false }
    }
}

impl SamplerConfig {
    pub fn damped() -> Self {
        Self { gamma: Some([0.01, 0.1]), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.kmax_x == 0 {
            return bad("kmax_x must be at least 1");
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("wave speed must be positive");
        }
        if !(self.amplitude[0] > 0.0 && self.amplitude[0] <= self.amplitude[1]) {
            return bad("amplitude range must be positive and ordered");
        }
        if let Some([lo, hi]) = self.gamma {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return bad("gamma range must be nonnegative and ordered");
            }
        }
        Ok(())
    }
}

/// `q` and `p = V0 ∂t q` of the sample at absolute time `t`.
pub fn plane_wave_state(geom: &MeshGeometry, sample: &WaveSample, t: f64) -> Result<CanonicalState> {
    WaveNumber::from_vector(sample.k.k, geom.box_length)?;
    Ok(plane_wave_state_unchecked(geom, sample, &sample.k.phases(geom), t))
}

fn plane_wave_state_unchecked(geom: &MeshGeometry, s: &WaveSample, kx: &[f64], t: f64) -> CanonicalState {
    let env = s.envelope(t);
    let shift = s.phase_at(t);
    let mut q = Vec::with_capacity(kx.len());
    let mut p = Vec::with_capacity(kx.len());
    for (&th, &v) in kx.iter().zip(&geom.v0) {
        let (sin, cos) = (th + shift).sin_cos();
        q.push(env * sin);
        p.push(v * env * (-s.gamma * sin - s.omega * cos));
    }
    CanonicalState { q, p }
}

fn draw_index(rng: &mut impl Rng, max: u32, allow_zero: bool) -> i64 {
    let lo = if allow_zero { 0 } else { 1 };
    let u = rng.gen_range(lo..=max as i64);
    if rng.gen_bool(0.5) {
        -u
    } else {
        u
    }
}

/// Draws one wave from `cfg` using `rng`. The zero mode is rejected.
pub fn draw_sample(rng: &mut impl Rng, box_length: f64, cfg: &SamplerConfig) -> WaveSample {
    let k = loop {
        let ux = draw_index(rng, cfg.kmax_x, cfg.symmetric);
        let uy = draw_index(rng, cfg.kmax_y, true);
        if let Ok(k) = WaveNumber::new(ux, uy, box_length) {
            break k;
        }
    };
    let phase = rng.gen_range(0.0..TAU);
    let amplitude = rng.gen_range(cfg.amplitude[0]..=cfg.amplitude[1]);
    let t0 = rng.gen_range(0.0..TAU);
    let gamma = match cfg.gamma {
        Some([lo, hi]) if hi > lo => rng.gen_range(lo..=hi),
        Some([lo, _]) => lo,
        None => 0.0,
    };
    WaveSample::new(k, cfg.c, amplitude, phase, t0, gamma)
}

/// Sample plus its exact pair `(z(t0), z(t0 + dt))`.
pub fn sample_pair(
    rng: &mut impl Rng,
    geom: &MeshGeometry,
    dt: f64,
    cfg: &SamplerConfig,
) -> (WaveSample, (CanonicalState, CanonicalState)) {
    let s = draw_sample(rng, geom.box_length, cfg);
    let kx = s.k.phases(geom);
    let a = plane_wave_state_unchecked(geom, &s, &kx, s.t0);
    let b = plane_wave_state_unchecked(geom, &s, &kx, s.t0 + dt);
    (s, (a, b))
}

/// Conservative pair with `|kx| ∈ 1..=kmax_x`, `|ky| ∈ 0..=kmax_y`, speed `c`.
pub fn sample_conservative(
    rng: &mut impl Rng,
    geom: &MeshGeometry,
    dt: f64,
    kmax_x: u32,
    kmax_y: u32,
    c: f64,
) -> (WaveSample, (CanonicalState, CanonicalState)) {
    let cfg = SamplerConfig { kmax_x, kmax_y, c, ..SamplerConfig::default() };
    sample_pair(rng, geom, dt, &cfg)
}

/// Damped pair; `cfg.gamma` defaults to `[0.01, 0.1]` when unset.
pub fn sample_damped(
    rng: &mut impl Rng,
    geom: &MeshGeometry,
    dt: f64,
    cfg: &SamplerConfig,
) -> (WaveSample, (CanonicalState, CanonicalState)) {
    let cfg = SamplerConfig { gamma: cfg.gamma.or(Some([0.01, 0.1])), ..cfg.clone() };
    sample_pair(rng, geom, dt, &cfg)
}

/// Frames `t0 + t·dt` for `t = 0..=T`.
pub fn exact_trajectory(geom: &MeshGeometry, sample: &WaveSample, dt: f64, frames: usize) -> Result<Trajectory> {
    WaveNumber::from_vector(sample.k.k, geom.box_length)?;
    let kx = sample.k.phases(geom);
    let states =
        (0..=frames).map(|t| plane_wave_state_unchecked(geom, sample, &kx, sample.t0 + t as f64 * dt)).collect();
    Ok(Trajectory { dt, states, meta: TrajectoryMeta { mesh: geom.meta.spec.clone(), model: "exact".into() } })
}

/// One-step pairs on a single mesh and time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDataset {
    pub mesh: String,
    pub dt: f64,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub samples: Vec<WaveSample>,
    pub pairs: Vec<(CanonicalState, CanonicalState)>,
}

/// Header half of the on-disk format; pairs go to a CSV next to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub mesh: String,
    pub dt: f64,
    pub seed: u64,
    pub rng: String,
    pub n_nodes: usize,
    pub sampler: SamplerConfig,
    pub samples: Vec<WaveSample>,
}

impl PairDataset {
    /// `count` pairs; pair `i` uses stream `i` of `seed` only.
    pub fn generate(geom: &MeshGeometry, dt: f64, count: usize, seed: u64, sampler: &SamplerConfig) -> Result<Self> {
        sampler.validate()?;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let (samples, pairs) =
            (0..count).map(|i| sample_pair(&mut rng::stream(seed, i as u64), geom, dt, sampler)).unzip();
        Ok(Self { mesh: geom.meta.spec.clone(), dt, seed, sampler: sampler.clone(), samples, pairs })
    }

    /// Validation split drawn from the salted seed.
    pub fn generate_validation(
        geom: &MeshGeometry,
        dt: f64,
        count: usize,
        seed: u64,
        sampler: &SamplerConfig,
    ) -> Result<Self> {
        let mut ds = Self::generate(geom, dt, count, seed ^ VALIDATION_SALT, sampler)?;
        ds.seed = seed;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            mesh: self.mesh.clone(),
            dt: self.dt,
            seed: self.seed,
            rng: rng::RNG_ALGORITHM.into(),
            n_nodes: self.pairs.first().map_or(0, |p| p.0.len()),
            sampler: self.sampler.clone(),
            samples: self.samples.clone(),
        }
    }

    /// Rows `pair,node,q0,p0,q1,p1` with round-trip float formatting.
    pub fn pairs_csv(&self) -> String {
        let mut out = String::from("pair,node,q0,p0,q1,p1\n");
        for (i, (a, b)) in self.pairs.iter().enumerate() {
            for n in 0..a.len() {
                writeln!(out, "{i},{n},{:?},{:?},{:?},{:?}", a.q[n], a.p[n], b.q[n], b.p[n]).expect("string write");
            }
        }
        out
    }

    pub fn from_parts(header: DatasetHeader, csv: &str) -> Result<Self> {
        let n = header.n_nodes;
        let count = header.samples.len();
        let mut pairs = vec![(CanonicalState::zeros(n), CanonicalState::zeros(n)); count];
        let mut seen = 0usize;
        for (line_no, line) in csv.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Serde(format!("dataset csv line {}: {line}", line_no + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad());
            }
            let i: usize = f[0].parse().map_err(|_| bad())?;
            let k: usize = f[1].parse().map_err(|_| bad())?;
            if i >= count || k >= n {
                return Err(bad());
            }
            let v: Vec<f64> =
                f[2..].iter().map(|s| s.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
            let (a, b) = &mut pairs[i];
            a.q[k] = v[0];
            a.p[k] = v[1];
            b.q[k] = v[2];
            b.p[k] = v[3];
            seen += 1;
        }
        if seen != n * count {
            return Err(Error::Serde(format!("dataset csv has {seen} rows, header implies {}", n * count)));
        }
        Ok(Self {
            mesh: header.mesh,
            dt: header.dt,
            seed: header.seed,
            sampler: header.sampler,
            samples: header.samples,
            pairs,
        })
    }
}
