//! Gradient-ascent pulse engineering for the three-spin register.
//!
//! Each spin has its own `(x, y)` control pair, piecewise constant over
//! equal segments. The segment Hamiltonian is
//! `H = H_drift + κ Σₛ (uₓ I_sx + u_y I_sy)` with `κ` the RF scale, and the
//! objective is the Hilbert–Schmidt fidelity averaged over the configured
//! scales. Gradients are exact: each segment propagator is differentiated
//! through its eigendecomposition.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moussa::controlled_gate;
use crate::operator::{spin_operator, Axis, HermitianEigen, Operator, C64};
use crate::pseudospin::{make_observables, make_peres_mermin};
use crate::state::SpinSystemConfig;

type Mat = DMatrix<C64>;

/// Degenerate-eigenvalue cutoff in the divided differences, rad/s.
const DEGENERATE_GAP: f64 = 1e-9;

/// Rotating-frame drift Hamiltonian of a three-spin register.
pub fn drift_hamiltonian(cfg: &SpinSystemConfig) -> Result<Operator> {
    if cfg.n_spins != 3 {
        return Err(Error::Config(format!("pulse design needs 3 spins, got {}", cfg.n_spins)));
    }
    cfg.secular_hamiltonian()
}

/// Register used to exercise the optimizer at desk scale: offsets of a few
/// hundred Hz and couplings near 200 Hz, so entangling gates fit in a few
/// milliseconds.
pub fn test_hamiltonian_config() -> SpinSystemConfig {
    SpinSystemConfig {
        n_spins: 3,
        shifts_hz: vec![-350.0, 120.0, 480.0],
        couplings_hz: vec![
            vec![0.0, 210.0, 170.0],
            vec![210.0, 0.0, -240.0],
            vec![170.0, -240.0, 0.0],
        ],
        t1: 6.3,
        t2_star: 0.8,
    }
}

/// Piecewise-constant controls, one `(uₓ, u_y)` pair in rad/s per spin per
/// segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence {
    pub n_spins: usize,
    /// Seconds.
    pub segment_duration: f64,
    /// Bound on `√(uₓ² + u_y²)`, rad/s.
    pub max_amplitude: f64,
    /// `segments[k][s] = [uₓ, u_y]`.
    pub segments: Vec<Vec<[f64; 2]>>,
}

impl ControlSequence {
    pub const DEFAULT_SEGMENT_DURATION: f64 = 5e-6;

    pub fn zeros(n_segments: usize, n_spins: usize, segment_duration: f64, max_amplitude: f64) -> Self {
        Self { n_spins, segment_duration, max_amplitude, segments: vec![vec![[0.0; 2]; n_spins]; n_segments] }
    }

    /// Uniform random Cartesian components in `±scale·max_amplitude`,
    /// clipped to the amplitude bound.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        n_segments: usize,
        n_spins: usize,
        segment_duration: f64,
        max_amplitude: f64,
        scale: f64,
    ) -> Self {
        let mut c = Self::zeros(n_segments, n_spins, segment_duration, max_amplitude);
        if scale > 0.0 {
            let r = scale * max_amplitude;
            for seg in &mut c.segments {
                for pair in seg.iter_mut() {
                    *pair = [rng.random_range(-r..=r), rng.random_range(-r..=r)];
                }
            }
        }
        c.clip();
        c
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn total_duration(&self) -> f64 {
        self.n_segments() as f64 * self.segment_duration
    }

    pub fn amplitude(&self, segment: usize, spin: usize) -> f64 {
        let [x, y] = self.segments[segment][spin];
        x.hypot(y)
    }

    pub fn phase(&self, segment: usize, spin: usize) -> f64 {
        let [x, y] = self.segments[segment][spin];
        y.atan2(x)
    }

    pub fn set_polar(&mut self, segment: usize, spin: usize, amplitude: f64, phase: f64) {
        self.segments[segment][spin] = [amplitude * phase.cos(), amplitude * phase.sin()];
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_spins == 0 || self.segments.is_empty() {
            return Err(Error::InvalidParameter("control sequence has no channels or segments".into()));
        }
        if !(self.segment_duration > 0.0) || !(self.max_amplitude > 0.0) {
            return Err(Error::InvalidParameter("segment duration and amplitude bound must be > 0".into()));
        }
        for (k, seg) in self.segments.iter().enumerate() {
            if seg.len() != self.n_spins {
                return Err(Error::InvalidParameter(format!("segment {k} has {} channels", seg.len())));
            }
            for (s, &[x, y]) in seg.iter().enumerate() {
                if !(x.is_finite() && y.is_finite()) {
                    return Err(Error::InvalidParameter(format!("non-finite control at segment {k}, spin {}", s + 1)));
                }
                if x.hypot(y) > self.max_amplitude * (1.0 + 1e-12) {
                    return Err(Error::InvalidParameter(format!(
                        "amplitude {} exceeds bound {} at segment {k}, spin {}",
                        x.hypot(y),
                        self.max_amplitude,
                        s + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Rescales any pair above the amplitude bound onto it.
    pub fn clip(&mut self) {
        let max = self.max_amplitude;
        for seg in &mut self.segments {
            for pair in seg.iter_mut() {
                let a = pair[0].hypot(pair[1]);
                if a > max {
                    pair[0] *= max / a;
                    pair[1] *= max / a;
                }
            }
        }
    }

    /// `segment,channel,amplitude,phase` with 1-based spin channels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment,channel,amplitude,phase\n");
        for k in 0..self.n_segments() {
            for s in 0..self.n_spins {
                let _ = writeln!(out, "{},{},{:.12e},{:.12e}", k, s + 1, self.amplitude(k, s), self.phase(k, s));
            }
        }
        out
    }

    /// Parses the CSV written by [`ControlSequence::to_csv`].
    pub fn from_csv(text: &str, segment_duration: f64, max_amplitude: f64) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("segment,channel,amplitude,phase") {
            return Err(Error::Config("control CSV header mismatch".into()));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::Config(format!("control CSV line {}: '{line}'", n + 2));
            if f.len() != 4 {
                return Err(bad());
            }
            let k: usize = f[0].parse().map_err(|_| bad())?;
            let s: usize = f[1].parse().map_err(|_| bad())?;
            let a: f64 = f[2].parse().map_err(|_| bad())?;
            let p: f64 = f[3].parse().map_err(|_| bad())?;
            if s == 0 {
                return Err(bad());
            }
            rows.push((k, s - 1, a, p));
        }
        let n_segments = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let n_spins = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != n_segments * n_spins {
            return Err(Error::Config("control CSV is not a complete segment × channel table".into()));
        }
        let mut c = Self::zeros(n_segments, n_spins, segment_duration, max_amplitude);
        for (k, s, a, p) in rows {
            c.set_polar(k, s, a, p);
        }
        c.validate()?;
        Ok(c)
    }

    fn flat(&self) -> Vec<f64> {
        self.segments.iter().flat_map(|seg| seg.iter().flat_map(|p| p.iter().copied())).collect()
    }

    fn with_flat(&self, x: &[f64]) -> Self {
        let mut c = self.clone();
        for (k, seg) in c.segments.iter_mut().enumerate() {
            for (s, pair) in seg.iter_mut().enumerate() {
                let o = 2 * (k * self.n_spins + s);
                *pair = [x[o], x[o + 1]];
            }
        }
        c
    }
}

/// Drift plus the `x`/`y` spin operators of every channel.
#[derive(Debug, Clone)]
pub struct ControlSystem {
    drift: Mat,
    /// `[I_sx, I_sy]` per spin.
    channels: Vec<[Mat; 2]>,
}

impl ControlSystem {
    pub fn new(drift: &Operator) -> Result<Self> {
        if !drift.is_hermitian(1e-9 * drift.max_abs().max(1.0)) {
            return Err(Error::NotHermitian(drift.hermiticity_error()));
        }
        let n = drift.n_qubits();
        let channels = (1..=n)
            .map(|s| {
                Ok([
                    spin_operator(Axis::X, s, n)?.into_matrix(),
                    spin_operator(Axis::Y, s, n)?.into_matrix(),
                ])
            })
            .collect::<Result<_>>()?;
        Ok(Self { drift: drift.matrix().clone(), channels })
    }

    pub fn from_config(cfg: &SpinSystemConfig) -> Result<Self> {
        Self::new(&drift_hamiltonian(cfg)?)
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    fn check(&self, controls: &ControlSequence) -> Result<()> {
        controls.validate()?;
        if controls.n_spins != self.channels.len() {
            return Err(Error::DimMismatch(controls.n_spins, self.channels.len()));
        }
        Ok(())
    }

    fn segment_hamiltonian(&self, seg: &[[f64; 2]], kappa: f64) -> Operator {
        let mut h = self.drift.clone();
        for (pair, [ix, iy]) in seg.iter().zip(&self.channels) {
            h += ix * C64::new(kappa * pair[0], 0.0) + iy * C64::new(kappa * pair[1], 0.0);
        }
        Operator::from_matrix(h).expect("square power-of-two dimension")
    }

    fn segment_eigen(&self, seg: &[[f64; 2]], kappa: f64) -> HermitianEigen {
        HermitianEigen::new(&self.segment_hamiltonian(seg, kappa)).expect("Hermitian by construction")
    }

    /// Ordered product `U_N ⋯ U_1` at RF scale `kappa`.
    pub fn propagate(&self, controls: &ControlSequence, kappa: f64) -> Result<Operator> {
        self.check(controls)?;
        let dt = controls.segment_duration;
        let mut u = Mat::identity(self.dim(), self.dim());
        for seg in &controls.segments {
            u = self.segment_eigen(seg, kappa).propagator(dt).into_matrix() * u;
        }
        Operator::from_matrix(u)
    }

    /// Fidelity `|Tr(T†U)|/d` and its gradient with respect to the flattened
    /// controls (segment-major, then spin, then `x`, `y`).
    fn fidelity_and_gradient(&self, controls: &ControlSequence, target_adj: &Mat, kappa: f64) -> (f64, Vec<f64>) {
        let d = self.dim();
        let dt = controls.segment_duration;
        let n = controls.n_segments();
        let eigs: Vec<HermitianEigen> = controls.segments.iter().map(|s| self.segment_eigen(s, kappa)).collect();
        let props: Vec<Mat> = eigs.iter().map(|e| e.propagator(dt).into_matrix()).collect();

        // prefix[k] = U_k ⋯ U_1 (prefix[0] = 𝟙)
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(Mat::identity(d, d));
        for u in &props {
            let next = u * prefix.last().expect("non-empty");
            prefix.push(next);
        }
        let z = (target_adj * &prefix[n]).trace();
        let az = z.norm();
        let fid = az / d as f64;

        let mut grad = vec![0.0; 2 * n * self.channels.len()];
        if az < 1e-300 {
            return (fid, grad);
        }
        // back = T† U_N ⋯ U_{k+1}
        let mut back = target_adj.clone();
        for k in (0..n).rev() {
            // dz = Tr(P dU_k) with P = prefix[k] · back
            let p = &prefix[k] * &back;
            let e = &eigs[k];
            let v = &e.vectors;
            let pe = v.adjoint() * &p * v;
            let phases: Vec<C64> = e.values.iter().map(|&l| C64::from_polar(1.0, -l * dt)).collect();
            // W_jk = (V†PV)_kj · f[λ_j, λ_k]
            let w = Mat::from_fn(d, d, |j, kk| {
                let (lj, lk) = (e.values[j], e.values[kk]);
                let dd = if (lj - lk).abs() > DEGENERATE_GAP {
                    (phases[j] - phases[kk]) / (lj - lk)
                } else {
                    C64::new(0.0, -dt) * phases[j]
                };
                pe[(kk, j)] * dd
            });
            // Σ_jk W_jk (V† E V)_jk = Tr(V Wᵀ V† E)
            let q = v * w.transpose() * v.adjoint();
            for (s, chans) in self.channels.iter().enumerate() {
                for (a, c) in chans.iter().enumerate() {
                    let dz = q.component_mul(&c.transpose()).sum() * kappa;
                    grad[2 * (k * self.channels.len() + s) + a] = (z.conj() * dz).re / (az * d as f64);
                }
            }
            back = &back * &props[k];
        }
        (fid, grad)
    }
}

/// `U_N ⋯ U_1` for the register's drift Hamiltonian at nominal RF scale.
pub fn propagate(controls: &ControlSequence, cfg: &SpinSystemConfig) -> Result<Operator> {
    ControlSystem::from_config(cfg)?.propagate(controls, 1.0)
}

/// Named target gates on the ancilla-plus-system register.
#[derive(Debug, Clone, PartialEq)]
pub enum GrapeTarget {
    Identity,
    ControlledA,
    ControlledB(f64),
    ControlledC,
    ControlledD(f64),
    /// Controlled square entry, 1-based row and column.
    ControlledP(usize, usize),
    Custom(Operator),
}

impl GrapeTarget {
    pub fn name(&self) -> String {
        match self {
            GrapeTarget::Identity => "identity".into(),
            GrapeTarget::ControlledA => "cA".into(),
            GrapeTarget::ControlledB(b) => format!("cB({b})"),
            GrapeTarget::ControlledC => "cC".into(),
            GrapeTarget::ControlledD(e) => format!("cD({e})"),
            GrapeTarget::ControlledP(i, j) => format!("cP{i}{j}"),
            GrapeTarget::Custom(_) => "custom".into(),
        }
    }

    pub fn unitary(&self) -> Result<Operator> {
        let obs = |b, e| make_observables(b, e);
        let op = match self {
            GrapeTarget::Identity => return Ok(Operator::identity(8)),
            GrapeTarget::Custom(u) => return Ok(u.clone()),
            GrapeTarget::ControlledA => obs(0.0, 0.0).a,
            GrapeTarget::ControlledB(b) => obs(*b, 0.0).b,
            GrapeTarget::ControlledC => obs(0.0, 0.0).c,
            GrapeTarget::ControlledD(e) => obs(0.0, *e).d,
            GrapeTarget::ControlledP(i, j) => {
                if !(1..=3).contains(i) || !(1..=3).contains(j) {
                    return Err(Error::InvalidParameter(format!("no square entry P{i}{j}")));
                }
                make_peres_mermin().entry(i - 1, j - 1).clone()
            }
        };
        controlled_gate(&op)
    }
}

impl FromStr for GrapeTarget {
    type Err = Error;

    /// `identity`, `cA`, `cB(<β>)`, `cC`, `cD(<η>)` or `cPij`; angles accept
    /// the same `pi` expressions as grids.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let arg = |prefix: &str| -> Option<Result<f64>> {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_suffix(')'))
                .map(parse_angle)
        };
        if let Some(b) = arg("cB(") {
            return Ok(GrapeTarget::ControlledB(b?));
        }
        if let Some(e) = arg("cD(") {
            return Ok(GrapeTarget::ControlledD(e?));
        }
        match s {
            "identity" => Ok(GrapeTarget::Identity),
            "cA" => Ok(GrapeTarget::ControlledA),
            "cC" => Ok(GrapeTarget::ControlledC),
            _ => {
                let digits: Vec<usize> = s
                    .strip_prefix("cP")
                    .filter(|r| r.len() == 2)
                    .map(|r| r.chars().filter_map(|c| c.to_digit(10).map(|d| d as usize)).collect())
                    .unwrap_or_default();
                match digits.as_slice() {
                    [i, j] if (1..=3).contains(i) && (1..=3).contains(j) => Ok(GrapeTarget::ControlledP(*i, *j)),
                    _ => Err(Error::Config(format!("unknown pulse target '{s}'"))),
                }
            }
        }
    }
}

/// Parses `1.5`, `pi`, `-pi/4`, `3pi/4`, `3*pi/4`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    let bad = || Error::Config(format!("cannot parse angle '{text}'"));
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, t.strip_prefix('+').unwrap_or(&t)),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().map_err(|_| bad())?),
        None => (body, 1.0),
    };
    let coeff = match num.strip_suffix("pi") {
        Some("") => 1.0,
        Some(c) => c.strip_suffix('*').unwrap_or(c).parse::<f64>().map_err(|_| bad())?,
        None => return Err(bad()),
    };
    if den == 0.0 {
        return Err(bad());
    }
    let v = coeff * PI / den;
    Ok(if neg { -v } else { v })
}

/// Optimizer settings; everything but the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrapeSettings {
    pub n_segments: usize,
    /// Seconds.
    pub segment_duration: f64,
    /// rad/s.
    pub max_amplitude: f64,
    pub max_iterations: usize,
    /// Initial ascent step in units of the amplitude bound.
    pub step_size: f64,
    pub fidelity_goal: f64,
    pub robustness_samples: Vec<f64>,
    /// Random initial controls span `±init_scale · max_amplitude`.
    pub init_scale: f64,
    /// Set from the run seed rather than the optimizer table.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for GrapeSettings {
    fn default() -> Self {
        Self {
            n_segments: 400,
            segment_duration: 25e-6,
            max_amplitude: 2.0 * PI * 1_000.0,
            max_iterations: 2_000,
            step_size: 0.05,
            fidelity_goal: 0.99,
            robustness_samples: vec![0.9, 1.0, 1.1],
            init_scale: 0.2,
            seed: 7,
        }
    }
}

impl GrapeSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_segments == 0 {
            return Err(Error::Config("grape.n_segments must be > 0".into()));
        }
        if !(self.segment_duration > 0.0) || !(self.max_amplitude > 0.0) {
            return Err(Error::Config("grape.segment_duration and grape.max_amplitude must be > 0".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config(format!("grape.step_size must be > 0, got {}", self.step_size)));
        }
        if !(self.fidelity_goal > 0.0 && self.fidelity_goal <= 1.0) {
            return Err(Error::Config(format!("grape.fidelity_goal must be in (0, 1], got {}", self.fidelity_goal)));
        }
        if self.robustness_samples.is_empty() || self.robustness_samples.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::Config("grape.robustness_samples must be non-empty and positive".into()));
        }
        if !(self.init_scale >= 0.0) {
            return Err(Error::Config("grape.init_scale must be ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GrapeConfig {
    pub target: Operator,
    pub settings: GrapeSettings,
}

impl GrapeConfig {
    pub fn new(target: Operator, settings: GrapeSettings) -> Result<Self> {
        settings.validate()?;
        let err = target.unitarity_error();
        if err > 1e-8 {
            return Err(Error::NotUnitary(err));
        }
        Ok(Self { target, settings })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrapeStatus {
    Converged,
    BudgetExhausted,
    /// No improving step could be found.
    Stalled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrapeOutcome {
    pub controls: ControlSequence,
    /// Mean fidelity after each accepted iteration, starting with the
    /// initial controls.
    pub history: Vec<f64>,
    pub fidelity: f64,
    pub iterations: usize,
    pub status: GrapeStatus,
    pub seed: u64,
}

impl GrapeOutcome {
    pub fn goal_met(&self) -> bool {
        self.status == GrapeStatus::Converged
    }
}

struct Objective<'a> {
    system: &'a ControlSystem,
    target_adj: Mat,
    kappas: &'a [f64],
}

impl Objective<'_> {
    fn value_and_gradient(&self, controls: &ControlSequence) -> (f64, Vec<f64>) {
        let parts: Vec<(f64, Vec<f64>)> = self
            .kappas
            .par_iter()
            .map(|&k| self.system.fidelity_and_gradient(controls, &self.target_adj, k))
            .collect();
        let m = self.kappas.len() as f64;
        let mut grad = vec![0.0; parts[0].1.len()];
        let mut f = 0.0;
        for (fk, gk) in &parts {
            f += fk / m;
            for (g, x) in grad.iter_mut().zip(gk) {
                *g += x / m;
            }
        }
        (f, grad)
    }

    fn value(&self, controls: &ControlSequence) -> f64 {
        let parts: Vec<f64> = self
            .kappas
            .par_iter()
            .map(|&k| {
                let u = self.system.propagate(controls, k).expect("validated controls");
                (&self.target_adj * u.matrix()).trace().norm() / self.system.dim() as f64
            })
            .collect();
        parts.iter().sum::<f64>() / self.kappas.len() as f64
    }
}

/// Mean fidelity over RF scales and its exact gradient.
pub fn robust_fidelity_gradient(
    controls: &ControlSequence,
    target: &Operator,
    system: &ControlSystem,
    kappas: &[f64],
) -> Result<(f64, Vec<f64>)> {
    system.check(controls)?;
    if target.dim() != system.dim() {
        return Err(Error::DimMismatch(target.dim(), system.dim()));
    }
    let obj = Objective { system, target_adj: target.matrix().adjoint(), kappas };
    Ok(obj.value_and_gradient(controls))
}

/// Nonlinear conjugate-gradient ascent (Polak–Ribière, restarted on
/// non-ascent directions) with a backtracking step. Only improving steps are
/// accepted, so the history is nondecreasing.
pub fn grape_optimize(
    config: &GrapeConfig,
    system: &ControlSystem,
    seed_controls: Option<ControlSequence>,
) -> Result<GrapeOutcome> {
    let s = &config.settings;
    if config.target.dim() != system.dim() {
        return Err(Error::DimMismatch(config.target.dim(), system.dim()));
    }
    let n_spins = system.channels.len();
    let mut controls = match seed_controls {
        Some(c) => c,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            ControlSequence::random(&mut rng, s.n_segments, n_spins, s.segment_duration, s.max_amplitude, s.init_scale)
        }
    };
    system.check(&controls)?;
    let obj = Objective { system, target_adj: config.target.matrix().adjoint(), kappas: &s.robustness_samples };
    let umax = controls.max_amplitude;

    let (mut f, mut grad) = obj.value_and_gradient(&controls);
    let mut history = vec![f];
    let mut dir: Vec<f64> = Vec::new();
    let mut prev_grad: Vec<f64> = Vec::new();
    // step length in units of umax along the normalized direction
    let mut alpha = s.step_size;
    let mut iterations = 0;
    let mut status = GrapeStatus::BudgetExhausted;

    while iterations < s.max_iterations {
        if f >= s.fidelity_goal {
            status = GrapeStatus::Converged;
            break;
        }
        // ascent in normalized variables x = u / umax, whose gradient is umax·g
        let g: Vec<f64> = grad.iter().map(|v| v * umax).collect();
        let beta = if prev_grad.is_empty() {
            0.0
        } else {
            let num: f64 = g.iter().zip(&prev_grad).map(|(a, b)| a * (a - b)).sum();
            let den: f64 = prev_grad.iter().map(|b| b * b).sum();
            if den > 0.0 { (num / den).max(0.0) } else { 0.0 }
        };
        dir = if dir.is_empty() { g.clone() } else { g.iter().zip(&dir).map(|(a, d)| a + beta * d).collect() };
        if dir.iter().zip(&g).map(|(d, a)| d * a).sum::<f64>() <= 0.0 {
            dir = g.clone();
        }
        let dnorm = dir.iter().map(|d| d.abs()).fold(0.0, f64::max);
        if !dnorm.is_finite() {
            return Err(Error::InvalidParameter("gradient diverged".into()));
        }
        if dnorm == 0.0 {
            status = GrapeStatus::Stalled;
            break;
        }

        let x0 = controls.flat();
        let mut accepted = None;
        for _ in 0..40 {
            let x: Vec<f64> = x0.iter().zip(&dir).map(|(x, d)| x + alpha * umax * d / dnorm).collect();
            let mut trial = controls.with_flat(&x);
            trial.clip();
            let ft = obj.value(&trial);
            if !ft.is_finite() {
                return Err(Error::InvalidParameter("fidelity diverged".into()));
            }
            if ft > f {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-14 {
                break;
            }
        }
        let Some((trial, ft)) = accepted else {
            if prev_grad.is_empty() {
                status = GrapeStatus::Stalled;
                break;
            }
            // restart from steepest ascent before giving up
            prev_grad.clear();
            dir.clear();
            alpha = s.step_size;
            continue;
        };
        controls = trial;
        let (fnew, gnew) = obj.value_and_gradient(&controls);
        debug_assert!((fnew - ft).abs() < 1e-9);
        f = fnew;
        prev_grad = g;
        grad = gnew;
        history.push(f);
        iterations += 1;
        alpha = (alpha * 1.5).min(1.0);
    }
    if status == GrapeStatus::BudgetExhausted && f >= s.fidelity_goal {
        status = GrapeStatus::Converged;
    }
    Ok(GrapeOutcome { controls, history, fidelity: f, iterations, status, seed: s.seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    /// `(κ, fidelity)` in the order requested.
    pub samples: Vec<(f64, f64)>,
    pub mean: f64,
}

/// Fidelity of the pulse at each RF scale, plus their mean.
pub fn robustness_report(
    controls: &ControlSequence,
    target: &Operator,
    system: &ControlSystem,
    kappas: &[f64],
) -> Result<RobustnessReport> {
    system.check(controls)?;
    if kappas.is_empty() {
        return Err(Error::InvalidParameter("no RF scales".into()));
    }
    let obj = Objective { system, target_adj: target.matrix().adjoint(), kappas };
    let samples: Vec<(f64, f64)> = kappas
        .iter()
        .map(|&k| {
            let u = system.propagate(controls, k)?;
            Ok((k, (&obj.target_adj * u.matrix()).trace().norm() / system.dim() as f64))
        })
        .collect::<Result<_>>()?;
    let mean = samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64;
    Ok(RobustnessReport { samples, mean })
}
