//! Imperfection channels for the NMR register: transverse dephasing,
//! longitudinal relaxation and RF amplitude miscalibration.
//!
//! Channels act on raw operators so they can be applied to full states and
//! to deviation parts alike; the `DensityMatrix` wrappers are the public
//! entry points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequality::{chsh_sweep, GridSpec, Via};
use crate::operator::{embed, Operator, C64};
use crate::state::{rotation_operator, DensityMatrix};

/// Set of Kraus operators `{K_k}` acting as `ρ ↦ Σ K_k ρ K_k†`.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    ops: Vec<Operator>,
}

impl KrausChannel {
    pub fn new(ops: Vec<Operator>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| Error::InvalidParameter("empty Kraus set".into()))?;
        let dim = first.dim();
        if let Some(bad) = ops.iter().find(|k| k.dim() != dim) {
            return Err(Error::DimMismatch(bad.dim(), dim));
        }
        Ok(Self { ops })
    }

    pub fn operators(&self) -> &[Operator] {
        &self.ops
    }

    /// Largest entry of `Σ K†K − 𝟙`.
    pub fn completeness_error(&self) -> f64 {
        let dim = self.ops[0].dim();
        let sum = self
            .ops
            .iter()
            .fold(Operator::zeros(dim), |acc, k| &acc + &(&k.adjoint() * k));
        sum.max_abs_diff(&Operator::identity(dim))
    }

    pub fn apply(&self, rho: &Operator) -> Result<Operator> {
        let mut out = Operator::zeros(rho.dim());
        for k in &self.ops {
            out = &out + &(&k.try_mul(rho)? * &k.adjoint());
        }
        Ok(out)
    }

    /// Lifts a single-qubit channel to spin `spin` of an `n`-spin register.
    pub fn embedded(&self, spin: usize, n: usize) -> Result<Self> {
        let ops = self.ops.iter().map(|k| embed(k, spin, n)).collect::<Result<Vec<_>>>()?;
        Self::new(ops)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

/// Single-qubit phase damping with coherence factor `λ = exp(−t/T₂)`:
/// `K₀ = √((1+λ)/2) 𝟙`, `K₁ = √((1−λ)/2) σz`.
pub fn phase_damping_kraus(t: f64, t2: f64) -> Result<KrausChannel> {
    check_time(t)?;
    if !(t2 > 0.0) {
        return Err(Error::InvalidParameter(format!("T2 = {t2}")));
    }
    let lambda = (-t / t2).exp();
    let k0 = Operator::identity(2).scale_real(((1.0 + lambda) / 2.0).sqrt());
    let k1 = crate::operator::sigma_z().scale_real(((1.0 - lambda) / 2.0).sqrt());
    KrausChannel::new(vec![k0, k1])
}

/// Generalized amplitude damping toward ground-state population `p`
/// with `γ = 1 − exp(−t/T₁)`.
pub fn generalized_amplitude_damping_kraus(t: f64, t1: f64, p: f64) -> Result<KrausChannel> {
    check_time(t)?;
    if !(t1 > 0.0) {
        return Err(Error::InvalidParameter(format!("T1 = {t1}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("ground population {p}")));
    }
    let gamma = 1.0 - (-t / t1).exp();
    let (sp, sq) = (p.sqrt(), (1.0 - p).sqrt());
    let (sg, sd) = (gamma.sqrt(), (1.0 - gamma).sqrt());
    let k = |entries: [f64; 4], s: f64| Operator::from_real_rows(2, &entries.map(|x| x * s)).unwrap();
    KrausChannel::new(vec![
        k([1.0, 0.0, 0.0, sd], sp),
        k([0.0, sg, 0.0, 0.0], sp),
        k([sd, 0.0, 0.0, 1.0], sq),
        k([0.0, 0.0, sg, 0.0], sq),
    ])
}

/// Phase damping of spin `spin` for duration `t` on a raw operator.
pub fn apply_phase_damp(rho: &Operator, t: f64, t2: f64, spin: usize) -> Result<Operator> {
    phase_damping_kraus(t, t2)?.embedded(spin, rho.n_qubits())?.apply(rho)
}

/// Dephases every spin of the register for duration `t`.
pub fn apply_dephasing_all(rho: &Operator, t: f64, t2: f64) -> Result<Operator> {
    if t2.is_infinite() || t == 0.0 {
        check_time(t)?;
        return Ok(rho.clone());
    }
    (1..=rho.n_qubits()).try_fold(rho.clone(), |acc, s| apply_phase_damp(&acc, t, t2, s))
}

/// Scales coherences involving `spin` by `exp(−t/t2)`; populations untouched.
pub fn phase_damp(rho: &DensityMatrix, t: f64, t2: f64, spin: usize) -> Result<DensityMatrix> {
    let out = apply_phase_damp(rho.op(), t, t2, spin)?;
    Ok(DensityMatrix::from_trusted(out, rho.label()))
}

/// Relaxes the populations of `spin` toward ground population `p_ground`
/// with time constant `t1`.
pub fn t1_relax(rho: &DensityMatrix, t: f64, t1: f64, spin: usize, p_ground: f64) -> Result<DensityMatrix> {
    let ch = generalized_amplitude_damping_kraus(t, t1, p_ground)?.embedded(spin, rho.n_qubits())?;
    Ok(DensityMatrix::from_trusted(ch.apply(rho.op())?, rho.label()))
}

/// Ground-state population of one spin in the thermal state `𝟙/2ⁿ + εΣI_iz`.
pub fn thermal_ground_population(eps: f64, n_spins: usize) -> f64 {
    0.5 + eps * (1usize << (n_spins - 1)) as f64 / 2.0
}

/// A rotation whose angle is scaled by the RF amplitude factor `kappa`.
pub fn miscalibrated_rotation(
    rho: &DensityMatrix,
    spin: usize,
    angle: f64,
    phase: f64,
    kappa: f64,
) -> Result<DensityMatrix> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("RF scale {kappa}")));
    }
    rho.evolve(&rotation_operator(&[spin], kappa * angle, phase, rho.n_qubits())?)
}

/// Imperfection settings for simulated controlled-gate blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    /// Effective transverse dephasing time, s. Infinite disables dephasing.
    pub t2_star: f64,
    /// Longitudinal relaxation time, s. `None` disables relaxation.
    pub t1: Option<f64>,
    /// Duration of one block of two controlled gates, s.
    pub gate_duration_pair: f64,
    /// Duration of one block of three controlled gates, s.
    pub gate_duration_triple: f64,
    /// RF amplitude factors averaged over (inhomogeneous RF field).
    pub rf_scale_samples: Vec<f64>,
    /// Ground-state population approached under T1 relaxation.
    pub t1_ground_population: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self::experiment_defaults()
    }
}

impl NoiseParams {
    /// T2* = 0.8 s, 23 ms pair blocks, 40 ms triple blocks, RF scales {0.9, 1.0, 1.1}; T1 off.
    pub fn experiment_defaults() -> Self {
        Self {
            t2_star: 0.8,
            t1: None,
            gate_duration_pair: 0.023,
            gate_duration_triple: 0.040,
            rf_scale_samples: vec![0.9, 1.0, 1.1],
            t1_ground_population: thermal_ground_population(1e-5, 3),
        }
    }

    /// No dephasing, no relaxation, nominal RF amplitude.
    pub fn noiseless() -> Self {
        Self {
            t2_star: f64::INFINITY,
            t1: None,
            rf_scale_samples: vec![1.0],
            ..Self::experiment_defaults()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("noise.{name} must be > 0, got {v}")))
            }
        };
        positive("t2_star", self.t2_star)?;
        if let Some(t1) = self.t1 {
            positive("t1", t1)?;
        }
        positive("gate_duration_pair", self.gate_duration_pair)?;
        positive("gate_duration_triple", self.gate_duration_triple)?;
        if self.rf_scale_samples.is_empty() {
            return Err(Error::Config("noise.rf_scale_samples is empty".into()));
        }
        for &k in &self.rf_scale_samples {
            positive("rf_scale_samples", k)?;
        }
        if !(0.0..=1.0).contains(&self.t1_ground_population) {
            return Err(Error::Config("noise.t1_ground_population outside [0,1]".into()));
        }
        Ok(())
    }

    /// Block duration for a list of `n_ops` controlled gates.
    pub fn block_duration(&self, n_ops: usize) -> f64 {
        match n_ops {
            0 => 0.0,
            1 | 2 => self.gate_duration_pair,
            _ => self.gate_duration_triple,
        }
    }

    /// Applies the idle-time channels (dephasing, optional T1) for `t` seconds.
    pub fn idle(&self, rho: &Operator, t: f64) -> Result<Operator> {
        let mut out = apply_dephasing_all(rho, t, self.t2_star)?;
        if let Some(t1) = self.t1 {
            for s in 1..=out.n_qubits() {
                let ch = generalized_amplitude_damping_kraus(t, t1, self.t1_ground_population)?
                    .embedded(s, out.n_qubits())?;
                out = ch.apply(&out)?;
            }
        }
        Ok(out)
    }
}

/// Noisy Moussa sweep of `I_l` over the standard grid (π/4 steps on [−π, π]);
/// returns the grid maximum.
pub fn noisy_chsh_max(l: usize, noise: &NoiseParams) -> Result<f64> {
    Ok(chsh_sweep(l, &GridSpec::standard(), Via::Moussa, Some(noise))?.max_value)
}

/// `exp(−iκπ K)` with `K = |1⟩⟨1| ⊗ (𝟙 − u)/2`, the controlled-`u` gate
/// with its rotation angle scaled by `kappa`. Requires Hermitian unitary `u`.
pub fn scaled_controlled_gate(u: &Operator, kappa: f64) -> Result<Operator> {
    if kappa == 1.0 {
        return crate::moussa::controlled_gate(u);
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("RF scale {kappa}")));
    }
    let herr = u.hermiticity_error();
    if herr > crate::operator::DEFAULT_TOL {
        return Err(Error::NotHermitian(herr));
    }
    let uerr = u.unitarity_error();
    if uerr > crate::operator::DEFAULT_TOL {
        return Err(Error::NotUnitary(uerr));
    }
    let d = u.dim();
    let proj = (&Operator::identity(d) - u).scale_real(0.5);
    let phase = C64::from_polar(1.0, -kappa * std::f64::consts::PI) - C64::new(1.0, 0.0);
    let mut g = Operator::identity(2 * d).into_matrix();
    for r in 0..d {
        for c in 0..d {
            g[(d + r, d + c)] += phase * proj.get(r, c);
        }
    }
    Operator::from_matrix(g)
}
