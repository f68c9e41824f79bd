//! Initial states of the three-spin register: oscillator-level encoding,
//! thermal equilibrium, pseudopure states and the ancilla-superposition
//! thermal state, plus an interpreter for pulse sequences with field
//! gradient crushes.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    embed, identity2, kron_all, sigma_x, sigma_y, spin_operator, trace_product, Axis, Operator,
    HermitianEigen, C64, MAX_QUBITS,
};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

const TRACE_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-10;

/// Trace-one, Hermitian, positive semidefinite register state.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    op: Operator,
    label: String,
}

impl DensityMatrix {
    /// Validates `op` as a density matrix.
    pub fn new(op: Operator, label: impl Into<String>) -> Result<Self> {
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let herr = op.hermiticity_error();
        if herr > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herr:e})")));
        }
        let min = HermitianEigen::new(&op)?.values[0];
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { op, label: label.into() })
    }

    /// Wraps an operator already known to be a valid state (output of a
    /// unitary or CPTP map applied to a valid state).
    pub(crate) fn from_trusted(op: Operator, label: impl Into<String>) -> Self {
        Self { op, label: label.into() }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        Self::from_trusted(Operator::identity(dim).scale_real(1.0 / dim as f64), "mixed")
    }

    /// `|k⟩⟨k|` on a register of `n_qubits`.
    pub fn basis(n_qubits: usize, k: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        let label = format!("|{}>", bit_string(k, n_qubits));
        Ok(Self::from_trusted(Operator::basis_projector(dim, k)?, label))
    }

    /// `|ψ⟩⟨ψ|` for a ket, normalized first.
    pub fn pure(ket: &[C64], label: impl Into<String>) -> Result<Self> {
        let norm = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero ket".into()));
        }
        let normalized: Vec<C64> = ket.iter().map(|z| z / norm).collect();
        Ok(Self::from_trusted(Operator::outer(&normalized)?, label))
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn n_qubits(&self) -> usize {
        self.op.n_qubits()
    }

    /// Traceless part `ρ − 𝟙/d`.
    pub fn deviation(&self) -> Operator {
        let d = self.dim();
        &self.op - &Operator::identity(d).scale_real(1.0 / d as f64)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        HermitianEigen::new(&self.op).map(|e| e.values).unwrap_or_default()
    }

    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        expectation(self, op)
    }

    /// Applies `u ρ u†`.
    pub fn evolve(&self, u: &Operator) -> Result<Self> {
        let rotated = u.try_mul(&self.op)?;
        Ok(Self::from_trusted(&rotated * &u.adjoint(), self.label.clone()))
    }
}

/// `Tr(ρ · op)`.
pub fn expectation(rho: &DensityMatrix, op: &Operator) -> Result<C64> {
    trace_product(rho.op(), op)
}

/// Traces out register qubit `spin` (1-based) of an operator.
pub fn partial_trace(op: &Operator, spin: usize) -> Result<Operator> {
    let n = op.n_qubits();
    if n < 2 {
        return Err(Error::BadDimension(op.dim()));
    }
    if spin == 0 || spin > n {
        return Err(Error::SpinIndex { spin, n });
    }
    let shift = n - spin;
    let low_mask = (1usize << shift) - 1;
    let expand = |k: usize, bit: usize| ((k >> shift) << (shift + 1)) | (bit << shift) | (k & low_mask);
    let dim = op.dim() / 2;
    let mut out = Operator::zeros(dim).into_matrix();
    for r in 0..dim {
        for c in 0..dim {
            out[(r, c)] = (0..2).map(|b| op.get(expand(r, b), expand(c, b))).sum();
        }
    }
    Operator::from_matrix(out)
}

pub(crate) fn bit_string(k: usize, n: usize) -> String {
    (0..n).map(|i| if (k >> (n - 1 - i)) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Small positive polarization `ε` scaling the deviation part of NMR states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PurityFactor(f64);

impl PurityFactor {
    pub const DEFAULT: PurityFactor = PurityFactor(1e-5);

    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 0.25) {
            return Err(Error::PurityOutOfRange(eps));
        }
        Ok(Self(eps))
    }

    /// `ε = ħω₀ / (8kT)` for Larmor frequency `omega0` (rad/s) and temperature (K).
    pub fn from_temperature(omega0: f64, temperature: f64) -> Result<Self> {
        if temperature <= 0.0 {
            return Err(Error::InvalidParameter(format!("temperature {temperature} K")));
        }
        Self::new(HBAR * omega0 / (8.0 * BOLTZMANN * temperature))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for PurityFactor {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<f64> for PurityFactor {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PurityFactor> for f64 {
    fn from(p: PurityFactor) -> f64 {
        p.0
    }
}

/// Chemical shifts, scalar couplings and relaxation times of the register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystemConfig {
    pub n_spins: usize,
    /// Rotating-frame offsets, Hz.
    pub shifts_hz: Vec<f64>,
    /// Symmetric coupling matrix, Hz; the diagonal is ignored.
    pub couplings_hz: Vec<Vec<f64>>,
    /// Longitudinal relaxation time, s.
    pub t1: f64,
    /// Effective transverse dephasing time, s.
    pub t2_star: f64,
}

impl SpinSystemConfig {
    /// Placeholder parameters for the trifluoroiodoethylene register.
    ///
    /// Relaxation times are the measured 6.3 s and 0.8 s. The shifts and
    /// couplings are plausible magnitudes only and should be replaced by
    /// measured values before any quantitative use.
    pub fn placeholder() -> Self {
        Self {
            n_spins: 3,
            shifts_hz: vec![-9_800.0, 3_200.0, 6_600.0],
            couplings_hz: vec![
                vec![0.0, 69.8, 47.7],
                vec![69.8, 0.0, -128.3],
                vec![47.7, -128.3, 0.0],
            ],
            t1: 6.3,
            t2_star: 0.8,
        }
    }

    /// A register with every shift and coupling set to zero.
    pub fn free(n_spins: usize) -> Self {
        Self {
            n_spins,
            shifts_hz: vec![0.0; n_spins],
            couplings_hz: vec![vec![0.0; n_spins]; n_spins],
            t1: 6.3,
            t2_star: 0.8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_spins;
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Config(format!("n_spins = {n} outside 1..={MAX_QUBITS}")));
        }
        if self.shifts_hz.len() != n {
            return Err(Error::Config(format!("{} chemical shifts for {n} spins", self.shifts_hz.len())));
        }
        if self.couplings_hz.len() != n || self.couplings_hz.iter().any(|r| r.len() != n) {
            return Err(Error::Config(format!("coupling matrix must be {n}×{n}")));
        }
        for i in 0..n {
            for j in 0..n {
                if (self.couplings_hz[i][j] - self.couplings_hz[j][i]).abs() > 1e-9 {
                    return Err(Error::Config(format!("coupling matrix not symmetric at ({},{})", i + 1, j + 1)));
                }
            }
        }
        if !(self.t1 > 0.0) || !(self.t2_star > 0.0) {
            return Err(Error::Config("relaxation times must be positive".into()));
        }
        Ok(())
    }

    /// Coupling `J_ij` in Hz for 1-based spin indices.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings_hz[i - 1][j - 1]
    }

    /// Weak-coupling rotating-frame Hamiltonian in rad/s:
    /// `2π Σ νᵢ I_iz + 2π Σ_{i<j} J_ij I_iz I_jz`.
    pub fn secular_hamiltonian(&self) -> Result<Operator> {
        self.validate()?;
        let n = self.n_spins;
        let iz: Vec<Operator> = (1..=n).map(|k| spin_operator(Axis::Z, k, n)).collect::<Result<_>>()?;
        let mut h = Operator::zeros(1 << n);
        for (k, op) in iz.iter().enumerate() {
            h = &h + &op.scale_real(2.0 * PI * self.shifts_hz[k]);
        }
        for i in 0..n {
            for j in i + 1..n {
                let jij = self.couplings_hz[i][j];
                if jij != 0.0 {
                    h = &h + &(&iz[i] * &iz[j]).scale_real(2.0 * PI * jij);
                }
            }
        }
        Ok(h)
    }

    /// Pair coupling term `2π J_ij I_iz I_jz` alone.
    pub fn coupling_hamiltonian(&self, i: usize, j: usize) -> Result<Operator> {
        let n = self.n_spins;
        for s in [i, j] {
            if s == 0 || s > n {
                return Err(Error::SpinIndex { spin: s, n });
            }
        }
        if i == j {
            return Err(Error::InvalidParameter(format!("coupling pair ({i},{j})")));
        }
        let zz = &spin_operator(Axis::Z, i, n)? * &spin_operator(Axis::Z, j, n)?;
        Ok(zz.scale_real(2.0 * PI * self.coupling(i, j)))
    }
}

/// Maps oscillator level `l` to the Zeeman product state index `|mn⟩`
/// (binary encoding, `|0⟩→|00⟩ … |3⟩→|11⟩`).
pub fn qho_to_zeeman(l: usize) -> Result<usize> {
    if l > 3 {
        return Err(Error::LevelOutOfRange(l));
    }
    Ok(l)
}

/// Two-bit label `"mn"` of the Zeeman state encoding level `l`.
pub fn zeeman_label(l: usize) -> Result<String> {
    Ok(bit_string(qho_to_zeeman(l)?, 2))
}

/// The two-qubit system state `|mn⟩⟨mn|` encoding oscillator level `l`.
pub fn level_state(l: usize) -> Result<DensityMatrix> {
    let k = qho_to_zeeman(l)?;
    Ok(DensityMatrix::basis(2, k)?.with_label(format!("|{l}>_qho")))
}

/// `𝟙/2ⁿ + ε Σᵢ I_iz` for the configured register.
pub fn thermal_state(cfg: &SpinSystemConfig, eps: PurityFactor) -> Result<DensityMatrix> {
    cfg.validate()?;
    let n = cfg.n_spins;
    let dim = 1usize << n;
    let diag: Vec<f64> = (0..dim)
        .map(|k| {
            let zeros = n - k.count_ones() as usize;
            let mz = 0.5 * (2.0 * zeros as f64 - n as f64);
            1.0 / dim as f64 + eps.value() * mz
        })
        .collect();
    if diag.iter().any(|&p| p < 0.0) {
        return Err(Error::PurityOutOfRange(eps.value()));
    }
    Ok(DensityMatrix::from_trusted(Operator::from_diagonal(&diag)?, "thermal"))
}

/// `(1−ε)𝟙/8 + ε|k⟩⟨k|` on the three-spin register.
pub fn pseudopure_state(ket: usize, eps: PurityFactor) -> Result<DensityMatrix> {
    pseudopure_state_n(3, ket, eps)
}

pub fn pseudopure_state_n(n_qubits: usize, ket: usize, eps: PurityFactor) -> Result<DensityMatrix> {
    let dim = 1usize << n_qubits;
    let e = eps.value();
    let op = &Operator::identity(dim).scale_real((1.0 - e) / dim as f64)
        + &Operator::basis_projector(dim, ket)?.scale_real(e);
    Ok(DensityMatrix::from_trusted(op, format!("pps|{}>", bit_string(ket, n_qubits))))
}

/// Product-operator expansion of the `|000⟩` deviation:
/// `¼(ΣI_iz + 2ΣI_izI_jz + 4I_1zI_2zI_3z)`.
pub fn deviation_000_product_form() -> Operator {
    let iz: Vec<Operator> = (1..=3).map(|k| spin_operator(Axis::Z, k, 3).unwrap()).collect();
    let singles = &(&iz[0] + &iz[1]) + &iz[2];
    let pairs = &(&(&iz[0] * &iz[1]) + &(&iz[1] * &iz[2])) + &(&iz[0] * &iz[2]);
    let triple = &(&iz[0] * &iz[1]) * &iz[2];
    (&(&singles + &pairs.scale_real(2.0)) + &triple.scale_real(4.0)).scale_real(0.25)
}

/// Idealized pulsed-field-gradient crush: zeroes every off-diagonal entry.
///
/// This also removes zero-quantum coherences, which a real gradient would
/// leave untouched in a homonuclear system.
pub fn pfg_crush(rho: &DensityMatrix) -> DensityMatrix {
    let op = rho.op().map_entries(|r, c, z| if r == c { z } else { C64::new(0.0, 0.0) });
    DensityMatrix::from_trusted(op, rho.label())
}

/// One step of a pulse sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseEvent {
    /// Hard pulse `exp(−iθ(I_x cos φ + I_y sin φ))` on each listed spin.
    Rotation { spins: Vec<usize>, angle: f64, phase: f64 },
    /// Free evolution. When `refocused`, only the coupling of `pair` acts;
    /// otherwise the full secular Hamiltonian does.
    JEvolution { pair: [usize; 2], duration: f64, refocused: bool },
    /// Gradient crush.
    Pfg,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub events: Vec<PulseEvent>,
}

impl PulseSequence {
    pub fn new(events: Vec<PulseEvent>) -> Self {
        Self { events }
    }

    pub fn validate(&self, n_spins: usize) -> Result<()> {
        let check = |s: usize| {
            if s == 0 || s > n_spins {
                Err(Error::SpinIndex { spin: s, n: n_spins })
            } else {
                Ok(())
            }
        };
        for ev in &self.events {
            match ev {
                PulseEvent::Rotation { spins, angle, phase } => {
                    spins.iter().try_for_each(|&s| check(s))?;
                    if !angle.is_finite() || !phase.is_finite() {
                        return Err(Error::InvalidParameter("non-finite rotation".into()));
                    }
                }
                PulseEvent::JEvolution { pair, duration, .. } => {
                    pair.iter().try_for_each(|&s| check(s))?;
                    if pair[0] == pair[1] {
                        return Err(Error::InvalidParameter(format!("coupling pair {pair:?}")));
                    }
                    if !(*duration >= 0.0) {
                        return Err(Error::NegativeTime(*duration));
                    }
                }
                PulseEvent::Pfg => {}
            }
        }
        Ok(())
    }
}

/// Single-spin rotation `cos(θ/2)𝟙 − i sin(θ/2)(σx cos φ + σy sin φ)`.
pub fn single_spin_rotation(angle: f64, phase: f64) -> Operator {
    let axis = &sigma_x().scale_real(phase.cos()) + &sigma_y().scale_real(phase.sin());
    &identity2().scale_real((angle / 2.0).cos()) + &axis.scale(C64::new(0.0, -(angle / 2.0).sin()))
}

/// Rotation by `angle` with the given phase, applied to every listed spin.
pub fn rotation_operator(spins: &[usize], angle: f64, phase: f64, n: usize) -> Result<Operator> {
    let r = single_spin_rotation(angle, phase);
    let id = identity2();
    for &s in spins {
        if s == 0 || s > n {
            return Err(Error::SpinIndex { spin: s, n });
        }
    }
    let factors: Vec<&Operator> = (1..=n).map(|k| if spins.contains(&k) { &r } else { &id }).collect();
    Ok(kron_all(factors))
}

/// Interprets a pulse sequence event by event.
pub fn run_sequence(rho: &DensityMatrix, seq: &PulseSequence, cfg: &SpinSystemConfig) -> Result<DensityMatrix> {
    cfg.validate()?;
    let n = cfg.n_spins;
    if rho.dim() != 1 << n {
        return Err(Error::DimMismatch(rho.dim(), 1 << n));
    }
    seq.validate(n)?;
    let mut state = rho.clone();
    for ev in &seq.events {
        state = match ev {
            PulseEvent::Rotation { spins, angle, phase } => state.evolve(&rotation_operator(spins, *angle, *phase, n)?)?,
            PulseEvent::JEvolution { pair, duration, refocused } => {
                let h = if *refocused {
                    cfg.coupling_hamiltonian(pair[0], pair[1])?
                } else {
                    cfg.secular_hamiltonian()?
                };
                state.evolve(&crate::operator::expm(&h, *duration)?)?
            }
            PulseEvent::Pfg => pfg_crush(&state),
        };
    }
    Ok(state)
}

/// Builds a pulse sequence turning the thermal deviation `ΣI_iz` into
/// `(4/3)(|000⟩⟨000| − 𝟙/8)`.
///
/// After an initial `arccos(2/3)` nutation of spins 2 and 3, three blocks
/// `(a)_x^i – τ_ij – (a)_{∓y}^i – PFG` transfer longitudinal order between
/// `I_iz` and `2I_izI_jz` with weights `cos²a` and `sin²a`, for
/// `(i, j, a) = (1, 3, arccos(1/√3)), (2, 1, π/4), (3, 2, π/4)`.
/// Each `τ_ij = 1/(2|J_ij|)` evolution is refocused to the single pair.
pub fn canonical_pps_sequence(cfg: &SpinSystemConfig) -> Result<PulseSequence> {
    cfg.validate()?;
    if cfg.n_spins != 3 {
        return Err(Error::Config("pseudopure sequence needs 3 spins".into()));
    }
    let mut events = vec![
        PulseEvent::Rotation { spins: vec![2, 3], angle: (2.0f64 / 3.0).acos(), phase: 0.0 },
        PulseEvent::Pfg,
    ];
    let blocks = [(1, 3, (1.0 / 3.0f64.sqrt()).acos()), (2, 1, FRAC_PI_4), (3, 2, FRAC_PI_4)];
    for (i, j, a) in blocks {
        let jij = cfg.coupling(i, j);
        if jij == 0.0 {
            return Err(Error::Config(format!("J{i}{j} = 0; cannot build pseudopure sequence")));
        }
        // second pulse about −y for positive J and +y for negative J
        let phase = if jij > 0.0 { -FRAC_PI_2 } else { FRAC_PI_2 };
        events.extend([
            PulseEvent::Rotation { spins: vec![i], angle: a, phase: 0.0 },
            PulseEvent::JEvolution { pair: [i, j], duration: 1.0 / (2.0 * jij.abs()), refocused: true },
            PulseEvent::Rotation { spins: vec![i], angle: a, phase },
            PulseEvent::Pfg,
        ]);
    }
    Ok(PulseSequence::new(events))
}

/// Deviation scale produced by [`canonical_pps_sequence`] relative to `ε`.
pub const CANONICAL_PPS_GAIN: f64 = 4.0 / 3.0;

/// Thermal state after a `(π/2)_y` pulse on the ancilla (spin 1).
pub fn ancilla_superposition_thermal(cfg: &SpinSystemConfig, eps: PurityFactor) -> Result<DensityMatrix> {
    let rho = thermal_state(cfg, eps)?;
    let seq = PulseSequence::new(vec![PulseEvent::Rotation { spins: vec![1], angle: FRAC_PI_2, phase: FRAC_PI_2 }]);
    Ok(run_sequence(&rho, &seq, cfg)?.with_label("thermal+ancilla"))
}

/// `(1−4ε)𝟙₈/8 + ε(|+⟩⟨+|⊗𝟙⊗𝟙) + ε(I_2z + I_3z)`.
pub fn ancilla_superposition_closed_form(eps: PurityFactor) -> Operator {
    let e = eps.value();
    let plus = Operator::from_real_rows(2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
    let plus_full = embed(&plus, 1, 3).unwrap();
    let i2z = spin_operator(Axis::Z, 2, 3).unwrap();
    let i3z = spin_operator(Axis::Z, 3, 3).unwrap();
    let mixed = Operator::identity(8).scale_real((1.0 - 4.0 * e) / 8.0);
    &(&mixed + &plus_full.scale_real(e)) + &(&i2z + &i3z).scale_real(e)
}

/// Prepares the pseudopure register state `|0mn⟩` encoding level `l` on
/// the system pair: canonical sequence, then `(π)_x` flips as needed.
pub fn prepare_level_pseudopure(cfg: &SpinSystemConfig, eps: PurityFactor, l: usize) -> Result<DensityMatrix> {
    let k = qho_to_zeeman(l)?;
    let mut seq = canonical_pps_sequence(cfg)?;
    let flips: Vec<usize> = [(2, 1), (3, 0)].iter().filter(|(_, bit)| (k >> bit) & 1 == 1).map(|(s, _)| *s).collect();
    if !flips.is_empty() {
        seq.events.push(PulseEvent::Rotation { spins: flips, angle: PI, phase: 0.0 });
    }
    let rho = run_sequence(&thermal_state(cfg, eps)?, &seq, cfg)?;
    Ok(rho.with_label(format!("pps|0{}>", bit_string(k, 2))))
}
