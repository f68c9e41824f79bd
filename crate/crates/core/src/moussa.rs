//! Ancilla-assisted measurement of joint expectation values.
//!
//! Register spin 1 is the ancilla. It is rotated into `|+⟩`, a controlled
//! version of each compatible observable is applied to the two system
//! spins, and the ancilla transverse magnetization `Tr(ρ (σx + iσy)₁)` then
//! equals `Tr(ρ_sys · X_n⋯X_1)`. A reference run without controlled gates
//! normalizes away the polarization and receiver scale.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::noise::{scaled_controlled_gate, NoiseParams};
use crate::operator::{commutator, kron, Operator, C64, DEFAULT_TOL};
use crate::state::{rotation_operator, DensityMatrix};

/// Relative threshold below which a reference signal counts as zero.
pub const REFERENCE_THRESHOLD: f64 = 1e-12;

/// `|0⟩⟨0| ⊗ 𝟙 + |1⟩⟨1| ⊗ u` with the ancilla as the leftmost factor.
pub fn controlled_gate(u: &Operator) -> Result<Operator> {
    let err = u.unitarity_error();
    if err > DEFAULT_TOL {
        return Err(Error::NotUnitary(err));
    }
    let d = u.dim();
    let mut g = Operator::identity(2 * d).into_matrix();
    for r in 0..d {
        for c in 0..d {
            g[(d + r, d + c)] = u.get(r, c);
        }
    }
    Operator::from_matrix(g)
}

/// Rejects non-unitary or pairwise non-commuting controlled operations.
pub fn check_compatible(ops: &[&Operator]) -> Result<()> {
    for op in ops {
        let err = op.unitarity_error();
        if err > DEFAULT_TOL {
            return Err(Error::NotUnitary(err));
        }
    }
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            if commutator(ops[i], ops[j])?.max_abs() > DEFAULT_TOL {
                return Err(Error::NonCommuting(i, j));
            }
        }
    }
    Ok(())
}

/// The register state a Moussa run starts from, before the ancilla pulse.
#[derive(Debug, Clone)]
pub enum Preparation {
    /// Ancilla in `|0⟩`, system pair in the given 4-dim state.
    System(DensityMatrix),
    /// A full register state (for example thermal equilibrium).
    Register(DensityMatrix),
}

impl Preparation {
    pub fn initial_register(&self) -> Operator {
        match self {
            Preparation::System(sys) => kron(&Operator::basis_projector(2, 0).unwrap(), sys.op()),
            Preparation::Register(rho) => rho.op().clone(),
        }
    }

    pub fn system_dim(&self) -> usize {
        match self {
            Preparation::System(sys) => sys.dim(),
            Preparation::Register(rho) => rho.dim() / 2,
        }
    }

    /// System operator `M` whose trace against `Π ops` the ideal protocol
    /// reads out, normalized to unit trace. For `System(ρ)` this is `ρ`.
    pub fn effective_system(&self) -> Result<Operator> {
        match self {
            Preparation::System(sys) => Ok(sys.op().clone()),
            Preparation::Register(_) => {
                let prepared = ancilla_pulse(&self.initial_register(), 1.0)?;
                let block = coherence_block(&prepared);
                let tr = block.trace();
                if tr.norm() <= REFERENCE_THRESHOLD * prepared.frobenius_norm().max(f64::MIN_POSITIVE) {
                    return Err(Error::DegenerateReference { signal: tr.norm(), threshold: REFERENCE_THRESHOLD });
                }
                Ok(block.scale(tr.inv()))
            }
        }
    }
}

/// `(κ·π/2)_y` on the ancilla.
fn ancilla_pulse(rho: &Operator, kappa: f64) -> Result<Operator> {
    let u = rotation_operator(&[1], kappa * FRAC_PI_2, FRAC_PI_2, rho.n_qubits())?;
    Ok(&(&u * rho) * &u.adjoint())
}

/// The `⟨1|ρ|0⟩` block on the system, i.e. the ancilla coherence.
fn coherence_block(rho: &Operator) -> Operator {
    let d = rho.dim() / 2;
    let mut b = Operator::zeros(d).into_matrix();
    for r in 0..d {
        for c in 0..d {
            b[(r, c)] = rho.get(d + r, c);
        }
    }
    Operator::from_matrix(b).expect("half dimension")
}

/// `Tr(ρ (σx + iσy) ⊗ 𝟙) = 2 Tr⟨1|ρ|0⟩`.
fn ancilla_readout(rho: &Operator) -> C64 {
    coherence_block(rho).trace() * 2.0
}

/// Per-run imperfections: block duration for the controlled gates and an
/// RF amplitude factor.
#[derive(Debug, Clone, Copy)]
struct RunNoise<'a> {
    params: &'a NoiseParams,
    block_duration: f64,
    kappa: f64,
}

fn signal(prep: &Operator, ops: &[&Operator], noise: Option<RunNoise<'_>>) -> Result<C64> {
    let kappa = noise.map_or(1.0, |n| n.kappa);
    let mut rho = ancilla_pulse(prep, kappa)?;
    let gate_time = if ops.is_empty() { 0.0 } else { noise.map_or(0.0, |n| n.block_duration / ops.len() as f64) };
    for op in ops {
        let gate = scaled_controlled_gate(op, kappa)?;
        if gate.dim() != rho.dim() {
            return Err(Error::DimMismatch(gate.dim(), rho.dim()));
        }
        // half the gate's idle channels before it, half after
        if let Some(n) = noise {
            rho = n.params.idle(&rho, gate_time / 2.0)?;
        }
        rho = &(&gate * &rho) * &gate.adjoint();
        if let Some(n) = noise {
            rho = n.params.idle(&rho, gate_time / 2.0)?;
        }
    }
    Ok(ancilla_readout(&rho))
}

/// Complex ancilla signal for a system state and a list of compatible
/// controlled operations applied in order. An empty list is the reference.
pub fn run_moussa(sys: &DensityMatrix, ops: &[&Operator]) -> Result<C64> {
    check_compatible(ops)?;
    signal(&Preparation::System(sys.clone()).initial_register(), ops, None)
}

/// As [`run_moussa`] but from an arbitrary register preparation.
pub fn run_moussa_prepared(prep: &Preparation, ops: &[&Operator]) -> Result<C64> {
    check_compatible(ops)?;
    signal(&prep.initial_register(), ops, None)
}

fn normalize(sig: f64, reference: f64, scale: f64) -> Result<f64> {
    let threshold = REFERENCE_THRESHOLD * scale;
    if reference.abs() <= threshold {
        return Err(Error::DegenerateReference { signal: reference, threshold });
    }
    Ok(sig / reference)
}

/// `Re(signal) / Re(reference)`: the joint expectation of the listed
/// observables, independent of polarization scale.
pub fn normalized_expectation(sys: &DensityMatrix, ops: &[&Operator]) -> Result<f64> {
    normalized_expectation_prepared(&Preparation::System(sys.clone()), ops)
}

pub fn normalized_expectation_prepared(prep: &Preparation, ops: &[&Operator]) -> Result<f64> {
    check_compatible(ops)?;
    let init = prep.initial_register();
    let s = signal(&init, ops, None)?;
    let r = signal(&init, &[], None)?;
    normalize(s.re, r.re, deviation_scale(&init))
}

/// Joint expectation with imperfections. Controlled gates share
/// `block_duration` evenly, with idle channels split around each gate; the
/// signal and a gate-free reference are each averaged over the RF scale
/// samples before normalizing.
pub fn normalized_expectation_noisy(
    prep: &Preparation,
    ops: &[&Operator],
    params: &NoiseParams,
    block_duration: f64,
) -> Result<f64> {
    params.validate()?;
    check_compatible(ops)?;
    let init = prep.initial_register();
    let (mut s, mut r) = (0.0, 0.0);
    for &kappa in &params.rf_scale_samples {
        let noise = RunNoise { params, block_duration, kappa };
        s += signal(&init, ops, Some(noise))?.re;
        r += signal(&init, &[], Some(RunNoise { block_duration: 0.0, ..noise }))?.re;
    }
    normalize(s, r, deviation_scale(&init))
}

/// Joint expectation `⟨X₁X₂X₃⟩` of three compatible observables.
pub fn run_moussa_triple(sys: &DensityMatrix, ops: [&Operator; 3]) -> Result<f64> {
    normalized_expectation(sys, &ops)
}

fn deviation_scale(rho: &Operator) -> f64 {
    let d = rho.dim();
    (rho - &Operator::identity(d).scale_real(1.0 / d as f64)).frobenius_norm()
}

/// One configured Moussa measurement.
#[derive(Debug, Clone)]
pub struct MoussaExperiment {
    pub preparation: Preparation,
    pub controlled_ops: Vec<Operator>,
}

impl MoussaExperiment {
    pub fn new(preparation: Preparation, controlled_ops: Vec<Operator>) -> Result<Self> {
        let refs: Vec<&Operator> = controlled_ops.iter().collect();
        check_compatible(&refs)?;
        if let Some(op) = controlled_ops.iter().find(|op| op.dim() != preparation.system_dim()) {
            return Err(Error::DimMismatch(op.dim(), preparation.system_dim()));
        }
        Ok(Self { preparation, controlled_ops })
    }

    pub fn readout(&self) -> Result<C64> {
        let refs: Vec<&Operator> = self.controlled_ops.iter().collect();
        run_moussa_prepared(&self.preparation, &refs)
    }

    pub fn normalized(&self) -> Result<f64> {
        let refs: Vec<&Operator> = self.controlled_ops.iter().collect();
        normalized_expectation_prepared(&self.preparation, &refs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{identity2, sigma_x, trace_product};
    use crate::pseudospin::{make_observables, make_peres_mermin};
    use crate::random::{random_commuting_observables, random_density};
    use crate::state::{thermal_state, PurityFactor, SpinSystemConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn controlled_gate_examples() {
        assert_eq!(controlled_gate(&Operator::identity(4)).unwrap(), Operator::identity(8));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = crate::random::random_unitary(&mut rng, 4);
        assert!(controlled_gate(&u).unwrap().is_unitary(1e-12));
        // |100⟩ ↦ |110⟩ under controlled-(σx ⊗ 𝟙)
        let g = controlled_gate(&kron(&sigma_x(), &identity2())).unwrap();
        for row in 0..8 {
            let want = if row == 0b110 { 1.0 } else { 0.0 };
            assert_eq!(g.get(row, 0b100), C64::new(want, 0.0));
        }
        assert!(matches!(controlled_gate(&Operator::from_diagonal(&[1.0, 2.0]).unwrap()), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn run_moussa_examples() {
        let o = make_observables(0.0, 0.0);
        let s00 = DensityMatrix::basis(2, 0).unwrap();
        let sig = run_moussa(&s00, &[&o.a, &o.b]).unwrap();
        assert!((sig - C64::new(1.0, 0.0)).norm() < 1e-14);
        let mixed = DensityMatrix::maximally_mixed(2);
        for k in 0..9 {
            let o = make_observables(0.0, -PI + k as f64 * PI / 4.0);
            assert!(run_moussa(&mixed, &[&o.c, &o.d]).unwrap().norm() < 1e-14);
        }
        assert!((run_moussa(&s00, &[]).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_incompatible_ops() {
        let o = make_observables(0.3, 0.4);
        let s = DensityMatrix::basis(2, 0).unwrap();
        assert!(matches!(run_moussa(&s, &[&o.a, &o.c]), Err(Error::NonCommuting(0, 1))));
    }

    #[test]
    fn normalized_expectation_examples() {
        let o = make_observables(3.0 * PI / 4.0, 0.0);
        let s01 = DensityMatrix::basis(2, 1).unwrap();
        let v = normalized_expectation(&s01, &[&o.b, &o.c]).unwrap();
        assert!((v - (3.0 * PI / 4.0).sin()).abs() < 1e-12);
        assert!((v - 2f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn dephasing_contracts_the_result() {
        let o = make_observables(-PI / 4.0, 0.0);
        let prep = Preparation::System(DensityMatrix::basis(2, 0).unwrap());
        let ideal = normalized_expectation_prepared(&prep, &[&o.a, &o.b]).unwrap();
        let mut noise = NoiseParams::noiseless();
        noise.t2_star = 0.8;
        let noisy = normalized_expectation_noisy(&prep, &[&o.a, &o.b], &noise, 0.023).unwrap();
        assert!(noisy.abs() < ideal.abs());
        let same = normalized_expectation_noisy(&prep, &[&o.a, &o.b], &NoiseParams::noiseless(), 0.023).unwrap();
        assert!((same - ideal).abs() < 1e-12);
    }

    #[test]
    fn ancilla_dephasing_scales_signal_exactly() {
        // dephasing only the ancilla before readout multiplies the signal by exp(−t/T2)
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sys = random_density(&mut rng, 2);
        let ops = random_commuting_observables(&mut rng, 4, 2);
        let prep = Preparation::System(sys.clone());
        let mut rho = ancilla_pulse(&prep.initial_register(), 1.0).unwrap();
        for op in &ops {
            let g = controlled_gate(op).unwrap();
            rho = &(&g * &rho) * &g.adjoint();
        }
        let before = ancilla_readout(&rho);
        let damped = crate::noise::apply_phase_damp(&rho, 0.1, 0.8, 1).unwrap();
        let after = ancilla_readout(&damped);
        assert!((after - before * (-0.1f64 / 0.8).exp()).norm() < 1e-14);
    }

    #[test]
    fn oracle_equivalence_and_order_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..100 {
            let sys = random_density(&mut rng, 2);
            let ops = random_commuting_observables(&mut rng, 4, 2 + trial % 2);
            let refs: Vec<&Operator> = ops.iter().collect();
            let direct = trace_product(sys.op(), &Operator::product(refs.iter().copied()).unwrap()).unwrap().re;
            let measured = normalized_expectation(&sys, &refs).unwrap();
            assert!((measured - direct).abs() <= 1e-10);
            let reversed: Vec<&Operator> = refs.iter().rev().copied().collect();
            let a = run_moussa(&sys, &refs).unwrap();
            let b = run_moussa(&sys, &reversed).unwrap();
            assert!((a - b).norm() <= 1e-12);
            assert!(a.norm() <= run_moussa(&sys, &[]).unwrap().norm() + 1e-12);
        }
    }

    #[test]
    fn triple_rows_and_columns() {
        let pm = make_peres_mermin();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for sys in [DensityMatrix::maximally_mixed(2), random_density(&mut rng, 2)] {
            assert!((run_moussa_triple(&sys, pm.row(0)).unwrap() - 1.0).abs() < 1e-12);
            assert!((run_moussa_triple(&sys, pm.column(2)).unwrap() + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn thermal_register_preparation() {
        let rho = thermal_state(&SpinSystemConfig::placeholder(), PurityFactor::DEFAULT).unwrap();
        let prep = Preparation::Register(rho);
        let eff = prep.effective_system().unwrap();
        assert!(eff.max_abs_diff(&Operator::identity(4).scale_real(0.25)) < 1e-10);
        let o = make_observables(0.7, -0.2);
        let v = normalized_expectation_prepared(&prep, &[&o.a, &o.b]).unwrap();
        assert!(v.abs() < 1e-9);
        let pm = make_peres_mermin();
        let v = normalized_expectation_prepared(&prep, &pm.row(1)).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_reference_is_an_error() {
        let prep = Preparation::Register(DensityMatrix::maximally_mixed(3));
        let pm = make_peres_mermin();
        assert!(matches!(
            normalized_expectation_prepared(&prep, &pm.row(0)),
            Err(Error::DegenerateReference { .. })
        ));
    }

    #[test]
    fn experiment_struct() {
        let o = make_observables(0.0, 0.0);
        let exp = MoussaExperiment::new(
            Preparation::System(DensityMatrix::basis(2, 0).unwrap()),
            vec![o.a.clone(), o.b.clone()],
        )
        .unwrap();
        assert!((exp.normalized().unwrap() - 1.0).abs() < 1e-12);
        assert!(MoussaExperiment::new(Preparation::System(DensityMatrix::basis(2, 0).unwrap()), vec![o.a, o.c]).is_err());
    }
}
