//! State-dependent and state-independent noncontextuality tests.
//!
//! `I = ⟨AB⟩ + ⟨BC⟩ + ⟨CD⟩ − ⟨AD⟩` is evaluated either by direct traces or
//! through the simulated ancilla protocol, swept over `(β, η)` grids, and
//! compared with the classical bounds obtained by enumerating every `±1`
//! assignment.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moussa::{normalized_expectation_noisy, normalized_expectation_prepared, Preparation};
use crate::noise::NoiseParams;
use crate::operator::{trace_product, Operator};
use crate::pseudospin::{make_observables, make_peres_mermin};
use crate::state::{level_state, qho_to_zeeman, DensityMatrix};

/// Quantum maximum of `I` for these observables.
pub const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;
pub const CHSH_CLASSICAL_BOUND: f64 = 2.0;
pub const STATE_INDEPENDENT_CLASSICAL_BOUND: f64 = 4.0;
pub const STATE_INDEPENDENT_QUANTUM_VALUE: f64 = 6.0;

/// Values within this of the maximum count as ties for the argmax.
const ARGMAX_TIE_TOL: f64 = 1e-12;

/// Evaluation path for joint expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Via {
    /// `Tr(ρ · X₁X₂…)`.
    Direct,
    /// Simulated ancilla protocol.
    Moussa,
}

impl FromStr for Via {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Via::Direct),
            "moussa" => Ok(Via::Moussa),
            other => Err(Error::Config(format!("unknown evaluation path '{other}' (direct|moussa)"))),
        }
    }
}

impl fmt::Display for Via {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Via::Direct => "direct",
            Via::Moussa => "moussa",
        })
    }
}

/// How joint expectations are obtained.
#[derive(Debug, Clone, Copy)]
pub enum Evaluator<'a> {
    Direct,
    Moussa,
    /// Ancilla protocol with imperfections.
    Noisy(&'a NoiseParams),
}

impl<'a> Evaluator<'a> {
    pub fn new(via: Via, noise: Option<&'a NoiseParams>) -> Result<Self> {
        match (via, noise) {
            (Via::Direct, None) => Ok(Evaluator::Direct),
            (Via::Moussa, None) => Ok(Evaluator::Moussa),
            (Via::Moussa, Some(n)) => Ok(Evaluator::Noisy(n)),
            (Via::Direct, Some(_)) => Err(Error::Config("noise is only simulated on the moussa path".into())),
        }
    }

    /// Joint expectation of mutually compatible observables.
    pub fn joint(&self, prep: &Preparation, ops: &[&Operator]) -> Result<f64> {
        match self {
            Evaluator::Direct => {
                let product = Operator::product(ops.iter().copied())
                    .unwrap_or_else(|| Operator::identity(prep.system_dim()));
                Ok(trace_product(&prep.effective_system()?, &product)?.re)
            }
            Evaluator::Moussa => normalized_expectation_prepared(prep, ops),
            Evaluator::Noisy(params) => {
                normalized_expectation_noisy(prep, ops, params, params.block_duration(ops.len()))
            }
        }
    }
}

fn check_system(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 4 {
        return Err(Error::DimMismatch(rho.dim(), 4));
    }
    Ok(())
}

/// `I(β, η)` for a two-qubit system state.
pub fn chsh_value(rho: &DensityMatrix, beta: f64, eta: f64, via: Via) -> Result<f64> {
    check_system(rho)?;
    chsh_value_with(&Preparation::System(rho.clone()), beta, eta, Evaluator::new(via, None)?)
}

/// `I(β, η)` through the imperfect ancilla protocol.
pub fn chsh_value_noisy(rho: &DensityMatrix, beta: f64, eta: f64, noise: &NoiseParams) -> Result<f64> {
    check_system(rho)?;
    chsh_value_with(&Preparation::System(rho.clone()), beta, eta, Evaluator::Noisy(noise))
}

pub fn chsh_value_with(prep: &Preparation, beta: f64, eta: f64, eval: Evaluator<'_>) -> Result<f64> {
    let obs = make_observables(beta, eta);
    obs.chsh_terms()
        .iter()
        .try_fold(0.0, |acc, (_, pair, sign)| Ok(acc + sign * eval.joint(prep, pair)?))
}

/// Closed form of `I_l(β, η)` on the Zeeman state `|mn⟩` encoding level `l`:
/// `(−1)ⁿ(cos β − cos η) − (−1)^{m+n}(sin β + sin η)`.
pub fn chsh_closed_form(l: usize, beta: f64, eta: f64) -> Result<f64> {
    let k = qho_to_zeeman(l)?;
    let (m, n) = ((k >> 1) & 1, k & 1);
    let sign_n = if n == 0 { 1.0 } else { -1.0 };
    let sign_mn = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign_n * (beta.cos() - eta.cos()) - sign_mn * (beta.sin() + eta.sin()))
}

/// Inclusive arithmetic grid `start, start+step, …, stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        let g = Self { start, stop, step };
        g.validate()?;
        Ok(g)
    }

    /// `[−π, π]` in steps of `π/4`.
    pub fn standard() -> Self {
        Self { start: -PI, stop: PI, step: PI / 4.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(Error::Config("grid bounds must be finite".into()));
        }
        if !(self.step > 0.0) {
            return Err(Error::Config(format!("grid step must be > 0, got {}", self.step)));
        }
        if !(self.stop > self.start) {
            return Err(Error::Config(format!("empty grid range {}:{}", self.start, self.stop)));
        }
        if self.len() < 2 {
            return Err(Error::Config("grid needs at least two points".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        let span = (self.stop - self.start) / self.step;
        (span + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.start + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub beta: f64,
    pub eta: f64,
    pub value: f64,
}

/// `I_l` over a square `(β, η)` grid, `β` varying slowest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub l: usize,
    pub grid: GridSpec,
    pub via: Via,
    pub points: Vec<SweepPoint>,
    pub max_value: f64,
    pub argmax: (f64, f64),
    pub min_value: f64,
    pub noise: Option<NoiseParams>,
}

/// Evaluates `I_l` on every grid cell in parallel; cells are merged in
/// row-major order so the result does not depend on scheduling.
pub fn chsh_sweep(l: usize, grid: &GridSpec, via: Via, noise: Option<&NoiseParams>) -> Result<SweepResult> {
    grid.validate()?;
    let eval = Evaluator::new(via, noise)?;
    if let Some(n) = noise {
        n.validate()?;
    }
    let prep = Preparation::System(level_state(l)?);
    let axis = grid.points();
    let cells: Vec<(f64, f64)> = axis.iter().flat_map(|&b| axis.iter().map(move |&e| (b, e))).collect();
    let points = cells
        .par_iter()
        .map(|&(beta, eta)| Ok(SweepPoint { beta, eta, value: chsh_value_with(&prep, beta, eta, eval)? }))
        .collect::<Result<Vec<_>>>()?;
    let max_value = points.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
    let min_value = points.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
    let best = points
        .iter()
        .filter(|p| p.value >= max_value - ARGMAX_TIE_TOL)
        .min_by(|a, b| a.beta.total_cmp(&b.beta).then(a.eta.total_cmp(&b.eta)))
        .expect("non-empty grid");
    Ok(SweepResult {
        l,
        grid: *grid,
        via,
        argmax: (best.beta, best.eta),
        points,
        max_value,
        min_value,
        noise: noise.cloned(),
    })
}

/// Angles at which `I_l` reaches `2√2`.
pub fn optimal_angles(l: usize) -> Result<(f64, f64)> {
    Ok(match qho_to_zeeman(l)? {
        0 => (-PI / 4.0, -3.0 * PI / 4.0),
        1 => (3.0 * PI / 4.0, PI / 4.0),
        2 => (PI / 4.0, 3.0 * PI / 4.0),
        _ => (-3.0 * PI / 4.0, -PI / 4.0),
    })
}

/// Classical maximum of an inequality over all `±1` assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NchvBoundReport {
    pub expression: String,
    pub variables: Vec<String>,
    pub n_variables: usize,
    pub enumerated: usize,
    pub classical_max: i32,
    pub classical_min: i32,
    /// Every assignment reaching the maximum, as `±1` vectors.
    pub maximizing_assignments: Vec<Vec<i8>>,
}

fn enumerate_bound(
    expression: &str,
    variables: &[&str],
    value: impl Fn(&[i8]) -> i32,
) -> NchvBoundReport {
    let n = variables.len();
    let assignments: Vec<Vec<i8>> = (0u32..1 << n)
        .map(|bits| (0..n).map(|k| if (bits >> (n - 1 - k)) & 1 == 1 { -1 } else { 1 }).collect())
        .collect();
    let values: Vec<i32> = assignments.iter().map(|a| value(a)).collect();
    let classical_max = *values.iter().max().expect("non-empty");
    let classical_min = *values.iter().min().expect("non-empty");
    NchvBoundReport {
        expression: expression.to_string(),
        variables: variables.iter().map(|v| v.to_string()).collect(),
        n_variables: n,
        enumerated: assignments.len(),
        classical_max,
        classical_min,
        maximizing_assignments: assignments
            .into_iter()
            .zip(&values)
            .filter(|(_, &v)| v == classical_max)
            .map(|(a, _)| a)
            .collect(),
    }
}

/// `ab + bc + cd − ad` over `{±1}⁴`.
pub fn nchv_bound_chsh() -> NchvBoundReport {
    enumerate_bound("AB + BC + CD - AD", &["A", "B", "C", "D"], |v| {
        let (a, b, c, d) = (v[0] as i32, v[1] as i32, v[2] as i32, v[3] as i32);
        a * b + b * c + c * d - a * d
    })
}

/// Rows plus first two columns minus third column of a `±1` 3×3 square.
pub fn nchv_bound_state_independent() -> NchvBoundReport {
    let names = ["P11", "P12", "P13", "P21", "P22", "P23", "P31", "P32", "P33"];
    enumerate_bound(
        "P11P12P13 + P21P22P23 + P31P32P33 + P11P21P31 + P12P22P32 - P13P23P33",
        &names,
        |v| {
            let p = |r: usize, c: usize| v[3 * r + c] as i32;
            let row = |r: usize| p(r, 0) * p(r, 1) * p(r, 2);
            let col = |c: usize| p(0, c) * p(1, c) * p(2, c);
            row(0) + row(1) + row(2) + col(0) + col(1) - col(2)
        },
    )
}

/// One signed term of the state-independent expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermValue {
    pub term: String,
    pub sign: f64,
    pub expectation: f64,
    pub contribution: f64,
}

pub fn state_independent_terms(prep: &Preparation, eval: Evaluator<'_>) -> Result<Vec<TermValue>> {
    if prep.system_dim() != 4 {
        return Err(Error::DimMismatch(prep.system_dim(), 4));
    }
    let pm = make_peres_mermin();
    pm.context_triples()
        .iter()
        .map(|(name, ops, sign)| {
            let expectation = eval.joint(prep, ops)?;
            Ok(TermValue { term: name.clone(), sign: *sign, expectation, contribution: sign * expectation })
        })
        .collect()
}

/// Left-hand side of the state-independent inequality for a system state.
pub fn state_independent_value(rho: &DensityMatrix, via: Via) -> Result<f64> {
    check_system(rho)?;
    let terms = state_independent_terms(&Preparation::System(rho.clone()), Evaluator::new(via, None)?)?;
    Ok(terms.iter().map(|t| t.contribution).sum())
}

/// State-independent total through the imperfect ancilla protocol.
pub fn state_independent_value_noisy(prep: &Preparation, noise: &NoiseParams) -> Result<f64> {
    noise.validate()?;
    let terms = state_independent_terms(prep, Evaluator::Noisy(noise))?;
    Ok(terms.iter().map(|t| t.contribution).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_pure};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chsh_value_examples() {
        let s00 = DensityMatrix::basis(2, 0).unwrap();
        let v = chsh_value(&s00, -PI / 4.0, -3.0 * PI / 4.0, Via::Direct).unwrap();
        assert!((v - TSIRELSON).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(2);
        for via in [Via::Direct, Via::Moussa] {
            assert!(chsh_value(&mixed, 0.37, -1.9, via).unwrap().abs() < 1e-12);
        }
        let s01 = DensityMatrix::basis(2, 1).unwrap();
        let v = chsh_value(&s01, 3.0 * PI / 4.0, PI / 4.0, Via::Moussa).unwrap();
        assert!((v - TSIRELSON).abs() < 1e-12);
    }

    #[test]
    fn closed_form_examples() {
        assert!((chsh_closed_form(0, -PI / 4.0, -3.0 * PI / 4.0).unwrap() - TSIRELSON).abs() < 1e-12);
        assert!(chsh_closed_form(0, 0.0, 0.0).unwrap().abs() < 1e-15);
        assert!((chsh_closed_form(2, PI / 4.0, 3.0 * PI / 4.0).unwrap() - TSIRELSON).abs() < 1e-12);
        assert!(chsh_closed_form(4, 0.0, 0.0).is_err());
    }

    #[test]
    fn three_routes_agree_on_grid() {
        let axis = GridSpec::new(-PI, PI, PI / 4.0).unwrap().points();
        for l in 0..4 {
            let rho = level_state(l).unwrap();
            for &b in &axis {
                for &e in &axis {
                    let cf = chsh_closed_form(l, b, e).unwrap();
                    let d = chsh_value(&rho, b, e, Via::Direct).unwrap();
                    let m = chsh_value(&rho, b, e, Via::Moussa).unwrap();
                    assert!((cf - d).abs() <= 1e-10 && (cf - m).abs() <= 1e-10, "l={l} b={b} e={e}");
                }
            }
        }
    }

    #[test]
    fn complementary_states_relation() {
        // flipping both bits negates the cosine part and keeps the sine part
        let axis = GridSpec::new(-PI, PI, PI / 8.0).unwrap().points();
        for l in 0..4 {
            let n = (l & 1) as i32;
            for &b in &axis {
                for &e in &axis {
                    let direct = |k: usize| chsh_value(&level_state(k).unwrap(), b, e, Via::Direct).unwrap();
                    let diff = direct(l) - direct(3 - l);
                    let sum = direct(l) + direct(3 - l);
                    let m = ((l >> 1) & 1) as i32;
                    assert!((diff - 2.0 * (-1f64).powi(n) * (b.cos() - e.cos())).abs() < 1e-12);
                    assert!((sum + 2.0 * (-1f64).powi(m + n) * (b.sin() + e.sin())).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sweep_maxima_and_minima() {
        for l in 0..4 {
            let s = chsh_sweep(l, &GridSpec::standard(), Via::Direct, None).unwrap();
            assert_eq!(s.points.len(), 81);
            assert!((s.max_value - TSIRELSON).abs() < 1e-9);
            assert!((s.min_value + TSIRELSON).abs() < 1e-9);
            let (b, e) = optimal_angles(l).unwrap();
            assert!((s.argmax.0 - b).abs() < 1e-12 && (s.argmax.1 - e).abs() < 1e-12);
            assert!(s.points.iter().all(|p| p.value.abs() <= TSIRELSON + 1e-10));
        }
    }

    #[test]
    fn argmax_ties_pick_lowest_angles() {
        // l = 0 on a grid with two maxima separated by 2π in β
        let g = GridSpec::new(-PI / 4.0, 7.0 * PI / 4.0, PI / 4.0).unwrap();
        let s = chsh_sweep(0, &g, Via::Direct, None).unwrap();
        assert!((s.argmax.0 + PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0.0, 0.0, 0.1).is_err());
        assert!(GridSpec::new(1.0, 0.0, 0.1).is_err());
        assert!(GridSpec::new(0.0, 1.0, 0.0).is_err());
        assert!(GridSpec::new(0.0, 1.0, 2.0).is_err());
        assert_eq!(GridSpec::standard().len(), 9);
        let pts = GridSpec::standard().points();
        assert!((pts[8] - PI).abs() < 1e-15);
    }

    #[test]
    fn chsh_bound_enumeration() {
        let r = nchv_bound_chsh();
        assert_eq!(r.enumerated, 16);
        assert_eq!(r.classical_max, 2);
        assert_eq!(r.classical_min, -2);
        assert_eq!(r.maximizing_assignments.len(), 8);
    }

    #[test]
    fn state_independent_bound_enumeration() {
        let r = nchv_bound_state_independent();
        assert_eq!(r.enumerated, 512);
        assert_eq!(r.classical_max, 4);
        assert!(STATE_INDEPENDENT_QUANTUM_VALUE > r.classical_max as f64);
    }

    #[test]
    fn no_assignment_reproduces_operator_signs() {
        let r = enumerate_bound("", &["a"; 9], |v| {
            let p = |r: usize, c: usize| v[3 * r + c] as i32;
            let rows_ok = (0..3).all(|r| p(r, 0) * p(r, 1) * p(r, 2) == 1);
            let cols_ok = (0..2).all(|c| p(0, c) * p(1, c) * p(2, c) == 1) && p(0, 2) * p(1, 2) * p(2, 2) == -1;
            (rows_ok && cols_ok) as i32
        });
        assert_eq!(r.classical_max, 0);
    }

    #[test]
    fn state_independent_value_is_six() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut values = vec![state_independent_value(&DensityMatrix::maximally_mixed(2), Via::Direct).unwrap()];
        for _ in 0..25 {
            values.push(state_independent_value(&random_density(&mut rng, 2), Via::Direct).unwrap());
            values.push(state_independent_value(&random_pure(&mut rng, 2), Via::Moussa).unwrap());
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((lo - 6.0).abs() < 1e-10 && hi - lo < 1e-10);
    }

    #[test]
    fn state_independent_terms_signs() {
        let terms = state_independent_terms(&Preparation::System(DensityMatrix::maximally_mixed(2)), Evaluator::Moussa).unwrap();
        for t in &terms[..5] {
            assert!((t.expectation - 1.0).abs() < 1e-12);
        }
        assert!((terms[5].expectation + 1.0).abs() < 1e-12);
        assert_eq!(terms[5].sign, -1.0);
    }

    #[test]
    fn direct_with_noise_is_rejected() {
        assert!(Evaluator::new(Via::Direct, Some(&NoiseParams::experiment_defaults())).is_err());
    }

    #[test]
    fn noisy_values_inside_open_intervals() {
        let noise = NoiseParams::experiment_defaults();
        for l in 0..4 {
            let m = crate::noise::noisy_chsh_max(l, &noise).unwrap();
            eprintln!("l={l} noisy max {m}");
            assert!(m > CHSH_CLASSICAL_BOUND && m < TSIRELSON);
        }
        let cfg = crate::state::SpinSystemConfig::placeholder();
        let thermal = crate::state::thermal_state(&cfg, crate::state::PurityFactor::DEFAULT).unwrap();
        let total = state_independent_value_noisy(&Preparation::Register(thermal), &noise).unwrap();
        eprintln!("state-independent noisy total {total}");
        assert!(total > STATE_INDEPENDENT_CLASSICAL_BOUND && total < STATE_INDEPENDENT_QUANTUM_VALUE);
    }

    #[test]
    fn noiseless_params_reach_ceiling() {
        let m = crate::noise::noisy_chsh_max(0, &NoiseParams::noiseless()).unwrap();
        assert!((m - TSIRELSON).abs() < 1e-9);
    }

    #[test]
    fn degradation_is_monotone() {
        let base = NoiseParams { t1: None, ..NoiseParams::experiment_defaults() };
        let mut last = f64::INFINITY;
        for d in [0.001, 0.023, 0.046, 0.092, 0.2] {
            let n = NoiseParams { gate_duration_pair: d, rf_scale_samples: vec![1.0], ..base.clone() };
            let m = crate::noise::noisy_chsh_max(0, &n).unwrap();
            assert!(m < last, "duration {d}: {m} !< {last}");
            last = m;
        }
        let mut last = f64::INFINITY;
        for dk in [0.0, 0.05, 0.1, 0.2] {
            let n = NoiseParams { rf_scale_samples: vec![1.0 - dk, 1.0 + dk], ..base.clone() };
            let m = crate::noise::noisy_chsh_max(1, &n).unwrap();
            assert!(m <= last + 1e-12, "kappa spread {dk}: {m} > {last}");
            last = m;
        }
    }
}
