//! Dense complex operators on small qubit registers.
//!
//! Everything here works on registers of at most four qubits (dimension 16),
//! so operators are stored as dense `nalgebra` matrices. Qubit 1 is the
//! leftmost Kronecker factor.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default tolerance for the structural predicates.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest supported register.
pub const MAX_QUBITS: usize = 4;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Cartesian axis of a spin operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Names a single-spin angular momentum component, e.g. `I_{2z}`.
///
/// Spin indices are 1-based to match the usual NMR labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinAxisLabel {
    pub axis: Axis,
    pub spin: usize,
}

impl SpinAxisLabel {
    pub fn new(axis: Axis, spin: usize, n_spins: usize) -> Result<Self> {
        if spin == 0 || spin > n_spins {
            return Err(Error::SpinIndex { spin, n: n_spins });
        }
        Ok(Self { axis, spin })
    }

    /// `I_{spin,axis} = σ_axis / 2` embedded in an `n`-spin register.
    pub fn operator(&self, n_spins: usize) -> Result<Operator> {
        spin_operator(self.axis, self.spin, n_spins)
    }
}

/// Dense square complex matrix whose dimension is a power of two.
#[derive(Clone, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator(dim={}) {}", self.dim(), self.m)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if !(2..=(1 << MAX_QUBITS)).contains(&dim) || !dim.is_power_of_two() {
        return Err(Error::BadDimension(dim));
    }
    Ok(())
}

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimMismatch(m.nrows(), m.ncols()));
        }
        check_dim(m.nrows())?;
        Ok(Self { m })
    }

    /// Builds an operator from row-major entries.
    pub fn from_row_slice(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimMismatch(entries.len(), dim * dim));
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// Builds an operator from real row-major entries.
    pub fn from_real_rows(dim: usize, entries: &[f64]) -> Result<Self> {
        let c: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_row_slice(dim, &c)
    }

    pub fn identity(dim: usize) -> Self {
        check_dim(dim).expect("identity dimension");
        Self { m: DMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        check_dim(dim).expect("zero operator dimension");
        Self { m: DMatrix::zeros(dim, dim) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        check_dim(diag.len())?;
        let d = nalgebra::DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Ok(Self { m: DMatrix::from_diagonal(&d) })
    }

    /// Projector `|k⟩⟨k|` onto a computational basis state.
    pub fn basis_projector(dim: usize, k: usize) -> Result<Self> {
        check_dim(dim)?;
        if k >= dim {
            return Err(Error::InvalidParameter(format!("basis index {k} >= {dim}")));
        }
        let mut m = DMatrix::zeros(dim, dim);
        m[(k, k)] = ONE;
        Ok(Self { m })
    }

    /// Outer product `|ψ⟩⟨ψ|` of a (not necessarily normalized) ket.
    pub fn outer(ket: &[C64]) -> Result<Self> {
        check_dim(ket.len())?;
        let v = nalgebra::DVector::from_column_slice(ket);
        Ok(Self { m: &v * v.adjoint() })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { m: &self.m * s }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Element-wise map, used by channels that act entry by entry.
    pub fn map_entries(&self, mut f: impl FnMut(usize, usize, C64) -> C64) -> Self {
        let dim = self.dim();
        let mut m = self.m.clone();
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = f(r, c, m[(r, c)]);
            }
        }
        Self { m }
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn unitarity_error(&self) -> f64 {
        (&self.adjoint() * self).max_abs_diff(&Operator::identity(self.dim()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// `self · other` with a dimension check.
    pub fn try_mul(&self, other: &Operator) -> Result<Operator> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch(self.dim(), other.dim()));
        }
        Ok(Operator { m: &self.m * &other.m })
    }

    /// Eigenvalues of a Hermitian operator in ascending order.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(HermitianEigen::new(self)?.values)
    }

    /// Product of a sequence of operators, left to right.
    pub fn product<'a>(ops: impl IntoIterator<Item = &'a Operator>) -> Option<Operator> {
        let mut it = ops.into_iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, op| &acc * op))
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in operator product");
        Operator { m: &self.m * &rhs.m }
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        &self * &rhs
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in operator sum");
        Operator { m: &self.m + &rhs.m }
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in operator difference");
        Operator { m: &self.m - &rhs.m }
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { m: -&self.m }
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        -&self
    }
}

/// The 2×2 Pauli matrix for `axis`.
pub fn pauli(axis: Axis) -> Operator {
    let m = match axis {
        Axis::X => DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        Axis::Y => DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        Axis::Z => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    };
    Operator { m }
}

pub fn sigma_x() -> Operator {
    pauli(Axis::X)
}

pub fn sigma_y() -> Operator {
    pauli(Axis::Y)
}

pub fn sigma_z() -> Operator {
    pauli(Axis::Z)
}

pub fn identity2() -> Operator {
    Operator::identity(2)
}

/// Kronecker product `a ⊗ b`. Panics if the result exceeds the register cap.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    let m = a.m.kronecker(&b.m);
    check_dim(m.nrows()).expect("kron result exceeds the supported register size");
    Operator { m }
}

/// Kronecker product of a list of factors, leftmost first.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a Operator>) -> Operator {
    let mut it = factors.into_iter();
    let first = it.next().expect("kron_all needs at least one factor").clone();
    it.fold(first, |acc, f| kron(&acc, f))
}

/// Places a single-qubit operator at position `spin` (1-based) of an
/// `n`-qubit register, with identities elsewhere.
pub fn embed(op: &Operator, spin: usize, n: usize) -> Result<Operator> {
    if op.dim() != 2 {
        return Err(Error::DimMismatch(op.dim(), 2));
    }
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::BadDimension(1 << n.min(8)));
    }
    if spin == 0 || spin > n {
        return Err(Error::SpinIndex { spin, n });
    }
    let id = identity2();
    let factors: Vec<&Operator> = (1..=n).map(|k| if k == spin { op } else { &id }).collect();
    Ok(kron_all(factors))
}

/// Spin angular momentum component `I_{spin,axis} = σ_axis/2` in an `n`-spin register.
pub fn spin_operator(axis: Axis, spin: usize, n: usize) -> Result<Operator> {
    embed(&pauli(axis).scale_real(0.5), spin, n)
}

/// `ab − ba`.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch(a.dim(), b.dim()));
    }
    Ok(&(a * b) - &(b * a))
}

/// `Tr(rho · op)` for a raw operator in place of a validated state.
pub fn trace_product(rho: &Operator, op: &Operator) -> Result<C64> {
    if rho.dim() != op.dim() {
        return Err(Error::DimMismatch(rho.dim(), op.dim()));
    }
    // Tr(AB) = Σ_ij A_ij B_ji
    let d = rho.dim();
    let mut acc = ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += rho.m[(i, j)] * op.m[(j, i)];
        }
    }
    Ok(acc)
}

/// Hermitian eigendecomposition `H = V diag(λ) V†` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn new(h: &Operator) -> Result<Self> {
        let scale = h.max_abs().max(1.0);
        let herr = h.hermiticity_error();
        if herr > DEFAULT_TOL * scale {
            return Err(Error::NotHermitian(herr));
        }
        // symmetrize so the solver sees an exactly Hermitian input
        let sym = (&h.m + h.m.adjoint()) * C64::new(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(h.dim(), h.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self { values, vectors })
    }

    /// `exp(−i H t)` from the stored spectrum.
    pub fn propagator(&self, t: f64) -> Operator {
        let d = self.values.len();
        let phases: Vec<C64> = self.values.iter().map(|&l| C64::from_polar(1.0, -l * t)).collect();
        let mut vd = self.vectors.clone();
        for c in 0..d {
            for r in 0..d {
                vd[(r, c)] *= phases[c];
            }
        }
        Operator { m: vd * self.vectors.adjoint() }
    }
}

/// `exp(−i h t)` for Hermitian `h`, via eigendecomposition.
pub fn expm(h: &Operator, t: f64) -> Result<Operator> {
    Ok(HermitianEigen::new(h)?.propagator(t))
}

/// Global-phase-blind gate overlap `|Tr(u†v)| / dim`.
pub fn hs_fidelity(u: &Operator, v: &Operator) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimMismatch(u.dim(), v.dim()));
    }
    Ok(trace_product(&u.adjoint(), v)?.norm() / u.dim() as f64)
}
