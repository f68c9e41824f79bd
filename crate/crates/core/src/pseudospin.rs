//! Pseudospin operators on the two-qubit encoding of the four lowest
//! oscillator levels, the dichotomic observables built from them, and the
//! 3×3 Peres–Mermin square.
//!
//! The left Kronecker factor is the first system qubit (register spin 2),
//! the right factor the second (register spin 3).

use crate::operator::{commutator, identity2, kron, sigma_x, sigma_y, sigma_z, Operator};

/// The two commuting pseudospin triples `Γ` and `Γ′`.
#[derive(Debug, Clone)]
pub struct GammaSet {
    pub gx: Operator,
    pub gy: Operator,
    pub gz: Operator,
    pub gx_p: Operator,
    pub gy_p: Operator,
    pub gz_p: Operator,
}

impl GammaSet {
    pub fn new() -> Self {
        make_gamma_set()
    }

    /// Unprimed triple `(Γx, Γy, Γz)`.
    pub fn unprimed(&self) -> [&Operator; 3] {
        [&self.gx, &self.gy, &self.gz]
    }

    /// Primed triple `(Γx′, Γy′, Γz′)`.
    pub fn primed(&self) -> [&Operator; 3] {
        [&self.gx_p, &self.gy_p, &self.gz_p]
    }

    /// All six operators with their conventional names.
    pub fn named(&self) -> [(&'static str, &Operator); 6] {
        [
            ("Gx", &self.gx),
            ("Gy", &self.gy),
            ("Gz", &self.gz),
            ("Gx'", &self.gx_p),
            ("Gy'", &self.gy_p),
            ("Gz'", &self.gz_p),
        ]
    }
}

impl Default for GammaSet {
    fn default() -> Self {
        make_gamma_set()
    }
}

pub fn make_gamma_set() -> GammaSet {
    let (x, y, z, id) = (sigma_x(), sigma_y(), sigma_z(), identity2());
    GammaSet {
        gx: kron(&x, &id),
        gy: kron(&z, &y),
        gz: -kron(&y, &y),
        gx_p: kron(&x, &z),
        gy_p: kron(&id, &y),
        gz_p: -kron(&x, &x),
    }
}

/// The four observables `A, B(β), C, D(η)` of the state-dependent test.
#[derive(Debug, Clone)]
pub struct ObservableSet {
    pub beta: f64,
    pub eta: f64,
    pub a: Operator,
    pub b: Operator,
    pub c: Operator,
    pub d: Operator,
}

/// `Γx′ cos θ + Γz′ sin θ = σx ⊗ (σz cos θ − σx sin θ)`.
pub fn rotated_primed(theta: f64) -> Operator {
    let g = make_gamma_set();
    &g.gx_p.scale_real(theta.cos()) + &g.gz_p.scale_real(theta.sin())
}

pub fn make_observables(beta: f64, eta: f64) -> ObservableSet {
    let g = make_gamma_set();
    ObservableSet {
        beta,
        eta,
        a: g.gx,
        b: rotated_primed(beta),
        c: g.gz,
        d: rotated_primed(eta),
    }
}

/// Products of the four compatible pairs.
#[derive(Debug, Clone)]
pub struct PairProducts {
    pub ab: Operator,
    pub bc: Operator,
    pub cd: Operator,
    pub da: Operator,
}

pub fn product_operators(obs: &ObservableSet) -> PairProducts {
    PairProducts {
        ab: &obs.a * &obs.b,
        bc: &obs.b * &obs.c,
        cd: &obs.c * &obs.d,
        da: &obs.d * &obs.a,
    }
}

impl ObservableSet {
    pub fn all(&self) -> [&Operator; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    /// The compatible pairs in the order they enter `⟨AB⟩+⟨BC⟩+⟨CD⟩−⟨AD⟩`,
    /// with the sign of each term.
    pub fn chsh_terms(&self) -> [(&'static str, [&Operator; 2], f64); 4] {
        [
            ("AB", [&self.a, &self.b], 1.0),
            ("BC", [&self.b, &self.c], 1.0),
            ("CD", [&self.c, &self.d], 1.0),
            ("AD", [&self.a, &self.d], -1.0),
        ]
    }
}

/// The 3×3 square `P` of pseudospin observables.
///
/// Indices are zero-based: `p[0][0]` is `P₁₁`.
#[derive(Debug, Clone)]
pub struct PeresMerminMatrix {
    pub p: [[Operator; 3]; 3],
}

pub fn make_peres_mermin() -> PeresMerminMatrix {
    let g = make_gamma_set();
    let p = [
        [g.gz.clone(), g.gz_p.clone(), &g.gz * &g.gz_p],
        [g.gx_p.clone(), g.gx.clone(), &g.gx * &g.gx_p],
        [&g.gz * &g.gx_p, &g.gx * &g.gz_p, &g.gy * &g.gy_p],
    ];
    PeresMerminMatrix { p }
}

impl PeresMerminMatrix {
    pub fn entry(&self, row: usize, col: usize) -> &Operator {
        &self.p[row][col]
    }

    pub fn row(&self, row: usize) -> [&Operator; 3] {
        [&self.p[row][0], &self.p[row][1], &self.p[row][2]]
    }

    pub fn column(&self, col: usize) -> [&Operator; 3] {
        [&self.p[0][col], &self.p[1][col], &self.p[2][col]]
    }

    pub fn row_product(&self, row: usize) -> Operator {
        let [a, b, c] = self.row(row);
        &(a * b) * c
    }

    pub fn column_product(&self, col: usize) -> Operator {
        let [a, b, c] = self.column(col);
        &(a * b) * c
    }

    /// The six triples of the state-independent expression, in order:
    /// three rows, then three columns. The last carries sign −1.
    pub fn context_triples(&self) -> [(String, [&Operator; 3], f64); 6] {
        [
            ("P11P12P13".to_string(), self.row(0), 1.0),
            ("P21P22P23".to_string(), self.row(1), 1.0),
            ("P31P32P33".to_string(), self.row(2), 1.0),
            ("P11P21P31".to_string(), self.column(0), 1.0),
            ("P12P22P32".to_string(), self.column(1), 1.0),
            ("P13P23P33".to_string(), self.column(2), -1.0),
        ]
    }
}

/// `true` when every pair in `ops` commutes within `tol`.
pub fn mutually_commuting(ops: &[&Operator], tol: f64) -> bool {
    for (i, a) in ops.iter().enumerate() {
        for b in &ops[i + 1..] {
            match commutator(a, b) {
                Ok(c) if c.max_abs() <= tol => {}
                _ => return false,
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::C64;
    use std::f64::consts::PI;

    const TOL: f64 = 1e-12;

    #[test]
    fn gamma_x_and_z_explicit() {
        let g = make_gamma_set();
        assert_eq!(g.gx, kron(&sigma_x(), &identity2()));
        // −σy⊗σy = antidiag(1, −1, −1, 1)
        let expected = Operator::from_real_rows(
            4,
            &[
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, -1.0, 0.0, //
                0.0, -1.0, 0.0, 0.0, //
                1.0, 0.0, 0.0, 0.0,
            ],
        )
        .unwrap();
        assert!(g.gz.max_abs_diff(&expected) < 1e-15);
        assert!(commutator(&g.gz, &g.gz_p).unwrap().max_abs() < TOL);
    }

    #[test]
    fn observables_at_special_angles() {
        let o = make_observables(0.0, 0.0);
        assert!(o.b.max_abs_diff(&kron(&sigma_x(), &sigma_z())) < TOL);
        let o = make_observables(PI / 2.0, 0.3);
        let g = make_gamma_set();
        assert!(o.b.max_abs_diff(&g.gz_p) < TOL);
        assert!(o.b.max_abs_diff(&-kron(&sigma_x(), &sigma_x())) < TOL);
    }

    #[test]
    fn b_spectrum_is_two_plus_two_minus() {
        for k in 0..12 {
            let beta = -PI + k as f64 * 0.57;
            let ev = make_observables(beta, 0.0).b.hermitian_eigenvalues().unwrap();
            let expected = [-1.0, -1.0, 1.0, 1.0];
            for (e, x) in ev.iter().zip(expected) {
                assert!((e - x).abs() < 1e-12, "beta={beta}: {ev:?}");
            }
        }
    }

    #[test]
    fn pair_products_match_closed_forms() {
        let (x, z, id) = (sigma_x(), sigma_z(), identity2());
        for &(beta, eta) in &[(0.0, 0.0), (0.4, -2.1), (PI / 2.0, 3.0), (-3.0 * PI / 4.0, PI / 4.0)] {
            let pr = product_operators(&make_observables(beta, eta));
            let local = |t: f64| &z.scale_real(t.cos()) - &x.scale_real(t.sin());
            let nonlocal = |t: f64| -kron(&z, &(&x.scale_real(t.cos()) + &z.scale_real(t.sin())));
            assert!(pr.ab.max_abs_diff(&kron(&id, &local(beta))) < TOL);
            assert!(pr.bc.max_abs_diff(&nonlocal(beta)) < TOL);
            assert!(pr.cd.max_abs_diff(&nonlocal(eta)) < TOL);
            assert!(pr.da.max_abs_diff(&kron(&id, &local(eta))) < TOL);
            for p in [&pr.ab, &pr.bc, &pr.cd, &pr.da] {
                assert!(p.trace().norm() < TOL);
                assert!(p.is_hermitian(TOL) && p.is_unitary(TOL));
            }
        }
        let pr = product_operators(&make_observables(0.0, 1.0));
        assert!(pr.ab.max_abs_diff(&kron(&id, &z)) < TOL);
        let pr = product_operators(&make_observables(PI / 2.0, 1.0));
        assert!(pr.bc.max_abs_diff(&-kron(&z, &z)) < TOL);
    }

    #[test]
    fn peres_mermin_examples() {
        let pm = make_peres_mermin();
        let id4 = Operator::identity(4);
        assert!(pm.row_product(0).max_abs_diff(&id4) < TOL);
        assert!(pm.column_product(2).max_abs_diff(&-&id4) < TOL);
        assert!(pm.entry(2, 2).max_abs_diff(&kron(&sigma_z(), &identity2())) < TOL);
    }

    #[test]
    fn gamma_commutation_table() {
        let g = make_gamma_set();
        let two_i = C64::new(0.0, 2.0);
        for set in [g.unprimed(), g.primed()] {
            for k in 0..3 {
                let (a, b, c) = (set[k], set[(k + 1) % 3], set[(k + 2) % 3]);
                let comm = commutator(a, b).unwrap();
                assert!(comm.max_abs_diff(&c.scale(two_i)) < TOL);
            }
        }
        for a in g.unprimed() {
            for b in g.primed() {
                assert!(commutator(a, b).unwrap().max_abs() < TOL);
            }
        }
    }

    #[test]
    fn mutually_commuting_detects_conflicts() {
        let o = make_observables(0.3, 1.1);
        assert!(mutually_commuting(&[&o.a, &o.b], TOL));
        assert!(!mutually_commuting(&[&o.a, &o.c], TOL));
        assert!(!mutually_commuting(&[&o.b, &o.d], TOL));
    }
}
