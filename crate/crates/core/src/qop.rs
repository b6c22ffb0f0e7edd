//! Dense operator algebra on the two-transmon + resonator tensor space.
//!
//! Tensor ordering is always (transmon 1, transmon 2, resonator), with the
//! last factor varying fastest in the flattened index.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        ComplexMatrix { dim, data }
    }

    /// Builds from row-major entries; `entries.len()` must be a perfect square.
    pub fn from_row_major(entries: Vec<C64>) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim * dim != entries.len() {
            return Err(Error::InvalidDimension(format!(
                "{} entries do not form a square matrix",
                entries.len()
            )));
        }
        Ok(ComplexMatrix { dim, data: entries })
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)])
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix { dim: self.dim, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            let row = &self.data[r * n..(r + 1) * n];
            let orow = &mut out.data[r * n..(r + 1) * n];
            for (k, a) in row.iter().enumerate() {
                if *a == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let mut out = Self::zeros(n * m);
        for r1 in 0..n {
            for c1 in 0..n {
                let a = self[(r1, c1)];
                if a == ZERO {
                    continue;
                }
                for r2 in 0..m {
                    for c2 in 0..m {
                        out[(r1 * m + r2, c1 * m + c2)] = a * other[(r2, c2)];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max|M - M†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Replaces the matrix by `(M + M†)/2`.
    pub fn hermitize(&mut self) {
        let n = self.dim;
        for r in 0..n {
            self.data[r * n + r].im = 0.0;
            for c in r + 1..n {
                let avg = 0.5 * (self.data[r * n + c] + self.data[c * n + r].conj());
                self.data[r * n + c] = avg;
                self.data[c * n + r] = avg.conj();
            }
        }
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidDimension(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        Ok(Self::from_fn(m.nrows(), |r, c| m[(r, c)]))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut h = self.clone();
        h.hermitize();
        let mut ev: Vec<f64> = h.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Hermitian eigendecomposition: ascending eigenvalues and the matching
    /// eigenvectors.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, Vec<StateVector>) {
        let mut h = self.clone();
        h.hermitize();
        let eig = h.to_nalgebra().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = order
            .iter()
            .map(|&i| StateVector::new(eig.eigenvectors.column(i).iter().copied().collect()))
            .collect();
        (values, vectors)
    }

    /// Column-stacked vectorization `vec(M)`.
    pub fn vectorize(&self) -> Vec<C64> {
        let n = self.dim;
        let mut v = Vec::with_capacity(n * n);
        for c in 0..n {
            for r in 0..n {
                v.push(self[(r, c)]);
            }
        }
        v
    }

    /// Inverse of [`vectorize`](Self::vectorize).
    pub fn unvectorize(v: &[C64]) -> Result<Self> {
        let n = (v.len() as f64).sqrt().round() as usize;
        if n * n != v.len() {
            return Err(Error::InvalidDimension(format!("vector of length {} is not d²", v.len())));
        }
        Ok(Self::from_fn(n, |r, c| v[c * n + r]))
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.dim() != self.dim {
            return Err(Error::InvalidDimension(format!(
                "operator dim {} vs vector dim {}",
                self.dim,
                v.dim()
            )));
        }
        let n = self.dim;
        let amps = (0..n)
            .map(|r| self.data[r * n..(r + 1) * n].iter().zip(v.amplitudes()).map(|(a, b)| a * b).sum())
            .collect();
        Ok(StateVector::new(amps))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        if self.dim <= 8 {
            for r in 0..self.dim {
                let row: Vec<String> = (0..self.dim).map(|c| format!("{:.4}", self[(r, c)])).collect();
                writeln!(f, "  [{}]", row.join(", "))?;
            }
        }
        Ok(())
    }
}

/// Pure state amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Self {
        StateVector { amps }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        StateVector { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        assert_eq!(self.dim(), other.dim());
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> StateVector {
        let n = self.norm();
        StateVector { amps: self.amps.iter().map(|a| a / n).collect() }
    }

    pub fn kron(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector { amps }
    }

    /// `|self⟩⟨other|`.
    pub fn outer(&self, other: &StateVector) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim(), |r, c| self.amps[r] * other.amps[c].conj())
    }

    pub fn projector(&self) -> ComplexMatrix {
        self.outer(self)
    }
}

/// Truncated lowering operator with `⟨n-1|a|n⟩ = √n`.
pub fn destroy(dim: usize) -> Result<ComplexMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("destroy needs dim >= 2, got {dim}")));
    }
    let mut a = ComplexMatrix::zeros(dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(a)
}

/// `|k⟩⟨l|` on a single factor of dimension `dim`.
pub fn ket_bra(dim: usize, k: usize, l: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim);
    m[(k, l)] = ONE;
    m
}

/// Number operator `Σ k |k⟩⟨k|`.
pub fn number(dim: usize) -> ComplexMatrix {
    let diag: Vec<C64> = (0..dim).map(|k| C64::new(k as f64, 0.0)).collect();
    ComplexMatrix::from_diagonal(&diag)
}

/// Places `op` at `slot` of the tensor product described by `dims`, with
/// identities elsewhere.
pub fn embed(op: &ComplexMatrix, slot: usize, dims: &[usize]) -> Result<ComplexMatrix> {
    if slot >= dims.len() {
        return Err(Error::InvalidDimension(format!("slot {slot} out of range for {} factors", dims.len())));
    }
    if op.dim() != dims[slot] {
        return Err(Error::InvalidDimension(format!(
            "operator dim {} does not match dims[{slot}] = {}",
            op.dim(),
            dims[slot]
        )));
    }
    let left: usize = dims[..slot].iter().product();
    let right: usize = dims[slot + 1..].iter().product();
    Ok(ComplexMatrix::identity(left).kron(op).kron(&ComplexMatrix::identity(right)))
}

/// `Tr(op · rho)`.
pub fn expect(op: &ComplexMatrix, rho: &ComplexMatrix) -> Result<C64> {
    if op.dim() != rho.dim() {
        return Err(Error::InvalidDimension(format!("operator dim {} vs state dim {}", op.dim(), rho.dim())));
    }
    let n = op.dim();
    let mut acc = ZERO;
    for r in 0..n {
        for c in 0..n {
            acc += op[(r, c)] * rho[(c, r)];
        }
    }
    Ok(acc)
}

/// Named two-transmon states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BellState {
    G00,
    E11,
    T,
    S,
    T0,
    S0,
    T1,
    S1,
}

impl BellState {
    pub const ALL: [BellState; 8] = [
        BellState::G00,
        BellState::E11,
        BellState::T,
        BellState::S,
        BellState::T0,
        BellState::S0,
        BellState::T1,
        BellState::S1,
    ];

    /// The four lower states whose populations are tracked, in output order.
    pub const LOWER: [BellState; 4] = [BellState::G00, BellState::E11, BellState::T, BellState::S];

    pub fn name(self) -> &'static str {
        match self {
            BellState::G00 => "00",
            BellState::E11 => "11",
            BellState::T => "T",
            BellState::S => "S",
            BellState::T0 => "T0",
            BellState::S0 => "S0",
            BellState::T1 => "T1",
            BellState::S1 => "S1",
        }
    }

    pub fn from_name(name: &str) -> Option<BellState> {
        BellState::ALL.iter().copied().find(|s| s.name().eq_ignore_ascii_case(name))
    }

    /// Superposition components `(k1, k2, sign)`; the state is
    /// `(|a⟩ + sign|b⟩)/√2` or a product state when both components agree.
    fn components(self) -> ((usize, usize), (usize, usize), f64) {
        match self {
            BellState::G00 => ((0, 0), (0, 0), 1.0),
            BellState::E11 => ((1, 1), (1, 1), 1.0),
            BellState::T => ((0, 1), (1, 0), 1.0),
            BellState::S => ((0, 1), (1, 0), -1.0),
            BellState::T0 => ((0, 2), (2, 0), 1.0),
            BellState::S0 => ((0, 2), (2, 0), -1.0),
            BellState::T1 => ((1, 2), (2, 1), 1.0),
            BellState::S1 => ((1, 2), (2, 1), -1.0),
        }
    }
}

/// The eight named states on the `d_t²`-dimensional two-transmon space.
#[derive(Debug, Clone)]
pub struct BellBasis {
    d_t: usize,
    states: Vec<StateVector>,
}

impl BellBasis {
    pub fn d_t(&self) -> usize {
        self.d_t
    }

    pub fn get(&self, which: BellState) -> &StateVector {
        &self.states[which as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (BellState, &StateVector)> {
        BellState::ALL.iter().copied().zip(self.states.iter())
    }

    /// `|which⟩ ⊗ |n⟩` on the full space with `d_c` resonator levels.
    pub fn with_photons(&self, which: BellState, n: usize, d_c: usize) -> StateVector {
        self.get(which).kron(&StateVector::basis(d_c, n))
    }
}

pub fn bell_basis(d_t: usize) -> Result<BellBasis> {
    if d_t < 3 {
        return Err(Error::InvalidDimension(format!("bell basis needs d_t >= 3 (level |2> required), got {d_t}")));
    }
    let dim = d_t * d_t;
    let states = BellState::ALL
        .iter()
        .map(|s| {
            let ((a1, a2), (b1, b2), sign) = s.components();
            let mut amps = vec![ZERO; dim];
            if (a1, a2) == (b1, b2) {
                amps[a1 * d_t + a2] = ONE;
            } else {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                amps[a1 * d_t + a2] = C64::new(h, 0.0);
                amps[b1 * d_t + b2] = C64::new(sign * h, 0.0);
            }
            StateVector::new(amps)
        })
        .collect();
    Ok(BellBasis { d_t, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_matrix(dim: usize, seed: u64) -> ComplexMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(dim, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn destroy_two_level() {
        let a = destroy(2).unwrap();
        assert_eq!(a.as_slice(), &[ZERO, ONE, ZERO, ZERO]);
    }

    #[test]
    fn destroy_matrix_element() {
        let a = destroy(4).unwrap();
        assert!((a[(2, 3)].re - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(a[(3, 2)], ZERO);
    }

    #[test]
    fn number_spectrum() {
        let a = destroy(4).unwrap();
        let n = a.dagger().matmul(&a);
        let ev = n.hermitian_eigenvalues();
        for (k, e) in ev.iter().enumerate() {
            assert!((e - k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn destroy_rejects_small_dim() {
        assert!(matches!(destroy(1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn truncated_commutator_on_principal_block() {
        for dim in 2..7 {
            let a = destroy(dim).unwrap();
            let c = a.commutator(&a.dagger());
            for r in 0..dim - 1 {
                for col in 0..dim - 1 {
                    let expected = if r == col { ONE } else { ZERO };
                    assert!((c[(r, col)] - expected).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn embed_annihilates_first_factor() {
        let a = embed(&destroy(2).unwrap(), 0, &[2, 2]).unwrap();
        assert_eq!(a.dim(), 4);
        // |10> -> |00>, |01> untouched (annihilated since it has no excitation in factor 0)
        let v10 = StateVector::basis(4, 2);
        let out = a.apply(&v10).unwrap();
        assert_eq!(out, StateVector::basis(4, 0));
        let v01 = StateVector::basis(4, 1);
        assert!(a.apply(&v01).unwrap().norm() < 1e-15);
    }

    #[test]
    fn embed_identity_and_trace() {
        let dims = [3, 4, 2];
        for slot in 0..3 {
            let id = embed(&ComplexMatrix::identity(dims[slot]), slot, &dims).unwrap();
            assert_eq!(id, ComplexMatrix::identity(24));
            let op = random_matrix(dims[slot], slot as u64);
            let big = embed(&op, slot, &dims).unwrap();
            let others: usize = dims.iter().enumerate().filter(|(i, _)| *i != slot).map(|(_, d)| d).product();
            assert!((big.trace() - op.trace() * others as f64).norm() < 1e-12);
        }
    }

    #[test]
    fn embed_dimension_mismatch() {
        assert!(embed(&destroy(3).unwrap(), 0, &[2, 2]).is_err());
        assert!(embed(&destroy(2).unwrap(), 2, &[2, 2]).is_err());
    }

    #[test]
    fn bell_basis_orthonormal() {
        for d_t in [3, 4] {
            let b = bell_basis(d_t).unwrap();
            for (s1, v1) in b.iter() {
                for (s2, v2) in b.iter() {
                    let expected = if s1 == s2 { 1.0 } else { 0.0 };
                    assert!((v1.inner(v2) - C64::new(expected, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bell_basis_t0_amplitudes() {
        let b = bell_basis(3).unwrap();
        let t0 = b.get(BellState::T0).amplitudes();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((t0[2].re - h).abs() < 1e-15); // |02>
        assert!((t0[6].re - h).abs() < 1e-15); // |20>
        let s = b.get(BellState::S).amplitudes();
        assert!((s[1].re - h).abs() < 1e-15 && (s[3].re + h).abs() < 1e-15);
    }

    #[test]
    fn bell_basis_excitation_sectors() {
        let b = bell_basis(4).unwrap();
        let sector = |s: BellState| match s {
            BellState::G00 => 0,
            BellState::T | BellState::S => 1,
            BellState::E11 | BellState::T0 | BellState::S0 => 2,
            BellState::T1 | BellState::S1 => 3,
        };
        for (s, v) in b.iter() {
            for (idx, amp) in v.amplitudes().iter().enumerate() {
                if amp.norm() > 0.0 {
                    assert_eq!(idx / 4 + idx % 4, sector(s), "{s:?}");
                }
            }
        }
    }

    #[test]
    fn bell_basis_needs_three_levels() {
        assert!(bell_basis(2).is_err());
    }

    #[test]
    fn expect_identity_is_trace() {
        let rho = random_matrix(5, 9);
        let v = expect(&ComplexMatrix::identity(5), &rho).unwrap();
        assert!((v - rho.trace()).norm() < 1e-14);
    }

    #[test]
    fn expect_singlet_projector() {
        let b = bell_basis(3).unwrap();
        let s = b.with_photons(BellState::S, 0, 2);
        let proj = embed(&b.get(BellState::S).projector(), 0, &[9, 2]).unwrap();
        let v = expect(&proj, &s.projector()).unwrap();
        assert!((v - ONE).norm() < 1e-14);
    }

    #[test]
    fn expect_dim_mismatch() {
        assert!(expect(&ComplexMatrix::identity(3), &ComplexMatrix::identity(4)).is_err());
    }

    #[test]
    fn vectorize_roundtrip_column_stacking() {
        let m = random_matrix(3, 1);
        let v = m.vectorize();
        assert_eq!(v[1], m[(1, 0)]);
        assert_eq!(ComplexMatrix::unvectorize(&v).unwrap(), m);
    }

    proptest! {
        #[test]
        fn expect_of_hermitian_pair_is_real(seed in 0u64..1000, dim in 2usize..7) {
            let a = random_matrix(dim, seed);
            let b = random_matrix(dim, seed + 7);
            let h1 = &a + &a.dagger();
            let h2 = &b + &b.dagger();
            let v = expect(&h1, &h2).unwrap();
            prop_assert!(v.im.abs() < 1e-12);
        }

        #[test]
        fn embed_is_multiplicative(seed in 0u64..1000, slot in 0usize..3) {
            let dims = [2, 3, 2];
            let a = random_matrix(dims[slot], seed);
            let b = random_matrix(dims[slot], seed + 1);
            let lhs = embed(&a.matmul(&b), slot, &dims).unwrap();
            let rhs = embed(&a, slot, &dims).unwrap().matmul(&embed(&b, slot, &dims).unwrap());
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
    }
}
