//! Quantum states, measurement effects and generalized Bloch coordinates.
//!
//! Matrices are dense `nalgebra` complex matrices. A [`DensityMatrix`] or
//! [`Effect`] can only be built through validating constructors, so any value
//! of those types satisfies its invariants to the tolerances below.

use nalgebra::{Complex, DMatrix, DVector};

use crate::{Error, Result};

pub type Complex64 = Complex<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// Entrywise tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance on `|Tr ρ - 1|`.
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue of a positive-semidefinite matrix.
pub const PSD_TOL: f64 = -1e-10;

/// `Re Tr(A B)` for matrices where `B` is Hermitian.
#[inline]
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    // Tr(AB) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij) for Hermitian B.
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// `(M + M†) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut w: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    w.sort_by(|a, b| a.total_cmp(b));
    w
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)[0]
}

pub fn max_eigenvalue(m: &CMatrix) -> f64 {
    *hermitian_eigenvalues(m).last().expect("non-empty matrix")
}

fn check_finite(m: &CMatrix, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Parse(format!("{what} has non-finite entries")))
    }
}

/// A d×d Hermitian, positive-semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_finite(&matrix, "state")?;
        if !matrix.is_square() || matrix.nrows() < 1 {
            return Err(Error::InvalidState("matrix must be square".into()));
        }
        if !is_hermitian(&matrix, HERMITIAN_TOL) {
            return Err(Error::InvalidState("matrix is not Hermitian".into()));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let lo = min_eigenvalue(&matrix);
        if lo < PSD_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (minimum eigenvalue {lo:e})"
            )));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix the caller already knows to be physical.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim).scale(1.0 / dim as f64),
        }
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("state vector has zero norm".into()));
        }
        let v = v.unscale(norm);
        Self::new(&v * v.adjoint())
    }

    /// Physical state with the given generalized Bloch vector.
    pub fn from_bloch(v: &BlochVector) -> Result<Self> {
        let dim = v.dim()?;
        Self::new(bloch_to_state(v, dim)?)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn bloch(&self) -> BlochVector {
        state_to_bloch(&self.matrix)
    }

    /// `Tr(X ρ)` for a Hermitian observable.
    pub fn expectation(&self, observable: &CMatrix) -> Result<f64> {
        if observable.nrows() != self.dim() || observable.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: observable.nrows(),
            });
        }
        Ok(trace_product(observable, &self.matrix))
    }

    /// Convex combination `w·self + (1-w)·other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::arg("weight", "must lie in [0, 1]"));
        }
        Ok(Self {
            matrix: self.matrix.scale(w) + other.matrix.scale(1.0 - w),
        })
    }
}

/// A Hermitian positive-semidefinite POVM element.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    matrix: CMatrix,
}

impl Effect {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_finite(&matrix, "effect")?;
        if !matrix.is_square() {
            return Err(Error::InvalidEffect("matrix must be square".into()));
        }
        if !is_hermitian(&matrix, HERMITIAN_TOL) {
            return Err(Error::InvalidEffect("matrix is not Hermitian".into()));
        }
        let lo = min_eigenvalue(&matrix);
        if lo < PSD_TOL {
            return Err(Error::InvalidEffect(format!(
                "not positive semidefinite (minimum eigenvalue {lo:e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// Real coordinates of a Hermitian unit-trace matrix in the generalized
/// Gell-Mann basis: `ρ = I/d + ½ Σ vᵢ Bᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochVector(pub Vec<f64>);

impl BlochVector {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Hilbert-space dimension implied by the vector length `d² - 1`.
    pub fn dim(&self) -> Result<usize> {
        dim_from_bloch_len(self.0.len())
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

impl From<DVector<f64>> for BlochVector {
    fn from(v: DVector<f64>) -> Self {
        Self(v.iter().copied().collect())
    }
}

pub(crate) fn dim_from_bloch_len(len: usize) -> Result<usize> {
    let d = ((len + 1) as f64).sqrt().round() as usize;
    if d >= 2 && d * d == len + 1 {
        Ok(d)
    } else {
        Err(Error::arg(
            "bloch",
            format!("length {len} is not d²-1 for any dimension d ≥ 2"),
        ))
    }
}

/// Generalized Gell-Mann matrices for dimension `d`, normalized so that
/// `Tr(Bᵢ Bⱼ) = 2δᵢⱼ`, ordered symmetric, antisymmetric, then diagonal.
/// For `d = 2` this is `(σx, σy, σz)`.
pub fn gell_mann_basis(d: usize) -> Vec<CMatrix> {
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = CMatrix::zeros(d, d);
            m[(j, k)] = one;
            m[(k, j)] = one;
            out.push(m);
        }
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = CMatrix::zeros(d, d);
            m[(j, k)] = -i;
            m[(k, j)] = i;
            out.push(m);
        }
    }
    for l in 1..d {
        let scale = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = one.scale(scale);
        }
        m[(l, l)] = one.scale(-(l as f64) * scale);
        out.push(m);
    }
    out
}

/// Hermitian unit-trace matrix with Bloch vector `v`. Vectors outside the
/// physical set give non-PSD matrices; use [`DensityMatrix::from_bloch`]
/// when physicality is required.
pub fn bloch_to_state(v: &BlochVector, dim: usize) -> Result<CMatrix> {
    if dim < 2 || v.len() != dim * dim - 1 {
        return Err(Error::arg(
            "bloch",
            format!("expected {} components for d = {dim}, got {}", dim * dim - 1, v.len()),
        ));
    }
    let mut m = CMatrix::identity(dim, dim).scale(1.0 / dim as f64);
    for (b, &x) in gell_mann_basis(dim).iter().zip(v.components()) {
        m += b.scale(0.5 * x);
    }
    Ok(m)
}

/// Bloch coordinates `vᵢ = Tr(ρ Bᵢ)` of a Hermitian matrix.
pub fn state_to_bloch(rho: &CMatrix) -> BlochVector {
    let d = rho.nrows();
    BlochVector(
        gell_mann_basis(d)
            .iter()
            .map(|b| trace_product(b, rho))
            .collect(),
    )
}

/// Traceless Hermitian matrix `½ Σ vᵢ Bᵢ`: the displacement of a state when
/// its Bloch vector moves by `v`.
pub(crate) fn bloch_displacement(v: &[f64], dim: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for (b, &x) in gell_mann_basis(dim).iter().zip(v) {
        m += b.scale(0.5 * x);
    }
    m
}

/// Pauli matrices `(σx, σy, σz)`.
pub fn pauli_matrices() -> [CMatrix; 3] {
    let b = gell_mann_basis(2);
    [b[0].clone(), b[1].clone(), b[2].clone()]
}
