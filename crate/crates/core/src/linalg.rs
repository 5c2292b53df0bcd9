//! Dense complex matrix primitives with tolerance-controlled rank, support
//! and positivity.
//!
//! Operators are stored as `nalgebra::DMatrix<Complex64>`. Vectorization is
//! column stacking, `vec(A X B) = (Bᵀ ⊗ A) vec(X)`, which coincides with
//! nalgebra's column-major storage.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Numerical thresholds shared by every stage of the analysis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative singular-value / eigenvalue cutoff for rank decisions.
    pub rank_tol: f64,
    /// Width used to group eigenvalues into clusters.
    pub eig_cluster_tol: f64,
    /// Acceptance threshold for linear identities.
    pub residual_tol: f64,
    /// Bound below which negative eigenvalues count as noise.
    pub psd_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_tol: 1e-9,
            eig_cluster_tol: 1e-7,
            residual_tol: 1e-8,
            psd_tol: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rank_tol", self.rank_tol),
            ("eig_cluster_tol", self.eig_cluster_tol),
            ("residual_tol", self.residual_tol),
            ("psd_tol", self.psd_tol),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidTolerances(format!(
                    "{name} must be strictly positive, got {value}"
                )));
            }
        }
        if self.rank_tol >= 1.0 {
            return Err(Error::InvalidTolerances(format!(
                "rank_tol must be below 1, got {}",
                self.rank_tol
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    check_finite(m)?;
    Ok(m.nrows())
}

pub(crate) fn check_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Hermitian operator, stored exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct Hermitian(CMatrix);

impl Hermitian {
    /// Accepts `m` if `‖m − m†‖_F ≤ tol`, then stores its Hermitian part.
    pub fn new(m: CMatrix, tol: f64) -> Result<Self> {
        check_square(&m)?;
        let residual = (&m - m.adjoint()).norm();
        if residual > tol {
            return Err(Error::NotHermitian { residual });
        }
        Ok(Self::hermitize(&m))
    }

    /// Hermitian part `(m + m†)/2`.
    pub fn hermitize(m: &CMatrix) -> Self {
        Self((m + m.adjoint()).scale(0.5))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Eigenvalues ascending with matching unit eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        hermitian_eigen(&self.0)
    }
}

/// Orthogonal projector together with the dimension of its range.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    matrix: CMatrix,
    rank: usize,
}

impl Projector {
    /// Projector onto the span of orthonormal columns.
    pub fn from_orthonormal(n: usize, columns: &CMatrix) -> Self {
        assert_eq!(columns.nrows(), n);
        let matrix = if columns.ncols() == 0 {
            CMatrix::zeros(n, n)
        } else {
            columns * columns.adjoint()
        };
        Self {
            matrix,
            rank: columns.ncols(),
        }
    }

    /// Validates a candidate and snaps its eigenvalues to {0, 1}.
    pub fn new(m: CMatrix, tol: f64) -> Result<Self> {
        let h = Hermitian::new(m, tol)?;
        let p = h.matrix();
        let idempotence = (p * p - p).norm();
        if idempotence > tol {
            return Err(Error::NotProjector {
                residual: idempotence,
            });
        }
        let (vals, vecs) = h.eigen();
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
        let trace = p.trace().re;
        if (trace - keep.len() as f64).abs() > tol.max(1e-12) * (1.0 + trace.abs()) {
            return Err(Error::NotProjector {
                residual: (trace - keep.len() as f64).abs(),
            });
        }
        let cols = vecs.select_columns(&keep);
        Ok(Self::from_orthonormal(p.nrows(), &cols))
    }

    pub fn zero(n: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(n, n),
            rank: 0,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: CMatrix::identity(n, n),
            rank: n,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Orthonormal basis of the range, as columns (n × rank).
    pub fn isometry(&self) -> CMatrix {
        let (vals, vecs) = hermitian_eigen(&self.matrix);
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
        vecs.select_columns(&keep)
    }

    /// `I − P`.
    pub fn complement(&self) -> Self {
        let n = self.dim();
        Self {
            matrix: CMatrix::identity(n, n) - &self.matrix,
            rank: n - self.rank,
        }
    }

    /// Invariant residuals `(‖P² − P‖_F, |tr P − rank|)`.
    pub fn residuals(&self) -> (f64, f64) {
        let p = &self.matrix;
        (
            (p * p - p).norm(),
            (p.trace().re - self.rank as f64).abs(),
        )
    }
}

/// Positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates positivity and normalization at `tol`.
    pub fn new(m: CMatrix, tol: f64) -> Result<Self> {
        let h = Hermitian::new(m, tol)?;
        let (vals, _) = h.eigen();
        let trace = h.matrix().trace().re;
        let min = vals.first().copied().unwrap_or(0.0);
        if min < -tol {
            return Err(Error::NotPositive {
                clipped: -min,
                trace,
            });
        }
        if (trace - 1.0).abs() > tol {
            return Err(Error::TraceTooSmall { trace });
        }
        Ok(Self(h.into_matrix()))
    }

    pub(crate) fn from_raw(m: CMatrix) -> Self {
        Self(m)
    }

    /// Pure state `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &CVector) -> Self {
        let v = psi.unscale(psi.norm());
        Self(&v * v.adjoint())
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self(CMatrix::identity(n, n).unscale(n as f64))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Hilbert–Schmidt inner product `tr(A† B)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVector, n: usize) -> CMatrix {
    CMatrix::from_column_slice(n, n, v.as_slice())
}

pub fn real_matrix(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)))
}

pub fn diag(entries: &[f64]) -> CMatrix {
    let n = entries.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(entries[i], 0.0)
        } else {
            ZERO
        }
    })
}

/// `|i⟩⟨j|` on `C^n`.
pub fn ket_bra(n: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(i, j)] = ONE;
    m
}

/// Rotates a vector so that its largest-magnitude entry (lowest index among
/// near-ties) is real and positive.
pub(crate) fn fix_phase(v: &mut [C64]) {
    if let Some(k) = dominant_index(v) {
        let z = v[k];
        let phase = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}

pub(crate) fn dominant_index(v: &[C64]) -> Option<usize> {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return None;
    }
    v.iter().position(|z| z.norm() >= max * (1.0 - 1e-9))
}

/// Ascending eigen-decomposition of the Hermitian part of `m`, with a
/// deterministic phase on every eigenvector.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(Ordering::Equal)
    });
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = eig.eigenvectors.select_columns(&order);
    for mut col in vecs.column_iter_mut() {
        fix_phase(col.as_mut_slice());
    }
    (vals, vecs)
}

/// Orthogonal projector onto the span of eigenvectors of a PSD operator with
/// eigenvalue above `rank_tol × λ_max`.
pub fn support_projector(a: &CMatrix, tol: &Tolerances) -> Result<Projector> {
    let n = check_square(a)?;
    let herm = (a - a.adjoint()).norm();
    if herm > tol.residual_tol * a.norm().max(1.0) {
        return Err(Error::NotHermitian { residual: herm });
    }
    let (vals, vecs) = hermitian_eigen(a);
    let max = vals.last().copied().unwrap_or(0.0);
    if let Some(&min) = vals.first() {
        if min < -tol.psd_tol.max(tol.rank_tol * max) {
            return Err(Error::NotPositive {
                clipped: -min,
                trace: a.trace().re,
            });
        }
    }
    if max <= 0.0 {
        return Ok(Projector::zero(n));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > tol.rank_tol * max).collect();
    Ok(Projector::from_orthonormal(n, &vecs.select_columns(&keep)))
}

/// Singular value decomposition padded so that every right singular vector is
/// returned, even for wide inputs. Returns `(σ descending, V)` with the right
/// singular vectors as the columns of `V`.
fn full_right_svd(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let (rows, cols) = m.shape();
    let padded;
    let a = if rows < cols {
        padded = m.clone().resize_vertically(cols, ZERO);
        &padded
    } else {
        m
    };
    let svd = SVD::new(a.clone(), false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| {
        svd.singular_values[y]
            .partial_cmp(&svd.singular_values[x])
            .unwrap_or(Ordering::Equal)
    });
    let sigma = order.iter().map(|&k| svd.singular_values[k]).collect();
    let v = v_t.adjoint().select_columns(&order);
    (sigma, v)
}

/// Orthonormal basis of the numerical null space: right singular vectors with
/// singular value at most `rank_tol × σ_max`.
pub fn kernel_basis(m: &CMatrix, tol: &Tolerances) -> Result<Vec<CVector>> {
    kernel_basis_with_floor(m, 0.0, tol)
}

/// Like [`kernel_basis`], with the cutoff taken relative to `max(σ_max, floor)`
/// so that a matrix of pure rounding noise is recognized as zero.
pub fn kernel_basis_with_floor(m: &CMatrix, floor: f64, tol: &Tolerances) -> Result<Vec<CVector>> {
    check_finite(m)?;
    let cols = m.ncols();
    if cols == 0 {
        return Ok(Vec::new());
    }
    if m.nrows() == 0 {
        return Ok((0..cols).map(|k| unit(cols, k)).collect());
    }
    let (sigma, v) = full_right_svd(m);
    let smax = sigma.first().copied().unwrap_or(0.0).max(floor);
    if smax == 0.0 {
        return Ok((0..cols).map(|k| unit(cols, k)).collect());
    }
    let cutoff = tol.rank_tol * smax;
    Ok((0..cols)
        .filter(|&k| sigma[k] <= cutoff)
        .map(|k| {
            let mut col = v.column(k).into_owned();
            fix_phase(col.as_mut_slice());
            col
        })
        .collect())
}

/// Numerical rank with the same relative cutoff as [`kernel_basis`].
pub fn numerical_rank(m: &CMatrix, tol: &Tolerances) -> usize {
    if m.is_empty() {
        return 0;
    }
    let svd = SVD::new(m.clone(), false, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > tol.rank_tol * smax)
        .count()
}

fn unit(n: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[k] = ONE;
    v
}

/// Hilbert–Schmidt orthonormal Hermitian basis of a †-closed span.
pub fn hermitian_basis(span: &[CMatrix], tol: &Tolerances) -> Result<Vec<Hermitian>> {
    let Some(first) = span.first() else {
        return Ok(Vec::new());
    };
    let n = check_square(first)?;
    for m in span {
        if m.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "span elements must all be {n}x{n}, found {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        check_finite(m)?;
    }

    // Orthonormal frame of the input span, used for the closure check.
    let stacked = CMatrix::from_columns(&span.iter().map(vectorize).collect::<Vec<_>>());
    let frame = orthonormal_columns(&stacked, tol);
    let mut residual: f64 = 0.0;
    for m in span {
        let v = vectorize(&m.adjoint());
        let proj = &frame * (frame.adjoint() * &v);
        residual = residual.max((v - proj).norm() / m.norm().max(f64::MIN_POSITIVE));
    }
    if residual > tol.residual_tol {
        return Err(Error::NotAdjointClosed { residual });
    }

    let mut candidates = Vec::with_capacity(2 * span.len());
    for m in span {
        let adj = m.adjoint();
        candidates.push((m + &adj).scale(0.5));
        candidates.push((m - &adj) * C64::new(0.0, -0.5));
    }
    let k = candidates.len();
    // Gram matrix of Hermitian candidates is real symmetric.
    let gram = DMatrix::<f64>::from_fn(k, k, |a, b| hs_inner(&candidates[a], &candidates[b]).re);
    let eig = SymmetricEigen::new(gram);
    let lmax = eig.eigenvalues.max();
    if lmax <= 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..k)
        .filter(|&i| eig.eigenvalues[i] > tol.rank_tol * lmax)
        .collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(Ordering::Equal)
    });
    let mut out = Vec::with_capacity(order.len());
    for idx in order {
        let w = eig.eigenvectors.column(idx);
        let scale = eig.eigenvalues[idx].sqrt();
        let mut h = CMatrix::zeros(n, n);
        for (a, c) in candidates.iter().enumerate() {
            h += c.scale(w[a] / scale);
        }
        let h = (&h + h.adjoint()).scale(0.5);
        // Re-normalize to absorb rounding in the Gram eigenvectors.
        let h = h.unscale(h.norm());
        out.push(Hermitian(fix_sign(h)));
    }
    Ok(reorthonormalize(out))
}

/// One pass of modified Gram–Schmidt on Hermitian matrices (real coefficients).
fn reorthonormalize(basis: Vec<Hermitian>) -> Vec<Hermitian> {
    let mut out: Vec<Hermitian> = Vec::with_capacity(basis.len());
    for h in basis {
        let mut m = h.0;
        for q in &out {
            let c = hs_inner(&q.0, &m).re;
            m -= q.0.scale(c);
        }
        let norm = m.norm();
        out.push(Hermitian(fix_sign(m.unscale(norm))));
    }
    out
}

fn fix_sign(m: CMatrix) -> CMatrix {
    match dominant_index(m.as_slice()) {
        Some(k) => {
            let z = m.as_slice()[k];
            let s = if z.re.abs() >= z.im.abs() { z.re } else { z.im };
            if s < 0.0 {
                -m
            } else {
                m
            }
        }
        None => m,
    }
}

/// Orthonormal basis (columns) of the column space, rank decided at `rank_tol`.
pub fn orthonormal_columns(m: &CMatrix, tol: &Tolerances) -> CMatrix {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return CMatrix::zeros(rows, 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return CMatrix::zeros(rows, 0);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > tol.rank_tol * smax)
        .collect();
    u.select_columns(&keep)
}

/// `exp(M)` by scaling and squaring with a Padé approximant.
pub fn matrix_exponential(m: &CMatrix) -> Result<CMatrix> {
    let n = check_square(m)?;
    if n == 0 {
        return Ok(m.clone());
    }
    Ok(m.exp())
}

/// Clips eigenvalues below `psd_tol` to zero and renormalizes to unit trace.
pub fn psd_project(a: &Hermitian, tol: &Tolerances) -> Result<DensityMatrix> {
    let trace = a.matrix().trace().re;
    if !(trace > tol.psd_tol) {
        return Err(Error::TraceTooSmall { trace });
    }
    let (vals, vecs) = a.eigen();
    let clipped: f64 = vals.iter().filter(|&&v| v < tol.psd_tol).map(|v| v.abs()).sum();
    if clipped > 0.01 * trace {
        return Err(Error::NotPositive { clipped, trace });
    }
    let n = a.dim();
    let mut out = CMatrix::zeros(n, n);
    let mut kept = 0.0;
    for (k, &v) in vals.iter().enumerate() {
        if v >= tol.psd_tol {
            let col = vecs.column(k);
            out += (col * col.adjoint()).scale(v);
            kept += v;
        }
    }
    out.unscale_mut(kept);
    Ok(DensityMatrix(Hermitian::hermitize(&out).into_matrix()))
}

/// Sorted-eigenvalue clusters: consecutive values closer than `width` share a
/// cluster. Returns index ranges into the (ascending) input and the smallest
/// gap between neighbouring clusters.
pub(crate) fn cluster_sorted(vals: &[f64], width: f64) -> (Vec<std::ops::Range<usize>>, f64) {
    let mut clusters = Vec::new();
    let mut start = 0;
    let mut min_gap = f64::INFINITY;
    for k in 1..=vals.len() {
        if k == vals.len() || vals[k] - vals[k - 1] > width {
            if k < vals.len() {
                min_gap = min_gap.min(vals[k] - vals[k - 1]);
            }
            clusters.push(start..k);
            start = k;
        }
    }
    (clusters, min_gap)
}

/// Lexicographic order on matrix entries (row-major, real then imaginary),
/// treating entries within `tol` as equal.
pub(crate) fn lex_cmp(a: &CMatrix, b: &CMatrix, tol: f64) -> Ordering {
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let (x, y) = (a[(i, j)], b[(i, j)]);
            for (p, q) in [(x.re, y.re), (x.im, y.im)] {
                if (p - q).abs() > tol {
                    return p.partial_cmp(&q).unwrap_or(Ordering::Equal);
                }
            }
        }
    }
    Ordering::Equal
}
