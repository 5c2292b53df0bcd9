//! Lindblad generators, quantum channels and their superoperator matrices.
//!
//! A [`Superoperator`] holds the `n² × n²` matrix of a linear map on `n × n`
//! operators in the column-stacking convention `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_square, hermitian_basis, hermitian_eigen, kernel_basis_with_floor, matrix_exponential,
    psd_project, unvectorize, vectorize, CMatrix, DensityMatrix, Hermitian, Tolerances, C64, I,
};

pub const VECTORIZATION_CONVENTION: &str = "column-stacking: vec(A X B) = (B^T kron A) vec(X)";

/// Hamiltonian plus jump operators of a GKSL generator.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladModel {
    hamiltonian: Hermitian,
    jumps: Vec<CMatrix>,
}

impl LindbladModel {
    pub fn new(hamiltonian: CMatrix, jumps: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        let n = check_square(&hamiltonian)?;
        for (k, l) in jumps.iter().enumerate() {
            if l.shape() != (n, n) {
                return Err(Error::DimensionMismatch(format!(
                    "jump {k} is {}x{}, hamiltonian is {n}x{n}",
                    l.nrows(),
                    l.ncols()
                )));
            }
            check_square(l)?;
        }
        let scale = hamiltonian.norm().max(1.0);
        let hamiltonian = Hermitian::new(hamiltonian, tol.residual_tol * scale)?;
        Ok(Self { hamiltonian, jumps })
    }

    /// Model with `H = 0`.
    pub fn dissipative(jumps: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        let n = jumps
            .first()
            .map(|l| l.nrows())
            .ok_or_else(|| Error::DimensionMismatch("no operators to infer dimension".into()))?;
        Self::new(CMatrix::zeros(n, n), jumps, tol)
    }

    pub fn zero(n: usize) -> Self {
        Self {
            hamiltonian: Hermitian::hermitize(&CMatrix::zeros(n, n)),
            jumps: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// `‖H‖ + Σ_j ‖L_j‖²`, the size of the generator's building blocks.
    pub fn term_scale(&self) -> f64 {
        self.hamiltonian().norm() + self.jumps.iter().map(|l| l.norm_squared()).sum::<f64>()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        self.hamiltonian.matrix()
    }

    pub fn jumps(&self) -> &[CMatrix] {
        &self.jumps
    }
}

/// Kraus representation `Φ(ρ) = Σ_j V_j ρ V_j†`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    dim: usize,
    kraus: Vec<CMatrix>,
}

impl KrausChannel {
    /// Checks shapes only; trace preservation is checked by
    /// [`KrausChannel::checked`] and [`channel_superoperator`].
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::DimensionMismatch("channel needs at least one Kraus operator".into()))?;
        let n = check_square(first)?;
        for (k, v) in kraus.iter().enumerate() {
            if v.shape() != (n, n) {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator {k} is {}x{}, expected {n}x{n}",
                    v.nrows(),
                    v.ncols()
                )));
            }
            check_square(v)?;
        }
        Ok(Self { dim: n, kraus })
    }

    pub fn checked(kraus: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        let ch = Self::new(kraus)?;
        let residual = ch.normalization_residual();
        if residual > tol.residual_tol {
            return Err(Error::KrausNormalization { residual });
        }
        Ok(ch)
    }

    /// `‖Σ_j V_j†V_j − I‖_F`.
    pub fn normalization_residual(&self) -> f64 {
        let mut s = CMatrix::identity(self.dim, self.dim).scale(-1.0);
        for v in &self.kraus {
            s += v.adjoint() * v;
        }
        s.norm()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }
}

/// Dense matrix of a linear map on `n × n` operators.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: CMatrix,
    /// Size of the terms the matrix was assembled from. Rank decisions never
    /// use a cutoff below `rank_tol × scale`, so cancellation noise in an
    /// (almost) zero generator is not mistaken for signal.
    scale: f64,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.shape() != (dim * dim, dim * dim) {
            return Err(Error::DimensionMismatch(format!(
                "superoperator on {dim}x{dim} operators must be {0}x{0}",
                dim * dim
            )));
        }
        let scale = matrix.norm();
        Ok(Self { dim, matrix, scale })
    }

    pub(crate) fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            matrix: CMatrix::identity(dim * dim, dim * dim),
            scale: 1.0,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            matrix: CMatrix::zeros(dim * dim, dim * dim),
            scale: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Hilbert–Schmidt adjoint (conjugate transpose of the matrix).
    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            matrix: self.matrix.adjoint(),
            scale: self.scale,
        }
    }

    /// `unvec(matrix · vec(A))`.
    pub fn apply(&self, a: &CMatrix) -> Result<CMatrix> {
        if a.shape() != (self.dim, self.dim) {
            return Err(Error::DimensionMismatch(format!(
                "operand is {}x{}, superoperator acts on {d}x{d}",
                a.nrows(),
                a.ncols(),
                d = self.dim
            )));
        }
        Ok(unvectorize(&(&self.matrix * vectorize(a)), self.dim))
    }

    /// `exp(t · matrix)`.
    pub fn exp(&self, t: f64) -> Result<Superoperator> {
        let matrix = matrix_exponential(&self.matrix.scale(t))?;
        Ok(Self {
            dim: self.dim,
            scale: matrix.norm(),
            matrix,
        })
    }

    /// `self − identity`, the generator-like form of a channel.
    pub fn minus_identity(&self) -> Self {
        let m = self.dim * self.dim;
        Self {
            dim: self.dim,
            matrix: &self.matrix - CMatrix::identity(m, m),
            scale: self.scale.max(1.0),
        }
    }

    /// Norm of the row realizing `A ↦ tr(S(A))`.
    pub fn trace_row_norm(&self) -> f64 {
        let id = vectorize(&CMatrix::identity(self.dim, self.dim));
        (id.adjoint() * &self.matrix).norm()
    }
}

fn left_right(a: &CMatrix, b: &CMatrix) -> CMatrix {
    // vec(A X B) = (Bᵀ ⊗ A) vec(X)
    b.transpose().kronecker(a)
}

/// Superoperator of `ρ ↦ −i[H,ρ] + Σ_j (L_j ρ L_j† − ½{L_j†L_j, ρ})`.
pub fn build_generator(model: &LindbladModel) -> Superoperator {
    let n = model.dim();
    let id = CMatrix::identity(n, n);
    let h = model.hamiltonian();
    let mut m = (left_right(h, &id) - left_right(&id, h)) * (-I);
    let scale = model.term_scale();
    for l in model.jumps() {
        let ldl = l.adjoint() * l;
        m += left_right(l, &l.adjoint());
        m -= (left_right(&ldl, &id) + left_right(&id, &ldl)).scale(0.5);
    }
    Superoperator { dim: n, matrix: m, scale }
}

/// Heisenberg-picture generator
/// `A ↦ i[H,A] + Σ_j (L_j† A L_j − ½{L_j†L_j, A})`.
pub fn adjoint_generator(model: &LindbladModel) -> Superoperator {
    let n = model.dim();
    let id = CMatrix::identity(n, n);
    let h = model.hamiltonian();
    let mut m = (left_right(h, &id) - left_right(&id, h)) * I;
    let scale = model.term_scale();
    for l in model.jumps() {
        let ldl = l.adjoint() * l;
        m += left_right(&l.adjoint(), l);
        m -= (left_right(&ldl, &id) + left_right(&id, &ldl)).scale(0.5);
    }
    Superoperator { dim: n, matrix: m, scale }
}

/// Superoperator `Σ_j conj(V_j) ⊗ V_j` of a trace-preserving channel.
pub fn channel_superoperator(channel: &KrausChannel, tol: &Tolerances) -> Result<Superoperator> {
    let residual = channel.normalization_residual();
    if residual > tol.residual_tol {
        return Err(Error::KrausNormalization { residual });
    }
    Ok(kraus_sum(channel))
}

fn kraus_sum(channel: &KrausChannel) -> Superoperator {
    let n = channel.dim();
    let mut m = CMatrix::zeros(n * n, n * n);
    for v in channel.kraus() {
        m += v.map(|z| z.conj()).kronecker(v);
    }
    Superoperator { dim: n, matrix: m, scale: 1.0 }
}

/// Heisenberg-picture channel `A ↦ Σ_j V_j† A V_j`.
pub fn channel_adjoint(channel: &KrausChannel) -> Superoperator {
    let n = channel.dim();
    let mut m = CMatrix::zeros(n * n, n * n);
    for v in channel.kraus() {
        m += left_right(&v.adjoint(), v);
    }
    Superoperator { dim: n, matrix: m, scale: 1.0 }
}

/// Applies `exp(t·S)` to a state and cleans the result up to a density matrix.
pub fn propagate(
    s: &Superoperator,
    t: f64,
    rho: &DensityMatrix,
    tol: &Tolerances,
) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return Err(Error::DimensionMismatch(format!("time must be nonnegative, got {t}")));
    }
    let out = s.exp(t)?.apply(rho.matrix())?;
    let drift = (out.trace().re - rho.matrix().trace().re).abs();
    if drift > 1e-6 {
        return Err(Error::TraceDrift { drift });
    }
    psd_project(&Hermitian::hermitize(&out), tol)
}

/// Either time parametrization handled by the analysis pipeline.
#[derive(Clone, Debug, PartialEq)]
pub enum Dynamics {
    Continuous(LindbladModel),
    Discrete(KrausChannel),
}

/// Selects kernel-of-L versus eigenspace-at-1 semantics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointMode {
    GeneratorKernel,
    ChannelEigenOne,
}

impl Dynamics {
    pub fn dim(&self) -> usize {
        match self {
            Dynamics::Continuous(m) => m.dim(),
            Dynamics::Discrete(c) => c.dim(),
        }
    }

    pub fn mode(&self) -> FixedPointMode {
        match self {
            Dynamics::Continuous(_) => FixedPointMode::GeneratorKernel,
            Dynamics::Discrete(_) => FixedPointMode::ChannelEigenOne,
        }
    }

    /// Jump operators or Kraus operators.
    pub fn operators(&self) -> &[CMatrix] {
        match self {
            Dynamics::Continuous(m) => m.jumps(),
            Dynamics::Discrete(c) => c.kraus(),
        }
    }

    /// `L`, or `Φ − Id` for a channel; its kernel is the fixed-point space.
    pub fn generator(&self, tol: &Tolerances) -> Result<Superoperator> {
        match self {
            Dynamics::Continuous(m) => Ok(build_generator(m)),
            Dynamics::Discrete(c) => Ok(channel_superoperator(c, tol)?.minus_identity()),
        }
    }

    /// `L*`, or `Φ* − Id` for a channel.
    pub fn adjoint_generator(&self) -> Superoperator {
        match self {
            Dynamics::Continuous(m) => adjoint_generator(m),
            Dynamics::Discrete(c) => channel_adjoint(c).minus_identity(),
        }
    }
}

/// Well-formedness residuals of a model or channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub hermiticity_residual: f64,
    pub trace_preservation_residual: f64,
    pub choi_min_eigenvalue: Option<f64>,
    pub trace_preserving: bool,
    pub completely_positive: bool,
}

impl Diagnostics {
    pub fn ok(&self) -> bool {
        self.trace_preserving && self.completely_positive
    }
}

pub fn validate(dynamics: &Dynamics, tol: &Tolerances) -> Diagnostics {
    match dynamics {
        Dynamics::Continuous(model) => {
            let h = model.hamiltonian();
            let trace = build_generator(model).trace_row_norm();
            Diagnostics {
                hermiticity_residual: (h - h.adjoint()).norm(),
                trace_preservation_residual: trace,
                choi_min_eigenvalue: None,
                trace_preserving: trace <= tol.residual_tol,
                completely_positive: true,
            }
        }
        Dynamics::Discrete(channel) => {
            let trace = channel.normalization_residual();
            let choi_min = choi_min_eigenvalue(channel);
            Diagnostics {
                hermiticity_residual: 0.0,
                trace_preservation_residual: trace,
                choi_min_eigenvalue: Some(choi_min),
                trace_preserving: trace <= tol.residual_tol,
                completely_positive: choi_min >= -tol.psd_tol,
            }
        }
    }
}

/// Smallest eigenvalue of `Σ_{ij} |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)`.
pub fn choi_min_eigenvalue(channel: &KrausChannel) -> f64 {
    let n = channel.dim();
    let phi = kraus_sum(channel);
    let mut choi = CMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let mut e = CMatrix::zeros(n, n);
            e[(i, j)] = C64::new(1.0, 0.0);
            let block = phi.apply(&e).expect("shape checked");
            choi.view_mut((i * n, j * n), (n, n)).copy_from(&block);
        }
    }
    hermitian_eigen(&choi).0[0]
}

/// Hermitian orthonormal basis of `{A : S(A) = 0}` (generator kernel) or
/// `{A : S(A) = A}` (channel eigenspace at 1).
pub fn fixed_point_basis(
    s: &Superoperator,
    mode: FixedPointMode,
    tol: &Tolerances,
) -> Result<Vec<Hermitian>> {
    let target = match mode {
        FixedPointMode::GeneratorKernel => s.clone(),
        FixedPointMode::ChannelEigenOne => s.minus_identity(),
    };
    let n = s.dim();
    let kernel: Vec<CMatrix> = kernel_basis_with_floor(target.matrix(), target.scale(), tol)?
        .iter()
        .map(|v| unvectorize(v, n))
        .collect();
    let basis = hermitian_basis(&kernel, tol)?;
    if basis.is_empty() {
        return Err(Error::EmptyFixedPointSpace);
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, ket_bra, real_matrix, ZERO};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn rho(a: f64, b: C64, c: f64) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[C64::new(a, 0.0), b, b.conj(), C64::new(c, 0.0)])
    }

    fn faithful() -> LindbladModel {
        LindbladModel::dissipative(vec![ket_bra(2, 0, 1), ket_bra(2, 1, 0)], &tol()).unwrap()
    }

    fn dephasing() -> LindbladModel {
        LindbladModel::dissipative(vec![ket_bra(2, 0, 0)], &tol()).unwrap()
    }

    #[test]
    fn generator_of_flip_pair() {
        let (a, b, c) = (0.3, C64::new(0.1, -0.2), 0.7);
        let out = build_generator(&faithful()).apply(&rho(a, b, c)).unwrap();
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(c - a, 0.0), -b, -b.conj(), C64::new(a - c, 0.0)],
        );
        assert!((out - expected).norm() < 1e-15);
    }

    #[test]
    fn generator_of_single_decay() {
        let (a, b, c) = (0.3, C64::new(0.1, -0.2), 0.7);
        let model = LindbladModel::dissipative(vec![ket_bra(2, 0, 1)], &tol()).unwrap();
        let out = build_generator(&model).apply(&rho(a, b, c)).unwrap();
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(c, 0.0), -b / 2.0, -b.conj() / 2.0, C64::new(-c, 0.0)],
        );
        assert!((out - expected).norm() < 1e-15);
    }

    #[test]
    fn generator_of_dephasing() {
        let b = C64::new(0.25, 0.5);
        let out = build_generator(&dephasing()).apply(&rho(0.4, b, 0.6)).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[ZERO, -b / 2.0, -b.conj() / 2.0, ZERO]);
        assert!((out - expected).norm() < 1e-15);
    }

    #[test]
    fn empty_model_gives_zero_superoperator() {
        assert_eq!(build_generator(&LindbladModel::zero(3)), Superoperator::zero(3));
    }

    #[test]
    fn adjoint_annihilates_identity_and_sigma_z() {
        for model in [faithful(), dephasing()] {
            let out = adjoint_generator(&model).apply(&CMatrix::identity(2, 2)).unwrap();
            assert!(out.norm() < 1e-15);
        }
        let sz = diag(&[1.0, -1.0]);
        assert!(adjoint_generator(&dephasing()).apply(&sz).unwrap().norm() < 1e-15);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let err = LindbladModel::new(CMatrix::zeros(2, 2), vec![CMatrix::zeros(3, 3)], &tol());
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
        let err = KrausChannel::new(vec![CMatrix::identity(2, 2), CMatrix::identity(3, 3)]);
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
        let h = real_matrix(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            LindbladModel::new(h, vec![], &tol()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn identity_channel() {
        let ch = KrausChannel::new(vec![CMatrix::identity(2, 2)]).unwrap();
        assert_eq!(channel_superoperator(&ch, &tol()).unwrap(), Superoperator::identity(2));
    }

    #[test]
    fn pinching_channel() {
        let ch = KrausChannel::new(vec![ket_bra(2, 0, 0), ket_bra(2, 1, 1)]).unwrap();
        let s = channel_superoperator(&ch, &tol()).unwrap();
        let out = s.apply(&rho(0.2, C64::new(0.3, 0.1), 0.8)).unwrap();
        assert!((out - diag(&[0.2, 0.8])).norm() < 1e-15);
    }

    #[test]
    fn under_normalized_channel_is_rejected() {
        let ch = KrausChannel::new(vec![CMatrix::identity(2, 2).scale(0.5)]).unwrap();
        assert!(matches!(
            channel_superoperator(&ch, &tol()),
            Err(Error::KrausNormalization { .. })
        ));
        let d = validate(&Dynamics::Discrete(ch), &tol());
        assert!(!d.trace_preserving);
    }

    #[test]
    fn apply_identity_and_zero() {
        let a = rho(0.1, C64::new(2.0, -1.0), 5.0);
        assert_eq!(Superoperator::identity(2).apply(&a).unwrap(), a);
        assert_eq!(Superoperator::zero(2).apply(&a).unwrap(), CMatrix::zeros(2, 2));
        assert!(Superoperator::zero(2).apply(&CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn propagate_relaxes_to_fixed_points() {
        let t = tol();
        let start = DensityMatrix::pure(&nalgebra::dvector![ZERO, C64::new(1.0, 0.0)]);
        let s = build_generator(&faithful());
        assert_eq!(propagate(&s, 0.0, &start, &t).unwrap().matrix(), start.matrix());
        let out = propagate(&s, 50.0, &start, &t).unwrap();
        assert!((out.matrix() - diag(&[0.5, 0.5])).norm() < 1e-8);

        let decay = LindbladModel::dissipative(vec![ket_bra(2, 0, 1)], &t).unwrap();
        let out = propagate(&build_generator(&decay), 50.0, &start, &t).unwrap();
        assert!((out.matrix() - diag(&[1.0, 0.0])).norm() < 1e-8);
    }

    #[test]
    fn propagate_rejects_non_generator() {
        let s = Superoperator::identity(2);
        let err = propagate(&s, 1.0, &DensityMatrix::maximally_mixed(2), &tol());
        assert!(matches!(err, Err(Error::TraceDrift { .. })));
    }

    #[test]
    fn validate_flip_model_is_clean() {
        let d = validate(&Dynamics::Continuous(faithful()), &tol());
        assert!(d.hermiticity_residual <= 1e-12);
        assert!(d.trace_preservation_residual <= 1e-12);
        assert!(d.ok());
    }

    #[test]
    fn fixed_points_of_flip_model() {
        let basis = fixed_point_basis(&build_generator(&faithful()), FixedPointMode::GeneratorKernel, &tol())
            .unwrap();
        assert_eq!(basis.len(), 1);
        let expected = CMatrix::identity(2, 2).unscale(2f64.sqrt());
        assert!((basis[0].matrix() - expected).norm() < 1e-10);
    }

    #[test]
    fn fixed_points_of_dephasing_are_diagonal() {
        let basis = fixed_point_basis(&build_generator(&dephasing()), FixedPointMode::GeneratorKernel, &tol())
            .unwrap();
        assert_eq!(basis.len(), 2);
        for h in &basis {
            let m = h.matrix();
            assert!(m[(0, 1)].norm() < 1e-10 && m[(1, 0)].norm() < 1e-10);
        }
    }
}
