//! Recurrent/transient split and the decomposition of the recurrent subspace
//! into minimal enclosures.
//!
//! The pipeline:
//!
//! 1. `P_R` is the support of the maximal-support invariant state, obtained
//!    by projecting `I/n` onto the kernel of the generator along its range.
//! 2. The Heisenberg generator is compressed to `R` (the cut-off generator).
//!    Its kernel `F` is a unital †-algebra on `R`.
//! 3. Minimal central projections of `F` split `R` into blocks on which
//!    `F ≅ M_m ⊗ 1_d`. Blocks with `m = 1` are single enclosures; blocks with
//!    `m ≥ 2` carry a family of `m` equivalent `d`-dimensional enclosures,
//!    connected by matrix units that act as partial isometries.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cluster_sorted, dominant_index, hermitian_basis, hermitian_eigen, hs_inner, kernel_basis_with_floor,
    lex_cmp, numerical_rank, psd_project, support_projector, unvectorize, vectorize, CMatrix,
    CVector, DensityMatrix, Hermitian, Projector, Tolerances, C64,
};
use crate::random::{self, gaussian};
use crate::semigroup::{validate, Dynamics, FixedPointMode, Superoperator};

/// Attempts at a generic element before clustering is declared ambiguous.
const MAX_ATTEMPTS: usize = 6;
/// Neighbouring clusters must be this many cluster widths apart.
const GAP_FACTOR: f64 = 1e3;

/// How the maximal-support invariant state was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecurrentPath {
    SpectralProjection,
    CesaroAverage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentSplit {
    pub recurrent: Projector,
    pub transient: Projector,
    pub max_support_state: DensityMatrix,
    pub path: RecurrentPath,
}

/// Matrix of the spectral projection onto the kernel of `gen` along its
/// range, or `None` when the left/right kernels do not pair up cleanly.
pub fn kernel_projection(gen: &Superoperator, tol: &Tolerances) -> Result<Option<CMatrix>> {
    let m = gen.matrix();
    let right = kernel_basis_with_floor(m, gen.scale(), tol)?;
    let left = kernel_basis_with_floor(&m.adjoint(), gen.scale(), tol)?;
    if right.is_empty() || right.len() != left.len() {
        return Ok(None);
    }
    let r = CMatrix::from_columns(&right);
    let l = CMatrix::from_columns(&left);
    let gram = l.adjoint() * &r;
    let sv = gram.clone().singular_values();
    if sv.min() < 1e-8 * sv.max() {
        return Ok(None);
    }
    let Some(inv) = gram.try_inverse() else {
        return Ok(None);
    };
    Ok(Some(r * inv * l.adjoint()))
}

/// Recurrent projector from the spectral projection of `I/n`, falling back to
/// windowed Cesàro averages when the projection is ill-conditioned.
pub fn recurrent_projector(
    gen: &Superoperator,
    mode: FixedPointMode,
    tol: &Tolerances,
) -> Result<RecurrentSplit> {
    let n = gen.dim();
    let start = vectorize(&CMatrix::identity(n, n).unscale(n as f64));
    let (raw, path) = match kernel_projection(gen, tol)? {
        Some(p0) => (unvectorize(&(p0 * start), n), RecurrentPath::SpectralProjection),
        None => (cesaro_state(gen, mode, tol)?, RecurrentPath::CesaroAverage),
    };
    split_from_state(&raw, path, tol)
}

/// Recurrent projector computed by averaging only; exposed so the fallback can
/// be exercised on its own.
pub fn recurrent_projector_cesaro(
    gen: &Superoperator,
    mode: FixedPointMode,
    tol: &Tolerances,
) -> Result<RecurrentSplit> {
    let raw = cesaro_state(gen, mode, tol)?;
    split_from_state(&raw, RecurrentPath::CesaroAverage, tol)
}

fn split_from_state(raw: &CMatrix, path: RecurrentPath, tol: &Tolerances) -> Result<RecurrentSplit> {
    let state = psd_project(&Hermitian::hermitize(raw), tol)?;
    let recurrent = support_projector(state.matrix(), tol)?;
    let transient = recurrent.complement();
    Ok(RecurrentSplit {
        recurrent,
        transient,
        max_support_state: state,
        path,
    })
}

/// Average of the evolved maximally mixed state over the window `[T, 2T]`
/// (continuous) or `k ∈ [K, 2K)` (discrete), doubling `T` until the support
/// rank is stable over three doublings and the average has settled.
fn cesaro_state(gen: &Superoperator, mode: FixedPointMode, tol: &Tolerances) -> Result<CMatrix> {
    let n = gen.dim();
    let big = n * n;
    let v = vectorize(&CMatrix::identity(n, n).unscale(n as f64));
    let mut ranks: Vec<usize> = Vec::new();
    let mut previous: Option<CVector> = None;
    let mut last = None;
    match mode {
        FixedPointMode::GeneratorKernel => {
            let mut aug = CMatrix::zeros(big + 1, big + 1);
            aug.view_mut((0, 0), (big, big)).copy_from(gen.matrix());
            aug.view_mut((0, big), (big, 1)).copy_from(&v);
            let mut t = 1.0f64;
            for _ in 0..48 {
                let e = aug.scale(t).exp();
                let flow = e.view((0, 0), (big, big)).into_owned();
                let integral = e.view((0, big), (big, 1)).into_owned();
                let avg: CVector = (flow * integral).column(0).unscale(t);
                if settled(&avg, &mut previous, &mut ranks, n, tol) {
                    return Ok(unvectorize(&avg, n));
                }
                last = Some(avg);
                t *= 2.0;
            }
        }
        FixedPointMode::ChannelEigenOne => {
            let phi = gen.matrix() + CMatrix::identity(big, big);
            let mut power = phi.clone(); // Φ^K
            let mut partial = v.clone(); // Σ_{k<K} Φ^k v
            let mut k = 1.0f64;
            for _ in 0..48 {
                let avg = (&power * &partial).unscale(k);
                if settled(&avg, &mut previous, &mut ranks, n, tol) {
                    return Ok(unvectorize(&avg, n));
                }
                last = Some(avg);
                partial = &partial + &power * &partial;
                power = &power * &power;
                k *= 2.0;
            }
        }
    }
    // Out of doublings: return the best estimate rather than nothing.
    Ok(unvectorize(&last.expect("at least one iteration"), n))
}

fn settled(
    avg: &CVector,
    previous: &mut Option<CVector>,
    ranks: &mut Vec<usize>,
    n: usize,
    tol: &Tolerances,
) -> bool {
    let m = unvectorize(avg, n);
    let rank = support_projector(&Hermitian::hermitize(&m).into_matrix(), tol)
        .map(|p| p.rank())
        .unwrap_or(usize::MAX);
    ranks.push(rank);
    let change = previous
        .as_ref()
        .map(|p| (avg - p).norm())
        .unwrap_or(f64::INFINITY);
    *previous = Some(avg.clone());
    let k = ranks.len();
    k >= 3 && ranks[k - 1] == ranks[k - 2] && ranks[k - 2] == ranks[k - 3] && change <= 1e-6
}

/// `(Uᵀ ⊗ U†) · M · (conj(U) ⊗ U)`: the map `X ↦ U† S(U X U†) U` on the
/// compressed block spanned by the orthonormal columns of `U`.
pub(crate) fn compress(m: &CMatrix, u: &CMatrix) -> CMatrix {
    let left = u.transpose().kronecker(&u.adjoint());
    let right = u.map(|z| z.conj()).kronecker(u);
    left * m * right
}

/// `G(A) = P_R · L*(P_R A P_R) · P_R`, the generator of the cut-off semigroup.
pub fn cutoff_generator(adjoint_gen: &Superoperator, recurrent: &Projector) -> Superoperator {
    let p = recurrent.matrix();
    let sandwich = p.transpose().kronecker(p);
    let m = &sandwich * adjoint_gen.matrix() * &sandwich;
    Superoperator::from_matrix(adjoint_gen.dim(), m)
        .expect("shape preserved")
        .with_scale(adjoint_gen.scale())
}

/// Everything needed to test candidate enclosures.
#[derive(Clone, Debug)]
pub struct EnclosureContext {
    pub cutoff: Superoperator,
    pub recurrent: Projector,
}

impl EnclosureContext {
    pub fn new(dynamics: &Dynamics, tol: &Tolerances) -> Result<Self> {
        let gen = dynamics.generator(tol)?;
        let split = recurrent_projector(&gen, dynamics.mode(), tol)?;
        Ok(Self {
            cutoff: cutoff_generator(&dynamics.adjoint_generator(), &split.recurrent),
            recurrent: split.recurrent,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnclosureCheck {
    pub is_enclosure: bool,
    pub residual: f64,
}

/// `P_V` projects onto an enclosure inside `R` iff the cut-off generator
/// annihilates it.
pub fn is_enclosure(p: &Projector, ctx: &EnclosureContext, tol: &Tolerances) -> Result<EnclosureCheck> {
    let leak = (ctx.recurrent.complement().matrix() * p.matrix()).norm();
    if leak > tol.residual_tol {
        return Err(Error::OutsideRecurrent { residual: leak });
    }
    let residual = ctx.cutoff.apply(p.matrix())?.norm();
    Ok(EnclosureCheck {
        is_enclosure: residual <= tol.residual_tol,
        residual,
    })
}

/// One central block of the fixed-point algebra, `F|_block ≅ M_m ⊗ 1_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraBlock {
    pub central: Projector,
    pub multiplicity: usize,
    pub inner_dim: usize,
    /// `m` mutually orthogonal minimal projections summing to `central`.
    pub minimal: Vec<Projector>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraStructure {
    /// Hermitian basis of `F`, in full coordinates.
    pub basis: Vec<Hermitian>,
    pub center_dim: usize,
    pub blocks: Vec<AlgebraBlock>,
    /// Largest distance of a product of basis elements from `F`.
    pub closure_residual: f64,
}

/// Block structure of the fixed-point algebra of the cut-off generator.
pub fn algebra_structure(
    cutoff: &Superoperator,
    recurrent: &Projector,
    seed: u64,
    tol: &Tolerances,
) -> Result<AlgebraStructure> {
    let n = cutoff.dim();
    let u = recurrent.isometry();
    let r = u.ncols();
    let mut rng = random::rng(seed);

    let compressed = compress(cutoff.matrix(), &u);
    let kernel: Vec<CMatrix> = kernel_basis_with_floor(&compressed, cutoff.scale(), tol)?
        .iter()
        .map(|v| unvectorize(v, r))
        .collect();
    let basis: Vec<CMatrix> = hermitian_basis(&kernel, tol)?
        .into_iter()
        .map(Hermitian::into_matrix)
        .collect();
    if basis.is_empty() {
        return Err(Error::EmptyFixedPointSpace);
    }
    let closure_residual = closure_residual(&basis, &mut rng);

    let center = center_basis(&basis, &mut rng, tol)?;
    let central = central_projections(&center, &mut rng, tol)?;

    let mut blocks = Vec::with_capacity(central.len());
    for cols in central {
        let block_dim = cols.ncols();
        let p = &cols * cols.adjoint();
        let restricted: Vec<CMatrix> = basis.iter().map(|b| cols.adjoint() * b * &cols).collect();
        let stacked = CMatrix::from_columns(&restricted.iter().map(vectorize).collect::<Vec<_>>());
        let dim_f = numerical_rank(&stacked, tol);
        let m = (dim_f as f64).sqrt().round() as usize;
        if m == 0 || m * m != dim_f || block_dim % m != 0 {
            return Err(Error::AlgebraStructure(format!(
                "block of dimension {block_dim} carries a {dim_f}-dimensional algebra, not M_m ⊗ 1_d"
            )));
        }
        let d = block_dim / m;
        let minimal_compressed = if m == 1 {
            vec![p.clone()]
        } else {
            let probe = canonical_probe(&u, &basis);
            minimal_projections(&cols, &restricted, &probe, m, d, &mut rng, tol)?
        };
        let embed = |x: &CMatrix| &u * x * u.adjoint();
        blocks.push(AlgebraBlock {
            central: Projector::new(embed(&p), tol.residual_tol.max(1e-10))?,
            multiplicity: m,
            inner_dim: d,
            minimal: minimal_compressed
                .iter()
                .map(|e| Projector::new(embed(e), tol.residual_tol.max(1e-10)))
                .collect::<Result<_>>()?,
        });
    }

    Ok(AlgebraStructure {
        basis: basis
            .iter()
            .map(|b| Hermitian::hermitize(&(&u * b * u.adjoint())))
            .collect(),
        center_dim: center.len(),
        blocks,
        closure_residual,
    })
    .inspect(|s| {
        debug_assert_eq!(s.basis[0].dim(), n);
    })
}

fn project_onto(basis: &[CMatrix], x: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(x.nrows(), x.ncols());
    for b in basis {
        out += b * hs_inner(b, x);
    }
    out
}

/// Distance of products `B_i B_j` from the span; all pairs for small bases,
/// a seeded sample of 256 pairs otherwise.
fn closure_residual<R: Rng>(basis: &[CMatrix], rng: &mut R) -> f64 {
    let f = basis.len();
    let pairs: Vec<(usize, usize)> = if f <= 24 {
        (0..f).flat_map(|i| (0..f).map(move |j| (i, j))).collect()
    } else {
        (0..256).map(|_| (rng.random_range(0..f), rng.random_range(0..f))).collect()
    };
    pairs
        .into_iter()
        .map(|(i, j)| {
            let prod = &basis[i] * &basis[j];
            (&prod - project_onto(basis, &prod)).norm()
        })
        .fold(0.0, f64::max)
}

fn random_combination<R: Rng>(basis: &[CMatrix], rng: &mut R) -> CMatrix {
    let mut out = CMatrix::zeros(basis[0].nrows(), basis[0].ncols());
    for b in basis {
        out += b.scale(gaussian(rng));
    }
    out
}

/// Hermitian basis of the center, from the linear commutation system
/// `Σ_i c_i [B_i, T_k] = 0`. Large algebras test against a few generic
/// elements instead of the whole basis.
fn center_basis<R: Rng>(basis: &[CMatrix], rng: &mut R, tol: &Tolerances) -> Result<Vec<CMatrix>> {
    let f = basis.len();
    let tests: Vec<CMatrix> = if f <= 16 {
        basis.to_vec()
    } else {
        (0..4).map(|_| random_combination(basis, rng)).collect()
    };
    let r2 = basis[0].len();
    let mut system = CMatrix::zeros(r2 * tests.len(), f);
    for (i, b) in basis.iter().enumerate() {
        for (k, t) in tests.iter().enumerate() {
            let c = b * t - t * b;
            system
                .view_mut((k * r2, i), (r2, 1))
                .copy_from_slice(c.as_slice());
        }
    }
    let coeffs = kernel_basis_with_floor(&system, 1.0, tol)?;
    let elements: Vec<CMatrix> = coeffs
        .iter()
        .map(|c| {
            let mut z = CMatrix::zeros(basis[0].nrows(), basis[0].ncols());
            for (ci, b) in c.iter().zip(basis) {
                z += b * *ci;
            }
            z
        })
        .collect();
    let center: Vec<CMatrix> = hermitian_basis(&elements, tol)?
        .into_iter()
        .map(Hermitian::into_matrix)
        .collect();
    if center.is_empty() {
        return Err(Error::AlgebraStructure("trivial center; identity missing from F".into()));
    }
    Ok(center)
}

/// Eigen-clusters of a Hermitian matrix normalized to unit Frobenius norm.
/// Returns the clusters (as column selections of the eigenvectors) and
/// whether the split is unambiguous.
fn clusters_of(h: &CMatrix, tol: &Tolerances) -> (Vec<CMatrix>, f64) {
    let norm = h.norm();
    let scaled = if norm > 0.0 { h.unscale(norm) } else { h.clone() };
    let (vals, vecs) = hermitian_eigen(&scaled);
    let (ranges, gap) = cluster_sorted(&vals, tol.eig_cluster_tol);
    let groups = ranges
        .into_iter()
        .map(|rg| vecs.columns(rg.start, rg.len()).into_owned())
        .collect();
    (groups, gap)
}

/// Minimal central projections, each returned as an isometry onto its range.
fn central_projections<R: Rng>(center: &[CMatrix], rng: &mut R, tol: &Tolerances) -> Result<Vec<CMatrix>> {
    let r = center[0].nrows();
    if center.len() == 1 {
        return Ok(vec![CMatrix::identity(r, r)]);
    }
    let mut detail = String::new();
    for _ in 0..MAX_ATTEMPTS {
        let z = random_combination(center, rng);
        let (groups, gap) = clusters_of(&z, tol);
        if groups.len() == center.len() && gap >= GAP_FACTOR * tol.eig_cluster_tol {
            return Ok(groups);
        }
        detail = format!(
            "generic central element has {} clusters for a {}-dimensional center (min gap {gap:.3e})",
            groups.len(),
            center.len()
        );
    }
    Err(Error::AmbiguousClusters {
        attempts: MAX_ATTEMPTS,
        detail,
    })
}

/// Projection of `diag(1, …, n)` onto `F` (compressed coordinates). Used as the
/// first, deterministic candidate for splitting a block, so that families
/// aligned with the computational basis come out aligned.
fn canonical_probe(u: &CMatrix, basis: &[CMatrix]) -> CMatrix {
    let n = u.nrows();
    let d = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new((i + 1) as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    project_onto(basis, &(u.adjoint() * d * u))
}

/// Splits a central block into `m` minimal projections of rank `d` using
/// the spectral projections of a Hermitian element of the block algebra.
fn minimal_projections<R: Rng>(
    cols: &CMatrix,
    restricted: &[CMatrix],
    probe: &CMatrix,
    m: usize,
    d: usize,
    rng: &mut R,
    tol: &Tolerances,
) -> Result<Vec<CMatrix>> {
    let mut candidate = cols.adjoint() * probe * cols;
    let mut detail = String::new();
    for _ in 0..MAX_ATTEMPTS {
        let h = (&candidate + candidate.adjoint()).scale(0.5);
        let (groups, gap) = clusters_of(&h, tol);
        let sizes: Vec<usize> = groups.iter().map(|g| g.ncols()).collect();
        if groups.len() == m && sizes.iter().all(|&s| s == d) && gap >= GAP_FACTOR * tol.eig_cluster_tol {
            return Ok(groups
                .into_iter()
                .map(|g| {
                    let w = cols * g;
                    &w * w.adjoint()
                })
                .collect());
        }
        detail = format!("expected {m} clusters of size {d}, found sizes {sizes:?} (min gap {gap:.3e})");
        candidate = random_combination(restricted, rng);
    }
    Err(Error::AmbiguousClusters {
        attempts: MAX_ATTEMPTS,
        detail,
    })
}

/// Unique invariant state supported in the enclosure `P_V`.
pub fn extremal_state(p: &Projector, gen: &Superoperator, tol: &Tolerances) -> Result<DensityMatrix> {
    let u = p.isometry();
    let d = u.ncols();
    let block = compress(gen.matrix(), &u);
    let kernel = kernel_basis_with_floor(&block, gen.scale(), tol)?;
    if kernel.len() != 1 {
        return Err(Error::NotMinimal { found: kernel.len() });
    }
    let x = unvectorize(&kernel[0], d);
    let tr = x.trace();
    if tr.norm() <= tol.psd_tol {
        return Err(Error::TraceTooSmall { trace: tr.norm() });
    }
    let x = x * (tr.conj() / tr.norm());
    let local = psd_project(&Hermitian::hermitize(&x), tol)?;
    let full = &u * local.matrix() * u.adjoint();
    Ok(DensityMatrix::from_raw(Hermitian::hermitize(&full).into_matrix()))
}

/// `P_θ = cos²θ P₁ + sin²θ P₂ + sinθ cosθ (Q + Q†)` for a partial isometry
/// `Q` from `V₁` onto `V₂`.
pub fn family_projector(
    q: &CMatrix,
    p1: &Projector,
    p2: &Projector,
    theta: f64,
    tol: &Tolerances,
) -> Result<Projector> {
    let residual = isometry_residual(q, p1, p2);
    if residual > tol.residual_tol {
        return Err(Error::NotPartialIsometry { residual });
    }
    let (s, c) = theta.sin_cos();
    let m = p1.matrix().scale(c * c) + p2.matrix().scale(s * s) + (q + q.adjoint()).scale(s * c);
    Projector::new(m, tol.residual_tol)
}

/// `max(‖Q†Q − P₁‖, ‖QQ† − P₂‖)`.
pub fn isometry_residual(q: &CMatrix, p1: &Projector, p2: &Projector) -> f64 {
    let a = (q.adjoint() * q - p1.matrix()).norm();
    let b = (q * q.adjoint() - p2.matrix()).norm();
    a.max(b)
}

/// Matrix unit of `F` mapping `V_from` onto `V_to`, scaled to a partial
/// isometry with its largest entry real positive.
fn intertwiner(basis: &[Hermitian], from: &Projector, to: &Projector) -> CMatrix {
    let d = from.rank() as f64;
    let best = basis
        .iter()
        .map(|b| to.matrix() * b.matrix() * from.matrix())
        .max_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty basis");
    let mut q = best.scale(d.sqrt() / best.norm());
    if let Some(k) = dominant_index(q.as_slice()) {
        let z = q.as_slice()[k];
        q *= z.conj() / z.norm();
    }
    q
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnclosureRecord {
    pub projector: Projector,
    pub dimension: usize,
    pub extremal_state: DensityMatrix,
}

/// Partial isometry `q` with `q†q = P_from`, `qq† = P_to` (member indices).
#[derive(Clone, Debug, PartialEq)]
pub struct PairIsometry {
    pub from: usize,
    pub to: usize,
    pub q: CMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegenerateFamily {
    pub members: Vec<EnclosureRecord>,
    pub isometries: Vec<PairIsometry>,
    pub block_projector: Projector,
}

impl DegenerateFamily {
    pub fn isometry(&self, from: usize, to: usize) -> Option<&PairIsometry> {
        self.isometries.iter().find(|p| p.from == from && p.to == to)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeMode {
    Continuous,
    Discrete,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionReport {
    pub dim: usize,
    pub time_mode: TimeMode,
    pub transient: Projector,
    pub recurrent: Projector,
    pub unique_enclosures: Vec<EnclosureRecord>,
    pub families: Vec<DegenerateFamily>,
    pub is_unique: bool,
    pub recurrent_path: RecurrentPath,
    pub residuals: BTreeMap<String, f64>,
    pub tolerances: Tolerances,
    pub seed: u64,
}

impl DecompositionReport {
    /// Every enclosure projector, singles first, then family members.
    pub fn all_enclosures(&self) -> Vec<&EnclosureRecord> {
        self.unique_enclosures
            .iter()
            .chain(self.families.iter().flat_map(|f| f.members.iter()))
            .collect()
    }

    /// `D ⊕ Σ V_α ⊕ Σ_β Σ_γ V_{β,γ}` with dimensions.
    pub fn shape(&self) -> String {
        let mut parts = vec![format!("D({})", self.transient.rank())];
        for e in &self.unique_enclosures {
            parts.push(format!("V_a({})", e.dimension));
        }
        for f in &self.families {
            let members: Vec<String> = f.members.iter().map(|e| format!("V_b,g({})", e.dimension)).collect();
            parts.push(format!("[{}]", members.join(" + ")));
        }
        parts.join(" + ")
    }
}

fn enclosure_order(a: &Projector, b: &Projector) -> std::cmp::Ordering {
    b.rank()
        .cmp(&a.rank())
        .then_with(|| lex_cmp(a.matrix(), b.matrix(), 1e-9).reverse())
}

/// Full decomposition `H = D ⊕ Σ_α V_α ⊕ Σ_β Σ_γ V_{β,γ}`.
pub fn decompose(dynamics: &Dynamics, seed: u64, tol: &Tolerances) -> Result<DecompositionReport> {
    tol.validate()?;
    let diag = validate(dynamics, tol);
    if !diag.trace_preserving {
        return Err(Error::Stage {
            stage: "validate",
            source: Box::new(Error::KrausNormalization {
                residual: diag.trace_preservation_residual,
            }),
        });
    }
    if !diag.completely_positive {
        return Err(Error::Stage {
            stage: "validate",
            source: Box::new(Error::NotPositive {
                clipped: -diag.choi_min_eigenvalue.unwrap_or(0.0),
                trace: dynamics.dim() as f64,
            }),
        });
    }
    let n = dynamics.dim();
    let gen = dynamics.generator(tol).map_err(Error::at("generator"))?;
    let split = recurrent_projector(&gen, dynamics.mode(), tol).map_err(Error::at("recurrent"))?;
    let cutoff = cutoff_generator(&dynamics.adjoint_generator(), &split.recurrent);
    let structure =
        algebra_structure(&cutoff, &split.recurrent, seed, tol).map_err(Error::at("algebra"))?;

    let record = |p: &Projector| -> Result<EnclosureRecord> {
        Ok(EnclosureRecord {
            projector: p.clone(),
            dimension: p.rank(),
            extremal_state: extremal_state(p, &gen, tol)?,
        })
    };

    let mut singles = Vec::new();
    let mut families = Vec::new();
    for block in &structure.blocks {
        if block.multiplicity == 1 {
            singles.push(record(&block.central).map_err(Error::at("extremal"))?);
        } else {
            let mut members: Vec<EnclosureRecord> = block
                .minimal
                .iter()
                .map(&record)
                .collect::<Result<_>>()
                .map_err(Error::at("extremal"))?;
            members.sort_by(|a, b| enclosure_order(&a.projector, &b.projector));
            let mut isometries = Vec::new();
            for a in 0..members.len() {
                for b in a + 1..members.len() {
                    let q = intertwiner(&structure.basis, &members[a].projector, &members[b].projector);
                    isometries.push(PairIsometry { from: a, to: b, q });
                }
            }
            families.push(DegenerateFamily {
                members,
                isometries,
                block_projector: block.central.clone(),
            });
        }
    }
    singles.sort_by(|a, b| enclosure_order(&a.projector, &b.projector));
    families.sort_by(|a, b| enclosure_order(&a.members[0].projector, &b.members[0].projector));

    let mut report = DecompositionReport {
        dim: n,
        time_mode: match dynamics.mode() {
            FixedPointMode::GeneratorKernel => TimeMode::Continuous,
            FixedPointMode::ChannelEigenOne => TimeMode::Discrete,
        },
        is_unique: families.is_empty(),
        transient: split.transient,
        recurrent: split.recurrent,
        unique_enclosures: singles,
        families,
        recurrent_path: split.path,
        residuals: BTreeMap::new(),
        tolerances: *tol,
        seed,
    };
    report.residuals = structural_residuals(&report, &gen, &cutoff);
    report
        .residuals
        .insert("algebra_closure".into(), structure.closure_residual);
    Ok(report)
}

fn structural_residuals(
    report: &DecompositionReport,
    gen: &Superoperator,
    cutoff: &Superoperator,
) -> BTreeMap<String, f64> {
    let n = report.dim;
    let mut out = BTreeMap::new();
    let id = CMatrix::identity(n, n);
    out.insert(
        "transient_plus_recurrent".into(),
        (report.transient.matrix() + report.recurrent.matrix() - &id).norm(),
    );
    let all = report.all_enclosures();
    let mut ortho: f64 = 0.0;
    let mut sum = CMatrix::zeros(n, n);
    let mut enclosure: f64 = 0.0;
    let mut stationarity: f64 = 0.0;
    for (a, ea) in all.iter().enumerate() {
        sum += ea.projector.matrix();
        for eb in all.iter().skip(a + 1) {
            ortho = ortho.max((ea.projector.matrix() * eb.projector.matrix()).norm());
        }
        enclosure = enclosure.max(
            cutoff
                .apply(ea.projector.matrix())
                .map(|m| m.norm())
                .unwrap_or(f64::MAX),
        );
        stationarity = stationarity.max(
            gen.apply(ea.extremal_state.matrix())
                .map(|m| m.norm())
                .unwrap_or(f64::MAX),
        );
    }
    out.insert("mutual_orthogonality".into(), ortho);
    out.insert("sum_to_recurrent".into(), (sum - report.recurrent.matrix()).norm());
    out.insert("enclosure_invariance".into(), enclosure);
    out.insert("extremal_stationarity".into(), stationarity);
    let mut iso: f64 = 0.0;
    let mut intertwining: f64 = 0.0;
    for f in &report.families {
        for p in &f.isometries {
            let (a, b) = (&f.members[p.from], &f.members[p.to]);
            iso = iso.max(isometry_residual(&p.q, &a.projector, &b.projector));
            let mapped = &p.q * a.extremal_state.matrix() * p.q.adjoint();
            intertwining = intertwining.max((mapped - b.extremal_state.matrix()).norm());
        }
    }
    out.insert("partial_isometry".into(), iso);
    out.insert("state_intertwining".into(), intertwining);
    out
}

/// One named numerical check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub checks: Vec<Check>,
    /// Number of invariant states the block relations were tested on.
    pub states_tested: usize,
    pub passed: bool,
}

impl VerificationRecord {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks the block structure of invariant states against a report: diagonal
/// blocks proportional to extremal states, vanishing cross blocks between
/// inequivalent enclosures, and coherences within a family intertwined by `Q`.
pub fn verify_decomposition(
    report: &DecompositionReport,
    dynamics: &Dynamics,
    tol: &Tolerances,
) -> Result<VerificationRecord> {
    let n = report.dim;
    let gen = dynamics.generator(tol)?;
    let mut states: Vec<CMatrix> = Vec::new();
    match kernel_projection(&gen, tol)? {
        Some(p0) => {
            states.push(unvectorize(
                &(&p0 * vectorize(&CMatrix::identity(n, n).unscale(n as f64))),
                n,
            ));
            let mut rng = random::rng(report.seed ^ 0x5eed_5eed);
            for _ in 0..3 {
                let rho = random::density(&mut rng, n);
                states.push(unvectorize(&(&p0 * vectorize(rho.matrix())), n));
            }
        }
        None => {
            states.push(recurrent_projector_cesaro(&gen, dynamics.mode(), tol)?.max_support_state.into_matrix());
        }
    }

    // Enclosure index → (family, member) or single.
    let singles = report.unique_enclosures.len();
    let all = report.all_enclosures();
    let family_of = |k: usize| -> Option<(usize, usize)> {
        if k < singles {
            return None;
        }
        let mut idx = k - singles;
        for (fi, f) in report.families.iter().enumerate() {
            if idx < f.members.len() {
                return Some((fi, idx));
            }
            idx -= f.members.len();
        }
        None
    };

    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    let mut bump = |name: String, value: f64| {
        let e = worst.entry(name).or_insert(0.0);
        *e = e.max(value);
    };
    for rho in &states {
        let pr = report.recurrent.matrix();
        bump("support_in_recurrent".into(), (rho - pr * rho * pr).norm());
        for (a, ea) in all.iter().enumerate() {
            let pa = ea.projector.matrix();
            let block = pa * rho * pa;
            let tr = block.trace();
            bump(
                format!("diagonal_block[{a}]"),
                (&block - ea.extremal_state.matrix() * tr).norm(),
            );
            for (b, eb) in all.iter().enumerate().skip(a + 1) {
                let pb = eb.projector.matrix();
                match (family_of(a), family_of(b)) {
                    (Some((fa, ma)), Some((fb, mb))) if fa == fb => {
                        let fam = &report.families[fa];
                        let q = &fam.isometry(ma, mb).expect("pair isometry").q;
                        let x = pa * rho * pb * q;
                        let tr = x.trace();
                        bump(
                            format!("family_coherence[{a},{b}]"),
                            (&x - ea.extremal_state.matrix() * tr).norm(),
                        );
                    }
                    _ => bump(format!("cross_block[{a},{b}]"), (pa * rho * pb).norm()),
                }
            }
        }
    }
    let checks: Vec<Check> = worst
        .into_iter()
        .map(|(name, residual)| Check {
            passed: residual <= tol.residual_tol,
            name,
            residual,
        })
        .collect();
    Ok(VerificationRecord {
        passed: checks.iter().all(|c| c.passed),
        states_tested: states.len(),
        checks,
    })
}
