//! Distinguishability of extremal invariant states through the measurement
//! record, and its link to uniqueness of the decomposition.
//!
//! Strict inequalities are decided at `residual_tol`: a separation at or
//! below the tolerance counts as equality, so "not identifiable" means
//! "not identifiable at this tolerance". Reports always carry magnitudes.
//!
//! Channel and word indices are 0-based. A word `[i_1, …, i_p]` stands for
//! `V_{i_p} ⋯ V_{i_1}`: `i_1` is applied first.

use serde::{Deserialize, Serialize};

use crate::decomposition::{decompose, Check, DecompositionReport};
use crate::error::{Error, Result};
use crate::linalg::{dominant_index, hermitian_eigen, CMatrix, Tolerances, C64};
use crate::random::{self, gaussian};
use crate::semigroup::{fixed_point_basis, Dynamics, FixedPointMode, KrausChannel, LindbladModel};

pub const TOLERANCE_POLICY: &str =
    "separations at or below residual_tol count as equal; a failed pair means not identifiable at that tolerance";

/// Largest number of words the discrete search will enumerate.
const WORD_LIMIT: f64 = 1e7;

/// Model with `H = Σ ε(α)|α⟩⟨α|` and `L_j = Σ c(j|α)|α⟩⟨α|` in a common
/// pointer basis. The first `diffusive` channels are read out diffusively,
/// the remaining ones by counting.
#[derive(Clone, Debug, PartialEq)]
pub struct QndModel {
    energies: Vec<f64>,
    /// `amplitudes[j][α] = c(j|α)`.
    amplitudes: Vec<Vec<C64>>,
    diffusive: usize,
    /// Pointer states as columns.
    basis: CMatrix,
}

impl QndModel {
    pub fn new(energies: Vec<f64>, amplitudes: Vec<Vec<C64>>, diffusive: usize) -> Result<Self> {
        let n = energies.len();
        if n == 0 {
            return Err(Error::DimensionMismatch("no pointer states".into()));
        }
        if let Some((j, row)) = amplitudes.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "channel {j} has {} amplitudes for {n} pointer states",
                row.len()
            )));
        }
        if diffusive > amplitudes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{diffusive} diffusive channels requested but only {} channels exist",
                amplitudes.len()
            )));
        }
        if energies.iter().any(|e| !e.is_finite())
            || amplitudes.iter().flatten().any(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            energies,
            amplitudes,
            diffusive,
            basis: CMatrix::identity(n, n),
        })
    }

    pub fn pointers(&self) -> usize {
        self.energies.len()
    }

    pub fn channels(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn diffusive(&self) -> usize {
        self.diffusive
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn amplitudes(&self) -> &[Vec<C64>] {
        &self.amplitudes
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn c(&self, j: usize, a: usize) -> C64 {
        self.amplitudes[j][a]
    }

    /// `r(j|α) = c + c̄`.
    pub fn r(&self, j: usize, a: usize) -> f64 {
        2.0 * self.c(j, a).re
    }

    /// `θ(j|α) = |c|²`.
    pub fn theta(&self, j: usize, a: usize) -> f64 {
        self.c(j, a).norm_sqr()
    }

    pub fn is_diffusive(&self, j: usize) -> bool {
        j < self.diffusive
    }

    /// The model written in its pointer basis (diagonal operators).
    pub fn to_lindblad(&self) -> LindbladModel {
        let diag = |v: Vec<C64>| CMatrix::from_diagonal(&nalgebra::DVector::from_vec(v));
        let h = diag(self.energies.iter().map(|&e| C64::new(e, 0.0)).collect());
        let jumps = self.amplitudes.iter().map(|row| diag(row.clone())).collect();
        LindbladModel::new(h, jumps, &Tolerances::default()).expect("diagonal operators")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum QndVerdict {
    Qnd(QndModel),
    NotQnd { residual: f64 },
}

/// Simultaneous diagonalization of `H` and every `L_j`, or the largest
/// normality/commutator residual that rules it out.
pub fn qnd_diagonalize(model: &LindbladModel, diffusive: usize, seed: u64, tol: &Tolerances) -> Result<QndVerdict> {
    let n = model.dim();
    let mut ops: Vec<&CMatrix> = vec![model.hamiltonian()];
    ops.extend(model.jumps());
    let mut worst: f64 = 0.0;
    for (k, a) in ops.iter().enumerate() {
        worst = worst.max((*a * a.adjoint() - a.adjoint() * *a).norm());
        for b in ops.iter().skip(k + 1) {
            worst = worst.max((*a * *b - *b * *a).norm());
        }
    }
    if worst > tol.residual_tol {
        return Ok(QndVerdict::NotQnd { residual: worst });
    }

    let off_diagonal = |a: &CMatrix| (a - CMatrix::from_diagonal(&a.diagonal())).norm();
    let basis = if ops.iter().all(|a| off_diagonal(a) <= tol.residual_tol) {
        CMatrix::identity(n, n)
    } else {
        let mut rng = random::rng(seed);
        let mut x = CMatrix::zeros(n, n);
        for a in &ops {
            let re = (*a + a.adjoint()).scale(0.5);
            let im = (*a - a.adjoint()) * C64::new(0.0, -0.5);
            x += re.scale(gaussian(&mut rng)) + im.scale(gaussian(&mut rng));
        }
        let (_, vecs) = hermitian_eigen(&x);
        let mut cols: Vec<_> = vecs.column_iter().map(|c| c.into_owned()).collect();
        cols.sort_by_key(|c| dominant_index(c.as_slice()).unwrap_or(0));
        CMatrix::from_columns(&cols)
    };

    let mut residual: f64 = 0.0;
    let mut diagonals = Vec::with_capacity(ops.len());
    for a in &ops {
        let d = basis.adjoint() * *a * &basis;
        residual = residual.max(off_diagonal(&d));
        diagonals.push(d.diagonal());
    }
    if residual > tol.residual_tol {
        return Ok(QndVerdict::NotQnd { residual });
    }
    let mut qnd = QndModel::new(
        diagonals[0].iter().map(|z| z.re).collect(),
        diagonals[1..].iter().map(|d| d.iter().copied().collect()).collect(),
        diffusive.min(model.jumps().len()),
    )?;
    qnd.basis = basis;
    Ok(QndVerdict::Qnd(qnd))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentifiabilityMode {
    QndNondegeneracy,
    Continuous,
    Discrete,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// Diffusive channel separating the `r` values.
    Diffusive { channel: usize },
    /// Counting channel separating the `θ` values.
    Jump { channel: usize },
    /// Channel separating `tr((L_j + L_j†) ρ)`.
    Channel { channel: usize },
    /// Outcome word separating `tr(V_I ρ V_I†)`.
    Word { word: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub a: usize,
    pub b: usize,
    pub separated: bool,
    pub witness: Option<Witness>,
    /// Largest separation seen over every channel or word examined.
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub mode: IdentifiabilityMode,
    pub pairs: Vec<PairVerdict>,
    pub overall: bool,
    /// Set when the decomposition has a transient part.
    pub hypothesis_violated: bool,
    pub max_len: Option<usize>,
    pub policy: String,
}

impl IdentifiabilityReport {
    fn new(mode: IdentifiabilityMode, pairs: Vec<PairVerdict>, hypothesis_violated: bool, max_len: Option<usize>) -> Self {
        Self {
            mode,
            overall: pairs.iter().all(|p| p.separated),
            pairs,
            hypothesis_violated,
            max_len,
            policy: TOLERANCE_POLICY.into(),
        }
    }
}

/// For each pointer pair: a diffusive channel with distinct `r`, or a
/// counting channel with distinct `θ`.
pub fn nondegeneracy_check(qnd: &QndModel, tol: &Tolerances) -> IdentifiabilityReport {
    let n = qnd.pointers();
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let mut witness = None;
            let mut magnitude: f64 = 0.0;
            for j in 0..qnd.channels() {
                let (sep, w) = if qnd.is_diffusive(j) {
                    ((qnd.r(j, a) - qnd.r(j, b)).abs(), Witness::Diffusive { channel: j })
                } else {
                    ((qnd.theta(j, a) - qnd.theta(j, b)).abs(), Witness::Jump { channel: j })
                };
                magnitude = magnitude.max(sep);
                if witness.is_none() && sep > tol.residual_tol {
                    witness = Some(w);
                }
            }
            pairs.push(PairVerdict {
                a,
                b,
                separated: witness.is_some(),
                witness,
                magnitude,
            });
        }
    }
    IdentifiabilityReport::new(IdentifiabilityMode::QndNondegeneracy, pairs, false, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Omega {
    pub value: C64,
    /// `|Re ω + ½ Σ_j |c(j|α) − c(j|β)|²|`.
    pub identity_residual: f64,
}

/// Decay rate of the coherence `|α⟩⟨β|`:
/// `ω = i(ε_α − ε_β) + Σ_j (c_α c̄_β − ½θ_α − ½θ_β)`.
pub fn omega(qnd: &QndModel, a: usize, b: usize, tol: &Tolerances) -> Result<Omega> {
    if a == b {
        return Err(Error::DimensionMismatch("omega needs two distinct pointer states".into()));
    }
    let mut value = C64::new(0.0, qnd.energies[a] - qnd.energies[b]);
    let mut squares = 0.0;
    for j in 0..qnd.channels() {
        let (ca, cb) = (qnd.c(j, a), qnd.c(j, b));
        value += ca * cb.conj() - 0.5 * qnd.theta(j, a) - 0.5 * qnd.theta(j, b);
        squares += (ca.re - cb.re).powi(2) + (ca.im - cb.im).powi(2);
    }
    let identity_residual = (value.re + 0.5 * squares).abs();
    if identity_residual > tol.residual_tol {
        return Err(Error::IdentityViolated {
            residual: identity_residual,
        });
    }
    Ok(Omega {
        value,
        identity_residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaEntry {
    pub a: usize,
    pub b: usize,
    pub omega: Omega,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QndUniquenessRecord {
    pub nondegeneracy: IdentifiabilityReport,
    pub omegas: Vec<OmegaEntry>,
    /// Every `Re ω(α, β) < −residual_tol`.
    pub all_decaying: bool,
    pub is_unique: bool,
    pub families: usize,
    /// Largest off-diagonal norm of a fixed point in the pointer basis.
    pub fixed_point_off_diagonal: f64,
    /// Whether the checks required by non-degeneracy hold (vacuous otherwise).
    pub passed: bool,
}

/// Evaluates every `ω(α, β)` and, under non-degeneracy, checks that all
/// coherences decay and that the decomposition is unique and diagonal.
pub fn qnd_uniqueness(qnd: &QndModel, seed: u64, tol: &Tolerances) -> Result<QndUniquenessRecord> {
    let nondegeneracy = nondegeneracy_check(qnd, tol);
    let n = qnd.pointers();
    let mut omegas = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            omegas.push(OmegaEntry {
                a,
                b,
                omega: omega(qnd, a, b, tol)?,
            });
        }
    }
    let all_decaying = omegas.iter().all(|o| o.omega.value.re < -tol.residual_tol);
    let model = Dynamics::Continuous(qnd.to_lindblad());
    let report = decompose(&model, seed, tol)?;
    let gen = model.generator(tol)?;
    let fixed = fixed_point_basis(&gen, FixedPointMode::GeneratorKernel, tol)?;
    let fixed_point_off_diagonal = fixed
        .iter()
        .map(|f| (f.matrix() - CMatrix::from_diagonal(&f.matrix().diagonal())).norm())
        .fold(0.0, f64::max);
    let passed = !nondegeneracy.overall
        || (all_decaying && report.is_unique && fixed_point_off_diagonal <= tol.residual_tol);
    Ok(QndUniquenessRecord {
        nondegeneracy,
        omegas,
        all_decaying,
        is_unique: report.is_unique,
        families: report.families.len(),
        fixed_point_off_diagonal,
        passed,
    })
}

fn enclosure_pairs(report: &DecompositionReport) -> Vec<(usize, usize)> {
    let k = report.all_enclosures().len();
    (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect()
}

/// Pairs of enclosures (indexed as in [`DecompositionReport::all_enclosures`])
/// separated by `tr((L_j + L_j†)(ρ_α − ρ_β))`.
pub fn continuous_identifiability(
    model: &LindbladModel,
    report: &DecompositionReport,
    tol: &Tolerances,
) -> IdentifiabilityReport {
    let states: Vec<&CMatrix> = report.all_enclosures().iter().map(|e| e.extremal_state.matrix()).collect();
    let observables: Vec<CMatrix> = model.jumps().iter().map(|l| l + l.adjoint()).collect();
    let pairs = enclosure_pairs(report)
        .into_iter()
        .map(|(a, b)| {
            let diff = states[a] - states[b];
            let mut witness = None;
            let mut magnitude: f64 = 0.0;
            for (j, obs) in observables.iter().enumerate() {
                let sep = (obs * &diff).trace().norm();
                magnitude = magnitude.max(sep);
                if witness.is_none() && sep > tol.residual_tol {
                    witness = Some(Witness::Channel { channel: j });
                }
            }
            PairVerdict {
                a,
                b,
                separated: witness.is_some(),
                witness,
                magnitude,
            }
        })
        .collect();
    IdentifiabilityReport::new(IdentifiabilityMode::Continuous, pairs, report.transient.rank() > 0, None)
}

/// Searches outcome words by increasing length, lexicographically within a
/// length, for `tr(V_I ρ_α V_I†) ≠ tr(V_I ρ_β V_I†)`. Stops early once every
/// pair has a witness; magnitudes cover the words examined.
pub fn discrete_identifiability(
    channel: &KrausChannel,
    report: &DecompositionReport,
    max_len: usize,
    tol: &Tolerances,
) -> Result<IdentifiabilityReport> {
    if max_len == 0 {
        return Err(Error::DimensionMismatch("max_len must be at least 1".into()));
    }
    let k = channel.kraus().len();
    let count = (k as f64).powi(max_len as i32);
    if count > WORD_LIMIT {
        return Err(Error::WordExplosion { count });
    }
    let states: Vec<&CMatrix> = report.all_enclosures().iter().map(|e| e.extremal_state.matrix()).collect();
    let pair_list = enclosure_pairs(report);
    let mut witness: Vec<Option<Vec<usize>>> = vec![None; pair_list.len()];
    let mut magnitude = vec![0.0f64; pair_list.len()];

    let n = channel.dim();
    let mut word = Vec::with_capacity(max_len);
    for len in 1..=max_len {
        if witness.iter().all(Option::is_some) {
            break;
        }
        let mut search = WordSearch {
            kraus: channel.kraus(),
            states: &states,
            pairs: &pair_list,
            witness: &mut witness,
            magnitude: &mut magnitude,
            tol: tol.residual_tol,
        };
        search.descend(&CMatrix::identity(n, n), &mut word, len);
    }

    let pairs = pair_list
        .iter()
        .zip(witness)
        .zip(magnitude)
        .map(|((&(a, b), w), m)| PairVerdict {
            a,
            b,
            separated: w.is_some(),
            witness: w.map(|word| Witness::Word { word }),
            magnitude: m,
        })
        .collect();
    Ok(IdentifiabilityReport::new(
        IdentifiabilityMode::Discrete,
        pairs,
        report.transient.rank() > 0,
        Some(max_len),
    ))
}

struct WordSearch<'a> {
    kraus: &'a [CMatrix],
    states: &'a [&'a CMatrix],
    pairs: &'a [(usize, usize)],
    witness: &'a mut [Option<Vec<usize>>],
    magnitude: &'a mut [f64],
    tol: f64,
}

impl WordSearch<'_> {
    /// `product` is `V_{word}`; extends it until `word` has length `len`.
    fn descend(&mut self, product: &CMatrix, word: &mut Vec<usize>, len: usize) {
        if word.len() == len {
            let effect = product.adjoint() * product;
            let probs: Vec<f64> = self.states.iter().map(|rho| (&effect * *rho).trace().re).collect();
            for (p, &(a, b)) in self.pairs.iter().enumerate() {
                let sep = (probs[a] - probs[b]).abs();
                self.magnitude[p] = self.magnitude[p].max(sep);
                if self.witness[p].is_none() && sep > self.tol {
                    self.witness[p] = Some(word.clone());
                }
            }
            return;
        }
        for (i, v) in self.kraus.iter().enumerate() {
            word.push(i);
            self.descend(&(v * product), word, len);
            word.pop();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckRecord {
    pub identifiability: IdentifiabilityReport,
    pub is_unique: bool,
    pub transient_free: bool,
    /// `max_j ‖[Q, L_j]‖` (or `‖[Q, V_j]‖`) per family isometry.
    pub commutation: Vec<Check>,
    pub converse_counterexample: bool,
    pub notes: Vec<String>,
}

/// Ties identifiability to uniqueness: identifiability without a transient
/// part must give a unique decomposition (a violation is an error), family
/// isometries commute with the operators, and a unique decomposition that
/// is not identifiable is recorded as a counterexample to the converse.
pub fn uniqueness_cross_check(
    dynamics: &Dynamics,
    seed: u64,
    max_len: usize,
    tol: &Tolerances,
) -> Result<(CrossCheckRecord, DecompositionReport)> {
    let report = decompose(dynamics, seed, tol)?;
    let identifiability = match dynamics {
        Dynamics::Continuous(m) => continuous_identifiability(m, &report, tol),
        Dynamics::Discrete(c) => discrete_identifiability(c, &report, max_len, tol)?,
    };
    let transient_free = report.transient.rank() == 0;
    if identifiability.overall && transient_free && !report.is_unique {
        return Err(Error::UniquenessContradiction);
    }
    let ops: Vec<&CMatrix> = match dynamics {
        Dynamics::Continuous(m) => m.jumps().iter().collect(),
        Dynamics::Discrete(c) => c.kraus().iter().collect(),
    };
    let mut commutation = Vec::new();
    for (fi, f) in report.families.iter().enumerate() {
        for iso in &f.isometries {
            let residual = ops
                .iter()
                .map(|l| (&iso.q * *l - *l * &iso.q).norm())
                .fold(0.0, f64::max);
            commutation.push(Check {
                name: format!("family[{fi}] Q[{}->{}]", iso.from, iso.to),
                residual,
                passed: !transient_free || residual <= tol.residual_tol,
            });
        }
    }
    let mut notes = Vec::new();
    if !transient_free {
        notes.push("transient part present: hypothesis violated, commutation not asserted".into());
    }
    let converse_counterexample = report.is_unique && !identifiability.overall;
    if converse_counterexample {
        notes.push("converse counterexample reproduced: decomposition unique but not identifiable".into());
    }
    Ok((
        CrossCheckRecord {
            identifiability,
            is_unique: report.is_unique,
            transient_free,
            commutation,
            converse_counterexample,
            notes,
        },
        report,
    ))
}
