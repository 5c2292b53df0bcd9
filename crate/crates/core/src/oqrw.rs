//! Open quantum random walks on finite graphs, and the comparison of the
//! minimal walk's decomposition with classical Markov-chain analysis.
//!
//! Index convention: `q[i][j]` is the rate of a jump from vertex `i` to vertex
//! `j` (row convention, `πQ = 0`). The transition operator `B^i_j` moves the
//! walker from vertex `j` to vertex `i`, so a rate matrix induces
//! `B^i_j = √q[j][i]`. Vertices are 0-based.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::decomposition::{decompose, Check, DecompositionReport};
use crate::error::{Error, Result};
use crate::linalg::{ket_bra, CMatrix, Tolerances, C64};
use crate::semigroup::{Dynamics, KrausChannel, LindbladModel};

pub const OQRW_CONVENTION: &str =
    "q[i][j] is the rate of a jump i -> j; B^i_j = sqrt(q[j][i]) moves the walker from vertex j to vertex i; vertices are 0-based";

/// Generator of a continuous-time Markov chain on `n` states.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    q: DMatrix<f64>,
}

impl RateMatrix {
    pub fn new(q: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::NotSquare {
                rows: q.nrows(),
                cols: q.ncols(),
            });
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n = q.nrows();
        for i in 0..n {
            for j in 0..n {
                if i != j && q[(i, j)] < 0.0 {
                    return Err(Error::InvalidRates(format!(
                        "off-diagonal rate q[{i}][{j}] = {} is negative",
                        q[(i, j)]
                    )));
                }
            }
            if q[(i, i)] > 0.0 {
                return Err(Error::InvalidRates(format!(
                    "diagonal entry q[{i}][{i}] = {} is positive",
                    q[(i, i)]
                )));
            }
            let sum: f64 = q.row(i).iter().sum();
            if sum.abs() > tol.residual_tol {
                return Err(Error::InvalidRates(format!("row {i} sums to {sum:e}, not 0")));
            }
        }
        Ok(Self { q })
    }

    /// Row-major construction, mainly for tests and fixtures.
    pub fn from_rows(rows: &[Vec<f64>], tol: &Tolerances) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::InvalidRates(format!(
                "row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]), tol)
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// States with no outflow (`q[i][i] = 0`).
    pub fn absorbing(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.q[(i, i)] == 0.0).collect()
    }
}

/// Walk on `vertices` sites with an inner space of dimension `inner_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct OqrwSpec {
    vertices: usize,
    inner_dim: usize,
    /// `transitions[i][j] = B^i_j`, moving the walker from `j` to `i`.
    transitions: Vec<Vec<CMatrix>>,
    hamiltonians: Vec<CMatrix>,
}

impl OqrwSpec {
    pub fn new(transitions: Vec<Vec<CMatrix>>, hamiltonians: Vec<CMatrix>) -> Result<Self> {
        let vertices = transitions.len();
        if vertices == 0 {
            return Err(Error::DimensionMismatch("graph has no vertices".into()));
        }
        let inner_dim = transitions[0]
            .first()
            .map(|b| b.nrows())
            .ok_or_else(|| Error::DimensionMismatch("empty transition row".into()))?;
        for (i, row) in transitions.iter().enumerate() {
            if row.len() != vertices {
                return Err(Error::DimensionMismatch(format!(
                    "transition row {i} has {} entries for {vertices} vertices",
                    row.len()
                )));
            }
            for (j, b) in row.iter().enumerate() {
                if b.shape() != (inner_dim, inner_dim) {
                    return Err(Error::DimensionMismatch(format!(
                        "B^{i}_{j} is {}x{}, expected {inner_dim}x{inner_dim}",
                        b.nrows(),
                        b.ncols()
                    )));
                }
            }
        }
        if hamiltonians.len() != vertices {
            return Err(Error::DimensionMismatch(format!(
                "{} local Hamiltonians for {vertices} vertices",
                hamiltonians.len()
            )));
        }
        for (i, h) in hamiltonians.iter().enumerate() {
            if h.shape() != (inner_dim, inner_dim) {
                return Err(Error::DimensionMismatch(format!("H_{i} has the wrong shape")));
            }
        }
        Ok(Self {
            vertices,
            inner_dim,
            transitions,
            hamiltonians,
        })
    }

    /// One-dimensional inner space, `B^i_j = √q[j][i]`, no Hamiltonian.
    pub fn from_rates(q: &RateMatrix) -> Self {
        let n = q.n();
        let one = |x: f64| CMatrix::from_element(1, 1, C64::new(x, 0.0));
        let transitions = (0..n)
            .map(|to| {
                (0..n)
                    .map(|from| {
                        if to == from {
                            one(0.0)
                        } else {
                            one(q.matrix()[(from, to)].sqrt())
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            vertices: n,
            inner_dim: 1,
            transitions,
            hamiltonians: vec![one(0.0); n],
        }
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn inner_dim(&self) -> usize {
        self.inner_dim
    }

    pub fn transition(&self, to: usize, from: usize) -> &CMatrix {
        &self.transitions[to][from]
    }

    /// `B^i_j ⊗ |i⟩⟨j|` for every non-zero `B^i_j`.
    fn lifted(&self) -> Vec<CMatrix> {
        let g = self.vertices;
        let mut out = Vec::new();
        for i in 0..g {
            for j in 0..g {
                let b = &self.transitions[i][j];
                if b.norm() > 0.0 {
                    out.push(b.kronecker(&ket_bra(g, i, j)));
                }
            }
        }
        out
    }

    fn hamiltonian(&self) -> CMatrix {
        let g = self.vertices;
        let n = self.inner_dim * g;
        let mut h = CMatrix::zeros(n, n);
        for (i, hi) in self.hamiltonians.iter().enumerate() {
            h += hi.kronecker(&ket_bra(g, i, i));
        }
        h
    }
}

/// Minimal walk: jumps `√q[i][j] |j⟩⟨i|` for `i ≠ j`, zero Hamiltonian.
pub fn minimal_oqrw(q: &RateMatrix) -> LindbladModel {
    let n = q.n();
    let mut jumps = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let rate = q.matrix()[(i, j)];
            if i != j && rate > 0.0 {
                jumps.push(ket_bra(n, j, i).scale(rate.sqrt()));
            }
        }
    }
    LindbladModel::new(CMatrix::zeros(n, n), jumps, &Tolerances::default()).expect("jumps are well formed")
}

/// Continuous-time walk on `H ⊗ K`, basis index `h·|G| + v`.
pub fn general_oqrw(spec: &OqrwSpec, tol: &Tolerances) -> Result<LindbladModel> {
    LindbladModel::new(spec.hamiltonian(), spec.lifted(), tol)
}

/// Discrete-time walk with Kraus operators `B^i_j ⊗ |i⟩⟨j|`; requires
/// `Σ_i (B^i_j)† B^i_j = 1` for every vertex `j`.
pub fn general_oqrw_channel(spec: &OqrwSpec, tol: &Tolerances) -> Result<KrausChannel> {
    let d = spec.inner_dim;
    for j in 0..spec.vertices {
        let mut sum = CMatrix::zeros(d, d);
        for i in 0..spec.vertices {
            let b = &spec.transitions[i][j];
            sum += b.adjoint() * b;
        }
        let residual = (sum - CMatrix::identity(d, d)).norm();
        if residual > tol.residual_tol {
            return Err(Error::KrausNormalization { residual });
        }
    }
    KrausChannel::checked(spec.lifted(), tol)
}

/// Closed communication classes: strongly connected components of the jump
/// graph with no edge leaving them. Each class is sorted, and classes are
/// ordered by their smallest state.
pub fn closed_classes(q: &RateMatrix) -> Vec<Vec<usize>> {
    let n = q.n();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && q.matrix()[(i, j)] > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut component = vec![0usize; n];
    let sccs = tarjan_scc(&graph);
    for (c, members) in sccs.iter().enumerate() {
        for v in members {
            component[v.index()] = c;
        }
    }
    let mut classes: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members.iter().all(|v| {
                graph
                    .neighbors(*v)
                    .all(|w| component[w.index()] == *c)
            })
        })
        .map(|(_, members)| {
            let mut m: Vec<usize> = members.iter().map(|v| v.index()).collect();
            m.sort_unstable();
            m
        })
        .collect();
    classes.sort_by_key(|c| c[0]);
    classes
}

/// One invariant probability vector per closed class, supported on it.
pub fn invariant_measures(q: &RateMatrix) -> Result<Vec<DVector<f64>>> {
    let n = q.n();
    closed_classes(q)
        .into_iter()
        .map(|class| {
            let k = class.len();
            let mut a = DMatrix::from_fn(k, k, |r, c| q.matrix()[(class[c], class[r])]);
            a.row_mut(k - 1).fill(1.0);
            let mut b = DVector::zeros(k);
            b[k - 1] = 1.0;
            let local = a
                .lu()
                .solve(&b)
                .filter(|x| x.iter().all(|v| v.is_finite()))
                .ok_or_else(|| Error::SingularClass { class: class.clone() })?;
            let mut pi = DVector::zeros(n);
            for (idx, &s) in class.iter().enumerate() {
                pi[s] = local[idx];
            }
            Ok(pi)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OqrwComparison {
    pub convention: String,
    pub classes: Vec<Vec<usize>>,
    pub measures: Vec<Vec<f64>>,
    pub clauses: Vec<Check>,
    /// States with `q[i][i] = 0`.
    pub absorbing: Vec<usize>,
    pub notes: Vec<String>,
    pub passed: bool,
}

/// Decomposes the minimal walk of `q` and compares it with the closed classes
/// and invariant measures of the chain.
pub fn verify_oqrw_theorem(q: &RateMatrix, seed: u64, tol: &Tolerances) -> Result<(OqrwComparison, DecompositionReport)> {
    let n = q.n();
    let classes = closed_classes(q);
    let measures = invariant_measures(q)?;
    let report = decompose(&Dynamics::Continuous(minimal_oqrw(q)), seed, tol)?;
    let absorbing = q.absorbing();
    let mut notes = Vec::new();
    if !absorbing.is_empty() {
        notes.push(format!(
            "states {absorbing:?} have zero outflow; the theorem's nonzero-diagonal assumption does not hold there"
        ));
    }

    let class_projector = |c: &[usize]| {
        let mut p = CMatrix::zeros(n, n);
        for &i in c {
            p[(i, i)] = C64::new(1.0, 0.0);
        }
        p
    };
    let enclosures = report.all_enclosures();

    // (a) bijection between enclosures and classes.
    let mut used = vec![false; classes.len()];
    let mut match_residual: f64 = 0.0;
    let mut state_residual: f64 = 0.0;
    let mut matched = enclosures.len() == classes.len();
    for e in &enclosures {
        let best = classes
            .iter()
            .enumerate()
            .map(|(k, c)| (k, (e.projector.matrix() - class_projector(c)).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((k, r)) if r <= tol.residual_tol && !used[k] => {
                used[k] = true;
                match_residual = match_residual.max(r);
                // (b) extremal state equals the class measure.
                let target = CMatrix::from_diagonal(&measures[k].map(|x| C64::new(x, 0.0)));
                state_residual = state_residual.max((e.extremal_state.matrix() - target).norm());
            }
            Some((_, r)) => {
                matched = false;
                match_residual = match_residual.max(r);
            }
            None => matched = false,
        }
    }
    if enclosures.is_empty() {
        state_residual = f64::MAX;
    }

    // (c) families may only come from zero-outflow singletons.
    let mut allowed_families = true;
    for f in &report.families {
        let singletons = f.members.iter().all(|m| {
            m.dimension == 1
                && classes
                    .iter()
                    .any(|c| c.len() == 1 && absorbing.contains(&c[0]) && (m.projector.matrix() - class_projector(c)).norm() <= tol.residual_tol)
        });
        if singletons {
            notes.push(format!(
                "degenerate family of {} zero-outflow states: every superposition of them is also a minimal enclosure",
                f.members.len()
            ));
        } else {
            allowed_families = false;
        }
    }

    let closed: Vec<usize> = classes.iter().flatten().copied().collect();
    let transient_states: Vec<usize> = (0..n).filter(|i| !closed.contains(i)).collect();
    let transient_residual = (report.transient.matrix() - class_projector(&transient_states)).norm();

    let clauses = vec![
        Check {
            name: "enclosures_are_closed_classes".into(),
            residual: match_residual,
            passed: matched,
        },
        Check {
            name: "extremal_states_are_invariant_measures".into(),
            residual: state_residual,
            passed: matched && state_residual <= tol.residual_tol,
        },
        Check {
            name: "no_degenerate_families".into(),
            residual: report.families.len() as f64,
            passed: allowed_families,
        },
        Check {
            name: "transient_is_non_closed_states".into(),
            residual: transient_residual,
            passed: transient_residual <= tol.residual_tol,
        },
    ];
    let comparison = OqrwComparison {
        convention: OQRW_CONVENTION.into(),
        classes,
        measures: measures.iter().map(|m| m.iter().copied().collect()).collect(),
        passed: clauses.iter().all(|c| c.passed),
        clauses,
        absorbing,
        notes,
    };
    Ok((comparison, report))
}
