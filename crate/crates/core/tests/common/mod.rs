#![allow(dead_code)]

use enclosure_atlas_core::identifiability::QndModel;
use enclosure_atlas_core::linalg::{CMatrix, Tolerances, C64};
use enclosure_atlas_core::oqrw::RateMatrix;
use enclosure_atlas_core::random::{self, ginibre, SeededRng};
use enclosure_atlas_core::semigroup::LindbladModel;
use nalgebra::DMatrix;
use rand::Rng;

/// Lindblad model built from known pieces: recurrent blocks of the given
/// sizes, plus a transient part draining into the first block, all rotated
/// by a random unitary.
pub struct Structured {
    pub model: LindbladModel,
    pub blocks: Vec<usize>,
    pub transient: usize,
    /// Columns: the rotated computational basis.
    pub frame: CMatrix,
}

fn block_diag(parts: &[CMatrix], n: usize) -> CMatrix {
    let mut out = CMatrix::zeros(n, n);
    let mut at = 0;
    for p in parts {
        let d = p.nrows();
        out.view_mut((at, at), (d, d)).copy_from(p);
        at += d;
    }
    out
}

pub fn structured_lindblad(seed: u64, n_max: usize, max_jumps: usize) -> Structured {
    let mut rng = random::rng(seed);
    let n = rng.random_range(2..=n_max);
    let transient = if rng.random_bool(0.4) { rng.random_range(1..=(n - 1).min(2)) } else { 0 };
    let r = n - transient;
    let mut blocks = Vec::new();
    let mut left = r;
    while left > 0 {
        let d = rng.random_range(1..=left.min(3));
        blocks.push(d);
        left -= d;
    }
    // The drain gets its own jump: mixing it into a block jump would couple
    // R and D through L†L and break the invariance of R.
    let drains = usize::from(transient > 0);
    let jumps_count = rng.random_range(1 + drains..=max_jumps.max(1 + drains));
    let mut jumps = Vec::with_capacity(jumps_count);
    if drains > 0 {
        let mut l = CMatrix::zeros(n, n);
        l.view_mut((0, r), (blocks[0], transient)).copy_from(&ginibre(&mut rng, blocks[0], transient));
        jumps.push(l);
    }
    for _ in drains..jumps_count {
        let mut parts: Vec<CMatrix> = blocks.iter().map(|&d| ginibre(&mut rng, d, d)).collect();
        parts.push(CMatrix::zeros(transient, transient));
        jumps.push(block_diag(&parts, n));
    }
    let mut hs: Vec<CMatrix> = blocks.iter().map(|&d| random::hermitian(&mut rng, d)).collect();
    hs.push(random::hermitian(&mut rng, transient));
    let h = block_diag(&hs, n);
    let frame = random::unitary(&mut rng, n);
    let rot = |m: &CMatrix| &frame * m * frame.adjoint();
    let model = LindbladModel::new(
        rot(&h),
        jumps.iter().map(rot).collect(),
        &Tolerances::default(),
    )
    .expect("well-formed model");
    Structured {
        model,
        blocks,
        transient,
        frame,
    }
}

/// Irreducible block `(H₁, L_j)` on C³ together with `W H₁ W†, W L_j W†`,
/// as a model on C⁶ whose enclosures form one family of two.
pub fn doubled_block(seed: u64) -> (LindbladModel, CMatrix) {
    let mut rng = random::rng(seed);
    let h1 = random::hermitian(&mut rng, 3);
    let ls: Vec<CMatrix> = (0..2).map(|_| ginibre(&mut rng, 3, 3)).collect();
    let w = random::unitary(&mut rng, 3);
    let sum = |a: &CMatrix| block_diag(&[a.clone(), &w * a * w.adjoint()], 6);
    let model = LindbladModel::new(sum(&h1), ls.iter().map(sum).collect(), &Tolerances::default())
        .expect("well-formed model");
    (model, w)
}

pub fn random_rates(rng: &mut SeededRng, n: usize) -> RateMatrix {
    let density = [0.2, 0.5, 1.0][rng.random_range(0..3)];
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut out = 0.0;
        for j in 0..n {
            if i != j && rng.random_bool(density) {
                let v: f64 = rng.random_range(0.1..3.0);
                q[(i, j)] = v;
                out += v;
            }
        }
        q[(i, i)] = -out;
    }
    RateMatrix::new(q, &Tolerances::default()).expect("valid by construction")
}

/// Random QND data. Half of the models draw amplitudes from a small set so
/// that coincidences (and non-degeneracy failures) occur.
pub fn random_qnd(rng: &mut SeededRng) -> QndModel {
    let pointers = rng.random_range(2..=5);
    let channels = rng.random_range(0..=4);
    let p = rng.random_range(0..=channels);
    let coarse = rng.random_bool(0.5);
    let palette = [
        C64::new(0.0, 0.0),
        C64::new(1.0, 0.0),
        C64::new(0.0, 1.0),
        C64::new(0.0, -1.0),
        C64::new(1.0, 1.0),
    ];
    let draw = |rng: &mut SeededRng| {
        if coarse {
            palette[rng.random_range(0..palette.len())]
        } else {
            C64::new(random::gaussian(rng), random::gaussian(rng))
        }
    };
    let energies = (0..pointers)
        .map(|_| if coarse { rng.random_range(0..2) as f64 } else { random::gaussian(rng) })
        .collect();
    let amplitudes = (0..channels).map(|_| (0..pointers).map(|_| draw(rng)).collect()).collect();
    QndModel::new(energies, amplitudes, p).expect("consistent shapes")
}

/// Boolean reachability closure; closed classes are the mutual-reachability
/// classes of states that reach nothing outside their class.
pub fn reachability_classes(q: &RateMatrix) -> Vec<Vec<usize>> {
    let n = q.n();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
        for j in 0..n {
            if q.matrix()[(i, j)] > 0.0 {
                reach[i][j] = true;
            }
        }
    }
    // Repeated boolean squaring until stable.
    loop {
        let mut next = reach.clone();
        for i in 0..n {
            for k in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            next[i][j] = true;
                        }
                    }
                }
            }
        }
        if next == reach {
            break;
        }
        reach = next;
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let closed = (0..n).all(|j| !reach[i][j] || reach[j][i]);
        if !closed || classes.iter().any(|c| c.contains(&i)) {
            continue;
        }
        classes.push((0..n).filter(|&j| reach[i][j] && reach[j][i]).collect());
    }
    classes.sort_by_key(|c| c[0]);
    classes
}

/// Random density matrix compressed to the range of `p` and renormalized.
pub fn state_in(rng: &mut SeededRng, p: &CMatrix) -> CMatrix {
    let rho = random::density(rng, p.nrows()).into_matrix();
    let x = p * rho * p;
    let tr = x.trace();
    x / tr
}
