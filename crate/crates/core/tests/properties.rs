mod common;

use enclosure_atlas_core::decomposition::{
    decompose, family_projector, is_enclosure, verify_decomposition, EnclosureContext,
};
use enclosure_atlas_core::identifiability::{
    discrete_identifiability, nondegeneracy_check, omega, uniqueness_cross_check, QndModel,
};
use enclosure_atlas_core::io::{ReportFile, DecompositionData};
use enclosure_atlas_core::linalg::{
    hermitian_basis, hs_inner, psd_project, support_projector, CMatrix, Hermitian, Tolerances, C64,
};
use enclosure_atlas_core::oqrw::{closed_classes, invariant_measures, minimal_oqrw, verify_oqrw_theorem};
use enclosure_atlas_core::random::{self, ginibre};
use enclosure_atlas_core::semigroup::{
    adjoint_generator, build_generator, channel_superoperator, fixed_point_basis, Dynamics, FixedPointMode,
    KrausChannel,
};
use proptest::prelude::*;

fn tol() -> Tolerances {
    Tolerances::default()
}

/// Kraus operators from the blocks of a random isometry C^n → C^{kn}.
fn random_channel(seed: u64, n: usize, k: usize) -> KrausChannel {
    let mut rng = random::rng(seed);
    let u = random::unitary(&mut rng, n * k);
    let ops = (0..k).map(|j| u.view((j * n, 0), (n, n)).into_owned()).collect();
    KrausChannel::new(ops).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn psd_projection_is_a_state(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = random::rng(seed);
        let h = Hermitian::hermitize(&(random::density(&mut rng, n).into_matrix() + random::hermitian(&mut rng, n).scale(1e-6)));
        let rho = psd_project(&h, &tol()).unwrap();
        prop_assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
        let (vals, _) = Hermitian::hermitize(rho.matrix()).eigen();
        prop_assert!(vals.iter().all(|&v| v >= -1e-14));
    }

    #[test]
    fn support_projector_is_idempotent(seed in any::<u64>(), n in 1usize..6, r in 1usize..6) {
        let mut rng = random::rng(seed);
        let g = ginibre(&mut rng, n, r.min(n));
        let p = support_projector(&(&g * g.adjoint()), &tol()).unwrap();
        prop_assert_eq!(p.rank(), r.min(n));
        prop_assert!((p.matrix() * p.matrix() - p.matrix()).norm() < 1e-12);
    }

    #[test]
    fn hermitian_basis_is_orthonormal(seed in any::<u64>(), n in 1usize..5, k in 1usize..4) {
        let mut rng = random::rng(seed);
        let span: Vec<CMatrix> = (0..k)
            .flat_map(|_| {
                let g = ginibre(&mut rng, n, n);
                [g.clone(), g.adjoint()]
            })
            .collect();
        let basis = hermitian_basis(&span, &tol()).unwrap();
        for (i, a) in basis.iter().enumerate() {
            prop_assert!((a.matrix() - a.matrix().adjoint()).norm() < 1e-12);
            for (j, b) in basis.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((hs_inner(a.matrix(), b.matrix()) - C64::new(expected, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn generator_is_trace_annihilating_and_hermiticity_preserving(seed in any::<u64>()) {
        let s = common::structured_lindblad(seed, 5, 3);
        let gen = build_generator(&s.model);
        prop_assert!(gen.trace_row_norm() < 1e-10);
        let mut rng = random::rng(seed ^ 1);
        let h = random::hermitian(&mut rng, s.model.dim());
        let out = gen.apply(&h).unwrap();
        prop_assert!((&out - out.adjoint()).norm() < 1e-10);
        // ⟨A, L(B)⟩ = ⟨L*(A), B⟩.
        let adj = adjoint_generator(&s.model);
        let a = ginibre(&mut rng, s.model.dim(), s.model.dim());
        let b = ginibre(&mut rng, s.model.dim(), s.model.dim());
        let lhs = hs_inner(&a, &gen.apply(&b).unwrap());
        let rhs = hs_inner(&adj.apply(&a).unwrap(), &b);
        prop_assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn channels_preserve_trace(seed in any::<u64>(), n in 1usize..5, k in 1usize..4) {
        let ch = random_channel(seed, n, k);
        let s = channel_superoperator(&ch, &tol()).unwrap();
        let rho = random::density(&mut random::rng(seed), n);
        prop_assert!((s.apply(rho.matrix()).unwrap().trace().re - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn decomposition_recovers_construction(seed in any::<u64>()) {
        let s = common::structured_lindblad(seed, 6, 4);
        let r = decompose(&Dynamics::Continuous(s.model.clone()), seed, &tol()).unwrap();
        prop_assert_eq!(r.transient.rank(), s.transient);
        let mut dims: Vec<usize> = r.all_enclosures().iter().map(|e| e.dimension).collect();
        let mut blocks = s.blocks.clone();
        dims.sort_unstable();
        blocks.sort_unstable();
        prop_assert_eq!(dims, blocks);
        prop_assert!(r.is_unique == r.families.is_empty());
    }

    #[test]
    fn reported_enclosures_are_enclosures(seed in any::<u64>()) {
        let s = common::structured_lindblad(seed, 6, 4);
        let d = Dynamics::Continuous(s.model.clone());
        let r = decompose(&d, seed, &tol()).unwrap();
        let ctx = EnclosureContext::new(&d, &tol()).unwrap();
        let all = r.all_enclosures();
        for e in &all {
            prop_assert!(is_enclosure(&e.projector, &ctx, &tol()).unwrap().is_enclosure);
            let support = support_projector(e.extremal_state.matrix(), &tol()).unwrap();
            prop_assert!((support.matrix() - e.projector.matrix() * support.matrix()).norm() < 1e-8);
        }
        for (a, ea) in all.iter().enumerate() {
            for eb in all.iter().skip(a + 1) {
                let sa = support_projector(ea.extremal_state.matrix(), &tol()).unwrap();
                let sb = support_projector(eb.extremal_state.matrix(), &tol()).unwrap();
                prop_assert!((sa.matrix() - sb.matrix()).norm() >= 0.5);
            }
        }
        let v = verify_decomposition(&r, &d, &tol()).unwrap();
        prop_assert!(v.passed, "{:?}", v.failures().collect::<Vec<_>>());
    }

    #[test]
    fn family_rotations_are_enclosures(seed in any::<u64>(), theta in 0.0f64..std::f64::consts::PI) {
        let (model, _) = common::doubled_block(seed);
        let d = Dynamics::Continuous(model.clone());
        let r = decompose(&d, seed, &tol()).unwrap();
        prop_assert_eq!(r.families.len(), 1);
        let f = &r.families[0];
        prop_assert_eq!(f.members[0].dimension, f.members[1].dimension);
        let q = &f.isometry(0, 1).unwrap().q;
        let (a, b) = (&f.members[0], &f.members[1]);
        prop_assert!((b.extremal_state.matrix() - q * a.extremal_state.matrix() * q.adjoint()).norm() < 1e-8);
        let ctx = EnclosureContext::new(&d, &tol()).unwrap();
        let p = family_projector(q, &a.projector, &b.projector, theta, &tol()).unwrap();
        prop_assert!(is_enclosure(&p, &ctx, &tol()).unwrap().is_enclosure);
        // Transient-free family: Q commutes with every jump.
        for l in model.jumps() {
            prop_assert!((q * l - l * q).norm() < 1e-8);
        }
        let v = verify_decomposition(&r, &d, &tol()).unwrap();
        prop_assert!(v.passed, "{:?}", v.failures().collect::<Vec<_>>());
    }

    #[test]
    fn decomposition_is_reproducible_and_serializes_exactly(seed in any::<u64>()) {
        let s = common::structured_lindblad(seed, 5, 3);
        let d = Dynamics::Continuous(s.model);
        let a = decompose(&d, seed, &tol()).unwrap();
        let b = decompose(&d, seed, &tol()).unwrap();
        prop_assert_eq!(&a, &b);
        let mut file = ReportFile::new("analyze", &tol(), seed);
        file.decomposition = Some(DecompositionData::from(&a));
        let text = file.to_json();
        prop_assert_eq!(ReportFile::parse(&text).unwrap(), file);
    }

    #[test]
    fn oqrw_matches_markov_chain(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = random::rng(seed);
        let q = common::random_rates(&mut rng, n);
        prop_assert_eq!(closed_classes(&q), common::reachability_classes(&q));
        for pi in invariant_measures(&q).unwrap() {
            prop_assert!(pi.iter().all(|&x| x >= -1e-12));
            prop_assert!((pi.sum() - 1.0).abs() < 1e-12);
            prop_assert!((pi.transpose() * q.matrix()).amax() <= tol().residual_tol);
        }
        let gen = build_generator(&minimal_oqrw(&q));
        prop_assert!(gen.trace_row_norm() < 1e-10);
        let (cmp, _) = verify_oqrw_theorem(&q, seed, &tol()).unwrap();
        prop_assert!(cmp.passed, "{:?}", cmp);
    }

    #[test]
    fn omega_sum_of_squares(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let qnd = common::random_qnd(&mut rng);
        let n = qnd.pointers();
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let w = omega(&qnd, a, b, &tol()).unwrap();
                prop_assert!(w.value.re <= 1e-12);
                let same = (0..qnd.channels()).all(|j| qnd.c(j, a) == qnd.c(j, b));
                prop_assert_eq!(w.value.re.abs() <= 1e-12, same);
                if same {
                    let back = omega(&qnd, b, a, &tol()).unwrap();
                    prop_assert!((w.value.im + back.value.im).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn nondegeneracy_forces_diagonal_fixed_points(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let qnd = common::random_qnd(&mut rng);
        if nondegeneracy_check(&qnd, &tol()).overall {
            let gen = build_generator(&qnd.to_lindblad());
            for f in fixed_point_basis(&gen, FixedPointMode::GeneratorKernel, &tol()).unwrap() {
                let m = f.matrix();
                prop_assert!((m - CMatrix::from_diagonal(&m.diagonal())).norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn discrete_identifiability_is_monotone(seed in any::<u64>(), n in 2usize..4, k in 1usize..4) {
        let ch = random_channel(seed, n, k);
        let d = Dynamics::Discrete(ch.clone());
        let r = decompose(&d, seed, &tol()).unwrap();
        let mut previous = false;
        for len in 1..=4 {
            let overall = discrete_identifiability(&ch, &r, len, &tol()).unwrap().overall;
            prop_assert!(!previous || overall);
            previous = overall;
        }
        // Identifiability without a transient part never coexists with a family.
        prop_assert!(uniqueness_cross_check(&d, seed, 4, &tol()).is_ok());
    }
}

#[test]
fn qnd_model_rejects_bad_split() {
    assert!(QndModel::new(vec![0.0], vec![vec![C64::new(1.0, 0.0)]], 2).is_err());
}
