use chernoff_core::circle::{chernoff_transport, spectral_reference, CircleGrid, DriftPath};
use chernoff_core::evolution::{
    chernoff_apply, composition_defect, IdentityFamily, NormKind, Partition, PartitionScheme,
    PropagatorFamily, StateVector, TimeInterval,
};
use chernoff_core::matrix::{
    build_propagator, commuting_evolution_oracle, matrix_exp, ode_evolution_oracle,
    CommutingFamilySpec, MatrixGeneratorFamily, OdeEvolution, PropagatorVariant,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn dissipative() -> MatrixGeneratorFamily {
    MatrixGeneratorFamily::preset("dissipative3").unwrap()
}

fn sorted_nodes(mut inner: Vec<f64>, s: f64, t: f64) -> Vec<f64> {
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    let mut nodes = vec![s];
    nodes.extend(
        inner
            .into_iter()
            .map(|u| s + (t - s) * u)
            .filter(|&x| x > s && x < t),
    );
    nodes.push(t);
    nodes.dedup();
    nodes
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // the product applies the rightmost factor first
    #[test]
    fn fold_matches_explicit_matrix_product(
        inner in prop::collection::vec(0.0f64..1.0, 0..12),
        x in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let p = Partition::from_nodes(sorted_nodes(inner, 0.0, 1.0)).unwrap();
        let q = build_propagator(dissipative(), PropagatorVariant::FrozenExponential);
        let mut product = DMatrix::<f64>::identity(3, 3);
        for w in p.nodes().windows(2) {
            product *= q.factor(w[0], w[1]).unwrap();
        }
        let expected = &product * DVector::from_column_slice(&x);
        let got = chernoff_apply(&q, &p, &StateVector::euclidean(x)).unwrap();
        for (a, b) in got.entries().iter().zip(expected.iter()) {
            prop_assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn identity_is_refinement_invariant(
        inner in prop::collection::vec(0.0f64..1.0, 0..20),
        x in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let id = IdentityFamily { dim: 4, norm: NormKind::Sup };
        let p = Partition::from_nodes(sorted_nodes(inner, 0.3, 0.9)).unwrap();
        let state = StateVector::sup(x.clone());
        let out = chernoff_apply(&id, &p, &state).unwrap();
        prop_assert_eq!(out.entries(), &x[..]);
    }

    #[test]
    fn implicit_euler_products_contract(
        inner in prop::collection::vec(0.0f64..1.0, 0..16),
        x in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-6));
        let p = Partition::from_nodes(sorted_nodes(inner, 0.0, 1.0)).unwrap();
        let q = build_propagator(dissipative(), PropagatorVariant::ImplicitEuler);
        let x = StateVector::euclidean(x);
        let out = chernoff_apply(&q, &p, &x).unwrap();
        prop_assert!(out.norm() <= x.norm() * (1.0 + 1e-10));
    }

    #[test]
    fn ode_oracle_composes(s in 0.0f64..0.5, gap in 0.0f64..0.5, frac in 0.0f64..1.0) {
        let t = s + gap;
        let r = s + frac * gap;
        let oracle = OdeEvolution { family: dissipative(), steps: 2000 };
        let x = StateVector::euclidean(vec![0.3, -1.0, 0.7]);
        prop_assert!(composition_defect(&oracle, s, r, t, &x).unwrap() <= 1e-8);
    }
}

#[test]
fn frozen_exponential_on_commuting_family_is_riemann_sum_exponential() {
    let family = MatrixGeneratorFamily::preset("commuting3").unwrap();
    let spec = CommutingFamilySpec::from_family(&family).unwrap();
    let q = build_propagator(family, PropagatorVariant::FrozenExponential);
    let p = Partition::make(0.0, 1.0, 10, PartitionScheme::Uniform).unwrap();
    let riemann: f64 = p.steps().map(|(a, b)| spec.profile.eval(b) * (b - a)).sum();
    let expected = matrix_exp(&(&spec.base * riemann)).unwrap();
    for j in 0..3 {
        let mut e = vec![0.0; 3];
        e[j] = 1.0;
        let got = chernoff_apply(&q, &p, &StateVector::euclidean(e)).unwrap();
        for i in 0..3 {
            assert!((got.entries()[i] - expected[(i, j)]).abs() < 1e-12);
        }
    }
}

#[test]
fn commuting_oracle_agrees_with_ode_oracle() {
    let family = MatrixGeneratorFamily::preset("commuting3").unwrap();
    let spec = CommutingFamilySpec::from_family(&family).unwrap();
    let closed = commuting_evolution_oracle(&spec, 0.1, 0.9).unwrap();
    let ode = ode_evolution_oracle(&family, 0.1, 0.9, 4000).unwrap();
    assert!((closed - ode).amax() <= 1e-9);
}

#[test]
fn random_partition_error_scales_with_its_mesh() {
    let grid = CircleGrid::new(512).unwrap();
    let path = DriftPath::new(
        "linear(0.7)".parse().unwrap(),
        TimeInterval::new(0.0, 1.0).unwrap(),
    );
    let g = grid.sample(f64::cos);
    let reference = spectral_reference(0.2, 1.0, &path, &g, 2000).unwrap();
    // error per unit mesh
    let ratio = |n, scheme| {
        let p = Partition::make(0.2, 1.0, n, scheme).unwrap();
        chernoff_transport(&p, &path, &g)
            .unwrap()
            .sup_distance(&reference)
            .unwrap()
            / p.mesh()
    };
    let uniform = ratio(16, PartitionScheme::Uniform);
    for seed in [4, 9] {
        let random = ratio(16, PartitionScheme::RandomRefinement { seed });
        assert!(random < 2.0 * uniform, "{random} vs {uniform}");
    }
}

#[test]
fn kernel_family_reports_its_resolution() {
    let grid = CircleGrid::new(64).unwrap();
    let family = chernoff_core::circle::CircleKernelFamily {
        grid,
        path: DriftPath::new(
            "constant(0)".parse().unwrap(),
            TimeInterval::new(0.0, 1.0).unwrap(),
        ),
    };
    let h = family.min_step();
    assert!(h > 0.0);
    let x = StateVector::sup(vec![1.0; 64]);
    assert!(family.apply(0.5, 0.5 + 0.5 * h, &x).is_err());
    let out = family.apply(0.5, 0.5 + 2.0 * h, &x).unwrap();
    assert!(out.entries().iter().all(|v| (v - 1.0).abs() < 1e-12));
}
