use miqpcert::geometry::Polyhedron;
use miqpcert::numerics::{dot, norm2, Matrix};
use miqpcert::pwq::{dominates, Dominance, QuadraticFunc};
use miqpcert::qpsolve::{kkt_residuals, solve};
use miqpcert::{bruteforce_miqp, certify, qpcert, random_mpmiqp, solve_miqp, CertOptions, MeasureRegistry};
use proptest::prelude::*;

fn unit_square() -> Polyhedron {
    Polyhedron::from_box(&[-1.0, -1.0], &[1.0, 1.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chebyshev_center_is_interior(cuts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -0.5f64..1.0), 0..6)) {
        let mut p = unit_square();
        for (a0, a1, beta) in cuts {
            p = p.with_halfspace(&[a0, a1], beta);
        }
        if let Ok((c, r)) = p.chebyshev_center() {
            prop_assert!(r >= 0.0);
            for i in 0..p.n_facets() {
                let row = p.a().row(i);
                let slack = p.b()[i] - dot(row, &c);
                prop_assert!(slack >= r * norm2(row) - 1e-7, "facet {i} slack {slack} radius {r}");
            }
        }
    }

    #[test]
    fn reduce_keeps_membership(
        cuts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.0f64..1.5), 1..6),
        probes in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 20),
    ) {
        let mut p = unit_square();
        for (a0, a1, beta) in cuts {
            p = p.with_halfspace(&[a0, a1], beta);
        }
        let r = p.reduce().unwrap();
        prop_assert!(r.n_facets() <= p.n_facets());
        for (x, y) in probes {
            let t = [x, y];
            let slack = (0..p.n_facets())
                .map(|i| (p.b()[i] - dot(p.a().row(i), &t)) / norm2(p.a().row(i)).max(1e-12))
                .fold(f64::INFINITY, f64::min);
            if slack.abs() > 1e-6 {
                prop_assert_eq!(p.contains(&t), r.contains(&t));
            }
        }
    }

    #[test]
    fn online_solver_matches_enumeration(seed in 0u64..10_000, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let p = random_mpmiqp(seed, 2, 3, 5, 2);
        let t = solve_miqp(&p, &[x, y]).unwrap();
        let (j, _) = bruteforce_miqp(&p, &[x, y]).unwrap();
        prop_assert!((t.j_best.is_infinite() && j.is_infinite()) || (t.j_best - j).abs() <= 1e-6);
    }
}

#[test]
fn sliver_center_respects_every_facet() {
    // nearly parallel facets leave a thin wedge
    let mut p = unit_square();
    p = p.with_halfspace(&[0.4525158547727158, 0.8917563575211104], -0.06827383725733996);
    p = p.with_halfspace(&[-0.45251585477, -0.89175635752], 0.068273837257 + 1e-6);
    p = p.with_halfspace(&[0.7753651719813611, 0.6315131432348138], 0.2);
    let (c, r) = p.chebyshev_center().unwrap();
    assert!(r > 0.0 && r < 1e-5);
    for i in 0..p.n_facets() {
        let row = p.a().row(i);
        assert!(p.b()[i] - dot(row, &c) >= r * norm2(row) - 1e-9);
    }
    assert!(p.reduce().unwrap().contains(&c));
}

#[test]
fn certified_leaves_reproduce_online_solver() {
    let p = random_mpmiqp(41, 2, 3, 5, 2);
    let root = p.root();
    let qp = p.assemble(&root);
    let cert = qpcert(&p, &root, &p.theta0).unwrap();
    for leaf in cert.leaves.iter().filter(|l| !l.is_infeasible()) {
        let (c, _) = leaf.region.chebyshev_center().unwrap();
        let online = solve(&qp, &c).unwrap();
        assert_eq!(online.iterations, leaf.kappa, "leaf {}", leaf.path);
        let x = leaf.x.as_ref().unwrap().eval(&c);
        for (a, b) in x.iter().zip(&online.x) {
            assert!((a - b).abs() <= 1e-7);
        }
        let r = kkt_residuals(&qp.at(&c), &online);
        assert!(r.stationarity <= 1e-8 && r.primal <= 1e-8);
    }
}

#[test]
fn proven_dominance_holds_on_samples() {
    let region = unit_square().with_halfspace(&[1.0, 1.0], 0.5);
    let j_bar = QuadraticFunc::new(Matrix::diag(&[1.0, -0.5]), vec![0.2, 0.0], 0.0);
    let j_node = QuadraticFunc::new(Matrix::diag(&[1.2, -0.4]), vec![0.2, 0.1], 0.6);
    assert_eq!(dominates(&j_node, &j_bar, &region).unwrap(), Dominance::Proven);
    let g = j_node.difference(&j_bar);
    for i in 0..=50 {
        for k in 0..=50 {
            let t = [-1.0 + i as f64 / 25.0, -1.0 + k as f64 / 25.0];
            if region.contains(&t) {
                assert!(g.evaluate(&t) >= -1e-9);
            }
        }
    }
    let close = QuadraticFunc::new(Matrix::diag(&[1.0, -0.5]), vec![0.2, 0.0], -0.01);
    assert_eq!(dominates(&close, &j_bar, &region).unwrap(), Dominance::NotProven);
}

#[test]
fn every_registered_measure_is_sound_on_a_small_family() {
    let reg = MeasureRegistry::with_builtins();
    for seed in [5, 6] {
        let p = random_mpmiqp(seed, 2, 3, 4, 2);
        for m in reg.iter() {
            let part = certify(&p, m.as_ref(), &CertOptions::default()).unwrap();
            let rep = miqpcert::validate(&p, &part, m.as_ref(), 30, 1).unwrap();
            assert!(rep.not_covered.is_empty());
            assert!(rep.passed(), "{} seed {seed}: min gap {:?}", m.name(), rep.min_gap());
        }
    }
}
