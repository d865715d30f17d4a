use lorentz_topology::expr::{parse_scalar_expr, ScalarExpr};
use lorentz_topology::geometry::{Chart, MetricField, Signature, TensorField};
use lorentz_topology::norms::{fiber_norm_at, CompactExhaustion, Domain, Scope};
use lorentz_topology::sampling::random_points;
use lorentz_topology::topology::{
    ball_contains, canonical_equivalent_riemannian, continuity_check, mutual_bounding, norm_equivalent,
    norm_equivalent_on, refine_ball, same_component, BallSpec, ComponentVerdict, ContinuityConfig, ContinuityVerdict,
    EquivalenceVerdict, Family, MembershipVerdict, TopologyKind, Tri,
};
use proptest::prelude::*;

fn e(s: &str) -> ScalarExpr {
    parse_scalar_expr(s).unwrap()
}

fn domain2() -> Domain {
    Domain::new(Chart::new(&["t", "x"]).unwrap(), CompactExhaustion::new(2, 1.0, 6, 9).unwrap(), 11)
}

/// A symmetric 2x2 field with diagonal magnitudes in `[1, 4]` and an
/// off-diagonal entry within `0.3`, from 9 coefficients in `[-1, 1]`. The
/// variation is confined near the origin so that sup estimates settle.
fn metric2(c: &[f64], lorentzian: bool) -> MetricField {
    let wave = |f: &str, k: usize| {
        format!("{f}(({})*t + ({})*x + ({})) / (1 + (t^2 + x^2)/4)", c[k], c[k + 1], c[k + 2])
    };
    let sign = if lorentzian { "-" } else { "" };
    let off = e(&format!("0.3*{}", wave("cos", 6)));
    let rows = vec![
        vec![e(&format!("2.5 + 1.5*{}", wave("sin", 0))), off.clone()],
        vec![off, e(&format!("{sign}(2.5 + 1.5*{})", wave("sin", 3)))],
    ];
    let sig = if lorentzian {
        Signature::Lorentzian
    } else {
        Signature::Riemannian
    };
    MetricField::from_covariant(TensorField::from_matrix(0, 2, rows).unwrap(), sig).unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 9)
}

/// `diag(e^t, -1)`, outside the component of bounded metrics.
fn eta_prime2() -> MetricField {
    MetricField::from_covariant(TensorField::diagonal_covariant(vec![e("exp(t)"), e("-1")]), Signature::Lorentzian)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn mutual_bounding_is_symmetric(
        c in coeffs(),
        f in coeffs(),
        weight in prop::sample::select(vec!["2 + sin(t - x)", "1.5 + cos(3*x)", "exp(t)", "exp(-x)", "1 + x^2"]),
    ) {
        let d = domain2();
        let k = metric2(&c, true).covariant().clone();
        let k2 = k.scale(&e(weight));
        let f = metric2(&f, false);
        let ab = mutual_bounding(&k, &k2, &f, &d, 0).unwrap();
        let ba = mutual_bounding(&k2, &k, &f, &d, 0).unwrap();
        prop_assert_eq!(ab.verdict, ba.verdict);
        let bounded = !weight.contains("exp") && !weight.contains("x^2");
        prop_assert_eq!(ab.verdict, if bounded { Tri::Holds } else { Tri::Fails });
        if ab.verdict == Tri::Holds {
            let (c, c2) = (ab.lower[0].0, ab.upper[0].0);
            prop_assert!(0.0 < c && c <= c2);
            prop_assert!((ba.lower[0].0 - 1.0 / c2).abs() <= 1e-9 * ba.lower[0].0);
            prop_assert!((ba.upper[0].0 - 1.0 / c).abs() <= 1e-9 * ba.upper[0].0);
        }
    }

    #[test]
    fn small_perturbations_keep_norm_equivalence(
        c in coeffs(),
        amp in -0.3f64..0.3,
        center in -3.0f64..3.0,
    ) {
        let d = domain2();
        let g = metric2(&c, true);
        let h = canonical_equivalent_riemannian(&g, &MetricField::euclidean(2), &d).unwrap();
        let bump = e(&format!("({amp})/(1 + (x - ({center}))^2 + t^2)"));
        let g2 = MetricField::from_covariant(
            g.covariant().add(&TensorField::diagonal_covariant(vec![bump, ScalarExpr::zero()])).unwrap(),
            Signature::Lorentzian,
        ).unwrap();
        let ball = BallSpec::global(&g, 0.5, h.clone(), 0).unwrap();
        let m = ball_contains(&ball, g2.covariant(), &d).unwrap();
        prop_assert_eq!(m.verdict, MembershipVerdict::Holds);
        prop_assert_eq!(norm_equivalent(&h, &g2, &d).unwrap().verdict, EquivalenceVerdict::Equivalent);
    }

    #[test]
    fn metrics_are_all_equivalent_on_one_compact_level(
        c in coeffs(),
        f in coeffs(),
        stretch in prop::sample::select(vec!["1", "exp(t)", "exp(-2*x)", "1 + t^2"]),
    ) {
        let d = domain2();
        let g = MetricField::from_covariant(
            metric2(&c, true).covariant().scale(&e(stretch)),
            Signature::Lorentzian,
        ).unwrap();
        let h = metric2(&f, false);
        let r = norm_equivalent_on(&h, &g, &d, Scope::Level(3), &[]).unwrap();
        prop_assert_eq!(r.verdict, EquivalenceVerdict::Equivalent);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn canonical_reference_normalizes_diagonal_lorentz_metrics(
        time in prop::collection::vec(0.2f64..5.0, 2),
        space in prop::collection::vec(0.2f64..5.0, 6),
        seed in any::<u64>(),
    ) {
        let chart = Chart::spacetime();
        let d = Domain::new(chart.clone(), CompactExhaustion::new(4, 1.0, 2, 5).unwrap(), seed);
        let entries = vec![
            e(&format!("{} + {}*sin(x)^2", time[0], time[1])),
            e(&format!("-({} + {}*cos(t)^2)", space[0], space[1])),
            e(&format!("-({} + {}*exp(-y^2))", space[2], space[3])),
            e(&format!("-({} + {}/(1 + z^2))", space[4], space[5])),
        ];
        let g = MetricField::from_covariant(TensorField::diagonal_covariant(entries), Signature::Lorentzian).unwrap();
        let h = canonical_equivalent_riemannian(&g, &MetricField::euclidean(4), &d).unwrap();
        for p in d.samples.iter().chain(&random_points(4, 10.0, 20, seed ^ 1)) {
            let v = fiber_norm_at(g.covariant(), &h, &chart, p, &d.binding).unwrap();
            prop_assert!((v - 1.0).abs() <= 1e-9, "{v} at {p:?}");
        }
    }
}

#[test]
fn same_component_is_an_equivalence_on_tested_triples() {
    let d = domain2();
    let metrics = [
        MetricField::minkowski(2),
        metric2(&[0.3, -0.2, 0.5, 0.1, 0.9, -0.4, 0.2, 0.2, 0.7], true),
        metric2(&[-0.8, 0.4, 0.0, 0.6, -0.1, 0.3, -0.5, 0.9, 0.1], true),
        eta_prime2(),
    ];
    let n = metrics.len();
    let mut verdict = vec![vec![ComponentVerdict::Inconclusive; n]; n];
    for i in 0..n {
        for j in 0..n {
            verdict[i][j] = same_component(&metrics[i], &metrics[j], &d).unwrap().0;
        }
    }
    for i in 0..n {
        assert_eq!(verdict[i][i], ComponentVerdict::Same);
        for j in 0..n {
            assert_eq!(verdict[i][j], verdict[j][i], "{i} {j}");
            for k in 0..n {
                if verdict[i][j] == ComponentVerdict::Same && verdict[j][k] == ComponentVerdict::Same {
                    assert_eq!(verdict[i][k], ComponentVerdict::Same, "{i} {j} {k}");
                }
            }
        }
    }
    assert_eq!(verdict[0][1], ComponentVerdict::Same);
    assert_eq!(verdict[0][3], ComponentVerdict::Different);
}

#[test]
fn refined_global_balls_keep_an_equivalent_reference() {
    let d = domain2();
    let g = MetricField::minkowski(2);
    let g2 = metric2(&[0.1, 0.2, 0.3, -0.3, 0.2, 0.1, 0.5, 0.5, 0.5], true);
    let mid = MetricField::from_covariant(
        g.covariant().add(g2.covariant()).unwrap().scale(&e("0.5")),
        Signature::Lorentzian,
    )
    .unwrap();
    let h = canonical_equivalent_riemannian(&g, &MetricField::euclidean(2), &d).unwrap();
    let h2 = canonical_equivalent_riemannian(&g2, &MetricField::euclidean(2), &d).unwrap();
    let b1 = BallSpec::global(&g, 3.0, h, 0).unwrap();
    let b2 = BallSpec::global(&g2, 3.0, h2, 0).unwrap();
    let b3 = refine_ball(&b1, &b2, &mid, &d).unwrap();
    assert_eq!(
        norm_equivalent(&b3.reference, &mid, &d).unwrap().verdict,
        EquivalenceVerdict::Equivalent
    );
}

#[test]
fn constant_family_is_continuous_in_every_topology() {
    let d = domain2();
    let fam = Family::new("constant", "l", MetricField::minkowski(2).covariant().clone(), vec![]);
    for kind in TopologyKind::ALL {
        let r = continuity_check(&fam, (0.5, 2.0), kind, &ContinuityConfig::new(2), &d).unwrap();
        assert_eq!(r.verdict, ContinuityVerdict::Continuous, "{kind:?}");
    }
}
