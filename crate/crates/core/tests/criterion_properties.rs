use avn_steering::criterion::{
    criterion_value, delta_prime_with, symmetrize, symmetrize_lhs_model, Branch, DeltaPrimeOptions, GeometricRecord,
    HiddenState, LhsModel, PlanePoint, RecordErrors, Response,
};
use avn_steering::quantum::Outcome;
use proptest::prelude::*;
use std::f64::consts::PI;

const NO_WITNESS: DeltaPrimeOptions = DeltaPrimeOptions { oracle_grid: 0 };

fn chord_endpoints(r: f64, u: (f64, f64)) -> [(f64, f64); 2] {
    let s = (1.0 - r * r).sqrt();
    let t = (u.1, -u.0);
    [(r * u.0 + s * t.0, r * u.1 + s * t.1), (r * u.0 - s * t.0, r * u.1 - s * t.1)]
}

fn point_in_disk() -> impl Strategy<Value = PlanePoint> {
    (0.0f64..1.0, 0.0f64..2.0 * PI).prop_map(|(r, a)| PlanePoint::new(r.sqrt() * a.cos(), r.sqrt() * a.sin()))
}

fn lhs_model() -> impl Strategy<Value = LhsModel> {
    (prop::array::uniform4(point_in_disk()), prop::array::uniform4(0.05f64..1.0)).prop_map(|(points, w)| {
        let total: f64 = w.iter().sum();
        LhsModel {
            hidden: (0..4)
                .map(|k| HiddenState { point: points[k], weight: w[k] / total, response: Response::ROLES[k] })
                .collect(),
        }
    })
}

/// Models whose NCS `+` states sit at `x >= 0` and `-` states at `x <= 0`, so
/// that chords with normals near the x-axis cut off a proper cap.
fn leaning_model() -> impl Strategy<Value = LhsModel> {
    lhs_model().prop_map(|mut model| {
        for h in &mut model.hidden {
            h.point.x = h.point.x.abs() * h.response.ncs.sign();
        }
        model
    })
}

struct Masses {
    a: (f64, PlanePoint),
    b: (f64, PlanePoint),
    c: (f64, PlanePoint),
    d: (f64, PlanePoint),
}

fn masses(model: &LhsModel) -> Masses {
    let centre = |keep: &dyn Fn(&Response) -> bool| {
        let (mut p, mut x, mut z) = (0.0, 0.0, 0.0);
        for h in model.hidden.iter().filter(|h| keep(&h.response)) {
            p += h.weight;
            x += h.weight * h.point.x;
            z += h.weight * h.point.z;
        }
        (p, PlanePoint::new(x / p, z / p))
    };
    Masses {
        a: centre(&|r| r.ncs == Outcome::Minus),
        b: centre(&|r| r.ncs == Outcome::Plus),
        c: centre(&|r| r.check == Branch::Other),
        d: centre(&|r| r.check == Branch::Winning),
    }
}

/// The record a plane model produces for chord normals at `g1`, `g2`.
fn record_of(model: &LhsModel, g1: f64, g2: f64) -> GeometricRecord {
    let m = masses(model);
    let u1 = PlanePoint::new(g1.sin(), g1.cos());
    let u2 = PlanePoint::new(-g2.sin(), g2.cos());
    GeometricRecord::exact(m.b.1.dot(u1), m.a.1.dot(u2), g1, g2, m.d.1.z, m.c.1.z, m.d.0)
}

fn close(p: PlanePoint, q: PlanePoint) -> bool {
    (p.x - q.x).abs() < 1e-9 && (p.z - q.z).abs() < 1e-9
}

/// Consistent symmetric record: `B` is drawn inside the disk.
fn consistent_record() -> impl Strategy<Value = GeometricRecord> {
    (0.05f64..0.95, -1.0f64..1.0, -1.0f64..1.0, 0.05f64..(PI - 0.05), -1.0f64..1.0).prop_filter_map(
        "chord through the cap",
        |(p_d, h3, h4, gamma, t)| {
            let z_b = p_d * h3 + (1.0 - p_d) * h4;
            let x_b = t * (1.0 - z_b * z_b).sqrt();
            let r = x_b * gamma.sin() + z_b * gamma.cos();
            (r > 0.01).then(|| GeometricRecord::exact(r, r, gamma, gamma, h3, h4, p_d))
        },
    )
}

fn errors() -> impl Strategy<Value = RecordErrors> {
    prop::array::uniform7(0.0f64..0.02).prop_map(|e| RecordErrors {
        r1: e[0],
        r2: e[1],
        gamma1: e[2],
        gamma2: e[3],
        h3: e[4],
        h4: e[5],
        p_d: e[6],
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn merged_cap_contains_both_caps(r1 in 0.05f64..1.0, r2 in 0.05f64..1.0,
                                      g1 in 0.05f64..(PI - 0.05), g2 in 0.05f64..(PI - 0.05)) {
        let rec = GeometricRecord::exact(r1, r2, g1, g2, 0.5, -0.5, 0.5);
        if let Ok(sym) = symmetrize(&rec) {
            let u = (sym.gamma.sin(), sym.gamma.cos());
            // Cap 1 as given; cap 2 reflected through the z-axis.
            let mut ends = chord_endpoints(r1, (g1.sin(), g1.cos())).to_vec();
            ends.extend(chord_endpoints(r2, (-g2.sin(), g2.cos())).iter().map(|&(x, z)| (-x, z)));
            let margins: Vec<f64> = ends.iter().map(|&(x, z)| x * u.0 + z * u.1 - sym.r12).collect();
            for m in &margins {
                prop_assert!(*m >= -1e-12);
            }
            prop_assert!(sym.containment_violation <= 1e-12);
            // Smallest such cap: both of its ends touch an input endpoint.
            let touching = margins.iter().filter(|m| m.abs() < 1e-9).count();
            prop_assert!(touching >= 2, "margins {:?}", margins);
        }
    }

    #[test]
    fn local_models_never_violate_the_criterion(model in prop_oneof![lhs_model(), leaning_model()],
                                                g1 in 0.3f64..(PI - 0.3), g2 in 0.3f64..(PI - 0.3)) {
        let rec = record_of(&model, g1, g2);
        if let Ok(sym) = symmetrize(&rec) {
            if let Ok(cp) = criterion_value(&sym) {
                prop_assert!(cp.value <= 1e-9, "local model gave value {}", cp.value);
            }
        }
    }

    #[test]
    fn symmetrized_model_has_mirror_structure(model in lhs_model(),
                                              g1 in 0.05f64..(PI - 0.05), g2 in 0.05f64..(PI - 0.05)) {
        let rec = record_of(&model, g1, g2);
        let m = masses(&model);
        let sym_model = symmetrize_lhs_model(&model, &rec).unwrap();
        let h = &sym_model.hidden;
        prop_assert!(close(h[1].point, h[0].point.mirror()));
        prop_assert!(close(h[2].point, h[3].point.mirror()));
        let (p_d, p_c) = (m.d.0, m.c.0);
        for (k, w) in [p_d / 2.0, p_d / 2.0, p_c / 2.0, p_c / 2.0].iter().enumerate() {
            prop_assert!((h[k].weight - w).abs() < 1e-12);
            prop_assert!(h[k].point.norm() <= 1.0 + 1e-12);
        }

        let n = masses(&sym_model);
        let a_expected = m.a.1.scale(m.a.0).add(m.b.1.mirror().scale(m.b.0));
        prop_assert!(close(n.a.1, a_expected));
        prop_assert!(close(n.b.1, a_expected.mirror()));
        prop_assert!((n.a.0 - 0.5).abs() < 1e-12 && (n.b.0 - 0.5).abs() < 1e-12);
        prop_assert!(close(n.c.1, PlanePoint::new(0.0, m.c.1.z)));
        prop_assert!(close(n.d.1, PlanePoint::new(0.0, m.d.1.z)));
        prop_assert!((n.d.0 - p_d).abs() < 1e-12 && (n.c.0 - p_c).abs() < 1e-12);

        if let Ok(sym) = symmetrize(&rec) {
            prop_assert!(n.b.1.dot(sym.u()) >= sym.r12 - 1e-9);
            prop_assert!(n.a.1.dot(sym.u_mirror()) >= sym.r12 - 1e-9);
        }
    }

    #[test]
    fn g_is_the_weighted_height_point(rec in consistent_record()) {
        let sym = symmetrize(&rec).unwrap();
        let cp = criterion_value(&sym).unwrap();
        let e = PlanePoint::new((1.0 - rec.h3 * rec.h3).sqrt(), rec.h3);
        let f = PlanePoint::new((1.0 - rec.h4 * rec.h4).sqrt(), rec.h4);
        let g = e.scale(rec.p_d).add(f.scale(rec.p_c));
        prop_assert!(close(cp.g, g));
        prop_assert!((cp.g.z - cp.b.z).abs() < 1e-12);
        let cross = (g.x - e.x) * (f.z - e.z) - (g.z - e.z) * (f.x - e.x);
        prop_assert!(cross.abs() < 1e-12);
        prop_assert!((cp.value - (cp.b.x.abs() - g.x)).abs() < 1e-12);
    }

    #[test]
    fn error_box_never_raises_the_value(rec in consistent_record(), err in errors()) {
        let verdict = delta_prime_with(&rec.with_errors(err), &NO_WITNESS);
        if let (Some(v), Some(d)) = (verdict.value, verdict.delta_prime) {
            prop_assert!(d <= v);
            prop_assert_eq!(verdict.steerable, d > 0.0);
        } else {
            prop_assert!(!verdict.steerable);
        }
    }

    #[test]
    fn zero_error_bars_give_the_nominal_value(rec in consistent_record()) {
        let verdict = delta_prime_with(&rec, &NO_WITNESS);
        let value = criterion_value(&symmetrize(&rec).unwrap()).unwrap().value;
        prop_assert_eq!(verdict.delta_prime, Some(value));
        prop_assert_eq!(verdict.value, Some(value));
    }
}

#[test]
fn local_model_sweep_is_not_vacuous() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;
    let mut runner = TestRunner::deterministic();
    let strategy = (prop_oneof![lhs_model(), leaning_model()], 0.3f64..(PI - 0.3), 0.3f64..(PI - 0.3));
    let mut evaluated = 0;
    for _ in 0..500 {
        let (model, g1, g2) = strategy.new_tree(&mut runner).unwrap().current();
        if let Ok(cp) = symmetrize(&record_of(&model, g1, g2)).and_then(|s| criterion_value(&s)) {
            assert!(cp.value <= 1e-9);
            evaluated += 1;
        }
    }
    assert!(evaluated >= 100, "only {evaluated} of 500 models reached the criterion");
}
