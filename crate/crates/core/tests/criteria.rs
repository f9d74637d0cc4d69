//! Checker soundness, decomposition consistency and monotonicity.

use proptest::prelude::*;
use relcomplete::criteria::{estimate_s_bounds, Prediction, Verdict};
use relcomplete::fields::{SKEW_TOLERANCE};
use relcomplete::sampling::{domain_samples, SamplingConfig};
use relcomplete::{builtin, builtin_names, check, CoordinateFrame, CriteriaConfig, FieldPack, ManifoldSpec, Signature};

#[test]
fn counterexamples_never_get_a_complete_prediction() {
    for name in ["clifton-pohl", "null-plane-cubic", "riemann-superlinear"] {
        let s = builtin(name).unwrap();
        let r = check(&s.manifold, &s.fields, &CriteriaConfig::default());
        assert_eq!(r.prediction, Prediction::NoPrediction, "{name}");
        assert_eq!(r.provenance, "sampled check, not a proof");
    }
    for name in ["t3-magnetic", "flat-lorentz-torus", "riemann-flat-torus"] {
        let s = builtin(name).unwrap();
        let r = check(&s.manifold, &s.fields, &CriteriaConfig::default());
        assert_eq!(r.prediction, Prediction::Complete, "{name}: {r:#?}");
    }
}

#[test]
fn failure_reasons_are_recorded() {
    let cp = builtin("clifton-pohl").unwrap();
    let r = check(&cp.manifold, &cp.fields, &CriteriaConfig::default());
    let h = r.hypothesis("timelike").unwrap();
    assert_eq!(h.verdict, Verdict::Fail);
    assert!(h.note.contains("K not timelike"));
    assert_eq!(r.hypothesis("conformal-killing").unwrap().verdict, Verdict::Pass);

    let np = builtin("null-plane-cubic").unwrap();
    let r = check(&np.manifold, &np.fields, &CriteriaConfig::default());
    assert_eq!(r.hypothesis("compact").unwrap().verdict, Verdict::Fail);

    let t3 = builtin("t3-magnetic").unwrap();
    let r = check(&t3.manifold, &t3.fields, &CriteriaConfig::default());
    assert_eq!(r.hypotheses.len(), 7);
    assert!(r.all_pass());
}

#[test]
fn skewness_and_decomposition_agree_on_every_catalog_field() {
    for name in builtin_names() {
        let s = builtin(name).unwrap();
        let samples = domain_samples(&s.manifold, &SamplingConfig::default());
        assert_eq!(samples.len(), 1000);
        let skew = s.fields.is_skew_adjoint(&s.manifold, &samples, 0.0).unwrap();
        let self_adjoint = if s.fields.has_force() {
            s.fields.max_self_adjoint_part(&s.manifold, &samples, 0.0).unwrap()
        } else {
            0.0
        };
        assert_eq!(skew.measured <= SKEW_TOLERANCE, self_adjoint <= 1e-9, "{name}: {} vs {}", skew.measured, self_adjoint);
    }
}

#[test]
fn verdicts_are_monotone_in_the_sample_count() {
    // Halton prefixes nest, so a larger count only adds evidence
    for name in builtin_names() {
        let s = builtin(name).unwrap();
        if s.manifold.signature() != Signature::Lorentzian {
            continue;
        }
        let mut previous: Option<Vec<Verdict>> = None;
        for points in [50, 200, 1000] {
            let cfg = CriteriaConfig { sampling: SamplingConfig { points, ..Default::default() }, ..Default::default() };
            let r = check(&s.manifold, &s.fields, &cfg);
            let verdicts: Vec<Verdict> = r.hypotheses.iter().map(|h| h.verdict).collect();
            if let Some(prev) = &previous {
                for (a, b) in prev.iter().zip(&verdicts) {
                    assert!(!(*a == Verdict::Fail && *b == Verdict::Pass), "{name}: fail turned into pass");
                }
            }
            previous = Some(verdicts);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn skew_fields_have_vanishing_self_adjoint_bounds(
        a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0,
        g1 in 0.5f64..3.0, g2 in 0.5f64..3.0, points in 1usize..200,
    ) {
        // F is g-skew exactly when gF is antisymmetric; build it from an
        // antisymmetric matrix W via F = g⁻¹ W with g = diag(g1, g2, 1)
        let frame = CoordinateFrame::new(["x", "y", "z"], false).unwrap();
        let gs = [format!("{g1:?}"), format!("{g2:?}")];
        let m = ManifoldSpec::from_strings(
            frame.clone(),
            &[&[&gs[0], "0", "0"], &["0", &gs[1], "0"], &["0", "0", "1"]],
            Signature::Riemannian,
        ).unwrap();
        let w = [[0.0, a, b], [-a, 0.0, c], [-b, -c, 0.0]];
        let diag = [g1, g2, 1.0];
        let rows: Vec<Vec<String>> = (0..3).map(|i| (0..3).map(|j| format!("{:?}", w[i][j] / diag[i])).collect()).collect();
        let rows_ref: Vec<Vec<&str>> = rows.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
        let rows_ref: Vec<&[&str]> = rows_ref.iter().map(Vec::as_slice).collect();
        let fp = FieldPack::from_strings(&frame, Some(&rows_ref), None, None, None).unwrap();
        let samples = domain_samples(&m, &SamplingConfig { points, ..Default::default() });
        let s = estimate_s_bounds(&m, &fp, &samples, &[0.0]).unwrap();
        prop_assert!(s.norm <= 1e-9, "{:?}", s);
    }
}
