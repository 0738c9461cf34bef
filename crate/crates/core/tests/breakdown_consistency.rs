use regsens_core::breakdown::{
    bp_explain_away, bp_sign_change, generic_bp_exact, generic_bp_sign, CumulativeDeltaMap,
    GridSpec,
};
use regsens_core::idset::{cumulative_set, solve_identified_set};
use regsens_core::oracle::{implied_params, instance_seed, random_dgp, suite_dims};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[test]
fn closed_forms_match_generic_engine() {
    let g = GridSpec::default();
    for i in 0..50 {
        let dgp = random_dgp(instance_seed(3, i), suite_dims(i)).unwrap();
        let p = implied_params(&dgp).unwrap();
        let s = p.summary.clone();
        let r2 = p.r2_long_true;
        let map = CumulativeDeltaMap {
            summary: s.clone(),
            r2long: r2,
            m: None,
        };

        let ea = bp_explain_away(&s, r2).unwrap();
        let set = solve_identified_set(&s, ea.signed, r2).unwrap();
        assert!(
            set.roots.iter().any(|b| b.abs() < 1e-8),
            "#{i}: {:?}",
            set.roots
        );
        // the cumulative map reaches 0 no later than the explain-away value
        let gen = generic_bp_exact(&map, 0.0, &g);
        assert!(
            gen.value <= ea.magnitude * (1.0 + 1e-6) + 1e-9,
            "#{i}: {gen:?} vs {ea:?}"
        );

        let sc = bp_sign_change(&s, r2, None).unwrap();
        let gs = generic_bp_sign(&map, s.beta_med, &g).unwrap();
        assert!(rel(sc.value, gs.value) < 1e-6, "#{i}: {sc:?} vs {gs:?}");
        assert!(sc.value <= gen.value + 1e-9);

        // attained minimizers are in the cumulative set at the breakdown value
        if let Some(b) = sc.argmin {
            let cum = cumulative_set(&s, sc.value * (1.0 + 1e-9), r2, None).unwrap();
            assert!(cum.contains(b), "#{i}: argmin {b} not in {cum}");
        }
    }
}

#[test]
fn magnitude_bound_only_raises_sign_change() {
    for i in 0..50 {
        let dgp = random_dgp(instance_seed(5, i), suite_dims(i)).unwrap();
        let p = implied_params(&dgp).unwrap();
        let s = &p.summary;
        let beta = s.beta_med.abs();
        let mut last = bp_sign_change(s, p.r2_long_true, None).unwrap().value;
        for f in [8.0, 4.0, 2.0, 1.5, 1.1, 1.0] {
            let v = bp_sign_change(s, p.r2_long_true, Some(f * beta))
                .unwrap()
                .value;
            assert!(v >= last - 1e-9, "#{i}: M = {f}|beta|: {v} < {last}");
            last = v;
        }
    }
}
