//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Built without the libtest harness so the lines always print.

use std::time::Instant;

use regsens_core::breakdown::{
    bp_explain_away, bp_sign_change, delta_one_adjust, generic_bp_exact, generic_bp_sign,
    naive_breakdown, CumulativeDeltaMap, GridSpec, IntervalRelaxation, SetValuedMap,
};
use regsens_core::idset::{delta_for_beta, null_control_info, solve_identified_set};
use regsens_core::moments::{load_dataset, partial_out_baseline, summarize, Denominator, Roles};
use regsens_core::oracle::{
    grid_sign_change, identity_suite, implied_params, instance_seed, membership_suite, random_dgp,
    random_triple, sample_dataset, sharpness_suite, sign_bound_suite, suite_dims, FullDgp,
    SuiteConfig, SuiteOutcome,
};
use regsens_core::{Error, RegressionSummary};

const SEED: u64 = 7;
const DEMO_R2: f64 = 15.0 / 19.0;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, ok: bool, name: &str, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }

    fn skip(&self, name: &str, detail: &str) {
        println!("SKIP {name}: {detail}");
    }
}

fn suite_detail(o: &SuiteOutcome, secs: f64) -> String {
    let mut d = format!(
        "{} instances, {} checks, worst {:.2e}, {:.2}s",
        o.instances, o.checks, o.worst, secs
    );
    if let Some(f) = o.failures.first() {
        d.push_str(&format!(
            "; {} failures, first #{} (seed {}): {}",
            o.failures.len(),
            f.index,
            f.seed,
            f.detail
        ));
    }
    d
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// The demo quantities, in a fixed order.
const DEMO_NAMES: [&str; 9] = [
    "beta_med",
    "delta(0)",
    "delta(1)",
    "b_fail",
    "delta=1 root",
    "delta=1 closed form",
    "naive",
    "explain-away",
    "sign-change(M=8/3)",
];

fn demo_quantities(s: &RegressionSummary) -> Result<[f64; 9], Error> {
    let set1 = solve_identified_set(s, 1.0, DEMO_R2)?;
    let root1 = set1
        .roots
        .iter()
        .copied()
        .min_by(|a, b| (a - 1.2).abs().total_cmp(&(b - 1.2).abs()))
        .ok_or(Error::EmptySet)?;
    Ok([
        s.beta_med,
        delta_for_beta(s, 0.0, DEMO_R2)?,
        delta_for_beta(s, 1.0, DEMO_R2)?,
        null_control_info(s).b_fail.unwrap_or(f64::NAN),
        root1,
        delta_one_adjust(s, DEMO_R2)?,
        naive_breakdown(s, DEMO_R2)?,
        bp_explain_away(s, DEMO_R2)?.magnitude,
        bp_sign_change(s, DEMO_R2, Some(8.0 / 3.0))?.value,
    ])
}

fn demo_population(rep: &mut Report) {
    let name = "demo fixture, population moments";
    let s = match FullDgp::demo1()
        .observed_moments()
        .and_then(|m| summarize(&m))
    {
        Ok(s) => s,
        Err(e) => return rep.line(false, name, e.to_string()),
    };
    let expect = [4.0 / 3.0, 2.0, 2.0, 3.0, 1.2, 1.2, 10.0, 2.0, 52.0 / 33.0];
    let got = match demo_quantities(&s) {
        Ok(g) => g,
        Err(e) => return rep.line(false, name, e.to_string()),
    };
    let mut bad = Vec::new();
    for i in 0..9 {
        if !close(got[i], expect[i], 1e-9) {
            bad.push(format!(
                "{} = {} (want {})",
                DEMO_NAMES[i], got[i], expect[i]
            ));
        }
    }
    // b = 3 is a root of every cubic but must be reported as excluded
    let excluded = solve_identified_set(&s, 2.0, DEMO_R2)
        .map(|set| {
            set.excluded.iter().any(|b| close(*b, 3.0, 1e-9))
                && !set.roots.iter().any(|b| close(*b, 3.0, 1e-9))
        })
        .unwrap_or(false);
    if !excluded {
        bad.push("b = 3 not excluded".into());
    }
    if !matches!(
        delta_for_beta(&s, 3.0, DEMO_R2),
        Err(Error::NullControlPoint(_))
    ) {
        bad.push("delta(3) not rejected".into());
    }
    let naive_differs = (got[6] - got[7]).abs() > 1.0;
    if !naive_differs {
        bad.push("naive value equals the correct one".into());
    }
    rep.line(
        bad.is_empty(),
        name,
        if bad.is_empty() {
            "beta_med 4/3, delta(0) = delta(1) = 2, b = 3 excluded, delta=1 set {1.2}, naive 10 vs 2, sign-change(M=8/3) 52/33, all within 1e-9".into()
        } else {
            bad.join("; ")
        },
    );
}

fn sampled_summary(n: usize, seed: u64) -> Result<RegressionSummary, Error> {
    let d = sample_dataset(&FullDgp::demo1(), n, seed)?;
    summarize(&partial_out_baseline(&d, Denominator::NMinusOne)?)
}

fn demo_sampled(rep: &mut Report) {
    let name = "demo fixture, sampled n = 1e6 (seed 7)";
    let ((main, reps), secs) = timed(|| {
        let main = sampled_summary(1_000_000, SEED).and_then(|s| demo_quantities(&s));
        // replicate spread at n = 1e5, scaled to n = 1e6
        let reps: Vec<Result<[f64; 9], Error>> = (0..10)
            .map(|r| sampled_summary(100_000, 1000 + r).and_then(|s| demo_quantities(&s)))
            .collect();
        (main, reps)
    });
    let main = match main {
        Ok(m) => m,
        Err(e) => return rep.line(false, name, e.to_string()),
    };
    let reps: Vec<[f64; 9]> = match reps.into_iter().collect() {
        Ok(r) => r,
        Err(e) => return rep.line(false, name, format!("replicate: {e}")),
    };
    let pop = demo_quantities(&summarize(&FullDgp::demo1().observed_moments().unwrap()).unwrap())
        .unwrap();
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..9 {
        let mean = reps.iter().map(|r| r[i]).sum::<f64>() / reps.len() as f64;
        let var = reps.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (reps.len() - 1) as f64;
        let se = (var / 10.0).sqrt();
        let z = if se > 0.0 {
            (main[i] - pop[i]).abs() / se
        } else {
            0.0
        };
        worst = worst.max(z);
        if (main[i] - pop[i]).abs() > (3.0 * se).max(1e-9) {
            bad.push(format!(
                "{} = {} vs {} (se {se:.2e})",
                DEMO_NAMES[i], main[i], pop[i]
            ));
        }
    }
    rep.line(
        bad.is_empty(),
        name,
        if bad.is_empty() {
            format!("all 9 quantities within 3 Monte Carlo standard errors (max {worst:.2} se), {secs:.1}s")
        } else {
            bad.join("; ")
        },
    );
}

fn theory_suite(rep: &mut Report) {
    let name = "set-valued breakdown theory";
    let g = GridSpec::default();
    let mut bad = Vec::new();
    for c in [4.0 / 3.0, -0.7, 2.5, -0.01] {
        let map = IntervalRelaxation { center: c };
        let ex = generic_bp_exact(&map, 0.0, &g);
        let sc = generic_bp_sign(&map, c, &g).unwrap();
        if ex.value != sc.value || !sc.attained {
            bad.push(format!(
                "center {c}: explain-away {} vs sign-change {}",
                ex.value, sc.value
            ));
        }
        // {b : bp(b) ≤ r} rebuilds B(r) away from the boundary
        for &r in &[0.25, 1.0, 3.0] {
            for k in 0..=400 {
                let b = c - 5.0 + 10.0 * k as f64 / 400.0;
                if ((b - c).abs() - r).abs() < 1e-9 {
                    continue;
                }
                let rebuilt = generic_bp_exact(&map, b, &g).value <= r;
                if rebuilt != map.eval(r).contains(b) {
                    bad.push(format!("center {c}, r {r}: duality fails at b = {b}"));
                    break;
                }
            }
        }
    }
    let s = summarize(&FullDgp::demo1().observed_moments().unwrap()).unwrap();
    let map = CumulativeDeltaMap {
        summary: s.clone(),
        r2long: DEMO_R2,
        m: None,
    };
    let ex = generic_bp_exact(&map, 0.0, &g);
    let sc = generic_bp_sign(&map, s.beta_med, &g).unwrap();
    if !(close(ex.value, 2.0, 1e-6) && close(sc.value, 1.0, 1e-6) && ex.value > sc.value) {
        bad.push(format!(
            "demo cumulative map: explain-away {} sign-change {}",
            ex.value, sc.value
        ));
    }
    rep.line(
        bad.is_empty(),
        name,
        if bad.is_empty() {
            format!(
                "interval relaxations: equality and duality exact on 4 maps; demo cumulative map explain-away {:.6} > sign-change {:.6}",
                ex.value, sc.value
            )
        } else {
            bad.join("; ")
        },
    );
}

fn cross_oracle(rep: &mut Report) {
    let name = "critical-point vs 1e6-point grid sign-change";
    let (results, secs) = timed(|| {
        (0..100)
            .map(|i| {
                let dgp = random_dgp(instance_seed(SEED, i), suite_dims(i))?;
                let p = implied_params(&dgp)?;
                let s = p.summary;
                let beta = s.beta_med.abs();
                let m = (i % 2 == 1).then(|| beta * (1.2 + 0.3 * (i % 7) as f64));
                let fast = bp_sign_change(&s, p.r2_long_true, m)?.value;
                let slow = grid_sign_change(&s, p.r2_long_true, m, 1_000_000);
                Ok::<_, Error>((i, fast, slow))
            })
            .collect::<Vec<_>>()
    });
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for r in results {
        match r {
            Ok((i, fast, slow)) => {
                let err = (fast - slow).abs() / fast.abs().max(slow.abs()).max(1.0);
                worst = worst.max(err);
                if !(err <= 1e-6) {
                    bad.push(format!("#{i}: {fast} vs grid {slow}"));
                }
            }
            Err(e) => bad.push(e.to_string()),
        }
    }
    let ok = bad.is_empty() && secs < 60.0;
    rep.line(
        ok,
        name,
        format!(
            "100 instances, worst relative gap {worst:.2e}, {secs:.1}s (limit 60s){}",
            if bad.is_empty() {
                String::new()
            } else {
                format!("; {}", bad.join("; "))
            }
        ),
    );
}

fn degeneracy(rep: &mut Report) {
    let name = "degeneracy handling";
    let mut bad = Vec::new();
    let mut max_roots = 0;
    for i in 0..500 {
        let (dgp, _, r2) = match random_triple(instance_seed(SEED, i), i) {
            Ok(t) => t,
            Err(e) => {
                bad.push(e.to_string());
                continue;
            }
        };
        let s = summarize(&dgp.observed_moments().unwrap()).unwrap();
        match solve_identified_set(&s, 1.0, r2) {
            Ok(set) => max_roots = max_roots.max(set.roots.len() + set.excluded.len()),
            Err(e) => bad.push(format!("#{i}: {e}")),
        }
        match solve_identified_set(&s, 1.7, s.r2_med) {
            Ok(set) if set.roots == vec![s.beta_med] && set.degenerate_medium => {}
            other => bad.push(format!("#{i}: R²_long = R²_med gave {other:?}")),
        }
        match bp_sign_change(&s, r2, Some(0.5 * s.beta_med.abs())) {
            Ok(sc) if sc.precluded && sc.value == f64::INFINITY => {}
            other => bad.push(format!("#{i}: M < |beta_med| gave {other:?}")),
        }
    }
    if max_roots > 2 {
        bad.push(format!("delta = 1 produced {max_roots} roots"));
    }
    rep.line(
        bad.is_empty(),
        name,
        if bad.is_empty() {
            format!("500 instances: delta = 1 gives at most {max_roots} roots, R²_long = R²_med gives {{beta_med}}, M < |beta_med| gives the precluded sentinel")
        } else {
            bad.truncate(3);
            bad.join("; ")
        },
    );
}

fn parse_roles(text: &str) -> Option<Roles> {
    // outcome:treatment:w0a,w0b:w1a,w1b
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 4 {
        return None;
    }
    let list = |s: &str| -> Vec<String> {
        s.split(',')
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    };
    let w0 = list(parts[2]);
    let w1 = list(parts[3]);
    let w0: Vec<&str> = w0.iter().map(String::as_str).collect();
    let w1: Vec<&str> = w1.iter().map(String::as_str).collect();
    Some(Roles::new(parts[0], parts[1], &w0, &w1))
}

fn replication(rep: &mut Report) {
    let name = "replication fixture (external data)";
    let Ok(path) = std::env::var("REGSENS_REPLICATION_CSV") else {
        return rep.skip(
            name,
            "set REGSENS_REPLICATION_CSV and REGSENS_REPLICATION_ROLES=y:x:w0a,..:w1a,.. to run",
        );
    };
    let Some(roles) = std::env::var("REGSENS_REPLICATION_ROLES")
        .ok()
        .and_then(|r| parse_roles(&r))
    else {
        return rep.line(
            false,
            name,
            "REGSENS_REPLICATION_ROLES missing or malformed".into(),
        );
    };
    let run = || -> Result<(f64, f64, Vec<f64>, f64), Error> {
        let d = load_dataset(&path, &roles)?;
        let s = summarize(&partial_out_baseline(&d, Denominator::NMinusOne)?)?;
        Ok((
            bp_explain_away(&s, 1.0)?.signed,
            bp_sign_change(&s, 1.0, None)?.value,
            solve_identified_set(&s, 1.0, 1.0)?.roots,
            delta_one_adjust(&s, 1.0)?,
        ))
    };
    match run() {
        Ok((ea, sc, set, p1)) => {
            let set_ok = set.len() == 2
                && (set[0] + 0.0855).abs() <= 0.005
                && (set[1] - 1.8947).abs() <= 0.005;
            let ok = (ea + 32.0).abs() <= 0.5
                && (sc - 0.586).abs() <= 0.005
                && set_ok
                && (p1 - 0.532).abs() <= 0.005;
            rep.line(
                ok,
                name,
                format!(
                    "explain-away {ea}, sign-change {sc}, delta=1 set {set:?}, closed form {p1}"
                ),
            );
        }
        Err(e) => rep.line(false, name, e.to_string()),
    }
}

fn main() {
    let mut rep = Report { failed: 0 };
    let cfg = SuiteConfig::new(SEED, 500);

    let (o, secs) = timed(|| membership_suite(&cfg));
    rep.line(
        o.passed() && secs < 10.0,
        "membership round trip",
        suite_detail(&o, secs) + " (limit 10s)",
    );

    let (o, secs) = timed(|| sharpness_suite(&cfg));
    rep.line(
        o.passed() && secs < 30.0,
        "sharpness certification",
        suite_detail(&o, secs) + " (limit 30s)",
    );

    let (o, secs) = timed(|| sign_bound_suite(&cfg));
    let demo = summarize(&FullDgp::demo1().observed_moments().unwrap()).unwrap();
    let demo_ratio = bp_explain_away(&demo, DEMO_R2).unwrap().magnitude
        / bp_sign_change(&demo, DEMO_R2, None).unwrap().value;
    rep.line(
        o.outcome.passed() && o.max_ratio > 1.5,
        "unrestricted sign-change breakdown at most 1",
        format!(
            "{}; largest explain-away/sign-change ratio {:.3} (demo {:.3})",
            suite_detail(&o.outcome, secs),
            o.max_ratio,
            demo_ratio
        ),
    );

    cross_oracle(&mut rep);
    demo_population(&mut rep);
    demo_sampled(&mut rep);
    theory_suite(&mut rep);

    let (o, secs) = timed(|| identity_suite(&cfg));
    rep.line(
        o.passed(),
        "regression identities on random models",
        suite_detail(&o, secs),
    );

    degeneracy(&mut rep);
    replication(&mut rep);

    println!("{} failed", rep.failed);
    if rep.failed > 0 {
        std::process::exit(1);
    }
}
