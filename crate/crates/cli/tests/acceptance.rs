//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relcomplete::catalog::t3_magnetic;
use relcomplete::exprlang::{Expr, Func, Variable};
use relcomplete::sampling::domain_samples;
use relcomplete::{
    builtin, builtin_names, check, integrate_maximal, CriteriaConfig, IntegrationConfig, ManifoldSpec, Prediction,
    SamplingConfig, Scenario, Trajectory,
};
use relcomplete_cli::{sample_initial_states, RunReport, SweepReport};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);
type Files = Vec<(String, Vec<u8>)>;

fn integrate(s: &Scenario, cfg: &IntegrationConfig) -> Trajectory {
    integrate_maximal(&s.manifold, &s.fields, &s.initial, cfg).expect("integration starts")
}

fn five_point(f: impl Fn(f64) -> Option<f64>, x: f64, h: f64) -> Option<f64> {
    let (a, b, c, d) = (f(x - 2.0 * h)?, f(x - h)?, f(x + h)?, f(x + 2.0 * h)?);
    Some((a - 8.0 * b + 8.0 * c - d) / (12.0 * h))
}

fn conservation_law() -> Outcome {
    let s = builtin("t3-magnetic").unwrap();
    let cfg = s.integration_config();
    let start = Instant::now();
    let r = integrate(&s, &cfg);
    let elapsed = start.elapsed().as_secs_f64();
    // recompute g(v,v) + 2V from the samples rather than trusting the monitor
    let energy = |q: &[f64], v: &[f64]| s.manifold.inner(q, v, v).unwrap() + 2.0 * s.fields.potential_at(q, None).unwrap();
    let c = energy(&s.initial.q, &s.initial.v);
    let drift = r.samples.iter().map(|x| (energy(&x.state.q, &x.state.v) - c).abs()).fold(0.0, f64::max);
    let span = (r.samples.first().unwrap().state.t, r.samples.last().unwrap().state.t);
    let ok = r.classification.is_complete() && drift <= 1e-8 && span == (-100.0, 100.0) && cfg.rtol == 1e-10 && elapsed < 60.0;
    (ok, format!("max drift {drift:.2e} <= 1e-8 over [{}, {}] at tol {:e}, {elapsed:.2} s", span.0, span.1, cfg.rtol))
}

fn blowup_near_one(name: &str) -> (f64, f64) {
    let s = builtin(name).unwrap();
    let cfg = s.integration_config();
    let coarse = integrate(&s, &cfg).classification;
    let fine_cfg = IntegrationConfig { rtol: cfg.rtol / 10.0, atol: cfg.atol / 10.0, ..cfg };
    let fine = integrate(&s, &fine_cfg).classification;
    match (coarse.name(), fine.name()) {
        ("BlowupAt", "BlowupAt") => (coarse.t_star().unwrap(), fine.t_star().unwrap()),
        other => panic!("expected blowup in both runs, got {other:?}"),
    }
}

fn clifton_pohl_incompleteness() -> Outcome {
    // u' = u² from u(0) = 1 gives u = 1/(1 − t), singular at t = 1
    let oracle = 1.0;
    let (t, t_fine) = blowup_near_one("clifton-pohl");
    let ok = (t - oracle).abs() <= 1e-3 && (t - t_fine).abs() < 1e-4;
    (ok, format!("t* = {t:.8}, |t* - 1| = {:.1e}, refinement shift {:.1e}", (t - oracle).abs(), (t - t_fine).abs()))
}

fn null_plane_incompleteness() -> Outcome {
    // x'' = 2x³ from x(0) = 1, x'(0) = 1 is solved by x = 1/(1 − t)
    let oracle = 1.0;
    let (t, t_fine) = blowup_near_one("null-plane-cubic");
    let s = builtin("null-plane-cubic").unwrap();
    let cfg = s.integration_config();
    let report = RunReport::build(&s, &s.initial, &cfg, &integrate(&s, &cfg)).unwrap();
    let flat = report.diagnostics.metric_flat_complete;
    let gxx = report.diagnostics.field_norms.as_ref().map(|n| n.max_abs_g_xx);
    let ok = (t - oracle).abs() <= 1e-3 && (t - t_fine).abs() < 1e-4 && flat && gxx == Some(0.0);
    (
        ok,
        format!(
            "t* = {t:.8}, |t* - 1| = {:.1e}, refinement shift {:.1e}, report: metric complete {flat}, max|g(X,X)| {gxx:?}",
            (t - oracle).abs(),
            (t - t_fine).abs()
        ),
    )
}

fn magnetic_sweep() -> Outcome {
    let s = builtin("t3-magnetic").unwrap();
    let cfg = IntegrationConfig { horizon: 1000.0, keep_samples: false, ..s.integration_config() };
    let states = sample_initial_states(&s, 100, 0, 1.0, 1.0).unwrap();
    let start = Instant::now();
    let report = SweepReport::run(&s, &states, &cfg, 0).unwrap();
    let complete = report.rows.iter().filter(|r| r.classification == "CompleteToHorizon").count();
    let mut worst_margin = f64::NEG_INFINITY;
    let mut bounded = true;
    for r in &report.rows {
        match r.certificate_bound {
            Some(bound) => {
                let margin = r.gr_speed_max.powi(2) - (bound + 1e-6);
                worst_margin = worst_margin.max(margin);
                bounded &= margin <= 0.0;
            }
            None => bounded = false,
        }
    }
    (
        complete == 100 && bounded,
        format!(
            "{complete}/100 CompleteToHorizon at T = 1000, max(gR_speed² - bound - 1e-6) = {worst_margin:.2e}, {:.1} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

/// Largest gap between the centered difference of `g(K, v)` along the kept
/// samples and `σ g(v,v) − dV(K)`.
fn charge_rate_gap(s: &Scenario, r: &Trajectory) -> f64 {
    let (m, f) = (&s.manifold, &s.fields);
    let charge = |q: &[f64], v: &[f64]| m.inner(q, &f.killing_at(q).unwrap().unwrap(), v).unwrap();
    let predicted = |q: &[f64], v: &[f64]| {
        let k = f.killing_at(q).unwrap().unwrap();
        let sigma = f.conformal_factor(m, q).unwrap().sigma;
        let dv = f.potential_differential(q, None).unwrap().unwrap_or_else(|| vec![0.0; q.len()]);
        sigma * m.inner(q, v, v).unwrap() - dv.iter().zip(&k).map(|(a, b)| a * b).sum::<f64>()
    };
    let mut worst = 0.0f64;
    for w in r.samples.windows(3) {
        let (a, b, c) = (&w[0].state, &w[1].state, &w[2].state);
        let (h0, h1) = (b.t - a.t, c.t - b.t);
        let (y0, y1, y2) = (charge(&a.q, &a.v), charge(&b.q, &b.v), charge(&c.q, &c.v));
        let d = (h0 * h0 * y2 - h1 * h1 * y0 + (h1 * h1 - h0 * h0) * y1) / (h0 * h1 * (h0 + h1));
        worst = worst.max((d - predicted(&b.q, &b.v)).abs());
    }
    worst
}

fn killing_charge_identity() -> Outcome {
    let mut gaps = Vec::new();
    for name in ["t3-magnetic", "flat-lorentz-torus"] {
        let s = builtin(name).unwrap();
        gaps.push((name, charge_rate_gap(&s, &integrate(&s, &s.integration_config()))));
    }
    let s = builtin("t3-magnetic").unwrap();
    let cfg = IntegrationConfig { keep_samples: false, ..s.integration_config() };
    let states = sample_initial_states(&s, 20, 1, 1.0, 1.0).unwrap();
    let sweep = SweepReport::run(&s, &states, &cfg, 1).unwrap();
    let sweep_gap = sweep.aggregate.max_killing_rate_residual.unwrap();

    let free = t3_magnetic(1.0, 0.0).unwrap();
    let r = integrate(&free, &free.integration_config());
    let k = free.fields.killing_at(&free.initial.q).unwrap().unwrap();
    let q0 = free.manifold.inner(&free.initial.q, &k, &free.initial.v).unwrap();
    let drift = r
        .samples
        .iter()
        .map(|x| {
            let k = free.fields.killing_at(&x.state.q).unwrap().unwrap();
            (free.manifold.inner(&x.state.q, &k, &x.state.v).unwrap() - q0).abs()
        })
        .fold(0.0, f64::max);
    let ok = gaps.iter().all(|(_, g)| *g <= 1e-6) && sweep_gap <= 1e-6 && drift <= 1e-8;
    (
        ok,
        format!(
            "rate gap {} {:.1e}, {} {:.1e}, 20-run sweep {:.1e} (<= 1e-6); charge drift with V = 0: {drift:.1e} <= 1e-8",
            gaps[0].0, gaps[0].1, gaps[1].0, gaps[1].1, sweep_gap
        ),
    )
}

fn skewness_and_decomposition() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in builtin_names() {
        let s = builtin(name).unwrap();
        let (m, f) = (&s.manifold, &s.fields);
        let samples = domain_samples(m, &SamplingConfig::default());
        assert_eq!(samples.len(), 1000);
        // g(v, F v) assembled entry by entry
        let mut skew = 0.0f64;
        if f.has_force() {
            for (p, v) in samples.pairs() {
                let g = m.metric_at(p).unwrap();
                let fm = f.force_at(p, Some(0.0)).unwrap();
                let n = p.len();
                let mut gvfv = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            gvfv += v[i] * g[(i, j)] * fm[(j, k)] * v[k];
                        }
                    }
                }
                skew = skew.max(gvfv.abs() / (1.0 + v.iter().map(|x| x * x).sum::<f64>()));
            }
        }
        let s_norm = if f.has_force() { f.max_self_adjoint_part(m, &samples, 0.0).unwrap() } else { 0.0 };
        let agree = (skew <= 1e-10) == (s_norm <= 1e-9);
        ok &= agree;
        parts.push(format!("{name} {skew:.0e}/{s_norm:.0e}"));
    }
    (ok, format!("|g(v,Fv)| vs ||S|| on 1000 samples: {}", parts.join(", ")))
}

fn checker_soundness() -> Outcome {
    let cfg = CriteriaConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, expected) in [
        ("clifton-pohl", Prediction::NoPrediction),
        ("null-plane-cubic", Prediction::NoPrediction),
        ("riemann-superlinear", Prediction::NoPrediction),
        ("t3-magnetic", Prediction::Complete),
        ("flat-lorentz-torus", Prediction::Complete),
        ("riemann-flat-torus", Prediction::Complete),
    ] {
        let s = builtin(name).unwrap();
        let got = check(&s.manifold, &s.fields, &cfg).prediction;
        ok &= got == expected;
        parts.push(format!("{name} {got:?}"));
    }
    (ok, parts.join(", "))
}

fn christoffel_gap(m: &ManifoldSpec, p: &[f64]) -> f64 {
    let n = m.dim();
    let h = 1e-4 * (1.0 + p.iter().map(|x| x.abs()).fold(0.0, f64::max));
    let dg = |l: usize, i: usize, j: usize| {
        five_point(
            |s| {
                let mut q = p.to_vec();
                q[l] = s;
                m.metric_at(&q).ok().map(|g| g[(i, j)])
            },
            p[l],
            h,
        )
        .expect("metric defined near the sample")
    };
    let ginv = m.inverse_metric_at(p).unwrap();
    let gamma = m.christoffel_at(p).unwrap();
    let mut worst = 0.0f64;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let fd: f64 = (0..n).map(|l| 0.5 * ginv[(k, l)] * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j))).sum();
                worst = worst.max((gamma.get(k, i, j) - fd).abs());
            }
        }
    }
    worst
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    let b = |rng: &mut ChaCha8Rng| Box::new(random_expr(rng, depth - 1));
    if depth == 0 || rng.random_bool(0.3) {
        return if rng.random_bool(0.5) {
            Expr::Const((rng.random_range(-3.0f64..3.0) * 100.0).round() / 100.0)
        } else {
            Expr::Var(rng.random_range(0..2))
        };
    }
    match rng.random_range(0..7) {
        0 => Expr::Add(b(rng), b(rng)),
        1 => Expr::Sub(b(rng), b(rng)),
        2 => Expr::Mul(b(rng), b(rng)),
        3 => Expr::Div(b(rng), b(rng)),
        4 => Expr::Neg(b(rng)),
        5 => Expr::Pow(b(rng), rng.random_range(-2..4)),
        _ => {
            let f = [Func::Sin, Func::Cos, Func::Exp, Func::Log][rng.random_range(0..4)];
            Expr::Call(f, b(rng))
        }
    }
}

fn geometry_oracles() -> Outcome {
    let mut christoffel = 0.0f64;
    for name in builtin_names() {
        let m = builtin(name).unwrap().manifold;
        let samples = domain_samples(&m, &SamplingConfig { points: 500, directions: 0, ..Default::default() });
        assert_eq!(samples.len(), 500);
        for p in &samples.points {
            christoffel = christoffel.max(christoffel_gap(&m, p));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut tested, mut worst) = (0usize, 0.0f64);
    while tested < 1000 {
        let e = random_expr(&mut rng, 4);
        let p = [rng.random_range(0.3..2.0), rng.random_range(0.3..2.0)];
        let var = rng.random_range(0..2);
        let at = |s: f64| {
            let mut q = p;
            q[var] = s;
            e.eval(&q, None).ok().filter(|v: &f64| v.abs() < 1e6)
        };
        let (Some(_), Ok(sym)) = (at(p[var]), e.derive(Variable::Coord(var)).eval(&p, None)) else { continue };
        let (Some(fd), Some(coarse)) = (five_point(at, p[var], 1e-4), five_point(at, p[var], 2e-4)) else { continue };
        // skip points where the difference quotient has not converged
        if (coarse - fd).abs() > 1e-6 * (1.0 + fd.abs()) {
            continue;
        }
        worst = worst.max((sym - fd).abs() / (1.0 + sym.abs()));
        tested += 1;
    }
    let ok = christoffel <= 1e-6 && worst <= 1e-5;
    (ok, format!("Christoffel gap {christoffel:.1e} <= 1e-6 on 500 points x {} manifolds; derivative gap {worst:.1e} <= 1e-5 on {tested} expressions", builtin_names().len()))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_relcomplete");
    let runs: [&[&str]; 3] = [
        &["sweep", "--scenario", "clifton-pohl", "-n", "50", "--seed", "7"],
        &["sweep", "--scenario", "t3-magnetic", "-n", "10", "--seed", "3", "--t-max", "20"],
        &["sweep", "--scenario", "riemann-superlinear", "-n", "10", "--seed", "5", "--format", "json"],
    ];
    let mut compared = 0;
    for args in runs {
        let outputs: Vec<Files> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let status = Command::new(bin).args(args).arg("--output").arg(dir.path()).output().unwrap();
                assert!(status.status.success(), "{args:?}");
                let mut files: Files = std::fs::read_dir(dir.path())
                    .unwrap()
                    .map(|e| {
                        let e = e.unwrap();
                        (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
                    })
                    .collect();
                files.sort();
                files
            })
            .collect();
        if outputs[0] != outputs[1] || outputs[0].len() != 2 {
            return (false, format!("outputs differ for {args:?}"));
        }
        compared += outputs[0].len();
    }
    (true, format!("{compared} CSV/JSON files byte-identical across repeated seeded sweeps"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("conservation law on t3-magnetic", conservation_law),
        ("Clifton-Pohl geodesic blows up at t = 1", clifton_pohl_incompleteness),
        ("null-plane cubic blows up at t = 1", null_plane_incompleteness),
        ("t3-magnetic sweep completes under the speed bound", magnetic_sweep),
        ("Killing-charge rate identity", killing_charge_identity),
        ("skewness agrees with the decomposition", skewness_and_decomposition),
        ("checker soundness on the catalog", checker_soundness),
        ("geometry and derivative oracles", geometry_oracles),
        ("seeded sweeps are deterministic", determinism),
    ];
    let mut failures = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(outcome) => outcome,
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                (false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        failures += usize::from(!ok);
        println!("{} [{}] {title}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
