//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.
//! Runs without the libtest harness so the lines are never captured.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gauss_trace::cli::{run, sweep, ExperimentConfig, RunOptions, RunOutcome, SweepAxis};
use gauss_trace::domains::{make_ball, make_halfspace};
use gauss_trace::gauss_core::mehler_apply;
use gauss_trace::gauss_core::quadrature::gauss_hermite;
use gauss_trace::gauss_core::{hermite_transform, MultiIndex};
use gauss_trace::halfspace_spectral::{projection_apply, split};
use gauss_trace::surface_measure::{
    maggl1_check, qphi_derivative_check, rho_total_via_identity, surface_integral_fn, KdeOptions,
};
use gauss_trace::trace_identities::{default_suite_domains, run_suite, suite_fields};
use gauss_trace::{GaussianSpace, HermiteExpansion, SamplerState, ScalarField};
use nalgebra::DVector;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("gt-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run_toml(text: &str, dir: &Path, workers: usize) -> Result<RunOutcome, String> {
    let cfg = ExperimentConfig::from_toml_str(text).map_err(|e| e.to_string())?;
    let opts = RunOptions {
        seed: None,
        out_dir: Some(dir.to_path_buf()),
        workers: Some(workers),
    };
    run(&cfg, &opts).map_err(|e| e.to_string())
}

fn failed_checks(o: &RunOutcome) -> String {
    let bad: Vec<_> = o
        .checks
        .iter()
        .filter(|c| c.gated && !c.pass)
        .map(|c| format!("{} ({})", c.name, c.detail))
        .collect();
    if bad.is_empty() {
        format!("{} checks pass", o.checks.len())
    } else {
        format!("failed: {}", bad.join("; "))
    }
}

fn sphere_surface_mass() -> Outcome {
    let t = Instant::now();
    let space = GaussianSpace::standard(2).map_err(|e| e.to_string())?;
    let ball = make_ball(&space, 1.0).map_err(|e| e.to_string())?;
    let want = (-0.5f64).exp();
    let (q, _) = surface_integral_fn(&space, &ball, 0.0, 32, &|_| 1.0).map_err(|e| e.to_string())?;
    let mc = rho_total_via_identity(&space, &ball, SamplerState::new(42, 0), 1_000_000).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let ok = (q - want).abs() <= 1e-3 && (mc.mean - want).abs() <= 3.0 * mc.stderr && secs <= 10.0;
    Ok((
        ok,
        format!(
            "quadrature {q:.8}, MC {:.5}±{:.1e}, target {want:.5}, {secs:.1}s",
            mc.mean, mc.stderr
        ),
    ))
}

fn ibp_suite() -> Outcome {
    let t = Instant::now();
    let doms = default_suite_domains().map_err(|e| e.to_string())?;
    let reps = run_suite(&doms, SamplerState::new(42, 0), 1_000_000, 32).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let ids: BTreeSet<String> = reps.iter().map(|r| r.id.to_string()).collect();
    let domains: BTreeSet<String> = reps.iter().map(|r| r.domain.clone()).collect();
    let need = [
        "parti",
        "partitraccia",
        "partitraccia2",
        "campi",
        "particlassica",
        "partial_h",
    ];
    let covered = need.iter().all(|i| ids.contains(*i)) && domains.len() == doms.len();
    let failed = reps.iter().filter(|r| !r.pass).count();
    Ok((
        failed == 0 && covered && secs <= 300.0,
        format!(
            "{} reports over {} domains and {} identities, {failed} fail, {secs:.1}s",
            reps.len(),
            domains.len(),
            ids.len()
        ),
    ))
}

/// `E[KDE_h](ξ) = ∫ f(ξ − h u) γ(u) du` for a closed-form density `f`.
fn smoothed(f: impl Fn(f64) -> f64, xi: f64, h: f64) -> f64 {
    let (x, w) = gauss_hermite(60);
    x.iter().zip(&w).map(|(u, w)| w * f(xi - h * u)).sum()
}

fn density_calculus() -> Outcome {
    let space = GaussianSpace::standard(1).map_err(|e| e.to_string())?;
    // G(x) = x
    let line = make_halfspace(&space, &[-1.0]).map_err(|e| e.to_string())?;
    let gamma = |s: f64| (-0.5 * s * s).exp() / (2.0 * std::f64::consts::PI).sqrt();
    type Poly = fn(f64) -> (f64, f64);
    let cases: [(ScalarField, Poly); 3] = [
        (ScalarField::constant(1, 1.0), |_| (1.0, 0.0)),
        (ScalarField::coordinate(1, 0), |s| (s, 1.0)),
        (ScalarField::coordinate_power(1, 0, 2), |s| (s * s, 2.0 * s)),
    ];
    let opts = KdeOptions::default();
    let mut ok = true;
    let mut notes = Vec::new();
    for (i, (phi, p)) in cases.iter().enumerate() {
        let d = qphi_derivative_check(&space, &line, phi, SamplerState::new(7, i as u64), 1_000_000, &opts)
            .map_err(|e| e.to_string())?;
        let h = d.bandwidth;
        // q_φ = φγ and q_φ' = (φ' − sφ)γ, both seen through the kernel
        let mut worst: f64 = 0.0;
        for (j, xi) in d.grid.iter().enumerate() {
            let o = smoothed(|s| (p(s).1 - s * p(s).0) * gamma(s), *xi, h);
            worst = worst.max((d.q_phi1[j].mean - o).abs() / d.q_phi1[j].stderr);
        }
        for (j, xi) in d.curve.grid.iter().enumerate() {
            let o = smoothed(|s| p(s).0 * gamma(s), *xi, h);
            worst = worst.max((d.curve.values[j] - o).abs() / d.curve.stderr[j]);
        }
        let pass = d.passes(5.0) && worst <= 5.0;
        ok &= pass;
        notes.push(format!(
            "{}: fd/φ₁ {:.2}, closed form {:.2}",
            phi.label(),
            d.max_ratio,
            worst
        ));
    }
    let doms = default_suite_domains().map_err(|e| e.to_string())?;
    let mut l1_total = 0;
    for (i, d) in doms.iter().enumerate() {
        for (j, phi) in suite_fields(d.space.dim()).iter().enumerate() {
            let st = SamplerState::new(8, (i * 16 + j) as u64);
            let c = maggl1_check(&d.space, &d.domain, phi, st, 200_000, &opts).map_err(|e| e.to_string())?;
            if !c.holds {
                ok = false;
                notes.push(format!("L1 bound fails on {}/{}", d.domain.label(), phi.label()));
            }
            l1_total += 1;
        }
    }
    notes.push(format!("L1 bound checked on {l1_total} domain/φ pairs"));
    Ok((ok, notes.join("; ")))
}

fn spectral_ou() -> Outcome {
    let space = GaussianSpace::diagonal(vec![1.0, 0.4]).map_err(|e| e.to_string())?;
    let mut rng_coeff = 0.37f64;
    let mut next = || {
        rng_coeff = (rng_coeff * 9301.0 + 0.49297).fract();
        2.0 * rng_coeff - 1.0
    };
    let probes: Vec<DVector<f64>> = [(-1.3, 0.2), (0.0, 0.0), (0.7, -0.9), (2.1, 0.5)]
        .iter()
        .map(|(a, b)| DVector::from_vec(vec![*a, *b]))
        .collect();
    let mut worst_spec: f64 = 0.0;
    for deg in [3usize, 6, 10] {
        let mut e = HermiteExpansion::new(&space, deg);
        for a in 0..=deg as u32 {
            for b in 0..=(deg as u32 - a) {
                let alpha: MultiIndex = vec![a, b];
                e.add_term(alpha, next() / (1.0 + (a + b) as f64))
                    .map_err(|e| e.to_string())?;
            }
        }
        let f = e.to_field("p");
        for t in [0.05, 0.5, 2.0] {
            let st = e.semigroup(t);
            for x in &probes {
                let m = mehler_apply(&space, &f, t, x, deg / 2 + 2).map_err(|e| e.to_string())?;
                worst_spec = worst_spec.max((m - st.eval(x)).abs());
            }
        }
    }
    // a polynomial not built from Hermite modes
    let f = ScalarField::sum(
        &ScalarField::coordinate_power(2, 1, 10),
        &ScalarField::product(&ScalarField::coordinate_power(2, 0, 3), &ScalarField::coordinate(2, 1)),
    );
    let e = hermite_transform(&space, &f, 10, 12).map_err(|e| e.to_string())?;
    for t in [0.1, 1.0] {
        for x in &probes {
            let m = mehler_apply(&space, &f, t, x, 8).map_err(|e| e.to_string())?;
            let s = e.semigroup(t).eval(x);
            worst_spec = worst_spec.max((m - s).abs() / (1.0 + s.abs()));
        }
    }
    let mut worst_eig: f64 = 0.0;
    for k in 0..=10u32 {
        let hk = HermiteExpansion::axis_mode(&space, 0, k).map_err(|e| e.to_string())?;
        let f = hk.to_field("h");
        for t in [0.01, 0.3, 1.5] {
            for x in &probes {
                let m = mehler_apply(&space, &f, t, x, k as usize / 2 + 2).map_err(|e| e.to_string())?;
                worst_eig = worst_eig.max((m - (-(k as f64) * t).exp() * hk.eval(x)).abs());
            }
        }
    }
    Ok((
        worst_spec <= 1e-8 && worst_eig <= 1e-10,
        format!("Mehler vs spectral {worst_spec:.1e}, T(t)h_k vs e^(-kt)h_k {worst_eig:.1e}"),
    ))
}

fn trace_space_norms() -> Outcome {
    let dir = scratch("norms");
    let o = run_toml(
        "experiment = \"halfspace_norms\"\nsamples = 1\nseed = 42\n[space]\ndim = 3\neigenvalues = [1.0, 0.5, 0.25]\n[options]\nmax_degree = 12\n",
        &dir,
        1,
    )?;
    let names: Vec<_> = o.checks.iter().map(|c| c.name.as_str()).collect();
    let complete = names.contains(&"norm_ratios")
        && names.contains(&"t2_norm_h3")
        && names.iter().filter(|n| n.starts_with("slope[")).count() == 6;
    let rows = std::fs::read_to_string(dir.join("trace_norms.csv"))
        .map_err(|e| e.to_string())?
        .lines()
        .count()
        - 1;
    Ok((
        o.passed() && complete && rows == 18,
        format!("{rows} functions, {}", failed_checks(&o)),
    ))
}

fn extension_operator() -> Outcome {
    let dir = scratch("extension");
    let o = run_toml(
        "experiment = \"extension_bound\"\nsamples = 200000\nseed = 42\n[options]\nmax_degree = 12\n",
        &dir,
        1,
    )?;
    let names: Vec<_> = o.checks.iter().map(|c| c.name.as_str()).collect();
    let complete = ["extension_ratio_trend", "trace_of_extension", "projection"]
        .iter()
        .all(|n| names.contains(n));

    // u(t, y) = t + h_1(y) has Pu = t + (1 − e^{−t²}) h_1(y)
    let space = GaussianSpace::diagonal(vec![0.5, 1.0, 0.3]).map_err(|e| e.to_string())?;
    let sp = split(&space, 0).map_err(|e| e.to_string())?;
    let h1 = HermiteExpansion::axis_mode(sp.y_space(), 1, 1).map_err(|e| e.to_string())?;
    let (s2, h1f) = (sp.clone(), h1.to_field("h1"));
    let u = ScalarField::from_value("t+h1", 3, move |x| {
        let (t, y) = s2.to_split(x);
        t + h1f.value(&y)
    });
    let mut worst: f64 = 0.0;
    for t in [0.0, 0.2, 0.9, 2.5] {
        for yv in [(-1.0, 0.4), (0.3, -1.7), (1.2, 1.1)] {
            let y = DVector::from_vec(vec![yv.0, yv.1]);
            let x = sp.from_split(t, &y);
            let p = projection_apply(&sp, &u, &x, 4).map_err(|e| e.to_string())?;
            worst = worst.max((p - (t + (1.0 - (-t * t).exp()) * h1.eval(&y))).abs());
        }
    }
    Ok((
        o.passed() && complete && worst <= 1e-10,
        format!("{}, closed-form projection error {worst:.1e}", failed_checks(&o)),
    ))
}

fn ellipsoid_identity() -> Outcome {
    let dir = scratch("ellipsoid");
    let o = run_toml(
        "experiment = \"ellipsoid_identity\"\nsamples = 1000000\nseed = 42\n",
        &dir,
        1,
    )?;
    let cases = o.checks.iter().filter(|c| c.name.starts_with("ellipsoid_mass")).count();
    Ok((
        o.passed() && cases == 3,
        format!("{cases} configurations, {}", failed_checks(&o)),
    ))
}

fn convergence_law() -> Outcome {
    let dir = scratch("convergence");
    let cfg = ExperimentConfig::from_toml_str(
        "experiment = \"ibp_suite\"\nsamples = 10000\nseed = 5\n[space]\ndim = 1\n[domain]\nkind = \"halfspace\"\nhhat = [1.0]\n[options]\nreplicates = 64\n",
    )
    .map_err(|e| e.to_string())?;
    let opts = RunOptions {
        out_dir: Some(dir.clone()),
        ..Default::default()
    };
    let o = sweep(&cfg, SweepAxis::Samples, &[1e4, 1e5, 1e6], &opts).map_err(|e| e.to_string())?;
    let slope = o
        .checks
        .iter()
        .find(|c| c.name == "convergence_slope")
        .map(|c| c.detail.clone())
        .unwrap_or_default();
    Ok((o.passed() && !slope.is_empty(), format!("fitted slope {slope}")))
}

fn reproducibility() -> Outcome {
    let text = "experiment = \"ibp_suite\"\nsamples = 1000000\nseed = 42\n";
    let (a, b) = (scratch("repro-a"), scratch("repro-b"));
    run_toml(text, &a, 2)?;
    run_toml(text, &b, 2)?;
    let x = std::fs::read(a.join("ibp_suite.csv")).map_err(|e| e.to_string())?;
    let y = std::fs::read(b.join("ibp_suite.csv")).map_err(|e| e.to_string())?;
    Ok((
        x == y && !x.is_empty(),
        format!("{} bytes, identical: {}", x.len(), x == y),
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("sphere surface mass by two routes", sphere_surface_mass),
        ("integration-by-parts suite", ibp_suite),
        ("density calculus", density_calculus),
        ("spectral Ornstein-Uhlenbeck", spectral_ou),
        ("trace-space norms", trace_space_norms),
        ("extension operator and projection", extension_operator),
        ("ellipsoid mass identity", ellipsoid_identity),
        ("convergence law", convergence_law),
        ("reproducibility", reproducibility),
    ];
    let mut all = true;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        all &= pass;
        println!(
            "{} criterion {} ({name}): {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    if !all {
        eprintln!("at least one acceptance criterion failed");
        std::process::exit(1);
    }
}
