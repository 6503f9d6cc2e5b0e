use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;

use super::config::{EllipsoidCase, Experiment, ExperimentConfig, SpaceSpec};
use crate::domains::{
    dirichlet_alphas, dirichlet_space, ellipsoid_mass_identity, make_ball, make_halfspace, ns_sum, DirichletCase,
    DomainSpec, EllipsoidSpec, LevelSetDomain,
};
use crate::error::{Error, Result};
use crate::gauss_core::quadrature::TENSOR_BUDGET;
use crate::gauss_core::{GaussianSpace, HermiteExpansion, SamplerState, ScalarField};
use crate::halfspace_spectral::{
    extension_apply, hermite_family, loglog_slope, projection_apply, projection_field, random_combination, split,
    t2_norm_spectral, trace_norm_table, verify_extension_bound, write_trace_norms_csv, SplitSpace, TimeGrid,
};
use crate::surface_measure::{
    coarea_surface_integral, maggl1_check, qphi_derivative_check, rho_total_via_identity, surface_integral_fn,
    Bandwidth, KdeOptions,
};
use crate::trace_identities::{
    default_suite_domains, hardy_probe, passes, run_suite, write_reports_csv, IdentityBatch, SuiteDomain,
};

/// Overrides from the command line.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Whether the check decides the exit status.
    pub gated: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub experiment: Experiment,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.gated).all(|c| c.pass)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Dimension,
    Samples,
    Bandwidth,
    Degree,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Dimension => "dimension",
            SweepAxis::Samples => "samples",
            SweepAxis::Bandwidth => "bandwidth",
            SweepAxis::Degree => "degree",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dimension" => Ok(SweepAxis::Dimension),
            "samples" => Ok(SweepAxis::Samples),
            "bandwidth" => Ok(SweepAxis::Bandwidth),
            "degree" => Ok(SweepAxis::Degree),
            _ => Err(Error::invalid(format!(
                "unknown sweep axis `{s}` (expected dimension, samples, bandwidth or degree)"
            ))),
        }
    }
}

/// Runs one experiment, writing its CSV files and `manifest.txt` into the
/// output directory. The manifest is written even when the run fails.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    execute(config, opts, "run".into(), run_experiment)
}

/// Runs the experiment's metric once per value of `axis` and writes
/// `sweep_<axis>.csv`.
pub fn sweep(config: &ExperimentConfig, axis: SweepAxis, values: &[f64], opts: &RunOptions) -> Result<RunOutcome> {
    let mode = format!(
        "sweep axis={} values={}",
        axis.as_str(),
        values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    );
    execute(config, opts, mode, |ctx| run_sweep(ctx, axis, values))
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    dir: PathBuf,
    files: Vec<PathBuf>,
    checks: Vec<Check>,
}

impl Ctx<'_> {
    fn state(&self) -> SamplerState {
        SamplerState::new(self.seed, 0)
    }

    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        let gated = self.cfg.experiment.gates();
        self.checks.push(Check {
            name: name.into(),
            pass,
            gated,
            detail: detail.into(),
        });
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn space_or(&self, default: SpaceSpec) -> Result<GaussianSpace> {
        self.cfg.space.clone().unwrap_or(default).build()
    }
}

fn execute(
    config: &ExperimentConfig,
    opts: &RunOptions,
    mode: String,
    body: impl FnOnce(&mut Ctx) -> Result<()> + Send,
) -> Result<RunOutcome> {
    config.validate()?;
    let dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output_path));
    std::fs::create_dir_all(&dir)?;
    let seed = opts.seed.unwrap_or(config.seed);
    let workers = opts.workers.unwrap_or_else(rayon::current_num_threads);
    if workers == 0 {
        return Err(Error::invalid("worker count must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let start = Instant::now();
    let mut ctx = Ctx {
        cfg: config,
        seed,
        dir: dir.clone(),
        files: Vec::new(),
        checks: Vec::new(),
    };
    let result = pool.install(|| body(&mut ctx));
    let outcome = RunOutcome {
        experiment: config.experiment,
        out_dir: dir.clone(),
        files: ctx.files,
        checks: ctx.checks,
    };
    let status = match &result {
        Ok(()) if outcome.passed() => "pass".to_string(),
        Ok(()) => "fail".to_string(),
        Err(e) => format!("error: {e}"),
    };
    write_manifest(
        &dir,
        config,
        &mode,
        seed,
        workers,
        &status,
        start.elapsed().as_secs_f64(),
        &outcome,
    )?;
    result.map(|_| outcome)
}

#[allow(clippy::too_many_arguments)]
fn write_manifest(
    dir: &Path,
    cfg: &ExperimentConfig,
    mode: &str,
    seed: u64,
    workers: usize,
    status: &str,
    wall: f64,
    out: &RunOutcome,
) -> Result<()> {
    let mut m = String::new();
    let _ = writeln!(m, "gauss-trace {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "experiment: {}", cfg.experiment.as_str());
    let _ = writeln!(m, "mode: {mode}");
    let _ = writeln!(m, "seed: {seed}");
    let _ = writeln!(m, "samples: {}", cfg.samples);
    let _ = writeln!(m, "workers: {workers}");
    let _ = writeln!(m, "status: {status}");
    let _ = writeln!(m, "wall_time_s: {wall:.3}");
    let _ = writeln!(m, "files:");
    for f in &out.files {
        let _ = writeln!(
            m,
            "  {}",
            f.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
        );
    }
    let _ = writeln!(m, "checks:");
    for c in &out.checks {
        let tag = match (c.pass, c.gated) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "NOTE",
        };
        let _ = writeln!(m, "  [{tag}] {}: {}", c.name, c.detail);
    }
    let _ = writeln!(m, "config:");
    for line in cfg.to_toml_string().lines() {
        let _ = writeln!(m, "  {line}");
    }
    std::fs::write(dir.join("manifest.txt"), m)?;
    Ok(())
}

fn f(v: f64) -> String {
    v.to_string()
}

fn run_experiment(ctx: &mut Ctx) -> Result<()> {
    match ctx.cfg.experiment {
        Experiment::IbpSuite => ibp_suite(ctx),
        Experiment::SurfaceRoutes => surface_routes(ctx),
        Experiment::QphiStudy => qphi_study(ctx, None).map(|_| ()),
        Experiment::HalfspaceNorms => halfspace_norms(ctx),
        Experiment::ExtensionBound => extension_bound(ctx),
        Experiment::HardySweep => {
            let dims = ctx.cfg.options.dims.clone().unwrap_or_else(|| (2..=10).collect());
            hardy_sweep(ctx, &dims, "hardy.csv")
        }
        Experiment::EllipsoidIdentity => ellipsoid_identity(ctx),
    }
}

fn suite_domains(ctx: &Ctx) -> Result<Vec<SuiteDomain>> {
    match (&ctx.cfg.space, &ctx.cfg.domain) {
        (Some(s), Some(d)) => {
            let space = s.build()?;
            let domain = d.build(&space)?;
            Ok(vec![SuiteDomain { space, domain }])
        }
        (None, None) => default_suite_domains(),
        _ => Err(Error::config(
            "domain",
            "give both [space] and [domain], or neither for the built-in suite",
        )),
    }
}

fn ibp_suite(ctx: &mut Ctx) -> Result<()> {
    let doms = suite_domains(ctx)?;
    let reports = run_suite(&doms, ctx.state(), ctx.cfg.samples, ctx.cfg.resolution)?;
    let path = ctx.dir.join("ibp_suite.csv");
    write_reports_csv(&path, &reports)?;
    ctx.files.push(path);
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{}/{}/{}/{}", r.id, r.domain, r.phi_label, r.k_or_q))
        .collect();
    let detail = if failed.is_empty() {
        format!("{} of {} identities pass", reports.len(), reports.len())
    } else {
        format!("{} of {} fail: {}", failed.len(), reports.len(), failed.join(", "))
    };
    ctx.check("ibp_suite", failed.is_empty(), detail);
    Ok(())
}

fn route_domain(ctx: &Ctx, default_space: SpaceSpec, default: DomainSpec) -> Result<(GaussianSpace, LevelSetDomain)> {
    let space = ctx.space_or(default_space)?;
    let domain = ctx.cfg.domain.clone().unwrap_or(default).build(&space)?;
    Ok((space, domain))
}

/// `(value, err)` from quadrature when available, the identity and the kernel.
type Routes = (Option<(f64, f64)>, (f64, f64), (f64, f64));

/// `ρ(G^{-1}(0))` by surface quadrature, by the divergence identity and by
/// the kernel route.
fn rho_routes(
    space: &GaussianSpace,
    domain: &LevelSetDomain,
    state: SamplerState,
    count: usize,
    resolution: usize,
) -> Result<Routes> {
    let quad = match surface_integral_fn(space, domain, 0.0, resolution, &|_| 1.0) {
        Ok(v) => Some(v),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let ident = rho_total_via_identity(space, domain, state.substream(1), count)?;
    let kde = coarea_surface_integral(space, domain, &|_| 1.0, state.substream(2), count.max(10_000))?;
    Ok((quad, (ident.mean, ident.stderr), (kde.mean, kde.stderr)))
}

fn surface_routes(ctx: &mut Ctx) -> Result<()> {
    let (space, domain) = route_domain(
        ctx,
        SpaceSpec::standard(2),
        DomainSpec::Ball {
            radius: 1.0,
            center: None,
            band_delta: None,
        },
    )?;
    let (quad, ident, kde) = rho_routes(&space, &domain, ctx.state(), ctx.cfg.samples, ctx.cfg.resolution)?;
    let mut rows = Vec::new();
    if let Some(q) = quad {
        rows.push(vec!["quadrature".into(), f(q.0), f(q.1)]);
    }
    rows.push(vec!["divergence_identity".into(), f(ident.0), f(ident.1)]);
    rows.push(vec!["kernel_density".into(), f(kde.0), f(kde.1)]);
    ctx.csv("surface_routes.csv", &["route", "value", "err"], &rows)?;
    let reference = quad.unwrap_or(ident);
    let a = passes(reference.0, ident.0, reference.1, ident.1);
    let b = passes(reference.0, kde.0, reference.1, kde.1);
    ctx.check(
        "routes_agree",
        a && b,
        format!(
            "reference {:.6}±{:.1e}, identity {:.6}±{:.1e}, kernel {:.6}±{:.1e}",
            reference.0, reference.1, ident.0, ident.1, kde.0, kde.1
        ),
    );
    Ok(())
}

fn kde_options(ctx: &Ctx, bandwidth: Option<f64>) -> KdeOptions {
    KdeOptions {
        bandwidth: match bandwidth.or(ctx.cfg.options.bandwidth) {
            Some(h) => Bandwidth::Fixed(h),
            None => Bandwidth::Silverman,
        },
        grid_points: ctx.cfg.options.grid_points.unwrap_or(41),
    }
}

type QphiRow = (String, f64, f64);

/// Returns `(phi_label, bandwidth, max_ratio)` per test function.
fn qphi_study(ctx: &mut Ctx, bandwidth: Option<f64>) -> Result<Vec<QphiRow>> {
    let (space, domain) = route_domain(
        ctx,
        SpaceSpec::standard(1),
        // G(x) = x
        DomainSpec::Halfspace {
            hhat: vec![-1.0],
            band_delta: None,
        },
    )?;
    let n = space.dim();
    let fields = [
        ScalarField::constant(n, 1.0),
        ScalarField::coordinate(n, 0),
        ScalarField::coordinate_power(n, 0, 2),
    ];
    let opts = kde_options(ctx, bandwidth);
    let (mut curves, mut derivs, mut summary, mut out) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, phi) in fields.iter().enumerate() {
        let st = ctx.state().substream(i as u64);
        let d = qphi_derivative_check(&space, &domain, phi, st, ctx.cfg.samples, &opts)?;
        let l1 = maggl1_check(&space, &domain, phi, st, ctx.cfg.samples, &opts)?;
        for j in 0..d.curve.grid.len() {
            curves.push(vec![
                phi.label().into(),
                f(d.curve.grid[j]),
                f(d.curve.values[j]),
                f(d.curve.stderr[j]),
            ]);
        }
        for j in 0..d.grid.len() {
            derivs.push(vec![
                phi.label().into(),
                f(d.grid[j]),
                f(d.fd[j].mean),
                f(d.fd[j].stderr),
                f(d.q_phi1[j].mean),
                f(d.q_phi1[j].stderr),
            ]);
        }
        summary.push(vec![
            phi.label().into(),
            f(d.bandwidth),
            f(d.max_ratio),
            f(d.ftc_residual.mean),
            f(d.ftc_residual.stderr),
            f(l1.l1),
            f(l1.bound.mean),
            f(l1.bound.stderr),
        ]);
        ctx.check(
            format!("derivative[{}]", phi.label()),
            d.passes(5.0),
            format!(
                "max ratio {:.3}, ftc residual {:.2e}±{:.1e}",
                d.max_ratio, d.ftc_residual.mean, d.ftc_residual.stderr
            ),
        );
        ctx.check(
            format!("l1_bound[{}]", phi.label()),
            l1.holds,
            format!("{:.6} ≤ {:.6}", l1.l1, l1.bound.mean),
        );
        out.push((phi.label().to_string(), d.bandwidth, d.max_ratio));
    }
    let tag = bandwidth.map(|h| format!("_h{h}")).unwrap_or_default();
    ctx.csv(
        &format!("qphi_curves{tag}.csv"),
        &["phi_label", "xi", "value", "stderr"],
        &curves,
    )?;
    ctx.csv(
        &format!("qphi_derivative{tag}.csv"),
        &["phi_label", "xi", "fd", "fd_err", "q_phi1", "q_phi1_err"],
        &derivs,
    )?;
    ctx.csv(
        &format!("qphi_checks{tag}.csv"),
        &[
            "phi_label",
            "bandwidth",
            "max_ratio",
            "ftc_residual",
            "ftc_err",
            "l1",
            "l1_bound",
            "l1_bound_err",
        ],
        &summary,
    )?;
    Ok(out)
}

fn halfspace_split(ctx: &Ctx) -> Result<SplitSpace> {
    let space = ctx.space_or(SpaceSpec::standard(2))?;
    split(&space, ctx.cfg.options.h_index.unwrap_or(0)).map_err(|e| Error::config("options.h_index", e.to_string()))
}

const PAIR_NAMES: [&str; 4] = ["interp1", "interp2", "interp3", "interp4"];

fn halfspace_norms(ctx: &mut Ctx) -> Result<()> {
    let sp = halfspace_split(ctx)?;
    let d = ctx.cfg.options.max_degree.unwrap_or(12);
    let mut family = hermite_family(&sp, d)?;
    if d >= 1 {
        for i in 0..5 {
            let e = random_combination(&sp, 5, d as usize, ctx.state().substream(i))?;
            family.push((format!("mix{i}"), e));
        }
    }
    let rows = trace_norm_table(&sp, &family, &TimeGrid::default())?;
    let path = ctx.dir.join("trace_norms.csv");
    write_trace_norms_csv(&path, &rows)?;
    ctx.files.push(path);

    let modes: Vec<_> = rows.iter().skip(1).take(d as usize).collect();
    let nonconst: Vec<_> = rows.iter().filter(|r| r.ratio_max.is_finite()).collect();
    let worst = nonconst.iter().map(|r| r.ratio_max).fold(0.0, f64::max);
    let mut spread: f64 = 1.0;
    for i in 0..4 {
        for j in 0..4 {
            if i == j {
                continue;
            }
            let q: Vec<f64> = nonconst.iter().map(|r| r.values()[i] / r.values()[j]).collect();
            let hi = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = q.iter().cloned().fold(f64::INFINITY, f64::min);
            spread = spread.max(hi / lo);
        }
    }
    ctx.check(
        "norm_ratios",
        worst <= 50.0 && spread <= 50.0,
        format!("largest ratio {worst:.3}, largest spread of a pair ratio {spread:.3}"),
    );
    if modes.len() >= 2 {
        let x: Vec<f64> = (1..=modes.len()).map(|k| k as f64).collect();
        for i in 0..4 {
            for j in (i + 1)..4 {
                let y: Vec<f64> = modes.iter().map(|r| r.values()[i] / r.values()[j]).collect();
                let s = loglog_slope(&x, &y);
                ctx.checks.push(Check {
                    name: format!("slope[{}/{}]", PAIR_NAMES[i], PAIR_NAMES[j]),
                    pass: s.abs() <= 0.1,
                    gated: true,
                    detail: format!("{s:.4}"),
                });
            }
        }
    }
    if d >= 3 {
        let h3 = HermiteExpansion::axis_mode(sp.y_space(), 0, 3)?;
        let v = t2_norm_spectral(&sp, &h3)?;
        let want = (1.0 + 3f64.sqrt()).sqrt();
        ctx.check("t2_norm_h3", (v - want).abs() <= 1e-12, format!("{v} vs {want}"));
    }
    Ok(())
}

fn extension_rows(ctx: &mut Ctx, sp: &SplitSpace, family: &[(String, HermiteExpansion)], name: &str) -> Result<f64> {
    let rep = verify_extension_bound(sp, family, ctx.state(), ctx.cfg.samples)?;
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                r.degree.to_string(),
                f(r.l2_sq.mean),
                f(r.grad_sq.mean),
                f(r.w12_norm),
                f(r.t2_norm),
                f(r.ratio),
                f(r.ratio_err),
            ]
        })
        .collect();
    ctx.csv(
        name,
        &[
            "f_label",
            "degree",
            "l2_sq",
            "grad_sq",
            "w12_norm",
            "t2_norm",
            "ratio",
            "ratio_err",
        ],
        &rows,
    )?;
    ctx.check(
        "extension_ratio_trend",
        rep.slope.is_nan() || rep.slope <= 0.1,
        format!("max ratio {:.4}, log-log slope {:.4}", rep.max_ratio, rep.slope),
    );
    ctx.check(
        "extension_ratio_bounded",
        rep.max_ratio.is_finite(),
        format!("{:.4}", rep.max_ratio),
    );
    Ok(rep.max_ratio)
}

fn extension_bound(ctx: &mut Ctx) -> Result<()> {
    let sp = halfspace_split(ctx)?;
    let d = ctx.cfg.options.max_degree.unwrap_or(12);
    let family = hermite_family(&sp, d)?;
    extension_rows(ctx, &sp, &family, "extension_bound.csv")?;

    // boundary behaviour of E and P on probes
    let probes: Vec<DVector<f64>> = (0..9)
        .map(|i| {
            let u = -2.0 + 0.5 * i as f64;
            DVector::from_fn(sp.y_dim(), |j, _| {
                u * sp.y_space().sqrt_eigenvalues()[j] * (1.0 + 0.1 * j as f64)
            })
        })
        .collect();
    let order = d as usize + 2;
    let mut trace_err: f64 = 0.0;
    for (_, e) in &family {
        let field = e.to_field("f");
        for y in &probes {
            trace_err = trace_err.max((extension_apply(&sp, &field, 0.0, y, order)? - e.eval(y)).abs());
        }
    }
    ctx.check(
        "trace_of_extension",
        trace_err <= 1e-10,
        format!("max |Ef(0,y) − f(y)| = {trace_err:.2e}"),
    );

    let h1 = HermiteExpansion::axis_mode(sp.y_space(), 0, 1)?;
    let h1f = h1.to_field("h1");
    let s2 = sp.clone();
    let u = ScalarField::from_value("t+h1", sp.parent().dim(), move |x| {
        let (t, y) = s2.to_split(x);
        t + h1f.value(&y)
    });
    let pu = projection_field(&sp, &u, order);
    let (mut idem, mut zero): (f64, f64) = (0.0, 0.0);
    for y in &probes {
        for t in [0.0, 0.3, 1.1, 2.0] {
            let x = sp.from_split(t, y);
            let a = projection_apply(&sp, &u, &x, order)?;
            let b = projection_apply(&sp, &pu, &x, order)?;
            idem = idem.max((a - b).abs());
            if t == 0.0 {
                zero = zero.max(a.abs());
            }
        }
    }
    ctx.check(
        "projection",
        idem <= 1e-10 && zero <= 1e-10,
        format!("max |P(Pu) − Pu| = {idem:.2e}, max |Pu(0,y)| = {zero:.2e}"),
    );
    Ok(())
}

struct HardyLine {
    dim: usize,
    cells: Vec<String>,
}

fn hardy_rows(ctx: &Ctx, n: usize, radius: f64, p: f64) -> Result<Vec<HardyLine>> {
    let spec = match &ctx.cfg.space {
        Some(s) if s.eigenvalues.is_none() => s.with_dim(n)?,
        Some(s) if s.dim == n => s.clone(),
        _ => SpaceSpec {
            dim: n,
            eigenvalues: None,
            spectrum: Some(super::config::NamedSpectrum::ScaledIdentity),
        },
    };
    let space = spec.build()?;
    let domain = make_ball(&space, radius)?;
    let family = [
        ScalarField::constant(n, 1.0),
        ScalarField::coordinate(n, 0),
        ScalarField::gaussian_bump(n, 0.25),
    ];
    let st = ctx.state().substream(n as u64);
    let rep = match hardy_probe(&space, &domain, p, &family, st, ctx.cfg.samples, ctx.cfg.resolution) {
        Ok(r) => r,
        Err(e @ (Error::VarianceExplosion(_) | Error::Unsupported(_))) => {
            return Ok(vec![HardyLine {
                dim: n,
                cells: vec![
                    n.to_string(),
                    "-".into(),
                    e.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ],
            }])
        }
        Err(e) => return Err(e),
    };
    let sphere_ok = rep.sphere.iter().all(|r| r.pass);
    Ok(rep
        .rows
        .iter()
        .map(|r| HardyLine {
            dim: n,
            cells: vec![
                n.to_string(),
                r.phi_label.clone(),
                f(r.numerator.mean),
                f(r.numerator.stderr),
                f(r.sobolev.mean),
                f(r.sobolev.stderr),
                f(r.ratio),
                f(r.ratio_err),
                rep.converse_regime.to_string(),
                sphere_ok.to_string(),
            ],
        })
        .collect())
}

fn hardy_sweep(ctx: &mut Ctx, dims: &[usize], name: &str) -> Result<()> {
    let radius = match &ctx.cfg.domain {
        Some(DomainSpec::Ball { radius, .. }) => *radius,
        Some(_) => return Err(Error::config("domain.kind", "the Hardy sweep uses a centred ball")),
        None => 1.0,
    };
    let p = ctx.cfg.options.hardy_p.unwrap_or(2.0);
    let mut rows = Vec::new();
    for &n in dims {
        for line in hardy_rows(ctx, n, radius, p)? {
            if line.cells[1] == "-" {
                ctx.check(format!("hardy[n={}]", line.dim), false, line.cells[2].clone());
            }
            rows.push(line.cells);
        }
    }
    ctx.csv(
        name,
        &[
            "dim",
            "phi_label",
            "numerator",
            "numerator_err",
            "sobolev",
            "sobolev_err",
            "ratio",
            "ratio_err",
            "converse_regime",
            "sphere_identity_pass",
        ],
        &rows,
    )
}

/// Three built-in cases for the ellipsoid mass identity.
pub fn default_ellipsoid_cases() -> Vec<EllipsoidCase> {
    let dl = dirichlet_space(DirichletCase::Laplacian, 4).expect("positive spectrum");
    vec![
        EllipsoidCase {
            eigenvalues: vec![1.0, 0.5],
            alphas: vec![1.0, 2.0],
            radius: 1.0,
        },
        EllipsoidCase {
            eigenvalues: dl.eigenvalues().to_vec(),
            alphas: dirichlet_alphas(0.125, 4),
            radius: 0.3,
        },
        EllipsoidCase {
            eigenvalues: vec![2.0, 1.0, 0.5],
            alphas: vec![0.5, 1.0, 3.0],
            radius: 1.2,
        },
    ]
}

fn ellipsoid_identity(ctx: &mut Ctx) -> Result<()> {
    let cases = match (&ctx.cfg.options.ellipsoids, &ctx.cfg.space, &ctx.cfg.domain) {
        (Some(c), _, _) => c.clone(),
        (None, Some(s), Some(DomainSpec::Ellipsoid { alphas, radius, .. })) => vec![EllipsoidCase {
            eigenvalues: s.build()?.eigenvalues().to_vec(),
            alphas: alphas.clone(),
            radius: *radius,
        }],
        (None, _, Some(_)) => return Err(Error::config("domain.kind", "the mass identity needs an ellipsoid")),
        _ => default_ellipsoid_cases(),
    };
    let mut rows = Vec::new();
    for (i, c) in cases.iter().enumerate() {
        let space = GaussianSpace::diagonal(c.eigenvalues.clone())?;
        let spec = EllipsoidSpec::new(c.alphas.clone(), c.radius)?;
        let (l, r) = ellipsoid_mass_identity(&space, &spec, ctx.state().substream(i as u64), ctx.cfg.samples)?;
        let ok = passes(l.mean, r.mean, l.stderr, r.stderr);
        rows.push(vec![
            i.to_string(),
            space.dim().to_string(),
            f(c.radius),
            f(ns_sum(&space, &spec)),
            f(l.mean),
            f(l.stderr),
            f(r.mean),
            f(r.stderr),
            ok.to_string(),
        ]);
        ctx.check(
            format!("ellipsoid_mass[{i}]"),
            ok,
            format!("{:.6}±{:.1e} vs {:.6}±{:.1e}", l.mean, l.stderr, r.mean, r.stderr),
        );
    }
    ctx.csv(
        "ellipsoid_identity.csv",
        &[
            "case", "dim", "radius", "ns_sum", "lhs", "lhs_err", "rhs", "rhs_err", "pass",
        ],
        &rows,
    )
}

fn inapplicable(axis: SweepAxis, e: Experiment) -> Error {
    Error::InapplicableAxis {
        axis: axis.as_str().into(),
        experiment: e.as_str().into(),
    }
}

fn as_count(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
        Ok(v as usize)
    } else {
        Err(Error::invalid(format!(
            "{what} values must be positive integers, got {v}"
        )))
    }
}

fn run_sweep(ctx: &mut Ctx, axis: SweepAxis, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    let e = ctx.cfg.experiment;
    let name = format!("sweep_{}.csv", axis.as_str());
    match (axis, e) {
        (SweepAxis::Samples, Experiment::IbpSuite) => samples_sweep(ctx, values, &name),
        (SweepAxis::Dimension, Experiment::SurfaceRoutes) => dimension_sweep(ctx, values, &name),
        (SweepAxis::Dimension, Experiment::HardySweep) => {
            let dims = values
                .iter()
                .map(|v| as_count(*v, "dimension"))
                .collect::<Result<Vec<_>>>()?;
            hardy_sweep(ctx, &dims, &name)
        }
        (SweepAxis::Bandwidth, Experiment::QphiStudy) => {
            let mut rows = Vec::new();
            for &h in values {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::invalid(format!("bandwidth values must be positive, got {h}")));
                }
                for (label, bw, ratio) in qphi_study(ctx, Some(h))? {
                    rows.push(vec![f(h), label, f(bw), f(ratio)]);
                }
            }
            ctx.csv(&name, &["bandwidth", "phi_label", "bandwidth_used", "max_ratio"], &rows)
        }
        (SweepAxis::Degree, Experiment::ExtensionBound) => {
            let sp = halfspace_split(ctx)?;
            let family = values
                .iter()
                .map(|v| {
                    let k = as_count(*v + 1.0, "degree")? - 1;
                    Ok((format!("h{k}"), HermiteExpansion::axis_mode(sp.y_space(), 0, k as u32)?))
                })
                .collect::<Result<Vec<_>>>()?;
            extension_rows(ctx, &sp, &family, &name).map(|_| ())
        }
        (SweepAxis::Degree, Experiment::HalfspaceNorms) => {
            let sp = halfspace_split(ctx)?;
            let family = values
                .iter()
                .map(|v| {
                    let k = as_count(*v + 1.0, "degree")? - 1;
                    Ok((format!("h{k}"), HermiteExpansion::axis_mode(sp.y_space(), 0, k as u32)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let rows = trace_norm_table(&sp, &family, &TimeGrid::default())?;
            let path = ctx.dir.join(&name);
            write_trace_norms_csv(&path, &rows)?;
            ctx.files.push(path);
            let worst = rows
                .iter()
                .filter(|r| r.ratio_max.is_finite())
                .map(|r| r.ratio_max)
                .fold(0.0, f64::max);
            ctx.check("norm_ratios", worst <= 50.0, format!("largest ratio {worst:.3}"));
            Ok(())
        }
        _ => Err(inapplicable(axis, e)),
    }
}

/// RMS residual of integration by parts for `φ = x_1`, `k = 1` on the first
/// suite domain, over independent replicates at each sample size.
fn samples_sweep(ctx: &mut Ctx, values: &[f64], name: &str) -> Result<()> {
    let doms = suite_domains(ctx)?;
    let d = &doms[0];
    let n = d.space.dim();
    let mut batch = IdentityBatch::new();
    batch.add_parti(&d.space, &ScalarField::coordinate(n, 0), 0)?;
    let reps = ctx.cfg.options.replicates.unwrap_or(64);
    let mut rows = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (vi, &v) in values.iter().enumerate() {
        let count = as_count(v, "samples")?;
        let (mut s2, mut err) = (0.0, 0.0);
        for r in 0..reps {
            let st = ctx.state().substream(((vi as u64) << 32) | r as u64);
            let rep = batch.run(&d.space, &d.domain, st, count, ctx.cfg.resolution)?.remove(0);
            s2 += rep.residual().powi(2);
            err += rep.combined_error();
        }
        let rms = (s2 / reps as f64).sqrt();
        rows.push(vec![count.to_string(), f(rms), f(err / reps as f64)]);
        xs.push(count as f64);
        ys.push(rms);
    }
    ctx.csv(name, &["samples", "rms_residual", "mean_combined_error"], &rows)?;
    if xs.len() >= 2 {
        let s = loglog_slope(&xs, &ys);
        ctx.check("convergence_slope", (-0.6..=-0.4).contains(&s), format!("{s:.4}"));
    }
    Ok(())
}

/// `ρ` of the hyperplane `{x_1 = 0}` across dimensions.
fn dimension_sweep(ctx: &mut Ctx, values: &[f64], name: &str) -> Result<()> {
    let want = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut rows = Vec::new();
    let mut ok = true;
    for &v in values {
        let n = as_count(v, "dimension")?;
        let space = match &ctx.cfg.space {
            Some(s) if s.eigenvalues.is_none() => s.with_dim(n)?.build()?,
            _ => GaussianSpace::standard(n)?,
        };
        let mut c = vec![0.0; n];
        c[0] = 1.0;
        let domain = make_halfspace(&space, &c)?;
        let st = ctx.state().substream(n as u64);
        // the integrand is constant, so any order within the node budget is exact
        let res = match n {
            1 => ctx.cfg.resolution,
            _ => ctx
                .cfg
                .resolution
                .min(((TENSOR_BUDGET as f64).powf(1.0 / (n - 1) as f64) / 2.0) as usize)
                .max(2),
        };
        let (quad, ident, kde) = rho_routes(&space, &domain, st, ctx.cfg.samples, res)?;
        let q = quad.unwrap_or((f64::NAN, f64::NAN));
        ok &= (q.0 - want).abs() <= 1e-10 && passes(want, ident.0, 0.0, ident.1) && passes(want, kde.0, 0.0, kde.1);
        rows.push(vec![n.to_string(), f(q.0), f(ident.0), f(ident.1), f(kde.0), f(kde.1)]);
    }
    ctx.csv(
        name,
        &["dim", "quadrature", "identity", "identity_err", "kernel", "kernel_err"],
        &rows,
    )?;
    ctx.check(
        "hyperplane_mass_constant",
        ok,
        format!("expected {want:.6} in every dimension"),
    );
    Ok(())
}
