//! Subcommands. Each returns the text shown on stdout and an exit code;
//! files go to the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cavitation::bifurcation::{sweep, verify_limits, BifurcationCurve};
use cavitation::cavity::{fmt_f64, solve_cavity, CavityConfig, CavityTrajectory, ConnectionResult};
use cavitation::energy::RadialState;
use cavitation::inner::{solve_equilibrium, solve_inner, write_equilibrium_csv, EquilibriumPoint};
use rayon::prelude::*;

use crate::config::Resolved;
use crate::svg::{Guide, Plot};
use crate::AppError;

/// Share of grid points that must succeed for `bifurcation` to exit 0.
pub const MIN_SUCCESS: f64 = 0.9;

const SOLVE_HYPOTHESES: [&str; 5] = ["H0", "H1", "H2", "H3", "H4"];

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub text: String,
}

impl Outcome {
    fn new(code: i32, text: String) -> Self {
        Self { code, text }
    }
}

#[derive(Clone, Debug)]
pub struct Options {
    pub out: PathBuf,
    pub svg: bool,
}

impl Options {
    pub fn from_config(r: &Resolved) -> Self {
        Self {
            out: r.config.output.dir.clone(),
            svg: r.config.output.svg,
        }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> AppError + '_ {
    move |source| AppError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    fs::write(path, text).map_err(io(path))
}

fn create(path: &Path) -> Result<fs::File, AppError> {
    fs::File::create(path).map_err(io(path))
}

fn prepare(opts: &Options) -> Result<(), AppError> {
    fs::create_dir_all(&opts.out).map_err(io(&opts.out))
}

fn check_speeds(phi0s: &[f64]) -> Result<(), AppError> {
    match phi0s.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        Some(p) => Err(AppError::Config(format!("phi0 = {p} must be > 0"))),
        None => Ok(()),
    }
}

pub fn cmd_check(r: &Resolved, opts: &Options) -> Result<Outcome, AppError> {
    prepare(opts)?;
    let report = r.energy.hypotheses();
    let ok = report.all_pass(&SOLVE_HYPOTHESES);
    let mut text = format!("{report}\n");
    match report.first_failure(&SOLVE_HYPOTHESES) {
        None => text.push_str("H0-H4 pass: cavity solutions can be computed\n"),
        Some(e) => {
            let _ = writeln!(text, "{} fails: the cavity solver cannot run", e.id);
        }
    }
    write_text(&opts.file("check.txt"), &text)?;
    Ok(Outcome::new(if ok { 0 } else { 1 }, text))
}

/// One solved trajectory with its connection.
#[derive(Clone, Debug)]
pub struct CavityRun {
    pub phi0: f64,
    pub trajectory: CavityTrajectory,
    pub connection: ConnectionResult,
}

fn summary_line(c: &ConnectionResult, phi0: f64, t_stop: f64) -> String {
    format!(
        "phi0 = {phi0}  sigma = {:.12}  Lambda = {:.12}  kind = {}  jump = {:.6e}  ln(jump) = {:.6e}  T = {:.12}  |p(sigma)| = {:.3e}  lax = {}  dp/ds = {:.6}",
        c.sigma, c.lambda, c.kind, c.jump, c.ln_jump, t_stop, c.residual, c.lax_ok, c.dp_ds
    )
}

/// `v(s)` on `[0, s_max]`: the trajectory up to σ, then the uniform state `Λ^d`.
pub fn volume_profile(run: &CavityRun, s_max: f64) -> Vec<(f64, f64)> {
    let tr = &run.trajectory;
    let c = &run.connection;
    let energy = tr.energy();
    let mut pts = vec![(0.0, tr.v0)];
    let start = tr.start;
    for k in 1..=16 {
        let s = start.s0 * k as f64 / 16.0;
        if let Ok(v) = energy.volume(start.state(s)) {
            pts.push((s, v));
        }
    }
    pts.extend(tr.samples.iter().filter(|x| x.s < c.sigma).map(|x| (x.s, x.v)));
    if let Ok(v) = energy.volume(RadialState::new(c.a_minus, c.lambda)) {
        pts.push((c.sigma, v));
    }
    let v_plus = c.lambda.powi(energy.dim() as i32);
    pts.push((c.sigma, v_plus));
    pts.push((s_max.max(c.sigma), v_plus));
    pts
}

fn phi0_tag(phi0: f64) -> String {
    format!("{phi0}").replace('-', "m")
}

pub fn cmd_cavity(r: &Resolved, phi0s: &[f64], opts: &Options) -> Result<Outcome, AppError> {
    if phi0s.is_empty() {
        return Err(AppError::Config("no phi0 given".into()));
    }
    check_speeds(phi0s)?;
    prepare(opts)?;
    let results: Vec<(f64, Result<CavityRun, AppError>)> = phi0s
        .par_iter()
        .map(|&phi0| {
            let run = || -> Result<CavityRun, AppError> {
                let cfg = CavityConfig::new(r.energy.clone(), phi0, r.boundary.clone(), r.config.solver.clone())?;
                let trajectory = solve_cavity(&cfg)?;
                let connection = trajectory.find_connection()?;
                Ok(CavityRun {
                    phi0,
                    trajectory,
                    connection,
                })
            };
            (phi0, run())
        })
        .collect();
    let mut text = String::new();
    let mut runs = Vec::new();
    let mut failed = 0;
    let summary_path = opts.file("cavity_summary.csv");
    let mut summary = csv::Writer::from_writer(create(&summary_path)?);
    let csv_err = |e: csv::Error| AppError::Solver(e.into());
    summary
        .write_record(["phi0", "sigma", "Lambda", "kind", "jump", "ln_jump", "T", "residual", "lax_ok", "dp_ds"])
        .map_err(csv_err)?;
    for (phi0, res) in results {
        match res {
            Ok(run) => {
                let c = &run.connection;
                let t = run.trajectory.t_stop;
                let _ = writeln!(text, "{}", summary_line(c, phi0, t));
                summary
                    .write_record([
                        fmt_f64(phi0),
                        fmt_f64(c.sigma),
                        fmt_f64(c.lambda),
                        c.kind.to_string(),
                        fmt_f64(c.jump),
                        fmt_f64(c.ln_jump),
                        fmt_f64(t),
                        fmt_f64(c.residual),
                        c.lax_ok.to_string(),
                        fmt_f64(c.dp_ds),
                    ])
                    .map_err(csv_err)?;
                let path = opts.file(&format!("cavity_phi0_{}.csv", phi0_tag(phi0)));
                run.trajectory.write_csv(create(&path)?)?;
                runs.push(run);
            }
            Err(e) => {
                failed += 1;
                let _ = writeln!(text, "phi0 = {phi0}  failed: {e}");
            }
        }
    }
    summary.flush().map_err(|e| AppError::Io {
        path: summary_path.display().to_string(),
        source: e,
    })?;
    if opts.svg && !runs.is_empty() {
        let s_max = runs.iter().map(|r| r.connection.sigma).fold(0.0, f64::max) * 1.15;
        let mut plot = Plot::new("Cavitating solutions: v(s)", "s", "v = a b^(d-1)");
        for run in &runs {
            plot = plot
                .series(format!("phi0 = {}", run.phi0), volume_profile(run, s_max))
                .guide(Guide::Vertical {
                    x: run.connection.sigma,
                    label: format!("sigma({}) = {:.6}", run.phi0, run.connection.sigma),
                });
        }
        write_text(&opts.file("fig1_cavity.svg"), &plot.render())?;
    }
    let code = if failed == 0 { 0 } else { 1 };
    Ok(Outcome::new(code, text))
}

pub fn bifurcation_plot(curve: &BifurcationCurve) -> Plot {
    let dynamic: Vec<(f64, f64)> = curve.connections().map(|(p, c)| (p, c.lambda)).collect();
    let statics: Vec<(f64, f64)> = curve.equilibrium_points().collect();
    Plot::new("Bifurcation curves", "phi0", "stretch")
        .series("dynamic Lambda(phi0)", dynamic)
        .series("equilibrium lambda(phi0)", statics)
        .guide(Guide::Horizontal {
            y: curve.inner.lambda0,
            label: format!("Lambda0 = {:.9}", curve.inner.lambda0),
        })
}

pub fn cmd_bifurcation(r: &Resolved, opts: &Options) -> Result<(Outcome, BifurcationCurve), AppError> {
    prepare(opts)?;
    let grid = r.config.grid()?;
    let curve = sweep(&r.energy, r.boundary.clone(), &grid, &r.config.solver)?;
    curve.write_dynamic_csv(create(&opts.file("bifurcation_dynamic.csv"))?)?;
    curve.write_equilibrium_csv(create(&opts.file("bifurcation_equilibrium.csv"))?)?;
    let mut text = String::new();
    let inner = &curve.inner;
    let _ = writeln!(
        text,
        "Lambda0 = {:.12}  bracket = [{:.12}, {:.12}]  sigma0 = {:.12}",
        inner.lambda0, inner.bracket.0, inner.bracket.1, curve.sigma0
    );
    for p in &curve.dynamic {
        match &p.connection {
            Some(c) => {
                let _ = writeln!(text, "{}", summary_line(c, p.phi0, p.trajectory.as_ref().map_or(f64::NAN, |t| t.t_stop)));
            }
            None => {
                let _ = writeln!(text, "phi0 = {}  {}", p.phi0, p.status);
            }
        }
    }
    for e in curve.equilibrium.iter().filter(|e| !e.status.is_ok()) {
        let _ = writeln!(text, "equilibrium phi0 = {}  {}", e.phi0, e.status);
    }
    let rate = curve.success_rate();
    let _ = writeln!(text, "success rate = {:.1}%", 100.0 * rate);
    match verify_limits(&curve) {
        Ok(report) => {
            let _ = write!(text, "\n{report}");
        }
        Err(e) => {
            let _ = writeln!(text, "limit checks skipped: {e}");
        }
    }
    write_text(&opts.file("bifurcation_report.txt"), &text)?;
    if opts.svg {
        write_text(&opts.file("fig2_bifurcation.svg"), &bifurcation_plot(&curve).render())?;
    }
    let code = if rate >= MIN_SUCCESS { 0 } else { 1 };
    Ok((Outcome::new(code, text), curve))
}

pub fn cmd_inner(r: &Resolved, v0: Option<f64>, opts: &Options) -> Result<Outcome, AppError> {
    prepare(opts)?;
    let v0 = match v0 {
        Some(v) => v,
        None => r.boundary.cavity_volume(&r.energy, 0.0)?,
    };
    let inner = solve_inner(&r.energy, v0, &r.config.solver)?;
    inner.write_csv(create(&opts.file("inner.csv"))?)?;
    let mut text = String::new();
    let _ = writeln!(text, "v0 = {v0}");
    let _ = writeln!(
        text,
        "Lambda0 = {:.12}  bracket = [{:.12}, {:.12}]  width = {:.3e}  xi_end = {:.6}",
        inner.lambda0,
        inner.bracket.0,
        inner.bracket.1,
        inner.width(),
        inner.xi_end
    );
    if !inner.converged {
        let _ = writeln!(
            text,
            "warning: slow convergence, bracket width {:.3e} above {:.3e} at xi_max",
            inner.width(),
            r.config.solver.bracket_tol
        );
    }
    for (name, rep) in [("first", inner.lambda0_repr1()), ("second", inner.lambda0_repr2())] {
        match rep {
            Ok(x) => {
                let inside = inner.contains(x.value, x.uncertainty);
                let _ = writeln!(
                    text,
                    "{name} representation: Lambda0 = {:.12}  tail = {:.3e}  uncertainty = {:.3e}  in bracket: {inside}",
                    x.value, x.quadrature.tail, x.uncertainty
                );
            }
            Err(e) => {
                let _ = writeln!(text, "{name} representation failed: {e}");
            }
        }
    }
    let b = inner.bounds()?;
    let _ = writeln!(text, "a0 < Lambda0 < b0 margin = {:.3e}", b.sandwich_margin);
    let _ = writeln!(
        text,
        "max(1, Lambda0 xi) < psi0 < 1 + Lambda0 xi margins = {:.3e}, {:.3e}",
        b.psi_lower_margin, b.psi_upper_margin
    );
    let _ = writeln!(
        text,
        "xi (b0 - a0) <= C margin = {:.3e} (C = {:.6e})",
        b.decay_margin, b.decay_constant
    );
    let _ = writeln!(text, "delta0 range = [{:.12}, {:.12}]", b.delta_range.0, b.delta_range.1);
    match b.root_bound {
        Some(x) => {
            let _ = writeln!(text, "Lambda0 > v0^(1/d) = {x:.12}: {}", inner.lambda0 > x);
        }
        None => text.push_str("v0^(1/d) bound: not applicable\n"),
    }
    match b.chi_bound {
        Some(x) => {
            let _ = writeln!(text, "Lambda0 > chi^-1(h'(v0)) = {x:.12}: {}", inner.lambda0 > x);
        }
        None => text.push_str("chi bound: not applicable\n"),
    }
    write_text(&opts.file("inner_report.txt"), &text)?;
    Ok(Outcome::new(0, text))
}

pub fn cmd_equilibrium(r: &Resolved, phi0s: Option<&[f64]>, opts: &Options) -> Result<Outcome, AppError> {
    prepare(opts)?;
    let grid = match phi0s {
        Some(p) if !p.is_empty() => p.to_vec(),
        _ => r.config.grid()?,
    };
    check_speeds(&grid)?;
    let results: Vec<(f64, Result<EquilibriumPoint, AppError>)> = grid
        .par_iter()
        .map(|&phi0| {
            let res = CavityConfig::new(r.energy.clone(), phi0, r.boundary.clone(), r.config.solver.clone())
                .and_then(|cfg| solve_equilibrium(&cfg))
                .map_err(AppError::from);
            (phi0, res)
        })
        .collect();
    let mut text = String::new();
    let mut points = Vec::new();
    for (phi0, res) in results {
        match res {
            Ok(p) => {
                let _ = writeln!(text, "phi0 = {phi0}  lambda = {:.12}", p.lambda);
                points.push(p);
            }
            Err(e) => {
                let _ = writeln!(text, "phi0 = {phi0}  failed: {e}");
            }
        }
    }
    write_equilibrium_csv(&points, create(&opts.file("equilibrium.csv"))?)?;
    if opts.svg && !points.is_empty() {
        let plot = Plot::new("Equilibrium boundary stretch", "phi0", "lambda")
            .series("lambda(phi0)", points.iter().map(|p| (p.phi0, p.lambda)).collect());
        write_text(&opts.file("equilibrium.svg"), &plot.render())?;
    }
    let code = if points.len() == grid.len() { 0 } else { 1 };
    Ok(Outcome::new(code, text))
}
