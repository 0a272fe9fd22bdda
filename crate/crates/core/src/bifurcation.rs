//! Sweeps in the cavity speed φ₀ and checks of the φ₀ → 0 limits.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::CavityBoundary;
use crate::cavity::{fmt_f64, require, solve_cavity, CavityConfig, CavityTrajectory, ConnectionKind, ConnectionResult};
use crate::energy::{RadialState, StoredEnergy};
use crate::error::{Error, Result};
use crate::inner::{solve_equilibrium, solve_inner, InnerSolution};
use crate::ode::{refine_root, RootTolerance};
use crate::radial::SolverSettings;

const SWEEP_HYPOTHESES: [&str; 6] = ["H0", "H1", "H2", "H3", "H4", "H5"];

/// Largest φ₀ treated as part of the small-speed tail.
pub const TAIL_PHI0: f64 = 0.2;
pub const MIN_TAIL_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

/// `count` points from `min` to `max`, both included.
pub fn phi0_grid(min: f64, max: f64, count: usize, spacing: Spacing) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && max.is_finite()) || count == 0 {
        return Err(Error::Config(format!(
            "sweep needs 0 < phi0_min <= phi0_max and count >= 1 (got {min}, {max}, {count})"
        )));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let n = (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            let t = i as f64 / n;
            match spacing {
                Spacing::Linear => min + (max - min) * t,
                Spacing::Log => min * (max / min).powf(t),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub enum PointStatus {
    Ok,
    Failed(String),
}

impl PointStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, PointStatus::Ok)
    }
}

impl fmt::Display for PointStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointStatus::Ok => f.write_str("ok"),
            PointStatus::Failed(msg) => write!(f, "failed: {msg}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DynamicPoint {
    pub phi0: f64,
    pub status: PointStatus,
    pub connection: Option<ConnectionResult>,
    pub trajectory: Option<CavityTrajectory>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumSample {
    pub phi0: f64,
    pub lambda: Option<f64>,
    pub status: PointStatus,
}

#[derive(Clone, Debug)]
pub struct BifurcationCurve {
    pub boundary: String,
    /// Ascending in φ₀.
    pub dynamic: Vec<DynamicPoint>,
    pub equilibrium: Vec<EquilibriumSample>,
    /// `V(0)`.
    pub v0_limit: f64,
    pub inner: InnerSolution,
    /// `√Φ₁₁(Λ₀, Λ₀)`.
    pub sigma0: f64,
}

fn status<T>(r: &Result<T>) -> PointStatus {
    match r {
        Ok(_) => PointStatus::Ok,
        Err(e) => PointStatus::Failed(e.to_string()),
    }
}

fn dynamic_point(
    energy: &StoredEnergy,
    boundary: &Arc<dyn CavityBoundary>,
    phi0: f64,
    settings: &SolverSettings,
) -> DynamicPoint {
    let run = || -> Result<(ConnectionResult, CavityTrajectory)> {
        let cfg = CavityConfig::new(energy.clone(), phi0, boundary.clone(), settings.clone())?;
        let tr = solve_cavity(&cfg)?;
        Ok((tr.find_connection()?, tr))
    };
    let r = run();
    let status = status(&r);
    let (connection, trajectory) = match r {
        Ok((c, t)) => (Some(c), Some(t)),
        Err(_) => (None, None),
    };
    DynamicPoint {
        phi0,
        status,
        connection,
        trajectory,
    }
}

pub fn equilibrium_sample(
    energy: &StoredEnergy,
    boundary: &Arc<dyn CavityBoundary>,
    phi0: f64,
    settings: &SolverSettings,
) -> EquilibriumSample {
    let r = CavityConfig::new(energy.clone(), phi0, boundary.clone(), settings.clone())
        .and_then(|cfg| solve_equilibrium(&cfg));
    EquilibriumSample {
        phi0,
        status: status(&r),
        lambda: r.ok().map(|p| p.lambda),
    }
}

/// Dynamic and equilibrium curves over `grid`, plus the φ₀ → 0 references.
/// Failed points are recorded, not propagated.
pub fn sweep(
    energy: &StoredEnergy,
    boundary: Arc<dyn CavityBoundary>,
    grid: &[f64],
    settings: &SolverSettings,
) -> Result<BifurcationCurve> {
    require(energy, &SWEEP_HYPOTHESES)?;
    settings.validate()?;
    let mut grid = grid.to_vec();
    if grid.is_empty() || grid.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::Config("sweep grid must be nonempty with phi0 > 0".into()));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let v0_limit = boundary.cavity_volume(energy, 0.0)?;
    let inner = solve_inner(energy, v0_limit, settings)?;
    let sigma0 = energy.phi11(RadialState::diagonal(inner.lambda0))?.sqrt();
    let (dynamic, equilibrium) = grid
        .par_iter()
        .map(|&phi0| {
            (
                dynamic_point(energy, &boundary, phi0, settings),
                equilibrium_sample(energy, &boundary, phi0, settings),
            )
        })
        .unzip();
    Ok(BifurcationCurve {
        boundary: boundary.name().to_string(),
        dynamic,
        equilibrium,
        v0_limit,
        inner,
        sigma0,
    })
}

impl BifurcationCurve {
    pub fn success_rate(&self) -> f64 {
        let ok = self.dynamic.iter().filter(|p| p.status.is_ok()).count();
        ok as f64 / self.dynamic.len() as f64
    }

    /// `(φ₀, connection)` for the points that succeeded.
    pub fn connections(&self) -> impl Iterator<Item = (f64, &ConnectionResult)> + '_ {
        self.dynamic
            .iter()
            .filter_map(|p| p.connection.as_ref().map(|c| (p.phi0, c)))
    }

    pub fn equilibrium_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.equilibrium
            .iter()
            .filter_map(|p| p.lambda.map(|l| (p.phi0, l)))
    }

    pub fn write_dynamic_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["phi0", "Lambda", "sigma", "jump", "kind", "status", "ln_jump"])?;
        for p in &self.dynamic {
            let (l, s, j, lj, k) = match &p.connection {
                Some(c) => (c.lambda, c.sigma, c.jump, c.ln_jump, c.kind.to_string()),
                None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, String::new()),
            };
            w.write_record([
                fmt_f64(p.phi0),
                fmt_f64(l),
                fmt_f64(s),
                fmt_f64(j),
                k,
                p.status.to_string(),
                fmt_f64(lj),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_equilibrium_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["phi0", "lambda"])?;
        for (phi0, l) in self.equilibrium_points() {
            w.write_record([fmt_f64(phi0), fmt_f64(l)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Limit of a sequence sampled at three abscissae, assuming `x(φ) ≈ L + cφ^p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extrapolation {
    pub value: f64,
    /// Fitted `p`; `NaN` when the data do not fit the model.
    pub order: f64,
}

/// Richardson extrapolation to `φ = 0` with the order fitted from the data.
/// Falls back to a linear extrapolation from the two smallest `φ` when no
/// positive order fits.
pub fn richardson(phi: [f64; 3], x: [f64; 3]) -> Extrapolation {
    let mut idx = [0, 1, 2];
    idx.sort_by(|&i, &j| phi[j].total_cmp(&phi[i]));
    let [p1, p2, p3] = idx.map(|i| phi[i]);
    let [x1, x2, x3] = idx.map(|i| x[i]);
    let linear = Extrapolation {
        value: x3 - (x2 - x3) * p3 / (p2 - p3),
        order: f64::NAN,
    };
    let (d12, d23) = (x1 - x2, x2 - x3);
    if d23 == 0.0 {
        return Extrapolation { value: x3, order: f64::NAN };
    }
    let ratio = d12 / d23;
    let f = |p: f64| (p1.powf(p) - p2.powf(p)) / (p2.powf(p) - p3.powf(p)) - ratio;
    let tol = RootTolerance {
        x_tol: 1e-12,
        f_tol: 0.0,
        max_iter: 200,
    };
    match refine_root(f, 0.05, 8.0, tol) {
        Ok(p) => {
            let c = d23 / (p2.powf(p) - p3.powf(p));
            Extrapolation {
                value: x3 - c * p3.powf(p),
                order: p,
            }
        }
        Err(_) => linear,
    }
}

/// Named check with a margin that is positive when it holds.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict}  {:<28} margin = {:.6e}  {}", self.name, self.margin, self.detail)
    }
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<_> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn strictly_decreasing(xs: &[f64]) -> (bool, f64) {
    let m = xs
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    (m > 0.0, m)
}

#[derive(Clone, Debug)]
pub struct LimitsReport {
    pub lambda0: f64,
    pub bracket: (f64, f64),
    pub sigma0: f64,
    /// Tail points ordered toward φ₀ = 0.
    pub phi0: Vec<f64>,
    pub lambda_extrapolated: Extrapolation,
    pub equilibrium_extrapolated: Option<Extrapolation>,
    pub checks: Vec<Check>,
}

impl LimitsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for LimitsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Lambda0 = {:.12} bracket [{:.12}, {:.12}]", self.lambda0, self.bracket.0, self.bracket.1)?;
        writeln!(f, "sigma0 = {:.12}", self.sigma0)?;
        let phis: Vec<_> = self.phi0.iter().map(|p| format!("{p}")).collect();
        writeln!(f, "tail phi0 = [{}]", phis.join(", "))?;
        writeln!(
            f,
            "extrapolated Lambda(0+) = {:.12} (order {:.3})",
            self.lambda_extrapolated.value, self.lambda_extrapolated.order
        )?;
        if let Some(e) = self.equilibrium_extrapolated {
            writeln!(f, "extrapolated lambda(0+) = {:.12} (order {:.3})", e.value, e.order)?;
        }
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Tolerance for the extrapolated intercepts against the Λ₀ bracket.
pub const INTERCEPT_TOL: f64 = 1e-3;

/// Checks the φ₀ → 0 behaviour on the points with `φ₀ ≤ TAIL_PHI0`.
pub fn verify_limits(curve: &BifurcationCurve) -> Result<LimitsReport> {
    let mut tail: Vec<(f64, &ConnectionResult, &CavityTrajectory)> = curve
        .dynamic
        .iter()
        .filter(|p| p.phi0 <= TAIL_PHI0)
        .filter_map(|p| Some((p.phi0, p.connection.as_ref()?, p.trajectory.as_ref()?)))
        .collect();
    if tail.len() < MIN_TAIL_POINTS {
        return Err(Error::Config(format!(
            "limit checks need {MIN_TAIL_POINTS} solved points with phi0 <= {TAIL_PHI0}, found {}",
            tail.len()
        )));
    }
    tail.sort_by(|a, b| b.0.total_cmp(&a.0));
    let inner = &curve.inner;
    let l0 = inner.lambda0;
    let s0 = curve.sigma0;
    let mut checks = Vec::new();

    let dl: Vec<f64> = tail.iter().map(|t| (t.1.lambda - l0).abs()).collect();
    let (ok, m) = strictly_decreasing(&dl);
    checks.push(Check {
        name: "stretch_limit",
        pass: ok,
        margin: m,
        detail: format!("|Lambda - Lambda0| = {}", sci(&dl)),
    });

    let n = tail.len();
    let lx = richardson(
        [tail[n - 3].0, tail[n - 2].0, tail[n - 1].0],
        [tail[n - 3].1.lambda, tail[n - 2].1.lambda, tail[n - 1].1.lambda],
    );
    let slack = inner.half_width() + INTERCEPT_TOL;
    let m = slack - (lx.value - l0).abs();
    checks.push(Check {
        name: "stretch_extrapolation",
        pass: m >= 0.0,
        margin: m,
        detail: format!("Lambda(0+) = {:.9}", lx.value),
    });

    let ds: Vec<f64> = tail.iter().map(|t| (t.1.sigma - s0).abs()).collect();
    let (ok, m) = strictly_decreasing(&ds);
    checks.push(Check {
        name: "shock_speed_limit",
        pass: ok,
        margin: m,
        detail: format!("|sigma - sigma0| = {}", sci(&ds)),
    });

    // the weakest jumps are far below the float range, so they are compared by logarithm
    let ln_jumps: Vec<f64> = tail.iter().map(|t| t.1.ln_jump).collect();
    let (ok, m) = strictly_decreasing(&ln_jumps);
    checks.push(Check {
        name: "shock_strength_limit",
        pass: ok && ln_jumps.iter().all(|j| j.is_finite()),
        margin: m,
        detail: format!("ln jump = {}", sci(&ln_jumps)),
    });

    let nu = curve.inner.energy().nu();
    let sig_min = curve.connections().map(|(_, c)| c.sigma).fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: "shock_speed_floor",
        pass: sig_min >= nu,
        margin: sig_min - nu,
        detail: format!("min sigma = {sig_min:.9}, nu = {nu:.9}"),
    });

    let (phi0, conn, tr) = tail[n - 1];
    let env = envelope_margins(phi0, conn, tr);
    checks.push(Check {
        name: "stretch_envelope",
        pass: env.stretch > 0.0,
        margin: env.stretch,
        detail: format!(
            "0 < phi/s - Lambda < phi0/s at phi0 = {phi0}, {} samples, {} within rounding of Lambda",
            env.samples, env.unresolved
        ),
    });
    checks.push(Check {
        name: "gap_envelope",
        pass: env.gap > 0.0,
        margin: env.gap,
        detail: format!("0 < phi/s - phi' < phi0/s at phi0 = {phi0}, {} samples", env.samples),
    });

    let target = l0.powi(inner.energy().dim() as i32);
    let probes = [0.25 * s0, 0.5 * s0, 0.75 * s0];
    let mut margin = f64::INFINITY;
    let mut errs = Vec::new();
    for s in probes {
        let e: Vec<f64> = tail
            .iter()
            .filter(|t| s < t.1.sigma)
            .map(|t| {
                let st = t.2.state_at_s(s)?;
                Ok((t.2.energy().volume(st)? - target).abs())
            })
            .collect::<Result<_>>()?;
        margin = margin.min(strictly_decreasing(&e).1);
        errs.push(e[e.len() - 1]);
    }
    checks.push(Check {
        name: "volume_limit",
        pass: margin > 0.0,
        margin,
        detail: format!("|v - Lambda0^d| at s/sigma0 = 0.25, 0.5, 0.75 (smallest phi0): {}", sci(&errs)),
    });

    let eq: Vec<(f64, f64)> = curve.equilibrium_points().filter(|p| p.0 <= TAIL_PHI0).collect();
    let equilibrium_extrapolated = richardson_low(&eq);
    if let Some(e) = equilibrium_extrapolated {
        let m = slack - (e.value - l0).abs();
        checks.push(Check {
            name: "equilibrium_intercept",
            pass: m >= 0.0,
            margin: m,
            detail: format!("lambda(0+) = {:.9}", e.value),
        });
    }

    Ok(LimitsReport {
        lambda0: l0,
        bracket: inner.bracket,
        sigma0: s0,
        phi0: tail.iter().map(|t| t.0).collect(),
        lambda_extrapolated: lx,
        equilibrium_extrapolated,
        checks,
    })
}

/// Richardson on the three smallest φ₀ of an ascending list.
pub fn richardson_low(points: &[(f64, f64)]) -> Option<Extrapolation> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    if p.len() < 3 {
        return None;
    }
    Some(richardson([p[0].0, p[1].0, p[2].0], [p[0].1, p[1].1, p[2].1]))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeMargins {
    pub stretch: f64,
    pub gap: f64,
    pub samples: usize,
    /// Samples skipped because `b` equals `Λ` to within a few ulps.
    pub unresolved: usize,
}

/// Smallest margins of `0 < φ/s − Λ < φ₀/s` and `0 < φ/s − φ̇ < φ₀/s`,
/// relative to `φ₀/s`, over samples with `s < σ`. Samples at which `b − Λ`
/// is below the resolution of `Λ` are counted but not tested; the gap is
/// compared through its logarithm.
pub fn envelope_margins(phi0: f64, c: &ConnectionResult, tr: &CavityTrajectory) -> EnvelopeMargins {
    let resolution = 8.0 * f64::EPSILON * c.lambda;
    let mut out = EnvelopeMargins {
        stretch: f64::INFINITY,
        gap: f64::INFINITY,
        samples: 0,
        unresolved: 0,
    };
    for (i, x) in tr.samples.iter().enumerate().filter(|(_, x)| x.s < c.sigma) {
        let e1 = x.b - c.lambda;
        if e1.abs() <= resolution {
            out.unresolved += 1;
            continue;
        }
        out.samples += 1;
        let bound = phi0 / x.s;
        out.stretch = out.stretch.min(e1.min(bound - e1) / bound);
        let ln_gap = tr.radial.point(i).ln_gap;
        let rel = (ln_gap - bound.ln()).exp();
        let gap_margin = if ln_gap.is_finite() { rel.min(1.0 - rel) } else { -1.0 };
        out.gap = out.gap.min(gap_margin);
    }
    out
}

/// Largest φ₀ for which `[0, τ]` fits the rescaled existence interval,
/// using the a priori bound `T > ν` on the sonic stop.
pub fn rescaling_limit(energy: &StoredEnergy, tau: f64) -> f64 {
    energy.nu() / tau
}

#[derive(Clone, Debug)]
pub struct RescalingReport {
    pub tau: f64,
    pub phi0: Vec<f64>,
    /// `sup over (0, τ] of √((ψ − ψ₀)² + (δ − δ₀)²)`.
    pub distance: Vec<f64>,
    /// `V(φ₀) − V(0)`.
    pub volume_shift: Vec<f64>,
    pub order: f64,
}

impl fmt::Display for RescalingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tau = {}", self.tau)?;
        for ((p, d), v) in self.phi0.iter().zip(&self.distance).zip(&self.volume_shift) {
            writeln!(f, "phi0 = {p:<10} sup distance = {d:.6e}  V(phi0) - V(0) = {v:.3e}")?;
        }
        writeln!(f, "fitted order = {:.4}", self.order)
    }
}

/// Shared abscissae on `(0, τ]`: uniform plus a log-spaced layer near 0.
fn rescaling_nodes(tau: f64) -> Vec<f64> {
    let mut xs: Vec<f64> = (1..=2000).map(|i| tau * i as f64 / 2000.0).collect();
    xs.extend((0..200).map(|i| tau * 1e-6 * (1e6f64).powf(i as f64 / 200.0)));
    xs.sort_by(f64::total_cmp);
    xs
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Distance between the rescaled cavity profiles and the inner profile.
pub fn verify_rescaling(
    energy: &StoredEnergy,
    boundary: Arc<dyn CavityBoundary>,
    tau: f64,
    grid: &[f64],
    settings: &SolverSettings,
) -> Result<RescalingReport> {
    let limit = rescaling_limit(energy, tau);
    if let Some(&phi0) = grid.iter().find(|&&p| !(p > 0.0 && p < limit)) {
        return Err(Error::GridViolation { phi0, tau, limit });
    }
    let v_zero = boundary.cavity_volume(energy, 0.0)?;
    let inner = solve_inner(energy, v_zero, settings)?;
    let nodes = rescaling_nodes(tau);
    let reference: Vec<(f64, f64)> = nodes.iter().map(|&xi| inner.profile(xi)).collect::<Result<_>>()?;
    let rows = grid
        .par_iter()
        .map(|&phi0| {
            let cfg = CavityConfig::new(energy.clone(), phi0, boundary.clone(), settings.clone())?;
            let tr = solve_cavity(&cfg)?;
            if phi0 * tau > tr.t_stop {
                return Err(Error::GridViolation {
                    phi0,
                    tau,
                    limit: tr.t_stop / tau,
                });
            }
            let mut sup = 0.0f64;
            for (&xi, &(psi0, delta0)) in nodes.iter().zip(&reference) {
                let st = tr.state_at_s(phi0 * xi)?;
                let psi = xi * st.b;
                let delta = energy.volume(st)?;
                sup = sup.max((psi - psi0).hypot(delta - delta0));
            }
            Ok((sup, cfg.v0 - v_zero))
        })
        .collect::<Result<Vec<_>>>()?;
    let distance: Vec<f64> = rows.iter().map(|r| r.0).collect();
    Ok(RescalingReport {
        tau,
        phi0: grid.to_vec(),
        order: loglog_slope(grid, &distance),
        volume_shift: rows.iter().map(|r| r.1).collect(),
        distance,
    })
}

/// Kind counts for a summary line.
pub fn kind_counts(curve: &BifurcationCurve) -> (usize, usize) {
    let shock = curve.connections().filter(|(_, c)| c.kind == ConnectionKind::Shock).count();
    let sonic = curve.connections().filter(|(_, c)| c.kind == ConnectionKind::Sonic).count();
    (shock, sonic)
}
