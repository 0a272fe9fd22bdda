//! Cavitating self-similar trajectories and their connection to a uniform state.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::boundary::CavityBoundary;
use crate::energy::{RadialState, StoredEnergy};
use crate::error::{Error, Result};
use crate::ode::refine_root;
use crate::radial::{integrate_radial, Mode, RadialArc, RadialPoint, SeriesStart, SolverSettings, Stop, StopReason};

const SOLVE_HYPOTHESES: [&str; 5] = ["H0", "H1", "H2", "H3", "H4"];

#[derive(Clone, Debug)]
pub struct CavityConfig {
    pub energy: StoredEnergy,
    pub phi0: f64,
    pub boundary: Arc<dyn CavityBoundary>,
    pub v0: f64,
    pub s0: f64,
    pub settings: SolverSettings,
}

impl CavityConfig {
    pub fn new(
        energy: StoredEnergy,
        phi0: f64,
        boundary: Arc<dyn CavityBoundary>,
        settings: SolverSettings,
    ) -> Result<Self> {
        if !(phi0 > 0.0 && phi0.is_finite()) {
            return Err(Error::Config(format!("phi0 = {phi0} must be > 0")));
        }
        settings.validate()?;
        let v0 = boundary.cavity_volume(&energy, phi0)?;
        let s0 = settings.s0_factor * phi0.min(1.0).min(energy.nu());
        Ok(Self {
            energy,
            phi0,
            boundary,
            v0,
            s0,
            settings,
        })
    }

    pub fn stress_free(energy: StoredEnergy, phi0: f64) -> Result<Self> {
        Self::new(energy, phi0, Arc::new(crate::boundary::StressFree), SolverSettings::default())
    }
}

pub(crate) fn require(energy: &StoredEnergy, ids: &[&str]) -> Result<()> {
    match energy.hypotheses().first_failure(ids) {
        None => Ok(()),
        Some(e) => Err(Error::HypothesisViolation(format!(
            "{} fails: {:?}",
            e.id, e.verdict
        ))),
    }
}

pub fn series_start(cfg: &CavityConfig) -> Result<SeriesStart> {
    SeriesStart::new(&cfg.energy, cfg.phi0, cfg.v0, cfg.s0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub s: f64,
    pub phi: f64,
    pub v: f64,
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub p: f64,
    pub t_rad: f64,
}

impl TrajectorySample {
    fn new(energy: &StoredEnergy, pt: RadialPoint) -> Result<Self> {
        let st = pt.state();
        Ok(Self {
            s: pt.s,
            phi: pt.s * pt.b,
            v: energy.volume(st)?,
            a: st.a,
            b: st.b,
            q: pt.q(energy)?,
            p: pt.p(energy)?,
            t_rad: energy.radial_cauchy_stress(st)?,
        })
    }
}

/// Samples at accepted steps from `s₀` to the stop abscissa `T`.
#[derive(Clone, Debug)]
pub struct CavityTrajectory {
    pub phi0: f64,
    pub v0: f64,
    pub samples: Vec<TrajectorySample>,
    /// Stop abscissa.
    pub t_stop: f64,
    pub stop: StopReason,
    pub start: SeriesStart,
    pub radial: RadialArc,
    settings: SolverSettings,
}

pub fn solve_cavity(cfg: &CavityConfig) -> Result<CavityTrajectory> {
    require(&cfg.energy, &SOLVE_HYPOTHESES)?;
    let start = series_start(cfg)?;
    let st = &cfg.settings;
    let stops = [Stop::Sonic { eps: st.eps_q }, Stop::Diagonal { decades: st.diagonal_decades }];
    let tau_end = start.s0.ln() + st.tau_span;
    let radial = integrate_radial(&cfg.energy, Mode::Dynamic, start, tau_end, &stops, st)?;
    if radial.stop == StopReason::End {
        return Err(Error::HypothesisViolation(format!(
            "no sonic stop within tau span {} (s = {})",
            st.tau_span,
            radial.s_end()
        )));
    }
    radial.check_monotone(st.monotone_tol)?;
    let samples = (0..radial.len())
        .map(|i| TrajectorySample::new(&cfg.energy, radial.point(i)))
        .collect::<Result<Vec<_>>>()?;
    for (i, x) in samples.iter().enumerate().take(samples.len() - 1) {
        // ln(−Q) stays finite where −Q itself underflows
        let pt = radial.point(i);
        if !pt.ln_u(&cfg.energy)?.is_finite() {
            return Err(Error::HypothesisViolation(format!("Q = {} >= 0 at s = {}", x.q, pt.s)));
        }
    }
    Ok(CavityTrajectory {
        phi0: cfg.phi0,
        v0: cfg.v0,
        t_stop: samples[samples.len() - 1].s,
        samples,
        stop: radial.stop,
        start,
        radial,
        settings: cfg.settings.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConnectionKind {
    Shock,
    Sonic,
}

impl fmt::Display for ConnectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConnectionKind::Shock => "shock",
            ConnectionKind::Sonic => "sonic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectionResult {
    pub sigma: f64,
    /// Position of σ in the integration variable; for weak shocks `s` has
    /// settled to the last digit while `τ` still separates σ from `T`.
    pub tau: f64,
    pub lambda: f64,
    pub a_minus: f64,
    /// `Λ − a₋`; underflows to zero for the weakest shocks.
    pub jump: f64,
    pub ln_jump: f64,
    pub kind: ConnectionKind,
    /// Strict `Φ₁₁(Λ,Λ) < σ² < Φ₁₁(a₋,Λ)`; false for sonic connections.
    pub lax_ok: bool,
    pub residual: f64,
    pub dp_ds: f64,
    pub sign_changes: usize,
}

impl CavityTrajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> &StoredEnergy {
        &self.radial.energy
    }

    pub fn state_at_s(&self, s: f64) -> Result<RadialState> {
        self.radial.state_at_s(s)
    }

    /// `p/(−Q)` at `τ` together with the decoded point.
    pub fn p_at_tau(&self, tau: f64) -> Result<(f64, RadialPoint)> {
        let pt = self.radial.exact(tau)?;
        Ok((pt.p_scaled(self.energy())?, pt))
    }

    pub fn find_connection(&self) -> Result<ConnectionResult> {
        let energy = self.energy();
        let scaled = (0..self.radial.len())
            .map(|i| self.radial.point(i).p_scaled(energy))
            .collect::<Result<Vec<_>>>()?;
        let changes: Vec<usize> = scaled
            .windows(2)
            .enumerate()
            .filter(|(_, w)| (w[0] > 0.0) != (w[1] > 0.0))
            .map(|(i, _)| i)
            .collect();
        match changes.len() {
            0 => {
                let last = self.samples[self.len() - 1];
                let end = self.radial.point(self.radial.len() - 1);
                let gap = end.gap;
                if self.stop == StopReason::DiagonalContact {
                    Ok(ConnectionResult {
                        sigma: last.s,
                        tau: self.radial.tau_end(),
                        lambda: last.b,
                        a_minus: last.a,
                        jump: gap,
                        ln_jump: end.ln_gap,
                        kind: ConnectionKind::Sonic,
                        lax_ok: false,
                        residual: last.p.abs(),
                        dp_ds: f64::NAN,
                        sign_changes: 0,
                    })
                } else {
                    Err(Error::NoConnection { gap })
                }
            }
            1 => {
                let i = changes[0];
                let (t0, t1) = (self.radial.tau(i), self.radial.tau(i + 1));
                let tol = self.settings.root_tolerance(t1);
                let tau = refine_root(|t| self.p_at_tau(t).map_or(f64::NAN, |r| r.0), t0, t1, tol)?;
                let (_, pt) = self.p_at_tau(tau)?;
                let st = pt.state();
                // s moves by less than its ulp near the sonic curve, so the
                // slope is taken in τ. With p = (−Q)p̂ and p̂ = 0 at the root,
                // dp/ds = (dp̂/dτ)·Φ₁₁/s since ds/dτ = s·(−Q)/Φ₁₁.
                let dt = 0.25 * (t1 - t0);
                let lo = (tau - dt).max(self.radial.tau(0));
                let hi = (tau + dt).min(self.radial.tau_end());
                let (p_lo, _) = self.p_at_tau(lo)?;
                let (p_hi, _) = self.p_at_tau(hi)?;
                let dp_ds = (p_hi - p_lo) / (hi - lo) * energy.phi11(st)? / pt.s;
                let lambda = st.b;
                // Φ₁₁(Λ,Λ) < σ² < Φ₁₁(a₋,Λ), written through −Q = Φ₁₁(a₋,Λ) − σ²
                // and divided by the jump
                let ln_u = pt.ln_u(energy)?;
                let rate = energy.phi11_excess_rate(lambda, pt.gap)?;
                let lax_ok = ln_u.is_finite() && rate > 0.0 && rate.ln() > ln_u - pt.ln_gap;
                Ok(ConnectionResult {
                    sigma: pt.s,
                    tau,
                    lambda,
                    a_minus: st.a,
                    jump: pt.gap,
                    ln_jump: pt.ln_gap,
                    kind: ConnectionKind::Shock,
                    lax_ok,
                    residual: pt.p(energy)?.abs(),
                    dp_ds,
                    sign_changes: 1,
                })
            }
            count => Err(Error::MultipleRoots { count }),
        }
    }

    /// Radial Cauchy stress at `s ∈ [0, T]`.
    pub fn cauchy_stress(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(self.energy().h().first(self.v0));
        }
        if !(s > 0.0 && s <= self.t_stop) {
            return Err(Error::OutOfRange {
                value: s,
                lo: 0.0,
                hi: self.t_stop,
            });
        }
        self.energy().radial_cauchy_stress(self.state_at_s(s)?)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "phi", "v", "a", "b", "Q", "p", "T_rad"])?;
        for x in &self.samples {
            let row = [x.s, x.phi, x.v, x.a, x.b, x.q, x.p, x.t_rad];
            w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
