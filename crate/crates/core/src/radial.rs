//! Shared integration of the radial `(a, b)` system, desingularized through
//! the independent variable `τ`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::{RadialState, StoredEnergy};
use crate::error::{Error, Result};
use crate::ode::{integrate, substep, Controls, Direction, EmbeddedPair, Event, IvpProblem, PairRegistry, RootTolerance, SampledArc, Termination, refine_root};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub integrator: String,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    /// `s₀ = s0_factor · min(1, φ₀, ν)`.
    pub s0_factor: f64,
    pub eps_q: f64,
    /// Diagonal contact is declared once `(b − a)/b ≤ 10^−diagonal_decades`.
    /// Three-dimensional shocks can sit far below the float range, so the
    /// threshold is counted in decades.
    pub diagonal_decades: f64,
    /// Length of the `τ` window granted to the dynamic system.
    pub tau_span: f64,
    pub bracket_tol: f64,
    pub xi_max: f64,
    pub root_x_tol: f64,
    pub root_f_tol: f64,
    pub monotone_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            integrator: "dopri5".into(),
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.05,
            min_step: 1e-14,
            max_steps: 1_000_000,
            s0_factor: 1e-3,
            eps_q: 1e-8,
            diagonal_decades: 1e8,
            tau_span: 1e9,
            bracket_tol: 1e-5,
            xi_max: 1e4,
            root_x_tol: 1e-14,
            root_f_tol: 1e-12,
            monotone_tol: 1e-9,
        }
    }
}

impl SolverSettings {
    pub fn controls(&self) -> Controls {
        Controls {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            min_step: self.min_step,
            max_steps: self.max_steps,
            initial_step: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.controls().validate()?;
        let positive = [
            ("s0_factor", self.s0_factor),
            ("eps_q", self.eps_q),
            ("diagonal_decades", self.diagonal_decades),
            ("tau_span", self.tau_span),
            ("bracket_tol", self.bracket_tol),
            ("xi_max", self.xi_max),
            ("root_x_tol", self.root_x_tol),
            ("monotone_tol", self.monotone_tol),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("solver.{k} = {v} must be a positive number")));
            }
        }
        if !(self.root_f_tol >= 0.0) {
            return Err(Error::Config("solver.root_f_tol must be >= 0".into()));
        }
        if self.s0_factor > 1e-3 {
            return Err(Error::Config(format!(
                "solver.s0_factor = {} exceeds 1e-3",
                self.s0_factor
            )));
        }
        Ok(())
    }

    pub fn pair(&self) -> Result<Arc<dyn EmbeddedPair>> {
        PairRegistry::builtin().get(&self.integrator)
    }

    pub fn root_tolerance(&self, t: f64) -> RootTolerance {
        RootTolerance {
            x_tol: self.root_x_tol * t.abs().max(1.0),
            f_tol: self.root_f_tol,
            max_iter: 300,
        }
    }
}

/// Leading-order behaviour at the cavity: `v ≈ v₀ + c₀ s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesStart {
    pub dim: usize,
    pub phi0: f64,
    pub v0: f64,
    pub c0: f64,
    pub s0: f64,
}

impl SeriesStart {
    pub fn new(energy: &StoredEnergy, phi0: f64, v0: f64, s0: f64) -> Result<Self> {
        if !(phi0 > 0.0 && v0 > 0.0 && s0 > 0.0) {
            return Err(Error::Domain(format!("series start needs phi0, v0, s0 > 0 (got {phi0}, {v0}, {s0})")));
        }
        let gamma0 = energy
            .gamma0()
            .ok_or_else(|| Error::HypothesisViolation("H3: growth limit gamma is undetermined".into()))?;
        let h2 = energy.h().second(v0);
        if !(h2 > 0.0) {
            return Err(Error::Domain(format!("h''(v0) = {h2} must be > 0")));
        }
        let d = energy.dim();
        let c0 = (d as f64 - 1.0) * gamma0 / (phi0 * h2);
        Ok(Self { dim: d, phi0, v0, c0, s0 })
    }

    /// `φ(s)^d` from the truncated series.
    pub fn phi_pow(&self, s: f64) -> f64 {
        let d = self.dim as i32;
        let df = self.dim as f64;
        self.phi0.powi(d) + self.v0 * s.powi(d) + df / (df + 1.0) * self.c0 * s.powi(d + 1)
    }

    /// `(â(s), b̂(s))`.
    pub fn state(&self, s: f64) -> RadialState {
        let d = self.dim as i32;
        let phi = self.phi_pow(s).powf(1.0 / self.dim as f64);
        let b = phi / s;
        let a = (self.v0 * s.powi(d - 1) + self.c0 * s.powi(d)) * phi.powi(1 - d);
        RadialState::new(a, b)
    }

    pub fn phi(&self, s: f64) -> f64 {
        self.phi_pow(s).powf(1.0 / self.dim as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// `s² − Φ₁₁` in the denominator.
    Dynamic,
    /// `−Φ₁₁` in the denominator (elastostatics and the inner limit).
    Static,
}

/// Share of `Φ₁₁` below which `−Q` is carried as a state variable.
const NEAR_SONIC: f64 = 0.5;

/// Formulation used on one piece of an arc. Far from the sonic curve `−Q`
/// is formed from `s` directly; close to it `ln(−Q)` joins the state and
/// `s²` is recovered as `Φ₁₁ + Q`, which is then well conditioned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Form {
    Static,
    Approach,
    Near,
}

impl Form {
    fn len(self) -> usize {
        match self {
            Form::Near => 4,
            _ => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stop {
    /// `−Q ≤ eps · Φ₁₁(b, b) · min(1, (b − a)/b)`.
    Sonic { eps: f64 },
    /// `b − a ≤ 10^−decades · b`.
    Diagonal { decades: f64 },
    /// `b − a ≤ tol`.
    Width { tol: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Sonic,
    DiagonalContact,
    BracketWidth,
    End,
    StepBudget,
}

impl StopReason {
    pub fn label(self) -> &'static str {
        match self {
            StopReason::Sonic => "sonic",
            StopReason::DiagonalContact => "diagonal_contact",
            StopReason::BracketWidth => "bracket_width",
            StopReason::End => "end",
            StopReason::StepBudget => "step_budget",
        }
    }
}

/// `expm1(r)/r`, continuous at `r = 0`.
fn expm1_ratio(r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        r.exp_m1() / r
    }
}

/// Decoded point of the radial system. The state vector is
/// `(ln s, ln a, ln r)` with `r = ln(b/a)`, plus `ln(−Q)` close to the sonic
/// curve, so that `a`, `b`, the gap `b − a` and the distance to the sonic
/// curve all keep full relative precision, whichever of them is small. Near
/// the corner `a = b`, `s² = Φ₁₁` the gap and `−Q` fall below the smallest
/// normal float together; their logarithms remain exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialPoint {
    pub s: f64,
    pub a: f64,
    pub b: f64,
    /// `b − a`; may underflow to zero, see `ln_gap`.
    pub gap: f64,
    pub ln_gap: f64,
    /// `ln(−Q)`, carried close to the sonic curve only.
    pub ln_u: Option<f64>,
}

impl RadialPoint {
    fn decode(y: &[f64]) -> Self {
        let a = y[1].exp();
        let r = y[2].exp();
        Self {
            s: y[0].exp(),
            a,
            b: a * r.exp(),
            gap: a * r.exp_m1(),
            ln_gap: ln_gap(y),
            ln_u: y.get(3).copied(),
        }
    }

    pub fn state(&self) -> RadialState {
        RadialState::new(self.a, self.b)
    }

    /// `−Q = Φ₁₁ − s²`.
    pub fn u(&self, energy: &StoredEnergy) -> Result<f64> {
        match self.ln_u {
            Some(l) => Ok(l.exp()),
            None => Ok(-energy.eval_q(self.state(), self.s)?),
        }
    }

    pub fn ln_u(&self, energy: &StoredEnergy) -> Result<f64> {
        match self.ln_u {
            Some(l) => Ok(l),
            None => Ok(self.u(energy)?.ln()),
        }
    }

    pub fn q(&self, energy: &StoredEnergy) -> Result<f64> {
        Ok(-self.u(energy)?)
    }

    /// Rankine–Hugoniot function `p = R(a, b, s)`.
    pub fn p(&self, energy: &StoredEnergy) -> Result<f64> {
        match self.ln_u {
            Some(l) => Ok(l.exp() * self.p_scaled(energy)?),
            None => energy.eval_r(self.state(), self.s),
        }
    }

    /// `p/(−Q)`: same sign as `p` before the sonic curve, and of order one
    /// where `p` and `Q` underflow.
    pub fn p_scaled(&self, energy: &StoredEnergy) -> Result<f64> {
        match self.ln_u {
            Some(l) => {
                let rate = energy.shock_excess_rate(self.b, self.gap)?;
                Ok(1.0 + rate * (self.ln_gap - l).exp())
            }
            None => Ok(energy.eval_r(self.state(), self.s)? / self.u(energy)?),
        }
    }
}

/// `ln(gap/b)` from the state, exact for small `r`.
fn ln_relative_gap(y: &[f64]) -> f64 {
    y[2] + expm1_ratio(-y[2].exp()).ln()
}

/// `ln(gap)` from the state.
fn ln_gap(y: &[f64]) -> f64 {
    y[1] + y[2] + expm1_ratio(y[2].exp()).ln()
}

fn encode(energy: &StoredEnergy, form: Form, s: f64, st: RadialState) -> Result<Vec<f64>> {
    let r = ((st.b - st.a) / st.a).ln_1p();
    let mut y = vec![s.ln(), st.a.ln(), r.ln()];
    if form == Form::Near {
        y.push((-energy.eval_q(st, s)?).ln());
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(format!(
            "start state (s, a, b) = ({s}, {}, {}) is not below the diagonal and the sonic curve",
            st.a, st.b
        )));
    }
    Ok(y)
}

fn radial_rhs(energy: &StoredEnergy, form: Form, y: &[f64], dy: &mut [f64]) {
    let pt = RadialPoint::decode(y);
    let st = pt.state();
    let dm1 = energy.dim() as f64 - 1.0;
    let (phi11, p) = match (energy.phi11(st), energy.eval_p(st)) {
        (Ok(x), Ok(p)) => (x, p),
        _ => {
            dy.fill(f64::NAN);
            return;
        }
    };
    let u = pt.ln_u.map(f64::exp);
    let w = match (form, u) {
        (Form::Near, Some(u)) => u / phi11,
        (Form::Approach, _) => 1.0 - pt.s * pt.s / phi11,
        _ => 1.0,
    };
    let r = y[2].exp();
    let em = expm1_ratio(r);
    let en = expm1_ratio(-r);
    // d ln a/dτ = (d − 1)(gap/a) P/Φ₁₁, d ln b/dτ = −w gap/b
    dy[0] = w;
    dy[1] = dm1 * r * em * p / phi11;
    dy[2] = -(w * en + dm1 * em * p / phi11);
    if form == Form::Near {
        let Ok(dd) = energy.eval_derivatives(st) else {
            dy.fill(f64::NAN);
            return;
        };
        let ratio = (ln_gap(y) - y[3]).exp();
        // d/db of Φ₁₁ moves all d − 1 transverse stretches, hence (d − 1)Φ₁₁₂.
        // s² is taken as Φ₁₁ − u: with ln s fed back, u = Φ₁₁ − s² would be
        // an unstable manifold of the extended system.
        let s2 = phi11 - u.unwrap_or(0.0);
        dy[3] = dm1 * (dd.phi111 * ratio * p - dd.phi112 * pt.gap) / phi11 - 2.0 * s2 / phi11;
    }
}

#[derive(Clone, Debug)]
struct Piece {
    form: Form,
    arc: SampledArc,
}

/// One integrated arc with the machinery to evaluate it between steps.
/// Dynamic arcs consist of an approach piece and, once `−Q` falls below
/// half of `Φ₁₁`, a near-sonic piece; the shared sample is stored once.
#[derive(Clone)]
pub struct RadialArc {
    pub energy: StoredEnergy,
    pub mode: Mode,
    pub start: SeriesStart,
    pub stop: StopReason,
    pieces: Vec<Piece>,
    pair: Arc<dyn EmbeddedPair>,
}

impl std::fmt::Debug for RadialArc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialArc")
            .field("mode", &self.mode)
            .field("start", &self.start)
            .field("samples", &self.len())
            .field("stop", &self.stop)
            .finish()
    }
}

fn stop_events<'a>(energy: &'a StoredEnergy, stops: &[Stop]) -> Vec<Event<'a>> {
    stops
        .iter()
        .map(|stop| match *stop {
            Stop::Sonic { eps } => Event::terminal(Direction::Falling, move |_, y: &[f64]| {
                let pt = RadialPoint::decode(y);
                let diag = energy.phi11(RadialState::diagonal(pt.b)).unwrap_or(f64::NAN);
                let scale = ln_relative_gap(y).min(0.0);
                pt.ln_u(energy).map_or(f64::NAN, |l| l - (eps * diag).ln() - scale)
            }),
            Stop::Diagonal { decades } => {
                let le = -decades * std::f64::consts::LN_10;
                Event::terminal(Direction::Falling, move |_, y: &[f64]| ln_relative_gap(y) - le)
            }
            Stop::Width { tol } => {
                let lt = tol.ln();
                Event::terminal(Direction::Falling, move |_, y: &[f64]| ln_gap(y) - lt)
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_piece<'a>(
    energy: &'a StoredEnergy,
    form: Form,
    y0: Vec<f64>,
    t0: f64,
    tau_end: f64,
    mut events: Vec<Event<'a>>,
    settings: &SolverSettings,
    pair: &dyn EmbeddedPair,
) -> Result<SampledArc> {
    debug_assert_eq!(y0.len(), form.len());
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| radial_rhs(energy, form, y, dy);
    if form == Form::Approach {
        events.push(Event::terminal(Direction::Falling, move |_, y: &[f64]| {
            let pt = RadialPoint::decode(y);
            energy.phi11(pt.state()).map_or(f64::NAN, |x| 1.0 - pt.s * pt.s / x - NEAR_SONIC)
        }));
    }
    let mut controls = settings.controls();
    if form == Form::Near {
        // the approach to the corner is close to linear in τ in these
        // variables and may take τ ~ φ₀⁻³, so the step is left uncapped
        controls.max_step = f64::INFINITY;
    }
    let problem = IvpProblem {
        rhs: &rhs,
        t0,
        y0,
        t_max: tau_end,
        events,
        controls,
    };
    integrate(&problem, pair)
}

pub fn integrate_radial(
    energy: &StoredEnergy,
    mode: Mode,
    start: SeriesStart,
    tau_end: f64,
    stops: &[Stop],
    settings: &SolverSettings,
) -> Result<RadialArc> {
    let pair = settings.pair()?;
    let st0 = start.state(start.s0);
    let mut form = match mode {
        Mode::Static => Form::Static,
        Mode::Dynamic if energy.eval_q(st0, start.s0)? < -NEAR_SONIC * energy.phi11(st0)? => Form::Approach,
        Mode::Dynamic => Form::Near,
    };
    let mut y0 = encode(energy, form, start.s0, st0)?;
    let mut t0 = y0[0];
    let mut pieces = Vec::new();
    let stop = loop {
        let arc = run_piece(energy, form, y0, t0, tau_end, stop_events(energy, stops), settings, pair.as_ref())?;
        let termination = arc.termination;
        let (t_end, y_end) = (arc.t_end(), arc.y_end().to_vec());
        pieces.push(Piece { form, arc });
        match termination {
            Termination::ReachedTMax => break StopReason::End,
            Termination::Event { index, .. } if index == stops.len() => {
                let pt = RadialPoint::decode(&y_end);
                form = Form::Near;
                y0 = encode(energy, form, pt.s, pt.state())?;
                t0 = t_end;
            }
            Termination::Event { index, .. } => {
                break match stops[index] {
                    Stop::Sonic { .. } => StopReason::Sonic,
                    Stop::Diagonal { .. } => StopReason::DiagonalContact,
                    Stop::Width { .. } => StopReason::BracketWidth,
                }
            }
            Termination::StepBudget { .. } => break StopReason::StepBudget,
            Termination::StepUnderflow { t } => {
                return Err(Error::StepUnderflow { t: t.exp() });
            }
        }
    };
    Ok(RadialArc {
        energy: energy.clone(),
        mode,
        start,
        stop,
        pieces,
        pair,
    })
}

impl RadialArc {
    pub fn len(&self) -> usize {
        self.pieces.iter().map(|p| p.arc.len()).sum::<usize>() + 1 - self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Piece and local index of sample `i`.
    fn locate(&self, mut i: usize) -> (&Piece, usize) {
        for (k, p) in self.pieces.iter().enumerate() {
            let skip = usize::from(k > 0);
            let n = p.arc.len() - skip;
            if i < n || k + 1 == self.pieces.len() {
                return (p, i + skip);
            }
            i -= n;
        }
        unreachable!("arc has at least one piece")
    }

    /// Piece covering `τ`; the later one at a junction.
    fn piece_at(&self, tau: f64) -> &Piece {
        self.pieces
            .iter()
            .rev()
            .find(|p| p.arc.t[0] <= tau)
            .unwrap_or(&self.pieces[0])
    }

    fn y(&self, i: usize) -> &[f64] {
        let (p, j) = self.locate(i);
        &p.arc.y[j]
    }

    pub fn tau(&self, i: usize) -> f64 {
        let (p, j) = self.locate(i);
        p.arc.t[j]
    }

    pub fn tau_end(&self) -> f64 {
        self.pieces[self.pieces.len() - 1].arc.t_end()
    }

    pub fn point(&self, i: usize) -> RadialPoint {
        RadialPoint::decode(self.y(i))
    }

    pub fn s(&self, i: usize) -> f64 {
        self.y(i)[0].exp()
    }

    pub fn gap(&self, i: usize) -> f64 {
        self.point(i).gap
    }

    pub fn state(&self, i: usize) -> RadialState {
        self.point(i).state()
    }

    pub fn s_end(&self) -> f64 {
        self.s(self.len() - 1)
    }

    /// Point at `τ`, by a single method step from the preceding sample.
    pub fn exact(&self, tau: f64) -> Result<RadialPoint> {
        let (lo, hi) = (self.tau(0), self.tau_end());
        if !(tau >= lo && tau <= hi) {
            return Err(Error::OutOfRange { value: tau, lo, hi });
        }
        let piece = self.piece_at(tau);
        let arc = &piece.arc;
        let i = arc.segment(tau)?;
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| radial_rhs(&self.energy, piece.form, y, dy);
        let y = substep(self.pair.as_ref(), &rhs, arc.t[i], &arc.y[i], &arc.dy[i], tau - arc.t[i]);
        Ok(RadialPoint::decode(&y))
    }

    /// Point at `τ` from the cubic Hermite interpolant.
    pub fn interpolate(&self, tau: f64) -> Result<RadialPoint> {
        let (lo, hi) = (self.tau(0), self.tau_end());
        if !(tau >= lo && tau <= hi) {
            return Err(Error::OutOfRange { value: tau, lo, hi });
        }
        Ok(RadialPoint::decode(&self.piece_at(tau).arc.interpolate(tau)?))
    }

    /// `τ` at which the arc passes through `s`.
    pub fn tau_at_s(&self, s: f64) -> Result<f64> {
        let (lo, hi) = (self.start.s0, self.s_end());
        if !(s >= lo && s <= hi) {
            return Err(Error::OutOfRange { value: s, lo, hi });
        }
        if self.mode == Mode::Static {
            return Ok(s.ln().clamp(self.tau(0), self.tau_end()));
        }
        let ls = s.ln();
        let j = (0..self.len()).rev().find(|&j| self.y(j)[0] <= ls).unwrap_or(0);
        if j + 1 >= self.len() || self.y(j)[0] == ls {
            return Ok(self.tau(j));
        }
        let tol = RootTolerance {
            x_tol: 1e-14 * self.tau(j).abs().max(1.0),
            f_tol: 0.0,
            max_iter: 200,
        };
        refine_root(
            |tau| self.exact(tau).map_or(f64::NAN, |pt| pt.s.ln() - ls),
            self.tau(j),
            self.tau(j + 1),
            tol,
        )
    }

    /// State at `s`; the series is used below the hand-off point `s₀`.
    pub fn state_at_s(&self, s: f64) -> Result<RadialState> {
        if s > 0.0 && s < self.start.s0 {
            return Ok(self.start.state(s));
        }
        let tau = self.tau_at_s(s)?;
        Ok(self.exact(tau)?.state())
    }

    /// Checks that `a` increases, `b` decreases and `b − a > 0` decreases.
    pub fn check_monotone(&self, tol: f64) -> Result<()> {
        for i in 1..self.len() {
            let (p, c) = (self.point(i - 1), self.point(i));
            let s = c.s;
            if c.a < p.a - tol * p.a {
                return Err(Error::HypothesisViolation(format!("a decreases at s = {s}: {} -> {}", p.a, c.a)));
            }
            if c.b > p.b + tol * p.b {
                return Err(Error::HypothesisViolation(format!("b increases at s = {s}: {} -> {}", p.b, c.b)));
            }
            if c.ln_gap > p.ln_gap + tol {
                return Err(Error::HypothesisViolation(format!(
                    "b - a increases at s = {s}: {} -> {}",
                    p.gap, c.gap
                )));
            }
        }
        Ok(())
    }
}
