//! The φ₀ → 0 limit: the inner profile, the critical stretch Λ₀ and the
//! equilibrium (static) stretch of the unit ball.

use std::io::Write;

use crate::cavity::{fmt_f64, require, series_start, CavityConfig};
use crate::energy::{RadialState, StoredEnergy};
use crate::error::{Error, Result};
use crate::ode::{refine_root, RootTolerance};
use crate::radial::{integrate_radial, Mode, RadialArc, SeriesStart, SolverSettings, Stop, StopReason};

const INNER_HYPOTHESES: [&str; 4] = ["H0", "H1", "H2", "H3"];
const EQUILIBRIUM_HYPOTHESES: [&str; 5] = ["H0", "H1", "H2", "H3", "H4"];

/// Quadrature nodes per unit of `ln ξ`.
pub const NODES_PER_UNIT: usize = 1000;
const HEAD_NODES: usize = 64;
const CHI_EXPANSIONS: usize = 200;
const CHI_SCAN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerSample {
    pub xi: f64,
    pub psi0: f64,
    pub delta0: f64,
    pub a0: f64,
    pub b0: f64,
}

impl InnerSample {
    fn new(xi: f64, st: RadialState, dim: usize) -> Self {
        Self {
            xi,
            psi0: xi * st.b,
            delta0: st.a * st.b.powi(dim as i32 - 1),
            a0: st.a,
            b0: st.b,
        }
    }
}

#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub v0: f64,
    pub samples: Vec<InnerSample>,
    pub xi_max: f64,
    /// Last sampled abscissa; below `xi_max` when the bracket closed early.
    pub xi_end: f64,
    /// `[a₀, b₀]` at `xi_end`.
    pub bracket: (f64, f64),
    pub lambda0: f64,
    /// Bracket width reached `bracket_tol`.
    pub converged: bool,
    pub radial: RadialArc,
}

pub fn solve_inner(energy: &StoredEnergy, v0: f64, settings: &SolverSettings) -> Result<InnerSolution> {
    require(energy, &INNER_HYPOTHESES)?;
    settings.validate()?;
    if !(v0 > 0.0 && v0.is_finite()) {
        return Err(Error::Domain(format!("v0 = {v0} must be > 0")));
    }
    let s0 = settings.s0_factor * energy.nu().min(1.0);
    let start = SeriesStart::new(energy, 1.0, v0, s0)?;
    let stops = [Stop::Width {
        tol: settings.bracket_tol,
    }];
    let radial = integrate_radial(energy, Mode::Static, start, settings.xi_max.ln(), &stops, settings)?;
    if radial.stop == StopReason::StepBudget {
        return Err(Error::HypothesisViolation(format!(
            "inner solution ran out of steps at xi = {}",
            radial.s_end()
        )));
    }
    radial.check_monotone(settings.monotone_tol)?;
    let samples: Vec<_> = (0..radial.len())
        .map(|i| InnerSample::new(radial.s(i), radial.state(i), energy.dim()))
        .collect();
    let last = samples[samples.len() - 1];
    let bracket = (last.a0, last.b0);
    Ok(InnerSolution {
        v0,
        xi_max: settings.xi_max,
        xi_end: last.xi,
        bracket,
        lambda0: 0.5 * (bracket.0 + bracket.1),
        // the width event lands on the tolerance up to root-finding roundoff
        converged: bracket.1 - bracket.0 <= settings.bracket_tol * (1.0 + 1e-6),
        samples,
        radial,
    })
}

impl InnerSolution {
    pub fn energy(&self) -> &StoredEnergy {
        &self.radial.energy
    }

    pub fn width(&self) -> f64 {
        self.bracket.1 - self.bracket.0
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.width()
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        x >= self.bracket.0 - slack && x <= self.bracket.1 + slack
    }

    /// State at `ξ`, from the series below the hand-off point.
    pub fn state_at(&self, xi: f64) -> Result<RadialState> {
        self.radial.state_at_s(xi)
    }

    /// `(ψ₀, δ₀)` at `ξ ≥ 0`.
    pub fn profile(&self, xi: f64) -> Result<(f64, f64)> {
        if xi == 0.0 {
            return Ok((1.0, self.v0));
        }
        let st = self.state_at(xi)?;
        Ok((xi * st.b, self.energy().volume(st)?))
    }

    /// `(ξ, a₀, b₀)` on a uniform `ln ξ` grid, by Hermite interpolation.
    fn dense(&self) -> Result<Vec<(f64, RadialState)>> {
        let (t0, t1) = (self.radial.tau(0), self.radial.tau_end());
        let n = (((t1 - t0) * NODES_PER_UNIT as f64).ceil() as usize).max(2);
        (0..=n)
            .map(|i| {
                let t = if i == n { t1 } else { t0 + (t1 - t0) * i as f64 / n as f64 };
                let pt = self.radial.interpolate(t)?;
                Ok((pt.s, pt.state()))
            })
            .collect()
    }

    /// `∫₀^ξ_end f dξ` with the tail estimated from the last decade.
    fn quadrature(&self, f: impl Fn(f64, RadialState) -> Result<f64>) -> Result<Quadrature> {
        let start = self.radial.start;
        let h = start.s0 / HEAD_NODES as f64;
        let head_vals = (1..=HEAD_NODES)
            .map(|k| {
                let xi = k as f64 * h;
                f(xi, start.state(xi))
            })
            .collect::<Result<Vec<_>>>()?;
        // linear extrapolation to the removable singularity at ξ = 0
        let f_zero = 2.0 * head_vals[0] - head_vals[1];
        let mut head = 0.5 * h * (f_zero + head_vals[HEAD_NODES - 1]);
        head += h * head_vals[..HEAD_NODES - 1].iter().sum::<f64>();

        let dense = self.dense()?;
        let mut cum = Vec::with_capacity(dense.len());
        let mut total = head;
        let mut prev: Option<(f64, f64)> = None;
        for &(xi, st) in &dense {
            let y = f(xi, st)? * xi;
            let t = xi.ln();
            if let Some((tp, yp)) = prev {
                total += 0.5 * (t - tp) * (y + yp);
            }
            cum.push((xi, total));
            prev = Some((t, y));
        }
        let xi_end = cum[cum.len() - 1].0;
        let tail = if xi_end / 10.0 >= cum[0].0 {
            let j = cum.partition_point(|&(xi, _)| xi < xi_end / 10.0);
            (total - cum[j].1) / 9.0
        } else {
            f64::NAN
        };
        Ok(Quadrature {
            integral: total,
            head,
            tail,
        })
    }

    /// `δ₀'`, the integrand of the first representation.
    pub fn repr1_integrand(&self, xi: f64, st: RadialState) -> Result<f64> {
        let e = self.energy();
        let d = e.dim() as i32;
        let (a, b) = (st.a, st.b);
        let g = e.g();
        let ga = g.eval(a);
        let d0 = -b.powi(1 - d) * (a - b) * a * ga[2] + b.powi(2 - d) * (ga[1] - g.first(b));
        let f0 = e.h().second(e.volume(st)?) + ga[2] * b.powi(2 - 2 * d);
        Ok((1 - d) as f64 * d0 / (xi * b * f0))
    }

    /// Derivative of the radial Cauchy stress along the inner profile.
    pub fn repr2_integrand(&self, xi: f64, st: RadialState) -> Result<f64> {
        let e = self.energy();
        let d = e.dim() as i32;
        let (a, b) = (st.a, st.b);
        Ok((d - 1) as f64 / xi * b.powi(-d) * (b * e.g().first(b) - a * e.g().first(a)))
    }

    /// `Λ₀ = (v₀ + ∫ δ₀')^{1/d}`.
    pub fn lambda0_repr1(&self) -> Result<Representation> {
        let q = self.quadrature(|xi, st| self.repr1_integrand(xi, st))?;
        let df = self.energy().dim() as f64;
        let value = (self.v0 + q.integral).powf(1.0 / df);
        Ok(Representation {
            value,
            quadrature: q,
            uncertainty: q.tail.abs() * value.powf(1.0 - df) / df,
        })
    }

    /// `Λ₀ = χ⁻¹(h'(v₀) + ∫ T_rad')`; requires `χ` increasing.
    pub fn lambda0_repr2(&self) -> Result<Representation> {
        let q = self.quadrature(|xi, st| self.repr2_integrand(xi, st))?;
        let e = self.energy();
        let value = chi_inverse(e, e.h().first(self.v0) + q.integral)?;
        Ok(Representation {
            value,
            quadrature: q,
            uncertainty: q.tail.abs() / e.chi_prime(value),
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["xi", "psi0", "delta0", "a0", "b0"])?;
        for x in &self.samples {
            let row = [x.xi, x.psi0, x.delta0, x.a0, x.b0];
            w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn bounds(&self) -> Result<InnerBounds> {
        let e = self.energy();
        let l = self.lambda0;
        let mut sandwich = f64::INFINITY;
        let mut lower = f64::INFINITY;
        let mut upper = f64::INFINITY;
        let mut delta_range = (f64::INFINITY, 0.0f64);
        for x in &self.samples {
            sandwich = sandwich.min((l - x.a0).min(x.b0 - l));
            lower = lower.min(x.psi0 - (l * x.xi).max(1.0));
            upper = upper.min(1.0 + l * x.xi - x.psi0);
            delta_range = (delta_range.0.min(x.delta0), delta_range.1.max(x.delta0));
        }
        let w1 = if self.xi_end >= 1.0 {
            let st = self.state_at(1.0)?;
            st.b - st.a
        } else {
            f64::NAN
        };
        let decay = self
            .samples
            .iter()
            .filter(|x| x.xi >= 1.0)
            .map(|x| w1 - (x.b0 - x.a0) * x.xi)
            .fold(f64::INFINITY, f64::min);
        let df = e.dim() as f64;
        let rep = e.hypotheses();
        let cube_root = self.v0.powf(1.0 / df);
        let chi_bound = if rep.all_pass(&["H6", "H7"]) {
            Some(chi_inverse(e, e.h().first(self.v0))?)
        } else {
            None
        };
        Ok(InnerBounds {
            sandwich_margin: sandwich,
            psi_lower_margin: lower,
            psi_upper_margin: upper,
            decay_constant: w1,
            decay_margin: decay,
            delta_range,
            root_bound: rep.passed("H8").then_some(cube_root),
            chi_bound,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    /// `∫₀^ξ_end`, tail not included.
    pub integral: f64,
    /// Contribution of `[0, s₀]`.
    pub head: f64,
    /// Estimated remainder `∫_ξ_end^∞`, assuming `O(1/ξ)` convergence.
    pub tail: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Representation {
    pub value: f64,
    pub quadrature: Quadrature,
    /// Tail mapped to the stretch scale.
    pub uncertainty: f64,
}

/// Margins of the inner-profile inequalities; all positive when they hold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerBounds {
    /// `min(Λ₀ − a₀, b₀ − Λ₀)`.
    pub sandwich_margin: f64,
    /// `min(ψ₀ − max(1, Λ₀ξ))`.
    pub psi_lower_margin: f64,
    /// `min(1 + Λ₀ξ − ψ₀)`.
    pub psi_upper_margin: f64,
    /// `(b₀ − a₀)(1)`.
    pub decay_constant: f64,
    /// `min over ξ ≥ 1 of (b₀ − a₀)(1) − ξ(b₀ − a₀)(ξ)`.
    pub decay_margin: f64,
    pub delta_range: (f64, f64),
    /// `v₀^{1/d}`, when H8 holds.
    pub root_bound: Option<f64>,
    /// `χ⁻¹(h'(v₀))`, when H6 and H7 hold.
    pub chi_bound: Option<f64>,
}

/// Inverts `χ`, checking that it is increasing on the bracket.
pub fn chi_inverse(e: &StoredEnergy, y: f64) -> Result<f64> {
    let f = |x: f64| e.chi(x) - y;
    let (mut lo, mut hi) = (0.5, 2.0);
    let mut n = 0;
    while f(lo) > 0.0 {
        lo *= 0.5;
        n += 1;
        if n > CHI_EXPANSIONS || lo == 0.0 {
            return Err(Error::BracketFailure { target: y, expansions: n });
        }
    }
    n = 0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        n += 1;
        if n > CHI_EXPANSIONS || !hi.is_finite() {
            return Err(Error::BracketFailure { target: y, expansions: n });
        }
    }
    for k in 0..=CHI_SCAN {
        let x = lo * (hi / lo).powf(k as f64 / CHI_SCAN as f64);
        let slope = e.chi_prime(x);
        if !(slope > 0.0) {
            return Err(Error::H6Violation { x, slope });
        }
    }
    let tol = RootTolerance {
        x_tol: 1e-15 * hi.max(1.0),
        f_tol: 0.0,
        max_iter: 400,
    };
    refine_root(f, lo, hi, tol)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumPoint {
    pub phi0: f64,
    /// Boundary stretch `b(1)`.
    pub lambda: f64,
}

/// Static trajectory from the cavity series start to `s = 1`.
pub fn equilibrium_arc(cfg: &CavityConfig) -> Result<RadialArc> {
    require(&cfg.energy, &EQUILIBRIUM_HYPOTHESES)?;
    let start = series_start(cfg)?;
    let arc = integrate_radial(&cfg.energy, Mode::Static, start, 0.0, &[], &cfg.settings)?;
    if arc.stop != StopReason::End {
        return Err(Error::HypothesisViolation(format!(
            "equilibrium arc stopped early ({}) at s = {}",
            arc.stop.label(),
            arc.s_end()
        )));
    }
    arc.check_monotone(cfg.settings.monotone_tol)?;
    Ok(arc)
}

pub fn solve_equilibrium(cfg: &CavityConfig) -> Result<EquilibriumPoint> {
    let arc = equilibrium_arc(cfg)?;
    Ok(EquilibriumPoint {
        phi0: cfg.phi0,
        lambda: arc.state(arc.len() - 1).b,
    })
}

pub fn write_equilibrium_csv<W: Write>(points: &[EquilibriumPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["phi0", "lambda"])?;
    for p in points {
        w.write_record([fmt_f64(p.phi0), fmt_f64(p.lambda)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_inner_bracket() {
        let e = StoredEnergy::reference(3);
        let sol = solve_inner(&e, 1.0, &SolverSettings::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.width() <= 1e-5 * (1.0 + 1e-6));
        assert!(sol.lambda0 > 1.0);
        let w = sol.width();
        let r1 = sol.lambda0_repr1().unwrap();
        assert!((r1.value - sol.lambda0).abs() <= w + r1.uncertainty);
        let r2 = sol.lambda0_repr2().unwrap();
        assert!((r2.value - sol.lambda0).abs() <= w + r2.uncertainty);
        let b = sol.bounds().unwrap();
        assert!(b.sandwich_margin > 0.0);
        assert!(b.psi_lower_margin > 0.0 && b.psi_upper_margin > 0.0);
        assert!(b.decay_margin > 0.0);
        assert!(sol.lambda0 > b.root_bound.unwrap());
        assert!(sol.lambda0 > b.chi_bound.unwrap());
    }

    #[test]
    fn equilibrium_is_a_rescaled_inner_profile() {
        let e = StoredEnergy::reference(3);
        let sol = solve_inner(&e, 1.0, &SolverSettings::default()).unwrap();
        let phi0 = 0.5;
        let p = solve_equilibrium(&CavityConfig::stress_free(e, phi0).unwrap()).unwrap();
        let b = sol.state_at(1.0 / phi0).unwrap().b;
        assert!((p.lambda - b).abs() < 1e-8, "{} vs {b}", p.lambda);
    }

    #[test]
    fn chi_inverse_at_unit_value() {
        let e = StoredEnergy::reference(3);
        assert!((chi_inverse(&e, 1.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn equilibrium_at_unit_speed() {
        let e = StoredEnergy::reference(3);
        let cfg = CavityConfig::stress_free(e, 1.0).unwrap();
        let p = solve_equilibrium(&cfg).unwrap();
        assert!(p.lambda > 1.0);
    }
}
