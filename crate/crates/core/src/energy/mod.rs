//! Separable stored energies `Φ(v₁,…,v_d) = Σ g(vᵢ) + h(Π vᵢ)` evaluated on
//! radial states `(a, b, …, b)`.

mod hypotheses;
mod models;

use std::fmt;
use std::sync::Arc;

pub use hypotheses::{check_hypotheses, HypothesisEntry, HypothesisReport, Method, Verdict, GRID_MAX, GRID_MIN};
pub use models::{
    Claim, FamilyRegistry, LogEntropy, ModelFamily, ModelSpec, PowerSeries, PowerTerm, Role,
    ScalarModel,
};

use crate::error::{Error, Result};
use crate::ode::{refine_root, RootTolerance};

/// Below this relative gap the difference quotients in `P` and `R` are
/// replaced by their diagonal limits.
pub const QUOTIENT_SWITCH: f64 = 1e-7;

/// Relative gap below which the excess rates switch to their expansions.
pub const EXCESS_SWITCH: f64 = 1e-4;

const INVERSE_EXPANSIONS: usize = 200;
const NU_FLOOR: f64 = 1e-8;

/// Principal stretches of a radial deformation: `a` longitudinal, `b` transverse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialState {
    pub a: f64,
    pub b: f64,
}

impl RadialState {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn diagonal(b: f64) -> Self {
        Self { a: b, b }
    }
}

/// Partial derivatives of `Φ` at `(a, b, …, b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivatives {
    pub phi1: f64,
    pub phi2: f64,
    pub phi11: f64,
    pub phi12: f64,
    pub phi111: f64,
    pub phi112: f64,
}

/// The pair `(g, h)` together with the dimension and cached constants.
#[derive(Clone)]
pub struct StoredEnergy {
    g: Arc<dyn ScalarModel>,
    h: Arc<dyn ScalarModel>,
    dim: usize,
    gamma: Option<f64>,
    gamma0: Option<f64>,
    nu: f64,
    rest_volume: Option<f64>,
    report: Arc<HypothesisReport>,
}

impl fmt::Debug for StoredEnergy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StoredEnergy")
            .field("g", &self.g)
            .field("h", &self.h)
            .field("dim", &self.dim)
            .field("gamma", &self.gamma)
            .field("nu", &self.nu)
            .field("rest_volume", &self.rest_volume)
            .finish()
    }
}

impl StoredEnergy {
    pub fn new(g: Arc<dyn ScalarModel>, h: Arc<dyn ScalarModel>, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("dimension must be >= 2, got {dim}")));
        }
        let mut energy = Self {
            g,
            h,
            dim,
            gamma: None,
            gamma0: None,
            nu: NU_FLOOR,
            rest_volume: None,
            report: Arc::new(HypothesisReport::default()),
        };
        energy.gamma = hypotheses::growth_limit(&energy).filter(|g| g.is_finite() && *g >= 0.0);
        energy.gamma0 = energy.gamma.map(|gamma| {
            if dim == 2 {
                gamma - energy.g.first(0.0)
            } else {
                gamma
            }
        });
        energy.nu = hypotheses::nu_lower_bound(&energy);
        energy.rest_volume = energy.h_prime_inverse(0.0).ok();
        energy.report = Arc::new(check_hypotheses(&energy));
        Ok(energy)
    }

    /// Builds both scalar models through `registry`.
    pub fn from_specs(
        registry: &FamilyRegistry,
        g: &ModelSpec,
        h: &ModelSpec,
        dim: usize,
    ) -> Result<Self> {
        Self::new(registry.build(g, Role::G)?, registry.build(h, Role::H)?, dim)
    }

    /// `g(x) = x²/2`, `h(x) = (x − 1) ln x`.
    pub fn reference(dim: usize) -> Self {
        let reg = FamilyRegistry::builtin();
        Self::from_specs(
            &reg,
            &ModelSpec::new("quadratic", &[1.0]),
            &ModelSpec::new("log_entropy", &[1.0]),
            dim,
        )
        .expect("reference energy is well formed")
    }

    pub fn g(&self) -> &dyn ScalarModel {
        self.g.as_ref()
    }

    pub fn h(&self) -> &dyn ScalarModel {
        self.h.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `lim g'(x)/x^{d−2}`, when finite and non-negative.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn gamma0(&self) -> Option<f64> {
        self.gamma0
    }

    /// Lower bound for `√Φ₁₁(x, x)`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `H = h'⁻¹(0)`, the cavity volume of a stress-free cavity.
    pub fn rest_volume(&self) -> Option<f64> {
        self.rest_volume
    }

    pub fn hypotheses(&self) -> &HypothesisReport {
        &self.report
    }

    fn dm1(&self) -> i32 {
        self.dim as i32 - 1
    }

    /// `Φ(a, b, …, b)`.
    pub fn phi(&self, st: RadialState) -> Result<f64> {
        let v = self.volume(st)?;
        Ok(self.g.eval(st.a)[0] + (self.dim as f64 - 1.0) * self.g.eval(st.b)[0] + self.h.eval(v)[0])
    }

    /// `v = a·b^{d−1}`, checked against the domain of `h`.
    pub fn volume(&self, st: RadialState) -> Result<f64> {
        if !(st.a > 0.0 && st.b > 0.0) || !st.a.is_finite() || !st.b.is_finite() {
            return Err(Error::Domain(format!("(a, b) = ({}, {})", st.a, st.b)));
        }
        let v = st.a * st.b.powi(self.dm1());
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("a·b^(d-1) = {v}")));
        }
        Ok(v)
    }

    pub fn eval_derivatives(&self, st: RadialState) -> Result<Derivatives> {
        let v = self.volume(st)?;
        let (a, b) = (st.a, st.b);
        let d = self.dim as i32;
        let ga = self.g.eval(a);
        let gb = self.g.eval(b);
        let [_, h1, h2, h3] = self.h.eval(v);
        let bd2 = b.powi(d - 2);
        let b2d2 = b.powi(2 * d - 2);
        let b2d3 = b.powi(2 * d - 3);
        let out = Derivatives {
            phi1: ga[1] + b.powi(d - 1) * h1,
            phi2: gb[1] + a * bd2 * h1,
            phi11: ga[2] + b2d2 * h2,
            phi12: bd2 * h1 + a * b2d3 * h2,
            phi111: ga[3] + b.powi(3 * d - 3) * h3,
            phi112: b2d3 * (2.0 * h2 + v * h3),
        };
        let all = [out.phi1, out.phi2, out.phi11, out.phi12, out.phi111, out.phi112];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite derivative at ({a}, {b})")));
        }
        Ok(out)
    }

    /// `Φ₁₁(a, b) = g''(a) + b^{2d−2} h''(a b^{d−1})`.
    pub fn phi11(&self, st: RadialState) -> Result<f64> {
        let v = self.volume(st)?;
        Ok(self.g.second(st.a) + st.b.powi(2 * self.dm1()) * self.h.second(v))
    }

    fn near_diagonal(st: RadialState) -> bool {
        (st.a - st.b).abs() < QUOTIENT_SWITCH * st.b.max(1.0)
    }

    /// `(g'(a) − g'(b))/(a − b)`, or `g''` at the midpoint close to the diagonal.
    fn g_quotient(&self, a: f64, b: f64) -> f64 {
        if Self::near_diagonal(RadialState::new(a, b)) {
            self.g.second(0.5 * (a + b))
        } else {
            (self.g.first(a) - self.g.first(b)) / (a - b)
        }
    }

    /// `P(a, b) = Φ₁₂ + (Φ₁ − Φ₂)/(a − b)`.
    pub fn eval_p(&self, st: RadialState) -> Result<f64> {
        let v = self.volume(st)?;
        let d = self.dim as i32;
        Ok(self.g_quotient(st.a, st.b) + st.a * st.b.powi(2 * d - 3) * self.h.second(v))
    }

    /// `Q(a, b, s) = s² − Φ₁₁(a, b)`.
    pub fn eval_q(&self, st: RadialState, s: f64) -> Result<f64> {
        Ok(s * s - self.phi11(st)?)
    }

    /// Rankine–Hugoniot quotient `(Φ₁(a, b) − Φ₁(b, b))/(a − b)`.
    pub fn shock_quotient(&self, st: RadialState) -> Result<f64> {
        let v = self.volume(st)?;
        let (a, b) = (st.a, st.b);
        let vb = b.powi(self.dim as i32);
        let h_quot = if Self::near_diagonal(st) {
            self.h.second(0.5 * (v + vb))
        } else {
            (self.h.first(v) - self.h.first(vb)) / (v - vb)
        };
        Ok(self.g_quotient(a, b) + b.powi(2 * self.dm1()) * h_quot)
    }

    /// `(shock quotient − Φ₁₁(a, b))/gap` for `a = b − gap`. Close to the
    /// diagonal both quotients agree to many digits, so the difference is
    /// taken from the Taylor expansion `½Δ f'''(a + Δ/3)` of each instead;
    /// the rate stays finite as the gap underflows.
    pub fn shock_excess_rate(&self, b: f64, gap: f64) -> Result<f64> {
        let st = RadialState::new(b - gap, b);
        if gap.abs() >= EXCESS_SWITCH * b {
            return Ok((self.shock_quotient(st)? - self.phi11(st)?) / gap);
        }
        let v = self.volume(st)?;
        let dv = b.powi(self.dm1()) * gap;
        let g3 = self.g.eval(st.a + gap / 3.0)[3];
        let h3 = self.h.eval(v + dv / 3.0)[3];
        Ok(0.5 * g3 + 0.5 * b.powi(3 * self.dm1()) * h3)
    }

    /// `(Φ₁₁(b − gap, b) − Φ₁₁(b, b))/gap`, expanded close to the diagonal.
    pub fn phi11_excess_rate(&self, b: f64, gap: f64) -> Result<f64> {
        let st = RadialState::new(b - gap, b);
        if gap.abs() >= EXCESS_SWITCH * b {
            return Ok((self.phi11(st)? - self.phi11(RadialState::diagonal(b))?) / gap);
        }
        let v = self.volume(st)?;
        let dv = b.powi(self.dm1()) * gap;
        let g3 = self.g.eval(b - 0.5 * gap)[3];
        let h3 = self.h.eval(v + 0.5 * dv)[3];
        Ok(-g3 - b.powi(3 * self.dm1()) * h3)
    }

    /// `R(a, b, s)`: shock quotient minus `s²`.
    pub fn eval_r(&self, st: RadialState, s: f64) -> Result<f64> {
        Ok(self.shock_quotient(st)? - s * s)
    }

    /// Radial Cauchy stress `b^{1−d} g'(a) + h'(a b^{d−1})`.
    pub fn radial_cauchy_stress(&self, st: RadialState) -> Result<f64> {
        let v = self.volume(st)?;
        Ok(st.b.powi(1 - self.dim as i32) * self.g.first(st.a) + self.h.first(v))
    }

    /// `χ(x) = h'(x^d) + g'(x) x^{1−d}`.
    pub fn chi(&self, x: f64) -> f64 {
        let d = self.dim as i32;
        self.h.first(x.powi(d)) + self.g.first(x) * x.powi(1 - d)
    }

    /// `χ'(x)`.
    pub fn chi_prime(&self, x: f64) -> f64 {
        let d = self.dim as i32;
        let df = self.dim as f64;
        let g = self.g.eval(x);
        df * x.powi(d - 1) * self.h.second(x.powi(d))
            + g[2] * x.powi(1 - d)
            + (1.0 - df) * g[1] * x.powi(-d)
    }

    /// Solves `h'(x) = y` on `(0, ∞)`.
    pub fn h_prime_inverse(&self, y: f64) -> Result<f64> {
        let f = |x: f64| self.h.first(x) - y;
        let (mut lo, mut hi) = (0.5, 2.0);
        let mut n = 0;
        while f(lo) > 0.0 {
            lo *= 0.5;
            n += 1;
            if n > INVERSE_EXPANSIONS || lo == 0.0 {
                return Err(Error::BracketFailure {
                    target: y,
                    expansions: n,
                });
            }
        }
        n = 0;
        while f(hi) < 0.0 {
            hi *= 2.0;
            n += 1;
            if n > INVERSE_EXPANSIONS || !hi.is_finite() {
                return Err(Error::BracketFailure {
                    target: y,
                    expansions: n,
                });
            }
        }
        let tol = RootTolerance {
            x_tol: 1e-15 * hi.max(1.0),
            f_tol: 0.0,
            max_iter: 400,
        };
        refine_root(f, lo, hi, tol)
    }
}
