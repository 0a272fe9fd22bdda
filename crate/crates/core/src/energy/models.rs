//! Scalar building blocks `g` and `h` of a separable stored energy, and the
//! registry that builds them by family name.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which slot of `Φ = Σ g(vᵢ) + h(Π vᵢ)` a model fills.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    G,
    H,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::G => f.write_str("g"),
            Role::H => f.write_str("h"),
        }
    }
}

/// Sign properties that some families can certify in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Claim {
    /// `f'' > 0` on the domain.
    SecondPositive,
    /// `f''' <= 0` on the domain.
    ThirdNonPositive,
    /// `f''' < 0` on the domain.
    ThirdNegative,
}

/// A scalar function with three continuous derivatives.
pub trait ScalarModel: Send + Sync + fmt::Debug {
    fn family(&self) -> &'static str;

    /// `[f, f', f'', f''']` at `x`.
    fn eval(&self, x: f64) -> [f64; 4];

    /// Whether the model is `C³` up to and including `x = 0`.
    fn defined_at_zero(&self) -> bool;

    /// Closed-form `lim_{x→∞} f'(x) / x^k`. `Some(±∞)` for unbounded growth,
    /// `None` when the family cannot say.
    fn derivative_growth(&self, _k: f64) -> Option<f64> {
        None
    }

    /// Closed-form limits of `f'` at `0+` and at `+∞`.
    fn derivative_limits(&self) -> Option<(f64, f64)> {
        None
    }

    /// A closed-form lower bound for `f''` on the domain.
    fn curvature_floor(&self) -> Option<f64> {
        None
    }

    fn closed_form(&self, _claim: Claim) -> Option<bool> {
        None
    }

    fn first(&self, x: f64) -> f64 {
        self.eval(x)[1]
    }

    fn second(&self, x: f64) -> f64 {
        self.eval(x)[2]
    }
}

/// One term `c·(x + ε)^p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coefficient: f64,
    pub exponent: f64,
    pub shift: f64,
}

impl PowerTerm {
    pub fn new(coefficient: f64, exponent: f64, shift: f64) -> Self {
        Self {
            coefficient,
            exponent,
            shift,
        }
    }

    fn eval(&self, x: f64) -> [f64; 4] {
        let (c, p) = (self.coefficient, self.exponent);
        let y = x + self.shift;
        if p == 0.0 {
            return [c, 0.0, 0.0, 0.0];
        }
        // falling-factorial factors vanish exactly for integer exponents
        let term = |k: f64, e: f64| if k == 0.0 { 0.0 } else { k * y.powf(e) };
        [
            term(c, p),
            term(c * p, p - 1.0),
            term(c * p * (p - 1.0), p - 2.0),
            term(c * p * (p - 1.0) * (p - 2.0), p - 3.0),
        ]
    }

    fn is_nonneg_integer(&self) -> bool {
        self.exponent >= 0.0 && self.exponent.fract() == 0.0
    }

    fn defined_at_zero(&self) -> bool {
        self.shift > 0.0 || self.is_nonneg_integer() || self.exponent >= 3.0
    }

    fn coefficient_of(&self, order: usize) -> f64 {
        let p = self.exponent;
        match order {
            1 => self.coefficient * p,
            2 => self.coefficient * p * (p - 1.0),
            3 => self.coefficient * p * (p - 1.0) * (p - 2.0),
            _ => self.coefficient,
        }
    }
}

const EXPONENT_EPS: f64 = 1e-12;

/// Sum of power terms; backs the quadratic, power-sum, inverse-power-sum and
/// custom families.
#[derive(Clone, Debug)]
pub struct PowerSeries {
    family: &'static str,
    terms: Vec<PowerTerm>,
}

impl PowerSeries {
    pub fn new(family: &'static str, terms: Vec<PowerTerm>) -> Self {
        Self { family, terms }
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }

    /// Leading behaviour of `Σ c_k x^{e_k}` at infinity for the given derivative order.
    fn leading_at_infinity(&self, order: usize) -> Option<(f64, f64)> {
        let mut lead: Option<(f64, f64)> = None;
        for t in &self.terms {
            let c = t.coefficient_of(order);
            if c == 0.0 {
                continue;
            }
            let e = t.exponent - order as f64;
            lead = match lead {
                None => Some((e, c)),
                Some((le, lc)) if (e - le).abs() < EXPONENT_EPS => Some((le, lc + c)),
                Some((le, _)) if e > le => Some((e, c)),
                keep => keep,
            };
        }
        lead
    }
}

impl ScalarModel for PowerSeries {
    fn family(&self) -> &'static str {
        self.family
    }

    fn eval(&self, x: f64) -> [f64; 4] {
        self.terms.iter().fold([0.0; 4], |mut acc, t| {
            let v = t.eval(x);
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b;
            }
            acc
        })
    }

    fn defined_at_zero(&self) -> bool {
        self.terms.iter().all(PowerTerm::defined_at_zero)
    }

    fn derivative_growth(&self, k: f64) -> Option<f64> {
        let Some((e, c)) = self.leading_at_infinity(1) else {
            return Some(0.0);
        };
        if c == 0.0 {
            return None;
        }
        if (e - k).abs() < EXPONENT_EPS {
            Some(c)
        } else if e > k {
            Some(c.signum() * f64::INFINITY)
        } else {
            Some(0.0)
        }
    }

    fn derivative_limits(&self) -> Option<(f64, f64)> {
        let at_inf = self.derivative_growth(0.0)?;
        let at_zero = if self.defined_at_zero() {
            self.first(0.0)
        } else {
            // the most singular unshifted term dominates
            let mut worst: Option<(f64, f64)> = None;
            for t in self.terms.iter().filter(|t| t.shift == 0.0) {
                let c = t.coefficient_of(1);
                let e = t.exponent - 1.0;
                if c == 0.0 || e >= 0.0 {
                    continue;
                }
                worst = match worst {
                    None => Some((e, c)),
                    Some((we, wc)) if (e - we).abs() < EXPONENT_EPS => Some((we, wc + c)),
                    Some((we, _)) if e < we => Some((e, c)),
                    keep => keep,
                };
            }
            match worst {
                Some((_, c)) if c != 0.0 => c.signum() * f64::INFINITY,
                _ => return None,
            }
        };
        Some((at_zero, at_inf))
    }

    fn curvature_floor(&self) -> Option<f64> {
        // Sum of per-term infima is a valid lower bound when every term is convex.
        let mut floor = 0.0;
        for t in &self.terms {
            let c2 = t.coefficient_of(2);
            if c2 < 0.0 {
                return None;
            }
            let e = t.exponent - 2.0;
            if c2 == 0.0 {
                continue;
            }
            if e.abs() < EXPONENT_EPS {
                floor += c2;
            } else if e > 0.0 {
                floor += c2 * t.shift.powf(e);
            }
        }
        Some(floor)
    }

    fn closed_form(&self, claim: Claim) -> Option<bool> {
        let (order, strict) = match claim {
            Claim::SecondPositive => (2, true),
            Claim::ThirdNonPositive => (3, false),
            Claim::ThirdNegative => (3, true),
        };
        let coeffs: Vec<f64> = self.terms.iter().map(|t| t.coefficient_of(order)).collect();
        let sign = if order == 2 { 1.0 } else { -1.0 };
        if coeffs.iter().all(|c| sign * c >= 0.0) {
            if !strict || coeffs.iter().any(|c| sign * c > 0.0) {
                return Some(true);
            }
            return Some(false);
        }
        None
    }
}

/// `c·(x − 1)·ln x`.
#[derive(Clone, Debug)]
pub struct LogEntropy {
    scale: f64,
}

impl LogEntropy {
    pub fn new(scale: f64) -> Self {
        Self { scale }
    }
}

impl ScalarModel for LogEntropy {
    fn family(&self) -> &'static str {
        "log_entropy"
    }

    fn eval(&self, x: f64) -> [f64; 4] {
        let c = self.scale;
        let l = x.ln();
        [
            c * (x - 1.0) * l,
            c * (l + 1.0 - 1.0 / x),
            c * (1.0 / x + 1.0 / (x * x)),
            c * (-1.0 / (x * x) - 2.0 / (x * x * x)),
        ]
    }

    fn defined_at_zero(&self) -> bool {
        false
    }

    fn derivative_growth(&self, k: f64) -> Option<f64> {
        Some(if k > 0.0 { 0.0 } else { f64::INFINITY })
    }

    fn derivative_limits(&self) -> Option<(f64, f64)> {
        Some((f64::NEG_INFINITY, f64::INFINITY))
    }

    fn curvature_floor(&self) -> Option<f64> {
        Some(0.0)
    }

    fn closed_form(&self, _claim: Claim) -> Option<bool> {
        Some(true)
    }
}

/// Raw coefficient arrays as they appear in a configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    #[serde(default)]
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub exponents: Vec<f64>,
    #[serde(default)]
    pub shifts: Vec<f64>,
    /// Linear coefficient of the inverse-power family.
    #[serde(default)]
    pub linear: f64,
}

impl ModelSpec {
    pub fn new(family: &str, coefficients: &[f64]) -> Self {
        Self {
            family: family.to_string(),
            coefficients: coefficients.to_vec(),
            ..Self::default()
        }
    }

    pub fn with_exponents(mut self, exponents: &[f64]) -> Self {
        self.exponents = exponents.to_vec();
        self
    }

    pub fn with_shifts(mut self, shifts: &[f64]) -> Self {
        self.shifts = shifts.to_vec();
        self
    }

    pub fn with_linear(mut self, linear: f64) -> Self {
        self.linear = linear;
        self
    }

    fn terms(&self, role: Role) -> Result<Vec<PowerTerm>> {
        if self.exponents.len() != self.coefficients.len() {
            return Err(config(
                role,
                &self.family,
                format!(
                    "{} coefficients but {} exponents",
                    self.coefficients.len(),
                    self.exponents.len()
                ),
            ));
        }
        let shifts = if self.shifts.is_empty() {
            vec![0.0; self.coefficients.len()]
        } else if self.shifts.len() == self.coefficients.len() {
            self.shifts.clone()
        } else {
            return Err(config(role, &self.family, "shift count mismatch".into()));
        };
        if let Some(s) = shifts.iter().find(|s| !(**s >= 0.0)) {
            return Err(config(role, &self.family, format!("shift {s} must be >= 0")));
        }
        Ok(self
            .coefficients
            .iter()
            .zip(&self.exponents)
            .zip(&shifts)
            .map(|((&c, &p), &e)| PowerTerm::new(c, p, e))
            .collect())
    }
}

fn config(role: Role, family: &str, msg: String) -> Error {
    Error::Config(format!("{role} ({family}): {msg}"))
}

/// Builds a [`ScalarModel`] from a [`ModelSpec`], enforcing the family's
/// coefficient constraints.
pub trait ModelFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, spec: &ModelSpec, role: Role) -> Result<Arc<dyn ScalarModel>>;
}

fn require_nonempty(spec: &ModelSpec, role: Role) -> Result<()> {
    if spec.coefficients.is_empty() {
        return Err(config(role, &spec.family, "empty coefficient list".into()));
    }
    if let Some(c) = spec.coefficients.iter().find(|c| !c.is_finite()) {
        return Err(config(role, &spec.family, format!("coefficient {c} is not finite")));
    }
    Ok(())
}

fn require_positive(spec: &ModelSpec, role: Role) -> Result<()> {
    require_nonempty(spec, role)?;
    if let Some(c) = spec.coefficients.iter().find(|c| **c <= 0.0) {
        return Err(config(role, &spec.family, format!("coefficient {c} must be > 0")));
    }
    Ok(())
}

/// `c·x²/2`.
struct QuadraticFamily;

impl ModelFamily for QuadraticFamily {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn build(&self, spec: &ModelSpec, role: Role) -> Result<Arc<dyn ScalarModel>> {
        require_positive(spec, role)?;
        if spec.coefficients.len() != 1 {
            return Err(config(role, self.name(), "expects exactly one coefficient".into()));
        }
        let c = spec.coefficients[0];
        Ok(Arc::new(PowerSeries::new(
            self.name(),
            vec![PowerTerm::new(0.5 * c, 2.0, 0.0)],
        )))
    }
}

/// `Σ a_k (x + ε_k)^{α_k}` with convex terms: `α ∈ (1, 2]` or `α < 0`.
/// As `g` only `α ∈ (1, 2]` with `ε > 0` (or `α = 2`) is admitted.
struct PowerSumFamily;

impl ModelFamily for PowerSumFamily {
    fn name(&self) -> &'static str {
        "power_sum"
    }

    fn build(&self, spec: &ModelSpec, role: Role) -> Result<Arc<dyn ScalarModel>> {
        require_positive(spec, role)?;
        let terms = spec.terms(role)?;
        for t in &terms {
            let p = t.exponent;
            let ok = match role {
                Role::G => p > 1.0 && p <= 2.0 && (t.shift > 0.0 || p == 2.0),
                Role::H => (p > 1.0 && p <= 2.0) || p < 0.0,
            };
            if !ok {
                return Err(config(
                    role,
                    self.name(),
                    format!("term with exponent {p} and shift {} is not admissible", t.shift),
                ));
            }
        }
        Ok(Arc::new(PowerSeries::new(self.name(), terms)))
    }
}

/// `a·x + Σ b_k (x + ε_k)^{−α_k}` with `a >= 0` and `b, α > 0`.
struct InversePowerSumFamily;

impl ModelFamily for InversePowerSumFamily {
    fn name(&self) -> &'static str {
        "inverse_power_sum"
    }

    fn build(&self, spec: &ModelSpec, role: Role) -> Result<Arc<dyn ScalarModel>> {
        require_positive(spec, role)?;
        if !(spec.linear >= 0.0) {
            return Err(config(role, self.name(), "linear coefficient must be >= 0".into()));
        }
        let mut terms = spec.terms(role)?;
        for t in &mut terms {
            if !(t.exponent > 0.0) {
                return Err(config(
                    role,
                    self.name(),
                    format!("decay exponent {} must be > 0", t.exponent),
                ));
            }
            if role == Role::G && !(t.shift > 0.0) {
                return Err(config(role, self.name(), "shifts must be > 0 for g".into()));
            }
            t.exponent = -t.exponent;
        }
        if spec.linear > 0.0 {
            terms.insert(0, PowerTerm::new(spec.linear, 1.0, 0.0));
        }
        Ok(Arc::new(PowerSeries::new(self.name(), terms)))
    }
}

/// `c·(x − 1)·ln x`; only meaningful as `h`.
struct LogEntropyFamily;

impl ModelFamily for LogEntropyFamily {
    fn name(&self) -> &'static str {
        "log_entropy"
    }

    fn build(&self, spec: &ModelSpec, role: Role) -> Result<Arc<dyn ScalarModel>> {
        require_positive(spec, role)?;
        if spec.coefficients.len() != 1 {
            return Err(config(role, self.name(), "expects exactly one coefficient".into()));
        }
        if role == Role::G {
            return Err(config(role, self.name(), "not defined at x = 0".into()));
        }
        Ok(Arc::new(LogEntropy::new(spec.coefficients[0])))
    }
}

/// Arbitrary `Σ c_k (x + ε_k)^{p_k}`; constraints are left to the hypothesis check.
struct CustomFamily;

impl ModelFamily for CustomFamily {
    fn name(&self) -> &'static str {
        "custom"
    }

    fn build(&self, spec: &ModelSpec, role: Role) -> Result<Arc<dyn ScalarModel>> {
        require_nonempty(spec, role)?;
        let terms = spec.terms(role)?;
        Ok(Arc::new(PowerSeries::new(self.name(), terms)))
    }
}

/// Name → family lookup used by configuration loading.
pub struct FamilyRegistry {
    families: BTreeMap<&'static str, Box<dyn ModelFamily>>,
}

impl FamilyRegistry {
    pub fn empty() -> Self {
        Self {
            families: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(QuadraticFamily));
        reg.register(Box::new(PowerSumFamily));
        reg.register(Box::new(InversePowerSumFamily));
        reg.register(Box::new(LogEntropyFamily));
        reg.register(Box::new(CustomFamily));
        reg
    }

    pub fn register(&mut self, family: Box<dyn ModelFamily>) {
        self.families.insert(family.name(), family);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.families.keys().copied()
    }

    pub fn build(&self, spec: &ModelSpec, role: Role) -> Result<Arc<dyn ScalarModel>> {
        let family = self.families.get(spec.family.as_str()).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            Error::Config(format!(
                "{role}: unknown family '{}' (known: {})",
                spec.family,
                known.join(", ")
            ))
        })?;
        family.build(spec, role)
    }
}

impl Default for FamilyRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(spec: ModelSpec, role: Role) -> Arc<dyn ScalarModel> {
        FamilyRegistry::builtin().build(&spec, role).unwrap()
    }

    #[test]
    fn quadratic_closed_forms() {
        let g = build(ModelSpec::new("quadratic", &[1.0]), Role::G);
        assert_eq!(g.eval(3.0), [4.5, 3.0, 1.0, 0.0]);
        assert_eq!(g.derivative_growth(1.0), Some(1.0));
        assert_eq!(g.derivative_growth(0.0), Some(f64::INFINITY));
        assert_eq!(g.derivative_growth(2.0), Some(0.0));
        assert_eq!(g.curvature_floor(), Some(1.0));
        assert!(g.defined_at_zero());
        assert_eq!(g.closed_form(Claim::ThirdNonPositive), Some(true));
        assert_eq!(g.closed_form(Claim::ThirdNegative), Some(false));
    }

    #[test]
    fn log_entropy_derivatives() {
        let h = build(ModelSpec::new("log_entropy", &[1.0]), Role::H);
        let [f, d1, d2, d3] = h.eval(0.5);
        assert!((f - (-0.5 * 0.5f64.ln())).abs() < 1e-15);
        assert!((d1 - (0.5f64.ln() + 1.0 - 2.0)).abs() < 1e-15);
        assert_eq!(d2, 6.0);
        assert_eq!(d3, -4.0 - 16.0);
        assert_eq!(h.first(1.0), 0.0);
    }

    #[test]
    fn inverse_power_sum_for_planar_growth() {
        let g = build(
            ModelSpec::new("inverse_power_sum", &[1.0])
                .with_exponents(&[1.0])
                .with_shifts(&[1.0]),
            Role::G,
        );
        let [_, d1, d2, d3] = g.eval(1.0);
        assert_eq!(d1, -0.25);
        assert_eq!(d2, 0.25);
        assert!(d3 < 0.0);
        assert_eq!(g.derivative_growth(0.0), Some(0.0));
        assert!(g.defined_at_zero());
    }

    #[test]
    fn rejects_bad_specs() {
        let reg = FamilyRegistry::builtin();
        assert!(reg.build(&ModelSpec::new("quadratic", &[]), Role::G).is_err());
        assert!(reg.build(&ModelSpec::new("quadratic", &[-1.0]), Role::G).is_err());
        assert!(reg.build(&ModelSpec::new("log_entropy", &[1.0]), Role::G).is_err());
        assert!(reg.build(&ModelSpec::new("nope", &[1.0]), Role::G).is_err());
        let bad_exp = ModelSpec::new("power_sum", &[1.0]).with_exponents(&[2.5]).with_shifts(&[1.0]);
        assert!(reg.build(&bad_exp, Role::G).is_err());
        let unshifted = ModelSpec::new("power_sum", &[1.0]).with_exponents(&[1.5]);
        assert!(reg.build(&unshifted, Role::G).is_err());
        assert!(reg.build(&unshifted, Role::H).is_ok());
    }

    #[test]
    fn power_sum_limits_for_h() {
        // x^{3/2} + 1/x: h' → −∞ at 0, +∞ at ∞
        let h = build(
            ModelSpec::new("power_sum", &[1.0, 1.0]).with_exponents(&[1.5, -1.0]),
            Role::H,
        );
        assert_eq!(h.derivative_limits(), Some((f64::NEG_INFINITY, f64::INFINITY)));
        assert_eq!(h.closed_form(Claim::ThirdNegative), Some(true));
        assert_eq!(h.closed_form(Claim::SecondPositive), Some(true));
    }
}
