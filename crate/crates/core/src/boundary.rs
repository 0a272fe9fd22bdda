//! Cavity-surface conditions `T_rad(0) = G(φ₀)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::StoredEnergy;
use crate::error::{Error, Result};

/// Positive values of an affine `G` are clipped to at least this.
pub const AFFINE_FLOOR: f64 = 1e-12;

pub trait CavityBoundary: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Radial Cauchy stress prescribed on the cavity wall.
    fn cavity_stress(&self, phi0: f64) -> f64;

    fn is_stress_free(&self) -> bool {
        false
    }

    /// `V(φ₀) = h'⁻¹(G(φ₀))`.
    fn cavity_volume(&self, energy: &StoredEnergy, phi0: f64) -> Result<f64> {
        if self.is_stress_free() {
            if let Some(h) = energy.rest_volume() {
                return Ok(h);
            }
        }
        energy.h_prime_inverse(self.cavity_stress(phi0))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct StressFree;

impl CavityBoundary for StressFree {
    fn name(&self) -> &'static str {
        "stress_free"
    }

    fn cavity_stress(&self, _phi0: f64) -> f64 {
        0.0
    }

    fn is_stress_free(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantContent {
    pub value: f64,
}

impl CavityBoundary for ConstantContent {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn cavity_stress(&self, _phi0: f64) -> f64 {
        self.value
    }
}

/// `G(φ₀) = max(c₀ + c₁φ₀, floor)`.
#[derive(Clone, Copy, Debug)]
pub struct AffineContent {
    pub c0: f64,
    pub c1: f64,
}

impl CavityBoundary for AffineContent {
    fn name(&self) -> &'static str {
        "affine"
    }

    fn cavity_stress(&self, phi0: f64) -> f64 {
        (self.c0 + self.c1 * phi0).max(AFFINE_FLOOR)
    }
}

/// Boundary section of a configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub kind: String,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub c0: Option<f64>,
    #[serde(default)]
    pub c1: Option<f64>,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self::stress_free()
    }
}

impl BoundarySpec {
    pub fn stress_free() -> Self {
        Self {
            kind: "stress_free".into(),
            value: None,
            c0: None,
            c1: None,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            kind: "constant".into(),
            value: Some(value),
            ..Self::stress_free()
        }
    }

    pub fn affine(c0: f64, c1: f64) -> Self {
        Self {
            kind: "affine".into(),
            c0: Some(c0),
            c1: Some(c1),
            ..Self::stress_free()
        }
    }
}

type Builder = fn(&BoundarySpec) -> Result<Arc<dyn CavityBoundary>>;

fn need(v: Option<f64>, key: &str, kind: &str) -> Result<f64> {
    match v {
        Some(x) if x.is_finite() => Ok(x),
        Some(x) => Err(Error::Config(format!("boundary '{kind}': {key} = {x} is not finite"))),
        None => Err(Error::Config(format!("boundary '{kind}' requires '{key}'"))),
    }
}

fn build_stress_free(_: &BoundarySpec) -> Result<Arc<dyn CavityBoundary>> {
    Ok(Arc::new(StressFree))
}

fn build_constant(spec: &BoundarySpec) -> Result<Arc<dyn CavityBoundary>> {
    let value = need(spec.value, "value", "constant")?;
    if value <= 0.0 {
        return Err(Error::Config(format!("boundary 'constant': value {value} must be > 0")));
    }
    Ok(Arc::new(ConstantContent { value }))
}

fn build_affine(spec: &BoundarySpec) -> Result<Arc<dyn CavityBoundary>> {
    let c0 = need(spec.c0, "c0", "affine")?;
    let c1 = need(spec.c1, "c1", "affine")?;
    if c0 <= 0.0 {
        return Err(Error::Config(format!("boundary 'affine': G(0) = c0 = {c0} must be > 0")));
    }
    Ok(Arc::new(AffineContent { c0, c1 }))
}

pub struct BoundaryRegistry {
    builders: BTreeMap<&'static str, Builder>,
}

impl BoundaryRegistry {
    pub fn builtin() -> Self {
        let mut builders: BTreeMap<&'static str, Builder> = BTreeMap::new();
        builders.insert("stress_free", build_stress_free);
        builders.insert("constant", build_constant);
        builders.insert("affine", build_affine);
        Self { builders }
    }

    pub fn register(&mut self, name: &'static str, builder: Builder) {
        self.builders.insert(name, builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.builders.keys().copied()
    }

    pub fn build(&self, spec: &BoundarySpec) -> Result<Arc<dyn CavityBoundary>> {
        let b = self.builders.get(spec.kind.as_str()).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            Error::Config(format!(
                "unknown boundary '{}' (known: {})",
                spec.kind,
                known.join(", ")
            ))
        })?;
        b(spec)
    }
}

impl Default for BoundaryRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stress_free_volume_is_rest_volume() {
        let e = StoredEnergy::reference(3);
        let v = StressFree.cavity_volume(&e, 0.7).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn content_volume_inverts_h_prime() {
        let e = StoredEnergy::reference(3);
        let b = AffineContent { c0: 0.5, c1: 1.0 };
        let v = b.cavity_volume(&e, 0.3).unwrap();
        assert!((e.h().first(v) - 0.8).abs() < 1e-12);
        assert!(v > 1.0);
    }

    #[test]
    fn affine_clips() {
        let b = AffineContent { c0: 0.1, c1: -1.0 };
        assert_eq!(b.cavity_stress(1.0), AFFINE_FLOOR);
    }

    #[test]
    fn registry_validates() {
        let reg = BoundaryRegistry::builtin();
        assert!(reg.build(&BoundarySpec::constant(-1.0)).is_err());
        assert!(reg.build(&BoundarySpec::affine(0.0, 1.0)).is_err());
        assert!(reg
            .build(&BoundarySpec {
                kind: "constant".into(),
                ..BoundarySpec::stress_free()
            })
            .is_err());
        assert_eq!(reg.build(&BoundarySpec::affine(1.0, 2.0)).unwrap().name(), "affine");
        assert!(reg.build(&BoundarySpec { kind: "x".into(), ..Default::default() }).is_err());
    }
}
