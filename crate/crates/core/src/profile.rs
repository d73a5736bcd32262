//! Radially symmetric densities on the velocity plane.
//!
//! [`RadialStepProfile`] holds piecewise-constant-in-radius densities, optionally
//! with each jump replaced by a cubic smoothstep ramp. The counterexample built by
//! [`build_counterexample`] is the main instance: a tall bump of height `c a^2` at
//! the origin, a ring of height `a` at radius `sqrt(5)`, the value 1 on the rest of
//! the disk of radius 5 and a small positivity floor beyond.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::velocity::Velocity;

/// Anything that can be evaluated pointwise as a velocity density.
pub trait Density: Sync {
    fn eval(&self, v: Velocity) -> f64;

    /// Radius of the disk that diagnostics integrate over.
    fn domain_radius(&self) -> f64;
}

impl<D: Density + ?Sized> Density for &D {
    fn eval(&self, v: Velocity) -> f64 {
        (**self).eval(v)
    }
    fn domain_radius(&self) -> f64 {
        (**self).domain_radius()
    }
}

pub const R_OUTER: f64 = 5.0;
pub const DEFAULT_RHO: f64 = 0.1;
pub const DEFAULT_FLOOR: f64 = 1e-6;
pub const DEFAULT_R_DOMAIN: f64 = 8.0;

/// Radius of the ring where the counterexample equals `a`.
pub fn ring_radius() -> f64 {
    5f64.sqrt()
}

/// Radii at which the counterexample's collision geometry changes character.
pub fn critical_radii(rho: f64) -> Vec<f64> {
    let r5 = ring_radius();
    vec![rho, 1.0, SQRT_2, 2.0 * SQRT_2, r5 - rho, r5 + rho, R_OUTER]
}

/// Parameters of the counterexample density.
///
/// Serialized as `{a, rho, c, floor_delta, r_domain, smoothing_width}`; the support
/// radius 5 and ring radius `sqrt(5)` are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleParams {
    pub a: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    pub c: f64,
    #[serde(default = "default_floor")]
    pub floor_delta: f64,
    #[serde(default = "default_r_domain")]
    pub r_domain: f64,
    #[serde(default)]
    pub smoothing_width: f64,
}

fn default_rho() -> f64 {
    DEFAULT_RHO
}
fn default_floor() -> f64 {
    DEFAULT_FLOOR
}
fn default_r_domain() -> f64 {
    DEFAULT_R_DOMAIN
}

impl CounterexampleParams {
    pub fn new(a: f64, c: f64) -> Self {
        CounterexampleParams {
            a,
            rho: DEFAULT_RHO,
            c,
            floor_delta: DEFAULT_FLOOR,
            r_domain: DEFAULT_R_DOMAIN,
            smoothing_width: 0.0,
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_floor(mut self, floor_delta: f64) -> Self {
        self.floor_delta = floor_delta;
        self
    }

    pub fn with_smoothing(mut self, width: f64) -> Self {
        self.smoothing_width = width;
        self
    }

    pub fn with_r_domain(mut self, r_domain: f64) -> Self {
        self.r_domain = r_domain;
        self
    }

    pub fn r_outer(&self) -> f64 {
        R_OUTER
    }

    pub fn r_ring(&self) -> f64 {
        ring_radius()
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a,
            self.rho,
            self.c,
            self.floor_delta,
            self.r_domain,
            self.smoothing_width,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("finite", format!("{self:?}")));
        }
        if !(self.rho < self.r_ring() - self.rho) {
            return Err(Error::invalid(
                "ring_clear_of_ball",
                format!("rho < r_ring - rho fails for rho = {}", self.rho),
            ));
        }
        if !(self.rho < self.r_outer() - self.r_ring()) {
            return Err(Error::invalid(
                "ring_inside_support",
                format!("rho < r_outer - r_ring fails for rho = {}", self.rho),
            ));
        }
        if !(self.rho > 0.0 && self.rho <= 0.2) {
            return Err(Error::invalid(
                "rho_range",
                format!("rho must lie in (0, 0.2], got {}", self.rho),
            ));
        }
        if !(self.a > 0.0) {
            return Err(Error::invalid("a_positive", format!("a = {}", self.a)));
        }
        if !(self.c > 0.0) {
            return Err(Error::invalid("c_positive", format!("c = {}", self.c)));
        }
        if !(self.floor_delta >= 0.0 && self.floor_delta < 1.0) {
            return Err(Error::invalid(
                "floor_below_bulk",
                format!("floor_delta must lie in [0, 1), got {}", self.floor_delta),
            ));
        }
        if !(self.r_domain >= self.r_outer() + 2.0) {
            return Err(Error::invalid(
                "domain_margin",
                format!("r_domain >= r_outer + 2 fails for r_domain = {}", self.r_domain),
            ));
        }
        if !(self.smoothing_width >= 0.0 && self.smoothing_width <= self.rho) {
            return Err(Error::invalid(
                "smoothing_width",
                format!(
                    "smoothing_width must lie in [0, rho], got {}",
                    self.smoothing_width
                ),
            ));
        }
        Ok(())
    }
}

/// Counterexample density as a radial step profile.
pub fn build_counterexample(params: &CounterexampleParams) -> Result<RadialStepProfile> {
    params.validate()?;
    let r5 = params.r_ring();
    let rho = params.rho;
    let floor = params.floor_delta.max(0.0);
    RadialStepProfile::new(
        vec![rho, r5 - rho, r5 + rho, params.r_outer(), params.r_domain],
        vec![params.c * params.a * params.a, 1.0, params.a, 1.0, floor],
        params.smoothing_width,
        floor,
    )
}

/// Closed-form mass of the sharp, unfloored counterexample.
pub fn counterexample_mass(params: &CounterexampleParams) -> f64 {
    let rho = params.rho;
    std::f64::consts::PI
        * (rho * rho * (params.c * params.a * params.a - 1.0)
            + 4.0 * ring_radius() * rho * (params.a - 1.0)
            + R_OUTER * R_OUTER)
}

/// Density that is constant on each annulus `(b[k-1], b[k]]` of its breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialStepProfile {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    smoothing_width: f64,
    floor: f64,
}

#[inline]
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

impl RadialStepProfile {
    pub fn new(
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        smoothing_width: f64,
        floor: f64,
    ) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::invalid(
                "profile_shape",
                format!(
                    "{} breakpoints vs {} values",
                    breakpoints.len(),
                    values.len()
                ),
            ));
        }
        let mut prev = 0.0;
        for &b in &breakpoints {
            if !(b.is_finite() && b > prev) {
                return Err(Error::invalid(
                    "breakpoints_increasing",
                    format!("{breakpoints:?}"),
                ));
            }
            prev = b;
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("values_nonnegative", format!("{values:?}")));
        }
        if !(floor.is_finite() && floor >= 0.0) {
            return Err(Error::invalid("floor_nonnegative", format!("{floor}")));
        }
        let profile = RadialStepProfile {
            breakpoints,
            values,
            smoothing_width,
            floor,
        };
        if !(smoothing_width.is_finite()
            && smoothing_width >= 0.0
            && 2.0 * smoothing_width <= profile.feature_width() + 1e-12)
        {
            return Err(Error::invalid(
                "smoothing_width",
                format!(
                    "ramps of half-width {smoothing_width} overlap (narrowest annulus {})",
                    profile.feature_width()
                ),
            ));
        }
        Ok(profile)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn smoothing_width(&self) -> f64 {
        self.smoothing_width
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn r_domain(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Width of the narrowest annulus (the innermost disk counts as one).
    pub fn feature_width(&self) -> f64 {
        let mut prev = 0.0;
        let mut w = f64::INFINITY;
        for &b in &self.breakpoints {
            w = w.min(b - prev);
            prev = b;
        }
        w
    }

    pub fn with_smoothing(&self, width: f64) -> Result<Self> {
        RadialStepProfile::new(
            self.breakpoints.clone(),
            self.values.clone(),
            width,
            self.floor,
        )
    }

    fn value_after(&self, k: usize) -> f64 {
        self.values.get(k + 1).copied().unwrap_or(self.floor)
    }

    /// Evaluates the profile at radius `r`; ties at a breakpoint go to the inner annulus.
    pub fn eval_radius(&self, r: f64) -> f64 {
        let s = self.smoothing_width;
        let n = self.breakpoints.len();
        let k = self.breakpoints.partition_point(|&b| b < r);
        let mut val = if k < n { self.values[k] } else { self.floor };
        if s > 0.0 {
            if k < n {
                let b = self.breakpoints[k];
                if r > b - s {
                    val += (self.value_after(k) - self.values[k]) * smoothstep((r - b + s) / (2.0 * s));
                }
            }
            if k >= 1 {
                let b = self.breakpoints[k - 1];
                if r < b + s {
                    let inner = self.values[k - 1];
                    let outer = self.value_after(k - 1);
                    val -= (outer - inner) * (1.0 - smoothstep((r - b + s) / (2.0 * s)));
                }
            }
        }
        val
    }

    /// Analytic integral of the sharp profile over the disk of radius `r_domain`.
    pub fn sharp_mass(&self) -> f64 {
        let mut prev = 0.0;
        let mut m = 0.0;
        for (b, v) in self.breakpoints.iter().zip(&self.values) {
            m += v * std::f64::consts::PI * (b * b - prev * prev);
            prev = *b;
        }
        m
    }
}

impl Density for RadialStepProfile {
    #[inline]
    fn eval(&self, v: Velocity) -> f64 {
        self.eval_radius(v.norm())
    }

    fn domain_radius(&self) -> f64 {
        self.r_domain()
    }
}

/// `eval_profile` in free-function form.
pub fn eval_profile(profile: &RadialStepProfile, v: Velocity) -> f64 {
    profile.eval(v)
}

/// Centered Gaussian `amplitude * exp(-|v|^2 / (2 temperature))`; the equilibrium oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Maxwellian {
    pub amplitude: f64,
    pub temperature: f64,
    pub r_domain: f64,
}

impl Maxwellian {
    pub fn new(amplitude: f64, temperature: f64, r_domain: f64) -> Result<Self> {
        if !(amplitude > 0.0 && temperature > 0.0 && r_domain > 0.0)
            || !(amplitude.is_finite() && temperature.is_finite() && r_domain.is_finite())
        {
            return Err(Error::invalid(
                "maxwellian_positive",
                format!("amplitude {amplitude}, temperature {temperature}, r_domain {r_domain}"),
            ));
        }
        Ok(Maxwellian {
            amplitude,
            temperature,
            r_domain,
        })
    }

    pub fn standard() -> Self {
        Maxwellian {
            amplitude: 1.0,
            temperature: 1.0,
            r_domain: DEFAULT_R_DOMAIN,
        }
    }
}

impl Density for Maxwellian {
    #[inline]
    fn eval(&self, v: Velocity) -> f64 {
        self.amplitude * (-v.norm_sq() / (2.0 * self.temperature)).exp()
    }

    fn domain_radius(&self) -> f64 {
        self.r_domain
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple() -> RadialStepProfile {
        RadialStepProfile::new(vec![1.0, 2.0], vec![3.0, 7.0], 0.0, 0.0).unwrap()
    }

    #[test]
    fn counterexample_pointwise_values() {
        let p = build_counterexample(&CounterexampleParams::new(10.0, 0.01).with_floor(0.0))
            .unwrap();
        assert_eq!(p.eval(Velocity::new(0.05, 0.0)), 1.0);
        assert_eq!(p.eval(Velocity::new(ring_radius(), 0.0)), 10.0);
        assert_eq!(p.eval(Velocity::new(0.0, 3.0)), 1.0);
        assert_eq!(p.eval(Velocity::new(0.0, 6.0)), 0.0);

        let p = build_counterexample(&CounterexampleParams::new(10.0, 0.01).with_floor(1e-6))
            .unwrap();
        assert_eq!(p.eval(Velocity::new(6.0, 0.0)), 1e-6);
        assert_eq!(p.eval(Velocity::new(20.0, 0.0)), 1e-6);
    }

    #[test]
    fn step_evaluation_and_ties() {
        let p = simple();
        assert_eq!(p.eval_radius(0.5), 3.0);
        assert_eq!(p.eval_radius(1.0), 3.0);
        assert_eq!(p.eval_radius(1.5), 7.0);
        assert_eq!(p.eval_radius(2.5), 0.0);
    }

    #[test]
    fn smoothstep_midpoint_and_plateaus() {
        let p = simple().with_smoothing(0.1).unwrap();
        assert_eq!(p.eval_radius(1.0), 5.0);
        assert_eq!(p.eval_radius(0.85), 3.0);
        assert_eq!(p.eval_radius(1.5), 7.0);
        assert_eq!(p.eval_radius(2.0), 3.5);
        let mut prev = p.eval_radius(0.8);
        for i in 0..=200 {
            let r = 0.8 + 0.4 * i as f64 / 200.0;
            let v = p.eval_radius(r);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn rejects_bad_params() {
        let base = CounterexampleParams::new(100.0, 1.0);
        let err = base.with_rho(3.0).validate().unwrap_err().to_string();
        assert!(err.contains("ring_clear_of_ball"), "{err}");
        assert!(base.with_rho(0.3).validate().is_err());
        assert!(base.with_floor(1.0).validate().is_err());
        assert!(base.with_r_domain(6.5).validate().is_err());
        assert!(base.with_smoothing(0.2).validate().is_err());
        assert!(CounterexampleParams::new(-1.0, 1.0).validate().is_err());
        assert!(CounterexampleParams::new(1.0, 0.0).validate().is_err());
        assert!(CounterexampleParams::new(f64::NAN, 1.0).validate().is_err());
    }

    #[test]
    fn rejects_overlapping_ramps() {
        assert!(simple().with_smoothing(0.6).is_err());
        assert!(RadialStepProfile::new(vec![1.0, 1.0], vec![1.0, 1.0], 0.0, 0.0).is_err());
        assert!(RadialStepProfile::new(vec![1.0], vec![-1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn analytic_mass_matches_annulus_sum() {
        let params = CounterexampleParams::new(37.0, 0.3).with_floor(0.0);
        let p = build_counterexample(&params).unwrap();
        let m = counterexample_mass(&params);
        assert!((p.sharp_mass() - m).abs() <= 1e-12 * m);
    }

    #[test]
    fn params_json_keys() {
        let p = CounterexampleParams::new(1000.0, 1.0).with_smoothing(0.02);
        let s = serde_json::to_value(p).unwrap();
        let keys: Vec<_> = s.as_object().unwrap().keys().cloned().collect();
        for k in ["a", "rho", "c", "floor_delta", "r_domain", "smoothing_width"] {
            assert!(keys.contains(&k.to_string()), "{k}");
        }
        let back: CounterexampleParams = serde_json::from_value(s).unwrap();
        assert_eq!(back, p);
    }
}
