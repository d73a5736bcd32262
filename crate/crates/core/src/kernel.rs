//! Product collision kernels `Phi(|v - v_*|) b(cos theta)` and the collision geometry.
//!
//! The singular kernel puts a Dirac mass on `theta = +-pi/2` and on `|v - v_*| = r0`.
//! With `r0 = sqrt(2)` every admissible collision has its four velocities on a
//! square of side one, and the collision integral reduces to an integral over
//! the side direction `sigma` on the unit circle (see [`square_configuration`]).
//!
//! Mollified kernels replace both Dirac masses by the bump `(1 - u^2)^2` on a
//! window of half-width `eps`, normalized so the kernel carries the same total
//! weight `W` as the singular measure.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::velocity::Velocity;

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngularPart {
    /// Equal mass on `theta = pi/2` and `theta = -pi/2`.
    DiracPerpendicular,
    AngularBump { eps_theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialPart {
    DiracAt {
        #[serde(default = "default_r0")]
        r0: f64,
    },
    RadialBump { r0: f64, eps_r: f64 },
}

fn default_r0() -> f64 {
    SQRT_2
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub angular: AngularPart,
    pub radial: RadialPart,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::singular()
    }
}

impl KernelSpec {
    /// Dirac masses at `theta = +-pi/2` and `r = sqrt(2)`, weight 1.
    pub fn singular() -> Self {
        KernelSpec {
            angular: AngularPart::DiracPerpendicular,
            radial: RadialPart::DiracAt { r0: SQRT_2 },
            weight: 1.0,
        }
    }

    pub fn mollified(eps_r: f64, eps_theta: f64) -> Self {
        KernelSpec {
            angular: AngularPart::AngularBump { eps_theta },
            radial: RadialPart::RadialBump { r0: SQRT_2, eps_r },
            weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(Error::invalid("kernel_weight", format!("{}", self.weight)));
        }
        match self.radial {
            RadialPart::DiracAt { r0 } => {
                if !(r0.is_finite() && r0 > 0.0) {
                    return Err(Error::invalid("kernel_r0", format!("{r0}")));
                }
            }
            RadialPart::RadialBump { r0, eps_r } => {
                if !(r0.is_finite() && eps_r.is_finite() && eps_r > 0.0 && eps_r < r0) {
                    return Err(Error::invalid(
                        "kernel_radial_bump",
                        format!("need 0 < eps_r < r0, got r0 {r0}, eps_r {eps_r}"),
                    ));
                }
            }
        }
        if let AngularPart::AngularBump { eps_theta } = self.angular {
            if !(eps_theta.is_finite() && eps_theta > 0.0 && eps_theta < PI / 2.0) {
                return Err(Error::invalid(
                    "kernel_angular_bump",
                    format!("need 0 < eps_theta < pi/2, got {eps_theta}"),
                ));
            }
        }
        Ok(())
    }

    pub fn is_singular(&self) -> bool {
        matches!(
            (self.angular, self.radial),
            (AngularPart::DiracPerpendicular, RadialPart::DiracAt { .. })
        )
    }

    pub fn r0(&self) -> f64 {
        match self.radial {
            RadialPart::DiracAt { r0 } | RadialPart::RadialBump { r0, .. } => r0,
        }
    }

    /// Resolves the spec into the evaluable form.
    pub fn collision_kernel(&self) -> Result<CollisionKernel> {
        self.validate()?;
        match (self.angular, self.radial) {
            (AngularPart::DiracPerpendicular, RadialPart::DiracAt { r0 }) => {
                Ok(CollisionKernel::Singular(SingularKernel {
                    weight: self.weight,
                    side: r0 / SQRT_2,
                }))
            }
            (AngularPart::AngularBump { eps_theta }, RadialPart::RadialBump { r0, eps_r }) => {
                Ok(CollisionKernel::Mollified(MollifiedKernel {
                    weight: self.weight,
                    r0,
                    eps_r,
                    eps_theta,
                }))
            }
            _ => Err(Error::UnsupportedKernel(
                "mixed Dirac/bump kernels; use both Dirac or both bump factors".into(),
            )),
        }
    }
}

/// Square-configuration kernel: `Q(v) = W * mean over sigma of (f' f'_* - f f_*)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularKernel {
    pub weight: f64,
    /// Side of the collision square, `r0 / sqrt(2)`.
    pub side: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifiedKernel {
    pub weight: f64,
    pub r0: f64,
    pub eps_r: f64,
    pub eps_theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollisionKernel {
    Singular(SingularKernel),
    Mollified(MollifiedKernel),
}

impl CollisionKernel {
    pub fn weight(&self) -> f64 {
        match self {
            CollisionKernel::Singular(k) => k.weight,
            CollisionKernel::Mollified(k) => k.weight,
        }
    }
}

/// Integral of `(1 - u^2)^2` over `[-1, 1]`.
const BUMP_MASS: f64 = 16.0 / 15.0;

/// Unit-mass bump of half-width `eps` centered at zero.
#[inline]
pub fn bump(x: f64, eps: f64) -> f64 {
    let u = x / eps;
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let w = 1.0 - u * u;
    w * w / (BUMP_MASS * eps)
}

impl MollifiedKernel {
    /// Radial profile normalized so that `int phi_r(r) dr = 1`.
    #[inline]
    pub fn radial_density(&self, r: f64) -> f64 {
        bump(r - self.r0, self.eps_r)
    }

    /// Angular profile over the full circle, normalized to 1, split equally
    /// between the windows at `+pi/2` and `-pi/2`.
    #[inline]
    pub fn angular_density(&self, theta: f64) -> f64 {
        0.5 * (bump(theta - PI / 2.0, self.eps_theta) + bump(theta + PI / 2.0, self.eps_theta))
    }

    /// `B(r, cos theta)` as a density with respect to `dsigma dv_*`.
    pub fn eval(&self, r: f64, cos_theta: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let theta = cos_theta.clamp(-1.0, 1.0).acos();
        self.weight * self.radial_density(r) / (2.0 * PI * r) * self.angular_density(theta)
    }
}

/// Pointwise kernel density; only defined for mollified kernels.
pub fn kernel_eval(kernel: &KernelSpec, r: f64, cos_theta: f64) -> Result<f64> {
    match kernel.collision_kernel()? {
        CollisionKernel::Mollified(k) => Ok(k.eval(r, cos_theta)),
        CollisionKernel::Singular(_) => Err(Error::NoPointwiseDensity),
    }
}

fn check_unit(sigma: Velocity) -> Result<()> {
    let norm = sigma.norm();
    if !sigma.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitSigma { norm });
    }
    Ok(())
}

fn check_finite(v: Velocity) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteVelocity { x: v.x, y: v.y })
    }
}

/// Post-collision pair `(v', v'_*)` for scattering direction `sigma`.
pub fn post_collision_velocities(
    v: Velocity,
    v_star: Velocity,
    sigma: Velocity,
) -> Result<(Velocity, Velocity)> {
    check_unit(sigma)?;
    check_finite(v)?;
    check_finite(v_star)?;
    Ok(post_collision_unchecked(v, v_star, sigma))
}

#[inline]
pub(crate) fn post_collision_unchecked(
    v: Velocity,
    v_star: Velocity,
    sigma: Velocity,
) -> (Velocity, Velocity) {
    let mid = (v + v_star) * 0.5;
    let half = 0.5 * (v - v_star).norm();
    (mid + sigma * half, mid - sigma * half)
}

/// Four velocities of a collision square, in cyclic order `v, v', v_*, v'_*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareConfiguration {
    pub v: Velocity,
    pub v_prime: Velocity,
    pub v_star: Velocity,
    pub v_star_prime: Velocity,
}

impl SquareConfiguration {
    /// Square with corner `v` and sides `side * sigma`, `side * sigma_perp`.
    #[inline]
    pub fn scaled(v: Velocity, sigma: Velocity, side: f64) -> Self {
        let s = sigma * side;
        let p = sigma.perp() * side;
        SquareConfiguration {
            v,
            v_prime: v + s,
            v_star: v + (s + p),
            v_star_prime: v + p,
        }
    }

    pub fn vertices(&self) -> [Velocity; 4] {
        [self.v, self.v_prime, self.v_star, self.v_star_prime]
    }
}

/// Unit square spanned from `v` by `sigma` and its counterclockwise perpendicular.
pub fn square_configuration(v: Velocity, sigma: Velocity) -> Result<SquareConfiguration> {
    check_unit(sigma)?;
    check_finite(v)?;
    Ok(SquareConfiguration::scaled(v, sigma, 1.0))
}
