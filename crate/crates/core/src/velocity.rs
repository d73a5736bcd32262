use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the velocity plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity {
    pub x: f64,
    pub y: f64,
}

impl Velocity {
    pub const ZERO: Velocity = Velocity { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Velocity { x, y }
    }

    /// Rejects NaN and infinite components.
    pub fn checked(x: f64, y: f64) -> Result<Self> {
        if x.is_finite() && y.is_finite() {
            Ok(Velocity { x, y })
        } else {
            Err(Error::NonFiniteVelocity { x, y })
        }
    }

    pub fn from_polar(r: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Velocity::new(r * c, r * s)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dot(self, other: Velocity) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Counterclockwise rotation by a right angle.
    #[inline]
    pub fn perp(self) -> Velocity {
        Velocity::new(-self.y, self.x)
    }

    #[inline]
    pub fn rotate(self, cos: f64, sin: f64) -> Velocity {
        Velocity::new(cos * self.x - sin * self.y, sin * self.x + cos * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Velocity {
    type Output = Velocity;
    #[inline]
    fn add(self, o: Velocity) -> Velocity {
        Velocity::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Velocity {
    type Output = Velocity;
    #[inline]
    fn sub(self, o: Velocity) -> Velocity {
        Velocity::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Velocity {
    type Output = Velocity;
    #[inline]
    fn mul(self, k: f64) -> Velocity {
        Velocity::new(self.x * k, self.y * k)
    }
}

impl Neg for Velocity {
    type Output = Velocity;
    #[inline]
    fn neg(self) -> Velocity {
        Velocity::new(-self.x, -self.y)
    }
}
