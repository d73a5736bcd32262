//! Quadrature rules shared by every integral in the crate.
//!
//! * inner integrals over the scattering direction use the equispaced trapezoid
//!   rule on the unit circle, optionally rotated by a fraction of a node step;
//! * outer integrals over `v` use radial panels whose edges include every
//!   breakpoint and critical radius, Gauss-Legendre nodes inside each panel,
//!   and equispaced angles;
//! * mollified kernels integrate `v_*` on a local polar grid around `v`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::velocity::Velocity;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Unit vectors `(cos 2 pi k / n, sin 2 pi k / n)`.
#[derive(Debug, Clone)]
pub struct CircleNodes {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl CircleNodes {
    pub fn new(n: usize) -> Self {
        let (sin, cos) = (0..n)
            .map(|k| {
                // exact values on the axes keep the 8-fold symmetry bit-exact
                match (4 * k) % n == 0 {
                    true => match (4 * k) / n {
                        0 => (0.0, 1.0),
                        1 => (1.0, 0.0),
                        2 => (0.0, -1.0),
                        _ => (-1.0, 0.0),
                    },
                    false => (2.0 * PI * k as f64 / n as f64).sin_cos(),
                }
            })
            .unzip();
        CircleNodes { cos, sin }
    }

    pub fn len(&self) -> usize {
        self.cos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cos.is_empty()
    }

    /// Rotation that shifts every node by `phase` node steps.
    pub fn phase_rotation(&self, phase: f64) -> (f64, f64) {
        if phase == 0.0 {
            return (1.0, 0.0);
        }
        let (s, c) = (2.0 * PI * phase / self.len() as f64).sin_cos();
        (c, s)
    }

    #[inline]
    pub fn node(&self, k: usize, rot: (f64, f64)) -> Velocity {
        Velocity::new(self.cos[k], self.sin[k]).rotate(rot.0, rot.1)
    }
}

/// Trapezoid mean of a periodic function over `[0, 2 pi)`.
pub fn circle_mean(n: usize, mut g: impl FnMut(f64) -> f64) -> f64 {
    let mut s = 0.0;
    for k in 0..n {
        s += g(2.0 * PI * k as f64 / n as f64);
    }
    s / n as f64
}

/// Node counts for the mollified-kernel double integral over `v_*` and `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifiedQuadrature {
    /// Trapezoid nodes for the direction of `v_* - v`.
    pub n_psi: usize,
    /// Gauss-Legendre nodes across the radial bump.
    pub n_r: usize,
    /// Gauss-Legendre nodes across one angular window.
    pub n_theta: usize,
}

impl Default for MollifiedQuadrature {
    fn default() -> Self {
        MollifiedQuadrature {
            n_psi: 512,
            n_r: 6,
            n_theta: 6,
        }
    }
}

/// One node of the outer integral over `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterPoint {
    pub v: Velocity,
    pub radius: f64,
    pub weight: f64,
    /// Rotation of the inner circle nodes, in node steps.
    pub phase: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorQuadrature {
    pub n_sigma: usize,
    /// Maximum radial panel width of the outer integral.
    pub shell_spacing: f64,
    pub n_radial_gauss: usize,
    pub n_angular_outer: usize,
    pub mollified: MollifiedQuadrature,
    /// Radii that must coincide with panel edges.
    pub forced_edges: Vec<f64>,
    /// Rotate the circle nodes of each outer point by a low-discrepancy phase.
    pub dither: bool,
}

impl OperatorQuadrature {
    pub fn new(n_sigma: usize, shell_spacing: f64) -> Result<Self> {
        let q = OperatorQuadrature {
            n_sigma,
            shell_spacing,
            n_radial_gauss: 2,
            n_angular_outer: 4,
            mollified: MollifiedQuadrature::default(),
            forced_edges: Vec::new(),
            dither: true,
        };
        q.validate()?;
        Ok(q)
    }

    /// Defaults for counterexample-shaped densities with feature width `rho`.
    pub fn for_rho(rho: f64, forced_edges: Vec<f64>) -> Self {
        OperatorQuadrature {
            n_sigma: 2048,
            shell_spacing: rho / 10.0,
            n_radial_gauss: 2,
            n_angular_outer: 4,
            mollified: MollifiedQuadrature::default(),
            forced_edges,
            dither: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sigma < 16 || !self.n_sigma.is_multiple_of(4) {
            return Err(Error::invalid(
                "n_sigma",
                format!("need a multiple of 4 that is >= 16, got {}", self.n_sigma),
            ));
        }
        if !(self.shell_spacing.is_finite() && self.shell_spacing > 0.0) {
            return Err(Error::invalid("shell_spacing", format!("{}", self.shell_spacing)));
        }
        if self.n_radial_gauss == 0 || self.n_angular_outer == 0 {
            return Err(Error::invalid("outer_nodes", "need at least one node"));
        }
        let m = self.mollified;
        if m.n_psi < 4 || m.n_r == 0 || m.n_theta == 0 {
            return Err(Error::invalid("mollified_nodes", format!("{m:?}")));
        }
        Ok(())
    }

    pub fn with_n_sigma(mut self, n: usize) -> Self {
        self.n_sigma = n;
        self
    }

    pub fn with_angular_outer(mut self, n: usize) -> Self {
        self.n_angular_outer = n;
        self
    }

    pub fn with_dither(mut self, dither: bool) -> Self {
        self.dither = dither;
        self
    }

    /// Uniform refinement by `factor`: node counts multiply, panel widths divide.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid("quad_scale", format!("{factor}")));
        }
        let mul = |n: usize| ((n as f64 * factor).round() as usize).max(1);
        let n_sigma = (((self.n_sigma as f64 * factor) / 4.0).round() as usize * 4).max(16);
        let q = OperatorQuadrature {
            n_sigma,
            shell_spacing: self.shell_spacing / factor,
            n_radial_gauss: self.n_radial_gauss,
            n_angular_outer: mul(self.n_angular_outer),
            mollified: MollifiedQuadrature {
                n_psi: mul(self.mollified.n_psi).max(4),
                n_r: mul(self.mollified.n_r),
                n_theta: mul(self.mollified.n_theta),
            },
            forced_edges: self.forced_edges.clone(),
            dither: self.dither,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn circle(&self) -> CircleNodes {
        CircleNodes::new(self.n_sigma)
    }

    /// Panel edges of the outer radial integral on `[0, r_max]`.
    pub fn polar_radii(&self, r_max: f64) -> Vec<f64> {
        let mut fixed: Vec<f64> = self
            .forced_edges
            .iter()
            .copied()
            .filter(|&r| r > 0.0 && r < r_max)
            .collect();
        fixed.push(0.0);
        fixed.push(r_max);
        fixed.sort_by(f64::total_cmp);
        fixed.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut edges = vec![0.0];
        for w in fixed.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let n = ((hi - lo) / self.shell_spacing).ceil().max(1.0) as usize;
            for k in 1..n {
                edges.push(lo + (hi - lo) * k as f64 / n as f64);
            }
            edges.push(hi);
        }
        edges
    }

    /// Nodes of the outer integral over the disk of radius `r_max`.
    pub fn outer_points(&self, r_max: f64) -> Vec<OuterPoint> {
        let edges = self.polar_radii(r_max);
        let (gx, gw) = gauss_legendre(self.n_radial_gauss);
        let n_ang = self.n_angular_outer;
        let dpsi = 2.0 * PI / n_ang as f64;
        let mut pts = Vec::with_capacity((edges.len() - 1) * gx.len() * n_ang);
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, wg) in gx.iter().zip(&gw) {
                let r = mid + half * x;
                let radial_weight = wg * half * r;
                for j in 0..n_ang {
                    let idx = pts.len();
                    let psi = dpsi * (j as f64 + 0.5);
                    let phase = if self.dither {
                        ((idx + 1) as f64 * GOLDEN).fract()
                    } else {
                        0.0
                    };
                    pts.push(OuterPoint {
                        v: Velocity::from_polar(r, psi),
                        radius: r,
                        weight: radial_weight * dpsi,
                        phase,
                    });
                }
            }
        }
        pts
    }

    /// Integral over the disk of radius `r_max` by the outer rule.
    pub fn integrate_disk(&self, r_max: f64, g: impl Fn(Velocity) -> f64) -> f64 {
        self.outer_points(r_max)
            .iter()
            .map(|p| p.weight * g(p.v))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "n {n} deg {deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn circle_trapezoid_converges_spectrally_on_gaussian() {
        // Gaussian bump on the circle centered off-axis
        let g = |t: f64| (-(2.0 * (t.cos() - 0.3)).powi(2) - (t.sin() + 0.2).powi(2)).exp();
        let a = circle_mean(64, g);
        let b = circle_mean(128, g);
        assert!((a - b).abs() < 1e-8, "{a} {b}");
    }

    #[test]
    fn disk_area_and_second_moment() {
        let q = OperatorQuadrature::for_rho(0.1, vec![0.1, 1.0, 5.0]);
        let area = q.integrate_disk(8.0, |_| 1.0);
        assert!((area - PI * 64.0).abs() < 1e-10 * area);
        let m2 = q.integrate_disk(8.0, |v| v.norm_sq());
        assert!((m2 - PI * 8f64.powi(4) / 2.0).abs() < 1e-10 * m2);
    }

    #[test]
    fn forced_edges_are_panel_edges() {
        let q = OperatorQuadrature::for_rho(0.1, vec![0.1, 2f64.sqrt(), 5.0]);
        let e = q.polar_radii(8.0);
        for r in [0.1, 2f64.sqrt(), 5.0, 8.0] {
            assert!(e.contains(&r), "{r}");
        }
        assert!(e.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.01 + 1e-12));
    }

    #[test]
    fn axis_nodes_exact() {
        let c = CircleNodes::new(16);
        assert_eq!((c.cos[4], c.sin[4]), (0.0, 1.0));
        assert_eq!((c.cos[8], c.sin[8]), (-1.0, 0.0));
        assert!(OperatorQuadrature::new(18, 0.01).is_err());
        assert!(OperatorQuadrature::new(12, 0.01).is_err());
    }
}
