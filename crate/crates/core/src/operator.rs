//! Gain, loss and the full collision operator, pointwise and on grids.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Moments, ScalarGridField};
use crate::kernel::{CollisionKernel, KernelSpec, MollifiedKernel, SingularKernel, SquareConfiguration};
use crate::profile::Density;
use crate::quadrature::{gauss_legendre, CircleNodes, OperatorQuadrature};
use crate::velocity::Velocity;

/// Everything the diagnostics need at one velocity.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointSample {
    pub f: f64,
    pub q_gain: f64,
    pub q_loss: f64,
    /// The potential `L(v)`; zero unless logs were requested.
    pub l: f64,
    /// `1/4` of the inner integral of `(f'f'_* - f f_*) log(f'f'_* / (f f_*))`.
    pub d_sym: f64,
    /// Smallest symmetrized-integrand sample seen at this point.
    pub min_sym_sample: f64,
}

impl PointSample {
    #[inline]
    pub fn q(&self) -> f64 {
        self.q_gain - self.q_loss
    }
}

/// Which inner integrals to accumulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    /// Gain and loss only.
    Collision,
    /// Also the potential and the symmetrized production, which need `log f`.
    WithLogs,
}

/// Precomputed node tables for one kernel and quadrature.
#[derive(Debug, Clone)]
pub struct InnerRule {
    kernel: CollisionKernel,
    circle: CircleNodes,
    psi: CircleNodes,
    r_nodes: Vec<(f64, f64)>,
    theta_nodes: Vec<(f64, f64, f64)>,
}

impl InnerRule {
    pub fn new(kernel: &CollisionKernel, quad: &OperatorQuadrature) -> Self {
        let (psi, r_nodes, theta_nodes) = match kernel {
            CollisionKernel::Mollified(k) => {
                let m = quad.mollified;
                let (xr, wr) = gauss_legendre(m.n_r);
                let r_nodes = xr
                    .iter()
                    .zip(&wr)
                    .map(|(x, w)| {
                        let r = k.r0 + k.eps_r * x;
                        (r, w * k.eps_r * k.radial_density(r))
                    })
                    .collect();
                let (xt, wt) = gauss_legendre(m.n_theta);
                // both windows carry identical integrands (they swap v' and v'_*),
                // so one window with the full angular mass suffices
                let theta_nodes = xt
                    .iter()
                    .zip(&wt)
                    .map(|(x, w)| {
                        let th = PI / 2.0 + k.eps_theta * x;
                        let weight = w * k.eps_theta * crate::kernel::bump(th - PI / 2.0, k.eps_theta);
                        (th.cos(), th.sin(), weight)
                    })
                    .collect();
                (CircleNodes::new(m.n_psi), r_nodes, theta_nodes)
            }
            CollisionKernel::Singular(_) => (CircleNodes::new(4), Vec::new(), Vec::new()),
        };
        InnerRule {
            kernel: *kernel,
            circle: quad.circle(),
            psi,
            r_nodes,
            theta_nodes,
        }
    }

    pub fn kernel(&self) -> &CollisionKernel {
        &self.kernel
    }

    /// Calls `visit(weight, v', v'_*, v_*)` for every quadrature configuration at `v`.
    #[inline]
    fn for_each<F: FnMut(f64, Velocity, Velocity, Velocity)>(&self, v: Velocity, phase: f64, mut visit: F) {
        match &self.kernel {
            CollisionKernel::Singular(SingularKernel { weight, side }) => {
                let n = self.circle.len();
                let w = weight / n as f64;
                let rot = self.circle.phase_rotation(phase);
                for k in 0..n {
                    let sigma = self.circle.node(k, rot);
                    let sq = SquareConfiguration::scaled(v, sigma, *side);
                    visit(w, sq.v_prime, sq.v_star_prime, sq.v_star);
                }
            }
            CollisionKernel::Mollified(MollifiedKernel { weight, .. }) => {
                let n = self.psi.len();
                let w_psi = weight / n as f64;
                let rot = self.psi.phase_rotation(phase);
                for k in 0..n {
                    let e = self.psi.node(k, rot);
                    // unit vector along v - v_*
                    let u = -e;
                    for &(r, wr) in &self.r_nodes {
                        let v_star = v + e * r;
                        let mid = v + e * (0.5 * r);
                        let half = 0.5 * r;
                        for &(c, s, wt) in &self.theta_nodes {
                            let sigma = u.rotate(c, s);
                            visit(w_psi * wr * wt, mid + sigma * half, mid - sigma * half, v_star);
                        }
                    }
                }
            }
        }
    }

    /// Inner integrals at `v`.
    pub fn sample<D: Density + ?Sized>(
        &self,
        f: &D,
        v: Velocity,
        phase: f64,
        needs: Needs,
    ) -> Result<PointSample> {
        let fv = f.eval(v);
        let mut gain = 0.0;
        let mut loss = 0.0;
        let mut l = 0.0;
        let mut dsym = 0.0;
        let mut min_sym = f64::INFINITY;
        let mut bad = false;
        match needs {
            Needs::Collision => self.for_each(v, phase, |w, vp, vps, vs| {
                gain += w * f.eval(vp) * f.eval(vps);
                loss += w * f.eval(vs);
            }),
            Needs::WithLogs => self.for_each(v, phase, |w, vp, vps, vs| {
                let fs = f.eval(vs);
                let x = f.eval(vp) * f.eval(vps);
                let y = fv * fs;
                gain += w * x;
                loss += w * fs;
                if fs > 0.0 {
                    if x > 0.0 && fv > 0.0 {
                        l += w * fs * (y / x).ln();
                    } else {
                        bad = true;
                    }
                }
                let sample = if x > 0.0 && y > 0.0 {
                    (x - y) * (x / y).ln()
                } else if x == 0.0 && y == 0.0 {
                    0.0
                } else {
                    bad = true;
                    0.0
                };
                dsym += w * sample;
                min_sym = min_sym.min(sample);
            }),
        }
        if bad {
            return Err(Error::ZeroDensity { x: v.x, y: v.y });
        }
        let s = PointSample {
            f: fv,
            q_gain: gain,
            q_loss: fv * loss,
            l,
            d_sym: 0.25 * dsym,
            min_sym_sample: if needs == Needs::WithLogs { min_sym } else { 0.0 },
        };
        if !(s.q_gain.is_finite() && s.q_loss.is_finite() && s.l.is_finite() && s.d_sym.is_finite()) {
            return Err(Error::NonFinite("collision integrals"));
        }
        Ok(s)
    }
}

fn singular_rule(quad: &OperatorQuadrature, weight: f64) -> InnerRule {
    InnerRule::new(
        &CollisionKernel::Singular(SingularKernel { weight, side: 1.0 }),
        quad,
    )
}

/// `W * mean_sigma f(v + sigma) f(v + sigma_perp)`.
pub fn q_gain_singular<D: Density + ?Sized>(f: &D, v: Velocity, quad: &OperatorQuadrature, weight: f64) -> f64 {
    singular_rule(quad, weight)
        .sample(f, v, 0.0, Needs::Collision)
        .map(|s| s.q_gain)
        .unwrap_or(f64::NAN)
}

/// `W * f(v) * mean_sigma f(v + sigma + sigma_perp)`.
pub fn q_loss_singular<D: Density + ?Sized>(f: &D, v: Velocity, quad: &OperatorQuadrature, weight: f64) -> f64 {
    singular_rule(quad, weight)
        .sample(f, v, 0.0, Needs::Collision)
        .map(|s| s.q_loss)
        .unwrap_or(f64::NAN)
}

pub fn q_singular<D: Density + ?Sized>(f: &D, v: Velocity, quad: &OperatorQuadrature, weight: f64) -> f64 {
    singular_rule(quad, weight)
        .sample(f, v, 0.0, Needs::Collision)
        .map(|s| s.q())
        .unwrap_or(f64::NAN)
}

/// Full double-integral collision operator for a bump kernel.
pub fn q_mollified<D: Density + ?Sized>(
    f: &D,
    v: Velocity,
    kernel: &KernelSpec,
    quad: &OperatorQuadrature,
) -> Result<f64> {
    let k = kernel.collision_kernel()?;
    if matches!(k, CollisionKernel::Singular(_)) {
        return Err(Error::UnsupportedKernel(
            "q_mollified needs bump kernels; use q_singular for Dirac kernels".into(),
        ));
    }
    Ok(InnerRule::new(&k, quad).sample(f, v, 0.0, Needs::Collision)?.q())
}

/// Gain and loss at `v` for any kernel form.
pub fn q_point<D: Density + ?Sized>(
    f: &D,
    v: Velocity,
    kernel: &KernelSpec,
    quad: &OperatorQuadrature,
) -> Result<(f64, f64)> {
    let rule = InnerRule::new(&kernel.collision_kernel()?, quad);
    let s = rule.sample(f, v, 0.0, Needs::Collision)?;
    Ok((s.q_gain, s.q_loss))
}

/// Collision operator at every node inside the domain disk; zero outside.
///
/// Off-node values come from the attached analytic profile when there is one,
/// and from bilinear interpolation otherwise.
pub fn q_on_grid(
    field: &ScalarGridField,
    quad: &OperatorQuadrature,
    kernel: &KernelSpec,
) -> Result<ScalarGridField> {
    let rule = InnerRule::new(&kernel.collision_kernel()?, quad);
    q_on_grid_with(field, &rule)
}

pub(crate) fn q_on_grid_with(field: &ScalarGridField, rule: &InnerRule) -> Result<ScalarGridField> {
    let n = field.spec.n_per_axis;
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            for (j, out) in row.iter_mut().enumerate() {
                if !field.in_domain(i, j) {
                    continue;
                }
                let v = field.spec.node(i, j);
                let s = match &field.analytic {
                    Some(p) => rule.sample(p, v, 0.0, Needs::Collision)?,
                    None => rule.sample(field, v, 0.0, Needs::Collision)?,
                };
                *out = s.q();
            }
            Ok(row)
        })
        .collect();
    let mut values = Vec::with_capacity(n * n);
    for row in rows {
        values.extend(row?);
    }
    Ok(ScalarGridField {
        spec: field.spec,
        values,
        floor: 0.0,
        r_domain: field.r_domain,
        analytic: None,
    })
}

/// Node-sum integrals of `Q`, `Q v` and `Q |v|^2`.
pub fn collision_moments(q_field: &ScalarGridField) -> Moments {
    q_field.moments()
}

/// Signed collision rates together with the matching integrals of `|Q|`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CollisionRates {
    pub mass_rate: f64,
    pub momentum_rate: [f64; 2],
    pub energy_rate: f64,
    pub abs_mass: f64,
    pub abs_momentum: f64,
    pub abs_energy: f64,
}

impl CollisionRates {
    pub fn relative_mass(&self) -> f64 {
        self.mass_rate.abs() / self.abs_mass
    }
    pub fn relative_momentum(&self) -> f64 {
        self.momentum_rate[0].hypot(self.momentum_rate[1]) / self.abs_momentum
    }
    pub fn relative_energy(&self) -> f64 {
        self.energy_rate.abs() / self.abs_energy
    }
}

/// Collision rates by the outer polar rule over the density's domain disk.
pub fn collision_moments_polar<D: Density + ?Sized>(
    f: &D,
    quad: &OperatorQuadrature,
    kernel: &KernelSpec,
) -> Result<CollisionRates> {
    let rule = InnerRule::new(&kernel.collision_kernel()?, quad);
    let pts = quad.outer_points(f.domain_radius());
    let qs: Vec<Result<f64>> = pts
        .par_iter()
        .map(|p| Ok(rule.sample(f, p.v, p.phase, Needs::Collision)?.q()))
        .collect();
    let mut r = CollisionRates::default();
    for (p, q) in pts.iter().zip(qs) {
        let q = q?;
        let wq = p.weight * q;
        r.mass_rate += wq;
        r.momentum_rate[0] += wq * p.v.x;
        r.momentum_rate[1] += wq * p.v.y;
        r.energy_rate += wq * p.v.norm_sq();
        r.abs_mass += wq.abs();
        r.abs_momentum += wq.abs() * p.v.norm();
        r.abs_energy += wq.abs() * p.v.norm_sq();
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{build_counterexample, CounterexampleParams, Maxwellian, RadialStepProfile};

    fn quad() -> OperatorQuadrature {
        OperatorQuadrature::new(256, 0.05).unwrap()
    }

    #[test]
    fn gain_and_loss_at_origin() {
        let p = build_counterexample(&CounterexampleParams::new(30.0, 0.2).with_floor(0.0)).unwrap();
        let q = quad();
        assert_eq!(q_gain_singular(&p, Velocity::ZERO, &q, 1.0), 1.0);
        assert!((q_loss_singular(&p, Velocity::ZERO, &q, 1.0) - 0.2 * 900.0).abs() < 1e-9);
        assert!((q_singular(&p, Velocity::ZERO, &q, 2.0) - 2.0 * (1.0 - 180.0)).abs() < 1e-9);
    }

    #[test]
    fn constant_density() {
        let p = RadialStepProfile::new(vec![50.0], vec![3.0], 0.0, 0.0).unwrap();
        let q = quad();
        let v = Velocity::new(0.3, -1.1);
        assert!((q_gain_singular(&p, v, &q, 1.0) - 9.0).abs() < 1e-12);
        assert!((q_loss_singular(&p, v, &q, 1.0) - 9.0).abs() < 1e-12);
        let m = q_mollified(&p, v, &KernelSpec::mollified(0.05, 0.05), &q).unwrap();
        assert!(m.abs() < 1e-10, "{m}");
    }

    #[test]
    fn maxwellian_is_annihilated() {
        let g = Maxwellian::standard();
        let q = quad();
        for k in 0..20 {
            let v = Velocity::from_polar(0.2 * k as f64, 0.7 * k as f64);
            let f = g.eval(v);
            assert!(q_singular(&g, v, &q, 1.0).abs() <= 1e-8 * f.max(1e-300) + 1e-300);
            let m = q_mollified(&g, v, &KernelSpec::mollified(0.05, 0.05), &q).unwrap();
            assert!(m.abs() <= 1e-6, "{m}");
        }
    }

    #[test]
    fn q_mollified_rejects_dirac() {
        let g = Maxwellian::standard();
        assert!(q_mollified(&g, Velocity::ZERO, &KernelSpec::singular(), &quad()).is_err());
    }

    #[test]
    fn zero_density_with_logs_is_an_error() {
        let p = build_counterexample(&CounterexampleParams::new(10.0, 1.0).with_floor(0.0)).unwrap();
        let rule = InnerRule::new(&KernelSpec::singular().collision_kernel().unwrap(), &quad());
        let r = rule.sample(&p, Velocity::new(5.5, 0.0), 0.0, Needs::WithLogs);
        assert!(matches!(r, Err(Error::ZeroDensity { .. })));
        assert!(rule.sample(&p, Velocity::new(5.5, 0.0), 0.0, Needs::Collision).is_ok());
    }
}
