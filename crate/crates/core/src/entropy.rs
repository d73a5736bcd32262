//! Entropy, entropy production in its two forms, the potential `L` and the
//! time derivative of the entropy production split into its negative part
//! `-int Q^2 / f` and its indefinite part `int Q L`.

use std::f64::consts::SQRT_2;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::operator::{InnerRule, Needs, PointSample};
use crate::profile::{critical_radii, ring_radius, Density, R_OUTER};
use crate::quadrature::{OperatorQuadrature, OuterPoint};
use crate::velocity::Velocity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    InnerBall,
    Ring1,
    RingSqrt2,
    Ring2Sqrt2,
    RingSqrt5,
    Bulk,
    Vacuum,
}

impl Region {
    pub const ALL: [Region; 7] = [
        Region::InnerBall,
        Region::Ring1,
        Region::RingSqrt2,
        Region::Ring2Sqrt2,
        Region::RingSqrt5,
        Region::Bulk,
        Region::Vacuum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Region::InnerBall => "inner_ball",
            Region::Ring1 => "ring_1",
            Region::RingSqrt2 => "ring_sqrt2",
            Region::Ring2Sqrt2 => "ring_2sqrt2",
            Region::RingSqrt5 => "ring_sqrt5",
            Region::Bulk => "bulk",
            Region::Vacuum => "vacuum",
        }
    }

    /// Regions inside the support, where the sharp counterexample is at least 1.
    pub fn in_support(self) -> bool {
        self != Region::Vacuum
    }
}

/// Named annuli of the counterexample geometry.
///
/// Overlapping rings (possible for large `rho`) are resolved by the order
/// inner ball, `sqrt 2`, `sqrt 5`, `1`, `2 sqrt 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusDecomposition {
    pub rho: f64,
    pub r_outer: f64,
    pub r_domain: f64,
    /// Extra half-width on every feature, normally the profile's smoothing width.
    #[serde(default)]
    pub margin: f64,
}

impl AnnulusDecomposition {
    pub fn new(rho: f64, r_domain: f64) -> Self {
        AnnulusDecomposition {
            rho,
            r_outer: R_OUTER,
            r_domain,
            margin: 0.0,
        }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    /// Nominal bounds; a radius on a bound belongs to the inner region, as in the profiles.
    pub fn bounds(&self, region: Region) -> (f64, f64) {
        let (rho, m) = (self.rho, self.margin);
        let ring = |c: f64, w: f64| (c - w - m, c + w + m);
        match region {
            Region::InnerBall => (0.0, rho + m),
            Region::Ring1 => ring(1.0, rho),
            Region::RingSqrt2 => ring(SQRT_2, rho),
            Region::Ring2Sqrt2 => ring(2.0 * SQRT_2, rho),
            Region::RingSqrt5 => ring(ring_radius(), 2.0 * rho),
            Region::Bulk => (rho + m, self.r_outer + m),
            Region::Vacuum => (self.r_outer + m, self.r_domain),
        }
    }

    pub fn classify(&self, r: f64) -> Region {
        let inside = |reg: Region| {
            let (lo, hi) = self.bounds(reg);
            (r > lo || lo == 0.0) && r <= hi
        };
        for reg in [
            Region::InnerBall,
            Region::RingSqrt2,
            Region::RingSqrt5,
            Region::Ring1,
            Region::Ring2Sqrt2,
        ] {
            if inside(reg) {
                return reg;
            }
        }
        if r <= self.r_outer + self.margin {
            Region::Bulk
        } else {
            Region::Vacuum
        }
    }

    /// Every region bound and counterexample breakpoint, for aligning quadrature panels.
    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = Region::ALL
            .iter()
            .flat_map(|&r| {
                let (lo, hi) = self.bounds(r);
                [lo, hi]
            })
            .chain(
                critical_radii(self.rho)
                    .into_iter()
                    .flat_map(|r| [r - self.margin, r, r + self.margin]),
            )
            .filter(|&r| r > 0.0 && r <= self.r_domain)
            .collect();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureFingerprint {
    pub n_sigma: usize,
    pub shell_spacing: f64,
    pub n_radial_gauss: usize,
    pub n_angular_outer: usize,
    pub n_outer_points: usize,
}

/// Per-region contributions and extrema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub region: Region,
    pub r_lo: f64,
    pub r_hi: f64,
    /// Region's part of `-int Q^2 / f`.
    pub neg_term: f64,
    /// Region's part of `int Q L`.
    pub pos_term: f64,
    /// Region's part of `-int Q log f`.
    pub d_integrand: f64,
    pub max_qplus: f64,
    pub max_qminus: f64,
    /// Largest `|L|` among the region's quadrature points.
    pub max_l: f64,
    pub share_neg_term: f64,
    pub share_pos_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub entropy_h: f64,
    pub d_direct: f64,
    pub d_symmetric: f64,
    pub dtd_negative_term: f64,
    pub dtd_positive_term: f64,
    pub dtd_total: f64,
    pub floor_delta: f64,
    pub quadrature: QuadratureFingerprint,
    /// Smallest sampled symmetrized-production integrand; never negative.
    pub min_sym_sample: f64,
    pub per_region: Vec<RegionSummary>,
}

impl DiagnosticsReport {
    pub fn region(&self, region: Region) -> &RegionSummary {
        self.per_region
            .iter()
            .find(|r| r.region == region)
            .expect("every region is reported")
    }

    /// `-int Q^2/f` restricted to the support.
    pub fn support_negative_term(&self) -> f64 {
        self.per_region
            .iter()
            .filter(|r| r.region.in_support())
            .map(|r| r.neg_term)
            .sum()
    }

    pub fn write_region_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "region,r_lo,r_hi,max_qplus,max_qminus,max_l,share_neg_term,share_pos_term"
        )?;
        for r in &self.per_region {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.region.name(),
                r.r_lo,
                r.r_hi,
                r.max_qplus,
                r.max_qminus,
                r.max_l,
                r.share_neg_term,
                r.share_pos_term
            )?;
        }
        Ok(())
    }

    /// Checks the qualitative map of where gain, loss and `L` are of order `a^2`.
    ///
    /// `tolerance_factor` multiplies the `a^2 / 10` thresholds and the `1 / log a`
    /// separation of `L`.
    pub fn check_region_map(&self, a: f64, tolerance_factor: f64) -> Result<()> {
        let threshold = tolerance_factor * a * a / 10.0;
        let gain_rings = [Region::Ring1, Region::RingSqrt2, Region::Ring2Sqrt2];
        let loss_rings = [Region::InnerBall, Region::RingSqrt2, Region::RingSqrt5];
        for r in &self.per_region {
            if !gain_rings.contains(&r.region) && r.max_qplus >= threshold {
                return Err(Error::RegionMap(format!(
                    "Q+ = {} >= {threshold} on {}",
                    r.max_qplus,
                    r.region.name()
                )));
            }
            if !loss_rings.contains(&r.region) && r.max_qminus >= threshold {
                return Err(Error::RegionMap(format!(
                    "Q- = {} >= {threshold} on {}",
                    r.max_qminus,
                    r.region.name()
                )));
            }
        }
        let ring_l = self.region(Region::RingSqrt2).max_l;
        let outside = self
            .per_region
            .iter()
            .filter(|r| r.region != Region::RingSqrt2)
            .map(|r| r.max_l)
            .fold(0.0, f64::max);
        if outside > tolerance_factor * ring_l / a.ln() {
            return Err(Error::RegionMap(format!(
                "max |L| outside ring_sqrt2 is {outside}, ring max is {ring_l}"
            )));
        }
        Ok(())
    }
}

fn sample_points<D: Density + ?Sized>(
    f: &D,
    quad: &OperatorQuadrature,
    kernel: &KernelSpec,
    needs: Needs,
) -> Result<(Vec<OuterPoint>, Vec<PointSample>)> {
    quad.validate()?;
    let rule = InnerRule::new(&kernel.collision_kernel()?, quad);
    let pts = quad.outer_points(f.domain_radius());
    let samples: Result<Vec<PointSample>> = pts
        .par_iter()
        .map(|p| rule.sample(f, p.v, p.phase, needs))
        .collect();
    Ok((pts, samples?))
}

#[inline]
fn neg_f_log_f(f: f64) -> f64 {
    if f > 0.0 {
        -f * f.ln()
    } else {
        0.0
    }
}

/// `H(f) = -int f log f` over the domain disk, with `0 log 0 = 0`.
pub fn entropy<D: Density + ?Sized>(f: &D, quad: &OperatorQuadrature) -> f64 {
    quad.outer_points(f.domain_radius())
        .iter()
        .map(|p| p.weight * neg_f_log_f(f.eval(p.v)))
        .sum()
}

/// `D(f) = -int Q log f`.
pub fn entropy_production_direct<D: Density + ?Sized>(
    f: &D,
    quad: &OperatorQuadrature,
    kernel: &KernelSpec,
) -> Result<f64> {
    let (pts, samples) = sample_points(f, quad, kernel, Needs::Collision)?;
    let mut d = 0.0;
    for (p, s) in pts.iter().zip(&samples) {
        d += p.weight * direct_integrand(p.v, s)?;
    }
    Ok(d)
}

fn direct_integrand(v: Velocity, s: &PointSample) -> Result<f64> {
    let q = s.q();
    if s.f > 0.0 {
        Ok(-q * s.f.ln())
    } else if q == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::ZeroDensity { x: v.x, y: v.y })
    }
}

/// Symmetrized production and the smallest integrand sample it saw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricProduction {
    pub value: f64,
    pub min_sample: f64,
}

/// `D(f) = 1/4 int int (f'f'_* - f f_*) log(f'f'_* / (f f_*)) B`.
pub fn entropy_production_symmetric<D: Density + ?Sized>(
    f: &D,
    quad: &OperatorQuadrature,
    kernel: &KernelSpec,
) -> Result<SymmetricProduction> {
    let (pts, samples) = sample_points(f, quad, kernel, Needs::WithLogs)?;
    let mut value = 0.0;
    let mut min_sample = f64::INFINITY;
    for (p, s) in pts.iter().zip(&samples) {
        value += p.weight * s.d_sym;
        min_sample = min_sample.min(s.min_sym_sample);
    }
    Ok(SymmetricProduction { value, min_sample })
}

/// `L(v) = int int f_* log(f f_* / (f' f'_*)) B`.
pub fn l_potential<D: Density + ?Sized>(
    f: &D,
    v: Velocity,
    quad: &OperatorQuadrature,
    kernel: &KernelSpec,
) -> Result<f64> {
    let rule = InnerRule::new(&kernel.collision_kernel()?, quad);
    Ok(rule.sample(f, v, 0.0, Needs::WithLogs)?.l)
}

/// Full diagnostics: `H`, both forms of `D`, both terms of `d/dt D` and the region split.
pub fn dt_entropy_production<D: Density + ?Sized>(
    f: &D,
    quad: &OperatorQuadrature,
    kernel: &KernelSpec,
    regions: &AnnulusDecomposition,
    floor_delta: f64,
) -> Result<DiagnosticsReport> {
    let (pts, samples) = sample_points(f, quad, kernel, Needs::WithLogs)?;

    let mut per_region: Vec<RegionSummary> = Region::ALL
        .iter()
        .map(|&region| {
            let (r_lo, r_hi) = regions.bounds(region);
            RegionSummary {
                region,
                r_lo,
                r_hi,
                neg_term: 0.0,
                pos_term: 0.0,
                d_integrand: 0.0,
                max_qplus: 0.0,
                max_qminus: 0.0,
                max_l: 0.0,
                share_neg_term: 0.0,
                share_pos_term: 0.0,
            }
        })
        .collect();

    let mut h = 0.0;
    let mut d_direct = 0.0;
    let mut d_sym = 0.0;
    let mut neg = 0.0;
    let mut pos = 0.0;
    let mut min_sym = f64::INFINITY;
    for (p, s) in pts.iter().zip(&samples) {
        let q = s.q();
        let neg_density = if s.f > 0.0 {
            -q * q / s.f
        } else if q == 0.0 {
            0.0
        } else {
            return Err(Error::ZeroDensity { x: p.v.x, y: p.v.y });
        };
        let w = p.weight;
        let dn = w * neg_density;
        let dp = w * q * s.l;
        let dd = w * direct_integrand(p.v, s)?;
        h += w * neg_f_log_f(s.f);
        d_direct += dd;
        d_sym += w * s.d_sym;
        neg += dn;
        pos += dp;
        min_sym = min_sym.min(s.min_sym_sample);

        let idx = Region::ALL
            .iter()
            .position(|&r| r == regions.classify(p.radius))
            .unwrap();
        let r = &mut per_region[idx];
        r.neg_term += dn;
        r.pos_term += dp;
        r.d_integrand += dd;
        r.max_qplus = r.max_qplus.max(s.q_gain);
        r.max_qminus = r.max_qminus.max(s.q_loss);
        r.max_l = r.max_l.max(s.l.abs());
    }
    for r in &mut per_region {
        r.share_neg_term = if neg != 0.0 { r.neg_term / neg } else { 0.0 };
        r.share_pos_term = if pos != 0.0 { r.pos_term / pos } else { 0.0 };
    }
    let report = DiagnosticsReport {
        entropy_h: h,
        d_direct,
        d_symmetric: d_sym,
        dtd_negative_term: neg,
        dtd_positive_term: pos,
        dtd_total: neg + pos,
        floor_delta,
        quadrature: QuadratureFingerprint {
            n_sigma: quad.n_sigma,
            shell_spacing: quad.shell_spacing,
            n_radial_gauss: quad.n_radial_gauss,
            n_angular_outer: quad.n_angular_outer,
            n_outer_points: pts.len(),
        },
        min_sym_sample: min_sym,
        per_region,
    };
    let finite = [
        report.entropy_h,
        report.d_direct,
        report.d_symmetric,
        report.dtd_total,
    ];
    if finite.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("diagnostics"));
    }
    Ok(report)
}

/// Region table for a counterexample with amplitude `a`; fails if the
/// qualitative map of gain, loss and `L` does not hold.
pub fn region_report<D: Density + ?Sized>(
    f: &D,
    quad: &OperatorQuadrature,
    kernel: &KernelSpec,
    regions: &AnnulusDecomposition,
    floor_delta: f64,
    a: f64,
) -> Result<Vec<RegionSummary>> {
    let report = dt_entropy_production(f, quad, kernel, regions, floor_delta)?;
    report.check_region_map(a, 1.0)?;
    Ok(report.per_region)
}
