//! Explicit time stepping of `d/dt f = Q(f, f)` on a grid, with diagnostics sampled along the way.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{dt_entropy_production, AnnulusDecomposition};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarGridField};
use crate::kernel::KernelSpec;
use crate::operator::{InnerRule, Needs};
use crate::profile::{RadialStepProfile, DEFAULT_RHO};
use crate::quadrature::OperatorQuadrature;

/// Largest allowed `dt * max(Q- / f)`.
pub const STABILITY_LIMIT: f64 = 0.1;
/// Default `dt * max(Q- / f)`.
pub const DEFAULT_CFL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ForwardEuler,
    Heun,
}

/// User-facing evolution settings; `dt` and the clamp value are filled in from the field when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSettings {
    #[serde(default)]
    pub dt: Option<f64>,
    pub n_steps: usize,
    #[serde(default = "one")]
    pub sample_every: usize,
    #[serde(default = "heun")]
    pub scheme: Scheme,
    #[serde(default)]
    pub positivity_floor: Option<f64>,
}

fn one() -> usize {
    1
}

fn heun() -> Scheme {
    Scheme::Heun
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub sample_every: usize,
    pub scheme: Scheme,
    pub positivity_floor: f64,
    pub quad: OperatorQuadrature,
    pub grid: GridSpec,
    pub kernel: KernelSpec,
    /// Annuli used for the diagnostics' region split.
    pub regions: AnnulusDecomposition,
    /// `max(Q- / f)` over the initial field's nodes.
    pub initial_loss_rate: f64,
}

impl EvolutionConfig {
    /// Resolves the settings against the initial field and checks the stability guard.
    pub fn new(
        field: &ScalarGridField,
        settings: &EvolutionSettings,
        quad: OperatorQuadrature,
        kernel: KernelSpec,
    ) -> Result<Self> {
        kernel.validate()?;
        quad.validate()?;
        if settings.sample_every == 0 {
            return Err(Error::invalid("sample_every", "must be at least 1"));
        }
        let rule = InnerRule::new(&kernel.collision_kernel()?, &quad);
        let (_, rate) = node_rates(field, &rule)?;
        let dt = match settings.dt {
            Some(dt) if dt > 0.0 && dt.is_finite() => dt,
            Some(dt) => return Err(Error::invalid("dt", format!("dt = {dt} must be positive"))),
            None if rate > 0.0 => DEFAULT_CFL / rate,
            None => return Err(Error::invalid("dt", "no loss anywhere; give dt explicitly")),
        };
        let product = dt * rate;
        if product > STABILITY_LIMIT {
            return Err(Error::Unstable {
                product,
                limit: STABILITY_LIMIT,
            });
        }
        Ok(EvolutionConfig {
            dt,
            n_steps: settings.n_steps,
            sample_every: settings.sample_every,
            scheme: settings.scheme,
            positivity_floor: settings.positivity_floor.unwrap_or(field.floor),
            quad,
            grid: field.spec,
            kernel,
            regions: AnnulusDecomposition::new(DEFAULT_RHO, field.r_domain),
            initial_loss_rate: rate,
        })
    }

    pub fn with_regions(mut self, regions: AnnulusDecomposition) -> Self {
        self.regions = regions;
        self
    }
}

/// `Q` at every in-domain node and the largest `Q- / f` among them.
fn node_rates(field: &ScalarGridField, rule: &InnerRule) -> Result<(Vec<f64>, f64)> {
    let n = field.spec.n_per_axis;
    let rows: Vec<Result<(Vec<f64>, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            let mut rate = 0.0f64;
            for (j, out) in row.iter_mut().enumerate() {
                if !field.in_domain(i, j) {
                    continue;
                }
                let s = rule.sample(field, field.spec.node(i, j), 0.0, Needs::Collision)?;
                *out = s.q();
                if s.f > 0.0 {
                    rate = rate.max(s.q_loss / s.f);
                }
            }
            Ok((row, rate))
        })
        .collect();
    let mut q = Vec::with_capacity(n * n);
    let mut rate = 0.0f64;
    for row in rows {
        let (r, m) = row?;
        q.extend(r);
        rate = rate.max(m);
    }
    Ok((q, rate))
}

fn advance(
    field: &ScalarGridField,
    base: &[f64],
    increment: &[f64],
    dt: f64,
    floor: f64,
    clamps: &mut usize,
) -> Result<ScalarGridField> {
    let n = field.spec.n_per_axis;
    let mut values = Vec::with_capacity(base.len());
    for (k, (&f, &q)) in base.iter().zip(increment).enumerate() {
        let raw = f + dt * q;
        if !raw.is_finite() {
            return Err(Error::NonFinite("evolution step"));
        }
        if raw < -floor {
            return Err(Error::StepUndershoot {
                i: k / n,
                j: k % n,
                value: raw,
                floor,
            });
        }
        if raw < floor {
            *clamps += 1;
        }
        values.push(raw.max(floor));
    }
    Ok(ScalarGridField {
        spec: field.spec,
        values,
        floor: field.floor,
        r_domain: field.r_domain,
        analytic: None,
    })
}

/// One step; returns the new field and the number of clamped nodes.
pub fn step_counted(
    field: &ScalarGridField,
    cfg: &EvolutionConfig,
) -> Result<(ScalarGridField, usize)> {
    let rule = InnerRule::new(&cfg.kernel.collision_kernel()?, &cfg.quad);
    step_with(field, cfg, &rule)
}

fn step_with(
    field: &ScalarGridField,
    cfg: &EvolutionConfig,
    rule: &InnerRule,
) -> Result<(ScalarGridField, usize)> {
    let mut clamps = 0;
    let (k1, rate) = node_rates(field, rule)?;
    let product = cfg.dt * rate;
    if product > STABILITY_LIMIT {
        return Err(Error::Unstable {
            product,
            limit: STABILITY_LIMIT,
        });
    }
    let floor = cfg.positivity_floor;
    let euler = advance(field, &field.values, &k1, cfg.dt, floor, &mut clamps)?;
    match cfg.scheme {
        Scheme::ForwardEuler => Ok((euler, clamps)),
        Scheme::Heun => {
            let (k2, _) = node_rates(&euler, rule)?;
            let avg: Vec<f64> = k1.iter().zip(&k2).map(|(a, b)| 0.5 * (a + b)).collect();
            clamps = 0;
            let next = advance(field, &field.values, &avg, cfg.dt, floor, &mut clamps)?;
            Ok((next, clamps))
        }
    }
}

/// One step of the configured scheme; the input field is left untouched.
pub fn step(field: &ScalarGridField, cfg: &EvolutionConfig) -> Result<ScalarGridField> {
    Ok(step_counted(field, cfg)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeRecord {
    pub t: f64,
    pub mass: f64,
    pub px: f64,
    pub py: f64,
    pub energy: f64,
    pub entropy_h: f64,
    pub d_direct: f64,
    pub dtd_total: f64,
    pub dtd_negative_term: f64,
    pub dtd_positive_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub records: Vec<TimeRecord>,
    /// Clamped node updates over the whole run.
    pub clamp_events: usize,
    pub dt: f64,
}

impl TimeSeries {
    pub fn write_csv_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "t,mass,px,py,energy,H,D,dtD,dtD_neg,dtD_pos")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.mass,
                r.px,
                r.py,
                r.energy,
                r.entropy_h,
                r.d_direct,
                r.dtd_total,
                r.dtd_negative_term,
                r.dtd_positive_term
            )?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Index of the first sample whose `D` does not exceed the previous one.
    pub fn first_non_increase(&self) -> Option<usize> {
        self.records
            .windows(2)
            .position(|w| w[1].d_direct <= w[0].d_direct)
            .map(|k| k + 1)
    }

    /// Centered differences of `D` at the interior samples, paired with the sampled `d/dt D`.
    pub fn centered_differences(&self) -> Vec<(f64, f64)> {
        self.records
            .windows(3)
            .map(|w| {
                let fd = (w[2].d_direct - w[0].d_direct) / (w[2].t - w[0].t);
                (fd, w[1].dtd_total)
            })
            .collect()
    }
}

fn record(field: &ScalarGridField, t: f64, cfg: &EvolutionConfig) -> Result<TimeRecord> {
    let m = field.moments();
    let d = dt_entropy_production(field, &cfg.quad, &cfg.kernel, &cfg.regions, cfg.positivity_floor)?;
    Ok(TimeRecord {
        t,
        mass: m.mass,
        px: m.px,
        py: m.py,
        energy: m.energy,
        entropy_h: d.entropy_h,
        d_direct: d.d_direct,
        dtd_total: d.dtd_total,
        dtd_negative_term: d.dtd_negative_term,
        dtd_positive_term: d.dtd_positive_term,
    })
}

/// Runs `n_steps` steps, sampling diagnostics at `t = 0` and every `sample_every` steps.
pub fn evolve(f0: &ScalarGridField, cfg: &EvolutionConfig) -> Result<TimeSeries> {
    evolve_with_final(f0, cfg).map(|(s, _)| s)
}

/// As [`evolve`], also returning the final field.
pub fn evolve_with_final(
    f0: &ScalarGridField,
    cfg: &EvolutionConfig,
) -> Result<(TimeSeries, ScalarGridField)> {
    let rule = InnerRule::new(&cfg.kernel.collision_kernel()?, &cfg.quad);
    let mut field = f0.clone();
    field.analytic = None;
    let mut records = vec![record(&field, 0.0, cfg)?];
    let mut clamp_events = 0;
    for k in 1..=cfg.n_steps {
        let (next, clamps) = step_with(&field, cfg, &rule)?;
        field = next;
        clamp_events += clamps;
        if k % cfg.sample_every == 0 {
            records.push(record(&field, k as f64 * cfg.dt, cfg)?);
        }
    }
    Ok((
        TimeSeries {
            records,
            clamp_events,
            dt: cfg.dt,
        },
        field,
    ))
}

/// Samples a smoothed profile on `grid` for evolution; sharp steps are rejected.
pub fn initial_field(profile: &RadialStepProfile, grid: GridSpec) -> Result<ScalarGridField> {
    if profile.smoothing_width() <= 0.0 {
        return Err(Error::invalid(
            "smoothing_width",
            "evolution needs a smoothed profile",
        ));
    }
    let mut field = crate::grid::profile_to_grid(profile, grid)?;
    field.analytic = None;
    Ok(field)
}

/// Largest drifts of the conserved quantities from their initial values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    /// Relative.
    pub mass: f64,
    /// Absolute.
    pub momentum: f64,
    /// Relative.
    pub energy: f64,
}

pub fn conservation_drift(series: &TimeSeries) -> Drift {
    let Some(first) = series.records.first() else {
        return Drift::default();
    };
    let mut d = Drift::default();
    for r in &series.records {
        d.mass = d.mass.max((r.mass - first.mass).abs() / first.mass.abs());
        d.momentum = d
            .momentum
            .max((r.px - first.px).hypot(r.py - first.py));
        d.energy = d.energy.max((r.energy - first.energy).abs() / first.energy.abs());
    }
    d
}
