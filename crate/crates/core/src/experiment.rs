//! Configuration ingestion, the choice of `c`, scaling fits, sweeps and file output.

use std::f64::consts::{PI, SQRT_2};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{dt_entropy_production, AnnulusDecomposition, DiagnosticsReport, Region};
use crate::error::{Error, Result};
use crate::evolution::{
    conservation_drift, evolve_with_final, initial_field, Drift, EvolutionConfig,
    EvolutionSettings, TimeSeries,
};
use crate::grid::GridSpec;
use crate::kernel::KernelSpec;
use crate::operator::{InnerRule, Needs};
use crate::profile::{
    build_counterexample, CounterexampleParams, Maxwellian, DEFAULT_FLOOR, DEFAULT_RHO,
    DEFAULT_R_DOMAIN,
};
use crate::quadrature::{MollifiedQuadrature, OperatorQuadrature};
use crate::velocity::Velocity;

/// Probe points on the `sqrt 2` ring used by [`choose_c`].
pub const C_PROBES: usize = 24;
/// Grid notches per decade of the downward scan in `c`.
pub const C_NOTCHES_PER_DECADE: usize = 8;
const C_DECADES: usize = 8;
/// Required `min Q / max Q+` on the ring.
pub const C_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CChoice {
    pub c: f64,
    /// Position on the scan grid `c = 10^(-notch / 8)`.
    pub notch: usize,
    pub min_ring_q: f64,
    pub max_ring_qplus: f64,
}

/// Largest `c` on a geometric grid below 1 for which `Q` on the `sqrt 2` ring
/// is at least a tenth of the ring's largest gain at every probe.
///
/// The `c` stored in `params` is ignored.
pub fn choose_c(
    params: &CounterexampleParams,
    quad: &OperatorQuadrature,
    kernel: &KernelSpec,
) -> Result<CChoice> {
    let rule = InnerRule::new(&kernel.collision_kernel()?, quad);
    let probes: Vec<Velocity> = (0..C_PROBES)
        .map(|k| Velocity::from_polar(SQRT_2, 2.0 * PI * k as f64 / C_PROBES as f64))
        .collect();
    let n_notches = C_NOTCHES_PER_DECADE * C_DECADES;
    for notch in 0..n_notches {
        let c = 10f64.powf(-(notch as f64) / C_NOTCHES_PER_DECADE as f64);
        let mut p = *params;
        p.c = c;
        let profile = build_counterexample(&p)?;
        let samples: Result<Vec<_>> = probes
            .par_iter()
            .map(|&v| rule.sample(&profile, v, 0.0, Needs::Collision))
            .collect();
        let samples = samples?;
        let min_q = samples.iter().map(|s| s.q()).fold(f64::INFINITY, f64::min);
        let max_gain = samples.iter().map(|s| s.q_gain).fold(0.0, f64::max);
        if max_gain > 0.0 && min_q >= C_MARGIN * max_gain {
            return Ok(CChoice {
                c,
                notch,
                min_ring_q: min_q,
                max_ring_qplus: max_gain,
            });
        }
    }
    Err(Error::NoAdmissibleC)
}

/// Least-squares fit of `log value` against `log a` (and `log log a`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent_p: f64,
    pub log_correction_used: bool,
    /// Coefficient of `log log a`; zero without the correction.
    pub log_coefficient: f64,
    pub amplitude: f64,
    /// Root-mean-square residual of `log value`.
    pub residual: f64,
}

pub fn fit_scaling(samples: &[(f64, f64)], with_log: bool) -> Result<ScalingFit> {
    if samples.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 samples, got {}", samples.len())));
    }
    for &(a, v) in samples {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Fit(format!("non-positive value {v} at a = {a}")));
        }
        if !(a > 1.0 && a.is_finite()) {
            return Err(Error::Fit(format!("a = {a} must exceed 1")));
        }
    }
    let cols = if with_log { 3 } else { 2 };
    let n = samples.len();
    let x = DMatrix::from_fn(n, cols, |i, j| {
        let la = samples[i].0.ln();
        match j {
            0 => 1.0,
            1 => la,
            _ => la.ln(),
        }
    });
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.1.ln()));
    let beta = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let resid = &x * &beta - &y;
    Ok(ScalingFit {
        exponent_p: beta[1],
        log_correction_used: with_log,
        log_coefficient: if with_log { beta[2] } else { 0.0 },
        amplitude: beta[0].exp(),
        residual: (resid.norm_squared() / n as f64).sqrt(),
    })
}

/// Both models for one quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPair {
    pub power: ScalingFit,
    pub with_log: ScalingFit,
    /// The log model fits strictly better and its log coefficient is positive.
    pub prefers_log: bool,
}

pub fn fit_pair(samples: &[(f64, f64)]) -> Result<FitPair> {
    let power = fit_scaling(samples, false)?;
    let with_log = fit_scaling(samples, true)?;
    Ok(FitPair {
        power,
        with_log,
        prefers_log: with_log.residual < power.residual && with_log.log_coefficient > 0.0,
    })
}

/// Optional overrides of the default quadrature.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sigma: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shell_spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_radial_gauss: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_angular_outer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollified: Option<MollifiedQuadrature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dither: Option<bool>,
}

impl QuadratureOverrides {
    /// Defaults for feature width `rho`, overridden, then refined by `scale`.
    pub fn resolve(&self, regions: &AnnulusDecomposition, scale: f64) -> Result<OperatorQuadrature> {
        let mut q = OperatorQuadrature::for_rho(regions.rho, regions.edges());
        if let Some(n) = self.n_sigma {
            q.n_sigma = n;
        }
        if let Some(s) = self.shell_spacing {
            q.shell_spacing = s;
        }
        if let Some(n) = self.n_radial_gauss {
            q.n_radial_gauss = n;
        }
        if let Some(n) = self.n_angular_outer {
            q.n_angular_outer = n;
        }
        if let Some(m) = self.mollified {
            q.mollified = m;
        }
        if let Some(d) = self.dither {
            q.dither = d;
        }
        q.validate()?;
        if scale != 1.0 {
            q = q.scaled(scale)?;
        }
        Ok(q)
    }
}

/// Counterexample parameters as read from a config; `c` absent means "choose it".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub a: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub c: Option<f64>,
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
fn default_one() -> f64 {
    1.0
}

impl CounterexampleConfig {
    pub fn regions(&self) -> AnnulusDecomposition {
        AnnulusDecomposition::new(self.rho, self.r_domain).with_margin(self.smoothing_width)
    }

    /// Parameters with `c` set to `c`, validated.
    pub fn params(&self, c: f64) -> Result<CounterexampleParams> {
        let p = CounterexampleParams {
            a: self.a,
            rho: self.rho,
            c,
            floor_delta: self.floor_delta,
            r_domain: self.r_domain,
            smoothing_width: self.smoothing_width,
        };
        p.validate()?;
        Ok(p)
    }

    /// Fills in `c`, running [`choose_c`] when the config leaves it open.
    pub fn resolve(
        &self,
        quad: &OperatorQuadrature,
        kernel: &KernelSpec,
    ) -> Result<(CounterexampleParams, Option<CChoice>)> {
        match self.c {
            Some(c) => Ok((self.params(c)?, None)),
            None => {
                let probe = self.params(1.0)?;
                let choice = choose_c(&probe, quad, kernel)?;
                Ok((self.params(choice.c)?, Some(choice)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Counterexample(CounterexampleConfig),
    #[serde(rename_all = "snake_case")]
    Gaussian {
        #[serde(default = "default_one")]
        amplitude: f64,
        #[serde(default = "default_one")]
        temperature: f64,
        #[serde(default = "default_r_domain")]
        r_domain: f64,
    },
}

impl ProfileConfig {
    /// Annuli for reporting and panel alignment.
    pub fn regions(&self) -> AnnulusDecomposition {
        match self {
            ProfileConfig::Counterexample(c) => c.regions(),
            ProfileConfig::Gaussian { r_domain, .. } => {
                AnnulusDecomposition::new(DEFAULT_RHO, *r_domain)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub profile: ProfileConfig,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub quadrature: QuadratureOverrides,
    /// Used only by property tests; outputs never depend on it.
    #[serde(default)]
    pub seed: u64,
}

/// Reads a JSON config.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Everything needed to reproduce a diagnose run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedDiagnose {
    pub profile: ResolvedProfile,
    pub kernel: KernelSpec,
    pub quadrature: OperatorQuadrature,
    pub quad_scale: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResolvedProfile {
    Counterexample(CounterexampleParams),
    Gaussian {
        amplitude: f64,
        temperature: f64,
        r_domain: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionMapCheck {
    pub checked: bool,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnoseOutput {
    pub config: ResolvedDiagnose,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_choice: Option<CChoice>,
    pub report: DiagnosticsReport,
    pub region_map: RegionMapCheck,
}

impl DiagnoseOutput {
    /// Writes `report.json` and `regions.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let json = dir.join("report.json");
        write_json(&json, self)?;
        let csv = dir.join("regions.csv");
        let mut w = std::io::BufWriter::new(fs::File::create(&csv)?);
        self.report.write_region_csv(&mut w)?;
        w.flush()?;
        Ok(vec![json, csv])
    }
}

pub fn diagnose(cfg: &DiagnoseConfig, quad_scale: f64) -> Result<DiagnoseOutput> {
    cfg.kernel.validate()?;
    let regions = cfg.profile.regions();
    let quad = cfg.quadrature.resolve(&regions, quad_scale)?;
    let (resolved, c_choice, report, a) = match cfg.profile {
        ProfileConfig::Counterexample(cc) => {
            let (params, choice) = cc.resolve(&quad, &cfg.kernel)?;
            let profile = build_counterexample(&params)?;
            let report =
                dt_entropy_production(&profile, &quad, &cfg.kernel, &regions, params.floor_delta)?;
            (ResolvedProfile::Counterexample(params), choice, report, Some(params.a))
        }
        ProfileConfig::Gaussian {
            amplitude,
            temperature,
            r_domain,
        } => {
            let m = Maxwellian::new(amplitude, temperature, r_domain)?;
            let report = dt_entropy_production(&m, &quad, &cfg.kernel, &regions, 0.0)?;
            let resolved = ResolvedProfile::Gaussian {
                amplitude,
                temperature,
                r_domain,
            };
            (resolved, None, report, None)
        }
    };
    let region_map = match a {
        Some(a) => match report.check_region_map(a, 1.0) {
            Ok(()) => RegionMapCheck {
                checked: true,
                ok: true,
                detail: None,
            },
            Err(e) => RegionMapCheck {
                checked: true,
                ok: false,
                detail: Some(e.to_string()),
            },
        },
        None => RegionMapCheck {
            checked: false,
            ok: true,
            detail: None,
        },
    };
    Ok(DiagnoseOutput {
        config: ResolvedDiagnose {
            profile: resolved,
            kernel: cfg.kernel,
            quadrature: quad,
            quad_scale,
            seed: cfg.seed,
        },
        c_choice,
        report,
        region_map,
    })
}

pub fn run_diagnose(cfg: &DiagnoseConfig, quad_scale: f64, out: &Path) -> Result<DiagnoseOutput> {
    let output = diagnose(cfg, quad_scale)?;
    output.write(out)?;
    Ok(output)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChooseCOutput {
    pub config: ResolvedDiagnose,
    pub choice: CChoice,
}

/// [`choose_c`] driven by a diagnose-style config; any `c` in it is ignored.
pub fn run_choose_c(cfg: &DiagnoseConfig, quad_scale: f64, out: &Path) -> Result<ChooseCOutput> {
    let ProfileConfig::Counterexample(cc) = cfg.profile else {
        return Err(Error::invalid("profile", "choose-c needs a counterexample profile"));
    };
    cfg.kernel.validate()?;
    let quad = cfg.quadrature.resolve(&cc.regions(), quad_scale)?;
    let params = cc.params(1.0)?;
    let choice = choose_c(&params, &quad, &cfg.kernel)?;
    let output = ChooseCOutput {
        config: ResolvedDiagnose {
            profile: ResolvedProfile::Counterexample(CounterexampleParams { c: choice.c, ..params }),
            kernel: cfg.kernel,
            quadrature: quad,
            quad_scale,
            seed: cfg.seed,
        },
        choice,
    };
    fs::create_dir_all(out)?;
    write_json(&out.join("choose_c.json"), &output)?;
    Ok(output)
}

/// Parameter sweep over `a` and the floor, for one or more kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_a_values")]
    pub a_values: Vec<f64>,
    #[serde(default = "default_delta_values")]
    pub delta_values: Vec<f64>,
    #[serde(default = "default_kernels")]
    pub kernels: Vec<KernelSpec>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Fixed `c`; absent means [`choose_c`] per cell.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub smoothing_width: f64,
    #[serde(default = "default_r_domain")]
    pub r_domain: f64,
    #[serde(default)]
    pub quadrature: QuadratureOverrides,
    /// Bisection steps (in `log a`) locating where `d/dt D` turns positive.
    #[serde(default = "default_bisection")]
    pub crossover_bisection_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn default_a_values() -> Vec<f64> {
    [2.0, 2.5, 3.0, 3.5, 4.0].iter().map(|e| 10f64.powf(*e)).collect()
}
fn default_delta_values() -> Vec<f64> {
    vec![1e-4, 1e-6, 1e-8]
}
fn default_kernels() -> Vec<KernelSpec> {
    vec![KernelSpec::singular()]
}
fn default_bisection() -> usize {
    8
}

impl Default for SweepConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.a_values.is_empty() || self.delta_values.is_empty() || self.kernels.is_empty() {
            return Err(Error::invalid("nonempty", "a_values, delta_values and kernels must be nonempty"));
        }
        if self.a_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("a_increasing", "a_values must be strictly increasing"));
        }
        for k in &self.kernels {
            k.validate()?;
        }
        Ok(())
    }
}

pub fn kernel_label(k: &KernelSpec) -> String {
    use crate::kernel::{AngularPart, RadialPart};
    match (k.angular, k.radial) {
        (AngularPart::DiracPerpendicular, RadialPart::DiracAt { .. }) => "singular".into(),
        (AngularPart::AngularBump { eps_theta }, RadialPart::RadialBump { eps_r, .. }) => {
            format!("mollified_r{eps_r}_t{eps_theta}")
        }
        _ => "mixed".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub kernel: String,
    pub a: f64,
    pub delta: f64,
    pub c: f64,
    pub term_neg: f64,
    pub term_pos: f64,
    pub term_pos_ring_sqrt2: f64,
    /// `-int Q^2/f` over the support only (where the sharp profile is at least 1).
    pub term_neg_support: f64,
    pub dtd_total: f64,
    pub d_direct: f64,
    pub d_symmetric: f64,
    pub entropy_h: f64,
    pub max_l_ring_sqrt2: f64,
    pub min_sym_sample: f64,
    pub region_map_ok: bool,
    pub error: Option<String>,
}

impl SweepCell {
    fn failed(kernel: String, a: f64, delta: f64, e: &Error) -> Self {
        SweepCell {
            kernel,
            a,
            delta,
            c: f64::NAN,
            term_neg: f64::NAN,
            term_pos: f64::NAN,
            term_pos_ring_sqrt2: f64::NAN,
            term_neg_support: f64::NAN,
            dtd_total: f64::NAN,
            d_direct: f64::NAN,
            d_symmetric: f64::NAN,
            entropy_h: f64::NAN,
            max_l_ring_sqrt2: f64::NAN,
            min_sym_sample: f64::NAN,
            region_map_ok: false,
            error: Some(e.to_string()),
        }
    }
}

/// One diagnose of the counterexample, with `c` fixed or chosen.
pub fn sweep_cell(
    cfg: &SweepConfig,
    kernel: &KernelSpec,
    quad: &OperatorQuadrature,
    a: f64,
    delta: f64,
) -> Result<(SweepCell, DiagnosticsReport)> {
    let cc = CounterexampleConfig {
        a,
        rho: cfg.rho,
        c: cfg.c,
        floor_delta: delta,
        r_domain: cfg.r_domain,
        smoothing_width: cfg.smoothing_width,
    };
    let (params, _) = cc.resolve(quad, kernel)?;
    let profile = build_counterexample(&params)?;
    let regions = cc.regions();
    let r = dt_entropy_production(&profile, quad, kernel, &regions, delta)?;
    let ring = r.region(Region::RingSqrt2);
    let cell = SweepCell {
        kernel: kernel_label(kernel),
        a,
        delta,
        c: params.c,
        term_neg: r.dtd_negative_term,
        term_pos: r.dtd_positive_term,
        term_pos_ring_sqrt2: ring.pos_term,
        term_neg_support: r.support_negative_term(),
        dtd_total: r.dtd_total,
        d_direct: r.d_direct,
        d_symmetric: r.d_symmetric,
        entropy_h: r.entropy_h,
        max_l_ring_sqrt2: ring.max_l,
        min_sym_sample: r.min_sym_sample,
        region_map_ok: r.check_region_map(a, 1.0).is_ok(),
        error: None,
    };
    Ok((cell, r))
}

/// Where `d/dt D` first turns positive along the `a` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    pub last_negative: Option<f64>,
    pub first_positive: Option<f64>,
    /// Geometric bisection between the two, when both exist.
    pub refined: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFits {
    pub kernel: String,
    pub delta: f64,
    pub pos_ring_sqrt2: Option<FitPair>,
    pub neg_support: Option<FitPair>,
    pub fit_error: Option<String>,
    pub crossover: Crossover,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutput {
    pub config: SweepConfig,
    pub quadrature: OperatorQuadrature,
    pub quad_scale: f64,
    pub cells: Vec<SweepCell>,
    pub fits: Vec<SweepFits>,
}

impl SweepOutput {
    pub fn write_csv_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "kernel,a,delta,c,term_neg,term_pos,term_pos_ring_sqrt2,term_neg_support,dtd_total,d_direct,d_symmetric,entropy_h,max_l_ring_sqrt2,min_sym_sample,region_map_ok,error"
        )?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                c.kernel,
                c.a,
                c.delta,
                c.c,
                c.term_neg,
                c.term_pos,
                c.term_pos_ring_sqrt2,
                c.term_neg_support,
                c.dtd_total,
                c.d_direct,
                c.d_symmetric,
                c.entropy_h,
                c.max_l_ring_sqrt2,
                c.min_sym_sample,
                c.region_map_ok,
                c.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
            )?;
        }
        Ok(())
    }

    /// Writes `sweep.csv` and `fits.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let csv = dir.join("sweep.csv");
        let mut w = std::io::BufWriter::new(fs::File::create(&csv)?);
        self.write_csv_to(&mut w)?;
        w.flush()?;
        let json = dir.join("fits.json");
        write_json(&json, self)?;
        Ok(vec![csv, json])
    }

    pub fn fits_for(&self, kernel: &str, delta: f64) -> Option<&SweepFits> {
        self.fits.iter().find(|f| f.kernel == kernel && f.delta == delta)
    }
}

fn fits_for_cells(cells: &[&SweepCell]) -> (Option<FitPair>, Option<FitPair>, Option<String>) {
    let ok: Vec<_> = cells.iter().filter(|c| c.error.is_none()).collect();
    let pos: Vec<(f64, f64)> = ok.iter().map(|c| (c.a, c.term_pos_ring_sqrt2)).collect();
    let neg: Vec<(f64, f64)> = ok.iter().map(|c| (c.a, -c.term_neg_support)).collect();
    let mut errors = vec![];
    let pos = fit_pair(&pos).map_err(|e| errors.push(format!("pos: {e}"))).ok();
    let neg = fit_pair(&neg).map_err(|e| errors.push(format!("neg: {e}"))).ok();
    let err = if errors.is_empty() { None } else { Some(errors.join("; ")) };
    (pos, neg, err)
}

fn crossover(
    cfg: &SweepConfig,
    kernel: &KernelSpec,
    quad: &OperatorQuadrature,
    delta: f64,
    cells: &[&SweepCell],
) -> Crossover {
    let mut out = Crossover {
        last_negative: None,
        first_positive: None,
        refined: None,
    };
    for w in cells.windows(2) {
        if w[0].dtd_total <= 0.0 && w[1].dtd_total > 0.0 {
            out.last_negative = Some(w[0].a);
            out.first_positive = Some(w[1].a);
        }
    }
    if out.first_positive.is_none() {
        out.first_positive = cells.iter().find(|c| c.dtd_total > 0.0).map(|c| c.a);
        return out;
    }
    let (Some(mut lo), Some(mut hi)) = (out.last_negative, out.first_positive) else {
        return out;
    };
    for _ in 0..cfg.crossover_bisection_steps {
        let mid = (lo * hi).sqrt();
        match sweep_cell(cfg, kernel, quad, mid, delta) {
            Ok((c, _)) if c.dtd_total > 0.0 => hi = mid,
            Ok(_) => lo = mid,
            Err(_) => return out,
        }
    }
    out.refined = Some((lo * hi).sqrt());
    out
}

pub fn sweep(cfg: &SweepConfig, quad_scale: f64) -> Result<SweepOutput> {
    cfg.validate()?;
    let regions = AnnulusDecomposition::new(cfg.rho, cfg.r_domain).with_margin(cfg.smoothing_width);
    let quad = cfg.quadrature.resolve(&regions, quad_scale)?;
    let jobs: Vec<(usize, f64, f64)> = (0..cfg.kernels.len())
        .flat_map(|k| {
            cfg.delta_values
                .iter()
                .flat_map(move |&d| cfg.a_values.iter().map(move |&a| (k, d, a)))
        })
        .collect();
    let cells: Vec<SweepCell> = jobs
        .par_iter()
        .map(|&(k, delta, a)| {
            let kernel = &cfg.kernels[k];
            sweep_cell(cfg, kernel, &quad, a, delta)
                .map(|(c, _)| c)
                .unwrap_or_else(|e| SweepCell::failed(kernel_label(kernel), a, delta, &e))
        })
        .collect();
    let mut fits = vec![];
    for kernel in &cfg.kernels {
        let label = kernel_label(kernel);
        for &delta in &cfg.delta_values {
            let group: Vec<&SweepCell> = cells
                .iter()
                .filter(|c| c.kernel == label && c.delta == delta)
                .collect();
            let (pos, neg, fit_error) = fits_for_cells(&group);
            fits.push(SweepFits {
                kernel: label.clone(),
                delta,
                pos_ring_sqrt2: pos,
                neg_support: neg,
                fit_error,
                crossover: crossover(cfg, kernel, &quad, delta, &group),
            });
        }
    }
    Ok(SweepOutput {
        config: cfg.clone(),
        quadrature: quad,
        quad_scale,
        cells,
        fits,
    })
}

pub fn run_sweep(cfg: &SweepConfig, quad_scale: f64, out: &Path) -> Result<SweepOutput> {
    let output = sweep(cfg, quad_scale)?;
    output.write(out)?;
    Ok(output)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub profile: CounterexampleConfig,
    pub grid: GridSpec,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub quadrature: QuadratureOverrides,
    pub evolution: EvolutionSettings,
    /// Also write the final field in the binary grid format.
    #[serde(default)]
    pub checkpoint: bool,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveSummary {
    pub config: EvolveConfig,
    pub params: CounterexampleParams,
    pub resolved: EvolutionConfig,
    pub quad_scale: f64,
    pub drift: Drift,
    pub clamp_events: usize,
    pub first_non_increase: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct EvolveOutput {
    pub summary: EvolveSummary,
    pub series: TimeSeries,
    pub final_field: crate::grid::ScalarGridField,
}

pub fn evolve_from_config(cfg: &EvolveConfig, quad_scale: f64) -> Result<EvolveOutput> {
    cfg.kernel.validate()?;
    let pc = cfg.profile;
    let quad = cfg.quadrature.resolve(&pc.regions(), quad_scale)?;
    let (params, _) = pc.resolve(&quad, &cfg.kernel)?;
    let profile = build_counterexample(&params)?;
    let field = initial_field(&profile, cfg.grid)?;
    let ecfg = EvolutionConfig::new(&field, &cfg.evolution, quad, cfg.kernel)?
        .with_regions(pc.regions());
    let (series, final_field) = evolve_with_final(&field, &ecfg)?;
    Ok(EvolveOutput {
        summary: EvolveSummary {
            config: cfg.clone(),
            params,
            resolved: ecfg,
            quad_scale,
            drift: conservation_drift(&series),
            clamp_events: series.clamp_events,
            first_non_increase: series.first_non_increase(),
        },
        series,
        final_field,
    })
}

/// Writes `timeseries.csv`, `evolve.json` and optionally `final_field.bin`.
pub fn run_evolve(cfg: &EvolveConfig, quad_scale: f64, out: &Path) -> Result<EvolveOutput> {
    let output = evolve_from_config(cfg, quad_scale)?;
    fs::create_dir_all(out)?;
    output.series.write_csv(&out.join("timeseries.csv"))?;
    write_json(&out.join("evolve.json"), &output.summary)?;
    if cfg.checkpoint {
        output.final_field.write_binary(&out.join("final_field.bin"))?;
    }
    Ok(output)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// `(a, value)` pairs.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOutput {
    pub config: FitConfig,
    pub fits: FitPair,
}

pub fn run_fit(cfg: &FitConfig, out: &Path) -> Result<FitOutput> {
    let output = FitOutput {
        config: cfg.clone(),
        fits: fit_pair(&cfg.samples)?,
    };
    fs::create_dir_all(out)?;
    write_json(&out.join("fit.json"), &output)?;
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let s: Vec<_> = [10.0, 100.0, 1000.0, 1e4].iter().map(|&a: &f64| (a, 3.0 * a.powi(4))).collect();
        let f = fit_scaling(&s, false).unwrap();
        assert!((f.exponent_p - 4.0).abs() < 1e-10);
        assert!((f.amplitude - 3.0).abs() < 1e-9);
        assert!(f.residual < 1e-10);
    }

    #[test]
    fn log_model_recovers_log_factor() {
        let s: Vec<_> = [100.0, 316.0, 1000.0, 3162.0, 1e4]
            .iter()
            .map(|&a: &f64| (a, a.powi(4) * a.ln()))
            .collect();
        let with = fit_scaling(&s, true).unwrap();
        assert!((with.exponent_p - 4.0).abs() < 1e-9);
        assert!((with.log_coefficient - 1.0).abs() < 1e-9);
        assert!(with.residual < 1e-10);
        let without = fit_scaling(&s, false).unwrap();
        assert!(without.exponent_p > 4.0 && without.exponent_p < 4.5);
        assert!(without.residual > with.residual);
        assert!(fit_pair(&s).unwrap().prefers_log);
    }

    #[test]
    fn fit_rejects_bad_samples() {
        assert!(fit_scaling(&[(10.0, 1.0), (100.0, 2.0)], false).is_err());
        assert!(fit_scaling(&[(10.0, 1.0), (100.0, -2.0), (1000.0, 3.0)], false).is_err());
    }

    #[test]
    fn config_parsing() {
        let cfg: DiagnoseConfig = serde_json::from_str(
            r#"{"profile": {"kind": "counterexample", "a": 1000}, "kernel": {"angular": {"kind": "dirac_perpendicular"}, "radial": {"kind": "dirac_at"}}}"#,
        )
        .unwrap();
        let ProfileConfig::Counterexample(cc) = cfg.profile else { panic!() };
        assert_eq!(cc.c, None);
        assert_eq!(cc.rho, 0.1);
        let bad = serde_json::from_str::<DiagnoseConfig>(
            r#"{"profile": {"kind": "counterexample", "a": 1000, "typo": 1}}"#,
        );
        assert!(bad.is_err());
        let g: DiagnoseConfig =
            serde_json::from_str(r#"{"profile": {"kind": "gaussian"}}"#).unwrap();
        assert!(matches!(g.profile, ProfileConfig::Gaussian { amplitude, .. } if amplitude == 1.0));
    }

    #[test]
    fn sweep_defaults() {
        let s = SweepConfig::default();
        assert_eq!(s.a_values.len(), 5);
        assert!((s.a_values[2] - 1000.0).abs() < 1e-9);
        assert_eq!(s.delta_values, vec![1e-4, 1e-6, 1e-8]);
        s.validate().unwrap();
        let mut bad = s.clone();
        bad.a_values = vec![10.0, 5.0];
        assert!(bad.validate().is_err());
    }
}
