//! End-to-end acceptance run; prints one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::time::Instant;

use kinetic_entropy::evolution::{EvolutionSettings, Scheme};
use kinetic_entropy::experiment::{
    evolve_from_config, sweep, CounterexampleConfig, EvolveConfig, QuadratureOverrides,
    SweepCell, SweepConfig, SweepOutput,
};
use kinetic_entropy::operator::q_point;
use kinetic_entropy::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn cells_at(out: &SweepOutput, delta: f64) -> Vec<&SweepCell> {
    out.cells.iter().filter(|c| c.delta == delta).collect()
}

fn random_profile(rng: &mut ChaCha8Rng) -> RadialStepProfile {
    let n = rng.gen_range(2..6);
    let floor = rng.gen_range(0.01..0.5);
    let mut b = vec![];
    let mut r = 0.0;
    for _ in 0..n {
        r += rng.gen_range(0.3..1.5);
        b.push(r);
    }
    b.push(8.0);
    let values = b.iter().map(|_| floor + rng.gen_range(0.05..20.0)).collect();
    let s = if rng.gen_bool(0.5) { 0.0 } else { 0.1 };
    RadialStepProfile::new(b, values, s, floor).unwrap()
}

fn nonnegative_production(singular: &SweepOutput) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let quad = OperatorQuadrature::new(256, 0.05).unwrap();
    let mut worst_value = f64::INFINITY;
    let mut worst_sample = f64::INFINITY;
    for _ in 0..50 {
        let f = random_profile(&mut rng);
        let s = entropy_production_symmetric(&f, &quad, &KernelSpec::singular()).unwrap();
        let scale = entropy_production_direct(&f, &quad, &KernelSpec::singular()).unwrap().abs().max(1e-300);
        worst_value = worst_value.min(s.value / scale);
        worst_sample = worst_sample.min(s.min_sample);
    }
    let mut pass = worst_value >= -1e-8 && worst_sample >= 0.0;
    for c in &singular.cells {
        pass &= c.error.is_none() && c.d_symmetric >= -1e-8 * c.d_direct.abs() && c.min_sym_sample >= 0.0;
        worst_sample = worst_sample.min(c.min_sym_sample);
    }
    outcome(
        pass,
        format!(
            "50 random profiles + {} counterexamples: min D_sym/|D| = {worst_value:.3e}, min integrand sample = {worst_sample:.3e}",
            singular.cells.len()
        ),
    )
}

fn equilibrium() -> Outcome {
    let m = Maxwellian::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let quad = OperatorQuadrature::for_rho(0.1, AnnulusDecomposition::new(0.1, 8.0).edges());
    let mollified = KernelSpec::mollified(0.05, 0.05);
    let (mut worst_s, mut worst_m) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let v = Velocity::from_polar(rng.gen_range(0.0..4.0), rng.gen_range(0.0..2.0 * PI));
        let f = m.eval(v);
        worst_s = worst_s.max(q_singular(&m, v, &quad, 1.0).abs() / f);
        let (g, l) = q_point(&m, v, &mollified, &quad).unwrap();
        worst_m = worst_m.max((g - l).abs() / f);
    }
    let regions = AnnulusDecomposition::new(0.1, 8.0);
    let mut worst_diag = 0.0f64;
    for k in [KernelSpec::singular(), mollified] {
        let r = dt_entropy_production(&m, &quad, &k, &regions, 0.0).unwrap();
        for x in [r.d_direct, r.d_symmetric, r.dtd_negative_term, r.dtd_positive_term, r.dtd_total] {
            worst_diag = worst_diag.max(x.abs());
        }
    }
    outcome(
        worst_s <= 1e-8 && worst_m <= 1e-6 && worst_diag <= 1e-6,
        format!("max |Q|/f singular {worst_s:.2e}, mollified {worst_m:.2e}; max |diagnostic| {worst_diag:.2e}"),
    )
}

fn conservation() -> Outcome {
    let p = CounterexampleParams::new(1000.0, 1.0);
    let f = build_counterexample(&p).unwrap();
    let base = OperatorQuadrature::for_rho(p.rho, AnnulusDecomposition::new(p.rho, p.r_domain).edges());
    let k = KernelSpec::singular();
    let r1 = collision_moments_polar(&f, &base, &k).unwrap();
    let r2 = collision_moments_polar(&f, &base.scaled(2.0).unwrap(), &k).unwrap();
    let e1 = [r1.relative_mass(), r1.relative_momentum(), r1.relative_energy()];
    let e2 = [r2.relative_mass(), r2.relative_momentum(), r2.relative_energy()];
    let pass = e1.iter().all(|e| *e <= 1e-3) && e1.iter().zip(&e2).all(|(a, b)| *b <= 0.5 * a);
    outcome(
        pass,
        format!(
            "relative mass/momentum/energy rates {:.2e}/{:.2e}/{:.2e} -> {:.2e}/{:.2e}/{:.2e} at quad-scale 2",
            e1[0], e1[1], e1[2], e2[0], e2[1], e2[2]
        ),
    )
}

fn production_forms_agree(singular: &SweepOutput) -> Outcome {
    let worst = singular
        .cells
        .iter()
        .map(|c| ((c.d_direct - c.d_symmetric) / c.d_symmetric).abs())
        .fold(0.0, f64::max);
    let ok = singular.cells.iter().all(|c| c.error.is_none());
    outcome(
        ok && worst <= 0.01,
        format!("max |D_direct - D_sym| / D_sym over {} sweep cells = {worst:.2e}", singular.cells.len()),
    )
}

/// Region map at a = 1000 plus the growth of max L on the sqrt 2 ring.
fn region_map(cfg: &SweepConfig, out: &SweepOutput, tol: f64) -> Outcome {
    let quad = &out.quadrature;
    let kernel = &cfg.kernels[0];
    let report = |a: f64| kinetic_entropy::experiment::sweep_cell(cfg, kernel, quad, a, 1e-6).unwrap().1;
    let r1000 = report(1000.0);
    let map = r1000.check_region_map(1000.0, tol);
    let ring = r1000.region(Region::RingSqrt2);
    let share = ring.share_pos_term;
    let c100 = cells_at(out, 1e-6)
        .iter()
        .find(|c| c.a == 100.0)
        .map(|c| c.max_l_ring_sqrt2 / 1e4)
        .unwrap();
    let growth_ok = cells_at(out, 1e-6)
        .iter()
        .all(|c| c.max_l_ring_sqrt2 >= c100 * c.a * c.a / tol);
    let pass = map.is_ok() && growth_ok && share >= 1.0 - 0.1 * tol;
    let gain_out = r1000
        .per_region
        .iter()
        .filter(|r| !matches!(r.region, Region::Ring1 | Region::RingSqrt2 | Region::Ring2Sqrt2))
        .map(|r| r.max_qplus)
        .fold(0.0, f64::max);
    let loss_out = r1000
        .per_region
        .iter()
        .filter(|r| !matches!(r.region, Region::InnerBall | Region::RingSqrt2 | Region::RingSqrt5))
        .map(|r| r.max_qminus)
        .fold(0.0, f64::max);
    outcome(
        pass,
        format!(
            "a=1e3: max Q+ off rings {gain_out:.3e}, max Q- off rings {loss_out:.3e} (threshold {:.1e}); max L on ring {:.3e} >= {:.3e}; ring share of int QL {:.4}; {}",
            tol * 1e5,
            ring.max_l,
            c100 * 1e6 / tol,
            share,
            match map {
                Ok(()) => "map ok".to_string(),
                Err(e) => e.to_string(),
            }
        ),
    )
}

fn scaling(out: &SweepOutput, tol: f64) -> Outcome {
    let label = &out.cells[0].kernel;
    let fits = out.fits_for(label, 1e-6).unwrap();
    let (Some(pos), Some(neg)) = (fits.pos_ring_sqrt2, fits.neg_support) else {
        return outcome(false, format!("fit failed: {:?}", fits.fit_error));
    };
    let (lo, hi) = (4.0 - 0.3 * tol, 4.0 + 0.3 * tol);
    let p_pos = pos.with_log.exponent_p;
    let p_neg = neg.power.exponent_p;
    let pass = (lo..=hi).contains(&p_pos)
        && (lo..=hi).contains(&p_neg)
        && pos.with_log.residual < pos.power.residual
        && pos.prefers_log
        && !neg.prefers_log;
    outcome(
        pass,
        format!(
            "ring-sqrt2 positive term: p = {p_pos:.3} (log model, coefficient {:.3}), residual {:.2e} vs {:.2e} without log; negative term on f >= 1: p = {p_neg:.3}, log coefficient {:.3}, log preferred: {}",
            pos.with_log.log_coefficient,
            pos.with_log.residual,
            pos.power.residual,
            neg.with_log.log_coefficient,
            neg.prefers_log
        ),
    )
}

fn sign(out: &SweepOutput) -> Outcome {
    let label = &out.cells[0].kernel;
    let cells = cells_at(out, 1e-6);
    let pass = cells
        .iter()
        .filter(|c| c.a >= 1000.0 - 1e-9)
        .all(|c| c.error.is_none() && c.dtd_total > 0.0);
    let cross = out.fits_for(label, 1e-6).unwrap().crossover;
    let totals: Vec<String> = cells.iter().map(|c| format!("a={:.0}: {:.3e} (c={})", c.a, c.dtd_total, c.c)).collect();
    outcome(
        pass,
        format!(
            "d/dt D at delta=1e-6: {}; crossover a* in ({:?}, {:?}], bisected {:.1}",
            totals.join(", "),
            cross.last_negative,
            cross.first_positive,
            cross.refined.unwrap_or(f64::NAN)
        ),
    )
}

fn growing_production() -> Outcome {
    let cfg = EvolveConfig {
        profile: CounterexampleConfig {
            a: 1000.0,
            rho: 0.1,
            c: None,
            floor_delta: 1e-6,
            r_domain: 8.0,
            smoothing_width: 0.02,
        },
        grid: GridSpec::new(8.0, 801).unwrap(),
        kernel: KernelSpec::singular(),
        quadrature: QuadratureOverrides {
            n_sigma: Some(512),
            ..Default::default()
        },
        evolution: EvolutionSettings {
            dt: None,
            n_steps: 6,
            sample_every: 1,
            scheme: Scheme::Heun,
            positivity_floor: None,
        },
        checkpoint: false,
        seed: 0,
    };
    let out = match evolve_from_config(&cfg, 1.0) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("evolution failed: {e}")),
    };
    let rec = &out.series.records;
    let increasing = rec.windows(2).filter(|w| w[1].d_direct > w[0].d_direct).count();
    let strictly = rec.windows(2).all(|w| w[1].d_direct > w[0].d_direct);
    let worst = out
        .series
        .centered_differences()
        .iter()
        .map(|(fd, l)| ((fd - l) / l).abs())
        .fold(0.0, f64::max);
    outcome(
        strictly && rec.len() >= 5 && worst <= 0.05,
        format!(
            "801x801 grid, {} samples, dt = {:.3e}: D increases over {increasing} consecutive steps ({:.6e} -> {:.6e}); max |FD - dtD|/dtD = {worst:.2e}",
            rec.len(),
            out.series.dt,
            rec[0].d_direct,
            rec.last().unwrap().d_direct
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, Outcome)> = vec![];
    let mut report = |n: u32, o: Outcome| {
        println!(
            "{} criterion {n}: {} [{:.0} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        results.push((n, o));
    };

    let singular_cfg = SweepConfig::default();
    let singular = sweep(&singular_cfg, 1.0).expect("singular sweep");

    report(1, nonnegative_production(&singular));
    report(2, equilibrium());
    report(3, conservation());
    report(4, production_forms_agree(&singular));
    report(5, region_map(&singular_cfg, &singular, 1.0));
    report(6, scaling(&singular, 1.0));
    report(7, sign(&singular));
    report(8, growing_production());

    let mollified_cfg = SweepConfig {
        delta_values: vec![1e-6],
        kernels: vec![KernelSpec::mollified(0.05, 0.05)],
        smoothing_width: 0.02,
        ..SweepConfig::default()
    };
    let mollified = sweep(&mollified_cfg, 1.0).expect("mollified sweep");
    let parts = [
        region_map(&mollified_cfg, &mollified, 2.0),
        scaling(&mollified, 2.0),
        sign(&mollified),
    ];
    let pass = parts.iter().all(|o| o.pass);
    let detail = parts
        .iter()
        .zip(["region map", "scaling", "sign"])
        .map(|(o, name)| format!("{name} {}: {}", if o.pass { "ok" } else { "FAILED" }, o.detail))
        .collect::<Vec<_>>()
        .join(" | ");
    report(9, outcome(pass, detail));

    let failed: Vec<u32> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
