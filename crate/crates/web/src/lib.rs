//! wasm-bindgen exports for `www/index.html`.
//!
//! Every function returns a flat `Float64Array`; errors come back as strings.

use kinetic_entropy::{
    build_counterexample, l_potential, q_gain_singular, q_loss_singular, square_configuration,
    AnnulusDecomposition, CounterexampleParams, Density, KernelSpec, OperatorQuadrature,
    RadialStepProfile, Velocity,
};
use wasm_bindgen::prelude::*;

const MAX_SAMPLES: usize = 4096;

fn profile(a: f64, rho: f64, c: f64, smoothing: f64) -> Result<RadialStepProfile, String> {
    let p = CounterexampleParams::new(a, c).with_rho(rho).with_smoothing(smoothing);
    build_counterexample(&p).map_err(|e| e.to_string())
}

fn radii(r_max: f64, n: usize) -> Result<impl Iterator<Item = f64>, String> {
    if !(2..=MAX_SAMPLES).contains(&n) {
        return Err(format!("need 2..={MAX_SAMPLES} samples, got {n}"));
    }
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(format!("r_max must be positive, got {r_max}"));
    }
    Ok((0..n).map(move |i| r_max * i as f64 / (n - 1) as f64))
}

/// `[r0, f0, r1, f1, ...]` along the positive `x` axis.
#[wasm_bindgen]
pub fn profile_curve(a: f64, rho: f64, c: f64, smoothing: f64, r_max: f64, n: usize) -> Result<Vec<f64>, String> {
    let f = profile(a, rho, c, smoothing)?;
    Ok(radii(r_max, n)?
        .flat_map(|r| [r, f.eval(Velocity::new(r, 0.0))])
        .collect())
}

/// `[r, Q+, Q-, L]` per sample along the ray at `angle`, singular kernel.
#[wasm_bindgen]
pub fn operator_curves(
    a: f64,
    rho: f64,
    c: f64,
    n_sigma: usize,
    angle: f64,
    r_max: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    let f = profile(a, rho, c, 0.0)?;
    let mut quad = OperatorQuadrature::for_rho(rho, AnnulusDecomposition::new(rho, f.r_domain()).edges());
    quad.n_sigma = n_sigma;
    quad.validate().map_err(|e| e.to_string())?;
    let kernel = KernelSpec::singular();
    let mut out = Vec::with_capacity(4 * n);
    for r in radii(r_max, n)? {
        let v = Velocity::from_polar(r, angle);
        let l = l_potential(&f, v, &quad, &kernel).map_err(|e| e.to_string())?;
        out.extend([r, q_gain_singular(&f, v, &quad, 1.0), q_loss_singular(&f, v, &quad, 1.0), l]);
    }
    Ok(out)
}

/// Collision square with corner `(vx, vy)` and side direction `theta`.
///
/// Returns the corners `v, v', v_*, v'_*` as 8 coordinates, the density at each,
/// then the gain product `f(v') f(v'_*)`, the loss product `f(v) f(v_*)` and
/// `f_* log(f f_* / (f' f'_*))`.
#[wasm_bindgen]
pub fn collision_square(vx: f64, vy: f64, theta: f64, a: f64, rho: f64, c: f64) -> Result<Vec<f64>, String> {
    let f = profile(a, rho, c, 0.0)?;
    let sigma = Velocity::from_polar(1.0, theta);
    let v = Velocity::checked(vx, vy).map_err(|e| e.to_string())?;
    let sq = square_configuration(v, sigma).map_err(|e| e.to_string())?;
    let corners = [sq.v, sq.v_prime, sq.v_star, sq.v_star_prime];
    let vals: Vec<f64> = corners.iter().map(|&w| f.eval(w)).collect();
    let gain = vals[1] * vals[3];
    let loss = vals[0] * vals[2];
    let mut out: Vec<f64> = corners.iter().flat_map(|w| [w.x, w.y]).collect();
    out.extend(&vals);
    out.extend([gain, loss, vals[2] * (loss / gain).ln()]);
    Ok(out)
}
