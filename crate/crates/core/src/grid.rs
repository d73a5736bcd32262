//! Uniform Cartesian grids on `[-L, L]^2` and bilinear interpolation.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{Density, RadialStepProfile};
use crate::velocity::Velocity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_extent: f64,
    pub n_per_axis: usize,
}

impl GridSpec {
    pub fn new(half_extent: f64, n_per_axis: usize) -> Result<Self> {
        if n_per_axis < 2 {
            return Err(Error::invalid("n_per_axis", format!("need >= 2, got {n_per_axis}")));
        }
        if !(half_extent.is_finite() && half_extent > 0.0) {
            return Err(Error::invalid("half_extent", format!("{half_extent}")));
        }
        Ok(GridSpec {
            half_extent,
            n_per_axis,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / (self.n_per_axis - 1) as f64
    }

    fn center_index(&self) -> f64 {
        (self.n_per_axis - 1) as f64 / 2.0
    }

    /// Node coordinate; symmetric about zero to the bit.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - self.center_index()) * self.spacing()
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Velocity {
        Velocity::new(self.coord(i), self.coord(j))
    }

    pub fn len(&self) -> usize {
        self.n_per_axis * self.n_per_axis
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Area weight of one node in the node-sum quadrature.
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }
}

/// Node values of a density, indexed `(i, j)` for node `(x_i, y_j)` and stored row-major.
#[derive(Debug, Clone)]
pub struct ScalarGridField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    /// Value outside the domain disk and outside the grid.
    pub floor: f64,
    pub r_domain: f64,
    /// Analytic density the field was sampled from, if any.
    pub analytic: Option<RadialStepProfile>,
}

const SNAP: f64 = 1e-12;

impl ScalarGridField {
    pub fn from_fn(
        spec: GridSpec,
        r_domain: f64,
        floor: f64,
        f: impl Fn(Velocity) -> f64 + Sync,
    ) -> Self {
        let n = spec.n_per_axis;
        let mut values = vec![0.0; spec.len()];
        for i in 0..n {
            for j in 0..n {
                let v = spec.node(i, j);
                values[i * n + j] = if v.norm() > r_domain { floor } else { f(v) };
            }
        }
        ScalarGridField {
            spec,
            values,
            floor,
            r_domain,
            analytic: None,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.n_per_axis + j]
    }

    #[inline]
    pub fn in_domain(&self, i: usize, j: usize) -> bool {
        self.spec.node(i, j).norm() <= self.r_domain
    }

    /// Bilinear interpolation; exact at nodes, `floor` outside the grid.
    #[inline]
    pub fn interpolate(&self, v: Velocity) -> f64 {
        let n = self.spec.n_per_axis;
        let h = self.spec.spacing();
        let m = self.spec.center_index();
        let u = v.x / h + m;
        let w = v.y / h + m;
        let last = (n - 1) as f64;
        if !(u >= -SNAP && u <= last + SNAP && w >= -SNAP && w <= last + SNAP) {
            return self.floor;
        }
        let (i, t) = cell(u, n);
        let (j, s) = cell(w, n);
        let f00 = self.values[i * n + j];
        let f10 = self.values[(i + 1) * n + j];
        let f01 = self.values[i * n + j + 1];
        let f11 = self.values[(i + 1) * n + j + 1];
        if t == 0.0 && s == 0.0 {
            return f00;
        }
        (1.0 - t) * ((1.0 - s) * f00 + s * f01) + t * ((1.0 - s) * f10 + s * f11)
    }

    /// Node-sum integrals of `1`, `v` and `|v|^2` against the field.
    pub fn moments(&self) -> Moments {
        let n = self.spec.n_per_axis;
        let area = self.spec.cell_area();
        let mut m = Moments::default();
        for i in 0..n {
            for j in 0..n {
                if !self.in_domain(i, j) {
                    continue;
                }
                let v = self.spec.node(i, j);
                let f = self.values[i * n + j];
                m.mass += f;
                m.px += f * v.x;
                m.py += f * v.y;
                m.energy += f * v.norm_sq();
            }
        }
        m.mass *= area;
        m.px *= area;
        m.py *= area;
        m.energy *= area;
        m
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "x,y,value")?;
        let n = self.spec.n_per_axis;
        for i in 0..n {
            for j in 0..n {
                let v = self.spec.node(i, j);
                writeln!(w, "{},{},{}", v.x, v.y, self.values[i * n + j])?;
            }
        }
        Ok(())
    }

    /// Raw binary: two little-endian `i64` (n, n) then row-major little-endian `f64`.
    pub fn write_binary_to(&self, w: &mut impl Write) -> Result<()> {
        let n = self.spec.n_per_axis as i64;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&n.to_le_bytes())?;
        for x in &self.values {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write_binary_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads the binary format back; extent and floor are not stored and must be supplied.
    pub fn read_binary_from(
        r: &mut impl Read,
        half_extent: f64,
        r_domain: f64,
        floor: f64,
    ) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n0 = i64::from_le_bytes(word);
        r.read_exact(&mut word)?;
        let n1 = i64::from_le_bytes(word);
        if n0 != n1 || n0 < 2 {
            return Err(Error::invalid(
                "binary_header",
                format!("expected square grid header, got ({n0}, {n1})"),
            ));
        }
        let spec = GridSpec::new(half_extent, n0 as usize)?;
        let mut values = Vec::with_capacity(spec.len());
        for _ in 0..spec.len() {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        Ok(ScalarGridField {
            spec,
            values,
            floor,
            r_domain,
            analytic: None,
        })
    }
}

#[inline]
fn cell(u: f64, n: usize) -> (usize, f64) {
    let mut i = u.floor();
    let mut t = u - i;
    if t > 1.0 - SNAP {
        i += 1.0;
        t = 0.0;
    } else if t < SNAP {
        t = 0.0;
    }
    let i = (i.max(0.0) as usize).min(n - 1);
    if i == n - 1 {
        // on the last node; t is zero after snapping
        (n - 2, if t == 0.0 { 1.0 } else { t })
    } else {
        (i, t)
    }
}

/// Integrals of `1`, `v_x`, `v_y` and `|v|^2` against some field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mass: f64,
    pub px: f64,
    pub py: f64,
    pub energy: f64,
}

impl Density for ScalarGridField {
    #[inline]
    fn eval(&self, v: Velocity) -> f64 {
        self.interpolate(v)
    }

    fn domain_radius(&self) -> f64 {
        self.r_domain
    }
}

/// Samples a profile on the grid, keeping the profile attached for off-grid evaluation.
pub fn profile_to_grid(profile: &RadialStepProfile, spec: GridSpec) -> Result<ScalarGridField> {
    let limit = profile.feature_width() / 5.0;
    if spec.spacing() > limit * (1.0 + 1e-12) {
        return Err(Error::GridTooCoarse {
            spacing: spec.spacing(),
            feature: profile.feature_width(),
            limit,
        });
    }
    if spec.half_extent < profile.r_domain() {
        return Err(Error::invalid(
            "half_extent",
            format!(
                "grid half extent {} does not cover r_domain {}",
                spec.half_extent,
                profile.r_domain()
            ),
        ));
    }
    let mut field =
        ScalarGridField::from_fn(spec, profile.r_domain(), profile.floor(), |v| profile.eval(v));
    field.analytic = Some(profile.clone());
    Ok(field)
}

/// `grid_interpolate` in free-function form.
pub fn grid_interpolate(field: &ScalarGridField, v: Velocity) -> f64 {
    field.interpolate(v)
}
