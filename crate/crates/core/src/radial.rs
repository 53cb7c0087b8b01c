//! Radially symmetric densities on a cell-centered finite-volume grid.
//!
//! Cells are spherical shells with exact volumes alpha(n) (r_{i+1}^n - r_i^n),
//! so integral functionals of piecewise-constant data (mass, L^p norms,
//! second moment) are exact, not quadrature approximations. The second-moment
//! weight of a cell is likewise the exact integral of n alpha(n) r^{n+1}.

use std::io::{BufRead, Write};
use std::sync::Arc;

use gauss_quad::GaussLegendre;

use crate::criterion::unit_ball_volume;
use crate::error::{Error, Result};

/// Cell spacing of a radial grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spacing {
    Uniform,
    /// Each cell wider than the previous by `ratio` (> 1 concentrates cells
    /// near the origin, where blow-up runs need them).
    Geometric {
        ratio: f64,
    },
}

/// A fixed radial mesh on [0, r_max] with precomputed shell geometry.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    n: u32,
    alpha_n: f64,
    edges: Vec<f64>,
    centers: Vec<f64>,
    volumes: Vec<f64>,
    /// Exact per-cell second-moment weight: n alpha(n) (r_{i+1}^{n+2} - r_i^{n+2})/(n+2).
    m2_weights: Vec<f64>,
    /// Shell surface area n alpha(n) r^{n-1} at every face (zero at r = 0).
    face_areas: Vec<f64>,
}

impl RadialGrid {
    /// Builds a grid with `cells` >= 8 shells on (0, r_max].
    pub fn new(n: u32, r_max: f64, cells: usize, spacing: Spacing) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::domain(format!(
                "r_max must be positive, got {r_max}"
            )));
        }
        if cells < 8 {
            return Err(Error::domain(format!(
                "at least 8 cells required, got {cells}"
            )));
        }
        let mut edges = Vec::with_capacity(cells + 1);
        match spacing {
            Spacing::Uniform => {
                for i in 0..=cells {
                    edges.push(r_max * i as f64 / cells as f64);
                }
            }
            Spacing::Geometric { ratio } => {
                if !(ratio > 1.0) || !ratio.is_finite() {
                    return Err(Error::domain(format!(
                        "geometric ratio must exceed 1, got {ratio}"
                    )));
                }
                // widths h0 * ratio^i scaled so the edges end exactly at r_max
                let total = (ratio.powi(cells as i32) - 1.0) / (ratio - 1.0);
                if !total.is_finite() {
                    return Err(Error::domain(format!(
                        "geometric ratio {ratio} overflows for {cells} cells"
                    )));
                }
                let h0 = r_max / total;
                let mut r = 0.0;
                let mut h = h0;
                edges.push(0.0);
                for _ in 0..cells - 1 {
                    r += h;
                    edges.push(r);
                    h *= ratio;
                }
                edges.push(r_max);
            }
        }
        Self::from_edges(n, edges)
    }

    /// Builds a grid from an explicit ascending edge vector starting at 0.
    pub fn from_edges(n: u32, edges: Vec<f64>) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("grid dimension must be >= 1"));
        }
        if edges.len() < 2 || edges[0] != 0.0 {
            return Err(Error::domain(
                "edges must start at 0 and contain >= 2 entries",
            ));
        }
        for w in edges.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::domain("edges must be strictly increasing"));
            }
        }
        let alpha_n = unit_ball_volume(n)?;
        let nf = n as f64;
        let cells = edges.len() - 1;
        let mut centers = Vec::with_capacity(cells);
        let mut volumes = Vec::with_capacity(cells);
        let mut m2_weights = Vec::with_capacity(cells);
        let mut face_areas = Vec::with_capacity(cells + 1);
        face_areas.push(0.0);
        for i in 0..cells {
            let (a, b) = (edges[i], edges[i + 1]);
            centers.push(0.5 * (a + b));
            volumes.push(alpha_n * (b.powi(n as i32) - a.powi(n as i32)));
            m2_weights
                .push(nf * alpha_n * (b.powi(n as i32 + 2) - a.powi(n as i32 + 2)) / (nf + 2.0));
            face_areas.push(nf * alpha_n * b.powi(n as i32 - 1));
        }
        Ok(Self {
            n,
            alpha_n,
            edges,
            centers,
            volumes,
            m2_weights,
            face_areas,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn alpha_n(&self) -> f64 {
        self.alpha_n
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    pub fn r_max(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn m2_weights(&self) -> &[f64] {
        &self.m2_weights
    }

    /// Face areas n alpha(n) r^{n-1}, indexed like `edges`.
    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    /// Index of the edge equal to `r` (within a few ulp), if any.
    pub fn aligned_edge(&self, r: f64) -> Option<usize> {
        self.edges
            .iter()
            .position(|&e| (e - r).abs() <= 4.0 * f64::EPSILON * r.abs())
    }
}

/// Cell-averaged nonnegative density on a shared radial grid.
#[derive(Debug, Clone)]
pub struct DensityField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::domain(format!(
                "value count {} does not match cell count {}",
                values.len(),
                grid.cells()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain("density values must be finite and >= 0"));
        }
        Ok(Self { grid, values })
    }

    pub fn zero(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.cells()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total mass, exact for the piecewise-constant representation.
    pub fn mass(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.grid.volumes)
            .map(|(v, vol)| v * vol)
            .sum()
    }

    /// Mass held by the outermost shell; truncation is negligible when this
    /// is far below the total.
    pub fn tail_mass(&self) -> f64 {
        let i = self.values.len() - 1;
        self.values[i] * self.grid.volumes[i]
    }

    /// Same grid (pointer or geometry) as another field.
    pub fn same_grid(&self, other: &DensityField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
            || (self.grid.n == other.grid.n && self.grid.edges == other.grid.edges)
    }
}

/// L^p norm, p >= 1. For nonnegative fields p = 1 equals the mass.
pub fn lp_norm(rho: &DensityField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::domain(format!("L^p norm requires p >= 1, got {p}")));
    }
    let grid = rho.grid();
    let sum: f64 = rho
        .values()
        .iter()
        .zip(grid.volumes())
        .map(|(v, vol)| if p == 1.0 { v * vol } else { v.powf(p) * vol })
        .sum();
    Ok(if p == 1.0 { sum } else { sum.powf(1.0 / p) })
}

/// L^(2n/(n+2)) norm: the quantity the dichotomy thresholds.
pub fn lcrit_norm(rho: &DensityField) -> f64 {
    let n = rho.grid().n() as f64;
    lp_norm(rho, 2.0 * n / (n + 2.0)).expect("2n/(n+2) >= 1 for n >= 2")
}

/// Second moment m2 = integral of |x|^2 rho, exact per cell.
pub fn second_moment(rho: &DensityField) -> f64 {
    rho.values()
        .iter()
        .zip(rho.grid().m2_weights())
        .map(|(v, w)| v * w)
        .sum()
}

fn projection_rule() -> &'static GaussLegendre {
    use std::sync::OnceLock;
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8).expect("degree 8 rule"))
}

/// Projects a radial profile onto the grid by volume-weighted cell averages
/// (8-point Gauss-Legendre per cell). Errors if the profile is negative
/// anywhere it is sampled.
pub fn project_profile(
    grid: &Arc<RadialGrid>,
    profile: impl Fn(f64) -> f64,
) -> Result<DensityField> {
    let nf = grid.n() as f64;
    let rule = projection_rule();
    let mut values = Vec::with_capacity(grid.cells());
    let negative = std::cell::Cell::new(None);
    for i in 0..grid.cells() {
        let (a, b) = (grid.edges()[i], grid.edges()[i + 1]);
        let integral = rule.integrate(a, b, |r| {
            let v = profile(r);
            if v < 0.0 && negative.get().is_none() {
                negative.set(Some(r));
            }
            v * nf * grid.alpha_n() * r.powi(grid.n() as i32 - 1)
        });
        values.push(integral / grid.volumes()[i]);
    }
    if let Some(r) = negative.get() {
        return Err(Error::domain(format!("profile is negative at r = {r}")));
    }
    // cell averages of a nonnegative profile can round to tiny negatives
    for v in &mut values {
        if *v < 0.0 && *v > -1e-300 {
            *v = 0.0;
        }
    }
    DensityField::new(Arc::clone(grid), values)
}

/// Pointwise value of the sharp-inequality extremal profile
/// U_lambda(r) = 2^((n+2)/4) n^((n+2)/2) (lambda / (lambda^2 + r^2))^((n+2)/2).
pub fn extremal_profile_value(n: u32, lambda: f64, r: f64) -> f64 {
    let nf = n as f64;
    let e = (nf + 2.0) / 2.0;
    2.0_f64.powf(e / 2.0) * nf.powf(e) * (lambda / (lambda * lambda + r * r)).powf(e)
}

/// Projects U_lambda onto the grid. Its L^(2n/(n+2)) norm is independent of
/// lambda, which the tests exploit as a scale-invariance check.
pub fn extremal_profile(grid: &Arc<RadialGrid>, lambda: f64) -> Result<DensityField> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let n = grid.n();
    project_profile(grid, move |r| extremal_profile_value(n, lambda, r))
}

/// Writes the plain-text snapshot format: one header line
/// `# n=<int> r_max=<real> cells=<int>`, then one `r_center value` pair per
/// line, reals with 17 significant digits so the file round-trips bit-exactly.
pub fn write_snapshot(rho: &DensityField, mut out: impl Write) -> Result<()> {
    let g = rho.grid();
    writeln!(
        out,
        "# n={} r_max={:.16e} cells={}",
        g.n(),
        g.r_max(),
        g.cells()
    )?;
    for (r, v) in g.centers().iter().zip(rho.values()) {
        writeln!(out, "{:.16e} {:.16e}", r, v)?;
    }
    Ok(())
}

pub fn save_snapshot(rho: &DensityField, path: impl AsRef<std::path::Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut buf = std::io::BufWriter::new(file);
    write_snapshot(rho, &mut buf)?;
    buf.flush()?;
    Ok(())
}

/// Reads a snapshot back. Edges are reconstructed from the midpoint identity
/// r_{i+1} = 2 c_i - r_i (cell centers are always edge midpoints here), and
/// the final edge is checked against the header r_max.
pub fn read_snapshot(input: impl BufRead) -> Result<DensityField> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Snapshot("empty snapshot".into()))??;
    let rest = header
        .strip_prefix("# ")
        .ok_or_else(|| Error::Snapshot("missing `# ` header".into()))?;
    let mut n = None;
    let mut r_max = None;
    let mut cells = None;
    for tok in rest.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| Error::Snapshot(format!("bad header token `{tok}`")))?;
        match key {
            "n" => {
                n = Some(
                    val.parse::<u32>()
                        .map_err(|e| Error::Snapshot(e.to_string()))?,
                )
            }
            "r_max" => {
                r_max = Some(
                    val.parse::<f64>()
                        .map_err(|e| Error::Snapshot(e.to_string()))?,
                )
            }
            "cells" => {
                cells = Some(
                    val.parse::<usize>()
                        .map_err(|e| Error::Snapshot(e.to_string()))?,
                )
            }
            _ => return Err(Error::Snapshot(format!("unknown header key `{key}`"))),
        }
    }
    let (n, r_max, cells) = match (n, r_max, cells) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(Error::Snapshot(
                "header must carry n, r_max and cells".into(),
            ))
        }
    };

    let mut centers = Vec::with_capacity(cells);
    let mut values = Vec::with_capacity(cells);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (r, v) = match (it.next(), it.next(), it.next()) {
            (Some(r), Some(v), None) => (r, v),
            _ => return Err(Error::Snapshot(format!("expected `r value`, got `{line}`"))),
        };
        centers.push(
            r.parse::<f64>()
                .map_err(|e| Error::Snapshot(e.to_string()))?,
        );
        values.push(
            v.parse::<f64>()
                .map_err(|e| Error::Snapshot(e.to_string()))?,
        );
    }
    if centers.len() != cells {
        return Err(Error::Snapshot(format!(
            "header promises {cells} cells, file has {}",
            centers.len()
        )));
    }

    let mut edges = Vec::with_capacity(cells + 1);
    edges.push(0.0);
    for (i, c) in centers.iter().enumerate() {
        let next = 2.0 * c - edges[i];
        if !(next > edges[i]) {
            return Err(Error::Snapshot(format!(
                "centers not increasing near row {i}"
            )));
        }
        edges.push(next);
    }
    let last = *edges.last().unwrap();
    if (last - r_max).abs() > 1e-9 * r_max.abs() {
        return Err(Error::Snapshot(format!(
            "reconstructed r_max {last} does not match header {r_max}"
        )));
    }
    *edges.last_mut().unwrap() = r_max;
    let mut grid = RadialGrid::from_edges(n, edges)?;
    // keep the centers exactly as stored so a rewrite is byte-identical
    grid.centers.clone_from(&centers);
    DensityField::new(Arc::new(grid), values)
}

pub fn load_snapshot(path: impl AsRef<std::path::Path>) -> Result<DensityField> {
    let file = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(file))
}
