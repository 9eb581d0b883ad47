//! Analytic single-photon transverse states sampled on a uniform grid.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{ExperimentParams, PhotonContext, HBAR};

/// Uniform 1-D transverse grid. Sample `i` sits at `x_min + i·dx` and stands
/// for the cell `[x_i - dx/2, x_i + dx/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub n_points: usize,
    pub dx: f64,
}

/// Resolution and extent of the simulation grid, in units of the position slit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_points: usize,
    /// Cells across the position slit. Odd values put the slit edges on cell boundaries.
    pub points_per_slit: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: 1 << 17,
            points_per_slit: 25,
        }
    }
}

impl Grid {
    pub fn new(x_min: f64, n_points: usize, dx: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::grid(format!(
                "need at least 2 points, got {n_points}"
            )));
        }
        if !(dx.is_finite() && dx > 0.0) || !x_min.is_finite() {
            return Err(Error::grid(format!("bad spacing {dx} or origin {x_min}")));
        }
        Ok(Self {
            x_min,
            n_points,
            dx,
        })
    }

    /// `n_points` cells covering `[-half_width, half_width)`, with a sample at `x = 0`.
    pub fn centered(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::grid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        Self::new(-half_width, n_points, 2.0 * half_width / n_points as f64)
    }

    /// Grid with spacing `slit / points_per_slit`, centred on zero.
    pub fn for_slit(slit: f64, config: GridConfig) -> Result<Self> {
        if config.points_per_slit == 0 {
            return Err(Error::grid("points_per_slit must be positive"));
        }
        let dx = slit / config.points_per_slit as f64;
        Self::new(-((config.n_points / 2) as f64) * dx, config.n_points, dx)
    }

    pub fn for_params(params: &ExperimentParams, config: GridConfig) -> Result<Self> {
        Self::for_slit(params.slit_l, config)
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    /// Lower edge of the first cell and upper edge of the last one.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.x_min - 0.5 * self.dx,
            self.x(self.n_points - 1) + 0.5 * self.dx,
        )
    }

    /// Fraction of cell `i` that lies inside `[a, b]`.
    pub fn cell_fraction(&self, i: usize, a: f64, b: f64) -> f64 {
        let x = self.x(i);
        let lo = (x - 0.5 * self.dx).max(a);
        let hi = (x + 0.5 * self.dx).min(b);
        ((hi - lo) / self.dx).clamp(0.0, 1.0)
    }

    /// Indices of the cells touching `[a, b]`, clipped to the grid.
    pub fn cell_range(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let first = ((a - self.x_min) / self.dx + 0.5).floor().max(0.0) as usize;
        let last = ((b - self.x_min) / self.dx + 0.5).floor().max(-1.0) + 1.0;
        let last = (last as usize).min(self.n_points);
        first.min(last)..last
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        let tol = 1e-12 * self.dx;
        self.n_points == other.n_points
            && (self.dx - other.dx).abs() <= tol
            && (self.x_min - other.x_min).abs() <= tol * self.n_points as f64
    }
}

/// Complex amplitudes (units m^-1/2) sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub grid: Grid,
    pub amplitudes: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points {
            return Err(Error::invalid(format!(
                "{} amplitudes for a grid of {} points",
                amplitudes.len(),
                grid.n_points
            )));
        }
        if amplitudes
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(Error::invalid("non-finite amplitude"));
        }
        Ok(Self { grid, amplitudes })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = grid.positions().map(f).collect();
        Self { grid, amplitudes }
    }

    /// `Σ |ψ|² dx`.
    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
        self
    }

    pub fn normalized(self) -> Result<Self> {
        let n = self.norm_sq();
        if !(n > 0.0) {
            return Err(Error::invalid("cannot normalise a zero state"));
        }
        Ok(self.scaled(n.sqrt().recip()))
    }

    /// `(Σ |a - b|² dx)^½` between two states on the same grid.
    pub fn l2_distance(&self, other: &WaveFunction) -> Result<f64> {
        check_same_grid(&self.grid, &other.grid)?;
        let s: f64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.grid.dx).sqrt())
    }

    /// Writes `x_m,re_amplitude,im_amplitude` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (x, a) in self.grid.positions().zip(&self.amplitudes) {
            w.serialize(AmplitudeRow {
                x_m: x,
                re_amplitude: a.re,
                im_amplitude: a.im,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut xs = Vec::new();
        let mut amps = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: AmplitudeRow = row?;
            xs.push(row.x_m);
            amps.push(Complex64::new(row.re_amplitude, row.im_amplitude));
        }
        let grid = grid_from_positions(&xs)?;
        Self::new(grid, amps)
    }
}

#[derive(Serialize, Deserialize)]
struct AmplitudeRow {
    x_m: f64,
    re_amplitude: f64,
    im_amplitude: f64,
}

/// Rebuilds a grid from sample positions, requiring uniform spacing.
pub fn grid_from_positions(xs: &[f64]) -> Result<Grid> {
    if xs.len() < 2 {
        return Err(Error::grid("need at least two positions"));
    }
    let n = xs.len();
    let dx = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    for (i, x) in xs.iter().enumerate() {
        if (x - (xs[0] + i as f64 * dx)).abs() > 1e-6 * dx {
            return Err(Error::grid(format!(
                "positions are not uniform near index {i}"
            )));
        }
    }
    Grid::new(xs[0], n, dx)
}

pub(crate) fn check_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::invalid("states live on different grids"))
    }
}

/// `sin(u)/u` with the removable singularity filled in.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

/// Uniform state over `[-L/2, L/2]`. Cells cut by a slit edge carry the
/// density of the covered fraction, so the norm is exact on any grid.
pub fn box_position_state(slit: f64, grid: Grid) -> Result<WaveFunction> {
    if !(slit.is_finite() && slit > 0.0) {
        return Err(Error::invalid(format!(
            "slit width must be positive, got {slit}"
        )));
    }
    let (lo, hi) = grid.extent();
    if lo > -0.5 * slit || hi < 0.5 * slit {
        return Err(Error::grid(format!(
            "grid [{lo:e}, {hi:e}] does not cover the slit {slit:e}"
        )));
    }
    if grid.dx > slit / 5.0 {
        return Err(Error::grid(format!(
            "spacing {:e} too coarse for slit {slit:e}",
            grid.dx
        )));
    }
    let amp = slit.sqrt().recip();
    let amplitudes = (0..grid.n_points)
        .map(|i| {
            Complex64::new(
                amp * grid.cell_fraction(i, -0.5 * slit, 0.5 * slit).sqrt(),
                0.0,
            )
        })
        .collect();
    Ok(WaveFunction { grid, amplitudes })
}

/// Position profile of a state whose momentum distribution is flat over
/// `[-B/2, B/2]`: `√(B/2πħ)·sinc(Bx/2ħ)`, renormalised on the finite grid.
pub fn sinc_momentum_state(momentum_b: f64, grid: Grid) -> Result<WaveFunction> {
    if !(momentum_b.is_finite() && momentum_b > 0.0) {
        return Err(Error::invalid(format!(
            "momentum width must be positive, got {momentum_b}"
        )));
    }
    let prefactor = (momentum_b / (2.0 * PI * HBAR)).sqrt();
    let k = momentum_b / (2.0 * HBAR);
    let raw = WaveFunction::from_fn(grid, |x| Complex64::new(prefactor * sinc(k * x), 0.0));
    let norm = raw.norm_sq();
    if (1.0 - norm).abs() > 0.01 {
        return Err(Error::grid(format!(
            "grid captures only {norm:.4} of the sinc state; widen it"
        )));
    }
    raw.normalized()
}

/// Far-field form of the freely evolved slit state,
/// `√(mL/2πħt)·sinc(mLx/2ħt)·exp(i m x²/2ħt - iπ/4)`. Not renormalised.
pub fn evolved_position_state(
    slit: f64,
    t: f64,
    ctx: &PhotonContext,
    grid: Grid,
) -> Result<WaveFunction> {
    if !(slit.is_finite() && slit > 0.0) {
        return Err(Error::invalid(format!(
            "slit width must be positive, got {slit}"
        )));
    }
    let m = ctx.effective_mass;
    let t_min = m * slit * slit / (2.0 * PI * ctx.hbar);
    if !(t > t_min) {
        return Err(Error::Domain(format!(
            "t = {t:e} s is inside the near-field region (needs t > {t_min:e} s)"
        )));
    }
    let prefactor = (m * slit / (2.0 * PI * ctx.hbar * t)).sqrt();
    let k = m * slit / (2.0 * ctx.hbar * t);
    let chirp = m / (2.0 * ctx.hbar * t);
    Ok(WaveFunction::from_fn(grid, |x| {
        Complex64::from_polar(prefactor * sinc(k * x), chirp * x * x - 0.25 * PI)
    }))
}

/// `Σ conj(a)·b·dx`.
pub fn overlap(a: &WaveFunction, b: &WaveFunction) -> Result<Complex64> {
    check_same_grid(&a.grid, &b.grid)?;
    let s: Complex64 = a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(s * a.grid.dx)
}

/// `(ψ_L + ψ_B) / √(2(1 + ⟨L|B⟩))`.
pub fn superposition(psi_l: &WaveFunction, psi_b: &WaveFunction) -> Result<WaveFunction> {
    let s = overlap(psi_l, psi_b)?;
    if s.im.abs() > 1e-6 {
        return Err(Error::invalid(format!("overlap {s} is not real")));
    }
    let denom = 1.0 + s.re;
    if denom <= 1e-12 {
        return Err(Error::DegenerateSuperposition(denom));
    }
    let c = (2.0 * denom).sqrt().recip();
    let amplitudes = psi_l
        .amplitudes
        .iter()
        .zip(&psi_b.amplitudes)
        .map(|(a, b)| (a + b) * c)
        .collect();
    Ok(WaveFunction {
        grid: psi_l.grid,
        amplitudes,
    })
}
