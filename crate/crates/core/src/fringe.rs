//! Photon-counting fringe profiles: synthesis from a density, weighted
//! Levenberg-Marquardt fit of the two-path model, and interval probabilities
//! read back from the fitted continuous density.
//!
//! The fit model is a slit component (box of width `w`, or a Gaussian of the
//! same rms width) plus a sinc component `√(k/π) sinc(kx)`, optionally evolved
//! in free space, combined with visibility `V`. In the position plane the slit
//! is `|L⟩` and the sinc is `|B⟩`; in the lens focal plane the roles swap.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::ExperimentParams;
use crate::probabilities::{
    defect_probability, DefectInputs, Density, IntervalGeometry, IntervalProbabilityReport,
};
use crate::states::Grid;

const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
const MAX_PANELS: usize = 1 << 14;

fn gauss_legendre<T, F>(f: F, a: f64, b: f64, panels: usize) -> T
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(f64) -> T,
{
    let panels = panels.clamp(1, MAX_PANELS);
    let h = (b - a) / panels as f64;
    let mut sum = T::default();
    for j in 0..panels {
        let mid = a + (j as f64 + 0.5) * h;
        let half = 0.5 * h;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            sum = sum + f(mid - half * x) * (w * half) + f(mid + half * x) * (w * half);
        }
    }
    sum
}

fn panels_for(span: f64, step: f64) -> usize {
    if step > 0.0 && step.is_finite() {
        (span.abs() / step).ceil() as usize
    } else {
        1
    }
}

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// Shape used for the slit component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SlitProfile {
    #[default]
    Box,
    /// Gaussian with the box's rms width, `σ = w/√12`.
    Gaussian,
}

/// Plane in which a profile was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitPlane {
    /// Transverse position a distance `z` after the slits (`z = 0` at the slits).
    #[default]
    Position,
    /// Focal plane of the Fourier lens, `x' = f p / p_total`.
    Momentum,
}

/// Continuous two-path density in model coordinates (origin at the fringe centre).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPathModel {
    pub profile: SlitProfile,
    /// Slit width.
    pub width: f64,
    /// Sinc wavenumber `k` (first zero at `π/k`).
    pub wavenumber: f64,
    /// Free-evolution parameter `ħt/2m = λz/4π` (m²).
    pub tau: f64,
    pub visibility: f64,
    overlap: f64,
}

impl TwoPathModel {
    pub fn new(
        profile: SlitProfile,
        width: f64,
        wavenumber: f64,
        tau: f64,
        visibility: f64,
    ) -> Result<Self> {
        if !(width > 0.0 && width.is_finite() && wavenumber > 0.0 && wavenumber.is_finite()) {
            return Err(Error::invalid(format!(
                "bad model widths w = {width}, k = {wavenumber}"
            )));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!(
                "evolution parameter must be non-negative, got {tau}"
            )));
        }
        let mut m = Self {
            profile,
            width,
            wavenumber,
            tau,
            visibility,
            overlap: 0.0,
        };
        m.overlap = m.compute_overlap();
        Ok(m)
    }

    pub fn evolved(&self, tau: f64) -> Result<Self> {
        Self::new(
            self.profile,
            self.width,
            self.wavenumber,
            tau,
            self.visibility,
        )
    }

    fn sigma(&self) -> f64 {
        self.width / 12f64.sqrt()
    }

    /// `⟨slit|sinc⟩`, real and independent of the evolution.
    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    fn compute_overlap(&self) -> f64 {
        let k = self.wavenumber;
        match self.profile {
            SlitProfile::Box => {
                let half = 0.5 * self.width;
                let n = panels_for(k * self.width, 1.0);
                (k / (PI * self.width)).sqrt()
                    * gauss_legendre(|y: f64| sinc(k * y), -half, half, n)
            }
            SlitProfile::Gaussian => {
                let s = self.sigma();
                let n = panels_for(k * s, 0.5);
                (2.0 * s * s / PI).powf(0.25) / (2.0 * k).sqrt()
                    * gauss_legendre(|q: f64| (-s * s * q * q).exp(), -k, k, n)
            }
        }
    }

    /// Slit and sinc amplitudes at `x`.
    pub fn components(&self, x: f64) -> (Complex64, Complex64) {
        let (w, k, tau) = (self.width, self.wavenumber, self.tau);
        if tau == 0.0 {
            let slit = match self.profile {
                SlitProfile::Box => {
                    if x.abs() < 0.5 * w {
                        1.0 / w.sqrt()
                    } else {
                        0.0
                    }
                }
                SlitProfile::Gaussian => {
                    let s = self.sigma();
                    (2.0 * PI * s * s).powf(-0.25) * (-x * x / (4.0 * s * s)).exp()
                }
            };
            return (
                Complex64::new(slit, 0.0),
                Complex64::new((k / PI).sqrt() * sinc(k * x), 0.0),
            );
        }
        let slit = match self.profile {
            SlitProfile::Box => {
                let beta = 0.25 / tau;
                let half = 0.5 * w;
                let n = panels_for(2.0 * beta * (x.abs() + half) * w, 1.5);
                let integral: Complex64 = gauss_legendre(
                    |y: f64| Complex64::from_polar(1.0, beta * (x - y) * (x - y)),
                    -half,
                    half,
                    n,
                );
                (Complex64::new(beta / PI, 0.0) / Complex64::i()).sqrt() * integral / w.sqrt()
            }
            SlitProfile::Gaussian => {
                let s2 = self.sigma().powi(2);
                let c = Complex64::new(s2, tau);
                (2.0 * PI * s2).powf(-0.25) * (c / s2).sqrt().inv() * (-x * x / (4.0 * c)).exp()
            }
        };
        let n = panels_for(2.0 * k * (x.abs() + 2.0 * k * tau), 1.5);
        let sinc_part: Complex64 = gauss_legendre(
            |q: f64| Complex64::from_polar(1.0, q * x - q * q * tau),
            -k,
            k,
            n,
        ) / (4.0 * PI * k).sqrt();
        (slit, sinc_part)
    }

    /// Normalised density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        let (a, b) = self.components(x);
        (a.norm_sqr() + b.norm_sqr() + 2.0 * self.visibility * (a.conj() * b).re)
            / (2.0 + 2.0 * self.visibility * self.overlap)
    }

    /// Integral of the density over `[a, b]`.
    pub fn interval(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut step = 0.5 * self.width.min(PI / self.wavenumber);
        if self.tau > 0.0 {
            step = step.min(1.5 * 2.0 * self.tau / a.abs().max(b.abs()).max(self.width));
        }
        let piece = |lo: f64, hi: f64| {
            gauss_legendre(|x| self.density(x), lo, hi, panels_for(hi - lo, step))
        };
        if self.tau == 0.0 && self.profile == SlitProfile::Box {
            let half = 0.5 * self.width;
            let mut cuts = vec![a];
            cuts.extend([-half, half].into_iter().filter(|c| *c > a && *c < b));
            cuts.push(b);
            cuts.windows(2).map(|c| piece(c[0], c[1])).sum()
        } else {
            piece(a, b)
        }
    }

    /// Probability that the conjugate variable (wavenumber, or position for
    /// a focal-plane model) lies in `(-kmax, kmax)`.
    pub fn conjugate_interval(&self, kmax: f64) -> f64 {
        let k = self.wavenumber;
        let w = self.width;
        let inner = kmax.min(k);
        let slit_amp = |q: f64| match self.profile {
            SlitProfile::Box => (w / (2.0 * PI)).sqrt() * sinc(0.5 * q * w),
            SlitProfile::Gaussian => {
                let s = self.sigma();
                (2.0 * s * s / PI).powf(0.25) * (-s * s * q * q).exp()
            }
        };
        let n = |span: f64| panels_for(span * w, 0.5);
        let slit_sq = gauss_legendre(|q: f64| slit_amp(q).powi(2), -kmax, kmax, n(2.0 * kmax));
        let cross = gauss_legendre(slit_amp, -inner, inner, n(2.0 * inner)) / (2.0 * k).sqrt();
        (slit_sq + inner / k + 2.0 * self.visibility * cross)
            / (2.0 + 2.0 * self.visibility * self.overlap)
    }
}

/// Where and what a profile is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FringeMeta {
    /// Distance from the slits (m); ignored for focal-plane profiles.
    pub z: f64,
    pub label: String,
}

/// One-dimensional photon-count profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeDataset {
    pub positions: Vec<f64>,
    pub counts: Vec<u64>,
    pub total_counts: u64,
    pub meta: FringeMeta,
}

impl FringeDataset {
    pub fn new(positions: Vec<f64>, counts: Vec<u64>, meta: FringeMeta) -> Result<Self> {
        if positions.len() != counts.len() {
            return Err(Error::invalid("positions and counts differ in length"));
        }
        if positions.len() < 2 {
            return Err(Error::invalid("a profile needs at least two pixels"));
        }
        if positions.iter().any(|x| !x.is_finite()) || positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "pixel positions must be finite and strictly increasing",
            ));
        }
        let pitch = (positions[positions.len() - 1] - positions[0]) / (positions.len() - 1) as f64;
        if positions
            .windows(2)
            .any(|w| ((w[1] - w[0]) - pitch).abs() > 1e-6 * pitch)
        {
            return Err(Error::invalid("pixel positions must be uniformly spaced"));
        }
        let total_counts = counts.iter().sum();
        Ok(Self {
            positions,
            counts,
            total_counts,
            meta,
        })
    }

    pub fn pitch(&self) -> f64 {
        (self.positions[self.positions.len() - 1] - self.positions[0])
            / (self.positions.len() - 1) as f64
    }

    /// Same positions, counts multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        let counts: Vec<u64> = self.counts.iter().map(|c| c * factor).collect();
        Self {
            total_counts: counts.iter().sum(),
            counts,
            positions: self.positions.clone(),
            meta: self.meta.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x_m", "counts"])?;
        for (x, c) in self.positions.iter().zip(&self.counts) {
            w.write_record([format!("{x:e}"), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, meta: FringeMeta) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x_m", "counts"] {
            return Err(Error::invalid(format!(
                "unexpected fringe header {headers:?}"
            )));
        }
        let mut positions = Vec::new();
        let mut counts = Vec::new();
        for record in r.records() {
            let record = record?;
            positions.push(
                record[0]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad x_m {:?}: {e}", &record[0])))?,
            );
            counts.push(record[1].trim().parse::<u64>().map_err(|e| {
                Error::invalid(format!(
                    "counts must be non-negative integers, got {:?}: {e}",
                    &record[1]
                ))
            })?);
        }
        Self::new(positions, counts, meta)
    }
}

/// Expected counts per pixel, `n_photons · ∫ density` over each pixel.
pub fn expected_counts(density: &Density, pixels: &Grid, n_photons: f64) -> Result<Vec<f64>> {
    let (lo, hi) = (
        density.grid.x_min,
        density.grid.x_min + density.grid.n_points as f64 * density.grid.dx,
    );
    (0..pixels.n_points)
        .map(|i| {
            let a = (pixels.x(i) - 0.5 * pixels.dx).max(lo);
            let b = (pixels.x(i) + 0.5 * pixels.dx).min(hi);
            if b > a {
                density.integrate(a, b).map(|p| n_photons * p.max(0.0))
            } else {
                Ok(0.0)
            }
        })
        .collect()
}

/// Poisson counts with mean `n_photons · ∫ density` per pixel.
pub fn synthesize_fringe(
    density: &Density,
    pixels: &Grid,
    n_photons: u64,
    seed: u64,
    meta: FringeMeta,
) -> Result<FringeDataset> {
    if n_photons == 0 {
        return Err(Error::invalid("n_photons must be at least 1"));
    }
    let total = density.total();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "density integrates to {total}, expected 1"
        )));
    }
    let means = expected_counts(density, pixels, n_photons as f64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = means
        .iter()
        .map(|&mu| {
            if mu > 0.0 {
                Poisson::new(mu)
                    .map(|d| d.sample(&mut rng) as u64)
                    .map_err(|e| Error::invalid(e.to_string()))
            } else {
                Ok(0)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    FringeDataset::new(pixels.positions().collect(), counts, meta)
}

/// Model choice and the nominal geometry that seeds the widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub plane: FitPlane,
    pub profile: SlitProfile,
    pub params: ExperimentParams,
}

impl FitConfig {
    pub fn new(plane: FitPlane, profile: SlitProfile, params: ExperimentParams) -> Self {
        Self {
            plane,
            profile,
            params,
        }
    }

    /// `p_total / (f ħ)`: focal-plane position to wavenumber.
    fn lens_scale(&self) -> f64 {
        let ctx = &self.params.context;
        ctx.total_momentum / (self.params.focal_f * ctx.hbar)
    }

    /// Nominal `(w, k)` for this plane.
    pub fn nominal_widths(&self) -> (f64, f64) {
        let p = &self.params;
        match self.plane {
            FitPlane::Position => (p.slit_l, p.momentum_b / (2.0 * p.context.hbar)),
            FitPlane::Momentum => (p.slit_l_prime, 0.5 * self.lens_scale() * p.slit_l),
        }
    }

    /// Evolution parameter of a profile recorded at distance `z`.
    pub fn tau_at(&self, z: f64) -> f64 {
        match self.plane {
            FitPlane::Position => self.params.context.wavelength * z / (4.0 * PI),
            FitPlane::Momentum => 0.0,
        }
    }
}

/// Fitted fringe parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub visibility: f64,
    pub center: f64,
    /// Photons in the full (unwindowed) profile.
    pub amplitude: f64,
    /// Counts per pixel.
    pub background: f64,
    /// Slit width and sinc half-width `π/k`, in profile coordinates (m).
    pub width_params: Vec<f64>,
    pub rms_residual: f64,
    pub converged: bool,
}

impl FitResult {
    /// Continuous density described by the fit, at evolution parameter `tau`.
    pub fn model(&self, profile: SlitProfile, tau: f64) -> Result<TwoPathModel> {
        if self.width_params.len() != 2 {
            return Err(Error::invalid("fit result needs two width parameters"));
        }
        TwoPathModel::new(
            profile,
            self.width_params[0],
            PI / self.width_params[1],
            tau,
            self.visibility,
        )
    }
}

const N_PARAMS: usize = 6;
const MAX_ITER: usize = 500;
const REL_TOL: f64 = 1e-8;
const FD_STEP: f64 = 1e-6;

struct Problem<'a> {
    x: &'a [f64],
    y: Vec<f64>,
    weights: Vec<f64>,
    pitch: f64,
    profile: SlitProfile,
    tau: f64,
}

// theta = [amplitude, center, visibility, background, width, wavenumber]
impl Problem<'_> {
    fn predict(&self, theta: &[f64; N_PARAMS]) -> Result<Vec<f64>> {
        let model = TwoPathModel::new(self.profile, theta[4], theta[5], self.tau, theta[2])?;
        let half = 0.5 * self.pitch;
        Ok(self
            .x
            .par_iter()
            .map(|&x| {
                theta[0] * model.interval(x - half - theta[1], x + half - theta[1]) + theta[3]
            })
            .collect())
    }

    fn cost(&self, pred: &[f64]) -> f64 {
        self.y
            .iter()
            .zip(pred)
            .zip(&self.weights)
            .map(|((y, m), w)| w * (y - m).powi(2))
            .sum()
    }
}

fn clamp_params(theta: &mut [f64; N_PARAMS], floor: &[f64; N_PARAMS]) {
    theta[0] = theta[0].max(floor[0]);
    theta[2] = theta[2].clamp(0.0, 1.0);
    theta[4] = theta[4].max(floor[4]);
    theta[5] = theta[5].max(floor[5]);
}

fn solve(mut a: [[f64; N_PARAMS]; N_PARAMS], mut b: [f64; N_PARAMS]) -> Option<[f64; N_PARAMS]> {
    for col in 0..N_PARAMS {
        let pivot = (col..N_PARAMS).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N_PARAMS {
            let f = a[row][col] / a[col][col];
            for k in col..N_PARAMS {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N_PARAMS];
    for row in (0..N_PARAMS).rev() {
        let s: f64 = (row + 1..N_PARAMS).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Weighted least-squares fit of the two-path model to a profile.
pub fn fit_fringe(data: &FringeDataset, config: &FitConfig) -> Result<FitResult> {
    let informative = data.counts.iter().filter(|&&c| c > 0).count();
    if informative < 6 {
        return Err(Error::DegenerateFit(format!(
            "only {informative} pixels with counts"
        )));
    }
    let max = *data.counts.iter().max().expect("non-empty");
    let min = *data.counts.iter().min().expect("non-empty");
    if max == min {
        return Err(Error::DegenerateFit("flat profile".into()));
    }

    let y: Vec<f64> = data.counts.iter().map(|&c| c as f64).collect();
    let problem = Problem {
        x: &data.positions,
        weights: y.iter().map(|c| 1.0 / c.max(1.0)).collect(),
        y,
        pitch: data.pitch(),
        profile: config.profile,
        tau: config.tau_at(data.meta.z),
    };

    let (w0, k0) = config.nominal_widths();
    let total = data.total_counts as f64;
    let center = data
        .positions
        .iter()
        .zip(&problem.y)
        .map(|(x, c)| x * c)
        .sum::<f64>()
        / total;
    let background = min as f64;
    let mut theta = [1.0, center, 0.5, background, w0, k0];
    let window = problem
        .predict(&theta)?
        .iter()
        .map(|v| v - background)
        .sum::<f64>();
    let signal = (total - background * data.counts.len() as f64).max(0.5 * total);
    theta[0] = signal / window.max(1e-12);

    let scale = [theta[0], problem.pitch, 1.0, background.max(1.0), w0, k0];
    let floor = [1e-12 * theta[0], 0.0, 0.0, 0.0, 1e-3 * w0, 1e-3 * k0];

    let mut pred = problem.predict(&theta)?;
    let mut cost = problem.cost(&pred);
    let mut lambda = 1e-3;
    let mut converged = false;

    for _ in 0..MAX_ITER {
        let mut jac = vec![[0.0; N_PARAMS]; pred.len()];
        for j in 0..N_PARAMS {
            let h = FD_STEP * theta[j].abs().max(scale[j]);
            let mut shifted = theta;
            shifted[j] += h;
            let up = problem.predict(&shifted)?;
            for (row, (u, p)) in jac.iter_mut().zip(up.iter().zip(&pred)) {
                row[j] = (u - p) / h;
            }
        }
        let mut a = [[0.0; N_PARAMS]; N_PARAMS];
        let mut g = [0.0; N_PARAMS];
        for ((row, &w), (y, m)) in jac
            .iter()
            .zip(&problem.weights)
            .zip(problem.y.iter().zip(&pred))
        {
            for i in 0..N_PARAMS {
                g[i] += w * row[i] * (y - m);
                for k in 0..N_PARAMS {
                    a[i][k] += w * row[i] * row[k];
                }
            }
        }

        let mut accepted = None;
        while lambda < 1e16 {
            let mut damped = a;
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += lambda * a[i][i].max(1e-30);
            }
            if let Some(step) = solve(damped, g) {
                let mut trial = theta;
                for i in 0..N_PARAMS {
                    trial[i] += step[i];
                }
                clamp_params(&mut trial, &floor);
                let trial_pred = problem.predict(&trial)?;
                let trial_cost = problem.cost(&trial_pred);
                if trial_cost <= cost {
                    accepted = Some((trial, trial_pred, trial_cost));
                    break;
                }
            }
            lambda *= 10.0;
        }
        let Some((trial, trial_pred, trial_cost)) = accepted else {
            converged = true;
            break;
        };
        let change = (0..N_PARAMS)
            .map(|i| (trial[i] - theta[i]).abs() / (theta[i].abs() + scale[i]))
            .fold(0.0, f64::max);
        theta = trial;
        pred = trial_pred;
        cost = trial_cost;
        lambda = (lambda / 10.0).max(1e-12);
        if change < REL_TOL {
            converged = true;
            break;
        }
    }

    let rms_residual = (problem
        .y
        .iter()
        .zip(&pred)
        .map(|(y, m)| (y - m).powi(2))
        .sum::<f64>()
        / pred.len() as f64)
        .sqrt();
    Ok(FitResult {
        visibility: theta[2],
        center: theta[1],
        amplitude: theta[0],
        background: theta[3],
        width_params: vec![theta[4], PI / theta[5]],
        rms_residual,
        converged: converged && rms_residual.is_finite(),
    })
}

/// Counts per pixel predicted by a fit (or by chosen parameters) for a
/// profile recorded at distance `z`.
pub fn predict_counts(
    fit: &FitResult,
    config: &FitConfig,
    pixels: &Grid,
    z: f64,
) -> Result<Vec<f64>> {
    let model = fit.model(config.profile, config.tau_at(z))?;
    let half = 0.5 * pixels.dx;
    Ok((0..pixels.n_points)
        .into_par_iter()
        .map(|i| {
            let x = pixels.x(i) - fit.center;
            fit.amplitude * model.interval(x - half, x + half) + fit.background
        })
        .collect())
}

/// Rebuild the fitted density and read off `P(L)`, `P(B)` and `P(M)` at
/// distance `z`, with intervals centred on the fitted centre.
pub fn probabilities_from_fit(
    fit: &FitResult,
    config: &FitConfig,
    z: f64,
) -> Result<IntervalProbabilityReport> {
    if !fit.converged {
        return Err(Error::invalid("fit did not converge"));
    }
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::invalid(format!(
            "distance must be non-negative, got {z}"
        )));
    }
    let p = &config.params;
    let ctx = &p.context;
    let geometry = IntervalGeometry::from(p);
    let t = ctx.z_to_t(z);
    let m = geometry.m_width(t);
    let tau = ctx.wavelength * z / (4.0 * PI);
    let model = fit.model(config.profile, 0.0)?;

    let (p_l, p_b, position_model) = match config.plane {
        FitPlane::Position => {
            let p_l = model.interval(-0.5 * p.slit_l, 0.5 * p.slit_l);
            let p_b = model.conjugate_interval(p.momentum_b / (2.0 * ctx.hbar));
            (p_l, p_b, Some(model))
        }
        FitPlane::Momentum => {
            let kappa = config.lens_scale();
            let p_b = model.interval(-0.5 * p.slit_l_prime, 0.5 * p.slit_l_prime);
            let p_l = model.conjugate_interval(0.5 * kappa * p.slit_l);
            let swapped = match config.profile {
                SlitProfile::Box => Some(TwoPathModel::new(
                    SlitProfile::Box,
                    2.0 * model.wavenumber / kappa,
                    0.5 * kappa * model.width,
                    0.0,
                    model.visibility,
                )?),
                SlitProfile::Gaussian => None,
            };
            (p_l, p_b, swapped)
        }
    };
    let p_m = if z == 0.0 {
        p_l
    } else {
        let base = position_model.ok_or_else(|| {
            Error::invalid("P(M) at z > 0 needs a position-plane or box-profile fit")
        })?;
        base.evolved(tau)?.interval(-0.5 * m, 0.5 * m)
    };
    defect_probability(
        DefectInputs {
            p_l,
            p_b,
            p_m,
            t,
            m_width: m,
            visibility: fit.visibility,
        },
        &geometry,
    )
}
