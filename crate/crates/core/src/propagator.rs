//! Free-space evolution and momentum-space views of a [`WaveFunction`].
//!
//! Evolution multiplies the discrete spectrum by `exp(-i p² t / 2mħ)`, which is
//! exactly unitary on the periodic grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::physics::PhotonContext;
use crate::states::{Grid, WaveFunction};

/// Default ceiling on the norm fraction in the outermost 1% of momentum bins.
pub const DEFAULT_ALIASING_LIMIT: f64 = 1e-3;

/// Cached transform plans for one grid.
#[derive(Clone)]
pub struct FreePropagator {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    aliasing_limit: f64,
}

impl std::fmt::Debug for FreePropagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FreePropagator")
            .field("grid", &self.grid)
            .field("aliasing_limit", &self.aliasing_limit)
            .finish()
    }
}

impl FreePropagator {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n_points),
            inverse: planner.plan_fft_inverse(grid.n_points),
            aliasing_limit: DEFAULT_ALIASING_LIMIT,
        }
    }

    pub fn with_aliasing_limit(mut self, limit: f64) -> Self {
        self.aliasing_limit = limit;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Momentum of each discrete-transform bin, in transform order.
    pub fn momenta(&self, ctx: &PhotonContext) -> Vec<f64> {
        let n = self.grid.n_points;
        let dp = 2.0 * PI * ctx.hbar / (n as f64 * self.grid.dx);
        (0..n)
            .map(|k| if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 } * dp)
            .collect()
    }

    /// Unnormalised discrete transform of the amplitudes.
    pub fn spectrum(&self, psi: &WaveFunction) -> Result<Vec<Complex64>> {
        crate::states::check_same_grid(&self.grid, &psi.grid)?;
        let mut buf = psi.amplitudes.clone();
        self.forward.process(&mut buf);
        Ok(buf)
    }

    /// Norm fraction carried by the outermost 1% of momentum bins (at least one bin).
    pub fn aliasing_fraction(spectrum: &[Complex64]) -> f64 {
        let n = spectrum.len();
        let total: f64 = spectrum.iter().map(|c| c.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let edge = (n / 100).max(1);
        let start = n / 2 - edge / 2;
        let outer: f64 = spectrum[start..start + edge]
            .iter()
            .map(|c| c.norm_sqr())
            .sum();
        outer / total
    }

    /// Evolves a precomputed spectrum by `t` and returns to position space.
    pub fn evolve_spectrum(
        &self,
        spectrum: &[Complex64],
        t: f64,
        ctx: &PhotonContext,
    ) -> WaveFunction {
        let n = self.grid.n_points;
        let scale = t / (2.0 * ctx.effective_mass * ctx.hbar);
        let mut buf: Vec<Complex64> = self
            .momenta(ctx)
            .iter()
            .zip(spectrum)
            .map(|(p, c)| c * Complex64::from_polar(1.0 / n as f64, -scale * p * p))
            .collect();
        self.inverse.process(&mut buf);
        WaveFunction {
            grid: self.grid,
            amplitudes: buf,
        }
    }

    pub fn propagate(
        &self,
        psi: &WaveFunction,
        t: f64,
        ctx: &PhotonContext,
    ) -> Result<WaveFunction> {
        if !t.is_finite() {
            return Err(Error::invalid(format!(
                "propagation time must be finite, got {t}"
            )));
        }
        let spectrum = self.spectrum(psi)?;
        let fraction = Self::aliasing_fraction(&spectrum);
        if fraction > self.aliasing_limit {
            return Err(Error::AliasingRisk {
                fraction,
                limit: self.aliasing_limit,
            });
        }
        Ok(self.evolve_spectrum(&spectrum, t, ctx))
    }
}

/// One-shot free evolution of `psi` by time `t` (negative `t` runs backwards).
pub fn free_propagate(psi: &WaveFunction, t: f64, ctx: &PhotonContext) -> Result<WaveFunction> {
    FreePropagator::new(psi.grid).propagate(psi, t, ctx)
}

/// Momentum amplitudes `⟨p|ψ⟩` (units (kg·m/s)^-1/2) on uniformly spaced,
/// increasing momenta `p_min + k·dp`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumWaveFunction {
    pub p_min: f64,
    pub dp: f64,
    pub amplitudes: Vec<Complex64>,
}

impl MomentumWaveFunction {
    pub fn p(&self, k: usize) -> f64 {
        self.p_min + k as f64 * self.dp
    }

    pub fn p_values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.amplitudes.len()).map(move |k| self.p(k))
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dp
    }

    /// The momentum samples viewed as a grid, for cell-wise integration.
    pub fn as_grid(&self) -> Grid {
        Grid {
            x_min: self.p_min,
            n_points: self.amplitudes.len(),
            dx: self.dp,
        }
    }
}

/// Discrete transform with the symmetric normalisation, so that
/// `Σ|φ|²dp = Σ|ψ|²dx`.
pub fn to_momentum_representation(psi: &WaveFunction, ctx: &PhotonContext) -> MomentumWaveFunction {
    let grid = psi.grid;
    let n = grid.n_points;
    let mut buf = psi.amplitudes.clone();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let dp = 2.0 * PI * ctx.hbar / (n as f64 * grid.dx);
    let half = n / 2;
    let norm = grid.dx / (2.0 * PI * ctx.hbar).sqrt();
    let amplitudes = (0..n)
        .map(|j| {
            let k = j as isize - half as isize;
            let idx = k.rem_euclid(n as isize) as usize;
            let p = k as f64 * dp;
            buf[idx] * Complex64::from_polar(norm, -p * grid.x_min / ctx.hbar)
        })
        .collect();
    MomentumWaveFunction {
        p_min: -(half as f64) * dp,
        dp,
        amplitudes,
    }
}

/// Field one focal length behind a lens placed one focal length after the
/// input plane: transverse momentum `p` lands at `x' = f·p/p_total`.
/// Only the intensity is meaningful; the focal-plane phase is dropped.
pub fn lens_fourier_map(
    psi: &WaveFunction,
    focal: f64,
    ctx: &PhotonContext,
) -> Result<WaveFunction> {
    if !(focal.is_finite() && focal > 0.0) {
        return Err(Error::invalid(format!(
            "focal length must be positive, got {focal}"
        )));
    }
    let phi = to_momentum_representation(psi, ctx);
    let scale = focal / ctx.total_momentum;
    let grid = Grid::new(phi.p_min * scale, phi.amplitudes.len(), phi.dp * scale)?;
    let amp = scale.sqrt().recip();
    let out = WaveFunction {
        grid,
        amplitudes: phi.amplitudes.iter().map(|a| a * amp).collect(),
    };

    // rms width of the mapped profile must span several output cells
    let dens = out.density();
    let total: f64 = dens.iter().sum();
    let mean: f64 = grid.positions().zip(&dens).map(|(x, d)| x * d).sum::<f64>() / total;
    let var: f64 = grid
        .positions()
        .zip(&dens)
        .map(|(x, d)| (x - mean).powi(2) * d)
        .sum::<f64>()
        / total;
    if var.sqrt() < 4.0 * grid.dx {
        return Err(Error::grid(format!(
            "focal-plane profile (rms {:.3e} m) under-resolved by output spacing {:.3e} m",
            var.sqrt(),
            grid.dx
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::ExperimentParams;
    use crate::states::{box_position_state, sinc, sinc_momentum_state, GridConfig};

    fn setup() -> (ExperimentParams, Grid) {
        let p =
            ExperimentParams::new(47e-6, 37e-6, 0.1, PhotonContext::new(800e-9).unwrap()).unwrap();
        let g = Grid::for_params(
            &p,
            GridConfig {
                n_points: 1 << 15,
                points_per_slit: 15,
            },
        )
        .unwrap();
        (p, g)
    }

    #[test]
    fn zero_time_is_identity() {
        let (p, g) = setup();
        let psi = box_position_state(p.slit_l, g).unwrap();
        let out = free_propagate(&psi, 0.0, &p.context).unwrap();
        assert!(out.l2_distance(&psi).unwrap() < 1e-13);
    }

    #[test]
    fn norm_preserved() {
        let (p, g) = setup();
        let psi = box_position_state(p.slit_l, g).unwrap();
        let out = free_propagate(&psi, p.time_at(1.4), &p.context).unwrap();
        assert!((out.norm_sq() - psi.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn aliasing_detected() {
        let (p, g) = setup();
        // a single-cell spike has a flat spectrum
        let mut amps = vec![Complex64::new(0.0, 0.0); g.n_points];
        amps[g.n_points / 2] = Complex64::new(g.dx.sqrt().recip(), 0.0);
        let spike = WaveFunction::new(g, amps).unwrap();
        assert!(matches!(
            free_propagate(&spike, p.t_m, &p.context),
            Err(Error::AliasingRisk { .. })
        ));
    }

    #[test]
    fn momenta_are_physical() {
        let (p, g) = setup();
        let prop = FreePropagator::new(g);
        let ps = prop.momenta(&p.context);
        let dp = 2.0 * PI * HBAR_T / (g.n_points as f64 * g.dx);
        assert_eq!(ps[0], 0.0);
        assert!((ps[1] - dp).abs() < 1e-12 * dp);
        assert!((ps[g.n_points - 1] + dp).abs() < 1e-12 * dp);
    }

    const HBAR_T: f64 = crate::physics::HBAR;

    #[test]
    fn parseval_and_box_spectrum() {
        let (p, g) = setup();
        let psi = box_position_state(p.slit_l, g).unwrap();
        let phi = to_momentum_representation(&psi, &p.context);
        assert!((phi.norm_sq() - 1.0).abs() < 1e-9);
        let l = p.slit_l;
        let peak = (l / (2.0 * PI * HBAR_T)).sqrt();
        for (k, a) in phi.amplitudes.iter().enumerate().step_by(97) {
            let q = phi.p(k);
            // discrete box of 15 whole cells: Dirichlet kernel, close to the continuum sinc
            let want = peak * sinc(q * l / (2.0 * HBAR_T)).abs();
            if q.abs() < 4.0 * 2.0 * PI * HBAR_T / l {
                assert!((a.norm() - want).abs() < 1e-2 * peak, "p={q}");
            }
        }
    }

    #[test]
    fn translation_only_changes_phase() {
        let (p, g) = setup();
        let a = box_position_state(p.slit_l, g).unwrap();
        let shift = 37;
        let mut amps = a.amplitudes.clone();
        amps.rotate_right(shift);
        let b = WaveFunction::new(g, amps).unwrap();
        let pa = to_momentum_representation(&a, &p.context);
        let pb = to_momentum_representation(&b, &p.context);
        let peak = pa.amplitudes.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (x, y) in pa.amplitudes.iter().zip(&pb.amplitudes) {
            assert!((x.norm() - y.norm()).abs() < 1e-9 * peak);
        }
    }

    #[test]
    fn lens_maps_sinc_to_slit() {
        let (p, g) = setup();
        let psi = sinc_momentum_state(p.momentum_b, g).unwrap();
        let out = lens_fourier_map(&psi, p.focal_f, &p.context).unwrap();
        assert!((out.norm_sq() - 1.0).abs() < 1e-9);
        // flat top of width L' at the focal plane
        let dens = out.density();
        let peak = dens.iter().cloned().fold(0.0, f64::max);
        let half_max_width = dens.iter().filter(|d| **d > 0.5 * peak).count() as f64 * out.grid.dx;
        assert!(
            (half_max_width - p.slit_l_prime).abs() < 2.0 * out.grid.dx + 0.02 * p.slit_l_prime
        );
    }

    #[test]
    fn lens_maps_slit_to_sinc() {
        let (p, g) = setup();
        let psi = box_position_state(p.slit_l, g).unwrap();
        let out = lens_fourier_map(&psi, p.focal_f, &p.context).unwrap();
        assert!((out.norm_sq() - 1.0).abs() < 1e-9);
        let first_zero = p.focal_f * p.context.wavelength / p.slit_l;
        let c = out.grid.n_points / 2;
        let dens = out.density();
        // walk out from the centre to the first minimum
        let mut i = c;
        while dens[i + 1] < dens[i] {
            i += 1;
        }
        let x = out.grid.x(i);
        assert!((x - first_zero).abs() <= out.grid.dx, "{x} vs {first_zero}");
    }

    #[test]
    fn lens_rejects_underresolved_output() {
        let ctx = PhotonContext::new(800e-9).unwrap();
        // a very wide, smooth state has an extremely narrow spectrum
        let g = Grid::centered(5e-3, 256).unwrap();
        let psi = WaveFunction::from_fn(g, |_| Complex64::new(1.0, 0.0))
            .normalized()
            .unwrap();
        assert!(matches!(
            lens_fourier_map(&psi, 0.1, &ctx),
            Err(Error::InvalidGrid(_))
        ));
    }
}
