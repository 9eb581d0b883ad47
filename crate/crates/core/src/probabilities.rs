//! Interval probabilities, the straight-line bound and the defect.
//!
//! For a particle that moves on straight lines, landing in `|x| < L/2` with
//! `|p| < B/2` at `t = 0` forces `|x(t)| < M/2` with `M = L + Bt/m`. Hence
//! `P(M,t) ≥ P(L) + P(B) - 1`; the defect is how far a state falls below that.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{PhotonContext, HBAR};
use crate::states::{check_same_grid, Grid, WaveFunction};

/// Slack allowed on probabilities that should lie in `[0, 1]`.
const PROB_SLACK: f64 = 1e-9;

/// A probability density on a grid (position or momentum).
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Density {
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx
    }

    /// `∫_a^b ρ dx`, with cells cut by `a` or `b` counted by their covered fraction.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        integrate_cells(&self.grid, &self.values, a, b)
    }
}

fn integrate_cells(grid: &Grid, values: &[f64], a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::invalid(format!("empty interval [{a:e}, {b:e}]")));
    }
    let (lo, hi) = grid.extent();
    let tol = 1e-9 * grid.dx;
    if a < lo - tol || b > hi + tol {
        return Err(Error::invalid(format!(
            "interval [{a:e}, {b:e}] leaves the grid [{lo:e}, {hi:e}]"
        )));
    }
    let sum: f64 = grid
        .cell_range(a, b)
        .map(|i| values[i] * grid.cell_fraction(i, a, b))
        .sum();
    Ok(sum * grid.dx)
}

/// `∫_a^b |ψ|² dx`.
pub fn interval_probability(psi: &WaveFunction, a: f64, b: f64) -> Result<f64> {
    integrate_cells(&psi.grid, &psi.density(), a, b)
}

/// Projector onto `|p| < B/2` for states on a fixed grid.
///
/// Uses the continuous transform of the samples,
/// `φ(p) = dx/√(2πħ) Σ ψ_j e^{-i p x_j/ħ}`, for which the window integral is a
/// linear convolution with `dx·B/(2πħ)·sinc(B m dx / 2ħ)`. The convolution is
/// done with zero-padded transforms.
#[derive(Clone)]
pub struct MomentumWindow {
    grid: Grid,
    kernel: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl MomentumWindow {
    pub fn new(grid: Grid, momentum_b: f64) -> Result<Self> {
        if !(momentum_b.is_finite() && momentum_b > 0.0) {
            return Err(Error::invalid(format!(
                "momentum width must be positive, got {momentum_b}"
            )));
        }
        let nyquist = PI * HBAR / grid.dx;
        if 0.5 * momentum_b > nyquist {
            return Err(Error::invalid(format!(
                "momentum window {momentum_b:e} exceeds the grid bandwidth {:e}",
                2.0 * nyquist
            )));
        }
        let n = grid.n_points;
        let size = 2 * n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let scale = grid.dx * momentum_b / (2.0 * PI * HBAR);
        let k = momentum_b * grid.dx / (2.0 * HBAR);
        let mut kernel = vec![Complex64::new(0.0, 0.0); size];
        for m in 0..n {
            let v = Complex64::new(scale * crate::states::sinc(k * m as f64), 0.0);
            kernel[m] = v;
            if m > 0 {
                kernel[size - m] = v;
            }
        }
        forward.process(&mut kernel);
        let inv = 1.0 / size as f64;
        kernel.iter_mut().for_each(|c| *c *= inv);
        Ok(Self {
            grid,
            kernel,
            forward,
            inverse,
        })
    }

    fn apply(&self, b: &WaveFunction) -> Vec<Complex64> {
        let n = self.grid.n_points;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        buf[..n].copy_from_slice(&b.amplitudes);
        self.forward.process(&mut buf);
        buf.iter_mut().zip(&self.kernel).for_each(|(x, k)| *x *= k);
        self.inverse.process(&mut buf);
        buf.truncate(n);
        buf
    }

    /// `∫_{-B/2}^{B/2} conj(φ_a(p)) φ_b(p) dp`.
    pub fn matrix_element(&self, a: &WaveFunction, b: &WaveFunction) -> Result<Complex64> {
        check_same_grid(&self.grid, &a.grid)?;
        check_same_grid(&self.grid, &b.grid)?;
        let wb = self.apply(b);
        let s: Complex64 = a
            .amplitudes
            .iter()
            .zip(&wb)
            .map(|(x, y)| x.conj() * y)
            .sum();
        Ok(s * self.grid.dx)
    }

    pub fn probability(&self, psi: &WaveFunction) -> Result<f64> {
        Ok(self.matrix_element(psi, psi)?.re)
    }
}

/// `∫_{-B/2}^{B/2} |⟨p|ψ⟩|² dp`.
pub fn momentum_interval_probability(psi: &WaveFunction, momentum_b: f64) -> Result<f64> {
    MomentumWindow::new(psi.grid, momentum_b)?.probability(psi)
}

/// Width of the interval reachable on straight lines, `M = L + Bt/m`.
pub fn m_width(slit_l: f64, momentum_b: f64, t: f64, ctx: &PhotonContext) -> f64 {
    slit_l + momentum_b * t / ctx.effective_mass
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (-PROB_SLACK..=1.0 + PROB_SLACK).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {p} is not a probability")))
    }
}

/// Right-hand side of the straight-line bound, `P(L) + P(B) - 1`, unclamped.
pub fn bound_rhs(p_l: f64, p_b: f64) -> Result<f64> {
    check_probability("p_L", p_l)?;
    check_probability("p_B", p_b)?;
    Ok(p_l + p_b - 1.0)
}

/// Interval probabilities at one propagation time and the resulting defect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalProbabilityReport {
    #[serde(rename = "p_L")]
    pub p_l: f64,
    #[serde(rename = "p_B")]
    pub p_b: f64,
    #[serde(rename = "p_M")]
    pub p_m: f64,
    pub bound_rhs: f64,
    pub defect: f64,
    pub t: f64,
    #[serde(rename = "M_width")]
    pub m_width: f64,
    pub visibility: f64,
}

impl IntervalProbabilityReport {
    /// Positive defect: the straight-line bound is violated.
    pub fn violates_bound(&self) -> bool {
        self.defect > 0.0
    }
}

/// Slit width, momentum window and photon mapping that fix `M(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalGeometry {
    pub slit_l: f64,
    pub momentum_b: f64,
    pub context: PhotonContext,
}

impl IntervalGeometry {
    pub fn m_width(&self, t: f64) -> f64 {
        m_width(self.slit_l, self.momentum_b, t, &self.context)
    }
}

impl From<&crate::physics::ExperimentParams> for IntervalGeometry {
    fn from(p: &crate::physics::ExperimentParams) -> Self {
        Self {
            slit_l: p.slit_l,
            momentum_b: p.momentum_b,
            context: p.context,
        }
    }
}

/// Measured or simulated ingredients of a report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectInputs {
    pub p_l: f64,
    pub p_b: f64,
    pub p_m: f64,
    pub t: f64,
    pub m_width: f64,
    pub visibility: f64,
}

/// `P(L) + P(B) - 1 - P(M,t)`, after checking that `M` belongs to `t`.
pub fn defect_probability(
    inputs: DefectInputs,
    geometry: &IntervalGeometry,
) -> Result<IntervalProbabilityReport> {
    check_probability("p_M", inputs.p_m)?;
    check_visibility(inputs.visibility)?;
    if !(inputs.t.is_finite() && inputs.t >= 0.0) {
        return Err(Error::invalid(format!(
            "time must be non-negative, got {}",
            inputs.t
        )));
    }
    let expected = geometry.m_width(inputs.t);
    if (inputs.m_width - expected).abs() > 1e-9 * expected {
        return Err(Error::invalid(format!(
            "M = {:e} m does not match t = {:e} s (expected {expected:e} m)",
            inputs.m_width, inputs.t
        )));
    }
    let rhs = bound_rhs(inputs.p_l, inputs.p_b)?;
    Ok(IntervalProbabilityReport {
        p_l: inputs.p_l,
        p_b: inputs.p_b,
        p_m: inputs.p_m,
        bound_rhs: rhs,
        defect: rhs - inputs.p_m,
        t: inputs.t,
        m_width: inputs.m_width,
        visibility: inputs.visibility,
    })
}

pub(crate) fn check_visibility(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "visibility must lie in [0, 1], got {v}"
        )))
    }
}

/// Two-path density with the cross term scaled by the visibility,
/// `|ψ_L|² + |ψ_B|² + 2V Re(ψ_L* ψ_B)`, normalised to unit integral.
pub fn visibility_density(
    psi_l: &WaveFunction,
    psi_b: &WaveFunction,
    visibility: f64,
) -> Result<Density> {
    check_visibility(visibility)?;
    check_same_grid(&psi_l.grid, &psi_b.grid)?;
    let values: Vec<f64> = psi_l
        .amplitudes
        .iter()
        .zip(&psi_b.amplitudes)
        .map(|(a, b)| a.norm_sqr() + b.norm_sqr() + 2.0 * visibility * (a.conj() * b).re)
        .collect();
    let total = values.iter().sum::<f64>() * psi_l.grid.dx;
    if !(total > 0.0) {
        return Err(Error::invalid("two-path density integrates to zero"));
    }
    Ok(Density {
        grid: psi_l.grid,
        values: values.into_iter().map(|v| v / total).collect(),
    })
}

/// Momentum-window probability of the two-path mixture with visibility `V`.
pub fn momentum_visibility_probability(
    window: &MomentumWindow,
    psi_l: &WaveFunction,
    psi_b: &WaveFunction,
    visibility: f64,
) -> Result<f64> {
    check_visibility(visibility)?;
    let w_ll = window.matrix_element(psi_l, psi_l)?.re;
    let w_bb = window.matrix_element(psi_b, psi_b)?.re;
    let w_lb = window.matrix_element(psi_l, psi_b)?.re;
    let s = crate::states::overlap(psi_l, psi_b)?.re;
    let total = psi_l.norm_sq() + psi_b.norm_sq() + 2.0 * visibility * s;
    Ok((w_ll + w_bb + 2.0 * visibility * w_lb) / total)
}
