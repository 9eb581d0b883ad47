//! Experiment design: defect versus propagation distance, the best
//! observation distance, the best `L·B` product and the violation window.

use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{ExperimentParams, PhotonContext};
use crate::probabilities::{
    defect_probability, momentum_visibility_probability, visibility_density, DefectInputs,
    IntervalGeometry, IntervalProbabilityReport, MomentumWindow,
};
use crate::propagator::FreePropagator;
use crate::states::{box_position_state, sinc_momentum_state, Grid, GridConfig, WaveFunction};

/// The two-path state for one geometry, prepared once and evaluated at any distance.
#[derive(Debug, Clone)]
pub struct DefectModel {
    params: ExperimentParams,
    visibility: f64,
    propagator: FreePropagator,
    psi_l: WaveFunction,
    psi_b: WaveFunction,
    spectrum_l: Vec<Complex64>,
    spectrum_b: Vec<Complex64>,
    p_l: f64,
    p_b: f64,
}

impl DefectModel {
    pub fn new(params: &ExperimentParams, visibility: f64, grid: GridConfig) -> Result<Self> {
        let grid = Grid::for_params(params, grid)?;
        let psi_l = box_position_state(params.slit_l, grid)?;
        let psi_b = sinc_momentum_state(params.momentum_b, grid)?;
        Self::from_states(params, visibility, psi_l, psi_b)
    }

    /// Model built from arbitrary branch states (both on the same grid).
    pub fn from_states(
        params: &ExperimentParams,
        visibility: f64,
        psi_l: WaveFunction,
        psi_b: WaveFunction,
    ) -> Result<Self> {
        let propagator = FreePropagator::new(psi_l.grid);
        let spectrum_l = propagator.spectrum(&psi_l)?;
        let spectrum_b = propagator.spectrum(&psi_b)?;
        // one check covers every later propagation: spectra moduli never change
        let limit = crate::propagator::DEFAULT_ALIASING_LIMIT;
        for spectrum in [&spectrum_l, &spectrum_b] {
            let fraction = FreePropagator::aliasing_fraction(spectrum);
            if fraction > limit {
                return Err(Error::AliasingRisk { fraction, limit });
            }
        }
        let density = visibility_density(&psi_l, &psi_b, visibility)?;
        let p_l = density.integrate(-0.5 * params.slit_l, 0.5 * params.slit_l)?;
        let window = MomentumWindow::new(psi_l.grid, params.momentum_b)?;
        let p_b = momentum_visibility_probability(&window, &psi_l, &psi_b, visibility)?;
        Ok(Self {
            params: *params,
            visibility,
            propagator,
            psi_l,
            psi_b,
            spectrum_l,
            spectrum_b,
            p_l,
            p_b,
        })
    }

    pub fn params(&self) -> &ExperimentParams {
        &self.params
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    pub fn grid(&self) -> &Grid {
        self.propagator.grid()
    }

    pub fn branches(&self) -> (&WaveFunction, &WaveFunction) {
        (&self.psi_l, &self.psi_b)
    }

    /// Both branches evolved to `z = scaled_z · z_M`.
    pub fn branches_at(&self, scaled_z: f64) -> (WaveFunction, WaveFunction) {
        let ctx = &self.params.context;
        let t = self.params.time_at(scaled_z);
        (
            self.propagator.evolve_spectrum(&self.spectrum_l, t, ctx),
            self.propagator.evolve_spectrum(&self.spectrum_b, t, ctx),
        )
    }

    pub fn report_at(&self, scaled_z: f64) -> Result<IntervalProbabilityReport> {
        if !(scaled_z.is_finite() && scaled_z >= 0.0) {
            return Err(Error::invalid(format!(
                "scaled distance must be non-negative, got {scaled_z}"
            )));
        }
        let geometry = IntervalGeometry::from(&self.params);
        let t = self.params.time_at(scaled_z);
        let m = geometry.m_width(t);
        let p_m = if scaled_z == 0.0 {
            self.p_l
        } else {
            let (a, b) = self.branches_at(scaled_z);
            visibility_density(&a, &b, self.visibility)?.integrate(-0.5 * m, 0.5 * m)?
        };
        defect_probability(
            DefectInputs {
                p_l: self.p_l,
                p_b: self.p_b,
                p_m,
                t,
                m_width: m,
                visibility: self.visibility,
            },
            &geometry,
        )
    }

    pub fn defect_at(&self, scaled_z: f64) -> Result<f64> {
        Ok(self.report_at(scaled_z)?.defect)
    }
}

/// Defect sampled against `z / z_M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectCurve {
    pub scaled_z: Vec<f64>,
    pub defect: Vec<f64>,
    pub visibility: f64,
    pub params: ExperimentParams,
}

#[derive(Serialize, Deserialize)]
struct CurveRow {
    scaled_z: f64,
    defect: f64,
}

impl DefectCurve {
    pub fn len(&self) -> usize {
        self.scaled_z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scaled_z.is_empty()
    }

    /// Index and value of the largest defect.
    pub fn peak(&self) -> Option<(usize, f64)> {
        self.defect
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, d)| match best {
                Some((_, b)) if b >= d => best,
                _ => Some((i, d)),
            })
    }

    /// Writes `scaled_z,defect` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (&scaled_z, &defect) in self.scaled_z.iter().zip(&self.defect) {
            w.serialize(CurveRow { scaled_z, defect })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `scaled_z,defect` rows into bare samples.
    pub fn read_csv<R: Read>(reader: R) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut zs = Vec::new();
        let mut ds = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: CurveRow = row?;
            zs.push(row.scaled_z);
            ds.push(row.defect);
        }
        Ok((zs, ds))
    }
}

fn check_scaled_points(params: &ExperimentParams, scaled_z: &[f64]) -> Result<()> {
    if scaled_z.is_empty() {
        return Err(Error::invalid("no distances requested"));
    }
    if scaled_z.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            "scaled distances must be strictly increasing",
        ));
    }
    let min = params.far_field_z / params.z_m;
    if !(scaled_z[0] > min) {
        return Err(Error::invalid(format!(
            "z/z_M = {} is inside the near field (must exceed {min:.4})",
            scaled_z[0]
        )));
    }
    Ok(())
}

/// Defect at each `z / z_M` in `scaled_z`, for visibility `V`.
pub fn defect_curve(
    params: &ExperimentParams,
    scaled_z: &[f64],
    visibility: f64,
    grid: GridConfig,
) -> Result<DefectCurve> {
    let model = DefectModel::new(params, visibility, grid)?;
    curve_from_model(&model, scaled_z)
}

pub fn curve_from_model(model: &DefectModel, scaled_z: &[f64]) -> Result<DefectCurve> {
    check_scaled_points(model.params(), scaled_z)?;
    let defect = scaled_z
        .par_iter()
        .map(|&z| model.defect_at(z))
        .collect::<Result<Vec<_>>>()?;
    Ok(DefectCurve {
        scaled_z: scaled_z.to_vec(),
        defect,
        visibility: model.visibility(),
        params: *model.params(),
    })
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Outcome of an optimisation over distance, and possibly over `L·B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub optimal_scaled_z: f64,
    pub optimal_lb_fraction: f64,
    pub max_defect: f64,
    /// Search resolution of the reported optimum.
    pub tolerance: f64,
    /// The coarse scan showed more than one local maximum.
    pub multimodal: bool,
}

/// Coarse scan followed by golden-section refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub z_range: (f64, f64),
    pub coarse_points: usize,
    pub z_resolution: f64,
    pub lb_coarse_points: usize,
    pub lb_resolution: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            z_range: (0.5, 10.0),
            coarse_points: 50,
            z_resolution: 0.01,
            lb_coarse_points: 9,
            lb_resolution: 0.001,
        }
    }
}

struct ScalarMax {
    x: f64,
    value: f64,
    multimodal: bool,
}

fn local_maxima(values: &[f64]) -> usize {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let left = i == 0 || values[i] > values[i - 1];
            let right = i + 1 == n || values[i] >= values[i + 1];
            left && right
        })
        .count()
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Rise above the golden-section optimum that marks a second peak in the bracket.
const BRACKET_SLACK: f64 = 1e-6;

/// Maximises `f` on `[lo, hi]`: coarse grid (evaluated in parallel), golden
/// section inside the bracket around the best sample, and a fine scan of the
/// bracket if golden section ends below the coarse best.
fn maximize<F>(f: F, lo: f64, hi: f64, coarse: usize, resolution: f64) -> Result<ScalarMax>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let xs = linspace(lo, hi, coarse.max(3));
    let ys = xs.par_iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let (ibest, &ybest) = ys
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, &f64)>, (i, y)| match acc {
            Some((_, b)) if b >= y => acc,
            _ => Some((i, y)),
        })
        .expect("non-empty scan");
    let multimodal = local_maxima(&ys) > 1;
    let mut a = xs[ibest.saturating_sub(1)];
    let mut b = xs[(ibest + 1).min(xs.len() - 1)];

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > resolution {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let (mut x, mut value) = if fc >= fd { (c, fc) } else { (d, fd) };
    if value < ybest {
        x = xs[ibest];
        value = ybest;
    }

    // golden section assumes one peak in the bracket; check on a fine scan
    let fine_lo = xs[ibest.saturating_sub(1)];
    let fine_hi = xs[(ibest + 1).min(xs.len() - 1)];
    let probe = [x - 0.5 * resolution, x + 0.5 * resolution];
    let probes = probe
        .iter()
        .filter(|p| **p >= fine_lo && **p <= fine_hi)
        .map(|&p| f(p).map(|v| (p, v)))
        .collect::<Result<Vec<_>>>()?;
    if probes.iter().any(|(_, v)| *v > value + BRACKET_SLACK) {
        let n = (((fine_hi - fine_lo) / (0.5 * resolution)).ceil() as usize + 1).max(3);
        let grid = linspace(fine_lo, fine_hi, n);
        let vals = grid.par_iter().map(|&p| f(p)).collect::<Result<Vec<_>>>()?;
        for (p, v) in grid.into_iter().zip(vals) {
            if v > value {
                x = p;
                value = v;
            }
        }
        return Ok(ScalarMax {
            x,
            value,
            multimodal: true,
        });
    }
    Ok(ScalarMax {
        x,
        value,
        multimodal,
    })
}

/// Distance of largest defect for a prepared model.
pub fn optimal_time_for_model(
    model: &DefectModel,
    search: &SearchConfig,
) -> Result<OptimizationResult> {
    let (lo, hi) = search.z_range;
    check_scaled_points(model.params(), &[lo, hi])?;
    let best = maximize(
        |z| model.defect_at(z),
        lo,
        hi,
        search.coarse_points,
        search.z_resolution,
    )?;
    Ok(OptimizationResult {
        optimal_scaled_z: best.x,
        optimal_lb_fraction: model.params().lb_fraction,
        max_defect: best.value,
        tolerance: search.z_resolution,
        multimodal: best.multimodal,
    })
}

pub fn find_optimal_time(
    params: &ExperimentParams,
    visibility: f64,
    grid: GridConfig,
    search: &SearchConfig,
) -> Result<OptimizationResult> {
    let model = DefectModel::new(params, visibility, grid)?;
    optimal_time_for_model(&model, search)
}

/// Best `L·B / 2πħ` in `lb_range`, holding the slit width and lens fixed and
/// varying the momentum window; each candidate is optimised over distance.
pub fn find_optimal_product(
    ctx: &PhotonContext,
    slit_l: f64,
    focal_f: f64,
    lb_range: (f64, f64),
    visibility: f64,
    grid: GridConfig,
    search: &SearchConfig,
) -> Result<OptimizationResult> {
    let (lo, hi) = lb_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid(format!(
            "bad lb_fraction range ({lo}, {hi})"
        )));
    }
    let inner = |lb: f64| -> Result<OptimizationResult> {
        let params = ExperimentParams::from_product(slit_l, lb, focal_f, *ctx)?;
        find_optimal_time(&params, visibility, grid, search)
    };
    let best = maximize(
        |lb| inner(lb).map(|r| r.max_defect),
        lo,
        hi,
        search.lb_coarse_points,
        search.lb_resolution,
    )?;
    let at_best = inner(best.x)?;
    Ok(OptimizationResult {
        optimal_scaled_z: at_best.optimal_scaled_z,
        optimal_lb_fraction: best.x,
        max_defect: at_best.max_defect,
        tolerance: search.lb_resolution,
        multimodal: best.multimodal || at_best.multimodal,
    })
}

/// Linear-interpolated zero crossings around the positive region that holds
/// the curve maximum, in `z / z_M`. `None` when the curve is never positive.
/// A region that runs off the sampled range ends at the last sample.
pub fn violation_range(curve: &DefectCurve) -> Option<(f64, f64)> {
    let (peak, value) = curve.peak()?;
    if !(value > 0.0) {
        return None;
    }
    let z = &curve.scaled_z;
    let d = &curve.defect;
    let crossing = |i: usize, j: usize| z[i] + (z[j] - z[i]) * d[i] / (d[i] - d[j]);
    let mut i = peak;
    while i > 0 && d[i - 1] > 0.0 {
        i -= 1;
    }
    let lo = if i == 0 { z[0] } else { crossing(i - 1, i) };
    let mut j = peak;
    while j + 1 < d.len() && d[j + 1] > 0.0 {
        j += 1;
    }
    let hi = if j + 1 == d.len() {
        z[j]
    } else {
        crossing(j, j + 1)
    };
    Some((lo, hi))
}
