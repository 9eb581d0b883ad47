//! Straight-line classical baseline: joint (x₀, pₓ) ensembles propagated as
//! `x(t) = x₀ + pₓ t / m` and scored against the same intervals as the quantum states.

use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::PhotonContext;
use crate::probabilities::{
    defect_probability, m_width, DefectInputs, IntervalGeometry, IntervalProbabilityReport,
};

const CHUNK: usize = 4096;

/// One classical phase-space point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub x0: f64,
    pub px: f64,
}

/// Point mass in a mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub x0: f64,
    pub px: f64,
    pub weight: f64,
}

/// Joint distribution of initial position and momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// Product of uniforms over `x_range × p_range`.
    Uniform {
        x_range: (f64, f64),
        p_range: (f64, f64),
    },
    CorrelatedGaussian {
        mean_x: f64,
        mean_p: f64,
        sigma_x: f64,
        sigma_p: f64,
        correlation: f64,
    },
    PointMixture {
        points: Vec<WeightedPoint>,
    },
}

impl DistributionSpec {
    /// Parse a JSON descriptor; anything unrecognised is an invalid argument.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("unknown distribution spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Uniform { .. } => "uniform",
            Self::CorrelatedGaussian { .. } => "correlated_gaussian",
            Self::PointMixture { .. } => "point_mixture",
        }
    }

    pub fn point_mass(x0: f64, px: f64) -> Self {
        Self::PointMixture {
            points: vec![WeightedPoint {
                x0,
                px,
                weight: 1.0,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be finite, got {v}")))
            }
        };
        match self {
            Self::Uniform { x_range, p_range } => {
                for (name, (lo, hi)) in [("x_range", x_range), ("p_range", p_range)] {
                    finite(name, *lo)?;
                    finite(name, *hi)?;
                    if lo > hi {
                        return Err(Error::invalid(format!("{name} is reversed: ({lo}, {hi})")));
                    }
                }
            }
            Self::CorrelatedGaussian {
                mean_x,
                mean_p,
                sigma_x,
                sigma_p,
                correlation,
            } => {
                finite("mean_x", *mean_x)?;
                finite("mean_p", *mean_p)?;
                finite("sigma_x", *sigma_x)?;
                finite("sigma_p", *sigma_p)?;
                if *sigma_x < 0.0 || *sigma_p < 0.0 {
                    return Err(Error::invalid("standard deviations must be non-negative"));
                }
                if !(-1.0..=1.0).contains(correlation) {
                    return Err(Error::invalid(format!(
                        "correlation must lie in [-1, 1], got {correlation}"
                    )));
                }
            }
            Self::PointMixture { points } => {
                if points.is_empty() {
                    return Err(Error::invalid("point mixture has no points"));
                }
                for p in points {
                    finite("x0", p.x0)?;
                    finite("px", p.px)?;
                    if !(p.weight.is_finite() && p.weight >= 0.0) {
                        return Err(Error::invalid(format!(
                            "mixture weight must be non-negative, got {}",
                            p.weight
                        )));
                    }
                }
                if points.iter().map(|p| p.weight).sum::<f64>() <= 0.0 {
                    return Err(Error::invalid("mixture weights sum to zero"));
                }
            }
        }
        Ok(())
    }
}

enum Sampler<'a> {
    Uniform {
        x: (f64, f64),
        p: (f64, f64),
    },
    Gaussian {
        mx: f64,
        mp: f64,
        sx: f64,
        sp: f64,
        rho: f64,
    },
    Mixture {
        points: &'a [WeightedPoint],
        index: WeightedIndex<f64>,
    },
}

impl Sampler<'_> {
    fn draw(&self, rng: &mut ChaCha8Rng) -> PhaseSpacePoint {
        match self {
            Self::Uniform { x, p } => PhaseSpacePoint {
                x0: x.0 + (x.1 - x.0) * rng.random::<f64>(),
                px: p.0 + (p.1 - p.0) * rng.random::<f64>(),
            },
            Self::Gaussian {
                mx,
                mp,
                sx,
                sp,
                rho,
            } => {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                PhaseSpacePoint {
                    x0: mx + sx * a,
                    px: mp + sp * (rho * a + (1.0 - rho * rho).sqrt() * b),
                }
            }
            Self::Mixture { points, index } => {
                let w = points[index.sample(rng)];
                PhaseSpacePoint { x0: w.x0, px: w.px }
            }
        }
    }
}

/// Samples from one joint distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEnsemble {
    pub samples: Vec<PhaseSpacePoint>,
    pub seed: u64,
    pub distribution: DistributionSpec,
}

impl ClassicalEnsemble {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn distribution_tag(&self) -> &'static str {
        self.distribution.tag()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x0_m", "px_kgms"])?;
        for s in &self.samples {
            w.write_record([format!("{:e}", s.x0), format!("{:e}", s.px)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Samples written by [`ClassicalEnsemble::write_csv`].
    pub fn read_samples<R: Read>(reader: R) -> Result<Vec<PhaseSpacePoint>> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x0_m", "px_kgms"] {
            return Err(Error::invalid(format!(
                "unexpected ensemble header {headers:?}"
            )));
        }
        let mut out = Vec::new();
        for record in r.records() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                record[i]
                    .trim()
                    .parse()
                    .map_err(|e| Error::invalid(format!("bad number {:?}: {e}", &record[i])))
            };
            out.push(PhaseSpacePoint {
                x0: parse(0)?,
                px: parse(1)?,
            });
        }
        Ok(out)
    }
}

/// Draw `n` samples. Chunk `k` uses stream `k` of a ChaCha generator keyed by
/// `seed`, so the result does not depend on the thread count.
pub fn sample_joint(spec: &DistributionSpec, n: usize, seed: u64) -> Result<ClassicalEnsemble> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    spec.validate()?;
    let sampler = match spec {
        DistributionSpec::Uniform { x_range, p_range } => Sampler::Uniform {
            x: *x_range,
            p: *p_range,
        },
        DistributionSpec::CorrelatedGaussian {
            mean_x,
            mean_p,
            sigma_x,
            sigma_p,
            correlation,
        } => Sampler::Gaussian {
            mx: *mean_x,
            mp: *mean_p,
            sx: *sigma_x,
            sp: *sigma_p,
            rho: *correlation,
        },
        DistributionSpec::PointMixture { points } => Sampler::Mixture {
            points,
            index: WeightedIndex::new(points.iter().map(|p| p.weight))
                .map_err(|e| Error::invalid(format!("bad mixture weights: {e}")))?,
        },
    };
    let n_chunks = n.div_ceil(CHUNK);
    let samples: Vec<PhaseSpacePoint> = (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let len = CHUNK.min(n - k * CHUNK);
            let sampler = &sampler;
            (0..len)
                .map(move |_| sampler.draw(&mut rng))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(ClassicalEnsemble {
        samples,
        seed,
        distribution: spec.clone(),
    })
}

/// A seeded mix of uniform, correlated-Gaussian and point-mixture
/// descriptors on the scale of the slit width and momentum window.
pub fn random_specs(count: usize, l: f64, b: f64, seed: u64) -> Vec<DistributionSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| match i % 3 {
            0 => {
                let (x0, x1) = (
                    l * rng.random_range(-1.5..0.5),
                    l * rng.random_range(0.0..1.5),
                );
                let (p0, p1) = (
                    b * rng.random_range(-1.5..0.5),
                    b * rng.random_range(0.0..1.5),
                );
                DistributionSpec::Uniform {
                    x_range: (x0.min(x1), x0.max(x1)),
                    p_range: (p0.min(p1), p0.max(p1)),
                }
            }
            1 => DistributionSpec::CorrelatedGaussian {
                mean_x: l * rng.random_range(-0.5..0.5),
                mean_p: b * rng.random_range(-0.5..0.5),
                sigma_x: l * rng.random_range(0.05..1.0),
                sigma_p: b * rng.random_range(0.05..1.0),
                correlation: rng.random_range(-0.99..0.99),
            },
            _ => DistributionSpec::PointMixture {
                points: (0..rng.random_range(1..8))
                    .map(|_| WeightedPoint {
                        x0: l * rng.random_range(-0.8..0.8),
                        px: b * rng.random_range(-0.8..0.8),
                        weight: rng.random_range(0.01..1.0),
                    })
                    .collect(),
            },
        })
        .collect()
}

/// Empirical interval probabilities of an ensemble with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StraightLineReport {
    #[serde(flatten)]
    pub report: IntervalProbabilityReport,
    #[serde(rename = "sigma_L")]
    pub sigma_l: f64,
    #[serde(rename = "sigma_B")]
    pub sigma_b: f64,
    #[serde(rename = "sigma_M")]
    pub sigma_m: f64,
    /// Standard error of the per-sample defect score.
    pub sigma_defect: f64,
    pub n_samples: usize,
    /// Samples inside both initial intervals that end up outside `M`.
    pub inclusion_violations: usize,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    in_l: usize,
    in_b: usize,
    in_m: usize,
    score_sq: usize,
    violations: usize,
}

impl Tally {
    fn merge(self, o: Self) -> Self {
        Self {
            in_l: self.in_l + o.in_l,
            in_b: self.in_b + o.in_b,
            in_m: self.in_m + o.in_m,
            score_sq: self.score_sq + o.score_sq,
            violations: self.violations + o.violations,
        }
    }
}

struct Intervals {
    half_l: f64,
    half_b: f64,
    half_m: f64,
    velocity_scale: f64,
}

impl Intervals {
    fn new(slit_l: f64, momentum_b: f64, t: f64, ctx: &PhotonContext) -> Self {
        Self {
            half_l: slit_l / 2.0,
            half_b: momentum_b / 2.0,
            half_m: m_width(slit_l, momentum_b, t, ctx) / 2.0,
            velocity_scale: t / ctx.effective_mass,
        }
    }

    fn classify(&self, x0: f64, px: f64) -> (bool, bool, bool) {
        (
            x0.abs() < self.half_l,
            px.abs() < self.half_b,
            (x0 + px * self.velocity_scale).abs() < self.half_m,
        )
    }
}

fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

fn check_geometry(slit_l: f64, momentum_b: f64, t: f64) -> Result<()> {
    for (name, v) in [("slit_l", slit_l), ("momentum_b", momentum_b)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid(format!(
            "time must be non-negative, got {t}"
        )));
    }
    Ok(())
}

/// Score every sample against `L`, `B` and `M(t)` (open intervals).
pub fn straightline_report(
    ens: &ClassicalEnsemble,
    slit_l: f64,
    momentum_b: f64,
    t: f64,
    ctx: &PhotonContext,
) -> Result<StraightLineReport> {
    check_geometry(slit_l, momentum_b, t)?;
    if ens.is_empty() {
        return Err(Error::invalid("empty ensemble"));
    }
    if let Some(s) = ens
        .samples
        .iter()
        .find(|s| !(s.x0.is_finite() && s.px.is_finite()))
    {
        return Err(Error::invalid(format!(
            "non-finite sample ({}, {})",
            s.x0, s.px
        )));
    }
    let iv = Intervals::new(slit_l, momentum_b, t, ctx);
    let tally = ens
        .samples
        .par_iter()
        .fold(Tally::default, |mut acc, s| {
            let (l, b, m) = iv.classify(s.x0, s.px);
            acc.in_l += l as usize;
            acc.in_b += b as usize;
            acc.in_m += m as usize;
            let score = l as i64 + b as i64 - 1 - m as i64;
            acc.score_sq += (score * score) as usize;
            acc.violations += (l && b && !m) as usize;
            acc
        })
        .reduce(Tally::default, Tally::merge);

    let n = ens.len();
    let nf = n as f64;
    let (p_l, p_b, p_m) = (
        tally.in_l as f64 / nf,
        tally.in_b as f64 / nf,
        tally.in_m as f64 / nf,
    );
    let geometry = IntervalGeometry {
        slit_l,
        momentum_b,
        context: *ctx,
    };
    let report = defect_probability(
        DefectInputs {
            p_l,
            p_b,
            p_m,
            t,
            m_width: 2.0 * iv.half_m,
            visibility: 1.0,
        },
        &geometry,
    )?;
    let var = (tally.score_sq as f64 / nf - report.defect * report.defect).max(0.0);
    let sigma_defect = if n > 1 {
        (var * nf / (nf - 1.0) / nf).sqrt()
    } else {
        0.0
    };
    Ok(StraightLineReport {
        report,
        sigma_l: binomial_sigma(p_l, n),
        sigma_b: binomial_sigma(p_b, n),
        sigma_m: binomial_sigma(p_m, n),
        sigma_defect,
        n_samples: n,
        inclusion_violations: tally.violations,
    })
}

/// Best mixture found by [`adversarial_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialResult {
    pub max_defect: f64,
    pub points: Vec<WeightedPoint>,
    pub iterations: usize,
}

fn mixture_defect(iv: &Intervals, points: &[WeightedPoint]) -> f64 {
    let total: f64 = points.iter().map(|p| p.weight).sum();
    points
        .iter()
        .map(|p| {
            let (l, b, m) = iv.classify(p.x0, p.px);
            p.weight * (l as i32 + b as i32 - 1 - m as i32) as f64
        })
        .sum::<f64>()
        / total
}

const MIXTURE_SIZE: usize = 4;
const STEPS_PER_RESTART: usize = 200;

/// Random-restart hill climb over small point-mass mixtures, maximising the
/// exact mixture defect. Each iteration is one proposed move.
pub fn adversarial_search(
    slit_l: f64,
    momentum_b: f64,
    t: f64,
    ctx: &PhotonContext,
    iterations: usize,
    seed: u64,
) -> Result<AdversarialResult> {
    check_geometry(slit_l, momentum_b, t)?;
    if iterations == 0 {
        return Err(Error::invalid("iterations must be at least 1"));
    }
    let iv = Intervals::new(slit_l, momentum_b, t, ctx);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_point = |rng: &mut ChaCha8Rng| WeightedPoint {
        x0: slit_l * (2.0 * rng.random::<f64>() - 1.0),
        px: momentum_b * (2.0 * rng.random::<f64>() - 1.0),
        weight: rng.random::<f64>() + 1e-3,
    };

    let mut best_points = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut current: Vec<WeightedPoint> = Vec::new();
    let mut current_value = f64::NEG_INFINITY;
    for step in 0..iterations {
        if step % STEPS_PER_RESTART == 0 {
            current = (0..MIXTURE_SIZE).map(|_| random_point(&mut rng)).collect();
            current_value = mixture_defect(&iv, &current);
        } else {
            let mut trial = current.clone();
            let k = rng.random_range(0..MIXTURE_SIZE);
            let scale = 0.25 * rng.random::<f64>();
            match rng.random_range(0..3) {
                0 => trial[k].x0 += scale * slit_l * (2.0 * rng.random::<f64>() - 1.0),
                1 => trial[k].px += scale * momentum_b * (2.0 * rng.random::<f64>() - 1.0),
                _ => {
                    trial[k].weight = (trial[k].weight
                        * (1.0 + scale * (2.0 * rng.random::<f64>() - 1.0)))
                        .max(1e-6)
                }
            }
            let value = mixture_defect(&iv, &trial);
            if value >= current_value {
                current = trial;
                current_value = value;
            }
        }
        if current_value > best {
            best = current_value;
            best_points = current.clone();
        }
    }
    Ok(AdversarialResult {
        max_defect: best,
        points: best_points,
        iterations,
    })
}
