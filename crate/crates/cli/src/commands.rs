use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pxlab_core::classical::{
    adversarial_search, random_specs, sample_joint, straightline_report, AdversarialResult,
    DistributionSpec, StraightLineReport,
};
use pxlab_core::design::{
    curve_from_model, find_optimal_product, linspace, optimal_time_for_model, violation_range,
    DefectModel, OptimizationResult, SearchConfig,
};
use pxlab_core::fringe::{
    fit_fringe, probabilities_from_fit, synthesize_fringe, FitConfig, FitPlane, FitResult,
    FringeDataset, FringeMeta,
};
use pxlab_core::probabilities::{visibility_density, IntervalProbabilityReport};
use pxlab_core::propagator::lens_fourier_map;
use pxlab_core::states::superposition;
use pxlab_core::{Error, ExperimentParams, Grid};
use serde::{Deserialize, Serialize};

use crate::config::{Command, ConfigError, RunConfig};

pub enum Failure {
    Config(ConfigError),
    Core(Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Core(e) if e.is_numeric() => 1,
            Failure::Core(Error::Io(_) | Error::Csv(_) | Error::Json(_)) => 1,
            Failure::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => e.fmt(f),
            Failure::Core(e) => e.fmt(f),
        }
    }
}

type Outcome = Result<String, Failure>;

/// Write through a temporary sibling and rename into place.
fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<(), Error>,
) -> Result<(), Failure> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        w.flush()?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        std::fs::rename(&tmp, path)?;
        Ok::<_, Error>(())
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn summary(report: &IntervalProbabilityReport) -> String {
    format!(
        "P(L) = {:.4}, P(B) = {:.4}, P(M) = {:.4}, bound P(L)+P(B)-1 = {:.4}, defect = {:.4}",
        report.p_l, report.p_b, report.p_m, report.bound_rhs, report.defect
    )
}

pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Outcome {
    std::fs::create_dir_all(out)?;
    match command {
        Command::Simulate => simulate(cfg, out),
        Command::Curve => curve(cfg, out),
        Command::Optimize => optimize(cfg, out),
        Command::Classical => classical(cfg, out),
        Command::Synth => synth(cfg, out),
        Command::Analyze => analyze(cfg, out),
    }
}

fn model(cfg: &RunConfig) -> Result<DefectModel, Failure> {
    let params = cfg.params()?;
    let visibility = cfg.visibility()?;
    let grid = cfg.grid(&params)?;
    Ok(DefectModel::new(&params, visibility, grid)?)
}

#[derive(Serialize, Deserialize)]
pub struct SimulatedPoint {
    pub scaled_z: f64,
    pub z: f64,
    pub state_file: String,
    pub report: IntervalProbabilityReport,
}

fn simulate(cfg: &RunConfig, out: &Path) -> Outcome {
    let zs = cfg.scaled_z(|| vec![0.0, 1.0, 1.4])?;
    let model = model(cfg)?;
    let params = *model.params();
    let mut points = Vec::with_capacity(zs.len());
    for (k, &z) in zs.iter().enumerate() {
        let report = model.report_at(z)?;
        let (l, b) = model.branches_at(z);
        let psi = superposition(&l, &b)?;
        let state_file = format!("state_{k}.csv");
        write_atomic(&out.join(&state_file), |w| psi.write_csv(w))?;
        points.push(SimulatedPoint {
            scaled_z: z,
            z: z * params.z_m,
            state_file,
            report,
        });
    }
    write_json(&out.join("reports.json"), &points)?;
    let last = points.last().expect("at least one distance");
    Ok(format!(
        "simulate: {} distances; at z/z_M = {}: {}",
        points.len(),
        last.scaled_z,
        summary(&last.report)
    ))
}

#[derive(Serialize, Deserialize)]
pub struct CurveSummary {
    pub visibility: f64,
    pub params: ExperimentParams,
    pub peak_scaled_z: f64,
    pub peak_defect: f64,
    pub peak_report: IntervalProbabilityReport,
    pub violation_range: Option<(f64, f64)>,
}

fn curve(cfg: &RunConfig, out: &Path) -> Outcome {
    let zs = cfg.scaled_z(|| linspace(0.5, 10.0, 951))?;
    let model = model(cfg)?;
    let curve = curve_from_model(&model, &zs)?;
    write_atomic(&out.join("curve.csv"), |w| curve.write_csv(w))?;
    let (i, peak_defect) = curve.peak().expect("non-empty curve");
    let peak_report = model.report_at(curve.scaled_z[i])?;
    let s = CurveSummary {
        visibility: curve.visibility,
        params: curve.params,
        peak_scaled_z: curve.scaled_z[i],
        peak_defect,
        peak_report,
        violation_range: violation_range(&curve),
    };
    write_json(&out.join("curve.json"), &s)?;
    let range = match s.violation_range {
        Some((a, b)) => format!("violation for z/z_M in [{a:.3}, {b:.3}]"),
        None => "no violation".to_string(),
    };
    Ok(format!(
        "curve: {} points, peak at z/z_M = {:.3}: {}; {range}",
        curve.len(),
        s.peak_scaled_z,
        summary(&peak_report)
    ))
}

#[derive(Serialize, Deserialize)]
pub struct OptimizeOutput {
    pub visibility: f64,
    pub search: SearchConfig,
    pub lb_range: Option<(f64, f64)>,
    pub result: OptimizationResult,
    pub report: IntervalProbabilityReport,
}

fn optimize(cfg: &RunConfig, out: &Path) -> Outcome {
    let params = cfg.params()?;
    let visibility = cfg.visibility()?;
    let grid = cfg.grid(&params)?;
    let mut search = SearchConfig::default();
    if let Some(r) = cfg.numerics.z_range {
        search.z_range = (r.start, r.stop);
        search.coarse_points = r.points.max(3);
    }
    let lb_range = cfg.numerics.lb_range;
    let (result, best) = match lb_range {
        Some(range) => {
            let r = find_optimal_product(
                &params.context,
                params.slit_l,
                params.focal_f,
                range,
                visibility,
                grid,
                &search,
            )?;
            let best = ExperimentParams::from_product(
                params.slit_l,
                r.optimal_lb_fraction,
                params.focal_f,
                params.context,
            )?;
            (r, best)
        }
        None => {
            let model = DefectModel::new(&params, visibility, grid)?;
            (optimal_time_for_model(&model, &search)?, params)
        }
    };
    let report = DefectModel::new(&best, visibility, grid)?.report_at(result.optimal_scaled_z)?;
    write_json(
        &out.join("optimization.json"),
        &OptimizeOutput {
            visibility,
            search,
            lb_range,
            result,
            report,
        },
    )?;
    Ok(format!(
        "optimize: LB/2πħ = {:.4}, z/z_M = {:.3}{}: {}",
        result.optimal_lb_fraction,
        result.optimal_scaled_z,
        if result.multimodal {
            " (multimodal)"
        } else {
            ""
        },
        summary(&report)
    ))
}

#[derive(Serialize, Deserialize)]
pub struct ClassicalTrial {
    pub distribution: DistributionSpec,
    pub scaled_z: f64,
    pub report: StraightLineReport,
}

#[derive(Serialize, Deserialize)]
pub struct ClassicalOutput {
    pub seed: u64,
    pub samples: usize,
    pub trials: Vec<ClassicalTrial>,
    pub adversarial: Option<AdversarialResult>,
}

fn classical(cfg: &RunConfig, out: &Path) -> Outcome {
    let params = cfg.params()?;
    let ctx = params.context;
    let seed = cfg.seed();
    let zs = cfg.scaled_z(|| vec![1.4])?;
    let sec = &cfg.classical;
    let samples = sec.samples.unwrap_or(100_000);
    if samples == 0 {
        return Err(ConfigError {
            field: "samples".into(),
            message: "must be at least 1".into(),
        }
        .into());
    }
    let specs = match &sec.distributions {
        Some(d) if d.is_empty() => {
            return Err(ConfigError {
                field: "distributions".into(),
                message: "list is empty".into(),
            }
            .into())
        }
        Some(d) => d.clone(),
        None => random_specs(
            sec.trials.unwrap_or(100),
            params.slit_l,
            params.momentum_b,
            seed,
        ),
    };
    let mut trials = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        let ens = sample_joint(spec, samples, seed.wrapping_add(k as u64))?;
        if k == 0 {
            write_atomic(&out.join("ensemble.csv"), |w| ens.write_csv(w))?;
        }
        for &z in &zs {
            let report = straightline_report(
                &ens,
                params.slit_l,
                params.momentum_b,
                params.time_at(z),
                &ctx,
            )?;
            trials.push(ClassicalTrial {
                distribution: spec.clone(),
                scaled_z: z,
                report,
            });
        }
    }
    let iterations = sec.adversarial_iterations.unwrap_or(2000);
    let adversarial = if iterations > 0 {
        let t = params.time_at(zs[0]);
        Some(adversarial_search(
            params.slit_l,
            params.momentum_b,
            t,
            &ctx,
            iterations,
            seed,
        )?)
    } else {
        None
    };
    let worst = trials
        .iter()
        .max_by(|a, b| a.report.report.defect.total_cmp(&b.report.report.defect))
        .expect("at least one trial");
    let violations: usize = trials.iter().map(|t| t.report.inclusion_violations).sum();
    let line = format!(
        "classical: {} trials of {samples} samples, worst defect {:.4} ± {:.4} ({}), inclusion violations {violations}{}",
        trials.len(),
        worst.report.report.defect,
        worst.report.sigma_defect,
        summary(&worst.report.report),
        adversarial.as_ref().map(|a| format!(", adversarial max {:.2e}", a.max_defect)).unwrap_or_default()
    );
    write_json(
        &out.join("classical_report.json"),
        &ClassicalOutput {
            seed,
            samples,
            trials,
            adversarial,
        },
    )?;
    Ok(line)
}

fn sidecar(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

#[derive(Serialize, Deserialize)]
pub struct SynthMeta {
    #[serde(flatten)]
    pub meta: FringeMeta,
    pub scaled_z: f64,
    pub plane: FitPlane,
    pub photons: u64,
    pub seed: u64,
    pub visibility: f64,
}

fn pixel_row(half_width: f64, pitch: f64) -> Result<Grid, Error> {
    let n = (2.0 * half_width / pitch).round() as usize + 1;
    Grid::new(-0.5 * (n - 1) as f64 * pitch, n, pitch)
}

fn synth(cfg: &RunConfig, out: &Path) -> Outcome {
    let zs = cfg.scaled_z(|| vec![0.0])?;
    let scaled_z = zs[0];
    let model = model(cfg)?;
    let p = *model.params();
    let ctx = p.context;
    let sec = &cfg.fringe;
    let photons = sec.photons.unwrap_or(1_000_000);
    let (density, default_hw, default_pitch, z) = match sec.plane {
        FitPlane::Position => {
            let z = scaled_z * p.z_m;
            let (l, b) = model.branches_at(scaled_z);
            let spread = ctx.wavelength * z / p.slit_l;
            let hw = 2.0 * (ctx.planck_h / p.momentum_b).max(spread).max(p.slit_l);
            let pitch = if z > 0.0 {
                (p.slit_l / 8.0).min(ctx.wavelength * z / (4.0 * hw))
            } else {
                p.slit_l / 8.0
            };
            (
                visibility_density(&l, &b, model.visibility())?,
                hw,
                pitch,
                z,
            )
        }
        FitPlane::Momentum => {
            if scaled_z != 0.0 {
                return Err(ConfigError {
                    field: "z".into(),
                    message: "focal-plane profiles are taken at z = 0".into(),
                }
                .into());
            }
            let (l, b) = model.branches();
            let l = lens_fourier_map(l, p.focal_f, &ctx)?;
            let b = lens_fourier_map(b, p.focal_f, &ctx)?;
            let hw = 2.0 * (p.focal_f * ctx.wavelength / p.slit_l).max(p.slit_l_prime);
            (
                visibility_density(&l, &b, model.visibility())?,
                hw,
                p.slit_l_prime / 8.0,
                0.0,
            )
        }
    };
    let hw = sec.half_width.unwrap_or(default_hw);
    let pitch = sec.pixel_pitch.unwrap_or(default_pitch);
    for (field, v) in [("half_width", hw), ("pixel_pitch", pitch)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(ConfigError {
                field: field.into(),
                message: format!("must be positive, got {v}"),
            }
            .into());
        }
    }
    let pixels = pixel_row(hw, pitch)?;
    let meta = FringeMeta {
        z,
        label: format!("synthetic z/z_M = {scaled_z}"),
    };
    let data = synthesize_fringe(&density, &pixels, photons, cfg.seed(), meta.clone())?;
    let path = out.join("fringe.csv");
    write_atomic(&path, |w| data.write_csv(w))?;
    let side = SynthMeta {
        meta,
        scaled_z,
        plane: sec.plane,
        photons,
        seed: cfg.seed(),
        visibility: model.visibility(),
    };
    write_json(&sidecar(&path), &side)?;
    Ok(format!(
        "synth: {} pixels, {} counts, V = {}, z/z_M = {scaled_z}; reference {}",
        data.counts.len(),
        data.total_counts,
        model.visibility(),
        summary(&model.report_at(scaled_z)?)
    ))
}

#[derive(Serialize, Deserialize)]
pub struct AnalyzeOutput {
    pub input: PathBuf,
    pub z: f64,
    pub plane: FitPlane,
    pub report: IntervalProbabilityReport,
}

fn analyze(cfg: &RunConfig, out: &Path) -> Outcome {
    let params = cfg.params()?;
    let input = cfg.io.input.clone().ok_or_else(|| ConfigError {
        field: "input".into(),
        message: "missing".into(),
    })?;
    let side = sidecar(&input);
    let (z, plane) = if let Some(zs) = &cfg.numerics.z {
        (
            zs.first().copied().unwrap_or(0.0) * params.z_m,
            cfg.fringe.plane,
        )
    } else if side.exists() {
        let meta: SynthMeta = serde_json::from_reader(File::open(&side)?).map_err(Error::from)?;
        (meta.meta.z, meta.plane)
    } else {
        (0.0, cfg.fringe.plane)
    };
    let file = File::open(&input).map_err(|e| ConfigError {
        field: "input".into(),
        message: format!("{}: {e}", input.display()),
    })?;
    let data = FringeDataset::read_csv(
        file,
        FringeMeta {
            z,
            label: input.display().to_string(),
        },
    )?;
    let config = FitConfig::new(plane, cfg.fringe.profile, params);
    let fit: FitResult = fit_fringe(&data, &config)?;
    write_json(&out.join("fit.json"), &fit)?;
    if !fit.converged {
        return Err(Error::DegenerateFit("fit did not converge".into()).into());
    }
    let report = probabilities_from_fit(&fit, &config, z)?;
    write_json(
        &out.join("probabilities.json"),
        &AnalyzeOutput {
            input: input.clone(),
            z,
            plane,
            report,
        },
    )?;
    Ok(format!(
        "analyze: V = {:.4}, {}",
        fit.visibility,
        summary(&report)
    ))
}
