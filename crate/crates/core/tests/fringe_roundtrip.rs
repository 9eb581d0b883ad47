mod common;

use common::*;
use pxlab_core::fringe::*;
use rayon::prelude::*;

fn position_fit() -> FitConfig {
    FitConfig::new(FitPlane::Position, SlitProfile::Box, reference())
}

fn noiseless(
    density: &pxlab_core::probabilities::Density,
    pixels: &pxlab_core::Grid,
    z: f64,
) -> FringeDataset {
    let counts = expected_counts(density, pixels, 1e12)
        .unwrap()
        .iter()
        .map(|c| c.round() as u64)
        .collect();
    FringeDataset::new(pixels.positions().collect(), counts, meta(z)).unwrap()
}

#[test]
fn self_consistent_recovery() {
    let cfg = position_fit();
    let (w, k) = cfg.nominal_widths();
    let truth = FitResult {
        visibility: 0.85,
        center: 3e-6,
        amplitude: 1e9,
        background: 50.0,
        width_params: vec![1.02 * w, 0.97 * std::f64::consts::PI / k],
        rms_residual: 0.0,
        converged: true,
    };
    for (z, px) in [(0.0, slit_pixels()), (1.4 * reference().z_m, far_pixels())] {
        let counts = predict_counts(&truth, &cfg, &px, z)
            .unwrap()
            .iter()
            .map(|c| c.round() as u64)
            .collect();
        let data = FringeDataset::new(px.positions().collect(), counts, meta(z)).unwrap();
        let fit = fit_fringe(&data, &cfg).unwrap();
        assert!(fit.converged);
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(fit.visibility, 0.85) < 1e-3, "{fit:?}");
        assert!(rel(fit.amplitude, 1e9) < 1e-3, "{fit:?}");
        assert!(rel(fit.background, 50.0) < 1e-3, "{fit:?}");
        assert!((fit.center - 3e-6).abs() < 1e-3 * 47e-6, "{fit:?}");
        assert!(
            rel(fit.width_params[0], truth.width_params[0]) < 1e-3,
            "{fit:?}"
        );
        assert!(
            rel(fit.width_params[1], truth.width_params[1]) < 1e-3,
            "{fit:?}"
        );
    }
}

#[test]
fn poisson_fit_recovers_visibility() {
    let m = model(0.85);
    let px = slit_pixels();
    let density = density_at(&m, 0.0);
    let cfg = position_fit();
    let fits: Vec<FitResult> = (0..10u64)
        .into_par_iter()
        .map(|seed| {
            fit_fringe(
                &synthesize_fringe(&density, &px, 1_000_000, seed, meta(0.0)).unwrap(),
                &cfg,
            )
            .unwrap()
        })
        .collect();
    for f in &fits {
        assert!(f.converged);
        assert!((f.visibility - 0.85).abs() < 0.02, "{f:?}");
    }
    let bias = fits.iter().map(|f| f.visibility).sum::<f64>() / fits.len() as f64 - 0.85;
    assert!(bias.abs() < 0.01, "bias {bias}");

    let report = probabilities_from_fit(&fits[0], &cfg, 0.0).unwrap();
    assert!((report.p_l - 0.565).abs() < 0.03, "{report:?}");
    assert!((report.p_b - 0.565).abs() < 0.03, "{report:?}");
}

#[test]
fn far_profile_gives_m_probability() {
    let m = model(0.85);
    let z = 1.4 * reference().z_m;
    let data =
        synthesize_fringe(&density_at(&m, 1.4), &far_pixels(), 1_000_000, 7, meta(z)).unwrap();
    let cfg = position_fit();
    let fit = fit_fringe(&data, &cfg).unwrap();
    assert!(fit.converged);
    assert!((fit.visibility - 0.85).abs() < 0.02, "{fit:?}");
    let report = probabilities_from_fit(&fit, &cfg, z).unwrap();
    assert!((report.p_m - 0.072).abs() < 0.010, "{report:?}");
}

#[test]
fn noiseless_pipeline_matches_direct_integration() {
    let m = model(1.0);
    let cfg = position_fit();
    for (scaled, px) in [(0.0, slit_pixels()), (1.4, far_pixels())] {
        let z = scaled * reference().z_m;
        let fit = fit_fringe(&noiseless(&density_at(&m, scaled), &px, z), &cfg).unwrap();
        assert!(fit.converged);
        let from_fit = probabilities_from_fit(&fit, &cfg, z).unwrap();
        let direct = m.report_at(scaled).unwrap();
        assert!(
            (from_fit.p_l - direct.p_l).abs() < 1e-3,
            "{from_fit:?} {direct:?}"
        );
        assert!(
            (from_fit.p_b - direct.p_b).abs() < 1e-3,
            "{from_fit:?} {direct:?}"
        );
        assert!(
            (from_fit.p_m - direct.p_m).abs() < 1e-3,
            "{from_fit:?} {direct:?}"
        );
    }
}

#[test]
fn focal_plane_profile() {
    let p = reference();
    let m = model(1.0);
    let (l, b) = m.branches();
    let ctx = p.context;
    let lens_l = pxlab_core::propagator::lens_fourier_map(l, p.focal_f, &ctx).unwrap();
    let lens_b = pxlab_core::propagator::lens_fourier_map(b, p.focal_f, &ctx).unwrap();
    let density = pxlab_core::probabilities::visibility_density(&lens_l, &lens_b, 1.0).unwrap();
    let cfg = FitConfig::new(FitPlane::Momentum, SlitProfile::Box, p);
    let px = pixels(4e-3, 37e-6 / 8.0);
    let fit = fit_fringe(&noiseless(&density, &px, 0.0), &cfg).unwrap();
    assert!(fit.converged);
    assert!((fit.width_params[0] / 37e-6 - 1.0).abs() < 1e-2, "{fit:?}");
    let r = probabilities_from_fit(&fit, &cfg, 1.4 * p.z_m).unwrap();
    let direct = m.report_at(1.4).unwrap();
    assert!((r.p_b - direct.p_b).abs() < 2e-3, "{r:?}");
    assert!((r.p_l - direct.p_l).abs() < 2e-3, "{r:?}");
    assert!((r.p_m - direct.p_m).abs() < 2e-3, "{r:?}");
}

#[test]
fn visibility_is_scale_invariant() {
    let m = model(0.85);
    let px = pixels(1.5e-3, 47e-6 / 8.0);
    let data = synthesize_fringe(&density_at(&m, 0.0), &px, 1_000_000, 3, meta(0.0)).unwrap();
    assert!(data.counts.iter().all(|&c| c > 0));
    let cfg = position_fit();
    let a = fit_fringe(&data, &cfg).unwrap();
    let b = fit_fringe(&data.scaled(3), &cfg).unwrap();
    assert!(
        (a.visibility - b.visibility).abs() < 1e-6,
        "{} {}",
        a.visibility,
        b.visibility
    );
}

#[test]
fn error_shrinks_with_photon_number() {
    let m = model(0.85);
    let px = slit_pixels();
    let density = density_at(&m, 0.0);
    let cfg = position_fit();
    let median_error = |n: u64| {
        let mut errs: Vec<f64> = (0..20u64)
            .into_par_iter()
            .map(|seed| {
                let data = synthesize_fringe(&density, &px, n, 100 + seed, meta(0.0)).unwrap();
                (fit_fringe(&data, &cfg).unwrap().visibility - 0.85).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        0.5 * (errs[9] + errs[10])
    };
    let e: Vec<f64> = [10_000, 100_000, 1_000_000]
        .into_iter()
        .map(median_error)
        .collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
}

#[test]
fn synthesis_is_deterministic_and_unbiased() {
    let m = model(0.85);
    let px = slit_pixels();
    let density = density_at(&m, 0.0);
    let a = synthesize_fringe(&density, &px, 100_000, 9, meta(0.0)).unwrap();
    assert_eq!(
        a,
        synthesize_fringe(&density, &px, 100_000, 9, meta(0.0)).unwrap()
    );
    assert_ne!(
        a.counts,
        synthesize_fringe(&density, &px, 100_000, 10, meta(0.0))
            .unwrap()
            .counts
    );

    let mean = expected_counts(&density, &px, 100_000.0).unwrap();
    let runs = 200;
    let mut sums = vec![0u64; px.n_points];
    for seed in 0..runs {
        let d = synthesize_fringe(&density, &px, 100_000, seed, meta(0.0)).unwrap();
        for (s, c) in sums.iter_mut().zip(&d.counts) {
            *s += c;
        }
    }
    // chi-square of the summed counts against the summed means
    let (chi2, dof) = sums
        .iter()
        .zip(&mean)
        .filter(|(_, m)| **m * runs as f64 > 20.0)
        .fold((0.0, 0usize), |(c, d), (s, m)| {
            let mu = m * runs as f64;
            (c + (*s as f64 - mu).powi(2) / mu, d + 1)
        });
    let dof = dof as f64;
    assert!(
        (chi2 - dof).abs() < 5.0 * (2.0 * dof).sqrt(),
        "chi2 {chi2} dof {dof}"
    );
}
