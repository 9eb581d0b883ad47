mod common;

use common::*;
use proptest::prelude::*;
use pxlab_core::propagator::{to_momentum_representation, FreePropagator};
use pxlab_core::states::{
    box_position_state, evolved_position_state, overlap, sinc_momentum_state,
};
use pxlab_core::{Complex64, Grid, PhotonContext, WaveFunction};

const WAVELENGTH: f64 = 800e-9;

fn ctx() -> PhotonContext {
    PhotonContext::new(WAVELENGTH).unwrap()
}

fn small_grid() -> Grid {
    Grid::centered(4e-3, 1 << 12).unwrap()
}

/// Normalised Gaussian packet with a momentum kick.
fn packet(grid: Grid, x0: f64, sigma: f64, p0: f64) -> WaveFunction {
    let hbar = ctx().hbar;
    WaveFunction::from_fn(grid, |x| {
        Complex64::from_polar(
            (-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp(),
            p0 * x / hbar,
        )
    })
    .normalized()
    .unwrap()
}

fn mean_x(psi: &WaveFunction) -> f64 {
    psi.density()
        .iter()
        .zip(psi.grid.positions())
        .map(|(d, x)| d * x)
        .sum::<f64>()
        * psi.grid.dx
}

// distance scale of the small grid: a packet of width 100 µm spreads to
// ~ λz/(4πσ) = 6e-4 m by z = 1 m
fn time(z: f64) -> f64 {
    ctx().z_to_t(z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unitary(x0 in -5e-4..5e-4f64, s in 6e-5..2e-4f64, kick in -2.0..2.0f64, z in 0.0..1.0f64) {
        let g = small_grid();
        let p0 = kick * 1e3 * ctx().hbar;
        let a = packet(g, x0, s, p0);
        let b = packet(g, -x0, 1.3 * s, -p0);
        let prop = FreePropagator::new(g);
        let (at, bt) = (prop.propagate(&a, time(z), &ctx()).unwrap(), prop.propagate(&b, time(z), &ctx()).unwrap());
        prop_assert!((at.norm_sq() - 1.0).abs() < 1e-9);
        let before = overlap(&a, &b).unwrap();
        let after = overlap(&at, &bt).unwrap();
        prop_assert!((before - after).norm() < 1e-9);
    }

    #[test]
    fn composes(z1 in -0.5..0.5f64, z2 in -0.5..0.5f64, x0 in -5e-4..5e-4f64) {
        let g = small_grid();
        let a = packet(g, x0, 1e-4, 0.0);
        let prop = FreePropagator::new(g);
        let two = prop.propagate(&prop.propagate(&a, time(z1), &ctx()).unwrap(), time(z2), &ctx()).unwrap();
        let one = prop.propagate(&a, time(z1 + z2), &ctx()).unwrap();
        prop_assert!(two.l2_distance(&one).unwrap() < 1e-9);
    }

    #[test]
    fn reverses(z in 0.0..1.0f64, x0 in -5e-4..5e-4f64, kick in -2.0..2.0f64) {
        let g = small_grid();
        let a = packet(g, x0, 1e-4, kick * 1e3 * ctx().hbar);
        let prop = FreePropagator::new(g);
        let back = prop.propagate(&prop.propagate(&a, time(z), &ctx()).unwrap(), -time(z), &ctx()).unwrap();
        prop_assert!(back.l2_distance(&a).unwrap() < 1e-9);
    }

    #[test]
    fn parseval(x0 in -5e-4..5e-4f64, s in 6e-5..2e-4f64, kick in -2.0..2.0f64) {
        let a = packet(small_grid(), x0, s, kick * 1e3 * ctx().hbar);
        let phi = to_momentum_representation(&a, &ctx());
        prop_assert!((phi.norm_sq() - a.norm_sq()).abs() < 1e-9);
    }

    #[test]
    fn ehrenfest(x0 in -3e-4..3e-4f64, kick in -2.0..2.0f64, z in 0.0..1.0f64) {
        let c = ctx();
        let p0 = kick * 1e3 * c.hbar;
        let a = packet(small_grid(), x0, 1e-4, p0);
        let at = FreePropagator::new(small_grid()).propagate(&a, time(z), &c).unwrap();
        let expected = x0 + p0 * time(z) / c.effective_mass;
        prop_assert!((mean_x(&at) - expected).abs() < 1e-9, "{} vs {}", mean_x(&at), expected);
    }
}

/// `|x| < p_max t / 2m`: where the grid's momentum cutoff still lets the
/// evolved slit state be represented.
fn resolved_half_width(grid: &Grid, t: f64) -> f64 {
    let c = ctx();
    0.5 * std::f64::consts::PI * c.hbar * t / (c.effective_mass * grid.dx)
}

fn modulus_error(a: &WaveFunction, b: &WaveFunction, half_width: f64) -> f64 {
    let sq: f64 = a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .zip(a.grid.positions())
        .filter(|(_, x)| x.abs() < half_width)
        .map(|((p, q), _)| (p.norm() - q.norm()).powi(2))
        .sum();
    (sq * a.grid.dx).sqrt()
}

#[test]
fn slit_state_far_field_form() {
    let p = reference();
    let t = p.time_at(1.4);
    let mut last = f64::INFINITY;
    for (n, pps) in [(17, 25), (18, 49), (19, 99)] {
        let grid = Grid::for_params(
            &p,
            pxlab_core::GridConfig {
                n_points: 1 << n,
                points_per_slit: pps,
            },
        )
        .unwrap();
        let numeric = FreePropagator::new(grid)
            .propagate(&box_position_state(p.slit_l, grid).unwrap(), t, &p.context)
            .unwrap();
        let analytic = evolved_position_state(p.slit_l, t, &p.context, grid).unwrap();
        let window = modulus_error(&numeric, &analytic, resolved_half_width(&grid, t));
        assert!(window < 1e-2, "{n} {pps}: {window}");
        let central = modulus_error(
            &numeric,
            &analytic,
            5.0 * p.context.wavelength * 1.4 * p.z_m / p.slit_l,
        );
        assert!(central < 1e-2, "{n} {pps}: {central}");
        let full = modulus_error(&numeric, &analytic, f64::INFINITY);
        assert!(full < last, "{n} {pps}: {full}");
        last = full;
    }
}

#[test]
fn momentum_state_is_nearly_stationary() {
    let p = reference();
    let grid = Grid::for_params(&p, Default::default()).unwrap();
    let b0 = sinc_momentum_state(p.momentum_b, grid).unwrap();
    let peak = b0
        .amplitudes
        .iter()
        .map(|a| a.norm_sqr())
        .fold(0.0, f64::max);
    let prop = FreePropagator::new(grid);
    for scaled in [0.25, 0.5, 1.0, 1.5, 2.0] {
        let bt = prop.propagate(&b0, p.time_at(scaled), &p.context).unwrap();
        let dev = b0
            .amplitudes
            .iter()
            .zip(&bt.amplitudes)
            .map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).abs())
            .fold(0.0, f64::max);
        assert!(dev / peak < 0.01, "z = {scaled} z_M: {}", dev / peak);
    }
}
