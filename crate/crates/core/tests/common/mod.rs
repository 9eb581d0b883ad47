#![allow(dead_code)]

use pxlab_core::design::DefectModel;
use pxlab_core::fringe::FringeMeta;
use pxlab_core::probabilities::{visibility_density, Density};
use pxlab_core::{ExperimentParams, Grid, GridConfig, PhotonContext};

pub fn reference() -> ExperimentParams {
    ExperimentParams::new(47e-6, 37e-6, 0.10, PhotonContext::new(800e-9).unwrap()).unwrap()
}

pub fn model(visibility: f64) -> DefectModel {
    DefectModel::new(&reference(), visibility, GridConfig::default()).unwrap()
}

/// Symmetric pixel row.
pub fn pixels(half_width: f64, pitch: f64) -> Grid {
    let n = (2.0 * half_width / pitch).round() as usize + 1;
    Grid::new(-0.5 * (n - 1) as f64 * pitch, n, pitch).unwrap()
}

/// Pixels for a slit-plane profile.
pub fn slit_pixels() -> Grid {
    pixels(4.5e-3, 47e-6 / 8.0)
}

/// Pixels for a profile near 1.4 z_M.
pub fn far_pixels() -> Grid {
    pixels(6e-3, 10e-6)
}

pub fn density_at(model: &DefectModel, scaled_z: f64) -> Density {
    let (l, b) = model.branches_at(scaled_z);
    visibility_density(&l, &b, model.visibility()).unwrap()
}

pub fn meta(z: f64) -> FringeMeta {
    FringeMeta {
        z,
        label: String::new(),
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

pub fn integrate<T>(rule: &[(f64, f64)], a: f64, b: f64, panels: usize, f: impl Fn(f64) -> T) -> T
where
    T: Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let h = (b - a) / panels as f64;
    let mut acc = T::default();
    for j in 0..panels {
        let mid = a + (j as f64 + 0.5) * h;
        for &(x, w) in rule {
            acc = acc + f(mid + 0.5 * h * x) * (0.5 * h * w);
        }
    }
    acc
}

/// Quadrature answers for the box slit and the sinc momentum state, built
/// from the free-particle propagator without any grid.
pub mod exact {
    use super::*;
    use pxlab_core::Complex64;
    use std::f64::consts::PI;

    pub struct Oracle {
        pub slit_l: f64,
        pub momentum_b: f64,
        pub mass: f64,
        pub hbar: f64,
        rule: Vec<(f64, f64)>,
    }

    impl Oracle {
        pub fn new(params: &ExperimentParams) -> Self {
            Self {
                slit_l: params.slit_l,
                momentum_b: params.momentum_b,
                mass: params.context.effective_mass,
                hbar: params.context.hbar,
                rule: gauss_legendre(48),
            }
        }

        /// `⟨L|B⟩` in momentum space.
        pub fn overlap(&self) -> f64 {
            let (l, b, hb) = (self.slit_l, self.momentum_b, self.hbar);
            let amp = |p: f64| {
                let u = p * l / (2.0 * hb);
                (l / (2.0 * PI * hb)).sqrt() * if u == 0.0 { 1.0 } else { u.sin() / u }
            };
            integrate(&self.rule, -b / 2.0, b / 2.0, 8, amp) / b.sqrt()
        }

        pub fn psi_l(&self, x: f64, t: f64) -> Complex64 {
            let (l, m, hb) = (self.slit_l, self.mass, self.hbar);
            if t == 0.0 {
                return Complex64::new(
                    if x.abs() < l / 2.0 {
                        1.0 / l.sqrt()
                    } else {
                        0.0
                    },
                    0.0,
                );
            }
            let a = m / (2.0 * hb * t);
            let pref =
                (Complex64::new(m / (2.0 * PI * hb * t), 0.0) / Complex64::i()).sqrt() / l.sqrt();
            pref * integrate(&self.rule, -l / 2.0, l / 2.0, 16, |y| {
                Complex64::from_polar(1.0, a * (x - y).powi(2))
            })
        }

        pub fn psi_b(&self, x: f64, t: f64) -> Complex64 {
            let (b, m, hb) = (self.momentum_b, self.mass, self.hbar);
            let phase =
                |p: f64| Complex64::from_polar(1.0, p * x / hb - p * p * t / (2.0 * m * hb));
            integrate(&self.rule, -b / 2.0, b / 2.0, 16, phase) / (2.0 * PI * hb * b).sqrt()
        }

        fn norm(&self, visibility: f64) -> f64 {
            2.0 + 2.0 * visibility * self.overlap()
        }

        /// Probability in `|x| < width/2` at time `t` under the visibility model.
        pub fn position_probability(&self, width: f64, t: f64, visibility: f64) -> f64 {
            let density = |x: f64| {
                let (a, b) = (self.psi_l(x, t), self.psi_b(x, t));
                a.norm_sqr() + b.norm_sqr() + 2.0 * visibility * (a.conj() * b).re
            };
            integrate(&self.rule, -width / 2.0, width / 2.0, 32, density) / self.norm(visibility)
        }

        pub fn p_l(&self, visibility: f64) -> f64 {
            self.position_probability(self.slit_l, 0.0, visibility)
        }

        pub fn p_b(&self, visibility: f64) -> f64 {
            let (l, b, hb) = (self.slit_l, self.momentum_b, self.hbar);
            let density = |p: f64| {
                let u = p * l / (2.0 * hb);
                let fl = (l / (2.0 * PI * hb)).sqrt() * if u == 0.0 { 1.0 } else { u.sin() / u };
                let fb = 1.0 / b.sqrt();
                fl * fl + fb * fb + 2.0 * visibility * fl * fb
            };
            integrate(&self.rule, -b / 2.0, b / 2.0, 16, density) / self.norm(visibility)
        }

        pub fn p_m(&self, t: f64, visibility: f64) -> f64 {
            let m_width = self.slit_l + self.momentum_b * t / self.mass;
            self.position_probability(m_width, t, visibility)
        }

        pub fn defect(&self, t: f64, visibility: f64) -> f64 {
            self.p_l(visibility) + self.p_b(visibility) - 1.0 - self.p_m(t, visibility)
        }
    }
}
