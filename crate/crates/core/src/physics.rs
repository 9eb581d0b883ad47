//! Physical constants and the photon-as-particle mapping.
//!
//! A paraxial photon with wavelength `λ` behaves, in its transverse degree of
//! freedom, like a free particle of mass `m = h / (c λ)` whose evolution time
//! is the propagation distance divided by `c`. Everything here is SI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant, exact SI value (J·s).
pub const PLANCK_H: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, exact SI value (m/s).
pub const LIGHT_SPEED: f64 = 299_792_458.0;
/// Reduced Planck constant (J·s).
pub const HBAR: f64 = PLANCK_H / (2.0 * std::f64::consts::PI);

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// Wavelength together with the derived effective mass and momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonContext {
    pub wavelength: f64,
    pub planck_h: f64,
    pub hbar: f64,
    pub light_speed: f64,
    pub effective_mass: f64,
    pub total_momentum: f64,
}

impl PhotonContext {
    pub fn new(wavelength: f64) -> Result<Self> {
        check_positive("wavelength", wavelength)?;
        let effective_mass = PLANCK_H / (LIGHT_SPEED * wavelength);
        Ok(Self {
            wavelength,
            planck_h: PLANCK_H,
            hbar: HBAR,
            light_speed: LIGHT_SPEED,
            effective_mass,
            total_momentum: PLANCK_H / wavelength,
        })
    }

    /// Propagation distance to evolution time.
    pub fn z_to_t(&self, z: f64) -> f64 {
        z / self.light_speed
    }

    /// Evolution time to propagation distance.
    pub fn t_to_z(&self, t: f64) -> f64 {
        t * self.light_speed
    }
}

/// Shorthand for [`PhotonContext::new`].
pub fn make_context(wavelength: f64) -> Result<PhotonContext> {
    PhotonContext::new(wavelength)
}

/// Slit and lens geometry plus the quantities derived from it.
///
/// `momentum_b` is the width of the momentum window prepared by a slit of width
/// `slit_l_prime` one focal length in front of a lens; `t_m` is the time at
/// which the spreading position state has the same shape as the momentum state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub slit_l: f64,
    pub slit_l_prime: f64,
    pub focal_f: f64,
    pub momentum_b: f64,
    /// `L·B / (2πħ)`.
    pub lb_fraction: f64,
    pub z_m: f64,
    pub t_m: f64,
    /// `L² / λ`; the analytic far-field form of the evolved slit state needs `z` beyond it.
    pub far_field_z: f64,
    pub context: PhotonContext,
}

impl ExperimentParams {
    pub fn new(slit_l: f64, slit_l_prime: f64, focal_f: f64, ctx: PhotonContext) -> Result<Self> {
        check_positive("slit_l", slit_l)?;
        check_positive("slit_l_prime", slit_l_prime)?;
        check_positive("focal_f", focal_f)?;
        let momentum_b = ctx.planck_h * slit_l_prime / (focal_f * ctx.wavelength);
        Ok(Self {
            slit_l,
            slit_l_prime,
            focal_f,
            momentum_b,
            lb_fraction: slit_l * momentum_b / ctx.planck_h,
            z_m: focal_f * slit_l / slit_l_prime,
            t_m: ctx.effective_mass * slit_l / momentum_b,
            far_field_z: slit_l * slit_l / ctx.wavelength,
            context: ctx,
        })
    }

    /// Geometry with a prescribed `L·B / (2πħ)`, realised by choosing the
    /// momentum-slit width for the given lens.
    pub fn from_product(
        slit_l: f64,
        lb_fraction: f64,
        focal_f: f64,
        ctx: PhotonContext,
    ) -> Result<Self> {
        check_positive("slit_l", slit_l)?;
        check_positive("lb_fraction", lb_fraction)?;
        check_positive("focal_f", focal_f)?;
        let momentum_b = lb_fraction * ctx.planck_h / slit_l;
        let slit_l_prime = momentum_b * focal_f * ctx.wavelength / ctx.planck_h;
        Self::new(slit_l, slit_l_prime, focal_f, ctx)
    }

    /// Evolution time corresponding to `z / z_M = scaled_z`.
    pub fn time_at(&self, scaled_z: f64) -> f64 {
        scaled_z * self.t_m
    }

    /// Time below which the analytic far-field slit state is not valid, `mL²/(2πħ)`.
    pub fn far_field_t(&self) -> f64 {
        self.context.z_to_t(self.far_field_z)
    }
}

/// Shorthand for [`ExperimentParams::new`].
pub fn make_params(
    slit_l: f64,
    slit_l_prime: f64,
    focal_f: f64,
    ctx: PhotonContext,
) -> Result<ExperimentParams> {
    ExperimentParams::new(slit_l, slit_l_prime, focal_f, ctx)
}
