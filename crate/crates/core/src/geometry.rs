//! Closed-form ray model of the unbalanced Michelson time-bin analyzer.
//!
//! A beam entering at angle of incidence `alpha` leaves the two arms with a
//! lateral offset `delta(alpha)` and an angle-dependent path difference
//! `dl(alpha)`. The offset limits the fringe visibility of a Gaussian beam;
//! the path difference sets the analyzer phase. A 4f relay pair in the long
//! arm images the input plane onto itself, which removes both effects.
//!
//! All angles are in radians and all lengths in metres.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parameters of the unbalanced Michelson analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerGeometry {
    /// Round-trip path difference `2 (L1 - L2)` at normal incidence.
    pub delta_l0: f64,
    /// Gaussian width parameter of the beam, in the convention of the
    /// visibility law `V0 exp(-delta^2 / (2 sigma^2))`.
    pub sigma: f64,
    /// System visibility at zero angle.
    pub v0: f64,
    pub wavelength: f64,
    /// Focal length of the relay lenses.
    pub focal_length: f64,
}

impl InterferometerGeometry {
    pub fn new(
        delta_l0: f64,
        sigma: f64,
        v0: f64,
        wavelength: f64,
        focal_length: f64,
    ) -> Result<Self> {
        let geom = Self {
            delta_l0,
            sigma,
            v0,
            wavelength,
            focal_length,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// The analyzer characterized in the experiment: 2 ns delay (0.60 m),
    /// 1.49 mm beam, 776 nm light, zero-angle visibility 0.91.
    pub fn reference() -> Self {
        Self {
            delta_l0: 0.60,
            sigma: 1.49e-3,
            v0: 0.91,
            wavelength: 776e-9,
            focal_length: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("delta_l0", self.delta_l0)?;
        positive("sigma", self.sigma)?;
        positive("wavelength", self.wavelength)?;
        positive("focal_length", self.focal_length)?;
        if !(0.0..=1.0).contains(&self.v0) {
            return Err(Error::param("v0", self.v0, "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Lateral offset between the rays leaving the short and the long arm.
    pub fn lateral_offset(&self, alpha: f64) -> Result<f64> {
        check_angle(alpha)?;
        let t = alpha.tan();
        Ok(self.delta_l0 * t / (1.0 + t))
    }

    /// Angle-dependent optical path difference between the two arms.
    pub fn path_difference(&self, alpha: f64) -> Result<f64> {
        let delta = self.lateral_offset(alpha)?;
        let (s, c) = alpha.sin_cos();
        let bracket = 1.0 / c + (1.0 - alpha.tan()) / (c + s);
        Ok(0.5 * self.delta_l0 * bracket + delta * (alpha - FRAC_PI_4).tan())
    }

    /// Analytic derivative `d(path_difference)/d(alpha)`; equals `-2 delta_l0`
    /// at normal incidence.
    pub fn path_difference_slope(&self, alpha: f64) -> Result<f64> {
        check_angle(alpha)?;
        let d = self.delta_l0;
        let (s, c) = alpha.sin_cos();
        let t = alpha.tan();
        let sec2 = 1.0 / (c * c);

        let d_sec = t / c;
        let g_num = 1.0 - t;
        let g_den = c + s;
        let d_g = (-sec2 * g_den - g_num * (c - s)) / (g_den * g_den);

        let delta = d * t / (1.0 + t);
        let d_delta = d * sec2 / ((1.0 + t) * (1.0 + t));
        let shifted = alpha - FRAC_PI_4;
        let h = shifted.tan();
        let d_h = 1.0 / shifted.cos().powi(2);

        Ok(0.5 * d * (d_sec + d_g) + d_delta * h + delta * d_h)
    }

    /// Output intensity of a Gaussian beam of amplitude `amplitude` for
    /// relative arm phase `phi`.
    pub fn fringe_intensity(&self, alpha: f64, phi: f64, amplitude: f64) -> Result<f64> {
        let envelope = self.overlap_envelope(alpha)?;
        let scale = PI * amplitude * amplitude * self.sigma * self.sigma;
        Ok(scale * (1.0 + envelope * phi.cos()))
    }

    /// Gaussian overlap of the laterally offset beams, `exp(-delta^2/(2 sigma^2))`.
    pub fn overlap_envelope(&self, alpha: f64) -> Result<f64> {
        let delta = self.lateral_offset(alpha)?;
        Ok((-delta * delta / (2.0 * self.sigma * self.sigma)).exp())
    }

    /// Fringe visibility without relay optics.
    pub fn visibility(&self, alpha: f64) -> Result<f64> {
        check_angle(alpha)?;
        let t = alpha.tan();
        let arg = self.delta_l0 * t / (std::f64::consts::SQRT_2 * self.sigma * (1.0 + t));
        Ok(self.v0 * (-arg * arg).exp())
    }

    /// Analyzer phase `2 pi dl(alpha) / lambda`, unwrapped and wrapped.
    pub fn phase(&self, alpha: f64) -> Result<Phase> {
        let unwrapped = 2.0 * PI * self.path_difference(alpha)? / self.wavelength;
        Ok(Phase {
            unwrapped,
            wrapped: wrap_phase(unwrapped),
        })
    }

    /// Phase change relative to normal incidence. Evaluated from the path
    /// difference change so that the large common offset does not eat
    /// precision.
    pub fn phase_shift(&self, alpha: f64) -> Result<f64> {
        let dl = self.path_difference(alpha)? - self.delta_l0;
        Ok(2.0 * PI * dl / self.wavelength)
    }

    /// Angle change that produces a pi phase shift, from the analytic slope at
    /// `alpha`.
    pub fn angle_per_pi(&self, alpha: f64) -> Result<f64> {
        let slope = self.path_difference_slope(alpha)?;
        Ok(self.wavelength / (2.0 * slope.abs()))
    }
}

/// Analyzer phase in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub unwrapped: f64,
    /// Same phase reduced to `(-pi, pi]`.
    pub wrapped: f64,
}

/// Reduce a phase to `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let mut w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// 1/e² intensity radius of a Gaussian from the standard deviation of its
/// intensity profile (`w = 2 s`).
pub fn waist_from_intensity_std(std: f64) -> f64 {
    2.0 * std
}

/// Inverse of [`waist_from_intensity_std`].
pub fn intensity_std_from_waist(waist: f64) -> f64 {
    0.5 * waist
}

fn check_angle(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha.abs() >= FRAC_PI_4 {
        return Err(Error::AngleDomain { alpha });
    }
    Ok(())
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, value, "must be positive"))
    }
}

/// Paraxial ray-transfer (ABCD) matrix acting on `(height, angle)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayTransferMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RayTransferMatrix {
    pub const IDENTITY: Self = Self {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn free_space(distance: f64) -> Self {
        Self {
            a: 1.0,
            b: distance,
            c: 0.0,
            d: 1.0,
        }
    }

    pub fn thin_lens(focal_length: f64) -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: -1.0 / focal_length,
            d: 1.0,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_deviation(&self, other: &Self) -> f64 {
        [
            self.a - other.a,
            self.b - other.b,
            self.c - other.c,
            self.d - other.d,
        ]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Mul for RayTransferMatrix {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        Self {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }
}

/// One pass through the relay: `FS(f) L(f) FS(2f) L(f) FS(f)`, multiplied
/// left to right. Equals `-1` (inverted image).
pub fn relay_single_pass(focal_length: f64) -> Result<RayTransferMatrix> {
    positive("focal_length", focal_length)?;
    let f = focal_length;
    Ok(RayTransferMatrix::free_space(f)
        * RayTransferMatrix::thin_lens(f)
        * RayTransferMatrix::free_space(2.0 * f)
        * RayTransferMatrix::thin_lens(f)
        * RayTransferMatrix::free_space(f))
}

/// Double pass through the relay (out and back in the long arm); the
/// identity.
pub fn relay_matrix(focal_length: f64) -> Result<RayTransferMatrix> {
    let single = relay_single_pass(focal_length)?;
    Ok(single * single)
}
