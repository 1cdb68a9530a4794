//! Scalar wave-optics model of the analyzer arms.
//!
//! Fields live on a square `N × N` grid centred on the optical axis, sample
//! `(i, j)` at `x = (j - N/2) dx`, `y = (i - N/2) dx`, stored row-major.
//! Transforms use the unitary-free convention of `rustfft`; all integrals
//! carry the `dx²` area element explicitly.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::geometry::{intensity_std_from_waist, InterferometerGeometry};
use crate::{Error, Result};

/// Smallest admissible grid size.
pub const MIN_GRID: usize = 64;
/// Default grid size used for the analyzer geometry.
pub const DEFAULT_GRID: usize = 512;
/// Default grid extent in units of the visibility-law width `sigma`.
pub const DEFAULT_EXTENT_SIGMAS: f64 = 16.0;

/// Complex scalar field sampled on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    n: usize,
    extent: f64,
    wavelength: f64,
    data: Vec<Complex64>,
}

/// Grid parameters shared by every field in one computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub extent: f64,
    pub wavelength: f64,
}

impl GridSpec {
    pub fn new(n: usize, extent: f64, wavelength: f64) -> Result<Self> {
        let spec = Self { n, extent, wavelength };
        spec.validate()?;
        Ok(spec)
    }

    /// 512² samples over 16 σ at the analyzer wavelength.
    pub fn for_geometry(geom: &InterferometerGeometry) -> Self {
        Self {
            n: DEFAULT_GRID,
            extent: DEFAULT_EXTENT_SIGMAS * geom.sigma,
            wavelength: geom.wavelength,
        }
    }

    pub fn pitch(&self) -> f64 {
        self.extent / self.n as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n < MIN_GRID || !self.n.is_power_of_two() {
            return Err(Error::GridResolution(format!(
                "grid size {} must be a power of two and at least {MIN_GRID}",
                self.n
            )));
        }
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return Err(Error::param("extent", self.extent, "must be positive"));
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::param("wavelength", self.wavelength, "must be positive"));
        }
        Ok(())
    }

    fn coords(&self) -> Vec<f64> {
        let dx = self.pitch();
        let half = (self.n / 2) as f64;
        (0..self.n).map(|j| (j as f64 - half) * dx).collect()
    }

    /// FFT-ordered spatial frequencies in cycles per metre.
    fn frequencies(&self) -> Vec<f64> {
        let n = self.n as isize;
        (0..n)
            .map(|k| {
                let k = if k < n / 2 { k } else { k - n };
                k as f64 / self.extent
            })
            .collect()
    }
}

impl ScalarField {
    pub fn from_samples(spec: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        spec.validate()?;
        if data.len() != spec.n * spec.n {
            return Err(Error::DimensionMismatch {
                expected: spec.n * spec.n,
                found: data.len(),
            });
        }
        Ok(Self {
            n: spec.n,
            extent: spec.extent,
            wavelength: spec.wavelength,
            data,
        })
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            n: self.n,
            extent: self.extent,
            wavelength: self.wavelength,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn pitch(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.data
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.n + col]
    }

    /// `Σ |E|² dx²`.
    pub fn power(&self) -> f64 {
        let da = self.pitch() * self.pitch();
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * da
    }

    /// `<self|other> = Σ conj(E_self) E_other dx²`.
    pub fn inner(&self, other: &ScalarField) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let da = self.pitch() * self.pitch();
        let sum: Complex64 = self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        Ok(sum * da)
    }

    /// Normalized overlap magnitude `|<a|b>| / (‖a‖ ‖b‖)`.
    pub fn overlap(&self, other: &ScalarField) -> Result<f64> {
        let ip = self.inner(other)?;
        let den = (self.power() * other.power()).sqrt();
        if den <= 0.0 {
            return Err(Error::ZeroDenominator("field overlap (zero power)"));
        }
        Ok(ip.norm() / den)
    }

    /// Multiply every sample by `factor`.
    pub fn scaled(&self, factor: Complex64) -> ScalarField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= factor);
        out
    }

    /// RMS difference of the samples.
    pub fn rms_difference(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        let sum: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((sum / self.data.len() as f64).sqrt())
    }

    /// Intensity centroid and standard deviation along `x` and `y`.
    pub fn intensity_moments(&self) -> Result<Moments> {
        let coords = self.spec().coords();
        let (mut p, mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &y) in coords.iter().enumerate() {
            for (j, &x) in coords.iter().enumerate() {
                let w = self.data[i * self.n + j].norm_sqr();
                p += w;
                sx += w * x;
                sy += w * y;
                sxx += w * x * x;
                syy += w * y * y;
            }
        }
        if p <= 0.0 {
            return Err(Error::ZeroDenominator("intensity moments (zero power)"));
        }
        let (mx, my) = (sx / p, sy / p);
        Ok(Moments {
            centroid_x: mx,
            centroid_y: my,
            std_x: (sxx / p - mx * mx).max(0.0).sqrt(),
            std_y: (syy / p - my * my).max(0.0).sqrt(),
        })
    }

    /// Write `x_m,y_m,magnitude,phase_rad` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let coords = self.spec().coords();
        writeln!(out, "x_m,y_m,magnitude,phase_rad")?;
        for (i, &y) in coords.iter().enumerate() {
            for (j, &x) in coords.iter().enumerate() {
                let z = self.data[i * self.n + j];
                writeln!(out, "{x:e},{y:e},{:e},{:e}", z.norm(), z.arg())?;
            }
        }
        Ok(())
    }

    fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.n != other.n || self.extent != other.extent || self.wavelength != other.wavelength {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    fn normalize(&mut self) -> Result<()> {
        let p = self.power();
        if p.is_nan() || p <= 0.0 {
            return Err(Error::ZeroDenominator("field normalization (zero power)"));
        }
        let k = 1.0 / p.sqrt();
        self.data.iter_mut().for_each(|z| *z *= k);
        Ok(())
    }

    fn map_spectrum(&self, transfer: impl Fn(f64, f64) -> Complex64) -> ScalarField {
        let mut data = self.data.clone();
        let n = self.n;
        fft2(&mut data, n, false);
        let f = self.spec().frequencies();
        let scale = 1.0 / (n * n) as f64;
        for (i, &fy) in f.iter().enumerate() {
            for (j, &fx) in f.iter().enumerate() {
                data[i * n + j] *= transfer(fx, fy) * scale;
            }
        }
        fft2(&mut data, n, true);
        ScalarField { data, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub centroid_x: f64,
    pub centroid_y: f64,
    pub std_x: f64,
    pub std_y: f64,
}

fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    fft.process(data);
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for j in 0..n {
        for i in 0..n {
            column[i] = data[i * n + j];
        }
        fft.process_with_scratch(&mut column, &mut scratch);
        for i in 0..n {
            data[i * n + j] = column[i];
        }
    }
}

/// Unit-power Gaussian with amplitude `exp(-r²/(4 s²))`, i.e. an intensity
/// profile of standard deviation `s` per axis.
pub fn make_gaussian(sigma: f64, grid_n: usize, extent: f64, wavelength: f64) -> Result<ScalarField> {
    let spec = GridSpec::new(grid_n, extent, wavelength)?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param("sigma", sigma, "must be positive"));
    }
    if sigma < 3.0 * spec.pitch() {
        return Err(Error::GridResolution(format!(
            "sigma {sigma:e} m spans fewer than 3 cells of {:e} m",
            spec.pitch()
        )));
    }
    if extent < 12.0 * sigma {
        return Err(Error::GridResolution(format!(
            "extent {extent:e} m is below 12 sigma ({:e} m); tails are truncated",
            12.0 * sigma
        )));
    }
    let coords = spec.coords();
    let g: Vec<f64> = coords.iter().map(|x| (-x * x / (4.0 * sigma * sigma)).exp()).collect();
    let mut data = Vec::with_capacity(grid_n * grid_n);
    for gy in &g {
        for gx in &g {
            data.push(Complex64::new(gy * gx, 0.0));
        }
    }
    let mut field = ScalarField::from_samples(spec, data)?;
    field.normalize()?;
    Ok(field)
}

/// Waist used for the Hermite-Gauss basis of [`make_speckle`]: the classical
/// turning point of the highest order sits at 0.3 of the extent.
pub fn speckle_waist(mode_count: usize, extent: f64) -> f64 {
    let k = mode_count.saturating_sub(1) as f64;
    (extent / 8.0).min(0.3 * extent / (k + 0.5).sqrt())
}

/// Normalized Hermite functions `ψ_0 … ψ_order` at `xi`.
fn hermite_functions(order: usize, xi: f64) -> Vec<f64> {
    let mut psi = Vec::with_capacity(order + 1);
    psi.push(PI.powf(-0.25) * (-0.5 * xi * xi).exp());
    if order >= 1 {
        psi.push(std::f64::consts::SQRT_2 * xi * psi[0]);
    }
    for m in 1..order {
        let mf = m as f64;
        let next = (2.0 / (mf + 1.0)).sqrt() * xi * psi[m] - (mf / (mf + 1.0)).sqrt() * psi[m - 1];
        psi.push(next);
    }
    psi
}

/// Seeded random superposition of Hermite-Gauss modes `HG_nm` with
/// `n + m < mode_count`, complex-normal coefficients, unit power.
///
/// This is a surrogate for the output of a multimode fibre, not a model of
/// fibre propagation.
pub fn make_speckle(
    mode_count: usize,
    seed: u64,
    grid_n: usize,
    extent: f64,
    wavelength: f64,
) -> Result<ScalarField> {
    let spec = GridSpec::new(grid_n, extent, wavelength)?;
    if mode_count == 0 {
        return Err(Error::param("mode_count", 0.0, "must be at least 1"));
    }
    let order = mode_count - 1;
    let w0 = speckle_waist(mode_count, extent);
    let lobe = PI * w0 / (std::f64::consts::SQRT_2 * ((2 * order + 1) as f64).sqrt());
    if lobe < 3.0 * spec.pitch() {
        return Err(Error::GridResolution(format!(
            "highest-order lobe {lobe:e} m spans fewer than 3 cells of {:e} m; \
             use at least {} samples",
            spec.pitch(),
            (3.0 * extent / lobe).ceil() as usize
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeff = vec![Complex64::new(0.0, 0.0); mode_count * mode_count];
    for n in 0..mode_count {
        for m in 0..mode_count - n {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            coeff[n * mode_count + m] = Complex64::new(re, im);
        }
    }

    // Separable evaluation: E(y, x) = Σ_n ψ_n(y) Σ_m c_nm ψ_m(x).
    let coords = spec.coords();
    let scale = std::f64::consts::SQRT_2 / w0;
    let table: Vec<Vec<f64>> = coords.iter().map(|&x| hermite_functions(order, scale * x)).collect();
    let mut partial = vec![Complex64::new(0.0, 0.0); mode_count * grid_n];
    for n in 0..mode_count {
        for (j, psi_x) in table.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..mode_count - n {
                acc += coeff[n * mode_count + m] * psi_x[m];
            }
            partial[n * grid_n + j] = acc;
        }
    }
    let mut data = vec![Complex64::new(0.0, 0.0); grid_n * grid_n];
    for (i, psi_y) in table.iter().enumerate() {
        let row = &mut data[i * grid_n..(i + 1) * grid_n];
        for n in 0..mode_count {
            let w = psi_y[n];
            for (dst, src) in row.iter_mut().zip(&partial[n * grid_n..(n + 1) * grid_n]) {
                *dst += src * w;
            }
        }
    }
    let mut field = ScalarField::from_samples(spec, data)?;
    field.normalize()?;
    Ok(field)
}

/// Translate by `dx` along `x` (Fourier shift theorem) and apply the tilt
/// phase `exp(i 2π sin(alpha) x / λ)`.
pub fn shift_and_tilt(field: &ScalarField, dx: f64, alpha: f64) -> Result<ScalarField> {
    if !dx.is_finite() || dx.abs() >= field.extent / 4.0 {
        return Err(Error::ShiftTooLarge {
            dx,
            extent: field.extent,
        });
    }
    if !alpha.is_finite() || alpha.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::AngleDomain { alpha });
    }
    let mut out = if dx == 0.0 {
        field.clone()
    } else {
        field.map_spectrum(|fx, _| Complex64::from_polar(1.0, -2.0 * PI * fx * dx))
    };
    if alpha != 0.0 {
        let k = 2.0 * PI * alpha.sin() / field.wavelength;
        let ramp: Vec<Complex64> = field
            .spec()
            .coords()
            .iter()
            .map(|x| Complex64::from_polar(1.0, k * x))
            .collect();
        for row in out.data.chunks_mut(field.n) {
            row.iter_mut().zip(&ramp).for_each(|(z, r)| *z *= r);
        }
    }
    Ok(out)
}

/// Largest distance the angular-spectrum transfer function samples without
/// aliasing on this grid, `N dx² / λ`.
pub fn critical_distance(spec: &GridSpec) -> f64 {
    spec.n as f64 * spec.pitch() * spec.pitch() / spec.wavelength
}

/// Angular-spectrum propagation over `distance` (negative values propagate
/// backwards). Evanescent components are dropped.
pub fn propagate(field: &ScalarField, distance: f64) -> Result<ScalarField> {
    if !distance.is_finite() {
        return Err(Error::param("distance", distance, "must be finite"));
    }
    if distance == 0.0 {
        return Ok(field.clone());
    }
    let spec = field.spec();
    let critical = critical_distance(&spec);
    if distance.abs() > critical {
        let dx = spec.pitch();
        let needed = (distance.abs() * spec.wavelength / (dx * dx)).ceil() as usize;
        return Err(Error::Aliasing {
            distance,
            critical,
            required_n: needed.next_power_of_two(),
        });
    }
    let inv_l = 1.0 / spec.wavelength;
    // exp(i 2π z / λ) reduced modulo 2π before multiplying, then the
    // remaining phase 2π z (kz - 1/λ) in a cancellation-free form.
    let carrier = 2.0 * PI * (distance / spec.wavelength).fract();
    Ok(field.map_spectrum(|fx, fy| {
        let f2 = fx * fx + fy * fy;
        if f2 >= inv_l * inv_l {
            return Complex64::new(0.0, 0.0);
        }
        let kz_minus = -f2 / (inv_l + (inv_l * inv_l - f2).sqrt());
        Complex64::from_polar(1.0, carrier + 2.0 * PI * distance * kz_minus)
    }))
}

/// Intensity standard deviation of a Gaussian after free propagation over
/// `z`, from the Rayleigh range of its waist.
pub fn gaussian_std_after(sigma: f64, wavelength: f64, z: f64) -> f64 {
    let w0 = 2.0 * sigma;
    let zr = PI * w0 * w0 / wavelength;
    sigma * (1.0 + (z / zr).powi(2)).sqrt()
}

/// Beam matching the visibility law of `geom` on `spec`.
pub fn analyzer_beam(geom: &InterferometerGeometry, spec: &GridSpec) -> Result<ScalarField> {
    make_gaussian(intensity_std_from_waist(geom.sigma), spec.n, spec.extent, spec.wavelength)
}

/// Arm fields `(short, long)` at angle `alpha`.
pub fn arm_fields(
    field: &ScalarField,
    geom: &InterferometerGeometry,
    alpha: f64,
    relay: bool,
) -> Result<(ScalarField, ScalarField)> {
    geom.validate()?;
    let short = shift_and_tilt(field, 0.0, alpha)?;
    let long = if relay {
        // The relay images the input plane onto itself (ray matrix +I).
        short.clone()
    } else {
        let delta = geom.lateral_offset(alpha)?;
        shift_and_tilt(&propagate(field, geom.delta_l0)?, delta, alpha)?
    };
    Ok((short, long))
}

/// Fringe visibility `V0 |<E_s|E_l>| / (½(‖E_s‖² + ‖E_l‖²))`.
pub fn interfere(field: &ScalarField, geom: &InterferometerGeometry, alpha: f64, relay: bool) -> Result<f64> {
    let (short, long) = arm_fields(field, geom, alpha, relay)?;
    fringe_visibility(&short, &long, geom.v0)
}

pub fn fringe_visibility(short: &ScalarField, long: &ScalarField, v0: f64) -> Result<f64> {
    let ip = short.inner(long)?;
    let den = 0.5 * (short.power() + long.power());
    if den <= 0.0 {
        return Err(Error::ZeroDenominator("fringe visibility (zero power)"));
    }
    Ok(v0 * ip.norm() / den)
}
