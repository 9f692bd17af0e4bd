//! Hošek-Wilkie skylight and solar radiance.
//!
//! Skylight per band is
//!
//! ```text
//! (1 + A·exp(B / (cos θ + 0.01))) ·
//!     (C + D·exp(E·γ) + F·cos²γ + G·χ(H, γ) + I·sqrt(cos θ)) · L_M
//! χ(H, γ) = (1 + cos²γ) / (1 + H² − 2H·cos γ)^1.5
//! ```
//!
//! where `θ` is the view zenith angle, `γ` the angle to the sun, and the nine
//! coefficients and the radiance scale `L_M` are quintic Bézier blends over
//! `(sun elevation / 90°)^(1/3)`, interpolated linearly in turbidity and
//! ground albedo. Values at arbitrary wavelengths interpolate linearly
//! between the 40 nm bands.

use std::f64::consts::FRAC_PI_2;

use super::spectral::{spectral_to_rgb, SpectralConfig};
use super::tables::{
    HwTables, ALBEDOS, BANDS, CONTROL_POINTS, LIMB_COEFS, SKY_PARAMS, SOLAR_COEFS,
    SOLAR_SEGMENTS, TURBIDITIES,
};
use super::SkyParams;
use crate::geometry::angle_between;
use crate::{Error, Result, Vec3};

/// Directions within this angle of the sun are rendered with the sun model.
pub const SUN_DISK_RADIUS_DEG: f64 = 0.25;

/// Angular radius of the solar disk used for limb darkening (the solar
/// polynomials are fitted for a 0.51° disk).
const SOLAR_RADIUS: f64 = 0.51 * 0.5 * std::f64::consts::PI / 180.0;

/// Per-direction quantities shared by all bands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewGeometry {
    /// Elevation of the view direction above the horizon, radians.
    pub elevation: f64,
    pub inv_cos: f64,
    pub sqrt_cos: f64,
    /// Angle to the sun, radians.
    pub gamma: f64,
    pub cos_gamma: f64,
    pub in_sun_disk: bool,
}

impl ViewGeometry {
    /// `dir` and `sun_dir` are unit vectors; directions below the horizon are
    /// treated as lying on it.
    pub fn new(dir: &Vec3, sun_dir: &Vec3) -> Self {
        let cos_theta = dir.y.clamp(0.0, 1.0);
        let gamma = angle_between(dir, sun_dir);
        Self {
            elevation: FRAC_PI_2 - cos_theta.acos(),
            inv_cos: 1.0 / (cos_theta + 0.01),
            sqrt_cos: cos_theta.sqrt(),
            gamma,
            cos_gamma: gamma.cos(),
            in_sun_disk: gamma <= SUN_DISK_RADIUS_DEG.to_radians(),
        }
    }
}

/// Locate a wavelength between two tabulated bands: `(lower band, fraction)`.
pub fn band_position(tables: &HwTables, wavelength: f64) -> Result<(usize, f64)> {
    let (lo, hi) = (tables.min_wavelength(), tables.max_wavelength());
    if !(lo..=hi).contains(&wavelength) {
        return Err(Error::Domain(format!(
            "wavelength {wavelength} nm outside model coverage [{lo}, {hi}]"
        )));
    }
    let x = (wavelength - lo) / 40.0;
    let b = (x.floor() as usize).min(BANDS - 2);
    Ok((b, x - b as f64))
}

fn quintic(e: f64, c: impl Fn(usize) -> f64) -> f64 {
    let ie = 1.0 - e;
    let (e2, ie2) = (e * e, ie * ie);
    ie2 * ie2 * ie * c(0)
        + 5.0 * ie2 * ie2 * e * c(1)
        + 10.0 * ie2 * ie * e2 * c(2)
        + 10.0 * ie2 * e2 * e * c(3)
        + 5.0 * ie * e2 * e2 * c(4)
        + e2 * e2 * e * c(5)
}

/// Model state for one turbidity, ground albedo and sun elevation.
#[derive(Debug, Clone)]
pub struct SkyState<'a> {
    tables: &'a HwTables,
    turbidity: f64,
    configs: [[f64; SKY_PARAMS]; BANDS],
    radiances: [f64; BANDS],
}

impl<'a> SkyState<'a> {
    pub fn new(
        tables: &'a HwTables,
        turbidity: f64,
        albedo: f64,
        sun_elevation: f64,
    ) -> Result<Self> {
        if !(1.0..=TURBIDITIES as f64).contains(&turbidity) {
            return Err(Error::Domain(format!("turbidity {turbidity} outside [1, 10]")));
        }
        if !(0.0..=1.0).contains(&albedo) {
            return Err(Error::Domain(format!("albedo {albedo} outside [0, 1]")));
        }
        if !(-1e-9..=FRAC_PI_2 + 1e-9).contains(&sun_elevation) {
            return Err(Error::Domain(format!(
                "sun elevation {sun_elevation} rad outside [0, π/2]"
            )));
        }
        let e = (sun_elevation.clamp(0.0, FRAC_PI_2) / FRAC_PI_2).cbrt();

        let lo = turbidity.floor() as usize;
        let rem = turbidity - lo as f64;
        let mut levels = vec![(lo - 1, 1.0 - rem)];
        if rem > 0.0 {
            levels.push((lo, rem));
        }

        let mut configs = [[0.0; SKY_PARAMS]; BANDS];
        let mut radiances = [0.0; BANDS];
        for band in 0..BANDS {
            for &(ti, wt) in &levels {
                for (ai, wa) in [(0, 1.0 - albedo), (1, albedo)] {
                    debug_assert!(ai < ALBEDOS);
                    let w = wt * wa;
                    if w == 0.0 {
                        continue;
                    }
                    let block = tables.sky_param_block(band, ai, ti);
                    for (i, c) in configs[band].iter_mut().enumerate() {
                        *c += w * quintic(e, |k| block[k * SKY_PARAMS + i]);
                    }
                    let rad = tables.sky_radiance_block(band, ai, ti);
                    debug_assert_eq!(rad.len(), CONTROL_POINTS);
                    radiances[band] += w * quintic(e, |k| rad[k]);
                }
            }
        }
        Ok(Self {
            tables,
            turbidity,
            configs,
            radiances,
        })
    }

    pub fn turbidity(&self) -> f64 {
        self.turbidity
    }

    /// Skylight in one band before the `L_M` scale, given the band's
    /// `exp(B / (cos θ + 0.01))`.
    #[inline]
    fn band_shape(&self, band: usize, g: &ViewGeometry, zenith_term: f64) -> f64 {
        let p = &self.configs[band];
        let ray_m = g.cos_gamma * g.cos_gamma;
        let denom = 1.0 + p[8] * p[8] - 2.0 * p[8] * g.cos_gamma;
        let mie_m = (1.0 + ray_m) / (denom * denom.sqrt());
        let exp_m = (p[4] * g.gamma).exp();
        (1.0 + p[0] * zenith_term)
            * (p[2] + p[3] * exp_m + p[5] * ray_m + p[6] * mie_m + p[7] * g.sqrt_cos)
    }

    #[inline]
    fn zenith_term(&self, band: usize, inv_cos: f64) -> f64 {
        (self.configs[band][1] * inv_cos).exp()
    }

    /// Skylight radiance in band `band`.
    pub fn band_sky(&self, band: usize, g: &ViewGeometry) -> f64 {
        self.band_shape(band, g, self.zenith_term(band, g.inv_cos)) * self.radiances[band]
    }

    /// Skylight spectral radiance at an arbitrary wavelength.
    pub fn sky_radiance(&self, g: &ViewGeometry, wavelength: f64) -> Result<f64> {
        let (b, f) = band_position(self.tables, wavelength)?;
        Ok(self.sky_at(g, b, f))
    }

    fn sky_at(&self, g: &ViewGeometry, b: usize, f: f64) -> f64 {
        let lo = if f < 1.0 { self.band_sky(b, g) } else { 0.0 };
        let hi = if f > 0.0 { self.band_sky(b + 1, g) } else { 0.0 };
        (1.0 - f) * lo + f * hi
    }

    fn solar_band(&self, band: usize, turb: usize, elevation: f64) -> f64 {
        let n = SOLAR_SEGMENTS as f64;
        let pos = (((2.0 * elevation / std::f64::consts::PI).cbrt() * n) as usize)
            .min(SOLAR_SEGMENTS - 1);
        let break_x = (pos as f64 / n).powi(3) * FRAC_PI_2;
        let x = elevation - break_x;
        let c = self.tables.solar_segment(band, turb, pos);
        debug_assert_eq!(c.len(), SOLAR_COEFS);
        let mut acc = 0.0;
        for k in (0..SOLAR_COEFS).rev() {
            acc = acc * x + c[k];
        }
        acc
    }

    /// Direct solar radiance with limb darkening, excluding skylight.
    fn solar_at(&self, g: &ViewGeometry, b: usize, f: f64) -> f64 {
        let lo = self.turbidity.floor() as usize - 1;
        let (tl, ft) = if lo == TURBIDITIES - 1 {
            (lo - 1, 1.0)
        } else {
            (lo, self.turbidity - (lo + 1) as f64)
        };
        let elev = g.elevation.max(0.0);
        let band_mix = |t: usize| {
            (1.0 - f) * self.solar_band(b, t, elev) + f * self.solar_band(b + 1, t, elev)
        };
        let direct = (1.0 - ft) * band_mix(tl) + ft * band_mix(tl + 1);

        let (ld_lo, ld_hi) = (self.tables.limb_darkening(b), self.tables.limb_darkening(b + 1));
        let s = g.gamma.sin() / SOLAR_RADIUS.sin();
        let cos_psi = (1.0 - s * s).max(0.0).sqrt();
        let mut darkening = 0.0;
        let mut pow = 1.0;
        for j in 0..LIMB_COEFS {
            darkening += ((1.0 - f) * ld_lo[j] + f * ld_hi[j]) * pow;
            pow *= cos_psi;
        }
        (direct * darkening).max(0.0)
    }

    /// Solar disk radiance (direct plus skylight) at an arbitrary wavelength.
    pub fn sun_radiance(&self, g: &ViewGeometry, wavelength: f64) -> Result<f64> {
        let (b, f) = band_position(self.tables, wavelength)?;
        Ok(self.solar_at(g, b, f) + self.sky_at(g, b, f))
    }
}

fn check_above_horizon(dir: &Vec3) -> Result<Vec3> {
    let d = dir.normalize();
    if !(d.y >= 0.0) {
        return Err(Error::Domain(format!("direction below the horizon: {dir:?}")));
    }
    Ok(d)
}

fn sun_elevation(sun_dir: &Vec3) -> Result<f64> {
    let s = check_above_horizon(sun_dir)?;
    Ok(FRAC_PI_2 - s.y.clamp(0.0, 1.0).acos())
}

/// Skylight spectral radiance for view `dir`.
pub fn sky_radiance_spectral(
    dir: &Vec3,
    wavelength: f64,
    turbidity: f64,
    sun_dir: &Vec3,
    albedo: f64,
) -> Result<f64> {
    let d = check_above_horizon(dir)?;
    let state = SkyState::new(HwTables::builtin(), turbidity, albedo, sun_elevation(sun_dir)?)?;
    state.sky_radiance(&ViewGeometry::new(&d, &sun_dir.normalize()), wavelength)
}

/// Solar disk spectral radiance for a view `dir` within 0.25° of the sun.
pub fn sun_radiance_spectral(
    dir: &Vec3,
    wavelength: f64,
    turbidity: f64,
    sun_dir: &Vec3,
) -> Result<f64> {
    let d = check_above_horizon(dir)?;
    let s = sun_dir.normalize();
    let g = ViewGeometry::new(&d, &s);
    if !g.in_sun_disk {
        return Err(Error::Domain(format!(
            "direction is {:.4}° from the sun, outside the {SUN_DISK_RADIUS_DEG}° disk",
            g.gamma.to_degrees()
        )));
    }
    let state = SkyState::new(
        HwTables::builtin(),
        turbidity,
        super::GROUND_ALBEDO,
        sun_elevation(sun_dir)?,
    )?;
    state.sun_radiance(&g, wavelength)
}

/// RGB evaluator for one sky state and spectral configuration.
///
/// Skylight is linear in the per-band radiances, so the spectral
/// integration folds into one RGB weight per band. The solar disk is
/// evaluated spectrally sample by sample.
#[derive(Debug, Clone)]
pub struct SkyRgbModel<'a> {
    state: SkyState<'a>,
    sun_dir: Vec3,
    cfg: &'a SpectralConfig,
    positions: Vec<(usize, f64)>,
    band_rgb: [[f64; 3]; BANDS],
    active: Vec<usize>,
}

impl<'a> SkyRgbModel<'a> {
    pub fn new(
        tables: &'a HwTables,
        cfg: &'a SpectralConfig,
        turbidity: f64,
        albedo: f64,
        sun_dir: &Vec3,
    ) -> Result<Self> {
        let elev = sun_elevation(sun_dir)?;
        let state = SkyState::new(tables, turbidity, albedo, elev)?;
        let positions = cfg
            .wavelengths()
            .iter()
            .map(|&w| band_position(tables, w))
            .collect::<Result<Vec<_>>>()?;

        let mut band_rgb = [[0.0; 3]; BANDS];
        for (&(b, f), w) in positions.iter().zip(cfg.sample_rgb_weights()) {
            for c in 0..3 {
                band_rgb[b][c] += (1.0 - f) * w[c];
                band_rgb[b + 1][c] += f * w[c];
            }
        }
        let mut active = Vec::new();
        for (b, k) in band_rgb.iter_mut().enumerate() {
            if k.iter().any(|&v| v != 0.0) {
                active.push(b);
            }
            for v in k.iter_mut() {
                *v *= state.radiances[b];
            }
        }
        Ok(Self {
            state,
            sun_dir: sun_dir.normalize(),
            cfg,
            positions,
            band_rgb,
            active,
        })
    }

    /// Builtin tables and the fixed ground albedo.
    pub fn for_params(params: &SkyParams, cfg: &'a SpectralConfig) -> Result<Self> {
        Self::new(
            HwTables::builtin(),
            cfg,
            params.turbidity(),
            params.ground_albedo(),
            &params.sun_dir(),
        )
    }

    pub fn sun_dir(&self) -> &Vec3 {
        &self.sun_dir
    }

    pub fn geometry(&self, dir: &Vec3) -> ViewGeometry {
        ViewGeometry::new(dir, &self.sun_dir)
    }

    /// Skylight RGB (unit exposure), ignoring the solar disk.
    #[inline]
    pub fn sky_rgb(&self, g: &ViewGeometry) -> [f64; 3] {
        let mut rgb = [0.0; 3];
        for &b in &self.active {
            let zt = self.state.zenith_term(b, g.inv_cos);
            let f = self.state.band_shape(b, g, zt);
            let k = &self.band_rgb[b];
            rgb[0] += f * k[0];
            rgb[1] += f * k[1];
            rgb[2] += f * k[2];
        }
        rgb
    }

    /// Solar disk RGB (direct plus skylight, unit exposure).
    pub fn sun_rgb(&self, g: &ViewGeometry) -> [f64; 3] {
        let samples: Vec<f64> = self
            .positions
            .iter()
            .map(|&(b, f)| self.state.solar_at(g, b, f) + self.state.sky_at(g, b, f))
            .collect();
        spectral_to_rgb(&samples, self.cfg).expect("one sample per configured wavelength")
    }

    /// Sun model inside the disk, skylight elsewhere (unit exposure).
    #[inline]
    pub fn rgb(&self, g: &ViewGeometry) -> [f64; 3] {
        if g.in_sun_disk {
            self.sun_rgb(g)
        } else {
            self.sky_rgb(g)
        }
    }

    /// Evaluate many directions at once, in order, writing unit-exposure RGB.
    /// Row-major pixel order lets the zenith factor be shared along rows.
    pub fn rgb_batch(&self, geoms: &[ViewGeometry], out: &mut [[f64; 3]]) {
        assert_eq!(geoms.len(), out.len());
        let mut last_inv_cos = f64::NAN;
        let mut zenith = [0.0; BANDS];
        for (g, o) in geoms.iter().zip(out.iter_mut()) {
            if g.in_sun_disk {
                *o = self.sun_rgb(g);
                continue;
            }
            if g.inv_cos != last_inv_cos {
                last_inv_cos = g.inv_cos;
                for &b in &self.active {
                    zenith[b] = self.state.zenith_term(b, g.inv_cos);
                }
            }
            let mut rgb = [0.0; 3];
            for &b in &self.active {
                let f = self.state.band_shape(b, g, zenith[b]);
                let k = &self.band_rgb[b];
                rgb[0] += f * k[0];
                rgb[1] += f * k[1];
                rgb[2] += f * k[2];
            }
            *o = rgb;
        }
    }
}

/// `ω · f_RGB(dir)`: sun model inside the solar disk, skylight elsewhere.
pub fn sky_color_rgb(dir: &Vec3, p: &SkyParams, cfg: &SpectralConfig) -> Result<[f64; 3]> {
    let d = check_above_horizon(dir)?;
    let model = SkyRgbModel::for_params(p, cfg)?;
    let rgb = model.rgb(&model.geometry(&d));
    let w = p.exposure();
    Ok([w * rgb[0], w * rgb[1], w * rgb[2]])
}
