//! Recover sky parameters from an LDR panorama.
//!
//! The fit runs in two steps. The sun direction is found first, as the
//! centroid of the largest bright region of the sky, and then held fixed.
//! Turbidity is then fitted by bounded least squares from several starting
//! values. Exposure never enters the solver: for any turbidity it has a
//! closed form, which is applied inside every cost evaluation.
//!
//! Pixels are linearized with a gamma curve, `P_lin = P^γ`, both in the
//! residuals and in the exposure solve. Clipped pixels (any channel at the
//! top of the range) and pixels that fall inside the modelled solar disk
//! carry no usable radiance and are left out of the residuals and the
//! exposure solve.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::geometry::{pixel_solid_angle, pixel_to_direction, Panorama};
use crate::image::Mask;
use crate::lsq::{lsq_minimize, Bounds, LsqOptions};
use crate::sky::{
    HwTables, SkyParams, SkyRgbModel, SpectralConfig, ViewGeometry, GROUND_ALBEDO,
    MAX_TURBIDITY, MIN_TURBIDITY,
};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub gamma: f64,
    /// Percentile of masked sky luminance above which pixels count as sun.
    pub sun_percentile: f64,
    pub t_inits: Vec<f64>,
    pub max_iters: usize,
    pub cost_tol: f64,
    pub step_tol: f64,
    /// Pixels with any channel at or above this value are treated as clipped.
    pub saturation: f64,
    pub spectral: SpectralConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            gamma: 2.2,
            sun_percentile: 98.0,
            t_inits: (1..=10).map(f64::from).collect(),
            max_iters: 200,
            cost_tol: 1e-12,
            step_tol: 1e-10,
            saturation: 0.999,
            spectral: SpectralConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Contract(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.sun_percentile > 0.0 && self.sun_percentile < 100.0) {
            return Err(Error::Contract(format!(
                "sun percentile must lie in (0, 100), got {}",
                self.sun_percentile
            )));
        }
        if self.t_inits.is_empty()
            || self
                .t_inits
                .iter()
                .any(|t| !(MIN_TURBIDITY..=MAX_TURBIDITY).contains(t))
        {
            return Err(Error::Contract("turbidity starts must lie in [1, 10]".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Contract("max_iters must be positive".into()));
        }
        Ok(())
    }

    fn lsq_options(&self) -> LsqOptions {
        LsqOptions {
            max_iters: self.max_iters,
            cost_tol: self.cost_tol,
            step_tol: self.step_tol,
            ..LsqOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartResult {
    pub t_init: f64,
    pub t_final: f64,
    pub omega_final: f64,
    pub cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SunDetection {
    pub threshold_percentile: f64,
    pub threshold: f64,
    pub component_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: SkyParams,
    pub residual_rmse: f64,
    pub per_start: Vec<StartResult>,
    pub sun_detection: SunDetection,
    /// Number of pixels that entered the residuals.
    pub pixels_used: usize,
    pub converged: bool,
}

/// JSON form written by the `fit` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResultJson {
    pub sun_elevation_deg: f64,
    pub sun_azimuth_deg: f64,
    pub turbidity: f64,
    pub exposure: f64,
    pub ground_albedo: f64,
    pub residual_rmse: f64,
    pub converged: bool,
    pub pixels_used: usize,
    pub sun_detection: SunDetection,
    pub per_start: Vec<StartResult>,
}

impl FitResult {
    pub fn to_json(&self) -> FitResultJson {
        let p = self.params.to_json();
        FitResultJson {
            sun_elevation_deg: p.sun_elevation_deg,
            sun_azimuth_deg: p.sun_azimuth_deg,
            turbidity: p.turbidity,
            exposure: p.exposure,
            ground_albedo: p.ground_albedo,
            residual_rmse: self.residual_rmse,
            converged: self.converged,
            pixels_used: self.pixels_used,
            sun_detection: self.sun_detection,
            per_start: self.per_start.clone(),
        }
    }
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty set");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn rec709_luminance(rgb: [f64; 3]) -> f64 {
    0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2]
}

fn linearize(rgb: [f64; 3], gamma: f64) -> [f64; 3] {
    rgb.map(|c| c.max(0.0).powf(gamma))
}

/// Mask pixels whose center lies on or above the horizon.
fn upper_hemisphere(mask: &Mask) -> Mask {
    let (w, h) = (mask.width(), mask.height());
    Mask::from_fn(w, h, |x, y| {
        mask.get(x, y) && pixel_to_direction(x as f64, y as f64, w, h).y >= 0.0
    })
}

fn check_mask(pano: &Panorama, mask: &Mask) -> Result<()> {
    if mask.width() != pano.width() || mask.height() != pano.height() {
        return Err(Error::Contract(format!(
            "mask is {}x{} but panorama is {}x{}",
            mask.width(),
            mask.height(),
            pano.width(),
            pano.height()
        )));
    }
    Ok(())
}

/// Heuristic sky mask: upper half, blue-dominant chromaticity, luminance
/// above the 30th percentile of the upper half.
pub fn fallback_sky_mask(pano: &Panorama) -> Mask {
    let img = pano.image();
    let (w, h) = (img.width(), img.height());
    let top = h / 2;
    let lum: Vec<f64> = (0..top)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| rec709_luminance(img.get(x, y)))
        .collect();
    if lum.is_empty() {
        return Mask::new(w, h, false);
    }
    let thr = percentile(&lum, 30.0);
    Mask::from_fn(w, h, |x, y| {
        if y >= top {
            return false;
        }
        let [r, g, b] = img.get(x, y);
        let sum = r + g + b;
        sum > 0.0 && b / sum >= 1.0 / 3.0 && b >= r && rec709_luminance([r, g, b]) > thr
    })
}

/// The panorama's own mask if it has one, the heuristic otherwise.
pub fn sky_mask_for(pano: &Panorama) -> Mask {
    pano.sky_mask()
        .cloned()
        .unwrap_or_else(|| fallback_sky_mask(pano))
}

/// Sun direction as the solid-angle-weighted centroid of the largest
/// 4-connected region of masked sky (above the horizon) at or above the
/// luminance percentile.
pub fn detect_sun_position(pano: &Panorama, mask: &Mask, cfg: &FitConfig) -> Result<Vec3> {
    check_mask(pano, mask)?;
    detect_sun(pano, &upper_hemisphere(mask), cfg).map(|(d, _)| d)
}

fn detect_sun(pano: &Panorama, mask: &Mask, cfg: &FitConfig) -> Result<(Vec3, SunDetection)> {
    check_mask(pano, mask)?;
    let (w, h) = (pano.width(), pano.height());
    let img = pano.image();
    let lum: Vec<f64> = (0..w * h)
        .map(|i| rec709_luminance(linearize(img.get(i % w, i / w), cfg.gamma)))
        .collect();
    let sky: Vec<f64> = mask.indices().map(|i| lum[i]).collect();
    if sky.is_empty() {
        return Err(Error::NoSkyPixels);
    }
    let threshold = percentile(&sky, cfg.sun_percentile);
    let bright: Vec<bool> = (0..w * h)
        .map(|i| mask.data()[i] && lum[i] >= threshold)
        .collect();

    // Largest 4-connected component, wrapping around in azimuth.
    let mut label = vec![usize::MAX; w * h];
    let mut best: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !bright[start] || label[start] != usize::MAX {
            continue;
        }
        let mut comp = vec![start];
        label[start] = start;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            let mut neighbors = [None; 4];
            neighbors[0] = Some(y * w + (x + w - 1) % w);
            neighbors[1] = Some(y * w + (x + 1) % w);
            if y > 0 {
                neighbors[2] = Some(i - w);
            }
            if y + 1 < h {
                neighbors[3] = Some(i + w);
            }
            for j in neighbors.into_iter().flatten() {
                if bright[j] && label[j] == usize::MAX {
                    label[j] = start;
                    comp.push(j);
                    queue.push_back(j);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }

    let mut sum = Vec3::zeros();
    for &i in &best {
        let (x, y) = (i % w, i / w);
        let d = pixel_to_direction(x as f64, y as f64, w, h);
        sum += d * pixel_solid_angle(y, w, h);
    }
    let mut dir = sum;
    if dir.y < 0.0 {
        dir.y = 0.0;
    }
    let n = dir.norm();
    if !(n > 0.0) {
        return Err(Error::Degenerate("sun region has no well-defined centroid".into()));
    }
    dir /= n;
    Ok((
        dir,
        SunDetection {
            threshold_percentile: cfg.sun_percentile,
            threshold,
            component_size: best.len(),
        },
    ))
}

/// Pixels that enter the residuals, with their geometry and linear targets.
struct FitProblem<'a> {
    sun_dir: Vec3,
    geoms: Vec<ViewGeometry>,
    targets: Vec<[f64; 3]>,
    spectral: &'a SpectralConfig,
}

impl<'a> FitProblem<'a> {
    fn new(pano: &Panorama, mask: &Mask, sun_dir: &Vec3, cfg: &'a FitConfig) -> Result<Self> {
        let (w, h) = (pano.width(), pano.height());
        let mut geoms = Vec::new();
        let mut targets = Vec::new();
        for i in mask.indices() {
            let (x, y) = (i % w, i / w);
            let px = pano.image().get(x, y);
            if px.iter().any(|&c| c >= cfg.saturation) {
                continue;
            }
            let g = ViewGeometry::new(&pixel_to_direction(x as f64, y as f64, w, h), sun_dir);
            if g.in_sun_disk {
                continue;
            }
            geoms.push(g);
            targets.push(linearize(px, cfg.gamma));
        }
        if geoms.is_empty() {
            return Err(Error::NoSkyPixels);
        }
        Ok(Self {
            sun_dir: *sun_dir,
            geoms,
            targets,
            spectral: &cfg.spectral,
        })
    }

    fn model(&self, t: f64) -> Result<Vec<[f64; 3]>> {
        let m = SkyRgbModel::new(HwTables::builtin(), self.spectral, t, GROUND_ALBEDO, &self.sun_dir)?;
        let mut out = vec![[0.0; 3]; self.geoms.len()];
        m.rgb_batch(&self.geoms, &mut out);
        Ok(out)
    }

    fn exposure(&self, f: &[[f64; 3]]) -> Result<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for (p, m) in self.targets.iter().zip(f) {
            for c in 0..3 {
                num += p[c] * m[c];
                den += m[c] * m[c];
            }
        }
        if !(den > 0.0) || !den.is_finite() {
            return Err(Error::Degenerate("model radiance is zero over the sky mask".into()));
        }
        Ok((num / den).max(0.0))
    }

    fn residuals(&self, f: &[[f64; 3]], omega: f64) -> Vec<f64> {
        let mut r = Vec::with_capacity(3 * f.len());
        for (p, m) in self.targets.iter().zip(f) {
            for c in 0..3 {
                r.push(p[c] - omega * m[c]);
            }
        }
        r
    }

    /// Residuals with exposure eliminated, and that exposure.
    fn profile(&self, t: f64) -> Result<(Vec<f64>, f64)> {
        let f = self.model(t)?;
        let omega = self.exposure(&f)?;
        Ok((self.residuals(&f, omega), omega))
    }
}

/// Closed-form least-squares exposure for fixed turbidity and sun direction.
pub fn solve_exposure(
    pano: &Panorama,
    mask: &Mask,
    turbidity: f64,
    sun_dir: &Vec3,
    cfg: &FitConfig,
) -> Result<f64> {
    check_mask(pano, mask)?;
    let problem = FitProblem::new(pano, &upper_hemisphere(mask), sun_dir, cfg)?;
    let f = problem.model(turbidity)?;
    if problem.targets.iter().all(|p| p.iter().all(|&c| c == 0.0)) {
        return Ok(0.0);
    }
    problem.exposure(&f)
}

/// Per-pixel, per-channel residuals `P^γ − ω·f_RGB`, row-major then by
/// channel, over the pixels the fit uses.
pub fn residuals(p: &SkyParams, pano: &Panorama, mask: &Mask, cfg: &FitConfig) -> Result<Vec<f64>> {
    check_mask(pano, mask)?;
    let problem = FitProblem::new(pano, &upper_hemisphere(mask), &p.sun_dir(), cfg)?;
    let f = problem.model(p.turbidity())?;
    Ok(problem.residuals(&f, p.exposure()))
}

/// Sum of squared residuals for given parameters.
pub fn cost(p: &SkyParams, pano: &Panorama, mask: &Mask, cfg: &FitConfig) -> Result<f64> {
    Ok(residuals(p, pano, mask, cfg)?.iter().map(|r| r * r).sum())
}

/// Fit sun direction, turbidity and exposure to a panorama.
pub fn fit_sky_params(pano: &Panorama, mask: &Mask, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    check_mask(pano, mask)?;
    let sky = upper_hemisphere(mask);
    if sky.is_empty() {
        return Err(Error::NoSkyPixels);
    }
    let (sun_dir, detection) = detect_sun(pano, &sky, cfg)?;
    fit_turbidity(pano, &sky, &sun_dir, detection, cfg)
}

/// Fit turbidity and exposure with the sun direction held at `sun_dir`.
pub fn fit_with_sun(pano: &Panorama, mask: &Mask, sun_dir: &Vec3, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    check_mask(pano, mask)?;
    let sky = upper_hemisphere(mask);
    if sky.is_empty() {
        return Err(Error::NoSkyPixels);
    }
    let detection = SunDetection {
        threshold_percentile: cfg.sun_percentile,
        threshold: f64::NAN,
        component_size: 0,
    };
    fit_turbidity(pano, &sky, &sun_dir.normalize(), detection, cfg)
}

fn fit_turbidity(
    pano: &Panorama,
    sky: &Mask,
    sun_dir: &Vec3,
    detection: SunDetection,
    cfg: &FitConfig,
) -> Result<FitResult> {
    let problem = FitProblem::new(pano, sky, sun_dir, cfg)?;
    let bounds = Bounds::new(vec![MIN_TURBIDITY], vec![MAX_TURBIDITY])?;
    let opts = cfg.lsq_options();

    let mut per_start = Vec::with_capacity(cfg.t_inits.len());
    for &t_init in &cfg.t_inits {
        let objective = |x: &[f64]| match problem.profile(x[0]) {
            Ok((r, _)) => r,
            Err(_) => vec![f64::NAN; 3 * problem.geoms.len()],
        };
        let res = lsq_minimize(objective, &[t_init], &bounds, &opts)?;
        let t_final = res.x[0].clamp(MIN_TURBIDITY, MAX_TURBIDITY);
        let (_, omega_final) = problem.profile(t_final)?;
        per_start.push(StartResult {
            t_init,
            t_final,
            omega_final,
            cost: res.cost,
            initial_cost: res.initial_cost,
            iterations: res.iterations,
            converged: res.converged,
        });
        log::debug!(
            "start t={t_init}: t={t_final:.6} ω={omega_final:.6} cost={:.6e} iters={}",
            res.cost,
            res.iterations
        );
    }

    let best = per_start
        .iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .copied()
        .expect("at least one start");
    let params = SkyParams::new(*sun_dir, best.t_final, best.omega_final)?;
    let n = 3 * problem.geoms.len();
    Ok(FitResult {
        params,
        residual_rmse: (best.cost / n as f64).sqrt(),
        converged: per_start.iter().any(|s| s.converged),
        per_start,
        sun_detection: detection,
        pixels_used: problem.geoms.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::RgbImage;

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 100.0), 5.0);
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert!((percentile(&v, 90.0) - 4.6).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        let bad = FitConfig {
            gamma: 0.0,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FitConfig {
            sun_percentile: 100.0,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_mask_is_rejected() {
        let pano = Panorama::new(RgbImage::filled(32, 16, [0.5; 3]), None).unwrap();
        let mask = Mask::new(32, 16, false);
        let cfg = FitConfig::default();
        assert!(matches!(
            detect_sun_position(&pano, &mask, &cfg),
            Err(Error::NoSkyPixels)
        ));
        assert!(matches!(fit_sky_params(&pano, &mask, &cfg), Err(Error::NoSkyPixels)));
    }

    #[test]
    fn mask_below_horizon_only_is_empty_sky() {
        let pano = Panorama::new(RgbImage::filled(32, 16, [0.5; 3]), None).unwrap();
        let mask = Mask::from_fn(32, 16, |_, y| y >= 8);
        assert!(matches!(
            fit_sky_params(&pano, &mask, &FitConfig::default()),
            Err(Error::NoSkyPixels)
        ));
    }

    #[test]
    fn largest_blob_wins() {
        let (w, h) = (64, 32);
        let mut img = RgbImage::filled(w, h, [0.1; 3]);
        // small blob: 2x2 around (10, 5); large blob: 4x3 around (40, 8)
        for (x, y) in [(10, 5), (11, 5), (10, 6), (11, 6)] {
            img.set(x, y, [1.0; 3]);
        }
        let mut big = Vec::new();
        for y in 7..10 {
            for x in 39..43 {
                img.set(x, y, [1.0; 3]);
                big.push((x, y));
            }
        }
        let pano = Panorama::new(img, None).unwrap();
        let mask = Mask::from_fn(w, h, |_, y| y < h / 2);
        let cfg = FitConfig {
            sun_percentile: 99.0,
            ..FitConfig::default()
        };
        let (d, det) = detect_sun(&pano, &mask, &cfg).unwrap();
        assert_eq!(det.component_size, 12);
        let mut expect = Vec3::zeros();
        for (x, y) in big {
            expect += pixel_to_direction(x as f64, y as f64, w, h) * pixel_solid_angle(y, w, h);
        }
        assert!((d - expect.normalize()).norm() < 1e-12);
    }

    #[test]
    fn component_wraps_in_azimuth() {
        let (w, h) = (32, 16);
        let mut img = RgbImage::filled(w, h, [0.1; 3]);
        for y in 3..5 {
            img.set(0, y, [1.0; 3]);
            img.set(w - 1, y, [1.0; 3]);
        }
        img.set(10, 3, [1.0; 3]);
        let pano = Panorama::new(img, None).unwrap();
        let mask = Mask::from_fn(w, h, |_, y| y < h / 2);
        let cfg = FitConfig {
            sun_percentile: 99.0,
            ..FitConfig::default()
        };
        let (d, det) = detect_sun(&pano, &mask, &cfg).unwrap();
        assert_eq!(det.component_size, 4);
        // centroid straddles the seam, which looks down -z
        assert!(d.z < -0.5 && d.x.abs() < 1e-12);
    }

    #[test]
    fn black_sky_has_zero_exposure() {
        let pano = Panorama::new(RgbImage::new(32, 16), None).unwrap();
        let mask = Mask::from_fn(32, 16, |_, y| y < 8);
        let omega =
            solve_exposure(&pano, &mask, 3.0, &Vec3::new(0.0, 0.5, 1.0).normalize(), &FitConfig::default())
                .unwrap();
        assert_eq!(omega, 0.0);
    }

    #[test]
    fn fallback_mask_picks_blue_top_half() {
        let (w, h) = (16, 8);
        let mut img = RgbImage::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let k = 0.5 + 0.1 * y as f64;
                img.set(x, y, [0.2 * k, 0.3 * k, 0.8 * k]);
            }
        }
        img.set(0, 3, [0.9, 0.2, 0.1]);
        img.set(1, 0, [0.01, 0.01, 0.02]);
        let pano = Panorama::new(img, None).unwrap();
        let m = fallback_sky_mask(&pano);
        assert!(!m.get(0, 3), "red pixel");
        assert!(!m.get(1, 0), "dark pixel");
        assert!(!m.get(5, 5), "lower half");
        assert!(m.get(5, 3));
        assert!(!m.get(5, 0), "below the 30th percentile");
    }
}
