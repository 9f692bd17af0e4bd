//! Losses on sun-position distributions and lighting parameters, Lambertian
//! relighting, image error metrics and sun-error statistics.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fitting::percentile;
use crate::geometry::{angular_error, direction_angles, pixel_solid_angle, pixel_to_direction};
use crate::image::{Mask, RgbImage};
use crate::sky::EnvMap;
use crate::{Error, Result, Vec3};

pub const DEFAULT_BETA: f64 = 160.0;
const DISTRIBUTION_TOL: f64 = 1e-6;

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn check_distributions(target: &[f64], pred_log: &[f64]) -> Result<()> {
    if target.is_empty() || target.len() != pred_log.len() {
        return Err(Error::Contract(format!(
            "distribution lengths differ or are empty: {} vs {}",
            target.len(),
            pred_log.len()
        )));
    }
    if let Some(p) = target.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::Contract(format!("target probability {p} is not in [0, 1]")));
    }
    let sum: f64 = target.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(Error::Contract(format!("target sums to {sum}, not 1")));
    }
    if pred_log.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Contract("prediction contains NaN or +inf".into()));
    }
    let lse = log_sum_exp(pred_log);
    if !(lse.abs() <= DISTRIBUTION_TOL) {
        return Err(Error::Contract(format!(
            "prediction is not a log-distribution (log-sum-exp = {lse})"
        )));
    }
    Ok(())
}

/// KL divergence of a predicted log-distribution from a target
/// distribution, with `0 log 0 = 0`.
pub fn kl_loss(target: &[f64], pred_log: &[f64]) -> Result<f64> {
    check_distributions(target, pred_log)?;
    Ok(target
        .iter()
        .zip(pred_log)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * (p.ln() - q))
        .sum())
}

/// Map `q = [ω, t, elevation (deg), vfov (deg)]` to comparable ranges:
/// `[ln ω, (t - 1) / 9, elevation (rad), vfov (rad)]`.
pub fn standardize_q(q: &[f64; 4]) -> Result<[f64; 4]> {
    if !(q[0] > 0.0 && q[0].is_finite()) {
        return Err(Error::Contract(format!("exposure must be positive, got {}", q[0])));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("q has non-finite components".into()));
    }
    Ok([q[0].ln(), (q[1] - 1.0) / 9.0, q[2].to_radians(), q[3].to_radians()])
}

/// Inverse of [`standardize_q`].
pub fn unstandardize_q(z: &[f64; 4]) -> [f64; 4] {
    [z[0].exp(), 1.0 + 9.0 * z[1], z[2].to_degrees(), z[3].to_degrees()]
}

/// `kl_loss + beta * mean((z* - z)^2)` where `z` is the standardized q.
/// Both q vectors are given in natural units.
pub fn combined_loss(
    target_s: &[f64],
    pred_log_s: &[f64],
    target_q: &[f64; 4],
    pred_q: &[f64; 4],
    beta: f64,
) -> Result<f64> {
    let kl = kl_loss(target_s, pred_log_s)?;
    let a = standardize_q(target_q)?;
    let b = standardize_q(pred_q)?;
    let mse = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / 4.0;
    Ok(kl + beta * mse)
}

/// Triangle mesh with per-corner normals, normalized to fit the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    /// Each corner is `(position index, normal index)`.
    pub triangles: Vec<[(usize, usize); 3]>,
}

impl Mesh {
    /// Parse the `v`, `vn` and `f` records of a Wavefront OBJ file. Faces
    /// with more than three corners are fan-triangulated; missing normals
    /// are replaced by area-weighted vertex normals.
    pub fn parse_obj(text: &str) -> std::result::Result<Mesh, String> {
        let mut positions = Vec::new();
        let mut normals = Vec::new();
        let mut faces: Vec<Vec<(usize, Option<usize>)>> = Vec::new();

        let parse_vec = |parts: &mut std::str::SplitWhitespace, line: usize| {
            let mut v = [0.0; 3];
            for c in &mut v {
                *c = parts
                    .next()
                    .and_then(|s| s.parse::<f64>().ok())
                    .filter(|x| x.is_finite())
                    .ok_or(format!("line {line}: expected three numbers"))?;
            }
            Ok::<_, String>(Vec3::new(v[0], v[1], v[2]))
        };
        let resolve = |idx: &str, count: usize, line: usize| -> std::result::Result<usize, String> {
            let i: i64 = idx.parse().map_err(|_| format!("line {line}: bad index {idx:?}"))?;
            let r = if i > 0 { i - 1 } else { count as i64 + i };
            if i == 0 || r < 0 || r as usize >= count {
                return Err(format!("line {line}: index {i} out of range"));
            }
            Ok(r as usize)
        };

        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let mut parts = raw.split_whitespace();
            match parts.next() {
                Some("v") => positions.push(parse_vec(&mut parts, line)?),
                Some("vn") => normals.push(parse_vec(&mut parts, line)?),
                Some("f") => {
                    let mut face = Vec::new();
                    for corner in parts {
                        let mut fields = corner.split('/');
                        let p = resolve(fields.next().unwrap_or(""), positions.len(), line)?;
                        let nrm = match fields.nth(1) {
                            Some(s) if !s.is_empty() => Some(resolve(s, normals.len(), line)?),
                            _ => None,
                        };
                        face.push((p, nrm));
                    }
                    if face.len() < 3 {
                        return Err(format!("line {line}: face with fewer than three corners"));
                    }
                    faces.push(face);
                }
                _ => {}
            }
        }
        if faces.is_empty() {
            return Err("no faces".into());
        }

        // vertex normals for corners that carry none
        let mut smooth = vec![Vec3::zeros(); positions.len()];
        for f in &faces {
            for k in 1..f.len() - 1 {
                let (a, b, c) = (positions[f[0].0], positions[f[k].0], positions[f[k + 1].0]);
                let area_normal = (b - a).cross(&(c - a));
                for i in [f[0].0, f[k].0, f[k + 1].0] {
                    smooth[i] += area_normal;
                }
            }
        }
        let base = normals.len();
        normals.extend(smooth.iter().map(|n| n.try_normalize(0.0).unwrap_or(Vec3::y())));
        for n in normals.iter_mut().take(base) {
            *n = n.try_normalize(0.0).ok_or("zero-length normal")?;
        }

        let mut triangles = Vec::new();
        for f in &faces {
            let corner = |c: (usize, Option<usize>)| (c.0, c.1.unwrap_or(base + c.0));
            for k in 1..f.len() - 1 {
                triangles.push([corner(f[0]), corner(f[k]), corner(f[k + 1])]);
            }
        }

        let (lo, hi) = positions.iter().fold(
            (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(p), hi.sup(p)),
        );
        let center = (lo + hi) / 2.0;
        let radius = positions.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
        if radius == 0.0 {
            return Err("mesh has zero extent".into());
        }
        let positions = positions.iter().map(|p| (p - center) / radius).collect();
        Ok(Mesh {
            positions,
            normals,
            triangles,
        })
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_obj(&text).map_err(|r| Error::format(path, r))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Shape {
    #[default]
    Sphere,
    Mesh(Mesh),
}

/// Object, material and orthographic camera for relighting.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderSetup {
    pub shape: Shape,
    pub albedo: [f64; 3],
    /// Unit direction from the object toward the camera.
    pub view: Vec3,
    pub width: usize,
    pub height: usize,
}

impl Default for RenderSetup {
    fn default() -> Self {
        Self {
            shape: Shape::Sphere,
            albedo: [0.8; 3],
            view: Vec3::z(),
            width: 256,
            height: 256,
        }
    }
}

impl RenderSetup {
    pub fn validate(&self) -> Result<()> {
        if self.albedo.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Contract(format!("albedo {:?} outside [0, 1]", self.albedo)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Contract("render size must be positive".into()));
        }
        if !(self.view.norm() > 0.0 && self.view.iter().all(|v| v.is_finite())) {
            return Err(Error::Contract("view direction must be a non-zero vector".into()));
        }
        Ok(())
    }

    /// Image-plane basis `(right, up, toward camera)`.
    fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let back = self.view.normalize();
        let right = Vec3::y()
            .cross(&back)
            .try_normalize(1e-9)
            .unwrap_or_else(|| Vec3::x());
        (right, back.cross(&right), back)
    }

    /// Image-plane coordinates of a pixel center; the short side spans
    /// `[-1.05, 1.05]`.
    fn plane_coords(&self, x: usize, y: usize) -> (f64, f64) {
        let half = 1.05 / self.width.min(self.height) as f64;
        let s = (2.0 * x as f64 + 1.0 - self.width as f64) * half;
        let r = (self.height as f64 - 2.0 * y as f64 - 1.0) * half;
        (s, r)
    }

    /// Unit surface normal seen through every pixel; `None` for background.
    pub fn normals(&self) -> Vec<Option<Vec3>> {
        let (right, up, back) = self.basis();
        match &self.shape {
            Shape::Sphere => (0..self.width * self.height)
                .map(|i| {
                    let (s, r) = self.plane_coords(i % self.width, i / self.width);
                    let z2 = 1.0 - s * s - r * r;
                    (z2 >= 0.0).then(|| (s * right + r * up + z2.sqrt() * back).normalize())
                })
                .collect(),
            Shape::Mesh(mesh) => self.rasterize(mesh, right, up, back),
        }
    }

    fn rasterize(&self, mesh: &Mesh, right: Vec3, up: Vec3, back: Vec3) -> Vec<Option<Vec3>> {
        let (w, h) = (self.width, self.height);
        let half = 1.05 / w.min(h) as f64;
        let mut depth = vec![f64::NEG_INFINITY; w * h];
        let mut out = vec![None; w * h];
        let to_screen = |p: &Vec3| {
            let s = p.dot(&right);
            let r = p.dot(&up);
            let x = (s / half + w as f64) / 2.0 - 0.5;
            let y = (h as f64 - r / half) / 2.0 - 0.5;
            (x, y, p.dot(&back))
        };
        for tri in &mesh.triangles {
            let v: Vec<(f64, f64, f64)> = tri.iter().map(|c| to_screen(&mesh.positions[c.0])).collect();
            let area = (v[1].0 - v[0].0) * (v[2].1 - v[0].1) - (v[2].0 - v[0].0) * (v[1].1 - v[0].1);
            if area.abs() < 1e-12 {
                continue;
            }
            let xs = v.iter().map(|p| p.0);
            let ys = v.iter().map(|p| p.1);
            let x0 = xs.clone().fold(f64::INFINITY, f64::min).ceil().max(0.0) as usize;
            let x1 = xs.fold(f64::NEG_INFINITY, f64::max).floor().min(w as f64 - 1.0);
            let y0 = ys.clone().fold(f64::INFINITY, f64::min).ceil().max(0.0) as usize;
            let y1 = ys.fold(f64::NEG_INFINITY, f64::max).floor().min(h as f64 - 1.0);
            if x1 < 0.0 || y1 < 0.0 {
                continue;
            }
            for y in y0..=y1 as usize {
                for x in x0..=x1 as usize {
                    let (px, py) = (x as f64, y as f64);
                    let edge = |a: (f64, f64, f64), b: (f64, f64, f64)| {
                        ((b.0 - a.0) * (py - a.1) - (px - a.0) * (b.1 - a.1)) / area
                    };
                    let b0 = edge(v[1], v[2]);
                    let b1 = edge(v[2], v[0]);
                    let b2 = edge(v[0], v[1]);
                    if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                        continue;
                    }
                    let z = b0 * v[0].2 + b1 * v[1].2 + b2 * v[2].2;
                    let i = y * w + x;
                    if z <= depth[i] {
                        continue;
                    }
                    let n = b0 * mesh.normals[tri[0].1]
                        + b1 * mesh.normals[tri[1].1]
                        + b2 * mesh.normals[tri[2].1];
                    if let Some(n) = n.try_normalize(1e-12) {
                        // shade the side facing the camera
                        depth[i] = z;
                        out[i] = Some(if n.dot(&back) < 0.0 { -n } else { n });
                    }
                }
            }
        }
        out
    }
}

/// Rendered image and the mask of pixels covered by the object.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendering {
    pub image: RgbImage,
    pub mask: Mask,
}

/// Radiance times solid angle for every non-black env-map pixel.
fn env_samples(env: &EnvMap) -> Vec<(Vec3, [f64; 3])> {
    let (w, h) = (env.width(), env.height());
    let mut out = Vec::new();
    for v in 0..h {
        let d_omega = pixel_solid_angle(v, w, h);
        for u in 0..w {
            let l = env.get(u, v);
            if l.iter().any(|c| *c > 0.0) {
                let dir = pixel_to_direction(u as f64, v as f64, w, h);
                out.push((dir, [l[0] * d_omega, l[1] * d_omega, l[2] * d_omega]));
            }
        }
    }
    out
}

/// Irradiance at a surface with unit normal `n`, by direct summation over
/// the environment map.
pub fn irradiance(env: &EnvMap, n: &Vec3) -> [f64; 3] {
    irradiance_from(&env_samples(env), n)
}

fn irradiance_from(samples: &[(Vec3, [f64; 3])], n: &Vec3) -> [f64; 3] {
    let mut e = [0.0; 3];
    for (l, w) in samples {
        let c = n.dot(l);
        if c > 0.0 {
            for k in 0..3 {
                e[k] += w[k] * c;
            }
        }
    }
    e
}

/// Render a diffuse object lit by `env` with an orthographic camera.
/// Background pixels are black and excluded from the mask.
pub fn render_lambertian(env: &EnvMap, setup: &RenderSetup) -> Result<Rendering> {
    setup.validate()?;
    let samples = env_samples(env);
    let normals = setup.normals();
    let shaded: Vec<[f64; 3]> = normals
        .par_iter()
        .map(|n| match n {
            Some(n) => {
                let e = irradiance_from(&samples, n);
                [0, 1, 2].map(|k| setup.albedo[k] / PI * e[k])
            }
            None => [0.0; 3],
        })
        .collect();
    let image = RgbImage::from_vec(
        setup.width,
        setup.height,
        shaded.into_iter().flatten().collect(),
    )?;
    let mask = Mask::from_vec(setup.width, setup.height, normals.iter().map(Option::is_some).collect())?;
    Ok(Rendering { image, mask })
}

fn check_pair(a: &RgbImage, b: &RgbImage, mask: Option<&Mask>) -> Result<Vec<usize>> {
    if !a.same_shape(b) {
        return Err(Error::Contract(format!(
            "image shapes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let idx: Vec<usize> = match mask {
        Some(m) => {
            if m.width() != a.width() || m.height() != a.height() {
                return Err(Error::Contract("mask shape differs from images".into()));
            }
            m.indices().collect()
        }
        None => (0..a.len_pixels()).collect(),
    };
    if idx.is_empty() {
        return Err(Error::Contract("metric mask selects no pixels".into()));
    }
    Ok(idx)
}

fn scaled_rmse(a: &RgbImage, b: &RgbImage, idx: &[usize], scale: [f64; 3]) -> f64 {
    let (ad, bd) = (a.data(), b.data());
    let mut sum = 0.0;
    for &i in idx {
        for c in 0..3 {
            sum += (scale[c] * ad[3 * i + c] - bd[3 * i + c]).powi(2);
        }
    }
    (sum / (3 * idx.len()) as f64).sqrt()
}

/// Root mean square difference over masked pixels and all channels.
pub fn rmse(a: &RgbImage, b: &RgbImage, mask: Option<&Mask>) -> Result<f64> {
    let idx = check_pair(a, b, mask)?;
    Ok(scaled_rmse(a, b, &idx, [1.0; 3]))
}

/// RMSE after scaling `a` by the least-squares factor toward `b`, fitted
/// over all masked pixels and channels jointly.
pub fn si_rmse(a: &RgbImage, b: &RgbImage, mask: Option<&Mask>) -> Result<f64> {
    let idx = check_pair(a, b, mask)?;
    let (ad, bd) = (a.data(), b.data());
    let (mut ab, mut aa) = (0.0, 0.0);
    for &i in &idx {
        for c in 0..3 {
            ab += ad[3 * i + c] * bd[3 * i + c];
            aa += ad[3 * i + c] * ad[3 * i + c];
        }
    }
    if aa == 0.0 {
        return Err(Error::Degenerate("scale-invariant RMSE of an all-zero estimate".into()));
    }
    let alpha = ab / aa;
    Ok(scaled_rmse(a, b, &idx, [alpha; 3]))
}

/// Like [`si_rmse`] with one scale per channel. A channel of `a` that is
/// zero on the mask gets scale 0.
pub fn per_color_si_rmse(a: &RgbImage, b: &RgbImage, mask: Option<&Mask>) -> Result<f64> {
    let idx = check_pair(a, b, mask)?;
    let (ad, bd) = (a.data(), b.data());
    let mut scale = [0.0; 3];
    for (c, s) in scale.iter_mut().enumerate() {
        let (mut ab, mut aa) = (0.0, 0.0);
        for &i in &idx {
            ab += ad[3 * i + c] * bd[3 * i + c];
            aa += ad[3 * i + c] * ad[3 * i + c];
        }
        if aa == 0.0 {
            log::warn!("channel {c} of the estimate is zero on the mask; using scale 0");
        } else {
            *s = ab / aa;
        }
    }
    Ok(scaled_rmse(a, b, &idx, scale))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub si_rmse: f64,
    pub per_color_si_rmse: f64,
    /// Number of pixels the metrics were computed over.
    pub pixels: usize,
}

/// All three metrics of estimate `a` against reference `b`.
pub fn metric_report(a: &RgbImage, b: &RgbImage, mask: Option<&Mask>) -> Result<MetricReport> {
    let pixels = check_pair(a, b, mask)?.len();
    Ok(MetricReport {
        rmse: rmse(a, b, mask)?,
        si_rmse: si_rmse(a, b, mask)?,
        per_color_si_rmse: per_color_si_rmse(a, b, mask)?,
        pixels,
    })
}

/// Quartiles of the angular errors falling in one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub bin: String,
    pub count: usize,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SunErrorStats {
    pub errors_deg: Vec<f64>,
    /// `(threshold in degrees, fraction of errors at or below it)`.
    pub cdf: Vec<(f64, f64)>,
    pub overall: BinSummary,
    pub by_elevation: Vec<BinSummary>,
    pub by_azimuth: Vec<BinSummary>,
}

pub const ELEVATION_BIN_DEG: f64 = 18.0;
pub const AZIMUTH_BIN_DEG: f64 = 45.0;

fn summarize(bin: String, errors: &[f64]) -> Option<BinSummary> {
    (!errors.is_empty()).then(|| BinSummary {
        bin,
        count: errors.len(),
        p25: percentile(errors, 25.0),
        p50: percentile(errors, 50.0),
        p75: percentile(errors, 75.0),
    })
}

/// Angular-error statistics of predicted against true sun directions.
///
/// Errors are binned by true elevation and by the azimuth of the true
/// direction, which is camera-relative when both lists are expressed in
/// camera frames. Empty bins are omitted.
pub fn sun_error_stats(pred: &[Vec3], truth: &[Vec3]) -> Result<SunErrorStats> {
    if pred.len() != truth.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} true directions",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Contract("no sun directions to compare".into()));
    }
    let errors: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| angular_error(p, t)).collect();
    let cdf = (0..=180)
        .map(|deg| {
            let thr = deg as f64;
            (thr, errors.iter().filter(|e| **e <= thr).count() as f64 / errors.len() as f64)
        })
        .collect();

    let angles: Vec<(f64, f64)> = truth
        .iter()
        .map(|t| {
            let (e, a) = direction_angles(t);
            (e.to_degrees(), a.to_degrees())
        })
        .collect();
    let binned = |key: &dyn Fn(usize) -> usize, n: usize, label: &dyn Fn(usize) -> String| {
        let mut groups = vec![Vec::new(); n];
        for (i, e) in errors.iter().enumerate() {
            groups[key(i).min(n - 1)].push(*e);
        }
        groups
            .iter()
            .enumerate()
            .filter_map(|(k, g)| summarize(label(k), g))
            .collect::<Vec<_>>()
    };
    let n_elev = (90.0 / ELEVATION_BIN_DEG).ceil() as usize;
    let n_azim = (360.0 / AZIMUTH_BIN_DEG).ceil() as usize;
    let by_elevation = binned(
        &|i| (angles[i].0.max(0.0) / ELEVATION_BIN_DEG) as usize,
        n_elev,
        &|k| format!("elev_{}_{}", k as f64 * ELEVATION_BIN_DEG, (k + 1) as f64 * ELEVATION_BIN_DEG),
    );
    let by_azimuth = binned(
        &|i| ((angles[i].1 + 180.0) / AZIMUTH_BIN_DEG) as usize,
        n_azim,
        &|k| {
            let lo = -180.0 + k as f64 * AZIMUTH_BIN_DEG;
            format!("azim_{}_{}", lo, lo + AZIMUTH_BIN_DEG)
        },
    );
    Ok(SunErrorStats {
        overall: summarize("all".into(), &errors).expect("non-empty"),
        errors_deg: errors,
        cdf,
        by_elevation,
        by_azimuth,
    })
}

impl SunErrorStats {
    /// Binned summaries as CSV with header `bin,p25,p50,p75`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        let rows = std::iter::once(&self.overall)
            .chain(&self.by_elevation)
            .chain(&self.by_azimuth);
        let res = (|| -> csv::Result<()> {
            w.write_record(["bin", "p25", "p50", "p75"])?;
            for r in rows {
                w.write_record([r.bin.clone(), r.p25.to_string(), r.p50.to_string(), r.p75.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })();
        res.map_err(|e| Error::format(path, e.to_string()))
    }

    /// CDF as CSV with header `error_deg,fraction`.
    pub fn write_cdf_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::from("error_deg,fraction\n");
        for (t, f) in &self.cdf {
            text.push_str(&format!("{t},{f}\n"));
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }
}
