//! Lat-long panorama geometry and pinhole crops.
//!
//! World frame is y-up. A lat-long image of size `W x H` (with `W = 2H`) maps
//! the continuous pixel coordinate `(u, v)`, where integers are pixel
//! centers, to
//!
//! ```text
//! θ = π (v + 0.5) / H            zenith angle
//! φ = 2π (u + 0.5) / W − π       azimuth
//! d = (sin θ sin φ, cos θ, sin θ cos φ)
//! ```
//!
//! so the image center looks down +z and three quarters of the way across
//! looks down +x. Elevation is `π/2 − θ`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::image::{Mask, RgbImage};
use crate::{Error, Result, Vec3};

pub fn pixel_to_direction(u: f64, v: f64, width: usize, height: usize) -> Vec3 {
    let theta = (PI * (v + 0.5) / height as f64).clamp(0.0, PI);
    let phi = TAU * (u + 0.5) / width as f64 - PI;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(st * sp, ct, st * cp)
}

/// Inverse of [`pixel_to_direction`]. `u` lies in `[-0.5, W - 0.5)` and `v`
/// in `[-0.5, H - 0.5]`; the zenith maps to `v = -0.5`.
pub fn direction_to_pixel(d: &Vec3, width: usize, height: usize) -> (f64, f64) {
    let (theta, phi) = zenith_azimuth(d);
    let u = (phi + PI) * width as f64 / TAU - 0.5;
    let v = theta * height as f64 / PI - 0.5;
    (u, v)
}

/// Like [`direction_to_pixel`] but with `v` clamped to valid row centers.
pub fn direction_to_pixel_clamped(d: &Vec3, width: usize, height: usize) -> (f64, f64) {
    let (u, v) = direction_to_pixel(d, width, height);
    (u, v.clamp(0.0, height as f64 - 1.0))
}

fn zenith_azimuth(d: &Vec3) -> (f64, f64) {
    let horiz = (d.x * d.x + d.z * d.z).sqrt();
    let theta = horiz.atan2(d.y);
    let phi = d.x.atan2(d.z);
    (theta, phi)
}

/// Unit direction from elevation above the horizon and azimuth, in radians.
pub fn direction_from_angles(elevation: f64, azimuth: f64) -> Vec3 {
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Vec3::new(ce * sa, se, ce * ca)
}

/// `(elevation, azimuth)` of a direction, in radians; azimuth in `(-π, π]`.
pub fn direction_angles(d: &Vec3) -> (f64, f64) {
    let (theta, phi) = zenith_azimuth(d);
    (FRAC_PI_2 - theta, phi)
}

/// Angle between two unit vectors, in degrees. Same value as
/// `acos(a·b)`, but exact at 0° and 180°.
pub fn angular_error(a: &Vec3, b: &Vec3) -> f64 {
    angle_between(a, b).to_degrees()
}

/// Angle between two vectors in radians, accurate for small angles.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Solid angle subtended by a lat-long pixel in row `v`.
pub fn pixel_solid_angle(v: usize, width: usize, height: usize) -> f64 {
    let d_theta = PI / height as f64;
    let d_phi = TAU / width as f64;
    let theta = PI * (v as f64 + 0.5) / height as f64;
    theta.sin() * d_theta * d_phi
}

/// Rotate a direction about the vertical axis by `angle` radians, in the
/// sense of increasing azimuth.
pub fn rotate_azimuth(d: &Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    Vec3::new(d.x * c + d.z * s, d.y, -d.x * s + d.z * c)
}

/// Equirectangular image with an optional sky mask.
#[derive(Debug, Clone)]
pub struct Panorama {
    image: RgbImage,
    sky_mask: Option<Mask>,
}

impl Panorama {
    pub fn new(image: RgbImage, sky_mask: Option<Mask>) -> Result<Self> {
        if image.width() != 2 * image.height() {
            return Err(Error::Contract(format!(
                "panorama must be 2:1, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        if let Some(m) = &sky_mask {
            if m.width() != image.width() || m.height() != image.height() {
                return Err(Error::Contract("sky mask size differs from image".into()));
            }
        }
        Ok(Self { image, sky_mask })
    }

    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    pub fn sky_mask(&self) -> Option<&Mask> {
        self.sky_mask.as_ref()
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn with_mask(mut self, mask: Mask) -> Result<Self> {
        if mask.width() != self.width() || mask.height() != self.height() {
            return Err(Error::Contract("sky mask size differs from image".into()));
        }
        self.sky_mask = Some(mask);
        Ok(self)
    }

    /// True when every value lies in `[0, 1]`.
    pub fn is_ldr(&self) -> bool {
        self.image.data().iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// Bilinear lookup at continuous pixel coordinates (integers are centers),
/// wrapping in `u` and clamping in `v`.
pub fn sample_bilinear(img: &RgbImage, u: f64, v: f64) -> [f64; 3] {
    let w = img.width();
    let h = img.height();
    let x0f = u.floor();
    let fx = u - x0f;
    let x0 = (x0f as i64).rem_euclid(w as i64) as usize;
    let x1 = (x0 + 1) % w;
    let vc = v.clamp(0.0, (h - 1) as f64);
    let y0 = vc.floor() as usize;
    let fy = vc - y0 as f64;
    let y1 = (y0 + 1).min(h - 1);

    let (a, b, c, d) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
    let mut out = [0.0; 3];
    for k in 0..3 {
        let top = a[k] + fx * (b[k] - a[k]);
        let bottom = c[k] + fx * (d[k] - c[k]);
        out[k] = top + fy * (bottom - top);
    }
    out
}

pub const CROP_WIDTH: usize = 320;
pub const CROP_HEIGHT: usize = 240;
pub const ELEVATION_RANGE: (f64, f64) = (-20.0, 20.0);
pub const AZIMUTH_RANGE: (f64, f64) = (-180.0, 180.0);
pub const VFOV_RANGE: (f64, f64) = (35.0, 68.0);

/// Pinhole camera looking out from the panorama center, zero roll.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    #[serde(rename = "elevation_deg")]
    pub elevation: f64,
    #[serde(rename = "azimuth_deg")]
    pub azimuth: f64,
    #[serde(rename = "vfov_deg")]
    pub vfov: f64,
    #[serde(rename = "width")]
    pub out_width: usize,
    #[serde(rename = "height")]
    pub out_height: usize,
}

impl Default for CameraParams {
    fn default() -> Self {
        Self {
            elevation: 0.0,
            azimuth: 0.0,
            vfov: 50.0,
            out_width: CROP_WIDTH,
            out_height: CROP_HEIGHT,
        }
    }
}

/// Orthonormal camera frame in world coordinates.
#[derive(Debug, Clone, Copy)]
pub struct CameraFrame {
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
    tan_half_h: f64,
    tan_half_v: f64,
    width: usize,
    height: usize,
}

impl CameraParams {
    pub fn validate(&self) -> Result<()> {
        let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        if !within(self.elevation, ELEVATION_RANGE)
            || !within(self.azimuth, AZIMUTH_RANGE)
            || !within(self.vfov, VFOV_RANGE)
        {
            return Err(Error::Contract(format!("camera parameters out of range: {self:?}")));
        }
        if self.out_width == 0 || self.out_height == 0 {
            return Err(Error::Contract("camera output size must be positive".into()));
        }
        Ok(())
    }

    pub fn frame(&self) -> CameraFrame {
        let forward =
            direction_from_angles(self.elevation.to_radians(), self.azimuth.to_radians());
        let right = Vec3::y().cross(&forward).normalize();
        let up = forward.cross(&right);
        let tan_half_v = (0.5 * self.vfov.to_radians()).tan();
        let tan_half_h = tan_half_v * self.out_width as f64 / self.out_height as f64;
        CameraFrame {
            right,
            up,
            forward,
            tan_half_h,
            tan_half_v,
            width: self.out_width,
            height: self.out_height,
        }
    }

    /// Horizontal field of view in degrees.
    pub fn hfov(&self) -> f64 {
        let f = self.frame();
        2.0 * f.tan_half_h.atan().to_degrees()
    }
}

impl CameraFrame {
    /// World ray through continuous image coordinates (integers are pixel
    /// centers, row 0 at the top).
    pub fn ray(&self, x: f64, y: f64) -> Vec3 {
        let sx = (2.0 * (x + 0.5) / self.width as f64 - 1.0) * self.tan_half_h;
        let sy = (1.0 - 2.0 * (y + 0.5) / self.height as f64) * self.tan_half_v;
        (self.forward + self.right * sx + self.up * sy).normalize()
    }

    /// Image coordinates of a world direction, or `None` behind the camera.
    pub fn project(&self, d: &Vec3) -> Option<(f64, f64)> {
        let z = d.dot(&self.forward);
        if z <= 0.0 {
            return None;
        }
        let sx = d.dot(&self.right) / z / self.tan_half_h;
        let sy = d.dot(&self.up) / z / self.tan_half_v;
        let x = (sx + 1.0) * 0.5 * self.width as f64 - 0.5;
        let y = (1.0 - sy) * 0.5 * self.height as f64 - 0.5;
        Some((x, y))
    }

    pub fn contains(&self, d: &Vec3) -> bool {
        matches!(self.project(d), Some((x, y))
            if x >= -0.5 && x < self.width as f64 - 0.5 && y >= -0.5 && y < self.height as f64 - 0.5)
    }
}

/// Render a pinhole view of the panorama by bilinear lookup.
pub fn extract_crop(pano: &Panorama, cam: &CameraParams) -> Result<RgbImage> {
    cam.validate()?;
    let frame = cam.frame();
    let (pw, ph) = (pano.width(), pano.height());
    let mut out = RgbImage::new(cam.out_width, cam.out_height);
    for y in 0..cam.out_height {
        for x in 0..cam.out_width {
            let d = frame.ray(x as f64, y as f64);
            let (u, v) = direction_to_pixel(&d, pw, ph);
            out.set(x, y, sample_bilinear(pano.image(), u, v));
        }
    }
    Ok(out)
}

/// Draw camera parameters uniformly from the sampling ranges.
pub fn sample_camera_with<R: Rng + ?Sized>(rng: &mut R) -> CameraParams {
    CameraParams {
        elevation: rng.random_range(ELEVATION_RANGE.0..=ELEVATION_RANGE.1),
        azimuth: rng.random_range(AZIMUTH_RANGE.0..=AZIMUTH_RANGE.1),
        vfov: rng.random_range(VFOV_RANGE.0..=VFOV_RANGE.1),
        out_width: CROP_WIDTH,
        out_height: CROP_HEIGHT,
    }
}

pub fn sample_camera(seed: u64) -> CameraParams {
    sample_camera_with(&mut ChaCha8Rng::seed_from_u64(seed))
}
