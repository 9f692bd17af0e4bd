//! Independent reference implementations used as test oracles. They read
//! the shipped data files directly and share no code with the library.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::PathBuf;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

/// Raw Hošek-Wilkie tables parsed straight from the binary asset.
pub struct RawTables {
    pub wavelengths: Vec<f64>,
    params: Vec<f64>,
    radiance: Vec<f64>,
}

impl RawTables {
    pub fn load() -> Self {
        let bytes = std::fs::read(data_path("hw_spectral_v1.bin")).unwrap();
        assert_eq!(&bytes[..8], b"HWSPEC01");
        let f: Vec<f64> = bytes[40..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let n_params = 11 * 2 * 10 * 6 * 9;
        let n_rad = 11 * 2 * 10 * 6;
        Self {
            wavelengths: f[..11].to_vec(),
            params: f[11..11 + n_params].to_vec(),
            radiance: f[11 + n_params..11 + n_params + n_rad].to_vec(),
        }
    }

    fn param(&self, band: usize, albedo: usize, turb: usize, ctrl: usize, i: usize) -> f64 {
        self.params[(((band * 2 + albedo) * 10 + turb) * 6 + ctrl) * 9 + i]
    }

    fn rad(&self, band: usize, albedo: usize, turb: usize, ctrl: usize) -> f64 {
        self.radiance[((band * 2 + albedo) * 10 + turb) * 6 + ctrl]
    }

    /// Cooked coefficients and radiance scale for one band.
    fn cook(&self, band: usize, t: f64, albedo: f64, sun_elev: f64) -> ([f64; 9], f64) {
        let x = (sun_elev / FRAC_PI_2).powf(1.0 / 3.0);
        let binom = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
        let bern = |k: usize| binom[k] * x.powi(k as i32) * (1.0 - x).powi(5 - k as i32);
        let it = t.floor() as usize;
        let rem = t - it as f64;
        let mut levels = vec![(it - 1, 1.0 - rem)];
        if it < 10 {
            levels.push((it, rem));
        }
        let mut cfg = [0.0; 9];
        let mut lm = 0.0;
        for (ti, wt) in levels {
            for (ai, wa) in [(0, 1.0 - albedo), (1, albedo)] {
                for k in 0..6 {
                    let w = wt * wa * bern(k);
                    for (i, c) in cfg.iter_mut().enumerate() {
                        *c += w * self.param(band, ai, ti, k, i);
                    }
                    lm += w * self.rad(band, ai, ti, k);
                }
            }
        }
        (cfg, lm)
    }

    /// Skylight radiance in one band for zenith angle `theta` and sun
    /// angle `gamma`.
    pub fn band_radiance(&self, band: usize, theta: f64, gamma: f64, t: f64, albedo: f64, sun_elev: f64) -> f64 {
        let (c, lm) = self.cook(band, t, albedo, sun_elev);
        let ct = theta.cos();
        let cg = gamma.cos();
        let chi = (1.0 + cg * cg) / (1.0 + c[8] * c[8] - 2.0 * c[8] * cg).powf(1.5);
        (1.0 + c[0] * (c[1] / (ct + 0.01)).exp())
            * (c[2] + c[3] * (c[4] * gamma).exp() + c[5] * cg * cg + c[6] * chi + c[7] * ct.sqrt())
            * lm
    }

    /// Skylight radiance at any wavelength inside the band range, linear
    /// between bands.
    pub fn radiance(&self, wavelength: f64, theta: f64, gamma: f64, t: f64, albedo: f64, sun_elev: f64) -> f64 {
        let pos = (wavelength - self.wavelengths[0]) / 40.0;
        let b = (pos.floor() as usize).min(9);
        let f = pos - b as f64;
        (1.0 - f) * self.band_radiance(b, theta, gamma, t, albedo, sun_elev)
            + f * self.band_radiance(b + 1, theta, gamma, t, albedo, sun_elev)
    }
}

/// CIE 1931 2° observer at 1 nm (360–830 nm), parsed from the shipped CSV.
pub fn cmf_1nm() -> Vec<(f64, [f64; 3])> {
    let text = std::fs::read_to_string(data_path("cie1931_2deg.csv")).unwrap();
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.trim().parse().unwrap()).collect();
            (v[0], [v[1], v[2], v[3]])
        })
        .collect()
}

/// XYZ to CIE RGB (equal-energy white point).
pub const CIE_RGB: [[f64; 3]; 3] = [
    [2.3646138465383655, -0.896540570739668, -0.4680732757986974],
    [-0.515166208447888, 1.4264081038563887, 0.08875810459149917],
    [0.005203699075231192, -0.014408162665216048, 1.0092044635899848],
];

/// Dense spectral to RGB: trapezoid at 1 nm over 360–700 nm, scaled by
/// `1/∫ȳ` over the whole observer table.
pub fn dense_rgb(spectrum: impl Fn(f64) -> f64) -> [f64; 3] {
    let cmf = cmf_1nm();
    let ybar: f64 = cmf
        .iter()
        .enumerate()
        .map(|(i, (_, c))| if i == 0 || i == cmf.len() - 1 { 0.5 * c[1] } else { c[1] })
        .sum();
    let visible: Vec<_> = cmf.iter().filter(|(w, _)| *w <= 700.0).collect();
    let mut xyz = [0.0; 3];
    for (i, (w, c)) in visible.iter().enumerate() {
        let weight = if i == 0 || i == visible.len() - 1 { 0.5 } else { 1.0 };
        let s = spectrum(*w);
        for k in 0..3 {
            xyz[k] += weight * s * c[k];
        }
    }
    let mut rgb = [0.0; 3];
    for (r, row) in rgb.iter_mut().zip(CIE_RGB) {
        *r = (row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2]) / ybar;
    }
    rgb
}

pub fn deg(x: f64) -> f64 {
    x * PI / 180.0
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
