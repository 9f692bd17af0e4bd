//! Spectral sampling and conversion to linear RGB.

use std::sync::OnceLock;

use nalgebra::Matrix3;

use crate::{Error, Result};

const CIE1931_CSV: &str = include_str!("../../data/cie1931_2deg.csv");

/// CIE 1931 2° standard observer at 1 nm, 360–830 nm.
#[derive(Debug, Clone)]
pub struct CmfTable {
    first: f64,
    values: Vec<[f64; 3]>,
}

impl CmfTable {
    pub fn cie1931() -> &'static CmfTable {
        static TABLE: OnceLock<CmfTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            let mut rdr = csv::Reader::from_reader(CIE1931_CSV.as_bytes());
            let rows: Vec<(f64, f64, f64, f64)> = rdr
                .deserialize()
                .collect::<std::result::Result<_, _>>()
                .expect("embedded CMF table parses");
            let first = rows[0].0;
            for (i, r) in rows.iter().enumerate() {
                assert_eq!(r.0, first + i as f64, "CMF table must be on a 1 nm grid");
            }
            CmfTable {
                first,
                values: rows.iter().map(|r| [r.1, r.2, r.3]).collect(),
            }
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.first, self.first + (self.values.len() - 1) as f64)
    }

    /// Tabulated (wavelength, x̄ ȳ z̄) rows.
    pub fn rows(&self) -> impl Iterator<Item = (f64, [f64; 3])> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.first + i as f64, *v))
    }

    /// Linearly interpolated color matching values.
    pub fn at(&self, wavelength: f64) -> Result<[f64; 3]> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&wavelength) {
            return Err(Error::Domain(format!(
                "wavelength {wavelength} nm outside CMF table [{lo}, {hi}]"
            )));
        }
        let x = wavelength - self.first;
        let i = (x.floor() as usize).min(self.values.len() - 1);
        let f = x - i as f64;
        if f == 0.0 {
            return Ok(self.values[i]);
        }
        let (a, b) = (self.values[i], self.values[i + 1]);
        Ok([
            a[0] + f * (b[0] - a[0]),
            a[1] + f * (b[1] - a[1]),
            a[2] + f * (b[2] - a[2]),
        ])
    }

    /// Trapezoidal ∫ȳ dλ over the whole table.
    pub fn y_integral(&self) -> f64 {
        let n = self.values.len();
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| if i == 0 || i == n - 1 { 0.5 * v[1] } else { v[1] })
            .sum()
    }
}

/// XYZ → CIE RGB, the inverse of the CIE 1931 RGB → XYZ primaries without
/// the luminance normalization, so that equal-energy white maps to equal
/// RGB components.
pub fn cie_rgb_matrix() -> Matrix3<f64> {
    let rgb_to_xyz = Matrix3::new(
        0.49, 0.31, 0.20, //
        0.17697, 0.81240, 0.01063, //
        0.00, 0.01, 0.99,
    );
    rgb_to_xyz
        .try_inverse()
        .expect("CIE RGB primaries are independent")
}

/// XYZ → linear sRGB (D65).
pub fn srgb_matrix() -> Matrix3<f64> {
    Matrix3::new(
        3.2404542, -1.5371385, -0.4985314, //
        -0.9692660, 1.8760108, 0.0415560, //
        0.0556434, -0.2040259, 1.0572252,
    )
}

/// Wavelength sampling, observer and output primaries used to turn spectral
/// radiance into RGB.
///
/// XYZ is integrated with the trapezoid rule over `wavelengths`, multiplied by
/// `radiance_scale` and mapped through `xyz_to_rgb`. The default scale is
/// `1/∫ȳ`, so a flat spectrum of radiance `L` has luminance close to `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralConfig {
    wavelengths: Vec<f64>,
    cmf: Vec<[f64; 3]>,
    xyz_to_rgb: Matrix3<f64>,
    radiance_scale: f64,
}

pub const MIN_WAVELENGTH: f64 = 360.0;
pub const MAX_WAVELENGTH: f64 = 700.0;

impl Default for SpectralConfig {
    fn default() -> Self {
        Self::uniform(11).expect("11 samples on [360, 700] is valid")
    }
}

impl SpectralConfig {
    pub fn new(
        wavelengths: Vec<f64>,
        cmf: Vec<[f64; 3]>,
        xyz_to_rgb: Matrix3<f64>,
        radiance_scale: f64,
    ) -> Result<Self> {
        if wavelengths.len() < 2 {
            return Err(Error::Contract("need at least two wavelengths".into()));
        }
        if wavelengths.len() != cmf.len() {
            return Err(Error::Contract(format!(
                "{} wavelengths but {} CMF rows",
                wavelengths.len(),
                cmf.len()
            )));
        }
        if wavelengths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Contract("wavelengths must be strictly increasing".into()));
        }
        if wavelengths
            .iter()
            .any(|w| !(MIN_WAVELENGTH..=MAX_WAVELENGTH).contains(w))
        {
            return Err(Error::Contract(format!(
                "wavelengths must lie in [{MIN_WAVELENGTH}, {MAX_WAVELENGTH}] nm"
            )));
        }
        if !(radiance_scale.is_finite() && radiance_scale > 0.0) {
            return Err(Error::Contract("radiance scale must be positive".into()));
        }
        Ok(Self {
            wavelengths,
            cmf,
            xyz_to_rgb,
            radiance_scale,
        })
    }

    /// `n` samples uniformly spaced on [360, 700] nm with CIE 1931 values
    /// and CIE RGB primaries.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Contract("need at least two wavelengths".into()));
        }
        let step = (MAX_WAVELENGTH - MIN_WAVELENGTH) / (n - 1) as f64;
        let wl: Vec<f64> = (0..n).map(|i| MIN_WAVELENGTH + step * i as f64).collect();
        Self::from_wavelengths(wl)
    }

    pub fn from_wavelengths(wavelengths: Vec<f64>) -> Result<Self> {
        let table = CmfTable::cie1931();
        let cmf = wavelengths
            .iter()
            .map(|&w| table.at(w))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            wavelengths,
            cmf,
            cie_rgb_matrix(),
            1.0 / table.y_integral(),
        )
    }

    pub fn with_xyz_to_rgb(mut self, m: Matrix3<f64>) -> Self {
        self.xyz_to_rgb = m;
        self
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn cmf(&self) -> &[[f64; 3]] {
        &self.cmf
    }

    pub fn xyz_to_rgb(&self) -> &Matrix3<f64> {
        &self.xyz_to_rgb
    }

    pub fn radiance_scale(&self) -> f64 {
        self.radiance_scale
    }

    /// Trapezoid weights for the sample wavelengths.
    pub fn integration_weights(&self) -> Vec<f64> {
        let w = &self.wavelengths;
        let n = w.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { w[i] - w[i - 1] } else { 0.0 };
                let right = if i + 1 < n { w[i + 1] - w[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    /// RGB contribution of a unit radiance at each sample wavelength, so
    /// that `rgb = Σ_k L_k · sample_rgb_weights()[k]`.
    pub fn sample_rgb_weights(&self) -> Vec<[f64; 3]> {
        self.integration_weights()
            .iter()
            .zip(&self.cmf)
            .map(|(w, c)| {
                let xyz = nalgebra::Vector3::new(c[0], c[1], c[2]) * (w * self.radiance_scale);
                let rgb = self.xyz_to_rgb * xyz;
                [rgb.x, rgb.y, rgb.z]
            })
            .collect()
    }
}

/// Integrate spectral samples against the observer and convert to RGB.
pub fn spectral_to_rgb(samples: &[f64], cfg: &SpectralConfig) -> Result<[f64; 3]> {
    if samples.len() != cfg.wavelengths.len() {
        return Err(Error::Contract(format!(
            "{} spectral samples for {} wavelengths",
            samples.len(),
            cfg.wavelengths.len()
        )));
    }
    let mut xyz = nalgebra::Vector3::zeros();
    for ((s, w), c) in samples
        .iter()
        .zip(cfg.integration_weights())
        .zip(&cfg.cmf)
    {
        xyz += nalgebra::Vector3::new(c[0], c[1], c[2]) * (s * w);
    }
    let rgb = cfg.xyz_to_rgb * (xyz * cfg.radiance_scale);
    Ok([rgb.x, rgb.y, rgb.z])
}
