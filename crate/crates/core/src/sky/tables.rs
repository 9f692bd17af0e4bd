//! Hošek-Wilkie spectral coefficient tables.
//!
//! The tables are the published 2012 skylight and 2013 solar radiance
//! datasets (11 bands from 320 nm to 720 nm in 40 nm steps, ground albedo 0
//! and 1, turbidity 1 to 10). They are shipped as `data/hw_spectral_v1.bin`;
//! see `data/README.md` for provenance and `tools/convert_hw_tables.py` for
//! the layout.

use std::sync::OnceLock;

use crate::{Error, Result};

pub const BANDS: usize = 11;
pub const ALBEDOS: usize = 2;
pub const TURBIDITIES: usize = 10;
pub const CONTROL_POINTS: usize = 6;
pub const SKY_PARAMS: usize = 9;
pub const SOLAR_SEGMENTS: usize = 45;
pub const SOLAR_COEFS: usize = 4;
pub const LIMB_COEFS: usize = 6;

const MAGIC: &[u8; 8] = b"HWSPEC01";
const BUILTIN: &[u8] = include_bytes!("../../data/hw_spectral_v1.bin");

#[derive(Debug, Clone)]
pub struct HwTables {
    wavelengths: [f64; BANDS],
    // [band][albedo][turbidity][ctrl][param]
    sky_params: Vec<f64>,
    // [band][albedo][turbidity][ctrl]
    sky_radiance: Vec<f64>,
    // [band][turbidity][segment][coef], ascending powers
    solar: Vec<f64>,
    // [band][coef], ascending powers
    limb: Vec<f64>,
}

impl HwTables {
    /// Tables compiled into the binary.
    pub fn builtin() -> &'static HwTables {
        static TABLES: OnceLock<HwTables> = OnceLock::new();
        TABLES.get_or_init(|| {
            HwTables::from_bytes(BUILTIN).expect("embedded sky tables are well formed")
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 + 8 * 4 || &bytes[..8] != MAGIC {
            return Err(Error::Asset("missing HWSPEC01 header".into()));
        }
        let dims: Vec<usize> = bytes[8..40]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        let expected = [
            BANDS,
            ALBEDOS,
            TURBIDITIES,
            CONTROL_POINTS,
            SKY_PARAMS,
            SOLAR_SEGMENTS,
            SOLAR_COEFS,
            LIMB_COEFS,
        ];
        if dims != expected {
            return Err(Error::Asset(format!(
                "unexpected table dimensions {dims:?}, want {expected:?}"
            )));
        }

        let n_params = BANDS * ALBEDOS * TURBIDITIES * CONTROL_POINTS * SKY_PARAMS;
        let n_rad = BANDS * ALBEDOS * TURBIDITIES * CONTROL_POINTS;
        let n_solar = BANDS * TURBIDITIES * SOLAR_SEGMENTS * SOLAR_COEFS;
        let n_limb = BANDS * LIMB_COEFS;
        let total = BANDS + n_params + n_rad + n_solar + n_limb;
        let body = &bytes[40..];
        if body.len() != total * 8 {
            return Err(Error::Asset(format!(
                "table body has {} bytes, expected {}",
                body.len(),
                total * 8
            )));
        }
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };

        let wl = take(BANDS);
        let tables = Self {
            wavelengths: wl.try_into().expect("band count checked"),
            sky_params: take(n_params),
            sky_radiance: take(n_rad),
            solar: take(n_solar),
            limb: take(n_limb),
        };
        if tables
            .wavelengths
            .windows(2)
            .any(|w| (w[1] - w[0] - 40.0).abs() > 1e-9)
        {
            return Err(Error::Asset("band wavelengths must be 40 nm apart".into()));
        }
        Ok(tables)
    }

    /// Band center wavelengths in nm.
    pub fn wavelengths(&self) -> &[f64; BANDS] {
        &self.wavelengths
    }

    pub fn min_wavelength(&self) -> f64 {
        self.wavelengths[0]
    }

    pub fn max_wavelength(&self) -> f64 {
        self.wavelengths[BANDS - 1]
    }

    /// Quintic control points for one band/albedo/turbidity level:
    /// `CONTROL_POINTS` rows of `SKY_PARAMS` values.
    pub(crate) fn sky_param_block(&self, band: usize, albedo: usize, turbidity: usize) -> &[f64] {
        let stride = CONTROL_POINTS * SKY_PARAMS;
        let start = ((band * ALBEDOS + albedo) * TURBIDITIES + turbidity) * stride;
        &self.sky_params[start..start + stride]
    }

    pub(crate) fn sky_radiance_block(
        &self,
        band: usize,
        albedo: usize,
        turbidity: usize,
    ) -> &[f64] {
        let start = ((band * ALBEDOS + albedo) * TURBIDITIES + turbidity) * CONTROL_POINTS;
        &self.sky_radiance[start..start + CONTROL_POINTS]
    }

    pub(crate) fn solar_segment(&self, band: usize, turbidity: usize, segment: usize) -> &[f64] {
        let start = ((band * TURBIDITIES + turbidity) * SOLAR_SEGMENTS + segment) * SOLAR_COEFS;
        &self.solar[start..start + SOLAR_COEFS]
    }

    pub(crate) fn limb_darkening(&self, band: usize) -> &[f64] {
        &self.limb[band * LIMB_COEFS..(band + 1) * LIMB_COEFS]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_tables_load() {
        let t = HwTables::builtin();
        assert_eq!(t.wavelengths()[0], 320.0);
        assert_eq!(t.wavelengths()[10], 720.0);
    }

    #[test]
    fn limb_darkening_is_near_one_at_disk_center() {
        let t = HwTables::builtin();
        for band in 0..BANDS {
            let s: f64 = t.limb_darkening(band).iter().sum();
            assert!((s - 1.0).abs() < 5e-3, "band {band}: {s}");
        }
    }

    #[test]
    fn solar_polynomials_are_continuous() {
        let t = HwTables::builtin();
        let brk = |i: usize| (i as f64 / SOLAR_SEGMENTS as f64).powi(3) * std::f64::consts::FRAC_PI_2;
        for band in [3, 6, 9] {
            for seg in 15..SOLAR_SEGMENTS - 1 {
                let c = t.solar_segment(band, 0, seg);
                let x = brk(seg + 1) - brk(seg);
                let end: f64 = c.iter().enumerate().map(|(k, v)| v * x.powi(k as i32)).sum();
                let next = t.solar_segment(band, 0, seg + 1)[0];
                assert!((end - next).abs() <= 1e-3 * next.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_truncated_asset() {
        assert!(HwTables::from_bytes(&BUILTIN[..1000]).is_err());
        assert!(HwTables::from_bytes(b"garbage").is_err());
    }
}
