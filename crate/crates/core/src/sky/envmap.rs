use rayon::prelude::*;

use super::model::SkyRgbModel;
use super::spectral::SpectralConfig;
use super::SkyParams;
use crate::geometry::pixel_to_direction;
use crate::image::RgbImage;
use crate::{Error, Result};

pub const MIN_ENVMAP_HEIGHT: usize = 8;

/// HDR lat-long radiance map. Width is twice the height; everything below
/// the horizon is black.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvMap {
    image: RgbImage,
}

impl EnvMap {
    pub fn new(image: RgbImage) -> Result<Self> {
        if image.width() != 2 * image.height() || image.height() == 0 {
            return Err(Error::Contract(format!(
                "environment map must be 2:1, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        if let Some(v) = image.data().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Contract(format!(
                "environment map radiance must be finite and non-negative, found {v}"
            )));
        }
        Ok(Self { image })
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    pub fn into_image(self) -> RgbImage {
        self.image
    }

    pub fn get(&self, u: usize, v: usize) -> [f64; 3] {
        self.image.get(u, v)
    }

    /// Every radiance multiplied by `factor` (which must be finite and >= 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.image.scaled(factor))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// Average a 4x4 grid of sub-pixel directions per pixel.
    pub supersample: bool,
}

/// Render with pixel-center sampling.
pub fn render_envmap(
    p: &SkyParams,
    width: usize,
    height: usize,
    cfg: &SpectralConfig,
) -> Result<EnvMap> {
    render_envmap_with(p, width, height, cfg, RenderOptions::default())
}

pub fn render_envmap_with(
    p: &SkyParams,
    width: usize,
    height: usize,
    cfg: &SpectralConfig,
    opts: RenderOptions,
) -> Result<EnvMap> {
    if width != 2 * height || height < MIN_ENVMAP_HEIGHT {
        return Err(Error::Contract(format!(
            "environment map size must be 2H x H with H >= {MIN_ENVMAP_HEIGHT}, got {width}x{height}"
        )));
    }
    let model = SkyRgbModel::for_params(p, cfg)?;
    let omega = p.exposure();
    const SUB: usize = 4;

    let mut data = vec![0.0; width * height * 3];
    data.par_chunks_mut(width * 3)
        .enumerate()
        .for_each(|(v, row)| {
            for u in 0..width {
                let rgb = if opts.supersample {
                    let mut acc = [0.0; 3];
                    for sv in 0..SUB {
                        for su in 0..SUB {
                            let du = (su as f64 + 0.5) / SUB as f64 - 0.5;
                            let dv = (sv as f64 + 0.5) / SUB as f64 - 0.5;
                            let d = pixel_to_direction(u as f64 + du, v as f64 + dv, width, height);
                            if d.y < 0.0 {
                                continue;
                            }
                            let c = model.rgb(&model.geometry(&d));
                            for k in 0..3 {
                                acc[k] += c[k];
                            }
                        }
                    }
                    acc.map(|a| a / (SUB * SUB) as f64)
                } else {
                    let d = pixel_to_direction(u as f64, v as f64, width, height);
                    if d.y < 0.0 {
                        continue;
                    }
                    model.rgb(&model.geometry(&d))
                };
                for k in 0..3 {
                    row[u * 3 + k] = omega * rgb[k].max(0.0);
                }
            }
        });
    EnvMap::new(RgbImage::from_vec(width, height, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        let p = SkyParams::from_angles(30.0, 0.0, 3.0, 1.0).unwrap();
        let cfg = SpectralConfig::default();
        assert!(render_envmap(&p, 64, 64, &cfg).is_err());
        assert!(render_envmap(&p, 8, 4, &cfg).is_err());
        assert!(render_envmap(&p, 16, 8, &cfg).is_ok());
    }

    #[test]
    fn lower_half_is_black() {
        let p = SkyParams::from_angles(30.0, 0.0, 3.0, 1.0).unwrap();
        let env = render_envmap(&p, 64, 32, &SpectralConfig::default()).unwrap();
        for v in 16..32 {
            for u in 0..64 {
                assert_eq!(env.get(u, v), [0.0; 3]);
            }
        }
        assert!(env.get(10, 5).iter().all(|&c| c > 0.0));
    }
}
