//! Sky radiance model, spectral conversion and environment map synthesis.

mod envmap;
mod model;
mod params;
pub mod spectral;
pub mod tables;

pub use envmap::{render_envmap, render_envmap_with, EnvMap, RenderOptions};
pub use model::{
    band_position, sky_color_rgb, sky_radiance_spectral, sun_radiance_spectral, SkyRgbModel,
    SkyState, ViewGeometry, SUN_DISK_RADIUS_DEG,
};
pub use params::{SkyParams, SkyParamsJson, GROUND_ALBEDO, MAX_TURBIDITY, MIN_TURBIDITY};
pub use spectral::{spectral_to_rgb, SpectralConfig};
pub use tables::HwTables;
