use serde::{Deserialize, Serialize};

use crate::geometry::{direction_angles, direction_from_angles};
use crate::{Error, Result, Vec3};

pub const MIN_TURBIDITY: f64 = 1.0;
pub const MAX_TURBIDITY: f64 = 10.0;
/// Ground albedo used for every sky, roughly the Earth's average.
pub const GROUND_ALBEDO: f64 = 0.3;

/// Compact sky lighting parameters.
///
/// `exposure` may be zero, which is what the closed-form exposure solve
/// returns for an all-black sky; everything else about the parameters is
/// validated on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkyParams {
    sun_dir: Vec3,
    turbidity: f64,
    exposure: f64,
}

impl SkyParams {
    pub fn new(sun_dir: Vec3, turbidity: f64, exposure: f64) -> Result<Self> {
        let n = sun_dir.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::Contract("sun direction must be a non-zero vector".into()));
        }
        let mut sun_dir = sun_dir / n;
        if sun_dir.y < -1e-9 {
            return Err(Error::Domain(format!("sun below the horizon: {sun_dir:?}")));
        }
        if sun_dir.y < 0.0 {
            sun_dir.y = 0.0;
            sun_dir.normalize_mut();
        }
        if !(MIN_TURBIDITY..=MAX_TURBIDITY).contains(&turbidity) {
            return Err(Error::Domain(format!("turbidity {turbidity} outside [1, 10]")));
        }
        if !(exposure.is_finite() && exposure >= 0.0) {
            return Err(Error::Domain(format!("exposure {exposure} must be finite and >= 0")));
        }
        Ok(Self {
            sun_dir,
            turbidity,
            exposure,
        })
    }

    /// From sun elevation and azimuth in degrees.
    pub fn from_angles(
        sun_elevation_deg: f64,
        sun_azimuth_deg: f64,
        turbidity: f64,
        exposure: f64,
    ) -> Result<Self> {
        if !(0.0..=90.0).contains(&sun_elevation_deg) {
            return Err(Error::Domain(format!(
                "sun elevation {sun_elevation_deg} outside [0, 90] degrees"
            )));
        }
        let dir = direction_from_angles(
            sun_elevation_deg.to_radians(),
            sun_azimuth_deg.to_radians(),
        );
        Self::new(dir, turbidity, exposure)
    }

    pub fn sun_dir(&self) -> Vec3 {
        self.sun_dir
    }

    pub fn turbidity(&self) -> f64 {
        self.turbidity
    }

    pub fn exposure(&self) -> f64 {
        self.exposure
    }

    pub fn ground_albedo(&self) -> f64 {
        GROUND_ALBEDO
    }

    /// Sun elevation above the horizon in radians.
    pub fn sun_elevation(&self) -> f64 {
        direction_angles(&self.sun_dir).0
    }

    /// Sun azimuth in radians.
    pub fn sun_azimuth(&self) -> f64 {
        direction_angles(&self.sun_dir).1
    }

    pub fn with_exposure(self, exposure: f64) -> Result<Self> {
        Self::new(self.sun_dir, self.turbidity, exposure)
    }

    pub fn with_turbidity(self, turbidity: f64) -> Result<Self> {
        Self::new(self.sun_dir, turbidity, self.exposure)
    }

    pub fn to_json(&self) -> SkyParamsJson {
        SkyParamsJson {
            sun_elevation_deg: self.sun_elevation().to_degrees(),
            sun_azimuth_deg: self.sun_azimuth().to_degrees(),
            turbidity: self.turbidity,
            exposure: self.exposure,
            ground_albedo: GROUND_ALBEDO,
        }
    }
}

/// On-disk form of [`SkyParams`], angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkyParamsJson {
    pub sun_elevation_deg: f64,
    pub sun_azimuth_deg: f64,
    pub turbidity: f64,
    pub exposure: f64,
    #[serde(default = "default_albedo")]
    pub ground_albedo: f64,
}

fn default_albedo() -> f64 {
    GROUND_ALBEDO
}

impl TryFrom<SkyParamsJson> for SkyParams {
    type Error = Error;

    fn try_from(j: SkyParamsJson) -> Result<Self> {
        if (j.ground_albedo - GROUND_ALBEDO).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "ground albedo is fixed at {GROUND_ALBEDO}, got {}",
                j.ground_albedo
            )));
        }
        SkyParams::from_angles(j.sun_elevation_deg, j.sun_azimuth_deg, j.turbidity, j.exposure)
    }
}

impl Serialize for SkyParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SkyParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = SkyParamsJson::deserialize(d)?;
        SkyParams::try_from(j).map_err(serde::de::Error::custom)
    }
}
