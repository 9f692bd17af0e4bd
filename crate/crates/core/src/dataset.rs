//! Training data: sun-position bins, von Mises-Fisher targets, synthetic
//! panoramas and the crop dataset builder.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fitting::{fit_sky_params, sky_mask_for, FitConfig};
use crate::geometry::{
    direction_from_angles, extract_crop, pixel_to_direction, rotate_azimuth, sample_camera_with,
    CameraParams, Panorama,
};
use crate::image::{Mask, RgbImage};
use crate::io;
use crate::sky::{render_envmap, EnvMap, SkyParams, SkyParamsJson, SpectralConfig};
use crate::{Error, Result, Vec3};

pub const DEFAULT_KAPPA: f64 = 80.0;
pub const DEFAULT_CROPS: usize = 7;
pub const MANIFEST_FILE: &str = "MANIFEST.jsonl";
pub const SPLITS_FILE: &str = "SPLITS.json";

/// Discretization of the upper hemisphere into elevation rings and
/// azimuth sectors; bins are indexed elevation-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SunBinGrid {
    pub n_elev: usize,
    pub n_azim: usize,
}

impl Default for SunBinGrid {
    fn default() -> Self {
        Self {
            n_elev: 5,
            n_azim: 32,
        }
    }
}

impl SunBinGrid {
    pub fn new(n_elev: usize, n_azim: usize) -> Result<Self> {
        if n_elev == 0 || n_azim == 0 {
            return Err(Error::Contract("sun bin grid needs at least one bin per axis".into()));
        }
        Ok(Self { n_elev, n_azim })
    }

    pub fn len(&self) -> usize {
        self.n_elev * self.n_azim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ring centers in degrees, uniform over [0°, 90°].
    pub fn elevation_centers_deg(&self) -> Vec<f64> {
        let step = 90.0 / self.n_elev as f64;
        (0..self.n_elev).map(|i| step * (i as f64 + 0.5)).collect()
    }

    /// Sector centers in degrees, uniform over [−180°, 180°].
    pub fn azimuth_centers_deg(&self) -> Vec<f64> {
        let step = 360.0 / self.n_azim as f64;
        (0..self.n_azim).map(|k| -180.0 + step * (k as f64 + 0.5)).collect()
    }

    pub fn index(&self, elev_idx: usize, azim_idx: usize) -> usize {
        elev_idx * self.n_azim + azim_idx
    }
}

pub fn bin_centers(grid: &SunBinGrid) -> Vec<Vec3> {
    let az = grid.azimuth_centers_deg();
    grid.elevation_centers_deg()
        .into_iter()
        .flat_map(|e| {
            az.iter()
                .map(move |a| direction_from_angles(e.to_radians(), a.to_radians()))
        })
        .collect()
}

/// `s_j ∝ exp(κ · sunᵀ l_j)` over the bin centers, normalized to sum to one.
pub fn vmf_target(sun_dir: &Vec3, grid: &SunBinGrid, kappa: f64) -> Result<Vec<f64>> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Contract(format!("kappa must be positive, got {kappa}")));
    }
    let s = sun_dir.normalize();
    let logits: Vec<f64> = bin_centers(grid).iter().map(|c| kappa * s.dot(c)).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

/// Sampling ranges and encoding for synthetic panoramas.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub gamma: f64,
    /// Round to 8-bit levels after gamma encoding.
    pub quantize: bool,
    pub turbidity: (f64, f64),
    /// Exposure is drawn log-uniformly from this range.
    pub exposure: (f64, f64),
    pub sun_elevation_deg: (f64, f64),
    pub spectral: SpectralConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 128,
            gamma: 2.2,
            quantize: false,
            turbidity: (1.0, 10.0),
            exposure: (0.3, 3.0),
            sun_elevation_deg: (5.0, 85.0),
            spectral: SpectralConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPano {
    pub pano: Panorama,
    pub params: SkyParams,
    /// Number of channel values clipped at 1 during encoding.
    pub clipped: usize,
}

/// Gamma-encode an environment map into `[0, 1]`, optionally to 8 bits.
/// Returns the image and the number of clipped channel values.
pub fn encode_ldr(env: &EnvMap, gamma: f64, quantize: bool) -> (RgbImage, usize) {
    let mut clipped = 0;
    let data = env
        .image()
        .data()
        .iter()
        .map(|&v| {
            if v > 1.0 {
                clipped += 1;
            }
            let e = v.clamp(0.0, 1.0).powf(1.0 / gamma);
            if quantize {
                (e * 255.0).round() / 255.0
            } else {
                e
            }
        })
        .collect();
    let img = RgbImage::from_vec(env.width(), env.height(), data).expect("same shape");
    (img, clipped)
}

/// Pixels whose centers are on or above the horizon.
pub fn hemisphere_mask(width: usize, height: usize) -> Mask {
    Mask::from_fn(width, height, |x, y| {
        pixel_to_direction(x as f64, y as f64, width, height).y >= 0.0
    })
}

pub fn sample_sky_params<R: Rng + ?Sized>(rng: &mut R, cfg: &SynthConfig) -> Result<SkyParams> {
    let t = rng.random_range(cfg.turbidity.0..=cfg.turbidity.1);
    let (lo, hi) = (cfg.exposure.0.ln(), cfg.exposure.1.ln());
    let omega = rng.random_range(lo..=hi).exp();
    let elev = rng.random_range(cfg.sun_elevation_deg.0..=cfg.sun_elevation_deg.1);
    let az = rng.random_range(-180.0..180.0);
    SkyParams::from_angles(elev, az, t, omega)
}

/// Render a sky for `params` and encode it as an LDR panorama with a
/// full-sky mask.
pub fn synthesize_pano(params: &SkyParams, cfg: &SynthConfig) -> Result<SyntheticPano> {
    let env = render_envmap(params, cfg.width, cfg.height, &cfg.spectral)?;
    let (img, clipped) = encode_ldr(&env, cfg.gamma, cfg.quantize);
    let mask = hemisphere_mask(cfg.width, cfg.height);
    Ok(SyntheticPano {
        pano: Panorama::new(img, Some(mask))?,
        params: *params,
        clipped,
    })
}

pub fn synthesize_training_pano_with(seed: u64, cfg: &SynthConfig) -> Result<SyntheticPano> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = sample_sky_params(&mut rng, cfg)?;
    synthesize_pano(&params, cfg)
}

/// Random sky with the default sampling ranges, rendered at 256x128.
pub fn synthesize_training_pano(seed: u64) -> Result<SyntheticPano> {
    synthesize_training_pano_with(seed, &SynthConfig::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Fractions of panoramas per split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    /// Proportions of the 261,288 / 1,751 / 8,659 crop split.
    fn default() -> Self {
        let total = 261_288.0 + 1_751.0 + 8_659.0;
        Self {
            train: 261_288.0 / total,
            val: 1_751.0 / total,
            test: 8_659.0 / total,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let s = Self { train, val, test };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::Contract(format!(
                "split fractions must be in [0, 1] and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }

    /// Assign `n` items (already in a random order) to splits.
    pub fn assign(&self, n: usize) -> Vec<Split> {
        let n_train = (self.train * n as f64).round() as usize;
        let n_val = ((self.val * n as f64).round() as usize).min(n - n_train.min(n));
        (0..n)
            .map(|i| {
                if i < n_train {
                    Split::Train
                } else if i < n_train + n_val {
                    Split::Val
                } else {
                    Split::Test
                }
            })
            .collect()
    }
}

/// One crop of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub panorama_id: String,
    pub crop_index: usize,
    /// Path of the PNG crop relative to the dataset directory.
    pub photo_path: String,
    pub camera: CameraParams,
    /// `[ω, t, camera elevation (deg), vertical fov (deg)]`.
    pub params_q: [f64; 4],
    pub sun_target_s: Vec<f64>,
    pub sun_dir_world: [f64; 3],
    /// Sun direction with azimuth measured from the camera's viewing
    /// azimuth; elevation stays relative to the horizon.
    pub sun_dir_camera: [f64; 3],
    pub split: Split,
}

/// Sun direction relative to a camera's viewing azimuth.
pub fn sun_in_camera_frame(sun_world: &Vec3, cam: &CameraParams) -> Vec3 {
    rotate_azimuth(sun_world, -cam.azimuth.to_radians())
}

/// A panorama to turn into crops.
#[derive(Debug, Clone, PartialEq)]
pub struct PanoInput {
    pub id: String,
    pub image: PathBuf,
    pub mask: Option<PathBuf>,
    /// Known sky parameters; the panorama is fitted when absent.
    pub params: Option<PathBuf>,
}

/// Collect inputs from a directory or from a text file listing image paths.
///
/// For an image `name.png` (or `.pfm`), `name_mask.png` is used as its sky
/// mask and `name.params.json` as its known sky parameters, when present.
pub fn discover_inputs(path: &Path) -> Result<Vec<PanoInput>> {
    let images: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                let ext = p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("");
                matches!(ext.as_deref(), Some("png") | Some("pfm")) && !stem.ends_with("_mask")
            })
            .collect();
        v.sort();
        v
    } else {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| base.join(l))
            .collect()
    };
    Ok(images
        .into_iter()
        .map(|image| {
            let stem = image
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("pano")
                .to_string();
            let dir = image.parent().unwrap_or(Path::new(".")).to_path_buf();
            let mask = dir.join(format!("{stem}_mask.png"));
            let params = dir.join(format!("{stem}.params.json"));
            PanoInput {
                id: stem,
                image,
                mask: mask.exists().then_some(mask),
                params: params.exists().then_some(params),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub seed: u64,
    pub crops_per_pano: usize,
    pub splits: SplitFractions,
    pub kappa: f64,
    pub grid: SunBinGrid,
    pub fit: FitConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            crops_per_pano: DEFAULT_CROPS,
            splits: SplitFractions::default(),
            kappa: DEFAULT_KAPPA,
            grid: SunBinGrid::default(),
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPano {
    pub panorama_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub panoramas: Vec<String>,
    pub crops: usize,
}

/// Contents of `SPLITS.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitsFile {
    pub seed: u64,
    pub fractions: SplitFractions,
    pub splits: BTreeMap<Split, SplitSummary>,
    pub skipped: Vec<SkippedPano>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<DatasetRecord>,
    pub splits: SplitsFile,
}

struct Prepared {
    id: String,
    pano: Panorama,
    params: SkyParams,
    seed: u64,
}

fn prepare(input: &PanoInput, seed: u64, cfg: &FitConfig) -> std::result::Result<Prepared, String> {
    let image = io::read_image(&input.image).map_err(|e| format!("unreadable panorama: {e}"))?;
    let mut pano = Panorama::new(image, None).map_err(|e| e.to_string())?;
    if let Some(m) = &input.mask {
        let mask = io::read_mask(m).map_err(|e| format!("unreadable mask: {e}"))?;
        pano = pano.with_mask(mask).map_err(|e| e.to_string())?;
    }
    let params = match &input.params {
        Some(p) => {
            let j: SkyParamsJson = io::read_json(p).map_err(|e| format!("bad parameter file: {e}"))?;
            SkyParams::try_from(j).map_err(|e| format!("bad parameter file: {e}"))?
        }
        None => {
            let mask = sky_mask_for(&pano);
            let fit = fit_sky_params(&pano, &mask, cfg).map_err(|e| format!("fit failed: {e}"))?;
            if !fit.converged {
                return Err("fit did not converge".into());
            }
            fit.params
        }
    };
    Ok(Prepared {
        id: input.id.clone(),
        pano,
        params,
        seed,
    })
}

fn crop_records(
    p: &Prepared,
    out_dir: &Path,
    cfg: &DatasetConfig,
    split: Split,
) -> Result<Vec<DatasetRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let sun = p.params.sun_dir();
    let mut records = Vec::with_capacity(cfg.crops_per_pano);
    for k in 0..cfg.crops_per_pano {
        let cam = sample_camera_with(&mut rng);
        let crop = extract_crop(&p.pano, &cam)?;
        let name = format!("{}_{}.png", p.id, k);
        io::write_png(out_dir.join(&name), &crop)?;
        let sun_cam = sun_in_camera_frame(&sun, &cam);
        records.push(DatasetRecord {
            panorama_id: p.id.clone(),
            crop_index: k,
            photo_path: name,
            camera: cam,
            params_q: [p.params.exposure(), p.params.turbidity(), cam.elevation, cam.vfov],
            sun_target_s: vmf_target(&sun_cam, &cfg.grid, cfg.kappa)?,
            sun_dir_world: [sun.x, sun.y, sun.z],
            sun_dir_camera: [sun_cam.x, sun_cam.y, sun_cam.z],
            split,
        });
    }
    Ok(records)
}

/// Fit (or load parameters for) each panorama, cut crops, and write the
/// PNG crops, `MANIFEST.jsonl` and `SPLITS.json` into `out_dir`.
///
/// Unreadable panoramas and failed fits are skipped and listed in the
/// splits file. Output is a pure function of the inputs and `cfg.seed`.
pub fn build_dataset(
    inputs: &[PanoInput],
    out_dir: &Path,
    cfg: &DatasetConfig,
) -> Result<DatasetManifest> {
    cfg.splits.validate()?;
    if cfg.crops_per_pano == 0 {
        return Err(Error::Contract("crops per panorama must be positive".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut sorted: Vec<&PanoInput> = inputs.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::Contract(format!("duplicate panorama id {}", w[0].id)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = sorted.iter().map(|_| rng.next_u64()).collect();

    let prepared: Vec<std::result::Result<Prepared, SkippedPano>> = sorted
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(input, &seed)| {
            prepare(input, seed, &cfg.fit).map_err(|reason| {
                log::warn!("skipping panorama {}: {reason}", input.id);
                SkippedPano {
                    panorama_id: input.id.clone(),
                    reason,
                }
            })
        })
        .collect();

    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for p in prepared {
        match p {
            Ok(p) => ok.push(p),
            Err(s) => skipped.push(s),
        }
    }

    // Panorama-level split: shuffle ids with the dataset seed.
    let mut order: Vec<usize> = (0..ok.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let assignment = cfg.splits.assign(ok.len());
    let mut split_of = vec![Split::Train; ok.len()];
    for (pos, &idx) in order.iter().enumerate() {
        split_of[idx] = assignment[pos];
    }

    let per_pano: Vec<Vec<DatasetRecord>> = ok
        .par_iter()
        .zip(split_of.par_iter())
        .map(|(p, &split)| crop_records(p, out_dir, cfg, split))
        .collect::<Result<_>>()?;
    let records: Vec<DatasetRecord> = per_pano.into_iter().flatten().collect();

    let mut manifest = String::new();
    for r in &records {
        manifest.push_str(&serde_json::to_string(r)?);
        manifest.push('\n');
    }
    let manifest_path = out_dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;

    let mut splits = BTreeMap::new();
    for s in Split::ALL {
        splits.insert(
            s,
            SplitSummary {
                panoramas: ok
                    .iter()
                    .zip(&split_of)
                    .filter(|(_, sp)| **sp == s)
                    .map(|(p, _)| p.id.clone())
                    .collect(),
                crops: records.iter().filter(|r| r.split == s).count(),
            },
        );
    }
    let splits = SplitsFile {
        seed: cfg.seed,
        fractions: cfg.splits,
        splits,
        skipped,
    };
    io::write_json(out_dir.join(SPLITS_FILE), &splits)?;
    Ok(DatasetManifest { records, splits })
}

/// Read a manifest written by [`build_dataset`].
pub fn read_manifest(path: &Path) -> Result<Vec<DatasetRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

/// Write `n` synthetic panoramas as `synth_NNNNN.png` with full-sky masks
/// and ground-truth parameters in `synth_NNNNN.truth.json`.
pub fn write_synthetic_set(
    out_dir: &Path,
    n: usize,
    seed: u64,
    cfg: &SynthConfig,
) -> Result<Vec<(PathBuf, SkyParams)>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
    seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let synth = synthesize_training_pano_with(s, cfg)?;
            let stem = format!("synth_{i:05}");
            let path = out_dir.join(format!("{stem}.png"));
            io::write_png(&path, synth.pano.image())?;
            io::write_mask(
                out_dir.join(format!("{stem}_mask.png")),
                synth.pano.sky_mask().expect("synthetic panoramas carry a mask"),
            )?;
            io::write_json(out_dir.join(format!("{stem}.truth.json")), &synth.params)?;
            Ok((path, synth.params))
        })
        .collect()
}

/// Angle subtended by two adjacent azimuth bin centers on ring `elev_idx`.
pub fn neighbor_angle(grid: &SunBinGrid, elev_idx: usize) -> f64 {
    let c = bin_centers(grid);
    let a = c[grid.index(elev_idx, 0)];
    let b = c[grid.index(elev_idx, 1)];
    a.dot(&b).clamp(-1.0, 1.0).acos()
}
