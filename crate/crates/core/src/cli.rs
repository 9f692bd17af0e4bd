//! The `skyfit` command line. Angles are in degrees at this boundary.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::dataset::{
    build_dataset, discover_inputs, write_synthetic_set, DatasetConfig, SplitFractions,
    SynthConfig, MANIFEST_FILE, SPLITS_FILE,
};
use crate::eval::{metric_report, render_lambertian, sun_error_stats, Mesh, RenderSetup, Shape};
use crate::fitting::{fit_sky_params, fit_with_sun, sky_mask_for, FitConfig};
use crate::geometry::{direction_from_angles, extract_crop, sample_camera, CameraParams, Panorama};
use crate::image::Mask;
use crate::io;
use crate::sky::{render_envmap_with, EnvMap, RenderOptions, SkyParams, SpectralConfig};
use crate::{Error, Result, Vec3};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Parser, Debug, Serialize)]
#[command(name = "skyfit", version, about = "Sky model synthesis, fitting and relighting")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for batch work.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// One of error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "info")]
    #[serde(serialize_with = "serialize_display")]
    pub log_level: log::LevelFilter,
    /// File of `key = value` lines; each key is a long flag name and
    /// explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print a JSON summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Exit with status 2 when a fit does not converge.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

fn serialize_display<S: serde::Serializer>(v: &log::LevelFilter, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Render an HDR sky environment map.
    Render(RenderArgs),
    /// Fit sun direction, turbidity and exposure to a panorama.
    Fit(FitArgs),
    /// Cut a pinhole crop out of a panorama.
    Extract(ExtractArgs),
    /// Build crop datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Render a Lambertian object lit by an environment map.
    Relight(RelightArgs),
    /// Compare two images with RMSE and scale-invariant RMSE.
    Metrics(MetricsArgs),
    /// Sun position error statistics.
    Stats(StatsArgs),
    /// Write synthetic LDR panoramas with their true parameters.
    Synth(SynthArgs),
}

#[derive(Subcommand, Debug, Serialize)]
pub enum DatasetCommand {
    /// Fit panoramas, cut crops and write MANIFEST.jsonl and SPLITS.json.
    Build(DatasetArgs),
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let w = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    Ok((w, h))
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| format!("expected x,y,z, got {s:?}"))?;
    <[f64; 3]>::try_from(v).map_err(|_| format!("expected three components, got {s:?}"))
}

#[derive(Args, Debug, Serialize)]
pub struct RenderArgs {
    #[arg(long)]
    pub turbidity: f64,
    /// Sun elevation above the horizon in degrees.
    #[arg(long)]
    pub sun_elev: f64,
    /// Sun azimuth in degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub sun_az: f64,
    #[arg(long, default_value_t = 1.0)]
    pub exposure: f64,
    #[arg(long, value_parser = parse_size, default_value = "512x256")]
    pub size: (usize, usize),
    /// Average 4x4 sub-pixel samples.
    #[arg(long)]
    pub supersample: bool,
    /// Output path; `.pfm` for HDR, anything else is written as PNG.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub pano: PathBuf,
    /// Sky mask PNG; a color heuristic is used without one.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 2.2)]
    pub gamma: f64,
    #[arg(long, default_value_t = 98.0)]
    pub sun_percentile: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Hold the sun at this elevation (degrees) instead of detecting it.
    #[arg(long, requires = "sun_az")]
    pub sun_elev: Option<f64>,
    #[arg(long, requires = "sun_elev", allow_hyphen_values = true)]
    pub sun_az: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct ExtractArgs {
    #[arg(long)]
    pub pano: PathBuf,
    /// Camera elevation in degrees; sampled from the seed when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub elev: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub az: Option<f64>,
    #[arg(long)]
    pub vfov: Option<f64>,
    #[arg(long, value_parser = parse_size, default_value = "320x240")]
    pub size: (usize, usize),
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the camera parameters as JSON.
    #[arg(long)]
    pub camera_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct DatasetArgs {
    /// Directory of panoramas, or a text file listing them.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = crate::dataset::DEFAULT_CROPS)]
    pub crops: usize,
    #[arg(long, default_value_t = crate::dataset::DEFAULT_KAPPA)]
    pub kappa: f64,
    /// Relative split sizes as train,val,test.
    #[arg(long, value_parser = parse_vec3)]
    pub splits: Option<[f64; 3]>,
    #[arg(long, default_value_t = 2.2)]
    pub gamma: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct RelightArgs {
    #[arg(long)]
    pub env: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Triangle mesh (OBJ) to render instead of the unit sphere.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    pub albedo: f64,
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    /// Direction from the object toward the camera, as x,y,z.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,1", allow_hyphen_values = true)]
    pub view: [f64; 3],
    /// Write the foreground mask as PNG.
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct MetricsArgs {
    /// Estimate.
    #[arg(long)]
    pub a: PathBuf,
    /// Reference.
    #[arg(long)]
    pub b: PathBuf,
    /// Pixels to score; defaults to pixels non-black in either image.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct StatsArgs {
    /// CSV with columns pred_elevation_deg, pred_azimuth_deg,
    /// true_elevation_deg, true_azimuth_deg.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Binned quartiles as CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Error CDF as CSV.
    #[arg(long)]
    pub cdf: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, value_parser = parse_size, default_value = "256x128")]
    pub size: (usize, usize),
    /// Round to 8-bit levels.
    #[arg(long)]
    pub quantize: bool,
    /// Also write `{name}.params.json` so `dataset build` skips fitting.
    #[arg(long)]
    pub known_params: bool,
}

/// Entries of a `key = value` config file as command line tokens.
fn config_tokens(path: &Path) -> Result<Vec<OsString>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::format(path, e.message()))?;
    let mut out = Vec::new();
    for (key, value) in table {
        if key == "config" {
            return Err(Error::format(path, "config files cannot include other config files"));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => out.extend([flag.into(), s.into()]),
            toml::Value::Integer(i) => out.extend([flag.into(), i.to_string().into()]),
            toml::Value::Float(f) => out.extend([flag.into(), f.to_string().into()]),
            other => {
                return Err(Error::format(path, format!("unsupported value for {key}: {other}")))
            }
        }
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Insert config-file tokens right after the subcommand so that later
/// explicit flags override them.
fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let tokens = config_tokens(&path)?;
    let names = ["render", "fit", "extract", "dataset", "relight", "metrics", "stats", "synth"];
    let Some(mut pos) = args.iter().position(|a| names.contains(&a.to_string_lossy().as_ref())) else {
        return Ok(args);
    };
    if args[pos] == "dataset" && args.get(pos + 1).is_some_and(|a| a == "build") {
        pos += 1;
    }
    let mut merged = args[..=pos].to_vec();
    merged.extend(tokens);
    merged.extend_from_slice(&args[pos + 1..]);
    Ok(merged)
}

/// Run the command line and return the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .try_init();
    log::info!(
        "resolved config: {}",
        serde_json::to_string(&cli).unwrap_or_else(|_| format!("{cli:?}"))
    );
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_INPUT;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(Outcome { summary, converged }) => {
            if cli.json {
                println!("{summary}");
            }
            if !converged {
                log::warn!("fit did not converge");
                if cli.strict {
                    return EXIT_NUMERICAL;
                }
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Degenerate(_) => EXIT_NUMERICAL,
                _ => EXIT_INPUT,
            }
        }
    }
}

struct Outcome {
    summary: serde_json::Value,
    converged: bool,
}

impl Outcome {
    fn ok(summary: serde_json::Value) -> Self {
        Self {
            summary,
            converged: true,
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Render(a) => render(a),
        Command::Fit(a) => fit(a),
        Command::Extract(a) => extract(a, cli.seed),
        Command::Dataset(DatasetCommand::Build(a)) => dataset(a, cli.seed),
        Command::Relight(a) => relight(a),
        Command::Metrics(a) => metrics(a),
        Command::Stats(a) => stats(a),
        Command::Synth(a) => synth(a, cli.seed),
    }
}

fn render(a: &RenderArgs) -> Result<Outcome> {
    let (w, h) = a.size;
    let params = SkyParams::from_angles(a.sun_elev, a.sun_az, a.turbidity, a.exposure)?;
    let opts = RenderOptions {
        supersample: a.supersample,
    };
    let env = render_envmap_with(&params, w, h, &SpectralConfig::default(), opts)?;
    io::write_image(&a.out, env.image())?;
    log::info!("wrote {}x{} environment map to {}", w, h, a.out.display());
    Ok(Outcome::ok(json!({
        "out": a.out,
        "width": w,
        "height": h,
        "params": params.to_json(),
    })))
}

fn load_pano(path: &Path, mask: Option<&Path>) -> Result<Panorama> {
    let pano = Panorama::new(io::read_image(path)?, None)?;
    match mask {
        Some(m) => pano.with_mask(io::read_mask(m)?),
        None => Ok(pano),
    }
}

fn fit(a: &FitArgs) -> Result<Outcome> {
    let pano = load_pano(&a.pano, a.mask.as_deref())?;
    let mask = sky_mask_for(&pano);
    let cfg = FitConfig {
        gamma: a.gamma,
        sun_percentile: a.sun_percentile,
        max_iters: a.max_iters,
        ..FitConfig::default()
    };
    let result = match (a.sun_elev, a.sun_az) {
        (Some(e), Some(az)) => {
            let sun = direction_from_angles(e.to_radians(), az.to_radians());
            fit_with_sun(&pano, &mask, &sun, &cfg)?
        }
        _ => fit_sky_params(&pano, &mask, &cfg)?,
    };
    let out = result.to_json();
    log::info!(
        "sun elevation {:.3}°, azimuth {:.3}°, turbidity {:.4}, exposure {:.5}, rmse {:.3e}",
        out.sun_elevation_deg,
        out.sun_azimuth_deg,
        out.turbidity,
        out.exposure,
        out.residual_rmse
    );
    if let Some(path) = &a.out {
        io::write_json(path, &out)?;
    }
    Ok(Outcome {
        summary: serde_json::to_value(&out)?,
        converged: result.converged,
    })
}

fn extract(a: &ExtractArgs, seed: u64) -> Result<Outcome> {
    let pano = load_pano(&a.pano, None)?;
    let sampled = sample_camera(seed);
    let cam = CameraParams {
        elevation: a.elev.unwrap_or(sampled.elevation),
        azimuth: a.az.unwrap_or(sampled.azimuth),
        vfov: a.vfov.unwrap_or(sampled.vfov),
        out_width: a.size.0,
        out_height: a.size.1,
    };
    let crop = extract_crop(&pano, &cam)?;
    io::write_image(&a.out, &crop)?;
    if let Some(p) = &a.camera_out {
        io::write_json(p, &cam)?;
    }
    Ok(Outcome::ok(json!({ "out": a.out, "camera": cam })))
}

fn dataset(a: &DatasetArgs, seed: u64) -> Result<Outcome> {
    let inputs = discover_inputs(&a.input)?;
    if inputs.is_empty() {
        return Err(Error::Contract(format!("no panoramas found in {}", a.input.display())));
    }
    let splits = match a.splits {
        Some([tr, va, te]) => SplitFractions::new(tr, va, te)?,
        None => SplitFractions::default(),
    };
    let cfg = DatasetConfig {
        seed,
        crops_per_pano: a.crops,
        splits,
        kappa: a.kappa,
        fit: FitConfig {
            gamma: a.gamma,
            ..FitConfig::default()
        },
        ..DatasetConfig::default()
    };
    let manifest = build_dataset(&inputs, &a.out, &cfg)?;
    for s in &manifest.splits.skipped {
        log::warn!("skipped {}: {}", s.panorama_id, s.reason);
    }
    log::info!(
        "{} crops from {} panoramas written to {}",
        manifest.records.len(),
        inputs.len() - manifest.splits.skipped.len(),
        a.out.display()
    );
    Ok(Outcome::ok(json!({
        "manifest": a.out.join(MANIFEST_FILE),
        "splits_file": a.out.join(SPLITS_FILE),
        "crops": manifest.records.len(),
        "splits": manifest.splits.splits,
        "skipped": manifest.splits.skipped,
    })))
}

fn relight(a: &RelightArgs) -> Result<Outcome> {
    let env = EnvMap::new(io::read_image(&a.env)?)?;
    let shape = match &a.mesh {
        Some(p) => Shape::Mesh(Mesh::load_obj(p)?),
        None => Shape::Sphere,
    };
    let setup = RenderSetup {
        shape,
        albedo: [a.albedo; 3],
        view: Vec3::from(a.view),
        width: a.size,
        height: a.size,
    };
    let r = render_lambertian(&env, &setup)?;
    io::write_image(&a.out, &r.image)?;
    if let Some(p) = &a.mask_out {
        io::write_mask(p, &r.mask)?;
    }
    Ok(Outcome::ok(json!({
        "out": a.out,
        "foreground_pixels": r.mask.count(),
    })))
}

fn metrics(a: &MetricsArgs) -> Result<Outcome> {
    let ia = io::read_image(&a.a)?;
    let ib = io::read_image(&a.b)?;
    let mask = match &a.mask {
        Some(p) => io::read_mask(p)?,
        None if ia.same_shape(&ib) => {
            let lit = |px: [f64; 3]| px.iter().any(|c| *c != 0.0);
            Mask::from_fn(ia.width(), ia.height(), |x, y| lit(ia.get(x, y)) || lit(ib.get(x, y)))
        }
        None => Mask::new(ia.width(), ia.height(), true),
    };
    let report = metric_report(&ia, &ib, Some(&mask))?;
    log::info!(
        "rmse {:.6e}, si-rmse {:.6e}, per-color si-rmse {:.6e} over {} pixels",
        report.rmse,
        report.si_rmse,
        report.per_color_si_rmse,
        report.pixels
    );
    if let Some(p) = &a.out {
        io::write_json(p, &report)?;
    }
    Ok(Outcome::ok(serde_json::to_value(&report)?))
}

#[derive(serde::Deserialize)]
struct PairRow {
    pred_elevation_deg: f64,
    pred_azimuth_deg: f64,
    true_elevation_deg: f64,
    true_azimuth_deg: f64,
}

fn stats(a: &StatsArgs) -> Result<Outcome> {
    let path = &a.pairs;
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    for (i, row) in reader.deserialize::<PairRow>().enumerate() {
        let r = row.map_err(|e| Error::format(path, format!("row {}: {e}", i + 1)))?;
        let dir = |e: f64, az: f64| direction_from_angles(e.to_radians(), az.to_radians());
        pred.push(dir(r.pred_elevation_deg, r.pred_azimuth_deg));
        truth.push(dir(r.true_elevation_deg, r.true_azimuth_deg));
    }
    let s = sun_error_stats(&pred, &truth)?;
    s.write_csv(&a.out)?;
    if let Some(p) = &a.cdf {
        s.write_cdf_csv(p)?;
    }
    log::info!(
        "{} pairs: median {:.3}°, quartiles {:.3}° / {:.3}°",
        s.overall.count,
        s.overall.p50,
        s.overall.p25,
        s.overall.p75
    );
    Ok(Outcome::ok(json!({
        "overall": s.overall,
        "by_elevation": s.by_elevation,
        "by_azimuth": s.by_azimuth,
    })))
}

fn synth(a: &SynthArgs, seed: u64) -> Result<Outcome> {
    let cfg = SynthConfig {
        width: a.size.0,
        height: a.size.1,
        quantize: a.quantize,
        ..SynthConfig::default()
    };
    let written = write_synthetic_set(&a.out, a.count, seed, &cfg)?;
    if a.known_params {
        for (path, params) in &written {
            io::write_json(path.with_extension("params.json"), params)?;
        }
    }
    Ok(Outcome::ok(json!({
        "out": a.out,
        "panoramas": written.iter().map(|(p, _)| p).collect::<Vec<_>>(),
    })))
}
