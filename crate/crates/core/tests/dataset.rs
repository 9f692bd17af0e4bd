use std::collections::HashSet;
use std::fs;
use std::path::Path;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyfit::dataset::*;
use skyfit::geometry::{direction_angles, direction_from_angles, CameraParams};
use skyfit::io;
use skyfit::Vec3;

fn upper_unit(rng: &mut impl Rng) -> Vec3 {
    direction_from_angles(
        rng.random_range(0.0f64..90.0).to_radians(),
        rng.random_range(-180.0f64..180.0).to_radians(),
    )
}

/// Synthetic panoramas with their parameters stored next to them, so the
/// builder reads them instead of fitting.
fn synthetic_inputs(dir: &Path, n: usize, seed: u64) -> Vec<PanoInput> {
    let cfg = SynthConfig {
        width: 128,
        height: 64,
        ..SynthConfig::default()
    };
    for (path, params) in write_synthetic_set(dir, n, seed, &cfg).unwrap() {
        io::write_json(path.with_extension("params.json"), &params.to_json()).unwrap();
    }
    discover_inputs(dir).unwrap()
}

#[test]
fn bin_grid_layout() {
    let grid = SunBinGrid::default();
    let c = bin_centers(&grid);
    assert_eq!(c.len(), 160);
    assert_eq!(grid.elevation_centers_deg(), vec![9.0, 27.0, 45.0, 63.0, 81.0]);
    let min_y = 9.0f64.to_radians().sin();
    assert!(c.iter().all(|d| d.y >= min_y - 1e-12 && (d.norm() - 1.0).abs() < 1e-12));
    for ring in 0..5 {
        for k in 0..31 {
            let (_, a0) = direction_angles(&c[grid.index(ring, k)]);
            let (_, a1) = direction_angles(&c[grid.index(ring, k + 1)]);
            assert!(((a1 - a0).to_degrees() - 11.25).abs() < 1e-9);
        }
    }
}

#[test]
fn vmf_target_sums_to_one() {
    let grid = SunBinGrid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let s = vmf_target(&upper_unit(&mut rng), &grid, DEFAULT_KAPPA).unwrap();
        assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(s.iter().all(|&p| p >= 0.0));
    }
}

#[test]
fn vmf_argmax_at_sun_bin() {
    let grid = SunBinGrid::default();
    let centers = bin_centers(&grid);
    for (j, c) in centers.iter().enumerate() {
        let s = vmf_target(c, &grid, DEFAULT_KAPPA).unwrap();
        let argmax = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert_eq!(argmax, j);
    }
}

#[test]
fn vmf_neighbor_ratio_matches_direct_evaluation() {
    let grid = SunBinGrid::default();
    let centers = bin_centers(&grid);
    let (a, b) = (grid.index(0, 12), grid.index(0, 13));
    let s = vmf_target(&centers[a], &grid, 80.0).unwrap();
    let delta = centers[a].dot(&centers[b]).clamp(-1.0, 1.0).acos();
    let expected = (80.0 * (1.0 - delta.cos())).exp();
    assert!(((s[a] / s[b]) / expected - 1.0).abs() <= 1e-9);
    assert!((neighbor_angle(&grid, 0) - delta).abs() < 1e-12);
}

#[test]
fn vmf_rejects_bad_kappa() {
    assert!(vmf_target(&Vec3::y(), &SunBinGrid::default(), 0.0).is_err());
}

#[test]
fn camera_frame_rotation() {
    let sun = direction_from_angles(0.6, 1.1);
    let base = CameraParams {
        azimuth: 10.0,
        ..CameraParams::default()
    };
    let (e0, a0) = direction_angles(&sun_in_camera_frame(&sun, &base));
    for delta in [-70.0, 15.0, 90.0] {
        let cam = CameraParams {
            azimuth: base.azimuth + delta,
            ..base
        };
        let (e1, a1) = direction_angles(&sun_in_camera_frame(&sun, &cam));
        assert!((e1 - e0).abs() < 1e-12);
        let d = (a1 - a0 + f64::to_radians(delta)).rem_euclid(std::f64::consts::TAU);
        assert!(d.min(std::f64::consts::TAU - d) < 1e-12);
    }
    // sun straight ahead of the camera has zero relative azimuth
    let ahead = sun_in_camera_frame(&direction_from_angles(0.2, base.azimuth.to_radians()), &base);
    assert!(direction_angles(&ahead).1.abs() < 1e-12);
}

#[test]
fn synthesis_is_deterministic_and_ldr() {
    let a = synthesize_training_pano(17).unwrap();
    let b = synthesize_training_pano(17).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.pano.image(), b.pano.image());
    assert!(a.pano.is_ldr());
    let e = a.params.sun_elevation().to_degrees();
    assert!((5.0..=85.0).contains(&e));
    assert!((0.3..=3.0).contains(&a.params.exposure()));
}

#[test]
fn build_ten_panoramas() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = synthetic_inputs(&tmp.path().join("in"), 10, 3);
    assert_eq!(inputs.len(), 10);
    let cfg = DatasetConfig {
        seed: 11,
        splits: SplitFractions::new(0.6, 0.2, 0.2).unwrap(),
        ..DatasetConfig::default()
    };
    let out = tmp.path().join("out");
    let m = build_dataset(&inputs, &out, &cfg).unwrap();
    assert_eq!(m.records.len(), 70);
    assert!(m.splits.skipped.is_empty());

    let mut split_sets: Vec<HashSet<&str>> = Vec::new();
    for s in Split::ALL {
        split_sets.push(
            m.records.iter().filter(|r| r.split == s).map(|r| r.panorama_id.as_str()).collect(),
        );
    }
    for i in 0..3 {
        for j in i + 1..3 {
            assert!(split_sets[i].is_disjoint(&split_sets[j]));
        }
    }
    assert_eq!(split_sets.iter().map(HashSet::len).sum::<usize>(), 10);

    let centers = bin_centers(&cfg.grid);
    for r in &m.records {
        r.camera.validate().unwrap();
        let img = io::read_png(out.join(&r.photo_path)).unwrap();
        assert_eq!((img.width(), img.height()), (320, 240));
        assert!((r.sun_target_s.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let argmax = (0..160).max_by(|&a, &b| r.sun_target_s[a].total_cmp(&r.sun_target_s[b])).unwrap();
        let cam_sun = Vec3::from(r.sun_dir_camera);
        assert!(centers[argmax].dot(&cam_sun) > 0.0);
        assert_eq!(r.params_q[2], r.camera.elevation);
        assert_eq!(r.params_q[3], r.camera.vfov);
    }
    assert_eq!(read_manifest(&out.join(MANIFEST_FILE)).unwrap(), m.records);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = synthetic_inputs(&tmp.path().join("in"), 4, 8);
    let cfg = DatasetConfig {
        seed: 2,
        splits: SplitFractions::new(0.5, 0.25, 0.25).unwrap(),
        ..DatasetConfig::default()
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    build_dataset(&inputs, &a, &cfg).unwrap();
    build_dataset(&inputs, &b, &cfg).unwrap();
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4 * 7 + 2);
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn unreadable_panorama_is_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let mut inputs = synthetic_inputs(&tmp.path().join("in"), 2, 1);
    inputs.push(PanoInput {
        id: "zz_missing".into(),
        image: tmp.path().join("nope.png"),
        mask: None,
        params: None,
    });
    let m = build_dataset(&inputs, &tmp.path().join("out"), &DatasetConfig::default()).unwrap();
    assert_eq!(m.records.len(), 14);
    assert_eq!(m.splits.skipped.len(), 1);
    assert_eq!(m.splits.skipped[0].panorama_id, "zz_missing");
}

#[test]
fn panoramas_without_parameters_are_fitted() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("in");
    let cfg = SynthConfig {
        width: 128,
        height: 64,
        ..SynthConfig::default()
    };
    write_synthetic_set(&dir, 1, 4, &cfg).unwrap();
    let inputs = discover_inputs(&dir).unwrap();
    assert!(inputs[0].params.is_none() && inputs[0].mask.is_some());
    let m = build_dataset(&inputs, &tmp.path().join("out"), &DatasetConfig::default()).unwrap();
    assert_eq!(m.records.len(), 7);
}

#[test]
fn invalid_split_fractions_are_rejected() {
    assert!(SplitFractions::new(0.5, 0.5, 0.5).is_err());
    let d = SplitFractions::default();
    assert!((d.train + d.val + d.test - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vmf_target_is_a_distribution(elev in 0.0f64..90.0, az in -180.0f64..180.0, kappa in 1.0f64..500.0) {
        let sun = direction_from_angles(elev.to_radians(), az.to_radians());
        let s = vmf_target(&sun, &SunBinGrid::default(), kappa).unwrap();
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(s.iter().all(|p| p.is_finite() && *p >= 0.0));
    }
}
