//! End-to-end tests of the `stereofuse` binary: file outputs, exit
//! codes, config echo and determinism.

use std::path::Path;
use std::process::{Command, Output};

use stereofuse::field::{DisparityField, SeedPoint, SparsePrior};
use stereofuse::image::GrayImage;
use stereofuse::io;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stereofuse"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn stereofuse")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Small constant-disparity pair with dense-enough seeds for fast runs.
fn write_small_inputs(dir: &Path) {
    use rand::{Rng, SeedableRng};
    let (w, h, d) = (64usize, 48usize, 4i64);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let left = GrayImage::new(w, h, (0..w * h).map(|_| rng.gen::<f32>()).collect()).unwrap();
    let mut right = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            right[y * w + x] = left.at_clamped(x as i64 - d, y as i64);
        }
    }
    let right = GrayImage::new(w, h, right).unwrap();
    io::write_gray_16bit(&dir.join("left.png"), &left).unwrap();
    io::write_gray_16bit(&dir.join("right.png"), &right).unwrap();
    let mut seeds = Vec::new();
    for y in (2..h).step_by(6) {
        for x in (2..w).step_by(6) {
            seeds.push(SeedPoint { x, y, d: d as f64 });
        }
    }
    io::write_prior_csv(&dir.join("prior.csv"), &SparsePrior::new(seeds)).unwrap();
    let mut gt = DisparityField::invalid(w, h);
    for y in 0..h {
        for x in 0..w {
            gt.set(x, y, d as f32);
        }
    }
    io::write_pfm(&dir.join("gt.pfm"), &gt).unwrap();
}

#[test]
fn fuse_writes_pfm_png_json() {
    let tmp = tempfile::tempdir().unwrap();
    write_small_inputs(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = run(bin()
        .args(["fuse", "--range", "0:16", "--dump-masks"])
        .arg("--left")
        .arg(tmp.path().join("left.png"))
        .arg("--right")
        .arg(tmp.path().join("right.png"))
        .arg("--prior")
        .arg(tmp.path().join("prior.csv"))
        .arg("--out")
        .arg(&out_dir));
    assert_exit(&out, 0);
    for f in ["disparity.pfm", "disparity.png", "stats.json", "masks.png", "entropy.png"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("stats.json")).unwrap())
            .unwrap();
    assert_eq!(stats["schema_version"], 1);
    assert!(stats["density_final"].as_f64().unwrap() > 0.99);
    assert_eq!(
        stats["energy_histogram"]["counts"].as_array().unwrap().len(),
        20
    );
    // the fused map is accurate on this trivial scene
    let field = io::read_pfm(&out_dir.join("disparity.pfm")).unwrap();
    let ok = (5..43)
        .flat_map(|y| (8..56).map(move |x| (x, y)))
        .filter(|&(x, y)| (field.get(x, y).unwrap() - 4.0).abs() < 1.0)
        .count();
    assert!(ok > 1500, "only {ok} accurate pixels");
}

#[test]
fn fuse_echoes_param_overrides_in_stats() {
    let tmp = tempfile::tempdir().unwrap();
    write_small_inputs(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = run(bin()
        .args([
            "fuse",
            "--range",
            "0:16",
            "--criterion",
            "emcc",
            "--r",
            "2",
            "--T",
            "0.4",
        ])
        .arg("--left")
        .arg(tmp.path().join("left.png"))
        .arg("--right")
        .arg(tmp.path().join("right.png"))
        .arg("--prior")
        .arg(tmp.path().join("prior.csv"))
        .arg("--out")
        .arg(&out_dir));
    assert_exit(&out, 0);
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("stats.json")).unwrap())
            .unwrap();
    assert_eq!(stats["params"]["criterion"], "emcc");
    assert_eq!(stats["params"]["r"], 2);
    assert_eq!(stats["params"]["t_threshold"], 0.4);
}

#[test]
fn fuse_missing_prior_exits_1_and_names_path() {
    let tmp = tempfile::tempdir().unwrap();
    write_small_inputs(tmp.path());
    let out = run(bin()
        .args(["fuse"])
        .arg("--left")
        .arg(tmp.path().join("left.png"))
        .arg("--right")
        .arg(tmp.path().join("right.png"))
        .arg("--prior")
        .arg(tmp.path().join("no_such_prior.csv"))
        .arg("--out")
        .arg(tmp.path().join("out")));
    assert_exit(&out, 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no_such_prior.csv"), "stderr: {stderr}");
}

#[test]
fn bad_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    write_small_inputs(tmp.path());
    // malformed range
    let out = run(bin()
        .args(["fuse", "--range", "whoops"])
        .arg("--left")
        .arg(tmp.path().join("left.png"))
        .arg("--right")
        .arg(tmp.path().join("right.png"))
        .arg("--prior")
        .arg(tmp.path().join("prior.csv"))
        .arg("--out")
        .arg(tmp.path().join("out")));
    assert_exit(&out, 2);
    // bad key in config file
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "no_such_key=1\n").unwrap();
    let out = run(bin()
        .args(["fuse"])
        .arg("--config")
        .arg(&cfg)
        .arg("--left")
        .arg(tmp.path().join("left.png"))
        .arg("--right")
        .arg(tmp.path().join("right.png"))
        .arg("--prior")
        .arg(tmp.path().join("prior.csv"))
        .arg("--out")
        .arg(tmp.path().join("out")));
    assert_exit(&out, 2);
}

#[test]
fn simulate_writes_scene_files_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let out = run(bin()
            .args(["simulate", "--scene", "two_planes", "--seed", "7"])
            .arg("--out")
            .arg(tmp.path().join(sub)));
        assert_exit(&out, 0);
    }
    for f in ["left.png", "right.png", "prior.csv", "gt.pfm"] {
        assert!(tmp.path().join("a").join(f).is_file(), "missing {f}");
    }
    let a = std::fs::read(tmp.path().join("a/prior.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/prior.csv")).unwrap();
    assert_eq!(a, b, "prior.csv differs between identical seeds");

    // seed grid size: ceil(320/10) * ceil(240/10) minus occlusion-invalid rows
    let text = String::from_utf8(a).unwrap();
    let rows = text.lines().count() - 1; // header
    assert!(rows <= 32 * 24);
    assert!(rows > 32 * 24 - 100, "unexpected seed count {rows}");
}

#[test]
fn simulate_degrades_external_gt() {
    let tmp = tempfile::tempdir().unwrap();
    write_small_inputs(tmp.path());
    let out = run(bin()
        .args(["simulate", "--factor", "8", "--sigma", "0", "--bias", "0"])
        .arg("--gt")
        .arg(tmp.path().join("gt.pfm"))
        .arg("--out")
        .arg(tmp.path().join("sim")));
    assert_exit(&out, 0);
    let prior = io::read_prior(&tmp.path().join("sim/prior.csv")).unwrap();
    assert_eq!(prior.len(), 8 * 6); // 64/8 x 48/8 grid
    assert!(prior.entries.iter().all(|s| (s.d - 4.0).abs() < 1e-4));
}

#[test]
fn eval_identity_is_zero_and_has_three_deltas() {
    let tmp = tempfile::tempdir().unwrap();
    write_small_inputs(tmp.path());
    let out = run(bin()
        .args(["eval", "--delta", "0.5,1,2"])
        .arg("--result")
        .arg(tmp.path().join("gt.pfm"))
        .arg("--gt")
        .arg(tmp.path().join("gt.pfm")));
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("eval prints JSON");
    let bmp = report["bmp"].as_array().unwrap();
    assert_eq!(bmp.len(), 3);
    for entry in bmp {
        assert_eq!(entry["percent"].as_f64().unwrap(), 0.0);
    }
    assert_eq!(report["mse"].as_f64().unwrap(), 0.0);
}

#[test]
fn eval_mismatched_sizes_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    write_small_inputs(tmp.path());
    let mut small = DisparityField::invalid(8, 8);
    small.set(0, 0, 1.0);
    io::write_pfm(&tmp.path().join("small.pfm"), &small).unwrap();
    let out = run(bin()
        .args(["eval"])
        .arg("--result")
        .arg(tmp.path().join("small.pfm"))
        .arg("--gt")
        .arg(tmp.path().join("gt.pfm")));
    assert_exit(&out, 1);
}

#[test]
fn masks_writes_visualizations() {
    let tmp = tempfile::tempdir().unwrap();
    write_small_inputs(tmp.path());
    let out_dir = tmp.path().join("m");
    let out = run(bin()
        .args(["masks", "--range", "0:16"])
        .arg("--left")
        .arg(tmp.path().join("left.png"))
        .arg("--right")
        .arg(tmp.path().join("right.png"))
        .arg("--prior")
        .arg(tmp.path().join("prior.csv"))
        .arg("--out")
        .arg(&out_dir));
    assert_exit(&out, 0);
    for f in ["masks.png", "entropy.png", "d0_left.pfm", "d0_left.png"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
}

#[test]
fn fuse_is_bit_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    write_small_inputs(tmp.path());
    let mut outputs = Vec::new();
    for (sub, threads) in [("t1", "1"), ("t4", "4")] {
        let out_dir = tmp.path().join(sub);
        let out = run(bin()
            .env("FUSE_THREADS", threads)
            .args(["fuse", "--range", "0:16"])
            .arg("--left")
            .arg(tmp.path().join("left.png"))
            .arg("--right")
            .arg(tmp.path().join("right.png"))
            .arg("--prior")
            .arg(tmp.path().join("prior.csv"))
            .arg("--out")
            .arg(&out_dir));
        assert_exit(&out, 0);
        outputs.push(std::fs::read(out_dir.join("disparity.pfm")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "PFM depends on FUSE_THREADS");
}
