use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ddbridge_core::data::{read_manifest, read_volume, write_volume, Split};
use ddbridge_core::metrics::{ms_ssim_volume, MsSsimConfig};

fn ddbridge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddbridge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    /// Ten phantom pairs at 32^3 plus a config with a short training run.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let f = Fixture { _dir: dir, root };
        f.write_config("run.toml", 0.0, "", "");
        ok(&ddbridge(&["phantom", "--count", "10", "--out", f.path("data").to_str().unwrap(), "--quiet"]));
        f
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// `paths_extra` lands in the `[paths]` table; `tables` is appended
    /// after it.
    fn write_config(&self, name: &str, eta: f64, paths_extra: &str, tables: &str) -> String {
        let text = format!(
            "[train]\nsteps = 30\nbatch_size = 4\nlearning_rate = 0.05\nhidden_width = 8\nchunks_per_item = 32\n\
             [sample]\nsteps = 8\neta = {eta:?}\n\
             [metrics.ms_ssim]\nwindow = 7\n\
             [paths]\nmanifest = \"data/manifest.csv\"\noutput_dir = \"out\"\n{paths_extra}\n{tables}"
        );
        let path = self.path(name);
        fs::write(&path, text).unwrap();
        path.to_str().unwrap().to_string()
    }

    fn config(&self) -> String {
        self.path("run.toml").to_str().unwrap().to_string()
    }

    fn test_ids(&self) -> Vec<String> {
        read_manifest(self.path("data/manifest.csv"))
            .unwrap()
            .into_iter()
            .filter(|r| r.split == Split::Test)
            .map(|r| r.subject_id)
            .collect()
    }
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn phantom_is_deterministic_and_split_by_default_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&ddbridge(&["phantom", "--count", "20", "--seed", "4", "--out", d.to_str().unwrap(), "--quiet"]));
    }
    let (ta, tb) = (tree_bytes(&a), tree_bytes(&b));
    assert_eq!(ta.len(), 41);
    assert_eq!(ta, tb);

    let rows = read_manifest(a.join("manifest.csv")).unwrap();
    let count = |s: Split| rows.iter().filter(|r| r.split == s).count();
    assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (14, 3, 3));
    let v = read_volume(a.join(&rows[0].t1_path)).unwrap();
    assert_eq!(v.shape(), [32, 32, 32]);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(ddbridge(&["phantom", "--count", "0", "--out", out]).status.code(), Some(1));
    assert_eq!(ddbridge(&["phantom", "--shape", "32,32"]).status.code(), Some(1));
    assert_eq!(ddbridge(&["frobnicate"]).status.code(), Some(1));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[train]\nlearnin_rate = 1.0\n").unwrap();
    assert_eq!(ddbridge(&["train", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(ddbridge(&["--version"]).status.code(), Some(0));
}

#[test]
fn phantom_below_minimum_extent_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddbridge(&["phantom", "--shape", "16,16,16", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn training_writes_a_reproducible_loss_trace() {
    let f = Fixture::new();
    ok(&ddbridge(&["train", "--config", &f.config(), "--quiet"]));
    let trace = fs::read_to_string(f.path("out/train_loss.csv")).unwrap();
    let model = fs::read(f.path("out/model.json")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "step,loss");
    assert_eq!(lines.len(), 31);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() >= 0.0));

    ok(&ddbridge(&["train", "--config", &f.config(), "--quiet"]));
    assert_eq!(fs::read_to_string(f.path("out/train_loss.csv")).unwrap(), trace);
    assert_eq!(fs::read(f.path("out/model.json")).unwrap(), model);
}

#[test]
fn translate_without_a_model_is_a_data_error() {
    let f = Fixture::new();
    let out = ddbridge(&["translate", "--config", &f.config()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn translate_refuses_a_mismatched_model() {
    let f = Fixture::new();
    ok(&ddbridge(&["train", "--config", &f.config(), "--quiet"]));
    let other = f.write_config("other.toml", 0.0, "", "[schedule]\ngamma_max = 0.25\n");
    assert_eq!(ddbridge(&["translate", "--config", &other]).status.code(), Some(1));
    let flipped = ddbridge(&["translate", "--config", &f.config(), "--direction", "fa-to-t1"]);
    assert_eq!(flipped.status.code(), Some(1));
}

#[test]
fn deterministic_and_stochastic_translation() {
    let f = Fixture::new();
    ok(&ddbridge(&["train", "--config", &f.config(), "--quiet"]));
    let ids = f.test_ids();
    assert_eq!(ids.len(), 1);
    let synthetic = |dir: &str| f.path(dir).join("synthetic").join(format!("{}_synthetic.bvol", ids[0]));

    // --out moves the default model location as well, so pin it
    let model = format!("model = {:?}", f.path("out/model.json"));
    let ode = f.write_config("ode.toml", 0.0, &model, "");
    for dir in ["ode_a", "ode_b"] {
        let out = f.path(dir);
        ok(&ddbridge(&["translate", "--config", &ode, "--out", out.to_str().unwrap(), "--quiet"]));
    }
    assert_eq!(fs::read(synthetic("ode_a")).unwrap(), fs::read(synthetic("ode_b")).unwrap());

    let sde = f.write_config("sde.toml", 1.0, &model, "");
    let mut vols = Vec::new();
    for seed in ["1", "2"] {
        let out = f.path(&format!("sde_{seed}"));
        ok(&ddbridge(&["translate", "--config", &sde, "--seed", seed, "--out", out.to_str().unwrap(), "--quiet"]));
        vols.push(read_volume(synthetic(&format!("sde_{seed}"))).unwrap());
    }
    assert_ne!(vols[0].voxels(), vols[1].voxels());
    // the spread threshold needs a fully trained model and is checked by
    // the phantom pipeline in the acceptance suite
    let s = ms_ssim_volume(&vols[0], &vols[1], &MsSsimConfig::default().with_window(7)).unwrap();
    assert!(s > 0.0 && s < 1.0, "pairwise MS-SSIM {s}");
}

#[test]
fn evaluating_copies_of_the_target_scores_perfectly() {
    let f = Fixture::new();
    let rows = read_manifest(f.path("data/manifest.csv")).unwrap();
    fs::create_dir_all(f.path("out/synthetic")).unwrap();
    for row in rows.iter().filter(|r| r.split == Split::Test) {
        let fa = read_volume(f.path("data").join(&row.fa_path)).unwrap();
        write_volume(&fa, f.path("out/synthetic").join(format!("{}_synthetic.bvol", row.subject_id))).unwrap();
    }
    let stdout = ok(&ddbridge(&["evaluate", "--config", &f.config(), "--quiet"]));
    let value = |key: &str| -> f64 {
        stdout
            .lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap_or_else(|| panic!("{key} missing from\n{stdout}"))
            .trim()
            .parse()
            .unwrap()
    };
    assert!((value("mean_ms_ssim_3d") - 1.0).abs() < 1e-6);
    assert_eq!(value("mean_psnr_db"), 100.0);
    assert!(value("mean_mmd").abs() < 1e-12);

    for id in f.test_ids() {
        for axis in ["sagittal", "coronal", "axial"] {
            let path = f.path("out/eval").join(format!("{id}_slices_{axis}.csv"));
            let mut reader = csv::Reader::from_path(&path).unwrap();
            let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
            assert_eq!(header, ["axis", "slice_index", "ms_ssim", "degenerate_flag"]);
            let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
            assert_eq!(records.len(), 32);
            let scored: Vec<f64> = records.iter().filter_map(|r| r[2].parse().ok()).collect();
            let mu = scored.iter().sum::<f64>() / scored.len() as f64;
            let printed = value(&format!("slice_mu {id} {axis} "));
            assert!((mu - printed).abs() < 1e-9, "{mu} vs {printed}");
            // the phantom background gives unscored edge slices
            assert!(records.iter().any(|r| &r[3] == "true"));
        }
    }
    let subjects = fs::read_to_string(f.path("out/eval/subjects.csv")).unwrap();
    assert!(subjects.starts_with("subject_id,ms_ssim_3d,psnr_db,mmd\n"));
}

#[test]
fn evaluate_without_synthetic_volumes_fails() {
    let f = Fixture::new();
    assert_eq!(ddbridge(&["evaluate", "--config", &f.config()]).status.code(), Some(2));
}

#[test]
fn verify_passes_and_the_negative_control_fails() {
    let out = ddbridge(&["verify"]);
    let stdout = ok(&out);
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 10);
    assert!(!stdout.contains("FAIL"));

    let broken = ddbridge(&["verify", "--break-gamma-endpoint"]);
    assert_eq!(broken.status.code(), Some(3));
    let stdout = String::from_utf8(broken.stdout).unwrap();
    let failed: Vec<&str> = stdout.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0].contains("schedule_boundaries"));
}
