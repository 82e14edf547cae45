//! End-to-end runs of the `hypersr` binary on synthetic datasets.

use hypersr_core::io::{
    band_triplet_rgb, load_cube, load_manifest, save_cube, save_manifest, save_rgb_png, CubeEntry,
    DatasetManifest, RgbEntry, Role, synth_dataset,
};
use hypersr_core::types::Raster;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hypersr"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn hypersr");
    assert_eq!(
        out.status.code(),
        Some(0),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_code(cmd: &mut Command) -> (i32, String) {
    let out = cmd.output().expect("spawn hypersr");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// 5-band dataset: 2 labeled + 1 unlabeled + 1 test cube of 16 squared,
/// plus one RGB image. Returns the manifest path.
fn write_dataset(dir: &Path) -> PathBuf {
    let cubes = synth_dataset(4, 5, 16, 42);
    let mut manifest = DatasetManifest::new(".");
    let roles = [
        ("lab0", Role::LabeledTrain),
        ("lab1", Role::LabeledTrain),
        ("unlab0", Role::UnlabeledTrain),
        ("test0", Role::Test),
    ];
    for (cube, (id, role)) in cubes.iter().zip(roles) {
        let rel = format!("{id}.hsr");
        save_cube(cube, dir.join(&rel)).unwrap();
        manifest.entries.push(CubeEntry {
            id: id.to_string(),
            hr_cube_path: rel,
            role,
        });
    }
    let rgb = band_triplet_rgb(&cubes[0], [0, 2, 4]).unwrap();
    save_rgb_png(&rgb, dir.join("pic0.png")).unwrap();
    manifest.rgb_entries.push(RgbEntry {
        id: "pic0".to_string(),
        hr_rgb_path: "pic0.png".to_string(),
    });
    let path = dir.join("manifest.json");
    save_manifest(&manifest, &path).unwrap();
    path
}

fn write_config(dir: &Path, manifest: &Path, out: &Path, tau: usize, epochs: usize) -> PathBuf {
    let text = format!(
        r#"
output_dir = "{out}"

[scale]
tau = {tau}
patch_hr = 8

[network]
hsi_bands = 5
tau = {tau}
group_size = 3
overlap = 1
feature_width = 4
ssb_per_stage = 1

[train]
epochs = {epochs}
batch_size = 2
seed = 7

[train.batches_per_iter]
hsi = 1
rgb = 1
mixup = 1
ssl = 1

[data]
manifest = "{manifest}"
"#,
        out = out.display(),
        manifest = manifest.display(),
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn prepare_tiles_and_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_dataset(tmp.path());
    let store = tmp.path().join("store");
    let out = run_ok(
        bin()
            .args(["prepare", "--tau", "2", "--patch", "8"])
            .arg("--manifest")
            .arg(&manifest)
            .arg("--out")
            .arg(&store),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    // two labeled 16-squared cubes tile into four 8-squared patches each
    assert!(stdout.contains("labeled_train: 8 pairs"), "{stdout}");
    assert!(stdout.contains("unlabeled_train: 4 pairs"), "{stdout}");
    assert!(stdout.contains("test: 1 images"), "{stdout}");
    assert!(stdout.contains("rgb: 4 pairs"), "{stdout}");

    let stored = load_manifest(store.join("manifest.json")).unwrap();
    assert_eq!(stored.entries.len(), 8 + 4 + 1);
    assert_eq!(stored.rgb_entries.len(), 4);
    // .hsr names are logical; each cube lands as an .hdr/.raw pair
    assert!(store.join("labeled/lab0_0000.hdr").exists());
    assert!(store.join("labeled/lab0_0000.raw").exists());
    assert!(store.join("labeled/lab0_0000_lr.hdr").exists());
    assert!(store.join("rgb/pic0_0003.png").exists());
    assert!(store.join("rgb/pic0_0003_lr.png").exists());
    assert!(store.join("test/test0.hdr").exists());

    // the stored HR tile really is the HR crop, not its LR counterpart
    let hr_tile = load_cube(store.join("labeled/lab0_0000.hsr")).unwrap();
    assert_eq!((hr_tile.bands(), hr_tile.height(), hr_tile.width()), (5, 8, 8));
    let lr_tile = load_cube(store.join("labeled/lab0_0000_lr.hsr")).unwrap();
    assert_eq!((lr_tile.bands(), lr_tile.height(), lr_tile.width()), (5, 4, 4));
}

#[test]
fn prepare_empty_manifest_warns_but_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("manifest.json");
    save_manifest(&DatasetManifest::new("."), &manifest).unwrap();
    let out = run_ok(
        bin()
            .args(["prepare", "--tau", "2", "--patch", "8"])
            .arg("--manifest")
            .arg(&manifest)
            .arg("--out")
            .arg(tmp.path().join("store")),
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("warning"), "{stderr}");
}

#[test]
fn train_writes_log_and_checkpoints_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_dataset(tmp.path());
    let out1 = tmp.path().join("run1");
    let cfg = write_config(tmp.path(), &manifest, &out1, 2, 1);
    run_ok(bin().args(["train", "--config"]).arg(&cfg));

    let log = std::fs::read_to_string(out1.join("train_log.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "epoch,iteration,term,l1,sstv,total,lr");
    // 8 labeled patches at batch 2 make 4 iterations of 4 terms each
    assert_eq!(lines.len(), 1 + 4 * 4);
    let terms: Vec<&str> = lines[1..5]
        .iter()
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(terms, ["hsi", "rgb", "smixup", "ssl"]);
    assert!(out1.join("ckpt_epoch_0001").join("manifest.json").exists());
    assert!(out1.join("ckpt_final").join("params.bin").exists());

    let out2 = tmp.path().join("run2");
    let cfg2 = write_config(tmp.path(), &manifest, &out2, 2, 1);
    run_ok(bin().args(["train", "--config"]).arg(&cfg2));
    let log2 = std::fs::read_to_string(out2.join("train_log.csv")).unwrap();
    assert_eq!(log, log2);
}

#[test]
fn train_resume_appends_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_dataset(tmp.path());
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), &manifest, &out, 2, 1);
    run_ok(bin().args(["train", "--config"]).arg(&cfg));
    let after_first = std::fs::read_to_string(out.join("train_log.csv")).unwrap();

    run_ok(
        bin()
            .args(["train", "--epochs", "2", "--config"])
            .arg(&cfg)
            .arg("--resume")
            .arg(out.join("ckpt_epoch_0001")),
    );
    let after_resume = std::fs::read_to_string(out.join("train_log.csv")).unwrap();
    assert!(after_resume.starts_with(&after_first));
    assert_eq!(after_resume.lines().count(), 1 + 2 * 4 * 4);
    assert!(after_resume.lines().last().unwrap().starts_with("1,8,"));
    assert!(out.join("ckpt_epoch_0002").exists());
}

#[test]
fn eval_fresh_checkpoint_matches_bicubic_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_dataset(tmp.path());
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), &manifest, &out, 2, 0);
    run_ok(bin().args(["train", "--config"]).arg(&cfg));

    run_ok(
        bin()
            .args(["eval", "--config"])
            .arg(&cfg)
            .arg("--checkpoint")
            .arg(out.join("ckpt_final")),
    );
    let csv = std::fs::read_to_string(out.join("eval.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("id,rmse,cc,mpsnr,mssim,ergas,sam,bicubic_rmse"));
    // data rows plus the mean row: model columns equal bicubic columns
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 13);
        assert_eq!(&cols[1..7], &cols[7..13], "line: {line}");
    }
    assert_eq!(lines.last().unwrap().split(',').next().unwrap(), "mean");
}

#[test]
fn eval_mismatched_checkpoint_exits_1_naming_both() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_dataset(tmp.path());
    let out = tmp.path().join("run");
    let cfg2 = write_config(tmp.path(), &manifest, &out, 2, 0);
    run_ok(bin().args(["train", "--config"]).arg(&cfg2));

    let dir4 = tempfile::tempdir().unwrap();
    let out4 = dir4.path().join("other");
    let cfg4 = write_config(dir4.path(), &manifest, &out4, 4, 0);
    let (code, stderr) = run_code(
        bin()
            .args(["eval", "--config"])
            .arg(&cfg4)
            .arg("--checkpoint")
            .arg(out.join("ckpt_final")),
    );
    assert_eq!(code, 1, "{stderr}");
    assert!(stderr.contains("tau 2 vs 4"), "{stderr}");
}

#[test]
fn sr_upscales_a_cube() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_dataset(tmp.path());
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), &manifest, &out, 2, 0);
    run_ok(bin().args(["train", "--config"]).arg(&cfg));

    let lr = &synth_dataset(1, 5, 8, 9)[0];
    let lr_path = tmp.path().join("lr.hsr");
    save_cube(lr, &lr_path).unwrap();
    let sr_path = tmp.path().join("sr.hsr");
    run_ok(
        bin()
            .args(["sr", "--checkpoint"])
            .arg(out.join("ckpt_final"))
            .arg("--in")
            .arg(&lr_path)
            .arg("--out")
            .arg(&sr_path),
    );
    let sr = load_cube(&sr_path).unwrap();
    assert_eq!((sr.bands(), sr.height(), sr.width()), (5, 16, 16));
}

#[test]
fn viz_writes_renderings_and_requires_bands_off_convention() {
    let tmp = tempfile::tempdir().unwrap();
    let cube = &synth_dataset(1, 5, 16, 3)[0];
    let path = tmp.path().join("cube.hsr");
    save_cube(cube, &path).unwrap();
    let out = tmp.path().join("viz");

    let (code, stderr) = run_code(
        bin()
            .args(["viz", "--ref"])
            .arg(&path)
            .arg("--est")
            .arg(&path)
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(code, 1, "{stderr}");
    assert!(stderr.contains("--bands"), "{stderr}");

    run_ok(
        bin()
            .args(["viz", "--bands", "1,3,5", "--ref"])
            .arg(&path)
            .arg("--est")
            .arg(&path)
            .arg("--out")
            .arg(&out),
    );
    assert!(out.join("ref.png").exists());
    assert!(out.join("est.png").exists());
    assert!(out.join("error.png").exists());
}

#[test]
fn unknown_flags_exit_1() {
    let (code, _) = run_code(bin().args(["train", "--mystery"]));
    assert_eq!(code, 1);
}
