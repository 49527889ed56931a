use std::fs;
use std::path::Path;
use std::process::Command;

use nsegment::dataio::{load_image, load_label, save_label};
use nsegment::manifest::read_manifest;
use nsegment::{LabelMap, OmegaSpace};

mod common;
use common::{nseg, path_arg, tree, write_dataset};

fn stdout(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn augment_args<'a>(images: &'a Path, labels: &'a Path, out: &'a Path) -> Vec<&'a str> {
    vec![
        "augment",
        "--images",
        path_arg(images),
        "--labels",
        path_arg(labels),
        "--out",
        path_arg(out),
    ]
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(nseg(&["--help"]).status.code(), Some(0));
    assert_eq!(nseg(&["--version"]).status.code(), Some(0));
    assert_eq!(nseg(&["augment", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(nseg(&[]).status.code(), Some(1));
    assert_eq!(nseg(&["perturb", "--kind", "twist"]).status.code(), Some(1));
    assert_eq!(
        nseg(&["perturb", "--kind", "erode", "--grid", "3,x"]).status.code(),
        Some(1)
    );
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = write_dataset(dir.path(), 2, 16, 0);
    let out = dir.path().join("o");
    let mut args = augment_args(&images, &labels, &out);
    args.extend(["--p", "1.5"]);
    assert_eq!(nseg(&args).status.code(), Some(1));
    let mut args = augment_args(&images, &labels, &out);
    args.extend(["--omega", "1,2"]);
    assert_eq!(nseg(&args).status.code(), Some(1));
}

#[test]
fn io_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    let o = nseg(&augment_args(&missing, &missing, &dir.path().join("o")));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn augment_writes_variants_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = write_dataset(dir.path(), 4, 32, 1);
    let out = dir.path().join("out");
    let mut args = augment_args(&images, &labels, &out);
    args.extend(["--mode", "nsegment+", "--epochs", "3", "--seed", "7"]);
    let o = nseg(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("samples: 4"));
    for e in 1..=3 {
        for i in 0..4 {
            assert!(out.join(format!("labels/epoch_{e:03}/s{i:03}.png")).is_file());
        }
    }
    // Label-only: source images copied once.
    assert_eq!(
        fs::read(images.join("s000.png")).unwrap(),
        fs::read(out.join("images/s000.png")).unwrap()
    );
    let (header, records) = read_manifest(&out.join("manifest.jsonl")).unwrap();
    assert_eq!(header.seed, 7);
    assert_eq!(records.len(), 12);
    assert!(records.iter().all(|r| r.error.is_none()));
}

#[test]
fn p_zero_reproduces_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = write_dataset(dir.path(), 5, 24, 2);
    let out = dir.path().join("out");
    let mut args = augment_args(&images, &labels, &out);
    args.extend(["--p", "0", "--image-output", "none"]);
    assert!(nseg(&args).status.success());
    for i in 0..5 {
        let a = load_label(&labels.join(format!("s{i:03}.png"))).unwrap();
        let b = load_label(&out.join(format!("labels/epoch_001/s{i:03}.png"))).unwrap();
        assert_eq!(a.data(), b.data());
    }
    assert!(!out.join("images").exists());
    let (_, records) = read_manifest(&out.join("manifest.jsonl")).unwrap();
    assert!(records.iter().all(|r| !r.applied && r.params_used.is_none()));
}

#[test]
fn omega_flag_matches_default_space() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = write_dataset(dir.path(), 1, 16, 3);
    let out = dir.path().join("out");
    let mut args = augment_args(&images, &labels, &out);
    args.extend(["--omega", "1,15,30,50,100x3,5,10"]);
    assert!(nseg(&args).status.success());
    let (header, _) = read_manifest(&out.join("manifest.jsonl")).unwrap();
    assert_eq!(header.config.omega, OmegaSpace::default());
    assert_eq!(header.config.omega.len(), 15);
}

#[test]
fn flags_override_config_file_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = write_dataset(dir.path(), 1, 16, 4);
    let cfg = dir.path().join("nseg.toml");
    fs::write(&cfg, "p = 0.25\ntheta = 10\nseed = 3\nepochs = 2\n").unwrap();
    let out = dir.path().join("out");
    let mut args = augment_args(&images, &labels, &out);
    args.extend(["--config", path_arg(&cfg), "--theta", "20"]);
    let o = Command::new(env!("CARGO_BIN_EXE_nseg"))
        .args(&args)
        .env("NSEG_SEED", "99")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, records) = read_manifest(&out.join("manifest.jsonl")).unwrap();
    assert_eq!(header.config.p, 0.25);
    assert_eq!(header.config.theta, 20);
    assert_eq!(header.seed, 99);
    assert_eq!(records.len(), 2);

    fs::write(&cfg, "colour = 1\n").unwrap();
    let mut args = augment_args(&images, &labels, &out);
    args.extend(["--config", path_arg(&cfg)]);
    assert_eq!(nseg(&args).status.code(), Some(1));
}

#[test]
fn image_targets_write_warped_images() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = write_dataset(dir.path(), 2, 24, 5);
    let out = dir.path().join("out");
    let mut args = augment_args(&images, &labels, &out);
    args.extend(["--target", "both", "--p", "1"]);
    assert!(nseg(&args).status.success());
    let img = load_image(&out.join("images/epoch_001/s000.png")).unwrap();
    assert_eq!(img.dims(), (24, 24));
}

#[test]
fn perturb_shift_table() {
    let o = nseg(&[
        "perturb",
        "--kind",
        "shift",
        "--grid",
        "0,1,2,4,8",
        "--synthetic",
        "6",
        "--size",
        "48",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(
        text.lines().next().unwrap(),
        "kind,magnitude,target,mean_mIoU,n_samples"
    );
    assert_eq!(rows.len(), 5);
    let miou: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(miou[0], 1.0);
    assert!(miou.windows(2).all(|w| w[1] <= w[0]), "{miou:?}");
}

#[test]
fn perturb_erode_is_monotone_and_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("erode.csv");
    let o = nseg(&[
        "perturb",
        "--kind",
        "erode",
        "--grid",
        "7,15,21",
        "--out",
        path_arg(&csv),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let miou: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|r| r.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(miou.len(), 3);
    assert!(miou.windows(2).all(|w| w[1] <= w[0]), "{miou:?}");
}

fn write_labels(dir: &Path, name: &str, label: &LabelMap) {
    fs::create_dir_all(dir).unwrap();
    save_label(label, &dir.join(name)).unwrap();
}

#[test]
fn evaluate_hand_counted_case() {
    let dir = tempfile::tempdir().unwrap();
    let (r, p) = (dir.path().join("ref"), dir.path().join("pred"));
    let halves = LabelMap::new(4, 4, (0..16).map(|i| u8::from(i % 4 >= 2)).collect(), 2).unwrap();
    write_labels(&r, "a.png", &halves);
    write_labels(&p, "a.png", &LabelMap::filled(4, 4, 0, 2).unwrap());
    let csv = dir.path().join("iou.csv");
    let o = nseg(&[
        "evaluate",
        "--reference",
        path_arg(&r),
        "--predicted",
        path_arg(&p),
        "--csv",
        path_arg(&csv),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("0.2500"), "{}", stdout(&o));
    assert_eq!(fs::read_to_string(&csv).unwrap(), "class,iou\n0,0.5\n1,0\nmean,0.25\n");

    let o = nseg(&["evaluate", "--reference", path_arg(&r), "--predicted", path_arg(&r)]);
    assert!(stdout(&o).contains("mean    1.0000"), "{}", stdout(&o));
}

#[test]
fn evaluate_dimension_mismatch_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let (r, p) = (dir.path().join("ref"), dir.path().join("pred"));
    write_labels(&r, "a.png", &LabelMap::filled(4, 4, 0, 1).unwrap());
    write_labels(&p, "a.png", &LabelMap::filled(5, 4, 0, 1).unwrap());
    let o = nseg(&["evaluate", "--reference", path_arg(&r), "--predicted", path_arg(&p)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn inspect_p_zero_has_blank_disagreement_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = write_dataset(dir.path(), 3, 20, 6);
    let render = |out: &str, p: &str| {
        let out = dir.path().join(out);
        let o = nseg(&[
            "inspect",
            "--images",
            path_arg(&images),
            "--labels",
            path_arg(&labels),
            "--out",
            path_arg(&out),
            "--p",
            p,
            "--seed",
            "4",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let blank = render("blank", "0");
    let img = load_image(&blank.join("s000.png")).unwrap();
    assert_eq!(img.dims(), (60, 20));
    for y in 0..20 {
        for x in 40..60 {
            assert_eq!(img.pixel(x, y), [0, 0, 0]);
        }
    }
    let a = render("a", "1");
    let b = render("b", "1");
    assert_eq!(tree(&a), tree(&b));
}
