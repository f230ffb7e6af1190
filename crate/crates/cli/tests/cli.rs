use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use freqgen::raster::{read_image, write_image, Image};
use rand::Rng;
use tempfile::tempdir;

fn freqgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqgen"))
        .args(args)
        .env_remove("FREQGEN_SEED")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn random_tree(root: &Path, seed: u64) {
    let mut rng = freqgen::seed::rng(seed);
    for rel in ["art/dog/a.png", "art/dog/b.ppm", "photo/cat/c.png", "photo/cat/d.pgm"] {
        let channels = if rel.ends_with(".pgm") { 1 } else { 3 };
        let img = Image::new(18, 22, channels, (0..18 * 22 * channels).map(|_| rng.random::<f64>()).collect()).unwrap();
        let path = root.join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        write_image(&img, &path).unwrap();
    }
}

fn tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.cfg");
    fs::write(&path, "# smoke\nepochs = 2\nsamples_per_class = 3\nseed = 4\n").unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn identity_augmentation_reproduces_inputs() {
    let tmp = tempdir().unwrap();
    let (inp, out) = (tmp.path().join("in"), tmp.path().join("out"));
    random_tree(&inp, 1);
    let r = freqgen(&["augment", s(&inp), s(&out), "--d", "0", "--alpha", "1", "--beta", "1"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for rel in ["art/dog/a.png", "art/dog/b.ppm", "photo/cat/c.png", "photo/cat/d.pgm"] {
        assert_eq!(read_image(out.join(rel)).unwrap(), read_image(inp.join(rel)).unwrap(), "{rel}");
    }
    let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().next(), Some("path,d,alpha,beta"));
    assert!(manifest.contains("art/dog/a.png,0,1,1\n"));
    assert!(!manifest.contains('\r'));
}

#[test]
fn gaussian_on_constant_image_is_mid_gray() {
    let tmp = tempdir().unwrap();
    let (inp, out) = (tmp.path().join("in"), tmp.path().join("out"));
    fs::create_dir_all(&inp).unwrap();
    write_image(&Image::filled(40, 40, 3, 0.8).unwrap(), inp.join("flat.png")).unwrap();
    let r = freqgen(&["augment", s(&inp), s(&out), "--mode", "gaussian", "--kernel", "63"]);
    assert!(r.status.success());
    let img = read_image(out.join("flat.png")).unwrap();
    assert!(img.data().iter().all(|&v| v == 128.0 / 255.0));
    assert_eq!(fs::read_to_string(out.join("manifest.csv")).unwrap(), "path,kernel_size\nflat.png,63\n");
}

#[test]
fn random_augmentation_is_seeded_per_path() {
    let tmp = tempdir().unwrap();
    let inp = tmp.path().join("in");
    random_tree(&inp, 2);
    let run = |name: &str, seed: &str, workers: &str| {
        let out = tmp.path().join(name);
        let r = freqgen(&["augment", s(&inp), s(&out), "--random", "--seed", seed, "--workers", workers]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        out
    };
    let (a, b, c) = (run("a", "9", "1"), run("b", "9", "4"), run("c", "10", "2"));
    let manifest = |p: &Path| fs::read_to_string(p.join("manifest.csv")).unwrap();
    assert_eq!(manifest(&a), manifest(&b));
    assert_ne!(manifest(&a), manifest(&c));
    for rel in ["art/dog/a.png", "photo/cat/d.pgm"] {
        assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap());
    }

    // FREQGEN_SEED stands in for --seed.
    let out = tmp.path().join("env");
    let r = Command::new(env!("CARGO_BIN_EXE_freqgen"))
        .args(["augment", s(&inp), s(&out), "--random"])
        .env("FREQGEN_SEED", "9")
        .output()
        .unwrap();
    assert!(r.status.success());
    assert_eq!(manifest(&out), manifest(&a));
}

#[test]
fn usage_and_io_failures_have_distinct_codes() {
    let tmp = tempdir().unwrap();
    let (inp, out) = (tmp.path().join("in"), tmp.path().join("out"));
    random_tree(&inp, 3);

    assert_eq!(freqgen(&["augment", s(&inp), s(&out), "--random"]).status.code(), Some(2));
    assert_eq!(freqgen(&["augment", s(&inp), s(&inp.join("nested")), "--d", "1"]).status.code(), Some(2));
    assert_eq!(freqgen(&["augment", s(&inp), s(&out), "--d", "1", "--alpha", "1.5"]).status.code(), Some(2));
    assert_eq!(freqgen(&["nonsense"]).status.code(), Some(2));
    assert_eq!(freqgen(&["augment", s(&tmp.path().join("missing")), s(&out), "--d", "1"]).status.code(), Some(3));

    assert!(freqgen(&["augment", s(&inp), s(&out), "--d", "1"]).status.success());
    let refused = freqgen(&["augment", s(&inp), s(&out), "--d", "2"]);
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("--force"));
    assert!(freqgen(&["augment", s(&inp), s(&out), "--d", "2", "--force"]).status.success());
    assert!(fs::read_to_string(out.join("manifest.csv")).unwrap().contains(",2,1,1\n"));
}

#[test]
fn unreadable_images_are_skipped() {
    let tmp = tempdir().unwrap();
    let (inp, out) = (tmp.path().join("in"), tmp.path().join("out"));
    random_tree(&inp, 4);
    fs::write(inp.join("art/broken.png"), b"not an image").unwrap();
    fs::write(inp.join("notes.txt"), b"ignored").unwrap();
    let r = freqgen(&["augment", s(&inp), s(&out), "--d", "1"]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("broken.png"));
    let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 5);
    assert!(!manifest.contains("broken") && !manifest.contains("notes"));
    assert!(out.join("photo/cat/d.pgm").exists());
}

#[test]
fn spectrum_of_constant_image_is_a_single_peak() {
    let tmp = tempdir().unwrap();
    let src = tmp.path().join("flat.png");
    write_image(&Image::filled(9, 12, 3, 0.6).unwrap(), &src).unwrap();
    let prefix = tmp.path().join("dump/flat");
    assert!(freqgen(&["spectrum", s(&src), s(&prefix)]).status.success());
    let amp = read_image(tmp.path().join("dump/flat_amplitude.png")).unwrap();
    let phase = read_image(tmp.path().join("dump/flat_phase.png")).unwrap();
    assert_eq!((amp.height(), amp.width(), phase.height(), phase.width()), (9, 12, 9, 12));
    for y in 0..9 {
        for x in 0..12 {
            let expected = if (y, x) == (4, 6) { 1.0 } else { 0.0 };
            assert_eq!(amp.get(y, x, 0), expected, "({y},{x})");
        }
    }
}

#[test]
fn gradcheck_reports_every_tensor() {
    let r = freqgen(&["gradcheck", "--seed", "7"]);
    assert!(r.status.success());
    let out = String::from_utf8(r.stdout).unwrap();
    assert_eq!(out.lines().count(), 14);
    assert!(out.lines().all(|l| l.ends_with("ok")));
    assert_eq!(freqgen(&["gradcheck"]).status.code(), Some(2));
}

#[test]
fn train_is_reproducible_and_writes_metrics() {
    let tmp = tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let (a, b) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"));
    assert!(freqgen(&["train", &cfg, "-o", s(&a)]).status.success());
    assert!(freqgen(&["train", &cfg, "-o", s(&b)]).status.success());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "config,seed,held_out_domain,accuracy");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("baseline,4,solid,"));
}

#[test]
fn ablation_writes_one_row_per_configuration() {
    let tmp = tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let (metrics, table) = (tmp.path().join("m.csv"), tmp.path().join("t.csv"));
    let r = freqgen(&["train", &cfg, "-o", s(&metrics), "--ablation", "--seeds", "0,1", "--table", s(&table)]);
    assert!(r.status.success());
    assert_eq!(fs::read_to_string(&metrics).unwrap().lines().count(), 1 + 7 * 2 * 4);
    let t = fs::read_to_string(&table).unwrap();
    assert_eq!(t.lines().count(), 8);
    assert!(String::from_utf8(r.stdout).unwrap().contains("full"));
}

#[test]
fn sweep_emits_a_row_per_value() {
    let tmp = tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("sweep.csv");
    let r = freqgen(&["sweep", "--param", "unit-size", "--values", "16,32,64,128", "--config", &cfg, "-o", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(1).unwrap().starts_with("unit-size,16,"));
    let bad = freqgen(&["sweep", "--param", "severity", "--values", "9", "--config", &cfg, "-o", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn malformed_config_names_line_and_key() {
    let tmp = tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "epochs = 3\n\nlearning_rate = fast\n").unwrap();
    let r = freqgen(&["train", s(&cfg), "-o", s(&tmp.path().join("m.csv"))]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("line 3") && err.contains("learning_rate"), "{err}");
}
