use std::path::Path;
use std::process::{Command, Output};

use glarefuse::benchmark::{generate_benchmark, write_benchmark};
use glarefuse::synth::default_domains;
use glarefuse::{formats, GrayMask, ImageBuffer};

fn glarefuse(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_glarefuse"));
    cmd.args(args).env_remove("GLAREFUSE_DETECTOR_CMD").env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn bench(dir: &Path) {
    let scenes = generate_benchmark(7, &default_domains(), 1).unwrap();
    write_benchmark(dir, &scenes).unwrap();
}

#[test]
fn mask_and_inpaint_commands() {
    let dir = tempfile::tempdir().unwrap();
    bench(dir.path());
    let img = dir.path().join("images/sunny_soil_0000.png");
    let mask = dir.path().join("mask.png");
    let out = dir.path().join("clean.png");
    assert!(glarefuse(&["mask", "--input", s(&img), "--output", s(&mask)], &[]).status.success());
    let m = GrayMask::load(&mask).unwrap();
    assert!(m.count() > 0);
    let r = glarefuse(&["inpaint", "--input", s(&img), "--output", s(&out), "--max-iters", "40"], &[]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let (a, b) = (ImageBuffer::load(&img).unwrap(), ImageBuffer::load(&out).unwrap());
    for i in 0..a.pixel_count() {
        if !m.bits()[i] {
            assert_eq!(a.data()[3 * i..3 * i + 3], b.data()[3 * i..3 * i + 3]);
        }
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    bench(dir.path());
    let img = dir.path().join("images/sunny_soil_0000.png");
    let even = glarefuse(&["mask", "--input", s(&img), "--output", s(&dir.path().join("m.png")), "--blur", "4"], &[]);
    assert_eq!(even.status.code(), Some(2));
    let missing = glarefuse(&["run", "--images", "/nonexistent", "--output", s(&dir.path().join("o"))], &[]);
    assert_eq!(missing.status.code(), Some(2));
    let no_variant = glarefuse(
        &["run", "--images", s(&dir.path().join("images")), "--output", s(&dir.path().join("o")), "--variants", "inpainted"],
        &[],
    );
    assert_eq!(no_variant.status.code(), Some(2));
}

#[test]
fn env_override_and_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    bench(dir.path());
    let detector = dir.path().join("det.sh");
    std::fs::write(&detector, "case \"$1\" in *pale*) exit 3;; *) echo '{\"image_id\": \"x\", \"boxes\": []}';; esac\n").unwrap();
    let cmd = format!("sh {}", s(&detector));
    let out = dir.path().join("out");
    let r = glarefuse(
        &["run", "--images", s(&dir.path().join("images")), "--output", s(&out), "--detector", "cmd:false"],
        &[("GLAREFUSE_DETECTOR_CMD", &cmd)],
    );
    assert_eq!(r.status.code(), Some(1), "{}", String::from_utf8_lossy(&r.stderr));
    let fused = formats::read_detections(&out.join("fused.jsonl")).unwrap();
    assert_eq!(fused.len(), 2);
    assert!(fused.iter().all(|f| !f.image_id.starts_with("pale")));
}

#[test]
fn fuse_and_eval_commands() {
    let dir = tempfile::tempdir().unwrap();
    bench(dir.path());
    let images = dir.path().join("images");
    let gt = dir.path().join("ground_truth.jsonl");
    let glare = dir.path().join("glare_regions.jsonl");
    let dets = dir.path().join("dets");
    std::fs::create_dir_all(&dets).unwrap();
    for (k, seed) in ["1", "2"].iter().enumerate() {
        let mut lines = String::new();
        for entry in std::fs::read_dir(&images).unwrap() {
            let p = entry.unwrap().path();
            let r = glarefuse(&["simdet", s(&p), "--ground-truth", s(&gt), "--glare", s(&glare), "--seed", seed], &[]);
            assert!(r.status.success());
            let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
            lines.push_str(&v.to_string());
            lines.push('\n');
        }
        std::fs::write(dets.join(format!("m{k}.jsonl")), lines).unwrap();
    }
    let fused = dir.path().join("fused.jsonl");
    let r = glarefuse(&["fuse", s(&dets.join("m0.jsonl")), s(&dets.join("m1.jsonl")), "--output", s(&fused)], &[]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(formats::read_detections(&fused).unwrap().len(), 3);

    let csv = dir.path().join("eval.csv");
    let r = glarefuse(
        &[
            "eval",
            "--detections",
            &format!("single={}", s(&dets.join("m0.jsonl"))),
            "--detections",
            &format!("fused={}", s(&fused)),
            "--ground-truth",
            s(&gt),
            "--output",
            s(&csv),
        ],
        &[],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let table = String::from_utf8(r.stdout).unwrap();
    assert!(table.contains("| single") && table.contains("| fused"));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "variant,0.25,0.30,0.35");
    assert!(lines[1].starts_with("single,") && lines[2].starts_with("fused,"));
}
