use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use occlbench::kitti_io;
use occlbench::occlusion_synth::load_image;
use occlbench::synthetic;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_occlbench"));
    c.env("OCCLBENCH_JOBS", "2").env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|_| panic!("not JSON: {line}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

#[test]
fn bundled_dataset_matches_the_generator() {
    let labels = kitti_io::read_dir(&assets().join("synthetic/labels")).unwrap();
    let frames = synthetic::synthetic_dataset(20, 0);
    assert_eq!(labels.len(), frames.len());
    for f in frames {
        let id = &f.labels.frame_id;
        assert_eq!(labels[id].objects, f.labels.objects, "labels of {id}");
        let img = load_image(&assets().join(format!("synthetic/images/{id}.png"))).unwrap();
        assert!(img == f.image, "image {id}");
    }
    assert!(load_image(&assets().join("textures/box.png")).unwrap() == synthetic::box_texture());
    assert!(load_image(&assets().join("textures/wall.png")).unwrap() == synthetic::wall_texture());
}

#[test]
fn step_by_step_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let data = t.join("data");
    ok(&["synth", "--out", s(&data), "--frames", "8", "--seed", "3"]);
    let (labels, images) = (data.join("labels"), data.join("images"));
    assert_eq!(kitti_io::frame_files(&labels).unwrap().len(), 8);

    let split = t.join("split.tsv");
    let out = ok(&[
        "split",
        "--labels",
        s(&labels),
        "--ratios",
        "0.5,0.25,0.25",
        "--seed",
        "1",
        "--out",
        s(&split),
    ]);
    assert_eq!(out.trim(), "train=4 test=2 validation=2");
    assert!(fs::read_to_string(&split)
        .unwrap()
        .starts_with("# seed=1 ratios=0.5,0.25,0.25\n"));

    let upper = t.join("upper");
    ok(&[
        "split-labels",
        "--in",
        s(&labels),
        "--out",
        s(&upper),
        "--part",
        "upper",
    ]);
    assert!(upper.join(kitti_io::PROVENANCE_FILE).exists());
    // halving a derived set again is refused
    let again = run(&[
        "split-labels",
        "--in",
        s(&upper),
        "--out",
        s(&t.join("quarter")),
        "--part",
        "upper",
    ]);
    assert!(!error_line(&again)["message"].as_str().unwrap().is_empty());

    let boxed = t.join("box");
    ok(&[
        "occlude",
        "--images",
        s(&images),
        "--labels",
        s(&labels),
        "--out",
        s(&boxed),
        "--kind",
        "box",
    ]);
    assert!(boxed.join("manifest.txt").exists());
    let gray = t.join("gray");
    ok(&["grayscale", "--images", s(&boxed), "--out", s(&gray)]);
    let g = load_image(&gray.join("000000.png")).unwrap();
    assert!(g.pixels().all(|p| p[0] == p[1] && p[1] == p[2]));

    let dets = |name: &str, imgs: &Path, part: &str| {
        let dir = t.join(name);
        ok(&[
            "simulate",
            "--images",
            s(imgs),
            "--labels",
            s(&labels),
            "--part",
            part,
            "--out",
            s(&dir),
        ]);
        dir
    };
    let full = dets("d_full", &images, "full");
    let box_full = dets("d_box_full", &boxed, "full");
    let box_upper = dets("d_box_upper", &boxed, "upper");
    let box_lower = dets("d_box_lower", &boxed, "lower");
    // detection files carry 16 fields
    let text = fs::read_to_string(full.join("000000.txt")).unwrap();
    assert!(text.lines().all(|l| l.split_whitespace().count() == 16));

    let eval = t.join("eval");
    let out = ok(&[
        "eval",
        "--dets",
        s(&full),
        "--gt",
        s(&labels),
        "--out",
        s(&eval),
        "--class",
        "Pedestrian",
    ]);
    assert!(out.starts_with(
        "# mode=confidence iou=0.5\nclass,ap,num_gt,num_det,num_matched\nPedestrian,"
    ));

    let conf = t.join("conf");
    let spec = format!(
        "full={},upper={},lower={}",
        s(&box_full),
        s(&box_upper),
        s(&box_lower)
    );
    let out = ok(&[
        "confidence",
        "--dets",
        &spec,
        "--gt",
        s(&labels),
        "--out",
        s(&conf),
    ]);
    assert_eq!(out.lines().count(), 3);
    for f in [
        "series.csv",
        "series_means.csv",
        "series.svg",
        "manifest.txt",
    ] {
        assert!(conf.join(f).exists(), "{f}");
    }

    let cmp = t.join("cmp");
    let out = ok(&[
        "compare",
        "--baseline",
        s(&full),
        "--variant",
        s(&box_full),
        "--gt",
        s(&labels),
        "--out",
        s(&cmp),
    ]);
    assert!(out.starts_with("mean decrease "));
    let stats = fs::read_to_string(cmp.join("stats.csv")).unwrap();
    assert!(stats
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("baseline,variant,0.5,"));

    let casc = t.join("cascade");
    let out = ok(&[
        "cascade",
        "--full",
        s(&box_full),
        "--upper",
        s(&box_upper),
        "--lower",
        s(&box_lower),
        "--gt",
        s(&labels),
        "--out",
        s(&casc),
        "--set",
        "gate_threshold=0.6",
    ]);
    assert!(out.contains("hypotheses"));
    assert!(fs::read_to_string(casc.join("params.txt"))
        .unwrap()
        .contains("gate_threshold=0.6\n"));
    let sidecar = fs::read_to_string(casc.join("hypotheses.csv")).unwrap();
    assert!(sidecar.starts_with(occlbench::cascade::SIDECAR_HEADER));
    assert_eq!(
        kitti_io::read_dir(&casc.join("detections")).unwrap().len(),
        8
    );
}

#[test]
fn output_directories_are_not_clobbered() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    ok(&["synth", "--out", s(&out), "--frames", "2"]);
    let e = error_line(&run(&["synth", "--out", s(&out), "--frames", "2"]));
    assert_eq!(e["error"], "pipeline");
    ok(&["synth", "--out", s(&out), "--frames", "2", "--force"]);
}

#[test]
fn errors_are_reported_as_json() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing");
    let e = error_line(&run(&[
        "eval",
        "--dets",
        s(&missing),
        "--gt",
        s(&missing),
        "--out",
        s(&tmp.path().join("e")),
    ]));
    assert_eq!(e["error"], "io");

    let labels = tmp.path().join("labels");
    fs::create_dir(&labels).unwrap();
    fs::write(labels.join("000000.txt"), "Pedestrian 0 0 0 1 2 3\n").unwrap();
    let e = error_line(&run(&[
        "eval",
        "--dets",
        s(&labels),
        "--gt",
        s(&labels),
        "--out",
        s(&tmp.path().join("e")),
    ]));
    assert_eq!(e["error"], "format");
    assert!(e["message"].as_str().unwrap().contains("000000.txt"));

    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "colour=blue\n").unwrap();
    let e = error_line(&run(&["pipeline", "--config", s(&cfg)]));
    assert_eq!(e["error"], "config");
}

#[test]
fn pipeline_command_with_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.cfg");
    fs::write(
        &cfg,
        format!("dataset_root={}\nseed=5\n", s(&assets().join("synthetic"))),
    )
    .unwrap();
    let out = tmp.path().join("run");
    let stdout = ok(&[
        "pipeline",
        "--config",
        s(&cfg),
        "--set",
        &format!("out={}", s(&out)),
        "--set",
        "resize_filter=nearest",
    ]);
    assert!(stdout.starts_with("variant,model,map,mean_confidence\noriginal,full,"));
    assert!(fs::read_to_string(out.join("config.txt"))
        .unwrap()
        .contains("resize_filter=nearest\n"));
    assert!(out.join("manifest.txt").exists());

    // externally supplied detections, laid out per variant and model
    let ext = tmp.path().join("ext");
    for variant in ["original", "box", "wall", "gray", "gray_box"] {
        for model in ["full", "upper", "lower"] {
            let src = out.join("detections").join(variant).join(model);
            let dst = ext.join(variant).join(model);
            fs::create_dir_all(&dst).unwrap();
            for f in fs::read_dir(&src).unwrap() {
                let f = f.unwrap().path();
                fs::copy(&f, dst.join(f.file_name().unwrap())).unwrap();
            }
        }
    }
    let out2 = tmp.path().join("run2");
    ok(&[
        "pipeline",
        "--config",
        s(&cfg),
        "--set",
        &format!("out={}", s(&out2)),
        "--set",
        "resize_filter=nearest",
        "--set",
        &format!("detections={}", s(&ext)),
    ]);
    for f in ["summary.csv", "compare/stats.csv", "eval/box_cascade.csv"] {
        assert_eq!(
            fs::read(out.join(f)).unwrap(),
            fs::read(out2.join(f)).unwrap(),
            "{f} differs with external detections"
        );
    }
    assert!(!out2.join("detections").exists());
}
