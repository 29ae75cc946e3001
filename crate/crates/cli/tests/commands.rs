use lus_cli::run;
use lus_core::io::{read_frame, read_toml, write_frame, SegmentationRecord, TruthRecord};
use lus_core::masking::Region;
use lus_core::phantom::{generate_seeded, PhantomSpec};
use lus_core::Frame;
use rand::{Rng, SeedableRng};
use std::fs;
use std::path::{Path, PathBuf};

fn lus(args: &[&str]) -> i32 {
    run(std::iter::once("lus").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn phantom_frame(dir: &Path, spec: &PhantomSpec) -> (PathBuf, lus_core::phantom::PhantomTruth) {
    let (clip, truth) = generate_seeded(spec).unwrap();
    let p = dir.join("frame.pgm");
    write_frame(&p, &clip.frames()[0]).unwrap();
    (p, truth)
}

#[test]
fn segment_record_matches_phantom_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (frame, truth) =
        phantom_frame(dir.path(), &PhantomSpec { pleura_curve: [90.0, 0.0, 12.0, 0.0], ..Default::default() });
    let out = dir.path().join("seg");
    assert_eq!(lus(&["segment", s(&frame), "--overlay", "--out", s(&out)]), 0);
    let rec: SegmentationRecord = read_toml(&out.join("frame.seg.toml")).unwrap();
    assert_eq!(rec.degree, 4);
    assert_eq!(rec.coefficients.len(), 5);
    let mut err: Vec<f64> = rec.lower_rows.iter().zip(&truth.lower_rows).map(|(a, b)| (a - b).abs()).collect();
    err.sort_by(f64::total_cmp);
    assert!(err[err.len() / 2] <= 2.0, "median {}", err[err.len() / 2]);
    let band = read_frame(&out.join("frame.band.pgm")).unwrap();
    assert!(band.pixels().iter().all(|&v| v == 0.0 || v == 255.0));
    assert!(out.join("frame.overlay.pgm").exists());
}

#[test]
fn segment_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let black = dir.path().join("black.pgm");
    write_frame(&black, &Frame::filled(64, 64, 0.0)).unwrap();
    let out = dir.path().join("o");
    assert_eq!(lus(&["segment", s(&black), "--out", s(&out)]), 3);
    assert_eq!(lus(&["segment", s(&dir.path().join("missing.pgm")), "--out", s(&out)]), 2);
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[segmentation]\npoly_degree = 0\n").unwrap();
    assert_eq!(lus(&["segment", s(&black), "--config", s(&cfg), "--out", s(&out)]), 4);
    assert_eq!(lus(&["segment", "--bogus-flag"]), 2);
}

#[test]
fn mask_variants_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let (frame, truth) = phantom_frame(dir.path(), &PhantomSpec::default());
    let curves = dir.path().join("curves");
    assert_eq!(lus(&["segment", s(&frame), "--out", s(&curves)]), 0);

    let all = dir.path().join("all");
    assert_eq!(lus(&["mask", s(&frame), "--curves", s(&curves), "--variant", "all", "--out", s(&all)]), 0);
    assert_eq!(fs::read_dir(&all).unwrap().count(), 7);
    assert_eq!(read_frame(&all.join("frame.original.pgm")).unwrap(), read_frame(&frame).unwrap());

    let pm = read_frame(&all.join("frame.pleural+merlin.pgm")).unwrap();
    for y in 0..pm.height() {
        for x in 0..pm.width() {
            if truth.regions.get(x, y) == Region::Subq {
                assert_eq!(pm.get(x, y), 0.0, "({x}, {y})");
            }
        }
    }

    let out = dir.path().join("one");
    assert_eq!(lus(&["mask", s(&frame), "--variant", "nope", "--out", s(&out)]), 4);
    let small = dir.path().join("small");
    fs::create_dir(&small).unwrap();
    write_frame(&small.join("frame.pgm"), &Frame::filled(40, 30, 10.0)).unwrap();
    assert_eq!(lus(&["mask", s(&small.join("frame.pgm")), "--curves", s(&curves), "--out", s(&out)]), 5);
    assert_eq!(lus(&["mask", s(&frame), "--curves", s(&small), "--out", s(&out)]), 2);
}

#[test]
fn straighten_writes_frame_and_shifts() {
    let dir = tempfile::tempdir().unwrap();
    let (frame, _) =
        phantom_frame(dir.path(), &PhantomSpec { pleura_curve: [100.0, 10.0, -8.0, 0.0], ..Default::default() });
    let out = dir.path().join("st");
    assert_eq!(lus(&["straighten", s(&frame), "--out", s(&out)]), 0);
    let rec: lus_cli::commands::straighten::StraightenRecord = read_toml(&out.join("frame.straight.toml")).unwrap();
    assert_eq!(rec.shifts.len(), 200);
    assert_eq!(rec.coefficients.len(), 4);
    assert_eq!(read_frame(&out.join("frame.straight.pgm")).unwrap().dims(), (200, 200));
}

fn pairwise_auc(scores: &[f64], pos: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if pos[i] && !pos[j] {
                den += 1.0;
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn report_value(report: &str, key: &str) -> f64 {
    let line = report.lines().find(|l| l.starts_with(&format!("{key}="))).unwrap();
    line[key.len() + 1..].parse().unwrap()
}

#[test]
fn metrics_report_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let perfect = dir.path().join("perfect.csv");
    let mut text = String::from("clip_id,true,score0,score1,score2,score3\n");
    for i in 0..12 {
        let c = i % 4;
        let sc: Vec<String> = (0..4).map(|k| if k == c { "0.9".into() } else { "0.05".into() }).collect();
        text.push_str(&format!("c{i},{c},{}\n", sc.join(",")));
    }
    fs::write(&perfect, text).unwrap();
    let r = lus_cli::commands::cmd_metrics(&perfect, None).unwrap();
    assert_eq!(report_value(&r, "accuracy"), 1.0);
    assert_eq!(report_value(&r, "auc_macro"), 1.0);

    let mut rng = lus_core::clips::ClipRng::seed_from_u64(17);
    let mut text = String::from("clip_id,true,score0,score1,score2,score3\n");
    let mut truths = Vec::new();
    let mut scores = vec![Vec::new(); 4];
    for i in 0..200 {
        let t: usize = rng.random_range(0..4);
        truths.push(t);
        let row: Vec<f64> = (0..4).map(|_| (rng.random_range(0..20) as f64) / 20.0).collect();
        for c in 0..4 {
            scores[c].push(row[c]);
        }
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&format!("r{i},{t},{}\n", fields.join(",")));
    }
    let p = dir.path().join("random.csv");
    fs::write(&p, text).unwrap();
    let out = dir.path().join("m");
    let r = lus_cli::commands::cmd_metrics(&p, Some(&out)).unwrap();
    for c in 0..4 {
        let pos: Vec<bool> = truths.iter().map(|&t| t == c).collect();
        let want = pairwise_auc(&scores[c], &pos);
        assert!((report_value(&r, &format!("auc_class{c}")) - want).abs() < 1e-9);
    }
    assert_eq!(fs::read_to_string(out.join("report.txt")).unwrap(), r);
    assert!(fs::read_to_string(out.join("roc.csv")).unwrap().starts_with("class,fpr,tpr,threshold\n"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "id,label,a,b,c,d\nx,0,1,0,0,0\n").unwrap();
    assert_eq!(lus(&["metrics", s(&bad)]), 2);
    fs::write(&bad, "clip_id,true,score0,score1,score2,score3\nx,7,1,0,0,0\n").unwrap();
    assert_eq!(lus(&["metrics", s(&bad)]), 2);
}

#[test]
fn phantom_command_contract() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("seven.toml");
    fs::write(&spec, "n_blines = 7\na_lines = false\nframes = 2\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(lus(&["phantom", s(&spec), "--seed", "11", "--count", "2", "--out", s(&a)]), 0);
    assert_eq!(lus(&["phantom", s(&spec), "--seed", "11", "--count", "2", "--out", s(&b)]), 0);
    let truth: TruthRecord = read_toml(&a.join("phantom_001/truth.toml")).unwrap();
    assert_eq!(truth.severity, 2);
    assert_eq!(truth.b_line_columns.len(), 7);
    for f in ["phantom_000/frame_000.pgm", "phantom_001/frame_001.pgm", "index.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(
        fs::read(a.join("phantom_000/frame_000.pgm")).unwrap(),
        fs::read(a.join("phantom_001/frame_000.pgm")).unwrap()
    );

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "a_lines = true\nn_blines = 2\nscore = 0\n").unwrap();
    assert_eq!(lus(&["phantom", s(&bad), "--seed", "1", "--out", s(&a)]), 4);
    assert_eq!(lus(&["phantom", s(&spec), "--out", s(&a)]), 4);
}

#[test]
fn pipeline_balances_training_list() {
    let dir = tempfile::tempdir().unwrap();
    let mut specs = Vec::new();
    for (i, body) in [
        "n_blines = 0\n",
        "n_blines = 0\n",
        "n_blines = 0\n",
        "n_blines = 3\na_lines = false\n",
        "n_blines = 6\na_lines = false\n",
        "n_blines = 1\nconsolidation = true\na_lines = false\n",
    ]
    .iter()
    .enumerate()
    {
        let p = dir.path().join(format!("s{i}.toml"));
        fs::write(&p, format!("frames = 20\n{body}")).unwrap();
        specs.push(p);
    }
    let ph = dir.path().join("ph");
    let mut args = vec!["phantom"];
    args.extend(specs.iter().map(|p| s(p)));
    args.extend(["--seed", "4", "--out", s(&ph)]);
    assert_eq!(lus(&args), 0);

    let out = dir.path().join("run");
    let cfg = lus_cli::config::PipelineConfig {
        seed: Some(9),
        variant: "pleural".into(),
        out: Some(out.clone()),
        augment: true,
        ..Default::default()
    };
    let m = lus_cli::commands::cmd_pipeline(&ph.join("index.csv"), &cfg).unwrap();
    assert_eq!(m.training.class_counts, [3, 1, 1, 1]);
    assert_eq!(m.training.balanced_counts, [3, 3, 3, 3]);
    assert_eq!(m.training.clip_ids.len(), 12);
    for c in &m.clips {
        assert_eq!(c.frame_indices.len(), 18);
        assert!(c.error.is_none());
        let dir = out.join(&c.outputs["pleural"]);
        let f = read_frame(&dir.join("frame_17.pgm")).unwrap();
        assert_eq!(f.dims(), (224, 224));
    }
}
