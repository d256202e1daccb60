use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semsim::metrics::{evaluate, EvalOptions, Evaluation, RetrievalRun};
use semsim::proxy::{sim_bow, SimilarityMatrix};
use semsim::textproc::Pipeline;
use semsim::training::synthetic::PlantedClusters;

const CAPTIONS: &[(&str, &str, &str)] = &[
    ("v01", "c01", "stir food in the pan"),
    ("v02", "c02", "mix the ingredients in the pan together"),
    ("v03", "c03", "cut the tomato into slices"),
    ("v04", "c04", "slice a tomato on the board"),
    ("v05", "c05", "pour water into the pot"),
    ("v06", "c06", "boil water in a pot"),
    ("v07", "c07", "add salt to the soup"),
    ("v08", "c08", "season the soup with salt and pepper"),
    ("v09", "c09", "fry the onion in oil"),
    ("v10", "c10", "chop the onion finely"),
    ("v11", "c11", "whisk the eggs in a bowl"),
    ("v12", "c12", "beat eggs with a fork"),
    ("v13", "c13", "knead the dough"),
    ("v14", "c14", "roll out the dough thin"),
    ("v15", "c15", "grate cheese over the pasta"),
    ("v16", "c16", "drain the pasta"),
    ("v17", "c17", "wash the lettuce"),
    ("v18", "c18", "peel the potato"),
    ("v19", "c19", "bake the bread in the oven"),
    ("v20", "c20", "serve the cake on a plate"),
];

fn semsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = semsim(args);
    assert!(
        out.status.success(),
        "semsim {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_captions(dir: &Path, rows: &[(&str, &str, &str)]) -> PathBuf {
    let path = dir.join("captions.jsonl");
    let body: String = rows
        .iter()
        .map(|(v, c, t)| {
            format!("{{\"video_id\":\"{v}\",\"caption_id\":\"{c}\",\"text\":\"{t}\"}}\n")
        })
        .collect();
    fs::write(&path, body).unwrap();
    path
}

fn process_fixture(dir: &Path, rows: &[(&str, &str, &str)]) -> PathBuf {
    let captions = write_captions(dir, rows);
    let out = dir.join("processed.jsonl");
    ok(&["process", "--captions", p(&captions), "--out", p(&out)]);
    out
}

fn simmat(dir: &Path, processed: &Path, proxy: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(format!("{proxy}{}.tsv", extra.len()));
    let mut args = vec![
        "simmat",
        "--processed",
        p(processed),
        "--proxy",
        proxy,
        "--out",
        p(&out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

fn read_tsv(path: &Path) -> BTreeMap<(String, String), f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            ((f[0].to_string(), f[1].to_string()), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn process_writes_one_line_per_caption_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let first = process_fixture(dir.path(), CAPTIONS);
    let bytes = fs::read(&first).unwrap();
    assert_eq!(
        bytes.iter().filter(|&&b| b == b'\n').count(),
        CAPTIONS.len()
    );
    let again = dir.path().join("again.jsonl");
    let captions = dir.path().join("captions.jsonl");
    ok(&["process", "--captions", p(&captions), "--out", p(&again)]);
    assert_eq!(fs::read(&again).unwrap(), bytes);
}

#[test]
fn missing_input_exits_with_two_and_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let captions = write_captions(dir.path(), CAPTIONS);
    let out = semsim(&[
        "process",
        "--captions",
        p(&captions),
        "--stoplist",
        "/no/such/stoplist.txt",
        "--out",
        p(&dir.path().join("x")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--stoplist"));

    let out = semsim(&[
        "simmat",
        "--processed",
        p(&captions),
        "--proxy",
        "cosine",
        "--out",
        "x",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--proxy"));
}

#[test]
fn bow_matrix_matches_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let processed = process_fixture(dir.path(), CAPTIONS);
    let got = read_tsv(&simmat(dir.path(), &processed, "bow", &[]));

    let pipeline = Pipeline::default();
    let caps: Vec<_> = CAPTIONS
        .iter()
        .map(|(v, c, t)| pipeline.process_text(c, v, t))
        .collect();
    let mut expected = BTreeMap::new();
    for a in &caps {
        for b in &caps {
            let s = if a.video_id == b.video_id {
                1.0
            } else {
                sim_bow(&a.words, &b.words)
            };
            if s > 0.0 {
                expected.insert((a.video_id.0.clone(), b.caption_id.0.clone()), s);
            }
        }
    }
    assert_eq!(
        got.keys().collect::<Vec<_>>(),
        expected.keys().collect::<Vec<_>>()
    );
    for (k, v) in &expected {
        assert!((got[k] - v).abs() <= 5e-7, "{k:?}");
    }
    for (v, c, _) in CAPTIONS {
        assert_eq!(got[&(v.to_string(), c.to_string())], 1.0);
    }

    // The naive path writes the same bytes.
    let naive = simmat(dir.path(), &processed, "bow", &["--naive"]);
    assert_eq!(
        fs::read(naive).unwrap(),
        fs::read(dir.path().join("bow0.tsv")).unwrap()
    );
}

#[test]
fn syn_with_empty_map_equals_pos() {
    let dir = tempfile::tempdir().unwrap();
    let processed = process_fixture(dir.path(), CAPTIONS);
    let empty = dir.path().join("empty.tsv");
    fs::write(&empty, "# nothing\n").unwrap();
    let syn = simmat(dir.path(), &processed, "syn", &["--synsets", p(&empty)]);
    let pos = simmat(dir.path(), &processed, "pos", &[]);
    assert_eq!(fs::read(syn).unwrap(), fs::read(pos).unwrap());
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let processed = process_fixture(dir.path(), CAPTIONS);
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("met{workers}.tsv"));
        ok(&[
            "--workers",
            workers,
            "simmat",
            "--processed",
            p(&processed),
            "--proxy",
            "met",
            "--out",
            p(&out),
        ]);
        outputs.push(fs::read(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn eval_reports_perfect_and_random_runs() {
    let dir = tempfile::tempdir().unwrap();
    let processed = process_fixture(dir.path(), CAPTIONS);
    let syn = simmat(dir.path(), &processed, "syn", &[]);
    let matrix = SimilarityMatrix::load(&syn).unwrap();
    let captions = dir.path().join("captions.jsonl");

    // Ranking by the matrix itself is ideal.
    let perfect = dir.path().join("perfect.bin");
    RetrievalRun::from_similarity(&matrix)
        .unwrap()
        .write_dense(&perfect)
        .unwrap();
    let report_path = dir.path().join("report.json");
    let sim_arg = format!("syn={}", syn.display());
    ok(&[
        "eval",
        "--run",
        p(&perfect),
        "--sim",
        &sim_arg,
        "--captions",
        p(&captions),
        "--bounds",
        "0.8",
        "--out",
        p(&report_path),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["ndcg/syn"], 1.0);
    assert_eq!(report["v2t/R@1"], 100.0);
    assert_eq!(report["direction"], "both");

    // A fixed scrambled ranking agrees with the library.
    let n = matrix.num_items();
    let rankings: Vec<Vec<usize>> = (0..matrix.num_queries())
        .map(|q| (0..n).map(|i| (i * 7 + q) % n).collect())
        .collect();
    let run = RetrievalRun::from_rankings(
        matrix.query_ids().to_vec(),
        matrix.item_ids().to_vec(),
        rankings,
    )
    .unwrap();
    let run_path = dir.path().join("run.jsonl");
    run.write_jsonl(fs::File::create(&run_path).unwrap())
        .unwrap();
    let out = ok(&[
        "eval",
        "--run",
        p(&run_path),
        "--sim",
        &sim_arg,
        "--captions",
        p(&captions),
        "--ndcg",
    ]);
    let cli: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let pairs: Vec<(String, String)> = CAPTIONS
        .iter()
        .map(|(v, c, _)| (v.to_string(), c.to_string()))
        .collect();
    let lib = evaluate(
        &Evaluation {
            video_to_text: Some(&run),
            text_to_video: None,
            pairs: &pairs,
            sims: &[("syn".to_string(), matrix)],
        },
        &EvalOptions::default(),
    )
    .unwrap();
    assert_eq!(
        cli["ndcg/syn/v2t"].as_f64().unwrap(),
        lib.get("ndcg/syn/v2t").unwrap()
    );
    assert_eq!(cli["direction"], "v2t");
}

#[test]
fn bounds_without_equivalents_are_equal() {
    let dir = tempfile::tempdir().unwrap();
    let processed = process_fixture(dir.path(), CAPTIONS);
    let bow = simmat(dir.path(), &processed, "bow", &[]);
    let matrix = SimilarityMatrix::load(&bow).unwrap();
    assert!((0..matrix.num_queries()).all(|q| matrix
        .row(q)
        .iter()
        .filter(|&&(_, s)| s > 0.8)
        .count()
        == 1));
    let n = matrix.num_items();
    let rankings = (0..n)
        .map(|q| (0..n).map(|i| (i + q + 3) % n).collect())
        .collect();
    let run = RetrievalRun::from_rankings(
        matrix.query_ids().to_vec(),
        matrix.item_ids().to_vec(),
        rankings,
    )
    .unwrap();
    let run_path = dir.path().join("run.jsonl");
    run.write_jsonl(fs::File::create(&run_path).unwrap())
        .unwrap();
    let captions = dir.path().join("captions.jsonl");
    let out = ok(&[
        "eval",
        "--run",
        p(&run_path),
        "--sim",
        &format!("bow={}", bow.display()),
        "--captions",
        p(&captions),
        "--bounds",
        "0.8",
    ]);
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["v2t/bounds/bow/lower"], r["v2t/bounds/bow/observed"]);
    assert_eq!(r["v2t/bounds/bow/upper"], r["v2t/bounds/bow/observed"]);
}

#[test]
fn eval_lists_mismatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    let processed = process_fixture(dir.path(), CAPTIONS);
    let bow = simmat(dir.path(), &processed, "bow", &[]);
    let run_path = dir.path().join("run.jsonl");
    fs::write(&run_path, "{\"query_id\":\"zz\",\"ranking\":[\"c01\"]}\n").unwrap();
    let captions = dir.path().join("captions.jsonl");
    let out = semsim(&[
        "eval",
        "--run",
        p(&run_path),
        "--sim",
        p(&bow),
        "--captions",
        p(&captions),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("zz"));
}

#[test]
fn curve_correlate_and_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let same: Vec<(String, String, &str)> = (0..4)
        .map(|i| (format!("v{i}"), format!("c{i}"), "cut the onion"))
        .collect();
    let rows: Vec<(&str, &str, &str)> = same
        .iter()
        .map(|(v, c, t)| (v.as_str(), c.as_str(), *t))
        .collect();
    let processed = process_fixture(dir.path(), &rows);
    let bow = simmat(dir.path(), &processed, "bow", &[]);
    let curve = dir.path().join("curve.csv");
    ok(&[
        "curve",
        "--sim",
        &format!("bow={}", bow.display()),
        "--out",
        p(&curve),
    ]);
    let text = fs::read_to_string(&curve).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "threshold,bow");
    assert_eq!(lines.len(), 12);
    assert!(lines[1..].iter().all(|l| l.ends_with(",4.000000")));

    let dir2 = tempfile::tempdir().unwrap();
    let processed = process_fixture(dir2.path(), CAPTIONS);
    let met = simmat(dir2.path(), &processed, "met", &[]);
    let corr = dir2.path().join("corr.csv");
    ok(&[
        "correlate",
        "--sim",
        &format!("a={}", met.display()),
        "--sim",
        &format!("b={}", met.display()),
        "--out",
        p(&corr),
    ]);
    let text = fs::read_to_string(&corr).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("a,b,1.000000,"));

    // Captions c01..c05 of one video, all annotators agreeing with the proxy.
    let matrix = SimilarityMatrix::from_dense(
        vec!["v".into()],
        (1..=5).map(|i| format!("c{i}")).collect(),
        &[1.0, 0.8, 0.6, 0.4, 0.2],
    )
    .unwrap();
    let sim_path = dir2.path().join("study.tsv");
    matrix.save_tsv(&sim_path).unwrap();
    let orderings = dir2.path().join("orderings.jsonl");
    fs::write(
        &orderings,
        r#"{"video_id":"v","caption_ids":["c1","c2","c3","c4","c5"],"orderings":[[0,1,2,3,4],[0,1,2,3,4],[0,1,2,3,4]]}
"#,
    )
    .unwrap();
    let out_csv = dir2.path().join("agreement.csv");
    ok(&[
        "agreement",
        "--orderings",
        p(&orderings),
        "--sim",
        &format!("syn={}", sim_path.display()),
        "--out",
        p(&out_csv),
    ]);
    assert_eq!(
        fs::read_to_string(&out_csv).unwrap(),
        "proxy,videos,consistent_pct,agreement_pct\nsyn,1,100.000000,100.000000\n"
    );
}

fn write_features(dir: &Path) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
    let data = PlantedClusters {
        items: 40,
        clusters: 4,
        ..PlantedClusters::default()
    }
    .generate(5)
    .unwrap();
    let csv = |ids: &[String], m: &ndarray::Array2<f64>| -> String {
        ids.iter()
            .zip(m.outer_iter())
            .map(|(id, row)| {
                let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                format!("{id},{}\n", vals.join(","))
            })
            .collect()
    };
    let video = dir.join("video.csv");
    let caption = dir.join("caption.csv");
    fs::write(&video, csv(&data.features.video_ids, &data.features.video)).unwrap();
    fs::write(
        &caption,
        csv(&data.features.caption_ids, &data.features.caption),
    )
    .unwrap();
    let sim = dir.join("sim.tsv");
    data.sim.save_tsv(&sim).unwrap();
    let captions = dir.join("pairs.jsonl");
    let body: String = data
        .pairs
        .iter()
        .map(|(v, c)| format!("{{\"video_id\":\"{v}\",\"caption_id\":\"{c}\"}}\n"))
        .collect();
    fs::write(&captions, body).unwrap();
    (video, caption, sim, captions)
}

#[test]
fn triplets_are_deterministic_and_recover_instances() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, sim, _) = write_features(dir.path());
    let a = dir.path().join("a.tsv");
    let b = dir.path().join("b.tsv");
    for out in [&a, &b] {
        ok(&[
            "triplets",
            "--sim",
            p(&sim),
            "--threshold",
            "1.0",
            "--count",
            "200",
            "--seed",
            "4",
            "--out",
            p(out),
        ]);
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(&f[0][1..], &f[1][1..], "{line}");
    }
    let out = semsim(&[
        "triplets",
        "--sim",
        p(&sim),
        "--threshold",
        "0",
        "--count",
        "5",
        "--seed",
        "1",
        "--out",
        p(&a),
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty negative pool"));
    let out = semsim(&[
        "triplets",
        "--sim",
        p(&sim),
        "--threshold",
        "0.5",
        "--count",
        "5",
        "--out",
        p(&a),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn training_sweep_emits_ten_finite_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (video, caption, sim, captions) = write_features(dir.path());
    let out_dir = dir.path().join("sweep");
    let sim_arg = format!("planted={}", sim.display());
    ok(&[
        "train",
        "--sim",
        p(&sim),
        "--video-features",
        p(&video),
        "--caption-features",
        p(&caption),
        "--captions",
        p(&captions),
        "--eval-sim",
        &sim_arg,
        "--sweep",
        "--epochs",
        "2",
        "--triplets",
        "200",
        "--seed",
        "3",
        "--out-dir",
        p(&out_dir),
    ]);
    let text = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "threshold,final_loss,ndcg/planted,v2t/GMR,t2v/GMR"
    );
    assert_eq!(lines.len(), 11);
    for line in &lines[1..] {
        let loss: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(loss.is_finite());
    }
    let thresholds: BTreeSet<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert!(thresholds.contains("0.1") && thresholds.contains("1.0"));
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (video, caption, sim, captions) = write_features(dir.path());
    let mut outputs = Vec::new();
    for name in ["one", "two"] {
        let out_dir = dir.path().join(name);
        ok(&[
            "train",
            "--sim",
            p(&sim),
            "--video-features",
            p(&video),
            "--caption-features",
            p(&caption),
            "--captions",
            p(&captions),
            "--ivr",
            "--epochs",
            "3",
            "--triplets",
            "300",
            "--seed",
            "8",
            "--out-dir",
            p(&out_dir),
        ]);
        outputs.push((
            fs::read(out_dir.join("model.bin")).unwrap(),
            fs::read(out_dir.join("loss.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(String::from_utf8_lossy(&outputs[0].1).lines().count(), 4);
}
