//! Release gate, run end to end against the library and the shipped binary:
//! numerical identities, dual-route oracle equivalences, the frozen-fixture
//! experiments, and artifact determinism. Each check prints one
//! `[PASS]`/`[FAIL]` line; run with
//! `cargo test --test acceptance -- --nocapture` to see them all.
//!
//! The checks run in name order and each one is self-contained; the
//! experiment checks rebuild the fixture dataset from scratch through the
//! binary so they exercise the same path a user would.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sphnn_core::hin::GraphBuilder;
use sphnn_core::hypergraph::{hypergraph_from_members, Hypergraph};
use sphnn_core::metrics::evaluate;
use sphnn_core::model::backward::grad_check_fixture;
use sphnn_core::model::ops::attention_incidence;
use sphnn_core::model::reference::reference_forward;
use sphnn_core::model::{forward, ModelConfig, ModelParams};
use sphnn_core::motif::{enumerate_by_exhaustion, enumerate_instances, parse_motif};
use sphnn_core::{Matrix, NodeId};

fn report(name: &str, ok: bool, detail: &str) {
    println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn sphnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphnn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn sphnn_ok(dir: &Path, args: &[&str]) -> String {
    let out = sphnn(dir, args);
    assert!(
        out.status.success(),
        "`sphnn {}` failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn pvp_motif_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../motifs/pvp.json")
        .canonicalize()
        .expect("shipped motif spec")
}

/// Generates the fixture dataset under `root/data` and writes a run config
/// next to it that trains the default model on the PVP bundle.
fn make_fixture(root: &Path) -> PathBuf {
    sphnn_ok(root, &["gen-synth", "--out", "data"]);
    let cfg = serde_json::json!({
        "data": "data",
        "motifs": [pvp_motif_path().to_str().unwrap()],
        "model": {},
        "train": {},
    });
    let path = root.join("cfg.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn csv_body(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Every file under `dir` as (relative path, bytes), sorted.
fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn c01_gradient_check_within_tolerance_and_budget() {
    let t0 = Instant::now();
    let stdout = sphnn_ok(Path::new("."), &["grad-check"]);
    let elapsed = t0.elapsed().as_secs_f64();
    let tensor_lines = stdout
        .lines()
        .filter(|l| l.contains("e-") && !l.contains("max relative"))
        .count();
    let max_line = stdout
        .lines()
        .find(|l| l.starts_with("max relative error"))
        .expect("summary line");
    let max_err: f64 = max_line
        .split_whitespace()
        .nth(3)
        .unwrap()
        .parse()
        .unwrap();
    let ok = max_err < 1e-4 && stdout.contains("lambda") && tensor_lines >= 10 && elapsed < 30.0;
    report(
        "gradient check",
        ok,
        &format!("max rel err {max_err:.3e} over {tensor_lines} tensors in {elapsed:.1}s"),
    );
}

#[test]
fn c02_motif_enumeration_matches_exhaustive_oracle() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let type_names = ["t0", "t1", "t2"];
    let etype_names = ["r0", "r1"];
    let mut total = 0usize;
    for _ in 0..100 {
        let mut b = GraphBuilder::new();
        let types = [
            b.node_type("t0", 1),
            b.node_type("t1", 1),
            b.node_type("t2", 1),
        ];
        let etypes = [b.edge_type("r0"), b.edge_type("r1")];
        let n = rng.gen_range(3..=12);
        let mut ids = Vec::new();
        for i in 0..n {
            let v = b
                .add_node(&format!("n{i}"), types[rng.gen_range(0..3)])
                .unwrap();
            b.set_features(v, vec![0.0]).unwrap();
            ids.push(v);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(0.35) {
                    b.add_edge(ids[i], ids[j], etypes[rng.gen_range(0..2)])
                        .unwrap();
                }
            }
        }
        let g = b.finish(2, types[0]).unwrap();

        let tt: Vec<&str> = (0..8)
            .map(|_| type_names[rng.gen_range(0..type_names.len())])
            .collect();
        let ee: Vec<&str> = (0..6)
            .map(|_| etype_names[rng.gen_range(0..etype_names.len())])
            .collect();
        let patterns = [
            format!(
                r#"{{"id":"P2","roles":[{{"name":"x","type":"{}"}},{{"name":"y","type":"{}"}}],"edges":[["x","y","{}"]]}}"#,
                tt[0], tt[1], ee[0]
            ),
            format!(
                r#"{{"id":"P3","roles":[{{"name":"x","type":"{}"}},{{"name":"y","type":"{}"}},{{"name":"z","type":"{}"}}],"edges":[["x","y","{}"],["y","z","{}"]]}}"#,
                tt[2], tt[3], tt[4], ee[1], ee[2]
            ),
            format!(
                r#"{{"id":"T3","roles":[{{"name":"x","type":"{}"}},{{"name":"y","type":"{}"}},{{"name":"z","type":"{}"}}],"edges":[["x","y","{}"],["y","z","{}"],["x","z","{}"]]}}"#,
                tt[5], tt[6], tt[7], ee[3], ee[4], ee[5]
            ),
        ];
        for pj in &patterns {
            let m = parse_motif(pj, &g).expect("generated patterns are valid");
            let fast: BTreeSet<Vec<NodeId>> = enumerate_instances(&g, &m)
                .instances
                .into_iter()
                .map(|i| i.assignment)
                .collect();
            let slow: BTreeSet<Vec<NodeId>> = enumerate_by_exhaustion(&g, &m)
                .instances
                .into_iter()
                .map(|i| i.assignment)
                .collect();
            assert_eq!(fast, slow, "pattern {pj} disagrees");
            total += fast.len();
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = total > 0 && elapsed < 60.0;
    report(
        "motif enumeration vs exhaustive oracle",
        ok,
        &format!("300 patterns over 100 graphs agree on {total} instances in {elapsed:.1}s"),
    );
}

fn random_hypergraph(rng: &mut ChaCha8Rng, max_n: usize, max_e: usize) -> Hypergraph {
    let n = rng.gen_range(2..=max_n);
    let ne = rng.gen_range(1..=max_e);
    let mut members = Vec::with_capacity(ne);
    let mut weights = Vec::with_capacity(ne);
    for _ in 0..ne {
        let arity = rng.gen_range(2..=4.min(n));
        let mut pool: Vec<usize> = (0..n).collect();
        let mut chosen = Vec::with_capacity(arity);
        for _ in 0..arity {
            let k = rng.gen_range(0..pool.len());
            chosen.push(NodeId(pool.swap_remove(k)));
        }
        members.push(chosen);
        weights.push(rng.gen_range(1..=5) as f64);
    }
    hypergraph_from_members("law", n, members, Some(weights)).unwrap()
}

#[test]
fn c03_adjacency_and_degree_laws_hold_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let hg = random_hypergraph(&mut rng, 30, 12);
        let (n, ne) = (hg.n_nodes(), hg.n_edges());
        let h = hg.incidence_dense();
        let w = hg.weights();
        let a = hg.adjacency();
        for i in 0..n {
            for j in 0..n {
                let mut naive = 0.0;
                for e in 0..ne {
                    naive += h.get(i, e) * w[e] * h.get(j, e);
                }
                assert!(
                    a.get(i, j) == naive,
                    "A[{i}][{j}] = {} but H W Ht gives {naive}",
                    a.get(i, j)
                );
                assert!(a.get(i, j) == a.get(j, i), "A not symmetric at ({i},{j})");
            }
        }
        let dv_sum: f64 = hg.node_degrees().iter().sum();
        let wd_sum: f64 = hg
            .edge_degrees()
            .iter()
            .zip(w)
            .map(|(delta, we)| we * delta)
            .sum();
        assert!(dv_sum == wd_sum, "degree law broke: {dv_sum} vs {wd_sum}");
    }
    report(
        "incidence matrix laws",
        true,
        "A == H W Ht, A symmetric, sum d(v) == sum w delta on 100 random hypergraphs",
    );
}

#[test]
fn c04_attention_columns_are_distributions_over_members() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (d, d_att) = (6, 5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let hg = random_hypergraph(&mut rng, 20, 8);
        let mut fill = |rows: usize, cols: usize| {
            Matrix::from_vec(
                rows,
                cols,
                (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        };
        let x = fill(hg.n_nodes(), d);
        let xe = fill(hg.n_edges(), d);
        let p = fill(d, d_att);
        let a = fill(1, 2 * d_att);
        let (inc, _) = attention_incidence(&hg, &x, &xe, &p, &a, 0.2).unwrap();
        let dense = inc.to_dense(&hg);
        let h = hg.incidence_dense();
        for e in 0..hg.n_edges() {
            let mut sum = 0.0;
            for v in 0..hg.n_nodes() {
                let got = dense.get(v, e);
                sum += got;
                let member = h.get(v, e) != 0.0;
                assert_eq!(
                    got != 0.0,
                    member,
                    "nonzero pattern differs from H at ({v},{e})"
                );
                if member {
                    assert!(got > 0.0, "member weight must be positive");
                }
            }
            worst = worst.max((sum - 1.0).abs());
        }
    }
    let ok = worst <= 1e-12;
    report(
        "attention column normalization",
        ok,
        &format!("100 random forwards, worst column-sum deviation {worst:.2e}"),
    );
}

#[test]
fn c05_attention_free_forward_matches_dense_reference() {
    let (g, hgs, _) = grad_check_fixture();
    let mut cfg = ModelConfig::new(2);
    cfg.d_hidden = 6;
    cfg.d_att = 5;
    cfg.d_fuse = 4;
    cfg.use_attention = false;
    cfg.lambda = 1.0;
    let params = ModelParams::init(&cfg, &g, &hgs, 1).unwrap();
    let sparse = forward(&cfg, &params, &g, &hgs, None).unwrap().z;
    let dense = reference_forward(&cfg, &params, &g, &hgs).unwrap();
    let mut worst = 0.0f64;
    for (s, r) in sparse.data().iter().zip(dense.data()) {
        worst = worst.max((s - r).abs());
    }
    let ok = worst <= 1e-10;
    report(
        "dense reference equivalence",
        ok,
        &format!("attention off, lambda 1: max |sparse - dense| = {worst:.2e}"),
    );
}

#[test]
fn c06_fixture_classification_reaches_090_within_budget() {
    let t0 = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = make_fixture(tmp.path());
    sphnn_ok(
        tmp.path(),
        &[
            "sweep-label-rate",
            "--config",
            cfg.to_str().unwrap(),
            "--rates",
            "0.4",
            "--seeds",
            "5",
            "--out",
            "out",
        ],
    );
    let rows = csv_body(&tmp.path().join("out/rate_sweep.csv"));
    assert_eq!(rows.len(), 1);
    let mean: f64 = rows[0][1].parse().unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = mean >= 0.90 && elapsed < 300.0;
    report(
        "fixture classification",
        ok,
        &format!("mean test accuracy {mean:.4} over 5 seeds at rate 0.4 in {elapsed:.0}s"),
    );
}

#[test]
fn c07_accuracy_grows_with_label_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = make_fixture(tmp.path());
    sphnn_ok(
        tmp.path(),
        &[
            "sweep-label-rate",
            "--config",
            cfg.to_str().unwrap(),
            "--rates",
            "0.1,0.6",
            "--seeds",
            "5",
            "--out",
            "out",
        ],
    );
    let rows = csv_body(&tmp.path().join("out/rate_sweep.csv"));
    assert_eq!(rows.len(), 2);
    let lo: f64 = rows[0][1].parse().unwrap();
    let hi: f64 = rows[1][1].parse().unwrap();
    let ok = hi - lo >= 0.03;
    report(
        "label-rate trend",
        ok,
        &format!("rate 0.1 -> {lo:.4}, rate 0.6 -> {hi:.4}, gain {:+.4}", hi - lo),
    );
}

#[test]
fn c08_full_model_tops_both_ablations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = make_fixture(tmp.path());
    sphnn_ok(
        tmp.path(),
        &["ablate", "--config", cfg.to_str().unwrap(), "--out", "ab"],
    );
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("ab/ablation.json")).unwrap())
            .unwrap();
    let acc = |variant: &str| -> f64 {
        rows.as_array()
            .unwrap()
            .iter()
            .find(|r| r["variant"] == variant)
            .unwrap_or_else(|| panic!("missing {variant} row"))["accuracy_mean"]
            .as_f64()
            .unwrap()
    };
    let (full, no_hg, no_att) = (acc("full"), acc("no-hypergraph"), acc("no-attention"));
    let ok = full >= no_att && full >= no_hg && full - no_hg >= 0.02;
    report(
        "ablation ordering",
        ok,
        &format!(
            "full {full:.4} vs no-attention {no_att:.4} vs no-hypergraph {no_hg:.4} (pairwise margin {:+.4})",
            full - no_hg
        ),
    );
}

#[test]
fn c09_lambda_sweep_emits_full_grid_with_unique_best() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = make_fixture(tmp.path());
    sphnn_ok(
        tmp.path(),
        &["sweep-lambda", "--config", cfg.to_str().unwrap(), "--out", "lam"],
    );
    let rows = csv_body(&tmp.path().join("lam/lambda_sweep.csv"));
    assert_eq!(rows.len(), 10, "expected the full 0.1..1.0 grid");
    let mut best_count = 0usize;
    for (k, row) in rows.iter().enumerate() {
        let lambda: f64 = row[0].parse().unwrap();
        let val: f64 = row[1].parse().unwrap();
        assert!(
            (lambda - 0.1 * (k + 1) as f64).abs() < 1e-9,
            "grid point {k} is {lambda}"
        );
        assert!(val.is_finite() && (0.0..=1.0).contains(&val));
        if row[3] == "1" {
            best_count += 1;
        }
    }
    let ok = best_count == 1;
    report(
        "lambda sweep grid",
        ok,
        &format!("10 grid points, {best_count} flagged best"),
    );
}

#[test]
fn c10_metric_identities_and_worked_example() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let q = rng.gen_range(2..=5);
        let n = rng.gen_range(1..=50);
        let y_true: Vec<usize> = (0..n).map(|_| rng.gen_range(0..q)).collect();
        let y_pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..q)).collect();
        let m = evaluate(&y_true, &y_pred, q).unwrap();
        worst = worst.max((m.micro_f1 - m.accuracy).abs());
    }
    let example = evaluate(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
    let ok = worst <= 1e-12 && (example.macro_f1 - 0.7333).abs() <= 1e-4;
    report(
        "metric identities",
        ok,
        &format!(
            "micro-F1 == accuracy within {worst:.2e} on 100 vectors; worked macro-F1 {:.4}",
            example.macro_f1
        ),
    );
}

#[test]
fn c11_artifact_commands_are_bitwise_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    sphnn_ok(root, &["gen-synth", "--out", "d1"]);
    sphnn_ok(root, &["gen-synth", "--out", "d2"]);
    let cfg = serde_json::json!({
        "data": "d1",
        "motifs": [pvp_motif_path().to_str().unwrap()],
        "model": {},
        "train": {"max_epochs": 60},
    });
    std::fs::write(
        root.join("cfg.json"),
        serde_json::to_string_pretty(&cfg).unwrap(),
    )
    .unwrap();
    let apa = pvp_motif_path().with_file_name("apa.json");
    let motifs = format!("{},{}", apa.display(), pvp_motif_path().display());

    let mut pairs: Vec<(&str, Vec<String>)> = Vec::new();
    pairs.push(("gen-synth", vec!["d1".into(), "d2".into()]));
    for out in ["b1", "b2"] {
        sphnn_ok(
            root,
            &[
                "build", "--data", "d1", "--motifs", &motifs, "--max-instances", "500", "--seed",
                "3", "--out", out,
            ],
        );
    }
    pairs.push(("build", vec!["b1".into(), "b2".into()]));
    for out in ["t1", "t2"] {
        sphnn_ok(root, &["train", "--config", "cfg.json", "--out", out]);
    }
    pairs.push(("train", vec!["t1".into(), "t2".into()]));
    for out in ["e1", "e2"] {
        sphnn_ok(
            root,
            &[
                "eval",
                "--checkpoint",
                "t1/checkpoint",
                "--data",
                "d1",
                "--out",
                out,
            ],
        );
    }
    pairs.push(("eval", vec!["e1".into(), "e2".into()]));
    for out in ["l1", "l2"] {
        sphnn_ok(
            root,
            &[
                "sweep-lambda",
                "--config",
                "cfg.json",
                "--grid",
                "0.2:0.4:0.1",
                "--out",
                out,
            ],
        );
    }
    pairs.push(("sweep-lambda", vec!["l1".into(), "l2".into()]));
    for out in ["r1", "r2"] {
        sphnn_ok(
            root,
            &[
                "sweep-label-rate",
                "--config",
                "cfg.json",
                "--rates",
                "0.2",
                "--seeds",
                "2",
                "--out",
                out,
            ],
        );
    }
    pairs.push(("sweep-label-rate", vec!["r1".into(), "r2".into()]));
    for out in ["a1", "a2"] {
        sphnn_ok(
            root,
            &[
                "ablate",
                "--config",
                "cfg.json",
                "--seeds",
                "2",
                "--out",
                out,
            ],
        );
    }
    pairs.push(("ablate", vec!["a1".into(), "a2".into()]));

    let mut files = 0usize;
    for (cmd, outs) in &pairs {
        let first = dir_bytes(&root.join(&outs[0]));
        let second = dir_bytes(&root.join(&outs[1]));
        assert!(!first.is_empty(), "{cmd} wrote nothing");
        assert_eq!(
            first.len(),
            second.len(),
            "{cmd} wrote different file sets"
        );
        for ((na, ba), (nb, bb)) in first.iter().zip(&second) {
            assert_eq!(na, nb, "{cmd} wrote different file names");
            assert!(ba == bb, "{cmd} artifact {na} differs between runs");
        }
        files += first.len();
    }
    let gc1 = sphnn_ok(root, &["grad-check"]);
    let gc2 = sphnn_ok(root, &["grad-check"]);
    let ok = gc1 == gc2;
    report(
        "artifact determinism",
        ok,
        &format!(
            "{} commands byte-identical across double runs ({files} files compared)",
            pairs.len() + 1
        ),
    );
}
