//! One function per subcommand. Each writes its artifacts with stable
//! formatting and no timestamps, so identical inputs and seeds give
//! bitwise-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sphnn_core::checkpoint::{load_checkpoint, save_checkpoint};
use sphnn_core::hin::save_graph;
use sphnn_core::hypergraph::pairwise_hypergraph;
use sphnn_core::model::backward::{grad_check_fixture, model_grad_check};
use sphnn_core::model::{ModelConfig, ModelParams};
use sphnn_core::synth::{generate, SynthConfig};
use sphnn_core::train::split_nodes;

use crate::config::{load_run_config, ModelOverrides, RunConfig};
use crate::error::CliError;
use crate::runner::{
    build_bundle, build_one, eval_split, load_dataset, mask_of, mean_std, train_model, Bundle,
    SplitReport,
};

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_bytes(path, text.as_bytes())
}

fn safe_name(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '.'
            }
        })
        .collect()
}

pub fn gen_synth(
    out: &Path,
    seed: Option<u64>,
    config: Option<&Path>,
) -> Result<(), CliError> {
    let mut scfg = match config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SynthConfig>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = seed {
        scfg.seed = seed;
    }
    let g = generate(&scfg)?;
    ensure_dir(out)?;
    save_graph(&g, out)?;
    write_json(&out.join("synth_config.json"), &scfg)?;
    println!(
        "wrote {} nodes, {} edges, {} classes to {}",
        g.n_nodes(),
        g.n_edges(),
        g.q(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct BuildEntry {
    id: String,
    instances_found: usize,
    instances_kept: usize,
    hypergraph_file: Option<String>,
}

pub fn build(
    data: &Path,
    motifs: &[PathBuf],
    out: &Path,
    max_instances: Option<usize>,
    seed: u64,
) -> Result<(), CliError> {
    let g = load_dataset(data)?;
    ensure_dir(out)?;
    let mut entries = Vec::new();
    for path in motifs {
        let json = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let (stats, hg) = build_one(&g, &json, max_instances, seed)?;
        let hypergraph_file = match &hg {
            Some(hg) => {
                let file = format!("hg_{}.json", safe_name(hg.motif_id()));
                write_json(&out.join(&file), &hg.export())?;
                Some(file)
            }
            None => None,
        };
        println!(
            "{}: {} instances, kept {}",
            stats.id, stats.instances_found, stats.instances_kept
        );
        entries.push(BuildEntry {
            id: stats.id,
            instances_found: stats.instances_found,
            instances_kept: stats.instances_kept,
            hypergraph_file,
        });
    }
    write_json(&out.join("build_stats.json"), &entries)?;
    Ok(())
}

/// Everything needed to rebuild a checkpoint's hypergraph bundle later:
/// the motif specs themselves plus the sampling settings.
#[derive(Serialize, serde::Deserialize)]
struct BundleSpec {
    motifs: Vec<serde_json::Value>,
    max_instances: Option<usize>,
    sample_seed: u64,
}

#[derive(Serialize)]
struct TrainReport {
    best_epoch: Option<usize>,
    epochs_run: usize,
    lambda: f64,
    val: SplitReport,
    test: SplitReport,
}

fn history_csv(history: &[sphnn_core::train::EpochStats]) -> Vec<Vec<String>> {
    history
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_loss.to_string(),
                e.val_acc.to_string(),
            ]
        })
        .collect()
}

fn resolve_out(flag: Option<&Path>, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set \"out\"".into()))
}

pub fn train_cmd(config: &Path, out_flag: Option<&Path>) -> Result<(), CliError> {
    let rc = load_run_config(config)?;
    let out = resolve_out(out_flag, &rc)?;
    let bundle = build_bundle(&rc)?;
    let mcfg = rc.model.apply(bundle.g.q());
    let outcome = train_model(&mcfg, &rc.train, &bundle)?;

    ensure_dir(&out)?;
    let ckpt = out.join("checkpoint");
    save_checkpoint(&ckpt, &mcfg, &rc.train, &outcome.params)?;
    let motifs: Vec<serde_json::Value> = bundle
        .motif_sources
        .iter()
        .map(|s| serde_json::from_str(s).expect("motif JSON reparses"))
        .collect();
    write_json(
        &ckpt.join("bundle.json"),
        &BundleSpec {
            motifs,
            max_instances: rc.max_instances,
            sample_seed: rc.sample_seed,
        },
    )?;
    write_csv(
        &out.join("history.csv"),
        "epoch,train_loss,val_loss,val_acc",
        &history_csv(&outcome.history),
    )?;
    let val = eval_split(&mcfg, &outcome.params, &bundle, &outcome.splits.val)?;
    let test = eval_split(&mcfg, &outcome.params, &bundle, &outcome.splits.test)?;
    let report = TrainReport {
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.history.len(),
        lambda: outcome.params.lambda_value(),
        val,
        test,
    };
    write_json(&out.join("report.json"), &report)?;
    let best = report
        .best_epoch
        .map_or_else(|| "-".to_string(), |e| e.to_string());
    println!(
        "trained {} epochs (best {best}): val acc {:.4}, test acc {:.4}; artifacts in {}",
        report.epochs_run,
        report.val.accuracy,
        report.test.accuracy,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    split: String,
    #[serde(flatten)]
    metrics: SplitReport,
}

pub fn eval_cmd(
    checkpoint: &Path,
    data: &Path,
    split: &str,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if !matches!(split, "train" | "val" | "test") {
        return Err(CliError::Config(format!(
            "unknown split \"{split}\" (expected train, val, or test)"
        )));
    }
    let text = fs::read_to_string(checkpoint.join("bundle.json"))
        .map_err(|e| CliError::Data(format!("{}: {e}", checkpoint.join("bundle.json").display())))?;
    let spec: BundleSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("bundle.json: {e}")))?;
    let g = load_dataset(data)?;
    let mut hgs = Vec::new();
    let mut motif_sources = Vec::new();
    for value in &spec.motifs {
        let json = value.to_string();
        let (_, hg) = build_one(&g, &json, spec.max_instances, spec.sample_seed)?;
        if let Some(hg) = hg {
            hgs.push(hg);
            motif_sources.push(json);
        }
    }
    let bundle = Bundle {
        g,
        hgs,
        motif_sources,
    };
    let (mcfg, tcfg, params) = load_checkpoint(checkpoint, &bundle.g, &bundle.hgs)?;
    let splits = split_nodes(&bundle.g, tcfg.label_rate, tcfg.seed)?;
    let mask = mask_of(&splits, split)?;
    let metrics = eval_split(&mcfg, &params, &bundle, mask)?;
    let report = EvalReport {
        split: split.to_string(),
        metrics,
    };
    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            write_json(&dir.join("report.json"), &report)?;
            println!(
                "{} accuracy {:.4}; report in {}",
                split,
                report.metrics.accuracy,
                dir.display()
            );
        }
        None => {
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Data(e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(())
}

/// `start:end:step`, inclusive, values snapped to 1e-9 to keep the grid
/// free of accumulated float drift.
pub fn parse_grid(grid: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = grid.split(':').collect();
    let bad = || CliError::Config(format!("grid \"{grid}\" is not start:end:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0 && start > 0.0 && start <= end) {
        return Err(CliError::Config(format!(
            "grid \"{grid}\" must satisfy 0 < start <= end with step > 0"
        )));
    }
    let n = ((end - start) / step).round() as usize;
    let snap = |x: f64| (x * 1e9).round() / 1e9;
    Ok((0..=n).map(|i| snap(start + step * i as f64)).collect())
}

pub fn sweep_lambda(config: &Path, grid: &str, out: Option<&Path>) -> Result<(), CliError> {
    let rc = load_run_config(config)?;
    let out = resolve_out(out, &rc)?;
    let lambdas = parse_grid(grid)?;
    for &l in &lambdas {
        if !(l > 0.0 && l <= 1.0) {
            return Err(CliError::Config(format!(
                "lambda {l} outside (0, 1]; adjust the grid"
            )));
        }
    }
    let bundle = build_bundle(&rc)?;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &lambda in &lambdas {
        let mut mcfg = rc.model.apply(bundle.g.q());
        mcfg.lambda = lambda;
        let outcome = train_model(&mcfg, &rc.train, &bundle)?;
        let val = eval_split(&mcfg, &outcome.params, &bundle, &outcome.splits.val)?;
        let test = eval_split(&mcfg, &outcome.params, &bundle, &outcome.splits.test)?;
        println!(
            "lambda {lambda}: val acc {:.4}, test acc {:.4}",
            val.accuracy, test.accuracy
        );
        results.push((lambda, val.accuracy, test.accuracy));
    }
    // Unique winner by validation accuracy; ties go to the smaller lambda.
    let best = results
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.1.partial_cmp(&b.1)
                .unwrap()
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
        .unwrap();
    for (i, (lambda, val_acc, test_acc)) in results.iter().enumerate() {
        rows.push(vec![
            lambda.to_string(),
            val_acc.to_string(),
            test_acc.to_string(),
            usize::from(i == best).to_string(),
        ]);
    }
    ensure_dir(&out)?;
    write_csv(
        &out.join("lambda_sweep.csv"),
        "lambda,val_acc,test_acc,best",
        &rows,
    )?;
    println!(
        "best lambda {} (val acc {:.4}); grid in {}",
        results[best].0,
        results[best].1,
        out.join("lambda_sweep.csv").display()
    );
    Ok(())
}

pub fn parse_rates(rates: &str) -> Result<Vec<f64>, CliError> {
    let out: Result<Vec<f64>, _> = rates
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("rate \"{p}\" is not a number")))
        })
        .collect();
    let out = out?;
    if out.is_empty() {
        return Err(CliError::Config("empty rate list".into()));
    }
    for &r in &out {
        if !(r > 0.0 && r < 1.0) {
            return Err(CliError::Config(format!("rate {r} outside (0, 1)")));
        }
    }
    Ok(out)
}

pub fn sweep_label_rate(
    config: &Path,
    rates: &str,
    seeds: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if seeds == 0 {
        return Err(CliError::Config("need at least one seed".into()));
    }
    let rc = load_run_config(config)?;
    let out = resolve_out(out, &rc)?;
    let rates = parse_rates(rates)?;
    let bundle = build_bundle(&rc)?;
    let mcfg = rc.model.apply(bundle.g.q());
    let mut rows = Vec::new();
    for &rate in &rates {
        let mut accs = Vec::new();
        for i in 0..seeds {
            let mut tcfg = rc.train.clone();
            tcfg.label_rate = rate;
            tcfg.seed = rc.train.seed.wrapping_add(i as u64);
            let outcome = train_model(&mcfg, &tcfg, &bundle)?;
            let test = eval_split(&mcfg, &outcome.params, &bundle, &outcome.splits.test)?;
            accs.push(test.accuracy);
        }
        let (mean, std) = mean_std(&accs);
        println!("rate {rate}: test acc {mean:.4} +- {std:.4} over {seeds} seeds");
        rows.push(vec![
            rate.to_string(),
            mean.to_string(),
            std.to_string(),
            seeds.to_string(),
        ]);
    }
    ensure_dir(&out)?;
    write_csv(
        &out.join("rate_sweep.csv"),
        "rate,mean_acc,std_acc,seeds",
        &rows,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct AblationRow {
    variant: String,
    seeds: usize,
    accuracy_mean: f64,
    accuracy_std: f64,
    macro_f1_mean: f64,
    micro_f1_mean: f64,
}

fn ablation_arm(
    variant: &str,
    mcfg: &ModelConfig,
    rc: &RunConfig,
    bundle: &Bundle,
    seeds: usize,
) -> Result<AblationRow, CliError> {
    let mut accs = Vec::new();
    let mut macros = Vec::new();
    let mut micros = Vec::new();
    for i in 0..seeds {
        let mut tcfg = rc.train.clone();
        tcfg.seed = rc.train.seed.wrapping_add(i as u64);
        let outcome = train_model(mcfg, &tcfg, bundle)?;
        let test = eval_split(mcfg, &outcome.params, bundle, &outcome.splits.test)?;
        accs.push(test.accuracy);
        macros.push(test.macro_f1);
        micros.push(test.micro_f1);
    }
    let (accuracy_mean, accuracy_std) = mean_std(&accs);
    println!("{variant}: test acc {accuracy_mean:.4} +- {accuracy_std:.4} over {seeds} seeds");
    Ok(AblationRow {
        variant: variant.to_string(),
        seeds,
        accuracy_mean,
        accuracy_std,
        macro_f1_mean: mean_std(&macros).0,
        micro_f1_mean: mean_std(&micros).0,
    })
}

pub fn ablate(config: &Path, seeds: usize, out: Option<&Path>) -> Result<(), CliError> {
    if seeds == 0 {
        return Err(CliError::Config("need at least one seed".into()));
    }
    let rc = load_run_config(config)?;
    let out = resolve_out(out, &rc)?;
    let bundle = build_bundle(&rc)?;
    let mcfg = rc.model.apply(bundle.g.q());

    let full = ablation_arm("full", &mcfg, &rc, &bundle, seeds)?;

    let pairwise = Bundle {
        hgs: vec![pairwise_hypergraph(&bundle.g)?],
        g: load_dataset(&rc.data)?,
        motif_sources: Vec::new(),
    };
    let no_hypergraph = ablation_arm("no-hypergraph", &mcfg, &rc, &pairwise, seeds)?;

    let mut nocfg = mcfg.clone();
    nocfg.use_attention = false;
    let no_attention = ablation_arm("no-attention", &nocfg, &rc, &bundle, seeds)?;

    let table = vec![full, no_hypergraph, no_attention];
    ensure_dir(&out)?;
    write_json(&out.join("ablation.json"), &table)?;
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                r.variant.clone(),
                r.seeds.to_string(),
                r.accuracy_mean.to_string(),
                r.accuracy_std.to_string(),
                r.macro_f1_mean.to_string(),
                r.micro_f1_mean.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("ablation.csv"),
        "variant,seeds,accuracy_mean,accuracy_std,macro_f1_mean,micro_f1_mean",
        &rows,
    )?;
    Ok(())
}

pub fn grad_check(
    config: Option<&Path>,
    step: f64,
    threshold: f64,
    seed: u64,
) -> Result<(), CliError> {
    let (g, hgs, mask) = grad_check_fixture();
    let overrides = match config {
        Some(path) => load_run_config(path)?.model,
        None => ModelOverrides::default(),
    };
    // Small widths by default so the finite-difference sweep stays fast;
    // a config can still override any architecture field.
    let mut base = ModelConfig::new(g.q());
    base.d_hidden = 6;
    base.d_att = 5;
    base.d_fuse = 4;
    let mcfg = overrides.apply_onto(base);
    let params = ModelParams::init(&mcfg, &g, &hgs, seed)?;
    let report = model_grad_check(&mcfg, &params, &g, &hgs, &mask, step, None)?;
    for (name, err) in &report.per_tensor {
        println!("{name:<16} {err:.3e}");
    }
    println!(
        "max relative error {:.3e} (threshold {threshold:e})",
        report.worst
    );
    if !report.worst.is_finite() || report.worst >= threshold {
        return Err(CliError::Numeric(format!(
            "gradient check failed: max relative error {:.3e} >= {threshold:e}",
            report.worst
        )));
    }
    Ok(())
}
