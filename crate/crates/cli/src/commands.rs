//! Command implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use ensat_core::diagnostics::{gradcheck_suite, CheckResult};
use ensat_core::dyngraph::{
    is_snapshot_cache, parse_edge_events, partition_snapshots, read_snapshot_cache, save_snapshot_cache,
};
use ensat_core::eval::MetricReport;
use ensat_core::experiment::{
    ablation, eval_pairs, evaluate_baselines, evaluate_model, metric_report, train_and_evaluate,
};
use ensat_core::model::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};
use ensat_core::synth::{gen_periodic, gen_recency};
use ensat_core::training::train;
use ensat_core::{MaskMode, Snapshot, SnapshotSequence};

use crate::config::{RunConfig, SynthKind};
use crate::UsageError;

pub const MODEL_METHOD: &str = "model";

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn prepare_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    fs::write(cfg.out.join("config.txt"), cfg.to_text())?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn data_path(cfg: &RunConfig) -> Result<&Path> {
    let path = cfg.data.as_deref().ok_or_else(|| usage("no input given (use --data PATH)"))?;
    if !path.is_file() {
        return Err(usage(format!("data file not found: {}", path.display())));
    }
    Ok(path)
}

/// Reads `--data`: a snapshot cache as is, or an edge list cut into
/// `snapshots` windows.
pub fn load_sequence(cfg: &RunConfig) -> Result<SnapshotSequence> {
    let path = data_path(cfg)?;
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let seq = if is_snapshot_cache(&bytes) {
        read_snapshot_cache(&bytes[..]).with_context(|| format!("loading {}", path.display()))?
    } else {
        let parsed = parse_edge_events(&bytes[..]).with_context(|| format!("parsing {}", path.display()))?;
        let n = parsed.node_count();
        partition_snapshots(&parsed.events, n, cfg.snapshots, cfg.directed, parsed.id_map)?
    };
    Ok(if cfg.binarize { seq.binarized() } else { seq })
}

/// History and target according to `history` (default: all but the last).
pub fn split_sequence(seq: &SnapshotSequence, cfg: &RunConfig) -> Result<(SnapshotSequence, Snapshot)> {
    if seq.len() < 2 {
        bail!(usage("need at least 2 snapshots to form a history and a target"));
    }
    let h = cfg.history.unwrap_or(seq.len() - 1);
    Ok(seq.history_and_target(h)?)
}

fn dataset_label(cfg: &RunConfig) -> String {
    cfg.dataset.clone().unwrap_or_else(|| {
        cfg.data
            .as_ref()
            .and_then(|p| p.file_stem())
            .map_or("data".into(), |s| s.to_string_lossy().into_owned())
    })
}

pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let seq = load_sequence(cfg)?;
    prepare_out(cfg)?;
    save_snapshot_cache(&seq, &cfg.out.join("snapshots.ensn"))?;
    let edges: Vec<usize> = seq.snapshots().iter().map(Snapshot::edge_count).collect();
    write_json(
        &cfg.out.join("ingest.json"),
        &json!({
            "config": cfg.entries(),
            "nodes": seq.node_count(),
            "snapshots": seq.len(),
            "directed": seq.is_directed(),
            "edges_per_snapshot": edges,
        }),
    )?;
    println!("{} nodes, {} snapshots, edges per snapshot {edges:?}", seq.node_count(), seq.len());
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let sc = cfg.synth_config();
    let graph = match cfg.synth_kind {
        SynthKind::Periodic => gen_periodic(&sc)?,
        SynthKind::Recency => gen_recency(&sc)?,
    };
    prepare_out(cfg)?;
    fs::write(cfg.out.join("edges.txt"), graph.to_edge_list())?;
    let edges: Vec<usize> = graph.full_sequence().snapshots().iter().map(Snapshot::edge_count).collect();
    write_json(
        &cfg.out.join("synth.json"),
        &json!({ "config": cfg.entries(), "edges_per_step": edges }),
    )?;
    println!("wrote {} ({} steps)", cfg.out.join("edges.txt").display(), edges.len());
    Ok(())
}

pub fn train_cmd(cfg: &RunConfig) -> Result<()> {
    let seq = load_sequence(cfg)?;
    let (history, _) = split_sequence(&seq, cfg)?;
    let settings = cfg.settings();
    prepare_out(cfg)?;
    let (params, report) = train(&history, &settings.model, &settings.walk, &settings.train)?;
    let checkpoint = Checkpoint {
        meta: CheckpointMeta {
            model: settings.model.clone(),
            num_nodes: history.node_count(),
            num_snapshots: history.len(),
            extra: json!({ "config": cfg.entries() }),
        },
        params,
    };
    save_checkpoint(&checkpoint, &cfg.out.join("checkpoint.enck"))?;
    write_json(&cfg.out.join("train_report.json"), &json!({ "config": cfg.entries(), "report": report }))?;
    write_json(&cfg.out.join("timing.json"), &json!({ "epoch_seconds": report.wall_time_secs }))?;
    println!(
        "trained {} epochs, best epoch {} (validation AUC {})",
        report.epochs.len(),
        report.best_epoch,
        report.best_val_auc().map_or("n/a".into(), |a| format!("{a:.4}"))
    );
    Ok(())
}

fn print_reports(rows: &[MetricReport]) {
    println!("{}", MetricReport::CSV_HEADER);
    for r in rows {
        println!("{}", r.csv_row());
    }
}

fn write_reports(cfg: &RunConfig, stem: &str, rows: &[MetricReport]) -> Result<()> {
    let csv: Vec<String> = rows.iter().map(MetricReport::csv_row).collect();
    write_csv(&cfg.out.join(format!("{stem}.csv")), MetricReport::CSV_HEADER, &csv)?;
    write_json(&cfg.out.join(format!("{stem}.json")), &json!({ "config": cfg.entries(), "reports": rows }))?;
    print_reports(rows);
    Ok(())
}

pub fn eval_cmd(cfg: &RunConfig) -> Result<()> {
    let seq = load_sequence(cfg)?;
    let (history, target) = split_sequence(&seq, cfg)?;
    let path: PathBuf = cfg.checkpoint.clone().unwrap_or_else(|| cfg.out.join("checkpoint.enck"));
    if !path.is_file() {
        bail!(usage(format!("checkpoint not found: {}", path.display())));
    }
    let checkpoint = load_checkpoint(&path).with_context(|| format!("loading {}", path.display()))?;
    if checkpoint.meta.num_nodes != history.node_count() {
        bail!(usage(format!(
            "checkpoint was trained on {} nodes but the data has {}",
            checkpoint.meta.num_nodes,
            history.node_count()
        )));
    }
    let mut settings = cfg.settings();
    settings.model = checkpoint.meta.model.clone();
    let pairs = eval_pairs(&history, &target, &settings)?;
    let label = dataset_label(cfg);
    let t_used = history.len();
    let model = evaluate_model(&history, &checkpoint.params, &settings.model, &pairs, &settings)?;
    let mut rows = vec![metric_report(&label, MODEL_METHOD, cfg.seed, t_used, &model, &pairs)];
    for (b, s) in evaluate_baselines(&history, &pairs)? {
        rows.push(metric_report(&label, b.label(), cfg.seed, t_used, &s, &pairs));
    }
    prepare_out(cfg)?;
    write_reports(cfg, "metrics", &rows)
}

pub fn ablate(cfg: &RunConfig) -> Result<()> {
    let seq = load_sequence(cfg)?;
    let (history, target) = split_sequence(&seq, cfg)?;
    prepare_out(cfg)?;
    let label = dataset_label(cfg);
    let rows: Vec<MetricReport> = ablation(&history, &target, &cfg.settings())?
        .into_iter()
        .map(|(variant, out)| metric_report(&label, variant.label(), cfg.seed, history.len(), &out.model, &out.pairs))
        .collect();
    write_reports(cfg, "ablation", &rows)
}

/// A parsed `--grid KEY=VALUES` specification.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub key: String,
    pub values: Vec<String>,
}

/// Parses `key=v1,v2,...` or `key=a..b` (inclusive). For `history`, the
/// upper bound may be `T`, meaning every snapshot but the last.
pub fn parse_grid(spec: &str, num_snapshots: usize) -> Result<Grid> {
    let (key, rest) = spec
        .split_once('=')
        .ok_or_else(|| usage(format!("invalid grid `{spec}`: expected KEY=VALUES")))?;
    let key = key.trim().to_string();
    let rest = rest.trim();
    let values: Vec<String> = if let Some((lo, hi)) = rest.split_once("..") {
        let bound = |s: &str| -> Result<usize> {
            if s == "T" {
                Ok(num_snapshots.saturating_sub(1))
            } else {
                s.trim().parse().map_err(|_| usage(format!("invalid grid bound `{s}` in `{spec}`")))
            }
        };
        let (lo, hi) = (bound(lo)?, bound(hi)?);
        if lo > hi {
            bail!(usage(format!("empty grid range in `{spec}`")));
        }
        (lo..=hi).map(|v| v.to_string()).collect()
    } else {
        rest.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect()
    };
    if values.is_empty() {
        bail!(usage(format!("grid `{spec}` has no values")));
    }
    let mut probe = RunConfig::default();
    for v in &values {
        probe.set(&key, v).map_err(|e| usage(format!("invalid grid `{spec}`: {e}")))?;
    }
    Ok(Grid { key, values })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub const SWEEP_HEADER: &str = "key,value,repeats,auc_mean,auc_std,map_mean,map_std";

pub fn sweep(cfg: &RunConfig, grid_spec: &str, repeats: usize) -> Result<()> {
    if repeats == 0 {
        bail!(usage("--repeats must be positive"));
    }
    let seq = load_sequence(cfg)?;
    let grid = parse_grid(grid_spec, seq.len())?;
    prepare_out(cfg)?;
    let mut rows = Vec::new();
    println!("{SWEEP_HEADER}");
    for value in &grid.values {
        let mut point = cfg.clone();
        point.set(&grid.key, value)?;
        point.model.validate()?;
        let (history, target) = split_sequence(&seq, &point)?;
        let (mut aucs, mut maps) = (Vec::new(), Vec::new());
        for r in 0..repeats {
            let mut run = point.clone();
            run.seed = cfg.seed + r as u64;
            let out = train_and_evaluate(&history, &target, &run.settings())?;
            aucs.push(out.model.auc);
            maps.push(out.model.map);
        }
        let (am, asd) = mean_std(&aucs);
        let (mm, msd) = mean_std(&maps);
        let row = format!("{},{value},{repeats},{am:.6},{asd:.6},{mm:.6},{msd:.6}", grid.key);
        println!("{row}");
        rows.push(row);
    }
    write_csv(&cfg.out.join("sweep.csv"), SWEEP_HEADER, &rows)
}

pub const GRADCHECK_HEADER: &str = "check,instances,max_rel_error,threshold,passed";

/// Runs the gradient-check suite; returns whether every check passed.
pub fn gradcheck(cfg: &RunConfig, mask: MaskMode) -> Result<bool> {
    let results: Vec<CheckResult> = gradcheck_suite(cfg.seed, mask)?;
    let rows: Vec<String> = results
        .iter()
        .map(|r| format!("{},{},{:.3e},{:.0e},{}", r.name, r.instances, r.max_rel_error, r.threshold, r.passed()))
        .collect();
    println!("{GRADCHECK_HEADER}");
    for r in &rows {
        println!("{r}");
    }
    prepare_out(cfg)?;
    write_csv(&cfg.out.join("gradcheck.csv"), GRADCHECK_HEADER, &rows)?;
    Ok(results.iter().all(CheckResult::passed))
}
