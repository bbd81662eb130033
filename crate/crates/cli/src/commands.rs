//! One function per subcommand. Each writes its files plus `manifest.json`
//! into the output directory and returns a short summary for the terminal.

use std::path::{Path, PathBuf};

use gmc::dca::{evaluate_alignment, DcaReport, Origin};
use gmc::downstream::{evaluate_robustness, train_probe_on_model, RobustnessTable};
use gmc::model::{train, GmcModel, Pathway, TrainOutcome};
use gmc::synthdata::{generate, MultimodalDataset, Split};
use gmc::Tensor;
use rayon::prelude::*;

use crate::checkpoint;
use crate::cli::{
    Command, ConfigArgs, EncodeArgs, EvalDcaArgs, EvalProbeArgs, GenDataArgs, SplitArg, SweepArgs,
    TrainArgs,
};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{
    ensure_dir, fmt_f64, read_dataset, read_matrix, write_dataset, write_json, write_matrix,
    write_table, LoadedDataset,
};
use crate::manifest::RunManifest;
use crate::pca::project_2d;

pub const CHECKPOINT_FILE: &str = "checkpoint.gmc";
pub const LOSS_TRACE_FILE: &str = "loss_trace.csv";
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";
pub const REPORT_FILE: &str = "report.json";
pub const OUTLIERS_FILE: &str = "outliers.csv";
pub const PCA_FILE: &str = "pca.csv";
pub const ROBUSTNESS_FILE: &str = "robustness.csv";
pub const ALIGNMENT_FILE: &str = "dca.csv";
pub const GRID_FILE: &str = "grid.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const CONFIG_FILE: &str = "config.json";

pub fn run(command: &Command) -> Result<String> {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Encode(a) => encode(a),
        Command::EvalDca(a) => eval_dca(a),
        Command::EvalProbe(a) => eval_probe(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    Ok(match args.seed {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    })
}

fn record_config(manifest: &mut RunManifest, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => manifest.input("config", p),
        None => Ok(()),
    }
}

fn record_dataset(manifest: &mut RunManifest, loaded: &LoadedDataset) -> Result<()> {
    loaded
        .files
        .iter()
        .try_for_each(|f| manifest.input("dataset", f))
}

/// Parses a pathway flag and checks it against `modalities`.
pub fn parse_pathway(text: &str, modalities: usize) -> Result<Pathway> {
    let p: Pathway = text.parse().map_err(|e: gmc::Error| match e {
        gmc::Error::InvalidConfig { reason, .. } => CliError::config("pathway", reason),
        other => other.into(),
    })?;
    if let Pathway::Modality(m) = p {
        if m >= modalities {
            return Err(CliError::config(
                "pathway",
                format!(
                    "modality {} requested but the model has {modalities}",
                    m + 1
                ),
            ));
        }
    }
    Ok(p)
}

fn split_indices(ds: &MultimodalDataset, split: SplitArg) -> Vec<usize> {
    match split {
        SplitArg::All => (0..ds.len()).collect(),
        SplitArg::Train => ds.indices(Split::Train),
        SplitArg::Test => ds.indices(Split::Test),
    }
}

/// Latents of the samples `indices` through `pathway`.
pub fn encode_rows(
    model: &GmcModel,
    ds: &MultimodalDataset,
    indices: &[usize],
    pathway: Pathway,
) -> Result<Tensor> {
    let batch = ds.batch(indices)?;
    let x = match pathway {
        Pathway::Complete => &batch.complete,
        Pathway::Modality(m) => &batch.modalities[m],
    };
    Ok(model.encode(pathway, x)?)
}

fn gen_data(args: &GenDataArgs) -> Result<String> {
    let cfg = load_config(&args.config)?;
    let ds = generate(&cfg.data)?;
    ensure_dir(&args.out)?;
    let files = write_dataset(&args.out, &ds, &cfg.data)?;
    let mut manifest = RunManifest::new("gen-data").with_config(&cfg, cfg.data.seed);
    record_config(&mut manifest, args.config.config.as_deref())?;
    for f in &files {
        manifest.output(&args.out, f)?;
    }
    manifest.write(&args.out)?;
    Ok(format!(
        "wrote {} samples in {} modalities to {}",
        ds.len(),
        ds.modality_count(),
        args.out.display()
    ))
}

fn write_trace(path: &Path, outcome: &TrainOutcome) -> Result<()> {
    let header = ["epoch", "mean_loss", "batches"].map(String::from);
    write_table(
        path,
        &header,
        outcome.trace.iter().map(|r| {
            [
                r.epoch.to_string(),
                fmt_f64(r.mean_loss),
                r.batches.to_string(),
            ]
        }),
    )
}

/// Builds and trains the model described by `cfg` on `ds`.
pub fn fit(cfg: &RunConfig, ds: &MultimodalDataset) -> Result<TrainOutcome> {
    let model = GmcModel::new(&ds.input_dims(), &cfg.model, cfg.train.seed)?;
    Ok(train(model, ds, &cfg.train)?)
}

fn train_cmd(args: &TrainArgs) -> Result<String> {
    let mut cfg = load_config(&args.config)?;
    if let Some(loss) = args.loss {
        cfg = cfg.with_loss(loss.into());
    }
    let loaded = read_dataset(&args.data)?;
    let outcome = fit(&cfg, &loaded.dataset)?;
    ensure_dir(&args.out)?;
    checkpoint::save(&args.out.join(CHECKPOINT_FILE), &outcome.model)?;
    write_trace(&args.out.join(LOSS_TRACE_FILE), &outcome)?;

    let mut manifest = RunManifest::new("train").with_config(&cfg, cfg.train.seed);
    record_config(&mut manifest, args.config.config.as_deref())?;
    record_dataset(&mut manifest, &loaded)?;
    manifest.output(&args.out, CHECKPOINT_FILE)?;
    manifest.output(&args.out, LOSS_TRACE_FILE)?;
    manifest.write(&args.out)?;
    let last = outcome.trace.last().map_or(f64::NAN, |r| r.mean_loss);
    Ok(format!(
        "trained {} epochs, final mean per-term loss {last:.6}",
        outcome.trace.len()
    ))
}

fn encode(args: &EncodeArgs) -> Result<String> {
    let model = checkpoint::load(&args.checkpoint)?;
    let loaded = read_dataset(&args.data)?;
    let pathway = parse_pathway(&args.pathway, model.modality_count())?;
    let indices = split_indices(&loaded.dataset, args.split);
    let z = encode_rows(&model, &loaded.dataset, &indices, pathway)?;
    ensure_dir(&args.out)?;
    write_matrix(&args.out.join(EMBEDDINGS_FILE), "z", &z)?;

    let mut manifest = RunManifest::new("encode");
    manifest.param("pathway", pathway);
    manifest.param("split", format!("{:?}", args.split).to_lowercase());
    manifest.input("checkpoint", &args.checkpoint)?;
    record_dataset(&mut manifest, &loaded)?;
    manifest.output(&args.out, EMBEDDINGS_FILE)?;
    manifest.write(&args.out)?;
    Ok(format!(
        "encoded {} samples through pathway {pathway}",
        z.rows()
    ))
}

fn origin_name(o: Origin) -> &'static str {
    match o {
        Origin::Reference => "R",
        Origin::Evaluation => "E",
    }
}

/// Writes `report.json`, `outliers.csv` and `pca.csv` for one R/E pair.
pub fn write_alignment(
    dir: &Path,
    reference: &Tensor,
    evaluation: &Tensor,
    report: &DcaReport,
) -> Result<()> {
    write_json(&dir.join(REPORT_FILE), report)?;
    let n_r = reference.rows();
    let locate = |v: usize| {
        if v < n_r {
            (Origin::Reference, v)
        } else {
            (Origin::Evaluation, v - n_r)
        }
    };
    let header = ["vertex", "set", "row"].map(String::from);
    write_table(
        &dir.join(OUTLIERS_FILE),
        &header,
        report.outliers.iter().map(|&v| {
            let (o, row) = locate(v);
            [v.to_string(), origin_name(o).to_string(), row.to_string()]
        }),
    )?;
    let pooled = Tensor::from_rows(
        &(0..n_r)
            .map(|i| reference.row(i))
            .chain((0..evaluation.rows()).map(|i| evaluation.row(i)))
            .collect::<Vec<_>>(),
    )?;
    let proj = project_2d(&pooled)?;
    let header = ["vertex", "set", "row", "pc1", "pc2"].map(String::from);
    write_table(
        &dir.join(PCA_FILE),
        &header,
        proj.coords.iter().enumerate().map(|(v, c)| {
            let (o, row) = locate(v);
            [
                v.to_string(),
                origin_name(o).to_string(),
                row.to_string(),
                fmt_f64(c[0]),
                fmt_f64(c[1]),
            ]
        }),
    )
}

fn eval_dca(args: &EvalDcaArgs) -> Result<String> {
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    let k = args.k.unwrap_or(cfg.dca.k);
    if k == 0 {
        return Err(CliError::config("k", "must be positive"));
    }
    let reference = read_matrix(&args.reference, "z")?;
    let evaluation = read_matrix(&args.evaluation, "z")?;
    if k >= reference.rows() + evaluation.rows() {
        return Err(CliError::config(
            "k",
            format!(
                "must be below the {} pooled points",
                reference.rows() + evaluation.rows()
            ),
        ));
    }
    let report = evaluate_alignment(&reference, &evaluation, k)?;
    ensure_dir(&args.out)?;
    write_alignment(&args.out, &reference, &evaluation, &report)?;

    let mut manifest = RunManifest::new("eval-dca");
    manifest.param("k", k);
    if let Some(p) = &args.config {
        manifest.input("config", p)?;
    }
    manifest.input("reference", &args.reference)?;
    manifest.input("evaluation", &args.evaluation)?;
    for f in [REPORT_FILE, OUTLIERS_FILE, PCA_FILE] {
        manifest.output(&args.out, f)?;
    }
    manifest.write(&args.out)?;
    Ok(format!(
        "score {:.4} (precision {:.4}, recall {:.4}, quality {:.4})",
        report.score, report.precision, report.recall, report.network_quality
    ))
}

fn write_robustness(path: &Path, table: &RobustnessTable) -> Result<()> {
    let header = ["pathway", "split", "accuracy"].map(String::from);
    write_table(
        path,
        &header,
        table.rows.iter().map(|r| {
            [
                r.pathway.to_string(),
                table.split.to_string(),
                fmt_f64(r.accuracy),
            ]
        }),
    )
}

fn eval_probe(args: &EvalProbeArgs) -> Result<String> {
    let cfg = load_config(&args.config)?;
    let model = checkpoint::load(&args.checkpoint)?;
    let loaded = read_dataset(&args.data)?;
    let probe = train_probe_on_model(&model, &loaded.dataset, &cfg.probe)?;
    let table = evaluate_robustness(&model, &probe, &loaded.dataset, Split::Test)?;
    ensure_dir(&args.out)?;
    write_robustness(&args.out.join(ROBUSTNESS_FILE), &table)?;

    let mut manifest = RunManifest::new("eval-probe").with_config(&cfg, cfg.probe.seed);
    record_config(&mut manifest, args.config.config.as_deref())?;
    manifest.input("checkpoint", &args.checkpoint)?;
    record_dataset(&mut manifest, &loaded)?;
    manifest.output(&args.out, ROBUSTNESS_FILE)?;
    manifest.write(&args.out)?;
    Ok(table
        .rows
        .iter()
        .map(|r| format!("{:>8}  {:.4}", r.pathway, r.accuracy))
        .collect::<Vec<_>>()
        .join("\n"))
}

/// Probe robustness and per-modality alignment of one trained model.
#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub robustness: RobustnessTable,
    /// Complete test latents as reference against each modality's.
    pub alignment: Vec<DcaReport>,
}

pub fn evaluate_model(
    model: &GmcModel,
    ds: &MultimodalDataset,
    cfg: &RunConfig,
) -> Result<RunMetrics> {
    let probe = train_probe_on_model(model, ds, &cfg.probe)?;
    let robustness = evaluate_robustness(model, &probe, ds, Split::Test)?;
    let test = ds.indices(Split::Test);
    let reference = encode_rows(model, ds, &test, Pathway::Complete)?;
    let alignment = (0..ds.modality_count())
        .map(|m| {
            let e = encode_rows(model, ds, &test, Pathway::Modality(m))?;
            Ok(evaluate_alignment(&reference, &e, cfg.dca.k)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunMetrics {
        robustness,
        alignment,
    })
}

fn write_alignment_table(path: &Path, k: usize, reports: &[DcaReport]) -> Result<()> {
    let header = [
        "reference",
        "evaluation",
        "k",
        "precision",
        "recall",
        "network_quality",
        "network_consistency",
        "score",
    ]
    .map(String::from);
    write_table(
        path,
        &header,
        reports.iter().enumerate().map(|(m, r)| {
            [
                "complete".to_string(),
                (m + 1).to_string(),
                k.to_string(),
                fmt_f64(r.precision),
                fmt_f64(r.recall),
                fmt_f64(r.network_quality),
                fmt_f64(r.network_consistency),
                fmt_f64(r.score),
            ]
        }),
    )
}

fn run_point(cfg: &RunConfig, ds: &MultimodalDataset, dir: &Path) -> Result<RunMetrics> {
    ensure_dir(dir)?;
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    let outcome = fit(cfg, ds)?;
    checkpoint::save(&dir.join(CHECKPOINT_FILE), &outcome.model)?;
    write_trace(&dir.join(LOSS_TRACE_FILE), &outcome)?;
    let metrics = evaluate_model(&outcome.model, ds, cfg)?;
    write_robustness(&dir.join(ROBUSTNESS_FILE), &metrics.robustness)?;
    write_alignment_table(&dir.join(ALIGNMENT_FILE), cfg.dca.k, &metrics.alignment)?;
    let mut manifest = RunManifest::new("sweep-point").with_config(cfg, cfg.train.seed);
    for f in [
        CONFIG_FILE,
        CHECKPOINT_FILE,
        LOSS_TRACE_FILE,
        ROBUSTNESS_FILE,
        ALIGNMENT_FILE,
    ] {
        manifest.output(dir, f)?;
    }
    manifest.write(dir)?;
    Ok(metrics)
}

pub fn run_dir_name(i: usize) -> String {
    format!("run_{i:03}")
}

fn sweep(args: &SweepArgs) -> Result<String> {
    let mut cfg = load_config(&args.config)?;
    if let Some(loss) = args.loss {
        cfg = cfg.with_loss(loss.into());
    }
    let grid = cfg.grid();
    let ds = generate(&cfg.data)?;
    ensure_dir(&args.out)?;
    let data_dir = args.out.join("data");
    ensure_dir(&data_dir)?;
    write_dataset(&data_dir, &ds, &cfg.data)?;

    let metrics = grid
        .par_iter()
        .enumerate()
        .map(|(i, point)| run_point(&cfg.at(point), &ds, &args.out.join(run_dir_name(i))))
        .collect::<Result<Vec<_>>>()?;

    let labels: Vec<String> = grid.iter().map(|p| cfg.label(p)).collect();
    let header = [
        "run",
        "label",
        "tau",
        "intermediate_dim",
        "latent_dim",
        "loss_variant",
    ]
    .map(String::from);
    write_table(
        &args.out.join(GRID_FILE),
        &header,
        grid.iter().enumerate().map(|(i, p)| {
            [
                run_dir_name(i),
                labels[i].clone(),
                p.tau.get().to_string(),
                p.intermediate_dim.to_string(),
                p.latent_dim.to_string(),
                p.loss_variant.to_string(),
            ]
        }),
    )?;

    let mut header = vec!["metric".to_string()];
    header.extend(labels.iter().cloned());
    let mut rows: Vec<Vec<String>> = Vec::new();
    if let Some(first) = metrics.first() {
        for (r, row) in first.robustness.rows.iter().enumerate() {
            let mut line = vec![format!("probe_accuracy/{}", row.pathway)];
            line.extend(
                metrics
                    .iter()
                    .map(|m| fmt_f64(m.robustness.rows[r].accuracy)),
            );
            rows.push(line);
        }
        for m in 0..first.alignment.len() {
            let mut line = vec![format!("dca_score/complete-{}", m + 1)];
            line.extend(metrics.iter().map(|x| fmt_f64(x.alignment[m].score)));
            rows.push(line);
        }
    }
    write_table(&args.out.join(AGGREGATE_FILE), &header, rows)?;

    let mut manifest = RunManifest::new("sweep").with_config(&cfg, cfg.train.seed);
    record_config(&mut manifest, args.config.config.as_deref())?;
    let mut outputs: Vec<PathBuf> = vec![GRID_FILE.into(), AGGREGATE_FILE.into()];
    outputs.extend(
        (0..grid.len()).map(|i| Path::new(&run_dir_name(i)).join(crate::manifest::MANIFEST_FILE)),
    );
    for f in &outputs {
        manifest.output(&args.out, &f.to_string_lossy())?;
    }
    manifest.write(&args.out)?;
    Ok(format!(
        "{} grid points written to {}",
        grid.len(),
        args.out.display()
    ))
}
