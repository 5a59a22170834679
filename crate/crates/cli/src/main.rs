use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use emomine::corpus::{generate_synthetic, split_folds, synthetic_embeddings, SynthSpec};
use emomine::harness::{
    emit_report, load_inputs, run_loaded, summarize_dataset, train_fold, Checkpoint, Experiment,
    ExperimentConfig, LoadedDataset, ReportFormat,
};
use emomine::{Dataset, LabelVocabulary};

#[derive(Parser)]
#[command(
    name = "emomine",
    version,
    about = "Multi-label emotion classification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean a raw JSONL dataset into canonical preprocessed form.
    Ingest(IngestArgs),
    /// Generate a synthetic corpus from a spec file.
    Synth(SynthArgs),
    /// Write the fold plan of each configured dataset.
    Folds(GridArgs),
    /// Label and labelset imbalance statistics with the labelset histogram.
    Imbalance(GridArgs),
    /// Train one experiment on one fold and save a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on its fold's test split or a whole dataset.
    Eval(EvalArgs),
    /// Run the full model × feature grid and write the report.
    Report(GridArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Raw JSONL file with `text` and `labels` per record.
    input: PathBuf,
    /// Built-in label set (`emotions9`, `emotions16`) or a labels file.
    #[arg(long, default_value = "emotions9")]
    labels: String,
    /// Dataset name; defaults to the input file stem.
    #[arg(long)]
    name: Option<String>,
    /// Take lexicon and stop-word paths from this config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Spec file (TOML).
    spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write label-clustered word vectors of this dimension.
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long, default_value_t = 0.3)]
    spread: f64,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; `report` defaults to the config's `output_dir`,
    /// the others print to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "json")]
    format: Vec<Format>,
    /// Restrict to one dataset.
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dataset: String,
    /// e.g. `RankSVM-PPT-BOW`
    #[arg(long)]
    experiment: Experiment,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Score every document of the dataset instead of the fold's test split.
    #[arg(long)]
    all: bool,
    /// Write `eval.json` here instead of printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Folds(a) => folds(a),
        Command::Imbalance(a) => imbalance(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config =
        ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn restrict(config: &mut ExperimentConfig, dataset: Option<&str>) -> Result<()> {
    if let Some(name) = dataset {
        config.datasets.retain(|d| d.name == name);
        if config.datasets.is_empty() {
            bail!("no dataset named `{name}` in the config");
        }
        config.comparison = None;
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("{}", path.display());
    Ok(())
}

fn emit(out: Option<&Path>, file: &str, contents: &str) -> Result<()> {
    match out {
        Some(dir) => {
            create_dir(dir)?;
            write_file(&dir.join(file), contents)
        }
        None => {
            std::io::stdout().write_all(contents.as_bytes())?;
            Ok(())
        }
    }
}

fn label_vocabulary(spec: &str) -> Result<LabelVocabulary> {
    Ok(match spec {
        "emotions9" => LabelVocabulary::emotions9(),
        "emotions16" => LabelVocabulary::emotions16(),
        path => LabelVocabulary::load(path)?,
    })
}

fn ingest(a: IngestArgs) -> Result<()> {
    let pre = match &a.config {
        Some(p) => load_config(p, None)?.preprocessor()?,
        None => Default::default(),
    };
    let vocabulary = label_vocabulary(&a.labels)?;
    let name = match a.name {
        Some(n) => n,
        None => a
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| anyhow!("cannot derive a dataset name from {}", a.input.display()))?,
    };
    let raw = Dataset::load(&a.input, vocabulary)?;
    let (mut clean, report) = raw.clean(&pre);
    clean.name = name.clone();
    if clean.is_empty() {
        bail!("no documents left after cleaning {}", a.input.display());
    }
    create_dir(&a.out)?;
    let path = a.out.join(format!("{name}.jsonl"));
    clean.save(&path)?;
    println!("{}", path.display());
    eprintln!(
        "kept {} of {} documents (incomplete {}, empty {}, duplicate {})",
        clean.len(),
        raw.len(),
        report.incomplete,
        report.empty,
        report.duplicate
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let text =
        fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let spec = SynthSpec::from_toml(&text)?;
    let dataset = generate_synthetic(&spec, a.seed)?;
    create_dir(&a.out)?;
    let path = a.out.join(format!("{}.jsonl", spec.name));
    dataset.save(&path)?;
    println!("{}", path.display());
    write_file(
        &a.out.join(format!("{}.labels.txt", spec.name)),
        &(spec.label_names.join("\n") + "\n"),
    )?;
    if let Some(dim) = a.embedding_dim {
        let table = synthetic_embeddings(&spec, dim, a.spread, a.seed)?;
        let path = a.out.join(format!("{}.vectors.txt", spec.name));
        let mut buf = Vec::new();
        table.write(&mut buf)?;
        write_file(&path, std::str::from_utf8(&buf)?)?;
    }
    Ok(())
}

/// Config plus loaded datasets, restricted to `--dataset` when given.
fn grid_inputs(a: &GridArgs) -> Result<(ExperimentConfig, Vec<LoadedDataset>)> {
    let mut config = load_config(&a.config, a.seed)?;
    restrict(&mut config, a.dataset.as_deref())?;
    let inputs = load_inputs(&config)?;
    Ok((config, inputs))
}

fn only_json(a: &GridArgs, command: &str) -> Result<()> {
    if a.format.iter().any(|f| matches!(f, Format::Csv)) {
        bail!("`{command}` only writes JSON");
    }
    Ok(())
}

fn folds(a: GridArgs) -> Result<()> {
    only_json(&a, "folds")?;
    let (config, inputs) = grid_inputs(&a)?;
    for loaded in &inputs {
        let plan = split_folds(
            &loaded.dataset,
            config.k,
            config.validation_fraction,
            config.seed,
        )?;
        let json = serde_json::to_string_pretty(&plan)? + "\n";
        emit(
            a.out.as_deref(),
            &format!("folds_{}.json", loaded.dataset.name),
            &json,
        )?;
    }
    Ok(())
}

fn imbalance(a: GridArgs) -> Result<()> {
    let (_, inputs) = grid_inputs(&a)?;
    for loaded in &inputs {
        let summary = summarize_dataset(loaded)?;
        for format in &a.format {
            match format {
                Format::Json => {
                    let json = serde_json::to_string_pretty(&summary)? + "\n";
                    emit(
                        a.out.as_deref(),
                        &format!("imbalance_{}.json", summary.name),
                        &json,
                    )?;
                }
                Format::Csv => {
                    let mut csv = String::from("labelset,count\n");
                    for row in &summary.labelset_histogram {
                        csv += &format!("{},{}\n", row.labelset, row.count);
                    }
                    emit(
                        a.out.as_deref(),
                        &format!("labelsets_{}.csv", summary.name),
                        &csv,
                    )?;
                }
            }
        }
    }
    Ok(())
}

/// Loads only what one experiment on one dataset needs.
fn single_input(
    config: &mut ExperimentConfig,
    dataset: &str,
    experiment: Experiment,
) -> Result<LoadedDataset> {
    restrict(config, Some(dataset))?;
    config.experiments = Some(vec![experiment]);
    Ok(load_inputs(config)?.remove(0))
}

fn train(a: TrainArgs) -> Result<()> {
    let mut config = load_config(&a.config, a.seed)?;
    let loaded = single_input(&mut config, &a.dataset, a.experiment)?;
    if a.fold >= config.k {
        bail!("fold {} out of range for k = {}", a.fold, config.k);
    }
    let plan = split_folds(
        &loaded.dataset,
        config.k,
        config.validation_fraction,
        config.seed,
    )?;
    let split = plan.split(a.fold)?;
    let checkpoint = train_fold(
        &loaded.dataset,
        &split,
        a.fold,
        a.experiment,
        &config,
        loaded.embeddings.as_deref(),
    )?;
    create_dir(&a.out)?;
    let path = a.out.join(format!(
        "checkpoint_{}_{}_fold{}.json",
        a.dataset, a.experiment, a.fold
    ));
    write_file(&path, &checkpoint.to_json()?)
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut config = load_config(&a.config, a.seed)?;
    let checkpoint = Checkpoint::load(&a.checkpoint)?;
    let loaded = single_input(&mut config, &checkpoint.dataset, checkpoint.experiment)?;
    if loaded.dataset.vocabulary.names() != checkpoint.label_names.as_slice() {
        bail!(
            "checkpoint labels do not match dataset `{}`",
            checkpoint.dataset
        );
    }
    let docs = if a.all {
        loaded.dataset.documents.iter().collect()
    } else {
        let plan = split_folds(
            &loaded.dataset,
            config.k,
            config.validation_fraction,
            config.seed,
        )?;
        loaded.dataset.subset(&plan.split(checkpoint.fold)?.test)
    };
    let result = checkpoint.evaluate(&docs, loaded.embeddings.as_deref())?;
    let json = serde_json::json!({
        "dataset": checkpoint.dataset,
        "experiment": checkpoint.experiment,
        "fold": checkpoint.fold,
        "documents": docs.len(),
        "result": result,
    });
    emit(
        a.out.as_deref(),
        "eval.json",
        &(serde_json::to_string_pretty(&json)? + "\n"),
    )
}

fn report(a: GridArgs) -> Result<()> {
    let (config, inputs) = grid_inputs(&a)?;
    let report = run_loaded(&config, &inputs)?;
    let out = a.out.clone().unwrap_or_else(|| config.output_dir.clone());
    let formats: Vec<ReportFormat> = a.format.iter().map(|&f| f.into()).collect();
    for path in emit_report(&report, &out, &formats)? {
        println!("{}", path.display());
    }
    for r in &report.results {
        eprintln!(
            "{:<12} {:<16} Macro-FM {:.3} ± {:.3}  Micro-FM {:.3} ± {:.3}",
            r.dataset,
            r.experiment.name(),
            r.macro_fm.mean,
            r.macro_fm.std,
            r.micro_fm.mean,
            r.micro_fm.std
        );
    }
    Ok(())
}
