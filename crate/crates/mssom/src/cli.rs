//! The `mssom` command line.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error. Every command that
//! writes an output `X` also writes its resolved configuration to
//! `X.config.json`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand};
use mssom_core::{
    generate_synthetic, Dataset, DistanceGraph, Fallback, GridSpec, LabeledAssignment,
    LabeledSample, MajorityVoteTable, NaiveVoteTable, NormalizationKind, NormalizationStats,
    PhaseLabel, Som, SomConfig, UMatrix, NGAFID_FEATURES, NUM_CLASSES,
};
use serde::Serialize;

use crate::csvio::{load_csv_auto, load_flight_csv, write_flight_csv, write_predictions};
use crate::error::{Error, Result};
use crate::formats::{
    model_to_string, read_model, read_votes, umatrix_to_string, votes_to_string, write_text,
    Model, VoteTable,
};
use crate::grid::{load_split, run_grid, synthetic_grid_data, FileSplit, SyntheticSpec};
use crate::report::{emit_report, Report};

#[derive(Debug, Parser)]
#[command(name = "mssom", version, about = "Minimally supervised SOM classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a map on unlabeled rows and write a model file.
    Train(TrainArgs),
    /// Classify rows with a model and labeled rows (or a saved vote table).
    Predict(PredictArgs),
    /// Run an experiment grid and write a report.
    Grid(GridArgs),
    /// Write a synthetic labeled CSV.
    Synth(SynthArgs),
    /// Export a model's U-Matrix.
    Umatrix(UmatrixArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
struct GridSize {
    rows: usize,
    cols: usize,
}

impl FromStr for GridSize {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected RxC, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
        Ok(Self {
            rows: parse(r)?,
            cols: parse(c)?,
        })
    }
}

fn parse_counts(s: &str) -> std::result::Result<[usize; NUM_CLASSES], String> {
    let values = s
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    values
        .try_into()
        .map_err(|v: Vec<usize>| format!("expected {NUM_CLASSES} counts, got {}", v.len()))
}

fn parse_norm(s: &str) -> std::result::Result<NormalizationKind, String> {
    s.parse().map_err(|e: mssom_core::Error| e.to_string())
}

/// How feature columns are selected from input CSVs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Schema {
    /// Every column except `FlPhase`, in file order.
    Header,
    /// The 48 flight-recorder columns.
    Ngafid,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    /// Training CSVs; labels, if present, are ignored.
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    #[arg(long, default_value = "header")]
    schema: Schema,
    #[arg(long, default_value = "10x10")]
    size: GridSize,
    #[arg(long, default_value = "minmax", value_parser = parse_norm)]
    norm: NormalizationKind,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr_initial: Option<f64>,
    #[arg(long)]
    lr_final: Option<f64>,
    #[arg(long)]
    radius_initial: Option<f64>,
    #[arg(long)]
    radius_final: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("strategy").required(true).args(["neighbors", "naive", "votes"])))]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Rows to classify.
    #[arg(long)]
    data: PathBuf,
    /// Labeled rows projected onto the map; every labeled row is used.
    #[arg(long, required_unless_present = "votes")]
    labels: Option<PathBuf>,
    /// MS-SOM with this many nearest labeled samples.
    #[arg(long, conflicts_with = "naive")]
    neighbors: Option<usize>,
    /// Per-unit majority of the labeled rows instead of MS-SOM.
    #[arg(long)]
    naive: bool,
    /// With --naive: leave units without labels unpredicted.
    #[arg(long, requires = "naive")]
    no_fallback: bool,
    /// Saved vote table to use instead of --labels.
    #[arg(long, conflicts_with_all = ["labels", "neighbors", "naive"])]
    votes: Option<PathBuf>,
    /// Also write the vote table built from --labels.
    #[arg(long)]
    save_votes: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
enum Preset {
    #[value(name = "labels-5")]
    Labels5,
    #[value(name = "labels-10")]
    Labels10,
    #[value(name = "labels-20")]
    Labels20,
    #[value(name = "labels-30")]
    Labels30,
    #[value(name = "labels-40")]
    Labels40,
    Naive,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("spec").required(true).args(["preset", "config"])))]
#[command(group(ArgGroup::new("input").required(true).args(["synthetic", "train"])))]
struct GridArgs {
    #[arg(long)]
    preset: Option<Preset>,
    /// JSON grid specification.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed for every cell.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Use generated data with flight-corpus class proportions.
    #[arg(long)]
    synthetic: bool,
    #[arg(long, default_value_t = 4100, requires = "synthetic")]
    synthetic_rows: usize,
    #[arg(long, default_value_t = 8, requires = "synthetic")]
    synthetic_dims: usize,
    /// CSVs the maps are trained on.
    #[arg(long, num_args = 1.., requires = "test")]
    train: Vec<PathBuf>,
    /// CSVs labels and validation rows are drawn from; defaults to --train.
    #[arg(long = "label-from", num_args = 1.., requires = "train")]
    label_from: Vec<PathBuf>,
    /// CSVs scored as the test set.
    #[arg(long, num_args = 1.., requires = "train")]
    test: Vec<PathBuf>,
    #[arg(long, default_value = "ngafid")]
    schema: Schema,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    /// Rows per class, TXI,TOF,ICL,APR,LDG,ENR.
    #[arg(long, value_parser = parse_counts)]
    counts: [usize; NUM_CLASSES],
    #[arg(long, default_value_t = 48)]
    dims: usize,
    #[arg(long, default_value_t = 6.0)]
    sep: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Name columns after the flight-recorder schema (requires --dims 48).
    #[arg(long)]
    ngafid_names: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct UmatrixArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled rows whose per-unit counts are included.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Umatrix(a) => cmd_umatrix(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn config_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".config.json");
    PathBuf::from(name)
}

fn write_config<T: Serialize>(out: &Path, config: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(config)?;
    text.push('\n');
    write_text(&config_path(out), &text)
}

fn load(path: &Path, schema: Schema) -> Result<Dataset> {
    match schema {
        Schema::Header => load_csv_auto(path),
        Schema::Ngafid => load_flight_csv(path, &NGAFID_FEATURES),
    }
}

fn load_all(paths: &[PathBuf], schema: Schema) -> Result<Dataset> {
    let parts = paths
        .iter()
        .map(|p| load(p, schema))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::concat(&parts)?)
}

#[derive(Serialize)]
struct TrainConfig<'a> {
    command: &'static str,
    data: &'a [PathBuf],
    schema: Schema,
    normalization: NormalizationKind,
    som: &'a SomConfig,
    rows_used: usize,
    rows_dropped: usize,
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let data = load_all(&a.data, a.schema)?;
    let mut config = SomConfig::new(a.size.rows, a.size.cols, a.seed);
    if let Some(v) = a.epochs {
        config.epochs = v;
    }
    if let Some(v) = a.lr_initial {
        config.lr_initial = v;
    }
    if let Some(v) = a.lr_final {
        config.lr_final = v;
    }
    if let Some(v) = a.radius_initial {
        config.radius_initial = v;
    }
    if let Some(v) = a.radius_final {
        config.radius_final = v;
    }
    config.validate()?;
    let model = train_model(&data, a.norm, config)?;
    write_text(&a.out, &model_to_string(&model))?;
    write_config(
        &a.out,
        &TrainConfig {
            command: "train",
            data: &a.data,
            schema: a.schema,
            normalization: a.norm,
            som: model.som.config(),
            rows_used: data.len(),
            rows_dropped: data.dropped_rows(),
        },
    )
}

/// Fits the normalization on `data`, then trains on the normalized rows.
pub fn train_model(data: &Dataset, kind: NormalizationKind, config: SomConfig) -> Result<Model> {
    let normalization = NormalizationStats::fit(kind, data.frames())?;
    let normalized = normalization.transform_dataset(data)?;
    let som = Som::train(config, normalized.frames())?;
    Ok(Model {
        feature_names: data.feature_names().to_vec(),
        normalization,
        som,
    })
}

/// Labeled rows of `data`, normalized as the model expects.
pub fn normalized_labels(model: &Model, data: &Dataset) -> Result<Vec<LabeledSample>> {
    data.labeled_samples()
        .into_iter()
        .map(|mut s| {
            s.features = model.normalization.transform(&s.features)?;
            Ok(s)
        })
        .collect()
}

/// Builds the vote table `predict` would use.
pub fn build_votes(model: &Model, labels: &Dataset, strategy: PredictStrategy) -> Result<VoteTable> {
    let labeled = normalized_labels(model, labels)?;
    Ok(match strategy {
        PredictStrategy::Msom { neighbors } => {
            let graph = DistanceGraph::from_umatrix(&UMatrix::from_som(&model.som));
            let assign = LabeledAssignment::new(&model.som, &labeled)?;
            VoteTable::Msom(MajorityVoteTable::build(&graph, &assign, neighbors)?)
        }
        PredictStrategy::Naive { fallback } => {
            VoteTable::Naive(NaiveVoteTable::build(&model.som, &labeled, fallback)?)
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PredictStrategy {
    Msom { neighbors: usize },
    Naive { fallback: Fallback },
}

/// One prediction per row of `data`, keyed by row index.
pub fn predict_rows(
    model: &Model,
    votes: &VoteTable,
    data: &Dataset,
) -> Result<Vec<(usize, Option<PhaseLabel>)>> {
    let units = match votes {
        VoteTable::Msom(t) => t.units(),
        VoteTable::Naive(t) => t.units(),
    };
    if units != model.som.units() {
        return Err(mssom_core::Error::DimensionMismatch {
            expected: model.som.units(),
            got: units,
        }
        .into());
    }
    data.frames()
        .iter()
        .map(|f| {
            let x = model.normalization.transform(&f.features)?;
            let prediction = match votes {
                VoteTable::Msom(t) => Some(mssom_core::msom_predict(&model.som, t, &x)?),
                VoteTable::Naive(t) => mssom_core::naive_predict(&model.som, t, &x)?,
            };
            Ok((f.row_index, prediction))
        })
        .collect()
}

#[derive(Serialize)]
struct PredictConfig<'a> {
    command: &'static str,
    #[serde(flatten)]
    args: &'a PredictArgs,
    rows_predicted: usize,
    rows_dropped: usize,
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let data = load_flight_csv(&a.data, &model.feature_names)?;
    let votes = match (&a.votes, &a.labels) {
        (Some(path), _) => read_votes(path)?,
        (None, Some(labels)) => {
            let strategy = match a.neighbors {
                Some(neighbors) => PredictStrategy::Msom { neighbors },
                None => PredictStrategy::Naive {
                    fallback: if a.no_fallback {
                        Fallback::Disabled
                    } else {
                        Fallback::NearestLabeledUnit
                    },
                },
            };
            let labels = load_flight_csv(labels, &model.feature_names)?;
            build_votes(&model, &labels, strategy)?
        }
        (None, None) => unreachable!("clap requires --labels or --votes"),
    };
    if let Some(path) = &a.save_votes {
        write_text(path, &votes_to_string(&votes))?;
    }
    let rows = predict_rows(&model, &votes, &data)?;
    write_predictions(&rows, &a.out)?;
    write_config(
        &a.out,
        &PredictConfig {
            command: "predict",
            args: a,
            rows_predicted: rows.len(),
            rows_dropped: data.dropped_rows(),
        },
    )
}

#[derive(Serialize)]
struct GridConfig<'a> {
    command: &'static str,
    grid: &'a GridSpec,
    workers: usize,
    synthetic: Option<SyntheticSpec>,
    files: Option<FileSplit>,
    schema: Schema,
}

fn grid_spec(a: &GridArgs) -> Result<GridSpec> {
    let mut spec = match (a.preset, &a.config) {
        (Some(p), _) => match p {
            Preset::Labels5 => GridSpec::label_sweep(5, a.seed)?,
            Preset::Labels10 => GridSpec::label_sweep(10, a.seed)?,
            Preset::Labels20 => GridSpec::label_sweep(20, a.seed)?,
            Preset::Labels30 => GridSpec::label_sweep(30, a.seed)?,
            Preset::Labels40 => GridSpec::label_sweep(40, a.seed)?,
            Preset::Naive => GridSpec::naive_baseline(a.seed),
        },
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)?
        }
        (None, None) => unreachable!("clap requires --preset or --config"),
    };
    spec.base_seed = a.seed;
    if let Some(r) = a.repeats {
        spec.repeats = r;
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_grid(a: &GridArgs) -> Result<()> {
    let spec = grid_spec(a)?;
    let (data, synthetic, files) = if a.synthetic {
        let s = SyntheticSpec {
            rows: a.synthetic_rows,
            dims: a.synthetic_dims,
            seed: a.seed,
            ..SyntheticSpec::default()
        };
        (synthetic_grid_data(&s)?, Some(s), None)
    } else {
        let split = FileSplit {
            train: a.train.clone(),
            labels: if a.label_from.is_empty() {
                a.train.clone()
            } else {
                a.label_from.clone()
            },
            test: a.test.clone(),
        };
        let data = match a.schema {
            Schema::Ngafid => load_split(&split, &NGAFID_FEATURES)?,
            Schema::Header => {
                let schema = load_csv_auto(&split.train[0])?.feature_names().to_vec();
                load_split(&split, &schema)?
            }
        };
        (data, None, Some(split))
    };
    let results = run_grid(&spec, &data, a.workers)?;
    let total: std::time::Duration = results.iter().map(|r| r.wall_clock).sum();
    let failed = results.iter().filter(|r| r.validation().is_none()).count();
    eprintln!(
        "{} cells ({} failed), {:.2}s summed cell time",
        results.len(),
        failed,
        total.as_secs_f64()
    );
    emit_report(&Report::new(Some(spec.clone()), results), &a.out)?;
    write_config(
        &a.out,
        &GridConfig {
            command: "grid",
            grid: &spec,
            workers: a.workers,
            synthetic,
            files,
            schema: a.schema,
        },
    )
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let mut data = generate_synthetic(a.counts, a.dims, a.sep, a.seed)?;
    if a.ngafid_names {
        if a.dims != NGAFID_FEATURES.len() {
            return Err(mssom_core::Error::DimensionMismatch {
                expected: NGAFID_FEATURES.len(),
                got: a.dims,
            }
            .into());
        }
        data = Dataset::new(
            NGAFID_FEATURES.iter().map(|s| s.to_string()).collect(),
            data.into_frames(),
        )?;
    }
    write_flight_csv(&data, &a.out)?;
    write_config(&a.out, &serde_json::json!({ "command": "synth", "args": a }))
}

fn cmd_umatrix(a: &UmatrixArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let u = UMatrix::from_som(&model.som);
    let assign = match &a.labels {
        Some(path) => {
            let labels = load_flight_csv(path, &model.feature_names)?;
            Some(LabeledAssignment::new(&model.som, &normalized_labels(&model, &labels)?)?)
        }
        None => None,
    };
    write_text(&a.out, &umatrix_to_string(&u, assign.as_ref()))?;
    write_config(&a.out, &serde_json::json!({ "command": "umatrix", "args": a }))
}
