use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ddalpha::classifier::{pair_training_amr, DegreeChoice, ModelMetadata};
use ddalpha::evaluation::{evaluate, SplitScheme, TrainSize};
use ddalpha::simulation::{
    run_experiment, run_timing, timing_csv, timing_table, ExperimentPlan, TimingSetting,
};
use ddalpha::{Config, DepthKind, Error, Estimator, LabeledDataset, Model, OutsiderRule};

mod data;
mod plot;

use data::{read_table, write_csv, write_file, write_text_csv};

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    fn training(e: Error) -> Self {
        CliError {
            code: 3,
            message: e.to_string(),
        }
    }

    fn experiment(e: Error) -> Self {
        CliError {
            code: 4,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Parser)]
#[command(name = "ddalpha", version, about = "Depth-based classification with the DD-alpha procedure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a classifier on a labelled CSV file.
    Train(TrainArgs),
    /// Classify the rows of a CSV file with a trained model.
    Predict(PredictArgs),
    /// Write the depth coordinates of a data set (the DD-plot).
    Ddplot(DdplotArgs),
    /// Run a simulated two-class experiment.
    Simulate(SimulateArgs),
    /// Time training plus classification over a grid of sizes.
    Bench(BenchArgs),
    /// Cross-validate or hold out on a labelled CSV file.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DepthArg {
    Zonoid,
    Mahal,
    MahalMcd,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutsiderArg {
    /// Random class drawn from the training proportions.
    Random,
    /// k nearest neighbours, Euclidean distance.
    Knn,
    /// k nearest neighbours, pooled moment Mahalanobis distance.
    KnnMahal,
    /// k nearest neighbours, pooled MCD Mahalanobis distance.
    KnnMahalMcd,
    /// Largest moment Mahalanobis depth.
    Maxdepth,
    /// Largest MCD Mahalanobis depth.
    MaxdepthMcd,
}

#[derive(Args, Clone)]
struct ModelFlags {
    /// Depth function.
    #[arg(long, value_enum, default_value = "zonoid")]
    depth: DepthArg,
    /// Polynomial degree, or "cv" to choose from 1..=3 by cross-validation.
    #[arg(long, default_value = "2")]
    degree: String,
    /// Folds used when --degree cv.
    #[arg(long, default_value_t = 10)]
    cv_folds: usize,
    /// Treatment of points outside every class hull.
    #[arg(long, value_enum, default_value = "knn")]
    outsiders: OutsiderArg,
    /// Neighbours for the k-NN outsider treatments.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Choose k in 1..=N by leave-one-out instead of using --k.
    #[arg(long)]
    knn_max_k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelFlags {
    fn config(&self) -> Result<Config, CliError> {
        let degree = if self.degree.eq_ignore_ascii_case("cv") {
            DegreeChoice::CrossValidated {
                folds: self.cv_folds,
            }
        } else {
            match self.degree.parse::<u32>() {
                Ok(p) if p >= 1 => DegreeChoice::Fixed(p),
                _ => {
                    return Err(CliError::input(format!(
                        "--degree must be a positive integer or 'cv', got '{}'",
                        self.degree
                    )))
                }
            }
        };
        if self.k == 0 {
            return Err(CliError::input("--k must be at least 1"));
        }
        let k = self.k;
        let outsider = match self.outsiders {
            OutsiderArg::Random => OutsiderRule::RandomPrior,
            OutsiderArg::Knn => OutsiderRule::KnnEuclid { k },
            OutsiderArg::KnnMahal => OutsiderRule::KnnMahalanobis {
                k,
                estimator: Estimator::Moment,
            },
            OutsiderArg::KnnMahalMcd => OutsiderRule::KnnMahalanobis {
                k,
                estimator: Estimator::Mcd,
            },
            OutsiderArg::Maxdepth => OutsiderRule::MaxMahalanobisDepth {
                estimator: Estimator::Moment,
            },
            OutsiderArg::MaxdepthMcd => OutsiderRule::MaxMahalanobisDepth {
                estimator: Estimator::Mcd,
            },
        };
        Ok(Config {
            depth: match self.depth {
                DepthArg::Zonoid => DepthKind::Zonoid,
                DepthArg::Mahal => DepthKind::MahalanobisMoment,
                DepthArg::MahalMcd => DepthKind::MahalanobisMcd,
            },
            degree,
            outsider,
            seed: self.seed,
            knn_max_k: self.knn_max_k,
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Name of the label column.
    #[arg(long, default_value = "label")]
    label: String,
    #[command(flatten)]
    model: ModelFlags,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Predictions CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DdplotArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Depth coordinates CSV.
    #[arg(long)]
    out: PathBuf,
    /// Separator zero curve CSV (two classes only).
    #[arg(long)]
    curve: Option<PathBuf>,
    /// SVG scatter plot with the separator (two classes only).
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Distributional setting.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=10))]
    setting: u32,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Training points per class.
    #[arg(long, default_value_t = 200)]
    n_train: usize,
    /// Test points per class.
    #[arg(long, default_value_t = 500)]
    n_test: usize,
    #[command(flatten)]
    model: ModelFlags,
    /// Per-replication error rates.
    #[arg(long)]
    out: PathBuf,
    /// Five-number summary, mean and sd.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchSetting {
    Shift,
    LocationScale,
}

#[derive(Args)]
struct BenchArgs {
    /// Cells as "d=5,10 n=200,500"; every combination is timed.
    #[arg(long, default_value = "d=5,10,15,20 n=200,500,1000")]
    grid: String,
    #[arg(long, value_enum, default_value = "shift")]
    setting: BenchSetting,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Loo,
    Kfold,
    Split,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label: String,
    #[arg(long, value_enum, default_value = "kfold")]
    scheme: SchemeArg,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Training points per class for --scheme split, e.g. "100,80".
    #[arg(long, conflicts_with = "train_total")]
    train_per_class: Option<String>,
    /// Total training points for --scheme split.
    #[arg(long)]
    train_total: Option<usize>,
    /// Shuffle rows with this seed before a split.
    #[arg(long)]
    shuffle: Option<u64>,
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add timing rows to the CSV (they differ between runs).
    #[arg(long)]
    timings: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.code);
    }
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Ddplot(a) => cmd_ddplot(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

/// `DDALPHA_THREADS` caps the worker pool; 0 means serial.
fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("DDALPHA_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::input(format!("DDALPHA_THREADS must be a number, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .map_err(|e| CliError::input(e.to_string()))
}

fn labeled_dataset(path: &PathBuf, label: &str) -> Result<(LabeledDataset, ModelMetadata), CliError> {
    let table = read_table(path, label, true)?;
    let (idx, names) = table.encode_labels().expect("label column required");
    let q = names.len();
    let ds = LabeledDataset::new(table.points, idx, q).map_err(CliError::training)?;
    Ok((
        ds,
        ModelMetadata {
            class_names: names,
            feature_names: table.feature_names,
            label_column: Some(label.to_string()),
        },
    ))
}

fn load_model(path: &PathBuf) -> Result<Model, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Model::from_json(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn class_name(model: &Model, c: usize) -> String {
    model
        .metadata()
        .class_names
        .get(c)
        .cloned()
        .unwrap_or_else(|| c.to_string())
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let config = a.model.config()?;
    let (ds, meta) = labeled_dataset(&a.data, &a.label)?;
    let mut model = ddalpha::train(&ds, &config).map_err(CliError::training)?;
    model.set_metadata(meta);
    let json = model.to_json().map_err(CliError::training)?;
    write_file(&a.out, json.as_bytes())?;
    println!(
        "trained on {} points, {} classes, {} features, degree {}",
        ds.n(),
        ds.q(),
        ds.d(),
        model.degree()
    );
    for ((j, k), amr) in pair_training_amr(&model) {
        println!(
            "pair {} / {}: training error {amr}",
            class_name(&model, j),
            class_name(&model, k)
        );
    }
    Ok(())
}

/// Feature matrix of a data file for `model`, with true labels when the
/// model's label column is present.
fn model_input(model: &Model, path: &PathBuf) -> Result<data::Table, CliError> {
    let label = model
        .metadata()
        .label_column
        .clone()
        .unwrap_or_else(|| "label".to_string());
    let table = read_table(path, &label, false)?;
    if table.points.cols() != model.d() {
        return Err(CliError::input(format!(
            "{}: {} feature columns, the model expects {}",
            path.display(),
            table.points.cols(),
            model.d()
        )));
    }
    Ok(table)
}

fn cmd_predict(a: PredictArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let table = model_input(&model, &a.data)?;
    let preds = model.predict_rows(&table.points).map_err(CliError::training)?;
    let q = model.q();
    let mut header = vec!["row".to_string(), "label".to_string()];
    header.extend((0..q).map(|c| format!("votes_{}", class_name(&model, c))));
    header.push("outsider".to_string());
    header.extend((0..q).map(|c| format!("depth_{}", class_name(&model, c))));
    let rows: Vec<Vec<String>> = preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = vec![i.to_string(), class_name(&model, p.label)];
            r.extend(p.votes.iter().map(usize::to_string));
            r.push(u8::from(p.outsider).to_string());
            r.extend(p.depth_vector.values().iter().map(f64::to_string));
            r
        })
        .collect();
    match &a.out {
        Some(path) => write_csv(path, model.seed(), &header, &rows)?,
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            print!("{}", data::header_line(model.seed()));
            let io = |e: csv::Error| CliError::input(e.to_string());
            w.write_record(&header).map_err(io)?;
            for r in &rows {
                w.write_record(r).map_err(io)?;
            }
            w.flush().map_err(|e| CliError::input(e.to_string()))?;
        }
    }
    if let Some(truth) = &table.labels {
        let wrong = preds
            .iter()
            .zip(truth)
            .filter(|(p, t)| class_name(&model, p.label) != **t)
            .count();
        let outsiders = preds.iter().filter(|p| p.outsider).count();
        eprintln!(
            "error rate {} ({wrong} of {}), outsiders {outsiders}",
            wrong as f64 / preds.len() as f64,
            preds.len()
        );
    }
    Ok(())
}

fn cmd_ddplot(a: DdplotArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    if (a.curve.is_some() || a.svg.is_some()) && model.q() != 2 {
        return Err(CliError::input(format!(
            "separator curve needs a two-class model, this one has {} classes",
            model.q()
        )));
    }
    let table = model_input(&model, &a.data)?;
    let preds = model.predict_rows(&table.points).map_err(CliError::training)?;
    let q = model.q();
    let mut header: Vec<String> = (0..q)
        .map(|c| format!("depth_{}", class_name(&model, c)))
        .collect();
    header.extend(["label", "predicted", "outsider"].map(String::from));
    let shown_class = |i: usize| -> usize {
        table
            .labels
            .as_ref()
            .and_then(|l| model.metadata().class_names.iter().position(|n| *n == l[i]))
            .unwrap_or(preds[i].label)
    };
    let rows: Vec<Vec<String>> = preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r: Vec<String> = p.depth_vector.values().iter().map(f64::to_string).collect();
            r.push(match &table.labels {
                Some(l) => l[i].clone(),
                None => class_name(&model, p.label),
            });
            r.push(class_name(&model, p.label));
            r.push(u8::from(p.outsider).to_string());
            r
        })
        .collect();
    write_csv(&a.out, model.seed(), &header, &rows)?;

    if q == 2 {
        let curve = plot::zero_curve(&model.separators()[0]);
        if let Some(path) = &a.curve {
            let rows: Vec<Vec<String>> = curve
                .iter()
                .map(|(i, x, y)| vec![i.to_string(), x.to_string(), y.to_string()])
                .collect();
            let header = vec![
                "sample".to_string(),
                format!("depth_{}", class_name(&model, 0)),
                format!("depth_{}", class_name(&model, 1)),
            ];
            write_csv(path, model.seed(), &header, &rows)?;
        }
        if let Some(path) = &a.svg {
            let pts: Vec<(f64, f64, usize, bool)> = preds
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let v = p.depth_vector.values();
                    (v[0], v[1], shown_class(i), p.outsider)
                })
                .collect();
            let names = (class_name(&model, 0), class_name(&model, 1));
            let svg = plot::svg(&pts, &curve, (&names.0, &names.1));
            write_file(path, svg.as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let config = a.model.config()?;
    let plan = ExperimentPlan {
        n_train: a.n_train,
        n_test: a.n_test,
        ..ExperimentPlan::for_setting(a.setting, a.reps, a.model.seed)
            .map_err(|e| CliError::input(e.to_string()))?
    };
    if plan.n_train == 0 || plan.n_test == 0 || plan.replications == 0 {
        return Err(CliError::input(
            "--reps, --n-train and --n-test must be positive",
        ));
    }
    let sample = run_experiment(&plan, &config).map_err(CliError::experiment)?;
    write_text_csv(&a.out, a.model.seed, &sample.to_csv())?;
    let summary = sample.summary().map_err(CliError::experiment)?;
    if let Some(path) = &a.summary {
        write_text_csv(path, a.model.seed, &summary.to_csv(&sample.setting))?;
    }
    let b = summary.boxplot;
    println!(
        "setting {}: {} replications, mean error {:.4} (sd {:.4}); min {:.4} q1 {:.4} median {:.4} q3 {:.4} max {:.4}",
        sample.setting, plan.replications, summary.mean, summary.sd, b.min, b.q1, b.median, b.q3, b.max
    );
    Ok(())
}

/// Parses "d=5,10 n=200,500" into all `(d, n)` combinations.
fn parse_grid(spec: &str) -> Result<Vec<(usize, usize)>, CliError> {
    let mut ds = Vec::new();
    let mut ns = Vec::new();
    for part in spec.split_whitespace() {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("grid entry '{part}' is not key=values")))?;
        let parsed = values
            .split(',')
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| CliError::input(format!("grid value '{v}' is not a count")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        match key {
            "d" => ds.extend(parsed),
            "n" => ns.extend(parsed),
            _ => return Err(CliError::input(format!("unknown grid key '{key}'"))),
        }
    }
    if ds.is_empty() || ns.is_empty() {
        return Err(CliError::input("grid needs both d= and n= values"));
    }
    Ok(ds
        .iter()
        .flat_map(|&d| ns.iter().map(move |&n| (d, n)))
        .collect())
}

fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    let config = a.model.config()?;
    let cells = parse_grid(&a.grid)?;
    let which = match a.setting {
        BenchSetting::Shift => TimingSetting::Shift,
        BenchSetting::LocationScale => TimingSetting::LocationScale,
    };
    let rows = run_timing(&cells, which, a.reps, &config, a.model.seed).map_err(|e| match e {
        Error::InvalidArgument(_) => CliError::input(e.to_string()),
        e => CliError::experiment(e),
    })?;
    write_text_csv(&a.out, a.model.seed, &timing_csv(&rows))?;
    print!("{}", timing_table(&rows));
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let config = a.model.config()?;
    let (ds, meta) = labeled_dataset(&a.data, &a.label)?;
    let scheme = match a.scheme {
        SchemeArg::Loo => SplitScheme::LeaveOneOut,
        SchemeArg::Kfold => SplitScheme::KFold {
            k: a.folds,
            seed: a.model.seed,
        },
        SchemeArg::Split => {
            let train = match (&a.train_per_class, a.train_total) {
                (Some(list), _) => TrainSize::PerClass(
                    list.split(',')
                        .map(|v| {
                            v.trim().parse::<usize>().map_err(|_| {
                                CliError::input(format!("'{v}' is not a count"))
                            })
                        })
                        .collect::<Result<_, _>>()?,
                ),
                (None, Some(t)) => TrainSize::Total(t),
                (None, None) => {
                    return Err(CliError::input(
                        "--scheme split needs --train-per-class or --train-total",
                    ))
                }
            };
            SplitScheme::TrainTest {
                train,
                shuffle: a.shuffle,
            }
        }
    };
    scheme
        .splits(&ds)
        .map_err(|e| CliError::input(e.to_string()))?;
    let report = evaluate(&ds, &scheme, &config).map_err(CliError::training)?;
    if let Some(path) = &a.out {
        write_text_csv(path, a.model.seed, &report.to_csv(a.timings))?;
    }
    print!("{}", report.summary(&meta.class_names));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("d=5 n=200").unwrap(), vec![(5, 200)]);
        assert_eq!(
            parse_grid("n=1,2 d=3").unwrap(),
            vec![(3, 1), (3, 2)]
        );
        assert!(parse_grid("d=5").is_err());
        assert!(parse_grid("x=1 n=2").is_err());
    }
}
