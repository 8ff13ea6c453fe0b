//! `carrier`: command-line driver for the secondary-carrier pipeline.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use carrier_core::eval::{mean_roc, CvReport, MeanRoc, RocCurve};
use carrier_core::events::{evaluate_events, handover_trigger};
use carrier_core::io::{self, CfrSchema, Provenance};
use carrier_core::models::ModelSpec;
use carrier_core::pipeline::{self, PipelineConfig, Summary};
use carrier_core::rng::{derive_seed, purpose};
use carrier_core::sampling::{apply_sampling, SamplingPolicy};
use carrier_core::scenario::Scenario;
use carrier_core::svg::roc_svg;
use carrier_core::{Dataset64, Error, Result};

#[derive(Parser)]
#[command(name = "carrier", version, about = "Secondary-carrier link prediction pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (JSON).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in config: d1, d2a-d2d, d3a-d3c.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Root seed. Falls back to the config's seed, which defaults to 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Falls back to the config's output_dir, then ".".
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deployment and write scenario.json.
    Scenario {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate channel responses, extract features and label them.
    Dataset {
        #[command(flatten)]
        common: Common,
        /// Use this scenario instead of generating one.
        #[arg(long, value_name = "PATH")]
        scenario: Option<PathBuf>,
        /// Also write the raw responses to cfr.csv.
        #[arg(long)]
        export_cfr: bool,
    },
    /// Build a dataset from measured channel responses.
    Import {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// JSON column mapping for the input CSV.
        #[arg(long, value_name = "PATH")]
        schema: Option<PathBuf>,
    },
    /// Resample a dataset and write sampled.csv.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Overrides the config's sampling policy.
        #[arg(long, value_enum)]
        policy: Option<Policy>,
    },
    /// Fit a model on the whole (resampled) dataset and write model.json.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Train the MAP baseline instead of the configured model.
        #[arg(long)]
        map_baseline: bool,
    },
    /// Cross-validate and write summary.json, ROC CSVs and roc.svg.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Also evaluate the MAP baseline into summary_map.json.
        #[arg(long)]
        map_baseline: bool,
    },
    /// Plot ROC CSVs into one SVG.
    RocPlot {
        #[arg(required = true, value_name = "ROC_CSV")]
        inputs: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long, default_value = "ROC")]
        title: String,
        /// Overlay the vertical average of the inputs.
        #[arg(long)]
        mean: bool,
    },
    /// Run the measurement events over an RSRP trace.
    Events {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        trace: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    None,
    Smote,
    Undersample,
    Hybrid,
}

impl From<Policy> for SamplingPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::None => SamplingPolicy::None,
            Policy::Smote => SamplingPolicy::Smote,
            Policy::Undersample => SamplingPolicy::Undersample,
            Policy::Hybrid => SamplingPolicy::Hybrid,
        }
    }
}

/// Resolved config, seed and output directory.
struct Run {
    config: PipelineConfig,
    seed: u64,
    out: PathBuf,
}

impl Run {
    fn new(c: &Common) -> Result<Self> {
        let config = match (&c.config, &c.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                PipelineConfig::from_json(&text)?
            }
            (None, Some(name)) => PipelineConfig::preset(name)?,
            (None, None) => return Err(Error::Config("one of --config or --preset is required".into())),
        };
        let seed = c.seed.unwrap_or(config.seed);
        let out = c
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&out)?;
        Ok(Run { config, seed, out })
    }

    fn provenance(&self) -> Provenance {
        self.config.provenance(self.seed)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset64> {
    let (ds, _) = io::read_dataset_csv(open(path)?)?;
    Ok(ds)
}

fn cmd_scenario(c: &Common) -> Result<()> {
    let run = Run::new(c)?;
    let scenario = pipeline::build_scenario(&run.config, run.seed)?;
    let path = run.path("scenario.json");
    write_text(&path, &scenario.to_json()?)?;
    println!(
        "scenario: {} macro, {} micro, {} UEs (seed {}) -> {}",
        scenario.macros().count(),
        scenario.micros().count(),
        scenario.ues.len(),
        run.seed,
        path.display()
    );
    Ok(())
}

fn cmd_dataset(c: &Common, scenario: Option<&Path>, export_cfr: bool) -> Result<()> {
    let run = Run::new(c)?;
    let scenario = match scenario {
        Some(p) => Scenario::from_json(&read_to_string(p)?)?,
        None => pipeline::build_scenario(&run.config, run.seed)?,
    };
    let built = pipeline::build_dataset::<f64>(&scenario, &run.config, run.seed, export_cfr)?;
    let path = run.path("dataset.csv");
    let mut w = create(&path)?;
    io::write_dataset_csv(&mut w, &built.dataset, &run.provenance())?;
    w.flush()?;
    if let Some(records) = &built.responses {
        let mut w = create(&run.path("cfr.csv"))?;
        io::write_cfr_csv(&mut w, records, &run.provenance())?;
        w.flush()?;
    }
    println!("rows: {} (dropped below attach threshold: {})", built.dataset.len(), built.dropped);
    println!("class ratio: {}", built.dataset.class_ratio());
    if let Some(msg) = built.warning() {
        eprintln!("warning: {msg}");
    }
    println!("seed: {} -> {}", run.seed, path.display());
    Ok(())
}

fn cmd_import(c: &Common, input: &Path, schema: Option<&Path>) -> Result<()> {
    let run = Run::new(c)?;
    let schema: CfrSchema = match schema {
        Some(p) => serde_json::from_str(&read_to_string(p)?)?,
        None => CfrSchema::default(),
    };
    let records = io::read_cfr_csv::<f64>(open(input)?, &schema)?;
    let ds = pipeline::import_dataset(&records, &run.config)?;
    let path = run.path("dataset.csv");
    let mut w = create(&path)?;
    io::write_dataset_csv(&mut w, &ds, &run.provenance())?;
    w.flush()?;
    println!("imported {} UEs", ds.len());
    println!("class ratio: {}", ds.class_ratio());
    println!("seed: {} -> {}", run.seed, path.display());
    Ok(())
}

fn cmd_sample(c: &Common, input: &Path, policy: Option<Policy>) -> Result<()> {
    let run = Run::new(c)?;
    let ds = read_dataset(input)?;
    let policy = policy.map_or(run.config.cv.sampling, SamplingPolicy::from);
    let seed = derive_seed(run.seed, &[purpose::SAMPLING]);
    let sampled = apply_sampling(&ds, policy, run.config.cv.smote, seed)?;
    let path = run.path("sampled.csv");
    let mut w = create(&path)?;
    io::write_dataset_csv(&mut w, &sampled, &run.provenance())?;
    w.flush()?;
    println!("before: {}", ds.class_ratio());
    println!("after:  {}", sampled.class_ratio());
    println!("seed: {} -> {}", run.seed, path.display());
    Ok(())
}

fn cmd_train(c: &Common, input: &Path, map_baseline: bool) -> Result<()> {
    let run = Run::new(c)?;
    let ds = read_dataset(input)?;
    let spec = if map_baseline {
        ModelSpec::Map(run.config.map_baseline.clone())
    } else {
        run.config.model.clone()
    };
    let cv = &run.config.cv;
    let train = apply_sampling(&ds, cv.sampling, cv.smote, derive_seed(run.seed, &[purpose::SAMPLING]))?;
    let model = spec.fit(&train, derive_seed(run.seed, &[purpose::FOREST]))?;
    let envelope = serde_json::json!({
        "config_hash": run.config.hash(),
        "seed": run.seed,
        "features": ds.feature_names(),
        "model": serde_json::from_str::<serde_json::Value>(&model.to_json()?)?,
    });
    let path = run.path("model.json");
    write_text(&path, &serde_json::to_string(&envelope)?)?;
    println!("trained on {} rows ({})", train.len(), train.class_ratio());
    println!("seed: {} -> {}", run.seed, path.display());
    Ok(())
}

fn write_mean_csv(path: &Path, mean: &MeanRoc, prov: &Provenance) -> Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "# fold=mean auroc={} std={} {}",
        mean.mean_auroc,
        mean.std_auroc,
        prov.comment()
    )?;
    writeln!(w, "fpr,tpr")?;
    for (x, y) in mean.fpr.iter().zip(&mean.tpr) {
        writeln!(w, "{x},{y}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one evaluation's artifacts under `tag` and prints its AUROCs.
fn emit_report(run: &Run, tag: &str, ds: &Dataset64, spec: &ModelSpec, report: &CvReport<f64>) -> Result<()> {
    let prov = run.provenance();
    let suffix = if tag.is_empty() { String::new() } else { format!("_{tag}") };
    for f in &report.folds {
        let mut w = create(&run.path(&format!("roc{suffix}_fold{}.csv", f.fold)))?;
        io::write_roc_csv(&mut w, &f.fold.to_string(), &f.curve, &prov)?;
        w.flush()?;
    }
    write_mean_csv(&run.path(&format!("roc{suffix}_mean.csv")), &report.mean, &prov)?;
    let named: Vec<(String, &RocCurve<f64>)> = report
        .folds
        .iter()
        .map(|f| (format!("fold {}", f.fold), &f.curve))
        .collect();
    let m = &report.mean;
    let title = format!("{} ROC, {}-fold CV", if tag.is_empty() { "model" } else { tag }, run.config.cv.k);
    let svg = roc_svg(&title, &named, Some((&m.fpr, &m.tpr, m.mean_auroc)));
    write_text(&run.path(&format!("roc{suffix}.svg")), &svg)?;

    let summary = Summary::new(report, ds, spec, &run.config, run.seed);
    let path = run.path(&format!("summary{suffix}.json"));
    write_text(&path, &(serde_json::to_string_pretty(&summary)? + "\n"))?;

    let label = if tag.is_empty() { "model" } else { tag };
    let folds: Vec<String> = m.aurocs.iter().map(|a| format!("{a:.4}")).collect();
    println!("{label}: fold AUROC [{}]", folds.join(", "));
    println!("{label}: mean AUROC {:.4} +/- {:.4} -> {}", m.mean_auroc, m.std_auroc, path.display());
    Ok(())
}

fn cmd_evaluate(c: &Common, input: &Path, map_baseline: bool) -> Result<()> {
    let run = Run::new(c)?;
    let ds = read_dataset(input)?;
    println!("class ratio: {}", ds.class_ratio());
    let spec = run.config.model.clone();
    let report = pipeline::evaluate(&ds, &run.config, &spec, run.seed)?;
    emit_report(&run, "", &ds, &spec, &report)?;
    if map_baseline {
        let spec = ModelSpec::Map(run.config.map_baseline.clone());
        let report = pipeline::evaluate(&ds, &run.config, &spec, run.seed)?;
        emit_report(&run, "map", &ds, &spec, &report)?;
    }
    println!("seed: {}", run.seed);
    Ok(())
}

fn cmd_roc_plot(inputs: &[PathBuf], out: Option<&Path>, title: &str, mean: bool) -> Result<()> {
    let curves = inputs
        .iter()
        .map(|p| io::read_roc_csv(open(p)?))
        .collect::<Result<Vec<_>>>()?;
    let named: Vec<(String, &RocCurve<f64>)> = curves.iter().map(|(n, c)| (format!("fold {n}"), c)).collect();
    let avg = if mean {
        let owned: Vec<RocCurve<f64>> = curves.iter().map(|(_, c)| c.clone()).collect();
        Some(mean_roc(&owned)?)
    } else {
        None
    };
    let svg = roc_svg(
        title,
        &named,
        avg.as_ref().map(|m| (m.fpr.as_slice(), m.tpr.as_slice(), m.mean_auroc)),
    );
    let dir = out.unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let path = dir.join("roc.svg");
    write_text(&path, &svg)?;
    println!("{} curves -> {}", curves.len(), path.display());
    Ok(())
}

fn cmd_events(c: &Common, trace: &Path) -> Result<()> {
    let run = Run::new(c)?;
    let trace = io::read_trace_csv(open(trace)?)?;
    let cfg = &run.config.events;
    let occurrences = evaluate_events(&trace, cfg);
    let trigger = handover_trigger(&trace, cfg);
    for o in &occurrences {
        let end = o.t_end.map_or("end".to_string(), |t| t.to_string());
        println!("{:?} {} .. {}", o.kind, o.t_start, end);
    }
    match trigger {
        Some(t) => println!("A5 handover trigger at t={t}"),
        None => println!("no A5 handover trigger"),
    }
    let doc = serde_json::json!({
        "config_hash": run.config.hash(),
        "seed": run.seed,
        "events": cfg,
        "occurrences": occurrences,
        "handover_trigger": trigger,
    });
    write_text(&run.path("events.json"), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scenario { common } => cmd_scenario(&common),
        Command::Dataset {
            common,
            scenario,
            export_cfr,
        } => cmd_dataset(&common, scenario.as_deref(), export_cfr),
        Command::Import { common, input, schema } => cmd_import(&common, &input, schema.as_deref()),
        Command::Sample { common, input, policy } => cmd_sample(&common, &input, policy),
        Command::Train {
            common,
            input,
            map_baseline,
        } => cmd_train(&common, &input, map_baseline),
        Command::Evaluate {
            common,
            input,
            map_baseline,
        } => cmd_evaluate(&common, &input, map_baseline),
        Command::RocPlot {
            inputs,
            out,
            title,
            mean,
        } => cmd_roc_plot(&inputs, out.as_deref(), &title, mean),
        Command::Events { common, trace } => cmd_events(&common, &trace),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
