use clap::{Parser, Subcommand};
use grasplab::bench::{
    emit_report, run_ablation, run_clutter_removal, run_single_object_eval, BenchError, BenchReport, ExperimentSpec,
    SourceCache,
};
use grasplab::collect::{collect, save_dataset, load_dataset, CollectConfig, CollectError};
use grasplab::config::{Preset, PresetName};
use grasplab::gripper::GripperSpec;
use grasplab::learn::{load_model, save_model, train, write_loss_csv, LearnError, ModelParams, TrainConfig};
use grasplab::policy::Policy;
use grasplab::scene::{Material, ObjectSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "grasplab", version, about = "Planar grasp-learning lab: collect, train, evaluate")]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Where datasets, reports and curves are written.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true, default_value = "desk")]
    preset: PresetName,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a collection config and save the dataset under the out dir.
    Collect {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train the preset network on a saved dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Single-object evaluation of a trained model on a named test.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "t5")]
        test: String,
    },
    /// Train on growing prefixes of a recipe's data and evaluate each.
    Ablate {
        #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000")]
        sizes: Vec<usize>,
        #[arg(long, default_value = "t3-precise")]
        recipe: String,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
    },
    /// Clutter removal with a trained model.
    Clutter {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 20)]
        budget: usize,
        #[arg(long, default_value = "t5")]
        test: String,
    },
    /// The bounding-box heuristic on a named test.
    Baseline {
        #[arg(long, default_value = "t5")]
        test: String,
    },
}

enum Failure {
    Config(String),
    Io(String),
    Run(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::Run(_) => 1,
        }
    }
}

impl From<LearnError> for Failure {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::Io(_) => Failure::Io(e.to_string()),
            LearnError::InvalidConfig(_) | LearnError::InvalidNet(_) | LearnError::ShapeMismatch(_) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl From<CollectError> for Failure {
    fn from(e: CollectError) -> Self {
        match e {
            CollectError::Io(_) | CollectError::ManifestMismatch(_) | CollectError::Json(_) => Failure::Io(e.to_string()),
            CollectError::InvalidConfig(_) => Failure::Config(e.to_string()),
            CollectError::ModelLoad(inner) => Failure::from(inner),
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Io(_) => Failure::Io(e.to_string()),
            BenchError::InvalidSpec(_) | BenchError::NonPositiveTime(_) => Failure::Config(e.to_string()),
            BenchError::ModelLoad(inner) | BenchError::Learn(inner) => Failure::from(inner),
            BenchError::Collect(inner) => Failure::from(inner),
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn model_at(path: &Path) -> Result<Arc<ModelParams>, Failure> {
    load_model(path).map(Arc::new).map_err(|e| match e {
        LearnError::Io(io) => io_at(path)(io),
        other => Failure::Config(format!("{}: {other}", path.display())),
    })
}

/// Preset defaults for a collection run, overlaid with the keys in the
/// user's JSON object.
fn collect_config(path: &Path, preset: &Preset, seed: u64) -> Result<CollectConfig, Failure> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    let user: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let serde_json::Value::Object(user) = user else {
        return Err(Failure::Config(format!("{}: expected a JSON object", path.display())));
    };
    let mut base = CollectConfig::desk(vec![ObjectSet::SoftToys25], GripperSpec::two_finger(Material::Soft), 1000, seed);
    base.workspace = preset.workspace;
    base.camera = preset.camera;
    base.patch = preset.patch;
    let mut merged = serde_json::to_value(&base).expect("config serializes");
    let obj = merged.as_object_mut().expect("config is an object");
    for (k, v) in user {
        if !obj.contains_key(&k) {
            return Err(Failure::Config(format!("{}: unknown key {k:?}", path.display())));
        }
        obj.insert(k, v);
    }
    let cfg: CollectConfig =
        serde_json::from_value(merged).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn named_spec(name: &str, preset: &Preset, seed: u64) -> Result<ExperimentSpec, Failure> {
    let mut spec = ExperimentSpec::named(name, preset.clone())?;
    spec.seeds = vec![seed];
    Ok(spec)
}

fn print_report(report: &BenchReport, dir: &Path) {
    for a in &report.aggregates {
        let m = &a.metrics;
        println!(
            "{:8} {:>4}/{:<4} success {:.3}  t_c {:.4}s  mpph {:.1}",
            a.name, m.successes, m.attempts, m.success_rate, m.t_c, m.mpph
        );
    }
    println!("report written to {}", dir.display());
}

fn run(cli: Cli) -> Result<(), Failure> {
    let preset = Preset::by_name(cli.preset);
    let out = &cli.out_dir;
    match cli.command {
        Command::Collect { config } => {
            let cfg = collect_config(&config, &preset, cli.seed)?;
            let ds = collect(&cfg)?;
            let dir = out.join(cfg.tag());
            save_dataset(&ds, &dir)?;
            let c = &ds.manifest.counts;
            println!(
                "{}: {} attempts, {} records, {} successes, {} emergency stops",
                ds.manifest.tag, c.attempts, c.total, c.successes, c.emergency_stops
            );
            println!("dataset written to {}", dir.display());
        }
        Command::Train { dataset, out: model_path, epochs } => {
            let ds = load_dataset(&dataset)?;
            let mut cfg = TrainConfig { seed: cli.seed, ..TrainConfig::default() };
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            let init = ModelParams::init(preset.net.clone(), cli.seed)?;
            let (model, curve) = train(&init, &ds.records, &cfg)?;
            if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(io_at(parent))?;
            }
            save_model(&model, &model_path)?;
            fs::create_dir_all(out).map_err(io_at(out))?;
            write_loss_csv(&out.join("loss.csv"), &curve).map_err(io_at(out))?;
            if let Some(last) = curve.last() {
                println!("epoch {}: loss {:.4}, train accuracy {:.3}", last.epoch, last.mean_loss, last.train_accuracy);
            }
            println!("model {} written to {}", model.content_hash(), model_path.display());
        }
        Command::Eval { model, test } => {
            let spec = named_spec(&test, &preset, cli.seed)?;
            let policy = Policy::from_config(&spec.policy, Some(model_at(&model)?), spec.preset.patch)
                .expect("model supplied");
            let report = run_single_object_eval(&spec, &policy)?;
            let dir = out.join(format!("eval-{}", spec.name));
            emit_report(&report, &spec, &dir)?;
            print_report(&report, &dir);
        }
        Command::Baseline { test } => {
            let spec = named_spec(&test, &preset, cli.seed)?;
            let report = run_single_object_eval(&spec, &Policy::Heuristic)?;
            let dir = out.join(format!("baseline-{}", spec.name));
            emit_report(&report, &spec, &dir)?;
            print_report(&report, &dir);
        }
        Command::Clutter { model, trials, budget, test } => {
            let mut spec = named_spec(&test, &preset, cli.seed)?;
            spec.trials = trials;
            spec.budget = budget;
            let policy = Policy::from_config(&spec.policy, Some(model_at(&model)?), spec.preset.patch)
                .expect("model supplied");
            let report = run_clutter_removal(&spec, &policy)?;
            let dir = out.join(format!("clutter-{}", spec.name));
            emit_report(&report, &spec, &dir)?;
            for t in &report.trials {
                println!("trial {}: {}/{} picks, cleared {}", t.trial, t.metrics.successes, t.metrics.attempts, t.cleared);
            }
            print_report(&report, &dir);
        }
        Command::Ablate { sizes, recipe, seeds } => {
            let spec = ExperimentSpec::named(&recipe, preset.clone())?;
            let mut cache = SourceCache::new();
            let curve = run_ablation(&spec, &sizes, &seeds, &mut cache)?;
            fs::create_dir_all(out).map_err(io_at(out))?;
            let json = serde_json::to_vec_pretty(&curve).expect("curve serializes");
            fs::write(out.join("ablation.json"), json).map_err(io_at(out))?;
            let mut csv = String::from("size,mean,sd\n");
            for p in &curve.points {
                csv.push_str(&format!("{},{},{}\n", p.size, p.mean, p.sd));
                println!("{:>6}  {:.3} ± {:.3}", p.size, p.mean, p.sd);
            }
            fs::write(out.join("ablation.csv"), csv).map_err(io_at(out))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("GRASPLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // fails only if a pool already exists
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(msg) | Failure::Io(msg) | Failure::Run(msg)) = &f;
            eprintln!("grasplab: {msg}");
            ExitCode::from(f.code())
        }
    }
}
