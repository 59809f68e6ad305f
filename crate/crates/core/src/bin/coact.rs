use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use coact::engine::{compare_runs, events::write_ndjson, Engine, EpisodeResult, Mode, Scenario};
use coact::fusion::{dataset, evaluate, read_jsonl, save_model, synthetic_dataset, train, TrainingConfig};
use coact::interface::{load_groups, load_scenario, read_record, replay, serve, write_record, ServeConfig};
use coact::stats::one_way_anova;

#[derive(Parser)]
#[command(name = "coact", version, about = "Human-robot collaboration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one episode and write its report and event log.
    Run(RunArgs),
    /// Run a scenario in both modes and report the differences.
    Compare(CompareArgs),
    /// Train the command classifier.
    Train(TrainArgs),
    /// One-way ANOVA over groups read from a JSON file.
    Anova(AnovaArgs),
    /// Serve a scenario to interactive clients over TCP.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Baseline,
    Predictive,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Baseline => Mode::Baseline,
            ModeArg::Predictive => Mode::Predictive,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Directory for report.json and events.ndjson; the report goes to
    /// stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario's mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Re-apply a session recorded by `serve --record`.
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    scenario: PathBuf,
    /// Directory for comparison.json, baseline.ndjson and predictive.ndjson.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON lines of {"tokens": [...], "label": k}.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    dataset: Option<PathBuf>,
    /// Generate this many synthetic samples instead.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = TrainingConfig::default().max_epochs)]
    max_epochs: usize,
    /// Share of the data held out for the final accuracy.
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnovaArgs {
    #[arg(long)]
    groups_file: PathBuf,
    /// Print the result as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    scenario: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 7878)]
    port: u16,
    /// Simulated seconds per wall-clock second.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    #[arg(long)]
    max_ticks: Option<u64>,
    /// Write the accepted client messages here for `run --replay`.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Directory for report.json and events.ndjson.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Scenario(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Scenario(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn scenario_at(path: &Path) -> Result<Scenario, Failure> {
    load_scenario(path).map(|l| l.scenario).map_err(|e| Failure::Scenario(e.to_string()))
}

fn write_episode(dir: &Path, stem: &str, report: &EpisodeResult) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(runtime)?;
    let log = File::create(dir.join(format!("{stem}.ndjson"))).map_err(runtime)?;
    write_ndjson(BufWriter::new(log), &report.events).map_err(runtime)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    std::fs::write(path, text + "\n").map_err(runtime)
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(value).map_err(runtime)?);
    Ok(())
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let mut sc = scenario_at(&a.scenario)?;
    if let Some(m) = a.mode {
        sc.mode = m.into();
    }
    let engine = Engine::new(sc).map_err(|e| Failure::Scenario(e.to_string()))?;
    let report = match a.replay {
        Some(path) => {
            let f = File::open(&path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let record = read_record(BufReader::new(f)).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            replay(engine, &record, None).map_err(runtime)?.result()
        }
        None => engine.run().map_err(runtime)?,
    };
    match a.out {
        Some(dir) => {
            write_episode(&dir, "events", &report)?;
            write_json(&dir.join("report.json"), &report)
        }
        None => print_json(&report),
    }
}

fn compare(a: CompareArgs) -> Result<(), Failure> {
    let sc = scenario_at(&a.scenario)?;
    let cmp = compare_runs(&sc).map_err(|e| Failure::Scenario(e.to_string()))?;
    match a.out {
        Some(dir) => {
            write_episode(&dir, "baseline", &cmp.baseline)?;
            write_episode(&dir, "predictive", &cmp.predictive)?;
            write_json(&dir.join("comparison.json"), &cmp)
        }
        None => print_json(&cmp),
    }
}

fn train_cmd(a: TrainArgs) -> Result<(), Failure> {
    let data = match (&a.dataset, a.synthetic) {
        (Some(path), _) => {
            let f = File::open(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            read_jsonl(BufReader::new(f)).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(n)) => synthetic_dataset(n, a.seed),
        (None, None) => unreachable!("clap requires one data source"),
    };
    if !(0.0..1.0).contains(&a.test_fraction) {
        return Err(Failure::Usage("--test-fraction must lie in [0, 1)".into()));
    }
    let (fit, test) = dataset::split(&data, a.test_fraction, a.seed);
    let samples: Vec<_> = fit.iter().map(|d| d.sample()).collect();
    let cfg = TrainingConfig { rng_seed: a.seed, max_epochs: a.max_epochs, ..TrainingConfig::default() };
    let (model, history) = train(&samples, &cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    println!(
        "trained on {} samples ({} for validation): {} epochs, best epoch {}, validation loss {:.4}{}",
        history.n_train + history.n_val,
        history.n_val,
        history.epochs_run(),
        history.best_epoch,
        history.best_val_loss,
        if history.stopped_early { ", stopped early" } else { "" }
    );
    if !test.is_empty() {
        let held_out: Vec<_> = test.iter().map(|d| d.sample()).collect();
        let eval = evaluate(&model, &held_out).map_err(runtime)?;
        println!("held-out accuracy {:.4} on {} samples", eval.accuracy, held_out.len());
    }
    if let Some(out) = a.out {
        save_model(&model, &out).map_err(runtime)?;
        println!("model written to {}", out.display());
    }
    Ok(())
}

fn anova(a: AnovaArgs) -> Result<(), Failure> {
    let file = load_groups(&a.groups_file).map_err(|e| Failure::Usage(e.to_string()))?;
    let summaries: Vec<_> = file.groups.iter().map(|g| g.summary()).collect();
    let result = one_way_anova(&summaries).map_err(|e| Failure::Usage(e.to_string()))?;
    if a.json {
        return print_json(&result);
    }
    if let Some(title) = &file.title {
        println!("{title}\n");
    }
    let names: Vec<String> = file.groups.iter().map(|g| g.name.clone()).collect();
    print!("{}", result.table(&names));
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> Result<(), Failure> {
    let sc = scenario_at(&a.scenario)?;
    let engine = Engine::new(sc).map_err(|e| Failure::Scenario(e.to_string()))?;
    if !(a.speed > 0.0 && a.speed.is_finite()) {
        return Err(Failure::Usage("--speed must be positive".into()));
    }
    let listener = TcpListener::bind((a.host.as_str(), a.port)).map_err(runtime)?;
    log::info!("listening on {}", listener.local_addr().map_err(runtime)?);
    let outcome = serve(listener, engine, &ServeConfig { speed: a.speed, max_ticks: a.max_ticks }).map_err(runtime)?;
    if let Some(path) = a.record {
        let f = File::create(&path).map_err(runtime)?;
        write_record(BufWriter::new(f), &outcome.record).map_err(runtime)?;
    }
    let report = outcome.engine.result();
    match a.out {
        Some(dir) => {
            write_episode(&dir, "events", &report)?;
            write_json(&dir.join("report.json"), &report)
        }
        None => print_json(&report),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COACT_LOG_LEVEL", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Cmd::Run(a) => run(a),
        Cmd::Compare(a) => compare(a),
        Cmd::Train(a) => train_cmd(a),
        Cmd::Anova(a) => anova(a),
        Cmd::Serve(a) => serve_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Scenario(m) | Failure::Runtime(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
