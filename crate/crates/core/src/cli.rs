//! Command-line front end. [`run_cli`] maps argv to an exit code:
//! 0 on success, 1 on configuration errors, 2 on runtime failures.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::config::{load_config, ExperimentKind, ExperimentSpec};
use crate::datasets::{split_ssl, SslSplit};
use crate::error::{Error, Result};
use crate::harness::{
    hoeffding_n, size_from_fraction, sweep_labeled, sweep_mismatch, sweep_unlabeled, train_for_study, trials_csv, tune,
    validation_size_study, StudyMode, SweepResult, SweepSetup,
};
use crate::losses::Method;
use crate::model::ParameterSet;
use crate::report::boundary_grid;
use crate::training::train_full;

#[derive(Debug, Parser)]
#[command(name = "ssl-lab", version, about = "Semi-supervised learning experiments on small 2-D problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment spec (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Replace the spec's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Method to run; repeat for several. Replaces the spec's method list.
    #[arg(long = "method", value_name = "NAME")]
    methods: Vec<Method>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Axis values, comma separated.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train each method for each seed and write run records and models.
    Train(Common),
    /// Sweep the number of labeled examples.
    SweepLabeled(SweepArgs),
    /// Sweep the number of unlabeled examples.
    SweepUnlabeled(SweepArgs),
    /// Sweep class overlap between labeled and unlabeled data.
    SweepMismatch(SweepArgs),
    /// Spread of validation error over small disjoint validation sets.
    ValsizeStudy {
        #[command(flatten)]
        common: Common,
        /// Number of disjoint subsets per size.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Validation-set size needed for a given accuracy gap and confidence.
    Hoeffding {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        confidence: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Class probabilities of a model over a grid.
    Boundary {
        #[command(flatten)]
        common: Common,
        /// Trained model JSON; when absent the first method is trained first.
        #[arg(long, value_name = "PATH")]
        params: Option<PathBuf>,
        #[arg(long)]
        resolution: Option<usize>,
    },
}

/// Runs the CLI on `argv` (including the program name), printing emitted
/// file paths to stdout and diagnostics to stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_configuration() {
                1
            } else {
                2
            }
        }
    }
}

fn usage_error(kind: ExperimentKind, message: &str) -> Error {
    let mut cli = Cli::command();
    cli.build();
    let usage = match cli.find_subcommand_mut(kind.name()) {
        Some(sub) => sub.render_usage(),
        None => cli.render_usage(),
    };
    Error::Config(format!("{message}\n\n{usage}"))
}

fn resolve(kind: ExperimentKind, common: &Common, required: bool) -> Result<ExperimentSpec> {
    let mut spec = match &common.config {
        Some(path) => load_config(path)?,
        None if required => return Err(usage_error(kind, &format!("{kind} requires --config PATH"))),
        None => ExperimentSpec::new(kind),
    };
    if spec.kind != kind {
        return Err(Error::Config(format!("config describes a {} experiment, not {kind}", spec.kind)));
    }
    if let Some(seed) = common.seed {
        spec.seeds = vec![seed];
    }
    if let Some(out) = &common.out {
        spec.output_dir = out.clone();
    }
    if !common.methods.is_empty() {
        spec.methods = common.methods.clone();
    }
    Ok(spec)
}

fn run(command: Command) -> Result<Vec<String>> {
    match command {
        Command::Train(common) => {
            let spec = resolve(ExperimentKind::Train, &common, true)?;
            spec.validate()?;
            run_train(&spec)
        }
        Command::SweepLabeled(args) => run_sweep(ExperimentKind::SweepLabeled, &args),
        Command::SweepUnlabeled(args) => run_sweep(ExperimentKind::SweepUnlabeled, &args),
        Command::SweepMismatch(args) => run_sweep(ExperimentKind::SweepMismatch, &args),
        Command::ValsizeStudy { common, k } => {
            let mut spec = resolve(ExperimentKind::ValsizeStudy, &common, true)?;
            if let Some(k) = k {
                spec.valsize.k = k;
            }
            spec.validate()?;
            run_valsize(&spec)
        }
        Command::Hoeffding { config, confidence, p } => {
            let section = match &config {
                Some(path) => load_config(path)?.hoeffding,
                None => ExperimentSpec::new(ExperimentKind::Hoeffding).hoeffding,
            };
            let n = hoeffding_n(confidence.unwrap_or(section.confidence), p.unwrap_or(section.p))?;
            Ok(vec![n.to_string()])
        }
        Command::Boundary { common, params, resolution } => {
            let mut spec = resolve(ExperimentKind::Boundary, &common, false)?;
            if let Some(r) = resolution {
                spec.boundary.resolution = r;
            }
            spec.validate()?;
            run_boundary(&spec, params.as_deref())
        }
    }
}

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(spec: &ExperimentSpec) -> Result<Self> {
        fs::create_dir_all(&spec.output_dir)?;
        let mut out = Outputs { dir: spec.output_dir.clone(), written: Vec::new() };
        out.write("spec.toml", &spec.to_toml()?)?;
        Ok(out)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.written.push(path.display().to_string());
        Ok(())
    }
}

fn make_split(spec: &ExperimentSpec, seed: u64) -> Result<SslSplit> {
    let source = spec.dataset();
    let data = source.generate()?;
    let s = spec.split();
    Ok(split_ssl(&data, s.labeled, s.unlabeled, s.validation, s.test, seed)?.with_source(source))
}

fn run_train(spec: &ExperimentSpec) -> Result<Vec<String>> {
    let mut out = Outputs::new(spec)?;
    let mut methods = spec.method_configs();
    let mut train_configs = vec![spec.train.clone(); methods.len()];

    if let Some(tune_spec) = &spec.tune {
        let split = make_split(spec, spec.seeds[0])?;
        let mut log = Vec::new();
        for (m, t) in methods.iter_mut().zip(train_configs.iter_mut()) {
            let outcome = tune(m, &split, tune_spec, &spec.train)?;
            *m = outcome.best;
            *t = outcome.best_train;
            log.extend(outcome.trials);
        }
        out.write("tune_trials.csv", &trials_csv(&log))?;
    }

    let mut summary = String::from("method,seed,selected_step,val_error,test_error,unlabeled_error\n");
    for &seed in &spec.seeds {
        let split = make_split(spec, seed)?;
        let dir = out.dir.join(format!("splits/seed{seed}"));
        out.written.extend(split.write_to(&dir, "")?.into_iter().map(|p| p.display().to_string()));
        for (m, t) in methods.iter().zip(&train_configs) {
            let outcome = train_full(&split, m, t, seed, None)?;
            let r = &outcome.record;
            let name = format!("{}_seed{seed}", m.method);
            out.write(&format!("runs/{name}.json"), &r.to_json()?)?;
            out.write(&format!("models/{name}.json"), &(outcome.best_params.to_json()? + "\n"))?;
            let unl = r.selected_entry().unlabeled_error.map(|v| v.to_string()).unwrap_or_default();
            writeln!(summary, "{},{seed},{},{},{},{unl}", m.method, r.selected.step, r.selected.val_error, r.selected.test_error)
                .expect("writing to a String");
        }
    }
    out.write("train_summary.csv", &summary)?;
    Ok(out.written)
}

fn run_sweep(kind: ExperimentKind, args: &SweepArgs) -> Result<Vec<String>> {
    let mut spec = resolve(kind, &args.common, true)?;
    if let Some(values) = &args.values {
        spec.sweep.values = values.clone();
    }
    spec.validate()?;
    let setup = SweepSetup {
        data: spec.dataset().generate()?,
        sizes: spec.split(),
        train: spec.train.clone(),
        methods: spec.method_configs(),
        seeds: spec.seeds.clone(),
    };
    let result: SweepResult = match kind {
        ExperimentKind::SweepLabeled => sweep_labeled(&setup, &spec.sweep_counts()?)?,
        ExperimentKind::SweepUnlabeled => sweep_unlabeled(&setup, &spec.sweep_counts()?)?,
        ExperimentKind::SweepMismatch => sweep_mismatch(&setup, &spec.sweep.values)?,
        other => unreachable!("{other} is not a sweep"),
    };
    let mut out = Outputs::new(&spec)?;
    out.write(&format!("{}_cells.csv", result.axis), &result.cells_csv())?;
    out.write(&format!("{}_summary.csv", result.axis), &result.summary_csv())?;
    Ok(out.written)
}

fn run_valsize(spec: &ExperimentSpec) -> Result<Vec<String>> {
    let mut out = Outputs::new(spec)?;
    let mode = match &spec.valsize.relative_to {
        Some(r) => StudyMode::RelativeTo(r.clone()),
        None => StudyMode::Absolute,
    };
    let labeled = spec.split().labeled;
    let sizes: Vec<usize> =
        spec.valsize.fractions.iter().map(|&f| size_from_fraction(f, labeled)).collect::<Result<_>>()?;
    for &seed in &spec.seeds {
        let split = make_split(spec, seed)?;
        let models = train_for_study(&split, &spec.method_configs(), &spec.train, seed)?;
        let study = validation_size_study(&models, &split.validation, &sizes, spec.valsize.k, seed, &mode)?;
        out.write(&format!("valsize_seed{seed}_cells.csv"), &study.cells_csv())?;
        out.write(&format!("valsize_seed{seed}_summary.csv"), &study.summary_csv())?;
    }
    Ok(out.written)
}

fn run_boundary(spec: &ExperimentSpec, params_path: Option<&Path>) -> Result<Vec<String>> {
    let mut out = Outputs::new(spec)?;
    let params = match params_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read parameters {}: {e}", path.display())))?;
            ParameterSet::from_json(&text).map_err(|e| Error::Config(format!("bad parameters file: {e}")))?
        }
        None => {
            let seed = spec.seeds[0];
            let split = make_split(spec, seed)?;
            let method = spec.method_configs()[0];
            let params = train_full(&split, &method, &spec.train, seed, None)?.best_params;
            out.write("boundary_model.json", &(params.to_json()? + "\n"))?;
            params
        }
    };
    let grid = boundary_grid(&params, &spec.boundary.extent, spec.boundary.resolution)?;
    out.write("boundary.csv", &grid.to_csv())?;
    Ok(out.written)
}
