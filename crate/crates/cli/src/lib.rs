//! `ncc-lab`: one entry point for the whole pipeline.
//!
//! Exit codes: 0 success, 2 usage error, 3 I/O error, 4 validation failure.

mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use ncc_core::ncc::{grid_search, train, validate, validation_set, write_history, GridConfig};
use ncc_core::scores::{
    hypothesis_report, load_bundles, pairwise_object_relations, relations_csv,
    synth_feature_oracle, write_bundles, HypothesisReport, OracleConfig, ScoreError, ScoreTable,
};
use ncc_core::seed::{component_rng, derive_seed};
use ncc_core::synthgen::{make_training_minibatch, write_minibatch, MixturePrior};
use ncc_core::tuebingen::{evaluate_tuebingen, load_tuebingen, TuebingenError};
use ncc_core::{Architecture, GeneratorConfig, NccError, NccModel, Objective, TrainConfig};

pub use config::ConfigError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Validation(_) => EXIT_VALIDATION,
        }
    }
}

impl From<NccError> for CliError {
    fn from(e: NccError) -> Self {
        match e {
            NccError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TuebingenError> for CliError {
    fn from(e: TuebingenError) -> Self {
        match e {
            TuebingenError::MissingFile(_) | TuebingenError::Io { .. } => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::Io { .. } => CliError::Io(e.to_string()),
            ScoreError::Ncc(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ncc-lab",
    version,
    about = "Learn and apply a neural causation coefficient",
    args_override_self = true
)]
struct Cli {
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory; every file a command writes goes here.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// `key = value` file of flag defaults (keys are long flag names).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic training scatterplots and their manifest.
    Gen(GenCmd),
    /// Train one model.
    Train(TrainCmd),
    /// Train every point of a hyperparameter grid and keep the best.
    Grid(GridCmd),
    /// Score a model on a directory of real cause-effect pairs.
    EvalTuebingen(EvalCmd),
    /// Score feature bundles and write the per-class tables, hypothesis report and class relations.
    Score(ScoreCmd),
    /// Rebuild the hypothesis report from existing per-class score tables.
    Report(ReportCmd),
    /// Write synthetic feature bundles with planted causal structure.
    Oracle(OracleCmd),
}

#[derive(Debug, Args)]
struct GeneratorFlags {
    /// Points per scatterplot.
    #[arg(long, default_value_t = 1000)]
    points: usize,
    /// Fewest spline knots.
    #[arg(long, default_value_t = 4)]
    min_knots: usize,
    /// Most spline knots.
    #[arg(long, default_value_t = 5)]
    max_knots: usize,
    /// Most Gaussian components in a cause distribution.
    #[arg(long, default_value_t = 5)]
    max_components: usize,
    /// Upper bound of the base noise stddev.
    #[arg(long, default_value_t = 5.0)]
    noise_level_max: f64,
    /// Upper bound of the noise-scale spline ordinates.
    #[arg(long, default_value_t = 5.0)]
    noise_scale_max: f64,
}

impl GeneratorFlags {
    fn config(&self, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            points_per_sample: (self.points, self.points),
            knot_count: (self.min_knots, self.max_knots),
            mixture: MixturePrior {
                components: (1, self.max_components),
                ..MixturePrior::default()
            },
            noise_level: (0.0, self.noise_level_max),
            noise_scale: (0.0, self.noise_scale_max),
            seed,
            ..GeneratorConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct OptimFlags {
    /// Optimizer steps.
    #[arg(long, default_value_t = 10_000)]
    iterations: usize,
    /// Scatterplots per minibatch; each enters in both orientations.
    #[arg(long, default_value_t = 16)]
    pairs_per_batch: usize,
    /// Also add an x-permuted copy of each scatterplot with target 1/2.
    #[arg(long)]
    with_independent: bool,
    /// `composite` or `per-orientation`.
    #[arg(long, default_value = "composite")]
    objective: Objective,
    /// RMSProp step size.
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
}

impl OptimFlags {
    fn config(
        &self,
        generator: GeneratorConfig,
        architecture: Architecture,
        validation_size: usize,
        seed: u64,
    ) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            pairs_per_batch: self.pairs_per_batch,
            architecture,
            validation_size,
            with_independent: self.with_independent,
            objective: self.objective,
            learning_rate: self.learning_rate,
            generator,
            seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct GenCmd {
    /// Scatterplots to draw; each is written in both orientations.
    #[arg(long, default_value_t = 16)]
    count: usize,
    /// Also write an x-permuted independent copy of each scatterplot.
    #[arg(long)]
    with_independent: bool,
    #[command(flatten)]
    generator: GeneratorFlags,
}

#[derive(Debug, Args)]
struct TrainCmd {
    /// Hidden units per layer.
    #[arg(long, default_value_t = 100)]
    hidden: usize,
    /// Hidden layers in the embedding and in the classifier.
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Dropout rate of every hidden layer.
    #[arg(long, default_value_t = 0.25)]
    dropout: f64,
    /// Held-out synthetic samples to report accuracy on after training (0 skips it).
    #[arg(long, default_value_t = 0)]
    validation_size: usize,
    #[command(flatten)]
    optim: OptimFlags,
    #[command(flatten)]
    generator: GeneratorFlags,
}

#[derive(Debug, Args)]
struct GridCmd {
    /// Comma-separated dropout rates.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.3")]
    dropouts: Vec<f64>,
    /// Comma-separated layer counts.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    layer_counts: Vec<usize>,
    /// Comma-separated hidden widths.
    #[arg(long, value_delimiter = ',', default_value = "50,100,500")]
    units: Vec<usize>,
    /// Reuse checkpoints of identical earlier runs from this directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Held-out synthetic samples the grid points are ranked on.
    #[arg(long, default_value_t = 10_000)]
    validation_size: usize,
    #[command(flatten)]
    optim: OptimFlags,
    #[command(flatten)]
    generator: GeneratorFlags,
}

#[derive(Debug, Args)]
struct EvalCmd {
    /// Directory holding pairmeta.txt and pairNNNN.txt files.
    #[arg(long)]
    pairs: PathBuf,
    /// Model checkpoint.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreCmd {
    /// Bundle directory (manifest.csv plus class_<k>/ folders).
    #[arg(long)]
    bundles: PathBuf,
    /// Model checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated top fractions for the hypothesis report.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.2")]
    fractions: Vec<f64>,
}

#[derive(Debug, Args)]
struct ReportCmd {
    /// Directory holding scores_<class>.csv tables.
    #[arg(long)]
    scores: PathBuf,
    /// Comma-separated top fractions.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.2")]
    fractions: Vec<f64>,
}

#[derive(Debug, Args)]
struct OracleCmd {
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 512)]
    features: usize,
    #[arg(long, default_value_t = 1000)]
    images: usize,
    /// Planted children of the log odds per class.
    #[arg(long, default_value_t = 16)]
    anticausal: usize,
    /// Planted parents of the log odds per class.
    #[arg(long, default_value_t = 16)]
    causal: usize,
    /// Directionless near-copies of the log odds per class.
    #[arg(long, default_value_t = 32)]
    decoys: usize,
}

/// Index of the subcommand token: the first token that is neither a flag nor a flag value.
fn subcommand_position(args: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        if a.starts_with("--") {
            i += if a.contains('=') { 1 } else { 2 };
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    let mut found = None;
    while let Some(a) = it.next() {
        if a == "--config" {
            found = it.next().map(PathBuf::from);
        } else if let Some(p) = a.strip_prefix("--config=") {
            found = Some(PathBuf::from(p));
        }
    }
    found
}

/// Splices config-file values in after the subcommand, dropping keys the command line sets itself.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(pos) = subcommand_position(&args) else {
        return Ok(args);
    };
    let given: Vec<&str> = args
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a))
        .collect();
    let entries: Vec<_> = config::read(&path)?;
    let cmd = Cli::command();
    let shown = path.display().to_string();
    config::to_args(&entries, &cmd, &args[pos], &shown)?;
    let kept: Vec<_> = entries
        .into_iter()
        .filter(|e| !given.contains(&e.key.as_str()))
        .collect();
    let extra = config::to_args(&kept, &cmd, &args[pos], &shown)?;
    let mut out = args[..=pos].to_vec();
    out.extend(extra);
    out.extend(args[pos + 1..].iter().cloned());
    Ok(out)
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("NCC_LAB_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn require_dir(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Io(format!(
            "{what} directory {} does not exist",
            path.display()
        )))
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Io(format!(
            "{what} file {} does not exist",
            path.display()
        )))
    }
}

fn check_fractions(fractions: &[f64]) -> Result<(), CliError> {
    match fractions.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
        Some(q) => Err(CliError::Validation(format!("fraction {q} outside (0, 1]"))),
        None => Ok(()),
    }
}

fn write(out: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = out.join(name);
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

fn create_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(io_err(out))
}

fn load_model(path: &Path) -> Result<NccModel, CliError> {
    require_file(path, "model")?;
    Ok(NccModel::load(path)?)
}

fn cmd_gen(cli: &Cli, c: &GenCmd) -> Result<String, CliError> {
    let gen = c.generator.config(derive_seed(cli.seed, "cli/gen"));
    gen.validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if c.count == 0 {
        return Err(CliError::Validation("count must be positive".into()));
    }
    let mut rng = component_rng(cli.seed, "cli/gen");
    let samples = make_training_minibatch(&gen, c.count, c.with_independent, &mut rng)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    create_out(&cli.out)?;
    let files = write_minibatch(&cli.out, &samples).map_err(io_err(&cli.out))?;
    Ok(format!(
        "wrote {} scatterplots to {}\n",
        files.len(),
        cli.out.display()
    ))
}

fn cmd_train(cli: &Cli, c: &TrainCmd) -> Result<String, CliError> {
    let arch = Architecture::new(c.hidden, c.layers, c.dropout);
    let cfg = c
        .optim
        .config(c.generator.config(0), arch, c.validation_size, cli.seed);
    cfg.validate()?;
    create_out(&cli.out)?;
    let outcome = train(&cfg)?;
    let ckpt = cli.out.join("model.ckpt");
    outcome.model.save(&ckpt).map_err(io_err(&ckpt))?;
    let hist = cli.out.join("history.csv");
    write_history(&hist, &outcome.history).map_err(io_err(&hist))?;
    let mut msg = format!("wrote {} and {}\n", ckpt.display(), hist.display());
    if cfg.validation_size > 0 {
        let held_out = validation_set(&cfg.generator, cfg.validation_size, cli.seed)?;
        let acc = validate(&outcome.model, &held_out)?;
        writeln!(msg, "validation accuracy {acc:.4}").expect("write to string");
    }
    Ok(msg)
}

fn cmd_grid(cli: &Cli, c: &GridCmd) -> Result<String, CliError> {
    let base = c.optim.config(
        c.generator.config(0),
        Architecture::default(),
        c.validation_size,
        cli.seed,
    );
    base.validate()?;
    if c.validation_size == 0 {
        return Err(CliError::Validation(
            "grid search needs validation-size > 0".into(),
        ));
    }
    let cfg = GridConfig {
        dropouts: c.dropouts.clone(),
        layers: c.layer_counts.clone(),
        units: c.units.clone(),
        base,
        cache_dir: c.cache.clone(),
    };
    for p in cfg.points() {
        cfg.point_config(0, p).architecture.validate()?;
    }
    create_out(&cli.out)?;
    let report = grid_search(&cfg)?;
    write(&cli.out, "grid_report.csv", &report.report_csv())?;
    let ckpt = cli.out.join("best.ckpt");
    report.best.save(&ckpt).map_err(io_err(&ckpt))?;
    let r = &report.rows[report.best_index];
    Ok(format!(
        "best: dropout {} layers {} units {} validation accuracy {:.4}\n",
        r.point.dropout, r.point.layers, r.point.units, r.val_accuracy
    ))
}

fn cmd_eval(cli: &Cli, c: &EvalCmd) -> Result<String, CliError> {
    require_dir(&c.pairs, "pairs")?;
    let model = load_model(&c.model)?;
    let pairs = load_tuebingen(&c.pairs)?;
    let report = evaluate_tuebingen(&model, &pairs, cli.seed)?;
    create_out(&cli.out)?;
    let path = cli.out.join("tuebingen_report.csv");
    let file = std::fs::File::create(&path).map_err(io_err(&path))?;
    report
        .write_csv(file)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(format!(
        "{} pairs scored, {} excluded; weighted accuracy {:.4}, unweighted accuracy {:.4}\n",
        report.results.len(),
        report.excluded,
        report.weighted_accuracy,
        report.unweighted_accuracy
    ))
}

fn cmd_score(cli: &Cli, c: &ScoreCmd) -> Result<String, CliError> {
    require_dir(&c.bundles, "bundle")?;
    check_fractions(&c.fractions)?;
    let model = load_model(&c.model)?;
    let set = load_bundles(&c.bundles)?;
    let (report, tables) = hypothesis_report(&set.bundles, &model, &c.fractions)?;
    let relations = pairwise_object_relations(set.relation_logodds()?.view(), &model)?;
    create_out(&cli.out)?;
    for t in &tables {
        write(&cli.out, &format!("scores_{}.csv", t.class_id), &t.to_csv())?;
    }
    write(&cli.out, "hypothesis_report.csv", &report.to_csv())?;
    write(
        &cli.out,
        "pairwise_relations.csv",
        &relations_csv(&relations, None),
    )?;
    Ok(report.summary())
}

fn cmd_report(cli: &Cli, c: &ReportCmd) -> Result<String, CliError> {
    require_dir(&c.scores, "scores")?;
    check_fractions(&c.fractions)?;
    let mut tables = Vec::new();
    let entries = std::fs::read_dir(&c.scores).map_err(io_err(&c.scores))?;
    for entry in entries {
        let path = entry.map_err(io_err(&c.scores))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let Some(class) = name
            .strip_prefix("scores_")
            .and_then(|n| n.strip_suffix(".csv"))
        else {
            continue;
        };
        let Ok(class_id) = class.parse::<usize>() else {
            continue;
        };
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let table = ScoreTable::from_csv(class_id, &text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        tables.push(table);
    }
    if tables.is_empty() {
        return Err(CliError::Validation(format!(
            "no scores_<class>.csv files in {}",
            c.scores.display()
        )));
    }
    tables.sort_by_key(|t| t.class_id);
    let report = HypothesisReport::from_tables(&tables, &c.fractions);
    create_out(&cli.out)?;
    write(&cli.out, "hypothesis_report.csv", &report.to_csv())?;
    Ok(report.summary())
}

fn cmd_oracle(cli: &Cli, c: &OracleCmd) -> Result<String, CliError> {
    let cfg = OracleConfig {
        classes: c.classes,
        features: c.features,
        images: c.images,
        anticausal: c.anticausal,
        causal: c.causal,
        decoys: c.decoys,
        ..OracleConfig::default()
    };
    cfg.validate()?;
    let mut rng = component_rng(cli.seed, "scores/oracle");
    let oracle = synth_feature_oracle(&cfg, &mut rng)?;
    write_bundles(&cli.out, &oracle.set)?;
    let mut truth = String::from("class_id,feature,role\n");
    for (b, t) in oracle.set.bundles.iter().zip(&oracle.truth) {
        let mut roles: Vec<(usize, &str)> = Vec::with_capacity(cfg.features);
        for (list, role) in [
            (&t.anticausal, "anticausal"),
            (&t.causal, "causal"),
            (&t.decoys, "decoy"),
            (&t.independent, "independent"),
        ] {
            roles.extend(list.iter().map(|&l| (l, role)));
        }
        roles.sort_unstable();
        for (l, role) in roles {
            writeln!(truth, "{},{l},{role}", b.class_id).expect("write to string");
        }
    }
    write(&cli.out, "truth.csv", &truth)?;
    Ok(format!(
        "wrote {} oracle bundles to {}\n",
        oracle.set.bundles.len(),
        cli.out.display()
    ))
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::debug!("worker pool already configured: {e}");
        }
    }
    match &cli.command {
        Command::Gen(c) => cmd_gen(cli, c),
        Command::Train(c) => cmd_train(cli, c),
        Command::Grid(c) => cmd_grid(cli, c),
        Command::EvalTuebingen(c) => cmd_eval(cli, c),
        Command::Score(c) => cmd_score(cli, c),
        Command::Report(c) => cmd_report(cli, c),
        Command::Oracle(c) => cmd_oracle(cli, c),
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
///
/// Results go to stdout, diagnostics to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    init_logging();
    let args: Vec<String> = argv
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("ncc-lab: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                print!("{}", e.render());
                return 0;
            }
            _ => {
                eprint!("{}", e.render());
                return EXIT_USAGE;
            }
        },
    };
    match execute(&cli) {
        Ok(msg) => {
            print!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("ncc-lab: {e}");
            e.exit_code()
        }
    }
}
