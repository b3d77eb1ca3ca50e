//! `ex2vec` command-line interface: the whole pipeline as subcommands.
//!
//! Every subcommand writes `<out>.manifest.json` next to its output with the
//! resolved configuration, seeds and SHA-256 checksums of inputs and outputs.

mod manifest;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use ex2vec::analysis::{
    listen_fraction_curve, median_activation_curve, median_gap_curve, synth_generate, write_curve_csv, CurvePoint,
    SynthSpec,
};
use ex2vec::data::{
    holdout_split, kcore_filter, load_canonical, parse_events, save_canonical, window_trim, write_split_manifest,
    Dataset, PairSequence, Schema, TimeUnit, LISTEN_FRACTION,
};
use ex2vec::eval::{evaluate_models, EvalConfig};
use ex2vec::kernel::DEFAULT_DECAY;
use ex2vec::model::gradcheck::{finite_diff_check, random_problem};
use ex2vec::model::{save_checkpoint, Checkpoint, Sample};
use ex2vec::train::{train, write_train_log, TrainConfig};

use manifest::{manifest_path, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "ex2vec", version, about = "Ex2Vec repeat-consumption modelling pipeline")]
struct Cli {
    /// Worker threads; 1 gives bit-reproducible runs
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only log warnings and errors
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a raw event CSV into the canonical processed form
    Ingest(IngestArgs),
    /// Trim the observation window and apply k-core filtering
    Filter(FilterArgs),
    /// Write a validation/test holdout manifest
    Split(SplitArgs),
    /// Train Ex2Vec on one holdout split and save the selected checkpoint
    Train(TrainArgs),
    /// Train and score Ex2Vec and the baselines over several splits
    Evaluate(EvaluateArgs),
    /// Listen-fraction, gap and activation curves per repetition class
    Curves(CurvesArgs),
    /// Generate a synthetic population from known parameters
    Synth(SynthArgs),
    /// Compare analytic gradients with central finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemaArg {
    Labeled,
    Timed,
}

impl From<SchemaArg> for Schema {
    fn from(s: SchemaArg) -> Self {
        match s {
            SchemaArg::Labeled => Schema::Labeled,
            SchemaArg::Timed => Schema::Timed,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum UnitArg {
    Seconds,
    Hours,
}

impl From<UnitArg> for TimeUnit {
    fn from(u: UnitArg) -> Self {
        match u {
            UnitArg::Seconds => TimeUnit::Seconds,
            UnitArg::Hours => TimeUnit::Hours,
        }
    }
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Canonical events CSV (user_idx,item_idx,t,L)
    #[arg(long)]
    data: PathBuf,
    /// Unit of the `t` column
    #[arg(long, value_enum, default_value_t = UnitArg::Hours)]
    time_unit: UnitArg,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let d = load_canonical(&self.data, self.time_unit.into())?;
        info!(
            "loaded {} events, {} users, {} items from {}",
            d.len(),
            d.n_users(),
            d.n_items(),
            self.data.display()
        );
        Ok(d)
    }

    fn record(&self, m: &mut RunManifest) -> Result<()> {
        m.set("time_unit", TimeUnit::from(self.time_unit)).input(&self.data)?;
        Ok(())
    }
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long, value_enum)]
    schema: SchemaArg,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Unit for the `t` column of the output
    #[arg(long, value_enum, default_value_t = UnitArg::Hours)]
    time_unit: UnitArg,
}

#[derive(Args, Debug)]
struct FilterArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    /// Keep pairs whose first event falls within this leading fraction of the window
    #[arg(long, default_value_t = 0.8)]
    window: f64,
    /// Minimum distinct items per user
    #[arg(long, default_value_t = 5)]
    k_item: usize,
    /// Minimum distinct users per item
    #[arg(long, default_value_t = 20)]
    k_user: usize,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// key=value training config; defaults apply to missing keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Holdout split seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint path
    #[arg(long)]
    out: PathBuf,
    /// Training log CSV; defaults to `<out>.log.csv`
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated split seeds
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// Report CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CurvesArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output directory for listen_fraction.csv, median_gap.csv, median_activation.csv
    #[arg(long)]
    out_dir: PathBuf,
    /// Bootstrap seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Decay for the activation curve
    #[arg(long, default_value_t = DEFAULT_DECAY)]
    decay: f64,
    /// Restrict the listen-fraction curve to each class's most popular length
    #[arg(long)]
    restrict_popular: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    /// Default ground truth with distances straddling the interest vertex
    Default,
    /// Base distances above the vertex, producing rise-then-fall listen curves
    InvertedU,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum, default_value_t = Preset::InvertedU)]
    preset: Preset,
    #[arg(long, default_value_t = 200)]
    users: usize,
    #[arg(long, default_value_t = 100)]
    items: usize,
    #[arg(long, default_value_t = 20)]
    items_per_user: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Canonical events CSV (hours)
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth checkpoint; defaults to `<out>.truth.ckpt`
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random configurations, seeded from `seed` upwards
    #[arg(long, default_value_t = 1)]
    configs: u64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    Ok(match path {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    })
}

fn record_config(m: &mut RunManifest, config: &TrainConfig, path: Option<&Path>) -> Result<()> {
    for (k, v) in config.entries() {
        m.set(k, v);
    }
    if let Some(p) = path {
        m.input(p)?;
    }
    Ok(())
}

fn finish(m: &mut RunManifest, outputs: &[&Path], manifest: &Path) -> Result<()> {
    for p in outputs {
        m.output(p)?;
    }
    m.write(manifest)
}

fn ingest(a: IngestArgs) -> Result<()> {
    let d = parse_events(&a.input, a.schema.into(), a.time_unit.into())?;
    save_canonical(&d, &a.out)?;
    info!("wrote {} events to {}", d.len(), a.out.display());
    let mut m = RunManifest::new("ingest");
    m.set("schema", format!("{:?}", a.schema).to_lowercase())
        .set("time_unit", TimeUnit::from(a.time_unit))
        .set("listen_fraction", LISTEN_FRACTION)
        .input(&a.input)?;
    finish(&mut m, &[&a.out], &manifest_path(&a.out))
}

fn filter(a: FilterArgs) -> Result<()> {
    let d = a.data.load()?;
    let trimmed = window_trim(&d, a.window)?;
    let filtered = kcore_filter(&trimmed, a.k_item, a.k_user)?;
    info!(
        "window trim kept {} of {} events; k-core kept {} events, {} users, {} items",
        trimmed.len(),
        d.len(),
        filtered.len(),
        filtered.n_users(),
        filtered.n_items()
    );
    save_canonical(&filtered, &a.out)?;
    let mut m = RunManifest::new("filter");
    a.data.record(&mut m)?;
    m.set("window", a.window).set("k_item", a.k_item).set("k_user", a.k_user);
    finish(&mut m, &[&a.out], &manifest_path(&a.out))
}

fn split(a: SplitArgs) -> Result<()> {
    let d = a.data.load()?;
    let s = holdout_split(&d, a.seed)?;
    let file = File::create(&a.out).with_context(|| format!("{}: cannot create", a.out.display()))?;
    write_split_manifest(&s, BufWriter::new(file))?;
    let mut m = RunManifest::new("split");
    a.data.record(&mut m)?;
    m.seeds.push(a.seed);
    finish(&mut m, &[&a.out], &manifest_path(&a.out))
}

fn sequences_for(all: &[PairSequence], pairs: &[(usize, usize)]) -> Vec<PairSequence> {
    all.iter()
        .filter(|s| pairs.binary_search(&(s.user, s.item)).is_ok())
        .cloned()
        .collect()
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let config = load_config(a.config.as_deref())?;
    let d = a.data.load()?;
    let s = holdout_split(&d, a.seed)?;
    let mut val_pairs = s.validation.clone();
    val_pairs.sort_unstable();
    let validation = sequences_for(&d.pair_sequences(), &val_pairs);
    let outcome = train(&s.train, &validation, &config)?;
    info!(
        "selected lr {} epoch {} with validation balanced accuracy {:.4}",
        outcome.lr, outcome.epoch, outcome.val_balanced_accuracy
    );
    save_checkpoint(
        &Checkpoint {
            params: outcome.params,
            threshold: outcome.threshold,
        },
        &a.out,
    )?;
    let log_path = a.log.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".log.csv");
        p.into()
    });
    let file = File::create(&log_path).with_context(|| format!("{}: cannot create", log_path.display()))?;
    write_train_log(&outcome.log, BufWriter::new(file))?;

    let mut m = RunManifest::new("train");
    a.data.record(&mut m)?;
    record_config(&mut m, &config, a.config.as_deref())?;
    m.set("selected_lr", outcome.lr)
        .set("selected_epoch", outcome.epoch)
        .set("threshold", outcome.threshold);
    m.seeds.push(a.seed);
    finish(&mut m, &[&a.out, &log_path], &manifest_path(&a.out))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    if a.seeds.is_empty() {
        bail!("--seeds must list at least one seed");
    }
    let config = EvalConfig {
        train: load_config(a.config.as_deref())?,
        ..EvalConfig::default()
    };
    let d = a.data.load()?;
    let report = evaluate_models(&d, &a.seeds, &config)?;
    let file = File::create(&a.out).with_context(|| format!("{}: cannot create", a.out.display()))?;
    report.write_csv(BufWriter::new(file))?;
    print!("{}", report.table());

    let mut m = RunManifest::new("evaluate");
    a.data.record(&mut m)?;
    record_config(&mut m, &config.train, a.config.as_deref())?;
    m.set("bl_decay", config.bl_decay).set(
        "decay_grid",
        config
            .decay_grid
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    m.seeds = a.seeds.clone();
    finish(&mut m, &[&a.out], &manifest_path(&a.out))
}

fn curves(a: CurvesArgs) -> Result<()> {
    let d = a.data.load()?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("{}: cannot create directory", a.out_dir.display()))?;
    let outputs: [(&str, Vec<CurvePoint>); 3] = [
        ("listen_fraction.csv", listen_fraction_curve(&d, a.restrict_popular)),
        ("median_gap.csv", median_gap_curve(&d, true, a.seed)),
        ("median_activation.csv", median_activation_curve(&d, a.decay, true, a.seed)),
    ];
    let mut paths = Vec::new();
    for (name, points) in &outputs {
        let path = a.out_dir.join(name);
        let file = File::create(&path).with_context(|| format!("{}: cannot create", path.display()))?;
        write_curve_csv(points, BufWriter::new(file))?;
        paths.push(path);
    }
    let mut m = RunManifest::new("curves");
    a.data.record(&mut m)?;
    m.set("decay", a.decay)
        .set("restrict_popular", a.restrict_popular)
        .set("bootstrap_resamples", ex2vec::analysis::BOOTSTRAP_RESAMPLES);
    m.seeds.push(a.seed);
    let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    finish(&mut m, &refs, &a.out_dir.join("manifest.json"))
}

fn synth(a: SynthArgs) -> Result<()> {
    let base = match a.preset {
        Preset::Default => SynthSpec::default(),
        Preset::InvertedU => SynthSpec::inverted_u(),
    };
    let spec = SynthSpec {
        n_users: a.users,
        n_items: a.items,
        items_per_user: a.items_per_user,
        seed: a.seed,
        ..base
    };
    let out = synth_generate(&spec)?;
    save_canonical(&out.dataset, &a.out)?;
    let truth_path = a.truth.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".truth.ckpt");
        p.into()
    });
    save_checkpoint(
        &Checkpoint {
            params: out.truth,
            threshold: 0.5,
        },
        &truth_path,
    )?;
    info!("generated {} exposures", out.dataset.len());

    let t = spec.truth;
    let mut m = RunManifest::new("synth");
    m.set("preset", format!("{:?}", a.preset))
        .set("users", spec.n_users)
        .set("items", spec.n_items)
        .set("dim", spec.dim)
        .set("items_per_user", spec.items_per_user)
        .set("min_exposures", spec.min_exposures)
        .set("max_exposures", spec.max_exposures)
        .set("gap_median_hours", spec.gap_median_hours)
        .set("gap_sigma", spec.gap_sigma)
        .set("start_spread_hours", spec.start_spread_hours)
        .set("alpha", t.alpha)
        .set("beta", t.beta)
        .set("gamma", t.gamma)
        .set("cutoff", t.cutoff)
        .set("lambda", t.lambda)
        .set("decay", t.decay)
        .set("embedding_scale", spec.embedding_scale())
        .set("time_unit", TimeUnit::Hours);
    m.seeds.push(a.seed);
    finish(&mut m, &[&a.out, &truth_path], &manifest_path(&a.out))
}

fn gradcheck(a: GradcheckArgs) -> Result<bool> {
    let mut ok = true;
    for seed in a.seed..a.seed + a.configs {
        let (params, owned) = random_problem(seed);
        let batch: Vec<Sample<'_>> = owned.iter().map(|s| s.as_sample()).collect();
        let report = finite_diff_check(&params, &batch, 1e-3, 1e-5, a.tolerance, seed)?;
        println!("seed {seed} (dim {}, batch {})", params.dim, batch.len());
        for e in &report.entries {
            println!(
                "  {:<18} max rel error {:.3e}  checked {:>3}  skipped {:>2}  {}",
                e.name,
                e.max_rel_error,
                e.checked,
                e.skipped,
                if e.passed { "ok" } else { "FAIL" }
            );
        }
        ok &= report.passed();
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure thread pool")?;
    }
    match cli.command {
        Command::Ingest(a) => ingest(a)?,
        Command::Filter(a) => filter(a)?,
        Command::Split(a) => split(a)?,
        Command::Train(a) => train_cmd(a)?,
        Command::Evaluate(a) => evaluate(a)?,
        Command::Curves(a) => curves(a)?,
        Command::Synth(a) => synth(a)?,
        Command::Gradcheck(a) => {
            if !gradcheck(a)? {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Joins the error chain, skipping causes already spelled out by their parent.
fn one_line(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet {
            log::LevelFilter::Warn
        } else {
            log::LevelFilter::Info
        })
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}
