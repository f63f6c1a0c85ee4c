use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crt::apps::{
    attention_benchmark, classify, emit_results, generate_blobs, generate_regime, stack_sets, variance_benchmark,
    ClassifyConfig, LabeledDataset, OutputFormat, Regime, RegimeKind,
};
use crt::kernel_ops::AttentionMode;
use crt::mechanisms::{MechanismConfig, MechanismKind};
use crt::{Error, Result, RngState};

#[derive(Parser)]
#[command(name = "crt", version, about = "Random-feature kernel estimators: variance, classification and attention benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic variance of each mechanism over all pairs of two sampled sets.
    Variance(VarianceArgs),
    /// Kernel-regression classifier with a tuned input scale.
    Classify(ClassifyArgs),
    /// Error of linear attention against exact softmax attention.
    AttentionBench(AttentionArgs),
    /// Write a synthetic dataset as labeled CSV.
    GenData(GenDataArgs),
}

#[derive(Args)]
struct Output {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "json")]
    format: OutputFormat,
}

#[derive(Args)]
struct VarianceArgs {
    /// Comma-separated regimes: normal, sphere, heterogen, csv.
    #[arg(long, default_value = "normal", value_delimiter = ',')]
    regime: Vec<RegimeKind>,
    /// Comma-separated scales; every regime is run at every scale.
    #[arg(long, default_value = "1.0", value_delimiter = ',')]
    sigma: Vec<f64>,
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long, default_value_t = 1024)]
    l: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Comma-separated mechanisms; all of them by default.
    #[arg(long, value_delimiter = ',')]
    mechanisms: Vec<MechanismKind>,
    /// Source file for the csv regime.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record wall time (makes the output run-dependent).
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "oprf")]
    mechanism: MechanismKind,
    /// Mechanism as JSON; fields left null are fitted. Overrides --mechanism.
    #[arg(long)]
    mechanism_json: Option<String>,
    #[arg(long, default_value_t = 128)]
    m: usize,
    #[arg(long, default_value_t = crt::apps::classify::DEFAULT_RF_SEEDS)]
    rf_seeds: usize,
    /// Use the exact kernel instead of random features.
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct AttentionArgs {
    #[arg(long, default_value_t = 64)]
    l: usize,
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value = "oprf_ortho,oprf_iid,posrf_ortho", value_delimiter = ',')]
    modes: Vec<AttentionMode>,
    #[arg(long, default_value = "16,64,256,1024", value_delimiter = ',')]
    ms: Vec<usize>,
    /// Number of projection seeds per (mode, M).
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct GenDataArgs {
    /// normal, sphere, heterogen, csv, or blobs.
    #[arg(long, default_value = "normal")]
    regime: String,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    l: usize,
    /// Source file for the csv regime.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Blob centres sit at +-separation in every coordinate.
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn run_variance(a: VarianceArgs) -> Result<()> {
    let mechanisms = if a.mechanisms.is_empty() {
        MechanismKind::ALL.to_vec()
    } else {
        a.mechanisms
    };
    let mut regimes = Vec::new();
    for &kind in &a.regime {
        for &sigma in &a.sigma {
            let mut r = Regime::new(kind, sigma, a.d, a.l);
            if kind == RegimeKind::Csv {
                r.path = Some(a.data.clone().ok_or_else(|| Error::InvalidArgument("csv regime needs --data".into()))?);
            }
            regimes.push(r);
        }
    }
    let result = variance_benchmark(&regimes, &mechanisms, a.repeats, &mut RngState::new(a.seed), a.timing)?;
    emit_results(&result, a.output.format, &a.output.out)
}

fn run_classify(a: ClassifyArgs) -> Result<()> {
    let train = LabeledDataset::load_csv(&a.train)?;
    let test = LabeledDataset::load_csv(&a.test)?;
    let mut cfg = if a.exact {
        ClassifyConfig::exact()
    } else {
        ClassifyConfig::new(a.mechanism, a.m)
    };
    if let Some(json) = a.mechanism_json.as_deref() {
        cfg.mechanism = MechanismConfig::from_json(json)?;
    }
    cfg.rf_seeds = a.rf_seeds;
    let report = classify(&train, &test, &cfg, &mut RngState::new(a.seed))?;
    emit_results(&report, a.output.format, &a.output.out)
}

fn run_attention(a: AttentionArgs) -> Result<()> {
    let result = attention_benchmark(a.seed, a.l, a.d, &a.modes, &a.ms, a.seeds, a.timing)?;
    emit_results(&result, a.output.format, &a.output.out)
}

fn run_gen_data(a: GenDataArgs) -> Result<()> {
    let mut rng = RngState::new(a.seed);
    let data = if a.regime.eq_ignore_ascii_case("blobs") {
        generate_blobs(&mut rng, a.l, a.d, a.separation)?
    } else {
        let kind: RegimeKind = a.regime.parse()?;
        let mut regime = Regime::new(kind, a.sigma, a.d, a.l);
        regime.path = a.data;
        let (x, y) = generate_regime(&mut rng, &regime)?;
        stack_sets(x.view(), y.view())?
    };
    let file = std::fs::File::create(&a.out)?;
    data.write_csv(std::io::BufWriter::new(file))
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() {
        3
    } else if e.is_invalid_input() || matches!(e, Error::Data(_) | Error::Json(_)) {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Variance(a) => run_variance(a),
        Command::Classify(a) => run_classify(a),
        Command::AttentionBench(a) => run_attention(a),
        Command::GenData(a) => run_gen_data(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
