//! The `rpn` command line.
//!
//! Exit codes: 0 on success, 1 when an input fails validation or a command
//! fails, 2 on usage errors. Every failure prints one `error[kind]: message`
//! line on standard error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cmbp::{
    build_dst_topology, check_constraints, format_coefficients, hill_climb, init_rpn_from_cmbp,
    read_coefficients, DstLayout, HillClimbConfig,
};
use crate::corpus::{generate_corpus, read_corpus, serialize_corpus, Corpus, GeneratorConfig};
use crate::error::{Error, Result};
use crate::network::{
    expand_to_polynomial, read_topology, to_json_string, ActivationSpec, Network, NodeKind,
};
use crate::tracker::{
    beliefs_from_jsonl, beliefs_to_jsonl, build_samples, corpus_accuracy, score_corpus,
    soft_labels, track_corpus, track_top_hypothesis, BeliefModel, CmbpModel, CorpusValidator,
    RpnModel,
};
use crate::trainer::{
    gradient_check, randomize_weights, train, GradCheckConfig, TrainingConfig, TrainingSample,
};

#[derive(Debug, Parser)]
#[command(name = "rpn", version, about = "Recurrent polynomial networks for dialogue state tracking")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check topology, corpus or coefficient files.
    Validate(ValidateArgs),
    /// Emit a layered DST topology.
    Build(BuildArgs),
    /// Set topology weights from a coefficient file or at random.
    Init(InitArgs),
    /// Train a topology on a corpus.
    Train(TrainArgs),
    /// Track a corpus and write per-turn beliefs.
    Track(TrackArgs),
    /// Score per-turn beliefs against a corpus.
    Eval(EvalArgs),
    /// Compare backpropagated gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Print the polynomial each output node computes.
    Expand(ExpandArgs),
    /// Generate a synthetic corpus.
    Gen(GenArgs),
    /// Refine rule coefficients by hill climbing on a corpus.
    Hillclimb(HillclimbArgs),
    /// Check a rule against the probabilistic constraints.
    Constraints(ConstraintsArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = true)]
struct ValidateArgs {
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    coefficients: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Activation {
    None,
    Clip,
    Softclip,
    Logistic,
}

#[derive(Debug, Args)]
struct BuildArgs {
    /// Feature set: 6 (f0-f5) or 10 (f0-f9).
    #[arg(long, default_value_t = 6)]
    features: usize,
    /// Add the second recurrent sum node.
    #[arg(long)]
    extra_recurrent: bool,
    #[arg(long, value_enum, default_value_t = Activation::Softclip)]
    activation: Activation,
    /// Softclip epsilon.
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Logistic parameters L, eta, x0.
    #[arg(long, num_args = 3, value_names = ["L", "ETA", "X0"], default_values_t = [1.0, 1.0, 0.0])]
    logistic: Vec<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["coefficients", "sigma"])))]
struct InitArgs {
    #[arg(long)]
    topology: PathBuf,
    /// Rule coefficients to copy into the network.
    #[arg(long)]
    coefficients: Option<PathBuf>,
    /// Draw every weight from N(0, sigma^2) instead.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    topology: PathBuf,
    /// Training corpus; split 60/40 by dialogue id unless --valid is given.
    #[arg(long)]
    corpus: PathBuf,
    /// Separate validation corpus.
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Train against a rule's beliefs instead of the corpus labels.
    #[arg(long)]
    teacher: Option<PathBuf>,
    #[arg(long, default_value_t = 0.6)]
    lr: f64,
    /// Mini-batch size; full batch when omitted.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    validation_period: usize,
    #[arg(long, default_value_t = 0.6 / 1024.0)]
    min_lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint path (topology with the best weights).
    #[arg(short, long)]
    output: PathBuf,
    /// Training log (JSON lines).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("model").required(true).args(["topology", "cmbp", "top_hypothesis"])))]
struct TrackArgs {
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Track with a rule directly instead of a network.
    #[arg(long)]
    cmbp: Option<PathBuf>,
    /// Baseline: latest top SLU hypothesis per slot.
    #[arg(long)]
    top_hypothesis: bool,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    beliefs: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long)]
    topology: PathBuf,
    /// Draw samples from this corpus (DST topologies only); random inputs
    /// otherwise.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Turns per random sample.
    #[arg(long, default_value_t = 5)]
    turns: usize,
    #[arg(long, default_value_t = 1e-5)]
    h: f64,
    /// Exit with status 1 when the discrepancy exceeds this.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExpandArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long, default_value_t = crate::network::DEFAULT_MAX_TERMS)]
    max_terms: usize,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    dialogues: usize,
    #[arg(long, default_value_t = 3)]
    slots: usize,
    #[arg(long, default_value_t = 5)]
    values_per_slot: usize,
    #[arg(long, default_value_t = 3)]
    min_turns: usize,
    #[arg(long, default_value_t = 8)]
    max_turns: usize,
    #[arg(long, default_value_t = 0.1)]
    goal_change_prob: f64,
    #[arg(long, default_value_t = 0.2)]
    no_goal_prob: f64,
    #[arg(long, default_value_t = 0.7)]
    inform_prob: f64,
    /// Probability that the top SLU hypothesis is wrong.
    #[arg(long, default_value_t = 0.0)]
    confusion: f64,
    #[arg(long, default_value_t = 4.0)]
    confidence_alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    confidence_beta: f64,
    #[arg(long, default_value_t = 0.2)]
    confirm_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    select_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    canthelp_rate: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HillclimbArgs {
    #[arg(long)]
    coefficients: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long)]
    max_moves: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Accepted moves (JSON lines).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConstraintsArgs {
    #[arg(long)]
    coefficients: PathBuf,
    #[arg(long, default_value_t = crate::cmbp::DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure of a subcommand: a library error or a problem with how the
/// command was invoked.
enum Failure {
    Lib(Error),
    Usage(String),
    /// The command ran but its check did not pass; already reported.
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();

    let result = match cli.command {
        Command::Validate(a) => validate(a),
        Command::Build(a) => build(a),
        Command::Init(a) => init(a),
        Command::Train(a) => train_cmd(a),
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Expand(a) => expand(a),
        Command::Gen(a) => gen(a),
        Command::Hillclimb(a) => hillclimb(a),
        Command::Constraints(a) => constraints(a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Lib(e)) => {
            eprintln!("error[{}]: {}", e.kind(), e);
            1
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error[usage]: {msg}");
            2
        }
        Err(Failure::Check) => 1,
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    }
}

fn load_network(path: &Path) -> Result<Network> {
    Network::new(read_topology(path).map_err(|e| in_file(path, e))?)
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    read_corpus(path).map_err(|e| in_file(path, e))
}

fn load_rule(path: &Path) -> Result<crate::cmbp::PolynomialModel> {
    read_coefficients(path).map_err(|e| in_file(path, e))
}

fn validate(a: ValidateArgs) -> CliResult {
    if let Some(p) = &a.topology {
        let net = load_network(p)?;
        let topo = net.topology();
        let sums = topo.nodes.iter().filter(|n| n.kind == NodeKind::Sum).count();
        let layout = DstLayout::infer(topo)
            .map(|l| format!(", DST layout with {} features", l.feature_count))
            .unwrap_or_default();
        println!(
            "{}: ok ({} nodes, {} edges, {} sum nodes, activation {}{layout})",
            p.display(),
            topo.node_count(),
            topo.edges.len(),
            sums,
            topo.activation.name()
        );
    }
    if let Some(p) = &a.corpus {
        let c = load_corpus(p)?;
        let turns: usize = c.dialogues.iter().map(|d| d.len()).sum();
        println!(
            "{}: ok ({} dialogues, {} turns, {} slots)",
            p.display(),
            c.dialogues.len(),
            turns,
            c.ontology.len()
        );
    }
    if let Some(p) = &a.coefficients {
        let m = load_rule(p)?;
        println!(
            "{}: ok ({} features, order {}, {} nonzero coefficients)",
            p.display(),
            m.feature_count(),
            m.order(),
            m.nonzero_count()
        );
    }
    Ok(())
}

fn build(a: BuildArgs) -> CliResult {
    let activation = match a.activation {
        Activation::None => ActivationSpec::None,
        Activation::Clip => ActivationSpec::Clip,
        Activation::Softclip => ActivationSpec::softclip(a.epsilon)?,
        Activation::Logistic => ActivationSpec::logistic(a.logistic[0], a.logistic[1], a.logistic[2])?,
    };
    let topo = build_dst_topology(a.features, a.extra_recurrent, activation)?;
    emit(a.output.as_deref(), &to_json_string(&topo)?)?;
    Ok(())
}

fn init(a: InitArgs) -> CliResult {
    let topo = read_topology(&a.topology).map_err(|e| in_file(&a.topology, e))?;
    let topo = match (&a.coefficients, a.sigma) {
        (Some(path), None) => init_rpn_from_cmbp(&topo, &load_rule(path)?)?,
        (None, Some(sigma)) => {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Failure::Usage(format!("--sigma must be non-negative, got {sigma}")));
            }
            let mut net = Network::new(topo)?;
            randomize_weights(&mut net, &mut ChaCha8Rng::seed_from_u64(a.seed), sigma);
            net.into_topology()
        }
        _ => return Err(Failure::Usage("give exactly one of --coefficients and --sigma".into())),
    };
    emit(a.output.as_deref(), &to_json_string(&topo)?)?;
    Ok(())
}

fn train_cmd(a: TrainArgs) -> CliResult {
    let net = load_network(&a.topology)?;
    let fc = DstLayout::infer(net.topology())?.feature_count;
    let corpus = load_corpus(&a.corpus)?;
    let (train_set, valid_set) = match &a.valid {
        Some(p) => (corpus, load_corpus(p)?),
        None => corpus.split(),
    };
    if train_set.dialogues.is_empty() || valid_set.dialogues.is_empty() {
        return Err(Error::EmptyCorpus.into());
    }
    let samples = match &a.teacher {
        Some(p) => soft_labels(&train_set, fc, &CmbpModel::new(load_rule(p)?)?)?,
        None => build_samples(&train_set, fc),
    };
    let config = TrainingConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        validation_period: a.validation_period,
        min_lr: a.min_lr,
        l2_lambda: a.l2,
        seed: a.seed,
    };
    let validator = CorpusValidator::new(&valid_set, fc)?;
    log::info!(
        "training on {} samples from {} dialogues, validating on {} dialogues",
        samples.len(),
        train_set.dialogues.len(),
        valid_set.dialogues.len()
    );
    let outcome = train(&net, &samples, &validator, &config)?;
    std::fs::write(&a.output, to_json_string(outcome.network.topology())?)?;
    if let Some(p) = &a.log {
        let mut text = String::new();
        for r in &outcome.log {
            text.push_str(&serde_json::to_string(r).map_err(Error::from)?);
            text.push('\n');
        }
        fs::write(p, text)?;
    }
    println!(
        "{{\"best_epoch\": {}, \"val_accuracy\": {:.6}, \"val_loss\": {:.6}, \"initial_accuracy\": {:.6}}}",
        outcome.best_epoch, outcome.best.accuracy, outcome.best.loss, outcome.initial.accuracy
    );
    Ok(())
}

fn track(a: TrackArgs) -> CliResult {
    let corpus = load_corpus(&a.corpus)?;
    let beliefs = if a.top_hypothesis {
        corpus
            .dialogues
            .iter()
            .map(|d| track_top_hypothesis(&corpus.ontology, d))
            .collect()
    } else {
        let model: Box<dyn BeliefModel> = match (&a.topology, &a.cmbp) {
            (Some(p), None) => Box::new(RpnModel::new(load_network(p)?)?),
            (None, Some(p)) => Box::new(CmbpModel::new(load_rule(p)?)?),
            _ => {
                return Err(Failure::Usage(
                    "give exactly one of --topology, --cmbp and --top-hypothesis".into(),
                ))
            }
        };
        track_corpus(model.as_ref(), &corpus)?
    };
    emit(a.output.as_deref(), &beliefs_to_jsonl(&corpus, &beliefs)?)?;
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let corpus = load_corpus(&a.corpus)?;
    let text = fs::read_to_string(&a.beliefs).map_err(|e| in_file(&a.beliefs, e.into()))?;
    let beliefs = beliefs_from_jsonl(&text, &corpus).map_err(|e| in_file(&a.beliefs, e))?;
    let report = score_corpus(&corpus, &beliefs)?;
    emit(a.output.as_deref(), &report.to_json())?;
    Ok(())
}

/// Samples with uniform `[0, 1]` inputs and binary labels on every turn.
fn random_samples(net: &Network, count: usize, turns: usize, seed: u64) -> Vec<TrainingSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = net.input_nodes().len();
    (0..count)
        .map(|i| TrainingSample {
            dialogue_id: format!("r{i}"),
            slot: String::new(),
            value: String::new(),
            inputs: (0..turns)
                .map(|_| (0..inputs).map(|_| rng.random::<f64>()).collect())
                .collect(),
            labels: (0..turns).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect(),
            mask: vec![true; turns],
        })
        .collect()
}

fn gradcheck(a: GradcheckArgs) -> CliResult {
    if a.samples == 0 || a.turns == 0 {
        return Err(Failure::Usage("--samples and --turns must be positive".into()));
    }
    let net = load_network(&a.topology)?;
    let samples: Vec<TrainingSample> = match &a.corpus {
        Some(p) => {
            let fc = DstLayout::infer(net.topology())?.feature_count;
            let mut s = build_samples(&load_corpus(p)?, fc);
            s.truncate(a.samples);
            s
        }
        None => random_samples(&net, a.samples, a.turns, a.seed),
    };
    if samples.is_empty() {
        return Err(Error::EmptyBatch.into());
    }
    let report = gradient_check(
        &net,
        &samples,
        &GradCheckConfig {
            h: a.h,
            ..GradCheckConfig::default()
        },
    )?;
    println!("{}", serde_json::to_string(&report).map_err(Error::from)?);
    if let Some(tol) = a.tolerance {
        if report.max_relative_error > tol {
            eprintln!(
                "error[gradcheck]: max relative error {:e} exceeds tolerance {tol:e}",
                report.max_relative_error
            );
            return Err(Failure::Check);
        }
    }
    Ok(())
}

fn expand(a: ExpandArgs) -> CliResult {
    let net = load_network(&a.topology)?;
    for (node, poly) in expand_to_polynomial(&net, a.max_terms)? {
        println!("{node}: {poly}");
    }
    Ok(())
}

fn gen(a: GenArgs) -> CliResult {
    let config = GeneratorConfig {
        seed: a.seed,
        slots: a.slots,
        values_per_slot: a.values_per_slot,
        dialogues: a.dialogues,
        min_turns: a.min_turns,
        max_turns: a.max_turns,
        goal_change_prob: a.goal_change_prob,
        no_goal_prob: a.no_goal_prob,
        inform_prob: a.inform_prob,
        confusion_prob: a.confusion,
        confidence_alpha: a.confidence_alpha,
        confidence_beta: a.confidence_beta,
        confirm_rate: a.confirm_rate,
        select_rate: a.select_rate,
        canthelp_rate: a.canthelp_rate,
    };
    let corpus = generate_corpus(&config)?;
    emit(a.output.as_deref(), &serialize_corpus(&corpus)?)?;
    Ok(())
}

fn hillclimb(a: HillclimbArgs) -> CliResult {
    let rule = load_rule(&a.coefficients)?;
    let corpus = load_corpus(&a.corpus)?;
    let config = HillClimbConfig {
        step: a.step,
        max_moves: a.max_moves,
    };
    let result = hill_climb(&rule, &config, |m| corpus_accuracy(&CmbpModel::new(m.clone())?, &corpus))?;
    log::info!(
        "accuracy {:.6} -> {:.6} after {} moves ({} evaluations)",
        result.initial_objective,
        result.objective,
        result.moves.len(),
        result.evaluations
    );
    if let Some(p) = &a.log {
        let mut text = String::new();
        for m in &result.moves {
            text.push_str(&serde_json::to_string(m).map_err(Error::from)?);
            text.push('\n');
        }
        fs::write(p, text)?;
    }
    emit(a.output.as_deref(), &format_coefficients(&result.model))?;
    Ok(())
}

fn constraints(a: ConstraintsArgs) -> CliResult {
    let rule = load_rule(&a.coefficients)?;
    let report = check_constraints(&rule, a.samples, a.seed)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    if report.passed() {
        Ok(())
    } else {
        for c in report.constraints.iter().filter(|c| !c.passed) {
            eprintln!("error[constraint]: {} violated at {} points", c.name, c.violations);
        }
        Err(Failure::Check)
    }
}
