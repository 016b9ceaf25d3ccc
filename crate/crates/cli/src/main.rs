use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use congestion_tax::forge::{
    build_partitioning_system, random_instance, reduce_label_cover, LabelCoverInstance, P2Mode,
    PartitionParams, RandomInstanceParams, ReductionParams,
};
use congestion_tax::kernel::cost_table;
use congestion_tax::learning::{best_profile_approximation, multiplicative_weights_run, MwOptions};
use congestion_tax::oracle::{empirical_poa, enumerate_pure_nash, DEFAULT_ENUMERATION_CAP};
use congestion_tax::pipeline::{
    analyze_basis, basis_csv, bell_csv, bell_table, design_and_evaluate, DesignBundle,
    DesignOptions,
};
use congestion_tax::tax::DEFAULT_AUDIT_TOL;
use congestion_tax::{
    BasisFunction, Error, GameInstance, KernelConfig, PolyTerm, SolverOptions, StepRule, TaxProfile,
};
use serde::{Deserialize, Serialize};

/// Tax design and equilibrium experiments for atomic congestion games
#[derive(Parser, Debug)]
#[command(author, version, about, long_about = None)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct Global {
    /// Seed for every randomised step
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory; results go to stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Relative cutoff for Poisson series tails
    #[arg(long, global = true, default_value_t = 1e-15)]
    tol_tail: f64,

    /// Term cap for Poisson series
    #[arg(long, global = true, default_value_t = 10_000)]
    i_max: usize,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
enum Command {
    /// Report rho and mu for basis functions, with the Bell table
    AnalyzeBasis(AnalyzeArgs),
    /// Solve the relaxation, build taxes and evaluate them
    Design(DesignArgs),
    /// Run multiplicative weights on a taxed instance
    Learn(LearnArgs),
    /// Generate instances and partitioning systems
    #[command(subcommand)]
    Forge(ForgeCommand),
    /// Brute-force optimum and pure equilibria
    Oracle(OracleArgs),
    /// Re-run a saved config.json
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct AnalyzeArgs {
    /// b(x) = x^d (repeatable)
    #[arg(long)]
    monomial: Vec<f64>,

    /// Tabulated b(1), b(2), ...
    #[arg(long, value_delimiter = ',')]
    table: Option<Vec<f64>>,

    /// Polynomial as coeff:degree pairs, e.g. 1:1,1:0
    #[arg(long)]
    poly: Option<String>,

    /// b(x) = base^x
    #[arg(long)]
    exponential: Option<f64>,

    /// Extend tables linearly to the reals so mu can be computed
    #[arg(long)]
    monomial_like: bool,

    #[arg(long, default_value_t = 1000)]
    x_max: usize,

    /// Largest degree in the Bell table
    #[arg(long, default_value_t = 4)]
    bell: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum StepArg {
    Classic,
    LineSearch,
    Pairwise,
}

impl From<StepArg> for StepRule {
    fn from(s: StepArg) -> Self {
        match s {
            StepArg::Classic => StepRule::Classic,
            StepArg::LineSearch => StepRule::LineSearch,
            StepArg::Pairwise => StepRule::Pairwise,
        }
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct DesignArgs {
    #[arg(long)]
    instance: PathBuf,

    #[arg(long, default_value_t = 1e-8)]
    tol_gap: f64,

    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,

    #[arg(long, value_enum, default_value_t = StepArg::Pairwise)]
    step_rule: StepArg,

    #[arg(long, default_value_t = DEFAULT_AUDIT_TOL)]
    audit_tol: f64,

    /// Largest profile space enumerated by the oracles
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP as u64)]
    cap: u64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct LearnArgs {
    #[arg(long)]
    instance: PathBuf,

    /// Tax profile, or a design bundle containing one
    #[arg(long)]
    taxes: PathBuf,

    #[arg(long, default_value_t = 5000)]
    rounds: usize,

    /// Run seeds; defaults to --seed
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,

    /// Fixed learning rate instead of sqrt(8 ln s_i / T)
    #[arg(long)]
    eta: Option<f64>,

    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP as u64)]
    cap: u64,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
enum ForgeCommand {
    /// Random instance with distinct strategies covering every resource
    Random(RandomArgs),
    /// Partitioning system with P1/P2 verification
    Partition(PartitionArgs),
    /// Congestion game from a label-cover instance
    Reduce(ReduceArgs),
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct RandomArgs {
    #[arg(long)]
    players: usize,

    #[arg(long)]
    resources: usize,

    /// Monomial degrees of the basis
    #[arg(long, value_delimiter = ',', default_value = "1")]
    monomial: Vec<f64>,

    /// Strategies per player as min,max
    #[arg(long, value_delimiter = ',', default_value = "1,3")]
    strategies: Vec<usize>,

    /// Resources per strategy as min,max
    #[arg(long, value_delimiter = ',', default_value = "1,3")]
    strategy_size: Vec<usize>,

    /// Coefficient range as lo,hi
    #[arg(long, value_delimiter = ',', default_value = "0.5,2")]
    coeff: Vec<f64>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct PartitionArgs {
    #[arg(long)]
    n: usize,

    #[arg(long)]
    beta: usize,

    #[arg(long)]
    h: usize,

    #[arg(long)]
    k: usize,

    #[arg(long)]
    eta: f64,

    /// Cost c(x) = x·x^d
    #[arg(long, default_value_t = 1.0)]
    monomial: f64,

    /// Sample this many transversals instead of enumerating
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct ReduceArgs {
    #[arg(long)]
    labelcover: PathBuf,

    #[arg(long)]
    n: usize,

    #[arg(long)]
    k: usize,

    #[arg(long)]
    eta: f64,

    #[arg(long, default_value_t = 1.0)]
    monomial: f64,

    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,

    #[arg(long)]
    taxes: Option<PathBuf>,

    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP as u64)]
    cap: u64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct ReplayArgs {
    #[arg(long)]
    config: PathBuf,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ExperimentConfig {
    #[serde(flatten)]
    global: Global,
    #[serde(flatten)]
    command: Command,
}

struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    fn new(dir: Option<&Path>) -> anyhow::Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Output {
            dir: dir.map(Path::to_path_buf),
        })
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.text(name, &(text + "\n"))
    }

    /// Written to `name` under the output directory, or stdout without one.
    fn text(&self, name: &str, text: &str) -> anyhow::Result<()> {
        match self.path(name) {
            Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    /// Only written when an output directory was given.
    fn side_file(&self, name: &str, text: &str) -> anyhow::Result<()> {
        if let Some(p) = self.path(name) {
            fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        }
        Ok(())
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_taxes(path: &Path) -> anyhow::Result<TaxProfile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(t) = serde_json::from_str::<TaxProfile>(&text) {
        return Ok(t);
    }
    let bundle: DesignBundle = serde_json::from_str(&text)
        .with_context(|| format!("parsing {} as taxes or design bundle", path.display()))?;
    bundle.taxes.result.ok_or_else(|| {
        anyhow!(Error::Validation(format!(
            "{} holds no tax profile",
            path.display()
        )))
    })
}

fn parse_poly(spec: &str) -> anyhow::Result<BasisFunction> {
    let terms = spec
        .split(',')
        .map(|pair| {
            let (c, d) = pair.split_once(':').ok_or_else(|| {
                Error::InvalidBasis(format!("expected coeff:degree, got {pair:?}"))
            })?;
            let coeff = c
                .trim()
                .parse()
                .map_err(|_| Error::InvalidBasis(format!("bad coefficient {c:?}")))?;
            let degree = d
                .trim()
                .parse()
                .map_err(|_| Error::InvalidBasis(format!("bad degree {d:?}")))?;
            Ok(PolyTerm { coeff, degree })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(BasisFunction::polynomial(terms)?)
}

fn kernel_config(g: &Global) -> anyhow::Result<KernelConfig> {
    Ok(KernelConfig::new(g.tol_tail, g.i_max)?)
}

fn analyze(g: &Global, args: &AnalyzeArgs, out: &Output) -> anyhow::Result<()> {
    let cfg = kernel_config(g)?;
    let mut bases = Vec::new();
    for &d in &args.monomial {
        bases.push(BasisFunction::monomial(d)?);
    }
    if let Some(values) = &args.table {
        bases.push(BasisFunction::table(values.clone())?);
    }
    if let Some(spec) = &args.poly {
        bases.push(parse_poly(spec)?);
    }
    if let Some(base) = args.exponential {
        bases.push(BasisFunction::exponential(base)?);
    }
    if bases.is_empty() {
        bail!(Error::InvalidBasis(
            "give at least one of --monomial, --table, --poly, --exponential".into()
        ));
    }
    let reports = bases
        .iter()
        .map(|b| analyze_basis(b, args.x_max, &cfg, args.monomial_like))
        .collect::<Result<Vec<_>, _>>()?;
    let bell = bell_table(args.bell);
    #[derive(Serialize)]
    struct BellRow {
        d: usize,
        bell: f64,
    }
    let bell_rows: Vec<BellRow> = bell.iter().map(|&(d, bell)| BellRow { d, bell }).collect();
    out.json(
        "analysis.json",
        &serde_json::json!({ "reports": reports, "bell": bell_rows }),
    )?;
    out.side_file("basis.csv", &basis_csv(&reports))?;
    out.side_file("bell.csv", &bell_csv(&bell))
}

fn design(g: &Global, args: &DesignArgs, out: &Output) -> anyhow::Result<()> {
    let instance: GameInstance = read_json(&args.instance)?;
    let opts = DesignOptions {
        solver: SolverOptions {
            tol_gap: args.tol_gap,
            max_iters: args.max_iters,
            step_rule: args.step_rule.into(),
        },
        kernel: kernel_config(g)?,
        audit_tol: args.audit_tol,
        enumeration_cap: args.cap.into(),
        ..DesignOptions::default()
    };
    let bundle = design_and_evaluate(&instance, &opts);
    if let Some(t) = &bundle.taxes.result {
        out.side_file("taxes.json", &(serde_json::to_string_pretty(t)? + "\n"))?;
    }
    out.json("bundle.json", &bundle)
}

fn learn(g: &Global, args: &LearnArgs, out: &Output) -> anyhow::Result<()> {
    let instance: GameInstance = read_json(&args.instance)?;
    let taxes = read_taxes(&args.taxes)?;
    instance.validate_taxes(&taxes)?;
    let seeds = if args.seeds.is_empty() {
        vec![g.seed]
    } else {
        args.seeds.clone()
    };
    let mut summary = String::from("seed,rounds,max_avg_regret,best_sc,min_sc,ratio\n");
    for &seed in &seeds {
        let trace = multiplicative_weights_run(
            &instance,
            &taxes,
            &MwOptions {
                rounds: args.rounds,
                eta: args.eta,
                seed,
            },
        )?;
        if let Some(p) = out.path(&format!("trace_seed{seed}.jsonl")) {
            let file = fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?;
            trace.write_jsonl(BufWriter::new(file))?;
        }
        let best = best_profile_approximation(&instance, &trace, args.cap.into())?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        summary += &format!(
            "{seed},{},{},{},{},{}\n",
            trace.rounds,
            trace.max_average_regret(),
            best.sc,
            opt(best.min_sc),
            opt(best.ratio)
        );
    }
    out.text("summary.csv", &summary)
}

fn p2_mode(samples: Option<usize>) -> P2Mode {
    match samples {
        Some(samples) => P2Mode::Sampled { samples },
        None => P2Mode::Exhaustive,
    }
}

fn pair<T: Copy>(values: &[T], flag: &str) -> anyhow::Result<(T, T)> {
    match values {
        [lo, hi] => Ok((*lo, *hi)),
        _ => bail!(Error::InvalidParams(format!("--{flag} expects min,max"))),
    }
}

fn forge(g: &Global, cmd: &ForgeCommand, out: &Output) -> anyhow::Result<()> {
    match cmd {
        ForgeCommand::Random(a) => {
            let basis = a
                .monomial
                .iter()
                .map(|&d| BasisFunction::monomial(d))
                .collect::<Result<Vec<_>, _>>()?;
            let params = RandomInstanceParams {
                players: a.players,
                resources: a.resources,
                basis,
                strategy_count: pair(&a.strategies, "strategies")?,
                strategy_size: pair(&a.strategy_size, "strategy-size")?,
                coeff_range: pair(&a.coeff, "coeff")?,
            };
            out.json("instance.json", &random_instance(&params, g.seed)?)
        }
        ForgeCommand::Partition(a) => {
            let params = PartitionParams {
                n: a.n,
                beta: a.beta,
                h: a.h,
                k: a.k,
                eta: a.eta,
            };
            let c = cost_table(&BasisFunction::monomial(a.monomial)?, a.h);
            let system = build_partitioning_system(params, &c, g.seed, p2_mode(a.samples))?;
            out.json("partition.json", &system)
        }
        ForgeCommand::Reduce(a) => {
            let lc: LabelCoverInstance = read_json(&a.labelcover)?;
            let params = ReductionParams {
                n: a.n,
                k: a.k,
                eta: a.eta,
                mode: p2_mode(a.samples),
            };
            let red =
                reduce_label_cover(&lc, params, &BasisFunction::monomial(a.monomial)?, g.seed)?;
            out.side_file(
                "partition.json",
                &(serde_json::to_string_pretty(&red.system)? + "\n"),
            )?;
            out.json("instance.json", &red.instance)
        }
    }
}

fn oracle(args: &OracleArgs, out: &Output) -> anyhow::Result<()> {
    let instance: GameInstance = read_json(&args.instance)?;
    let taxes = args.taxes.as_deref().map(read_taxes).transpose()?;
    let poa = empirical_poa(&instance, taxes.as_ref(), args.cap.into())?;
    let equilibria = enumerate_pure_nash(&instance, taxes.as_ref(), args.cap.into())?;
    out.json(
        "oracle.json",
        &serde_json::json!({ "poa": poa, "equilibria": equilibria }),
    )
}

fn execute(config: &ExperimentConfig) -> anyhow::Result<()> {
    let out = Output::new(config.global.out.as_deref())?;
    out.side_file(
        "config.json",
        &(serde_json::to_string_pretty(config)? + "\n"),
    )?;
    let g = &config.global;
    match &config.command {
        Command::AnalyzeBasis(a) => analyze(g, a, &out),
        Command::Design(a) => design(g, a, &out),
        Command::Learn(a) => learn(g, a, &out),
        Command::Forge(f) => forge(g, f, &out),
        Command::Oracle(a) => oracle(a, &out),
        Command::Replay(_) => bail!(Error::Validation(
            "a config cannot replay another config".into()
        )),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Replay(r) => {
            let mut config: ExperimentConfig = read_json(&r.config)?;
            if cli.global.out.is_some() {
                config.global.out = cli.global.out;
            }
            execute(&config)
        }
        command => execute(&ExperimentConfig {
            global: cli.global,
            command,
        }),
    }
}

fn core_exit_code(e: &Error) -> u8 {
    match e {
        Error::AtResource { source, .. } => core_exit_code(source),
        Error::NonConvergent { .. }
        | Error::Overflow { .. }
        | Error::MaxItersExceeded { .. }
        | Error::NotConverged { .. }
        | Error::TooLarge { .. } => 3,
        Error::ConstructionFailed { .. } => 4,
        _ => 2,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return core_exit_code(e);
        }
        if cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
