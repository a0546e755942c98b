use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mechlab::analysis::report::{
    histogram_csv, rank_tests_csv, rank_tests_table, rates_csv, rates_table, regression_csv, regression_table,
};
use mechlab::analysis::{
    expert_claim_histogram, fit_lpm, rank_tests, summary_rates, Censoring, Model, RegressionSpec,
};
use mechlab::equilibrium::DEFAULT_PROFILE_CAP;
use mechlab::prop1::run_suite;
use mechlab::rational;
use mechlab::schema::{parse_mechanism, parse_simulation, SimulationFile};
use mechlab::sim::dataset::{read_files, write_files};
use mechlab::sim::{group_total, run_experiment};
use mechlab::{
    is_strategy_proof, BuiltinMechanism, Environment, Error, Game, Mechanism, Payoff, SocialChoiceFunction,
    StrategyProfile, WorkerType,
};

#[derive(Parser)]
#[command(name = "mechlab", version, about = "Mechanism design workbench for the principal-worker environment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a mechanism's outcome table (worker 1 rows, worker 2 columns).
    ShowMechanism(MechanismSource),
    /// List every pure-strategy ex-post equilibrium of a mechanism.
    Equilibria {
        #[command(flatten)]
        source: MechanismSource,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Largest number of strategy profiles to enumerate.
        #[arg(long, default_value_t = DEFAULT_PROFILE_CAP)]
        cap: u128,
    },
    /// Run the randomized composition suite (trial 0 is the principal-worker instance).
    VerifyProp1 {
        /// Number of random trials (at least 1).
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulate experimental sessions and write the dataset CSV.
    Simulate {
        /// Simulation TOML file; the fourteen-session calibrated run when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed; overrides the config file's seed (default 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV path; metadata goes to `<out>.meta.toml`.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores). Output does not depend on it.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        threads: Option<u64>,
    },
    /// Fit the regression models and compute rates, histograms and rank tests.
    Analyze {
        /// Dataset CSV written by `simulate` or in the same schema.
        #[arg(long)]
        data: PathBuf,
        /// all, action, profit, or one of eq-wo, eq-truth, deceptive,
        /// truthful-action, staffer-profit, workers-profit.
        #[arg(long, default_value = "all", value_parser = parse_model_group)]
        model: ModelGroup,
        /// Output directory for the CSV and text files.
        #[arg(long)]
        out: PathBuf,
        /// Treatment of two-expert groups in the equilibrium models.
        #[arg(long, value_enum, default_value_t = CensoringArg::Drop)]
        censoring: CensoringArg,
    },
    /// Summarize the theory: tables, equilibria, payoff totals, strategy-proofness.
    Report,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct MechanismSource {
    /// Built-in mechanism: 2x2-I, 2x2-E, 3x3-I or 3x3-E.
    #[arg(long)]
    name: Option<String>,
    /// Mechanism TOML file.
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum CensoringArg {
    Drop,
    Interval,
}

#[derive(Clone)]
struct ModelGroup(Vec<Model>);

fn parse_model_group(s: &str) -> Result<ModelGroup, String> {
    Model::group(s).map(ModelGroup).ok_or_else(|| format!("unknown model {s:?}"))
}

impl MechanismSource {
    fn load(&self) -> mechlab::Result<(Mechanism, Environment)> {
        match (&self.name, &self.file) {
            (Some(name), _) => Ok((Mechanism::builtin(name)?, Environment::principal_worker())),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)?;
                parse_mechanism(&text).map_err(|e| match e {
                    Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
                    other => other,
                })
            }
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

fn scf_cells(env: &Environment, f: &SocialChoiceFunction) -> Vec<String> {
    env.type_profile_space()
        .iter()
        .map(|types| {
            let label: Vec<&str> = types.iter().enumerate().map(|(a, &t)| env.type_space(a)[t].as_str()).collect();
            let outcome = f.outcome(&types).expect("type profile in range");
            format!("{}={}", label.join(""), env.outcomes()[outcome])
        })
        .collect()
}

fn equilibria(source: &MechanismSource, format: Format, cap: u128) -> mechlab::Result<String> {
    let (mech, env) = source.load()?;
    let game = Game::new(&env, &mech)?;
    let reports = game.enumerate_ex_post_equilibria(cap)?;
    let mut out = String::new();
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            w.write_record(["index", "profile", "ex_post", "dominant_strategy", "weakly_dominated", "induced_scf"])?;
            for (i, r) in reports.iter().enumerate() {
                let dominated: Vec<String> = r
                    .weakly_dominated_components
                    .iter()
                    .map(|&(a, t)| format!("{}:{}", env.agents()[a], env.type_space(a)[t]))
                    .collect();
                w.write_record([
                    (i + 1).to_string(),
                    r.profile.describe(&env, &mech),
                    r.ex_post.to_string(),
                    r.dominant_strategy.to_string(),
                    dominated.join(" "),
                    scf_cells(&env, &r.induced_scf).join(" "),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            out.push_str(&String::from_utf8(bytes).expect("CSV output is UTF-8"));
        }
        Format::Text => {
            writeln!(out, "mechanism {}: {} ex-post equilibria", mech.name, reports.len()).unwrap();
            for (i, r) in reports.iter().enumerate() {
                let flag = if r.dominant_strategy { "dominant-strategy" } else { "ex-post only" };
                writeln!(out, "#{} {} [{}]", i + 1, r.profile.describe(&env, &mech), flag).unwrap();
                if !r.weakly_dominated_components.is_empty() {
                    let dominated: Vec<String> = r
                        .weakly_dominated_components
                        .iter()
                        .map(|&(a, t)| format!("{}:{}", env.agents()[a], env.type_space(a)[t]))
                        .collect();
                    writeln!(out, "   weakly dominated: {}", dominated.join(" ")).unwrap();
                }
                writeln!(out, "   induced: {}", scf_cells(&env, &r.induced_scf).join("  ")).unwrap();
            }
        }
    }
    Ok(out)
}

fn verify_prop1(trials: u64, seed: u64) -> mechlab::Result<(String, bool)> {
    let suite = run_suite(trials as usize, seed)?;
    let mut out = format!("seed: {seed}\n");
    for t in std::iter::once(&suite.principal_worker).chain(&suite.random) {
        if t.failures > 0 || t.index == 0 {
            writeln!(
                out,
                "trial {:>4} {}: {} deltas checked, {} violations ({})",
                t.index,
                if t.failures == 0 { "PASS" } else { "FAIL" },
                t.deltas_checked,
                t.failures,
                t.description
            )
            .unwrap();
        }
    }
    let deltas: usize = suite.random.iter().map(|t| t.deltas_checked).sum::<usize>() + suite.principal_worker.deltas_checked;
    writeln!(
        out,
        "{}: {}/{} random trials passed, principal-worker instance {}, {} compositions checked",
        if suite.passed() { "PASS" } else { "FAIL" },
        suite.random_passed(),
        suite.random.len(),
        if suite.principal_worker.failures == 0 { "passed" } else { "failed" },
        deltas
    )
    .unwrap();
    Ok((out, suite.passed()))
}

fn simulate(config: Option<&Path>, seed: Option<u64>, out: &Path, threads: Option<u64>) -> mechlab::Result<String> {
    let file = match config {
        Some(path) => parse_simulation(&std::fs::read_to_string(path)?).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })?,
        None => SimulationFile::default(),
    };
    let plan = file.plan(seed)?;
    let run = || run_experiment(&plan);
    let ds = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    write_files(&ds, out)?;
    let sessions = ds.meta.sessions.len();
    let subjects: usize = ds.meta.sessions.iter().map(|s| s.n_subjects).sum();
    Ok(format!(
        "seed: {}\nsessions: {sessions}\nsubjects: {subjects}\nrecords: {}\nwrote {}\n",
        plan.master_seed,
        ds.records.len(),
        out.display()
    ))
}

fn analyze(data: &Path, models: &[Model], out: &Path, censoring: CensoringArg) -> mechlab::Result<String> {
    let ds = read_files(data).map_err(|e| match e {
        Error::DataIntegrity(m) => Error::DataIntegrity(format!("{}: {m}", data.display())),
        other => other,
    })?;
    if ds.is_empty() {
        return Err(Error::Insufficient(format!("{} has no records", data.display())));
    }
    std::fs::create_dir_all(out)?;
    let mut fits = Vec::new();
    for &model in models {
        let mut spec = RegressionSpec::standard(model);
        if model.is_equilibrium() {
            spec.censoring = match censoring {
                CensoringArg::Drop => Censoring::Drop,
                CensoringArg::Interval => Censoring::Interval,
            };
        }
        fits.push((model, fit_lpm(&ds, &spec)?));
    }
    let table = regression_table(&fits);
    std::fs::write(out.join("regressions.csv"), regression_csv(&fits)?)?;
    std::fs::write(out.join("regressions.txt"), &table)?;

    let rates = summary_rates(&ds);
    std::fs::write(out.join("rates.csv"), rates_csv(&rates)?)?;
    std::fs::write(out.join("rates.txt"), rates_table(&rates))?;

    let mut notes = String::new();
    match expert_claim_histogram(&ds) {
        Ok(h) => std::fs::write(out.join("histogram.csv"), histogram_csv(&h)?)?,
        Err(e) => writeln!(notes, "histogram skipped: {e}").unwrap(),
    }

    let tests = rank_tests(&ds);
    let tests_text = rank_tests_table(&tests);
    std::fs::write(out.join("rank_tests.csv"), rank_tests_csv(&tests)?)?;
    std::fs::write(out.join("rank_tests.txt"), &tests_text)?;

    Ok(format!(
        "{table}\n{}\n{tests_text}{notes}wrote regressions, rates, histogram and rank tests to {}\n",
        rates_table(&rates),
        out.display()
    ))
}

fn report() -> mechlab::Result<String> {
    let env = Environment::principal_worker();
    let mut out = String::new();
    let sp = is_strategy_proof(&env, &SocialChoiceFunction::principal())?;
    writeln!(out, "principal's social choice function strategy-proof: {sp}").unwrap();
    let wo = is_strategy_proof(&env, &SocialChoiceFunction::worker_optimal())?;
    writeln!(out, "worker-optimal social choice function strategy-proof: {wo}\n").unwrap();
    for builtin in BuiltinMechanism::ALL {
        let mech = builtin.build();
        let game = Game::new(&env, &mech)?;
        writeln!(out, "{}", mech.render()?).unwrap();
        let truthful = game.report(StrategyProfile::truthful(&env, &mech)?)?;
        let all_e = game.report(StrategyProfile::constant_report(&env, &mech, WorkerType::Expert.index())?)?;
        let count = game.enumerate_ex_post_equilibria(DEFAULT_PROFILE_CAP)?.len();
        let flags = |r: &mechlab::EquilibriumReport| match (r.ex_post, r.dominant_strategy) {
            (true, true) => "dominant-strategy equilibrium",
            (true, false) => "ex-post equilibrium, not dominant",
            _ => "not an equilibrium",
        };
        writeln!(out, "  ex-post equilibria: {count}").unwrap();
        writeln!(out, "  truthful: {}", flags(&truthful)).unwrap();
        writeln!(out, "  all claim expert: {}", flags(&all_e)).unwrap();
        writeln!(out, "  group totals (truthful / worker-optimal):").unwrap();
        let mut expected = Payoff::from_integer(0);
        for t1 in WorkerType::ALL {
            for t2 in WorkerType::ALL {
                let types = [t1, t2];
                let truth = [0, 1].map(|s| mech.canonical_message(s, types[s].index()).expect("claim message"));
                let coord = [0, 1].map(|s| mech.canonical_message(s, WorkerType::Expert.index()).expect("claim"));
                let a = group_total(builtin, types, truth)?;
                let b = group_total(builtin, types, coord)?;
                expected += a / Payoff::from_integer(4);
                writeln!(
                    out,
                    "    ({},{}): {} / {}",
                    t1.code(),
                    t2.code(),
                    rational::format(a),
                    rational::format(b)
                )
                .unwrap();
            }
        }
        writeln!(out, "  expected total under a uniform prior: {}\n", rational::format(expected)).unwrap();
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::ShowMechanism(source) => source.load().and_then(|(m, _)| m.render()).map(|s| (s, true)),
        Command::Equilibria { source, format, cap } => equilibria(source, *format, *cap).map(|s| (s, true)),
        Command::VerifyProp1 { trials, seed } => verify_prop1(*trials, *seed),
        Command::Simulate { config, seed, out, threads } => {
            simulate(config.as_deref(), *seed, out, *threads).map(|s| (s, true))
        }
        Command::Analyze { data, model, out, censoring } => {
            analyze(data, &model.0, out, *censoring).map(|s| (s, true))
        }
        Command::Report => report().map(|s| (s, true)),
    };
    match result {
        Ok((text, ok)) => {
            print!("{text}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
