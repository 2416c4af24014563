use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use dynabo_bench::{plot, prepare_corpus, run_experiment_with, tau_sweep_with, write_sweep_csv, ExperimentSpec, Method};
use dynabo_core::engine::{self, JsonlWriter, NoPriors, PriorMode, PriorSource, RunConfig};
use dynabo_core::objectives::objective_by_id;
use dynabo_core::synthesis::{cluster_corpus, load_or_generate, scripted_source, CorpusOptions};

/// Bayesian optimization with priors injected while it runs.
#[derive(Parser)]
#[command(name = "dynabo", version, about)]
struct Cli {
    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Root for corpora, default run outputs and bench results.
    #[arg(long, global = true, env = "DYNABO_DATA_DIR", default_value = "dynabo-data")]
    data_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exploratory corpora behind scripted priors.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Seeded method comparisons and τ sweeps.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Run one optimization from a run-config file.
    Run(RunArgs),
    /// Serve the HTTP API and steering page.
    Serve(ServeArgs),
    /// Render a results CSV as an SVG regret plot.
    Plot(PlotArgs),
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Generate (or reuse the cached) corpus for an objective.
    Generate(CorpusArgs),
    /// Cluster a corpus and write the clusters as JSON.
    Cluster {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = 100)]
        clusters: usize,
    },
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    objective: String,
    /// Exploratory runs per acquisition function.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Candidate pool of each exploratory run.
    #[arg(long, default_value_t = 5000)]
    pool: usize,
    /// Corpus directory for `generate`, output file for `cluster`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Compare methods over seeds; writes results, summary, plot and tests.
    Run(BenchArgs),
    /// Sweep the rejection threshold; one CSV row per (τ, policy, seed).
    SweepTau(BenchArgs),
    /// Render a results CSV as an SVG regret plot.
    Plot(PlotArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment spec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the spec's first seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the spec's number of seeds.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Run-config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for events.jsonl and results.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
}

#[derive(Args)]
struct PlotArgs {
    /// A run's results.csv, a bench results.csv or a bench summary.csv.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    title: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(&cli) {
        Ok(summary) => {
            if cli.json {
                println!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Human-readable output, silenced under `--json`.
fn say(cli: &Cli, line: impl AsRef<str>) {
    if !cli.json {
        println!("{}", line.as_ref());
    }
}

fn dispatch(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Corpus(CorpusCommand::Generate(args)) => corpus_generate(cli, args),
        Command::Corpus(CorpusCommand::Cluster { corpus, clusters }) => corpus_cluster(cli, corpus, *clusters),
        Command::Bench(BenchCommand::Run(args)) => bench_run(cli, args),
        Command::Bench(BenchCommand::SweepTau(args)) => bench_sweep(cli, args),
        Command::Bench(BenchCommand::Plot(args)) | Command::Plot(args) => plot_csv(cli, args),
        Command::Run(args) => run(cli, args),
        Command::Serve(args) => serve(cli, args),
    }
}

fn read(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {what} `{}`", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create `{}`", dir.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot write `{}`", path.display()))?,
    ))
}

fn corpus_options(args: &CorpusArgs) -> CorpusOptions {
    CorpusOptions {
        seeds: args.seeds,
        iters: args.iters,
        seed: args.seed,
        pool_size: args.pool,
    }
}

fn corpus_generate(cli: &Cli, args: &CorpusArgs) -> Result<Value> {
    let objective = objective_by_id(&args.objective)?;
    let dir = args.out.clone().unwrap_or_else(|| cli.data_dir.join("corpus"));
    create_dir(&dir)?;
    let (corpus, path) = load_or_generate(&dir, objective.as_ref(), &corpus_options(args))?;
    let best = corpus.entries.first().map(|e| e.loss);
    say(cli, format!("{} entries, best loss {best:?} -> {}", corpus.entries.len(), path.display()));
    Ok(json!({"path": path, "entries": corpus.entries.len(), "best_loss": best}))
}

fn corpus_cluster(cli: &Cli, args: &CorpusArgs, k: usize) -> Result<Value> {
    let objective = objective_by_id(&args.objective)?;
    let dir = cli.data_dir.join("corpus");
    create_dir(&dir)?;
    let (corpus, source) = load_or_generate(&dir, objective.as_ref(), &corpus_options(args))?;
    let clustered = cluster_corpus(&corpus, objective.space(), k)?;
    let out = args.out.clone().unwrap_or_else(|| {
        let stem = source.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        dir.join(format!("{stem}-k{k}.clusters.json"))
    });
    std::io::Write::write_all(&mut create(&out)?, clustered.to_json().as_bytes())
        .with_context(|| format!("cannot write `{}`", out.display()))?;
    for w in &clustered.warnings {
        eprintln!("warning: {w}");
    }
    let medians: Vec<f64> = clustered.clusters.iter().map(|c| c.median_loss).collect();
    say(
        cli,
        format!(
            "{} clusters over {} entries, median losses {:.4} .. {:.4} -> {}",
            medians.len(),
            corpus.entries.len(),
            medians.first().copied().unwrap_or(f64::NAN),
            medians.last().copied().unwrap_or(f64::NAN),
            out.display()
        ),
    );
    Ok(json!({
        "path": out,
        "corpus": source,
        "clusters": medians.len(),
        "median_losses": medians,
        "warnings": clustered.warnings,
    }))
}

fn load_spec(args: &BenchArgs) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::from_json(&read(&args.spec, "spec")?)
        .with_context(|| format!("invalid spec `{}`", args.spec.display()))?;
    if let Some(seed) = args.seed {
        spec.first_seed = seed;
    }
    if let Some(seeds) = args.seeds {
        spec.seeds = seeds;
    }
    spec.validate()?;
    Ok(spec)
}

fn bench_run(cli: &Cli, args: &BenchArgs) -> Result<Value> {
    let spec = load_spec(args)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cli.data_dir.join("bench").join(format!("{}-{}", spec.objective, spec.policy)));
    create_dir(&out)?;
    let corpus = if spec.methods.iter().any(|m| *m != Method::Vanilla) {
        create_dir(&cli.data_dir.join("corpus"))?;
        Some(prepare_corpus(&spec, &cli.data_dir.join("corpus"))?)
    } else {
        None
    };
    let result = run_experiment_with(&spec, corpus.as_ref())?;
    let (results, summary, svg, tests) = (
        out.join("results.csv"),
        out.join("summary.csv"),
        out.join("regret.svg"),
        out.join("comparisons.json"),
    );
    result.write_csv(create(&results)?)?;
    let mut table = Vec::new();
    result.write_summary_csv(&mut table)?;
    fs::write(&summary, &table).with_context(|| format!("cannot write `{}`", summary.display()))?;
    let curves = plot::read_curves(&String::from_utf8_lossy(&table))?;
    let title = format!("{} ({}, {} seeds)", spec.objective, spec.policy, spec.seeds);
    fs::write(&svg, plot::render_svg(&curves, &title)).with_context(|| format!("cannot write `{}`", svg.display()))?;
    let comparisons = result.comparisons();
    fs::write(&tests, serde_json::to_string_pretty(&comparisons)?)
        .with_context(|| format!("cannot write `{}`", tests.display()))?;

    let finals: Vec<Value> = spec
        .methods
        .iter()
        .map(|&m| {
            let regrets: Vec<f64> = result.by_method(m).iter().map(|o| o.final_regret()).collect();
            let mean = dynabo_bench::stats::mean(&regrets);
            say(cli, format!("{:<18} mean final regret {mean:.6}", m.name()));
            json!({"method": m, "mean_final_regret": mean})
        })
        .collect();
    for c in &comparisons {
        say(
            cli,
            format!(
                "{} < {}: W = {}, p = {:.4} (n = {})",
                c.method.name(),
                c.baseline.name(),
                c.test.statistic,
                c.test.p_value,
                c.test.n
            ),
        );
    }
    say(cli, format!("wrote {}", out.display()));
    Ok(json!({
        "out": out,
        "results": results,
        "summary": summary,
        "plot": svg,
        "comparisons_file": tests,
        "methods": finals,
        "comparisons": comparisons,
    }))
}

fn bench_sweep(cli: &Cli, args: &BenchArgs) -> Result<Value> {
    let spec = load_spec(args)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cli.data_dir.join("bench").join(format!("{}-sweep", spec.objective)));
    create_dir(&out)?;
    create_dir(&cli.data_dir.join("corpus"))?;
    let corpus = prepare_corpus(&spec, &cli.data_dir.join("corpus"))?;
    let rows = tau_sweep_with(&spec, &corpus)?;
    let path = out.join("sweep.csv");
    write_sweep_csv(&rows, create(&path)?)?;
    let mut groups: Vec<Value> = Vec::new();
    let policies: Vec<_> = {
        let mut p: Vec<_> = rows.iter().map(|r| r.policy).collect();
        p.dedup();
        p
    };
    for policy in policies {
        for tau in &spec.tau_grid {
            let sel: Vec<_> = rows
                .iter()
                .filter(|r| r.policy == policy && r.tau.to_bits() == tau.0.to_bits())
                .collect();
            let acc: Vec<f64> = sel.iter().map(|r| r.acceptance_rate).collect();
            let reg: Vec<f64> = sel.iter().map(|r| r.final_regret).collect();
            let (acc, reg) = (dynabo_bench::stats::mean(&acc), dynabo_bench::stats::mean(&reg));
            say(cli, format!("{policy:<12} tau {:>6} acceptance {acc:.3} final regret {reg:.6}", tau.0));
            groups.push(json!({"policy": policy, "tau": tau, "acceptance_rate": acc, "mean_final_regret": reg}));
        }
    }
    say(cli, format!("wrote {}", path.display()));
    Ok(json!({"path": path, "rows": rows.len(), "groups": groups}))
}

fn plot_csv(cli: &Cli, args: &PlotArgs) -> Result<Value> {
    let text = read(&args.input, "results")?;
    let curves = plot::read_curves(&text).with_context(|| format!("cannot plot `{}`", args.input.display()))?;
    let title = args.title.clone().unwrap_or_else(|| {
        args.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    fs::write(&args.out, plot::render_svg(&curves, &title))
        .with_context(|| format!("cannot write `{}`", args.out.display()))?;
    say(cli, format!("{} curves -> {}", curves.len(), args.out.display()));
    Ok(json!({"path": args.out, "curves": curves.iter().map(|c| &c.label).collect::<Vec<_>>()}))
}

fn run(cli: &Cli, args: &RunArgs) -> Result<Value> {
    let mut cfg = RunConfig::from_json(&read(&args.config, "config")?)
        .with_context(|| format!("invalid config `{}`", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let objective = cfg.validate()?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cli.data_dir.join("runs").join(format!("{}-seed{}", cfg.objective, cfg.seed)));
    create_dir(&out)?;
    let mut source: Box<dyn PriorSource> = match cfg.prior_mode {
        PriorMode::Scheduled | PriorMode::RandomTiming => {
            let dir = cli.data_dir.join("corpus");
            create_dir(&dir)?;
            Box::new(scripted_source(&cfg, objective.as_ref(), &dir)?.expect("scripted mode"))
        }
        PriorMode::Interactive => {
            eprintln!("warning: interactive runs take priors over HTTP; use `dynabo serve`. Running without priors.");
            Box::new(NoPriors)
        }
        PriorMode::None => Box::new(NoPriors),
    };
    let events = out.join("events.jsonl");
    let mut writer = JsonlWriter(create(&events)?);
    let state = engine::run(&cfg, objective.as_ref(), source.as_mut(), &mut writer)?;
    let results = out.join("results.csv");
    state.write_results_csv(create(&results)?)?;

    let inc = state.incumbent.as_ref();
    let regret = inc.map(|i| state.regret(i.loss));
    let accepted = state.priors.iter().filter(|p| p.verdict.accepted).count();
    say(
        cli,
        format!(
            "{} trials, incumbent loss {:?}, regret {:?}, priors {}/{} accepted -> {}",
            state.trials.len(),
            inc.map(|i| i.loss),
            regret,
            accepted,
            state.priors.len(),
            out.display()
        ),
    );
    Ok(json!({
        "events": events,
        "results": results,
        "trials": state.trials.len(),
        "incumbent": inc,
        "regret": regret,
        "priors_offered": state.priors.len(),
        "priors_accepted": accepted,
    }))
}

fn serve(cli: &Cli, args: &ServeArgs) -> Result<Value> {
    let addr = format!("{}:{}", args.host, args.port);
    let data_dir = cli.data_dir.clone();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("cannot listen on {addr}"))?;
        let local = listener.local_addr()?;
        if cli.json {
            println!("{}", json!({"listening": format!("http://{local}")}));
        } else {
            println!("listening on http://{local} (ui at /ui, api description at /spec)");
        }
        dynabo_service::serve(listener, data_dir).await?;
        anyhow::Ok(())
    })?;
    Ok(json!({}))
}
