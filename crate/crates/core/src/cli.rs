//! The `raglab` command line: gen-world, warmup, train, eval, sweep, transfer, oracle-check.
//!
//! Every command resolves a [`RunConfig`], writes it as `config.toml` into the
//! run directory, writes its outputs there, and finishes with `manifest.json`.
//! Failures print one JSON record to stderr and exit 2 (configuration) or 3 (runtime).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use toml::Value;

use crate::config::{self, RunConfig, SEED_ENV};
use crate::env::write_trajectory_log;
use crate::error::{Error, Result};
use crate::eval::{
    ablation_replace_generator, ablation_replace_query, brute_force_optimal, default_taus, evaluate, evaluate_policy,
    mode_for, plan_agreement, threshold_sweep, transfer_report, EvalReport, PlanPolicy,
};
use crate::policy::{PolicyParams, SampleMode};
use crate::text::fnv1a64;
use crate::training::{
    build_warmup_dataset, train_from, warm_start, write_metrics_csv, RewriteOracle, IterRecord,
};
use crate::worldgen::{gen_world, ingest, load_bundle, save_bundle, Category, World};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "raglab", version, about = "Retrieve-or-answer policies trained with behavior cloning and PPO")]
#[command(args_override_self = true, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic world bundle.
    GenWorld(Common),
    /// Build the warm-up dataset and behavior-clone the initial policy.
    Warmup(Common),
    /// Warm-up followed by PPO; writes checkpoints and the metrics log.
    Train(Common),
    /// Evaluate a checkpoint (optionally with both ablations).
    Eval(Common),
    /// Sweep the answer-logit threshold.
    Sweep(Common),
    /// Per-category retrieval ratios on a held-out world.
    Transfer(Common),
    /// Compare greedy plans with brute-force optimal plans.
    OracleCheck(Common),
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Run directory (config key out_dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed (config key seed); falls back to SMARTRAG_LAB_SEED.
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core (config key workers).
    #[arg(long)]
    workers: Option<usize>,
    /// World bundle directory (config key paths.world).
    #[arg(long, value_name = "DIR")]
    world: Option<PathBuf>,
    /// Policy checkpoint (config key paths.checkpoint).
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
    /// Warm-up checkpoint (config key paths.warmup_checkpoint).
    #[arg(long, value_name = "FILE")]
    warmup_checkpoint: Option<PathBuf>,
    /// Held-out world bundle (config key paths.transfer_world).
    #[arg(long, value_name = "DIR")]
    transfer_world: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Vec<(String, Value)> {
        let path = |p: &Path| Value::String(p.to_string_lossy().into_owned());
        let mut out = Vec::new();
        if let Some(s) = self.seed {
            out.push(("seed".into(), Value::Integer(s as i64)));
        }
        if let Some(w) = self.workers {
            out.push(("workers".into(), Value::Integer(w as i64)));
        }
        for (key, p) in [
            ("out_dir", &self.out),
            ("paths.world", &self.world),
            ("paths.checkpoint", &self.checkpoint),
            ("paths.warmup_checkpoint", &self.warmup_checkpoint),
            ("paths.transfer_world", &self.transfer_world),
        ] {
            if let Some(p) = p {
                out.push((key.into(), path(p)));
            }
        }
        out
    }
}

fn keys_help() -> String {
    let mut s = String::from(
        "Any configuration key can be set with --<key>=<value> (later flags win), for example --ppo.lr=0.005.\nKeys and defaults:\n",
    );
    for (k, v) in RunConfig::keys() {
        s.push_str(&format!("  --{k}=<{v}>\n"));
    }
    s
}

/// Splits `--section.key=value` (or `--section.key value`) overrides from the arguments clap sees.
fn split_overrides(args: &[String]) -> Result<(Vec<String>, Vec<(String, Value)>)> {
    let mut plain = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.iter().peekable();
    while let Some(a) = it.next() {
        let Some(body) = a.strip_prefix("--") else {
            plain.push(a.clone());
            continue;
        };
        let (name, inline) = match body.split_once('=') {
            Some((n, v)) => (n, Some(v.to_owned())),
            None => (body, None),
        };
        if !name.contains('.') {
            plain.push(a.clone());
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .cloned()
                .ok_or_else(|| Error::Config(format!("flag --{name} needs a value")))?,
        };
        overrides.push((name.to_owned(), config::parse_value(&value)));
    }
    Ok((plain, overrides))
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    exit_code: i32,
    message: String,
}

fn report(class: &str, code: i32, message: &str) -> i32 {
    let rec = ErrorRecord { error: class, exit_code: code, message: message.replace('\n', " ").trim().to_owned() };
    eprintln!("{}", serde_json::to_string(&rec).expect("record serializes"));
    code
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Runs the command line on `args` (program name first) and returns the exit code.
pub fn run(args: Vec<String>) -> i32 {
    let env_seed = std::env::var(SEED_ENV).ok();
    run_with_env(args, env_seed.as_deref())
}

/// Like [`run`] with the seed fallback passed explicitly.
pub fn run_with_env(args: Vec<String>, env_seed: Option<&str>) -> i32 {
    let (plain, overrides) = match split_overrides(&args) {
        Ok(x) => x,
        Err(e) => return report(e.class(), EXIT_CONFIG, &e.to_string()),
    };
    let help = keys_help();
    let cmd = Cli::command().after_help(help.clone()).mut_subcommands(|s| s.after_help(help.clone()));
    let matches = match cmd.try_get_matches_from(plain) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(std::io::stdout(), "{}", e.render());
                return EXIT_OK;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = write!(std::io::stderr(), "{}", e.render());
                return report("config", EXIT_CONFIG, "a subcommand is required");
            }
            let msg = e.render().to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("usage error");
            return report("config", EXIT_CONFIG, first.trim_start_matches("error: "));
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => return report("config", EXIT_CONFIG, &e.to_string()),
    };
    match execute(cli, overrides, env_seed) {
        Ok(()) => EXIT_OK,
        Err(e) => report(e.class(), exit_code(&e), &e.to_string()),
    }
}

fn execute(cli: Cli, overrides: Vec<(String, Value)>, env_seed: Option<&str>) -> Result<()> {
    let (name, common) = match &cli.command {
        Command::GenWorld(c) => ("gen-world", c),
        Command::Warmup(c) => ("warmup", c),
        Command::Train(c) => ("train", c),
        Command::Eval(c) => ("eval", c),
        Command::Sweep(c) => ("sweep", c),
        Command::Transfer(c) => ("transfer", c),
        Command::OracleCheck(c) => ("oracle-check", c),
    };
    let mut all = overrides;
    all.extend(common.overrides());
    let cfg = config::resolve(common.config.as_deref(), &all, env_seed)?;
    let workers = if cfg.workers == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { cfg.workers };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let mut run = Run::create(&cfg, name)?;
    pool.install(|| match &cli.command {
        Command::GenWorld(_) => cmd_gen_world(&cfg, &mut run),
        Command::Warmup(_) => cmd_warmup(&cfg, &mut run),
        Command::Train(_) => cmd_train(&cfg, &mut run),
        Command::Eval(_) => cmd_eval(&cfg, &mut run),
        Command::Sweep(_) => cmd_sweep(&cfg, &mut run),
        Command::Transfer(_) => cmd_transfer(&cfg, &mut run),
        Command::OracleCheck(_) => cmd_oracle_check(&cfg, &mut run),
    })?;
    run.finish(&cfg)
}

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    bytes: u64,
    fnv1a64: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a str,
    files: Vec<FileEntry>,
}

/// A run directory and the files written into it.
pub struct Run {
    dir: PathBuf,
    command: &'static str,
    files: Vec<PathBuf>,
}

impl Run {
    fn create(cfg: &RunConfig, command: &'static str) -> Result<Self> {
        fs::create_dir_all(&cfg.out_dir)?;
        let mut run = Run { dir: cfg.out_dir.clone(), command, files: Vec::new() };
        run.write("config.toml", cfg.to_toml()?.as_bytes())?;
        Ok(run)
    }

    fn path(&mut self, rel: &str) -> PathBuf {
        let p = self.dir.join(rel);
        self.files.push(PathBuf::from(rel));
        p
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(p, bytes)?;
        Ok(())
    }

    fn writer(&mut self, rel: &str) -> Result<BufWriter<File>> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(BufWriter::new(File::create(p)?))
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    fn save_world(&mut self, world: &World, rel: &str) -> Result<()> {
        let manifest = save_bundle(world, &self.dir.join(rel))?;
        for f in manifest.files {
            self.files.push(Path::new(rel).join(f));
        }
        self.files.push(Path::new(rel).join("manifest.json"));
        Ok(())
    }

    fn finish(mut self, cfg: &RunConfig) -> Result<()> {
        self.files.sort();
        self.files.dedup();
        let mut files = Vec::new();
        for rel in &self.files {
            let bytes = fs::read(self.dir.join(rel))?;
            files.push(FileEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                bytes: bytes.len() as u64,
                fnv1a64: format!("{:016x}", fnv1a64(0, &bytes)),
            });
        }
        let m = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            config: "config.toml",
            files,
        };
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

fn require(p: &Option<PathBuf>, key: &str, command: &str) -> Result<PathBuf> {
    let p = p
        .clone()
        .ok_or_else(|| Error::Config(format!("{command} requires {key} (set it in the config or pass the flag)")))?;
    if !p.exists() {
        return Err(Error::Config(format!("{key}: {} does not exist", p.display())));
    }
    Ok(p)
}

fn existing(p: &Option<PathBuf>, key: &str) -> Result<Option<PathBuf>> {
    match p {
        Some(p) if !p.exists() => Err(Error::Config(format!("{key}: {} does not exist", p.display()))),
        other => Ok(other.clone()),
    }
}

/// The run's world: a bundle, ingested files, or a fresh one from `[world]` (saved under `world/`).
fn obtain_world(cfg: &RunConfig, run: &mut Run) -> Result<World> {
    if let Some(dir) = existing(&cfg.paths.world, "paths.world")? {
        return load_bundle(&dir);
    }
    if let (Some(qa), Some(corpus)) = (existing(&cfg.paths.qa, "paths.qa")?, existing(&cfg.paths.corpus, "paths.corpus")?) {
        let (world, skipped) = ingest(&qa, &corpus, cfg.ingest)?;
        for e in &skipped {
            log::warn!("skipped malformed line: {e}");
        }
        run.save_world(&world, "world")?;
        return Ok(world);
    }
    let world = gen_world(&cfg.world)?;
    run.save_world(&world, "world")?;
    Ok(world)
}

fn load_params(p: &Path) -> Result<PolicyParams> {
    PolicyParams::load(p).map_err(|e| match e {
        Error::Io(e) => Error::Io(e),
        other => Error::Config(format!("{} is not a usable checkpoint: {other}", p.display())),
    })
}

#[derive(Serialize)]
struct EvalRow<'a> {
    name: &'a str,
    n: usize,
    em: f64,
    f1: f64,
    hit: Option<f64>,
    retrieval_pct: f64,
    mean_reward: f64,
}

fn eval_row<'a>(name: &'a str, r: &EvalReport) -> EvalRow<'a> {
    EvalRow { name, n: r.n, em: r.em, f1: r.f1, hit: r.hit, retrieval_pct: r.retrieval_pct, mean_reward: r.mean_reward }
}

fn write_rows<T: Serialize>(run: &mut Run, rel: &str, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(run.writer(rel)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn summary(label: &str, r: &EvalReport) {
    let hit = r.hit.map_or("-".to_owned(), |h| format!("{h:.2}"));
    println!(
        "{label}: n={} em={:.2} f1={:.2} hit={hit} retrieval_pct={:.2} mean_reward={:.4}",
        r.n, r.em, r.f1, r.retrieval_pct, r.mean_reward
    );
}

fn cmd_gen_world(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let world = obtain_world(cfg, run)?;
    if cfg.paths.world.is_some() {
        run.save_world(&world, "world")?;
    }
    let counts = world.category_counts();
    println!(
        "world: questions={} documents={} direct_answerable={} needs_retrieval={} unanswerable={}",
        world.questions.len(),
        world.corpus().len(),
        counts.get(&Category::DirectAnswerable).copied().unwrap_or(0),
        counts.get(&Category::NeedsRetrieval).copied().unwrap_or(0),
        counts.get(&Category::Unanswerable).copied().unwrap_or(0),
    );
    Ok(())
}

fn cmd_warmup(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let world = obtain_world(cfg, run)?;
    let s = cfg.settings();
    let oracle = RewriteOracle::new(
        world.oracle_map.clone(),
        s.warmup.rewrite_oracle_q,
        crate::text::derive_seed(s.seed, "warmup/oracle"),
    );
    let data = build_warmup_dataset(&world.questions, &*world.index, &oracle, &world.memory, s.warmup.variant, &s.env)?;
    {
        let mut w = run.writer("warmup_dataset.jsonl")?;
        for e in &data {
            serde_json::to_writer(&mut w, &e.record())?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    let params = warm_start(&world, &s)?;
    run.write("warmup.ckpt.json", params.to_json()?.as_bytes())?;
    let (report, trajectories) = evaluate(&params, &world, &cfg.env, mode_for(cfg.eval.tau), &cfg.eval_options())?;
    run.json("eval.json", &report)?;
    write_rows(run, "eval.csv", &[eval_row("warmup", &report)])?;
    write_trajectory_log(run.writer("trajectories.jsonl")?, &trajectories, cfg.env.gamma)?;
    println!("warm-up examples: {}", data.len());
    summary("warmup", &report);
    Ok(())
}

fn cmd_train(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let world = obtain_world(cfg, run)?;
    let s = cfg.settings();
    let warm = match existing(&cfg.paths.warmup_checkpoint, "paths.warmup_checkpoint")? {
        Some(p) => load_params(&p)?,
        None => warm_start(&world, &s)?,
    };
    run.write("warmup.ckpt.json", warm.to_json()?.as_bytes())?;
    let every = cfg.train.checkpoint_every;
    let mut saved: Vec<(String, String)> = Vec::new();
    let outcome = train_from(&world, &warm, &s, |rec: &IterRecord, p| {
        if every > 0 && rec.iter > 0 && rec.iter % every == 0 {
            saved.push((format!("checkpoints/iter_{:04}.ckpt.json", rec.iter), p.to_json()?));
        }
        println!(
            "iter {}: eval_em={:.2} eval_f1={:.2} retrieval_pct={:.2}{}",
            rec.iter,
            rec.eval_em,
            rec.eval_f1,
            rec.retrieval_pct,
            rec.mean_reward.map_or(String::new(), |r| format!(" mean_reward={r:.4}"))
        );
        Ok(())
    })?;
    for (rel, text) in saved {
        run.write(&rel, text.as_bytes())?;
    }
    run.write("final.ckpt.json", outcome.final_params.to_json()?.as_bytes())?;
    write_metrics_csv(run.writer("metrics.csv")?, &outcome.history)?;
    let (report, trajectories) = evaluate(&outcome.final_params, &world, &cfg.env, SampleMode::Greedy, &cfg.eval_options())?;
    write_trajectory_log(run.writer("trajectories.jsonl")?, &trajectories, cfg.env.gamma)?;
    summary("final", &report);
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let ckpt = require(&cfg.paths.checkpoint, "paths.checkpoint", "eval")?;
    let warm_path = if cfg.eval.ablations {
        Some(require(&cfg.paths.warmup_checkpoint, "paths.warmup_checkpoint", "eval with eval.ablations")?)
    } else {
        None
    };
    let world = obtain_world(cfg, run)?;
    let params = load_params(&ckpt)?;
    let mode = mode_for(cfg.eval.tau);
    let opts = cfg.eval_options();
    let (report, trajectories) = evaluate(&params, &world, &cfg.env, mode, &opts)?;
    summary("eval", &report);
    let mut rows = vec![("eval", report)];
    if let Some(wp) = warm_path {
        let warm = load_params(&wp)?;
        let (rq, _) = ablation_replace_query(&params, &world, &cfg.env, mode, &opts)?;
        let (rg, _) = ablation_replace_generator(&params, &warm, &world, &cfg.env, mode, &opts)?;
        summary("replace_query", &rq);
        summary("replace_generator", &rg);
        rows.push(("replace_query", rq));
        rows.push(("replace_generator", rg));
    }
    run.json("eval.json", &rows.iter().map(|(n, r)| (n.to_string(), *r)).collect::<std::collections::BTreeMap<_, _>>())?;
    let csv_rows: Vec<EvalRow> = rows.iter().map(|(n, r)| eval_row(n, r)).collect();
    write_rows(run, "eval.csv", &csv_rows)?;
    write_trajectory_log(run.writer("trajectories.jsonl")?, &trajectories, cfg.env.gamma)?;
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let ckpt = require(&cfg.paths.checkpoint, "paths.checkpoint", "sweep")?;
    let world = obtain_world(cfg, run)?;
    let params = load_params(&ckpt)?;
    let taus = default_taus(&params, &world, cfg.eval.sweep_points);
    let rows = threshold_sweep(&params, &world, &cfg.env, &taus, &cfg.eval_options())?;
    write_rows(run, "sweep.csv", &rows)?;
    let mut xy = String::from("# retrieval_pct f1\n");
    for r in &rows {
        xy.push_str(&format!("{} {}\n", r.retrieval_pct, r.f1));
    }
    run.write("sweep_f1.xy", xy.as_bytes())?;
    let mut xy = String::from("# retrieval_pct em\n");
    for r in &rows {
        xy.push_str(&format!("{} {}\n", r.retrieval_pct, r.em));
    }
    run.write("sweep_em.xy", xy.as_bytes())?;
    let best = rows.iter().max_by(|a, b| a.f1.total_cmp(&b.f1)).expect("non-empty sweep");
    println!(
        "sweep: {} thresholds; best f1={:.2} at retrieval_pct={:.2}",
        rows.len(),
        best.f1,
        best.retrieval_pct
    );
    Ok(())
}

#[derive(Serialize)]
struct TransferRow {
    category: &'static str,
    count: usize,
    retrieval_ratio: Option<f64>,
}

fn cmd_transfer(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let ckpt = require(&cfg.paths.checkpoint, "paths.checkpoint", "transfer")?;
    let world = match existing(&cfg.paths.transfer_world, "paths.transfer_world")? {
        Some(dir) => load_bundle(&dir)?,
        None => {
            let w = gen_world(&cfg.transfer)?;
            run.save_world(&w, "transfer_world")?;
            w
        }
    };
    let params = load_params(&ckpt)?;
    let rep = transfer_report(&params, &world, &cfg.env, &cfg.eval_options())?;
    let rows: Vec<TransferRow> = Category::ALL
        .iter()
        .map(|c| TransferRow { category: c.name(), count: rep.counts[c], retrieval_ratio: rep.ratio(*c) })
        .collect();
    write_rows(run, "transfer.csv", &rows)?;
    run.json("transfer.json", &rep)?;
    for r in &rows {
        println!(
            "{}: n={} retrieval_ratio={}",
            r.category,
            r.count,
            r.retrieval_ratio.map_or("absent".to_owned(), |x| format!("{x:.2}"))
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleSummary {
    source: &'static str,
    n: usize,
    agreement_pct: f64,
    oracle_mean_value: f64,
    oracle_em: f64,
    oracle_f1: f64,
    oracle_retrieval_pct: f64,
}

fn cmd_oracle_check(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let ckpt = existing(&cfg.paths.checkpoint, "paths.checkpoint")?;
    let world = obtain_world(cfg, run)?;
    let plans = brute_force_optimal(&world, &cfg.env)?;
    {
        let mut w = run.writer("oracle.jsonl")?;
        for p in &plans {
            serde_json::to_writer(&mut w, p)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    let opts = cfg.eval_options();
    let (source, trajectories) = match ckpt {
        Some(p) => {
            let params = load_params(&p)?;
            ("checkpoint", evaluate(&params, &world, &cfg.env, SampleMode::Greedy, &opts)?.1)
        }
        None => {
            let lookup = PlanPolicy::new(&plans);
            ("oracle_plans", evaluate_policy(&lookup, &world.questions, &*world.index, &cfg.env, SampleMode::Greedy, &opts)?.1)
        }
    };
    let n = plans.len().max(1) as f64;
    let s = OracleSummary {
        source,
        n: plans.len(),
        agreement_pct: plan_agreement(&plans, &trajectories),
        oracle_mean_value: plans.iter().map(|p| p.value).sum::<f64>() / n,
        oracle_em: 100.0 * plans.iter().map(|p| p.em).sum::<f64>() / n,
        oracle_f1: 100.0 * plans.iter().map(|p| p.f1).sum::<f64>() / n,
        oracle_retrieval_pct: 100.0 * plans.iter().filter(|p| !p.plan.queries.is_empty()).count() as f64 / n,
    };
    run.json("oracle_check.json", &s)?;
    println!("agreement: {:.2}% ({} questions, {})", s.agreement_pct, s.n, s.source);
    Ok(())
}
