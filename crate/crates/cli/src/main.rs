//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification-negative, 2 usage or schema error,
//! 3 I/O error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use spatialplay::analysis::{classify_question, corpus_stats, CorpusItem, Vocab};
use spatialplay::bank::{export, BankError, BankSet, Problem};
use spatialplay::program::{check_problem_validity, Invalid, Program};
use spatialplay::selfplay::{
    ExternalPolicy, Policy, ScriptedPolicy, SelfPlayConfig, SelfPlayError, Session, external,
};
use spatialplay::synthetic::{generate, SyntheticConfig};
use spatialplay::tools::ToolError;
use spatialplay::verify::{reward_abduction, reward_deduction, reward_induction, InductionViews, Mode};
use spatialplay::{ExecContext, ExecLimits, Manifest, OracleIndex, Value};

#[derive(Parser)]
#[command(name = "spatialplay", version, about = "Verifiable self-play for spatial reasoning")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Global {
    /// Dataset manifest (JSON Lines of {"image_id","w","h"}).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Segmentation index (JSON Lines of {"image_id","phrase","masks"}).
    #[arg(long, global = true)]
    oracle: Option<PathBuf>,
    /// Directory holding the three bank files.
    #[arg(long, global = true)]
    bank_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    steps: Option<u64>,
    /// `scripted:<name>` or `exec:<command>`.
    #[arg(long, global = true)]
    policy: Option<String>,
    /// Upper bound on concurrent program evaluations.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a program on an image and print its tagged value.
    Exec {
        program: PathBuf,
        image_id: String,
        /// Argument literal (tagged JSON, plain JSON, or bare text).
        #[arg(default_value = "null")]
        arg: String,
    },
    /// Score an answer against a problem record.
    Verify {
        problem: PathBuf,
        answer: String,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Run self-play, resuming if the run directory already holds a run.
    Run {
        /// Run configuration (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export re-verified bank problems as a benchmark file.
    Export {
        #[arg(long)]
        out: PathBuf,
    },
    /// Primitive usage and dimension statistics for a bank or benchmark.
    Analyze {
        /// Benchmark file written by `export` (instead of --bank-dir).
        #[arg(long)]
        benchmark: Option<PathBuf>,
        /// Output directory for usage.json and the CSV tables.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Classify a single question instead.
        #[arg(long)]
        question: Option<String>,
        #[arg(long, requires = "scenes")]
        objects: Option<PathBuf>,
        #[arg(long, requires = "objects")]
        scenes: Option<PathBuf>,
    },
    /// Write a deterministic synthetic dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 24)]
        images: usize,
    },
}

struct Fail {
    code: u8,
    msg: String,
}

type CmdResult = Result<(), Fail>;

fn negative(msg: impl Into<String>) -> Fail {
    Fail { code: 1, msg: msg.into() }
}

fn usage(msg: impl Into<String>) -> Fail {
    Fail { code: 2, msg: msg.into() }
}

fn io(msg: impl Into<String>) -> Fail {
    Fail { code: 3, msg: msg.into() }
}

impl From<ToolError> for Fail {
    fn from(e: ToolError) -> Self {
        match e {
            ToolError::Io { .. } => io(e.to_string()),
            ToolError::Schema { .. } => usage(format!("SchemaError: {e}")),
            ToolError::UnknownImage(_) => usage(format!("UnknownImage: {e}")),
        }
    }
}

impl From<BankError> for Fail {
    fn from(e: BankError) -> Self {
        match e {
            BankError::Io { .. } => io(e.to_string()),
            BankError::Schema { .. } => usage(format!("SchemaError: {e}")),
            _ => usage(e.to_string()),
        }
    }
}

impl From<SelfPlayError> for Fail {
    fn from(e: SelfPlayError) -> Self {
        match e {
            SelfPlayError::Bank(b) => b.into(),
            SelfPlayError::Io { .. } => io(e.to_string()),
            SelfPlayError::Schema { .. } => usage(format!("SchemaError: {e}")),
            SelfPlayError::Config(_) => usage(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| io(format!("{}: {e}", path.display())))
}

fn load_data(g: &Global) -> Result<OracleIndex, Fail> {
    let manifest = g.manifest.as_deref().ok_or_else(|| usage("--manifest is required"))?;
    let oracle = g.oracle.as_deref().ok_or_else(|| usage("--oracle is required"))?;
    Ok(OracleIndex::load(Manifest::load(manifest)?, oracle)?)
}

fn print_line(line: &str) -> CmdResult {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").map_err(|e| io(e.to_string()))
}

fn invalid_fail(e: Invalid) -> Fail {
    let msg = format!("{}: {e}", e.tag());
    match &e {
        Invalid::UnknownImage(_) => usage(msg),
        Invalid::Failed(f) => match f {
            spatialplay::program::ExecFailure::ParseError(_)
            | spatialplay::program::ExecFailure::ValidationError(_) => usage(msg),
            _ => negative(msg),
        },
        Invalid::NotScorable(_) => negative(msg),
    }
}

fn cmd_exec(g: &Global, program: &Path, image_id: &str, arg: &str) -> CmdResult {
    let source = read(program)?;
    let oracle = load_data(g)?;
    let image = oracle
        .manifest()
        .get(image_id)
        .map_err(|_| usage(format!("UnknownImage: {image_id:?}")))?;
    let arg = Value::parse_answer(arg);
    let value = check_problem_validity(&source, image, &arg, &oracle, &ExecLimits::default())
        .map_err(invalid_fail)?;
    let text = serde_json::to_string(&value).map_err(|e| negative(e.to_string()))?;
    print_line(&text)
}

fn load_problem(path: &Path) -> Result<Problem, Fail> {
    let text = read(path)?;
    let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    serde_json::from_str(line).map_err(|e| usage(format!("SchemaError: {}:1: {e}", path.display())))
}

fn cmd_verify(g: &Global, problem: &Path, answer: &str, mode: Option<Mode>) -> CmdResult {
    let problem = load_problem(problem)?;
    let mode = mode.unwrap_or(problem.mode);
    let reward = match mode {
        Mode::Deduction => reward_deduction(&Value::parse_answer(answer), &problem.o),
        Mode::Abduction | Mode::Induction => {
            let oracle = load_data(g)?;
            let ctx = ExecContext::new(oracle.manifest(), &oracle, ExecLimits::default());
            let image = ctx
                .image(&problem.image_id)
                .map_err(|_| usage(format!("UnknownImage: {:?}", problem.image_id)))?;
            if mode == Mode::Abduction {
                reward_abduction(&ctx, &problem.p, image, &problem.o, &Value::parse_answer(answer))
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(g.seed.unwrap_or(0));
                let views = InductionViews::split(&problem.io_pairs, &mut rng)
                    .map_err(|e| usage(format!("SchemaError: {e}")))?;
                reward_induction(&ctx, answer, &views, image)
            }
        }
    };
    print_line(&json!({"mode": mode, "reward": reward}).to_string())
}

/// Run configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunManifest {
    manifest: Option<PathBuf>,
    oracle: Option<PathBuf>,
    out: Option<PathBuf>,
    policy: Option<String>,
    selfplay: SelfPlayConfig,
}

enum Attached<'a> {
    Scripted(ScriptedPolicy<'a>),
    External(ExternalPolicy),
}

impl Attached<'_> {
    fn get(&self) -> &dyn Policy {
        match self {
            Attached::Scripted(p) => p,
            Attached::External(p) => p,
        }
    }
}

fn attach<'a>(spec: &str, ctx: ExecContext<'a>, phrases: Vec<String>) -> Result<Attached<'a>, Fail> {
    if let Some(name) = spec.strip_prefix("scripted:") {
        ScriptedPolicy::from_name(name, ctx, phrases)
            .map(Attached::Scripted)
            .ok_or_else(|| usage(format!("unknown scripted policy {name:?}")))
    } else if let Some(cmd) = spec.strip_prefix("exec:") {
        ExternalPolicy::spawn(cmd, external::DEFAULT_TIMEOUT)
            .map(Attached::External)
            .map_err(|e| usage(e.to_string()))
    } else {
        Err(usage(format!("policy must be scripted:<name> or exec:<command>, got {spec:?}")))
    }
}

fn cmd_run(g: &Global, config: Option<&Path>, out: Option<&Path>) -> CmdResult {
    let mut rm: RunManifest = match config {
        Some(path) => toml::from_str(&read(path)?)
            .map_err(|e| usage(format!("SchemaError: {}: {e}", path.display())))?,
        None => RunManifest::default(),
    };
    let base = config.and_then(Path::parent).unwrap_or(Path::new(""));
    let resolve = |p: Option<PathBuf>| p.map(|p| if p.is_absolute() { p } else { base.join(p) });
    let g = Global {
        manifest: g.manifest.clone().or(resolve(rm.manifest.take())),
        oracle: g.oracle.clone().or(resolve(rm.oracle.take())),
        ..g.clone()
    };
    let out = out
        .map(Path::to_path_buf)
        .or(resolve(rm.out.take()))
        .ok_or_else(|| usage("--out or `out` in the config is required"))?;
    let mut cfg = rm.selfplay;
    if let Some(s) = g.seed {
        cfg.rng_seed = s;
    }
    if let Some(s) = g.steps {
        cfg.total_steps = s;
    }
    let policy_spec = g
        .policy
        .clone()
        .or(rm.policy)
        .unwrap_or_else(|| "scripted:template".into());

    let oracle = load_data(&g)?;
    let ctx = ExecContext::new(oracle.manifest(), &oracle, cfg.limits);
    let phrases = oracle.phrases();
    let policy = attach(&policy_spec, ctx, phrases.clone())?;
    let mut session = Session::open(&out, cfg, ctx, &phrases, policy.get())?;
    while !session.is_finished() {
        let report = session.step()?;
        print_line(&serde_json::to_string(&report).expect("report serializes"))?;
    }
    Ok(())
}

fn cmd_export(g: &Global, out: &Path) -> CmdResult {
    let dir = g.bank_dir.as_deref().ok_or_else(|| usage("--bank-dir is required"))?;
    let banks = BankSet::load(dir)?;
    let oracle = load_data(g)?;
    let ctx = ExecContext::new(oracle.manifest(), &oracle, ExecLimits::default());
    let result = export(&banks, &ctx);
    let mut lines = String::new();
    for rec in &result.records {
        lines.push_str(&serde_json::to_string(rec).map_err(|e| usage(e.to_string()))?);
        lines.push('\n');
    }
    fs::write(out, lines).map_err(|e| io(format!("{}: {e}", out.display())))?;
    print_line(
        &json!({"exported": result.records.len(), "dropped": result.dropped.len(), "dropped_ids": result.dropped})
            .to_string(),
    )
}

#[derive(Deserialize)]
struct BenchmarkLine {
    #[serde(default)]
    id: Option<String>,
    program: String,
    #[serde(default)]
    arg: Option<Value>,
}

fn corpus_from_benchmark(path: &Path) -> Result<Vec<CorpusItem>, Fail> {
    let text = read(path)?;
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: BenchmarkLine = serde_json::from_str(line)
            .map_err(|e| usage(format!("SchemaError: {}:{}: {e}", path.display(), i + 1)))?;
        items.push(CorpusItem {
            id: rec.id.unwrap_or_else(|| format!("line-{}", i + 1)),
            program: rec.program,
            args: rec.arg.into_iter().collect(),
        });
    }
    Ok(items)
}

fn corpus_from_banks(dir: &Path) -> Result<Vec<CorpusItem>, Fail> {
    let banks = BankSet::load(dir)?;
    Ok(banks
        .iter()
        .map(|p| CorpusItem {
            id: p.id.clone(),
            program: p.p.clone(),
            args: if p.io_pairs.is_empty() {
                vec![p.a.clone()]
            } else {
                p.io_pairs.iter().map(|pair| pair.a.clone()).collect()
            },
        })
        .collect())
}

fn cmd_analyze(
    g: &Global,
    benchmark: Option<&Path>,
    out: Option<&Path>,
    question: Option<&str>,
    vocab_files: Option<(&Path, &Path)>,
) -> CmdResult {
    if let Some(q) = question {
        let dims: Vec<_> = classify_question(q).into_iter().collect();
        return print_line(&json!({"question": q, "dimensions": dims}).to_string());
    }
    let vocab = match vocab_files {
        Some((o, s)) => Vocab::load(o, s).map_err(|e| io(e.to_string()))?,
        None => Vocab::default(),
    };
    let items = match (benchmark, g.bank_dir.as_deref()) {
        (Some(b), _) => corpus_from_benchmark(b)?,
        (None, Some(dir)) => corpus_from_banks(dir)?,
        (None, None) => return Err(usage("--benchmark or --bank-dir is required")),
    };
    for item in &items {
        if Program::compile(&item.program).is_err() {
            eprintln!("skipping {}: program does not compile", item.id);
        }
    }
    let report = corpus_stats(&items, &vocab);
    let out = out.ok_or_else(|| usage("--out is required"))?;
    fs::create_dir_all(out).map_err(|e| io(format!("{}: {e}", out.display())))?;
    report
        .write_json(&out.join("usage.json"))
        .and_then(|_| report.write_csv(out))
        .map_err(|e| io(e.to_string()))?;
    print_line(&json!({"corpus_size": report.corpus_size, "out": out}).to_string())
}

fn cmd_synth(g: &Global, out: &Path, images: usize) -> CmdResult {
    let cfg = SyntheticConfig {
        n_images: images,
        seed: g.seed.unwrap_or(0),
        ..Default::default()
    };
    let ds = generate(&cfg);
    let (m, o) = ds.write(out)?;
    print_line(&json!({"manifest": m, "oracle": o, "images": ds.manifest.len(), "phrases": ds.phrases}).to_string())
}

fn dispatch(cli: Cli) -> CmdResult {
    let g = &cli.global;
    if let Some(n) = g.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    match &cli.cmd {
        Cmd::Exec { program, image_id, arg } => cmd_exec(g, program, image_id, arg),
        Cmd::Verify { problem, answer, mode } => cmd_verify(g, problem, answer, *mode),
        Cmd::Run { config, out } => cmd_run(g, config.as_deref(), out.as_deref()),
        Cmd::Export { out } => cmd_export(g, out),
        Cmd::Analyze {
            benchmark,
            out,
            question,
            objects,
            scenes,
        } => cmd_analyze(
            g,
            benchmark.as_deref(),
            out.as_deref(),
            question.as_deref(),
            objects.as_deref().zip(scenes.as_deref()),
        ),
        Cmd::Synth { out, images } => cmd_synth(g, out, *images),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
