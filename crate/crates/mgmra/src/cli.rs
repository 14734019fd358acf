//! `mgmra` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};

use mgmra_core::ablation::ablate_seed;
use mgmra_core::data::{generate, Dataset};
use mgmra_core::eval::evaluate;
use mgmra_core::gradsuite::run_gradient_suite;
use mgmra_core::trainer::train_with;

use crate::config::RunConfig;
use crate::error::exit;
use crate::{checkpoint, dataset, report, Error, Result};

/// Gradient-check failure threshold on the relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "mgmra", version, about = "Prototype-memory regulated cross-modality retrieval on synthetic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate train/query/gallery dataset files.
    Synth,
    /// Train a model and write a checkpoint and per-epoch losses.
    Train,
    /// Evaluate a checkpoint on query/gallery sets.
    Eval,
    /// Finite-difference check of every operation and loss.
    Gradcheck {
        /// Random instances per operation.
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Paired baseline vs memory-augmented runs over several seeds.
    Ablate {
        /// Number of seeds, starting at --seed.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Dump the prototype hierarchy and gates of a checkpoint.
    ExportMemory,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Main,
    Proto,
}

#[derive(Debug, Args)]
struct Flags {
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset directory or file.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    #[arg(long, global = true)]
    mode: Option<Mode>,
    #[arg(long, global = true)]
    mgmra: Option<OnOff>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    p: Option<usize>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    lambda1: Option<f64>,
    #[arg(long, global = true)]
    lambda2: Option<f64>,
    #[arg(long, global = true)]
    lambda3: Option<f64>,
    /// Margin of both triplet losses.
    #[arg(long, global = true)]
    margin: Option<f64>,
    #[arg(long = "proto-p", global = true)]
    proto_p: Option<usize>,
    #[arg(long = "proto-i", global = true)]
    proto_i: Option<usize>,
    #[arg(long = "proto-s", global = true)]
    proto_s: Option<usize>,
    /// Also write per-query rankings during eval.
    #[arg(long = "dump-rankings", global = true)]
    dump_rankings: bool,
    /// Any configuration key, as KEY=VALUE.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

impl Flags {
    /// `(key, value, flag)` overrides in application order.
    fn overrides(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: Option<String>, flag: &str| {
            if let Some(v) = value {
                out.push((key.to_string(), v, flag.to_string()));
            }
        };
        let s = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string());
        push("seed", self.seed.map(|v| v.to_string()), "--seed");
        push("out", s(&self.out), "--out");
        push("dataset", s(&self.dataset), "--dataset");
        push("checkpoint", s(&self.checkpoint), "--checkpoint");
        push(
            "mode",
            self.mode.map(|m| match m {
                Mode::Main => "main".into(),
                Mode::Proto => "proto".into(),
            }),
            "--mode",
        );
        push(
            "mgmra",
            self.mgmra.map(|m| match m {
                OnOff::On => "on".into(),
                OnOff::Off => "off".into(),
            }),
            "--mgmra",
        );
        push("epochs", self.epochs.map(|v| v.to_string()), "--epochs");
        push("lr", self.lr.map(|v| v.to_string()), "--lr");
        push("p", self.p.map(|v| v.to_string()), "--p");
        push("k", self.k.map(|v| v.to_string()), "--k");
        push("lambda1", self.lambda1.map(|v| v.to_string()), "--lambda1");
        push("lambda2", self.lambda2.map(|v| v.to_string()), "--lambda2");
        push("lambda3", self.lambda3.map(|v| v.to_string()), "--lambda3");
        push("margin_tri", self.margin.map(|v| v.to_string()), "--margin");
        push("margin_sem", self.margin.map(|v| v.to_string()), "--margin");
        push("proto_p", self.proto_p.map(|v| v.to_string()), "--proto-p");
        push("proto_i", self.proto_i.map(|v| v.to_string()), "--proto-i");
        push("proto_s", self.proto_s.map(|v| v.to_string()), "--proto-s");
        if self.dump_rankings {
            push("dump_rankings", Some("on".into()), "--dump-rankings");
        }
        out
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.flags.config {
        cfg.apply_file(path)?;
    }
    for (key, value, flag) in cli.flags.overrides() {
        cfg.set(&key, &value, &flag)?;
    }
    for item in &cli.flags.set {
        let Some((key, value)) = item.split_once('=') else {
            return Err(Error::BadValue {
                origin: "--set".into(),
                detail: format!("expected KEY=VALUE, got `{item}`"),
            });
        };
        cfg.set(key.trim(), value, "--set")?;
    }
    match &cli.command {
        Command::Gradcheck { instances: Some(n) } => cfg.gradcheck_instances = *n,
        Command::Ablate { seeds: Some(n) } => cfg.ablate_seeds = *n,
        _ => {}
    }
    Ok(cfg)
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("MGMRA_LOG_LEVEL", "info");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs one command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    init_logging();
    match execute(&cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = resolve(cli)?;
    debug!("resolved configuration:\n{}", cfg.to_text());
    match &cli.command {
        Command::Synth => synth(&cfg),
        Command::Train => train_cmd(&mut cfg),
        Command::Eval => eval_cmd(&cfg),
        Command::Gradcheck { .. } => gradcheck(&cfg),
        Command::Ablate { .. } => ablate(&cfg),
        Command::ExportMemory => export_memory(&cfg),
    }
}

fn required<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| Error::BadValue {
        origin: "configuration".into(),
        detail: format!("`{key}` is required for this command (--{key})"),
    })
}

fn out_dir(cfg: &RunConfig) -> Result<Option<&Path>> {
    let Some(dir) = cfg.out.as_deref() else { return Ok(None) };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(Some(dir))
}

fn synth(cfg: &RunConfig) -> Result<()> {
    required(&cfg.out, "out")?;
    let dir = out_dir(cfg)?.expect("checked");
    let split = generate(&cfg.synth_config())?;
    for (name, set) in [("train", &split.train), ("query", &split.query), ("gallery", &split.gallery)] {
        let path = dir.join(format!("{name}.mgmr"));
        dataset::write(&path, set)?;
        info!("wrote {} ({} records)", path.display(), set.len());
    }
    cfg.write_resolved(dir)?;
    Ok(())
}

fn train_cmd(cfg: &mut RunConfig) -> Result<()> {
    let out = required(&cfg.out, "out")?.to_path_buf();
    let source = required(&cfg.dataset, "dataset")?;
    let path = if source.is_dir() { source.join("train.mgmr") } else { source.to_path_buf() };
    let data = dataset::load(&path)?;
    for (key, value) in [("input_dim", data.input_dim()), ("num_stripes", data.num_stripes())] {
        if cfg.get(key) != Some(value.to_string()) {
            info!("{key} taken from the dataset: {value}");
            cfg.set(key, &value.to_string(), "dataset")?;
        }
    }
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    cfg.write_resolved(&out)?;
    let train_cfg = cfg.train_config();
    let epochs = train_cfg.epochs;
    let outcome = train_with(&train_cfg, &data, |e, r| {
        info!("epoch {}/{epochs}: total {:.6} (id {:.4}, hc_tri {:.4}, mem {:.4}, ins {:.4}, sem {:.4})", e + 1, r.total, r.id, r.hc_tri, r.mem_sparsity, r.ins, r.sem);
    })?;
    let ck = out.join("checkpoint.mgck");
    checkpoint::save(&ck, &outcome.checkpoint)?;
    report::write_loss_csv(&out.join("loss.csv"), &outcome.epoch_reports)?;
    info!("wrote {}", ck.display());
    Ok(())
}

/// Query and gallery sets: `query.mgmr`/`gallery.mgmr` in a directory, or
/// the two modalities of a single file.
fn eval_sets(source: &Path) -> Result<(Dataset, Dataset)> {
    if source.is_dir() {
        return Ok((dataset::load(&source.join("query.mgmr"))?, dataset::load(&source.join("gallery.mgmr"))?));
    }
    let all = dataset::load(source)?;
    let pick = |m: u8| -> Vec<usize> { (0..all.len()).filter(|&i| all.records()[i].modality == m).collect() };
    Ok((all.subset(&pick(1)), all.subset(&pick(0))))
}

fn eval_cmd(cfg: &RunConfig) -> Result<()> {
    let ck = checkpoint::load(required(&cfg.checkpoint, "checkpoint")?)?;
    let (query, gallery) = eval_sets(required(&cfg.dataset, "dataset")?)?;
    let report = evaluate(&ck.params, &query, &gallery, cfg.mode, cfg.eval_seeds, cfg.seed)?;
    let at = |r: usize| report.cmc.get(r - 1).copied().unwrap_or(1.0);
    println!(
        "rank1={:.4} rank5={:.4} rank10={:.4} mAP={:.4}",
        at(1),
        at(5),
        at(10),
        report.map
    );
    let excluded = report.per_seed[0].excluded;
    if excluded > 0 {
        log::warn!("{excluded} queries have no match in the gallery and were excluded");
    }
    if let Some(dir) = out_dir(cfg)? {
        report::write_metrics_csv(&dir.join("metrics.csv"), &report)?;
        if cfg.dump_rankings {
            let ids: Vec<u32> = query.records().iter().map(|r| r.identity).collect();
            report::write_rankings_csv(&dir.join("rankings.csv"), &report, &ids)?;
        }
        cfg.write_resolved(dir)?;
    }
    Ok(())
}

fn gradcheck(cfg: &RunConfig) -> Result<()> {
    let entries = run_gradient_suite(cfg.seed, cfg.gradcheck_instances)?;
    let mut table = String::from("name,instances,max_rel_error\n");
    for e in &entries {
        table.push_str(&format!("{},{},{:e}\n", e.name, e.instances, e.max_rel_error));
    }
    print!("{table}");
    if let Some(dir) = out_dir(cfg)? {
        let path = dir.join("gradcheck.csv");
        fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
        cfg.write_resolved(dir)?;
    }
    let failed: Vec<&str> = entries
        .iter()
        .filter(|e| !(e.max_rel_error < GRADCHECK_TOLERANCE))
        .map(|e| e.name)
        .collect();
    if !failed.is_empty() {
        return Err(Error::GradCheck(failed.join(", ")));
    }
    Ok(())
}

fn ablate(cfg: &RunConfig) -> Result<()> {
    let mut rows = Vec::with_capacity(cfg.ablate_seeds);
    for k in 0..cfg.ablate_seeds as u64 {
        let seed = cfg.seed.wrapping_add(k);
        let row = ablate_seed(&cfg.synth, &cfg.train, seed, cfg.eval_seeds)?;
        info!(
            "seed {seed}: rank1 {:.4} -> {:.4}, mAP {:.4} -> {:.4}",
            row.rank1_base, row.rank1_mgmra, row.map_base, row.map_mgmra
        );
        rows.push(row);
    }
    let stdout = std::io::stdout();
    report::write_ablation_csv(&mut stdout.lock(), &rows).map_err(|e| Error::io("<stdout>", e))?;
    let _ = std::io::stdout().flush();
    if let Some(dir) = out_dir(cfg)? {
        let path = dir.join("ablation.csv");
        let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        report::write_ablation_csv(&mut file, &rows).map_err(|e| Error::io(&path, e))?;
        cfg.write_resolved(dir)?;
    }
    Ok(())
}

fn export_memory(cfg: &RunConfig) -> Result<()> {
    required(&cfg.out, "out")?;
    let ck = checkpoint::load(required(&cfg.checkpoint, "checkpoint")?)?;
    let memory = ck
        .params
        .memory
        .as_ref()
        .ok_or_else(|| mgmra_core::Error::Contract("checkpoint has no prototype memory".into()))?;
    let dir = out_dir(cfg)?.expect("checked");
    let path = dir.join("memory.csv");
    report::write_memory_csv(&path, memory)?;
    cfg.write_resolved(dir)?;
    info!("wrote {}", path.display());
    Ok(())
}
