//! Command-line front end. `run` returns the process exit status.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use crate::adversary::{Strategy, TableStrategy};
use crate::campaign::{library_table, monte_carlo, public_projection, replay, report_csv, CampaignConfig};
use crate::dist::Dist;
use crate::drg::{Checkpoint, DrgConfig, DrgGenerator, DrgMode};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::seeds::SeedLibrary;
use crate::verify::{verify, CheckResult, VerifyParams, CHECKS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "deep-random", version, about = "Deep-random secrecy simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run a Monte Carlo campaign from a config file.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Write the public projection only to the transcript.
        #[arg(long)]
        public_only: bool,
        /// JSON-lines transcript output.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Deep random generator.
    Drg {
        #[command(subcommand)]
        cmd: DrgCmd,
    },
    /// Replay a public transcript against a public strategy.
    Attack {
        #[arg(long)]
        transcript: PathBuf,
        /// Full (private) transcript used to score guesses.
        #[arg(long)]
        key: Option<PathBuf>,
        #[arg(long)]
        strategy: String,
        /// Table strategy text file, for `--strategy table`.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        attacker_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run numeric checks.
    Verify {
        id: Option<String>,
        #[arg(long)]
        all: bool,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seed library.
    Seeds {
        #[command(subcommand)]
        cmd: SeedsCmd,
    },
}

#[derive(clap::Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    k: f64,
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    sequences: usize,
    /// Override of the maturity step count.
    #[arg(long)]
    maturity: Option<u64>,
}

impl GenArgs {
    fn config(&self) -> DrgConfig {
        let mut c = DrgConfig::new(self.n, self.k, self.alpha, self.seed);
        c.sequences = self.sequences;
        c.maturity_steps = self.maturity;
        c.mode = DrgMode::Combined;
        c
    }
}

#[derive(Subcommand, Debug)]
enum DrgCmd {
    /// Run steps from a fresh generator, printing per-step reports.
    Run {
        #[command(flatten)]
        gen: GenArgs,
        /// Steps to run; defaults to maturity.
        #[arg(long)]
        steps: Option<u64>,
        /// Write the final state here.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Write the state of a fresh generator.
    Checkpoint {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Continue from a checkpoint.
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Elect a distribution from a mature checkpoint.
    Elect {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum SeedsCmd {
    List {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the table strategy fitted to the library mixture.
    Table {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        /// Campaign seed; the library stream is derived from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Inspect {
        name: String,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_lines(p: &Path) -> Result<Vec<Value>> {
    let text = fs::read_to_string(p)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(u, l)| serde_json::from_str(l).map_err(|e| Error::Parse { line: u + 1, msg: e.to_string() }))
        .collect()
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn load_checkpoint(p: &Path) -> Result<DrgGenerator> {
    let cp: Checkpoint = serde_json::from_str(&fs::read_to_string(p)?)?;
    DrgGenerator::restore(cp)
}

fn check_line(r: &CheckResult) -> String {
    format!("{:<14} {:<11} {}", r.check_id, format!("{:?}", r.status).to_lowercase(), r.detail)
}

fn execute(cmd: Cmd, stdout: &mut dyn Write) -> Result<i32> {
    match cmd {
        Cmd::Simulate { config, seed, trials, out, format, public_only, transcript } => {
            let mut cfg = match config {
                Some(p) => CampaignConfig::from_toml(&fs::read_to_string(p)?)?,
                None => CampaignConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.validate()?;
            let run = monte_carlo(&cfg, transcript.is_some())?;
            if let (Some(path), Some(records)) = (transcript, run.records.as_ref()) {
                let mut text = String::new();
                for r in records {
                    let v = if public_only { public_projection(r) } else { r.clone() };
                    text.push_str(&serde_json::to_string(&v)?);
                    text.push('\n');
                }
                fs::write(path, text)?;
            }
            let text = match format {
                Format::Json => to_json(&run.report)?,
                Format::Csv => report_csv(&run.report),
            };
            emit(out.as_deref(), &text, stdout)?;
            Ok(EXIT_OK)
        }
        Cmd::Drg { cmd } => drg(cmd, stdout),
        Cmd::Attack { transcript, key, strategy, table, attacker_seed, out } => {
            let lines = read_lines(&transcript)?;
            let key = key.map(|k| read_lines(&k)).transpose()?;
            let table = table
                .map(|p| -> Result<Strategy> { Ok(Strategy::Table(TableStrategy::from_text(&fs::read_to_string(p)?)?)) })
                .transpose()?;
            let rep = replay(&lines, key.as_deref(), &strategy, table.as_ref(), attacker_seed)?;
            emit(out.as_deref(), &to_json(&rep)?, stdout)?;
            Ok(EXIT_OK)
        }
        Cmd::Verify { id, all, n, seed, trials, pairs, out } => {
            let ids: Vec<String> = match (id, all) {
                (Some(_), true) => return Err(Error::Config("give a check id or --all, not both".into())),
                (None, false) => return Err(Error::Config(format!("give a check id or --all; known: {}", CHECKS.join(", ")))),
                (Some(i), false) => vec![i],
                (None, true) => CHECKS.iter().map(|s| s.to_string()).collect(),
            };
            let defaults = VerifyParams::default();
            let p = VerifyParams { n, seed, trials, pairs: pairs.unwrap_or(defaults.pairs), ..defaults };
            let mut results = Vec::new();
            for id in &ids {
                let r = verify(id, &p)?;
                writeln!(stdout, "{}", check_line(&r))?;
                results.push(r);
            }
            if let Some(o) = out {
                fs::write(o, to_json(&results)?)?;
            }
            Ok(if results.iter().all(|r| r.passed()) { EXIT_OK } else { EXIT_CHECK })
        }
        Cmd::Seeds { cmd } => {
            let (n, alpha, seed) = match &cmd {
                SeedsCmd::List { n, alpha, seed }
                | SeedsCmd::Inspect { n, alpha, seed, .. }
                | SeedsCmd::Table { n, alpha, seed, .. } => (*n, *alpha, *seed),
            };
            let lib = SeedLibrary::standard(n, alpha, &mut Stream::new(seed).derive("library", 0))?;
            match cmd {
                SeedsCmd::List { .. } => {
                    for e in &lib.entries {
                        writeln!(stdout, "{:<16} support {:>5}  norm {:.6}  member {}", e.name, e.dist.support_size(), e.norm, e.member)?;
                    }
                }
                SeedsCmd::Table { k, out, .. } => match library_table(&lib, k)? {
                    Strategy::Table(t) => emit(out.as_deref(), &t.to_text(), stdout)?,
                    _ => return Err(Error::Consistency("library table is not a table strategy".into())),
                },
                SeedsCmd::Inspect { name, .. } => {
                    let e = lib.get(&name).ok_or_else(|| Error::Config(format!("name: no seed {name:?} in the library")))?;
                    stdout.write_all(e.dist.to_text().as_bytes())?;
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn drg(cmd: DrgCmd, stdout: &mut dyn Write) -> Result<i32> {
    match cmd {
        DrgCmd::Run { gen, steps, checkpoint } => {
            let mut g = DrgGenerator::new(gen.config())?;
            let steps = steps.unwrap_or_else(|| g.config.maturity());
            for _ in 0..steps {
                for r in g.step()? {
                    writeln!(stdout, "{}", serde_json::to_string(&r)?)?;
                }
            }
            if let Some(p) = checkpoint {
                fs::write(p, to_json(&g.checkpoint())?)?;
            }
        }
        DrgCmd::Checkpoint { gen, out } => {
            let g = DrgGenerator::new(gen.config())?;
            fs::write(out, to_json(&g.checkpoint())?)?;
        }
        DrgCmd::Resume { checkpoint, steps, out } => {
            let mut g = load_checkpoint(&checkpoint)?;
            for _ in 0..steps {
                for r in g.step()? {
                    writeln!(stdout, "{}", serde_json::to_string(&r)?)?;
                }
            }
            fs::write(out.unwrap_or(checkpoint), to_json(&g.checkpoint())?)?;
        }
        DrgCmd::Elect { checkpoint, out } => {
            let mut g = load_checkpoint(&checkpoint)?;
            let d: Dist = g.elect()?;
            emit(out.as_deref(), &d.to_text(), stdout)?;
            fs::write(checkpoint, to_json(&g.checkpoint())?)?;
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.cmd, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}
