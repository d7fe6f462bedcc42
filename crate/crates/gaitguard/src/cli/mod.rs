//! Command-line front end.

mod args;
mod extract;
mod identify;
mod mitigate;
mod serve;
mod sweep;
mod synth;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, FromArgMatches};

pub use args::{Cli, Command};

use crate::config::FileConfig;
use crate::error::{AppError, AppResult};

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub json: bool,
}

impl Ctx {
    /// Resolves an output path against `--out-dir`.
    pub fn out(&self, path: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }
}

/// Prints one JSON line to stdout.
pub(crate) fn emit(value: &serde_json::Value) -> AppResult<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{value}")?;
    out.flush()?;
    Ok(())
}

const VALUE_GLOBALS: [&str; 3] = ["--config", "--seed", "--out-dir"];

/// Index of the subcommand name in `argv`, skipping global options.
fn subcommand_index(argv: &[OsString], names: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if VALUE_GLOBALS.contains(&a.as_ref()) {
            i += 2;
            continue;
        }
        if names.iter().any(|n| n == a.as_ref()) {
            return Some(i);
        }
        if !a.starts_with('-') {
            return None;
        }
        i += 1;
    }
    None
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn command() -> clap::Command {
    let mut cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    cmd.build();
    cmd
}

/// Parses `argv` with config-file values spliced in ahead of the user's
/// own flags, so that flags win.
fn parse(argv: Vec<OsString>) -> Result<(Cli, FileConfig), ParseOutcome> {
    let cmd = command();
    let wants_json = argv.iter().any(|a| a == "--json");
    let config = match config_path(&argv) {
        Some(p) => FileConfig::load(&p).map_err(|e| ParseOutcome::Error(e, wants_json))?,
        None => FileConfig::default(),
    };
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let mut argv = argv;
    if let Some(i) = subcommand_index(&argv, &names) {
        let sub = cmd
            .find_subcommand(argv[i].to_string_lossy().as_ref())
            .expect("known subcommand");
        let injected = config
            .flag_args(sub)
            .map_err(|e| ParseOutcome::Error(e, wants_json))?;
        argv.splice(i + 1..i + 1, injected.into_iter().map(OsString::from));
    }
    let matches = cmd.try_get_matches_from(argv).map_err(ParseOutcome::Clap)?;
    let cli = Cli::from_arg_matches(&matches).map_err(ParseOutcome::Clap)?;
    Ok((cli, config))
}

enum ParseOutcome {
    Clap(clap::Error),
    Error(AppError, bool),
}

fn report(err: &AppError, json: bool) {
    if json {
        eprintln!("{}", err.to_json());
    } else {
        eprintln!("error: {}", err.detail());
    }
}

/// Runs the command line and returns the process exit code.
pub fn run(argv: Vec<OsString>) -> i32 {
    let wants_json = argv.iter().any(|a| a == "--json");
    let (cli, config) = match parse(argv) {
        Ok(v) => v,
        Err(ParseOutcome::Clap(e)) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            if wants_json {
                report(&AppError::validation("usage", e.render().to_string().trim_end()), true);
            } else {
                let _ = e.print();
            }
            return 1;
        }
        Err(ParseOutcome::Error(e, json)) => {
            report(&e, json);
            return e.exit_code();
        }
    };
    let sub = cli.command.name();
    let json = cli.json || matches!(config.global(sub, "json"), Some(toml::Value::Boolean(true)));
    let verbose = cli.verbose as i64
        + config
            .global(sub, "verbose")
            .and_then(|v| v.as_integer())
            .unwrap_or(0);
    let level = match verbose {
        i64::MIN..=0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("GAITGUARD_LOG")
        .try_init();
    let result = (|| -> AppResult<()> {
        let seed = match cli.seed {
            Some(s) => s,
            None => match config.seed(sub)? {
                Some(s) => s,
                None => env_seed()?.unwrap_or(0),
            },
        };
        let out_dir = cli.out_dir.clone().or_else(|| {
            config
                .global(sub, "out-dir")
                .and_then(|v| v.as_str())
                .map(PathBuf::from)
        });
        let ctx = Ctx { seed, out_dir, json };
        dispatch(cli.command, &ctx)
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            report(&e, json);
            e.exit_code()
        }
    }
}

fn env_seed() -> AppResult<Option<u64>> {
    match std::env::var("GAITGUARD_SEED") {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| AppError::validation("config", format!("GAITGUARD_SEED is not an integer: {s:?}"))),
        _ => Ok(None),
    }
}

fn dispatch(cmd: Command, ctx: &Ctx) -> AppResult<()> {
    match cmd {
        Command::Extract(a) => extract::run(a, ctx),
        Command::Identify(a) => identify::run(a, ctx),
        Command::Mitigate(a) => mitigate::run(a, ctx),
        Command::Sweep(a) => sweep::run(a, ctx),
        Command::Serve(a) => serve::run_serve(a, ctx),
        Command::Replay(a) => serve::run_replay(a, ctx),
        Command::Synth(a) => synth::run(a, ctx),
    }
}
