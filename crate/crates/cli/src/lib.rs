//! Command-line frontend: layered configuration, subcommand dispatch and
//! deterministic CSV/JSON output with a run manifest.

pub mod commands;
pub mod output;
pub mod settings;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::parser::ValueSource;
use clap::{Arg, ArgMatches, Command};
use serde_json::{json, Value};

use crate::commands::{Subcommand, SUBCOMMANDS};
use crate::output::{OutputDir, RunManifest};
use crate::settings::{read_config_file, Settings};

/// Environment variable that caps the worker threads used by scans.
pub const WORKERS_ENV: &str = "EXPULSIVE_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] expulsive::Error),
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(expulsive::Error::InvalidConfig(_) | expulsive::Error::Resolution { .. }) => 2,
            _ => 1,
        }
    }
}

fn command() -> Command {
    let mut cmd = Command::new("expulsive")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Bound states, tails and stability in expulsive potentials")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("flat key = value file (or a previous manifest.json)"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .global(true)
                .value_name("DIR")
                .default_value("out")
                .help("output directory"),
        );
    for sub in SUBCOMMANDS {
        let mut c = Command::new(sub.name).about(sub.about);
        for key in sub.keys {
            let mut arg = Arg::new(key.name).long(key.name).value_name("VALUE").help(key.help);
            arg = if key.boolean {
                arg.num_args(0..=1).default_missing_value("true")
            } else {
                arg.allow_hyphen_values(true)
            };
            c = c.arg(arg);
        }
        cmd = cmd.subcommand(c);
    }
    cmd
}

fn flag_layer(matches: &ArgMatches, sub: &Subcommand) -> BTreeMap<String, String> {
    sub.keys
        .iter()
        .filter(|k| matches.value_source(k.name) == Some(ValueSource::CommandLine))
        .filter_map(|k| matches.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect()
}

fn configure_workers() {
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `argv` (including the program name), runs one subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_workers();
    let (name, sub_matches) = matches.subcommand().expect("subcommand required");
    let sub = SUBCOMMANDS.iter().find(|s| s.name == name).expect("registered subcommand");
    let out_root = PathBuf::from(sub_matches.get_one::<String>("out").expect("default"));
    let config_path = sub_matches.get_one::<String>("config").map(PathBuf::from);

    let started = Instant::now();
    let mut settings = Settings::from_defaults(sub.defaults);
    let mut inputs = Vec::new();
    let layered = (|| -> Result<(), CliError> {
        if let Some(path) = &config_path {
            let layer = read_config_file(path)?;
            if let Some(bad) = layer.keys().find(|k| !sub.keys.iter().any(|key| key.name == k.as_str())) {
                return Err(CliError::Config(format!("unknown key '{bad}' for {}", sub.name)));
            }
            settings.overlay(layer);
            inputs.push(path.display().to_string());
        }
        settings.overlay(flag_layer(sub_matches, sub));
        Ok(())
    })();

    let mut out = match OutputDir::create(&out_root) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let result = layered.and_then(|_| (sub.run)(&settings, &mut out, &mut inputs));
    let (summary, code) = match result {
        Ok(mut value) => {
            if let Value::Object(map) = &mut value {
                map.insert("status".into(), json!("ok"));
            }
            (value, 0)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut value = json!({ "status": "failed", "error": e.to_string(), "exit_code": e.exit_code() });
            if let Some(spec) = sub.dimension.and_then(|d| settings.problem(d).ok()) {
                value["problem"] = json!(spec.to_key_values());
            }
            (value, e.exit_code())
        }
    };
    let mut code = code;
    if let Err(e) = out.json("summary.json", &summary) {
        eprintln!("error: {e}");
        code = code.max(1);
    }
    let mut outputs = out.written().to_vec();
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: sub.name.to_string(),
        config: settings.resolved().clone(),
        inputs,
        outputs,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        exit_code: code,
    };
    if let Err(e) = out.json("manifest.json", &manifest) {
        eprintln!("error: {e}");
        code = code.max(1);
    }
    code
}
