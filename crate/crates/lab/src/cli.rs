//! Argument parsing and orchestration. Experiment keys become
//! `--key-with-dashes` flags on their subcommand.

use crate::commands::execute;
use crate::config::{read_config, Command, RunConfig, Value};
use crate::error::{LabError, LabResult};
use clap::{Arg, ArgAction, ArgMatches};
use std::ffi::OsString;
use std::path::PathBuf;

const GLOBAL: [(&str, &str); 8] = [
    ("config", "Configuration or manifest file"),
    ("seed", "Master seed"),
    ("out", "Output directory"),
    ("model", "nlw, cubic, doublewell, ou or chain"),
    ("threads", "Worker threads (does not change results)"),
    ("dt", "Time step"),
    ("horizon", "Time horizon"),
    ("paths", "Ensemble size"),
];

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

pub fn build_cli() -> clap::Command {
    let mut app = clap::Command::new("dampwave")
        .about("Stochastic damped wave laboratory")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, help) in GLOBAL {
        app = app.arg(Arg::new(name).long(name).global(true).help(help).action(ArgAction::Set));
    }
    app = app.arg(Arg::new("stride").long("stride").global(true).help("Recording stride").action(ArgAction::Set));
    for cmd in Command::ALL {
        let mut sub = clap::Command::new(cmd.name()).about(cmd.about());
        for (key, default) in cmd.experiment_defaults() {
            let help = match &default {
                Value::List(v) => format!("comma-separated, default {v:?}"),
                Value::Number(x) => format!("default {x}"),
                Value::Bool(b) => format!("default {b}"),
                Value::Text(s) => format!("default {s}"),
            };
            sub = sub.arg(Arg::new(key).long(flag(key)).help(help).action(ArgAction::Set).allow_hyphen_values(true));
        }
        app = app.subcommand(sub);
    }
    app
}

fn parse_num<T: std::str::FromStr>(m: &ArgMatches, key: &str) -> LabResult<Option<T>> {
    match m.get_one::<String>(key) {
        None => Ok(None),
        Some(s) => s.parse().map(Some).map_err(|_| LabError::config(format!("--{key}: cannot parse `{s}`"))),
    }
}

/// Config from `--config` (or defaults) with every flag applied on top.
pub fn config_from_matches(cmd: Command, m: &ArgMatches) -> LabResult<RunConfig> {
    let mut cfg = match m.get_one::<String>("config") {
        Some(p) => read_config(&PathBuf::from(p))?,
        None => RunConfig::default(),
    };
    if let Some(s) = parse_num(m, "seed")? {
        cfg.seed = s;
    }
    if let Some(o) = m.get_one::<String>("out") {
        cfg.out = o.clone();
    }
    if let Some(k) = m.get_one::<String>("model") {
        cfg.model.kind = k.clone();
    }
    if let Some(x) = parse_num(m, "dt")? {
        cfg.integrator.dt = Some(x);
    }
    if let Some(x) = parse_num(m, "horizon")? {
        cfg.integrator.horizon = Some(x);
    }
    if let Some(x) = parse_num(m, "paths")? {
        cfg.integrator.paths = Some(x);
    }
    if let Some(x) = parse_num(m, "stride")? {
        cfg.integrator.stride = x;
    }
    let mut errs = Vec::new();
    for (key, default) in cmd.experiment_defaults() {
        if let Some(s) = m.get_one::<String>(key) {
            match default.parse_like(s) {
                Ok(v) => {
                    cfg.experiment.insert(key.to_string(), v);
                }
                Err(e) => errs.push(format!("--{}: {e}", flag(key))),
            }
        }
    }
    if !errs.is_empty() {
        return Err(LabError::Config(errs));
    }
    cfg.resolve(cmd)?;
    Ok(cfg)
}

/// Runs the CLI and returns the exit status: 0 pass, 1 fail, 2
/// inconclusive, 64 configuration error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match build_cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 64 } else { 0 };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let cmd = Command::from_name(name).expect("registered subcommand");
    match run_command(cmd, sub) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("dampwave {}: {e}", cmd.name());
            e.exit_code()
        }
    }
}

fn run_command(cmd: Command, m: &ArgMatches) -> LabResult<i32> {
    let cfg = config_from_matches(cmd, m)?;
    if let Some(n) = parse_num::<usize>(m, "threads")? {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let outcome = execute(cmd, &cfg)?;
    let dir = PathBuf::from(&cfg.out);
    let status = outcome.verdict.status;
    if cmd == Command::Selftest {
        for c in crate::commands::selftest_checks() {
            println!("{} {}", if c.pass { "ok  " } else { "FAIL" }, c.name);
        }
    }
    for n in &outcome.verdict.notes {
        println!("note: {n}");
    }
    let hash = outcome.artifacts.finish(&dir, cmd, &cfg, &outcome.verdict)?;
    if let Some(prev) = cfg.run.as_ref().filter(|r| r.subcommand == cmd.name()) {
        if prev.content_hash != hash {
            eprintln!("warning: content hash {hash} differs from the manifest's {}", prev.content_hash);
        }
    }
    let status_text = serde_json::to_value(status)?;
    println!("{}: {} ({}, sha256 {hash})", cmd.name(), status_text.as_str().unwrap_or("?"), dir.display());
    Ok(status.exit_code())
}
