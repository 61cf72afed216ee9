//! Flat config files. Each key names a long flag of the chosen subcommand (or
//! a global flag). The file's values are spliced into the argument list right
//! after the subcommand, ahead of the user's own flags, and since every flag
//! overrides earlier occurrences of itself the command line wins.

use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;
use crate::CliError;

/// Returns `argv` with the config file's flags inserted, or unchanged when
/// there is no `--config`.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let strings: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let Some(path) = config_path(&strings) else {
        return Ok(argv);
    };
    let command = Cli::command();
    let Some((sub_index, sub)) = strings
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| command.find_subcommand(a).map(|s| (i, s)))
    else {
        // let clap report the missing subcommand
        return Ok(argv);
    };

    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Usage(format!("cannot read config file {path}: {e}")))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Usage(format!("config file {path}: {e}")))?;

    let known = |key: &str| {
        sub.get_arguments()
            .chain(command.get_arguments())
            .any(|a| a.get_long() == Some(key) && key != "config" && key != "help" && key != "version")
    };
    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in &table {
        if !known(key) {
            return Err(CliError::Usage(format!(
                "config file {path}: unknown key '{key}' for '{}'",
                sub.get_name()
            )));
        }
        let flag = format!("--{key}");
        match value {
            toml::Value::Boolean(true) => injected.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Table(_) => {
                return Err(CliError::Usage(format!(
                    "config file {path}: '{key}' must not be a table"
                )));
            }
            other => {
                injected.push(flag.into());
                injected.push(scalar(other, key, &path)?.into());
            }
        }
    }

    let mut out: Vec<OsString> = argv[..=sub_index].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[sub_index + 1..]);
    Ok(out)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut path = None;
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            path = it.next().cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_owned());
        }
    }
    path
}

fn scalar(value: &toml::Value, key: &str, path: &str) -> Result<String, CliError> {
    Ok(match value {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Array(items) => items
            .iter()
            .map(|v| match v {
                toml::Value::Array(_) | toml::Value::Table(_) => Err(CliError::Usage(format!(
                    "config file {path}: '{key}' must be a flat list"
                ))),
                other => scalar(other, key, path),
            })
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        other => {
            return Err(CliError::Usage(format!(
                "config file {path}: unsupported value for '{key}': {other}"
            )))
        }
    })
}
