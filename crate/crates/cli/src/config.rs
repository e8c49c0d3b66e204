//! `--config <json>` support: a JSON object whose keys are long flag names of
//! the chosen subcommand. Its entries are inserted ahead of the command-line
//! flags, so flags given explicitly win.

use crate::CliError;
use serde_json::Value;
use std::ffi::OsString;

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return iter.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn flags_from(value: &Value) -> Result<Vec<OsString>, CliError> {
    let Value::Object(map) = value else {
        return Err(CliError::Usage("--config must hold a JSON object".into()));
    };
    let mut out = Vec::new();
    for (key, v) in map {
        if key == "config" {
            return Err(CliError::Usage("--config files cannot nest".into()));
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag.into()),
            Value::Number(n) => out.extend([flag.into(), n.to_string().into()]),
            Value::String(s) => out.extend([flag.into(), s.into()]),
            Value::Array(_) | Value::Object(_) => {
                return Err(CliError::Usage(format!("config key {key:?}: expected a scalar value")));
            }
        }
    }
    Ok(out)
}

/// Returns `argv` with config entries spliced in after the subcommand name.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    if argv.len() < 2 || argv[1].to_string_lossy().starts_with('-') {
        return Ok(argv);
    }
    let Some(path) = config_path(&argv[2..]) else {
        return Ok(argv);
    };
    let text =
        std::fs::read_to_string(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.to_string_lossy())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.to_string_lossy())))?;
    let mut out = argv[..2].to_vec();
    out.extend(flags_from(&value)?);
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}
