//! Flat `key = value` configuration files.
//!
//! Keys mirror the long flag names. The file's entries are spliced in front
//! of the command-line flags so that flags given explicitly win.

use std::ffi::OsString;
use std::fs;

/// Extracts `--config FILE` (or `--config=FILE`) from `args`.
fn take_config_path(args: &mut Vec<OsString>) -> Result<Option<String>, String> {
    let mut i = 0;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--config" {
            if i + 1 >= args.len() {
                return Err("--config needs a file argument".into());
            }
            let path = args[i + 1].to_string_lossy().into_owned();
            args.drain(i..i + 2);
            return Ok(Some(path));
        }
        if let Some(path) = a.strip_prefix("--config=") {
            let path = path.to_string();
            args.remove(i);
            return Ok(Some(path));
        }
        i += 1;
    }
    Ok(None)
}

/// Parses config text into `--key=value` arguments.
pub fn parse_config(text: &str) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value, got {raw:?}", lineno + 1))?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", lineno + 1));
        }
        out.push(OsString::from(format!("--{key}={}", value.trim())));
    }
    Ok(out)
}

/// Returns the argument vector with config-file entries inserted right
/// after the subcommand name. Keys for which `known(subcommand, key)` is
/// false are skipped with a warning, so one file can serve every command.
pub fn expand_args<F: Fn(&str, &str) -> bool>(
    mut args: Vec<OsString>,
    known: F,
) -> Result<Vec<OsString>, String> {
    let Some(path) = take_config_path(&mut args)? else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let sub = args.get(1).map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let entries: Vec<OsString> = parse_config(&text)?
        .into_iter()
        .filter(|e| {
            let e = e.to_string_lossy();
            let key = e[2..].split('=').next().unwrap_or("");
            let keep = known(&sub, key);
            if !keep {
                eprintln!("warning: config key {key:?} does not apply to {sub:?}; ignored");
            }
            keep
        })
        .collect();
    // args[0] is the program, args[1] the subcommand.
    let at = args.len().min(2);
    args.splice(at..at, entries);
    Ok(args)
}
