//! Flat `key=value` run configs.
//!
//! A `--config <file>` argument is expanded into `--key=value` flags placed
//! right after the subcommand, ahead of the user's own flags, so that an
//! explicit flag overrides the file.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use kbe_core::Error;

/// Parses `key=value` lines. Blank lines and `#` comments are ignored.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, Error> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("config line {}: expected key=value", idx + 1)));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Config(format!("config line {}: empty key", idx + 1)));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

/// Rewrites `args` with the contents of any `--config` file spliced in.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, Error> {
    let mut config_path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut iter = args.into_iter();
    let program = iter.next();
    let mut pending = false;
    for arg in iter {
        if pending {
            config_path = Some(arg);
            pending = false;
            continue;
        }
        match arg.to_str() {
            Some("--config") => pending = true,
            Some(s) if s.starts_with("--config=") => config_path = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(arg),
        }
    }
    if pending {
        return Err(Error::Config("--config needs a path".into()));
    }

    let mut out: Vec<OsString> = program.into_iter().collect();
    let Some(path) = config_path else {
        out.extend(rest);
        return Ok(out);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let injected = parse_config(&text)?
        .into_iter()
        .map(|(k, v)| OsString::from(format!("--{k}={v}")));

    // the subcommand must stay first
    let mut rest = rest.into_iter();
    out.extend(rest.next());
    out.extend(injected);
    out.extend(rest);
    Ok(out)
}

/// Renders pairs back into the file format, one per line.
pub fn render(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}
