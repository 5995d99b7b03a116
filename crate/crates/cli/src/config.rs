//! `key = value` run configuration. Values come from an optional config
//! file, overridden by command-line flags; every value actually read is
//! echoed to `run.cfg` so a run can be replayed with `--config`.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub struct RunConfig {
    command: String,
    values: BTreeMap<String, String>,
    used: RefCell<BTreeMap<String, String>>,
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| CliError::Usage(format!("config line {}: expected 'key = value'", i + 1)))?;
        out.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    Ok(out)
}

impl RunConfig {
    /// `file` entries first, then `flags` (already stringified) on top.
    /// Keys outside `allowed` are rejected like unknown flags.
    pub fn new(
        command: &str,
        file: Option<&Path>,
        flags: BTreeMap<String, String>,
        allowed: &[String],
    ) -> Result<Self, CliError> {
        let mut values = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Other(format!("cannot read config {}: {e}", path.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(bad) = values.keys().find(|k| !allowed.contains(k)) {
            return Err(CliError::Usage(format!("unknown config key '{bad}' for {command}")));
        }
        values.extend(flags);
        Ok(Self { command: command.to_owned(), values, used: RefCell::new(BTreeMap::new()) })
    }

    pub fn get<T: FromStr + ToString>(&self, key: &str, default: T) -> Result<T, CliError> {
        let value = match self.values.get(key) {
            Some(raw) => raw.parse().map_err(|_| CliError::Usage(format!("invalid value '{raw}' for {key}")))?,
            None => default,
        };
        self.used.borrow_mut().insert(key.to_owned(), value.to_string());
        Ok(value)
    }

    pub fn get_opt(&self, key: &str) -> Option<String> {
        let v = self.values.get(key).cloned();
        if let Some(v) = &v {
            self.used.borrow_mut().insert(key.to_owned(), v.clone());
        }
        v
    }

    pub fn echo(&self) -> String {
        let mut out = format!("# polyvem {}\n", self.command);
        for (k, v) in self.used.borrow().iter() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn write_echo(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.echo()).map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))
    }
}
