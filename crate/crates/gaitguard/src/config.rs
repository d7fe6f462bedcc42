//! TOML config file. Top-level keys are global settings; a `[subcommand]`
//! table holds that subcommand's flags by long name (`-` or `_`). Flags on
//! the command line override the file.
//!
//! ```toml
//! seed = 7
//!
//! [mitigate]
//! approach = "lbm"
//! dist = "laplace"
//! lambda = 150
//! ```

use std::path::Path;

use crate::error::{AppError, AppResult};

/// Keys resolved in code rather than passed through as flags.
pub const GLOBAL_KEYS: [&str; 4] = ["seed", "verbose", "json", "out-dir"];

#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    table: toml::Table,
}

fn normalize(key: &str) -> String {
    key.replace('_', "-")
}

fn scalar(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(b) => Some(b.to_string()),
        _ => None,
    }
}

impl FileConfig {
    pub fn parse(text: &str) -> AppResult<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| AppError::validation("config", e.to_string()))?;
        Ok(FileConfig { table })
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::at(path, e))?;
        Self::parse(&text).map_err(|e| AppError::validation("config", format!("{}: {}", path.display(), e.detail())))
    }

    fn section(&self, sub: &str) -> Option<&toml::Table> {
        self.table.get(sub).and_then(|v| v.as_table())
    }

    /// A global key, looked up in the subcommand's table first.
    pub fn global(&self, sub: &str, key: &str) -> Option<&toml::Value> {
        fn find<'a>(t: &'a toml::Table, key: &str) -> Option<&'a toml::Value> {
            t.iter().find(|(k, v)| normalize(k) == key && !v.is_table()).map(|(_, v)| v)
        }
        self.section(sub).and_then(|t| find(t, key)).or_else(|| find(&self.table, key))
    }

    pub fn seed(&self, sub: &str) -> AppResult<Option<u64>> {
        match self.global(sub, "seed") {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(other) => Err(AppError::validation("config", format!("seed must be a non-negative integer, got {other}"))),
        }
    }

    /// Flag arguments for `sub` from its table, checked against the
    /// subcommand's known long flags.
    pub fn flag_args(&self, sub: &clap::Command) -> AppResult<Vec<String>> {
        let Some(section) = self.section(sub.get_name()) else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for (key, value) in section {
            let key = normalize(key);
            if GLOBAL_KEYS.contains(&key.as_str()) {
                continue;
            }
            let arg = sub
                .get_arguments()
                .find(|a| a.get_long() == Some(key.as_str()))
                .ok_or_else(|| {
                    AppError::validation(
                        "config",
                        format!("[{}] has unknown key {key:?}", sub.get_name()),
                    )
                })?;
            let takes_value = arg.get_num_args().is_some_and(|n| n.takes_values());
            match value {
                toml::Value::Boolean(b) if !takes_value => {
                    if *b {
                        out.push(format!("--{key}"));
                    }
                }
                toml::Value::Array(items) => {
                    for item in items {
                        let v = scalar(item).ok_or_else(|| {
                            AppError::validation("config", format!("[{}] {key}: nested values are not flags", sub.get_name()))
                        })?;
                        out.push(format!("--{key}={v}"));
                    }
                }
                other => {
                    let v = scalar(other).ok_or_else(|| {
                        AppError::validation("config", format!("[{}] {key}: not a flag value", sub.get_name()))
                    })?;
                    out.push(format!("--{key}={v}"));
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_keys_become_flags() {
        let cfg = FileConfig::parse("seed = 3\n[demo]\nlambda = 150\nfast = true\nseed = 9\n").unwrap();
        let cmd = clap::Command::new("demo")
            .arg(clap::Arg::new("lambda").long("lambda"))
            .arg(clap::Arg::new("fast").long("fast").action(clap::ArgAction::SetTrue));
        assert_eq!(cfg.flag_args(&cmd).unwrap(), vec!["--fast", "--lambda=150"]);
        assert_eq!(cfg.seed("demo").unwrap(), Some(9));
        assert_eq!(cfg.seed("other").unwrap(), Some(3));
        let bad = FileConfig::parse("[demo]\nlambada = 1\n").unwrap();
        assert!(bad.flag_args(&cmd).unwrap_err().detail().contains("lambada"));
    }
}
