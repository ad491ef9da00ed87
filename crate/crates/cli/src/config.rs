//! `key = value` config files.
//!
//! Keys are long flag names without the leading dashes. Values are spliced
//! into the argument list ahead of the command-line flags, so flags win.

use std::path::Path;

use clap::Command;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: String, line: usize },
    #[error("{path}:{line}: unknown key `{key}` for `{subcommand}`")]
    UnknownKey {
        path: String,
        line: usize,
        key: String,
        subcommand: String,
    },
    #[error("{path}:{line}: key `{key}` is not allowed in a config file")]
    Reserved {
        path: String,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: `{key}` takes true or false, got `{value}`")]
    NotABool {
        path: String,
        line: usize,
        key: String,
        value: String,
    },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// One parsed `key = value` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str, path: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
            path: path.into(),
            line: i + 1,
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                path: path.into(),
                line: i + 1,
            });
        }
        out.push(Entry {
            line: i + 1,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(out)
}

/// Converts entries into `--key value` tokens, checked against the flags of `subcommand`.
pub fn to_args(
    entries: &[Entry],
    cmd: &Command,
    subcommand: &str,
    path: &str,
) -> Result<Vec<String>, ConfigError> {
    let sub = cmd.find_subcommand(subcommand);
    let mut args = Vec::new();
    for e in entries {
        if e.key == "config" || e.key == "help" || e.key == "version" {
            return Err(ConfigError::Reserved {
                path: path.into(),
                line: e.line,
                key: e.key.clone(),
            });
        }
        let arg = sub
            .into_iter()
            .flat_map(|s| s.get_arguments())
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(e.key.as_str()));
        let Some(arg) = arg else {
            return Err(ConfigError::UnknownKey {
                path: path.into(),
                line: e.line,
                key: e.key.clone(),
                subcommand: subcommand.into(),
            });
        };
        if arg.get_action().takes_values() {
            args.push(format!("--{}", e.key));
            args.push(e.value.clone());
        } else {
            match e.value.as_str() {
                "true" => args.push(format!("--{}", e.key)),
                "false" => {}
                _ => {
                    return Err(ConfigError::NotABool {
                        path: path.into(),
                        line: e.line,
                        key: e.key.clone(),
                        value: e.value.clone(),
                    })
                }
            }
        }
    }
    Ok(args)
}

pub fn read(path: &Path) -> Result<Vec<Entry>, ConfigError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: shown.clone(),
        source,
    })?;
    parse(&text, &shown)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let e = parse("# top\n\niterations = 50  # inline\nhidden=8\n", "c").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(
            (e[0].line, e[0].key.as_str(), e[0].value.as_str()),
            (3, "iterations", "50")
        );
        assert_eq!(e[1].value, "8");
    }

    #[test]
    fn missing_equals_is_a_syntax_error() {
        assert!(matches!(
            parse("iterations 50", "c"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }
}
