//! Flat key–value configuration. Keys are the long flag names without dashes
//! (`T`, `kappa`, `rho-max`, ...); a flag on the command line always wins.

use std::path::Path;

use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Default)]
pub struct Settings {
    table: Table,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let table: Table =
            text.parse().map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        if let Some((k, _)) = table.iter().find(|(_, v)| matches!(v, Value::Table(_) | Value::Array(_))) {
            return Err(CliError::usage(format!("config key `{k}`: only flat scalar values are allowed")));
        }
        Ok(Self { table })
    }

    fn lookup(&self, key: &str) -> Option<&Value> {
        self.table.get(key)
    }

    pub fn f64(&self, key: &str, flag: Option<f64>, default: Option<f64>) -> Result<f64, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.lookup(key) {
            Some(Value::Float(v)) => Ok(*v),
            Some(Value::Integer(v)) => Ok(*v as f64),
            Some(other) => Err(CliError::usage(format!("config key `{key}`: expected a number, got {other}"))),
            None => default.ok_or_else(|| CliError::usage(format!("missing required option --{key}"))),
        }
    }

    pub fn usize(&self, key: &str, flag: Option<usize>, default: Option<usize>) -> Result<usize, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.lookup(key) {
            Some(Value::Integer(v)) if *v >= 0 => Ok(*v as usize),
            Some(other) => Err(CliError::usage(format!("config key `{key}`: expected a nonnegative integer, got {other}"))),
            None => default.ok_or_else(|| CliError::usage(format!("missing required option --{key}"))),
        }
    }

    pub fn flag(&self, key: &str, flag: bool) -> Result<bool, CliError> {
        if flag {
            return Ok(true);
        }
        match self.lookup(key) {
            Some(Value::Boolean(b)) => Ok(*b),
            Some(other) => Err(CliError::usage(format!("config key `{key}`: expected a boolean, got {other}"))),
            None => Ok(false),
        }
    }

    pub fn string(&self, key: &str, flag: Option<String>) -> Result<Option<String>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.lookup(key) {
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(CliError::usage(format!("config key `{key}`: expected a string, got {other}"))),
            None => Ok(None),
        }
    }
}
