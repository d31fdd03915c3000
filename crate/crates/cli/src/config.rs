//! Run configuration: `key = value` lines grouped under `[section]` headers.
//!
//! ```text
//! # comment
//! [field]
//! kind = power
//! alpha = 0.5
//!
//! [experiment]
//! z = -1, 1+0.5i
//! ```
//!
//! Lists are comma separated, complex numbers are written `re+imi`, atoms
//! `x:w`. Every key a command does not read is reported as unknown.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use planar_flow::Complex64;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SECTIONS: [&str; 4] = ["field", "driver", "experiment", "output"];

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, BTreeMap<String, String>>,
    used: RefCell<BTreeSet<(String, String)>>,
}

fn bad(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {reason}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::Config(format!("line {}: unterminated section header", lineno + 1)))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(CliError::Config(format!(
                        "line {}: unknown section `[{name}]` (expected one of {})",
                        lineno + 1,
                        SECTIONS.join(", ")
                    )));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected `key = value`", lineno + 1)));
            };
            let Some(sec) = &section else {
                return Err(CliError::Config(format!(
                    "line {}: `{}` appears before any section header",
                    lineno + 1,
                    key.trim()
                )));
            };
            cfg.insert(sec, key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    fn insert(&mut self, section: &str, key: &str, value: &str) -> Result<(), CliError> {
        if key.is_empty() {
            return Err(CliError::Config(format!("empty key in section `[{section}]`")));
        }
        self.entries
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not `section.key=value`")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| CliError::Config(format!("override `{path}` needs a section, as in `field.kind`")))?;
        if !SECTIONS.contains(&section) {
            return Err(CliError::Config(format!(
                "override `{path}`: unknown section `{section}`"
            )));
        }
        self.insert(section, key.trim(), value.trim())
    }

    pub fn has(&self, section: &str, key: &str) -> bool {
        self.entries.get(section).is_some_and(|s| s.contains_key(key))
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        let v = self.entries.get(section)?.get(key)?;
        self.used.borrow_mut().insert((section.to_string(), key.to_string()));
        Some(v.as_str())
    }

    fn required(&self, section: &str, key: &str) -> Result<&str, CliError> {
        self.raw(section, key)
            .ok_or_else(|| bad(&format!("{section}.{key}"), "missing required key"))
    }

    pub fn str_or<'a>(&'a self, section: &str, key: &str, default: &'a str) -> &'a str {
        self.raw(section, key).unwrap_or(default)
    }

    pub fn string(&self, section: &str, key: &str) -> Result<String, CliError> {
        self.required(section, key).map(str::to_string)
    }

    pub fn f64(&self, section: &str, key: &str) -> Result<f64, CliError> {
        let v = self.required(section, key)?;
        parse_f64(v).map_err(|e| bad(&format!("{section}.{key}"), e))
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, CliError> {
        if self.has(section, key) {
            self.f64(section, key)
        } else {
            Ok(default)
        }
    }

    pub fn opt_f64(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        if self.has(section, key) {
            self.f64(section, key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn u64(&self, section: &str, key: &str) -> Result<u64, CliError> {
        let v = self.required(section, key)?;
        v.parse::<u64>().map_err(|_| {
            bad(
                &format!("{section}.{key}"),
                format!("expected a non-negative integer, got `{v}`"),
            )
        })
    }

    pub fn u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64, CliError> {
        if self.has(section, key) {
            self.u64(section, key)
        } else {
            Ok(default)
        }
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.u64_or(section, key, default as u64)? as usize)
    }

    pub fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool, CliError> {
        match self.raw(section, key) {
            None => Ok(default),
            Some("true" | "yes" | "on" | "1") => Ok(true),
            Some("false" | "no" | "off" | "0") => Ok(false),
            Some(v) => Err(bad(
                &format!("{section}.{key}"),
                format!("expected true or false, got `{v}`"),
            )),
        }
    }

    pub fn complex(&self, section: &str, key: &str) -> Result<Complex64, CliError> {
        let v = self.required(section, key)?;
        parse_complex(v).map_err(|e| bad(&format!("{section}.{key}"), e))
    }

    pub fn complex_list(&self, section: &str, key: &str) -> Result<Vec<Complex64>, CliError> {
        let v = self.required(section, key)?;
        split_list(v)
            .map(|item| parse_complex(item).map_err(|e| bad(&format!("{section}.{key}"), e)))
            .collect()
    }

    pub fn f64_list(&self, section: &str, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.required(section, key)?;
        split_list(v)
            .map(|item| parse_f64(item).map_err(|e| bad(&format!("{section}.{key}"), e)))
            .collect()
    }

    pub fn atoms(&self, section: &str, key: &str) -> Result<Vec<(f64, f64)>, CliError> {
        let Some(v) = self.raw(section, key) else {
            return Ok(Vec::new());
        };
        split_list(v)
            .map(|item| {
                let (x, w) = item
                    .split_once(':')
                    .ok_or_else(|| bad(&format!("{section}.{key}"), format!("atom `{item}` is not `x:w`")))?;
                let x = parse_f64(x.trim()).map_err(|e| bad(&format!("{section}.{key}"), e))?;
                let w = parse_f64(w.trim()).map_err(|e| bad(&format!("{section}.{key}"), e))?;
                Ok((x, w))
            })
            .collect()
    }

    /// Fails on the first key no getter has asked for.
    pub fn check_unused(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        for (section, keys) in &self.entries {
            for key in keys.keys() {
                if !used.contains(&(section.clone(), key.clone())) {
                    return Err(bad(&format!("{section}.{key}"), "unknown key for this command"));
                }
            }
        }
        Ok(())
    }

    /// One `section.key = value` line per entry, sorted; `[output]` is left
    /// out since it does not change any computed number.
    pub fn canonical(&self, command: &str) -> String {
        let mut out = format!("command = {command}\n");
        for (section, keys) in &self.entries {
            if section == "output" {
                continue;
            }
            for (k, v) in keys {
                let _ = writeln!(out, "{section}.{k} = {v}");
            }
        }
        out
    }

    pub fn hash(&self, command: &str) -> String {
        hex(&Sha256::digest(self.canonical(command).as_bytes()))
    }

    pub fn entries(&self) -> &BTreeMap<String, BTreeMap<String, String>> {
        &self.entries
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

pub fn parse_f64(s: &str) -> Result<f64, String> {
    let v = match s {
        "inf" | "+inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => s.parse::<f64>().map_err(|_| format!("expected a number, got `{s}`"))?,
    };
    if v.is_nan() {
        return Err("NaN is not allowed".into());
    }
    Ok(v)
}

/// `3`, `-0.5`, `2i`, `-i`, `1+2i`, `1e-3-4.5e2i`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || format!("expected a complex number like `1+2i`, got `{s}`");
    if t.is_empty() {
        return Err(err());
    }
    let Some(body) = t.strip_suffix('i') else {
        return parse_f64(&t).map(|re| Complex64::new(re, 0.0)).map_err(|_| err());
    };
    // split at the last sign that is not the leading one or part of an exponent
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    let imag = |p: &str| -> Result<f64, String> {
        match p {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => parse_f64(p).map_err(|_| err()),
        }
    };
    match split {
        Some(k) => Ok(Complex64::new(
            parse_f64(&body[..k]).map_err(|_| err())?,
            imag(&body[k..])?,
        )),
        None => Ok(Complex64::new(0.0, imag(body)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        let c = |re, im| Complex64::new(re, im);
        assert_eq!(parse_complex("1+2i").unwrap(), c(1.0, 2.0));
        assert_eq!(parse_complex("-0.5").unwrap(), c(-0.5, 0.0));
        assert_eq!(parse_complex("i").unwrap(), c(0.0, 1.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("0.25i").unwrap(), c(0.0, 0.25));
        assert_eq!(parse_complex("1e-3-4.5e2i").unwrap(), c(1e-3, -450.0));
        assert_eq!(parse_complex("2 - i").unwrap(), c(2.0, -1.0));
        assert_eq!(parse_complex("1e+2+1e-2i").unwrap(), c(100.0, 0.01));
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("1+2j").is_err());
        assert!(parse_complex("").is_err());
    }

    #[test]
    fn sections_and_overrides() {
        let mut cfg =
            RunConfig::parse("[field]\nkind = power # trailing\nalpha=0.5\n\n[experiment]\nz = 1, 2i\n").unwrap();
        cfg.set("field.alpha=0.25").unwrap();
        assert_eq!(cfg.f64("field", "alpha").unwrap(), 0.25);
        assert_eq!(cfg.complex_list("experiment", "z").unwrap().len(), 2);
        assert!(cfg.check_unused().is_err());
        assert_eq!(cfg.string("field", "kind").unwrap(), "power");
        cfg.check_unused().unwrap();
    }

    #[test]
    fn errors_name_the_key() {
        let cfg = RunConfig::parse("[field]\nalpha = half\n").unwrap();
        let msg = cfg.f64("field", "alpha").unwrap_err().to_string();
        assert!(msg.contains("field.alpha"), "{msg}");
        let msg = cfg.f64("field", "kappa").unwrap_err().to_string();
        assert!(msg.contains("field.kappa") && msg.contains("missing"), "{msg}");
        assert!(RunConfig::parse("alpha = 1\n").is_err());
        assert!(RunConfig::parse("[fields]\n").is_err());
        assert!(RunConfig::parse("[field]\nalpha\n").is_err());
    }

    #[test]
    fn hash_ignores_output_and_order() {
        let a = RunConfig::parse("[field]\nkind = power\nalpha = 0.5\n[output]\ndir = a\n").unwrap();
        let b = RunConfig::parse("[output]\ndir = b\n[field]\nalpha = 0.5\nkind = power\n").unwrap();
        assert_eq!(a.hash("boundary"), b.hash("boundary"));
        assert_ne!(a.hash("boundary"), a.hash("simulate"));
        assert_eq!(a.hash("x").len(), 64);
    }

    #[test]
    fn atom_lists() {
        let cfg = RunConfig::parse("[field]\natoms = -1:0.5, 2:1\n").unwrap();
        assert_eq!(cfg.atoms("field", "atoms").unwrap(), vec![(-1.0, 0.5), (2.0, 1.0)]);
        let cfg = RunConfig::parse("[field]\natoms = -1\n").unwrap();
        assert!(cfg.atoms("field", "atoms").is_err());
    }
}
