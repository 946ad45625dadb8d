//! Flat `section.key = value` configuration files and flag/file/default resolution.
//!
//! ```text
//! # comment
//! common.seed = 7
//! lyapunov.t = 5000
//! ```
//!
//! Keys under `common.` apply to every subcommand; keys under the running
//! subcommand's section override them. Keys in other sections are ignored, so
//! one file can hold settings for several subcommands.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected section.key = value", lineno + 1))?;
            let k = k.trim();
            if !k.contains('.') || k.starts_with('.') || k.ends_with('.') {
                bail!("config line {}: key '{k}' must look like section.key", lineno + 1);
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }
}

/// Resolves each setting as flag > file (section, then common) > default and
/// records the resolved value for the output header.
pub struct Resolver<'a> {
    file: &'a ConfigFile,
    section: &'a str,
    used: RefCell<BTreeSet<String>>,
    resolved: RefCell<Vec<(String, String)>>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a ConfigFile, section: &'a str) -> Self {
        Self {
            file,
            section,
            used: RefCell::new(BTreeSet::new()),
            resolved: RefCell::new(Vec::new()),
        }
    }

    fn lookup(&self, key: &str) -> Option<(String, &str)> {
        for full in [format!("{}.{key}", self.section), format!("common.{key}")] {
            if let Some(v) = self.file.entries.get(&full) {
                self.used.borrow_mut().insert(full.clone());
                return Some((full, v));
            }
        }
        None
    }

    pub fn get<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.record(key, &v);
        Ok(v)
    }

    /// Like [`get`](Self::get) without a default; records only present values.
    pub fn opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => {
                // A flag overrides the file; the file key is still a known setting.
                let _ = self.lookup(key);
                Some(v)
            }
            None => match self.lookup(key) {
                Some((full, raw)) => Some(raw.parse::<T>().map_err(|e| anyhow!("config key {full}: {e}"))?),
                None => None,
            },
        };
        Ok(v)
    }

    pub fn record(&self, key: &str, value: &dyn Display) {
        let mut r = self.resolved.borrow_mut();
        let value = value.to_string();
        match r.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => r.push((key.to_string(), value)),
        }
    }

    pub fn resolved(&self) -> Vec<(String, String)> {
        self.resolved.borrow().clone()
    }

    /// Error on keys in this subcommand's section that no setting consumed,
    /// and on `common.` keys that no subcommand knows.
    pub fn finish(&self, known_common: &[&str]) -> Result<()> {
        let used = self.used.borrow();
        for k in self.file.entries.keys() {
            let (sec, name) = k.split_once('.').expect("validated on parse");
            let unknown = (sec == self.section && !used.contains(k))
                || (sec == "common" && !used.contains(k) && !known_common.contains(&name));
            if unknown {
                bail!("unknown config key '{k}'");
            }
        }
        Ok(())
    }
}

/// Comma-separated list or inclusive `start:stop:step` range.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            bail!("range '{s}' must be start:stop:step");
        }
        let p = |x: &str| x.trim().parse::<f64>().map_err(|e| anyhow!("bad number '{x}' in '{s}': {e}"));
        let (a, b, h) = (p(parts[0])?, p(parts[1])?, p(parts[2])?);
        if !(h > 0.0) || b < a {
            bail!("range '{s}' needs step > 0 and stop >= start");
        }
        let count = ((b - a) / h + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|k| a + k as f64 * h).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| anyhow!("bad number '{x}' in '{s}': {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flag_file_default() {
        let f = ConfigFile::parse("common.seed = 5\nqinf.t = 100\n# c\nlyapunov.t = 7\n").unwrap();
        let r = Resolver::new(&f, "qinf");
        assert_eq!(r.get("t", Some(3usize), 1).unwrap(), 3);
        assert_eq!(r.get("seed", None, 0u64).unwrap(), 5);
        assert_eq!(r.get("replicas", None, 10usize).unwrap(), 10);
        let r2 = Resolver::new(&f, "qinf");
        assert_eq!(r2.get("t", None, 1usize).unwrap(), 100);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let f = ConfigFile::parse("qinf.tt = 1").unwrap();
        let r = Resolver::new(&f, "qinf");
        r.get("t", None, 1usize).unwrap();
        assert!(r.finish(&[]).is_err());
        let f = ConfigFile::parse("common.bogus = 1\nother.x = 2").unwrap();
        let r = Resolver::new(&f, "qinf");
        assert!(r.finish(&["seed"]).is_err());
        let f = ConfigFile::parse("other.x = 2").unwrap();
        assert!(Resolver::new(&f, "qinf").finish(&[]).is_ok());
        assert!(ConfigFile::parse("novalue").is_err());
        assert!(ConfigFile::parse("nosection = 1").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1, 2,3.5").unwrap(), vec![1.0, 2.0, 3.5]);
        let r = parse_grid("0:1:0.25").unwrap();
        assert_eq!(r.len(), 5);
        assert!((r[4] - 1.0).abs() < 1e-12);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("").unwrap().is_empty());
    }
}
