//! Flat `key = value` configuration files. Keys are the long flag names;
//! a flag given on the command line wins over the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Default)]
pub struct ConfigFile {
    path: Option<PathBuf>,
    /// key -> (line number, raw value)
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        cfg.path = Some(path.to_owned());
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            let key = key.trim().to_owned();
            if entries.insert(key.clone(), (i + 1, value.trim().to_owned())).is_some() {
                bail!("line {}: key `{key}` given twice", i + 1);
            }
        }
        Ok(ConfigFile { path: None, entries })
    }

    fn origin(&self) -> String {
        self.path
            .as_ref()
            .map_or_else(|| "config".to_owned(), |p| p.display().to_string())
    }

    /// Rejects any key outside `allowed`.
    pub fn check_keys(&self, allowed: &[&[&str]]) -> Result<()> {
        for (key, (line, _)) in &self.entries {
            if !allowed.iter().any(|group| group.contains(&key.as_str())) {
                bail!("{}:{line}: unknown key `{key}`", self.origin());
            }
        }
        Ok(())
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("{}:{line}: bad value for `{key}`: {e}", self.origin())),
        }
    }

    /// The flag if given, else the file value.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// Boolean switch: a set flag forces `true`, otherwise the file decides.
    pub fn switch(&self, flag: bool, key: &str) -> Result<Option<bool>> {
        self.pick(flag.then_some(true), key)
    }
}

/// Comma-separated list.
pub fn parse_list<T>(s: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|e| anyhow!("`{p}`: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let cfg = ConfigFile::parse("# comment\nn = 100\nq=0.25  # trailing\n\n").unwrap();
        assert_eq!(cfg.get::<usize>("n").unwrap(), Some(100));
        assert_eq!(cfg.pick(Some(0.5), "q").unwrap(), Some(0.5));
        assert_eq!(cfg.pick::<f64>(None, "q").unwrap(), Some(0.25));
        assert_eq!(cfg.get::<f64>("alpha").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let cfg = ConfigFile::parse("n = 1\nbogus = 2\n").unwrap();
        let err = cfg.check_keys(&[&["n"]]).unwrap_err().to_string();
        assert!(err.contains("bogus") && err.contains(":2"), "{err}");
        assert!(ConfigFile::parse("just words").is_err());
        assert!(ConfigFile::parse("a = 1\na = 2").is_err());
        let cfg = ConfigFile::parse("n = lots").unwrap();
        assert!(cfg.get::<usize>("n").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<u32>("1, 2,3,").unwrap(), vec![1, 2, 3]);
        assert!(parse_list::<u32>("1,x").is_err());
    }
}
