//! `key = value` run configuration shared by all subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Every key the config file may set. Flags of the same name override them.
pub const KEYS: &[&str] = &[
    "agents",
    "backend",
    "budget",
    "endpoint",
    "fixtures",
    "icp_iters",
    "icp_tol",
    "jobs",
    "match_rule",
    "max_inflight",
    "max_parts",
    "max_retries",
    "model",
    "modes",
    "pipeline",
    "proposal_mode",
    "resolution",
    "rig",
    "samples",
    "seed",
    "squared_chamfer",
    "strict",
    "temperature",
    "top_p",
    "views",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(format!("line {}: unknown key {key:?}", n + 1));
            }
            let value = value.trim().trim_matches('"');
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(format!("line {}: duplicate key {key:?}", n + 1));
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(KEYS.contains(&key), "unregistered key {key}");
        self.values.get(key).map(String::as_str)
    }

    /// Typed value of `key`, if set.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key).map(|v| v.parse::<T>().map_err(|e| format!("config key {key:?}: {e}"))).transpose()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    /// Flag value if given, else file value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }
}

/// `WxH`, e.g. `384x384`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution(pub u32, pub u32);

impl FromStr for Resolution {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s.trim().split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<u32>().map_err(|_| format!("bad resolution {s:?}"));
        let r = Resolution(parse(w)?, parse(h)?);
        if r.0 == 0 || r.1 == 0 {
            return Err(format!("resolution must be positive, got {s:?}"));
        }
        Ok(r)
    }
}
