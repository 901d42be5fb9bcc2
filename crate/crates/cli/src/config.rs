//! Flat INI configuration. Keys mirror long flag names. Keys outside any
//! section apply to every command; a `[command]` section overrides them.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::{Failure, Kind};

pub const SEED_ENV: &str = "BLOCKPRESS_SEED";

#[derive(Debug, Default)]
pub struct FileConfig {
    origin: Option<PathBuf>,
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path, command: &str) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::new(
                Kind::Io,
                format!("cannot read config {}: {e}", path.display()),
            )
        })?;
        Self::parse(&text, command, path)
    }

    pub fn parse(text: &str, command: &str, origin: &Path) -> Result<Self, Failure> {
        let ini = Ini::load_from_str(text)
            .map_err(|e| Failure::new(Kind::Usage, format!("config {}: {e}", origin.display())))?;
        let mut values = HashMap::new();
        for (k, v) in ini.general_section().iter() {
            values.insert(k.to_string(), v.to_string());
        }
        if let Some(section) = ini.section(Some(command)) {
            for (k, v) in section.iter() {
                values.insert(k.to_string(), v.to_string());
            }
        }
        Ok(FileConfig {
            origin: Some(origin.to_path_buf()),
            values,
        })
    }

    /// Flag value if given, else the file value, else `default`.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.lookup(flag, key)?.unwrap_or(default))
    }

    pub fn lookup<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.trim().parse().map(Some).map_err(|e| {
                let origin = self.origin.as_deref().unwrap_or(Path::new("config"));
                Failure::new(
                    Kind::Usage,
                    format!("{}: bad value {raw:?} for {key}: {e}", origin.display()),
                )
            }),
        }
    }

    /// Seed from the flag, the file, then the environment; 0 otherwise.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64, Failure> {
        self.seed_with_env(flag, std::env::var(SEED_ENV).ok())
    }

    fn seed_with_env(&self, flag: Option<u64>, env: Option<String>) -> Result<u64, Failure> {
        if let Some(s) = self.lookup(flag, "seed")? {
            return Ok(s);
        }
        match env {
            Some(raw) => raw.trim().parse().map_err(|e| {
                Failure::new(
                    Kind::Usage,
                    format!("{SEED_ENV}={raw:?} is not a seed: {e}"),
                )
            }),
            None => Ok(0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_overrides_general_and_flag_overrides_both() {
        let text = "trials = 40\nseed = 3\n[sweep]\ntrials = 50\n";
        let c = FileConfig::parse(text, "sweep", Path::new("t.ini")).unwrap();
        assert_eq!(c.resolve(None, "trials", 100u32).unwrap(), 50);
        assert_eq!(c.resolve(Some(60), "trials", 100u32).unwrap(), 60);
        assert_eq!(c.resolve(None, "blocks", 2000u32).unwrap(), 2000);
        assert_eq!(c.seed_with_env(None, Some("9".into())).unwrap(), 3);
        assert_eq!(c.seed_with_env(Some(4), Some("9".into())).unwrap(), 4);
        let other = FileConfig::parse(text, "curve", Path::new("t.ini")).unwrap();
        assert_eq!(other.resolve(None, "trials", 100u32).unwrap(), 40);
    }

    #[test]
    fn env_seed_applies_only_without_flag_or_file() {
        let c = FileConfig::default();
        assert_eq!(c.seed_with_env(None, None).unwrap(), 0);
        assert_eq!(c.seed_with_env(None, Some(" 12 ".into())).unwrap(), 12);
        assert_eq!(
            c.seed_with_env(None, Some("x".into())).unwrap_err().kind,
            Kind::Usage
        );
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let c = FileConfig::parse("trials = many\n", "sweep", Path::new("t.ini")).unwrap();
        let err = c.resolve(None, "trials", 1u32).unwrap_err();
        assert_eq!(err.kind, Kind::Usage);
        assert!(err.message.contains("trials"));
    }
}
