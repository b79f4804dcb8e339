//! Flat `key = value` configuration files with `#` comments.
//!
//! Used for dataset manifests, attention weight bundles, CLI config files
//! and the `run.meta` replay record.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Parsed `key = value` pairs plus the directory relative paths resolve to.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl KeyValues {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let location = format!("{origin}:{}", lineno + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(&location, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(&location, "empty key"));
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::parse(&location, format!("duplicate key `{key}`")));
            }
        }
        Ok(Self {
            entries,
            base_dir: PathBuf::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut kv = Self::parse(&text, &path.display().to_string())?;
        kv.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(kv)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| {
            Error::parse(
                self.base_dir.display().to_string(),
                format!("missing key `{key}`"),
            )
        })
    }

    /// Resolves the value of `key` as a path relative to the file's directory.
    pub fn path(&self, key: &str) -> Result<PathBuf> {
        let value = Path::new(self.require(key)?);
        Ok(if value.is_absolute() {
            value.to_path_buf()
        } else {
            self.base_dir.join(value)
        })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Renders pairs as `key = value` lines in the given order.
pub fn render<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let kv = KeyValues::parse("# header\n a = 1 \nb=two # trailing\n\n", "t").unwrap();
        assert_eq!(kv.get("a"), Some("1"));
        assert_eq!(kv.get("b"), Some("two"));
        assert_eq!(kv.keys().count(), 2);
    }

    #[test]
    fn rejects_missing_equals_and_duplicates() {
        assert!(KeyValues::parse("novalue\n", "t").is_err());
        assert!(KeyValues::parse("a = 1\na = 2\n", "t").is_err());
    }

    #[test]
    fn render_then_parse() {
        let text = render([("x", "1".to_string()), ("y", "a b".to_string())]);
        let kv = KeyValues::parse(&text, "t").unwrap();
        assert_eq!(kv.get("y"), Some("a b"));
    }
}
