//! Plain-text `key=value` configuration files. Blank lines and `#` comments
//! are skipped; later duplicates override earlier ones. Callers layer
//! command-line flags on top, with flags winning.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Parses configuration text into an ordered key→value map.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::format(format!("config line {}: expected key=value", line_no + 1))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::format(format!(
                "config line {}: empty key",
                line_no + 1
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_values_and_comments() {
        let map = parse_config("# build settings\nrule = axis\n\nblocks=2\nlambda=0.1\n").unwrap();
        assert_eq!(map.len(), 3);
        assert_eq!(map["rule"], "axis");
        assert_eq!(map["blocks"], "2");
        assert_eq!(map["lambda"], "0.1");
    }

    #[test]
    fn later_duplicates_win() {
        let map = parse_config("seed=1\nseed=2\n").unwrap();
        assert_eq!(map["seed"], "2");
    }

    #[test]
    fn values_may_be_empty_and_contain_equals() {
        let map = parse_config("flag=\npath=a=b\n").unwrap();
        assert_eq!(map["flag"], "");
        assert_eq!(map["path"], "a=b");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_config("just a line\n").is_err());
        assert!(parse_config("=value\n").is_err());
        let err = parse_config("ok=1\nbroken\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn empty_input_gives_empty_map() {
        assert!(parse_config("").unwrap().is_empty());
        assert!(parse_config("\n# only comments\n\n").unwrap().is_empty());
    }
}
