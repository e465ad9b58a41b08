use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Parses `key = value` lines. `#` starts a comment; keys are normalized to
/// dashes so `window_sizes` and `window-sizes` are the same key.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("config line {} is not `key = value`", n + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(Error::config(format!(
                "config line {} has an empty key",
                n + 1
            )));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_normalizes() {
        let kv = parse_key_values("# run\nparties = 4\nwindow_sizes=60,80 # two\n\naudit = true\n")
            .unwrap();
        assert_eq!(kv["parties"], "4");
        assert_eq!(kv["window-sizes"], "60,80");
        assert_eq!(kv["audit"], "true");
    }

    #[test]
    fn rejects_bare_words() {
        assert!(parse_key_values("parties 4").is_err());
    }
}
