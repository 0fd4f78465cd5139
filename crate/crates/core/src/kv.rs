//! Flat `key = value` text files: one numeric entry per line, `#` comments.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub fn parse(text: &str, origin: &str) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: origin.to_string(),
            line: idx + 1,
            msg,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(err("empty key".into()));
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| err(format!("`{}` is not a number", value.trim())))?;
        if map.insert(key.to_string(), value).is_some() {
            return Err(err(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}
