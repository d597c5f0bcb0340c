//! Flat sectioned `key = value` text. Keys are addressed as `section.key`;
//! keys before the first section header live in the empty section and are
//! addressed bare.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValueConfig {
    entries: BTreeMap<String, String>,
}

impl KeyValueConfig {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ParseError {
                    line: i + 1,
                    message: format!("unterminated section header `{line}`"),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ParseError {
                line: i + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ParseError {
                    line: i + 1,
                    message: "empty key".into(),
                });
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            entries.insert(full, value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Keys under `prefix.`, with the prefix stripped.
    pub fn section(&self, prefix: &str) -> impl Iterator<Item = (&str, &str)> {
        let dotted = format!("{prefix}.");
        self.entries.iter().filter_map(move |(k, v)| {
            k.strip_prefix(dotted.as_str())
                .map(|rest| (rest, v.as_str()))
        })
    }

    /// Canonical serialisation: sorted `key = value` lines, no sections.
    pub fn to_canonical_string(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        // `;` also separates matrix rows, so only treat it as a comment at line start
        Some(0) => "",
        Some(pos) if line.as_bytes()[pos] == b'#' => &line[..pos],
        _ => line,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let cfg = KeyValueConfig::parse(
            "kind = asymptotics\n# comment\n[circle]\nN = 256 # trailing\nmatrix = 1 0; 0 1\n; full-line\n",
        )
        .unwrap();
        assert_eq!(cfg.get("kind"), Some("asymptotics"));
        assert_eq!(cfg.get("circle.N"), Some("256"));
        assert_eq!(cfg.get("circle.matrix"), Some("1 0; 0 1"));
        assert_eq!(cfg.section("circle").count(), 2);
    }

    #[test]
    fn malformed_lines() {
        assert_eq!(KeyValueConfig::parse("[open\n").unwrap_err().line, 1);
        assert_eq!(KeyValueConfig::parse("a = 1\njunk\n").unwrap_err().line, 2);
    }
}
