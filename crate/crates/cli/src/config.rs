//! `key = value` configuration text with `[section]` headers and `#`
//! comments. The same text, prefixed with `# `, is written as the manifest
//! of every output file, so a produced CSV can be fed back with `--config`.

use std::fmt::Write as _;

use crate::error::CliError;

/// First manifest line of every output file.
pub const MANIFEST_MARKER: &str = "noisy-tunnel manifest";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl Document {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses configuration text. Keys before any header belong to `[run]`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut doc = Self::new();
        let mut section = "run".to_string();
        for (n, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|s| !s.is_empty() && !s.contains(char::is_whitespace))
                    .ok_or_else(|| {
                        CliError::usage(format!(
                            "line {}: malformed section header `{line}`",
                            n + 1
                        ))
                    })?;
                section = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    n + 1
                ))
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(CliError::usage(format!(
                    "line {}: invalid key `{key}`",
                    n + 1
                )));
            }
            if doc.get(&section, key).is_some() {
                return Err(CliError::usage(format!(
                    "line {}: duplicate key `{section}.{key}`",
                    n + 1
                )));
            }
            doc.set(&section, key, value.trim());
        }
        Ok(doc)
    }

    /// Reads a config file, or the manifest block at the top of a CSV
    /// written by this tool.
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&extract_manifest(&text).unwrap_or(text))
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(s, _)| s == section)
            .and_then(|(_, kv)| kv.iter().find(|(k, _)| k == key))
            .map(|(_, v)| v.as_str())
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        let idx = match self.sections.iter().position(|(s, _)| s == section) {
            Some(i) => i,
            None => {
                self.sections.push((section.to_string(), Vec::new()));
                self.sections.len() - 1
            }
        };
        let entries = &mut self.sections[idx].1;
        match entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value.to_string(),
            None => entries.push((key.to_string(), value.to_string())),
        }
    }

    pub fn remove(&mut self, section: &str, key: &str) {
        if let Some((_, kv)) = self.sections.iter_mut().find(|(s, _)| s == section) {
            kv.retain(|(k, _)| k != key);
        }
    }

    pub fn sections(&self) -> impl Iterator<Item = (&str, &[(String, String)])> {
        self.sections
            .iter()
            .map(|(s, kv)| (s.as_str(), kv.as_slice()))
    }

    pub fn keys(&self, section: &str) -> Vec<&str> {
        self.sections
            .iter()
            .filter(|(s, _)| s == section)
            .flat_map(|(_, kv)| kv.iter().map(|(k, _)| k.as_str()))
            .collect()
    }

    /// Plain configuration text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (section, kv) in self.sections() {
            if kv.is_empty() {
                continue;
            }
            let _ = writeln!(out, "[{section}]");
            for (k, v) in kv {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    /// Manifest block: the rendered text with each line prefixed by `# `.
    pub fn render_manifest(&self) -> String {
        let mut out = format!("# {MANIFEST_MARKER}\n");
        for line in self.render().lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

/// The leading `# ` block of a file that starts with the manifest marker,
/// with the prefixes removed.
pub fn extract_manifest(text: &str) -> Option<String> {
    let mut lines = text.lines();
    if lines.next()?.strip_prefix("# ")? != MANIFEST_MARKER {
        return None;
    }
    let mut out = String::new();
    for line in lines.map_while(|l| l.strip_prefix("# ")) {
        out.push_str(line);
        out.push('\n');
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let doc = Document::parse(
            "seed = 3 # trailing\n\n[params]\nkappa= 0.2\n[sweep]\nK = 0.1 10 21 log\n",
        )
        .unwrap();
        assert_eq!(doc.get("run", "seed"), Some("3"));
        assert_eq!(doc.get("params", "kappa"), Some("0.2"));
        assert_eq!(doc.get("sweep", "K"), Some("0.1 10 21 log"));
        assert_eq!(doc.get("sweep", "kappa"), None);
    }

    #[test]
    fn rejects_malformed_lines() {
        for text in [
            "[params\nk = 1",
            "kappa 0.1",
            "[params]\na = 1\na = 2",
            "two words = 1",
            "[]",
        ] {
            assert!(Document::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn manifest_round_trip() {
        let mut doc = Document::new();
        doc.set("meta", "command", "evolve");
        doc.set("params", "kappa", "0.1");
        let csv = format!("{}t,Px\n0,1\n", doc.render_manifest());
        let back = Document::parse(&extract_manifest(&csv).unwrap()).unwrap();
        assert_eq!(back, doc);
        assert!(extract_manifest("t,Px\n").is_none());
    }
}
