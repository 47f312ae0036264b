//! INI-style scenario files.
//!
//! A file holds a `[General]` section and any number of `[Config Name]`
//! sections. Each section is an ordered list of `pattern = value` entries.
//! A named config may `extends = A, B` other configs and be marked
//! `abstract = true` to forbid running it directly.
//!
//! Lookups for a scenario search its own entries, then each base in
//! declaration order (depth first, each config at most once), then
//! `[General]`. The first entry whose pattern matches wins, so specific
//! patterns must come before general ones.

pub mod pattern;
pub mod value;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use thiserror::Error;

use crate::rng::RngStream;
pub use pattern::{NodePath, PathError, Pattern};
pub use value::{parse_value, sample, Distribution, ParamValue, SampleError};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("cyclic extends: {}", .0.join(" -> "))]
    CyclicExtends(Vec<String>),
    #[error("line {line}: configuration `{name}` is defined twice")]
    DuplicateConfigName { name: String, line: usize },
    #[error("configuration `{config}` extends unknown configuration `{base}`")]
    UnknownBase { config: String, base: String },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("missing parameter `{0}`")]
    MissingParameter(String),
    #[error("parameter `{path}` must be {expected}, got {found}")]
    TypeMismatch { path: String, expected: &'static str, found: String },
    #[error("parameter `{path}`: {source}")]
    Sample { path: String, source: SampleError },
    #[error("parameter `{path}`: {reason}")]
    Invalid { path: String, reason: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl ConfigError {
    /// Source line, for errors tied to one.
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Syntax { line, .. } | ConfigError::DuplicateConfigName { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub pattern: Pattern,
    pub value: ParamValue,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NamedConfig {
    pub name: String,
    pub extends: Vec<String>,
    pub is_abstract: bool,
    pub description: Option<String>,
    pub entries: Vec<Entry>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioConfig {
    pub general: Vec<Entry>,
    /// Named configs in declaration order.
    pub named: Vec<NamedConfig>,
}

fn syntax(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Syntax { line, message: message.into() }
}

/// Drops a trailing `#` or `//` comment that is not inside quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'"' => quoted = !quoted,
            b'#' if !quoted => return &line[..i],
            b'/' if !quoted && bytes.get(i + 1) == Some(&b'/') => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_bool(line: usize, key: &str, v: &ParamValue) -> Result<bool, ConfigError> {
    match v {
        ParamValue::Bool(b) => Ok(*b),
        other => Err(syntax(line, format!("`{key}` must be true or false, got {other}"))),
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        // None while in [General].
        let mut current: Option<usize> = None;
        let mut seen: HashSet<String> = HashSet::new();
        let lines: Vec<&str> = text.lines().collect();
        let mut i = 0;
        while i < lines.len() {
            let lineno = i + 1;
            let mut logical = strip_comment(lines[i]).trim().to_string();
            i += 1;
            // A quoted value may continue over following lines.
            while logical.matches('"').count() % 2 == 1 {
                let Some(next) = lines.get(i) else {
                    return Err(syntax(lineno, "unterminated quoted string"));
                };
                logical.push('\n');
                logical.push_str(next);
                i += 1;
                if logical.matches('"').count() % 2 == 0 {
                    let end = logical.rfind('"').expect("closing quote");
                    let tail = strip_comment(&logical[end + 1..]).trim_end().len();
                    logical.truncate(end + 1 + tail);
                }
            }
            let line = logical.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('[') {
                let header = header.strip_suffix(']').ok_or_else(|| syntax(lineno, "unterminated section header"))?;
                let header = header.trim();
                if header == "General" {
                    current = None;
                    continue;
                }
                let name = header
                    .strip_prefix("Config ")
                    .map(str::trim)
                    .filter(|n| !n.is_empty() && !n.contains(char::is_whitespace))
                    .ok_or_else(|| syntax(lineno, format!("bad section header `[{header}]`")))?;
                if !seen.insert(name.to_string()) {
                    return Err(ConfigError::DuplicateConfigName { name: name.to_string(), line: lineno });
                }
                cfg.named.push(NamedConfig { name: name.to_string(), line: lineno, ..Default::default() });
                current = Some(cfg.named.len() - 1);
                continue;
            }
            let (key, raw) = line.split_once('=').ok_or_else(|| syntax(lineno, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = parse_value(raw).map_err(|m| syntax(lineno, m))?;
            match (current, key) {
                (Some(c), "extends") => {
                    let text = match &value {
                        ParamValue::Str(s) => s.clone(),
                        other => other.to_string(),
                    };
                    cfg.named[c].extends = text
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                }
                (Some(c), "abstract") => cfg.named[c].is_abstract = parse_bool(lineno, key, &value)?,
                (Some(c), "description") => {
                    cfg.named[c].description = Some(match value {
                        ParamValue::Str(s) => s,
                        other => other.to_string(),
                    })
                }
                (None, "extends" | "abstract") => {
                    return Err(syntax(lineno, format!("`{key}` is only allowed in a named configuration")))
                }
                _ => {
                    let pattern = Pattern::parse(key).map_err(|e| syntax(lineno, e.to_string()))?;
                    let entry = Entry { pattern, value, line: lineno };
                    match current {
                        Some(c) => cfg.named[c].entries.push(entry),
                        None => cfg.general.push(entry),
                    }
                }
            }
        }
        cfg.check_extends()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn config(&self, name: &str) -> Option<&NamedConfig> {
        self.named.iter().find(|c| c.name == name)
    }

    fn check_extends(&self) -> Result<(), ConfigError> {
        for c in &self.named {
            for b in &c.extends {
                if self.config(b).is_none() {
                    return Err(ConfigError::UnknownBase { config: c.name.clone(), base: b.clone() });
                }
            }
        }
        // Depth-first search with an explicit stack of the current chain.
        fn visit<'a>(
            cfg: &'a ScenarioConfig,
            name: &'a str,
            chain: &mut Vec<&'a str>,
            done: &mut HashSet<&'a str>,
        ) -> Result<(), ConfigError> {
            if let Some(pos) = chain.iter().position(|n| *n == name) {
                let mut cycle: Vec<String> = chain[pos..].iter().map(|s| s.to_string()).collect();
                cycle.push(name.to_string());
                return Err(ConfigError::CyclicExtends(cycle));
            }
            if done.contains(name) {
                return Ok(());
            }
            chain.push(name);
            for b in &cfg.config(name).expect("checked").extends {
                visit(cfg, b, chain, done)?;
            }
            chain.pop();
            done.insert(name);
            Ok(())
        }
        let mut done = HashSet::new();
        for c in &self.named {
            visit(self, &c.name, &mut Vec::new(), &mut done)?;
        }
        Ok(())
    }

    /// `name` followed by its bases, depth first, each at most once.
    pub fn extends_chain(&self, name: &str) -> Result<Vec<&NamedConfig>, ConfigError> {
        fn walk<'a>(cfg: &'a ScenarioConfig, name: &str, out: &mut Vec<&'a NamedConfig>) {
            let Some(c) = cfg.config(name) else { return };
            if out.iter().any(|o| o.name == c.name) {
                return;
            }
            out.push(c);
            for b in &c.extends {
                walk(cfg, b, out);
            }
        }
        if self.config(name).is_none() {
            return Err(ConfigError::UnknownScenario(name.to_string()));
        }
        let mut out = Vec::new();
        walk(self, name, &mut out);
        Ok(out)
    }

    /// A view for resolving parameters of one scenario. `General` (or an
    /// empty name) selects the general section alone.
    pub fn scenario(&self, name: &str) -> Result<Scenario<'_>, ConfigError> {
        let chain = if name.is_empty() || name == "General" { Vec::new() } else { self.extends_chain(name)? };
        let mut entries: Vec<&Entry> = chain.iter().flat_map(|c| c.entries.iter()).collect();
        entries.extend(self.general.iter());
        Ok(Scenario { name: name.to_string(), is_abstract: chain.first().is_some_and(|c| c.is_abstract), entries })
    }
}

/// Ordered entry list of one scenario, ready for first-match lookups.
#[derive(Debug, Clone)]
pub struct Scenario<'a> {
    name: String,
    is_abstract: bool,
    entries: Vec<&'a Entry>,
}

impl<'a> Scenario<'a> {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_abstract(&self) -> bool {
        self.is_abstract
    }

    /// First matching entry for `path`.
    pub fn lookup(&self, path: &str) -> Result<Option<&'a Entry>, ConfigError> {
        let p = NodePath::parse(path).map_err(|e| ConfigError::Invalid { path: path.to_string(), reason: e.to_string() })?;
        Ok(self.entries.iter().copied().find(|e| e.pattern.matches(&p)))
    }

    pub fn resolve(&self, path: &str) -> Result<&'a ParamValue, ConfigError> {
        self.lookup(path)?.map(|e| &e.value).ok_or_else(|| ConfigError::MissingParameter(path.to_string()))
    }

    pub fn contains(&self, path: &str) -> Result<bool, ConfigError> {
        Ok(self.lookup(path)?.is_some())
    }

    fn number(&self, path: &str, v: &ParamValue, rng: &mut RngStream) -> Result<f64, ConfigError> {
        match v {
            ParamValue::Int(i) => Ok(*i as f64),
            ParamValue::Real(r) | ParamValue::Duration(r) => Ok(*r),
            ParamValue::Dist(d) => {
                sample(d, rng).map_err(|source| ConfigError::Sample { path: path.to_string(), source })
            }
            other => Err(ConfigError::TypeMismatch { path: path.to_string(), expected: "a number", found: other.to_string() }),
        }
    }

    /// A number, drawing from `rng` if the value is a distribution.
    pub fn real(&self, path: &str, rng: &mut RngStream) -> Result<f64, ConfigError> {
        let v = self.resolve(path)?;
        self.number(path, v, rng)
    }

    pub fn real_or(&self, path: &str, default: f64, rng: &mut RngStream) -> Result<f64, ConfigError> {
        match self.lookup(path)? {
            Some(e) => self.number(path, &e.value, rng),
            None => Ok(default),
        }
    }

    /// A non-negative duration in seconds. Negative draws clamp to zero.
    pub fn seconds_or(&self, path: &str, default: f64, rng: &mut RngStream) -> Result<f64, ConfigError> {
        let v = self.real_or(path, default, rng)?;
        if v < 0.0 {
            log::warn!("{path}: sampled {v} s, clamped to 0");
            return Ok(0.0);
        }
        Ok(v)
    }

    pub fn int_or(&self, path: &str, default: i64) -> Result<i64, ConfigError> {
        match self.lookup(path)?.map(|e| &e.value) {
            None => Ok(default),
            Some(ParamValue::Int(i)) => Ok(*i),
            Some(other) => {
                Err(ConfigError::TypeMismatch { path: path.to_string(), expected: "an integer", found: other.to_string() })
            }
        }
    }

    pub fn string(&self, path: &str) -> Result<String, ConfigError> {
        match self.resolve(path)? {
            ParamValue::Str(s) => Ok(s.clone()),
            other => Err(ConfigError::TypeMismatch { path: path.to_string(), expected: "a string", found: other.to_string() }),
        }
    }

    pub fn string_or(&self, path: &str, default: &str) -> Result<String, ConfigError> {
        match self.lookup(path)? {
            None => Ok(default.to_string()),
            Some(_) => self.string(path),
        }
    }
}

/// One row of `list-configs` output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigListing {
    pub name: String,
    /// Bases after the config itself, depth first.
    pub chain: Vec<String>,
    pub is_abstract: bool,
}

pub fn list_configs(cfg: &ScenarioConfig) -> Vec<ConfigListing> {
    cfg.named
        .iter()
        .map(|c| ConfigListing {
            name: c.name.clone(),
            chain: cfg
                .extends_chain(&c.name)
                .map(|ch| ch.iter().skip(1).map(|b| b.name.clone()).collect())
                .unwrap_or_default(),
            is_abstract: c.is_abstract,
        })
        .collect()
}

/// Values grouped by section, for debugging output.
pub fn dump(cfg: &ScenarioConfig) -> BTreeMap<String, Vec<String>> {
    let mut out = BTreeMap::new();
    out.insert("General".to_string(), cfg.general.iter().map(|e| format!("{} = {}", e.pattern.as_str(), e.value)).collect());
    for c in &cfg.named {
        out.insert(c.name.clone(), c.entries.iter().map(|e| format!("{} = {}", e.pattern.as_str(), e.value)).collect());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngFactory;

    const SAMPLE: &str = r#"
[General]
*.numSensors = 8   # trailing comment
**.mobility.speed = 10

[Config Wifi]
abstract = true
*.radio.range = 100

[Config Sim2drone]
extends = Wifi
description = "two drones,
over two lines"
*.numUAVs = 2 // Initializes the quads array
*.quads[*].protocol.typename = "DadcaProtocol"
*.quads[1].app[*].startTime = normal(40s, 1s)
"#;

    #[test]
    fn parses_sections_and_extends() {
        let cfg = ScenarioConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.general.len(), 2);
        assert_eq!(cfg.named.len(), 2);
        let s = cfg.config("Sim2drone").unwrap();
        assert_eq!(s.extends, vec!["Wifi"]);
        assert_eq!(s.description.as_deref(), Some("two drones,\nover two lines"));
        assert!(cfg.config("Wifi").unwrap().is_abstract);
        let sc = cfg.scenario("Sim2drone").unwrap();
        assert_eq!(sc.int_or("numUAVs", 1).unwrap(), 2);
        assert_eq!(sc.int_or("numSensors", 0).unwrap(), 8);
        assert_eq!(sc.string("quads[1].protocol.typename").unwrap(), "DadcaProtocol");
        let mut rng = RngFactory::new(1).stream("config");
        assert_eq!(sc.real_or("radio.range", 0.0, &mut rng).unwrap(), 100.0);
        assert!(!sc.is_abstract());
        assert!(cfg.scenario("Wifi").unwrap().is_abstract());
    }

    #[test]
    fn errors() {
        assert!(matches!(ScenarioConfig::parse("[Config A]\nextends = A\n"), Err(ConfigError::CyclicExtends(_))));
        assert_eq!(
            ScenarioConfig::parse("[Config A]\nextends = B\n[Config B]\nextends = A\n"),
            Err(ConfigError::CyclicExtends(vec!["A".into(), "B".into(), "A".into()]))
        );
        assert_eq!(
            ScenarioConfig::parse("[Config A]\n[Config A]\n"),
            Err(ConfigError::DuplicateConfigName { name: "A".into(), line: 2 })
        );
        assert!(matches!(ScenarioConfig::parse("\n\nnot an assignment\n"), Err(ConfigError::Syntax { line: 3, .. })));
        assert!(matches!(ScenarioConfig::parse("[Config A\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(ScenarioConfig::parse("x = \"open\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(ScenarioConfig::parse("[Config A]\nextends = Z\n"), Err(ConfigError::UnknownBase { .. })));
        let cfg = ScenarioConfig::parse("").unwrap();
        assert!(matches!(cfg.scenario("Nope"), Err(ConfigError::UnknownScenario(_))));
        assert!(matches!(cfg.scenario("").unwrap().resolve("numUAVs"), Err(ConfigError::MissingParameter(_))));
    }

    #[test]
    fn comment_markers_inside_quotes_are_kept() {
        let cfg = ScenarioConfig::parse("*.name = \"a#b//c\" # real comment\n").unwrap();
        assert_eq!(cfg.general[0].value, ParamValue::Str("a#b//c".into()));
    }

    #[test]
    fn listing_shows_chain_and_abstract_flag() {
        let cfg = ScenarioConfig::parse(SAMPLE).unwrap();
        let rows = list_configs(&cfg);
        assert_eq!(rows.len(), 2);
        assert!(rows[0].is_abstract && !rows[1].is_abstract);
        assert_eq!(rows[1].chain, vec!["Wifi"]);
    }
}
