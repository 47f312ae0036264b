//! Wildcard patterns over dotted parameter paths such as
//! `quads[3].mobility.startTime`.
//!
//! Within a segment `*` matches any run of characters and `?` one
//! character. A segment that is exactly `**` matches any number of whole
//! segments, and a leading `*` segment does the same so that `*.numUAVs`
//! matches the top-level `numUAVs`. Indices may be a number, `*`, or an
//! inclusive range `lo..hi`. A segment without an index is index 0, so
//! `app.startTime` and `app[0].startTime` name the same parameter.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("bad path `{text}`: {reason}")]
pub struct PathError {
    pub text: String,
    pub reason: String,
}

fn path_error(text: &str, reason: impl Into<String>) -> PathError {
    PathError { text: text.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum IndexPattern {
    Any,
    Exact(u64),
    Range(u64, u64),
}

impl IndexPattern {
    fn matches(self, i: u64) -> bool {
        match self {
            IndexPattern::Any => true,
            IndexPattern::Exact(n) => n == i,
            IndexPattern::Range(lo, hi) => lo <= i && i <= hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    AnySegments,
    Named { glob: String, index: IndexPattern },
}

/// A concrete path segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSegment {
    pub name: String,
    pub index: u64,
}

/// A concrete dotted path, as queried by the world builder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePath {
    segments: Vec<PathSegment>,
}

/// Splits on dots outside brackets, so `quads[1..2].x` has two segments.
fn split_segments(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, c) in text.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            '.' if depth == 0 => {
                out.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&text[start..]);
    out
}

fn split_index(text: &str, seg: &str) -> Result<(String, Option<String>), PathError> {
    match seg.find('[') {
        None => {
            if seg.contains(']') {
                return Err(path_error(text, format!("stray `]` in `{seg}`")));
            }
            Ok((seg.to_string(), None))
        }
        Some(open) => {
            let inner = seg[open + 1..]
                .strip_suffix(']')
                .ok_or_else(|| path_error(text, format!("unterminated index in `{seg}`")))?;
            Ok((seg[..open].to_string(), Some(inner.trim().to_string())))
        }
    }
}

fn valid_name(name: &str, wild: bool) -> bool {
    !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || (wild && (c == '*' || c == '?')))
}

impl NodePath {
    pub fn parse(text: &str) -> Result<Self, PathError> {
        let mut segments = Vec::new();
        for seg in split_segments(text.trim()) {
            let (name, index) = split_index(text, seg)?;
            if !valid_name(&name, false) {
                return Err(path_error(text, format!("bad segment `{seg}`")));
            }
            let index = match index {
                None => 0,
                Some(i) => i.parse().map_err(|_| path_error(text, format!("bad index `{i}`")))?,
            };
            segments.push(PathSegment { name, index });
        }
        Ok(NodePath { segments })
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            f.write_str(&s.name)?;
            if s.index != 0 {
                write!(f, "[{}]", s.index)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    text: String,
    segments: Vec<Segment>,
}

impl Pattern {
    pub fn parse(text: &str) -> Result<Self, PathError> {
        let text = text.trim();
        let mut segments = Vec::new();
        for (i, seg) in split_segments(text).into_iter().enumerate() {
            if seg == "**" || (i == 0 && seg == "*") {
                if segments.last() != Some(&Segment::AnySegments) {
                    segments.push(Segment::AnySegments);
                }
                continue;
            }
            let (mut glob, index) = split_index(text, seg)?;
            if glob == "quad" {
                log::warn!("`{text}`: `quad` is deprecated, use `quads`");
                glob = "quads".to_string();
            }
            if !valid_name(&glob, true) {
                return Err(path_error(text, format!("bad segment `{seg}`")));
            }
            let index = match index.as_deref() {
                None => IndexPattern::Exact(0),
                Some("*") => IndexPattern::Any,
                Some(i) => match i.split_once("..") {
                    Some((lo, hi)) => {
                        let lo = lo.trim().parse().map_err(|_| path_error(text, format!("bad range `{i}`")))?;
                        let hi = hi.trim().parse().map_err(|_| path_error(text, format!("bad range `{i}`")))?;
                        if lo > hi {
                            return Err(path_error(text, format!("empty range `{i}`")));
                        }
                        IndexPattern::Range(lo, hi)
                    }
                    None => IndexPattern::Exact(i.parse().map_err(|_| path_error(text, format!("bad index `{i}`")))?),
                },
            };
            segments.push(Segment::Named { glob, index });
        }
        if segments.last() == Some(&Segment::AnySegments) {
            return Err(path_error(text, "pattern must end with a parameter name"));
        }
        Ok(Pattern { text: text.to_string(), segments })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn matches(&self, path: &NodePath) -> bool {
        match_from(&self.segments, path.segments())
    }
}

fn match_from(pat: &[Segment], path: &[PathSegment]) -> bool {
    match pat.split_first() {
        None => path.is_empty(),
        Some((Segment::AnySegments, rest)) => (0..=path.len()).any(|skip| match_from(rest, &path[skip..])),
        Some((Segment::Named { glob, index }, rest)) => match path.split_first() {
            Some((seg, tail)) => index.matches(seg.index) && glob_match(glob, &seg.name) && match_from(rest, tail),
            None => false,
        },
    }
}

/// `*` and `?` glob over a single segment name.
pub fn glob_match(glob: &str, name: &str) -> bool {
    let g: Vec<char> = glob.chars().collect();
    let n: Vec<char> = name.chars().collect();
    let (mut gi, mut ni) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ni < n.len() {
        if gi < g.len() && (g[gi] == '?' || g[gi] == n[ni]) {
            gi += 1;
            ni += 1;
        } else if gi < g.len() && g[gi] == '*' {
            star = Some((gi, ni));
            gi += 1;
        } else if let Some((sg, sn)) = star {
            gi = sg + 1;
            ni = sn + 1;
            star = Some((sg, sn + 1));
        } else {
            return false;
        }
    }
    g[gi..].iter().all(|&c| c == '*')
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(p: &str, q: &str) -> bool {
        Pattern::parse(p).unwrap().matches(&NodePath::parse(q).unwrap())
    }

    #[test]
    fn leading_star_matches_any_prefix() {
        assert!(m("*.numUAVs", "numUAVs"));
        assert!(m("*.quads[*].protocol.typename", "quads[3].protocol.typename"));
        assert!(!m("*.numUAVs", "numSensors"));
    }

    #[test]
    fn unindexed_is_index_zero() {
        assert!(m("*.quads[1].app[*].startTime", "quads[1].app.startTime"));
        assert!(m("quads.mobility.speed", "quads[0].mobility.speed"));
        assert!(!m("quads.mobility.speed", "quads[1].mobility.speed"));
        assert!(m("quads[0].app[0].startTime", "quads.app.startTime"));
        assert!(m("*.quad[*].mobility.speed", "quads[4].mobility.speed"));
    }

    #[test]
    fn ranges_and_globs() {
        assert!(m("quads[1..2].mobility.speed", "quads[2].mobility.speed"));
        assert!(!m("quads[1..2].mobility.speed", "quads[3].mobility.speed"));
        assert!(m("**.mobility.s*", "quads[3].mobility.speed"));
        assert!(m("quads[*].mobility.start?ime", "quads[3].mobility.startTime"));
        assert!(!m("quads[*].*.speed", "quads[3].speed"));
        assert!(m("quads[*].*.speed", "quads[3].mobility.speed"));
    }

    #[test]
    fn glob_edge_cases() {
        assert!(glob_match("*", ""));
        assert!(glob_match("a*b*c", "aXbYbZc"));
        assert!(!glob_match("a*b", "ac"));
        assert!(glob_match("??", "ab"));
    }

    #[test]
    fn bad_patterns() {
        assert!(Pattern::parse("quads[x].speed").is_err());
        assert!(Pattern::parse("quads[3..1].speed").is_err());
        assert!(Pattern::parse("quads[1.speed").is_err());
        assert!(Pattern::parse("quads.**").is_err());
        assert!(Pattern::parse("a..b").is_err());
    }
}
