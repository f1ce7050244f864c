//! Line-oriented `key = value` format shared by kernel spec files and
//! model/sweep config files.
//!
//! ```text
//! # comment
//! dims          = 3
//! space_sizes   = 15, 15, 15
//! tile_sizes    = 5, 5, 5
//! deps          = (-1,0,0) (0,-2,0)
//! deps          = (0,0,-2)          # repeated `deps` lines append
//! element_bytes = 8
//! ```
//!
//! Integer lists accept commas and/or whitespace as separators. Vector
//! lists are parenthesized integer lists. Blank lines and `#` comments are
//! ignored. Every error carries the 1-based line it was found on.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::kernel::{KernelError, KernelSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("line {line}: invalid kernel spec: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: KernelError,
    },
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

/// Parsed entries, keyed by name. Repeated keys keep every occurrence.
#[derive(Debug, Clone, Default)]
pub struct Document {
    entries: BTreeMap<String, Vec<(usize, String)>>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut entries: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| syntax(line, format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(syntax(line, format!("invalid key `{key}`")));
            }
            entries
                .entry(key.to_string())
                .or_default()
                .push((line, value.trim().to_string()));
        }
        Ok(Document { entries })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Line of the first occurrence of `key`.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).and_then(|v| v.first()).map(|(l, _)| *l)
    }

    /// Rejects keys outside `allowed`.
    pub fn expect_keys(&self, allowed: &[&str]) -> Result<(), ParseError> {
        for (key, occurrences) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(syntax(occurrences[0].0, format!("unknown key `{key}`")));
            }
        }
        Ok(())
    }

    fn single(&self, key: &str) -> Result<Option<(usize, &str)>, ParseError> {
        match self.entries.get(key).map(Vec::as_slice) {
            None | Some([]) => Ok(None),
            Some([(line, value)]) => Ok(Some((*line, value.as_str()))),
            Some([_, (line, _), ..]) => Err(syntax(*line, format!("duplicate key `{key}`"))),
        }
    }

    pub fn string(&self, key: &str) -> Result<Option<String>, ParseError> {
        Ok(self.single(key)?.map(|(_, v)| v.to_string()))
    }

    pub fn int(&self, key: &str) -> Result<Option<i64>, ParseError> {
        self.single(key)?
            .map(|(line, v)| parse_int(line, v))
            .transpose()
    }

    pub fn float(&self, key: &str) -> Result<Option<f64>, ParseError> {
        self.single(key)?
            .map(|(line, v)| {
                v.parse::<f64>()
                    .map_err(|_| syntax(line, format!("`{v}` is not a number")))
            })
            .transpose()
    }

    pub fn int_list(&self, key: &str) -> Result<Option<Vec<i64>>, ParseError> {
        self.single(key)?
            .map(|(line, v)| parse_int_list(line, v))
            .transpose()
    }

    /// Comma/whitespace separated words.
    pub fn word_list(&self, key: &str) -> Result<Option<Vec<String>>, ParseError> {
        Ok(self.single(key)?.map(|(_, v)| {
            v.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|w| !w.is_empty())
                .map(str::to_string)
                .collect()
        }))
    }

    /// Parenthesized vectors, concatenated over every occurrence of `key`.
    pub fn vector_list(&self, key: &str) -> Result<Option<Vec<Vec<i64>>>, ParseError> {
        let Some(occurrences) = self.entries.get(key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for (line, value) in occurrences {
            out.extend(parse_vectors(*line, value)?);
        }
        Ok(Some(out))
    }
}

fn parse_int(line: usize, text: &str) -> Result<i64, ParseError> {
    text.trim()
        .parse::<i64>()
        .map_err(|_| syntax(line, format!("`{}` is not an integer", text.trim())))
}

fn parse_int_list(line: usize, text: &str) -> Result<Vec<i64>, ParseError> {
    let values: Vec<i64> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(|w| parse_int(line, w))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(syntax(line, "empty integer list"));
    }
    Ok(values)
}

fn parse_vectors(line: usize, text: &str) -> Result<Vec<Vec<i64>>, ParseError> {
    let mut out = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        rest = rest.trim_start_matches(|c: char| c == ',' || c.is_whitespace());
        if rest.is_empty() {
            break;
        }
        let body = rest
            .strip_prefix('(')
            .ok_or_else(|| syntax(line, format!("expected `(` at `{rest}`")))?;
        let close = body
            .find(')')
            .ok_or_else(|| syntax(line, "unterminated vector, missing `)`"))?;
        out.push(parse_int_list(line, &body[..close])?);
        rest = &body[close + 1..];
    }
    if out.is_empty() {
        return Err(syntax(line, "empty vector list"));
    }
    Ok(out)
}

pub const SPEC_KEYS: &[&str] = &[
    "name",
    "dims",
    "space_sizes",
    "tile_sizes",
    "deps",
    "element_bytes",
];

/// Parses and validates a kernel spec file.
pub fn parse_kernel_spec(text: &str) -> Result<KernelSpec, ParseError> {
    let doc = Document::parse(text)?;
    doc.expect_keys(SPEC_KEYS)?;
    kernel_spec_from(&doc)
}

pub fn kernel_spec_from(doc: &Document) -> Result<KernelSpec, ParseError> {
    let dims = doc.int("dims")?.ok_or(ParseError::Missing("dims"))?;
    let space_sizes = doc.int_list("space_sizes")?.ok_or(ParseError::Missing("space_sizes"))?;
    let tile_sizes = doc.int_list("tile_sizes")?.ok_or(ParseError::Missing("tile_sizes"))?;
    let deps = doc.vector_list("deps")?.ok_or(ParseError::Missing("deps"))?;
    let element_bytes = doc.int("element_bytes")?.unwrap_or(8);
    let line = |key| doc.line_of(key).unwrap_or(0);
    if space_sizes.len() as i64 != dims {
        return Err(syntax(
            line("space_sizes"),
            format!("{} sizes given for dims = {dims}", space_sizes.len()),
        ));
    }
    if !(1..=u32::MAX as i64).contains(&element_bytes) {
        return Err(syntax(line("element_bytes"), "element_bytes must be positive"));
    }
    let spec = KernelSpec {
        space_sizes,
        tile_sizes,
        deps,
        element_bytes: element_bytes as u32,
    };
    spec.validate().map_err(|source| {
        let key = match source {
            KernelError::ZeroDep { .. }
            | KernelError::NonUniformOrForwardDep { .. }
            | KernelError::DepExceedsTile { .. }
            | KernelError::NoDeps => "deps",
            KernelError::TileMismatch { .. } => "tile_sizes",
            KernelError::DimMismatch { field, .. } | KernelError::NonPositive { field, .. } => field,
            _ => "dims",
        };
        ParseError::Invalid {
            line: line(key),
            source,
        }
    })?;
    Ok(spec)
}

/// Renders a spec in the file format; `parse_kernel_spec` reads it back.
pub fn render_kernel_spec(spec: &KernelSpec, name: Option<&str>) -> String {
    let join = |v: &[i64]| v.iter().map(i64::to_string).collect::<Vec<_>>().join(", ");
    let mut out = String::new();
    if let Some(name) = name {
        out.push_str(&format!("name = {name}\n"));
    }
    out.push_str(&format!("dims = {}\n", spec.dims()));
    out.push_str(&format!("space_sizes = {}\n", join(&spec.space_sizes)));
    out.push_str(&format!("tile_sizes = {}\n", join(&spec.tile_sizes)));
    for dep in &spec.deps {
        let inner = dep.iter().map(i64::to_string).collect::<Vec<_>>().join(",");
        out.push_str(&format!("deps = ({inner})\n"));
    }
    out.push_str(&format!("element_bytes = {}\n", spec.element_bytes));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG4: &str = "\
# running example
dims = 3
space_sizes = 15, 15, 15
tile_sizes = 5 5 5
deps = (-1,0,0), (0,-2,0)
deps = (0,0,-2)
element_bytes = 8
";

    #[test]
    fn parses_repeated_deps() {
        let spec = parse_kernel_spec(FIG4).unwrap();
        assert_eq!(spec.deps, vec![vec![-1, 0, 0], vec![0, -2, 0], vec![0, 0, -2]]);
        assert_eq!(spec.tile_sizes, vec![5, 5, 5]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_kernel_spec("dims = 3\nspace_sizes = 1, x, 3\n").unwrap_err();
        assert_eq!(err.to_string(), "line 2: `x` is not an integer");
        let err = parse_kernel_spec("dims = 3\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, .. }));
        let err = parse_kernel_spec("dims 3\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 1, .. }));
    }

    #[test]
    fn validation_errors_point_at_the_offending_key() {
        let text = FIG4.replace("(0,0,-2)", "(0,0,-6)");
        match parse_kernel_spec(&text).unwrap_err() {
            ParseError::Invalid { line, source } => {
                assert_eq!(line, 5);
                assert!(matches!(source, KernelError::DepExceedsTile { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn render_round_trips() {
        let spec = parse_kernel_spec(FIG4).unwrap();
        assert_eq!(parse_kernel_spec(&render_kernel_spec(&spec, Some("fig4"))).unwrap(), spec);
    }
}
