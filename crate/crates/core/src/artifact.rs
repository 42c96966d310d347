//! Line-oriented text artifacts sealed with a trailing SHA-256 line.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const CHECKSUM_KEY: &str = "sha256";

/// 17 significant digits: enough for an exact `f64` round trip.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn digest_hex(body: &str) -> String {
    let digest = Sha256::digest(body.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Appends the checksum line to `body` (which must end with a newline).
pub(crate) fn seal(mut body: String) -> String {
    debug_assert!(body.ends_with('\n'));
    let sum = digest_hex(&body);
    body.push_str(CHECKSUM_KEY);
    body.push(' ');
    body.push_str(&sum);
    body.push('\n');
    body
}

/// Verifies the checksum line and returns a cursor over the body lines.
pub(crate) fn unseal<'a>(path: &Path, text: &'a str) -> Result<Reader<'a>> {
    let trimmed = text.strip_suffix('\n').unwrap_or(text);
    let Some(split) = trimmed.rfind('\n') else {
        return Err(corrupt(path, "missing checksum line"));
    };
    let (body, last) = (&text[..split + 1], &trimmed[split + 1..]);
    let Some(expected) = last.strip_prefix("sha256 ") else {
        return Err(corrupt(path, "missing checksum line (file truncated?)"));
    };
    if digest_hex(body) != expected.trim() {
        return Err(corrupt(path, "checksum mismatch"));
    }
    Ok(Reader {
        path: path.to_path_buf(),
        lines: body.lines().enumerate(),
    })
}

/// First token of the first line, used to tell artifact kinds apart.
pub fn artifact_kind(text: &str) -> Option<&str> {
    text.lines().next()?.split_whitespace().next()
}

pub(crate) fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::CorruptArtifact {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub(crate) struct Reader<'a> {
    path: PathBuf,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    pub fn error(&self, reason: impl Into<String>) -> Error {
        corrupt(&self.path, reason)
    }

    pub fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| self.error("unexpected end of file"))
    }

    /// Next line, which must start with `key`; returns the remaining tokens.
    pub fn expect_key(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let (no, line) = self.next_line()?;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some(k) if k == key => Ok(tokens.collect()),
            other => Err(self.error(format!(
                "line {no}: expected `{key}`, found `{}`",
                other.unwrap_or("")
            ))),
        }
    }

    /// `key value` line parsed as a single value.
    pub fn value<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let tokens = self.expect_key(key)?;
        match tokens.as_slice() {
            [v] => v
                .parse()
                .map_err(|_| self.error(format!("bad value `{v}` for `{key}`"))),
            _ => Err(self.error(format!("`{key}` expects exactly one value"))),
        }
    }

    /// A line of exactly `n` floats.
    pub fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let (no, line) = self.next_line()?;
        let vals = line
            .split_whitespace()
            .map(f64::from_str)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| self.error(format!("line {no}: {e}")))?;
        if vals.len() != n {
            return Err(self.error(format!(
                "line {no}: expected {n} values, found {}",
                vals.len()
            )));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(self.error(format!("line {no}: non-finite value")));
        }
        Ok(vals)
    }

    pub fn finish(mut self) -> Result<()> {
        match self.lines.next() {
            None => Ok(()),
            Some((i, l)) => Err(self.error(format!("line {}: trailing content `{l}`", i + 1))),
        }
    }
}

pub(crate) fn float_line(values: impl IntoIterator<Item = f64>) -> String {
    let mut s = values
        .into_iter()
        .map(fmt_f64)
        .collect::<Vec<_>>()
        .join(" ");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seal_then_unseal() {
        let text = seal("kind 1\nx 3\n".to_string());
        let mut r = unseal(Path::new("t"), &text).unwrap();
        assert_eq!(r.value::<u32>("kind").unwrap(), 1);
        assert_eq!(r.value::<u32>("x").unwrap(), 3);
        r.finish().unwrap();
    }

    #[test]
    fn truncation_and_tampering_detected() {
        let text = seal("kind 1\nx 3\n".to_string());
        let truncated = &text[..text.len() - 10];
        assert!(matches!(
            unseal(Path::new("t"), truncated),
            Err(Error::CorruptArtifact { .. })
        ));
        let tampered = text.replace("x 3", "x 4");
        assert!(matches!(
            unseal(Path::new("t"), &tampered),
            Err(Error::CorruptArtifact { .. })
        ));
        assert!(matches!(
            unseal(Path::new("t"), "kind"),
            Err(Error::CorruptArtifact { .. })
        ));
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
