use std::collections::BTreeMap;
use std::path::Path;

use memchr::memmem;

use super::{read_text, FlowRecord, TrafficError};

/// A byte pattern with free-form metadata (CVE id, message, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub pattern: Vec<u8>,
    pub metadata: BTreeMap<String, String>,
}

impl Signature {
    pub fn new(name: impl Into<String>, pattern: Vec<u8>) -> Option<Self> {
        if pattern.is_empty() {
            return None;
        }
        Some(Signature {
            name: name.into(),
            pattern,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: &str) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// First occurrence of the pattern in `haystack`.
    pub fn find_in(&self, haystack: &[u8]) -> Option<usize> {
        memmem::find(haystack, &self.pattern)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignatureMatch<'a> {
    pub signature: &'a Signature,
    pub offset: usize,
}

/// Every signature whose pattern occurs in the flow payload, with the first
/// offset, in signature order.
pub fn match_signatures<'a>(flow: &FlowRecord, sigs: &'a [Signature]) -> Vec<SignatureMatch<'a>> {
    sigs.iter()
        .filter_map(|s| {
            s.find_in(&flow.payload).map(|offset| SignatureMatch {
                signature: s,
                offset,
            })
        })
        .collect()
}

/// Decodes a content string mixing literal text and `|hex hex|` blocks.
fn decode_content(content: &str) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let mut in_hex = false;
    for (i, part) in content.split('|').enumerate() {
        in_hex = i % 2 == 1;
        if in_hex {
            for tok in part.split_whitespace() {
                let b = u8::from_str_radix(tok, 16)
                    .ok()
                    .filter(|_| tok.len() == 2)
                    .ok_or_else(|| format!("bad hex byte `{tok}`"))?;
                out.push(b);
            }
        } else {
            out.extend_from_slice(part.as_bytes());
        }
    }
    if in_hex {
        return Err("unterminated `|` block".into());
    }
    Ok(out)
}

/// Splits on whitespace, keeping `"..."` and `|...|` spans together.
fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote = None;
    for ch in line.chars() {
        match (quote, ch) {
            (None, c) if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            (None, '"') | (None, '|') => {
                quote = Some(ch);
                cur.push(ch);
            }
            (Some(q), c) if c == q => {
                quote = None;
                cur.push(c);
            }
            (_, c) => cur.push(c),
        }
    }
    if quote.is_some() {
        return Err("unterminated quote".into());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(s)
}

/// Parses a signature file. Each line is
/// `<name> <pattern> [key=value ...]`, where the pattern is either a
/// `|5a 5a aa 55|` hex block or a quoted content string that may embed hex
/// blocks (`"GET /x|0d 0a|"`). Values may be quoted.
pub fn parse_signatures(text: &str) -> Result<Vec<Signature>, TrafficError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| TrafficError::Malformed {
            what: "signature",
            line: idx + 1,
            reason,
        };
        let toks = tokenize(line).map_err(bad)?;
        let [name, pattern, meta @ ..] = toks.as_slice() else {
            return Err(bad("expected `<name> <pattern> [key=value ...]`".into()));
        };
        let bytes = decode_content(unquote(pattern)).map_err(bad)?;
        let mut sig = Signature::new(name.as_str(), bytes).ok_or_else(|| bad("empty pattern".into()))?;
        for kv in meta {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("metadata `{kv}` is not key=value")))?;
            sig.metadata.insert(k.into(), unquote(v).into());
        }
        out.push(sig);
    }
    Ok(out)
}

pub fn read_signatures(path: impl AsRef<Path>) -> Result<Vec<Signature>, TrafficError> {
    parse_signatures(&read_text(path.as_ref())?)
}
