//! Strict parsers for backend answers.
//!
//! Record answers are a bracketed list of `{'T': .., 'E': ..}` dictionaries
//! (single or double quotes, optionally inside one code fence). Verdict
//! answers start with a yes/no token. Anything else is malformed.

/// One `{'T': .., 'E': ..}` dictionary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityRecord {
    pub t: String,
    pub e: String,
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn expect(&mut self, want: char) -> Result<(), String> {
        self.ws();
        match self.bump() {
            Some(c) if c == want => Ok(()),
            Some(c) => Err(format!("expected `{want}` at byte {}, found `{c}`", self.pos - c.len_utf8())),
            None => Err(format!("expected `{want}`, found end of output")),
        }
    }

    fn string(&mut self) -> Result<String, String> {
        self.ws();
        let quote = match self.bump() {
            Some(q @ ('\'' | '"')) => q,
            Some(c) => return Err(format!("expected a quoted string, found `{c}`")),
            None => return Err("expected a quoted string, found end of output".into()),
        };
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err("unterminated string".into()),
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some(c) => out.push(c),
                    None => return Err("unterminated escape".into()),
                },
                Some(c) if c == quote => return Ok(out),
                Some(c) => out.push(c),
            }
        }
    }

    fn record(&mut self) -> Result<EntityRecord, String> {
        self.expect('{')?;
        let (mut t, mut e) = (None, None);
        loop {
            let key = self.string()?;
            self.expect(':')?;
            let value = self.string()?;
            let slot = match key.as_str() {
                "T" => &mut t,
                "E" => &mut e,
                other => return Err(format!("unexpected key `{other}`")),
            };
            if slot.replace(value).is_some() {
                return Err(format!("duplicate key `{key}`"));
            }
            self.ws();
            match self.bump() {
                Some(',') => continue,
                Some('}') => break,
                _ => return Err("expected `,` or `}` in record".into()),
            }
        }
        match (t, e) {
            (Some(t), Some(e)) => Ok(EntityRecord { t, e }),
            _ => Err("record needs both `T` and `E`".into()),
        }
    }
}

fn strip_fence(raw: &str) -> &str {
    let s = raw.trim();
    let Some(body) = s.strip_prefix("```") else {
        return s;
    };
    let Some(body) = body.strip_suffix("```") else {
        return s;
    };
    // Drop an info string such as `json` on the opening line.
    match body.split_once('\n') {
        Some((info, rest)) if !info.contains('[') => rest.trim(),
        _ => body.trim(),
    }
}

/// Parses a bracketed list of T/E records.
pub fn parse_entity_records(raw: &str) -> Result<Vec<EntityRecord>, String> {
    let body = strip_fence(raw);
    let mut c = Cursor { s: body, pos: 0 };
    c.expect('[')?;
    let mut out = Vec::new();
    c.ws();
    if c.peek() == Some(']') {
        c.bump();
    } else {
        loop {
            out.push(c.record()?);
            c.ws();
            match c.bump() {
                Some(',') => {
                    c.ws();
                    if c.peek() == Some(']') {
                        c.bump();
                        break;
                    }
                }
                Some(']') => break,
                _ => return Err("expected `,` or `]` after record".into()),
            }
        }
    }
    c.ws();
    if c.pos != body.len() {
        return Err(format!("trailing text after list at byte {}", c.pos));
    }
    Ok(out)
}

/// A parsed yes/no answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YesNo {
    pub yes: bool,
    pub explanation: String,
}

/// Accepts output starting with `yes` or `no` (any case), followed by the
/// end, whitespace or punctuation.
pub fn parse_yes_no(raw: &str) -> Result<YesNo, String> {
    let s = raw.trim_start();
    let word_len = s.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(s.len());
    let word = &s[..word_len];
    let yes = if word.eq_ignore_ascii_case("yes") {
        true
    } else if word.eq_ignore_ascii_case("no") {
        false
    } else {
        let shown: String = s.chars().take(24).collect();
        return Err(format!("expected a leading yes/no, found `{shown}`"));
    };
    let rest = &s[word_len..];
    if let Some(c) = rest.chars().next() {
        if !(c.is_whitespace() || c.is_ascii_punctuation()) {
            return Err(format!("unexpected `{c}` after yes/no token"));
        }
    }
    let explanation = rest
        .trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '.' | ',' | ':' | ';' | '!' | '-'))
        .trim_end()
        .to_string();
    Ok(YesNo { yes, explanation })
}

/// Fragments the text puts in quotes ('..', "..", ‘..’, “..”, `..`).
/// Apostrophes inside words do not open a quote.
pub fn quoted_fragments(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let closer = |c: char| match c {
        '\'' => Some('\''),
        '"' => Some('"'),
        '`' => Some('`'),
        '\u{2018}' => Some('\u{2019}'),
        '\u{201c}' => Some('\u{201d}'),
        _ => None,
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let opens = closer(chars[i]).filter(|_| i == 0 || !chars[i - 1].is_alphanumeric());
        if let Some(close) = opens {
            let found = (i + 1..chars.len())
                .find(|&j| chars[j] == close && chars.get(j + 1).is_none_or(|n| !n.is_alphanumeric()));
            if let Some(j) = found {
                out.push(chars[i + 1..j].iter().collect());
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}
