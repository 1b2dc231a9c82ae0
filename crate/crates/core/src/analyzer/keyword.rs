//! A transparent rule-based stand-in for a language model.
//!
//! It answers each pipeline prompt from keyword lists, without judgement.
//! Use it to run the pipeline offline and to record scripts of truthful
//! answers for fixtures.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;

use super::backend::{BackendError, CompletionBackend};
use super::prompts::{self, prompt_input, prompt_template};

const VENDORS: &[(&str, &[&str])] = &[
    ("Dahua", &["dahua"]),
    ("Hikvision", &["hikvision"]),
    ("TVT", &["tvt"]),
    ("D-Link", &["d-link", "dlink"]),
    ("Sony", &["sony"]),
    ("ASUS", &["asus"]),
    ("TP-Link", &["tp-link", "tplink"]),
    ("Reolink", &["reolink"]),
    ("Netgear", &["netgear"]),
    ("Xiongmai", &["xiongmai"]),
    ("Axis", &["axis communications"]),
    ("Synology", &["synology"]),
    ("Ubiquiti", &["ubiquiti"]),
    ("Uniview", &["uniview"]),
];

const TYPES: &[(&str, &[&str])] = &[
    ("NVR", &["network video recorder", "nvr"]),
    ("DVR", &["dvr", "digital video recorder"]),
    ("Camera", &["camera", "ipcam", "ip cam", "webcam"]),
    ("Router", &["router", "gateway"]),
    ("NAS", &["nas", "sharecenter", "network storage"]),
    ("Printer", &["printer"]),
];

const DEVICE_MARKERS: &[&str] = &[
    "login",
    "password",
    "www-authenticate",
    "realm=",
    "rtsp/1.0",
    "<form",
    "220 ",
    "web service",
    "sharecenter",
];

const PUBLICATION_MARKERS: &[&str] = &[
    "blog",
    "posted by",
    "<article",
    "review",
    "comments",
    "add to cart",
    "buy now",
];

const SHELL_MARKERS: &[&str] = &[
    ";", "$(", "`", "&&", "||", "wget ", "curl ", "busybox", "/bin/sh", "chmod ", "tftp ", "nc -",
];

const LEAK_MARKERS: &[&str] = &[
    "password=",
    "passwd",
    "pwd=",
    "admin:",
    "<password>",
    "wifi_key",
    "serialnumber",
    "serial number",
    "macaddr",
];

#[derive(Debug, Clone, Copy, Default)]
pub struct KeywordBackend;

impl KeywordBackend {
    pub fn new() -> Self {
        KeywordBackend
    }
}

/// Byte offset of the first whole-word occurrence of `needle`.
fn find_word(hay_lower: &str, needle: &str) -> Option<usize> {
    let hb = hay_lower.as_bytes();
    let edge = |b: Option<u8>| b.is_none_or(|b| !b.is_ascii_alphanumeric());
    hay_lower
        .match_indices(needle)
        .find(|(i, m)| edge(i.checked_sub(1).map(|j| hb[j])) && edge(hb.get(i + m.len()).copied()))
        .map(|(i, _)| i)
}

fn first_match(text: &str, table: &[(&'static str, &[&str])]) -> Option<&'static str> {
    let lower = text.to_lowercase();
    table
        .iter()
        .filter_map(|(name, needles)| {
            needles
                .iter()
                .filter_map(|n| find_word(&lower, n))
                .min()
                .map(|pos| (pos, *name))
        })
        .min()
        .map(|(_, name)| name)
}

fn looks_like_model(tok: &str) -> bool {
    let has_digit = tok.bytes().any(|b| b.is_ascii_digit());
    let has_upper = tok.bytes().any(|b| b.is_ascii_uppercase());
    let has_lower = tok.bytes().any(|b| b.is_ascii_lowercase());
    tok.len() >= 5 && has_digit && has_upper && !has_lower && !tok.starts_with('-')
}

fn first_model(text: &str) -> Option<&str> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == '_'))
        .map(|t| t.trim_matches(|c| c == '-' || c == '_'))
        .find(|t| looks_like_model(t))
}

fn records(pairs: &[(&str, &str)]) -> String {
    let body: Vec<String> = pairs
        .iter()
        .map(|(t, e)| format!("{{\"T\": \"{t}\", \"E\": {}}}", serde_json::to_string(e).expect("string")))
        .collect();
    format!("[{}]", body.join(", "))
}

fn recognize(input: &str) -> String {
    let mut pairs = Vec::new();
    if let Some(v) = first_match(input, VENDORS) {
        pairs.push(("VENDOR", v));
    }
    if let Some(t) = first_match(input, TYPES) {
        pairs.push(("TYPE", t));
    }
    if let Some(m) = first_model(input) {
        pairs.push(("MODEL", m));
    }
    records(&pairs)
}

fn verify(prompt: &str, input: &str) -> String {
    let lower = input.to_lowercase();
    let list = prompt
        .rfind("\nEntities:\n")
        .map(|i| &prompt[i + "\nEntities:\n".len()..])
        .and_then(|s| s.split("----- BEGIN INPUT -----").next())
        .unwrap_or("");
    let mut answers = Vec::new();
    for line in list.lines() {
        let Some((idx, fields)) = line.split_once(": ") else {
            continue;
        };
        let mut named = false;
        let mut seen = false;
        for field in fields.split_whitespace() {
            if let Some((k, v)) = field.split_once('=') {
                if k == "vendor" || k == "model" {
                    named = true;
                    seen |= lower.contains(&v.to_lowercase());
                }
            }
        }
        if !named {
            seen = first_match(input, TYPES).is_some();
        }
        answers.push((idx.trim().to_string(), if seen { "yes" } else { "no" }));
    }
    let pairs: Vec<(&str, &str)> = answers.iter().map(|(i, a)| (i.as_str(), *a)).collect();
    records(&pairs)
}

fn complete_entity(input: &str) -> String {
    let mut pairs = Vec::new();
    if let Some(v) = first_match(input, VENDORS) {
        pairs.push(("VENDOR", v));
    }
    if let Some(t) = first_match(input, TYPES) {
        pairs.push(("TYPE", t));
    }
    records(&pairs)
}

fn origin(input: &str) -> String {
    let lower = input.to_lowercase();
    let published = PUBLICATION_MARKERS.iter().any(|m| lower.contains(m));
    let device = DEVICE_MARKERS.iter().any(|m| lower.contains(m));
    if published {
        "No. The response is a page that discusses the device rather than output of the device.".into()
    } else if device {
        "Yes. The response is a login page or service banner served by the device.".into()
    } else {
        "No. Nothing in the response shows it was produced by the device.".into()
    }
}

fn percent_decode(s: &str) -> String {
    let b = s.as_bytes();
    let mut out = Vec::with_capacity(b.len());
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'%' if i + 2 < b.len() => {
                match u8::from_str_radix(std::str::from_utf8(&b[i + 1..i + 3]).unwrap_or("zz"), 16) {
                    Ok(v) => {
                        out.push(v);
                        i += 3;
                        continue;
                    }
                    Err(_) => out.push(b'%'),
                }
            }
            b'+' => out.push(b' '),
            c => out.push(c),
        }
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// Request line and body, without headers, percent-decoded.
fn request_surface(request: &str) -> String {
    let line = request.lines().next().unwrap_or("");
    let body = request.split_once("\r\n\r\n").or_else(|| request.split_once("\n\n")).map(|(_, b)| b).unwrap_or("");
    let mut s = percent_decode(&format!("{line}\n{body}"));
    // Parameters carrying base64-encoded commands.
    for part in s.clone().split(['?', '&', ' ', '\n']) {
        if let Some(v) = part.strip_prefix("system=") {
            if let Ok(d) = B64.decode(v.trim()) {
                s.push('\n');
                s.push_str(&String::from_utf8_lossy(&d));
            }
        }
    }
    s
}

fn command_injection(input: &str) -> String {
    let surface = request_surface(input);
    match SHELL_MARKERS.iter().find(|m| surface.contains(*m)) {
        Some(_) => "Yes. The request carries shell command syntax in its parameters.".into(),
        None => "No. The request contains no shell command syntax.".into(),
    }
}

fn path_traversal(input: &str) -> String {
    let surface = request_surface(input);
    if surface.contains("../") || surface.contains("..\\") {
        "Yes. The request path climbs out of the web root with dot-dot segments.".into()
    } else {
        "No. The request path stays within the web root.".into()
    }
}

fn information_disclosure(input: &str) -> String {
    let response = input.split("----- RESPONSE -----").nth(1).unwrap_or("").to_lowercase();
    if LEAK_MARKERS.iter().any(|m| response.contains(m)) {
        "Yes. The response exposes credentials or device configuration.".into()
    } else {
        "No. The response exposes no sensitive device details.".into()
    }
}

fn ftp(input: &str) -> String {
    let upper = input.to_uppercase();
    let failures = upper.matches("530 ").count();
    let risky = ["SITE EXEC", "DELE ", "STOR ", "RNFR "].iter().any(|c| upper.contains(c));
    if failures >= 2 || risky {
        "No. The session shows repeated failed logins or file manipulation commands.".into()
    } else {
        "Yes. The session contains only ordinary greeting and login exchanges.".into()
    }
}

impl CompletionBackend for KeywordBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let template = prompt_template(prompt)
            .ok_or_else(|| BackendError::Failed("prompt does not start with a known template header".into()))?;
        let input = prompt_input(prompt);
        Ok(match template.name {
            n if n == prompts::ENTITIES.name => recognize(input),
            n if n == prompts::VERIFY.name => verify(prompt, input),
            n if n == prompts::RAG.name => complete_entity(input),
            n if n == prompts::ORIGIN.name => origin(input),
            n if n == prompts::COMMAND_INJECTION.name => command_injection(input),
            n if n == prompts::PATH_TRAVERSAL.name => path_traversal(input),
            n if n == prompts::INFORMATION_DISCLOSURE.name => information_disclosure(input),
            _ => ftp(input),
        })
    }

    fn describe(&self) -> String {
        "keyword-rules v1".into()
    }
}
