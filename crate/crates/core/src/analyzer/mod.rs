//! Five-step analysis of kept flows against a text-completion backend.
//!
//! I. recognize device entities in the response,
//! II. have the backend re-verify them,
//! III. fill a missing vendor/type from search results for the model,
//! IV. confirm the response really comes from that device,
//! V. run the attack detectors that fit the protocol.
//!
//! Steps never panic on backend output: every failure is recorded in the
//! [`Finding`] for that flow.

mod backend;
mod grammar;
mod keyword;
mod pipeline;
mod prompts;

pub use backend::{
    fingerprint, BackendConfig, BackendError, BackendKind, CompletionBackend, FuzzBackend, NoRetriever,
    RecordingBackend, RetrieverConfig, RetrieverError, Retriever, ScriptedBackend, SearchHit, StagedBackend,
    StaticRetriever,
};
pub use grammar::{parse_entity_records, parse_yes_no, quoted_fragments, EntityRecord, YesNo};
pub use keyword::KeywordBackend;
pub use pipeline::{
    analyze_flows, confirm_origin, detect_attack, rag_complete, recognize_entities, run_pipeline, self_verify,
    Detection, StepOutcome,
};
pub use prompts::{prompt_step, render, PromptTemplate, TEMPLATES};

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pipeline step, ordered I < II < ... < V.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Step {
    I,
    II,
    III,
    IV,
    V,
}

impl Step {
    pub const ALL: [Step; 5] = [Step::I, Step::II, Step::III, Step::IV, Step::V];

    pub fn label(self) -> &'static str {
        match self {
            Step::I => "I",
            Step::II => "II",
            Step::III => "III",
            Step::IV => "IV",
            Step::V => "V",
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Step {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Step::ALL
            .into_iter()
            .find(|st| st.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown step `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    CommandInjection,
    InformationDisclosure,
    PathTraversal,
    FtpAnomaly,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [
        AttackKind::CommandInjection,
        AttackKind::InformationDisclosure,
        AttackKind::PathTraversal,
        AttackKind::FtpAnomaly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::CommandInjection => "command_injection",
            AttackKind::InformationDisclosure => "information_disclosure",
            AttackKind::PathTraversal => "path_traversal",
            AttackKind::FtpAnomaly => "ftp_anomaly",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeviceEntity {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vendor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

impl DeviceEntity {
    pub fn is_empty(&self) -> bool {
        self.vendor.is_none() && self.dev_type.is_none() && self.model.is_none()
    }

    pub fn is_complete(&self) -> bool {
        self.vendor.is_some() && self.dev_type.is_some() && self.model.is_some()
    }

    /// `vendor=.. type=.. model=..`, omitting absent fields.
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(v) = &self.vendor {
            parts.push(format!("vendor={v}"));
        }
        if let Some(t) = &self.dev_type {
            parts.push(format!("type={t}"));
        }
        if let Some(m) = &self.model {
            parts.push(format!("model={m}"));
        }
        parts.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum AnalyzerError {
    #[error("step {step}: malformed backend output ({reason})")]
    Malformed { step: Step, reason: String, raw: String },
    #[error("step {step}: backend failure: {message}")]
    Backend { step: Step, message: String },
    #[error("step III: retrieval failure: {0}")]
    Retrieval(String),
    #[error("step {step}: precondition: {reason}")]
    Precondition { step: Step, reason: String },
}

impl AnalyzerError {
    pub fn step(&self) -> Step {
        match self {
            AnalyzerError::Malformed { step, .. }
            | AnalyzerError::Backend { step, .. }
            | AnalyzerError::Precondition { step, .. } => *step,
            AnalyzerError::Retrieval(_) => Step::III,
        }
    }
}

/// One backend exchange (or a skipped step) in a finding's history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: Step,
    /// SHA-256 of the prompt; absent when no prompt was sent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    pub output: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Analyzer verdict for one flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub flow_ref: String,
    pub timestamp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<DeviceEntity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_iot_origin: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_kind: Option<AttackKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
    /// Every detector that ran, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detections: Vec<(AttackKind, bool)>,
    pub explanation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<AnalyzerError>,
    pub step_trace: Vec<TraceEntry>,
}

impl Finding {
    pub fn new(flow_ref: impl Into<String>, timestamp: f64) -> Self {
        Finding {
            flow_ref: flow_ref.into(),
            timestamp,
            entity: None,
            is_iot_origin: None,
            attack_kind: None,
            verdict: None,
            detections: Vec::new(),
            explanation: String::new(),
            error: None,
            step_trace: Vec::new(),
        }
    }

    /// Whether the finding counts as traffic from a confirmed IoT device.
    pub fn is_confirmed_iot(&self) -> bool {
        self.entity.is_some() && self.is_iot_origin == Some(true)
    }

    /// The detected attack, if a detector fired.
    pub fn attack(&self) -> Option<AttackKind> {
        self.attack_kind.filter(|_| self.verdict == Some(true))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("finding serializes")
    }
}

#[derive(Debug, Error)]
pub enum FindingsIoError {
    #[error("findings line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub fn parse_findings(text: &str) -> Result<Vec<Finding>, FindingsIoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| FindingsIoError::Malformed {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn read_findings(path: impl AsRef<Path>) -> Result<Vec<Finding>, FindingsIoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| FindingsIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_findings(&text)
}

pub fn write_findings(path: impl AsRef<Path>, findings: &[Finding]) -> Result<(), FindingsIoError> {
    let path = path.as_ref();
    let io = |source| FindingsIoError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for finding in findings {
        writeln!(f, "{}", finding.to_json_line()).map_err(io)?;
    }
    f.flush().map_err(io)
}

/// Counts of confirmed-IoT findings by vendor, type and month, and of
/// detected attacks by kind.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FindingsReport {
    pub findings: usize,
    pub confirmed: usize,
    pub errors: usize,
    pub by_vendor: BTreeMap<String, usize>,
    pub by_type: BTreeMap<String, usize>,
    pub by_attack: BTreeMap<AttackKind, usize>,
    /// `YYYY-MM` (UTC) of the flow timestamp.
    pub by_month: BTreeMap<String, usize>,
}

impl FindingsReport {
    pub fn from_findings(findings: &[Finding]) -> Self {
        let mut r = FindingsReport {
            findings: findings.len(),
            by_attack: AttackKind::ALL.into_iter().map(|k| (k, 0)).collect(),
            ..Default::default()
        };
        for f in findings {
            if f.error.is_some() {
                r.errors += 1;
            }
            if !f.is_confirmed_iot() {
                continue;
            }
            r.confirmed += 1;
            let e = f.entity.as_ref().expect("confirmed findings carry an entity");
            let unknown = || "(unknown)".to_string();
            *r.by_vendor.entry(e.vendor.clone().unwrap_or_else(unknown)).or_default() += 1;
            *r.by_type.entry(e.dev_type.clone().unwrap_or_else(unknown)).or_default() += 1;
            *r.by_month.entry(month_of(f.timestamp)).or_default() += 1;
            if let Some(kind) = f.attack() {
                *r.by_attack.entry(kind).or_default() += 1;
            }
        }
        r
    }

    /// Plain-text tables; rows sorted by count (descending) then key.
    pub fn render(&self) -> String {
        fn table(out: &mut String, title: &str, rows: Vec<(String, usize)>) {
            let mut rows = rows;
            rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let total: usize = rows.iter().map(|r| r.1).sum();
            out.push_str(&format!("[{title}]\n"));
            for (k, n) in rows {
                out.push_str(&format!("{k}\t{n}\n"));
            }
            out.push_str(&format!("total\t{total}\n\n"));
        }
        let mut out = format!(
            "findings\t{}\nconfirmed_iot\t{}\nerrors\t{}\n\n",
            self.findings, self.confirmed, self.errors
        );
        let owned = |m: &BTreeMap<String, usize>| m.iter().map(|(k, v)| (k.clone(), *v)).collect();
        table(&mut out, "vendor", owned(&self.by_vendor));
        table(&mut out, "type", owned(&self.by_type));
        let attacks = self.by_attack.iter().map(|(k, v)| (k.name().to_string(), *v)).collect();
        table(&mut out, "attack", attacks);
        // Months read best in calendar order.
        out.push_str("[month]\n");
        for (m, n) in &self.by_month {
            out.push_str(&format!("{m}\t{n}\n"));
        }
        out.push_str(&format!("total\t{}\n", self.by_month.values().sum::<usize>()));
        out
    }

    /// `table.key=count` lines.
    pub fn to_records(&self) -> String {
        let mut out = format!(
            "findings={}\nconfirmed_iot={}\nerrors={}\n",
            self.findings, self.confirmed, self.errors
        );
        for (k, n) in &self.by_vendor {
            out.push_str(&format!("vendor.{k}={n}\n"));
        }
        for (k, n) in &self.by_type {
            out.push_str(&format!("type.{k}={n}\n"));
        }
        for (k, n) in &self.by_attack {
            out.push_str(&format!("attack.{k}={n}\n"));
        }
        for (k, n) in &self.by_month {
            out.push_str(&format!("month.{k}={n}\n"));
        }
        out
    }
}

fn month_of(ts: f64) -> String {
    chrono::DateTime::from_timestamp(ts.floor() as i64, 0)
        .map(|d| d.format("%Y-%m").to_string())
        .unwrap_or_else(|| "(invalid)".to_string())
}
