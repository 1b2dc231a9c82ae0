use rayon::prelude::*;

use super::backend::{fingerprint, CompletionBackend, Retriever};
use super::grammar::{parse_entity_records, parse_yes_no, quoted_fragments, EntityRecord};
use super::prompts::{self, detector_template, render};
use super::{AnalyzerError, AttackKind, DeviceEntity, Finding, Step, TraceEntry};
use crate::traffic::{FlowRecord, Protocol};

/// A step's value together with the trace entries it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub value: T,
    pub trace: Vec<TraceEntry>,
}

/// Error plus whatever trace was gathered before it.
type StepResult<T> = Result<StepOutcome<T>, (AnalyzerError, Vec<TraceEntry>)>;

fn ask(step: Step, prompt: &str, backend: &dyn CompletionBackend) -> Result<(String, TraceEntry), (AnalyzerError, Vec<TraceEntry>)> {
    let fp = fingerprint(prompt);
    match backend.complete(prompt) {
        Ok(raw) => {
            let entry = TraceEntry {
                step,
                fingerprint: Some(fp),
                output: raw.clone(),
                notes: Vec::new(),
            };
            Ok((raw, entry))
        }
        Err(e) => {
            let entry = TraceEntry {
                step,
                fingerprint: Some(fp),
                output: String::new(),
                notes: vec![format!("backend error: {e}")],
            };
            Err((
                AnalyzerError::Backend {
                    step,
                    message: e.to_string(),
                },
                vec![entry],
            ))
        }
    }
}

fn malformed(step: Step, reason: String, raw: &str, entry: TraceEntry) -> (AnalyzerError, Vec<TraceEntry>) {
    (
        AnalyzerError::Malformed {
            step,
            reason,
            raw: raw.to_string(),
        },
        vec![entry],
    )
}

fn precondition(step: Step, reason: &str) -> (AnalyzerError, Vec<TraceEntry>) {
    (
        AnalyzerError::Precondition {
            step,
            reason: reason.to_string(),
        },
        Vec::new(),
    )
}

/// Groups VENDOR/TYPE/MODEL records into entities. A label that repeats
/// within the current group starts a new entity. Other labels are skipped
/// and reported.
fn group_entities(records: &[EntityRecord]) -> (Vec<DeviceEntity>, Vec<String>) {
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    let mut cur = DeviceEntity::default();
    for r in records {
        let value = r.e.trim();
        if value.is_empty() {
            skipped.push(format!("empty value for label `{}`", r.t));
            continue;
        }
        let slot = match r.t.trim().to_ascii_uppercase().as_str() {
            "VENDOR" => 0,
            "TYPE" => 1,
            "MODEL" => 2,
            _ => {
                skipped.push(format!("unknown label `{}` ({value})", r.t));
                continue;
            }
        };
        let field = match slot {
            0 => &mut cur.vendor,
            1 => &mut cur.dev_type,
            _ => &mut cur.model,
        };
        if field.is_some() {
            out.push(std::mem::take(&mut cur));
        }
        let field = match slot {
            0 => &mut cur.vendor,
            1 => &mut cur.dev_type,
            _ => &mut cur.model,
        };
        *field = Some(value.to_string());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    (out, skipped)
}

/// Step I: device entities named in the response.
pub fn recognize_entities(response_text: &str, backend: &dyn CompletionBackend) -> StepResult<Vec<DeviceEntity>> {
    if response_text.trim().is_empty() {
        return Err(precondition(Step::I, "empty response text"));
    }
    let prompt = render(prompts::ENTITIES.text, &[("RESPONSE_DATA", response_text)]);
    let (raw, mut entry) = ask(Step::I, &prompt, backend)?;
    let records = parse_entity_records(&raw).map_err(|r| malformed(Step::I, r, &raw, entry.clone()))?;
    let (entities, skipped) = group_entities(&records);
    entry.notes.extend(skipped);
    Ok(StepOutcome {
        value: entities,
        trace: vec![entry],
    })
}

/// Step II: keeps the entities the backend confirms as a whole.
pub fn self_verify(entities: &[DeviceEntity], context: &str, backend: &dyn CompletionBackend) -> StepResult<Vec<DeviceEntity>> {
    if entities.is_empty() {
        return Err(precondition(Step::II, "no entities to verify"));
    }
    let listing: Vec<String> = entities.iter().enumerate().map(|(i, e)| format!("{i}: {}", e.describe())).collect();
    let prompt = render(
        prompts::VERIFY.text,
        &[("ENTITIES", &listing.join("\n")), ("RESPONSE_DATA", context)],
    );
    let (raw, entry) = ask(Step::II, &prompt, backend)?;
    let records = parse_entity_records(&raw).map_err(|r| malformed(Step::II, r, &raw, entry.clone()))?;
    let mut answers: Vec<Option<bool>> = vec![None; entities.len()];
    for r in &records {
        let idx: usize = r
            .t
            .trim()
            .parse()
            .map_err(|_| malformed(Step::II, format!("`{}` is not an entity index", r.t), &raw, entry.clone()))?;
        let slot = answers
            .get_mut(idx)
            .ok_or_else(|| malformed(Step::II, format!("entity index {idx} out of range"), &raw, entry.clone()))?;
        let yes = parse_yes_no(&r.e).map_err(|e| malformed(Step::II, e, &raw, entry.clone()))?.yes;
        if slot.replace(yes).is_some() {
            return Err(malformed(Step::II, format!("entity {idx} answered twice"), &raw, entry));
        }
    }
    if let Some(missing) = answers.iter().position(Option::is_none) {
        return Err(malformed(Step::II, format!("no answer for entity {missing}"), &raw, entry));
    }
    let kept = entities
        .iter()
        .zip(&answers)
        .filter(|(_, a)| **a == Some(true))
        .map(|(e, _)| e.clone())
        .collect();
    Ok(StepOutcome {
        value: kept,
        trace: vec![entry],
    })
}

/// Step III: fills a missing vendor or type from search results for the
/// model. Present fields are never overwritten.
pub fn rag_complete(entity: &DeviceEntity, retriever: &dyn Retriever, backend: &dyn CompletionBackend) -> StepResult<DeviceEntity> {
    let Some(model) = entity.model.as_deref() else {
        return Err(precondition(Step::III, "entity has no model"));
    };
    if entity.vendor.is_some() && entity.dev_type.is_some() {
        return Err(precondition(Step::III, "entity is already complete"));
    }
    let hits = retriever.search(model).map_err(|e| (AnalyzerError::Retrieval(e.to_string()), Vec::new()))?;
    if hits.is_empty() {
        let entry = TraceEntry {
            step: Step::III,
            fingerprint: None,
            output: String::new(),
            notes: vec![format!("no search results for `{model}`; entity unchanged")],
        };
        return Ok(StepOutcome {
            value: entity.clone(),
            trace: vec![entry],
        });
    }
    let docs: Vec<String> = hits.iter().map(|h| format!("[{}] {}", h.title, h.snippet)).collect();
    let known = entity.describe();
    let prompt = render(
        prompts::RAG.text,
        &[("MODEL", model), ("KNOWN", &known), ("SNIPPETS", &docs.join("\n"))],
    );
    let (raw, mut entry) = ask(Step::III, &prompt, backend)?;
    let records = parse_entity_records(&raw).map_err(|r| malformed(Step::III, r, &raw, entry.clone()))?;
    let mut out = entity.clone();
    for r in records {
        let value = r.e.trim();
        let field = match r.t.trim().to_ascii_uppercase().as_str() {
            "VENDOR" => &mut out.vendor,
            "TYPE" => &mut out.dev_type,
            other => {
                entry.notes.push(format!("ignored label `{other}`"));
                continue;
            }
        };
        if field.is_none() && !value.is_empty() {
            *field = Some(value.to_string());
        }
    }
    Ok(StepOutcome {
        value: out,
        trace: vec![entry],
    })
}

/// Step IV: whether the response was produced by the device itself.
pub fn confirm_origin(response_text: &str, entity: &DeviceEntity, backend: &dyn CompletionBackend) -> StepResult<bool> {
    if entity.is_empty() {
        return Err(precondition(Step::IV, "empty entity"));
    }
    let prompt = render(
        prompts::ORIGIN.text,
        &[("ENTITY", &entity.describe()), ("RESPONSE_DATA", response_text)],
    );
    let (raw, entry) = ask(Step::IV, &prompt, backend)?;
    let answer = parse_yes_no(&raw).map_err(|r| malformed(Step::IV, r, &raw, entry.clone()))?;
    Ok(StepOutcome {
        value: answer.yes,
        trace: vec![entry],
    })
}

/// Result of one Step V detector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detection {
    pub kind: AttackKind,
    /// True means an attack or anomaly is present, for every kind.
    pub verdict: bool,
    /// The backend's literal leading token.
    pub literal_yes: bool,
    pub explanation: String,
}

/// Step V for one attack kind. For `ftp_anomaly` the prompt asks whether
/// the session is normal, so the verdict is the negated answer.
///
/// `input_text` is the request (command injection, path traversal), the
/// request and response joined by the prompt (information disclosure), or
/// the FTP transcript.
pub fn detect_attack(kind: AttackKind, input_text: &str, backend: &dyn CompletionBackend) -> StepResult<Detection> {
    detect_with(kind, &[input_text], backend)
}

fn detect_with(kind: AttackKind, parts: &[&str], backend: &dyn CompletionBackend) -> StepResult<Detection> {
    if parts.iter().any(|p| p.trim().is_empty()) {
        return Err(precondition(Step::V, &format!("{kind}: empty input")));
    }
    let slots: Vec<(&str, &str)> = match (kind, parts) {
        (AttackKind::InformationDisclosure, [req, resp]) => vec![("REQUEST", req), ("RESPONSE", resp)],
        (AttackKind::InformationDisclosure, [joined]) => vec![("REQUEST", joined), ("RESPONSE", "")],
        (AttackKind::FtpAnomaly, [t, ..]) => vec![("FTP_DATA", t)],
        (_, [req, ..]) => vec![("REQUEST", req)],
        _ => return Err(precondition(Step::V, "no input")),
    };
    let prompt = render(detector_template(kind).text, &slots);
    let (raw, mut entry) = ask(Step::V, &prompt, backend)?;
    let answer = parse_yes_no(&raw).map_err(|r| malformed(Step::V, r, &raw, entry.clone()))?;
    let verdict = if kind == AttackKind::FtpAnomaly { !answer.yes } else { answer.yes };
    entry.notes.push(format!("detector {kind}: verdict {verdict}"));
    let haystack = parts.concat().to_lowercase();
    let phantom: Vec<String> = quoted_fragments(&answer.explanation)
        .into_iter()
        .filter(|q| q.is_empty() || !haystack.contains(&q.to_lowercase()))
        .collect();
    if !phantom.is_empty() && verdict {
        entry.notes.push(format!(
            "possible backend false positive: explanation quotes {} absent from the input",
            phantom.iter().map(|q| format!("'{q}'")).collect::<Vec<_>>().join(", ")
        ));
    }
    Ok(StepOutcome {
        value: Detection {
            kind,
            verdict,
            literal_yes: answer.yes,
            explanation: answer.explanation,
        },
        trace: vec![entry],
    })
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Runs Steps I to V on one flow. Errors end the run and are stored in
/// the finding.
pub fn run_pipeline(flow: &FlowRecord, backend: &dyn CompletionBackend, retriever: &dyn Retriever) -> Finding {
    let mut finding = Finding::new(flow.id.clone(), flow.timestamp);
    if let Err((err, trace)) = pipeline_steps(flow, backend, retriever, &mut finding) {
        finding.step_trace.extend(trace);
        finding.explanation = format!("stopped: {err}");
        finding.error = Some(err);
    }
    finding
}

fn pipeline_steps(
    flow: &FlowRecord,
    backend: &dyn CompletionBackend,
    retriever: &dyn Retriever,
    f: &mut Finding,
) -> Result<(), (AnalyzerError, Vec<TraceEntry>)> {
    let Some(response) = flow.response_bytes().map(text).filter(|r| !r.trim().is_empty()) else {
        return Err(precondition(Step::I, "flow carries no response data"));
    };

    let step = recognize_entities(&response, backend)?;
    f.step_trace.extend(step.trace);
    if step.value.is_empty() {
        f.explanation = "no device entity recognized".into();
        return Ok(());
    }

    let step = self_verify(&step.value, &response, backend)?;
    f.step_trace.extend(step.trace);
    let Some(mut entity) = step.value.into_iter().next() else {
        f.explanation = "no entity survived verification".into();
        return Ok(());
    };

    if entity.model.is_some() && !(entity.vendor.is_some() && entity.dev_type.is_some()) {
        let step = rag_complete(&entity, retriever, backend)?;
        f.step_trace.extend(step.trace);
        entity = step.value;
    } else {
        f.step_trace.push(TraceEntry {
            step: Step::III,
            fingerprint: None,
            output: String::new(),
            notes: vec!["skipped: no model or entity already complete".into()],
        });
    }
    f.entity = Some(entity.clone());

    let step = confirm_origin(&response, &entity, backend)?;
    f.step_trace.extend(step.trace);
    f.is_iot_origin = Some(step.value);
    if !step.value {
        f.explanation = "response not produced by the device".into();
        return Ok(());
    }

    let request = flow.request_bytes().map(text).filter(|r| !r.trim().is_empty());
    let plan: Vec<(AttackKind, Vec<String>)> = match (flow.protocol, request) {
        (Protocol::Http, Some(req)) => vec![
            (AttackKind::CommandInjection, vec![req.clone()]),
            (AttackKind::PathTraversal, vec![req.clone()]),
            (AttackKind::InformationDisclosure, vec![req, response.clone()]),
        ],
        (Protocol::Ftp, req) => {
            let transcript = match req {
                Some(r) => format!("{r}\n{response}"),
                None => response.clone(),
            };
            vec![(AttackKind::FtpAnomaly, vec![transcript])]
        }
        (p, _) => {
            f.step_trace.push(TraceEntry {
                step: Step::V,
                fingerprint: None,
                output: String::new(),
                notes: vec![format!("no detector applies to {p} flows without a request")],
            });
            f.explanation = "confirmed device traffic; no detector applies".into();
            return Ok(());
        }
    };
    for (kind, parts) in plan {
        let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
        let step = detect_with(kind, &refs, backend)?;
        f.step_trace.extend(step.trace);
        let d = step.value;
        f.detections.push((kind, d.verdict));
        if f.attack_kind.is_none() || d.verdict {
            f.attack_kind = Some(kind);
            f.verdict = Some(d.verdict);
            f.explanation = d.explanation;
        }
        if d.verdict {
            break;
        }
    }
    Ok(())
}

/// [`run_pipeline`] over many flows in parallel; output order follows input.
pub fn analyze_flows(flows: &[FlowRecord], backend: &dyn CompletionBackend, retriever: &dyn Retriever) -> Vec<Finding> {
    flows.par_iter().map(|f| run_pipeline(f, backend, retriever)).collect()
}
