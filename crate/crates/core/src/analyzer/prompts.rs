use super::{AttackKind, Step};

/// A versioned prompt with `<SLOT>` placeholders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub step: Step,
    pub text: &'static str,
}

macro_rules! template {
    ($name:literal, $step:expr, $file:literal) => {
        PromptTemplate {
            name: $name,
            step: $step,
            text: include_str!(concat!("../../assets/prompts/", $file)),
        }
    };
}

pub const ENTITIES: PromptTemplate = template!("device-entity-recognition", Step::I, "step1_entities.txt");
pub const VERIFY: PromptTemplate = template!("entity-self-verification", Step::II, "step2_verify.txt");
pub const RAG: PromptTemplate = template!("entity-completion", Step::III, "step3_rag.txt");
pub const ORIGIN: PromptTemplate = template!("iot-origin-confirmation", Step::IV, "step4_origin.txt");
pub const COMMAND_INJECTION: PromptTemplate =
    template!("command-injection", Step::V, "step5_command_injection.txt");
pub const INFORMATION_DISCLOSURE: PromptTemplate =
    template!("information-disclosure", Step::V, "step5_information_disclosure.txt");
pub const PATH_TRAVERSAL: PromptTemplate = template!("path-traversal", Step::V, "step5_path_traversal.txt");
pub const FTP_ANOMALY: PromptTemplate = template!("ftp-anomaly", Step::V, "step5_ftp_anomaly.txt");

pub const TEMPLATES: [PromptTemplate; 8] = [
    ENTITIES,
    VERIFY,
    RAG,
    ORIGIN,
    COMMAND_INJECTION,
    INFORMATION_DISCLOSURE,
    PATH_TRAVERSAL,
    FTP_ANOMALY,
];

pub(crate) fn detector_template(kind: AttackKind) -> PromptTemplate {
    match kind {
        AttackKind::CommandInjection => COMMAND_INJECTION,
        AttackKind::InformationDisclosure => INFORMATION_DISCLOSURE,
        AttackKind::PathTraversal => PATH_TRAVERSAL,
        AttackKind::FtpAnomaly => FTP_ANOMALY,
    }
}

/// Substitutes `<NAME>` slots in one pass, so slot-like text inside the
/// substituted values is left alone. Unknown slots are kept verbatim.
pub fn render(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + slots.iter().map(|s| s.1.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('<') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let hit = tail.find('>').and_then(|close| {
            let name = &tail[1..close];
            slots.iter().find(|(k, _)| *k == name).map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &tail[close + 1..];
            }
            None => {
                out.push('<');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Step named in a rendered prompt's header line.
pub fn prompt_step(prompt: &str) -> Option<Step> {
    let header = prompt.lines().next()?.strip_prefix("### step ")?;
    header.split(':').next()?.parse().ok()
}

/// Template a rendered prompt came from, by its header line.
pub(crate) fn prompt_template(prompt: &str) -> Option<PromptTemplate> {
    let header = prompt.lines().next()?;
    TEMPLATES.into_iter().find(|t| t.text.lines().next() == Some(header))
}

/// Text between the input markers of a rendered prompt.
pub(crate) fn prompt_input(prompt: &str) -> &str {
    const BEGIN: &str = "----- BEGIN INPUT -----\n";
    const END: &str = "\n----- END INPUT -----";
    let start = prompt.find(BEGIN).map(|i| i + BEGIN.len()).unwrap_or(0);
    let end = prompt.rfind(END).filter(|&e| e >= start).unwrap_or(prompt.len());
    &prompt[start..end]
}
