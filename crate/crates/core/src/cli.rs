//! The `exitlens` command line.
//!
//! Exit status: 0 success, 1 usage error, 2 data error. Each invocation
//! writes one JSON run manifest, to stderr or to `--manifest <path>`.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::analyzer::{self, BackendConfig, FindingsReport, NoRetriever, Retriever, RetrieverConfig};
use crate::consensus::{extract_or_ipset, read_roster};
use crate::planner::{plan_deployment, read_options, PlanError};
use crate::simulator::{self, Scenario, SimError};
use crate::traffic::{
    match_signatures, parse_asn_list, parse_asn_map, parse_top1m, read_flows, read_signatures, triage_flow,
    FilterReason, FilterTables, FlowRecord,
};
use crate::weights::{compute_weights, WeightError};

#[derive(Debug, Parser)]
#[command(name = "exitlens", version, about = "Exit relay placement and exit-traffic analysis")]
struct Cli {
    /// Write the run manifest here instead of stderr.
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Emit flat key=value records instead of tables.
    #[arg(long, global = true)]
    records: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Position weights and case label for a roster.
    Weights { roster: PathBuf },
    /// Greedy budget-constrained exit deployment.
    Plan {
        roster: PathBuf,
        options: PathBuf,
        /// Desired probability that some circuit exits through the plan.
        #[arg(long)]
        pc: f64,
        /// Monthly budget.
        #[arg(long)]
        budget: f64,
        /// Attacker circuit count.
        #[arg(long)]
        circuits: u64,
    },
    /// Monte Carlo check of the closed-form hit probability.
    Simulate {
        scenario: PathBuf,
        /// Spread trials over threads (same result as sequential).
        #[arg(long)]
        parallel: bool,
    },
    /// Classify and filter captured flows.
    Triage {
        roster: PathBuf,
        flows: PathBuf,
        #[arg(long)]
        top1m: PathBuf,
        #[arg(long = "asn-map")]
        asn_map: PathBuf,
        #[arg(long = "hosting-asns")]
        hosting_asns: PathBuf,
        #[arg(long)]
        sigs: PathBuf,
        /// Where to write the kept flows.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the five-step analysis over kept flows.
    Analyze {
        flows: PathBuf,
        #[arg(long)]
        backend: PathBuf,
        /// Retriever config; without it searches return nothing.
        #[arg(long)]
        retriever: Option<PathBuf>,
        /// Where to write the findings.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate findings by vendor, type, attack and month.
    Report { findings: PathBuf },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) => m,
        }
    }
}

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

/// Record of one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, String>,
    pub tool_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub started: String,
    pub finished: String,
    pub exit_status: i32,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            parameters: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            started: now(),
            finished: String::new(),
            exit_status: 0,
        }
    }

    fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.into(), path.display().to_string());
    }

    fn param(&mut self, name: &str, value: impl ToString) {
        self.parameters.insert(name.into(), value.to_string());
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Runs the CLI with explicit streams and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            let mut m = RunManifest::new(&args.get(1).map(|a| a.to_string_lossy().into_owned()).unwrap_or_default());
            m.finished = now();
            m.exit_status = code;
            let _ = writeln!(err, "{}", serde_json::to_string(&m).expect("manifest serializes"));
            return code;
        }
    };

    let mut manifest = RunManifest::new(command_name(&cli.command));
    manifest.param("records", cli.records);
    let result = dispatch(&cli, &mut manifest, out);
    let code = match &result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    };
    manifest.finished = now();
    manifest.exit_status = code;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    match &cli.manifest {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json + "\n") {
                let _ = writeln!(err, "error: writing manifest {}: {e}", path.display());
                return if code == 0 { 2 } else { code };
            }
        }
        None => {
            let _ = writeln!(err, "{json}");
        }
    }
    code
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Weights { .. } => "weights",
        Command::Plan { .. } => "plan",
        Command::Simulate { .. } => "simulate",
        Command::Triage { .. } => "triage",
        Command::Analyze { .. } => "analyze",
        Command::Report { .. } => "report",
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(data)
}

fn dispatch(cli: &Cli, m: &mut RunManifest, out: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Weights { roster } => {
            m.input("roster", roster);
            emit(out, &cmd_weights(roster, cli.records)?)
        }
        Command::Plan {
            roster,
            options,
            pc,
            budget,
            circuits,
        } => {
            m.input("roster", roster);
            m.input("options", options);
            m.param("pc", pc);
            m.param("budget", budget);
            m.param("circuits", circuits);
            emit(out, &cmd_plan(roster, options, *pc, *budget, *circuits, cli.records)?)
        }
        Command::Simulate { scenario, parallel } => {
            m.input("scenario", scenario);
            m.param("parallel", parallel);
            emit(out, &cmd_simulate(scenario, *parallel, cli.records, m)?)
        }
        Command::Triage {
            roster,
            flows,
            top1m,
            asn_map,
            hosting_asns,
            sigs,
            out: kept,
        } => {
            for (k, p) in [
                ("roster", roster),
                ("flows", flows),
                ("top1m", top1m),
                ("asn_map", asn_map),
                ("hosting_asns", hosting_asns),
                ("sigs", sigs),
            ] {
                m.input(k, p);
            }
            m.param("out", kept.display());
            let paths = TriagePaths {
                roster,
                flows,
                top1m,
                asn_map,
                hosting_asns,
                sigs,
                out: kept,
            };
            emit(out, &cmd_triage(&paths, cli.records)?)
        }
        Command::Analyze {
            flows,
            backend,
            retriever,
            out: dest,
        } => {
            m.input("flows", flows);
            m.input("backend", backend);
            if let Some(r) = retriever {
                m.input("retriever", r);
            }
            m.param("out", dest.display());
            emit(out, &cmd_analyze(flows, backend, retriever.as_deref(), dest, m)?)
        }
        Command::Report { findings } => {
            m.input("findings", findings);
            let list = analyzer::read_findings(findings).map_err(data)?;
            let report = FindingsReport::from_findings(&list);
            emit(out, &if cli.records { report.to_records() } else { report.render() })
        }
    }
}

fn weight_failure(e: WeightError) -> Failure {
    Failure::Data(e.to_string())
}

fn cmd_weights(roster: &Path, records: bool) -> Result<String, Failure> {
    let state = read_roster(roster).map_err(data)?;
    let (w, eval) = compute_weights(&state).map_err(weight_failure)?;
    let b = state.bandwidths();
    let mut s = String::new();
    if records {
        let _ = writeln!(s, "case={}", w.case);
        for (name, v) in w.named() {
            let _ = writeln!(s, "{name}={v}");
        }
        for (k, v) in [
            ("B", b.total),
            ("B_e", b.pure_entry),
            ("B_x", b.pure_exit),
            ("B_d", b.entry_exit),
            ("B_n", b.neither),
        ] {
            let _ = writeln!(s, "{k}={v}");
        }
    } else {
        let _ = writeln!(s, "case {}", w.case);
        for (name, v) in w.named() {
            let _ = writeln!(s, "{name} {v:.6}");
        }
        let _ = writeln!(
            s,
            "bandwidth B={:.4} B_e={:.4} B_x={:.4} B_d={:.4} B_n={:.4} B/3={:.4}",
            b.total, b.pure_entry, b.pure_exit, b.entry_exit, b.neither, eval.third
        );
        let _ = writeln!(s, "nodes {} addresses {}", state.node_count(), state.distinct_address_count());
    }
    Ok(s)
}

fn cmd_plan(roster: &Path, options: &Path, pc: f64, budget: f64, circuits: u64, records: bool) -> Result<String, Failure> {
    let state = read_roster(roster).map_err(data)?;
    let opts = read_options(options).map_err(data)?;
    let plan = plan_deployment(&state, &opts, pc, budget, circuits).map_err(|e| match e {
        PlanError::InvalidInput(m) => Failure::Usage(m),
        other => data(other),
    })?;
    Ok(if records { plan.to_records() } else { plan.report() })
}

fn cmd_simulate(scenario: &Path, parallel: bool, records: bool, m: &mut RunManifest) -> Result<String, Failure> {
    let sc = Scenario::read(scenario).map_err(data)?;
    m.input("roster", &sc.roster);
    m.seed = Some(sc.seed);
    m.param("circuits", sc.circuits);
    m.param("trials", sc.trials);
    m.param("rng", simulator::RNG_ALGORITHM);
    let state = sc.load_state().map_err(data)?;
    let (w, _) = compute_weights(&state).map_err(weight_failure)?;
    let cfg = sc.config();
    let sim_failure = |e: SimError| match e {
        SimError::InvalidConfig(msg) => Failure::Usage(msg),
        other => data(other),
    };
    let result = if parallel {
        simulator::run_parallel(&state, &w, &cfg)
    } else {
        simulator::run(&state, &w, &cfg)
    }
    .map_err(sim_failure)?;
    let analytic = simulator::analytic_pc(&state, &w, &cfg).map_err(sim_failure)?;
    let z = if result.stderr > 0.0 {
        (result.empirical_pc - analytic).abs() / result.stderr
    } else {
        0.0
    };
    let mut s = String::new();
    if records {
        let _ = writeln!(s, "trials={}\nhit_trials={}", result.trials, result.hit_trials);
        let _ = writeln!(s, "empirical_pc={}\nstderr={}\nanalytic_pc={}", result.empirical_pc, result.stderr, analytic);
        let _ = writeln!(s, "rng={}\ncanonical={}", result.rng_algorithm, result.canonical);
    } else {
        let _ = writeln!(s, "case {} circuits {} trials {}", w.case, sc.circuits, result.trials);
        let _ = writeln!(
            s,
            "empirical_pc {:.6} stderr {:.6} analytic_pc {:.6} |diff|/stderr {:.2}",
            result.empirical_pc, result.stderr, analytic, z
        );
        let _ = writeln!(s, "rng {} canonical {}", result.rng_algorithm, result.canonical);
    }
    Ok(s)
}

struct TriagePaths<'a> {
    roster: &'a Path,
    flows: &'a Path,
    top1m: &'a Path,
    asn_map: &'a Path,
    hosting_asns: &'a Path,
    sigs: &'a Path,
    out: &'a Path,
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn cmd_triage(p: &TriagePaths<'_>, records: bool) -> Result<String, Failure> {
    let state = read_roster(p.roster).map_err(data)?;
    let or_set = extract_or_ipset(&state);
    let flows = read_flows(p.flows).map_err(data)?;
    let tables = FilterTables {
        top1m: parse_top1m(&read(p.top1m)?),
        hosting_asns: parse_asn_list(&read(p.hosting_asns)?).map_err(data)?,
        asn_map: parse_asn_map(&read(p.asn_map)?).map_err(data)?,
    };
    let sigs = read_signatures(p.sigs).map_err(data)?;

    let mut counts: BTreeMap<FilterReason, usize> = FilterReason::ALL.into_iter().map(|r| (r, 0)).collect();
    let mut kept: Vec<&FlowRecord> = Vec::new();
    let mut misses = 0usize;
    for f in &flows {
        let v = triage_flow(f, &or_set, &tables);
        *counts.entry(v.reason).or_default() += 1;
        misses += usize::from(v.asn_lookup_miss);
        if v.keep {
            kept.push(f);
        }
    }
    let mut kept_text = String::new();
    for f in &kept {
        kept_text.push_str(&f.to_json_line());
        kept_text.push('\n');
    }
    std::fs::write(p.out, kept_text).map_err(|e| Failure::Data(format!("{}: {e}", p.out.display())))?;

    let mut s = String::new();
    if records {
        let _ = writeln!(s, "flows={}", flows.len());
        for (r, n) in &counts {
            let _ = writeln!(s, "reason.{r}={n}");
        }
        let _ = writeln!(s, "asn_lookup_miss={misses}");
    } else {
        let _ = writeln!(s, "flows\t{}", flows.len());
        for (r, n) in &counts {
            let _ = writeln!(s, "{r}\t{n}");
        }
        let _ = writeln!(s, "asn_lookup_miss\t{misses}");
    }
    for f in &kept {
        for hit in match_signatures(f, &sigs) {
            let cve = hit.signature.metadata.get("cve").map(String::as_str).unwrap_or("-");
            if records {
                let _ = writeln!(s, "hit.{}.{}={}", f.id, hit.signature.name, hit.offset);
            } else {
                let _ = writeln!(s, "hit\t{}\t{}\toffset={}\tcve={cve}", f.id, hit.signature.name, hit.offset);
            }
        }
    }
    Ok(s)
}

fn cmd_analyze(
    flows: &Path,
    backend: &Path,
    retriever: Option<&Path>,
    dest: &Path,
    m: &mut RunManifest,
) -> Result<String, Failure> {
    let cfg = BackendConfig::read(backend).map_err(data)?;
    if let Some(seed) = cfg.seed {
        m.seed = Some(seed);
    }
    let backend = cfg.build().map_err(data)?;
    m.param("backend", backend.describe());
    let retriever: Box<dyn Retriever> = match retriever {
        Some(path) => RetrieverConfig::read(path).and_then(|c| c.build()).map_err(data)?,
        None => Box::new(NoRetriever),
    };
    let flows = read_flows(flows).map_err(data)?;
    let findings = analyzer::analyze_flows(&flows, &*backend, &*retriever);
    analyzer::write_findings(dest, &findings).map_err(data)?;
    let errors = findings.iter().filter(|f| f.error.is_some()).count();
    let confirmed = findings.iter().filter(|f| f.is_confirmed_iot()).count();
    let attacks = findings.iter().filter(|f| f.attack().is_some()).count();
    let steps: BTreeSet<_> = findings.iter().filter_map(|f| f.error.as_ref().map(|e| e.step())).collect();
    let mut s = format!(
        "findings\t{}\nconfirmed_iot\t{confirmed}\nattacks\t{attacks}\nerrors\t{errors}\n",
        findings.len()
    );
    if !steps.is_empty() {
        let labels: Vec<_> = steps.iter().map(|s| s.label()).collect();
        let _ = writeln!(s, "error_steps\t{}", labels.join(","));
    }
    Ok(s)
}
