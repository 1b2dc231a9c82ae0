use std::fmt;
use std::net::Ipv4Addr;
use std::path::Path;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{read_text, TrafficError};

/// Direction relative to the exit relay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Towards the relay: the source is the remote end.
    Inbound,
    /// Away from the relay: the destination is the remote end.
    Outbound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Http,
    Telnet,
    Ftp,
    Rtsp,
    Other,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Http => "http",
            Protocol::Telnet => "telnet",
            Protocol::Ftp => "ftp",
            Protocol::Rtsp => "rtsp",
            Protocol::Other => "other",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "http" => Protocol::Http,
            "telnet" => Protocol::Telnet,
            "ftp" => Protocol::Ftp,
            "rtsp" => Protocol::Rtsp,
            "other" => Protocol::Other,
            _ => return Err(format!("unknown protocol `{s}`")),
        })
    }
}

/// One captured exchange as seen at the exit.
///
/// `payload` carries the bytes travelling in `direction`. Inbound records
/// may also carry the `request` that triggered them, which the analyzer
/// needs for request-side detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub id: String,
    pub direction: Direction,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub protocol: Protocol,
    pub host_header: Option<String>,
    pub status_code: Option<u16>,
    pub payload: Vec<u8>,
    pub request: Option<Vec<u8>>,
    pub timestamp: f64,
}

impl FlowRecord {
    pub fn validate(&self) -> Result<(), TrafficError> {
        let bad = |reason: &str| TrafficError::InvalidFlow {
            id: self.id.clone(),
            reason: reason.into(),
        };
        if self.id.is_empty() {
            return Err(bad("empty id"));
        }
        if self.status_code.is_some() && self.protocol != Protocol::Http {
            return Err(bad("status_code is only meaningful for http"));
        }
        if !self.timestamp.is_finite() {
            return Err(bad("timestamp must be finite"));
        }
        Ok(())
    }

    /// The address of the non-relay end.
    pub fn remote_ip(&self) -> Ipv4Addr {
        match self.direction {
            Direction::Inbound => self.src_ip,
            Direction::Outbound => self.dst_ip,
        }
    }

    /// Request bytes: the payload of an outbound flow, or the attached
    /// request of an inbound one.
    pub fn request_bytes(&self) -> Option<&[u8]> {
        match self.direction {
            Direction::Outbound => Some(&self.payload),
            Direction::Inbound => self.request.as_deref(),
        }
    }

    /// Response bytes, present only for inbound flows.
    pub fn response_bytes(&self) -> Option<&[u8]> {
        match self.direction {
            Direction::Inbound => Some(&self.payload),
            Direction::Outbound => None,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&WireFlow::from(self)).expect("flow serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self, String> {
        let wire: WireFlow = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let flow = wire.try_into()?;
        Ok(flow)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireFlow {
    id: String,
    direction: Direction,
    src_ip: Ipv4Addr,
    dst_ip: Ipv4Addr,
    protocol: Protocol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    host_header: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    status_code: Option<u16>,
    payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    request: Option<String>,
    timestamp: f64,
}

impl From<&FlowRecord> for WireFlow {
    fn from(f: &FlowRecord) -> Self {
        WireFlow {
            id: f.id.clone(),
            direction: f.direction,
            src_ip: f.src_ip,
            dst_ip: f.dst_ip,
            protocol: f.protocol,
            host_header: f.host_header.clone(),
            status_code: f.status_code,
            payload: B64.encode(&f.payload),
            request: f.request.as_ref().map(|r| B64.encode(r)),
            timestamp: f.timestamp,
        }
    }
}

impl TryFrom<WireFlow> for FlowRecord {
    type Error = String;
    fn try_from(w: WireFlow) -> Result<Self, String> {
        let payload = B64.decode(&w.payload).map_err(|e| format!("payload: {e}"))?;
        let request = w
            .request
            .map(|r| B64.decode(r).map_err(|e| format!("request: {e}")))
            .transpose()?;
        let flow = FlowRecord {
            id: w.id,
            direction: w.direction,
            src_ip: w.src_ip,
            dst_ip: w.dst_ip,
            protocol: w.protocol,
            host_header: w.host_header,
            status_code: w.status_code,
            payload,
            request,
            timestamp: w.timestamp,
        };
        flow.validate().map_err(|e| e.to_string())?;
        Ok(flow)
    }
}

/// Parses a JSON-lines flow file; blank lines are skipped.
pub fn parse_flows(text: &str) -> Result<Vec<FlowRecord>, TrafficError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            FlowRecord::from_json_line(l).map_err(|reason| TrafficError::Malformed {
                what: "flow",
                line: i + 1,
                reason,
            })
        })
        .collect()
}

pub fn read_flows(path: impl AsRef<Path>) -> Result<Vec<FlowRecord>, TrafficError> {
    parse_flows(&read_text(path.as_ref())?)
}
