use thiserror::Error;

pub const DVRIP_HEADER_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DvripError {
    #[error("truncated-header: {0} bytes, need 20")]
    TruncatedHeader(usize),
    #[error("truncated-payload: data length {declared}, {available} bytes follow the header")]
    TruncatedPayload { declared: u32, available: usize },
    #[error("payload of {0} bytes does not fit the 32-bit length field")]
    PayloadTooLarge(usize),
}

/// A DVRIP-style packet.
///
/// Wire layout (multi-byte fields little-endian): 0 head flag, 1 version,
/// 2-3 reserved, 4-7 session, 8-11 sequence, 12-13 reserved, 14-15 message
/// id, 16-19 data length, then the payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DvripHeader {
    pub head_flag: u8,
    pub version: u8,
    pub reserved_a: [u8; 2],
    pub session: u32,
    pub sequence: u32,
    pub reserved_b: [u8; 2],
    pub message_id: u16,
    pub data_length: u32,
    pub payload: Vec<u8>,
}

impl DvripHeader {
    /// A packet with zeroed reserved bytes and `data_length` taken from the
    /// payload.
    pub fn new(head_flag: u8, version: u8, session: u32, sequence: u32, message_id: u16, payload: Vec<u8>) -> Self {
        DvripHeader {
            head_flag,
            version,
            reserved_a: [0; 2],
            session,
            sequence,
            reserved_b: [0; 2],
            message_id,
            data_length: payload.len() as u32,
            payload,
        }
    }
}

fn le32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().expect("4 bytes"))
}

/// Decodes one packet from the front of `bytes`. Bytes past the declared
/// payload are ignored.
pub fn parse_dvrip(bytes: &[u8]) -> Result<DvripHeader, DvripError> {
    if bytes.len() < DVRIP_HEADER_LEN {
        return Err(DvripError::TruncatedHeader(bytes.len()));
    }
    let data_length = le32(&bytes[16..20]);
    let rest = &bytes[DVRIP_HEADER_LEN..];
    if data_length as usize > rest.len() {
        return Err(DvripError::TruncatedPayload {
            declared: data_length,
            available: rest.len(),
        });
    }
    Ok(DvripHeader {
        head_flag: bytes[0],
        version: bytes[1],
        reserved_a: [bytes[2], bytes[3]],
        session: le32(&bytes[4..8]),
        sequence: le32(&bytes[8..12]),
        reserved_b: [bytes[12], bytes[13]],
        message_id: u16::from_le_bytes([bytes[14], bytes[15]]),
        data_length,
        payload: rest[..data_length as usize].to_vec(),
    })
}

/// Encodes a packet. The length field is written from the payload, so a
/// header whose `data_length` disagrees is corrected on the wire.
pub fn encode_dvrip(h: &DvripHeader) -> Result<Vec<u8>, DvripError> {
    let len = u32::try_from(h.payload.len()).map_err(|_| DvripError::PayloadTooLarge(h.payload.len()))?;
    let mut out = Vec::with_capacity(DVRIP_HEADER_LEN + h.payload.len());
    out.push(h.head_flag);
    out.push(h.version);
    out.extend_from_slice(&h.reserved_a);
    out.extend_from_slice(&h.session.to_le_bytes());
    out.extend_from_slice(&h.sequence.to_le_bytes());
    out.extend_from_slice(&h.reserved_b);
    out.extend_from_slice(&h.message_id.to_le_bytes());
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&h.payload);
    Ok(out)
}
