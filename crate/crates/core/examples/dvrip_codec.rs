//! Builds and decodes a DVR control packet carrying a debug command.

use exitlens::traffic::{encode_dvrip, parse_dvrip, DvripHeader, DVRIP_HEADER_LEN};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" ")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let payload = br#"{"Name":"OPCmd","OPCmd":{"Cmd":"telnetd -p 9527"},"SessionID":"0x00000002"}"#.to_vec();
    let packet = DvripHeader::new(0xff, 0x01, 2, 0, 1052, payload);
    let wire = encode_dvrip(&packet)?;

    println!("header  {}", hex(&wire[..DVRIP_HEADER_LEN]));
    println!("payload {}", String::from_utf8_lossy(&wire[DVRIP_HEADER_LEN..]));

    let back = parse_dvrip(&wire)?;
    println!(
        "message_id={} data_length={} session={} round-trip={}",
        back.message_id,
        back.data_length,
        back.session,
        back == packet
    );

    match parse_dvrip(&wire[..DVRIP_HEADER_LEN + 4]) {
        Err(e) => println!("truncated capture: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
