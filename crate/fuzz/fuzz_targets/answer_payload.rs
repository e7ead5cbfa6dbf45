#![no_main]

use causalstruct::oracle::{decode_chat_body, parse_answer_payload};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_answer_payload(text);
    if let Ok(content) = decode_chat_body(text) {
        let _ = parse_answer_payload(&content);
    }
});
