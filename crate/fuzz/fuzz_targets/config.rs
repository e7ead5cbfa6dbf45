#![no_main]

use causalstruct::config::decode_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = decode_config(text) {
        c.validate().expect("decoded config validates");
    }
});
