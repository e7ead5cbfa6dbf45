#![no_main]

use causalstruct::oracle::decode_truth;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = decode_truth(text) {
        t.validate().expect("decoded truth validates");
    }
});
