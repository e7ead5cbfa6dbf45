#![no_main]

use causalstruct::layout::{decode_fscene, encode_fscene};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = decode_fscene(text) {
        assert_eq!(decode_fscene(&encode_fscene(&f)).expect("re-decode"), f);
    }
});
