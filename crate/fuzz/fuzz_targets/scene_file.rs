#![no_main]

use causalstruct::graph::{decode_scene, encode_scene, topological_order};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = decode_scene(text) {
        // anything accepted must survive a round trip
        let again = decode_scene(&encode_scene(&g)).expect("re-decode");
        assert_eq!(g, again);
        let _ = topological_order(&g);
    }
});
