#![no_main]

use causalstruct::grammar::parse_prompt;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = parse_prompt(text) {
        for e in p.graph.edges() {
            assert!(p.graph.nodes().contains_key(&e.subject));
            assert!(p.graph.nodes().contains_key(&e.target));
        }
    }
});
