#![no_main]

use causalstruct::edit::EditCommand;
use causalstruct::graph::CausalSceneGraph;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let g = CausalSceneGraph::empty();
    let _ = EditCommand::parse_add(&g, text);
    let _ = EditCommand::parse_move(text);
    let _ = EditCommand::parse_rescale(text);
});
