#![no_main]

use libfuzzer_sys::fuzz_target;
use trunc_ising::graph::{parse_graph, serialize_graph};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(graph) = parse_graph(text) {
        let again = parse_graph(&serialize_graph(&graph)).expect("serialized graph must parse");
        assert_eq!(again, graph);
    }
});
