#![no_main]

use libfuzzer_sys::fuzz_target;
use trunc_ising::cnf::{parse_dimacs, serialize_dimacs};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(formula) = parse_dimacs(text) {
        let again = parse_dimacs(&serialize_dimacs(&formula)).expect("serialized formula must parse");
        assert_eq!(again, formula);
    }
});
