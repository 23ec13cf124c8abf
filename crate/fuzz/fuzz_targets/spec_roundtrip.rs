#![no_main]

use libfuzzer_sys::fuzz_target;
use rbsg_core::harness::{parse_spec, serialize_spec};

// Any spec that parses must survive a serialize/parse cycle unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = parse_spec(text) else { return };
    let rendered = serialize_spec(&spec).expect("resolved specs serialize");
    let back = parse_spec(&rendered).expect("serialized spec parses");
    assert_eq!(back, spec);
});
