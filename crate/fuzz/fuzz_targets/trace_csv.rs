#![no_main]

use libfuzzer_sys::fuzz_target;
use spinrelax::io::{format_trace, parse_trace};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(trace) = parse_trace(text) {
        let again = parse_trace(&format_trace(&trace)).expect("formatted traces parse");
        assert_eq!(format_trace(&again), format_trace(&trace));
    }
});
