#![no_main]

use libfuzzer_sys::fuzz_target;
use spinrelax::io::trace_csv::parse_metadata_line;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else {
        return;
    };
    if let Some((k, v)) = parse_metadata_line(line) {
        assert_eq!(k, k.trim());
        assert_eq!(v, v.trim());
    }
});
