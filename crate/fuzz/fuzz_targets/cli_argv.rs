#![no_main]

use clap::Parser;
use libfuzzer_sys::fuzz_target;
use spinrelax_cli::{parse_assignment, Cli};

// Arguments are NUL-separated. Only parsing is exercised; running a command
// would touch the file system.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let args = std::iter::once("spinrelax").chain(text.split('\0'));
    let _ = Cli::try_parse_from(args);
    for part in text.split('\0') {
        if let Ok((name, value)) = parse_assignment(part) {
            assert!(!name.is_empty());
            assert!(value.is_finite());
        }
    }
});
