#![no_main]

use libfuzzer_sys::fuzz_target;
use spinrelax::io::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_toml_str(text) {
        let _ = cfg.adapter();
        let _ = cfg.synthetic_spec();
        if let Ok(s) = cfg.to_toml_string() {
            let _ = RunConfig::from_toml_str(&s);
        }
    }
});
