#![no_main]

use libfuzzer_sys::fuzz_target;
use sivc::io::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_toml_str(s) {
            let _ = cfg.delimiter_byte();
            if let Ok(text) = cfg.to_toml_string() {
                assert!(RunConfig::from_toml_str(&text).is_ok());
            }
        }
        let _ = RunConfig::default().overlay_toml(s);
    }
});
