#![no_main]

use libfuzzer_sys::fuzz_target;
use maxwell_hp::study::StudyConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = StudyConfig::parse(text) {
        // anything the parser accepts must already be valid
        assert!(cfg.validate().is_ok());
        assert!(cfg.levels() >= 1);
    }
});
