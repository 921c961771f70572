#![no_main]

use libfuzzer_sys::fuzz_target;
use proxnav::harness::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ScenarioConfig::from_json(text) {
        // accepted configs must round-trip and build their derived parts
        let back = ScenarioConfig::from_json(&cfg.to_json()).expect("round trip");
        assert_eq!(back, cfg);
        let _ = cfg.controller();
        let _ = cfg.n_steps();
    }
});
