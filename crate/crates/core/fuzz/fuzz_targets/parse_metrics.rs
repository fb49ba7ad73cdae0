#![no_main]

use libfuzzer_sys::fuzz_target;
use micv::experiment::report::parse_metrics;

fuzz_target!(|text: &str| {
    if let Ok(rows) = parse_metrics(text) {
        assert!(rows.iter().all(|r| r.value.map_or(true, f64::is_finite)));
    }
});
