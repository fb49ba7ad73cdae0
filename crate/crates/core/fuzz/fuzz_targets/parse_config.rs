#![no_main]

use libfuzzer_sys::fuzz_target;
use micv::experiment::config::parse_sections;
use micv::experiment::ExperimentConfig;

fuzz_target!(|text: &str| {
    let _ = parse_sections(text);
    if let Ok(config) = ExperimentConfig::parse(text, None) {
        let again = ExperimentConfig::parse(&config.to_text(), None).expect("canonical text parses");
        assert_eq!(again, config);
    }
});
